//! Angle of the value function at each threshold.
//!
//! At a threshold where `V = E_x Q(extremum)` on the outer side, the jump of
//! `V'` equals the outward slope of the averaging function times the atom of
//! the extremum at zero. The upper threshold uses `Q2` and the atom of `M`;
//! the lower threshold uses the reflected process, i.e. `-Q1` and the atom
//! of `I`. Both are compared against derivatives of the closed form.

use serde::{Deserialize, Serialize};

use crate::value_function::ValueModel;

/// Agreement required between the two angle computations.
pub const ANGLE_TOLERANCE: f64 = 1e-10;
/// A jump below this is treated as smooth pasting.
pub const SMOOTHNESS_TOLERANCE: f64 = 1e-10;

const FD_STEP: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Threshold {
    Lower,
    Upper,
}

/// Angle at one threshold, computed two ways.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleReport {
    pub threshold: Threshold,
    /// Location of the threshold (`-x1` or `x2`).
    pub location: f64,
    /// `V'(x+) - V'(x-)` from the closed form.
    pub direct_jump: f64,
    /// Outward slope of the averaging function times the atom mass.
    pub theorem_jump: f64,
    pub agreement_residual: f64,
    /// Richardson-extrapolated one-sided differences of `value_at`.
    pub finite_difference_jump: f64,
    pub smooth_pasting_holds: bool,
    /// Exponent used for the exponential-moment condition.
    pub moment_exponent: f64,
    /// `psi(moment_exponent) < r`, checked on the relevant side.
    pub exponential_moment_ok: bool,
}

impl AngleReport {
    /// Whether the two computations agree and the moment condition holds.
    pub fn consistent(&self) -> bool {
        self.agreement_residual <= ANGLE_TOLERANCE && self.exponential_moment_ok
    }
}

/// `V'(x+) - V'(x-)` from differentiating the piecewise closed form.
pub fn direct_jump(model: &ValueModel, threshold: Threshold) -> f64 {
    let s = &model.solution;
    let r1 = model.roots.r1;
    let r2 = model.roots.r2;
    let u = s.x1 + s.x2;
    match threshold {
        Threshold::Upper => {
            let inside = -r1 * s.D1 * (-r1 * u).exp() + r2 * s.D2;
            1.0 - inside
        }
        Threshold::Lower => {
            let inside = -r1 * s.D1 + r2 * s.D2 * (-r2 * u).exp();
            inside + 1.0
        }
    }
}

/// Outward slope of the averaging function times the atom of the extremum.
pub fn theorem_jump(model: &ValueModel, threshold: Threshold) -> f64 {
    let s = &model.solution;
    match threshold {
        Threshold::Upper => model.q2_slope(s.x2) * model.supremum_law().atom_mass,
        // Reflected: x -> -x turns Q1 into a non-decreasing function.
        Threshold::Lower => -model.q1_slope(-s.x1) * model.infimum_law().atom_mass,
    }
}

/// Second-order one-sided derivative estimates `(V'(x-), V'(x+))`.
fn one_sided_derivatives(model: &ValueModel, x: f64, h: f64) -> (f64, f64) {
    let v = |y: f64| model.value_at(y);
    let right = (-3.0 * v(x) + 4.0 * v(x + h) - v(x + 2.0 * h)) / (2.0 * h);
    let left = (3.0 * v(x) - 4.0 * v(x - h) + v(x - 2.0 * h)) / (2.0 * h);
    (left, right)
}

/// Finite-difference jump of `V'` at `x`, Richardson-extrapolated over `h`
/// and `h / 2`.
pub fn finite_difference_jump(model: &ValueModel, x: f64, h: f64) -> f64 {
    let coarse = {
        let (l, r) = one_sided_derivatives(model, x, h);
        r - l
    };
    let fine = {
        let (l, r) = one_sided_derivatives(model, x, h / 2.0);
        r - l
    };
    (4.0 * fine - coarse) / 3.0
}

/// Estimated jump of `V'` at an interior point. Expected to vanish: `V` is
/// analytic inside `(-x1, x2)`.
pub fn interior_smoothness_check(model: &ValueModel, x: f64) -> f64 {
    finite_difference_jump(model, x, FD_STEP)
}

pub fn angle_report(model: &ValueModel, threshold: Threshold) -> AngleReport {
    let s = &model.solution;
    let location = match threshold {
        Threshold::Lower => -s.x1,
        Threshold::Upper => s.x2,
    };
    let direct = direct_jump(model, threshold);
    let theorem = theorem_jump(model, threshold);
    // Q'' decays, so any admissible positive exponent works.
    let moment_exponent = match threshold {
        Threshold::Upper => model.roots.r2 / 2.0,
        Threshold::Lower => -model.roots.r1 / 2.0,
    };
    let exponential_moment_ok = model
        .params
        .psi(moment_exponent)
        .map(|v| v < model.params.r())
        .unwrap_or(false);
    AngleReport {
        threshold,
        location,
        direct_jump: direct,
        theorem_jump: theorem,
        agreement_residual: (direct - theorem).abs(),
        finite_difference_jump: finite_difference_jump(model, location, FD_STEP),
        smooth_pasting_holds: direct.abs() <= SMOOTHNESS_TOLERANCE,
        moment_exponent,
        exponential_moment_ok,
    }
}

/// Reports for the lower and upper thresholds, in that order.
pub fn angle_reports(model: &ValueModel) -> [AngleReport; 2] {
    [
        angle_report(model, Threshold::Lower),
        angle_report(model, Threshold::Upper),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelParams;
    use approx::assert_abs_diff_eq;

    fn model(p: (f64, f64, f64, f64, f64)) -> ValueModel {
        ValueModel::new(ModelParams::new(p.0, p.1, p.2, p.3, p.4).unwrap()).unwrap()
    }

    #[test]
    fn symmetric_jumps_coincide() {
        let m = model((1.0, 1.0, 1.0, 1.0, 1.0));
        let lower = direct_jump(&m, Threshold::Lower);
        let upper = direct_jump(&m, Threshold::Upper);
        assert_abs_diff_eq!(lower, upper, epsilon = 1e-12);
        assert_abs_diff_eq!(
            theorem_jump(&m, Threshold::Lower),
            theorem_jump(&m, Threshold::Upper),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(upper, 0.679, epsilon = 1e-3);
    }

    #[test]
    fn direct_jump_matches_finite_differences() {
        for p in [(1.0, 3.0, 3.0, 1.0, 1.0), (1.0, 1.0, 1.0, 1.0, 1.0)] {
            let m = model(p);
            for rep in angle_reports(&m) {
                assert!(
                    (rep.direct_jump - rep.finite_difference_jump).abs() < 1e-6,
                    "{rep:?}"
                );
            }
        }
    }

    #[test]
    fn both_routes_agree_and_jumps_are_positive() {
        for p in [(1.0, 3.0, 3.0, 1.0, 1.0), (1.0, 1.0, 1.0, 1.0, 1.0)] {
            let m = model(p);
            for rep in angle_reports(&m) {
                assert!(rep.agreement_residual <= ANGLE_TOLERANCE, "{rep:?}");
                assert!(rep.direct_jump > 0.0);
                assert!(!rep.smooth_pasting_holds);
                assert!(rep.exponential_moment_ok);
                assert!(rep.consistent());
            }
        }
    }

    #[test]
    fn upper_atom_factor() {
        let m = model((1.0, 3.0, 3.0, 1.0, 1.0));
        let atom = m.supremum_law().atom_mass;
        assert_abs_diff_eq!(atom, (1.0 + 1.6f64.sqrt()) / 3.0, epsilon = 1e-14);
        let slope = m.q2_slope(m.solution.x2);
        assert_abs_diff_eq!(theorem_jump(&m, Threshold::Upper), slope * atom, epsilon = 1e-15);
    }

    #[test]
    fn interior_is_smooth() {
        let sym = model((1.0, 1.0, 1.0, 1.0, 1.0));
        assert!(interior_smoothness_check(&sym, 0.0).abs() < 1e-10);
        for p in [(1.0, 3.0, 3.0, 1.0, 1.0), (1.0, 1.0, 1.0, 1.0, 1.0)] {
            let m = model(p);
            let s = m.solution;
            assert!(interior_smoothness_check(&m, s.x2 / 2.0).abs() <= 1e-6);
            assert!(interior_smoothness_check(&m, -s.x1 / 2.0).abs() <= 1e-6);
        }
    }
}
