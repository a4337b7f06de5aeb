//! Value function, averaging functions and the numerical check of the
//! verification conditions.
//!
//! With `u = x1 + x2` the value function is
//!
//! ```text
//! V(x) = -x                                          x < -x1
//!        D1 e^{-r1 (x + x1)} + D2 e^{r2 (x - x2)}     -x1 <= x <= x2
//!        x                                           x > x2
//! ```
//!
//! and it is represented as `V(x) = E_x Q1(I) + E_x Q2(M)` with
//!
//! ```text
//! Q1(x) = -x - E1 - F1 D2 e^{r2 (x - x2)}   for x < -x1, else 0
//! Q2(x) =  x - E2 - F2 D1 e^{-r1 (x + x1)}  for x > x2,  else 0
//! ```

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extrema_laws::{constants, law_of_infimum, law_of_supremum, ExtremaLaw, WHConstants};
use crate::model::{solve_roots, ModelParams, RootPair};
use crate::quadrature;
use crate::threshold_solver::{solve_with, Solution};

/// Truncation of the tail integrals, in units of `1 / rate`. The tail mass
/// left out is below `e^{-45}`.
const TAIL_SCALE: f64 = 45.0;

pub const REPRESENTATION_TOLERANCE: f64 = 1e-6;
pub const MAJORANT_TOLERANCE: f64 = 1e-12;
/// Applied relative to `max(1, threshold)`.
pub const CONTINUITY_TOLERANCE: f64 = 1e-12;

/// Which extremum an expectation is taken over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Extremum {
    Infimum,
    Supremum,
}

/// All quantities needed to evaluate `V`, `Q1` and `Q2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValueModel {
    pub params: ModelParams,
    pub roots: RootPair,
    pub constants: WHConstants,
    pub solution: Solution,
}

impl ValueModel {
    pub fn new(params: ModelParams) -> Result<Self> {
        let roots = solve_roots(&params)?;
        let constants = constants(&params, &roots);
        let solution = solve_with(&constants, &roots)?;
        Ok(ValueModel {
            params,
            roots,
            constants,
            solution,
        })
    }

    /// Same model with the solution replaced, e.g. by a perturbed one.
    pub fn with_solution(self, solution: Solution) -> Self {
        ValueModel { solution, ..self }
    }

    pub fn supremum_law(&self) -> ExtremaLaw {
        law_of_supremum(&self.params, &self.roots)
    }

    pub fn infimum_law(&self) -> ExtremaLaw {
        law_of_infimum(&self.params, &self.roots)
    }

    pub fn lower_threshold(&self) -> f64 {
        -self.solution.x1
    }

    pub fn upper_threshold(&self) -> f64 {
        self.solution.x2
    }

    /// Closed-form value function.
    pub fn value_at(&self, x: f64) -> f64 {
        let s = &self.solution;
        if x < -s.x1 {
            -x
        } else if x > s.x2 {
            x
        } else {
            self.continuation_value(x)
        }
    }

    /// The continuation-region formula, evaluated anywhere.
    pub fn continuation_value(&self, x: f64) -> f64 {
        let s = &self.solution;
        let RootPair { r1, r2 } = self.roots;
        s.D1 * (-r1 * (x + s.x1)).exp() + s.D2 * (r2 * (x - s.x2)).exp()
    }

    /// Payoff `|x|`.
    pub fn payoff(&self, x: f64) -> f64 {
        x.abs()
    }

    /// The non-zero branch of `Q1`, evaluated anywhere.
    pub fn q1_branch(&self, x: f64) -> f64 {
        let s = &self.solution;
        -x - self.constants.E1 - self.constants.F1 * s.D2 * (self.roots.r2 * (x - s.x2)).exp()
    }

    /// The non-zero branch of `Q2`, evaluated anywhere.
    pub fn q2_branch(&self, x: f64) -> f64 {
        let s = &self.solution;
        x - self.constants.E2 - self.constants.F2 * s.D1 * (-self.roots.r1 * (x + s.x1)).exp()
    }

    pub fn q1(&self, x: f64) -> f64 {
        if x < -self.solution.x1 {
            self.q1_branch(x)
        } else {
            0.0
        }
    }

    pub fn q2(&self, x: f64) -> f64 {
        if x > self.solution.x2 {
            self.q2_branch(x)
        } else {
            0.0
        }
    }

    /// Slope of the non-zero branch of `Q1`.
    pub fn q1_slope(&self, x: f64) -> f64 {
        let s = &self.solution;
        let r2 = self.roots.r2;
        -1.0 - r2 * self.constants.F1 * s.D2 * (r2 * (x - s.x2)).exp()
    }

    /// Slope of the non-zero branch of `Q2`.
    pub fn q2_slope(&self, x: f64) -> f64 {
        let s = &self.solution;
        let r1 = self.roots.r1;
        1.0 + r1 * self.constants.F2 * s.D1 * (-r1 * (x + s.x1)).exp()
    }

    /// `E_x Q1(I) = D1 e^{-r1 (x + x1)}` for `x >= -x1`.
    pub fn expected_q1_closed(&self, x: f64) -> Result<f64> {
        let s = &self.solution;
        if !(x >= -s.x1) {
            return Err(Error::OutOfDomain {
                value: x,
                domain: format!("[{}, inf)", -s.x1),
            });
        }
        Ok(s.D1 * (-self.roots.r1 * (x + s.x1)).exp())
    }

    /// `E_x Q2(M) = D2 e^{r2 (x - x2)}` for `x <= x2`.
    pub fn expected_q2_closed(&self, x: f64) -> Result<f64> {
        let s = &self.solution;
        if !(x <= s.x2) {
            return Err(Error::OutOfDomain {
                value: x,
                domain: format!("(-inf, {}]", s.x2),
            });
        }
        Ok(s.D2 * (self.roots.r2 * (x - s.x2)).exp())
    }

    /// `E_x Q(extremum)` by integrating the averaging function against the
    /// law of the extremum. Only the piece where `Q` is non-zero is
    /// integrated, so the integrand is smooth; the atom contributes
    /// `Q(x) * atom_mass`.
    pub fn expected_q_quadrature(&self, x: f64, which: Extremum) -> Result<f64> {
        match which {
            Extremum::Infimum => {
                let law = self.infimum_law();
                let rate = law.rate;
                let weight = (1.0 - law.atom_mass) * rate;
                // z = x + y with y <= 0; Q1(z) vanishes above -x1.
                let hi = x.min(-self.solution.x1);
                let lo = hi - TAIL_SCALE / rate;
                let continuous = quadrature::integrate(
                    |z| self.q1_branch(z) * weight * (rate * (z - x)).exp(),
                    lo,
                    hi,
                )?;
                Ok(law.atom_mass * self.q1(x) + continuous)
            }
            Extremum::Supremum => {
                let law = self.supremum_law();
                let rate = law.rate;
                let weight = (1.0 - law.atom_mass) * rate;
                let lo = x.max(self.solution.x2);
                let hi = lo + TAIL_SCALE / rate;
                let continuous = quadrature::integrate(
                    |z| self.q2_branch(z) * weight * (-rate * (z - x)).exp(),
                    lo,
                    hi,
                )?;
                Ok(law.atom_mass * self.q2(x) + continuous)
            }
        }
    }

    /// `E_x Q1(I) + E_x Q2(M)` by quadrature.
    pub fn represented_value(&self, x: f64) -> Result<f64> {
        Ok(self.expected_q_quadrature(x, Extremum::Infimum)?
            + self.expected_q_quadrature(x, Extremum::Supremum)?)
    }

    pub fn verify_hypotheses(&self, grid: &GridSpec) -> VerificationReport {
        verify_hypotheses(self, grid)
    }
}

/// Test grids for the verification conditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Points on `[-x1, x2]`.
    pub interior_points: usize,
    /// Points split evenly over `[-x1 - reach E1, -x1]` and `[x2, x2 + reach E2]`.
    pub exterior_points: usize,
    pub exterior_reach: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            interior_points: 1001,
            exterior_points: 500,
            exterior_reach: 10.0,
        }
    }
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n)
            .map(|k| {
                if k + 1 == n {
                    b
                } else {
                    a + (b - a) * k as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}

impl GridSpec {
    pub fn interior(&self, model: &ValueModel) -> Vec<f64> {
        linspace(-model.solution.x1, model.solution.x2, self.interior_points)
    }

    pub fn exterior_lower(&self, model: &ValueModel) -> Vec<f64> {
        let edge = -model.solution.x1;
        let reach = self.exterior_reach * model.constants.E1;
        linspace(edge - reach, edge, self.exterior_points / 2)
    }

    pub fn exterior_upper(&self, model: &ValueModel) -> Vec<f64> {
        let edge = model.solution.x2;
        let reach = self.exterior_reach * model.constants.E2;
        let n = self.exterior_points - self.exterior_points / 2;
        linspace(edge, edge + reach, n)
    }
}

/// Outcome of the numerical verification of the representation and
/// majorant conditions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    /// `max |E_x Q1(I) + E_x Q2(M) - |x||` over the exterior grid.
    pub representation_sup_error: f64,
    pub representation_ok: bool,
    /// `min V(x) - |x|` over the interior grid.
    pub majorant_min_gap: f64,
    /// Grid point where the minimum gap is attained.
    pub majorant_argmin: f64,
    pub majorant_ok: bool,
    pub q1_monotone: bool,
    pub q2_monotone: bool,
    /// `|Q1 branch at -x1|`
    pub q1_threshold_residual: f64,
    pub q1_continuous_at_threshold: bool,
    /// `|Q2 branch at x2|`
    pub q2_threshold_residual: f64,
    pub q2_continuous_at_threshold: bool,
    /// Quadrature failures encountered, if any.
    pub quadrature_errors: Vec<String>,
    pub passed: bool,
}

pub fn verify_hypotheses(model: &ValueModel, grid: &GridSpec) -> VerificationReport {
    let lower = grid.exterior_lower(model);
    let upper = grid.exterior_upper(model);
    let exterior: Vec<f64> = lower.iter().chain(upper.iter()).copied().collect();

    let outcomes: Vec<Result<f64>> = exterior
        .par_iter()
        .map(|&x| model.represented_value(x).map(|v| (v - x.abs()).abs()))
        .collect();
    let mut quadrature_errors = Vec::new();
    let mut representation_sup_error = 0.0f64;
    for outcome in outcomes {
        match outcome {
            Ok(err) => representation_sup_error = representation_sup_error.max(err),
            Err(e) => quadrature_errors.push(e.to_string()),
        }
    }
    if exterior.is_empty() {
        quadrature_errors.push("empty exterior grid".to_string());
    }

    let (majorant_min_gap, majorant_argmin) = grid
        .interior(model)
        .into_iter()
        .map(|x| (model.value_at(x) - x.abs(), x))
        .fold((f64::INFINITY, f64::NAN), |best, cur| if cur.0 < best.0 { cur } else { best });

    let q1_values: Vec<f64> = lower.iter().map(|&x| model.q1_branch(x)).collect();
    let q2_values: Vec<f64> = upper.iter().map(|&x| model.q2_branch(x)).collect();
    let q1_monotone = q1_values.windows(2).all(|w| w[1] <= w[0]);
    let q2_monotone = q2_values.windows(2).all(|w| w[1] >= w[0]);

    let s = &model.solution;
    let q1_threshold_residual = model.q1_branch(-s.x1).abs();
    let q2_threshold_residual = model.q2_branch(s.x2).abs();
    let q1_continuous_at_threshold = q1_threshold_residual <= CONTINUITY_TOLERANCE * s.x1.max(1.0);
    let q2_continuous_at_threshold = q2_threshold_residual <= CONTINUITY_TOLERANCE * s.x2.max(1.0);

    let representation_ok = quadrature_errors.is_empty()
        && representation_sup_error <= REPRESENTATION_TOLERANCE;
    let majorant_ok = majorant_min_gap >= -MAJORANT_TOLERANCE;
    let passed = representation_ok
        && majorant_ok
        && q1_monotone
        && q2_monotone
        && q1_continuous_at_threshold
        && q2_continuous_at_threshold;

    VerificationReport {
        representation_sup_error,
        representation_ok,
        majorant_min_gap,
        majorant_argmin,
        majorant_ok,
        q1_monotone,
        q2_monotone,
        q1_threshold_residual,
        q1_continuous_at_threshold,
        q2_threshold_residual,
        q2_continuous_at_threshold,
        quadrature_errors,
        passed,
    }
}
