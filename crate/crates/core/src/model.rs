//! Model parameters, the characteristic exponent and its roots at level `r`.
//!
//! The process is `X_t = x - sum(Y1) + sum(Y2)`: downward jumps arrive at
//! intensity `lambda1` with `Exp(alpha1)` sizes, upward jumps at intensity
//! `lambda2` with `Exp(alpha2)` sizes. Its characteristic exponent
//!
//! ```text
//! psi(z) = -lambda1 z / (alpha1 + z) + lambda2 z / (alpha2 - z)
//! ```
//!
//! is finite on `(-alpha1, alpha2)` and the equation `psi(z) = r` has exactly
//! one root in each of `(-alpha1, 0)` and `(0, alpha2)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative residual accepted for `psi(z) = r`.
pub const ROOT_TOLERANCE: f64 = 1e-12;

/// Validated parameters `(alpha1, lambda1, alpha2, lambda2, r)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct ModelParams {
    alpha1: f64,
    lambda1: f64,
    alpha2: f64,
    lambda2: f64,
    r: f64,
}

/// Unvalidated parameter record, as read from flags or files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawParams {
    pub alpha1: f64,
    pub lambda1: f64,
    pub alpha2: f64,
    pub lambda2: f64,
    pub r: f64,
}

impl TryFrom<RawParams> for ModelParams {
    type Error = Error;

    fn try_from(raw: RawParams) -> Result<Self> {
        ModelParams::new(raw.alpha1, raw.lambda1, raw.alpha2, raw.lambda2, raw.r)
    }
}

impl From<ModelParams> for RawParams {
    fn from(p: ModelParams) -> Self {
        RawParams {
            alpha1: p.alpha1,
            lambda1: p.lambda1,
            alpha2: p.alpha2,
            lambda2: p.lambda2,
            r: p.r,
        }
    }
}

impl ModelParams {
    /// Validates the five-tuple. Every entry must be finite and strictly positive.
    pub fn new(alpha1: f64, lambda1: f64, alpha2: f64, lambda2: f64, r: f64) -> Result<Self> {
        let fields = [
            ("alpha1", alpha1),
            ("lambda1", lambda1),
            ("alpha2", alpha2),
            ("lambda2", lambda2),
            ("r", r),
        ];
        for (field, value) in fields {
            if !value.is_finite() {
                return Err(Error::NonFinite { field, value });
            }
            if value <= 0.0 {
                return Err(Error::NonPositiveParameter { field, value });
            }
        }
        Ok(ModelParams {
            alpha1,
            lambda1,
            alpha2,
            lambda2,
            r,
        })
    }

    pub fn alpha1(&self) -> f64 {
        self.alpha1
    }

    pub fn lambda1(&self) -> f64 {
        self.lambda1
    }

    pub fn alpha2(&self) -> f64 {
        self.alpha2
    }

    pub fn lambda2(&self) -> f64 {
        self.lambda2
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    /// Total jump intensity `lambda1 + lambda2`.
    pub fn total_intensity(&self) -> f64 {
        self.lambda1 + self.lambda2
    }

    /// Same law seen through `x -> -x`: the two jump sides swap roles.
    pub fn reflected(&self) -> ModelParams {
        ModelParams {
            alpha1: self.alpha2,
            lambda1: self.lambda2,
            alpha2: self.alpha1,
            lambda2: self.lambda1,
            r: self.r,
        }
    }

    /// Characteristic exponent at a real `z`, strictly between the poles.
    pub fn psi(&self, z: f64) -> Result<f64> {
        if !(z > -self.alpha1 && z < self.alpha2) {
            return Err(Error::OutOfDomain {
                value: z,
                domain: format!("({}, {})", -self.alpha1, self.alpha2),
            });
        }
        Ok(self.psi_unchecked(z))
    }

    fn psi_unchecked(&self, z: f64) -> f64 {
        -self.lambda1 * z / (self.alpha1 + z) + self.lambda2 * z / (self.alpha2 - z)
    }

    fn psi_derivative(&self, z: f64) -> f64 {
        let down = self.alpha1 + z;
        let up = self.alpha2 - z;
        -self.lambda1 * self.alpha1 / (down * down) + self.lambda2 * self.alpha2 / (up * up)
    }
}

/// Magnitudes of the two roots of `psi(z) = r`: `psi(-r1) = psi(r2) = r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RootPair {
    pub r1: f64,
    pub r2: f64,
}

/// Residuals and bracket margin of a root pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RootDiagnostics {
    /// `|psi(-r1) - r| / r`
    pub lower_residual: f64,
    /// `|psi(r2) - r| / r`
    pub upper_residual: f64,
    /// `min(alpha1 - r1, alpha2 - r2)`
    pub pole_margin: f64,
}

impl RootPair {
    /// Checks the brackets and returns the relative residuals.
    pub fn diagnostics(&self, params: &ModelParams) -> Result<RootDiagnostics> {
        let r = params.r();
        let lower = params.psi(-self.r1)?;
        let upper = params.psi(self.r2)?;
        if !(self.r1 > 0.0 && self.r2 > 0.0) {
            return Err(Error::ConsistencyFailure {
                what: "root brackets",
                residual: self.r1.min(self.r2),
            });
        }
        Ok(RootDiagnostics {
            lower_residual: (lower - r).abs() / r,
            upper_residual: (upper - r).abs() / r,
            pole_margin: (params.alpha1() - self.r1).min(params.alpha2() - self.r2),
        })
    }
}

/// Evaluates the characteristic exponent.
pub fn psi(params: &ModelParams, z: f64) -> Result<f64> {
    params.psi(z)
}

/// Solves `psi(z) = r` through the cleared-denominator quadratic
///
/// ```text
/// (lambda1 + lambda2 + r) z^2 + (lambda2 alpha1 - lambda1 alpha2 - r (alpha2 - alpha1)) z - r alpha1 alpha2 = 0
/// ```
///
/// polishes each root with Newton steps on `psi` itself, and falls back to
/// bisection if a root leaves its bracket or misses the residual tolerance.
pub fn solve_roots(params: &ModelParams) -> Result<RootPair> {
    let (negative, positive) = quadratic_roots(params);
    let lower = polish(params, negative, -params.alpha1(), 0.0)
        .filter(|z| within_tolerance(params, *z))
        .map(Ok)
        .unwrap_or_else(|| bisect_root(params, -params.alpha1(), 0.0))?;
    let upper = polish(params, positive, 0.0, params.alpha2())
        .filter(|z| within_tolerance(params, *z))
        .map(Ok)
        .unwrap_or_else(|| bisect_root(params, 0.0, params.alpha2()))?;
    Ok(RootPair {
        r1: -lower,
        r2: upper,
    })
}

/// Independent route: bisection on `psi(z) - r` over each open bracket.
pub fn solve_roots_bisection(params: &ModelParams) -> Result<RootPair> {
    let lower = bisect_root(params, -params.alpha1(), 0.0)?;
    let upper = bisect_root(params, 0.0, params.alpha2())?;
    Ok(RootPair {
        r1: -lower,
        r2: upper,
    })
}

/// Roots of the quadratic, returned as (negative, positive).
fn quadratic_roots(params: &ModelParams) -> (f64, f64) {
    let (a1, l1, a2, l2, r) = (
        params.alpha1(),
        params.lambda1(),
        params.alpha2(),
        params.lambda2(),
        params.r(),
    );
    let a = l1 + l2 + r;
    let b = l2 * a1 - l1 * a2 - r * (a2 - a1);
    let c = -r * a1 * a2;
    // c < 0 < a, so the discriminant is positive and the roots have opposite signs.
    let disc = (b * b - 4.0 * a * c).sqrt();
    let q = -0.5 * (b + b.signum() * disc);
    let (z1, z2) = (q / a, c / q);
    (z1.min(z2), z1.max(z2))
}

fn polish(params: &ModelParams, mut z: f64, lo: f64, hi: f64) -> Option<f64> {
    if !(z > lo && z < hi) {
        return None;
    }
    for _ in 0..3 {
        let f = params.psi_unchecked(z) - params.r();
        let df = params.psi_derivative(z);
        let next = z - f / df;
        if !(next > lo && next < hi) || !next.is_finite() {
            break;
        }
        if (params.psi_unchecked(next) - params.r()).abs() > f.abs() {
            break;
        }
        z = next;
    }
    Some(z)
}

fn within_tolerance(params: &ModelParams, z: f64) -> bool {
    (params.psi_unchecked(z) - params.r()).abs() <= ROOT_TOLERANCE * params.r()
}

/// Bisection on an open bracket where `psi - r` is positive at the pole end
/// and negative at zero. Endpoints are never evaluated.
fn bisect_root(params: &ModelParams, lo: f64, hi: f64) -> Result<f64> {
    let r = params.r();
    // psi - r is increasing in |z| on each bracket.
    let pole_at_lo = lo < 0.0;
    let (mut lo, mut hi) = (lo, hi);
    let mut best = f64::NAN;
    let mut best_residual = f64::INFINITY;
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f = params.psi_unchecked(mid) - r;
        if f.abs() < best_residual {
            best_residual = f.abs();
            best = mid;
        }
        if f == 0.0 {
            break;
        }
        let root_toward_lo = if pole_at_lo { f < 0.0 } else { f > 0.0 };
        if root_toward_lo {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    if best_residual <= ROOT_TOLERANCE * r {
        Ok(best)
    } else {
        Err(Error::SolverFailure {
            what: "psi(z) = r",
            residual: best_residual / r,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn asymmetric() -> ModelParams {
        ModelParams::new(1.0, 3.0, 3.0, 1.0, 1.0).unwrap()
    }

    fn symmetric() -> ModelParams {
        ModelParams::new(1.0, 1.0, 1.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn validation_names_the_offending_field() {
        assert!(ModelParams::new(1.0, 3.0, 3.0, 1.0, 1.0).is_ok());
        assert!(ModelParams::new(1.0, 1.0, 1.0, 1.0, 1.0).is_ok());
        assert_eq!(
            ModelParams::new(0.0, 1.0, 1.0, 1.0, 1.0),
            Err(Error::NonPositiveParameter {
                field: "alpha1",
                value: 0.0
            })
        );
        assert!(matches!(
            ModelParams::new(1.0, 1.0, 1.0, -2.0, 1.0),
            Err(Error::NonPositiveParameter { field: "lambda2", .. })
        ));
        assert!(matches!(
            ModelParams::new(1.0, 1.0, f64::INFINITY, 1.0, 1.0),
            Err(Error::NonFinite { field: "alpha2", .. })
        ));
        assert!(matches!(
            ModelParams::new(1.0, 1.0, 1.0, 1.0, f64::NAN),
            Err(Error::NonFinite { field: "r", .. })
        ));
    }

    #[test]
    fn psi_vanishes_at_zero() {
        assert_eq!(psi(&asymmetric(), 0.0).unwrap(), 0.0);
        assert_eq!(psi(&symmetric(), 0.0).unwrap(), 0.0);
    }

    #[test]
    fn symmetric_psi_matches_simplified_form() {
        // -z/(1+z) + z/(1-z) = 2z^2/(1-z^2)
        let p = symmetric();
        for &z in &[-0.9, -0.5, -0.1, 0.25, 0.5, 0.75] {
            let simplified = 2.0 * z * z / (1.0 - z * z);
            assert_abs_diff_eq!(psi(&p, z).unwrap(), simplified, epsilon = 1e-14);
        }
        assert_abs_diff_eq!(psi(&p, 0.5).unwrap(), 2.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn psi_diverges_at_the_poles() {
        let p = asymmetric();
        assert!(psi(&p, -1.0 + 1e-9).unwrap() > 1e8);
        assert!(psi(&p, 3.0 - 1e-9).unwrap() > 1e8);
        assert!(matches!(psi(&p, -1.0), Err(Error::OutOfDomain { .. })));
        assert!(matches!(psi(&p, 3.0), Err(Error::OutOfDomain { .. })));
        assert!(matches!(psi(&p, 7.0), Err(Error::OutOfDomain { .. })));
    }

    #[test]
    fn asymmetric_roots_match_quadratic_formula() {
        // 5z^2 - 10z - 3 = 0  =>  z = 1 +- sqrt(160)/10
        let roots = solve_roots(&asymmetric()).unwrap();
        let s = 160f64.sqrt() / 10.0;
        assert_abs_diff_eq!(roots.r1, s - 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(roots.r2, 1.0 + s, epsilon = 1e-14);
        assert_abs_diff_eq!(roots.r1, 0.264911, epsilon = 1e-6);
        assert_abs_diff_eq!(roots.r2, 2.264911, epsilon = 1e-6);
    }

    #[test]
    fn symmetric_roots_are_inverse_sqrt_three() {
        let roots = solve_roots(&symmetric()).unwrap();
        let expected = 1.0 / 3f64.sqrt();
        assert_abs_diff_eq!(roots.r1, expected, epsilon = 1e-15);
        assert_abs_diff_eq!(roots.r2, expected, epsilon = 1e-15);
    }

    #[test]
    fn roots_straddle_zero_inside_poles() {
        for p in [asymmetric(), symmetric()] {
            let roots = solve_roots(&p).unwrap();
            assert!(-roots.r1 * roots.r2 < 0.0);
            assert!(roots.r1 < p.alpha1() && roots.r2 < p.alpha2());
            let diag = roots.diagnostics(&p).unwrap();
            assert!(diag.lower_residual <= ROOT_TOLERANCE);
            assert!(diag.upper_residual <= ROOT_TOLERANCE);
            assert!(diag.pole_margin > 0.0);
        }
    }

    #[test]
    fn bisection_route_agrees_with_quadratic_route() {
        for p in [asymmetric(), symmetric()] {
            let a = solve_roots(&p).unwrap();
            let b = solve_roots_bisection(&p).unwrap();
            assert_abs_diff_eq!(a.r1, b.r1, epsilon = 1e-10);
            assert_abs_diff_eq!(a.r2, b.r2, epsilon = 1e-10);
        }
    }

    #[test]
    fn reflection_swaps_roots() {
        let p = asymmetric();
        let roots = solve_roots(&p).unwrap();
        let mirrored = solve_roots(&p.reflected()).unwrap();
        assert_abs_diff_eq!(roots.r1, mirrored.r2, epsilon = 1e-14);
        assert_abs_diff_eq!(roots.r2, mirrored.r1, epsilon = 1e-14);
    }

    #[test]
    fn params_deserialize_through_validation() {
        let ok: ModelParams = serde_json::from_str(
            r#"{"alpha1":1.0,"lambda1":3.0,"alpha2":3.0,"lambda2":1.0,"r":1.0}"#,
        )
        .unwrap();
        assert_eq!(ok, asymmetric());
        let bad = serde_json::from_str::<ModelParams>(
            r#"{"alpha1":0.0,"lambda1":3.0,"alpha2":3.0,"lambda2":1.0,"r":1.0}"#,
        );
        assert!(bad.unwrap_err().to_string().contains("alpha1"));
    }
}
