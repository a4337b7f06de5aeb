//! Width of the continuation region, the two thresholds and the coefficients
//! of the value function.
//!
//! The width `u = x1 + x2` is the unique positive fixed point of
//!
//! ```text
//!        E1 + E2 + (E1 G2 + E2 G1) e^{-(r1+r2)u} + E1 F2 e^{-r1 u} + E2 F1 e^{-r2 u}
//! u  =  -----------------------------------------------------------------------------
//!                              1 - G1 G2 e^{-(r1+r2)u}
//! ```
//!
//! whose right-hand side decreases from above `E1 + E2` towards `E1 + E2`.
//! It is bracketed by `[E1 + E2, E1 (1 + F2) + E2 (1 + F1)]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extrema_laws::{constants, WHConstants};
use crate::model::{solve_roots, ModelParams, RootDiagnostics, RootPair};

/// Tolerance for identities evaluated in closed form.
pub const CLOSED_FORM_TOLERANCE: f64 = 1e-12;
/// Threshold beyond which two routes to the same quantity are declared inconsistent.
pub const CONSISTENCY_TOLERANCE: f64 = 1e-10;

/// The closed-form answer: width, thresholds `-x1 < 0 < x2` and coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct Solution {
    pub u: f64,
    pub x1: f64,
    pub x2: f64,
    pub D1: f64,
    pub D2: f64,
}

/// Right-hand side of the fixed-point equation for `u`.
pub fn fixed_point_rhs(c: &WHConstants, roots: &RootPair, u: f64) -> f64 {
    let RootPair { r1, r2 } = *roots;
    let both = (-(r1 + r2) * u).exp();
    let num = c.E1
        + c.E2
        + (c.E1 * c.G2 + c.E2 * c.G1) * both
        + c.E1 * c.F2 * (-r1 * u).exp()
        + c.E2 * c.F1 * (-r2 * u).exp();
    num / (1.0 - c.G1 * c.G2 * both)
}

/// Bracket `[E1 + E2, E1 (1 + F2) + E2 (1 + F1)]` for the fixed point.
pub fn u_bracket(c: &WHConstants) -> (f64, f64) {
    (c.E1 + c.E2, c.E1 * (1.0 + c.F2) + c.E2 * (1.0 + c.F1))
}

/// Bisection on `u - rhs(u)`, which is strictly increasing, run until the
/// bracket collapses to adjacent floats.
pub fn solve_u(c: &WHConstants, roots: &RootPair) -> Result<f64> {
    let h = |u: f64| u - fixed_point_rhs(c, roots, u);
    let (mut lo, mut hi) = u_bracket(c);
    let (h_lo, h_hi) = (h(lo), h(hi));
    if h_lo > 0.0 || h_hi < 0.0 {
        return Err(Error::SolverFailure {
            what: "fixed point bracket",
            residual: h_lo.max(-h_hi),
        });
    }
    if h_lo == 0.0 {
        return Ok(lo);
    }
    if h_hi == 0.0 {
        return Ok(hi);
    }
    let (mut best, mut best_residual) = if -h_lo < h_hi { (lo, -h_lo) } else { (hi, h_hi) };
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let value = h(mid);
        if value.abs() < best_residual {
            best = mid;
            best_residual = value.abs();
        }
        if value == 0.0 {
            break;
        }
        if value < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if best_residual <= CLOSED_FORM_TOLERANCE {
        Ok(best)
    } else {
        Err(Error::SolverFailure {
            what: "fixed point for u",
            residual: best_residual,
        })
    }
}

fn x1_expression(c: &WHConstants, roots: &RootPair, u: f64) -> f64 {
    let RootPair { r1, r2 } = *roots;
    let both = (-(r1 + r2) * u).exp();
    let own = (-r2 * u).exp();
    // Written as `E1 + excess` so that `x1 >= E1` survives rounding.
    let excess = c.F1 * own * (u - c.E1 - c.E1 * (-r1 * u).exp());
    c.E1 + excess / (1.0 + c.G1 * both + c.F1 * own)
}

fn x2_expression(c: &WHConstants, roots: &RootPair, u: f64) -> f64 {
    let RootPair { r1, r2 } = *roots;
    let both = (-(r1 + r2) * u).exp();
    let own = (-r1 * u).exp();
    let excess = c.F2 * own * (u - c.E2 - c.E2 * (-r2 * u).exp());
    c.E2 + excess / (1.0 + c.G2 * both + c.F2 * own)
}

/// Residual of the equivalent equation `u = x1(u) + x2(u)`.
pub fn alternative_residual(c: &WHConstants, roots: &RootPair, u: f64) -> f64 {
    u - x1_expression(c, roots, u) - x2_expression(c, roots, u)
}

/// Thresholds `(x1, x2)` for a solved width `u`.
pub fn thresholds(c: &WHConstants, roots: &RootPair, u: f64) -> Result<(f64, f64)> {
    let x1 = x1_expression(c, roots, u);
    let x2 = x2_expression(c, roots, u);
    let gap = (x1 + x2 - u).abs();
    if gap > CONSISTENCY_TOLERANCE {
        return Err(Error::ConsistencyFailure {
            what: "x1 + x2 = u",
            residual: gap,
        });
    }
    Ok((x1, x2))
}

/// Coefficients `(D1, D2)` from the closed-form display, cross-checked
/// against a direct solve of
///
/// ```text
/// D1 + D2 e^{-r2 u} = x1
/// D1 e^{-r1 u} + D2 = x2
/// ```
pub fn coefficients(x1: f64, x2: f64, roots: &RootPair) -> Result<(f64, f64)> {
    let RootPair { r1, r2 } = *roots;
    let u = x1 + x2;
    let down = (-r1 * u).exp();
    let up = (-r2 * u).exp();
    let det = 1.0 - (-(r1 + r2) * u).exp();
    let d1 = (x1 - x2 * up) / det;
    let d2 = (x2 - x1 * down) / det;

    let (s1, s2) = solve_2x2([[1.0, up], [down, 1.0]], [x1, x2]);
    let gap = (d1 - s1).abs().max((d2 - s2).abs());
    if gap > CONSISTENCY_TOLERANCE {
        return Err(Error::ConsistencyFailure {
            what: "coefficients vs linear system",
            residual: gap,
        });
    }
    if !(d1 > 0.0) {
        return Err(Error::ConsistencyFailure {
            what: "D1 > 0",
            residual: d1,
        });
    }
    if !(d2 > 0.0) {
        return Err(Error::ConsistencyFailure {
            what: "D2 > 0",
            residual: d2,
        });
    }
    Ok((d1, d2))
}

/// Gaussian elimination with partial pivoting.
fn solve_2x2(a: [[f64; 2]; 2], b: [f64; 2]) -> (f64, f64) {
    let (a, b) = if a[1][0].abs() > a[0][0].abs() {
        ([a[1], a[0]], [b[1], b[0]])
    } else {
        (a, b)
    };
    let m = a[1][0] / a[0][0];
    let y = (b[1] - m * b[0]) / (a[1][1] - m * a[0][1]);
    let x = (b[0] - a[0][1] * y) / a[0][0];
    (x, y)
}

/// Roots, constants and thresholds in one pass.
pub fn solve(params: &ModelParams) -> Result<Solution> {
    let roots = solve_roots(params)?;
    let c = constants(params, &roots);
    solve_with(&c, &roots)
}

pub(crate) fn solve_with(c: &WHConstants, roots: &RootPair) -> Result<Solution> {
    let u = solve_u(c, roots)?;
    let (x1, x2) = thresholds(c, roots, u)?;
    let (d1, d2) = coefficients(x1, x2, roots)?;
    Ok(Solution {
        u,
        x1,
        x2,
        D1: d1,
        D2: d2,
    })
}

/// Residuals of every identity the solution must satisfy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolutionDiagnostics {
    /// `|u - rhs(u)|`
    pub fixed_point_residual: f64,
    /// `|u - x1(u) - x2(u)|`
    pub alternative_residual: f64,
    /// `|x1 + x2 - u|`
    pub width_residual: f64,
    /// `|D1 + D2 e^{-r2 u} - x1|`
    pub system_lower_residual: f64,
    /// `|D1 e^{-r1 u} + D2 - x2|`
    pub system_upper_residual: f64,
    /// `|x1 - E1 - F1 D2 e^{-r2 u}|`, equivalent to `Q1(-x1) = 0`
    pub lower_root_residual: f64,
    /// `|x2 - E2 - F2 D1 e^{-r1 u}|`, equivalent to `Q2(x2) = 0`
    pub upper_root_residual: f64,
    /// Residual of `D1 = (alpha1-r1)/alpha1 [r2/(alpha1+r2) x1 + 1/alpha1 + alpha1/(alpha1+r2) D1]`,
    /// i.e. `E_{-x1} Q1(I) = D1` computed by integrating `Q1` against the law of `I`
    pub d1_identity_residual: f64,
    pub u_bracket: (f64, f64),
    pub within_bracket: bool,
    /// `x1 >= E1` and `x2 >= E2`
    pub thresholds_above_means: bool,
}

impl Solution {
    pub fn diagnostics(
        &self,
        params: &ModelParams,
        roots: &RootPair,
        c: &WHConstants,
    ) -> SolutionDiagnostics {
        let RootPair { r1, r2 } = *roots;
        let a1 = params.alpha1();
        let u = self.u;
        let down = (-r1 * u).exp();
        let up = (-r2 * u).exp();
        let d1_rhs = (a1 - r1) / a1
            * (r2 / (a1 + r2) * self.x1 + 1.0 / a1 + a1 / (a1 + r2) * self.D1);
        let bracket = u_bracket(c);
        SolutionDiagnostics {
            fixed_point_residual: (u - fixed_point_rhs(c, roots, u)).abs(),
            alternative_residual: alternative_residual(c, roots, u).abs(),
            width_residual: (self.x1 + self.x2 - u).abs(),
            system_lower_residual: (self.D1 + self.D2 * up - self.x1).abs(),
            system_upper_residual: (self.D1 * down + self.D2 - self.x2).abs(),
            lower_root_residual: (self.x1 - c.E1 - c.F1 * self.D2 * up).abs(),
            upper_root_residual: (self.x2 - c.E2 - c.F2 * self.D1 * down).abs(),
            d1_identity_residual: (self.D1 - d1_rhs).abs(),
            u_bracket: bracket,
            within_bracket: bracket.0 <= u && u <= bracket.1,
            thresholds_above_means: self.x1 >= c.E1 && self.x2 >= c.E2,
        }
    }
}

/// Everything `solve` produces, with residuals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub params: ModelParams,
    pub roots: RootPair,
    pub root_diagnostics: RootDiagnostics,
    pub constants: WHConstants,
    pub solution: Solution,
    pub diagnostics: SolutionDiagnostics,
}

pub fn solve_report(params: &ModelParams) -> Result<SolveReport> {
    let roots = solve_roots(params)?;
    let root_diagnostics = roots.diagnostics(params)?;
    let c = constants(params, &roots);
    let solution = solve_with(&c, &roots)?;
    Ok(SolveReport {
        params: *params,
        roots,
        root_diagnostics,
        constants: c,
        diagnostics: solution.diagnostics(params, &roots, &c),
        solution,
    })
}
