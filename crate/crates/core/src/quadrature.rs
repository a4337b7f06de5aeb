//! Composite Gauss–Legendre integration with panel doubling.

use std::num::NonZeroUsize;
use std::sync::OnceLock;

use gauss_quad::GaussLegendre;

use crate::error::{Error, Result};

const NODES_PER_PANEL: usize = 20;
const INITIAL_PANELS: usize = 4;
const MAX_DOUBLINGS: u32 = 12;

/// Two successive refinements must agree to this (relative to `max(1, |I|)`).
pub const REFINEMENT_TOLERANCE: f64 = 1e-10;
/// Past the last refinement, disagreement above this is reported as an error.
pub const FAILURE_TOLERANCE: f64 = 1e-9;

fn rule() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(NonZeroUsize::new(NODES_PER_PANEL).unwrap()))
}

/// Fixed composite rule: `panels` equal panels, each integrated with the
/// 20-point Gauss–Legendre rule.
pub fn composite<F>(f: F, a: f64, b: f64, panels: usize) -> f64
where
    F: Fn(f64) -> f64,
{
    if a == b {
        return 0.0;
    }
    let width = (b - a) / panels as f64;
    (0..panels)
        .map(|k| {
            let lo = a + k as f64 * width;
            let hi = if k + 1 == panels { b } else { lo + width };
            rule().integrate(lo, hi, &f)
        })
        .sum()
}

/// Doubles the panel count until two successive estimates agree.
pub fn integrate<F>(f: F, a: f64, b: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let mut panels = INITIAL_PANELS;
    let mut previous = composite(&f, a, b, panels);
    for _ in 0..MAX_DOUBLINGS {
        panels *= 2;
        let current = composite(&f, a, b, panels);
        let scale = current.abs().max(1.0);
        if (current - previous).abs() <= REFINEMENT_TOLERANCE * scale {
            return Ok(current);
        }
        previous = current;
    }
    let current = composite(&f, a, b, panels * 2);
    if (current - previous).abs() <= FAILURE_TOLERANCE * current.abs().max(1.0) {
        Ok(current)
    } else {
        Err(Error::QuadratureNonConvergence { previous, current })
    }
}
