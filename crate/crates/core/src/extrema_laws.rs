//! Laws of the overall supremum `M` and infimum `I` of the process killed at
//! an independent `Exp(r)` time, and the constants built from them.
//!
//! Both laws are defective exponentials: `M` has an atom `r2/alpha2` at zero
//! and an `Exp(r2)` continuous part on `(0, inf)`; `I` has an atom `r1/alpha1`
//! at zero and a reflected `Exp(r1)` part on `(-inf, 0)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelParams, RootPair};
use crate::quadrature;

/// Truncation of the continuous part, in units of `1 / rate`.
const TRUNCATION_SCALE: f64 = 40.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    /// Support `[0, inf)`.
    Supremum,
    /// Support `(-inf, 0]`.
    Infimum,
}

impl Orientation {
    fn name(self) -> &'static str {
        match self {
            Orientation::Supremum => "supremum",
            Orientation::Infimum => "infimum",
        }
    }
}

/// Atom at zero plus an exponential continuous part.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtremaLaw {
    pub atom_mass: f64,
    pub rate: f64,
    pub orientation: Orientation,
}

impl ExtremaLaw {
    /// Whether `x` lies in the closed support.
    pub fn supports(&self, x: f64) -> bool {
        match self.orientation {
            Orientation::Supremum => x >= 0.0,
            Orientation::Infimum => x <= 0.0,
        }
    }

    /// Density of the continuous part only; the atom is `atom_mass`.
    pub fn density(&self, x: f64) -> Result<f64> {
        if !self.supports(x) {
            return Err(Error::OutOfSupport {
                value: x,
                orientation: self.orientation.name(),
            });
        }
        Ok((1.0 - self.atom_mass) * self.rate * (-self.rate * x.abs()).exp())
    }

    /// Distribution function `P(extremum <= x)`, atom included.
    pub fn cdf(&self, x: f64) -> f64 {
        let cont = 1.0 - self.atom_mass;
        match self.orientation {
            Orientation::Supremum if x < 0.0 => 0.0,
            Orientation::Supremum => 1.0 - cont * (-self.rate * x).exp(),
            Orientation::Infimum if x < 0.0 => cont * (self.rate * x).exp(),
            Orientation::Infimum => 1.0,
        }
    }

    /// Signed mean in closed form.
    pub fn mean(&self) -> f64 {
        let magnitude = (1.0 - self.atom_mass) / self.rate;
        match self.orientation {
            Orientation::Supremum => magnitude,
            Orientation::Infimum => -magnitude,
        }
    }

    /// Integration range of the continuous part, truncated at `40 / rate`.
    pub fn truncated_support(&self) -> (f64, f64) {
        let reach = TRUNCATION_SCALE / self.rate;
        match self.orientation {
            Orientation::Supremum => (0.0, reach),
            Orientation::Infimum => (-reach, 0.0),
        }
    }

    /// `E f(extremum)` by quadrature over the truncated continuous part plus
    /// the atom contribution `f(0) * atom_mass`.
    pub fn expectation_by_quadrature<F>(&self, f: F) -> Result<f64>
    where
        F: Fn(f64) -> f64,
    {
        let (a, b) = self.truncated_support();
        let cont = 1.0 - self.atom_mass;
        let rate = self.rate;
        let continuous = quadrature::integrate(
            |y| f(y) * cont * rate * (-rate * y.abs()).exp(),
            a,
            b,
        )?;
        Ok(self.atom_mass * f(0.0) + continuous)
    }
}

/// Law of `M`: atom `r2 / alpha2`, rate `r2`.
pub fn law_of_supremum(params: &ModelParams, roots: &RootPair) -> ExtremaLaw {
    ExtremaLaw {
        atom_mass: roots.r2 / params.alpha2(),
        rate: roots.r2,
        orientation: Orientation::Supremum,
    }
}

/// Law of `I`: atom `r1 / alpha1`, rate `r1`.
pub fn law_of_infimum(params: &ModelParams, roots: &RootPair) -> ExtremaLaw {
    ExtremaLaw {
        atom_mass: roots.r1 / params.alpha1(),
        rate: roots.r1,
        orientation: Orientation::Infimum,
    }
}

/// `E1 = -E I`, `E2 = E M`, `F1 = 1 / E exp(r2 I)`, `F2 = 1 / E exp(-r1 M)`,
/// `G = F - 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct WHConstants {
    pub E1: f64,
    pub E2: f64,
    pub F1: f64,
    pub F2: f64,
    pub G1: f64,
    pub G2: f64,
}

pub fn constants(params: &ModelParams, roots: &RootPair) -> WHConstants {
    let (a1, a2) = (params.alpha1(), params.alpha2());
    let RootPair { r1, r2 } = *roots;
    let e1 = 1.0 / r1 - 1.0 / a1;
    let e2 = 1.0 / r2 - 1.0 / a2;
    // G written directly keeps F - 1 free of cancellation.
    let g1 = r2 * (a1 - r1) / (r1 * (a1 + r2));
    let g2 = r1 * (a2 - r2) / (r2 * (r1 + a2));
    WHConstants {
        E1: e1,
        E2: e2,
        F1: 1.0 + g1,
        F2: 1.0 + g2,
        G1: g1,
        G2: g2,
    }
}

impl WHConstants {
    /// Closed-form `F1` as `(alpha1/r1)(r1+r2)/(alpha1+r2)`, for cross-checks.
    pub fn f1_direct(params: &ModelParams, roots: &RootPair) -> f64 {
        params.alpha1() / roots.r1 * (roots.r1 + roots.r2) / (params.alpha1() + roots.r2)
    }

    /// Closed-form `F2` as `(alpha2/r2)(r1+r2)/(r1+alpha2)`, for cross-checks.
    pub fn f2_direct(params: &ModelParams, roots: &RootPair) -> f64 {
        params.alpha2() / roots.r2 * (roots.r1 + roots.r2) / (roots.r1 + params.alpha2())
    }
}
