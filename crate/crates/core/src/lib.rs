//! Two-sided optimal stopping of a compound Poisson process with two-sided
//! exponential jumps under the payoff `|x|`.
//!
//! The pipeline is: validate [`ModelParams`], solve the roots of the
//! characteristic exponent, build the extrema laws and their constants,
//! solve for the thresholds, then evaluate and verify the value function.
//! [`monte_carlo`] confirms the answer by exact path simulation.

pub mod cli;
pub mod error;
pub mod extrema_laws;
pub mod model;
pub mod monte_carlo;
pub mod quadrature;
pub mod smooth_pasting;
pub mod stats;
pub mod threshold_solver;
pub mod value_function;

pub use error::{Error, Result};
pub use extrema_laws::{ExtremaLaw, Orientation, WHConstants};
pub use model::{ModelParams, RootPair};
pub use monte_carlo::{SimEstimate, Simulator};
pub use smooth_pasting::{AngleReport, Threshold};
pub use threshold_solver::{solve, Solution, SolveReport};
pub use value_function::{GridSpec, ValueModel, VerificationReport};
