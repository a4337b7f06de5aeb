//! Exact simulation of the compound Poisson path.
//!
//! The path is constant between jumps, so the first exit from an interval
//! happens at a jump epoch and can be simulated without discretisation:
//! interarrival times are `Exp(lambda1 + lambda2)` and each jump is down
//! `Exp(alpha1)` with probability `lambda1 / (lambda1 + lambda2)`, otherwise
//! up `Exp(alpha2)`.
//!
//! Path `i` of a run with master seed `s` always draws from ChaCha8 stream
//! `i` keyed by `s`, and per-chunk statistics are merged in chunk order, so
//! results do not depend on the number of worker threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::threshold_solver::Solution;

/// Default horizon cap, in units of `1 / r`.
pub const DEFAULT_HORIZON_SCALE: f64 = 50.0;
/// Default ceiling on the fraction of truncated paths.
pub const DEFAULT_TRUNCATION_CEILING: f64 = 1e-6;

const CHUNK: usize = 4096;
/// Separates the extrema streams from the stopping-rule streams.
const EXTREMA_DOMAIN: u64 = 0x6a09_e667_f3bc_c909;

/// Outcome of one path under a two-sided exit rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathOutcome {
    /// `None` if the path was still inside the interval at the time cap.
    pub exit_time: Option<f64>,
    /// Position at exit, or at the cap if truncated.
    pub exit_position: f64,
    /// `e^{-r tau} |X_tau|`, zero for truncated paths.
    pub discounted_payoff: f64,
}

impl PathOutcome {
    pub fn is_truncated(&self) -> bool {
        self.exit_time.is_none()
    }
}

/// Sample mean of discounted payoffs with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: u64,
    pub truncated_count: u64,
    /// Set when `truncated_count / n` exceeds the configured ceiling.
    pub truncation_flagged: bool,
}

impl SimEstimate {
    /// Whether `|mean - target| <= k * stderr + slack`.
    pub fn within(&self, target: f64, k: f64, slack: f64) -> bool {
        (self.mean - target).abs() <= k * self.stderr + slack
    }

    /// Whether `mean <= target + k * stderr + slack`.
    pub fn at_most(&self, target: f64, k: f64, slack: f64) -> bool {
        self.mean <= target + k * self.stderr + slack
    }
}

/// Welford accumulator; merged in a fixed order for reproducibility.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: u64,
    mean: f64,
    m2: f64,
    truncated: u64,
}

impl Moments {
    fn push(&mut self, value: f64) {
        self.n += 1;
        let delta = value - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (value - self.mean);
    }

    fn merge(self, other: Moments) -> Moments {
        if self.n == 0 {
            return other;
        }
        if other.n == 0 {
            return self;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        Moments {
            n,
            mean: self.mean + delta * other.n as f64 / n as f64,
            m2: self.m2 + other.m2 + delta * delta * (self.n as f64 * other.n as f64) / n as f64,
            truncated: self.truncated + other.truncated,
        }
    }
}

/// Simulation settings for one parameter set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Simulator {
    pub params: ModelParams,
    pub t_max: f64,
    pub truncation_ceiling: f64,
}

impl Simulator {
    pub fn new(params: ModelParams) -> Self {
        Simulator {
            params,
            t_max: DEFAULT_HORIZON_SCALE / params.r(),
            truncation_ceiling: DEFAULT_TRUNCATION_CEILING,
        }
    }

    pub fn with_t_max(self, t_max: f64) -> Self {
        Simulator { t_max, ..self }
    }

    /// Discounted payoff of the optimal rule `exit (-x1, x2)`.
    pub fn estimate_value(&self, solution: &Solution, start: f64, n: u64, seed: u64) -> Result<SimEstimate> {
        self.estimate_value_with_thresholds(-solution.x1, solution.x2, start, n, seed)
    }

    /// Discounted payoff of the rule `exit (lower, upper)`.
    pub fn estimate_value_with_thresholds(
        &self,
        lower: f64,
        upper: f64,
        start: f64,
        n: u64,
        seed: u64,
    ) -> Result<SimEstimate> {
        check_interval(lower, upper)?;
        if n == 0 {
            return Err(Error::InvalidInput("sample count must be at least 1".into()));
        }
        let key = stream_key(seed);
        let chunks = n.div_ceil(CHUNK as u64);
        let partials: Vec<Moments> = (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut acc = Moments::default();
                let first = c * CHUNK as u64;
                let last = (first + CHUNK as u64).min(n);
                for i in first..last {
                    let mut rng = path_rng(&key, i);
                    let outcome = simulate_path(&self.params, start, lower, upper, &mut rng, self.t_max);
                    if outcome.is_truncated() {
                        acc.truncated += 1;
                    }
                    acc.push(outcome.discounted_payoff);
                }
                acc
            })
            .collect();
        let total = partials.into_iter().fold(Moments::default(), Moments::merge);
        let variance = if total.n > 1 { total.m2 / (total.n - 1) as f64 } else { 0.0 };
        Ok(SimEstimate {
            mean: total.mean,
            stderr: (variance / total.n as f64).sqrt(),
            n: total.n,
            truncated_count: total.truncated,
            truncation_flagged: total.truncated as f64 / total.n as f64 > self.truncation_ceiling,
        })
    }

    /// Individual path outcomes, in path order.
    pub fn sample_paths(&self, lower: f64, upper: f64, start: f64, n: u64, seed: u64) -> Result<Vec<PathOutcome>> {
        check_interval(lower, upper)?;
        let key = stream_key(seed);
        Ok((0..n)
            .into_par_iter()
            .map(|i| {
                let mut rng = path_rng(&key, i);
                simulate_path(&self.params, start, lower, upper, &mut rng, self.t_max)
            })
            .collect())
    }

    /// Overall supremum and infimum of paths from 0 killed at an
    /// independent `Exp(r)` time.
    pub fn sample_extrema(&self, n: u64, seed: u64) -> ExtremaSample {
        let key = stream_key(seed ^ EXTREMA_DOMAIN);
        let pairs: Vec<(f64, f64)> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut rng = path_rng(&key, i);
                killed_extrema(&self.params, &mut rng)
            })
            .collect();
        let mut sample = ExtremaSample {
            n,
            supremum_atoms: 0,
            infimum_atoms: 0,
            supremum_positive: Vec::new(),
            infimum_negative: Vec::new(),
        };
        for (max, min) in pairs {
            if max == 0.0 {
                sample.supremum_atoms += 1;
            } else {
                sample.supremum_positive.push(max);
            }
            if min == 0.0 {
                sample.infimum_atoms += 1;
            } else {
                sample.infimum_negative.push(min);
            }
        }
        sample
    }
}

/// Empirical law of the killed extrema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtremaSample {
    pub n: u64,
    /// Paths whose supremum is exactly 0.
    pub supremum_atoms: u64,
    /// Paths whose infimum is exactly 0.
    pub infimum_atoms: u64,
    /// Suprema of the remaining paths (all `> 0`).
    pub supremum_positive: Vec<f64>,
    /// Infima of the remaining paths (all `< 0`).
    pub infimum_negative: Vec<f64>,
}

impl ExtremaSample {
    pub fn supremum_atom_frequency(&self) -> f64 {
        self.supremum_atoms as f64 / self.n as f64
    }

    pub fn infimum_atom_frequency(&self) -> f64 {
        self.infimum_atoms as f64 / self.n as f64
    }
}

fn check_interval(lower: f64, upper: f64) -> Result<()> {
    if !(lower < upper) {
        return Err(Error::InvalidInput(format!(
            "stopping interval ({lower}, {upper}) is empty"
        )));
    }
    Ok(())
}

fn stream_key(seed: u64) -> [u8; 32] {
    ChaCha8Rng::seed_from_u64(seed).get_seed()
}

fn path_rng(key: &[u8; 32], index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::from_seed(*key);
    rng.set_stream(index);
    rng
}

fn exponential<R: Rng + ?Sized>(rng: &mut R, rate: f64) -> f64 {
    let e: f64 = rng.sample(Exp1);
    e / rate
}

/// Signed size of the next jump.
fn jump<R: Rng + ?Sized>(params: &ModelParams, rng: &mut R) -> f64 {
    let down_probability = params.lambda1() / params.total_intensity();
    if rng.random::<f64>() < down_probability {
        -exponential(rng, params.alpha1())
    } else {
        exponential(rng, params.alpha2())
    }
}

/// First exit of the path from the open interval `(lower, upper)`.
pub fn simulate_path<R: Rng + ?Sized>(
    params: &ModelParams,
    start: f64,
    lower: f64,
    upper: f64,
    rng: &mut R,
    t_max: f64,
) -> PathOutcome {
    let stopped = |x: f64| x <= lower || x >= upper;
    let r = params.r();
    let intensity = params.total_intensity();
    let mut t = 0.0;
    let mut x = start;
    loop {
        if stopped(x) {
            return PathOutcome {
                exit_time: Some(t),
                exit_position: x,
                discounted_payoff: (-r * t).exp() * x.abs(),
            };
        }
        t += exponential(rng, intensity);
        if t > t_max {
            return PathOutcome {
                exit_time: None,
                exit_position: x,
                discounted_payoff: 0.0,
            };
        }
        x += jump(params, rng);
    }
}

fn killed_extrema<R: Rng + ?Sized>(params: &ModelParams, rng: &mut R) -> (f64, f64) {
    let horizon = exponential(rng, params.r());
    let intensity = params.total_intensity();
    let (mut t, mut x, mut max, mut min) = (0.0, 0.0f64, 0.0f64, 0.0f64);
    loop {
        t += exponential(rng, intensity);
        if t > horizon {
            return (max, min);
        }
        x += jump(params, rng);
        max = max.max(x);
        min = min.min(x);
    }
}

/// Overshoots beyond each boundary, `(below lower, above upper)`, both as
/// positive distances. Truncated paths and paths that start outside are
/// skipped.
pub fn overshoots(outcomes: &[PathOutcome], lower: f64, upper: f64) -> (Vec<f64>, Vec<f64>) {
    let mut below = Vec::new();
    let mut above = Vec::new();
    for o in outcomes {
        match o.exit_time {
            Some(t) if t > 0.0 => {
                if o.exit_position <= lower {
                    below.push(lower - o.exit_position);
                } else {
                    above.push(o.exit_position - upper);
                }
            }
            _ => {}
        }
    }
    (below, above)
}

pub fn estimate_value(params: &ModelParams, solution: &Solution, start: f64, n: u64, seed: u64) -> Result<SimEstimate> {
    Simulator::new(*params).estimate_value(solution, start, n, seed)
}

pub fn estimate_value_with_thresholds(
    params: &ModelParams,
    lower: f64,
    upper: f64,
    start: f64,
    n: u64,
    seed: u64,
) -> Result<SimEstimate> {
    Simulator::new(*params).estimate_value_with_thresholds(lower, upper, start, n, seed)
}

pub fn sample_extrema(params: &ModelParams, n: u64, seed: u64) -> ExtremaSample {
    Simulator::new(*params).sample_extrema(n, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{exponential_cdf, ks_critical_value, ks_statistic};
    use crate::threshold_solver::solve;
    use crate::value_function::ValueModel;

    fn params(p: (f64, f64, f64, f64, f64)) -> ModelParams {
        ModelParams::new(p.0, p.1, p.2, p.3, p.4).unwrap()
    }

    #[test]
    fn start_outside_stops_immediately() {
        let p = params((1.0, 1.0, 1.0, 1.0, 1.0));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let out = simulate_path(&p, 2.5, -1.0, 1.5, &mut rng, 50.0);
        assert_eq!(out.exit_time, Some(0.0));
        assert_eq!(out.discounted_payoff, 2.5);
        let out = simulate_path(&p, -1.0, -1.0, 1.5, &mut rng, 50.0);
        assert_eq!(out.exit_time, Some(0.0));
        assert_eq!(out.discounted_payoff, 1.0);
    }

    #[test]
    fn exits_land_outside_the_interval() {
        let p = params((1.0, 3.0, 3.0, 1.0, 1.0));
        let sim = Simulator::new(p);
        for o in sim.sample_paths(-1.0, 0.8, 0.0, 2000, 3).unwrap() {
            assert!(!o.is_truncated());
            assert!(o.exit_position <= -1.0 || o.exit_position >= 0.8);
            assert!(o.discounted_payoff >= 0.0);
        }
    }

    #[test]
    fn time_cap_truncates_with_zero_payoff() {
        let p = params((1.0, 1.0, 1.0, 1.0, 1.0));
        let sim = Simulator::new(p).with_t_max(1e-9);
        let est = sim.estimate_value_with_thresholds(-50.0, 50.0, 0.0, 100, 9).unwrap();
        assert_eq!(est.truncated_count, 100);
        assert!(est.truncation_flagged);
        assert_eq!(est.mean, 0.0);
    }

    #[test]
    fn immediate_stop_has_zero_error() {
        let p = params((1.0, 1.0, 1.0, 1.0, 1.0));
        let s = solve(&p).unwrap();
        let est = estimate_value(&p, &s, s.x2 + 0.5, 1000, 42).unwrap();
        assert_eq!(est.mean, s.x2 + 0.5);
        assert_eq!(est.stderr, 0.0);
    }

    #[test]
    fn estimate_is_reproducible_and_thread_independent() {
        let p = params((1.0, 3.0, 3.0, 1.0, 1.0));
        let s = solve(&p).unwrap();
        let run = |threads: usize| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| estimate_value(&p, &s, 0.0, 20_000, 42).unwrap())
        };
        let a = run(1);
        let b = run(4);
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
        assert_eq!(a.stderr.to_bits(), b.stderr.to_bits());
    }

    #[test]
    fn optimal_rule_matches_closed_form() {
        let p = params((1.0, 1.0, 1.0, 1.0, 1.0));
        let m = ValueModel::new(p).unwrap();
        let est = estimate_value(&p, &m.solution, 0.0, 100_000, 7).unwrap();
        assert!(est.within(m.value_at(0.0), 4.0, 0.0), "{est:?}");
    }

    #[test]
    fn same_thresholds_same_estimate() {
        let p = params((1.0, 3.0, 3.0, 1.0, 1.0));
        let s = solve(&p).unwrap();
        let a = estimate_value(&p, &s, 0.0, 5000, 1).unwrap();
        let b = estimate_value_with_thresholds(&p, -s.x1, s.x2, 0.0, 5000, 1).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn overshoots_are_exponential() {
        let p = params((1.0, 3.0, 3.0, 1.0, 1.0));
        let sim = Simulator::new(p);
        let outcomes = sim.sample_paths(-1.0, 0.8, 0.0, 40_000, 5).unwrap();
        let (below, above) = overshoots(&outcomes, -1.0, 0.8);
        let d_below = ks_statistic(&below, exponential_cdf(1.0));
        let d_above = ks_statistic(&above, exponential_cdf(3.0));
        assert!(d_below < ks_critical_value(below.len(), 0.01), "{d_below}");
        assert!(d_above < ks_critical_value(above.len(), 0.01), "{d_above}");
    }

    #[test]
    fn rejects_empty_interval_and_zero_samples() {
        let p = params((1.0, 1.0, 1.0, 1.0, 1.0));
        assert!(estimate_value_with_thresholds(&p, 1.0, 1.0, 0.0, 10, 1).is_err());
        assert!(estimate_value_with_thresholds(&p, -1.0, 1.0, 0.0, 0, 1).is_err());
    }

    #[test]
    fn moments_merge_matches_single_pass() {
        let values: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 / 7.0).collect();
        let mut whole = Moments::default();
        values.iter().for_each(|&v| whole.push(v));
        let merged = values
            .chunks(97)
            .map(|c| {
                let mut m = Moments::default();
                c.iter().for_each(|&v| m.push(v));
                m
            })
            .fold(Moments::default(), Moments::merge);
        assert!((whole.mean - merged.mean).abs() < 1e-12);
        assert!((whole.m2 - merged.m2).abs() < 1e-8);
    }
}
