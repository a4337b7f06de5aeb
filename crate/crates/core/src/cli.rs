//! Command-line surface: `solve`, `verify`, `angle`, `simulate`, `curve`.
//!
//! Exit codes: 0 success, 1 input or validation error, 2 verification
//! failure, 3 internal solver failure.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::model::ModelParams;
use crate::monte_carlo::{SimEstimate, Simulator};
use crate::smooth_pasting::{angle_reports, AngleReport};
use crate::threshold_solver::{solve_report, Solution, SolveReport, CLOSED_FORM_TOLERANCE};
use crate::value_function::{GridSpec, ValueModel, VerificationReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_VERIFICATION: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;

/// Gate for the optimal rule, in standard errors.
pub const VALUE_GATE_SIGMAS: f64 = 4.0;
/// Gate for perturbed rules, in standard errors.
pub const DOMINANCE_GATE_SIGMAS: f64 = 3.0;

#[derive(Debug, Parser)]
#[command(name = "twosided", version, about = "Two-sided optimal stopping for a compound Poisson process with exponential jumps")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Rate of downward jump sizes
    #[arg(long, global = true)]
    pub alpha1: Option<f64>,
    /// Intensity of downward jumps
    #[arg(long, global = true)]
    pub lambda1: Option<f64>,
    /// Rate of upward jump sizes
    #[arg(long, global = true)]
    pub alpha2: Option<f64>,
    /// Intensity of upward jumps
    #[arg(long, global = true)]
    pub lambda2: Option<f64>,
    /// Discount rate
    #[arg(long, global = true)]
    pub r: Option<f64>,
    /// Flat TOML file with keys named like the flags; flags take precedence
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Write output here instead of standard output
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Table,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Roots, constants, thresholds and coefficients with residuals
    Solve,
    /// Check the representation and majorant conditions and the angles
    Verify(VerifyArgs),
    /// Angle of the value function at both thresholds
    Angle,
    /// Monte Carlo estimates of the discounted payoff
    Simulate(SimulateArgs),
    /// Value function and payoff on a grid, as CSV
    Curve(CurveArgs),
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Use the solution from a `solve --format json` document
    #[arg(long)]
    pub solution: Option<PathBuf>,
    #[arg(long)]
    pub interior_points: Option<usize>,
    #[arg(long)]
    pub exterior_points: Option<usize>,
    /// Shift the upper threshold before verifying (test hook)
    #[arg(long, hide = true, allow_hyphen_values = true)]
    pub corrupt_upper: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Paths per start point
    #[arg(long)]
    pub n: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Comma-separated start points; defaults to -x1, -x1/2, 0, x2/2, x2
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub starts: Option<Vec<f64>>,
    /// Also run rules with thresholds widened and narrowed by this amount
    #[arg(long)]
    pub perturb: Option<f64>,
}

#[derive(Debug, Args)]
pub struct CurveArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub grid_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub grid_max: Option<f64>,
    #[arg(long)]
    pub grid_points: Option<usize>,
}

/// Flat configuration file; every key mirrors a flag.
#[derive(Debug, Default, Clone, PartialEq, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct ConfigFile {
    pub alpha1: Option<f64>,
    pub lambda1: Option<f64>,
    pub alpha2: Option<f64>,
    pub lambda2: Option<f64>,
    pub r: Option<f64>,
    pub format: Option<Format>,
    pub output: Option<PathBuf>,
    pub n: Option<u64>,
    pub seed: Option<u64>,
    pub starts: Option<Vec<f64>>,
    pub perturb: Option<f64>,
    pub grid_min: Option<f64>,
    pub grid_max: Option<f64>,
    pub grid_points: Option<usize>,
    pub interior_points: Option<usize>,
    pub exterior_points: Option<usize>,
}

/// Resolved settings for one invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: ModelParams,
    pub format: Format,
    pub output: Option<PathBuf>,
    pub file: ConfigFile,
}

#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::NonPositiveParameter { .. }
            | Error::NonFinite { .. }
            | Error::OutOfDomain { .. }
            | Error::OutOfSupport { .. }
            | Error::InvalidInput(_) => EXIT_INPUT,
            Error::SolverFailure { .. }
            | Error::ConsistencyFailure { .. }
            | Error::QuadratureNonConvergence { .. } => EXIT_SOLVER,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn input_error(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_INPUT,
        message: message.into(),
    }
}

impl RunConfig {
    fn resolve(global: &GlobalArgs) -> Result<RunConfig, Failure> {
        let file = match &global.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| input_error(format!("cannot read {}: {e}", path.display())))?;
                toml::from_str::<ConfigFile>(&text)
                    .map_err(|e| input_error(format!("bad config {}: {e}", path.display())))?
            }
            None => ConfigFile::default(),
        };
        let pick = |flag: Option<f64>, key: Option<f64>| flag.or(key).unwrap_or(1.0);
        let params = ModelParams::new(
            pick(global.alpha1, file.alpha1),
            pick(global.lambda1, file.lambda1),
            pick(global.alpha2, file.alpha2),
            pick(global.lambda2, file.lambda2),
            pick(global.r, file.r),
        )?;
        Ok(RunConfig {
            params,
            format: global.format.or(file.format).unwrap_or(Format::Table),
            output: global.output.clone().or_else(|| file.output.clone()),
            file,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyOutput {
    pub params: ModelParams,
    pub solution: Solution,
    pub verification: VerificationReport,
    pub angles: [AngleReport; 2],
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngleOutput {
    pub params: ModelParams,
    pub solution: Solution,
    pub angles: [AngleReport; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartEstimate {
    pub start: f64,
    pub lower: f64,
    pub upper: f64,
    pub closed_form: f64,
    pub estimate: SimEstimate,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbedEstimate {
    pub start: f64,
    /// Positive widens the continuation region, negative narrows it.
    pub shift: f64,
    pub lower: f64,
    pub upper: f64,
    pub closed_form: f64,
    pub estimate: SimEstimate,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateOutput {
    pub params: ModelParams,
    pub solution: Solution,
    pub n: u64,
    pub seed: u64,
    pub t_max: f64,
    pub optimal: Vec<StartEstimate>,
    pub perturbed: Vec<PerturbedEstimate>,
    pub passed: bool,
}

/// Slack for comparisons where the closed form and the estimate agree
/// exactly up to rounding (immediate stops have zero standard error).
fn rounding_slack(value: f64) -> f64 {
    CLOSED_FORM_TOLERANCE * value.abs().max(1.0)
}

/// Verification of a model (with an optional corrupted upper threshold).
pub fn verify_model(model: &ValueModel, grid: &GridSpec) -> VerifyOutput {
    let verification = model.verify_hypotheses(grid);
    let angles = angle_reports(model);
    let passed = verification.passed && angles.iter().all(AngleReport::consistent);
    VerifyOutput {
        params: model.params,
        solution: model.solution,
        verification,
        angles,
        passed,
    }
}

/// Canonical start points `-x1, -x1/2, 0, x2/2, x2`.
pub fn default_starts(solution: &Solution) -> Vec<f64> {
    vec![-solution.x1, -solution.x1 / 2.0, 0.0, solution.x2 / 2.0, solution.x2]
}

/// Monte Carlo run behind `simulate`.
pub fn simulate(
    model: &ValueModel,
    starts: &[f64],
    n: u64,
    seed: u64,
    perturb: Option<f64>,
) -> crate::Result<SimulateOutput> {
    let sim = Simulator::new(model.params);
    let s = model.solution;
    let mut optimal = Vec::with_capacity(starts.len());
    for &start in starts {
        let estimate = sim.estimate_value(&s, start, n, seed)?;
        let closed_form = model.value_at(start);
        let passed = !estimate.truncation_flagged
            && estimate.within(closed_form, VALUE_GATE_SIGMAS, rounding_slack(closed_form));
        optimal.push(StartEstimate {
            start,
            lower: -s.x1,
            upper: s.x2,
            closed_form,
            estimate,
            passed,
        });
    }
    let mut perturbed = Vec::new();
    if let Some(delta) = perturb {
        for &start in starts {
            for shift in [delta, -delta] {
                let (lower, upper) = (-s.x1 - shift, s.x2 + shift);
                let estimate = sim.estimate_value_with_thresholds(lower, upper, start, n, seed)?;
                let closed_form = model.value_at(start);
                let passed = !estimate.truncation_flagged
                    && estimate.at_most(closed_form, DOMINANCE_GATE_SIGMAS, rounding_slack(closed_form));
                perturbed.push(PerturbedEstimate {
                    start,
                    shift,
                    lower,
                    upper,
                    closed_form,
                    estimate,
                    passed,
                });
            }
        }
    }
    let passed = optimal.iter().all(|e| e.passed) && perturbed.iter().all(|e| e.passed);
    Ok(SimulateOutput {
        params: model.params,
        solution: s,
        n,
        seed,
        t_max: sim.t_max,
        optimal,
        perturbed,
        passed,
    })
}

/// Rows `(x, V(x), |x|)` on an equally spaced grid.
pub fn curve_rows(model: &ValueModel, min: f64, max: f64, points: usize) -> crate::Result<Vec<(f64, f64, f64)>> {
    if points == 0 {
        return Err(Error::InvalidInput("grid needs at least one point".into()));
    }
    if !(min.is_finite() && max.is_finite()) || min > max {
        return Err(Error::InvalidInput(format!("bad grid bounds [{min}, {max}]")));
    }
    Ok((0..points)
        .map(|k| {
            let x = if points == 1 {
                min
            } else if k + 1 == points {
                max
            } else {
                min + (max - min) * k as f64 / (points - 1) as f64
            };
            (x, model.value_at(x), model.payoff(x))
        })
        .collect())
}

pub fn curve_csv(rows: &[(f64, f64, f64)]) -> String {
    let mut out = String::from("x,V,g\n");
    for (x, v, g) in rows {
        out.push_str(&format!("{x:?},{v:?},{g:?}\n"));
    }
    out
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

fn line(out: &mut String, key: &str, value: impl std::fmt::Display) {
    out.push_str(&format!("{key:<28} {value}\n"));
}

fn solve_table(rep: &SolveReport) -> String {
    let mut out = String::new();
    let c = &rep.constants;
    let s = &rep.solution;
    let d = &rep.diagnostics;
    line(&mut out, "r1", rep.roots.r1);
    line(&mut out, "r2", rep.roots.r2);
    line(&mut out, "root residual (lower)", format!("{:e}", rep.root_diagnostics.lower_residual));
    line(&mut out, "root residual (upper)", format!("{:e}", rep.root_diagnostics.upper_residual));
    line(&mut out, "pole margin", rep.root_diagnostics.pole_margin);
    for (k, v) in [("E1", c.E1), ("E2", c.E2), ("F1", c.F1), ("F2", c.F2), ("G1", c.G1), ("G2", c.G2)] {
        line(&mut out, k, v);
    }
    for (k, v) in [("u", s.u), ("x1", s.x1), ("x2", s.x2), ("D1", s.D1), ("D2", s.D2)] {
        line(&mut out, k, v);
    }
    line(&mut out, "u bracket", format!("[{}, {}]", d.u_bracket.0, d.u_bracket.1));
    for (k, v) in [
        ("fixed point residual", d.fixed_point_residual),
        ("alternative residual", d.alternative_residual),
        ("width residual", d.width_residual),
        ("system residual (lower)", d.system_lower_residual),
        ("system residual (upper)", d.system_upper_residual),
        ("Q1(-x1) residual", d.lower_root_residual),
        ("Q2(x2) residual", d.upper_root_residual),
        ("D1 identity residual", d.d1_identity_residual),
    ] {
        line(&mut out, k, format!("{v:e}"));
    }
    out
}

fn angles_table(out: &mut String, angles: &[AngleReport; 2]) {
    for a in angles {
        let tag = match a.threshold {
            crate::smooth_pasting::Threshold::Lower => "lower",
            crate::smooth_pasting::Threshold::Upper => "upper",
        };
        line(out, &format!("{tag} threshold"), a.location);
        line(out, &format!("{tag} direct jump"), a.direct_jump);
        line(out, &format!("{tag} atom jump"), a.theorem_jump);
        line(out, &format!("{tag} agreement"), format!("{:e}", a.agreement_residual));
        line(out, &format!("{tag} finite difference"), a.finite_difference_jump);
        line(out, &format!("{tag} smooth pasting"), a.smooth_pasting_holds);
        line(out, &format!("{tag} moment condition"), a.exponential_moment_ok);
    }
}

fn verify_table(v: &VerifyOutput) -> String {
    let mut out = String::new();
    let r = &v.verification;
    line(&mut out, "x1", v.solution.x1);
    line(&mut out, "x2", v.solution.x2);
    line(&mut out, "representation error", format!("{:e}", r.representation_sup_error));
    line(&mut out, "majorant min gap", format!("{:e}", r.majorant_min_gap));
    line(&mut out, "Q1 monotone", r.q1_monotone);
    line(&mut out, "Q2 monotone", r.q2_monotone);
    line(&mut out, "Q1 continuity residual", format!("{:e}", r.q1_threshold_residual));
    line(&mut out, "Q2 continuity residual", format!("{:e}", r.q2_threshold_residual));
    for e in &r.quadrature_errors {
        line(&mut out, "quadrature error", e);
    }
    angles_table(&mut out, &v.angles);
    line(&mut out, "passed", v.passed);
    out
}

fn simulate_table(s: &SimulateOutput) -> String {
    let mut out = String::new();
    line(&mut out, "paths per start", s.n);
    line(&mut out, "seed", s.seed);
    out.push_str("start, lower, upper, V, mean, stderr, truncated, passed\n");
    for e in &s.optimal {
        out.push_str(&format!(
            "{}, {}, {}, {}, {}, {}, {}, {}\n",
            e.start, e.lower, e.upper, e.closed_form, e.estimate.mean, e.estimate.stderr, e.estimate.truncated_count, e.passed
        ));
    }
    for e in &s.perturbed {
        out.push_str(&format!(
            "{}, {}, {}, {}, {}, {}, {}, {}\n",
            e.start, e.lower, e.upper, e.closed_form, e.estimate.mean, e.estimate.stderr, e.estimate.truncated_count, e.passed
        ));
    }
    line(&mut out, "passed", s.passed);
    out
}

fn render<T: Serialize>(format: Format, value: &T, table: impl FnOnce(&T) -> String) -> String {
    match format {
        Format::Json => json(value),
        Format::Table => table(value),
    }
}

fn execute(cli: &Cli) -> Result<(String, i32), Failure> {
    let config = RunConfig::resolve(&cli.global)?;
    let file = &config.file;
    match &cli.command {
        Command::Solve => {
            let rep = solve_report(&config.params)?;
            Ok((render(config.format, &rep, solve_table), EXIT_OK))
        }
        Command::Verify(args) => {
            let mut model = match &args.solution {
                Some(path) => model_from_solution_file(path)?,
                None => ValueModel::new(config.params)?,
            };
            if let Some(delta) = args.corrupt_upper {
                let mut s = model.solution;
                s.x2 += delta;
                model = model.with_solution(s);
            }
            let defaults = GridSpec::default();
            let grid = GridSpec {
                interior_points: args.interior_points.or(file.interior_points).unwrap_or(defaults.interior_points),
                exterior_points: args.exterior_points.or(file.exterior_points).unwrap_or(defaults.exterior_points),
                ..defaults
            };
            let out = verify_model(&model, &grid);
            let code = if out.passed { EXIT_OK } else { EXIT_VERIFICATION };
            Ok((render(config.format, &out, verify_table), code))
        }
        Command::Angle => {
            let model = ValueModel::new(config.params)?;
            let out = AngleOutput {
                params: model.params,
                solution: model.solution,
                angles: angle_reports(&model),
            };
            Ok((
                render(config.format, &out, |o| {
                    let mut s = String::new();
                    angles_table(&mut s, &o.angles);
                    s
                }),
                EXIT_OK,
            ))
        }
        Command::Simulate(args) => {
            let model = ValueModel::new(config.params)?;
            let n = args.n.or(file.n).unwrap_or(100_000);
            if n == 0 {
                return Err(input_error("--n must be at least 1"));
            }
            let seed = args.seed.or(file.seed).unwrap_or(0);
            let starts = args
                .starts
                .clone()
                .or_else(|| file.starts.clone())
                .unwrap_or_else(|| default_starts(&model.solution));
            let perturb = args.perturb.or(file.perturb);
            let out = simulate(&model, &starts, n, seed, perturb)?;
            let code = if out.passed { EXIT_OK } else { EXIT_VERIFICATION };
            Ok((render(config.format, &out, simulate_table), code))
        }
        Command::Curve(args) => {
            let model = ValueModel::new(config.params)?;
            let min = args.grid_min.or(file.grid_min).unwrap_or(-3.0);
            let max = args.grid_max.or(file.grid_max).unwrap_or(3.0);
            let points = args.grid_points.or(file.grid_points).unwrap_or(601);
            let rows = curve_rows(&model, min, max, points)?;
            Ok((curve_csv(&rows), EXIT_OK))
        }
    }
}

/// Rebuilds a model from a `solve --format json` document.
pub fn model_from_solution_file(path: &Path) -> crate::Result<ValueModel> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", path.display())))?;
    let rep: SolveReport = serde_json::from_str(&text)
        .map_err(|e| Error::InvalidInput(format!("bad solution file {}: {e}", path.display())))?;
    Ok(ValueModel::new(rep.params)?.with_solution(rep.solution))
}

/// Parses `args` and runs one subcommand, writing results to `stdout` (or
/// the configured output file) and diagnostics to `stderr`.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = write!(stderr, "{e}");
            if !e.use_stderr() {
                let _ = write!(stdout, "{e}");
            }
            return code;
        }
    };
    let (text, code) = match execute(&cli) {
        Ok(done) => done,
        Err(f) => {
            let _ = writeln!(stderr, "error: {}", f.message);
            return f.code;
        }
    };
    let destination = cli.global.output.clone().or_else(|| {
        cli.global
            .config
            .as_ref()
            .and_then(|p| fs::read_to_string(p).ok())
            .and_then(|t| toml::from_str::<ConfigFile>(&t).ok())
            .and_then(|c| c.output)
    });
    match destination {
        Some(path) => {
            if let Err(e) = fs::write(&path, text) {
                let _ = writeln!(stderr, "error: cannot write {}: {e}", path.display());
                return EXIT_INPUT;
            }
        }
        None => {
            let _ = stdout.write_all(text.as_bytes());
        }
    }
    code
}

pub fn main() -> i32 {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock())
}
