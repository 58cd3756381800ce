//! Benchmark harness: runs the built-in cases, writes iteration and error
//! tables as CSV, and cross-checks retarded linear cases against the RK4
//! oracle.
//!
//! Exit codes: 0 when the adaptive loop converged, 2 when it ran out of
//! iterations, 1 on runtime errors, 64 on usage errors.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::adapt::{
    self, PiecewiseSolution, RsaConfig, RsaIteration, RsaReport, RsaStatus,
};
use crate::collocation::Interpolant;
use crate::oracle;
use crate::problem::{alt_rsa_preset, case_names, make_benchmark, BenchmarkCase, Solution};
use crate::{Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

/// Everything one benchmark invocation needs.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub case: String,
    pub params: Vec<(String, f64)>,
    pub overrides: RsaOverrides,
    /// Evaluation-point count for the error metric and solution table.
    pub n_ev: usize,
    pub out_dir: PathBuf,
    /// Reserved for randomized diagnostics; recorded in the output header.
    pub seed: u64,
    /// Also run the oracle comparison after a `run`.
    pub with_oracle: bool,
    pub oracle_h: f64,
    /// Use the case's alternate adaptive preset where one exists.
    pub alt_preset: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            case: String::new(),
            params: vec![],
            overrides: RsaOverrides::default(),
            n_ev: 103,
            out_dir: PathBuf::from("out"),
            seed: 0,
            with_oracle: false,
            oracle_h: 1e-3,
            alt_preset: false,
        }
    }
}

/// Optional per-run replacements for the case's adaptive preset.
#[derive(Debug, Clone, Default)]
pub struct RsaOverrides {
    pub n0: Option<usize>,
    pub itmax: Option<usize>,
    pub theta_max: Option<f64>,
    pub theta_min: Option<f64>,
    pub mu: Option<f64>,
    pub gamma: Option<f64>,
    pub lambda: Option<f64>,
    pub eta: Option<f64>,
}

impl RsaOverrides {
    pub fn apply(&self, mut rsa: RsaConfig) -> RsaConfig {
        if let Some(n0) = self.n0 {
            rsa.n0 = n0;
            // mu tracks the initial grid unless pinned explicitly
            if self.mu.is_none() {
                rsa.mu = (40.0 / n0 as f64).sqrt();
            }
        }
        if let Some(v) = self.itmax {
            rsa.itmax = v;
        }
        if let Some(v) = self.theta_max {
            rsa.theta_max = v;
        }
        if let Some(v) = self.theta_min {
            rsa.theta_min = v;
        }
        if let Some(v) = self.mu {
            rsa.mu = v;
        }
        if let Some(v) = self.gamma {
            rsa.gamma = v;
        }
        if let Some(v) = self.lambda {
            rsa.lambda = v;
        }
        if let Some(v) = self.eta {
            rsa.eta = v;
        }
        rsa
    }
}

/// Root-mean-squared gap between two solutions over `n_ev` equispaced
/// points in `[a, b]`, endpoints included.
pub fn rms_error(
    approx: &dyn Solution,
    exact: &dyn Solution,
    a: f64,
    b: f64,
    n_ev: usize,
) -> Result<f64> {
    if n_ev < 2 {
        return Err(Error::invalid("n_ev must be at least 2"));
    }
    adapt::rms_between(approx, exact, a, b, n_ev)
}

/// A finished solve, single-domain or piecewise.
pub enum SolvedCase {
    Single(Interpolant, RsaReport),
    Piecewise(PiecewiseSolution),
}

impl SolvedCase {
    pub fn converged(&self) -> bool {
        match self {
            SolvedCase::Single(_, report) => report.status == RsaStatus::ResidualConverged,
            SolvedCase::Piecewise(sol) => sol.all_converged(),
        }
    }

    pub fn total_dof(&self) -> usize {
        match self {
            SolvedCase::Single(_, report) => report.final_dof(),
            SolvedCase::Piecewise(sol) => sol.total_dof(),
        }
    }

    pub fn records(&self) -> Vec<&RsaIteration> {
        match self {
            SolvedCase::Single(_, report) => report.iterations.iter().collect(),
            SolvedCase::Piecewise(sol) => sol
                .pieces
                .iter()
                .flat_map(|p| p.report.iterations.iter())
                .collect(),
        }
    }
}

impl Solution for SolvedCase {
    fn value(&self, x: f64, order: usize) -> Result<f64> {
        match self {
            SolvedCase::Single(interp, _) => interp.eval(x, order),
            SolvedCase::Piecewise(sol) => sol.value(x, order),
        }
    }
}

/// Resolves the adaptive settings for a case under a run configuration.
pub fn resolved_rsa(case: &BenchmarkCase, config: &RunConfig) -> RsaConfig {
    let base = if config.alt_preset {
        alt_rsa_preset(&case.name).unwrap_or_else(|| case.rsa.clone())
    } else {
        case.rsa.clone()
    };
    let mut rsa = config.overrides.apply(base);
    rsa.n_ev = config.n_ev;
    rsa
}

/// Solves a case with its resolved settings, piecewise when breakpoints
/// are registered.
pub fn solve_case(
    case: &BenchmarkCase,
    rsa: &RsaConfig,
) -> std::result::Result<SolvedCase, (Error, Vec<RsaIteration>)> {
    let guess = case.guess.clone();
    let guess_ref = guess.as_deref();
    if case.breakpoints.is_empty() {
        match adapt::run_rsa(&case.problem, rsa, Some(&case.exact), guess_ref) {
            Ok((interp, report)) => Ok(SolvedCase::Single(interp, report)),
            Err(failure) => Err((failure.error, failure.report.iterations)),
        }
    } else {
        match adapt::solve_piecewise(
            &case.problem,
            &case.breakpoints,
            rsa,
            Some(&case.exact),
            guess_ref,
        ) {
            Ok(sol) => Ok(SolvedCase::Piecewise(sol)),
            Err(failure) => {
                let mut records: Vec<RsaIteration> = failure
                    .completed
                    .iter()
                    .flat_map(|p| p.report.iterations.iter().cloned())
                    .collect();
                records.extend(failure.failure.report.iterations.iter().cloned());
                Err((failure.failure.error, records))
            }
        }
    }
}

fn sci(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

fn write_iterations_csv(path: &Path, records: &[&RsaIteration]) -> Result<()> {
    let mut text = String::from("iter,dof,max_residual,cond,rms,nl_iters\n");
    for r in records {
        let rms = r.rms.map(sci).unwrap_or_default();
        let nl = r.nl_iters.map(|n| n.to_string()).unwrap_or_default();
        let _ = writeln!(
            text,
            "{},{},{},{},{},{}",
            r.iteration,
            r.dof,
            sci(r.max_residual),
            sci(r.condition),
            rms,
            nl
        );
    }
    fs::write(path, text).map_err(|e| Error::invalid(format!("write {path:?}: {e}")))
}

fn write_errors_csv(path: &Path, case: &BenchmarkCase, sol: &dyn Solution) -> Result<()> {
    let mut text = String::from("x,abs_err\n");
    for &x in &case.error_abscissae {
        let err = (sol.value(x, 0)? - case.exact_eval(x)?).abs();
        let _ = writeln!(text, "{},{}", sci(x), sci(err));
    }
    fs::write(path, text).map_err(|e| Error::invalid(format!("write {path:?}: {e}")))
}

fn write_solution_csv(
    path: &Path,
    case: &BenchmarkCase,
    sol: &dyn Solution,
    n_ev: usize,
) -> Result<()> {
    let (a, b) = (case.problem.a(), case.problem.b());
    let mut text = String::from("x,y_approx,y_exact,abs_err\n");
    for i in 0..n_ev {
        let x = a + (b - a) * i as f64 / (n_ev - 1) as f64;
        let approx = sol.value(x, 0).map_err(|e| Error::at(x, e))?;
        let exact = case.exact.eval(x);
        let _ = writeln!(
            text,
            "{},{},{},{}",
            sci(x),
            sci(approx),
            sci(exact),
            sci((approx - exact).abs())
        );
    }
    fs::write(path, text).map_err(|e| Error::invalid(format!("write {path:?}: {e}")))
}

/// Runs one case end to end: solve, write `iterations.csv`, `errors.csv`,
/// and `solution.csv` under `<out>/<case>/`, and return the exit status.
pub fn run_benchmark(config: &RunConfig) -> i32 {
    let case = match make_benchmark(&config.case, &config.params) {
        Ok(case) => case,
        Err(e) => {
            eprintln!("mqcm: {e}");
            return EXIT_USAGE;
        }
    };
    let rsa = resolved_rsa(&case, config);
    let dir = config.out_dir.join(&case.name);
    if let Err(e) = fs::create_dir_all(&dir) {
        eprintln!("mqcm: cannot create {dir:?}: {e}");
        return EXIT_RUNTIME;
    }

    match solve_case(&case, &rsa) {
        Ok(solved) => {
            let records = solved.records();
            let rms = rms_error(
                &solved,
                &case.exact,
                case.problem.a(),
                case.problem.b(),
                config.n_ev,
            );
            if let Err(e) = write_iterations_csv(&dir.join("iterations.csv"), &records)
                .and_then(|_| write_errors_csv(&dir.join("errors.csv"), &case, &solved))
                .and_then(|_| write_solution_csv(&dir.join("solution.csv"), &case, &solved, config.n_ev))
            {
                eprintln!("mqcm: {e}");
                return EXIT_RUNTIME;
            }
            match rms {
                Ok(rms) => println!(
                    "{}: dof {} rms {} ({})",
                    case.name,
                    solved.total_dof(),
                    sci(rms),
                    if solved.converged() {
                        "converged"
                    } else {
                        "itmax reached"
                    }
                ),
                Err(e) => {
                    eprintln!("mqcm: error metric failed: {e}");
                    return EXIT_RUNTIME;
                }
            }

            if config.with_oracle {
                match cross_check(config) {
                    Ok(report) => println!("{}", report.summary()),
                    Err(e) => eprintln!("mqcm: oracle cross-check skipped: {e}"),
                }
            }

            if solved.converged() {
                EXIT_OK
            } else {
                eprintln!(
                    "mqcm: {} stopped at the iteration cap without meeting the residual target",
                    case.name
                );
                EXIT_NOT_CONVERGED
            }
        }
        Err((error, records)) => {
            let refs: Vec<&RsaIteration> = records.iter().collect();
            let _ = write_iterations_csv(&dir.join("iterations.csv"), &refs);
            eprintln!("mqcm: {} failed: {error}", case.name);
            EXIT_RUNTIME
        }
    }
}

/// Outcome of an oracle comparison.
pub struct CrossCheckReport {
    pub case: String,
    pub max_gap: f64,
    pub n_points: usize,
    pub mqcm_converged: bool,
}

impl CrossCheckReport {
    pub fn summary(&self) -> String {
        format!(
            "{}: max |collocation - RK4 oracle| = {} over {} points{}",
            self.case,
            sci(self.max_gap),
            self.n_points,
            if self.mqcm_converged {
                ""
            } else {
                " (collocation run hit its iteration cap)"
            }
        )
    }
}

/// Solves the case with both the collocation method and the RK4 oracle
/// and reports the largest pointwise gap. Only retarded linear cases are
/// supported; anything else is refused.
pub fn cross_check(config: &RunConfig) -> Result<CrossCheckReport> {
    let case = make_benchmark(&config.case, &config.params)?;
    if !case.problem.is_linear() {
        return Err(Error::invalid(format!(
            "case '{}' is outside the oracle's scope (retarded linear problems only)",
            case.name
        )));
    }
    let rsa = resolved_rsa(&case, config);
    let solved = solve_case(&case, &rsa).map_err(|(e, _)| e)?;
    let dense = oracle::steps_rk4(&case.problem, config.oracle_h, &case.breakpoints)?;

    let (a, b) = (case.problem.a(), case.problem.b());
    let mut max_gap = 0.0f64;
    let mut rows = String::from("x,y_collocation,y_oracle,abs_diff\n");
    for i in 0..config.n_ev {
        let x = a + (b - a) * i as f64 / (config.n_ev - 1) as f64;
        let mq = solved.value(x, 0).map_err(|e| Error::at(x, e))?;
        let rk = dense.eval(x).map_err(|e| Error::at(x, e))?;
        let gap = (mq - rk).abs();
        max_gap = max_gap.max(gap);
        let _ = writeln!(rows, "{},{},{},{}", sci(x), sci(mq), sci(rk), sci(gap));
    }

    let dir = config.out_dir.join(&case.name);
    if fs::create_dir_all(&dir).is_ok() {
        let _ = fs::write(dir.join("crosscheck.csv"), rows);
    }

    Ok(CrossCheckReport {
        case: case.name.clone(),
        max_gap,
        n_points: config.n_ev,
        mqcm_converged: solved.converged(),
    })
}

#[derive(Parser)]
#[command(name = "mqcm", version, about = "Adaptive multiquadric collocation for DDEs")]
struct CliArgs {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a benchmark case and write its result tables
    Run(RunArgs),
    /// List the available benchmark cases
    List,
    /// Compare a case against the independent RK4 oracle
    CrossCheck(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Case name (see `mqcm list`)
    case: Option<String>,

    /// Run every case with default parameters
    #[arg(long)]
    all: bool,

    /// Case parameter, repeatable (e.g. --param p=-0.1)
    #[arg(long = "param", value_name = "K=V")]
    params: Vec<String>,

    /// Key=value file mirroring these flags; flags win on conflict
    #[arg(long)]
    config: Option<PathBuf>,

    /// Initial grid size
    #[arg(long)]
    n0: Option<usize>,

    /// Refinement iteration cap
    #[arg(long)]
    itmax: Option<usize>,

    /// Residual convergence threshold
    #[arg(long = "theta-max")]
    theta_max: Option<f64>,

    /// Node deletion threshold
    #[arg(long = "theta-min")]
    theta_min: Option<f64>,

    /// Shape-to-spacing ratio
    #[arg(long)]
    mu: Option<f64>,

    /// Shape alternation amplitude
    #[arg(long)]
    gamma: Option<f64>,

    /// Boundary shape boost
    #[arg(long)]
    lambda: Option<f64>,

    /// Enlargement threshold divisor
    #[arg(long)]
    eta: Option<f64>,

    /// Evaluation-point count for error metrics
    #[arg(long)]
    nev: Option<usize>,

    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,

    /// Step size of the RK4 oracle
    #[arg(long = "oracle-h")]
    oracle_h: Option<f64>,

    /// Seed recorded with the run
    #[arg(long)]
    seed: Option<u64>,

    /// Use the case's alternate adaptive preset where one exists
    #[arg(long = "alt-preset")]
    alt_preset: bool,

    /// After solving, also compare against the RK4 oracle
    #[arg(long = "cross-check")]
    with_oracle: bool,
}

fn parse_param(s: &str) -> Result<(String, f64)> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| Error::invalid(format!("--param expects K=V, got '{s}'")))?;
    let value: f64 = v
        .trim()
        .parse()
        .map_err(|_| Error::invalid(format!("parameter '{k}' has non-numeric value '{v}'")))?;
    Ok((k.trim().to_string(), value))
}

/// Applies one `key=value` line from a config file.
fn apply_config_entry(config: &mut RunConfig, key: &str, value: &str) -> Result<()> {
    let key = key.trim().replace('-', "_");
    let value = value.trim();
    let num = || -> Result<f64> {
        value
            .parse::<f64>()
            .map_err(|_| Error::invalid(format!("config key '{key}' has non-numeric value")))
    };
    match key.as_str() {
        "param" => config.params.push(parse_param(value)?),
        "n0" => config.overrides.n0 = Some(num()? as usize),
        "itmax" => config.overrides.itmax = Some(num()? as usize),
        "theta_max" => config.overrides.theta_max = Some(num()?),
        "theta_min" => config.overrides.theta_min = Some(num()?),
        "mu" => config.overrides.mu = Some(num()?),
        "gamma" => config.overrides.gamma = Some(num()?),
        "lambda" => config.overrides.lambda = Some(num()?),
        "eta" => config.overrides.eta = Some(num()?),
        "nev" => config.n_ev = num()? as usize,
        "out" => config.out_dir = PathBuf::from(value),
        "oracle_h" => config.oracle_h = num()?,
        "seed" => config.seed = num()? as u64,
        "alt_preset" => config.alt_preset = value == "true" || value == "1",
        "cross_check" => config.with_oracle = value == "true" || value == "1",
        other => return Err(Error::invalid(format!("unknown config key '{other}'"))),
    }
    Ok(())
}

fn load_config_file(config: &mut RunConfig, path: &Path) -> Result<()> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::invalid(format!("cannot read config {path:?}: {e}")))?;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            Error::invalid(format!("config line {} is not key=value", lineno + 1))
        })?;
        apply_config_entry(config, k, v)?;
    }
    Ok(())
}

/// Resolves command-line flags (and the optional config file) into a
/// [`RunConfig`]; flags win over file entries.
fn resolve(args: &RunArgs) -> Result<RunConfig> {
    let mut config = RunConfig::default();
    if let Some(path) = &args.config {
        load_config_file(&mut config, path)?;
    }
    for p in &args.params {
        config.params.push(parse_param(p)?);
    }
    let o = &mut config.overrides;
    o.n0 = args.n0.or(o.n0);
    o.itmax = args.itmax.or(o.itmax);
    o.theta_max = args.theta_max.or(o.theta_max);
    o.theta_min = args.theta_min.or(o.theta_min);
    o.mu = args.mu.or(o.mu);
    o.gamma = args.gamma.or(o.gamma);
    o.lambda = args.lambda.or(o.lambda);
    o.eta = args.eta.or(o.eta);
    if let Some(nev) = args.nev {
        config.n_ev = nev;
    }
    if let Some(out) = &args.out {
        config.out_dir = out.clone();
    }
    if let Some(h) = args.oracle_h {
        config.oracle_h = h;
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    config.alt_preset |= args.alt_preset;
    config.with_oracle |= args.with_oracle;
    Ok(config)
}

/// Entry point behind the binary; returns the process exit code.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match CliArgs::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return code;
        }
    };

    match cli.command {
        Command::List => {
            for name in case_names() {
                match make_benchmark(name, &[]) {
                    Ok(case) => println!("{name}: {}", case.notes),
                    Err(e) => println!("{name}: {e}"),
                }
            }
            EXIT_OK
        }
        Command::Run(args) => {
            let mut config = match resolve(&args) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("mqcm: {e}");
                    return EXIT_USAGE;
                }
            };
            if args.all {
                let mut worst = EXIT_OK;
                for name in case_names() {
                    config.case = name.to_string();
                    let code = run_benchmark(&config);
                    worst = match (worst, code) {
                        (EXIT_RUNTIME, _) | (_, EXIT_RUNTIME) => EXIT_RUNTIME,
                        (a, b) => a.max(b),
                    };
                }
                worst
            } else {
                match args.case {
                    Some(name) => {
                        config.case = name;
                        run_benchmark(&config)
                    }
                    None => {
                        eprintln!("mqcm: missing case name (or --all)");
                        EXIT_USAGE
                    }
                }
            }
        }
        Command::CrossCheck(args) => {
            let mut config = match resolve(&args) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("mqcm: {e}");
                    return EXIT_USAGE;
                }
            };
            config.case = match args.case {
                Some(name) => name,
                None => {
                    eprintln!("mqcm: missing case name");
                    return EXIT_USAGE;
                }
            };
            match cross_check(&config) {
                Ok(report) => {
                    println!("{}", report.summary());
                    if report.mqcm_converged {
                        EXIT_OK
                    } else {
                        EXIT_NOT_CONVERGED
                    }
                }
                Err(Error::InvalidInput(msg)) => {
                    eprintln!("mqcm: {msg}");
                    EXIT_USAGE
                }
                Err(e) => {
                    eprintln!("mqcm: {e}");
                    EXIT_RUNTIME
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::ExactSolution;
    use crate::problem::scalar;

    struct Offset(f64);
    impl Solution for Offset {
        fn value(&self, x: f64, _order: usize) -> Result<f64> {
            Ok(x.sin() + self.0)
        }
    }

    #[test]
    fn rms_identity_and_offset() {
        let base = Offset(0.0);
        let same = Offset(0.0);
        let shifted = Offset(0.25);
        assert_eq!(rms_error(&base, &same, 0.0, 3.0, 103).unwrap(), 0.0);
        let rms = rms_error(&shifted, &base, 0.0, 3.0, 103).unwrap();
        assert!((rms - 0.25).abs() < 1e-14);
    }

    #[test]
    fn rms_is_symmetric() {
        let a = Offset(0.0);
        let b = Offset(0.125);
        let ab = rms_error(&a, &b, 0.0, 2.0, 53).unwrap();
        let ba = rms_error(&b, &a, 0.0, 2.0, 53).unwrap();
        assert_eq!(ab, ba);
    }

    #[test]
    fn rms_error_names_the_failing_point() {
        struct Bad;
        impl Solution for Bad {
            fn value(&self, x: f64, _order: usize) -> Result<f64> {
                if x > 0.5 {
                    Err(Error::domain("no value here"))
                } else {
                    Ok(0.0)
                }
            }
        }
        let good = ExactSolution::new(scalar(|_| 0.0), None, None);
        let err = rms_error(&Bad, &good, 0.0, 1.0, 11).unwrap_err();
        match err {
            Error::EvalAt { x, .. } => assert!(x > 0.5),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn seventeen_significant_digits_round_trip() {
        for &v in &[1.0, -0.1, 2.8e-13, 9.4e-14, 1.4e19, std::f64::consts::PI] {
            let s = sci(v);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back, v, "{s}");
        }
    }

    #[test]
    fn config_file_entries_mirror_flags() {
        let mut config = RunConfig::default();
        apply_config_entry(&mut config, "theta-max", "1e-12").unwrap();
        apply_config_entry(&mut config, "n0", "8").unwrap();
        apply_config_entry(&mut config, "param", "q=0.9").unwrap();
        apply_config_entry(&mut config, "out", "results").unwrap();
        assert_eq!(config.overrides.theta_max, Some(1e-12));
        assert_eq!(config.overrides.n0, Some(8));
        assert_eq!(config.params, vec![("q".to_string(), 0.9)]);
        assert_eq!(config.out_dir, PathBuf::from("results"));
        assert!(apply_config_entry(&mut config, "bogus", "1").is_err());
    }
}
