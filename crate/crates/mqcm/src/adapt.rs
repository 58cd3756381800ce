//! Residual-subsampling adaptivity and the piecewise sequential driver.
//!
//! Each refinement level distributes shape parameters from the current
//! node spacing, solves the collocation system, and samples the equation
//! residual at the midpoints between adjacent nodes. Midpoints whose
//! residual exceeds an enlargement threshold become nodes; interior nodes
//! whose two flanking midpoint residuals are both below `theta_min` are
//! dropped. The loop ends when the largest midpoint residual falls below
//! `theta_max` or the iteration cap is reached.
//!
//! Solutions with known interior singularities are handled by
//! [`solve_piecewise`], which runs the loop on each smooth subinterval in
//! turn, splicing the finished interpolants into the history seen by the
//! subintervals that follow.

use nalgebra::DVector;

use crate::collocation::{self, build_centers, fit_function, Interpolant};
use crate::kernel::distribute_shapes;
use crate::linsolve;
use crate::nonlinear::{self, NlOptions, NlStatus, ResidualSystem};
use crate::problem::{DdeProblem, ExactSolution, GeneralDde, History, LinearDde, Solution};
use crate::{Error, Result};

/// Tunables of the adaptive loop.
#[derive(Debug, Clone)]
pub struct RsaConfig {
    /// Initial uniform grid size.
    pub n0: usize,
    /// Boundary-shape boost factor.
    pub lambda: f64,
    /// Shape-to-spacing ratio.
    pub mu: f64,
    /// Even/odd shape alternation amplitude, in [0, 1).
    pub gamma: f64,
    /// Divisor in the enlargement threshold.
    pub eta: f64,
    /// Convergence threshold on the largest midpoint residual.
    pub theta_max: f64,
    /// Deletion threshold on flanking midpoint residuals.
    pub theta_min: f64,
    /// Refinement iteration cap.
    pub itmax: usize,
    /// Dogleg options for nonlinear problems.
    pub nl: NlOptions,
    /// Conditioning cap applied before nonlinear solves; shapes are scaled
    /// down by `cond_rescale` until the interpolation matrix's condition
    /// number drops under the cap.
    pub cond_cap: Option<f64>,
    /// Shape shrink factor used by the conditioning guard.
    pub cond_rescale: f64,
    /// Hard ceiling on the basis size; exceeding it aborts the run with a
    /// diagnostic instead of grinding on ever larger dense solves.
    pub max_dof: usize,
    /// Evaluation-point count for the error column of the report.
    pub n_ev: usize,
}

impl RsaConfig {
    /// Defaults for an initial grid of `n0` nodes: `lambda = 10`,
    /// `mu = sqrt(40 / n0)`, `gamma = 0.1`, `eta = 10`,
    /// `theta_max = 1e-13`, `theta_min = 1e-14`.
    pub fn for_initial_grid(n0: usize) -> Self {
        RsaConfig {
            n0,
            lambda: 10.0,
            mu: (40.0 / n0 as f64).sqrt(),
            gamma: 0.1,
            eta: 10.0,
            theta_max: 1e-13,
            theta_min: 1e-14,
            itmax: 20,
            nl: NlOptions::default(),
            cond_cap: None,
            cond_rescale: 0.8,
            max_dof: 2000,
            n_ev: 103,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n0 < 2 {
            return Err(Error::invalid("n0 must be at least 2"));
        }
        if !(self.theta_max > self.theta_min && self.theta_min > 0.0) {
            return Err(Error::invalid("need theta_max > theta_min > 0"));
        }
        if !(self.eta > 0.0) {
            return Err(Error::invalid("eta must be positive"));
        }
        if !(self.lambda > 0.0 && self.mu > 0.0) {
            return Err(Error::invalid("lambda and mu must be positive"));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::invalid("gamma must lie in [0, 1)"));
        }
        if !(self.cond_rescale > 0.0 && self.cond_rescale < 1.0) {
            return Err(Error::invalid("cond_rescale must lie in (0, 1)"));
        }
        if self.n_ev < 2 {
            return Err(Error::invalid("n_ev must be at least 2"));
        }
        self.nl.validate()
    }
}

/// One refinement level of the report.
#[derive(Debug, Clone)]
pub struct RsaIteration {
    pub iteration: usize,
    /// Number of centers in the solve at this level.
    pub dof: usize,
    /// Largest midpoint residual magnitude.
    pub max_residual: f64,
    /// Condition number of the level's matrix (collocation matrix for
    /// linear problems, Jacobian at the solution for nonlinear ones).
    pub condition: f64,
    /// Error versus the exact solution, when one is known.
    pub rms: Option<f64>,
    pub nl_iters: Option<usize>,
    pub nl_status: Option<NlStatus>,
}

/// Terminal state of the adaptive loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RsaStatus {
    ResidualConverged,
    ItmaxReached,
}

/// Per-level records plus the terminal status.
#[derive(Debug, Clone)]
pub struct RsaReport {
    pub iterations: Vec<RsaIteration>,
    pub status: RsaStatus,
}

impl RsaReport {
    pub fn final_dof(&self) -> usize {
        self.iterations.last().map(|r| r.dof).unwrap_or(0)
    }

    pub fn final_rms(&self) -> Option<f64> {
        self.iterations.last().and_then(|r| r.rms)
    }
}

/// An adaptive run that died mid-flight, with whatever records it
/// produced first.
#[derive(Debug)]
pub struct RsaFailure {
    pub error: Error,
    pub report: RsaReport,
}

impl std::fmt::Display for RsaFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "adaptive solve failed after {} level(s): {}",
            self.report.iterations.len(),
            self.error
        )
    }
}

impl std::error::Error for RsaFailure {}

/// Midpoints of adjacent node pairs.
pub fn midpoints(nodes: &[f64]) -> Result<Vec<f64>> {
    if nodes.len() < 2 {
        return Err(Error::invalid("midpoints need at least 2 nodes"));
    }
    Ok(nodes.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect())
}

/// The enlargement threshold `Theta = max(theta_max, max_j |R_j| / eta)`.
pub fn enlargement_threshold(max_abs_residual: f64, eta: f64, theta_max: f64) -> f64 {
    theta_max.max(max_abs_residual / eta)
}

/// One refinement of the node set from its midpoint residual magnitudes.
///
/// Midpoints with `|R_j| > theta` are inserted; interior nodes whose two
/// flanking midpoint residuals are both below `theta_min` are removed.
/// Insertions and deletions are disjoint by construction and the
/// endpoints always survive. The result is sorted and deduplicated to
/// within `dedup_tol`.
pub fn refine_nodes(
    nodes: &[f64],
    abs_residuals: &[f64],
    theta: f64,
    theta_min: f64,
    dedup_tol: f64,
) -> Result<Vec<f64>> {
    let n = nodes.len();
    if abs_residuals.len() + 1 != n {
        return Err(Error::invalid("need one residual per midpoint"));
    }

    let mut out: Vec<f64> = Vec::with_capacity(2 * n);
    for (i, &x) in nodes.iter().enumerate() {
        let deletable = i > 0
            && i + 1 < n
            && abs_residuals[i - 1] < theta_min
            && abs_residuals[i] < theta_min;
        if !deletable {
            out.push(x);
        }
    }
    for (j, w) in nodes.windows(2).enumerate() {
        if abs_residuals[j] > theta {
            out.push(0.5 * (w[0] + w[1]));
        }
    }
    out.sort_by(|a, b| a.partial_cmp(b).unwrap());
    out.dedup_by(|a, b| (*a - *b).abs() <= dedup_tol);
    Ok(out)
}

/// Shape set used by the adaptive loop: the base distribution with the
/// `lambda` boost carried by the interior centers as well.
///
/// The refinement loop needs every center's flatness-to-spacing ratio
/// pinned at `lambda * mu`; with the boost on the boundary pair only, the
/// interior ratio freezes at `mu` and the midpoint residuals stall around
/// 1e-4 instead of falling with the spacing (the `printed_shape_rule_stalls`
/// test below keeps a record of that behavior).
pub fn rsa_shapes(nodes: &[f64], config: &RsaConfig) -> Result<Vec<f64>> {
    let mut shapes = distribute_shapes(nodes, config.lambda, config.mu, config.gamma)?;
    for s in shapes.iter_mut().take(nodes.len()).skip(1) {
        *s *= config.lambda;
    }
    Ok(shapes)
}

/// Output of one adaptive level.
pub struct RsaStep {
    pub interpolant: Interpolant,
    /// Node set for the next level.
    pub nodes: Vec<f64>,
    pub record: RsaIteration,
}

/// Runs one level: distribute shapes, solve, sample midpoint residuals,
/// refine the node set. `warm` carries the previous level's interpolant
/// for nonlinear problems; `guess` seeds the very first level.
pub fn rsa_step(
    problem: &DdeProblem,
    nodes: &[f64],
    config: &RsaConfig,
    warm: Option<&Interpolant>,
    guess: Option<&(dyn Fn(f64) -> f64 + Send + Sync)>,
) -> Result<RsaStep> {
    let a = problem.a();
    let b = problem.b();
    let order = problem.order();
    // The outside centers never move: their spacing stays pinned to the
    // initial grid's.
    let spacing = (b - a) / (config.n0 - 1) as f64;

    let mut basis = build_centers(nodes, order, spacing)?;
    basis.apply_shapes(&rsa_shapes(nodes, config)?)?;

    if basis.len() > config.max_dof {
        return Err(Error::DofCap {
            dof: basis.len(),
            cap: config.max_dof,
        });
    }

    let (interpolant, condition, nl_iters, nl_status) = match problem {
        DdeProblem::Linear(linear) => {
            let (interp, info) = collocation::solve_linear(linear, &basis)?;
            (interp, info.condition, None, None)
        }
        DdeProblem::General(general) => {
            solve_general(general, basis, config, warm, guess)?
        }
    };

    let mids = midpoints(nodes)?;
    let mut abs_residuals = Vec::with_capacity(mids.len());
    for &z in &mids {
        let r = collocation::residual_at(problem, &interpolant, z).map_err(|e| Error::at(z, e))?;
        abs_residuals.push(r.abs());
    }
    let max_residual = abs_residuals.iter().copied().fold(0.0f64, f64::max);
    let theta = enlargement_threshold(max_residual, config.eta, config.theta_max);
    let next = refine_nodes(
        nodes,
        &abs_residuals,
        theta,
        config.theta_min,
        1e-12 * (b - a),
    )?;

    Ok(RsaStep {
        record: RsaIteration {
            iteration: 0,
            dof: interpolant.basis().len(),
            max_residual,
            condition,
            rms: None,
            nl_iters,
            nl_status,
        },
        nodes: next,
        interpolant,
    })
}

fn solve_general(
    general: &GeneralDde,
    mut basis: crate::kernel::MqBasis,
    config: &RsaConfig,
    warm: Option<&Interpolant>,
    guess: Option<&(dyn Fn(f64) -> f64 + Send + Sync)>,
) -> Result<(Interpolant, f64, Option<usize>, Option<NlStatus>)> {
    // Conditioning guard: Newton-type iterations fall apart well before
    // the linear solves do, so shrink the shapes until the interpolation
    // matrix is tame enough.
    if let Some(cap) = config.cond_cap {
        for _ in 0..100 {
            let cond = linsolve::condition_number(&collocation::interpolation_matrix(&basis))?;
            if cond <= cap {
                break;
            }
            basis.rescale_shapes(config.cond_rescale);
        }
    }

    let seed: Interpolant = match warm {
        Some(prev) => {
            let prev = prev.clone();
            fit_function(&move |x| prev.eval(x, 0).unwrap_or(f64::NAN), &basis)?
        }
        None => match guess {
            Some(g) => fit_function(&|x| g(x), &basis)?,
            None => Interpolant::new(basis.clone(), DVector::zeros(basis.len()))?,
        },
    };

    let system = ResidualSystem::new(general, &basis)?;
    let eval = |alpha: &DVector<f64>| system.eval(alpha);
    let (alpha, report) = nonlinear::dogleg_solve(&eval, seed.coefficients(), &config.nl)?;

    let jac = nonlinear::fd_jacobian(&eval, &alpha, config.nl.fd_step)?;
    let condition = linsolve::condition_number(&jac)?;
    let interp = Interpolant::new(basis, alpha)?;
    Ok((
        interp,
        condition,
        Some(report.iterations),
        Some(report.status),
    ))
}

/// Runs the adaptive loop to convergence or `itmax`.
///
/// `exact` feeds the error column of the report; `guess` seeds the first
/// nonlinear solve. The loop starts from a uniform grid of `n0` nodes and
/// keeps the extra center(s) pinned at their initial positions.
pub fn run_rsa(
    problem: &DdeProblem,
    config: &RsaConfig,
    exact: Option<&ExactSolution>,
    guess: Option<&(dyn Fn(f64) -> f64 + Send + Sync)>,
) -> std::result::Result<(Interpolant, RsaReport), RsaFailure> {
    let fail = |error: Error, records: &[RsaIteration]| RsaFailure {
        error,
        report: RsaReport {
            iterations: records.to_vec(),
            status: RsaStatus::ItmaxReached,
        },
    };

    if let Err(e) = config.validate() {
        return Err(fail(e, &[]));
    }

    let (a, b) = (problem.a(), problem.b());
    let mut nodes: Vec<f64> = (0..config.n0)
        .map(|i| a + (b - a) * i as f64 / (config.n0 - 1) as f64)
        .collect();
    let mut records: Vec<RsaIteration> = Vec::new();
    let mut warm: Option<Interpolant> = None;

    for k in 0..=config.itmax {
        let mut step = match rsa_step(problem, &nodes, config, warm.as_ref(), guess) {
            Ok(step) => step,
            Err(e) => return Err(fail(e, &records)),
        };
        step.record.iteration = k;
        if let Some(exact) = exact {
            match rms_between(&step.interpolant, exact, a, b, config.n_ev) {
                Ok(rms) => step.record.rms = Some(rms),
                Err(e) => return Err(fail(e, &records)),
            }
        }
        records.push(step.record);

        if records.last().unwrap().max_residual < config.theta_max {
            return Ok((
                step.interpolant,
                RsaReport {
                    iterations: records,
                    status: RsaStatus::ResidualConverged,
                },
            ));
        }
        if k == config.itmax {
            return Ok((
                step.interpolant,
                RsaReport {
                    iterations: records,
                    status: RsaStatus::ItmaxReached,
                },
            ));
        }
        warm = Some(step.interpolant);
        nodes = step.nodes;
    }
    unreachable!("loop returns on its last iteration");
}

pub(crate) fn rms_between(
    approx: &dyn Solution,
    exact: &dyn Solution,
    a: f64,
    b: f64,
    n_ev: usize,
) -> Result<f64> {
    let mut sum = 0.0;
    for i in 0..n_ev {
        let x = a + (b - a) * i as f64 / (n_ev - 1) as f64;
        let d = approx.value(x, 0).map_err(|e| Error::at(x, e))?
            - exact.value(x, 0).map_err(|e| Error::at(x, e))?;
        sum += d * d;
    }
    Ok((sum / n_ev as f64).sqrt())
}

/// One finished subinterval of a piecewise solve.
#[derive(Debug, Clone)]
pub struct Piece {
    pub start: f64,
    pub end: f64,
    pub interpolant: Interpolant,
    pub report: RsaReport,
}

/// Ordered subinterval solutions partitioning `[a, b]`.
#[derive(Debug, Clone)]
pub struct PiecewiseSolution {
    pub pieces: Vec<Piece>,
}

impl PiecewiseSolution {
    /// Sum of the final basis sizes over the pieces.
    pub fn total_dof(&self) -> usize {
        self.pieces.iter().map(|p| p.report.final_dof()).sum()
    }

    pub fn all_converged(&self) -> bool {
        self.pieces
            .iter()
            .all(|p| p.report.status == RsaStatus::ResidualConverged)
    }
}

impl Solution for PiecewiseSolution {
    fn value(&self, x: f64, order: usize) -> Result<f64> {
        let first = self.pieces.first().ok_or_else(|| Error::invalid("empty solution"))?;
        if x < first.start {
            return Err(Error::invalid(format!("x = {x} below domain start")));
        }
        for piece in &self.pieces {
            if x <= piece.end {
                return piece.interpolant.eval(x, order);
            }
        }
        Err(Error::invalid(format!("x = {x} above domain end")))
    }
}

/// A piecewise solve that aborted: the pieces that did finish, plus the
/// failure that stopped the one after them.
#[derive(Debug)]
pub struct PiecewiseFailure {
    pub completed: Vec<Piece>,
    pub failure: RsaFailure,
}

impl std::fmt::Display for PiecewiseFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "piecewise solve failed on piece {}: {}",
            self.completed.len() + 1,
            self.failure
        )
    }
}

impl std::error::Error for PiecewiseFailure {}

/// Solves `[a, b]` sequentially over the subintervals delimited by
/// `breakpoints`, each with its own adaptive run. The history of
/// subinterval `i` is the original history below `a` and the finished
/// interpolants of subintervals `0..i` above it.
pub fn solve_piecewise(
    problem: &DdeProblem,
    breakpoints: &[f64],
    config: &RsaConfig,
    exact: Option<&ExactSolution>,
    guess: Option<&(dyn Fn(f64) -> f64 + Send + Sync)>,
) -> std::result::Result<PiecewiseSolution, PiecewiseFailure> {
    let (a, b) = (problem.a(), problem.b());
    let valid = crate::kernel::strictly_increasing(breakpoints)
        && breakpoints.iter().all(|&x| x > a && x < b);
    if !valid {
        return Err(PiecewiseFailure {
            completed: vec![],
            failure: RsaFailure {
                error: Error::invalid("breakpoints must be strictly increasing inside (a, b)"),
                report: RsaReport {
                    iterations: vec![],
                    status: RsaStatus::ItmaxReached,
                },
            },
        });
    }

    let mut edges = vec![a];
    edges.extend_from_slice(breakpoints);
    edges.push(b);

    let base_history = problem.history().clone();
    let mut pieces: Vec<Piece> = Vec::new();

    for w in edges.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let history = composite_history(a, &base_history, &pieces);
        let sub = restrict_problem(problem, lo, hi, history);
        match run_rsa(&sub, config, exact, guess) {
            Ok((interpolant, report)) => pieces.push(Piece {
                start: lo,
                end: hi,
                interpolant,
                report,
            }),
            Err(failure) => {
                return Err(PiecewiseFailure {
                    completed: pieces,
                    failure,
                })
            }
        }
    }
    Ok(PiecewiseSolution { pieces })
}

/// History for a subinterval starting above `a`: the original history up
/// to `a`, finished pieces beyond it.
fn composite_history(a: f64, base: &History, pieces: &[Piece]) -> History {
    if pieces.is_empty() {
        return base.clone();
    }
    let base = base.clone();
    let spans: Vec<(f64, f64, Interpolant)> = pieces
        .iter()
        .map(|p| (p.start, p.end, p.interpolant.clone()))
        .collect();
    History::new(move |x, order| {
        if x <= a {
            return base.eval(x, order);
        }
        for (_, end, interp) in &spans {
            if x <= *end {
                return interp.eval(x, order);
            }
        }
        Err(Error::domain(format!(
            "history argument {x} beyond the solved pieces"
        )))
    })
}

fn restrict_problem(problem: &DdeProblem, lo: f64, hi: f64, history: History) -> DdeProblem {
    match problem {
        DdeProblem::Linear(p) => DdeProblem::Linear(LinearDde {
            a: lo,
            b: hi,
            p: p.p.clone(),
            q: p.q.clone(),
            s: p.s.clone(),
            tau: p.tau.clone(),
            history,
        }),
        DdeProblem::General(g) => DdeProblem::General(GeneralDde {
            a: lo,
            b: hi,
            order: g.order,
            residual: g.residual.clone(),
            history,
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{scalar, History, LinearDde};
    use proptest::prelude::*;

    fn constant_problem() -> DdeProblem {
        DdeProblem::Linear(
            LinearDde::new(
                0.0,
                1.0,
                scalar(|_| 0.0),
                scalar(|_| 0.0),
                scalar(|_| 0.0),
                scalar(|_| 0.5),
                History::new(|_, order| Ok(if order == 0 { 1.0 } else { 0.0 })),
            )
            .unwrap(),
        )
    }

    #[test]
    fn midpoint_examples() {
        assert_eq!(midpoints(&[0.0, 1.0]).unwrap(), vec![0.5]);
        assert_eq!(midpoints(&[0.0, 0.2, 1.0]).unwrap(), vec![0.1, 0.6]);
        let uniform: Vec<f64> = (0..6).map(|i| i as f64 / 5.0).collect();
        let mids = midpoints(&uniform).unwrap();
        assert_eq!(mids.len(), 5);
        for (i, m) in mids.iter().enumerate() {
            assert!((m - (i as f64 + 0.5) / 5.0).abs() < 1e-15);
        }
        assert!(midpoints(&[0.0]).is_err());
    }

    #[test]
    fn threshold_rule() {
        // midpoint residual 1e-3 with eta = 10 dominates theta_max = 1e-13
        assert_eq!(enlargement_threshold(1e-3, 10.0, 1e-13), 1e-4);
        // quiescent: theta_max floors the threshold
        assert_eq!(enlargement_threshold(1e-15, 10.0, 1e-13), 1e-13);
    }

    #[test]
    fn refinement_adds_only_above_threshold() {
        let nodes = [0.0, 0.25, 0.5, 0.75, 1.0];
        let residuals = [1e-3, 2e-5, 9e-5, 1.1e-4];
        let theta = enlargement_threshold(1e-3, 10.0, 1e-13);
        let next = refine_nodes(&nodes, &residuals, theta, 1e-14, 1e-12).unwrap();
        // only |R| > 1e-4 spawn nodes: midpoints 0.125 and 0.875
        assert_eq!(next.len(), 7);
        assert!(next.contains(&0.125));
        assert!(next.contains(&0.875));
        assert!(!next.contains(&0.375));
    }

    #[test]
    fn quiescent_residuals_coarsen_to_endpoints() {
        let nodes = [0.0, 0.25, 0.5, 0.75, 1.0];
        let residuals = [1e-16, 2e-16, 1e-16, 5e-17];
        let next = refine_nodes(&nodes, &residuals, 1e-13, 1e-14, 1e-12).unwrap();
        assert_eq!(next, vec![0.0, 1.0]);
    }

    /// Loose residual target so the constant problem settles on its first
    /// level regardless of the conditioning floor.
    fn easy_config() -> RsaConfig {
        let mut config = RsaConfig::for_initial_grid(6);
        config.theta_max = 1e-9;
        config.theta_min = 1e-10;
        config
    }

    #[test]
    fn immediate_convergence_gives_single_record() {
        let problem = constant_problem();
        let (interp, report) = run_rsa(&problem, &easy_config(), None, None).unwrap();
        assert_eq!(report.status, RsaStatus::ResidualConverged);
        assert_eq!(report.iterations.len(), 1);
        assert_eq!(report.iterations[0].iteration, 0);
        assert!((interp.eval(0.5, 0).unwrap() - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn piecewise_with_no_breakpoints_matches_run_rsa() {
        let problem = constant_problem();
        let config = easy_config();
        let sol = solve_piecewise(&problem, &[], &config, None, None).unwrap();
        assert_eq!(sol.pieces.len(), 1);
        let (single, _) = run_rsa(&problem, &config, None, None).unwrap();
        for i in 0..=10 {
            let x = i as f64 / 10.0;
            assert_eq!(
                sol.value(x, 0).unwrap(),
                single.eval(x, 0).unwrap(),
                "x = {x}"
            );
        }
    }

    #[test]
    fn piecewise_pieces_join_continuously() {
        let problem = constant_problem();
        let sol = solve_piecewise(&problem, &[0.3, 0.6], &easy_config(), None, None).unwrap();
        assert_eq!(sol.pieces.len(), 3);
        for w in sol.pieces.windows(2) {
            let x = w[1].start;
            let left = w[0].interpolant.eval(x, 0).unwrap();
            let right = w[1].interpolant.eval(x, 0).unwrap();
            assert!((left - right).abs() <= 1e-8);
        }
    }

    #[test]
    fn piecewise_rejects_bad_breakpoints() {
        let problem = constant_problem();
        let config = easy_config();
        assert!(solve_piecewise(&problem, &[0.6, 0.3], &config, None, None).is_err());
        assert!(solve_piecewise(&problem, &[1.5], &config, None, None).is_err());
    }

    /// Characterization: without the interior boost the flatness ratio
    /// freezes at `mu` and refinement stops paying off, which is why
    /// [`rsa_shapes`] extends the boost to the interior centers.
    #[test]
    fn printed_shape_rule_stalls() {
        use crate::collocation::{build_centers, residual_at, solve_linear};
        use crate::problem::make_benchmark;

        let case = make_benchmark("example2", &[("q".to_string(), 0.5)]).unwrap();
        let linear = match &case.problem {
            crate::problem::DdeProblem::Linear(p) => p.clone(),
            _ => unreachable!(),
        };
        let config = RsaConfig::for_initial_grid(6);

        let max_residual = |boosted: bool, n: usize| -> f64 {
            let nodes: Vec<f64> = (0..n).map(|i| 10.0 * i as f64 / (n - 1) as f64).collect();
            let mut basis = build_centers(&nodes, 1, nodes[1] - nodes[0]).unwrap();
            let shapes = if boosted {
                rsa_shapes(&nodes, &config).unwrap()
            } else {
                distribute_shapes(&nodes, config.lambda, config.mu, config.gamma).unwrap()
            };
            basis.apply_shapes(&shapes).unwrap();
            let (interp, _) = solve_linear(&linear, &basis).unwrap();
            nodes
                .windows(2)
                .map(|w| {
                    residual_at(&case.problem, &interp, 0.5 * (w[0] + w[1]))
                        .unwrap()
                        .abs()
                })
                .fold(0.0, f64::max)
        };

        // quadrupling the grid barely moves the unboosted residual
        let plain_coarse = max_residual(false, 16);
        let plain_fine = max_residual(false, 64);
        assert!(plain_fine > plain_coarse / 50.0, "{plain_coarse} -> {plain_fine}");
        // while the boosted shapes gain orders of magnitude
        let boosted_fine = max_residual(true, 64);
        assert!(
            boosted_fine < plain_fine / 1e3,
            "boosted {boosted_fine} vs plain {plain_fine}"
        );
    }

    proptest! {
        #[test]
        fn refined_node_sets_keep_their_invariants(
            gaps in proptest::collection::vec(0.01f64..1.0, 2..30),
            seed_res in proptest::collection::vec(0.0f64..1.0, 30),
            theta_exp in -13.0f64..0.0,
        ) {
            let mut nodes = vec![0.0];
            for g in &gaps {
                let last = *nodes.last().unwrap();
                nodes.push(last + g);
            }
            let b = *nodes.last().unwrap();
            let n_mid = nodes.len() - 1;
            // residual pattern mixing tiny and large magnitudes
            let residuals: Vec<f64> = (0..n_mid)
                .map(|j| {
                    let r = seed_res[j % seed_res.len()];
                    if r < 0.3 { r * 1e-15 } else { r }
                })
                .collect();
            let max_r = residuals.iter().copied().fold(0.0f64, f64::max);
            let theta = enlargement_threshold(max_r, 10.0, 10.0f64.powf(theta_exp));
            let next = refine_nodes(&nodes, &residuals, theta, 1e-14, 1e-12 * b).unwrap();

            prop_assert!(next.first() == Some(&0.0));
            prop_assert!(next.last() == Some(&b));
            prop_assert!(next.windows(2).all(|w| w[1] - w[0] > 1e-12 * b));
            // disjoint insert/delete: inserted midpoints are never nodes of
            // the input set
            for x in &next {
                let was_node = nodes.iter().any(|n| n == x);
                let was_mid = nodes.windows(2).any(|w| 0.5 * (w[0] + w[1]) == *x);
                prop_assert!(was_node || was_mid);
            }
        }
    }
}
