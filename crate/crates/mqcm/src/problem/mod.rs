//! DDE problem descriptions and the built-in benchmark catalogue.
//!
//! Two problem forms are supported. [`LinearDde`] is the explicit first
//! order form `y'(x) - p(x) y(x) - q(x) y[x - tau(x)] = s(x)` with a
//! prescribed history `y(x) = h(x)` for `x <= a`. [`GeneralDde`] covers
//! everything else (nonlinear, neutral, state-dependent delays, higher
//! order) through an implicit residual functional evaluated against a
//! [`Solution`] view.

mod benchmarks;

pub use benchmarks::{alt_rsa_preset, case_names, make_benchmark};

use std::sync::Arc;

use crate::adapt::RsaConfig;
use crate::{Error, Result};

/// Shared real-valued function of one variable.
pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

pub(crate) fn scalar(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> ScalarFn {
    Arc::new(f)
}

/// Read-only view of an approximate or exact solution, evaluable with
/// derivatives up to order 2.
pub trait Solution {
    fn value(&self, x: f64, order: usize) -> Result<f64>;
}

/// Prescribed history `h(x)` for `x <= a`, queried by derivative order.
///
/// The closure owns its domain checks; arguments outside the stated
/// history domain must produce [`Error::Domain`].
#[derive(Clone)]
pub struct History {
    f: Arc<dyn Fn(f64, usize) -> Result<f64> + Send + Sync>,
}

impl History {
    pub fn new(f: impl Fn(f64, usize) -> Result<f64> + Send + Sync + 'static) -> Self {
        History { f: Arc::new(f) }
    }

    pub fn eval(&self, x: f64, order: usize) -> Result<f64> {
        (self.f)(x, order)
    }
}

impl std::fmt::Debug for History {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("History")
    }
}

/// `y'(x) - p(x) y(x) - q(x) y[x - tau(x)] = s(x)` on `[a, b]`.
#[derive(Clone)]
pub struct LinearDde {
    pub a: f64,
    pub b: f64,
    pub p: ScalarFn,
    pub q: ScalarFn,
    pub s: ScalarFn,
    pub tau: ScalarFn,
    pub history: History,
}

impl LinearDde {
    pub fn new(
        a: f64,
        b: f64,
        p: ScalarFn,
        q: ScalarFn,
        s: ScalarFn,
        tau: ScalarFn,
        history: History,
    ) -> Result<Self> {
        if !(a < b) {
            return Err(Error::invalid("domain endpoints must satisfy a < b"));
        }
        Ok(LinearDde {
            a,
            b,
            p,
            q,
            s,
            tau,
            history,
        })
    }

    /// Wraps the explicit form as an implicit residual functional
    /// `G = y'(x) - p y - q y_delayed - s`, equation-minus-data oriented so
    /// the Jacobian of the wrapped system reproduces the assembled linear
    /// collocation matrix row for row.
    pub fn to_general(&self) -> GeneralDde {
        let p = Arc::clone(&self.p);
        let q = Arc::clone(&self.q);
        let s = Arc::clone(&self.s);
        let tau = Arc::clone(&self.tau);
        GeneralDde {
            a: self.a,
            b: self.b,
            order: 1,
            residual: Arc::new(move |x, ctx| {
                let delayed = ctx.delayed(x - tau(x), 0)?;
                Ok(ctx.y(1)? - p(x) * ctx.y(0)? - q(x) * delayed - s(x))
            }),
            history: self.history.clone(),
        }
    }
}

/// Residual functional of a general DDE. Receives the point `x` and an
/// evaluation context giving local derivatives and delayed values.
pub type ResidualFn = Arc<dyn Fn(f64, &EvalContext<'_>) -> Result<f64> + Send + Sync>;

/// Implicit DDE of order `m`: `G(x, y, y', ..., y^(m), delayed terms) = 0`
/// on `[a, b]` with history `h` for `x <= a`.
#[derive(Clone)]
pub struct GeneralDde {
    pub a: f64,
    pub b: f64,
    pub order: usize,
    pub residual: ResidualFn,
    pub history: History,
}

impl GeneralDde {
    pub fn new(
        a: f64,
        b: f64,
        order: usize,
        residual: ResidualFn,
        history: History,
    ) -> Result<Self> {
        if !(a < b) {
            return Err(Error::invalid("domain endpoints must satisfy a < b"));
        }
        if order < 1 {
            return Err(Error::invalid("order must be at least 1"));
        }
        Ok(GeneralDde {
            a,
            b,
            order,
            residual,
            history,
        })
    }
}

/// Evaluation context handed to a [`ResidualFn`]: local solution values at
/// `x` and delayed evaluations that switch between the history (argument
/// `<= a`) and the solution itself (argument `> a`).
pub struct EvalContext<'a> {
    x: f64,
    a: f64,
    history: &'a History,
    solution: &'a dyn Solution,
}

impl<'a> EvalContext<'a> {
    pub fn new(x: f64, a: f64, history: &'a History, solution: &'a dyn Solution) -> Self {
        EvalContext {
            x,
            a,
            history,
            solution,
        }
    }

    /// The collocation point itself.
    pub fn x(&self) -> f64 {
        self.x
    }

    /// Local solution derivative of the given order at `x`.
    pub fn y(&self, order: usize) -> Result<f64> {
        self.solution.value(self.x, order)
    }

    /// Delayed evaluation at `arg`: history when `arg <= a`, solution
    /// otherwise.
    pub fn delayed(&self, arg: f64, order: usize) -> Result<f64> {
        if arg <= self.a {
            self.history.eval(arg, order)
        } else {
            self.solution.value(arg, order)
        }
    }
}

/// Either problem form.
#[derive(Clone)]
pub enum DdeProblem {
    Linear(LinearDde),
    General(GeneralDde),
}

impl DdeProblem {
    pub fn a(&self) -> f64 {
        match self {
            DdeProblem::Linear(p) => p.a,
            DdeProblem::General(p) => p.a,
        }
    }

    pub fn b(&self) -> f64 {
        match self {
            DdeProblem::Linear(p) => p.b,
            DdeProblem::General(p) => p.b,
        }
    }

    /// Differential order: 1 for the explicit linear form.
    pub fn order(&self) -> usize {
        match self {
            DdeProblem::Linear(_) => 1,
            DdeProblem::General(p) => p.order,
        }
    }

    pub fn history(&self) -> &History {
        match self {
            DdeProblem::Linear(p) => &p.history,
            DdeProblem::General(p) => &p.history,
        }
    }

    pub fn is_linear(&self) -> bool {
        matches!(self, DdeProblem::Linear(_))
    }
}

/// History value `h^(order)(x)`, with the precondition `x <= a` enforced.
pub fn history_eval(problem: &DdeProblem, x: f64, deriv_order: usize) -> Result<f64> {
    if x > problem.a() {
        return Err(Error::invalid(format!(
            "history queried at x = {x} above the domain start {}",
            problem.a()
        )));
    }
    problem.history().eval(x, deriv_order)
}

/// Exact solution with optional closed-form derivatives; falls back to
/// central finite differences where a derivative is not supplied.
#[derive(Clone)]
pub struct ExactSolution {
    f: ScalarFn,
    d1: Option<ScalarFn>,
    d2: Option<ScalarFn>,
}

impl ExactSolution {
    pub fn new(f: ScalarFn, d1: Option<ScalarFn>, d2: Option<ScalarFn>) -> Self {
        ExactSolution { f, d1, d2 }
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.f)(x)
    }
}

impl Solution for ExactSolution {
    fn value(&self, x: f64, order: usize) -> Result<f64> {
        const H: f64 = 1e-6;
        match order {
            0 => Ok((self.f)(x)),
            1 => Ok(match &self.d1 {
                Some(d) => d(x),
                None => ((self.f)(x + H) - (self.f)(x - H)) / (2.0 * H),
            }),
            2 => Ok(match &self.d2 {
                Some(d) => d(x),
                None => {
                    let d1 = |x: f64| match &self.d1 {
                        Some(d) => d(x),
                        None => ((self.f)(x + H) - (self.f)(x - H)) / (2.0 * H),
                    };
                    (d1(x + H) - d1(x - H)) / (2.0 * H)
                }
            }),
            _ => Err(Error::invalid(format!(
                "derivative order {order} not supported (max 2)"
            ))),
        }
    }
}

/// A named benchmark problem with its exact solution and solver presets.
#[derive(Clone)]
pub struct BenchmarkCase {
    pub name: String,
    pub problem: DdeProblem,
    pub parameters: Vec<(String, f64)>,
    pub exact: ExactSolution,
    /// Interior singularity locations, strictly increasing in `(a, b)`.
    /// Non-empty means the case is solved piecewise.
    pub breakpoints: Vec<f64>,
    /// Per-case adaptive-loop settings.
    pub rsa: RsaConfig,
    /// Initial guess for nonlinear cases.
    pub guess: Option<ScalarFn>,
    /// Abscissae at which pointwise errors are tabulated by the harness.
    pub error_abscissae: Vec<f64>,
    /// Free-form note on the registered equation form.
    pub notes: String,
}

impl BenchmarkCase {
    /// Exact solution at `x`, rejecting points outside `[a, b]`.
    pub fn exact_eval(&self, x: f64) -> Result<f64> {
        let (a, b) = (self.problem.a(), self.problem.b());
        if x < a || x > b {
            return Err(Error::invalid(format!("x = {x} outside [{a}, {b}]")));
        }
        Ok(self.exact.eval(x))
    }

    /// Smooth subintervals of `[a, b]` delimited by the breakpoints.
    pub fn subintervals(&self) -> Vec<(f64, f64)> {
        let mut edges = vec![self.problem.a()];
        edges.extend_from_slice(&self.breakpoints);
        edges.push(self.problem.b());
        edges.windows(2).map(|w| (w[0], w[1])).collect()
    }
}

/// Registration check: substitutes the exact solution into the problem's
/// residual at `samples_per_interval` interior points of every smooth
/// subinterval and returns the largest magnitude seen.
pub fn validate_registration(case: &BenchmarkCase, samples_per_interval: usize) -> Result<f64> {
    let mut worst = 0.0f64;
    for (lo, hi) in case.subintervals() {
        for i in 0..samples_per_interval {
            let t = (i as f64 + 0.5) / samples_per_interval as f64;
            let x = lo + t * (hi - lo);
            let r = crate::collocation::residual_at(&case.problem, &case.exact, x)
                .map_err(|e| Error::at(x, e))?;
            worst = worst.max(r.abs());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn params(kv: &[(&str, f64)]) -> Vec<(String, f64)> {
        kv.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn registry_rejects_unknown_case() {
        assert!(make_benchmark("example9", &[]).is_err());
    }

    #[test]
    fn registry_rejects_out_of_range_parameters() {
        assert!(make_benchmark("example1", &params(&[("p", 0.5)])).is_err());
        assert!(make_benchmark("example2", &params(&[("q", 1.5)])).is_err());
        assert!(make_benchmark("example5", &params(&[("c", 1.5)])).is_err());
        assert!(make_benchmark("example1", &params(&[("bogus", 1.0)])).is_err());
    }

    #[test]
    fn example1_constant_matches_definition() {
        let p = -0.1;
        let case = make_benchmark("example1", &params(&[("p", p)])).unwrap();
        let expect_a = p - (-3.0 * PI * p / 2.0).exp();
        let got_a = case
            .parameters
            .iter()
            .find(|(k, _)| k == "A")
            .map(|(_, v)| *v)
            .unwrap();
        assert!((got_a - expect_a).abs() < 1e-15);
        assert!((expect_a - (-0.1 - (0.15 * PI).exp())).abs() < 1e-12);
    }

    #[test]
    fn example3_breakpoints() {
        let case = make_benchmark("example3", &[]).unwrap();
        let expect = [2.0 / 3.0, 1.0, 5.0 / 3.0, 2.0];
        assert_eq!(case.breakpoints.len(), 4);
        for (b, e) in case.breakpoints.iter().zip(expect.iter()) {
            assert!((b - e).abs() < 1e-15);
        }
    }

    #[test]
    fn exact_values_at_reference_points() {
        let e1 = make_benchmark("example1", &params(&[("p", -1.0)])).unwrap();
        assert!((e1.exact_eval(0.0).unwrap() - 1.0).abs() < 1e-15);

        let e3 = make_benchmark("example3", &[]).unwrap();
        assert!((e3.exact_eval(0.5).unwrap() - 0.5f64.exp()).abs() < 1e-14);

        let e5 = make_benchmark("example5", &params(&[("c", 0.3)])).unwrap();
        assert!((e5.exact_eval(PI / 2.0).unwrap() - 1.0).abs() < 1e-15);

        let e2 = make_benchmark("example2", &params(&[("q", 0.5)])).unwrap();
        assert_eq!(e2.exact_eval(0.0).unwrap(), 1.0);
    }

    #[test]
    fn exact_eval_rejects_outside_domain() {
        let case = make_benchmark("example4", &[]).unwrap();
        assert!(case.exact_eval(-0.1).is_err());
        assert!(case.exact_eval(1.1).is_err());
    }

    #[test]
    fn history_values() {
        let e4 = make_benchmark("example4", &[]).unwrap();
        assert!((history_eval(&e4.problem, -0.5, 0).unwrap() - 1.5).abs() < 1e-15);

        // p = -1 at x = -pi: exp(p x) + sin(x) = exp(pi)
        let e1 = make_benchmark("example1", &params(&[("p", -1.0)])).unwrap();
        let h = history_eval(&e1.problem, -PI, 0).unwrap();
        assert!((h - PI.exp()).abs() < 1e-11);

        let e6 = make_benchmark("example6", &[]).unwrap();
        assert!((history_eval(&e6.problem, 0.5, 1).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn history_domain_floors() {
        let e6 = make_benchmark("example6", &[]).unwrap();
        assert!(matches!(
            history_eval(&e6.problem, -0.5, 0),
            Err(Error::Domain(_))
        ));
        let e1 = make_benchmark("example1", &params(&[("p", -1.0)])).unwrap();
        assert!(matches!(
            history_eval(&e1.problem, -3.0 * PI / 2.0 - 0.1, 0),
            Err(Error::Domain(_))
        ));
        // above a is a precondition violation
        assert!(history_eval(&e1.problem, 0.5, 0).is_err());
    }

    #[test]
    fn example3_exact_is_continuous_at_breakpoints() {
        // The branch constants make the piecewise solution continuous in
        // exact arithmetic; evaluate each pair of adjacent closed forms at
        // the shared breakpoint.
        let c1 = 1.0 + (-2.0 / 3.0f64).exp();
        let c2 = -2.0 * (-1.0f64).exp() + c1;
        let c3 = (5.0 / 3.0) * (-1.0f64).exp() + c2
            - (-5.0 / 3.0f64).exp()
            - c1 * (5.0 / 3.0) * (-1.0f64).exp();
        let c4 = (-2.0f64).exp() + 2.0 * c1 * (-1.0f64).exp() + c3 - 2.0 * c2 * (-1.0f64).exp();
        let branches: [&dyn Fn(f64) -> f64; 5] = [
            &|x: f64| x.exp(),
            &|x: f64| -1.0 + c1 * x.exp(),
            &|x: f64| x * (x - 1.0).exp() + c2 * x.exp(),
            &|x: f64| 1.0 + c1 * x * (x - 1.0).exp() + c3 * x.exp(),
            &|x: f64| (x * x / 2.0 - x) * (x - 2.0).exp() + c2 * x * (x - 1.0).exp() + c4 * x.exp(),
        ];
        let case = make_benchmark("example3", &[]).unwrap();
        for (i, &bp) in case.breakpoints.iter().enumerate() {
            let left = branches[i](bp);
            let right = branches[i + 1](bp);
            assert!(
                (left - right).abs() <= 1e-14 * (1.0 + left.abs()),
                "branch jump at {bp}: {left} vs {right}"
            );
            // the registered solution follows these forms
            assert!((case.exact.eval(bp) - left).abs() <= 1e-13 * (1.0 + left.abs()));
        }
        // one-sided extrapolation onto each breakpoint agrees from both sides
        for &bp in &case.breakpoints {
            let d = 1e-7;
            let from_left = case.exact.eval(bp - d) + d * case.exact.value(bp - d, 1).unwrap();
            let from_right = case.exact.eval(bp + d) - d * case.exact.value(bp + d, 1).unwrap();
            assert!((from_left - from_right).abs() <= 1e-10);
        }
    }

    #[test]
    fn all_registered_cases_satisfy_their_equations() {
        let configs: Vec<(&str, Vec<(String, f64)>)> = vec![
            ("example1", params(&[("p", -0.1)])),
            ("example1", params(&[("p", -2.0)])),
            ("example2", params(&[("q", 0.2)])),
            ("example2", params(&[("q", 0.9)])),
            ("example3", vec![]),
            ("example4", vec![]),
            ("example5", params(&[("c", -1.0)])),
            ("example5", params(&[("c", 0.7)])),
            ("example6", vec![]),
        ];
        for (name, ps) in configs {
            let case = make_benchmark(name, &ps).unwrap();
            let worst = validate_registration(&case, 50).unwrap();
            assert!(
                worst <= 1e-8,
                "{name} {:?}: residual {worst}",
                case.parameters
            );
        }
    }

    #[test]
    fn transcribed_second_order_variant_is_rejected() {
        // The variant with delayed argument `x - exp(1 - y(x))` sends the
        // argument below the history floor near the left endpoint; the
        // registration check must reject it.
        let case = make_benchmark("example6", &[]).unwrap();
        let history = case.problem.history().clone();
        let bad = GeneralDde::new(
            1.0,
            5.0,
            2,
            Arc::new(|x: f64, ctx: &EvalContext<'_>| {
                let y = ctx.y(0)?;
                let w = (1.0 - y).exp();
                let delayed = ctx.delayed(x - w, 0)?;
                let yp = ctx.y(1)?;
                Ok(ctx.y(2)? - (w - x) * delayed * yp * yp)
            }),
            history,
        )
        .unwrap();
        let bad_case = BenchmarkCase {
            problem: DdeProblem::General(bad),
            ..case
        };
        let outcome = validate_registration(&bad_case, 50);
        match outcome {
            Err(_) => {}
            Ok(worst) => assert!(worst > 1e-8, "variant unexpectedly satisfied: {worst}"),
        }
    }
}
