//! Independent fixed-step RK4 method-of-steps solver for retarded DDEs.
//!
//! This is the cross-check instrument: deliberately simple, with dense
//! output by cubic Hermite interpolation over the step grid. Delayed
//! values come from the history for arguments at or below `a` and from
//! the dense solution otherwise; a delayed argument beyond the current
//! integration front (vanishing delays) is served by a provisional
//! extension of the current step, iterated to a fixed point.
//!
//! Neutral and higher-order problems are out of scope here on purpose:
//! the oracle's value is that it is simple enough to trust.

use std::cell::Cell;

use crate::problem::{DdeProblem, EvalContext, GeneralDde, History, LinearDde, Solution};
use crate::{Error, Result};

/// Step-grid solution with C1 dense output.
#[derive(Debug, Clone)]
pub struct DenseSolution {
    xs: Vec<f64>,
    ys: Vec<f64>,
    /// Derivative leaving each grid point (right-sided limit).
    f_out: Vec<f64>,
    /// Derivative arriving at each grid point (left-sided limit). Differs
    /// from `f_out` only where a segment edge carries a derivative jump.
    f_in: Vec<f64>,
}

impl DenseSolution {
    pub fn a(&self) -> f64 {
        self.xs[0]
    }

    pub fn b(&self) -> f64 {
        *self.xs.last().unwrap()
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    /// Cubic Hermite interpolation on the covering step interval.
    pub fn eval(&self, x: f64) -> Result<f64> {
        let tol = 1e-12 * (1.0 + self.b().abs() + self.a().abs());
        if x < self.a() - tol || x > self.b() + tol {
            return Err(Error::invalid(format!(
                "x = {x} outside the integrated range [{}, {}]",
                self.a(),
                self.b()
            )));
        }
        let idx = match self.xs.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
            Ok(i) => i.min(self.xs.len() - 2),
            Err(i) => i.saturating_sub(1).min(self.xs.len() - 2),
        };
        let (x0, x1) = (self.xs[idx], self.xs[idx + 1]);
        let h = x1 - x0;
        let t = ((x - x0) / h).clamp(0.0, 1.0);
        let (y0, y1) = (self.ys[idx], self.ys[idx + 1]);
        let (d0, d1) = (self.f_out[idx], self.f_in[idx + 1]);
        let t2 = t * t;
        let t3 = t2 * t;
        Ok((2.0 * t3 - 3.0 * t2 + 1.0) * y0
            + (t3 - 2.0 * t2 + t) * h * d0
            + (-2.0 * t3 + 3.0 * t2) * y1
            + (t3 - t2) * h * d1)
    }
}

impl Solution for DenseSolution {
    fn value(&self, x: f64, order: usize) -> Result<f64> {
        if order != 0 {
            return Err(Error::invalid(
                "dense RK4 output provides values only (order 0)",
            ));
        }
        self.eval(x)
    }
}

/// Right-hand-side evaluation for one stage: either the explicit linear
/// form or a scalar Newton solve of the implicit residual for `y'`.
enum Rhs<'a> {
    Linear(&'a LinearDde),
    General(&'a GeneralDde, History),
}

/// How far fixed-point sweeps may go when a delayed argument overruns the
/// integration front.
const MAX_SWEEPS: usize = 25;

/// Classical RK4 over `[a, b]` with delayed terms served by the dense
/// solution. The grid is aligned so that `a`, `b`, and every supplied
/// breakpoint are grid points, which keeps each step inside one smooth
/// segment.
pub fn steps_rk4(problem: &DdeProblem, h: f64, breakpoints: &[f64]) -> Result<DenseSolution> {
    if !(h > 0.0) {
        return Err(Error::invalid("step size must be positive"));
    }
    let (a, b) = (problem.a(), problem.b());
    if !crate::kernel::strictly_increasing(breakpoints)
        || breakpoints.iter().any(|&x| x <= a || x >= b)
    {
        return Err(Error::invalid(
            "breakpoints must be strictly increasing inside (a, b)",
        ));
    }

    let rhs = match problem {
        DdeProblem::Linear(p) => Rhs::Linear(p),
        DdeProblem::General(g) => {
            if g.order != 1 {
                return Err(Error::invalid(
                    "the RK4 oracle handles first-order problems only",
                ));
            }
            // Wrap the history so a delayed-derivative request (a neutral
            // term) fails loudly instead of silently using history slopes.
            let inner = g.history.clone();
            let guard = History::new(move |x, order| {
                if order > 0 {
                    return Err(Error::invalid(
                        "the RK4 oracle supports retarded problems only \
                         (delayed derivative requested)",
                    ));
                }
                inner.eval(x, 0)
            });
            Rhs::General(g, guard)
        }
    };

    let mut edges = vec![a];
    edges.extend_from_slice(breakpoints);
    edges.push(b);

    let y_a = problem.history().eval(a, 0)?;
    let mut sol = DenseSolution {
        xs: vec![a],
        ys: vec![y_a],
        f_out: vec![0.0],
        f_in: vec![0.0],
    };

    for w in edges.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let n = ((hi - lo) / h).ceil().max(1.0) as usize;
        let step = (hi - lo) / n as f64;
        for i in 0..n {
            let x0 = lo + i as f64 * step;
            let x1 = if i + 1 == n { hi } else { lo + (i + 1) as f64 * step };
            let closes_segment = i + 1 == n;
            advance_step(problem, &rhs, &mut sol, x0, x1, closes_segment)?;
        }
    }
    Ok(sol)
}

/// One RK4 step from `x0` to `x1`, iterated to a fixed point when delayed
/// arguments overrun the front.
fn advance_step(
    problem: &DdeProblem,
    rhs: &Rhs<'_>,
    sol: &mut DenseSolution,
    x0: f64,
    x1: f64,
    closes_segment: bool,
) -> Result<()> {
    let step = x1 - x0;
    let y0 = *sol.ys.last().unwrap();
    let overran = Cell::new(false);
    let mut provisional: Option<(f64, f64)> = None; // (y1, f1)
    let hint = sol.f_in[sol.f_in.len() - 1];

    let mut result = None;
    for _sweep in 0..MAX_SWEEPS {
        overran.set(false);
        // k1's delayed arguments never pass the front, so the provisional
        // slope in `front` is not consulted yet.
        let k1 = stage_value(problem, rhs, sol, (x0, y0, hint), x1, x0, y0, hint, &overran, &provisional, false)?;
        let front = (x0, y0, k1);
        let k2 = stage_value(problem, rhs, sol, front, x1, x0 + 0.5 * step, y0 + 0.5 * step * k1, k1, &overran, &provisional, false)?;
        let k3 = stage_value(problem, rhs, sol, front, x1, x0 + 0.5 * step, y0 + 0.5 * step * k2, k2, &overran, &provisional, false)?;
        let k4 = stage_value(problem, rhs, sol, front, x1, x1, y0 + step * k3, k3, &overran, &provisional, closes_segment)?;
        let y1 = y0 + step / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        let f1 = stage_value(problem, rhs, sol, front, x1, x1, y1, k4, &overran, &provisional, closes_segment)?;

        let converged = match provisional {
            Some((prev, _)) => (y1 - prev).abs() <= 1e-14 * (1.0 + y1.abs()),
            None => !overran.get(),
        };
        provisional = Some((y1, f1));
        if converged {
            result = Some((y1, f1, k1));
            break;
        }
    }

    let (y1, f1, k1) = result.ok_or_else(|| {
        Error::domain(format!(
            "fixed-point sweeps did not contract on the step [{x0}, {x1}]"
        ))
    })?;

    let last = sol.xs.len() - 1;
    sol.f_out[last] = k1;
    sol.xs.push(x1);
    sol.ys.push(y1);
    sol.f_in.push(f1);
    sol.f_out.push(f1);
    Ok(())
}

/// Derivative `y'(x)` for a stage at `(x, y)` of the step ending at
/// `step_end`.
#[allow(clippy::too_many_arguments)]
fn stage_value(
    problem: &DdeProblem,
    rhs: &Rhs<'_>,
    sol: &DenseSolution,
    front: (f64, f64, f64),
    step_end: f64,
    x: f64,
    y: f64,
    deriv_hint: f64,
    overran: &Cell<bool>,
    provisional: &Option<(f64, f64)>,
    at_edge: bool,
) -> Result<f64> {
    let a = problem.a();
    // Closing stages of a smooth segment must see the segment's own side
    // of any history or solution kink sitting exactly at the delayed
    // argument; a tiny left-nudge selects it.
    let nudge = if at_edge { 1e-12 * (1.0 + x.abs()) } else { 0.0 };

    let lookup = |arg: f64| -> Result<f64> {
        let arg = arg - nudge;
        if arg <= a {
            problem.history().eval(arg, 0)
        } else if arg <= front.0 {
            sol.eval(arg)
        } else {
            overran.set(true);
            let (x0, y0, f0) = front;
            match provisional {
                None => Ok(y0 + (arg - x0) * f0),
                Some((y1, f1)) => {
                    // Hermite over the in-flight step [x0, step_end]
                    let h = step_end - x0;
                    let t = ((arg - x0) / h).clamp(0.0, 1.0);
                    let t2 = t * t;
                    let t3 = t2 * t;
                    Ok((2.0 * t3 - 3.0 * t2 + 1.0) * y0
                        + (t3 - 2.0 * t2 + t) * h * f0
                        + (-2.0 * t3 + 3.0 * t2) * y1
                        + (t3 - t2) * h * f1)
                }
            }
        }
    };

    match rhs {
        Rhs::Linear(p) => {
            let delayed = lookup(x - (p.tau)(x))?;
            Ok((p.p)(x) * y + (p.q)(x) * delayed + (p.s)(x))
        }
        Rhs::General(g, guard) => {
            implicit_derivative(g, guard, x, y, deriv_hint, &lookup)
        }
    }
}

/// Solves `G(x, y, y') = 0` for the scalar `y'` by Newton iteration with a
/// numerical slope. Exact in one step for residuals affine in `y'`.
fn implicit_derivative(
    problem: &GeneralDde,
    guard: &History,
    x: f64,
    y: f64,
    hint: f64,
    lookup: &dyn Fn(f64) -> Result<f64>,
) -> Result<f64> {
    struct StageView<'c> {
        x: f64,
        y: f64,
        yp: f64,
        lookup: &'c dyn Fn(f64) -> Result<f64>,
    }
    impl Solution for StageView<'_> {
        fn value(&self, q: f64, order: usize) -> Result<f64> {
            if q == self.x {
                return match order {
                    0 => Ok(self.y),
                    1 => Ok(self.yp),
                    _ => Err(Error::invalid(
                        "the RK4 oracle handles first-order problems only",
                    )),
                };
            }
            if order > 0 {
                return Err(Error::invalid(
                    "the RK4 oracle supports retarded problems only \
                     (delayed derivative requested)",
                ));
            }
            (self.lookup)(q)
        }
    }

    let g = |z: f64| -> Result<f64> {
        let view = StageView {
            x,
            y,
            yp: z,
            lookup,
        };
        let ctx = EvalContext::new(x, problem.a, guard, &view);
        (problem.residual)(x, &ctx)
    };

    let mut z = hint;
    for _ in 0..50 {
        let gz = g(z)?;
        if gz.abs() <= 1e-13 * (1.0 + z.abs()) {
            return Ok(z);
        }
        let dz = 1e-7 * (1.0 + z.abs());
        let slope = (g(z + dz)? - gz) / dz;
        if slope == 0.0 || !slope.is_finite() {
            break;
        }
        let step = gz / slope;
        z -= step;
        if step.abs() <= 1e-15 * (1.0 + z.abs()) {
            let gz = g(z)?;
            if gz.abs() <= 1e-10 * (1.0 + z.abs()) {
                return Ok(z);
            }
        }
    }
    Err(Error::domain(format!(
        "implicit stage derivative did not converge at x = {x}"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{make_benchmark, scalar, History, LinearDde};

    fn max_error_against(sol: &DenseSolution, exact: impl Fn(f64) -> f64, n: usize) -> f64 {
        let (a, b) = (sol.a(), sol.b());
        (0..n)
            .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
            .map(|x| (sol.eval(x).unwrap() - exact(x)).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn constant_history_constant_solution() {
        let problem = DdeProblem::Linear(
            LinearDde::new(
                0.0,
                2.0,
                scalar(|_| 0.0),
                scalar(|_| 0.0),
                scalar(|_| 0.0),
                scalar(|_| 1.0),
                History::new(|_, order| Ok(if order == 0 { 1.0 } else { 0.0 })),
            )
            .unwrap(),
        );
        let sol = steps_rk4(&problem, 0.1, &[]).unwrap();
        for i in 0..=20 {
            let x = 2.0 * i as f64 / 20.0;
            assert!((sol.eval(x).unwrap() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn stiff_constant_lag_benchmark_to_1e9() {
        let p = -1.0;
        let case = make_benchmark("example1", &[("p".to_string(), p)]).unwrap();
        let sol = steps_rk4(&case.problem, 1e-3, &[]).unwrap();
        let err = max_error_against(&sol, |x| (p * x).exp() + x.sin(), 500);
        assert!(err <= 1e-9, "max error {err}");
    }

    #[test]
    fn halving_the_step_divides_the_error_by_about_sixteen() {
        let p = -1.0;
        let case = make_benchmark("example1", &[("p".to_string(), p)]).unwrap();
        let exact = |x: f64| (p * x).exp() + x.sin();
        let coarse = steps_rk4(&case.problem, 4e-3, &[]).unwrap();
        let fine = steps_rk4(&case.problem, 2e-3, &[]).unwrap();
        let ratio = max_error_against(&coarse, exact, 400) / max_error_against(&fine, exact, 400);
        assert!(
            (12.0..=20.0).contains(&ratio),
            "order-4 ratio out of range: {ratio}"
        );
    }

    #[test]
    fn discontinuity_propagation_with_aligned_steps() {
        let case = make_benchmark("example3", &[]).unwrap();
        let sol = steps_rk4(&case.problem, 1e-3, &case.breakpoints).unwrap();
        let err = max_error_against(&sol, |x| case.exact.eval(x), 500);
        assert!(err <= 1e-8, "max error {err}");
    }

    #[test]
    fn vanishing_delay_overlap_contracts() {
        let case = make_benchmark("example2", &[("q".to_string(), 0.9)]).unwrap();
        let sol = steps_rk4(&case.problem, 1e-3, &[]).unwrap();
        let err = max_error_against(&sol, |x| (-x).exp(), 500);
        assert!(err <= 1e-9, "max error {err}");
    }

    #[test]
    fn implicit_path_matches_explicit_on_wrapped_linear() {
        let case = make_benchmark("example2", &[("q".to_string(), 0.5)]).unwrap();
        let linear = match &case.problem {
            DdeProblem::Linear(p) => p.clone(),
            _ => unreachable!(),
        };
        let wrapped = DdeProblem::General(linear.to_general());
        let direct = steps_rk4(&case.problem, 5e-3, &[]).unwrap();
        let implicit = steps_rk4(&wrapped, 5e-3, &[]).unwrap();
        for i in 0..=100 {
            let x = 10.0 * i as f64 / 100.0;
            let d = (direct.eval(x).unwrap() - implicit.eval(x).unwrap()).abs();
            assert!(d <= 1e-10, "x = {x}: gap {d}");
        }
    }

    #[test]
    fn neutral_problems_are_refused() {
        let case = make_benchmark("example4", &[]).unwrap();
        let err = steps_rk4(&case.problem, 1e-2, &[]).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("retarded"), "unexpected message: {msg}");
    }

    #[test]
    fn second_order_problems_are_refused() {
        let case = make_benchmark("example6", &[]).unwrap();
        assert!(steps_rk4(&case.problem, 1e-2, &[]).is_err());
    }
}
