//! The built-in benchmark problems.
//!
//! Six cases spanning stiff constant-delay, pantograph (proportional
//! delay), discontinuity propagation, neutral state-dependent delay,
//! vanishing state delay, and second-order DDEs. Each case carries its
//! exact solution (with closed-form derivatives), the adaptive-loop
//! preset it is normally run with, and the abscissae at which the harness
//! tabulates pointwise errors.

use std::f64::consts::PI;
use std::sync::Arc;

use super::{
    scalar, BenchmarkCase, DdeProblem, EvalContext, ExactSolution, GeneralDde, History, LinearDde,
};
use crate::adapt::RsaConfig;
use crate::{Error, Result};

/// Names accepted by [`make_benchmark`], in catalogue order.
pub fn case_names() -> &'static [&'static str] {
    &[
        "example1", "example2", "example3", "example4", "example5", "example6",
    ]
}

/// Builds a fully populated benchmark case.
///
/// Recognized parameters: `example1` takes `p < 0` (default -1);
/// `example2` takes `q` in (0, 1) (default 0.5); `example5` takes `c` in
/// [-1, 1] (default 0). Unknown names or parameters are rejected.
pub fn make_benchmark(name: &str, parameters: &[(String, f64)]) -> Result<BenchmarkCase> {
    let allowed: &[&str] = match name {
        "example1" => &["p"],
        "example2" => &["q"],
        "example5" => &["c"],
        "example3" | "example4" | "example6" => &[],
        _ => {
            return Err(Error::invalid(format!(
                "unknown case '{name}' (expected one of {:?})",
                case_names()
            )))
        }
    };
    for (k, _) in parameters {
        if !allowed.contains(&k.as_str()) {
            return Err(Error::invalid(format!(
                "case '{name}' does not take parameter '{k}'"
            )));
        }
    }
    let get = |key: &str, default: f64| {
        parameters
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| *v)
            .unwrap_or(default)
    };

    match name {
        "example1" => example1(get("p", -1.0)),
        "example2" => example2(get("q", 0.5)),
        "example3" => example3(),
        "example4" => example4(),
        "example5" => example5(get("c", 0.0)),
        "example6" => example6(),
        _ => unreachable!(),
    }
}

/// Alternate adaptive preset for a case, where one is on record. Only
/// `example5` has one: initial grid 10 with `mu = sqrt(25/10)` instead of
/// the default grid 11 with `mu = sqrt(20/11)`.
pub fn alt_rsa_preset(name: &str) -> Option<RsaConfig> {
    match name {
        "example5" => {
            let mut rsa = RsaConfig::for_initial_grid(10);
            rsa.mu = (25.0 / 10.0f64).sqrt();
            rsa.cond_cap = Some(1e14);
            Some(rsa)
        }
        _ => None,
    }
}

/// Stiff DDE with constant lag `3*pi/2`:
/// `y' = A y + y(x - 3pi/2) - A sin x` on [0, 13], `A = p - exp(-3 pi p / 2)`,
/// history `exp(p x) + sin x` on [-3pi/2, 0]. Exact: `exp(p x) + sin x`.
fn example1(p: f64) -> Result<BenchmarkCase> {
    if !(p < 0.0) {
        return Err(Error::invalid("example1 requires p < 0"));
    }
    let a_const = p - (-3.0 * PI * p / 2.0).exp();
    let lag = 3.0 * PI / 2.0;
    let floor = -lag;
    let history = History::new(move |x, order| {
        if x < floor - 1e-12 {
            return Err(Error::domain(format!(
                "history argument {x} below {floor}"
            )));
        }
        match order {
            0 => Ok((p * x).exp() + x.sin()),
            1 => Ok(p * (p * x).exp() + x.cos()),
            2 => Ok(p * p * (p * x).exp() - x.sin()),
            _ => Err(Error::invalid("history derivative order > 2")),
        }
    });
    let problem = LinearDde::new(
        0.0,
        13.0,
        scalar(move |_| a_const),
        scalar(|_| 1.0),
        scalar(move |x: f64| -a_const * x.sin()),
        scalar(move |_| lag),
        history,
    )?;
    Ok(BenchmarkCase {
        name: "example1".into(),
        problem: DdeProblem::Linear(problem),
        parameters: vec![("p".into(), p), ("A".into(), a_const)],
        exact: ExactSolution::new(
            scalar(move |x: f64| (p * x).exp() + x.sin()),
            Some(scalar(move |x: f64| p * (p * x).exp() + x.cos())),
            Some(scalar(move |x: f64| p * p * (p * x).exp() - x.sin())),
        ),
        breakpoints: vec![],
        rsa: RsaConfig::for_initial_grid(6),
        guess: None,
        error_abscissae: vec![
            3.0 * PI / 4.0,
            3.0 * PI / 2.0,
            9.0 * PI / 4.0,
            3.0 * PI,
            15.0 * PI / 4.0,
        ],
        notes: "stiff DDE with constant lag; stiffness grows with |p|".into(),
    })
}

/// Pantograph equation `y' = -y + (q/2) y(qx) - (q/2) exp(-qx)` on
/// [0, 10], `y(0) = 1`. Exact: `exp(-x)`. The proportional delay
/// `(1-q) x` vanishes at the origin.
fn example2(q: f64) -> Result<BenchmarkCase> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::invalid("example2 requires 0 < q < 1"));
    }
    let history = History::new(|_x, order| match order {
        0 => Ok(1.0),
        _ => Ok(0.0),
    });
    let problem = LinearDde::new(
        0.0,
        10.0,
        scalar(|_| -1.0),
        scalar(move |_| q / 2.0),
        scalar(move |x: f64| -(q / 2.0) * (-q * x).exp()),
        scalar(move |x: f64| (1.0 - q) * x),
        history,
    )?;
    Ok(BenchmarkCase {
        name: "example2".into(),
        problem: DdeProblem::Linear(problem),
        parameters: vec![("q".into(), q)],
        exact: ExactSolution::new(
            scalar(|x: f64| (-x).exp()),
            Some(scalar(|x: f64| -(-x).exp())),
            Some(scalar(|x: f64| (-x).exp())),
        ),
        breakpoints: vec![],
        rsa: RsaConfig::for_initial_grid(6),
        guess: None,
        error_abscissae: vec![10.0],
        notes: "pantograph equation with proportional delay q*x".into(),
    })
}

/// `y' = y + y(x - 1)` on [0, 8/3] with a piecewise-constant history that
/// jumps at -1/3; the jump propagates as derivative singularities at
/// 2/3, 1, 5/3, 2. Solved piecewise over the five smooth subintervals.
fn example3() -> Result<BenchmarkCase> {
    let history = History::new(|x, order| {
        if x < -1.0 - 1e-12 {
            return Err(Error::domain(format!("history argument {x} below -1")));
        }
        match order {
            0 => Ok(if x < -1.0 / 3.0 { 0.0 } else { 1.0 }),
            _ => Ok(0.0),
        }
    });
    let problem = LinearDde::new(
        0.0,
        8.0 / 3.0,
        scalar(|_| 1.0),
        scalar(|_| 1.0),
        scalar(|_| 0.0),
        scalar(|_| 1.0),
        history,
    )?;

    let c1 = 1.0 + (-2.0 / 3.0f64).exp();
    let c2 = -2.0 * (-1.0f64).exp() + c1;
    let c3 = (5.0 / 3.0) * (-1.0f64).exp() + c2
        - (-5.0 / 3.0f64).exp()
        - c1 * (5.0 / 3.0) * (-1.0f64).exp();
    let c4 = (-2.0f64).exp() + 2.0 * c1 * (-1.0f64).exp() + c3 - 2.0 * c2 * (-1.0f64).exp();

    // On the last piece the polynomial factor rides on exp(x - 2); the
    // combination (x^2/2 - x) e^(x-2) + C2 x e^(x-1) + C4 e^x is the one
    // that satisfies y' = y + y(x - 1) there (checked by the registration
    // test below, along with continuity at the break).
    let value = move |x: f64| -> f64 {
        if x <= 2.0 / 3.0 {
            x.exp()
        } else if x <= 1.0 {
            -1.0 + c1 * x.exp()
        } else if x <= 5.0 / 3.0 {
            x * (x - 1.0).exp() + c2 * x.exp()
        } else if x <= 2.0 {
            1.0 + c1 * x * (x - 1.0).exp() + c3 * x.exp()
        } else {
            (x * x / 2.0 - x) * (x - 2.0).exp() + c2 * x * (x - 1.0).exp() + c4 * x.exp()
        }
    };
    let deriv = move |x: f64| -> f64 {
        if x <= 2.0 / 3.0 {
            x.exp()
        } else if x <= 1.0 {
            c1 * x.exp()
        } else if x <= 5.0 / 3.0 {
            (1.0 + x) * (x - 1.0).exp() + c2 * x.exp()
        } else if x <= 2.0 {
            c1 * (1.0 + x) * (x - 1.0).exp() + c3 * x.exp()
        } else {
            (x * x / 2.0 - 1.0) * (x - 2.0).exp()
                + c2 * (1.0 + x) * (x - 1.0).exp()
                + c4 * x.exp()
        }
    };
    let deriv2 = move |x: f64| -> f64 {
        if x <= 2.0 / 3.0 {
            x.exp()
        } else if x <= 1.0 {
            c1 * x.exp()
        } else if x <= 5.0 / 3.0 {
            (2.0 + x) * (x - 1.0).exp() + c2 * x.exp()
        } else if x <= 2.0 {
            c1 * (2.0 + x) * (x - 1.0).exp() + c3 * x.exp()
        } else {
            (x * x / 2.0 + x - 1.0) * (x - 2.0).exp()
                + c2 * (2.0 + x) * (x - 1.0).exp()
                + c4 * x.exp()
        }
    };

    Ok(BenchmarkCase {
        name: "example3".into(),
        problem: DdeProblem::Linear(problem),
        parameters: vec![],
        exact: ExactSolution::new(scalar(value), Some(scalar(deriv)), Some(scalar(deriv2))),
        breakpoints: vec![2.0 / 3.0, 1.0, 5.0 / 3.0, 2.0],
        rsa: RsaConfig::for_initial_grid(6),
        guess: None,
        error_abscissae: (1..=10).map(|i| 0.25 * i as f64).collect(),
        notes: "piecewise-smooth solution; solved sequentially over the smooth pieces".into(),
    })
}

/// Neutral state-delay DDE `y'(x) = -y'(y(x) - 2)` on [0, 1] with history
/// `1 - x`. Exact: `1 + x`. The delayed argument stays in the history for
/// the exact solution, so the neutral term reads the history slope.
fn example4() -> Result<BenchmarkCase> {
    let history = History::new(|x, order| match order {
        0 => Ok(1.0 - x),
        1 => Ok(-1.0),
        _ => Ok(0.0),
    });
    let residual: super::ResidualFn = Arc::new(|_x, ctx: &EvalContext<'_>| {
        let arg = ctx.y(0)? - 2.0;
        Ok(ctx.y(1)? + ctx.delayed(arg, 1)?)
    });
    let problem = GeneralDde::new(0.0, 1.0, 1, residual, history)?;
    let mut rsa = RsaConfig::for_initial_grid(6);
    rsa.cond_cap = Some(1e14);
    Ok(BenchmarkCase {
        name: "example4".into(),
        problem: DdeProblem::General(problem),
        parameters: vec![],
        exact: ExactSolution::new(
            scalar(|x: f64| 1.0 + x),
            Some(scalar(|_| 1.0)),
            Some(scalar(|_| 0.0)),
        ),
        breakpoints: vec![],
        rsa,
        guess: Some(scalar(|_| 0.0)),
        error_abscissae: vec![],
        notes: "neutral DDE with state-dependent delay y(x) - 2".into(),
    })
}

/// Vanishing state-delay neutral DDE on [0, pi]:
/// `y' = cos(x) [1 + y(x y^2)] + c y y'(x y^2) + g(x)`, `y(0) = 0`, with
/// `g` chosen so the exact solution is `sin(x)` for every `c` in [-1, 1].
/// The delay vanishes wherever `x y^2(x) = x`.
fn example5(c: f64) -> Result<BenchmarkCase> {
    if !(-1.0..=1.0).contains(&c) {
        return Err(Error::invalid("example5 requires c in [-1, 1]"));
    }
    let history = History::new(|_x, _order| Ok(0.0));
    let g = move |x: f64| {
        let s = x.sin();
        (1.0 - c) * s * (x * s * s).cos() - (x + x * s * s).sin()
    };
    let residual: super::ResidualFn = Arc::new(move |x: f64, ctx: &EvalContext<'_>| {
        let y = ctx.y(0)?;
        let arg = x * y * y;
        let retarded = ctx.delayed(arg, 0)?;
        let neutral = ctx.delayed(arg, 1)?;
        Ok(ctx.y(1)? - x.cos() * (1.0 + retarded) - c * y * neutral - g(x))
    });
    let problem = GeneralDde::new(0.0, PI, 1, residual, history)?;
    let mut rsa = RsaConfig::for_initial_grid(11);
    rsa.mu = (20.0 / 11.0f64).sqrt();
    rsa.cond_cap = Some(1e14);
    Ok(BenchmarkCase {
        name: "example5".into(),
        problem: DdeProblem::General(problem),
        parameters: vec![("c".into(), c)],
        exact: ExactSolution::new(
            scalar(|x: f64| x.sin()),
            Some(scalar(|x: f64| x.cos())),
            Some(scalar(|x: f64| -x.sin())),
        ),
        breakpoints: vec![],
        rsa,
        guess: Some(scalar(|_| 0.5)),
        error_abscissae: vec![PI],
        notes: "nonlinear neutral DDE with vanishing state delay; c = 1 has an \
                ill-defined derivative at pi/2 and is expected to fail"
            .into(),
    })
}

/// Second-order DDE on [1, 5] with history `log(x)` on (0, 1] and exact
/// solution `log(x)`.
///
/// The scalar reduction registered here is
/// `y''(x) = -exp(1 - y(x)) * y'(exp(1 - y(x))) * y'(x)^2`,
/// obtained by differentiating the first equation of the underlying
/// two-equation state-delay system and substituting the second; the
/// delayed argument `exp(1 - y(x))` stays strictly positive, so it can
/// always be served by the history or the interpolant. A transcription of
/// the same problem with delayed argument `x - exp(1 - y(x))` leaves the
/// history domain near `x = 1` and fails the registration check (see the
/// module tests).
fn example6() -> Result<BenchmarkCase> {
    let history = History::new(|x, order| {
        if x <= 0.0 {
            return Err(Error::domain(format!(
                "history argument {x} outside (0, 1]"
            )));
        }
        match order {
            0 => Ok(x.ln()),
            1 => Ok(1.0 / x),
            2 => Ok(-1.0 / (x * x)),
            _ => Err(Error::invalid("history derivative order > 2")),
        }
    });
    let residual: super::ResidualFn = Arc::new(|_x, ctx: &EvalContext<'_>| {
        let y = ctx.y(0)?;
        let yp = ctx.y(1)?;
        let w = (1.0 - y).exp();
        Ok(ctx.y(2)? + w * ctx.delayed(w, 1)? * yp * yp)
    });
    let problem = GeneralDde::new(1.0, 5.0, 2, residual, history)?;
    let mut rsa = RsaConfig::for_initial_grid(10);
    rsa.cond_cap = Some(1e14);
    Ok(BenchmarkCase {
        name: "example6".into(),
        problem: DdeProblem::General(problem),
        parameters: vec![],
        exact: ExactSolution::new(
            scalar(|x: f64| x.ln()),
            Some(scalar(|x: f64| 1.0 / x)),
            Some(scalar(|x: f64| -1.0 / (x * x))),
        ),
        breakpoints: vec![],
        rsa,
        guess: Some(scalar(|_| 0.0)),
        error_abscissae: vec![],
        notes: "second-order DDE; scalar reduction validated against the exact \
                solution at registration"
            .into(),
    })
}
