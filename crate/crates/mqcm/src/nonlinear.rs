//! Nonlinear collocation: residual vectors, finite-difference Jacobians,
//! and a Powell dogleg trust-region root finder.
//!
//! A general DDE collocated on an order-`m` basis yields one residual
//! component per node plus `m` initial-condition components, all nonlinear
//! in the expansion coefficients. The Jacobian is always rebuilt by
//! forward differences; Newton-type iterations are too fragile at the
//! condition numbers the bases reach, so steps are globalized with the
//! classic dogleg blend of the Gauss-Newton and Cauchy directions.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::collocation::ExpansionView;
use crate::kernel::MqBasis;
use crate::linsolve;
use crate::problem::{EvalContext, GeneralDde};
use crate::{Error, Result};

/// Tuning knobs for [`dogleg_solve`].
#[derive(Debug, Clone, Copy)]
pub struct NlOptions {
    /// Iteration cap; hitting it is a soft failure.
    pub max_iters: usize,
    /// Relative residual-norm stop: converged when
    /// `||F|| <= f_tol * (1 + ||F(alpha0)||)`.
    pub f_tol: f64,
    /// Trust-radius floor; the iteration stalls below it.
    pub step_tol: f64,
    /// Starting trust radius.
    pub initial_radius: f64,
    /// Relative forward-difference perturbation for the Jacobian.
    pub fd_step: f64,
}

impl Default for NlOptions {
    fn default() -> Self {
        NlOptions {
            max_iters: 30,
            f_tol: 1e-12,
            step_tol: 1e-14,
            initial_radius: 1.0,
            fd_step: f64::EPSILON.sqrt(),
        }
    }
}

impl NlOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters < 1 {
            return Err(Error::invalid("max_iters must be at least 1"));
        }
        if !(self.f_tol > 0.0 && self.step_tol > 0.0 && self.initial_radius > 0.0
            && self.fd_step > 0.0)
        {
            return Err(Error::invalid("all nonlinear tolerances must be positive"));
        }
        Ok(())
    }
}

/// Outcome of a dogleg run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NlStatus {
    Converged,
    MaxIters,
    Stalled,
}

/// Iteration report returned alongside the final coefficient vector.
#[derive(Debug, Clone, Copy)]
pub struct NlReport {
    pub status: NlStatus,
    pub iterations: usize,
    pub final_norm: f64,
}

/// The collocation residual system `F(alpha) = 0` of a general DDE over a
/// fixed basis: components `0..N` are the problem residual at each node,
/// components `N..N+m` enforce `y^(k)(a) = h^(k)(a)` for `k = 0..m-1`.
pub struct ResidualSystem<'a> {
    problem: &'a GeneralDde,
    basis: &'a MqBasis,
    nodes: Vec<f64>,
}

impl<'a> ResidualSystem<'a> {
    pub fn new(problem: &'a GeneralDde, basis: &'a MqBasis) -> Result<Self> {
        if basis.n_extra() != problem.order {
            return Err(Error::invalid(format!(
                "order-{} problem needs {} extra centers, basis has {}",
                problem.order, problem.order, basis.n_extra
                ()
            )));
        }
        Ok(ResidualSystem {
            problem,
            basis,
            nodes: basis.node_positions(),
        })
    }

    /// Number of components, equal to the number of unknowns.
    pub fn dim(&self) -> usize {
        self.nodes.len() + self.problem.order
    }

    /// Evaluates the residual vector at a candidate coefficient vector.
    pub fn eval(&self, alpha: &DVector<f64>) -> Result<DVector<f64>> {
        if alpha.len() != self.basis.len() {
            return Err(Error::invalid("coefficient length mismatch"));
        }
        let view = ExpansionView {
            basis: self.basis,
            coeffs: alpha.as_slice(),
        };
        let a = self.problem.a;
        let mut out = DVector::zeros(self.dim());
        for (i, &x) in self.nodes.iter().enumerate() {
            let ctx = EvalContext::new(x, a, &self.problem.history, &view);
            out[i] = (self.problem.residual)(x, &ctx).map_err(|e| Error::at(x, e))?;
        }
        for k in 0..self.problem.order {
            let idx = self.nodes.len() + k;
            out[idx] = view.value(a, k).map_err(|e| Error::at(a, e))?
                - self.problem.history.eval(a, k).map_err(|e| Error::at(a, e))?;
        }
        Ok(out)
    }
}

use crate::problem::Solution;

/// Forward-difference Jacobian of `f` at `alpha`, one column per unknown
/// with per-column step `fd_step * max(1, |alpha_k|)`. Columns are
/// evaluated in parallel.
pub fn fd_jacobian<F>(f: &F, alpha: &DVector<f64>, fd_step: f64) -> Result<DMatrix<f64>>
where
    F: Fn(&DVector<f64>) -> Result<DVector<f64>> + Sync,
{
    let f0 = f(alpha)?;
    let n = alpha.len();
    let cols: Vec<Result<DVector<f64>>> = (0..n)
        .into_par_iter()
        .map(|k| {
            let h = fd_step * alpha[k].abs().max(1.0);
            let mut shifted = alpha.clone();
            shifted[k] += h;
            let fk = f(&shifted).map_err(|e| Error::JacobianColumn {
                column: k,
                source: Box::new(e),
            })?;
            Ok((fk - &f0) / h)
        })
        .collect();

    let mut jac = DMatrix::zeros(f0.len(), n);
    for (k, col) in cols.into_iter().enumerate() {
        jac.set_column(k, &col?);
    }
    Ok(jac)
}

/// Powell dogleg trust-region iteration for `F(alpha) = 0`.
///
/// Steps take the Gauss-Newton direction when it fits inside the trust
/// radius and otherwise blend it with the steepest-descent Cauchy point on
/// the radius boundary. The radius doubles when the gain ratio reaches
/// 0.75, shrinks by 4 below 0.25, and a step is rejected outright when the
/// ratio is non-positive, so accepted iterates never increase `||F||`.
/// On `MaxIters` and `Stalled` the best iterate found so far is returned;
/// the adaptive loop reuses it as the next refinement level's guess.
pub fn dogleg_solve<F>(
    f: &F,
    alpha0: &DVector<f64>,
    opts: &NlOptions,
) -> Result<(DVector<f64>, NlReport)>
where
    F: Fn(&DVector<f64>) -> Result<DVector<f64>> + Sync,
{
    opts.validate()?;

    let mut alpha = alpha0.clone();
    let mut resid = f(&alpha)?;
    let mut norm = resid.norm();
    let f_stop = opts.f_tol * (1.0 + norm);
    let mut radius = opts.initial_radius;
    let rcond = linsolve::default_rcond(resid.len(), alpha.len());

    if norm <= f_stop {
        return Ok((
            alpha,
            NlReport {
                status: NlStatus::Converged,
                iterations: 0,
                final_norm: norm,
            },
        ));
    }

    let mut iterations = 0;
    let mut needs_model = true;
    let mut jac = DMatrix::zeros(resid.len(), alpha.len());
    let mut newton = DVector::zeros(alpha.len());
    let mut cauchy = DVector::zeros(alpha.len());

    let status = loop {
        if iterations >= opts.max_iters {
            break NlStatus::MaxIters;
        }
        if needs_model {
            jac = fd_jacobian(f, &alpha, opts.fd_step)?;
            newton = linsolve::pseudo_solve(&jac, &(-&resid), rcond)?.0;
            let grad = jac.transpose() * &resid;
            let jg = &jac * &grad;
            let g2 = grad.norm_squared();
            let jg2 = jg.norm_squared();
            cauchy = if jg2 > 0.0 {
                -(g2 / jg2) * grad
            } else {
                DVector::zeros(alpha.len())
            };
            needs_model = false;
        }

        iterations += 1;
        let step = dogleg_step(&newton, &cauchy, radius);
        let predicted = 0.5 * norm * norm - 0.5 * (&resid + &jac * &step).norm_squared();
        if !(predicted > 0.0) || step.norm() == 0.0 {
            break NlStatus::Stalled;
        }

        let trial = &alpha + &step;
        let trial_resid = f(&trial)?;
        let trial_norm = trial_resid.norm();
        let actual = 0.5 * norm * norm - 0.5 * trial_norm * trial_norm;
        let ratio = actual / predicted;

        if ratio > 0.0 {
            alpha = trial;
            resid = trial_resid;
            norm = trial_norm;
            needs_model = true;
            if norm <= f_stop {
                break NlStatus::Converged;
            }
        }
        if ratio >= 0.75 {
            radius *= 2.0;
        } else if ratio < 0.25 {
            radius *= 0.25;
        }
        if radius < opts.step_tol {
            break NlStatus::Stalled;
        }
    };

    Ok((
        alpha,
        NlReport {
            status,
            iterations,
            final_norm: norm,
        },
    ))
}

/// The dogleg step for the current radius, from cached Gauss-Newton and
/// Cauchy directions.
fn dogleg_step(newton: &DVector<f64>, cauchy: &DVector<f64>, radius: f64) -> DVector<f64> {
    let newton_len = newton.norm();
    if newton_len <= radius {
        return newton.clone();
    }
    let cauchy_len = cauchy.norm();
    if cauchy_len >= radius {
        if cauchy_len == 0.0 {
            return cauchy.clone();
        }
        return cauchy * (radius / cauchy_len);
    }
    // On the leg from the Cauchy point towards the Gauss-Newton point,
    // pick the parameter where the leg crosses the radius.
    let d = newton - cauchy;
    let d2 = d.norm_squared();
    if d2 == 0.0 {
        return cauchy.clone();
    }
    let cd = cauchy.dot(&d);
    let c2 = cauchy.norm_squared();
    let t = (-cd + (cd * cd + d2 * (radius * radius - c2)).sqrt()) / d2;
    cauchy + d * t.clamp(0.0, 1.0)
}
