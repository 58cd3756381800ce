//! Collocation-system assembly, interpolants, and pointwise residuals.
//!
//! The approximate solution is `y(x) = sum_j alpha_j phi_j(x)` over a
//! multiquadric basis whose in-domain centers double as collocation
//! nodes. For a linear DDE the collocation conditions form one dense
//! square system: one row per node (the equation, with the delayed term
//! read from the history when the lagged argument falls at or below `a`)
//! plus one initial-condition row at `x = a`. The extra center outside
//! the domain is what makes room for both rows at `a`.

use nalgebra::{DMatrix, DVector};

use crate::kernel::{mq_eval, mq_eval_order, MqBasis};
use crate::linsolve::{self, SolveInfo};
use crate::problem::{DdeProblem, EvalContext, LinearDde, Solution};
use crate::{Error, Result};

/// Coefficients over a multiquadric basis; the approximate solution.
#[derive(Debug, Clone)]
pub struct Interpolant {
    basis: MqBasis,
    coefficients: DVector<f64>,
}

impl Interpolant {
    pub fn new(basis: MqBasis, coefficients: DVector<f64>) -> Result<Self> {
        if coefficients.len() != basis.len() {
            return Err(Error::invalid(format!(
                "{} coefficients for a basis of {} centers",
                coefficients.len(),
                basis.len()
            )));
        }
        Ok(Interpolant {
            basis,
            coefficients,
        })
    }

    pub fn basis(&self) -> &MqBasis {
        &self.basis
    }

    pub fn coefficients(&self) -> &DVector<f64> {
        &self.coefficients
    }

    /// `sum_j alpha_j phi_j^(order)(x)` for order 0, 1, or 2. The expansion
    /// is global, so `x` may lie anywhere on the line.
    pub fn eval(&self, x: f64, order: usize) -> Result<f64> {
        eval_expansion(&self.basis, self.coefficients.as_slice(), x, order)
    }
}

impl Solution for Interpolant {
    fn value(&self, x: f64, order: usize) -> Result<f64> {
        self.eval(x, order)
    }
}

/// Expansion evaluation over borrowed parts; shared by [`Interpolant`] and
/// the nonlinear residual assembly (which re-evaluates many candidate
/// coefficient vectors against one basis).
pub(crate) fn eval_expansion(basis: &MqBasis, coeffs: &[f64], x: f64, order: usize) -> Result<f64> {
    if order > 2 {
        return Err(Error::invalid(format!(
            "derivative order {order} not supported (max 2)"
        )));
    }
    let mut acc = 0.0;
    for (c, &alpha) in basis.centers().iter().zip(coeffs) {
        acc += alpha * mq_eval_order(x, c, order)?;
    }
    Ok(acc)
}

/// Borrowed expansion view implementing [`Solution`].
pub(crate) struct ExpansionView<'a> {
    pub basis: &'a MqBasis,
    pub coeffs: &'a [f64],
}

impl Solution for ExpansionView<'_> {
    fn value(&self, x: f64, order: usize) -> Result<f64> {
        eval_expansion(self.basis, self.coeffs, x, order)
    }
}

/// Centers for an order-`m` problem: `m` extra centers at
/// `a - m*spacing, ..., a - spacing` followed by the nodes. Shapes are
/// left at their placeholder value until
/// [`MqBasis::apply_shapes`](crate::kernel::MqBasis::apply_shapes) runs.
pub fn build_centers(nodes: &[f64], order: usize, spacing: f64) -> Result<MqBasis> {
    if order < 1 {
        return Err(Error::invalid("order must be at least 1"));
    }
    if !(spacing > 0.0) {
        return Err(Error::invalid("spacing must be positive"));
    }
    if nodes.len() < 2 || !crate::kernel::strictly_increasing(nodes) {
        return Err(Error::invalid("nodes must be sorted and at least 2"));
    }
    let a = nodes[0];
    let extra: Vec<f64> = (1..=order)
        .rev()
        .map(|k| a - k as f64 * spacing)
        .collect();
    MqBasis::from_positions(&extra, nodes)
}

/// Assembles the dense collocation system of a linear DDE over `basis`.
/// `nodes` must be the in-domain centers of the basis; they are passed
/// separately to make the collocation point set explicit at the call
/// site.
pub fn assemble_linear(
    problem: &LinearDde,
    basis: &MqBasis,
    nodes: &[f64],
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    if basis.n_extra() != 1 {
        return Err(Error::invalid(
            "linear assembly expects exactly one extra center",
        ));
    }
    let positions = basis.node_positions();
    if nodes.len() != positions.len() || nodes.iter().zip(&positions).any(|(x, p)| x != p) {
        return Err(Error::invalid(
            "collocation nodes must coincide with the in-domain centers",
        ));
    }

    let n = nodes.len();
    let dim = basis.len(); // n + 1
    let a = problem.a;
    let mut mat = DMatrix::zeros(dim, dim);
    let mut rhs = DVector::zeros(dim);

    for (i, &x) in nodes.iter().enumerate() {
        let p = (problem.p)(x);
        let q = (problem.q)(x);
        let lagged = x - (problem.tau)(x);
        if lagged > a {
            for (j, c) in basis.centers().iter().enumerate() {
                mat[(i, j)] = crate::kernel::mq_deriv(x, c) - p * mq_eval(x, c) - q * mq_eval(lagged, c);
            }
            rhs[i] = (problem.s)(x);
        } else {
            for (j, c) in basis.centers().iter().enumerate() {
                mat[(i, j)] = crate::kernel::mq_deriv(x, c) - p * mq_eval(x, c);
            }
            rhs[i] = q * problem.history.eval(lagged, 0)? + (problem.s)(x);
        }
    }

    // Initial-condition row at x = a: pure phi row, no derivatives.
    for (j, c) in basis.centers().iter().enumerate() {
        mat[(n, j)] = mq_eval(a, c);
    }
    rhs[n] = problem.history.eval(a, 0)?;

    Ok((mat, rhs))
}

/// Assembles and solves the linear collocation system through the
/// truncated pseudoinverse.
pub fn solve_linear(problem: &LinearDde, basis: &MqBasis) -> Result<(Interpolant, SolveInfo)> {
    let nodes = basis.node_positions();
    let (mat, rhs) = assemble_linear(problem, basis, &nodes)?;
    let rcond = linsolve::default_rcond(mat.nrows(), mat.ncols());
    let (alpha, info) = linsolve::pseudo_solve(&mat, &rhs, rcond)?;
    Ok((Interpolant::new(basis.clone(), alpha)?, info))
}

/// Pointwise residual of `problem` under the solution view `sol`.
///
/// For the linear form this is
/// `R(x) = s(x) - y'(x) + p(x) y(x) + q(x) * (delayed term)` with the
/// delayed term read from the history when `x - tau(x) <= a`; for the
/// general form it is the problem's residual functional.
pub fn residual_at(problem: &DdeProblem, sol: &dyn Solution, x: f64) -> Result<f64> {
    match problem {
        DdeProblem::Linear(p) => {
            let lagged = x - (p.tau)(x);
            let delayed = if lagged > p.a {
                sol.value(lagged, 0)?
            } else {
                p.history.eval(lagged, 0)?
            };
            Ok((p.s)(x) - sol.value(x, 1)? + (p.p)(x) * sol.value(x, 0)? + (p.q)(x) * delayed)
        }
        DdeProblem::General(g) => {
            let ctx = EvalContext::new(x, g.a, &g.history, sol);
            (g.residual)(x, &ctx)
        }
    }
}

/// Interpolation (Gram) matrix `Phi[i][j] = phi_j(x_i)` over all centers,
/// extras included.
pub fn interpolation_matrix(basis: &MqBasis) -> DMatrix<f64> {
    let dim = basis.len();
    DMatrix::from_fn(dim, dim, |i, j| {
        mq_eval(basis.centers()[i].position, &basis.centers()[j])
    })
}

/// Least-squares fit of an arbitrary function onto the basis; used to seed
/// nonlinear solves from a guess or from the previous refinement level's
/// interpolant.
pub fn fit_function(f: &dyn Fn(f64) -> f64, basis: &MqBasis) -> Result<Interpolant> {
    let phi = interpolation_matrix(basis);
    let rhs = DVector::from_iterator(
        basis.len(),
        basis.centers().iter().map(|c| f(c.position)),
    );
    let rcond = linsolve::default_rcond(phi.nrows(), phi.ncols());
    let (alpha, _) = linsolve::pseudo_solve(&phi, &rhs, rcond)?;
    Interpolant::new(basis.clone(), alpha)
}
