//! Hardy's multiquadric and the shape-parameter distribution rule.
//!
//! The basis function is `phi_j(x) = sqrt((x - x_j)^2 + c_j^2)` with a
//! per-center shape parameter `c_j`. Larger shapes flatten the profile and
//! improve accuracy at the price of conditioning, so the adaptive loop
//! re-derives the shapes from local node spacing after every refinement:
//! interior centers get `c_j = mu * d_j * (1 + gamma * (-1)^j)` where `d_j`
//! is the distance to the nearest collocation node, while the outside
//! center(s) and the right boundary node get the boosted value
//! `lambda * mu * d_1`.

use crate::{Error, Result};

/// One multiquadric center: a position on the line and a positive shape.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MqCenter {
    pub position: f64,
    pub shape: f64,
}

impl MqCenter {
    pub fn new(position: f64, shape: f64) -> Self {
        MqCenter { position, shape }
    }
}

/// `phi(x) = sqrt((x - x_j)^2 + c_j^2)`.
///
/// Total: defined for every `x`; `shape = 0` degenerates to `|x - x_j|`.
#[inline]
pub fn mq_eval(x: f64, center: &MqCenter) -> f64 {
    let r = x - center.position;
    (r * r + center.shape * center.shape).sqrt()
}

/// First derivative, `(x - x_j) / sqrt((x - x_j)^2 + c_j^2)`.
#[inline]
pub fn mq_deriv(x: f64, center: &MqCenter) -> f64 {
    let r = x - center.position;
    r / (r * r + center.shape * center.shape).sqrt()
}

/// Second derivative, `c_j^2 / ((x - x_j)^2 + c_j^2)^(3/2)`.
#[inline]
pub fn mq_deriv2(x: f64, center: &MqCenter) -> f64 {
    let r = x - center.position;
    let s2 = r * r + center.shape * center.shape;
    center.shape * center.shape / (s2 * s2.sqrt())
}

/// Derivative of the given order (0, 1, or 2).
#[inline]
pub fn mq_eval_order(x: f64, center: &MqCenter, order: usize) -> Result<f64> {
    match order {
        0 => Ok(mq_eval(x, center)),
        1 => Ok(mq_deriv(x, center)),
        2 => Ok(mq_deriv2(x, center)),
        _ => Err(Error::invalid(format!(
            "derivative order {order} not supported (max 2)"
        ))),
    }
}

/// An ordered multiquadric basis: `n_extra` centers strictly left of the
/// domain followed by the in-domain centers, the first of which is `a` and
/// the last `b`.
#[derive(Debug, Clone, PartialEq)]
pub struct MqBasis {
    centers: Vec<MqCenter>,
    n_extra: usize,
}

impl MqBasis {
    /// Builds a basis from center positions, checking ordering invariants.
    /// All shapes start at the placeholder value 1 and are overwritten by
    /// [`MqBasis::apply_shapes`].
    pub fn from_positions(extra: &[f64], nodes: &[f64]) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::invalid("need at least 2 in-domain centers"));
        }
        if !strictly_increasing(nodes) {
            return Err(Error::invalid("in-domain centers must be strictly increasing"));
        }
        if !strictly_increasing(extra) {
            return Err(Error::invalid("extra centers must be strictly increasing"));
        }
        let a = nodes[0];
        if extra.iter().any(|&x| x >= a) {
            return Err(Error::invalid("extra centers must lie strictly below a"));
        }
        let centers = extra
            .iter()
            .chain(nodes.iter())
            .map(|&x| MqCenter::new(x, 1.0))
            .collect();
        Ok(MqBasis {
            centers,
            n_extra: extra.len(),
        })
    }

    /// Total number of centers (the DoF count of the solve).
    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn n_extra(&self) -> usize {
        self.n_extra
    }

    pub fn centers(&self) -> &[MqCenter] {
        &self.centers
    }

    /// The in-domain centers, which double as the collocation nodes.
    pub fn in_domain(&self) -> &[MqCenter] {
        &self.centers[self.n_extra..]
    }

    /// Positions of the in-domain centers.
    pub fn node_positions(&self) -> Vec<f64> {
        self.in_domain().iter().map(|c| c.position).collect()
    }

    /// Left domain endpoint (first in-domain center).
    pub fn a(&self) -> f64 {
        self.centers[self.n_extra].position
    }

    /// Right domain endpoint (last in-domain center).
    pub fn b(&self) -> f64 {
        self.centers[self.centers.len() - 1].position
    }

    /// Installs shapes from a [`distribute_shapes`] output: entry 0 goes to
    /// every extra center, entry `j` to the j-th in-domain center.
    pub fn apply_shapes(&mut self, shapes: &[f64]) -> Result<()> {
        let n_nodes = self.centers.len() - self.n_extra;
        if shapes.len() != n_nodes + 1 {
            return Err(Error::invalid(format!(
                "expected {} shapes, got {}",
                n_nodes + 1,
                shapes.len()
            )));
        }
        if shapes.iter().any(|&c| !(c > 0.0)) {
            return Err(Error::invalid("all shapes must be strictly positive"));
        }
        for c in &mut self.centers[..self.n_extra] {
            c.shape = shapes[0];
        }
        for (c, &s) in self.centers[self.n_extra..].iter_mut().zip(&shapes[1..]) {
            c.shape = s;
        }
        Ok(())
    }

    /// Multiplies every shape by `factor` (> 0). Used by the conditioning
    /// guard before nonlinear solves.
    pub fn rescale_shapes(&mut self, factor: f64) {
        for c in &mut self.centers {
            c.shape *= factor;
        }
    }

    /// Sets every shape to the same constant. Used by fixed-grid studies.
    pub fn set_uniform_shape(&mut self, shape: f64) -> Result<()> {
        if !(shape > 0.0) {
            return Err(Error::invalid("shape must be strictly positive"));
        }
        for c in &mut self.centers {
            c.shape = shape;
        }
        Ok(())
    }
}

pub(crate) fn strictly_increasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[0] < w[1])
}

/// Shape-parameter distribution over a sorted node set.
///
/// Returns `N + 1` shapes where `N = nodes.len()`: index 0 is the value for
/// the center(s) outside the domain, index `j >= 1` belongs to node `j`
/// (1-based). The outside center and the last node receive
/// `lambda * mu * d_1`; interior nodes `j = 1..N-1` receive
/// `mu * d_j * (1 + gamma * (-1)^j)` with `d_j` the distance from node `j`
/// to its nearest neighbour among the nodes.
pub fn distribute_shapes(nodes: &[f64], lambda: f64, mu: f64, gamma: f64) -> Result<Vec<f64>> {
    if nodes.len() < 2 {
        return Err(Error::invalid("distribute_shapes needs at least 2 nodes"));
    }
    if !strictly_increasing(nodes) {
        return Err(Error::invalid("nodes must be strictly increasing"));
    }
    if !(lambda > 0.0) || !(mu > 0.0) {
        return Err(Error::invalid("lambda and mu must be positive"));
    }
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::invalid("gamma must lie in [0, 1)"));
    }

    let n = nodes.len();
    let d = nearest_neighbor_distances(nodes);
    let boundary = lambda * mu * d[0];

    let mut shapes = Vec::with_capacity(n + 1);
    shapes.push(boundary); // extra center(s)
    for j in 1..=n {
        if j == n {
            shapes.push(boundary);
        } else {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            shapes.push(mu * d[j - 1] * (1.0 + gamma * sign));
        }
    }
    Ok(shapes)
}

/// `d_j` = distance from node `j` to its closest neighbour. Nodes are
/// sorted, so the closest is always adjacent.
fn nearest_neighbor_distances(nodes: &[f64]) -> Vec<f64> {
    let n = nodes.len();
    (0..n)
        .map(|i| {
            let left = if i > 0 { nodes[i] - nodes[i - 1] } else { f64::INFINITY };
            let right = if i + 1 < n { nodes[i + 1] - nodes[i] } else { f64::INFINITY };
            left.min(right)
        })
        .collect()
}
