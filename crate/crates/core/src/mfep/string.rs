use serde::{Deserialize, Serialize};

use super::path::Path;
use crate::data::Potential;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StringConfig {
    pub n_nodes: usize,
    /// Converged once no node moves farther than this in one iteration.
    pub tol: f64,
    /// Initial steepest-descent step; halved per node until the energy drops.
    pub step: f64,
    pub max_iter: usize,
}

impl Default for StringConfig {
    fn default() -> Self {
        Self {
            n_nodes: 32,
            tol: 1e-7,
            step: 1e-4,
            max_iter: 500_000,
        }
    }
}

fn descend(pot: &dyn Potential, x: [f64; 2], step: f64) -> [f64; 2] {
    let g = pot.gradient(&x);
    let u0 = pot.energy(&x);
    let mut h = step;
    for _ in 0..30 {
        let y = [x[0] - h * g[0], x[1] - h * g[1]];
        if pot.energy(&y) <= u0 {
            return y;
        }
        h *= 0.5;
    }
    x
}

/// Simplified string method: steepest descent of every node followed by
/// linear reparameterization to equal arc length, starting from the
/// straight segment between `endpoints`.
pub fn string_method(pot: &dyn Potential, endpoints: [[f64; 2]; 2], config: &StringConfig) -> Result<Path> {
    let init = Path::new(endpoints.to_vec())?;
    string_method_from(pot, &init, config)
}

/// Same as [`string_method`] from an arbitrary initial curve.
pub fn string_method_from(pot: &dyn Potential, initial: &Path, config: &StringConfig) -> Result<Path> {
    if config.n_nodes < 3 {
        return Err(Error::Config(format!(
            "string method needs at least 3 nodes, got {}",
            config.n_nodes
        )));
    }
    if pot.dim() != 2 {
        return Err(Error::Dimension("string method works on planar potentials".into()));
    }
    let mut nodes: Vec<[f64; 2]> = initial.resample(config.n_nodes).points().to_vec();
    let mut residual = f64::INFINITY;
    for _ in 0..config.max_iter {
        let moved: Vec<[f64; 2]> = nodes.iter().map(|&x| descend(pot, x, config.step)).collect();
        let next = reparameterize(moved, config.n_nodes)?;
        residual = nodes
            .iter()
            .zip(&next)
            .map(|(a, b)| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt())
            .fold(0.0, f64::max);
        nodes = next;
        if residual < config.tol {
            return Path::new(nodes);
        }
    }
    Err(Error::NoConvergence {
        what: "string method",
        iterations: config.max_iter,
        residual,
    })
}

fn reparameterize(points: Vec<[f64; 2]>, n: usize) -> Result<Vec<[f64; 2]>> {
    let path = Path::new(points)?;
    if path.length() < 1e-14 {
        return Ok(vec![path.first(); n]);
    }
    Ok(path.resample(n).points().to_vec())
}

/// `|cos|` between the string tangent and `∇U` at each interior node whose
/// gradient norm is at least `min_grad_fraction` of the largest one along
/// the string. Nodes near stationary points are skipped.
pub fn tangency(pot: &dyn Potential, path: &Path, min_grad_fraction: f64) -> Vec<f64> {
    let pts = path.points();
    let grads: Vec<Vec<f64>> = pts.iter().map(|p| pot.gradient(p)).collect();
    let norms: Vec<f64> = grads.iter().map(|g| (g[0] * g[0] + g[1] * g[1]).sqrt()).collect();
    let gmax = norms.iter().copied().fold(0.0, f64::max);
    (1..pts.len() - 1)
        .filter(|&i| norms[i] >= min_grad_fraction * gmax && norms[i] > 0.0)
        .filter_map(|i| {
            let t = [pts[i + 1][0] - pts[i - 1][0], pts[i + 1][1] - pts[i - 1][1]];
            let tn = (t[0] * t[0] + t[1] * t[1]).sqrt();
            (tn > 0.0).then(|| ((t[0] * grads[i][0] + t[1] * grads[i][1]) / (tn * norms[i])).abs())
        })
        .collect()
}
