use std::f64::consts::PI;

use statrs::function::gamma::{digamma, ln_gamma};

use super::knn::{knn_distances, Metric};
use crate::error::{Error, Result};
use crate::nn::Tensor;

/// Log-volume of the unit Euclidean ball in `d` dimensions.
fn log_unit_ball(d: usize) -> f64 {
    0.5 * d as f64 * PI.ln() - ln_gamma(0.5 * d as f64 + 1.0)
}

/// Kozachenko–Leonenko differential entropy in nats:
/// `ψ(N) − ψ(k) + log c_d + (d/N) Σ log ε_i`, `ε_i` the Euclidean distance
/// to the `k`-th neighbour.
pub fn kl_entropy(points: &Tensor, k: usize) -> Result<f64> {
    let n = points.rows();
    let d = points.cols();
    if k == 0 || n <= k {
        return Err(Error::Config(format!("need more than k = {k} points, got {n}")));
    }
    let (dists, jittered) = knn_distances(points, k, Metric::Euclidean, 0x4b4c);
    if jittered {
        log::warn!("coincident points in entropy estimate; jittered by 1e-12");
    }
    let sum_log: f64 = dists.iter().map(|r| r[k - 1].ln()).sum();
    Ok(digamma(n as f64) - digamma(k as f64) + log_unit_ball(d) + d as f64 * sum_log / n as f64)
}

/// `H(U | Z) = H(U, Z) − H(Z)` with [`kl_entropy`].
pub fn conditional_entropy(u: &Tensor, z: &Tensor, k: usize) -> Result<f64> {
    if u.rows() != z.rows() {
        return Err(Error::Dimension("U and Z need equal row counts".into()));
    }
    if u.rows() < 100 {
        return Err(Error::Config(format!(
            "conditional entropy needs N >= 100, got {}",
            u.rows()
        )));
    }
    let joint = Tensor::hcat(&[u, z])?;
    Ok(kl_entropy(&joint, k)? - kl_entropy(z, k)?)
}
