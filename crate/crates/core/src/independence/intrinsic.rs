use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::knn::{knn_distances, Metric};
use crate::error::{Error, Result};
use crate::nn::Tensor;
use crate::rng::derived;
use crate::stats;

/// Per-point Levina–Bickel estimates
/// `m̂(x) = [ (1/(k−1)) Σ_{j<k} log(T_k/T_j) ]⁻¹`.
pub fn levina_bickel_pointwise(points: &Tensor, k: usize) -> Result<Vec<f64>> {
    if k < 3 || points.rows() <= k {
        return Err(Error::Config(format!(
            "Levina-Bickel needs N > k >= 3, got N = {} and k = {k}",
            points.rows()
        )));
    }
    let (dists, jittered) = knn_distances(points, k, Metric::Euclidean, 0x1d);
    if jittered {
        log::warn!("duplicate points in Levina-Bickel estimate; jittered by 1e-12");
    }
    Ok(dists
        .iter()
        .map(|t| {
            let tk = t[k - 1];
            let s: f64 = t[..k - 1].iter().map(|tj| (tk / tj).ln()).sum();
            (k - 1) as f64 / s
        })
        .collect())
}

/// Dataset intrinsic dimension: the mean of the per-point estimates.
pub fn levina_bickel_id(points: &Tensor, k: usize) -> Result<f64> {
    Ok(stats::mean(&levina_bickel_pointwise(points, k)?))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quantiles {
    pub q025: f64,
    pub q50: f64,
    pub q975: f64,
}

/// Bootstrap quantiles of `ID(Z, U) − ID(Z)`. Neighbour graphs are built
/// once on the full sample; each resample averages the paired per-point
/// differences, which keeps duplicated points out of the neighbour search.
pub fn id_drop(z: &Tensor, u: &Tensor, k: usize, n_bootstrap: usize, seed: u64) -> Result<Quantiles> {
    if z.rows() != u.rows() {
        return Err(Error::Dimension("U and Z need equal row counts".into()));
    }
    let joint = Tensor::hcat(&[z, u])?;
    let a = levina_bickel_pointwise(&joint, k)?;
    let b = levina_bickel_pointwise(z, k)?;
    let diff: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
    let n = diff.len();
    let mut rng = derived(seed, 0xb007);
    let mut means: Vec<f64> = (0..n_bootstrap.max(1))
        .map(|_| (0..n).map(|_| diff[rng.random_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    Ok(Quantiles {
        q025: stats::percentile_sorted(&means, 2.5),
        q50: stats::percentile_sorted(&means, 50.0),
        q975: stats::percentile_sorted(&means, 97.5),
    })
}
