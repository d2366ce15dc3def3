use statrs::function::gamma::digamma;

use super::knn::{jitter, Cloud, Metric};
use crate::error::{Error, Result};
use crate::nn::Tensor;

/// Points of the sorted slice strictly within `r` of `x`.
fn count_strict(sorted: &[f64], x: f64, r: f64) -> usize {
    let lo = sorted.partition_point(|&v| v <= x - r);
    let hi = sorted.partition_point(|&v| v < x + r);
    hi - lo
}

/// KSG estimator (first variant) of `I(a; b)` for two scalar samples, in
/// nats, with max-norm neighbourhoods.
pub fn ksg_pair(a: &[f64], b: &[f64], k: usize) -> Result<f64> {
    let n = a.len();
    if b.len() != n {
        return Err(Error::Dimension("MI arguments differ in length".into()));
    }
    if n < 100 || k == 0 || k >= n {
        return Err(Error::Config(format!(
            "KSG needs N >= 100 and 0 < k < N, got N = {n}, k = {k}"
        )));
    }
    let mut joint = Tensor::from_vec(n, 2, a.iter().zip(b).flat_map(|(x, y)| [*x, *y]).collect())?;
    if super::knn::has_duplicates(&joint) || has_ties(a) || has_ties(b) {
        joint = jitter(&joint, 0x3141);
    }
    let xs: Vec<f64> = joint.column(0);
    let ys: Vec<f64> = joint.column(1);
    let (mut sx, mut sy) = (xs.clone(), ys.clone());
    sx.sort_by(f64::total_cmp);
    sy.sort_by(f64::total_cmp);
    let cloud = Cloud::new(&joint);
    let mut acc = 0.0;
    for i in 0..n {
        let eps = cloud.neighbours(i, k, Metric::Chebyshev)[k - 1];
        // the point itself is inside its own strict ball
        let nx = count_strict(&sx, xs[i], eps) - 1;
        let ny = count_strict(&sy, ys[i], eps) - 1;
        acc += digamma(nx as f64 + 1.0) + digamma(ny as f64 + 1.0);
    }
    Ok(digamma(k as f64) + digamma(n as f64) - acc / n as f64)
}

fn has_ties(v: &[f64]) -> bool {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s.windows(2).any(|w| w[0] == w[1])
}

/// `max_j I(a_i; b_j)` over every column pair, each by [`ksg_pair`].
pub fn knn_mutual_information(a: &Tensor, b: &Tensor, k: usize) -> Result<f64> {
    if a.rows() != b.rows() {
        return Err(Error::Dimension("MI arguments need equal row counts".into()));
    }
    let mut best = f64::NEG_INFINITY;
    for i in 0..a.cols() {
        let ai = a.column(i);
        for j in 0..b.cols() {
            best = best.max(ksg_pair(&ai, &b.column(j), k)?);
        }
    }
    Ok(best)
}
