use rand::seq::index::sample;

use super::gp::GpFit;
use super::kernel::row_distance;
use crate::error::{Error, Result};
use crate::nn::Tensor;
use crate::rng::derived;

/// Rows used for the residualizing kernel ridge fits.
pub const CONDITIONAL_SUBSAMPLE: usize = 1000;

fn row_means(x: &Tensor) -> (Vec<f64>, f64) {
    let n = x.rows();
    let means: Vec<f64> = (0..n)
        .map(|i| (0..n).map(|j| row_distance(x, i, j)).sum::<f64>() / n as f64)
        .collect();
    let grand = means.iter().sum::<f64>() / n as f64;
    (means, grand)
}

/// Biased (V-statistic) distance correlation in `O(N²)` time and `O(N)`
/// memory: distances are recomputed in a second pass instead of stored.
fn dcor_plain(a: &Tensor, b: &Tensor) -> f64 {
    let n = a.rows();
    let (ma, ga) = row_means(a);
    let (mb, gb) = row_means(b);
    let (mut ab, mut aa, mut bb) = (0.0, 0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            let x = row_distance(a, i, j) - ma[i] - ma[j] + ga;
            let y = row_distance(b, i, j) - mb[i] - mb[j] + gb;
            ab += x * y;
            aa += x * x;
            bb += y * y;
        }
    }
    if aa <= 0.0 || bb <= 0.0 {
        return 0.0;
    }
    (ab.max(0.0) / (aa * bb).sqrt()).sqrt()
}

/// Residuals of every column of `y` after kernel ridge regression on `c`
/// (the GP posterior mean with marginal-likelihood hyperparameters).
fn residualize(y: &Tensor, c: &Tensor) -> Result<Tensor> {
    let mut out = y.clone();
    for col in 0..y.cols() {
        let v = y.column(col);
        let fit = GpFit::fit(c, &v)?;
        let (mean, _) = fit.predict(c);
        for i in 0..y.rows() {
            out[(i, col)] = v[i] - mean[i];
        }
    }
    Ok(out)
}

/// Distance correlation of `a` and `b`. With `conditional_on`, both are
/// first residualized on it by kernel ridge regression, using at most
/// [`CONDITIONAL_SUBSAMPLE`] rows.
pub fn distance_correlation(a: &Tensor, b: &Tensor, conditional_on: Option<&Tensor>) -> Result<f64> {
    if a.rows() != b.rows() || conditional_on.is_some_and(|c| c.rows() != a.rows()) {
        return Err(Error::Dimension("distance correlation needs equal row counts".into()));
    }
    if a.rows() < 50 {
        return Err(Error::Config(format!(
            "distance correlation needs N >= 50, got {}",
            a.rows()
        )));
    }
    match conditional_on {
        None => Ok(dcor_plain(a, b)),
        Some(c) => {
            let (a, b, c) = if a.rows() > CONDITIONAL_SUBSAMPLE {
                let idx = sample(&mut derived(0xdc0, a.rows() as u64), a.rows(), CONDITIONAL_SUBSAMPLE).into_vec();
                (a.select_rows(&idx), b.select_rows(&idx), c.select_rows(&idx))
            } else {
                (a.clone(), b.clone(), c.clone())
            };
            Ok(dcor_plain(&residualize(&a, &c)?, &residualize(&b, &c)?))
        }
    }
}
