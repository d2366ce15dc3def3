use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::kernel::{median_distance, rbf_cross, rbf_gram};
use crate::error::{Error, Result};
use crate::linalg::{cholesky, cholesky_solve, forward_substitute};
use crate::nn::Tensor;
use crate::stats;

const SCALES: [f64; 5] = [0.1, 0.316_227_766, 1.0, 3.162_277_66, 10.0];
const NOISES: [f64; 5] = [1e-4, 1e-3, 1e-2, 1e-1, 1.0];

/// Gaussian-process regression of one response on `Z` with an RBF kernel.
/// The lengthscale is the median pairwise distance of `Z`; signal and noise
/// variances are picked from a 5×5 grid (relative to `var(u)`) by marginal
/// likelihood.
#[derive(Clone, Debug)]
pub struct GpFit {
    pub lengthscale: f64,
    pub signal_var: f64,
    pub noise_var: f64,
    pub log_marginal: f64,
    offset: f64,
    train: Tensor,
    alpha: Vec<f64>,
    chol: Tensor,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GpHyper {
    pub lengthscale: f64,
    pub signal_var: f64,
    pub noise_var: f64,
}

struct Factor {
    chol: Tensor,
    alpha: Vec<f64>,
    log_marginal: f64,
    noise: f64,
}

fn factor(r: &Tensor, y: &[f64], signal: f64, noise: f64) -> Option<Factor> {
    let n = r.rows();
    let mut jitter = 0.0;
    for _ in 0..6 {
        let mut k = r.map(|v| v * signal);
        for i in 0..n {
            k[(i, i)] += noise + jitter;
        }
        if let Some(chol) = cholesky(&k) {
            let alpha = cholesky_solve(&chol, y);
            let fit: f64 = y.iter().zip(&alpha).map(|(a, b)| a * b).sum();
            let logdet: f64 = (0..n).map(|i| chol[(i, i)].ln()).sum();
            let log_marginal = -0.5 * fit - logdet - 0.5 * n as f64 * (2.0 * PI).ln();
            return Some(Factor {
                chol,
                alpha,
                log_marginal,
                noise: noise + jitter,
            });
        }
        jitter = if jitter == 0.0 {
            1e-10 * signal.max(1e-300)
        } else {
            jitter * 100.0
        };
    }
    None
}

impl GpFit {
    pub fn fit(z: &Tensor, u: &[f64]) -> Result<Self> {
        let lengthscale = median_distance(z);
        Self::fit_with_lengthscale(z, u, lengthscale)
    }

    pub fn fit_with_lengthscale(z: &Tensor, u: &[f64], lengthscale: f64) -> Result<Self> {
        if z.rows() != u.len() {
            return Err(Error::Dimension("GP inputs and responses differ in length".into()));
        }
        let offset = stats::mean(u);
        let y: Vec<f64> = u.iter().map(|v| v - offset).collect();
        let var = {
            let s = stats::std_dev(u);
            if s > 0.0 {
                s * s
            } else {
                1.0
            }
        };
        let r = rbf_gram(z, lengthscale);
        let mut best: Option<(f64, f64, Factor)> = None;
        for &s in &SCALES {
            for &nv in &NOISES {
                if let Some(f) = factor(&r, &y, s * var, nv * var) {
                    if best.as_ref().is_none_or(|b| f.log_marginal > b.2.log_marginal) {
                        best = Some((s * var, nv * var, f));
                    }
                }
            }
        }
        let (signal_var, _, f) = best.ok_or(Error::Numerical(
            "GP kernel is not positive definite after ridge escalation".into(),
        ))?;
        Ok(Self {
            lengthscale,
            signal_var,
            noise_var: f.noise,
            log_marginal: f.log_marginal,
            offset,
            train: z.clone(),
            alpha: f.alpha,
            chol: f.chol,
        })
    }

    pub fn hyper(&self) -> GpHyper {
        GpHyper {
            lengthscale: self.lengthscale,
            signal_var: self.signal_var,
            noise_var: self.noise_var,
        }
    }

    /// Predictive mean and variance of the response (latent variance plus
    /// noise) at the rows of `z`.
    pub fn predict(&self, z: &Tensor) -> (Vec<f64>, Vec<f64>) {
        let ks = rbf_cross(z, &self.train, self.lengthscale);
        let mut mean = Vec::with_capacity(z.rows());
        let mut var = Vec::with_capacity(z.rows());
        for i in 0..z.rows() {
            let row: Vec<f64> = ks.row(i).iter().map(|v| v * self.signal_var).collect();
            mean.push(self.offset + row.iter().zip(&self.alpha).map(|(a, b)| a * b).sum::<f64>());
            let v = forward_substitute(&self.chol, &row);
            let reduce: f64 = v.iter().map(|x| x * x).sum();
            var.push((self.signal_var - reduce).max(0.0) + self.noise_var);
        }
        (mean, var)
    }
}
