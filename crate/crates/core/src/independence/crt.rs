use std::fmt::Write as _;

use rand::seq::index::sample;
use rand::Rng as _;
use rand_distr::StandardNormal as Normal01;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::gp::GpFit;
use super::hsic::{centred_gram, hsic, hsic_from_grams};
use crate::error::{Error, Result};
use crate::nn::Tensor;
use crate::rng::{derived, Rng};

/// Kolmogorov survival function `Q(λ) = 2 Σ (−1)^{j−1} exp(−2 j² λ²)`.
fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut s = 0.0;
    for j in 1..=100 {
        let j = j as f64;
        let term = (-2.0 * j * j * lambda * lambda).exp();
        s += if j as u64 % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

/// One-sample KS test against Uniform[0, 1]: `(D, p)` with the asymptotic
/// distribution and Stephens' small-sample correction.
pub fn ks_uniform(samples: &[f64]) -> (f64, f64) {
    let n = samples.len();
    if n == 0 {
        return (0.0, 1.0);
    }
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let nf = n as f64;
    let d = s
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let x = x.clamp(0.0, 1.0);
            ((i + 1) as f64 / nf - x).max(x - i as f64 / nf)
        })
        .fold(0.0, f64::max);
    let sq = nf.sqrt();
    (d, kolmogorov_q((sq + 0.12 + 0.11 / sq) * d))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrtConfig {
    /// Null draws per replication.
    pub null_draws: usize,
    pub replications: usize,
    /// Rows drawn without replacement for each replication.
    pub subsample: usize,
    pub seed: u64,
}

impl Default for CrtConfig {
    fn default() -> Self {
        Self {
            null_draws: 500,
            replications: 50,
            subsample: 300,
            seed: 11,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrtReport {
    pub p_values: Vec<f64>,
    pub ks_d: f64,
    pub ks_p: f64,
    pub frac_below_05: f64,
}

impl CrtReport {
    pub fn from_p_values(p_values: Vec<f64>) -> Self {
        let (ks_d, ks_p) = ks_uniform(&p_values);
        let below = p_values.iter().filter(|&&p| p < 0.05).count();
        let frac_below_05 = if p_values.is_empty() {
            0.0
        } else {
            below as f64 / p_values.len() as f64
        };
        Self {
            p_values,
            ks_d,
            ks_p,
            frac_below_05,
        }
    }

    /// `replication,p_value` rows followed by a `#summary` row.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("replication,p_value\n");
        for (i, p) in self.p_values.iter().enumerate() {
            writeln!(s, "{i},{p}").expect("string write");
        }
        writeln!(
            s,
            "#summary,ks_d={},ks_p={},frac_below_05={}",
            self.ks_d, self.ks_p, self.frac_below_05
        )
        .expect("string write");
        s
    }
}

/// Decoder used to regenerate data from `[Z, U]`; the seed drives any
/// decoder noise.
pub type Decoder<'a> = dyn Fn(&Tensor, &Tensor, u64) -> Result<Tensor> + Sync + 'a;

/// Sampler for `U | Z`; returns a fresh draw for every row of `Z`.
pub type ConditionalSampler<'a> = dyn Fn(&Tensor, &mut Rng) -> Tensor + Sync + 'a;

/// One CRT p-value: observed `HSIC(U, X)` against `HSIC(U_b, X_b)` with
/// `U_b` from `sampler` and `X_b = decode(Z, U_b)`.
pub fn crt_p_value(
    x: &Tensor,
    z: &Tensor,
    u: &Tensor,
    sampler: &ConditionalSampler<'_>,
    decode: &Decoder<'_>,
    null_draws: usize,
    seed: u64,
) -> Result<f64> {
    let observed = hsic(u, x)?;
    let mut rng = derived(seed, 0xc27);
    let mut exceed = 0usize;
    for b in 0..null_draws {
        let ub = sampler(z, &mut rng);
        let xb = decode(z, &ub, derived_seed(seed, b as u64))?;
        if xb.rows() != x.rows() {
            return Err(Error::Dimension("decoder changed the row count".into()));
        }
        let stat = hsic_from_grams(&centred_gram(&ub), &centred_gram(&xb));
        if stat >= observed {
            exceed += 1;
        }
    }
    Ok((1 + exceed) as f64 / (null_draws + 1) as f64)
}

fn derived_seed(seed: u64, i: u64) -> u64 {
    derived(seed, 0x5eed_0000 + i).random()
}

/// Independent GP fits per column of `U`; draws `N(μ(Z), σ²(Z))` at the
/// fitted rows.
pub fn gp_sampler(z: &Tensor, u: &Tensor) -> Result<impl Fn(&Tensor, &mut Rng) -> Tensor + Sync> {
    let mut moments = Vec::with_capacity(u.cols());
    for c in 0..u.cols() {
        let fit = GpFit::fit(z, &u.column(c))?;
        moments.push(fit.predict(z));
    }
    let rows = z.rows();
    Ok(move |zq: &Tensor, rng: &mut Rng| {
        debug_assert_eq!(zq.rows(), rows);
        let mut out = Tensor::zeros(rows, moments.len());
        for i in 0..rows {
            for (c, (mu, var)) in moments.iter().enumerate() {
                out[(i, c)] = mu[i] + var[i].sqrt() * rng.sample::<f64, _>(Normal01);
            }
        }
        out
    })
}

/// Double conditional randomization test of `X ⫫ U | Z`. Each replication
/// subsamples rows, fits a GP of `U` on `Z`, and computes a CRT p-value
/// with `null_draws` decoder regenerations; the p-values are then tested
/// for uniformity.
pub fn double_crt(x: &Tensor, z: &Tensor, u: &Tensor, decode: &Decoder<'_>, cfg: &CrtConfig) -> Result<CrtReport> {
    if x.rows() != z.rows() || z.rows() != u.rows() {
        return Err(Error::Dimension("X, Z and U need equal row counts".into()));
    }
    if cfg.null_draws < 100 {
        return Err(Error::Config(format!(
            "CRT needs at least 100 null draws, got {}",
            cfg.null_draws
        )));
    }
    if cfg.replications == 0 {
        return Err(Error::Config("CRT needs at least one replication".into()));
    }
    let n = cfg.subsample.min(x.rows());
    let p_values = (0..cfg.replications)
        .into_par_iter()
        .map(|r| {
            let mut rng = derived(cfg.seed, r as u64);
            let idx = sample(&mut rng, x.rows(), n).into_vec();
            let (xs, zs, us) = (x.select_rows(&idx), z.select_rows(&idx), u.select_rows(&idx));
            let sampler = gp_sampler(&zs, &us)?;
            crt_p_value(
                &xs,
                &zs,
                &us,
                &sampler,
                decode,
                cfg.null_draws,
                derived_seed(cfg.seed, 1 << 20 | r as u64),
            )
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(CrtReport::from_p_values(p_values))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kolmogorov_tail_values() {
        // tabulated: Q(1.36) ≈ 0.0494, Q(1.63) ≈ 0.0098
        assert!((kolmogorov_q(1.358) - 0.05).abs() < 1e-3);
        assert!((kolmogorov_q(1.628) - 0.01).abs() < 5e-4);
        assert_eq!(kolmogorov_q(0.0), 1.0);
    }

    #[test]
    fn ks_detects_skew() {
        let even: Vec<f64> = (0..100).map(|i| (i as f64 + 0.5) / 100.0).collect();
        let (d, p) = ks_uniform(&even);
        assert!(d <= 0.005 + 1e-12 && p > 0.99);
        let skew: Vec<f64> = even.iter().map(|v| v * v).collect();
        assert!(ks_uniform(&skew).1 < 1e-3);
    }
}
