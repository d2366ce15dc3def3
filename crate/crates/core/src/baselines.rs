//! Autoencoder baselines for the path-recovery comparison: a plain AE, a
//! VAE, β-VAE, and β-TC-VAE with minibatch-weighted sampling.

use std::f64::consts::PI;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::StandardNormal as Normal01;
use serde::{Deserialize, Serialize};

use crate::dpa::Standardizer;
use crate::encoder::Encoder;
use crate::error::{Error, Result};
use crate::nn::{batch_jacobian, checkpoint, AdamConfig, AdamState, Graph, Mlp, MlpVars, Parameterized, Tensor, Var};
use crate::rng::{derived, seeded};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BaselineKind {
    Ae,
    Vae,
    BetaVae,
    BetaTcVae,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 4] = [Self::Ae, Self::Vae, Self::BetaVae, Self::BetaTcVae];

    pub fn name(self) -> &'static str {
        match self {
            Self::Ae => "ae",
            Self::Vae => "vae",
            Self::BetaVae => "beta_vae",
            Self::BetaTcVae => "beta_tcvae",
        }
    }

    pub fn is_variational(self) -> bool {
        !matches!(self, Self::Ae)
    }
}

impl FromStr for BaselineKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown baseline `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub latent_dim: usize,
    pub hidden: usize,
    pub hidden_layers: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// KL weight for β-VAE, total-correlation weight for β-TC-VAE.
    pub beta: f64,
    /// Index-code mutual-information weight (β-TC-VAE).
    pub alpha: f64,
    /// Dimension-wise KL weight (β-TC-VAE).
    pub gamma: f64,
    pub standardize: bool,
}

impl BaselineConfig {
    pub fn for_kind(kind: BaselineKind) -> Self {
        let base = Self {
            latent_dim: 2,
            hidden: 100,
            hidden_layers: 2,
            epochs: 1200,
            batch_size: 5000,
            lr: 1e-3,
            beta: 1.0,
            alpha: 1.0,
            gamma: 1.0,
            standardize: true,
        };
        match kind {
            BaselineKind::Ae | BaselineKind::Vae => base,
            BaselineKind::BetaVae => Self { beta: 4.0, ..base },
            BaselineKind::BetaTcVae => Self {
                beta: 6.0,
                batch_size: 256,
                ..base
            },
        }
    }

    fn widths(&self, input: usize, output: usize) -> Vec<usize> {
        let mut w = vec![input];
        w.extend(std::iter::repeat_n(self.hidden, self.hidden_layers));
        w.push(output);
        w
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineModel {
    pub kind: BaselineKind,
    pub config: BaselineConfig,
    /// Outputs the code (AE) or `[μ, log σ²]` (variational kinds).
    pub encoder: Mlp,
    pub decoder: Mlp,
    pub standardizer: Standardizer,
}

const CHECKPOINT_KIND: &str = "baseline";

impl BaselineModel {
    pub fn new(kind: BaselineKind, config: BaselineConfig, data_dim: usize, seed: u64) -> Result<Self> {
        if config.latent_dim == 0 || config.hidden == 0 {
            return Err(Error::Config("latent_dim and hidden must be positive".into()));
        }
        let mut rng = seeded(seed);
        let enc_out = if kind.is_variational() {
            2 * config.latent_dim
        } else {
            config.latent_dim
        };
        let encoder = Mlp::new(&config.widths(data_dim, enc_out), false, &mut rng)?;
        let decoder = Mlp::new(&config.widths(config.latent_dim, data_dim), false, &mut rng)?;
        Ok(Self {
            kind,
            standardizer: Standardizer::identity(data_dim),
            config,
            encoder,
            decoder,
        })
    }

    pub fn data_dim(&self) -> usize {
        self.encoder.in_dim()
    }

    fn latent(&self) -> usize {
        self.config.latent_dim
    }

    /// Code (or posterior mean) for raw inputs, recorded on `g`.
    fn code_graph(&self, g: &mut Graph, vars: &MlpVars, x: Var) -> Var {
        let shift: Vec<f64> = self.standardizer.mean.iter().map(|m| -m).collect();
        let inv: Vec<f64> = self.standardizer.scale.iter().map(|s| 1.0 / s).collect();
        let shift = g.leaf(Tensor::row_vector(&shift));
        let inv = g.leaf(Tensor::row_vector(&inv));
        let centered = g.add_row(x, shift);
        let scaled = g.mul_row(centered, inv);
        let out = self.encoder.forward_graph(g, vars, scaled);
        g.slice_cols(out, 0, self.latent())
    }

    /// Decodes codes back to raw coordinates.
    pub fn decode(&self, z: &Tensor) -> Result<Tensor> {
        Ok(self.standardizer.inverse(&self.decoder.forward(z)?))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        checkpoint::save(CHECKPOINT_KIND, self, path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        checkpoint::load(CHECKPOINT_KIND, path)
    }
}

impl Encoder for BaselineModel {
    fn input_dim(&self) -> usize {
        self.data_dim()
    }

    fn latent_dim(&self) -> usize {
        self.latent()
    }

    fn encode(&self, x: &Tensor) -> Result<Tensor> {
        self.encoder.check_input(x)?;
        let out = self.encoder.forward(&self.standardizer.forward(x))?;
        Ok(out.select_cols(0, self.latent()))
    }

    fn jacobian(&self, x: &Tensor) -> Result<Vec<Tensor>> {
        self.encoder.check_input(x)?;
        batch_jacobian(x, self.latent(), |g, xv| {
            let vars = self.encoder.bind(g);
            self.code_graph(g, &vars, xv)
        })
    }
}

impl Parameterized for BaselineModel {
    fn params(&self) -> Vec<&Tensor> {
        let mut p = self.encoder.params();
        p.extend(self.decoder.params());
        p
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut p = self.encoder.params_mut();
        p.extend(self.decoder.params_mut());
        p
    }

    fn param_names(&self) -> Vec<String> {
        let mut n = self.encoder.param_names("encoder");
        n.extend(self.decoder.param_names("decoder"));
        n
    }
}

/// Closed-form `KL(N(μ, diag σ²) ‖ N(0, I))` for one posterior.
pub fn gaussian_kl(mu: &[f64], logvar: &[f64]) -> f64 {
    0.5 * mu
        .iter()
        .zip(logvar)
        .map(|(m, lv)| m * m + lv.exp() - 1.0 - lv)
        .sum::<f64>()
}

/// Batch loss terms, all averaged over the batch.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineLoss {
    pub total: f64,
    /// `½‖x − d(z)‖²` (AE: `‖x − d(z)‖²`).
    pub reconstruction: f64,
    /// Closed-form KL (VAE kinds) or `α·MI + β·TC + γ·DWKL` (β-TC-VAE).
    pub regularizer: f64,
}

struct Recorded {
    total: Var,
    recon: Var,
    reg: Option<Var>,
}

/// Records the loss of `kind` on a standardized batch. `eps` supplies the
/// reparameterization noise for variational kinds.
fn record_loss(
    model: &BaselineModel,
    g: &mut Graph,
    enc: &MlpVars,
    dec: &MlpVars,
    x: Var,
    eps: Option<&Tensor>,
    dataset_size: usize,
) -> Recorded {
    let k = model.latent();
    let cfg = &model.config;
    let b = g.shape(x)[0] as f64;
    let out = model.encoder.forward_graph(g, enc, x);
    if !model.kind.is_variational() {
        let y = model.decoder.forward_graph(g, dec, out);
        let diff = g.sub(x, y);
        let sq = g.row_norm_pow(diff, 2.0);
        let recon = g.mean(sq);
        return Recorded {
            total: recon,
            recon,
            reg: None,
        };
    }
    let mu = g.slice_cols(out, 0, k);
    let logvar = g.slice_cols(out, k, 2 * k);
    let half = g.scale(logvar, 0.5);
    let std = g.exp(half);
    let eps = g.leaf(eps.expect("variational loss needs noise").clone());
    let noise = g.mul(std, eps);
    let z = g.add(mu, noise);
    let y = model.decoder.forward_graph(g, dec, z);
    let diff = g.sub(x, y);
    let sq = g.row_norm_pow(diff, 2.0);
    let recon = g.mean(sq);
    let recon = g.scale(recon, 0.5);

    let reg = match model.kind {
        BaselineKind::Vae | BaselineKind::BetaVae => {
            let mu2 = g.mul(mu, mu);
            let var = g.exp(logvar);
            let a = g.add(mu2, var);
            let a = g.sub(a, logvar);
            let a = g.add_scalar(a, -1.0);
            let kl = g.sum(a);
            let kl = g.scale(kl, 0.5 / b);
            g.scale(kl, cfg.beta)
        }
        BaselineKind::BetaTcVae => {
            let log_nm = ((dataset_size.max(1) as f64) * b).ln();
            let mut log_qzx = None;
            let mut log_prod = None;
            let mut log_joint_pairs = None;
            let mut log_prior = None;
            for j in 0..k {
                let zj = g.slice_cols(z, j, j + 1);
                let mj = g.slice_cols(mu, j, j + 1);
                let lj = g.slice_cols(logvar, j, j + 1);
                let pair = g.gauss_pair_log_pdf(zj, mj, lj);
                // diagonal entries: log q(z_ij | x_i)
                let diag_mask = g.leaf(Tensor::identity(b as usize));
                let diag = g.mul(pair, diag_mask);
                let diag = g.row_sum(diag);
                log_qzx = Some(accumulate(g, log_qzx, diag));
                let marg = g.row_log_sum_exp(pair);
                let marg = g.add_scalar(marg, -log_nm);
                log_prod = Some(accumulate(g, log_prod, marg));
                log_joint_pairs = Some(accumulate(g, log_joint_pairs, pair));
                let z2 = g.mul(zj, zj);
                let lp = g.scale(z2, -0.5);
                let lp = g.add_scalar(lp, -0.5 * (2.0 * PI).ln());
                log_prior = Some(accumulate(g, log_prior, lp));
            }
            let (log_qzx, log_prod, log_prior) = (log_qzx.unwrap(), log_prod.unwrap(), log_prior.unwrap());
            let joint = log_joint_pairs.unwrap();
            let log_qz = g.row_log_sum_exp(joint);
            let log_qz = g.add_scalar(log_qz, -log_nm);
            let mi = g.sub(log_qzx, log_qz);
            let tc = g.sub(log_qz, log_prod);
            let dw = g.sub(log_prod, log_prior);
            let mi = g.scale(mi, cfg.alpha);
            let tc = g.scale(tc, cfg.beta);
            let dw = g.scale(dw, cfg.gamma);
            let r = g.add(mi, tc);
            let r = g.add(r, dw);
            g.mean(r)
        }
        BaselineKind::Ae => unreachable!(),
    };
    let total = g.add(recon, reg);
    Recorded {
        total,
        recon,
        reg: Some(reg),
    }
}

fn accumulate(g: &mut Graph, acc: Option<Var>, v: Var) -> Var {
    match acc {
        Some(a) => g.add(a, v),
        None => v,
    }
}

fn draw_noise(rng: &mut crate::rng::Rng, rows: usize, cols: usize) -> Tensor {
    let data = (0..rows * cols).map(|_| rng.sample(Normal01)).collect();
    Tensor::from_vec(rows, cols, data).expect("noise shape")
}

/// Loss of `model` on a raw batch with reparameterization noise from
/// `seed`; `dataset_size` is the `N` of minibatch-weighted sampling.
pub fn baseline_loss(model: &BaselineModel, x: &Tensor, dataset_size: usize, seed: u64) -> Result<BaselineLoss> {
    let xs = model.standardizer.forward(x);
    let eps = draw_noise(&mut derived(seed, 0xe95), x.rows(), model.latent());
    let mut g = Graph::new();
    let enc = model.encoder.bind(&mut g);
    let dec = model.decoder.bind(&mut g);
    let xv = g.leaf(xs);
    let rec = record_loss(model, &mut g, &enc, &dec, xv, Some(&eps), dataset_size);
    Ok(BaselineLoss {
        total: g.value(rec.total).item(),
        reconstruction: g.value(rec.recon).item(),
        regularizer: rec.reg.map(|r| g.value(r).item()).unwrap_or(0.0),
    })
}

/// Parameter gradients of [`baseline_loss`] with the same noise, in
/// [`Parameterized::params`] order.
pub fn baseline_gradients(model: &BaselineModel, x: &Tensor, dataset_size: usize, seed: u64) -> Result<Vec<Tensor>> {
    let xs = model.standardizer.forward(x);
    let eps = draw_noise(&mut derived(seed, 0xe95), x.rows(), model.latent());
    step_gradients(model, &xs, Some(&eps), dataset_size).map(|(_, g)| g)
}

fn step_gradients(
    model: &BaselineModel,
    xs: &Tensor,
    eps: Option<&Tensor>,
    dataset_size: usize,
) -> Result<(f64, Vec<Tensor>)> {
    let mut g = Graph::new();
    let enc = model.encoder.bind(&mut g);
    let dec = model.decoder.bind(&mut g);
    let xv = g.leaf(xs.clone());
    let rec = record_loss(model, &mut g, &enc, &dec, xv, eps, dataset_size);
    let loss = g.value(rec.total).item();
    let grads = g.backward(rec.total)?;
    let params = model.params();
    let out = enc
        .as_slice()
        .iter()
        .chain(dec.as_slice())
        .zip(params)
        .map(|(&v, p)| grads.wrt_or_zeros(v, p))
        .collect();
    Ok((loss, out))
}

pub struct BaselineOutcome {
    pub model: BaselineModel,
    /// Epoch-mean training loss.
    pub losses: Vec<f64>,
}

pub fn train_baseline(
    kind: BaselineKind,
    data: &Tensor,
    config: &BaselineConfig,
    seed: u64,
) -> Result<BaselineOutcome> {
    if kind == BaselineKind::BetaTcVae && config.batch_size < 2 {
        return Err(Error::Config(format!(
            "beta_tcvae needs batch_size >= 2 for its density-ratio estimates, got {}",
            config.batch_size
        )));
    }
    if config.batch_size == 0 || config.epochs == 0 {
        return Err(Error::Config("batch_size and epochs must be positive".into()));
    }
    let mut model = BaselineModel::new(kind, config.clone(), data.cols(), seed)?;
    model.standardizer = if config.standardize {
        Standardizer::fit(data)
    } else {
        Standardizer::identity(data.cols())
    };
    let xs = model.standardizer.forward(data);
    let names = model.param_names();
    let mut adam = AdamState::new(AdamConfig::with_lr(config.lr), &model.params());
    let mut rng = derived(seed, 0xba5e);
    let mut order: Vec<usize> = (0..xs.rows()).collect();
    let mut losses = Vec::with_capacity(config.epochs);
    let mut batch_index = 0;
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut sum = 0.0;
        for chunk in order.chunks(config.batch_size) {
            // a trailing singleton batch has no pairs for the TC estimator
            if kind == BaselineKind::BetaTcVae && chunk.len() < 2 {
                continue;
            }
            let batch = xs.select_rows(chunk);
            let eps = kind
                .is_variational()
                .then(|| draw_noise(&mut rng, chunk.len(), config.latent_dim));
            let (loss, grads) = step_gradients(&model, &batch, eps.as_ref(), xs.rows())?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    k: 0,
                    batch: batch_index,
                });
            }
            adam.step(&mut model.params_mut(), &grads, &names)?;
            sum += loss * chunk.len() as f64;
            batch_index += 1;
        }
        losses.push(sum / xs.rows() as f64);
    }
    Ok(BaselineOutcome { model, losses })
}
