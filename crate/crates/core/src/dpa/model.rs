use std::path::Path;

use rand::Rng as _;
use rand_distr::StandardNormal as Normal01;
use serde::{Deserialize, Serialize};

use super::energy::{energy_score_terms, EnergyScoreEstimate};
use crate::encoder::Encoder;
use crate::error::{Error, Result};
use crate::nn::{batch_jacobian, checkpoint, Graph, Mlp, MlpVars, Parameterized, Tensor, Var};
use crate::rng::{derived, seeded};

/// Architecture and objective settings for a [`DpaModel`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DpaConfig {
    /// Encoder output width `k_max`.
    pub latent_dim: usize,
    pub hidden: usize,
    /// Number of linear layers in each of the encoder and decoder.
    pub depth: usize,
    pub residual: bool,
    /// Energy-score exponent, in `(0, 2]`.
    pub beta: f64,
    /// Per-term weights `ω_0..ω_kmax`; `None` means uniform ones.
    pub weights: Option<Vec<f64>>,
    pub standardize: bool,
}

impl Default for DpaConfig {
    fn default() -> Self {
        Self {
            latent_dim: 3,
            hidden: 64,
            depth: 4,
            residual: true,
            beta: 2.0,
            weights: None,
            standardize: true,
        }
    }
}

impl DpaConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta <= 2.0) {
            return Err(Error::Config(format!("beta must lie in (0, 2], got {}", self.beta)));
        }
        if self.latent_dim == 0 || self.hidden == 0 || self.depth < 2 {
            return Err(Error::Config(
                "latent_dim and hidden must be positive and depth at least 2".into(),
            ));
        }
        if let Some(w) = &self.weights {
            if w.len() != self.latent_dim + 1 {
                return Err(Error::Config(format!(
                    "need {} term weights, got {}",
                    self.latent_dim + 1,
                    w.len()
                )));
            }
            if w.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::Config("term weights must lie in [0, 1]".into()));
            }
        }
        Ok(())
    }

    pub fn term_weights(&self) -> Vec<f64> {
        self.weights.clone().unwrap_or_else(|| vec![1.0; self.latent_dim + 1])
    }

    fn widths(&self, input: usize, output: usize) -> Vec<usize> {
        let mut w = vec![input];
        w.extend(std::iter::repeat_n(self.hidden, self.depth - 1));
        w.push(output);
        w
    }
}

/// Per-coordinate affine map to zero mean and unit variance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn identity(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            scale: vec![1.0; dim],
        }
    }

    pub fn fit(x: &Tensor) -> Self {
        let scale = x
            .column_stds()
            .into_iter()
            .map(|s| if s > 1e-12 { s } else { 1.0 })
            .collect();
        Self {
            mean: x.column_means(),
            scale,
        }
    }

    pub fn forward(&self, x: &Tensor) -> Tensor {
        let mut out = x.clone();
        for i in 0..out.rows() {
            for (j, v) in out.row_mut(i).iter_mut().enumerate() {
                *v = (*v - self.mean[j]) / self.scale[j];
            }
        }
        out
    }

    pub fn inverse(&self, x: &Tensor) -> Tensor {
        let mut out = x.clone();
        for i in 0..out.rows() {
            for (j, v) in out.row_mut(i).iter_mut().enumerate() {
                *v = *v * self.scale[j] + self.mean[j];
            }
        }
        out
    }
}

/// Deterministic encoder plus noise-fed decoder. The decoder sees
/// `[e_1..e_k, ε_{k+1}..ε_kmax]` with fresh standard normal `ε`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DpaModel {
    pub config: DpaConfig,
    pub encoder: Mlp,
    pub decoder: Mlp,
    pub standardizer: Standardizer,
}

const CHECKPOINT_KIND: &str = "dpa";

impl DpaModel {
    pub fn new(config: DpaConfig, data_dim: usize, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = seeded(seed);
        let encoder = Mlp::new(&config.widths(data_dim, config.latent_dim), config.residual, &mut rng)?;
        let decoder = Mlp::new(&config.widths(config.latent_dim, data_dim), config.residual, &mut rng)?;
        Ok(Self {
            standardizer: Standardizer::identity(data_dim),
            config,
            encoder,
            decoder,
        })
    }

    pub fn data_dim(&self) -> usize {
        self.encoder.in_dim()
    }

    pub fn latent_dim(&self) -> usize {
        self.config.latent_dim
    }

    pub fn beta(&self) -> f64 {
        self.config.beta
    }

    /// Records `e(x)` on `g` for raw (unstandardized) input node `x`.
    pub fn encode_graph(&self, g: &mut Graph, vars: &MlpVars, x: Var) -> Var {
        let shift: Vec<f64> = self.standardizer.mean.iter().map(|m| -m).collect();
        let inv: Vec<f64> = self.standardizer.scale.iter().map(|s| 1.0 / s).collect();
        let shift = g.leaf(Tensor::row_vector(&shift));
        let inv = g.leaf(Tensor::row_vector(&inv));
        let centered = g.add_row(x, shift);
        let scaled = g.mul_row(centered, inv);
        self.encoder.forward_graph(g, vars, scaled)
    }

    /// Runs the decoder on full-width inputs `[z_prefix, noise]`, returning
    /// raw-space samples.
    pub fn decode_full(&self, latent: &Tensor) -> Result<Tensor> {
        let y = self.decoder.forward(latent)?;
        Ok(self.standardizer.inverse(&y))
    }

    /// Decodes `z_prefix` (`batch×k`, `0 ≤ k ≤ k_max`), padding the remaining
    /// positions with standard normal noise drawn from `noise_seed`.
    pub fn decode(&self, z_prefix: &Tensor, noise_seed: u64) -> Result<Tensor> {
        let k = z_prefix.cols();
        let kmax = self.latent_dim();
        if k > kmax {
            return Err(Error::Dimension(format!(
                "latent prefix has {k} columns, model has {kmax} latents"
            )));
        }
        let mut rng = derived(noise_seed, 0xdec0de);
        let mut input = Tensor::zeros(z_prefix.rows(), kmax);
        for i in 0..z_prefix.rows() {
            let row = input.row_mut(i);
            row[..k].copy_from_slice(z_prefix.row(i));
            for v in &mut row[k..] {
                *v = rng.sample(Normal01);
            }
        }
        self.decode_full(&input)
    }

    /// Unconditional samples (`k = 0`).
    pub fn generate(&self, n: usize, noise_seed: u64) -> Result<Tensor> {
        self.decode(&Tensor::zeros(n, 0), noise_seed)
    }

    /// Monte-Carlo estimate of the `k`-th energy-score term on a raw batch,
    /// in standardized coordinates.
    pub fn energy_score_loss(&self, x: &Tensor, k: usize, m: usize, seed: u64) -> Result<EnergyScoreEstimate> {
        if k > self.latent_dim() {
            return Err(Error::Dimension(format!(
                "k = {k} exceeds k_max = {}",
                self.latent_dim()
            )));
        }
        if m < 2 {
            return Err(Error::Config(format!("energy score needs m >= 2, got {m}")));
        }
        let z = self.encode(x)?;
        let prefix = z.select_cols(0, k);
        let xs = self.standardizer.forward(x);
        let draws = (0..m)
            .map(|j| {
                let y = self.decode(&prefix, seed.wrapping_add(j as u64 * 0x9e37))?;
                Ok(self.standardizer.forward(&y))
            })
            .collect::<Result<Vec<_>>>()?;
        energy_score_terms(&xs, &draws, self.beta())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        checkpoint::save(CHECKPOINT_KIND, self, path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        checkpoint::load(CHECKPOINT_KIND, path)
    }

    pub fn to_checkpoint_string(&self) -> Result<String> {
        checkpoint::to_string(CHECKPOINT_KIND, self)
    }
}

impl Encoder for DpaModel {
    fn input_dim(&self) -> usize {
        self.data_dim()
    }

    fn latent_dim(&self) -> usize {
        self.config.latent_dim
    }

    fn encode(&self, x: &Tensor) -> Result<Tensor> {
        self.encoder.check_input(x)?;
        self.encoder.forward(&self.standardizer.forward(x))
    }

    fn jacobian(&self, x: &Tensor) -> Result<Vec<Tensor>> {
        self.encoder.check_input(x)?;
        batch_jacobian(x, self.latent_dim(), |g, xv| {
            let vars = self.encoder.bind(g);
            self.encode_graph(g, &vars, xv)
        })
    }

    fn component_gradient(&self, x: &Tensor, component: usize) -> Result<Tensor> {
        self.encoder.check_input(x)?;
        if component >= self.latent_dim() {
            return Err(Error::Dimension(format!("component {component} out of range")));
        }
        let mut g = Graph::new();
        let xv = g.leaf(x.clone());
        let vars = self.encoder.bind(&mut g);
        let z = self.encode_graph(&mut g, &vars, xv);
        let col = g.slice_cols(z, component, component + 1);
        let s = g.sum(col);
        let grads = g.backward(s)?;
        Ok(grads.wrt_or_zeros(xv, x))
    }
}

impl Parameterized for DpaModel {
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
