use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::StandardNormal as Normal01;
use serde::{Deserialize, Serialize};

use super::energy::energy_score_graph;
use super::model::{DpaModel, Standardizer};
use crate::error::{Error, Result};
use crate::nn::{AdamConfig, AdamState, Graph, Parameterized, Tensor, Var};
use crate::rng::derived;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// Decoder draws per input, at least 2.
    pub draws: usize,
    pub seed: u64,
    /// If set, the step size follows a cosine from `lr` down to this value
    /// over the run.
    #[serde(default)]
    pub lr_final: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 500,
            lr: 1e-3,
            draws: 2,
            seed: 42,
            lr_final: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub epoch: usize,
    pub k: usize,
    pub loss: f64,
}

/// Epoch-mean `L_k` for every term, in epoch-major order.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossCurves {
    pub records: Vec<LossRecord>,
}

impl LossCurves {
    /// `L_k` of the last recorded epoch, indexed by `k`.
    pub fn final_losses(&self) -> Vec<f64> {
        let Some(last) = self.records.last().map(|r| r.epoch) else {
            return Vec::new();
        };
        let mut out: Vec<(usize, f64)> = self
            .records
            .iter()
            .filter(|r| r.epoch == last)
            .map(|r| (r.k, r.loss))
            .collect();
        out.sort_by_key(|r| r.0);
        out.into_iter().map(|r| r.1).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,k,loss\n");
        for r in &self.records {
            writeln!(s, "{},{},{}", r.epoch, r.k, r.loss).expect("string write");
        }
        s
    }
}

pub struct TrainOutcome {
    pub model: DpaModel,
    pub curves: LossCurves,
}

/// Minimizes `Σ_k ω_k L_k` over all latent widths `k = 0..=k_max` with Adam.
pub fn train_dpa(mut model: DpaModel, data: &Tensor, config: &TrainConfig) -> Result<TrainOutcome> {
    model.config.validate()?;
    if config.draws < 2 {
        return Err(Error::Config(format!(
            "need at least 2 decoder draws, got {}",
            config.draws
        )));
    }
    if config.batch_size == 0 || config.epochs == 0 {
        return Err(Error::Config("batch_size and epochs must be positive".into()));
    }
    if data.cols() != model.data_dim() {
        return Err(Error::Dimension(format!(
            "data has {} columns, model expects {}",
            data.cols(),
            model.data_dim()
        )));
    }
    model.standardizer = if model.config.standardize {
        Standardizer::fit(data)
    } else {
        Standardizer::identity(data.cols())
    };
    let xs = model.standardizer.forward(data);
    let kmax = model.latent_dim();
    let weights = model.config.term_weights();
    let beta = model.beta();
    let names = model.param_names();
    let mut adam = AdamState::new(AdamConfig::with_lr(config.lr), &model.params());
    let mut rng = derived(config.seed, 0x7a11);
    let mut order: Vec<usize> = (0..xs.rows()).collect();
    let mut curves = LossCurves::default();
    let mut batch_index = 0usize;

    for epoch in 0..config.epochs {
        if let Some(end) = config.lr_final {
            let t = epoch as f64 / (config.epochs.max(2) - 1) as f64;
            adam.set_lr(end + 0.5 * (config.lr - end) * (1.0 + (std::f64::consts::PI * t).cos()));
        }
        order.shuffle(&mut rng);
        let mut sums = vec![0.0; kmax + 1];
        let mut seen = 0usize;
        for chunk in order.chunks(config.batch_size) {
            let batch = xs.select_rows(chunk);
            let step = nested_loss_step(&model, &batch, &weights, beta, config.draws, &mut rng)?;
            for (k, l) in step.losses.iter().enumerate() {
                if !l.is_finite() {
                    return Err(Error::NonFiniteLoss { k, batch: batch_index });
                }
                sums[k] += l * chunk.len() as f64;
            }
            seen += chunk.len();
            adam.step(&mut model.params_mut(), &step.grads, &names)?;
            batch_index += 1;
        }
        for (k, s) in sums.iter().enumerate() {
            curves.records.push(LossRecord {
                epoch,
                k,
                loss: s / seen as f64,
            });
        }
    }
    Ok(TrainOutcome { model, curves })
}

struct StepResult {
    losses: Vec<f64>,
    grads: Vec<Tensor>,
}

/// One forward/backward pass of the nested objective on a standardized batch.
fn nested_loss_step(
    model: &DpaModel,
    batch: &Tensor,
    weights: &[f64],
    beta: f64,
    m: usize,
    rng: &mut crate::rng::Rng,
) -> Result<StepResult> {
    let kmax = model.latent_dim();
    let b = batch.rows();
    let mut g = Graph::new();
    let enc = model.encoder.bind(&mut g);
    let dec = model.decoder.bind(&mut g);
    let x = g.leaf(batch.clone());
    let z = model.encoder.forward_graph(&mut g, &enc, x);
    let tiled = g.concat_rows(&vec![z; m]);

    let active: Vec<usize> = (0..=kmax).filter(|&k| weights[k] > 0.0).collect();
    let mut inputs = Vec::with_capacity(active.len());
    for &k in &active {
        let mask: Vec<f64> = (0..kmax).map(|j| if j < k { 1.0 } else { 0.0 }).collect();
        let mask = g.leaf(Tensor::row_vector(&mask));
        let mut noise = Tensor::zeros(m * b, kmax);
        for i in 0..m * b {
            for v in &mut noise.row_mut(i)[k..] {
                *v = rng.sample(Normal01);
            }
        }
        let noise = g.leaf(noise);
        let kept = g.mul_row(tiled, mask);
        inputs.push(g.add(kept, noise));
    }
    let stacked = g.concat_rows(&inputs);
    let y = model.decoder.forward_graph(&mut g, &dec, stacked);

    let mut losses = vec![0.0; kmax + 1];
    let mut total: Option<Var> = None;
    for (slot, &k) in active.iter().enumerate() {
        let draws: Vec<Var> = (0..m)
            .map(|j| {
                let start = (slot * m + j) * b;
                g.slice_rows(y, start, start + b)
            })
            .collect();
        let (lk, _, _) = energy_score_graph(&mut g, x, &draws, beta);
        losses[k] = g.value(lk).item();
        let weighted = g.scale(lk, weights[k]);
        total = Some(match total {
            Some(t) => g.add(t, weighted),
            None => weighted,
        });
    }
    let total = total.ok_or_else(|| Error::Config("all term weights are zero".into()))?;
    let grads = g.backward(total)?;
    let params: Vec<&Tensor> = model.params();
    let grads = enc
        .as_slice()
        .iter()
        .chain(dec.as_slice())
        .zip(params)
        .map(|(&v, p)| grads.wrt_or_zeros(v, p))
        .collect();
    Ok(StepResult { losses, grads })
}
