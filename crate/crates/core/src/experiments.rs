//! End-to-end experiment pipelines shared by the command-line runner and
//! the acceptance suite. Every `desk` preset is sized for one CPU core.

use serde::{Deserialize, Serialize};

use crate::baselines::{train_baseline, BaselineConfig, BaselineKind, BaselineModel};
use crate::data::{self, AnalyticDistribution, Dataset, MuellerBrown, Potential};
use crate::dpa::{train_dpa, DpaConfig, DpaModel, LossCurves, TrainConfig};
use crate::encoder::Encoder;
use crate::error::{Error, Result};
use crate::independence::{
    determinism_report, double_crt, CrtConfig, CrtReport, DeterminismConfig, DeterminismReport, LatentSplit,
};
use crate::levelset::{score_alignment, AlignmentConfig, AlignmentReport};
use crate::mfep::{
    evaluate_encoder, seed_protocol, string_method, ExtractionConfig, Path, ProtocolRow, SeedOutcome, StringConfig,
};
use crate::nn::Tensor;
use crate::rng::derived;

/// Datasets with a known density, by registry name.
pub fn analytic_dataset(name: &str, n: usize, seed: u64) -> Result<Dataset> {
    match name {
        "standard_normal" => Ok(data::standard_normal(2, n, seed)),
        "trimodal_mixture" | "gaussian_mixture" => Ok(data::trimodal_mixture(n, seed)),
        _ => Err(Error::Config(format!(
            "unknown analytic dataset `{name}`; expected standard_normal or trimodal_mixture"
        ))),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlignmentExperiment {
    pub dataset: String,
    pub samples: usize,
    pub data_seed: u64,
    pub model_seed: u64,
    pub dpa: DpaConfig,
    pub train: TrainConfig,
    pub alignment: AlignmentConfig,
}

impl AlignmentExperiment {
    pub fn desk(dataset: &str) -> Self {
        Self {
            dataset: dataset.to_string(),
            samples: data::DEFAULT_SAMPLES,
            data_seed: 42,
            model_seed: 42,
            dpa: DpaConfig::default(),
            train: TrainConfig {
                epochs: 400,
                seed: 42,
                ..TrainConfig::default()
            },
            alignment: AlignmentConfig {
                components: Some(vec![0, 1]),
                ..AlignmentConfig::default()
            },
        }
    }
}

pub struct AlignmentOutcome {
    pub model: DpaModel,
    pub curves: LossCurves,
    pub report: AlignmentReport,
    /// Same metric for the encoder before training.
    pub untrained: AlignmentReport,
}

pub fn run_alignment(exp: &AlignmentExperiment) -> Result<AlignmentOutcome> {
    let ds = analytic_dataset(&exp.dataset, exp.samples, exp.data_seed)?;
    let dist = ds.distribution.clone().expect("analytic datasets carry their law");
    let model = DpaModel::new(exp.dpa.clone(), ds.dim(), exp.model_seed)?;
    let untrained = score_alignment(&model, dist.as_ref(), &exp.alignment)?;
    let out = train_dpa(model, &ds.samples, &exp.train)?;
    let report = score_alignment(&out.model, dist.as_ref(), &exp.alignment)?;
    Ok(AlignmentOutcome {
        model: out.model,
        curves: out.curves,
        report,
        untrained,
    })
}

/// Model families compared on the Müller–Brown path-recovery task.
pub const MFEP_MODELS: [&str; 5] = ["dpa", "ae", "vae", "beta_vae", "beta_tcvae"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MfepExperiment {
    pub kt: f64,
    pub samples: usize,
    pub data_seed: u64,
    pub string: StringConfig,
    pub extraction: ExtractionConfig,
    pub dpa: DpaConfig,
    pub dpa_train: TrainConfig,
    /// Epoch count applied to every baseline family.
    pub baseline_epochs: usize,
    /// Batch size for the non-TC baselines.
    pub baseline_batch: usize,
}

impl MfepExperiment {
    pub fn desk() -> Self {
        Self {
            kt: 10.0,
            samples: data::DEFAULT_SAMPLES,
            data_seed: 42,
            string: StringConfig::default(),
            extraction: ExtractionConfig::default(),
            dpa: DpaConfig {
                latent_dim: 2,
                hidden: 100,
                depth: 3,
                residual: false,
                ..DpaConfig::default()
            },
            dpa_train: TrainConfig {
                epochs: 300,
                batch_size: 500,
                lr: 5e-4,
                ..TrainConfig::default()
            },
            baseline_epochs: 300,
            baseline_batch: 500,
        }
    }

    pub fn baseline_config(&self, kind: BaselineKind) -> BaselineConfig {
        let mut cfg = BaselineConfig::for_kind(kind);
        cfg.epochs = self.baseline_epochs;
        if kind != BaselineKind::BetaTcVae {
            cfg.batch_size = self.baseline_batch;
        }
        cfg
    }
}

/// The Müller–Brown minimum-energy path between the upper-left and
/// lower-right minima.
pub fn reference_mfep(cfg: &StringConfig) -> Result<Path> {
    let mb = MuellerBrown::default();
    let guess = MuellerBrown::MINIMA_GUESS;
    let a = data::local_minimum(&mb, &guess[0], 1e-10, 100_000)?;
    let b = data::local_minimum(&mb, &guess[2], 1e-10, 100_000)?;
    string_method(&mb, [[a[0], a[1]], [b[0], b[1]]], cfg)
}

/// A trained encoder of any of the compared families.
pub enum TrainedEncoder {
    Dpa(DpaModel),
    Baseline(BaselineModel),
}

impl TrainedEncoder {
    pub fn as_encoder(&self) -> &dyn Encoder {
        match self {
            TrainedEncoder::Dpa(m) => m,
            TrainedEncoder::Baseline(m) => m,
        }
    }
}

/// Trains `model` (`dpa` or a baseline name) on `samples` with `seed`.
pub fn train_mfep_model(exp: &MfepExperiment, model: &str, samples: &Tensor, seed: u64) -> Result<TrainedEncoder> {
    if model == "dpa" {
        let m = DpaModel::new(exp.dpa.clone(), samples.cols(), seed)?;
        let train = TrainConfig {
            seed,
            ..exp.dpa_train.clone()
        };
        return Ok(TrainedEncoder::Dpa(train_dpa(m, samples, &train)?.model));
    }
    let kind: BaselineKind = model.parse()?;
    Ok(TrainedEncoder::Baseline(
        train_baseline(kind, samples, &exp.baseline_config(kind), seed)?.model,
    ))
}

pub struct MfepTable {
    pub mfep: Path,
    pub rows: Vec<ProtocolRow>,
}

/// Trains every model at every seed on one Müller–Brown sample, extracts a
/// path per run and summarizes with the worst seed dropped.
pub fn run_mfep_table(exp: &MfepExperiment, models: &[String], seeds: &[u64], parallel: usize) -> Result<MfepTable> {
    for m in models {
        if m != "dpa" {
            m.parse::<BaselineKind>()?;
        }
    }
    let mfep = reference_mfep(&exp.string)?;
    let ds = data::mueller_brown(exp.samples, exp.kt, exp.data_seed)?;
    let run = |model: &str, seed: u64| -> Result<SeedOutcome> {
        let trained = train_mfep_model(exp, model, &ds.samples, seed)?;
        evaluate_encoder(trained.as_encoder(), &mfep, seed, &exp.extraction)
    };
    let rows = seed_protocol(models, seeds, parallel, run)?;
    Ok(MfepTable { mfep, rows })
}

/// Latent split for a manifold dataset: intrinsic dimension informative,
/// the rest extraneous.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndependenceExperiment {
    pub dataset: String,
    pub samples: usize,
    pub data_seed: u64,
    pub model_seed: u64,
    pub dpa: DpaConfig,
    pub train: TrainConfig,
    pub determinism: DeterminismConfig,
}

impl IndependenceExperiment {
    pub fn desk(dataset: &str, beta: f64) -> Result<Self> {
        let kind: data::ManifoldKind = dataset.parse()?;
        Ok(Self {
            dataset: dataset.to_string(),
            samples: 5000,
            data_seed: 42,
            model_seed: 42,
            dpa: DpaConfig {
                latent_dim: kind.ambient_dim(),
                hidden: 64,
                depth: 4,
                beta,
                ..DpaConfig::default()
            },
            train: TrainConfig {
                epochs: 1000,
                batch_size: 128,
                lr_final: Some(1e-5),
                seed: 42,
                ..TrainConfig::default()
            },
            determinism: DeterminismConfig::default(),
        })
    }

    pub fn informative(&self) -> Result<usize> {
        Ok(self.dataset.parse::<data::ManifoldKind>()?.intrinsic_dim())
    }
}

pub struct IndependenceOutcome {
    pub model: DpaModel,
    pub curves: LossCurves,
    pub split: LatentSplit,
}

/// Trains a DPA on the manifold and splits its latents.
pub fn train_independence(exp: &IndependenceExperiment) -> Result<IndependenceOutcome> {
    let ds = data::manifold(&exp.dataset, exp.samples, exp.data_seed)?;
    let model = DpaModel::new(exp.dpa.clone(), ds.dim(), exp.model_seed)?;
    let out = train_dpa(model, &ds.samples, &exp.train)?;
    let latents = out.model.encode(&ds.samples)?;
    let split = LatentSplit::from_latents(&latents, exp.informative()?, ds.samples)?;
    Ok(IndependenceOutcome {
        model: out.model,
        curves: out.curves,
        split,
    })
}

pub fn run_independence(exp: &IndependenceExperiment) -> Result<(IndependenceOutcome, DeterminismReport)> {
    let out = train_independence(exp)?;
    let report = determinism_report(&out.split.z, &out.split.u, &exp.determinism)?;
    Ok((out, report))
}

/// What plays the role of `U` in the randomization test.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CrtTarget {
    /// The trained extraneous latents.
    Extraneous,
    /// `U = X₁ + N(0, noise²)`, a latent that depends on the data directly.
    Dependent { noise_millis: u32 },
}

/// Double CRT on a trained model; the decoder regenerates data from
/// `[Z, U_b]`.
pub fn run_crt(out: &IndependenceOutcome, target: CrtTarget, cfg: &CrtConfig) -> Result<CrtReport> {
    let split = &out.split;
    let u = match target {
        CrtTarget::Extraneous => split.u.clone(),
        CrtTarget::Dependent { noise_millis } => {
            let sd = noise_millis as f64 / 1000.0;
            let mut rng = derived(cfg.seed, 0xa17);
            let x1 = split.x.column(0);
            let v = x1
                .iter()
                .map(|x| x + sd * rand::Rng::sample::<f64, _>(&mut rng, rand_distr::StandardNormal))
                .collect();
            Tensor::from_vec(x1.len(), 1, v)?
        }
    };
    let model = &out.model;
    let decode = |z: &Tensor, ub: &Tensor, seed: u64| -> Result<Tensor> {
        let latent = Tensor::hcat(&[z, ub])?;
        model.decode(&latent.select_cols(0, latent.cols().min(model.latent_dim())), seed)
    };
    double_crt(&split.x, &split.z, &u, &decode, cfg)
}

/// Per-term energy scores of a trained model on `x`, with `draws` decoder
/// samples per row.
pub fn nested_losses(model: &DpaModel, x: &Tensor, draws: usize, seed: u64) -> Result<Vec<f64>> {
    (0..=model.latent_dim())
        .map(|k| Ok(model.energy_score_loss(x, k, draws, seed)?.loss))
        .collect()
}

/// Density of the analytic law at `y`, handy for figure rendering.
pub fn density_field(dist: &dyn AnalyticDistribution, grid: &crate::levelset::Grid) -> crate::levelset::GridField {
    crate::levelset::GridField::from_fn(*grid, |p| dist.density(&p))
}

/// Potential field on a grid.
pub fn potential_field(pot: &dyn Potential, grid: &crate::levelset::Grid) -> crate::levelset::GridField {
    crate::levelset::GridField::from_fn(*grid, |p| pot.energy(&p))
}
