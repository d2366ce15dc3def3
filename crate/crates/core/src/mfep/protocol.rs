use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::extract::{best_parameterizing_component, extract_path, ExtractMethod};
use super::path::{path_metrics, Path, PathMetrics};
use crate::encoder::Encoder;
use crate::error::{Error, Result};
use crate::stats;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtractionConfig {
    pub method: ExtractMethod,
    /// Number of latent levels between the endpoint codes.
    pub levels: usize,
    /// Points per path when computing metrics.
    pub resample: usize,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        Self {
            method: ExtractMethod::RootFind,
            levels: 200,
            resample: 200,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedOutcome {
    pub seed: u64,
    pub component: usize,
    pub r2: f64,
    pub metrics: PathMetrics,
    pub truncated: bool,
    pub path: Path,
}

/// Picks the best parameterizing component, inverts the encoder between the
/// codes of the MFEP endpoints, and scores the result against the MFEP.
pub fn evaluate_encoder(
    encoder: &dyn Encoder,
    mfep: &Path,
    seed: u64,
    config: &ExtractionConfig,
) -> Result<SeedOutcome> {
    let (component, r2) = best_parameterizing_component(encoder, mfep)?;
    let z0 = encoder.encode_point(&mfep.first())?[component];
    let z1 = encoder.encode_point(&mfep.last())?[component];
    let step = ((z1 - z0).abs() / config.levels.max(1) as f64).max(1e-12);
    let ex = extract_path(encoder, component, (z0, z1), mfep.first(), config.method, step)?;
    let path = ex.path.resample(config.resample);
    let reference = mfep.resample(config.resample);
    let metrics = path_metrics(path.points(), reference.points())?;
    Ok(SeedOutcome {
        seed,
        component,
        r2,
        metrics,
        truncated: ex.truncated,
        path,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    pub sd: f64,
}

impl MeanSd {
    fn of(xs: &[f64]) -> Self {
        Self {
            mean: stats::mean(xs),
            sd: stats::std_dev(xs),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolRow {
    pub model: String,
    pub kept: Vec<SeedOutcome>,
    pub dropped_seed: Option<u64>,
    pub failures: Vec<(u64, String)>,
    pub param_comp: MeanSd,
    pub chamfer: MeanSd,
    pub hausdorff: MeanSd,
    pub p95: MeanSd,
    pub d_mfep_to_path: MeanSd,
    pub d_path_to_mfep: MeanSd,
}

/// Runs `run(model, seed)` for every model and seed, drops the seed with
/// the worst Chamfer distance per model, and summarizes the rest.
/// `parallel` > 1 fans seeds out over that many worker threads.
pub fn seed_protocol<F>(models: &[String], seeds: &[u64], parallel: usize, run: F) -> Result<Vec<ProtocolRow>>
where
    F: Fn(&str, u64) -> Result<SeedOutcome> + Sync,
{
    if seeds.len() < 2 {
        return Err(Error::Config(format!(
            "seed protocol needs at least 2 seeds, got {}",
            seeds.len()
        )));
    }
    let jobs: Vec<(&str, u64)> = models
        .iter()
        .flat_map(|m| seeds.iter().map(move |&s| (m.as_str(), s)))
        .collect();
    let exec = || -> Vec<Result<SeedOutcome>> { jobs.par_iter().map(|&(m, s)| run(m, s)).collect() };
    let results = if parallel > 1 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(parallel)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(exec)
    } else {
        jobs.iter().map(|&(m, s)| run(m, s)).collect()
    };
    let mut rows = Vec::new();
    for model in models {
        let mut ok = Vec::new();
        let mut failures = Vec::new();
        for (&(m, seed), r) in jobs.iter().zip(&results) {
            if m != model {
                continue;
            }
            match r {
                Ok(o) => ok.push(o.clone()),
                Err(e) => failures.push((seed, e.to_string())),
            }
        }
        let dropped_seed = if ok.len() >= 2 {
            let worst = ok
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.metrics.chamfer.total_cmp(&b.1.metrics.chamfer))
                .map(|(i, _)| i)
                .expect("nonempty");
            Some(ok.remove(worst).seed)
        } else {
            None
        };
        let col = |f: &dyn Fn(&SeedOutcome) -> f64| MeanSd::of(&ok.iter().map(f).collect::<Vec<_>>());
        rows.push(ProtocolRow {
            model: model.clone(),
            param_comp: col(&|o| o.component as f64),
            chamfer: col(&|o| o.metrics.chamfer),
            hausdorff: col(&|o| o.metrics.hausdorff),
            p95: col(&|o| o.metrics.p95),
            d_mfep_to_path: col(&|o| o.metrics.d_mfep_to_path),
            d_path_to_mfep: col(&|o| o.metrics.d_path_to_mfep),
            kept: ok,
            dropped_seed,
            failures,
        });
    }
    Ok(rows)
}

/// One line per model: mean and s.d. of every metric.
pub fn protocol_csv(rows: &[ProtocolRow]) -> String {
    let mut s = String::from(
        "model,param_comp_mean,param_comp_sd,chamfer_mean,chamfer_sd,hausdorff_mean,hausdorff_sd,\
         p95_mean,p95_sd,d_mfep_to_path_mean,d_mfep_to_path_sd,d_path_to_mfep_mean,d_path_to_mfep_sd,kept,failed\n",
    );
    for r in rows {
        writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.model,
            r.param_comp.mean,
            r.param_comp.sd,
            r.chamfer.mean,
            r.chamfer.sd,
            r.hausdorff.mean,
            r.hausdorff.sd,
            r.p95.mean,
            r.p95.sd,
            r.d_mfep_to_path.mean,
            r.d_mfep_to_path.sd,
            r.d_path_to_mfep.mean,
            r.d_path_to_mfep.sd,
            r.kept.len(),
            r.failures.len()
        )
        .expect("string write");
    }
    s
}
