use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use clap::ValueEnum;
use dpa_core::experiments::{AlignmentExperiment, CrtTarget, IndependenceExperiment, MfepExperiment, MFEP_MODELS};
use dpa_core::independence::CrtConfig;
use dpa_core::levelset::Grid;
use dpa_core::mfep::ExtractMethod;
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[value(rename_all = "snake_case")]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    ScoreAlignment,
    MuellerBrown,
    MfepTable,
    IndependenceTable,
    Crt,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::ScoreAlignment => "score_alignment",
            ExperimentKind::MuellerBrown => "mueller_brown",
            ExperimentKind::MfepTable => "mfep_table",
            ExperimentKind::IndependenceTable => "independence_table",
            ExperimentKind::Crt => "crt",
        }
    }
}

/// Field-level problems found while resolving a configuration.
#[derive(Debug, Default)]
pub struct Diagnostics(pub Vec<String>);

impl fmt::Display for Diagnostics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, d) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "  {d}")?;
        }
        Ok(())
    }
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_key_values(text: &str, origin: &str) -> Result<BTreeMap<String, String>, Diagnostics> {
    let mut map = BTreeMap::new();
    let mut errors = Vec::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        match line.split_once('=') {
            Some((k, v)) if !k.trim().is_empty() => {
                map.insert(k.trim().to_string(), v.trim().to_string());
            }
            _ => errors.push(format!(
                "{origin}:{}: expected `key = value`, got `{}`",
                no + 1,
                raw.trim()
            )),
        }
    }
    if errors.is_empty() {
        Ok(map)
    } else {
        Err(Diagnostics(errors))
    }
}

pub fn read_config_file(path: &Path) -> Result<BTreeMap<String, String>, Diagnostics> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Diagnostics(vec![format!("cannot read config file {}: {e}", path.display())]))?;
    parse_key_values(&text, &path.display().to_string())
}

/// Inclusive seed range `A..B` or a single seed.
pub fn parse_seeds(s: &str) -> Result<Vec<u64>, String> {
    let parse = |v: &str| v.trim().parse::<u64>().map_err(|e| format!("bad seed `{v}`: {e}"));
    match s.split_once("..") {
        Some((a, b)) => {
            let (a, b) = (parse(a)?, parse(b.trim_start_matches('='))?);
            if b < a {
                return Err(format!("empty seed range {s}"));
            }
            Ok((a..=b).collect())
        }
        None => Ok(vec![parse(s)?]),
    }
}

/// Typed access to a key-value map that remembers which keys were read.
struct Fields<'a> {
    map: &'a BTreeMap<String, String>,
    used: BTreeSet<String>,
    errors: Vec<String>,
}

impl<'a> Fields<'a> {
    fn new(map: &'a BTreeMap<String, String>) -> Self {
        Self {
            map,
            used: BTreeSet::new(),
            errors: Vec::new(),
        }
    }

    fn get<T: FromStr>(&mut self, key: &str, default: T) -> T
    where
        T::Err: fmt::Display,
    {
        self.used.insert(key.to_string());
        match self.map.get(key) {
            None => default,
            Some(raw) => match raw.parse() {
                Ok(v) => v,
                Err(e) => {
                    self.errors.push(format!("{key}: cannot parse `{raw}`: {e}"));
                    default
                }
            },
        }
    }

    fn check(&mut self, ok: bool, key: &str, msg: &str) {
        if !ok {
            self.errors.push(format!("{key}: {msg}"));
        }
    }

    fn finish(self) -> Result<(), Diagnostics> {
        let mut errors = self.errors;
        for k in self.map.keys() {
            if !self.used.contains(k) {
                errors.push(format!("{k}: unknown key for this experiment"));
            }
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(Diagnostics(errors))
        }
    }
}

/// A fully resolved experiment, ready to run.
#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Resolved {
    ScoreAlignment(AlignmentExperiment),
    MuellerBrown {
        experiment: MfepExperiment,
        model: String,
        seed: u64,
    },
    MfepTable {
        experiment: MfepExperiment,
        models: Vec<String>,
        seeds: Vec<u64>,
    },
    IndependenceTable(Vec<IndependenceExperiment>),
    Crt {
        experiment: IndependenceExperiment,
        crt: CrtConfig,
        target: CrtTarget,
    },
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub resolved: Resolved,
}

impl ExperimentConfig {
    /// SHA-256 over the canonical JSON of the resolved experiment; output
    /// locations and thread counts are not part of it.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(&(self.kind, &self.resolved)).expect("serializable config");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn single_seed(seeds: &Option<Vec<u64>>, kind: ExperimentKind, errors: &mut Vec<String>) -> u64 {
    match seeds.as_deref() {
        None => 42,
        Some([s]) => *s,
        Some(_) => {
            errors.push(format!("seeds: {} takes a single --seed", kind.name()));
            42
        }
    }
}

fn positive(f: &mut Fields<'_>, key: &str, v: usize) {
    f.check(v > 0, key, "must be positive");
}

pub fn resolve(
    kind: ExperimentKind,
    map: &BTreeMap<String, String>,
    seeds: Option<Vec<u64>>,
) -> Result<ExperimentConfig, Diagnostics> {
    let mut f = Fields::new(map);
    let seeds = match f.map.get("seeds").cloned() {
        Some(raw) if seeds.is_none() => {
            f.used.insert("seeds".into());
            match parse_seeds(&raw) {
                Ok(s) => Some(s),
                Err(e) => {
                    f.errors.push(format!("seeds: {e}"));
                    None
                }
            }
        }
        _ => {
            f.used.insert("seeds".into());
            seeds
        }
    };
    let resolved = match kind {
        ExperimentKind::ScoreAlignment => {
            let dataset: String = f.get("dataset", "standard_normal".to_string());
            f.check(
                matches!(
                    dataset.as_str(),
                    "standard_normal" | "trimodal_mixture" | "gaussian_mixture"
                ),
                "dataset",
                "expected standard_normal or trimodal_mixture",
            );
            let seed = single_seed(&seeds, kind, &mut f.errors);
            let mut e = AlignmentExperiment::desk(&dataset);
            e.data_seed = f.get("data_seed", seed);
            e.model_seed = seed;
            e.train.seed = seed;
            e.samples = f.get("samples", e.samples);
            read_dpa(&mut f, &mut e.dpa);
            read_train(&mut f, &mut e.train);
            let n = f.get("grid_n", 100usize);
            f.check(n >= 3, "grid_n", "need at least 3 nodes per axis");
            let half = f.get("grid_half_width", 4.0f64);
            if let Ok(g) = Grid::square(-half, half, n.max(3)) {
                e.alignment.grid = g;
            } else {
                f.errors.push("grid_half_width: must be positive".into());
            }
            e.alignment.density_cutoff = f.get("density_cutoff", e.alignment.density_cutoff);
            f.check(
                (0.0..1.0).contains(&e.alignment.density_cutoff),
                "density_cutoff",
                "must lie in [0, 1)",
            );
            e.alignment.coarea = f.get("coarea", e.alignment.coarea);
            positive(&mut f, "samples", e.samples);
            Resolved::ScoreAlignment(e)
        }
        ExperimentKind::MuellerBrown | ExperimentKind::MfepTable => {
            let mut e = MfepExperiment::desk();
            e.kt = f.get("kt", e.kt);
            f.check(e.kt > 0.0, "kt", "must be positive");
            e.samples = f.get("samples", e.samples);
            positive(&mut f, "samples", e.samples);
            e.data_seed = f.get("data_seed", e.data_seed);
            read_dpa(&mut f, &mut e.dpa);
            read_train(&mut f, &mut e.dpa_train);
            e.baseline_epochs = f.get("baseline_epochs", e.dpa_train.epochs);
            e.baseline_batch = f.get("baseline_batch", e.dpa_train.batch_size);
            positive(&mut f, "baseline_epochs", e.baseline_epochs);
            positive(&mut f, "baseline_batch", e.baseline_batch);
            e.string.n_nodes = f.get("string_nodes", e.string.n_nodes);
            e.string.tol = f.get("string_tol", e.string.tol);
            e.extraction.method = f.get("method", ExtractMethod::RootFind);
            e.extraction.levels = f.get("levels", e.extraction.levels);
            positive(&mut f, "levels", e.extraction.levels);
            if kind == ExperimentKind::MuellerBrown {
                let model: String = f.get("model", "dpa".to_string());
                check_model(&mut f, &model);
                let seed = single_seed(&seeds, kind, &mut f.errors);
                Resolved::MuellerBrown {
                    experiment: e,
                    model,
                    seed,
                }
            } else {
                let raw: String = f.get("models", "dpa,ae".to_string());
                let models: Vec<String> = raw
                    .split(',')
                    .map(|s| s.trim().to_string())
                    .filter(|s| !s.is_empty())
                    .collect();
                f.check(!models.is_empty(), "models", "need at least one model");
                for m in &models {
                    check_model(&mut f, m);
                }
                let seeds = seeds.unwrap_or_else(|| (42..=46).collect());
                f.check(seeds.len() >= 2, "seeds", "the seed protocol needs at least 2 seeds");
                Resolved::MfepTable {
                    experiment: e,
                    models,
                    seeds,
                }
            }
        }
        ExperimentKind::IndependenceTable | ExperimentKind::Crt => {
            let default = if kind == ExperimentKind::Crt {
                "gaussian_line"
            } else {
                "gaussian_line,parabola,s_curve"
            };
            let raw: String = f.get("dataset", default.to_string());
            let beta: f64 = f.get("beta", 1.0);
            let seed = single_seed(&seeds, kind, &mut f.errors);
            let mut exps = Vec::new();
            let names: Vec<&str> = raw.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
            let samples = f.get("samples", 5000usize);
            positive(&mut f, "samples", samples);
            let data_seed = f.get("data_seed", 42u64);
            for name in &names {
                match IndependenceExperiment::desk(name, beta) {
                    Ok(mut e) => {
                        e.samples = samples;
                        e.data_seed = data_seed;
                        e.model_seed = seed;
                        e.train.seed = seed;
                        exps.push(e);
                    }
                    Err(err) => f.errors.push(format!("dataset: {err}")),
                }
            }
            f.check(!names.is_empty(), "dataset", "need at least one dataset");
            f.check(beta > 0.0 && beta <= 2.0, "beta", "must lie in (0, 2]");
            // shared overrides apply to every dataset
            let mut train = exps.first().map(|e| e.train.clone()).unwrap_or_default();
            read_train(&mut f, &mut train);
            let hidden = f.get("hidden", 64usize);
            let depth = f.get("depth", 4usize);
            let residual = f.get("residual", true);
            let mut det = exps.first().map(|e| e.determinism.clone()).unwrap_or_default();
            det.regression.trees = f.get("trees", det.regression.trees);
            det.bootstrap = f.get("bootstrap", det.bootstrap);
            det.id_neighbours = f.get("id_neighbours", det.id_neighbours);
            f.check(det.id_neighbours >= 3, "id_neighbours", "must be at least 3");
            det.entropy_neighbours = f.get("entropy_neighbours", det.entropy_neighbours);
            positive(&mut f, "entropy_neighbours", det.entropy_neighbours);
            for e in &mut exps {
                e.dpa.hidden = hidden;
                e.dpa.depth = depth;
                e.dpa.residual = residual;
                e.train = train.clone();
                if let Err(err) = e.dpa.validate() {
                    f.errors.push(format!("model: {err}"));
                }
                e.determinism = det.clone();
            }
            if kind == ExperimentKind::Crt {
                let mut crt = CrtConfig {
                    seed,
                    ..CrtConfig::default()
                };
                crt.null_draws = f.get("null_draws", crt.null_draws);
                f.check(crt.null_draws >= 100, "null_draws", "need at least 100 null draws");
                crt.replications = f.get("replications", crt.replications);
                positive(&mut f, "replications", crt.replications);
                crt.subsample = f.get("subsample", crt.subsample);
                f.check(crt.subsample >= 20, "subsample", "need at least 20 rows");
                let target: String = f.get("target", "extraneous".to_string());
                let target = match target.as_str() {
                    "extraneous" => CrtTarget::Extraneous,
                    "dependent" => CrtTarget::Dependent {
                        noise_millis: f.get("dependent_noise_millis", 100u32),
                    },
                    other => {
                        f.errors
                            .push(format!("target: expected extraneous or dependent, got `{other}`"));
                        CrtTarget::Extraneous
                    }
                };
                f.check(exps.len() <= 1, "dataset", "crt takes a single dataset");
                match exps.into_iter().next() {
                    Some(experiment) => Resolved::Crt {
                        experiment,
                        crt,
                        target,
                    },
                    None => return Err(Diagnostics(f.errors)),
                }
            } else {
                Resolved::IndependenceTable(exps)
            }
        }
    };
    f.finish()?;
    Ok(ExperimentConfig { kind, resolved })
}

fn check_model(f: &mut Fields<'_>, model: &str) {
    if !MFEP_MODELS.contains(&model) {
        f.errors.push(format!(
            "models: unknown model `{model}`; expected one of {MFEP_MODELS:?}"
        ));
    }
}

fn read_dpa(f: &mut Fields<'_>, dpa: &mut dpa_core::dpa::DpaConfig) {
    dpa.hidden = f.get("hidden", dpa.hidden);
    dpa.depth = f.get("depth", dpa.depth);
    dpa.latent_dim = f.get("latent_dim", dpa.latent_dim);
    dpa.beta = f.get("beta", dpa.beta);
    dpa.residual = f.get("residual", dpa.residual);
    dpa.standardize = f.get("standardize", dpa.standardize);
    if let Err(e) = dpa.validate() {
        f.errors.push(format!("model: {e}"));
    }
}

fn read_train(f: &mut Fields<'_>, t: &mut dpa_core::dpa::TrainConfig) {
    t.epochs = f.get("epochs", t.epochs);
    t.batch_size = f.get("batch_size", t.batch_size);
    t.lr = f.get("lr", t.lr);
    t.draws = f.get("draws", t.draws);
    let end = f.get(
        "lr_final",
        t.lr_final.map(|v| v.to_string()).unwrap_or_else(|| "none".into()),
    );
    t.lr_final = match end.as_str() {
        "none" => None,
        raw => match raw.parse::<f64>() {
            Ok(v) if v > 0.0 => Some(v),
            _ => {
                f.errors
                    .push(format!("lr_final: expected a positive rate or `none`, got `{raw}`"));
                None
            }
        },
    };
    positive(f, "epochs", t.epochs);
    positive(f, "batch_size", t.batch_size);
    f.check(t.lr > 0.0, "lr", "must be positive");
    f.check(t.draws >= 2, "draws", "need at least 2 decoder draws");
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn key_value_parsing() {
        let m = parse_key_values("# comment\nepochs = 3\n\nlr=0.01 # trailing\n", "cfg").unwrap();
        assert_eq!(m["epochs"], "3");
        assert_eq!(m["lr"], "0.01");
        let e = parse_key_values("epochs 3", "cfg").unwrap_err();
        assert!(e.0[0].contains("cfg:1"));
    }

    #[test]
    fn seed_ranges() {
        assert_eq!(parse_seeds("42..46").unwrap(), vec![42, 43, 44, 45, 46]);
        assert_eq!(parse_seeds("7").unwrap(), vec![7]);
        assert!(parse_seeds("5..2").is_err());
    }

    #[test]
    fn unknown_and_malformed_fields_are_reported() {
        let err = resolve(
            ExperimentKind::ScoreAlignment,
            &map(&[("epochs", "x"), ("bogus", "1")]),
            None,
        )
        .unwrap_err();
        let text = err.to_string();
        assert!(text.contains("epochs") && text.contains("bogus"), "{text}");
    }

    #[test]
    fn hash_tracks_semantic_fields_only() {
        let a = resolve(ExperimentKind::ScoreAlignment, &map(&[("epochs", "3")]), None).unwrap();
        let b = resolve(ExperimentKind::ScoreAlignment, &map(&[("epochs", "3")]), Some(vec![42])).unwrap();
        let c = resolve(ExperimentKind::ScoreAlignment, &map(&[("epochs", "4")]), None).unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn table_needs_two_seeds() {
        assert!(resolve(ExperimentKind::MfepTable, &BTreeMap::new(), Some(vec![1])).is_err());
        let ok = resolve(ExperimentKind::MfepTable, &map(&[("models", "dpa,beta_tcvae")]), None).unwrap();
        match ok.resolved {
            Resolved::MfepTable { seeds, models, .. } => {
                assert_eq!(seeds.len(), 5);
                assert_eq!(models, vec!["dpa", "beta_tcvae"]);
            }
            _ => unreachable!(),
        }
    }
}
