use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use dpa_core::data::{self, AnalyticDistribution, MuellerBrown};
use dpa_core::experiments::{
    analytic_dataset, density_field, nested_losses, potential_field, reference_mfep, run_alignment, run_crt,
    run_mfep_table, train_independence, train_mfep_model, AlignmentExperiment, TrainedEncoder,
};
use dpa_core::independence::{determinism_csv, determinism_report};
use dpa_core::levelset::{contour_polylines, EncodedGrid, Grid};
use dpa_core::mfep::{evaluate_encoder, protocol_csv};
use dpa_core::stats;
use serde::Serialize;

use crate::config::{ExperimentConfig, Resolved};
use crate::svg::{arrows_csv, polylines_csv, Arrow, Figure, Polyline};

/// A runtime failure tagged with the module it came from.
#[derive(Debug)]
pub struct RunError {
    pub module: &'static str,
    pub message: String,
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "error[{}]: {}", self.module, self.message)
    }
}

impl std::error::Error for RunError {}

pub type RunResult<T> = Result<T, RunError>;

trait Tag<T> {
    fn tag(self, module: &'static str) -> RunResult<T>;
}

impl<T, E: fmt::Display> Tag<T> for Result<T, E> {
    fn tag(self, module: &'static str) -> RunResult<T> {
        self.map_err(|e| RunError {
            module,
            message: e.to_string(),
        })
    }
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub kind: String,
    pub version: String,
    pub config_hash: String,
    pub seeds: Vec<u64>,
    pub wall_clock_secs: f64,
    pub artifacts: Vec<String>,
}

/// Collects artifacts under one output directory.
struct Output {
    dir: PathBuf,
    header: String,
    artifacts: Vec<String>,
}

impl Output {
    fn new(dir: &Path, cfg: &ExperimentConfig) -> RunResult<Self> {
        fs::create_dir_all(dir).tag("cli")?;
        Ok(Self {
            dir: dir.to_path_buf(),
            header: format!(
                "# dpa-lab {} config_hash={} kind={}\n",
                env!("CARGO_PKG_VERSION"),
                cfg.hash(),
                cfg.kind.name()
            ),
            artifacts: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, body: &str) -> RunResult<()> {
        fs::write(self.dir.join(name), body).tag("cli")?;
        self.artifacts.push(name.to_string());
        Ok(())
    }

    fn csv(&mut self, name: &str, body: &str) -> RunResult<()> {
        let text = format!("{}{}", self.header, body);
        self.write(name, &text)
    }
}

/// Runs the experiment, writes artifacts and `manifest.json` into `out`,
/// and returns the manifest together with a printable summary.
pub fn run(cfg: &ExperimentConfig, out: &Path, parallel: usize) -> RunResult<(RunManifest, String)> {
    let start = Instant::now();
    let mut o = Output::new(out, cfg)?;
    let (seeds, summary) = match &cfg.resolved {
        Resolved::ScoreAlignment(e) => (vec![e.model_seed], alignment(e, &mut o)?),
        Resolved::MuellerBrown {
            experiment,
            model,
            seed,
        } => {
            let mfep = reference_mfep(&experiment.string).tag("mfep")?;
            let ds =
                data::mueller_brown(experiment.samples, experiment.kt, experiment.data_seed).tag("synthetic_data")?;
            let module = if model == "dpa" { "dpa_model" } else { "baselines" };
            let trained = train_mfep_model(experiment, model, &ds.samples, *seed).tag(module)?;
            let outcome = evaluate_encoder(trained.as_encoder(), &mfep, *seed, &experiment.extraction).tag("mfep")?;
            o.csv("mfep.csv", &points_csv(mfep.points()))?;
            o.csv("path.csv", &points_csv(outcome.path.points()))?;
            let m = &outcome.metrics;
            let metrics = format!(
                "model,seed,param_comp,r2,chamfer,hausdorff,p95,d_mfep_to_path,d_path_to_mfep,truncated\n\
                 {model},{seed},{},{},{},{},{},{},{},{}\n",
                outcome.component,
                outcome.r2,
                m.chamfer,
                m.hausdorff,
                m.p95,
                m.d_mfep_to_path,
                m.d_path_to_mfep,
                outcome.truncated
            );
            o.csv("metrics.csv", &metrics)?;
            if let TrainedEncoder::Dpa(d) = &trained {
                o.write("model.json", &d.to_checkpoint_string().tag("dpa_model")?)?;
            }
            let mut lines = mueller_brown_background();
            lines.push(Polyline {
                panel: 0,
                layer: "mfep".into(),
                points: mfep.points().to_vec(),
            });
            lines.push(Polyline {
                panel: 0,
                layer: "path".into(),
                points: outcome.path.points().to_vec(),
            });
            o.csv("polylines.csv", &polylines_csv(&lines))?;
            let fig = Figure {
                titles: vec![format!("{model} seed {seed}")],
                polylines: lines,
                arrows: vec![],
            };
            o.write("figure.svg", &fig.to_svg())?;
            (vec![*seed], metrics)
        }
        Resolved::MfepTable {
            experiment,
            models,
            seeds,
        } => {
            let table = run_mfep_table(experiment, models, seeds, parallel).tag("mfep")?;
            let csv = protocol_csv(&table.rows);
            o.csv("table.csv", &csv)?;
            let mut s = String::from("model,seed,status,param_comp,r2,chamfer,hausdorff,p95,truncated,detail\n");
            for r in &table.rows {
                for k in &r.kept {
                    writeln!(
                        s,
                        "{},{},kept,{},{},{},{},{},{},",
                        r.model,
                        k.seed,
                        k.component,
                        k.r2,
                        k.metrics.chamfer,
                        k.metrics.hausdorff,
                        k.metrics.p95,
                        k.truncated
                    )
                    .unwrap();
                }
                if let Some(d) = r.dropped_seed {
                    writeln!(s, "{},{d},dropped,,,,,,,worst chamfer", r.model).unwrap();
                }
                for (seed, msg) in &r.failures {
                    writeln!(s, "{},{seed},failed,,,,,,,\"{}\"", r.model, msg.replace('"', "'")).unwrap();
                }
            }
            o.csv("seeds.csv", &s)?;
            o.csv("mfep.csv", &points_csv(table.mfep.points()))?;
            (seeds.clone(), csv)
        }
        Resolved::IndependenceTable(exps) => {
            let mut rows = Vec::new();
            let mut nesting = String::from("dataset,beta,k,loss\n");
            for e in exps {
                let outcome = train_independence(e).tag("dpa_model")?;
                let report =
                    determinism_report(&outcome.split.z, &outcome.split.u, &e.determinism).tag("independence")?;
                let label = if e.dpa.beta == 1.0 {
                    e.dataset.clone()
                } else {
                    format!("{} (beta={})", e.dataset, e.dpa.beta)
                };
                let ds = data::manifold(&e.dataset, e.samples, e.data_seed).tag("synthetic_data")?;
                let losses =
                    nested_losses(&outcome.model, &ds.samples, e.train.draws, e.model_seed).tag("dpa_model")?;
                for (k, l) in losses.iter().enumerate() {
                    writeln!(nesting, "{},{},{k},{l}", e.dataset, e.dpa.beta).unwrap();
                }
                rows.push((label, report));
            }
            let csv = determinism_csv(&rows);
            o.csv("table.csv", &csv)?;
            o.csv("nesting.csv", &nesting)?;
            (exps.first().map(|e| vec![e.model_seed]).unwrap_or_default(), csv)
        }
        Resolved::Crt {
            experiment,
            crt,
            target,
        } => {
            let outcome = train_independence(experiment).tag("dpa_model")?;
            let report = run_crt(&outcome, *target, crt).tag("independence")?;
            let csv = report.to_csv();
            o.csv("crt.csv", &csv)?;
            let summary = format!(
                "replications={} ks_d={:.4} ks_p={:.4} frac_below_05={:.3}\n",
                report.p_values.len(),
                report.ks_d,
                report.ks_p,
                report.frac_below_05
            );
            (vec![experiment.model_seed], summary)
        }
    };
    for a in &o.artifacts {
        if !o.dir.join(a).is_file() {
            return Err(RunError {
                module: "cli",
                message: format!("artifact {a} missing after run"),
            });
        }
    }
    let manifest = RunManifest {
        kind: cfg.kind.name().to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: cfg.hash(),
        seeds,
        wall_clock_secs: start.elapsed().as_secs_f64(),
        artifacts: o.artifacts.clone(),
    };
    let json = serde_json::to_string_pretty(&manifest).tag("cli")?;
    fs::write(o.dir.join("manifest.json"), json).tag("cli")?;
    Ok((manifest, summary))
}

fn points_csv(points: &[[f64; 2]]) -> String {
    let mut s = String::from("x,y\n");
    for p in points {
        writeln!(s, "{},{}", p[0], p[1]).unwrap();
    }
    s
}

fn alignment(e: &AlignmentExperiment, o: &mut Output) -> RunResult<String> {
    let out = run_alignment(e).tag("levelset_diag")?;
    let mut summary = String::from("dataset,component,mean_abs_cos,std,p95,kept,skipped,untrained_mean_abs_cos\n");
    for s in &out.report.summaries {
        let untrained = out.untrained.summary(s.component).map_or(f64::NAN, |u| u.mean);
        writeln!(
            summary,
            "{},{},{},{},{},{},{},{}",
            e.dataset, s.component, s.mean, s.std, s.p95, s.kept, s.skipped, untrained
        )
        .unwrap();
    }
    o.csv("summary.csv", &summary)?;
    o.csv("records.csv", &out.report.to_csv())?;
    o.csv("losses.csv", &out.curves.to_csv())?;
    o.write("model.json", &out.model.to_checkpoint_string().tag("dpa_model")?)?;

    let ds = analytic_dataset(&e.dataset, 1, e.data_seed).tag("synthetic_data")?;
    let dist = ds.distribution.expect("analytic datasets carry their law");
    let components = e
        .alignment
        .components
        .clone()
        .unwrap_or_else(|| (0..out.model.latent_dim()).collect());
    let (lines, arrows) = alignment_layers(
        &out.model,
        dist.as_ref(),
        &e.alignment.grid,
        e.alignment.density_cutoff,
        &components,
    )
    .tag("levelset_diag")?;
    o.csv("polylines.csv", &polylines_csv(&lines))?;
    o.csv("arrows.csv", &arrows_csv(&arrows))?;
    let fig = Figure {
        titles: components.iter().map(|c| format!("component {c}")).collect(),
        polylines: lines,
        arrows,
    };
    o.write("figure.svg", &fig.to_svg())?;
    Ok(summary)
}

/// Density contours, encoder level sets at quantiles of the encoded grid,
/// and a coarse quiver of the score, one panel per component.
fn alignment_layers(
    encoder: &dyn dpa_core::encoder::Encoder,
    dist: &dyn AnalyticDistribution,
    grid: &Grid,
    cutoff: f64,
    components: &[usize],
) -> dpa_core::Result<(Vec<Polyline>, Vec<Arrow>)> {
    let density = density_field(dist, grid);
    let dmax = density.max();
    let enc = EncodedGrid::new(encoder, *grid)?;
    let [nx, ny] = grid.resolution;
    let stride = (nx.max(ny) / 12).max(1);
    let length = grid.spacing()[0].max(grid.spacing()[1]) * stride as f64 * 0.8;
    let mut lines = Vec::new();
    let mut arrows = Vec::new();
    for (panel, &c) in components.iter().enumerate() {
        for frac in [0.05, 0.25, 0.5, 0.75] {
            for points in contour_polylines(&density, frac * dmax) {
                lines.push(Polyline {
                    panel,
                    layer: "density".into(),
                    points,
                });
            }
        }
        let kept: Vec<f64> = (0..grid.len())
            .filter(|&i| density.values[i] > cutoff * dmax)
            .map(|i| enc.values[c].values[i])
            .collect();
        if !kept.is_empty() {
            for q in [10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 70.0, 80.0, 90.0] {
                let level = stats::percentile(&kept, q);
                for points in enc.level_set(c, level).polylines {
                    lines.push(Polyline {
                        panel,
                        layer: "levelset".into(),
                        points,
                    });
                }
            }
        }
        for i in (0..nx).step_by(stride) {
            for j in (0..ny).step_by(stride) {
                let y = grid.node(i, j);
                if dist.density(&y) <= 0.05 * dmax {
                    continue;
                }
                let s = dist.score(&y);
                let norm = (s[0] * s[0] + s[1] * s[1]).sqrt();
                if norm > 1e-12 {
                    arrows.push(Arrow {
                        panel,
                        at: y,
                        delta: [s[0] / norm * length, s[1] / norm * length],
                    });
                }
            }
        }
    }
    Ok((lines, arrows))
}

fn mueller_brown_background() -> Vec<Polyline> {
    let grid = Grid::new([-1.5, -0.5], [1.2, 2.0], [120, 120]).expect("fixed grid");
    let field = potential_field(&MuellerBrown::default(), &grid);
    let mut lines = Vec::new();
    for level in (-14..=4).map(|k| k as f64 * 10.0) {
        for points in contour_polylines(&field, level) {
            lines.push(Polyline {
                panel: 0,
                layer: "potential".into(),
                points,
            });
        }
    }
    lines
}

/// Re-renders `figure.svg` from the CSVs in `input`.
pub fn render(input: &Path, output: Option<&Path>) -> RunResult<PathBuf> {
    let poly = input.join("polylines.csv");
    if !poly.is_file() {
        return Err(RunError {
            module: "cli",
            message: format!(
                "missing {}; produce it with `dpa-lab run score_alignment --out {dir}` or `dpa-lab run mueller_brown --out {dir}`",
                poly.display(),
                dir = input.display()
            ),
        });
    }
    let polylines = crate::svg::parse_polylines(&fs::read_to_string(&poly).tag("cli")?).tag("cli")?;
    let arrows_path = input.join("arrows.csv");
    let arrows = if arrows_path.is_file() {
        crate::svg::parse_arrows(&fs::read_to_string(&arrows_path).tag("cli")?).tag("cli")?
    } else {
        Vec::new()
    };
    let kind = fs::read_to_string(&poly).ok().and_then(|t| {
        t.lines()
            .next()
            .and_then(|l| l.split("kind=").nth(1))
            .map(str::to_string)
    });
    let titles = match kind.as_deref() {
        Some("score_alignment") => {
            let n = polylines
                .iter()
                .map(|p| p.panel + 1)
                .chain(arrows.iter().map(|a| a.panel + 1))
                .max()
                .unwrap_or(1);
            (0..n).map(|c| format!("component {c}")).collect()
        }
        _ => Vec::new(),
    };
    let fig = Figure {
        titles,
        polylines,
        arrows,
    };
    let target = output
        .map(Path::to_path_buf)
        .unwrap_or_else(|| input.join("figure.svg"));
    fs::write(&target, fig.to_svg()).tag("cli")?;
    Ok(target)
}
