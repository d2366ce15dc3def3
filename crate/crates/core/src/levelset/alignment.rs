use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::contour::{contour_polylines, contour_segments};
use super::grid::{Grid, GridField};
use super::moments::{segment_moments, LevelSet, LevelSetMoments};
use crate::data::AnalyticDistribution;
use crate::encoder::Encoder;
use crate::error::{Error, Result};
use crate::stats;

/// Encoder values and gradients tabulated on every grid node.
pub struct EncodedGrid {
    pub grid: Grid,
    pub values: Vec<GridField>,
    grad_x: Vec<GridField>,
    grad_y: Vec<GridField>,
}

impl EncodedGrid {
    pub fn new(encoder: &dyn Encoder, grid: Grid) -> Result<Self> {
        if encoder.input_dim() != 2 {
            return Err(Error::Dimension(format!(
                "level sets need 2-D inputs, encoder takes {}",
                encoder.input_dim()
            )));
        }
        let pts = grid.points();
        let z = encoder.encode(&pts)?;
        let jac = encoder.jacobian(&pts)?;
        let k = encoder.latent_dim();
        let field = |v: Vec<f64>| GridField::new(grid, v).expect("grid-sized field");
        Ok(Self {
            grid,
            values: (0..k).map(|c| field(z.column(c))).collect(),
            grad_x: jac.iter().map(|j| field(j.column(0))).collect(),
            grad_y: jac.iter().map(|j| field(j.column(1))).collect(),
        })
    }

    pub fn latent_dim(&self) -> usize {
        self.values.len()
    }

    /// `∇e_component` at node `idx`.
    pub fn node_gradient(&self, component: usize, idx: usize) -> [f64; 2] {
        [self.grad_x[component].values[idx], self.grad_y[component].values[idx]]
    }

    /// Bilinearly interpolated `‖∇e_component‖` at an arbitrary point.
    pub fn grad_norm(&self, component: usize, p: [f64; 2]) -> f64 {
        let gx = self.grad_x[component].interpolate(p);
        let gy = self.grad_y[component].interpolate(p);
        (gx * gx + gy * gy).sqrt()
    }

    pub fn level_set(&self, component: usize, level: f64) -> LevelSet {
        LevelSet {
            component,
            level,
            polylines: contour_polylines(&self.values[component], level),
        }
    }

    pub fn moments(
        &self,
        component: usize,
        level: f64,
        dist: &dyn AnalyticDistribution,
        coarea: bool,
    ) -> Result<LevelSetMoments> {
        let segs = contour_segments(&self.values[component], level);
        segment_moments(segs, |p| dist.density(&p), |p| self.grad_norm(component, p), coarea)
    }
}

/// Marching-squares level sets of one encoder component at each level.
pub fn extract_level_sets(
    encoder: &dyn Encoder,
    component: usize,
    levels: &[f64],
    grid: Grid,
) -> Result<Vec<LevelSet>> {
    if component >= encoder.latent_dim() {
        return Err(Error::Dimension(format!(
            "component {component} out of range for {} latents",
            encoder.latent_dim()
        )));
    }
    let enc = EncodedGrid::new(encoder, grid)?;
    Ok(levels.iter().map(|&l| enc.level_set(component, l)).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlignmentConfig {
    pub grid: Grid,
    /// Keep nodes whose density exceeds this fraction of the grid maximum.
    pub density_cutoff: f64,
    /// Components to evaluate; `None` means all.
    pub components: Option<Vec<usize>>,
    pub coarea: bool,
}

impl Default for AlignmentConfig {
    fn default() -> Self {
        Self {
            grid: Grid::alignment_default(),
            density_cutoff: 0.005,
            components: None,
            coarea: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlignmentRecord {
    pub y: [f64; 2],
    pub component: usize,
    /// `D_e(y)·(y − c)`.
    pub lhs: Vec<f64>,
    /// `D_e(y)·s(y)`.
    pub rhs: Vec<f64>,
    pub cos_abs: f64,
    pub density: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlignmentSummary {
    pub component: usize,
    pub mean: f64,
    pub std: f64,
    pub p95: f64,
    pub kept: usize,
    pub skipped: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlignmentReport {
    pub records: Vec<AlignmentRecord>,
    /// One summary per evaluated component.
    pub summaries: Vec<AlignmentSummary>,
    /// Grid nodes above the density cutoff.
    pub points_above_cutoff: usize,
}

impl AlignmentReport {
    pub fn summary(&self, component: usize) -> Option<&AlignmentSummary> {
        self.summaries.iter().find(|s| s.component == component)
    }

    /// Pools all components into one summary (`component` set to `usize::MAX`).
    pub fn pooled(&self) -> AlignmentSummary {
        let cos: Vec<f64> = self.records.iter().map(|r| r.cos_abs).collect();
        summarize(usize::MAX, &cos, self.summaries.iter().map(|s| s.skipped).sum())
    }

    /// Records as CSV followed by `#summary` rows.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("y1,y2,cos_abs,density,component\n");
        for r in &self.records {
            writeln!(s, "{},{},{},{},{}", r.y[0], r.y[1], r.cos_abs, r.density, r.component).expect("string write");
        }
        s.push_str("#summary,component,mean,std,p95,kept,skipped\n");
        for m in &self.summaries {
            writeln!(
                s,
                "#summary,{},{},{},{},{},{}",
                m.component, m.mean, m.std, m.p95, m.kept, m.skipped
            )
            .expect("string write");
        }
        s
    }
}

fn summarize(component: usize, cos: &[f64], skipped: usize) -> AlignmentSummary {
    AlignmentSummary {
        component,
        mean: stats::mean(cos),
        std: stats::std_dev(cos),
        p95: stats::percentile(cos, 95.0),
        kept: cos.len(),
        skipped,
    }
}

fn project(rows: &[[f64; 2]], v: [f64; 2]) -> Vec<f64> {
    rows.iter().map(|r| r[0] * v[0] + r[1] * v[1]).collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Compares `D_e(y)(y − c)` against `D_e(y) s(y)` at every grid node above
/// the density cutoff, where `c` is the center of mass of the component's
/// level set through `y`.
pub fn score_alignment(
    encoder: &dyn Encoder,
    dist: &dyn AnalyticDistribution,
    config: &AlignmentConfig,
) -> Result<AlignmentReport> {
    if dist.dim() != 2 {
        return Err(Error::Dimension(format!(
            "alignment needs a 2-D distribution, got {}",
            dist.dim()
        )));
    }
    let enc = EncodedGrid::new(encoder, config.grid)?;
    let k = enc.latent_dim();
    let components = config.components.clone().unwrap_or_else(|| (0..k).collect());
    if let Some(&c) = components.iter().find(|&&c| c >= k) {
        return Err(Error::Dimension(format!("component {c} out of range for {k} latents")));
    }
    let grid = config.grid;
    let density = GridField::from_fn(grid, |p| dist.density(&p));
    let threshold = config.density_cutoff * density.max();
    let kept: Vec<usize> = (0..grid.len()).filter(|&i| density.values[i] > threshold).collect();

    let mut records = Vec::new();
    let mut summaries = Vec::new();
    for &component in &components {
        let results: Vec<Option<AlignmentRecord>> = kept
            .par_iter()
            .map(|&idx| {
                let y = grid.node(idx % grid.resolution[0], idx / grid.resolution[0]);
                let rows: Vec<[f64; 2]> = (0..k).map(|c| enc.node_gradient(c, idx)).collect();
                if norm(&rows[component]) < 1e-10 {
                    return None;
                }
                let level = enc.values[component].values[idx];
                let m = enc.moments(component, level, dist, config.coarea).ok()?;
                let lhs = project(&rows, [y[0] - m.center[0], y[1] - m.center[1]]);
                let s = dist.score(&y);
                let rhs = project(&rows, [s[0], s[1]]);
                let (nl, nr) = (norm(&lhs), norm(&rhs));
                if nl < 1e-10 || nr < 1e-10 {
                    return None;
                }
                let dot: f64 = lhs.iter().zip(&rhs).map(|(a, b)| a * b).sum();
                Some(AlignmentRecord {
                    y,
                    component,
                    cos_abs: (dot / (nl * nr)).abs().min(1.0),
                    lhs,
                    rhs,
                    density: density.values[idx],
                })
            })
            .collect();
        let skipped = results.iter().filter(|r| r.is_none()).count();
        let recs: Vec<AlignmentRecord> = results.into_iter().flatten().collect();
        let cos: Vec<f64> = recs.iter().map(|r| r.cos_abs).collect();
        summaries.push(summarize(component, &cos, skipped));
        records.extend(recs);
    }
    Ok(AlignmentReport {
        records,
        summaries,
        points_above_cutoff: kept.len(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtremumReport {
    pub point: [f64; 2],
    pub component: usize,
    /// `‖y* − c‖`.
    pub center_distance: f64,
    /// `|∇e_component(y*)·(y* − c)| / ‖y* − c‖`; zero when `y* − c` is
    /// tangent to the level set.
    pub tangency: f64,
    /// `min(center_distance, tangency)`.
    pub value: f64,
}

/// For each extremum inside the grid and each component, checks whether the
/// level set through it has its center of mass at the extremum or tangent
/// to the set.
pub fn extrema_check(
    encoder: &dyn Encoder,
    dist: &dyn AnalyticDistribution,
    extrema: &[[f64; 2]],
    grid: Grid,
    coarea: bool,
) -> Result<Vec<ExtremumReport>> {
    let inside: Vec<[f64; 2]> = extrema.iter().copied().filter(|p| grid.contains(p)).collect();
    if inside.is_empty() {
        return Ok(Vec::new());
    }
    let enc = EncodedGrid::new(encoder, grid)?;
    let pts = crate::nn::Tensor::from_vec(inside.len(), 2, inside.iter().flatten().copied().collect())?;
    let z = encoder.encode(&pts)?;
    let jac = encoder.jacobian(&pts)?;
    let mut out = Vec::new();
    for (i, &p) in inside.iter().enumerate() {
        for c in 0..enc.latent_dim() {
            let Ok(m) = enc.moments(c, z[(i, c)], dist, coarea) else {
                continue;
            };
            let d = [p[0] - m.center[0], p[1] - m.center[1]];
            let center_distance = (d[0] * d[0] + d[1] * d[1]).sqrt();
            let g = jac[c].row(i);
            let tangency = if center_distance > 0.0 {
                (g[0] * d[0] + g[1] * d[1]).abs() / center_distance
            } else {
                0.0
            };
            out.push(ExtremumReport {
                point: p,
                component: c,
                center_distance,
                tangency,
                value: center_distance.min(tangency),
            });
        }
    }
    Ok(out)
}
