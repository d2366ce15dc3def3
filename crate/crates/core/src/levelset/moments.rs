use serde::{Deserialize, Serialize};

use super::contour::Segment;
use crate::error::{Error, Result};

/// Encoder level set for one component: `{y : e_component(y) = level}`
/// inside the grid window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelSet {
    pub component: usize,
    pub level: f64,
    pub polylines: Vec<Vec<[f64; 2]>>,
}

impl LevelSet {
    pub fn segments(&self) -> impl Iterator<Item = Segment> + '_ {
        self.polylines.iter().flat_map(|l| l.windows(2).map(|w| (w[0], w[1])))
    }

    pub fn is_empty(&self) -> bool {
        self.polylines.is_empty()
    }

    pub fn length(&self) -> f64 {
        self.segments().map(|(a, b)| dist(a, b)).sum()
    }
}

/// Density-weighted moments of a level set: mass `Z`, center of mass `c`,
/// and unnormalized variance `V = ∫‖y − c‖² P δ(e(y) − e(X)) dy`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelSetMoments {
    pub mass: f64,
    pub center: [f64; 2],
    pub variance: f64,
}

impl LevelSetMoments {
    /// Radius of the critical shell, `√(V/Z)`.
    pub fn critical_radius(&self) -> f64 {
        (self.variance / self.mass).sqrt()
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Discretized line integrals over contour segments. Each segment carries
/// weight `P(mid)·length/‖∇e(mid)‖`, or `P(mid)·length` with `coarea` off.
/// Segments where the gradient vanishes are dropped.
pub fn segment_moments<I>(
    segments: I,
    density: impl Fn([f64; 2]) -> f64,
    grad_norm: impl Fn([f64; 2]) -> f64,
    coarea: bool,
) -> Result<LevelSetMoments>
where
    I: IntoIterator<Item = Segment>,
{
    let mut weighted: Vec<([f64; 2], f64)> = Vec::new();
    for (a, b) in segments {
        let len = dist(a, b);
        if len == 0.0 {
            continue;
        }
        let mid = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
        let mut w = density(mid) * len;
        if coarea {
            let g = grad_norm(mid);
            if !(g > 1e-12) {
                continue;
            }
            w /= g;
        }
        if w > 0.0 && w.is_finite() {
            weighted.push((mid, w));
        }
    }
    let mass: f64 = weighted.iter().map(|(_, w)| w).sum();
    if !(mass > 0.0) {
        return Err(Error::DegenerateLevelSet("zero weight on level set".into()));
    }
    let mut center = [0.0; 2];
    for (p, w) in &weighted {
        center[0] += w * p[0];
        center[1] += w * p[1];
    }
    center = [center[0] / mass, center[1] / mass];
    let variance = weighted
        .iter()
        .map(|(p, w)| w * ((p[0] - center[0]).powi(2) + (p[1] - center[1]).powi(2)))
        .sum();
    Ok(LevelSetMoments { mass, center, variance })
}

/// Moments of an extracted [`LevelSet`].
pub fn level_set_moments(
    ls: &LevelSet,
    density: impl Fn([f64; 2]) -> f64,
    grad_norm: impl Fn([f64; 2]) -> f64,
    coarea: bool,
) -> Result<LevelSetMoments> {
    if ls.polylines.iter().all(|l| l.len() < 2) {
        return Err(Error::DegenerateLevelSet(format!(
            "level {} of component {} has no segments",
            ls.level, ls.component
        )));
    }
    segment_moments(ls.segments(), density, grad_norm, coarea)
}
