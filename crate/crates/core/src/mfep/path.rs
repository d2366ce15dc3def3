use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats;

/// Ordered planar polyline with cumulative arc length.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Path {
    points: Vec<[f64; 2]>,
    arc: Vec<f64>,
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

impl Path {
    pub fn new(points: Vec<[f64; 2]>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::Dimension(format!(
                "a path needs at least 2 points, got {}",
                points.len()
            )));
        }
        if points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("path contains non-finite points".into()));
        }
        let mut arc = Vec::with_capacity(points.len());
        arc.push(0.0);
        for w in points.windows(2) {
            let last = *arc.last().expect("nonempty");
            arc.push(last + dist(w[0], w[1]));
        }
        Ok(Self { points, arc })
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    pub fn arc_lengths(&self) -> &[f64] {
        &self.arc
    }

    pub fn length(&self) -> f64 {
        *self.arc.last().expect("nonempty")
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn first(&self) -> [f64; 2] {
        self.points[0]
    }

    pub fn last(&self) -> [f64; 2] {
        *self.points.last().expect("nonempty")
    }

    /// Point at arc length `s`, by linear interpolation.
    pub fn at_arc(&self, s: f64) -> [f64; 2] {
        let s = s.clamp(0.0, self.length());
        let i = self.arc.partition_point(|&a| a < s).clamp(1, self.points.len() - 1);
        let (a0, a1) = (self.arc[i - 1], self.arc[i]);
        let t = if a1 > a0 { (s - a0) / (a1 - a0) } else { 0.0 };
        let (p, q) = (self.points[i - 1], self.points[i]);
        [p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]
    }

    /// `n ≥ 2` points equally spaced in arc length.
    pub fn resample(&self, n: usize) -> Path {
        let n = n.max(2);
        let total = self.length();
        let pts = (0..n).map(|i| self.at_arc(total * i as f64 / (n - 1) as f64)).collect();
        Path::new(pts).expect("resampled path is valid")
    }

    pub fn reversed(&self) -> Path {
        let mut pts = self.points.clone();
        pts.reverse();
        Path::new(pts).expect("reversed path is valid")
    }
}

/// Distances between an extracted path and the reference MFEP.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathMetrics {
    pub chamfer: f64,
    pub hausdorff: f64,
    /// Larger of the two directed 95th percentiles.
    pub p95: f64,
    /// Mean distance from MFEP points to the path.
    pub d_mfep_to_path: f64,
    /// Mean distance from path points to the MFEP.
    pub d_path_to_mfep: f64,
}

/// Distance from `p` to the polyline through `line` (a single point counts
/// as a degenerate polyline).
pub fn point_to_polyline(p: [f64; 2], line: &[[f64; 2]]) -> f64 {
    if line.len() == 1 {
        return dist(p, line[0]);
    }
    line.windows(2)
        .map(|w| {
            let (a, b) = (w[0], w[1]);
            let ab = [b[0] - a[0], b[1] - a[1]];
            let len2 = ab[0] * ab[0] + ab[1] * ab[1];
            let t = if len2 > 0.0 {
                (((p[0] - a[0]) * ab[0] + (p[1] - a[1]) * ab[1]) / len2).clamp(0.0, 1.0)
            } else {
                0.0
            };
            dist(p, [a[0] + t * ab[0], a[1] + t * ab[1]])
        })
        .fold(f64::INFINITY, f64::min)
}

/// Directed distances from every vertex of `from` to the polyline `to`.
pub fn directed_distances(from: &[[f64; 2]], to: &[[f64; 2]]) -> Vec<f64> {
    from.iter().map(|&p| point_to_polyline(p, to)).collect()
}

/// Chamfer, Hausdorff and 95th-percentile distances between two point
/// sequences, measured point-to-polyline in both directions.
pub fn path_metrics(path: &[[f64; 2]], mfep: &[[f64; 2]]) -> Result<PathMetrics> {
    if path.is_empty() || mfep.is_empty() {
        return Err(Error::Dimension("path metrics need nonempty paths".into()));
    }
    let fwd = directed_distances(path, mfep);
    let bwd = directed_distances(mfep, path);
    let d_path_to_mfep = stats::mean(&fwd);
    let d_mfep_to_path = stats::mean(&bwd);
    let max = |v: &[f64]| v.iter().copied().fold(0.0, f64::max);
    Ok(PathMetrics {
        chamfer: 0.5 * (d_path_to_mfep + d_mfep_to_path),
        hausdorff: max(&fwd).max(max(&bwd)),
        p95: stats::percentile(&fwd, 95.0).max(stats::percentile(&bwd, 95.0)),
        d_mfep_to_path,
        d_path_to_mfep,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arc_length_and_resampling() {
        let p = Path::new(vec![[0.0, 0.0], [3.0, 0.0], [3.0, 4.0]]).unwrap();
        assert_eq!(p.arc_lengths(), &[0.0, 3.0, 7.0]);
        let r = p.resample(8);
        assert_eq!(r.len(), 8);
        assert!((r.length() - 7.0).abs() < 1e-12);
        assert_eq!(p.at_arc(5.0), [3.0, 2.0]);
        assert!(Path::new(vec![[0.0, 0.0]]).is_err());
    }

    #[test]
    fn single_point_versus_segment() {
        let seg = [[0.0, 0.0], [2.0, 0.0]];
        let m = path_metrics(&[[1.0, 0.5]], &seg).unwrap();
        assert!((m.d_path_to_mfep - 0.5).abs() < 1e-15);
        // far end of the segment from the point: sqrt(1 + 0.25)
        assert!((m.hausdorff - 1.25f64.sqrt()).abs() < 1e-15);
    }
}
