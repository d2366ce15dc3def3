use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Tensor;

/// Regular lattice of nodes over an axis-aligned rectangle in the plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub lo: [f64; 2],
    pub hi: [f64; 2],
    /// Nodes per axis.
    pub resolution: [usize; 2],
}

impl Grid {
    pub fn new(lo: [f64; 2], hi: [f64; 2], resolution: [usize; 2]) -> Result<Self> {
        if resolution.iter().any(|&r| r < 2) {
            return Err(Error::Config(format!(
                "grid needs at least 2 nodes per axis, got {resolution:?}"
            )));
        }
        if lo.iter().chain(&hi).any(|v| !v.is_finite()) || lo[0] >= hi[0] || lo[1] >= hi[1] {
            return Err(Error::Config(format!("bad grid bounds {lo:?}..{hi:?}")));
        }
        Ok(Self { lo, hi, resolution })
    }

    /// `n×n` nodes over `[lo, hi]²`.
    pub fn square(lo: f64, hi: f64, n: usize) -> Result<Self> {
        Self::new([lo, lo], [hi, hi], [n, n])
    }

    /// The 100×100 window over `[−4, 4]²` used for the alignment tables.
    pub fn alignment_default() -> Self {
        Self::square(-4.0, 4.0, 100).expect("valid default grid")
    }

    pub fn spacing(&self) -> [f64; 2] {
        [
            (self.hi[0] - self.lo[0]) / (self.resolution[0] - 1) as f64,
            (self.hi[1] - self.lo[1]) / (self.resolution[1] - 1) as f64,
        ]
    }

    pub fn len(&self) -> usize {
        self.resolution[0] * self.resolution[1]
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Node `(i, j)`: `i` along x, `j` along y. Index is `j·nx + i`.
    pub fn node(&self, i: usize, j: usize) -> [f64; 2] {
        let h = self.spacing();
        [self.lo[0] + i as f64 * h[0], self.lo[1] + j as f64 * h[1]]
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.resolution[0] + i
    }

    /// All nodes as an `len×2` matrix in index order.
    pub fn points(&self) -> Tensor {
        let [nx, ny] = self.resolution;
        let mut data = Vec::with_capacity(2 * nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                data.extend(self.node(i, j));
            }
        }
        Tensor::from_vec(nx * ny, 2, data).expect("grid shape")
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p[0] >= self.lo[0] && p[0] <= self.hi[0] && p[1] >= self.lo[1] && p[1] <= self.hi[1]
    }
}

/// Scalar values on the nodes of a [`Grid`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridField {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl GridField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Dimension(format!(
                "grid has {} nodes, got {} values",
                grid.len(),
                values.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: Grid, f: impl Fn([f64; 2]) -> f64) -> Self {
        let [nx, ny] = grid.resolution;
        let mut values = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                values.push(f(grid.node(i, j)));
            }
        }
        Self { grid, values }
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Bilinear interpolation; points outside the window are clamped to it.
    pub fn interpolate(&self, p: [f64; 2]) -> f64 {
        let [nx, ny] = self.grid.resolution;
        let h = self.grid.spacing();
        let locate = |v: f64, lo: f64, h: f64, n: usize| {
            let t = ((v - lo) / h).clamp(0.0, (n - 1) as f64);
            let c = (t.floor() as usize).min(n - 2);
            (c, t - c as f64)
        };
        let (i, fx) = locate(p[0], self.grid.lo[0], h[0], nx);
        let (j, fy) = locate(p[1], self.grid.lo[1], h[1], ny);
        let v00 = self.at(i, j);
        let v10 = self.at(i + 1, j);
        let v01 = self.at(i, j + 1);
        let v11 = self.at(i + 1, j + 1);
        (1.0 - fy) * ((1.0 - fx) * v00 + fx * v10) + fy * ((1.0 - fx) * v01 + fx * v11)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_degenerate_grids() {
        assert!(Grid::square(0.0, 1.0, 1).is_err());
        assert!(Grid::square(1.0, 1.0, 5).is_err());
        assert!(Grid::new([0.0, f64::NAN], [1.0, 1.0], [3, 3]).is_err());
    }

    #[test]
    fn bilinear_is_exact_on_bilinear_fields() {
        let grid = Grid::square(-1.0, 2.0, 7).unwrap();
        let f = |p: [f64; 2]| 1.0 + 2.0 * p[0] - p[1] + 0.5 * p[0] * p[1];
        let field = GridField::from_fn(grid, f);
        for p in [[0.13, 0.77], [-1.0, 2.0], [1.99, -0.5]] {
            assert!((field.interpolate(p) - f(p)).abs() < 1e-12);
        }
    }

    #[test]
    fn points_follow_index_order() {
        let grid = Grid::new([0.0, 10.0], [1.0, 12.0], [3, 2]).unwrap();
        let pts = grid.points();
        assert_eq!(pts.row(grid.index(2, 1)), &[1.0, 12.0]);
        assert_eq!(pts.row(1), &[0.5, 10.0]);
    }
}
