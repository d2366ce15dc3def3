use std::f64::consts::PI;

use rand::Rng as _;
use rand_distr::StandardNormal as Normal01;

use crate::error::{Error, Result};
use crate::nn::Tensor;
use crate::rng::seeded;

/// Low-dimensional manifolds embedded in two or three ambient dimensions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ManifoldKind {
    GaussianLine,
    Parabola,
    Exponential,
    HelixSlice,
    GridSum,
    SCurve,
    SwissRoll,
}

impl ManifoldKind {
    pub const ALL: [ManifoldKind; 7] = [
        ManifoldKind::GaussianLine,
        ManifoldKind::Parabola,
        ManifoldKind::Exponential,
        ManifoldKind::HelixSlice,
        ManifoldKind::GridSum,
        ManifoldKind::SCurve,
        ManifoldKind::SwissRoll,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ManifoldKind::GaussianLine => "gaussian_line",
            ManifoldKind::Parabola => "parabola",
            ManifoldKind::Exponential => "exponential",
            ManifoldKind::HelixSlice => "helix_slice",
            ManifoldKind::GridSum => "grid_sum",
            ManifoldKind::SCurve => "s_curve",
            ManifoldKind::SwissRoll => "swiss_roll",
        }
    }

    pub fn ambient_dim(self) -> usize {
        match self {
            ManifoldKind::GaussianLine | ManifoldKind::Parabola | ManifoldKind::Exponential => 2,
            _ => 3,
        }
    }

    pub fn intrinsic_dim(self) -> usize {
        match self {
            ManifoldKind::GaussianLine | ManifoldKind::Parabola | ManifoldKind::Exponential => 1,
            _ => 2,
        }
    }
}

impl std::str::FromStr for ManifoldKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ManifoldKind::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| {
            let names: Vec<_> = ManifoldKind::ALL.iter().map(|k| k.name()).collect();
            Error::Config(format!("unknown manifold dataset `{s}`; expected one of {names:?}"))
        })
    }
}

/// Direction of the Gaussian line and the unit normal used for its noise.
pub const LINE_DIRECTION: [f64; 2] = [0.8, 0.6];
pub const LINE_NORMAL: [f64; 2] = [-0.6, 0.8];
/// Standard deviation of the off-line perturbation.
pub const LINE_NOISE: f64 = 0.05;

/// Samples on the manifold together with the intrinsic coordinates and the
/// noise that was added (zero rows for noiseless manifolds).
#[derive(Clone, Debug)]
pub struct ManifoldSample {
    pub kind: ManifoldKind,
    pub points: Tensor,
    pub params: Tensor,
    pub noise: Tensor,
}

impl ManifoldSample {
    pub fn clean_points(&self) -> Tensor {
        let data = self
            .points
            .as_slice()
            .iter()
            .zip(self.noise.as_slice())
            .map(|(p, e)| p - e)
            .collect();
        Tensor::from_vec(self.points.rows(), self.points.cols(), data).expect("same shape")
    }
}

pub fn manifold_dataset(kind: ManifoldKind, n: usize, seed: u64) -> ManifoldSample {
    let mut rng = seeded(seed);
    let p = kind.ambient_dim();
    let k = kind.intrinsic_dim();
    let mut points = Tensor::zeros(n, p);
    let mut params = Tensor::zeros(n, k);
    let mut noise = Tensor::zeros(n, p);
    for i in 0..n {
        let u: f64 = rng.random();
        let v: f64 = rng.random();
        let row: Vec<f64> = match kind {
            ManifoldKind::GaussianLine => {
                let t: f64 = rng.sample(Normal01);
                let e: f64 = LINE_NOISE * rng.sample::<f64, _>(Normal01);
                params[(i, 0)] = t;
                noise[(i, 0)] = e * LINE_NORMAL[0];
                noise[(i, 1)] = e * LINE_NORMAL[1];
                vec![
                    t * LINE_DIRECTION[0] + e * LINE_NORMAL[0],
                    t * LINE_DIRECTION[1] + e * LINE_NORMAL[1],
                ]
            }
            ManifoldKind::Parabola => {
                let t = -1.5 + 3.0 * u;
                params[(i, 0)] = t;
                vec![t, t * t]
            }
            ManifoldKind::Exponential => {
                let t = -1.5 + 3.0 * u;
                params[(i, 0)] = t;
                vec![t, t.exp()]
            }
            ManifoldKind::HelixSlice => {
                let t = 2.0 * PI * u;
                let r = 0.5 + v;
                params[(i, 0)] = t;
                params[(i, 1)] = r;
                vec![r * t.cos(), r * t.sin(), t]
            }
            ManifoldKind::GridSum => {
                let x = -1.0 + 2.0 * u;
                let y = -1.0 + 2.0 * v;
                params[(i, 0)] = x;
                params[(i, 1)] = y;
                vec![x, y, x + y]
            }
            ManifoldKind::SCurve => {
                // scikit-learn's make_s_curve without noise
                let t = 3.0 * PI * (u - 0.5);
                let h = 2.0 * v;
                params[(i, 0)] = t;
                params[(i, 1)] = h;
                vec![t.sin(), h, t.signum() * (t.cos() - 1.0)]
            }
            ManifoldKind::SwissRoll => {
                // scikit-learn's make_swiss_roll without noise
                let t = 1.5 * PI * (1.0 + 2.0 * u);
                let h = 21.0 * v;
                params[(i, 0)] = t;
                params[(i, 1)] = h;
                vec![t * t.cos(), h, t * t.sin()]
            }
        };
        points.row_mut(i).copy_from_slice(&row);
    }
    ManifoldSample {
        kind,
        points,
        params,
        noise,
    }
}
