//! Synthetic datasets with analytic densities, scores and potentials.

mod analytic;
pub mod io;
mod manifold;
mod potential;

use std::sync::Arc;

pub use analytic::{AnalyticDistribution, GaussianMixture, StandardNormal};
pub use manifold::{manifold_dataset, ManifoldKind, ManifoldSample, LINE_DIRECTION, LINE_NOISE, LINE_NORMAL};
pub use potential::{
    find_minima, langevin_sample, local_minimum, Boltzmann, DoubleWell, LangevinConfig, MuellerBrown, Potential,
    Quadratic,
};

use crate::error::Result;
use crate::nn::Tensor;

/// Default sample count for every experiment.
pub const DEFAULT_SAMPLES: usize = 10_000;

/// A sample matrix with its provenance and, when known, the analytic law
/// it was drawn from.
#[derive(Clone)]
pub struct Dataset {
    pub name: String,
    pub samples: Tensor,
    pub seed: u64,
    pub intrinsic_dim: Option<usize>,
    pub distribution: Option<Arc<dyn AnalyticDistribution>>,
}

impl std::fmt::Debug for Dataset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Dataset")
            .field("name", &self.name)
            .field("shape", &self.samples.shape())
            .field("seed", &self.seed)
            .field("intrinsic_dim", &self.intrinsic_dim)
            .finish()
    }
}

impl Dataset {
    pub fn dim(&self) -> usize {
        self.samples.cols()
    }

    pub fn len(&self) -> usize {
        self.samples.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.rows() == 0
    }

    fn from_distribution(dist: Arc<dyn AnalyticDistribution>, n: usize, seed: u64) -> Self {
        Self {
            name: dist.name().to_string(),
            samples: dist.sample(n, seed),
            seed,
            intrinsic_dim: Some(dist.dim()),
            distribution: Some(dist),
        }
    }
}

pub fn standard_normal(p: usize, n: usize, seed: u64) -> Dataset {
    Dataset::from_distribution(Arc::new(StandardNormal { dim: p.max(1) }), n, seed)
}

pub fn trimodal_mixture(n: usize, seed: u64) -> Dataset {
    Dataset::from_distribution(Arc::new(GaussianMixture::trimodal()), n, seed)
}

/// Langevin samples of the Müller–Brown Boltzmann distribution at `kt`,
/// chains started at the three minima.
pub fn mueller_brown(n: usize, kt: f64, seed: u64) -> Result<Dataset> {
    let dist = Boltzmann::mueller_brown(kt);
    let samples = dist.try_sample(n, seed)?;
    Ok(Dataset {
        name: "mueller_brown".into(),
        samples,
        seed,
        intrinsic_dim: Some(2),
        distribution: Some(Arc::new(dist)),
    })
}

pub fn manifold(name: &str, n: usize, seed: u64) -> Result<Dataset> {
    let kind: ManifoldKind = name.parse()?;
    let s = manifold_dataset(kind, n, seed);
    Ok(Dataset {
        name: kind.name().into(),
        samples: s.points,
        seed,
        intrinsic_dim: Some(kind.intrinsic_dim()),
        distribution: None,
    })
}
