use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::entropy::conditional_entropy;
use super::intrinsic::{id_drop, Quantiles};
use super::regress::{regress_r2, R2Report, RegressionConfig};
use crate::error::{Error, Result};
use crate::nn::Tensor;

/// Informative block `Z`, extraneous block `U` and the data `X` they encode.
#[derive(Clone, Debug)]
pub struct LatentSplit {
    pub z: Tensor,
    pub u: Tensor,
    pub x: Tensor,
}

impl LatentSplit {
    pub fn new(z: Tensor, u: Tensor, x: Tensor) -> Result<Self> {
        if z.rows() != u.rows() || z.rows() != x.rows() {
            return Err(Error::Dimension("Z, U and X need equal row counts".into()));
        }
        if z.cols() == 0 {
            return Err(Error::Config("the informative block needs at least one column".into()));
        }
        Ok(Self { z, u, x })
    }

    /// Splits a latent matrix after its first `informative` columns.
    pub fn from_latents(latents: &Tensor, informative: usize, x: Tensor) -> Result<Self> {
        if informative == 0 || informative >= latents.cols() {
            return Err(Error::Config(format!(
                "need 1 <= informative < {} latents, got {informative}",
                latents.cols()
            )));
        }
        Self::new(
            latents.select_cols(0, informative),
            latents.select_cols(informative, latents.cols()),
            x,
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeterminismConfig {
    pub regression: RegressionConfig,
    pub id_neighbours: usize,
    pub bootstrap: usize,
    pub entropy_neighbours: usize,
    pub seed: u64,
}

impl Default for DeterminismConfig {
    fn default() -> Self {
        Self {
            regression: RegressionConfig::default(),
            id_neighbours: 20,
            bootstrap: 200,
            entropy_neighbours: 5,
            seed: 42,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeterminismReport {
    pub r2: R2Report,
    pub id_drop: Quantiles,
    pub conditional_entropy: f64,
}

/// Is `U` a deterministic function of `Z`? R², intrinsic-dimension drop and
/// `H(U | Z)` together.
pub fn determinism_report(z: &Tensor, u: &Tensor, cfg: &DeterminismConfig) -> Result<DeterminismReport> {
    Ok(DeterminismReport {
        r2: regress_r2(u, z, &cfg.regression)?,
        id_drop: id_drop(z, u, cfg.id_neighbours, cfg.bootstrap, cfg.seed)?,
        conditional_entropy: conditional_entropy(u, z, cfg.entropy_neighbours)?,
    })
}

/// Table-shaped CSV, one row per labelled report.
pub fn determinism_csv(rows: &[(String, DeterminismReport)]) -> String {
    let mut s = String::from(
        "dataset,r2,r2_polynomial,r2_spline,r2_forest,id_drop_q025,id_drop_q50,id_drop_q975,h_u_given_z\n",
    );
    for (name, r) in rows {
        writeln!(
            s,
            "{name},{},{},{},{},{},{},{},{}",
            r.r2.best,
            r.r2.polynomial,
            r.r2.spline,
            r.r2.forest,
            r.id_drop.q025,
            r.id_drop.q50,
            r.id_drop.q975,
            r.conditional_entropy
        )
        .expect("string write");
    }
    s
}
