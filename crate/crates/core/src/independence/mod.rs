//! Conditional-independence and determinism diagnostics for latent splits.

mod crt;
mod dcor;
mod entropy;
mod gp;
mod hsic;
mod intrinsic;
mod kernel;
mod knn;
mod mi;
mod regress;
mod report;

pub use crt::{crt_p_value, double_crt, gp_sampler, ks_uniform, ConditionalSampler, CrtConfig, CrtReport, Decoder};
pub use dcor::{distance_correlation, CONDITIONAL_SUBSAMPLE};
pub use entropy::{conditional_entropy, kl_entropy};
pub use gp::{GpFit, GpHyper};
pub use hsic::{hsic, hsic_permutation_test, PermutationTest};
pub use intrinsic::{id_drop, levina_bickel_id, levina_bickel_pointwise, Quantiles};
pub use mi::{knn_mutual_information, ksg_pair};
pub use regress::{regress_r2, R2Report, RegressionConfig};
pub use report::{determinism_csv, determinism_report, DeterminismConfig, DeterminismReport, LatentSplit};
