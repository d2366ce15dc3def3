//! Minimum free-energy paths: the string-method reference, encoder-based
//! path extraction, path distances, and the multi-seed comparison protocol.

mod extract;
mod path;
mod protocol;
mod string;

pub use extract::{best_parameterizing_component, component_r2, extract_path, ExtractMethod, ExtractedPath};
pub use path::{directed_distances, path_metrics, point_to_polyline, Path, PathMetrics};
pub use protocol::{evaluate_encoder, protocol_csv, seed_protocol, ExtractionConfig, MeanSd, ProtocolRow, SeedOutcome};
pub use string::{string_method, string_method_from, tangency, StringConfig};
