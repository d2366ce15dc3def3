//! Encoder level sets on a planar grid, their density-weighted moments, and
//! the score-alignment and extrema diagnostics built on them.

mod alignment;
mod contour;
mod grid;
mod moments;

pub use alignment::{
    extract_level_sets, extrema_check, score_alignment, AlignmentConfig, AlignmentRecord, AlignmentReport,
    AlignmentSummary, EncodedGrid, ExtremumReport,
};
pub use contour::{contour_polylines, contour_segments, Segment};
pub use grid::{Grid, GridField};
pub use moments::{level_set_moments, segment_moments, LevelSet, LevelSetMoments};
