//! Graph completions: unit-speed space-time curves covering the graph of a
//! control, their clocks, and feasibility checks.

pub mod bridge;
pub mod build;
pub mod curve;
pub mod segment;
pub mod spacetime;

pub use bridge::whitney_bridge;
pub use build::{build_completion, clock_from_samples, completion_from_curve, CompletionOptions, CompletionResult, Partition, SegmentRecord};
pub use curve::{SpaceTimePath, StPiece};
pub use segment::{complete_segment, SegmentCompletion, SegmentLengths};
pub use spacetime::{arc_length_reparam, verify_feasibility, FeasibilityReport, Horizon, RawCurve, SpaceTimeControl};
