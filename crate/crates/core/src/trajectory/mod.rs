//! Trajectory logging, segmentation into training records, and group-relative advantages.

mod grpo;
mod log;
mod segment;

pub use grpo::{clipped_surrogate_term, group_advantages, group_objective, segment_advantages, ADVANTAGE_EPSILON};
pub use log::{
    CallClass, Outcome, StepRecord, StoreEvent, StoreOp, TrajectoryError, TrajectoryHeader, TrajectoryLog,
    TrajectoryTerminal, TRAJECTORY_SCHEMA,
};
pub use segment::{
    export_segments, import_segments, segment, SegmentMessage, SegmentRecord, SegmentationError,
};
