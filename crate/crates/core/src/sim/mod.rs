//! Event-level Monte Carlo of the two-station experiment, plus a bin-level
//! downtime process used to check the frame chains.

mod bins;
mod compare;
mod detector;
mod ppm;

pub use bins::{pattern_counts, simulate_frame_patterns, valid_symbol_transitions};
pub use compare::{compare, run_experiment, Comparison, ComparisonRow, Experiment};
pub use detector::{
    detect, generate_pair_stream, DetectOptions, Detection, DetectionRecord, Origin, Station,
};
pub use ppm::{
    bin_frames, empirical_stats, frame_count, locate, ppm_extract, EmpiricalStats, Estimate,
    FrameOccupancy, PpmExtraction, RawBits,
};
