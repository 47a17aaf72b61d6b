//! Detector downtime: frame-level Markov chains, the output chain over PPM
//! symbols and the compression ratio that downtime forces on the key.

mod chain;
mod detector;
mod imc;
mod omc;

use std::io::Write;

pub use chain::{
    stationary_distribution, ChainKind, FrameChain, StateLabel, StationaryOptions,
    StationaryResult, Transitions,
};
pub use detector::{build_detector_chain, detector_chain_bound, DetectorBound};
pub use imc::{
    bmcm_state_count, build_imc, build_imc_with_limit, frame_distribution, raw_rate,
    rmcm_state_count, rule_of_thumb, select_method, valid_frame_prob, ImcMethod,
    DEFAULT_STATE_LIMIT,
};
pub use omc::{
    adjusted_rate, build_omc, compression_ratio, residual_downtime, stationary_valid_prob,
    AdjustedRate,
};

pub const DOWNTIME_CSV_HEADER: &str = "n,d,p,states,raw_rate,c_dr,adjusted_rate";

pub fn write_downtime_csv<W: Write>(mut w: W, rows: &[AdjustedRate]) -> std::io::Result<()> {
    writeln!(w, "{DOWNTIME_CSV_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            r.n, r.d, r.p, r.states, r.raw_rate, r.c_dr, r.adjusted_rate
        )?;
    }
    Ok(())
}
