//! Bin-by-bin detector chain and the entropy bound it gives.

use serde::Serialize;

use super::chain::{ChainKind, FrameChain, StateLabel, Transitions};
use super::imc::check_p;
use crate::params::binary_entropy;
use crate::{Error, Result};

/// Entropy-rate bound of the detector process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetectorBound {
    /// `h(p) / (1 + p d)` bits per bin.
    pub per_bin: f64,
    /// `n h(p) / (1 + p d)` bits per frame.
    pub per_frame: f64,
    /// `h(p) / (n (1 + p d))`, the per-frame form with `n` in the denominator.
    pub as_printed: f64,
}

pub fn detector_chain_bound(p: f64, d: usize, n: usize) -> Result<DetectorBound> {
    if n < 1 {
        return Err(Error::domain("n", n as f64, "n >= 1"));
    }
    let denom = 1.0 + p * d as f64;
    let per_bin = binary_entropy(p)? / denom;
    Ok(DetectorBound {
        per_bin,
        per_frame: n as f64 * per_bin,
        as_printed: per_bin / n as f64,
    })
}

/// States `ready, down_1 .. down_d`; a detection (probability `p` while ready)
/// starts `d` bins of downtime. Without downtime the chain is `idle, hit`.
pub fn build_detector_chain(p: f64, d: usize) -> Result<FrameChain> {
    check_p(p)?;
    let q = 1.0 - p;
    let (labels, rows) = if d == 0 {
        let row = vec![(0, q), (1, p)];
        (
            vec![StateLabel::Idle, StateLabel::Hit],
            vec![row.clone(), row],
        )
    } else {
        let mut labels = vec![StateLabel::Ready];
        let mut rows = vec![vec![(0, q), (1, p)]];
        for k in 1..=d {
            labels.push(StateLabel::Down(k));
            rows.push(vec![(if k == d { 0 } else { k + 1 }, 1.0)]);
        }
        (labels, rows)
    };
    let states = labels.len();
    let transitions = Transitions::new(rows, (0..states).collect())?;
    Ok(FrameChain::new(
        ChainKind::Detector,
        (1, d, p),
        labels,
        transitions,
        vec![0.0; states],
        vec![false; states],
    ))
}
