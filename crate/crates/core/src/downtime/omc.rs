//! Output chain over PPM symbols and the compression ratio it implies.

use serde::Serialize;

use super::chain::{ChainKind, FrameChain, StateLabel, StationaryOptions, Transitions};
use super::imc::{check_nd, check_p, select_method, triplet_row, ImcMethod};
use crate::{Error, Result};

/// Frame outcomes grouped by the downtime `r` leaking into the frame:
/// `valid[r][j]` is the probability of a valid frame with symbol `j`,
/// `invalid[r][r2]` of an invalid frame that leaks `r2` bins onward.
#[derive(Debug, Clone)]
pub(crate) struct LeakSplit {
    pub valid: Vec<Vec<f64>>,
    pub invalid: Vec<Vec<f64>>,
}

pub(crate) fn leak_split(n: usize, d: usize, p: f64) -> LeakSplit {
    let mut valid = vec![vec![0.0; n]; d + 1];
    let mut invalid = vec![vec![0.0; d + 1]; d + 1];
    for r in 0..=d {
        for c in triplet_row(n, d, p, r) {
            if c.ones() != 1 {
                invalid[r][c.leak_out(d)] += c.prob;
            } else if c.tail > 0 {
                valid[r][n - c.tail] += c.prob;
            } else {
                // single detection anywhere it leaves no downtime behind
                let lo = r;
                let hi = n - 1 - d;
                let share = c.prob / (hi - lo + 1) as f64;
                for v in &mut valid[r][lo..=hi] {
                    *v += share;
                }
            }
        }
    }
    LeakSplit { valid, invalid }
}

/// Downtime left in the next frame after a detection in bin `symbol`.
pub fn residual_downtime(n: usize, d: usize, symbol: usize) -> usize {
    d.saturating_sub(n - 1 - symbol)
}

/// Distribution of the next valid symbol from each leak-in value,
/// marginalizing over any run of invalid frames.
///
/// The transient system `A = V + W A` is solved by state reduction, keeping
/// every quantity a sum of non-negative terms so that nearly-certain
/// invalid frames do not cancel.
pub(crate) fn absorb(split: &LeakSplit) -> Result<Vec<Vec<f64>>> {
    let LeakSplit { valid, invalid } = split;
    let mut w = invalid.clone();
    let mut v = valid.clone();
    let m = w.len();
    let mut exit = vec![0.0; m];
    for k in (0..m).rev() {
        let s: f64 = w[k][..k].iter().sum::<f64>() + v[k].iter().sum::<f64>();
        if !(s > 0.0) {
            return Err(Error::Absorption { residual: k });
        }
        exit[k] = s;
        for i in 0..k {
            let f = w[i][k] / s;
            if f == 0.0 {
                continue;
            }
            let (head, tail) = w.split_at_mut(k);
            for (x, &y) in head[i][..k].iter_mut().zip(&tail[0][..k]) {
                *x += f * y;
            }
            let (vh, vt) = v.split_at_mut(k);
            for (x, &y) in vh[i].iter_mut().zip(&vt[0]) {
                *x += f * y;
            }
            w[i][k] = 0.0;
        }
    }
    let mut a: Vec<Vec<f64>> = Vec::with_capacity(m);
    for k in 0..m {
        let mut row = v[k].clone();
        for (j, aj) in a.iter().enumerate() {
            let f = w[k][j];
            if f != 0.0 {
                for (x, &y) in row.iter_mut().zip(aj) {
                    *x += f * y;
                }
            }
        }
        row.iter_mut().for_each(|x| *x /= exit[k]);
        let total: f64 = row.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Absorption { residual: k });
        }
        a.push(row);
    }
    Ok(a)
}

/// Chain over emitted PPM symbols: from symbol `i` the next valid frame's
/// symbol, given the downtime that `i` leaves behind.
pub fn build_omc(n: usize, d: usize, p: f64) -> Result<FrameChain> {
    check_nd(n, d)?;
    check_p(p)?;
    let next = absorb(&leak_split(n, d, p))?;
    let rows = next
        .into_iter()
        .map(|r| r.into_iter().enumerate().collect())
        .collect();
    let row_of: Vec<usize> = (0..n).map(|i| residual_downtime(n, d, i)).collect();
    let labels = (0..n)
        .map(|i| StateLabel::Symbol {
            symbol: i,
            residual: row_of[i],
        })
        .collect();
    let transitions = Transitions::new(rows, row_of)?;
    Ok(FrameChain::new(
        ChainKind::Omc,
        (n, d, p),
        labels,
        transitions,
        vec![(n as f64).log2(); n],
        vec![true; n],
    ))
}

/// Entropy rate of the output chain per valid frame, relative to `log2 n`.
pub fn compression_ratio(omc: &FrameChain) -> Result<f64> {
    if omc.kind != ChainKind::Omc {
        return Err(Error::Undefined("compression ratio of a non-output chain"));
    }
    if omc.n < 2 {
        return Err(Error::Undefined("compression ratio with a single bin"));
    }
    let st = omc.stationary(StationaryOptions::default())?;
    Ok((st.entropy_rate / (omc.n as f64).log2()).clamp(0.0, 1.0))
}

/// Markov chain of the downtime leaking into successive frames.
pub(crate) struct LeakChain {
    pub transitions: Transitions,
    /// Probability of a valid frame given each leak-in value.
    pub valid_given: Vec<f64>,
}

pub(crate) fn leak_chain(n: usize, d: usize, p: f64) -> Result<LeakChain> {
    let split = leak_split(n, d, p);
    let mut rows = Vec::with_capacity(d + 1);
    let mut valid_given = Vec::with_capacity(d + 1);
    for r in 0..=d {
        let mut row = split.invalid[r].clone();
        for (j, &pv) in split.valid[r].iter().enumerate() {
            row[residual_downtime(n, d, j)] += pv;
        }
        rows.push(row);
        valid_given.push(split.valid[r].iter().sum());
    }
    let transitions = Transitions::from_dense(&rows)?;
    Ok(LeakChain {
        transitions,
        valid_given,
    })
}

/// Long-run probability that a frame is PPM-valid.
pub fn stationary_valid_prob(n: usize, d: usize, p: f64) -> Result<f64> {
    check_nd(n, d)?;
    check_p(p)?;
    let lc = leak_chain(n, d, p)?;
    let st = lc.transitions.stationary(StationaryOptions::default())?;
    Ok(st
        .distribution
        .iter()
        .zip(&lc.valid_given)
        .map(|(a, b)| a * b)
        .sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AdjustedRate {
    pub n: usize,
    pub d: usize,
    pub p: f64,
    /// Method the input chain would be built with, and its state count.
    pub method: ImcMethod,
    pub states: u64,
    pub valid_frame_prob: f64,
    /// PPM bits per frame before compression.
    pub raw_rate: f64,
    pub c_dr: f64,
    /// `raw_rate * c_dr`.
    pub adjusted_rate: f64,
}

/// Raw PPM rate with downtime, scaled by the compression ratio.
pub fn adjusted_rate(n: usize, d: usize, p: f64) -> Result<AdjustedRate> {
    let method = select_method(n, d)?;
    let states = match method {
        ImcMethod::Bmcm => super::imc::bmcm_state_count(n, d)?,
        ImcMethod::Rmcm => super::imc::rmcm_state_count(n, d)?,
    };
    let valid = stationary_valid_prob(n, d, p)?;
    let raw = valid * (n as f64).log2();
    let c_dr = if n >= 2 {
        compression_ratio(&build_omc(n, d, p)?)?
    } else {
        1.0
    };
    Ok(AdjustedRate {
        n,
        d,
        p,
        method,
        states,
        valid_frame_prob: valid,
        raw_rate: raw,
        c_dr,
        adjusted_rate: raw * c_dr,
    })
}
