//! Frame-level input chains: the basic (one state per occupancy pattern) and
//! reduced (triplet) constructions, their exact state counts, and the raw rate.

use std::collections::{BTreeMap, HashMap};

use serde::Serialize;

use super::chain::{ChainKind, FrameChain, StateLabel, StationaryResult, Transitions};
use crate::{Error, Result};

/// Default cap on the number of states a chain may be built with.
pub const DEFAULT_STATE_LIMIT: u64 = 1 << 21;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImcMethod {
    Bmcm,
    Rmcm,
}

pub(crate) fn check_nd(n: usize, d: usize) -> Result<()> {
    if n < 1 {
        return Err(Error::domain("n", n as f64, "n >= 1"));
    }
    if d > n {
        return Err(Error::domain("d", d as f64, "0 <= d <= n"));
    }
    Ok(())
}

pub(crate) fn check_p(p: f64) -> Result<()> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain("p", p, "0 < p < 1"));
    }
    Ok(())
}

/// Number of length-`n` occupancy patterns with every pair of occupied bins
/// more than `d` apart.
pub fn bmcm_state_count(n: usize, d: usize) -> Result<u64> {
    check_nd(n, d)?;
    // counts[i] = N(i - 1 - d) shifted so that every index below d+1 means N(<1) = 1
    let off = d + 1;
    let mut counts = vec![1u64; n + off];
    for m in 1..=n {
        let i = m + off - 1;
        counts[i] = counts[i - 1]
            .checked_add(counts[i - 1 - d])
            .ok_or(Error::StateCountOverflow { n, d })?;
    }
    Ok(counts[n + off - 1])
}

/// Number of triplet states: for every downtime leaking in and every tail
/// length that fixes the downtime leaking out, one state per feasible count of
/// occupied bins in the remaining region.
pub fn rmcm_state_count(n: usize, d: usize) -> Result<u64> {
    check_nd(n, d)?;
    let per = |rest: i64| -> u64 { (rest.div_euclid(d as i64 + 1) + 1) as u64 };
    let (n, dd) = (n as i64, d as i64);
    let mut total = 0u64;
    for d_i in 0..=dd {
        let mut sum = per(n - d_i);
        for d_o in (1 + dd + d_i - n).max(1)..=dd {
            sum += per((n - d_i) - (dd + 1 - d_o));
        }
        total = total
            .checked_add(sum)
            .ok_or(Error::StateCountOverflow { n: n as usize, d })?;
    }
    Ok(total)
}

/// The construction with fewer states; ties go to the reduced method.
pub fn select_method(n: usize, d: usize) -> Result<ImcMethod> {
    let r = rmcm_state_count(n, d)?;
    Ok(match bmcm_state_count(n, d) {
        Ok(b) if b < r => ImcMethod::Bmcm,
        Ok(_) | Err(Error::StateCountOverflow { .. }) => ImcMethod::Rmcm,
        Err(e) => return Err(e),
    })
}

/// Rule of thumb: the basic method once downtime exceeds half a frame.
pub fn rule_of_thumb(n: usize, d: usize) -> ImcMethod {
    if 2 * d > n {
        ImcMethod::Bmcm
    } else {
        ImcMethod::Rmcm
    }
}

fn ln_binomial(m: u64, k: u64) -> f64 {
    use libm::lgamma;
    lgamma(m as f64 + 1.0) - lgamma(k as f64 + 1.0) - lgamma((m - k) as f64 + 1.0)
}

/// `C(m, k) p^a q^b`, in log space when the binomial is too large.
pub(crate) fn weighted_binomial(m: u64, k: u64, p: f64, ones: i32, zeros: i32) -> f64 {
    let q = 1.0 - p;
    if m <= 60 {
        let mut c = 1.0f64;
        for i in 0..k {
            c = c * (m - i) as f64 / (i + 1) as f64;
        }
        c * p.powi(ones) * q.powi(zeros)
    } else {
        (ln_binomial(m, k) + ones as f64 * p.ln() + zeros as f64 * (-p).ln_1p()).exp()
    }
}

/// Groups of frames that share a triplet, reached from `leak_in` bins of
/// downtime at the frame start.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct TripletClass {
    pub leak_in: usize,
    /// Occupied bins in the free region (not counting a tail detection).
    pub k: usize,
    /// Distance from the tail detection to the frame end, 0 when there is none.
    pub tail: usize,
    /// Probability of the class given `leak_in`.
    pub prob: f64,
    /// Frames represented.
    pub configs: f64,
}

impl TripletClass {
    pub fn leak_out(&self, d: usize) -> usize {
        if self.tail > 0 {
            d + 1 - self.tail
        } else {
            0
        }
    }

    pub fn ones(&self) -> usize {
        self.k + usize::from(self.tail > 0)
    }

    pub fn label(&self, d: usize) -> StateLabel {
        StateLabel::Triplet {
            d_o: self.leak_in,
            n_1: self.k,
            d_i: self.leak_out(d),
        }
    }
}

/// Every triplet class reachable from `leak_in`, with its probability.
pub(crate) fn triplet_row(n: usize, d: usize, p: f64, leak_in: usize) -> Vec<TripletClass> {
    let mut out = Vec::new();
    let tails = (0..=d).filter(|&t| t == 0 || t + leak_in <= n);
    for tail in tails {
        let m = n - leak_in - tail;
        for k in 0..=m / (d + 1) {
            let ones = k + usize::from(tail > 0);
            let blinded = k * d + tail.saturating_sub(1);
            let free = n - leak_in - blinded;
            let slots = (m - k * d) as u64;
            let prob = weighted_binomial(slots, k as u64, p, ones as i32, (free - ones) as i32);
            let configs = weighted_binomial(slots, k as u64, 0.5, 0, 0);
            out.push(TripletClass {
                leak_in,
                k,
                tail,
                prob,
                configs,
            });
        }
    }
    out
}

fn leak_out_of_mask(mask: u64, n: usize, d: usize) -> usize {
    if mask == 0 {
        return 0;
    }
    let last = 63 - mask.leading_zeros() as usize;
    d.saturating_sub(n - 1 - last)
}

/// Calls `f(mask, ones, free)` for every admissible pattern whose first
/// `blind` bins are empty.
fn for_each_pattern(n: usize, d: usize, blind: usize, f: &mut impl FnMut(u64, usize, usize)) {
    fn go(
        pos: usize,
        n: usize,
        d: usize,
        mask: u64,
        ones: usize,
        free: usize,
        f: &mut impl FnMut(u64, usize, usize),
    ) {
        if pos >= n {
            f(mask, ones, free);
            return;
        }
        go(pos + 1, n, d, mask, ones, free + 1, f);
        let next = (pos + d + 1).min(n);
        go(next, n, d, mask | 1 << pos, ones + 1, free + 1, f);
    }
    go(blind.min(n), n, d, 0, 0, 0, f);
}

fn bit_yield_for(n: usize, ones: usize) -> f64 {
    if ones == 1 {
        (n as f64).log2()
    } else {
        0.0
    }
}

/// Builds an input chain with the default state limit.
pub fn build_imc(n: usize, d: usize, p: f64, method: ImcMethod) -> Result<FrameChain> {
    build_imc_with_limit(n, d, p, method, DEFAULT_STATE_LIMIT)
}

pub fn build_imc_with_limit(
    n: usize,
    d: usize,
    p: f64,
    method: ImcMethod,
    limit: u64,
) -> Result<FrameChain> {
    check_nd(n, d)?;
    check_p(p)?;
    let states = match method {
        ImcMethod::Bmcm => bmcm_state_count(n, d)?,
        ImcMethod::Rmcm => rmcm_state_count(n, d)?,
    };
    if states > limit {
        return Err(Error::TooManyStates { states, limit });
    }
    match method {
        ImcMethod::Bmcm => build_bmcm(n, d, p),
        ImcMethod::Rmcm => build_rmcm(n, d, p),
    }
}

fn build_bmcm(n: usize, d: usize, p: f64) -> Result<FrameChain> {
    if n > 63 {
        return Err(Error::domain(
            "n",
            n as f64,
            "n <= 63 for occupancy-pattern states",
        ));
    }
    let q = 1.0 - p;
    let mut labels = Vec::new();
    let mut index = HashMap::new();
    let mut bit_yield = Vec::new();
    let mut valid = Vec::new();
    let mut row_of = Vec::new();
    for_each_pattern(n, d, 0, &mut |mask, ones, _| {
        index.insert(mask, labels.len());
        labels.push(StateLabel::Occupancy { mask, n });
        bit_yield.push(bit_yield_for(n, ones));
        valid.push(ones == 1);
        row_of.push(leak_out_of_mask(mask, n, d));
    });
    let rows = (0..=d)
        .map(|r| {
            let mut row = Vec::new();
            for_each_pattern(n, d, r, &mut |mask, ones, free| {
                let prob = p.powi(ones as i32) * q.powi((free - ones) as i32);
                row.push((index[&mask], prob));
            });
            row
        })
        .collect();
    let transitions = Transitions::new(rows, row_of)?;
    Ok(FrameChain::new(
        ChainKind::Bmcm,
        (n, d, p),
        labels,
        transitions,
        bit_yield,
        valid,
    ))
}

fn build_rmcm(n: usize, d: usize, p: f64) -> Result<FrameChain> {
    let row_classes: Vec<Vec<TripletClass>> = (0..=d).map(|r| triplet_row(n, d, p, r)).collect();
    let mut labels = Vec::new();
    let mut bit_yield = Vec::new();
    let mut valid = Vec::new();
    let mut row_of = Vec::new();
    let mut rows = Vec::with_capacity(d + 1);
    for classes in &row_classes {
        let mut row = Vec::with_capacity(classes.len());
        for c in classes {
            row.push((labels.len(), c.prob));
            labels.push(c.label(d));
            bit_yield.push(bit_yield_for(n, c.ones()));
            valid.push(c.ones() == 1);
            row_of.push(c.leak_out(d));
        }
        rows.push(row);
    }
    let transitions = Transitions::new(rows, row_of)?;
    Ok(FrameChain::new(
        ChainKind::Rmcm,
        (n, d, p),
        labels,
        transitions,
        bit_yield,
        valid,
    ))
}

/// Expected PPM bits per frame, `sum_s pi_s * bit_yield(s)`.
pub fn raw_rate(chain: &FrameChain, stationary: &StationaryResult) -> f64 {
    chain
        .bit_yield()
        .iter()
        .zip(&stationary.distribution)
        .map(|(b, pi)| b * pi)
        .sum()
}

/// Stationary probability that a frame holds exactly one detection.
pub fn valid_frame_prob(chain: &FrameChain, stationary: &StationaryResult) -> f64 {
    chain
        .valid()
        .iter()
        .zip(&stationary.distribution)
        .filter(|(v, _)| **v)
        .map(|(_, pi)| pi)
        .sum()
}

/// Expands the stationary distribution into probabilities of individual
/// occupancy patterns (bit `i` = bin `i`).
pub fn frame_distribution(
    chain: &FrameChain,
    stationary: &StationaryResult,
) -> Result<BTreeMap<u64, f64>> {
    let (n, d) = (chain.n, chain.d);
    if n > 63 {
        return Err(Error::domain(
            "n",
            n as f64,
            "n <= 63 for pattern expansion",
        ));
    }
    let mut out = BTreeMap::new();
    for (label, &pi) in chain.labels().iter().zip(&stationary.distribution) {
        match *label {
            StateLabel::Occupancy { mask, .. } => *out.entry(mask).or_insert(0.0) += pi,
            StateLabel::Triplet { d_o, n_1, d_i } => {
                let tail = if d_i > 0 { d + 1 - d_i } else { 0 };
                let end = n - tail;
                let base = if tail > 0 { 1u64 << end } else { 0 };
                let mut masks = Vec::new();
                middle_patterns(d_o, end, d, n_1, 0, &mut masks);
                let share = pi / masks.len() as f64;
                for m in masks {
                    *out.entry(m | base).or_insert(0.0) += share;
                }
            }
            _ => return Err(Error::Undefined("pattern expansion of a non-input chain")),
        }
    }
    Ok(out)
}

/// Patterns with `k` detections in `[pos, end)`, each followed by `d` empty bins
/// inside the region.
fn middle_patterns(pos: usize, end: usize, d: usize, k: usize, mask: u64, out: &mut Vec<u64>) {
    if k == 0 {
        out.push(mask);
        return;
    }
    let mut i = pos;
    while i + d < end {
        middle_patterns(i + d + 1, end, d, k - 1, mask | 1 << i, out);
        i += 1;
    }
}
