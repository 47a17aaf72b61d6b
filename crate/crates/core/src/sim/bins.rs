use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

/// Frame occupancy patterns (bit `i` = bin `i`) of a detector whose bins are
/// occupied independently with probability `p` while it is ready, and which is
/// blind for `d` bins after every detection. The detector starts ready.
pub fn simulate_frame_patterns(
    n: usize,
    d: usize,
    p: f64,
    frames: usize,
    seed: u64,
) -> Result<Vec<u64>> {
    if !(1..=64).contains(&n) {
        return Err(Error::domain("n", n as f64, "1 <= n <= 64"));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::domain("p", p, "0 <= p <= 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut blind = 0usize;
    let mut out = Vec::with_capacity(frames);
    for _ in 0..frames {
        let mut mask = 0u64;
        for bin in 0..n {
            if blind > 0 {
                blind -= 1;
            } else if rng.random::<f64>() < p {
                mask |= 1 << bin;
                blind = d;
            }
        }
        out.push(mask);
    }
    Ok(out)
}

pub fn pattern_counts(patterns: &[u64]) -> BTreeMap<u64, u64> {
    let mut out = BTreeMap::new();
    for &m in patterns {
        *out.entry(m).or_insert(0) += 1;
    }
    out
}

/// `counts[i][j]`: how often a valid frame with symbol `i` is followed, as
/// the next valid frame, by symbol `j`.
pub fn valid_symbol_transitions(patterns: &[u64], n: usize) -> Vec<Vec<u64>> {
    let mut counts = vec![vec![0u64; n]; n];
    let mut prev: Option<usize> = None;
    for &m in patterns {
        if m.count_ones() == 1 {
            let s = m.trailing_zeros() as usize;
            if let Some(p) = prev {
                counts[p][s] += 1;
            }
            prev = Some(s);
        }
    }
    counts
}
