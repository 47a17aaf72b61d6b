//! Probability mass functions over integer bin offsets.

use libm::{erf, erfc};
use serde::Serialize;

use crate::params::entropy_bits;

/// A PMF on the integers `-bound..=bound`, with the probability mass that was
/// cut off outside that window reported in `tail_mass` (not renormalized).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OffsetPmf {
    bound: usize,
    probs: Vec<f64>,
    tail_mass: f64,
}

impl OffsetPmf {
    /// Point mass at offset zero.
    pub fn delta() -> Self {
        OffsetPmf {
            bound: 0,
            probs: vec![1.0],
            tail_mass: 0.0,
        }
    }

    /// Builds a symmetric PMF from its non-negative half: `half[k]` is the
    /// probability of offset `k` (and of `-k`).
    pub fn from_symmetric_half(half: &[f64], tail_mass: f64) -> Self {
        assert!(!half.is_empty());
        let bound = half.len() - 1;
        let mut probs = Vec::with_capacity(2 * bound + 1);
        probs.extend(half.iter().rev());
        probs.extend(&half[1..]);
        OffsetPmf {
            bound,
            probs,
            tail_mass,
        }
    }

    /// Builds a PMF from explicit entries at `-bound..=bound`.
    pub fn from_entries(probs: Vec<f64>, tail_mass: f64) -> Self {
        assert!(probs.len() % 2 == 1, "offset PMF needs odd length");
        OffsetPmf {
            bound: probs.len() / 2,
            probs,
            tail_mass,
        }
    }

    /// Gaussian with standard deviation `std_bins` (in bin widths), integrated
    /// over the unit intervals `[k - 1/2, k + 1/2)`.
    ///
    /// The support is truncated at `ceil(10 * std_bins) + 2`; a zero standard
    /// deviation gives the point mass at zero.
    pub fn binned_gaussian(std_bins: f64) -> Self {
        assert!(std_bins >= 0.0 && std_bins.is_finite());
        if std_bins == 0.0 {
            return Self::delta();
        }
        let bound = (10.0 * std_bins).ceil() as usize + 2;
        let scale = 1.0 / (std_bins * std::f64::consts::SQRT_2);
        let mut half = Vec::with_capacity(bound + 1);
        half.push(erf(0.5 * scale));
        for k in 1..=bound {
            let lo = (k as f64 - 0.5) * scale;
            let hi = (k as f64 + 0.5) * scale;
            half.push(0.5 * (erfc(lo) - erfc(hi)));
        }
        let tail = erfc((bound as f64 + 0.5) * scale);
        Self::from_symmetric_half(&half, tail)
    }

    pub fn bound(&self) -> usize {
        self.bound
    }

    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    /// Probability of offset `k`; zero outside the stored window.
    pub fn get(&self, k: i64) -> f64 {
        let idx = k + self.bound as i64;
        if idx < 0 || idx as usize >= self.probs.len() {
            0.0
        } else {
            self.probs[idx as usize]
        }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        let b = self.bound as i64;
        self.probs
            .iter()
            .enumerate()
            .map(move |(i, &p)| (i as i64 - b, p))
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn entropy_bits(&self) -> f64 {
        entropy_bits(&self.probs)
    }

    pub fn mean(&self) -> f64 {
        self.iter().map(|(k, p)| k as f64 * p).sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.iter()
            .map(|(k, p)| {
                let x = k as f64 - m;
                x * x * p
            })
            .sum()
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (1..=self.bound as i64).all(|k| (self.get(k) - self.get(-k)).abs() <= tol)
    }

    /// Weighted sum `w * self + (1 - w) * other` over the union of supports.
    pub fn mix(&self, w: f64, other: &OffsetPmf) -> OffsetPmf {
        let bound = self.bound.max(other.bound);
        let b = bound as i64;
        let probs = (-b..=b)
            .map(|k| w * self.get(k) + (1.0 - w) * other.get(k))
            .collect();
        OffsetPmf {
            bound,
            probs,
            tail_mass: w * self.tail_mass + (1.0 - w) * other.tail_mass,
        }
    }

    /// Discrete convolution (distribution of the sum of independent offsets).
    pub fn convolve(&self, other: &OffsetPmf) -> OffsetPmf {
        let bound = self.bound + other.bound;
        let mut probs = vec![0.0; 2 * bound + 1];
        for (i, &a) in self.probs.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            for (j, &b) in other.probs.iter().enumerate() {
                probs[i + j] += a * b;
            }
        }
        let tail = self.tail_mass + other.tail_mass - self.tail_mass * other.tail_mass;
        OffsetPmf {
            bound,
            probs,
            tail_mass: tail,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delta_has_unit_mass() {
        let d = OffsetPmf::delta();
        assert_eq!(d.get(0), 1.0);
        assert_eq!(d.get(3), 0.0);
        assert_eq!(d.entropy_bits(), 0.0);
    }

    #[test]
    fn binned_gaussian_central_mass() {
        // std = 1/2 bin: the central bin spans +-1 sigma.
        let g = OffsetPmf::binned_gaussian(0.5);
        assert!(
            (g.get(0) - 0.682_689_492_137_085_9).abs() < 1e-14,
            "{}",
            g.get(0)
        );
        assert!(g.is_symmetric(0.0));
        assert!((g.total() + g.tail_mass() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn convolution_of_deltas() {
        let c = OffsetPmf::delta().convolve(&OffsetPmf::delta());
        assert_eq!(c.bound(), 0);
        assert_eq!(c.get(0), 1.0);
    }

    #[test]
    fn mix_spans_union() {
        let a = OffsetPmf::delta();
        let b = OffsetPmf::from_symmetric_half(&[0.5, 0.25], 0.0);
        let m = a.mix(0.5, &b);
        assert_eq!(m.bound(), 1);
        assert!((m.get(0) - 0.75).abs() < 1e-15);
        assert!((m.get(-1) - 0.125).abs() < 1e-15);
    }
}
