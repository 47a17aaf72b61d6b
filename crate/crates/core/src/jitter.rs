//! Detector jitter as a discrete memoryless channel between PPM symbols.
//!
//! Alice and Bob observe `X = U + J_A` and `Y = U + J_B`, where `U` is the
//! uniformly distributed true bin and the jitters are Gaussian with standard
//! deviation `sigma_d` binned at width `T_f / n`. Offsets are not folded back
//! into `[0, n)`; the channel is treated as translation invariant so that
//! `I(X;Y) = log2 n - H(Y | x)` holds exactly.
//!
//! Every quantity depends on `sigma_d` and `T_f` only through the ratio
//! `sigma_ratio = sigma_d / T_f`; a jitter of `sigma_ratio * n` bins.

use std::io::Write;

use libm::erf;
use serde::Serialize;

use crate::pmf::OffsetPmf;
use crate::{Error, Result};

/// Largest bin count tried by [`ultimate_rate`].
pub const ULTIMATE_MAX_BINS: u64 = 1 << 20;

fn check_args(n: usize, sigma_ratio: f64) -> Result<()> {
    if n == 0 {
        return Err(Error::domain("n", 0.0, "n >= 1"));
    }
    if !(sigma_ratio >= 0.0) || !sigma_ratio.is_finite() {
        return Err(Error::domain(
            "sigma_ratio",
            sigma_ratio,
            "sigma_ratio >= 0",
        ));
    }
    Ok(())
}

/// Single-detector jitter PMF over integer bin offsets.
pub fn offset_pmf(n: usize, sigma_ratio: f64) -> Result<OffsetPmf> {
    check_args(n, sigma_ratio)?;
    Ok(OffsetPmf::binned_gaussian(n as f64 * sigma_ratio))
}

/// Transition PMF `p(y | x)` as a function of `y - x`: the difference of two
/// detector jitters (variance `2 sigma_d^2`) integrated over one bin.
pub fn transition_pmf(n: usize, sigma_ratio: f64) -> Result<OffsetPmf> {
    check_args(n, sigma_ratio)?;
    Ok(OffsetPmf::binned_gaussian(
        std::f64::consts::SQRT_2 * n as f64 * sigma_ratio,
    ))
}

/// Rate of disagreement `1 - P[J_A = J_B]` for i.i.d. binned jitters.
pub fn rod(n: usize, sigma_ratio: f64) -> Result<f64> {
    let pmf = offset_pmf(n, sigma_ratio)?;
    Ok(rod_of(&pmf))
}

/// `1 - sum p_k^2`, arranged so that a narrow PMF does not round to zero.
fn rod_of(pmf: &OffsetPmf) -> f64 {
    let p0 = pmf.get(0);
    let (mut off_mass, mut off_sq) = (0.0, 0.0);
    for (k, p) in pmf.iter() {
        if k != 0 {
            off_mass += p;
            off_sq += p * p;
        }
    }
    ((off_mass + pmf.tail_mass()) * (1.0 + p0) - off_sq).clamp(0.0, 1.0)
}

/// Disagreement probability when photons arrive at continuous, uniformly
/// distributed times rather than at bin centres.
///
/// With `D = eta_B - eta_A ~ N(0, 2 sigma_d^2)` (in bins) and Alice's position
/// within her bin `f ~ U[0, 1)` independent of `D`, the symbols agree iff
/// `0 <= f + D < 1`, which integrates to
/// `erf(1 / (s sqrt 2)) + 2 s (phi(1/s) - phi(0))` with `s` the standard
/// deviation of `D` in bins. This is what the event simulator measures.
pub fn rod_continuous_arrival(n: usize, sigma_ratio: f64) -> Result<f64> {
    check_args(n, sigma_ratio)?;
    let s = std::f64::consts::SQRT_2 * n as f64 * sigma_ratio;
    if s == 0.0 {
        return Ok(0.0);
    }
    let phi = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let agree = erf(1.0 / (s * std::f64::consts::SQRT_2)) + 2.0 * s * (phi(1.0 / s) - phi(0.0));
    Ok((1.0 - agree).clamp(0.0, 1.0))
}

/// `H(Y | x)` in bits; independent of `x` for the translation-invariant channel.
pub fn conditional_entropy(n: usize, sigma_ratio: f64) -> Result<f64> {
    Ok(transition_pmf(n, sigma_ratio)?.entropy_bits())
}

/// Mutual information per PPM frame, clamped at zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MutualInformation {
    pub bits: f64,
    /// `log2 n - H(Y|x)` before clamping.
    pub unclamped: f64,
    pub clamped: bool,
}

impl MutualInformation {
    fn from_entropy(n: usize, h: f64) -> Self {
        let unclamped = (n as f64).log2() - h;
        MutualInformation {
            bits: unclamped.max(0.0),
            unclamped,
            clamped: unclamped < 0.0,
        }
    }
}

/// Secrecy capacity `C_{K,n} = log2 n - H(Y|x)` in bits per PPM frame.
pub fn mutual_information(n: usize, sigma_ratio: f64) -> Result<MutualInformation> {
    if n < 2 {
        return Err(Error::domain("n", n as f64, "n >= 2"));
    }
    let h = conditional_entropy(n, sigma_ratio)?;
    Ok(MutualInformation::from_entropy(n, h))
}

/// Mutual information of a translation-invariant channel with an arbitrary
/// symmetric transition PMF.
pub fn mutual_information_with(n: usize, transition: &OffsetPmf) -> Result<MutualInformation> {
    if n < 2 {
        return Err(Error::domain("n", n as f64, "n >= 2"));
    }
    Ok(MutualInformation::from_entropy(
        n,
        transition.entropy_bits(),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UltimateRate {
    pub bits: f64,
    /// Bin count at which the doubling sequence settled.
    pub n: u64,
}

/// Limit of `I(X_n; Y_n)` as `n` grows, found by doubling `n` from 2 until
/// successive values differ by less than `tolerance`.
pub fn ultimate_rate(sigma_ratio: f64, tolerance: f64) -> Result<UltimateRate> {
    if !(tolerance > 0.0) {
        return Err(Error::domain("tolerance", tolerance, "tolerance > 0"));
    }
    check_args(1, sigma_ratio)?;
    let mut n: u64 = 2;
    let mut prev = mutual_information(n as usize, sigma_ratio)?;
    let mut last_increment = f64::INFINITY;
    while n < ULTIMATE_MAX_BINS {
        let next_n = 2 * n;
        let cur = mutual_information(next_n as usize, sigma_ratio)?;
        last_increment = cur.unclamped - prev.unclamped;
        if last_increment.abs() < tolerance {
            return Ok(UltimateRate {
                bits: cur.bits,
                n: next_n,
            });
        }
        n = next_n;
        prev = cur;
    }
    Err(Error::UltimateRateDiverges {
        n_reached: n,
        last_increment,
    })
}

/// Bin count whose bins span `[-sigma_d, +sigma_d]`: `ceil(2 T_f / sigma_d)`.
pub fn heuristic_bin_count(frame_width: f64, sigma_d: f64) -> Result<u64> {
    if !(sigma_d > 0.0) || !sigma_d.is_finite() {
        return Err(Error::domain("sigma_d", sigma_d, "sigma_d > 0"));
    }
    if !(frame_width > 0.0) || !frame_width.is_finite() {
        return Err(Error::domain("frame_width", frame_width, "frame_width > 0"));
    }
    let x = 2.0 * frame_width / sigma_d;
    if x >= u64::MAX as f64 {
        return Err(Error::domain(
            "sigma_d",
            sigma_d,
            "2 T_f / sigma_d fits in u64",
        ));
    }
    Ok(x.ceil() as u64)
}

/// The jitter channel at one `(n, sigma_ratio)` point.
#[derive(Debug, Clone, Serialize)]
pub struct JitterChannel {
    pub n: usize,
    pub jitter_ratio: f64,
    pub offset_pmf: OffsetPmf,
    pub transition_pmf: OffsetPmf,
}

impl JitterChannel {
    pub fn new(n: usize, sigma_ratio: f64) -> Result<Self> {
        Ok(JitterChannel {
            n,
            jitter_ratio: sigma_ratio,
            offset_pmf: offset_pmf(n, sigma_ratio)?,
            transition_pmf: transition_pmf(n, sigma_ratio)?,
        })
    }

    pub fn truncation_bound(&self) -> usize {
        self.transition_pmf.bound()
    }

    pub fn tail_mass(&self) -> f64 {
        self.transition_pmf.tail_mass()
    }

    pub fn rod(&self) -> f64 {
        rod_of(&self.offset_pmf)
    }

    pub fn conditional_entropy(&self) -> f64 {
        self.transition_pmf.entropy_bits()
    }

    pub fn mutual_information(&self) -> Result<MutualInformation> {
        mutual_information_with(self.n, &self.transition_pmf)
    }
}

/// One row of a jitter sweep table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JitterRow {
    pub n: usize,
    pub sigma_ratio: f64,
    pub rod: f64,
    pub mi_bits: f64,
    pub raw_bits: f64,
}

impl JitterRow {
    pub fn compute(n: usize, sigma_ratio: f64) -> Result<Self> {
        let ch = JitterChannel::new(n, sigma_ratio)?;
        Ok(JitterRow {
            n,
            sigma_ratio,
            rod: ch.rod(),
            mi_bits: ch.mutual_information()?.bits,
            raw_bits: (n as f64).log2(),
        })
    }
}

pub const JITTER_CSV_HEADER: &str = "n,sigma_ratio,rod,mi_bits,raw_bits";

pub fn write_jitter_csv<W: Write>(mut w: W, rows: &[JitterRow]) -> std::io::Result<()> {
    writeln!(w, "{JITTER_CSV_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{:e},{:e},{:e},{:e}",
            r.n, r.sigma_ratio, r.rod, r.mi_bits, r.raw_bits
        )?;
    }
    Ok(())
}
