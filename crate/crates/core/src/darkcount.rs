//! Dark counts: frame validity under Poisson dark events, the observed jitter
//! density they produce, and the reconciled key rate in bits per second.
//!
//! A frame is kept when each station sees exactly one event. Either the pair
//! photon arrives and neither detector fires spuriously, or no pair photon
//! arrives and both detectors see exactly one dark count. The second case
//! yields uncorrelated symbols whose offset is the difference of two uniform
//! positions, a triangle on `[-T_f, T_f]`.

use std::io::Write;

use libm::erfc;
use serde::Serialize;

use crate::jitter::{mutual_information_with, transition_pmf};
use crate::pmf::OffsetPmf;
use crate::{Error, Result, SystemParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DarkCountScenario {
    pub lambda_p: f64,
    pub lambda_dc: f64,
    pub frame_width: f64,
    pub n: usize,
    pub sigma_d: f64,
}

impl DarkCountScenario {
    pub fn new(
        lambda_p: f64,
        lambda_dc: f64,
        frame_width: f64,
        n: usize,
        sigma_d: f64,
    ) -> Result<Self> {
        let s = DarkCountScenario {
            lambda_p,
            lambda_dc,
            frame_width,
            n,
            sigma_d,
        };
        s.check()?;
        Ok(s)
    }

    pub fn from_params(p: &SystemParams) -> Result<Self> {
        Self::new(
            p.lambda_p,
            p.lambda_dc,
            p.frame_width,
            p.bins_per_frame,
            p.sigma_d,
        )
    }

    fn check(&self) -> Result<()> {
        if !(self.lambda_p > 0.0) || !self.lambda_p.is_finite() {
            return Err(Error::domain("lambda_p", self.lambda_p, "lambda_p > 0"));
        }
        if !(self.lambda_dc >= 0.0) || !self.lambda_dc.is_finite() {
            return Err(Error::domain("lambda_dc", self.lambda_dc, "lambda_dc >= 0"));
        }
        if !(self.frame_width > 0.0) || !self.frame_width.is_finite() {
            return Err(Error::domain(
                "frame_width",
                self.frame_width,
                "frame_width > 0",
            ));
        }
        if self.n < 1 {
            return Err(Error::domain("n", 0.0, "n >= 1"));
        }
        if !(self.sigma_d >= 0.0) || !self.sigma_d.is_finite() {
            return Err(Error::domain("sigma_d", self.sigma_d, "sigma_d >= 0"));
        }
        Ok(())
    }

    pub fn sigma_ratio(&self) -> f64 {
        self.sigma_d / self.frame_width
    }
}

/// Poisson probabilities of exactly one and of zero events in a frame.
pub fn frame_event_probs(rate: f64, frame_width: f64) -> Result<(f64, f64)> {
    if !(rate >= 0.0) || !rate.is_finite() {
        return Err(Error::domain("rate", rate, "rate >= 0"));
    }
    if !(frame_width > 0.0) || !frame_width.is_finite() {
        return Err(Error::domain("frame_width", frame_width, "frame_width > 0"));
    }
    let mu = rate * frame_width;
    let p0 = (-mu).exp();
    Ok((mu * p0, p0))
}

/// Probability that both stations keep a frame, split by how it arose.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PpmValidProb {
    pub total: f64,
    /// One pair photon and no dark count at either station.
    pub spdc_term: f64,
    /// No pair photon and exactly one dark count at each station.
    pub dark_term: f64,
}

pub fn ppm_valid_prob(s: &DarkCountScenario) -> Result<PpmValidProb> {
    let (s1, s0) = frame_event_probs(s.lambda_p, s.frame_width)?;
    let (d1, d0) = frame_event_probs(s.lambda_dc, s.frame_width)?;
    let spdc_term = s1 * d0 * d0;
    let dark_term = s0 * d1 * d1;
    Ok(PpmValidProb {
        total: spdc_term + dark_term,
        spdc_term,
        dark_term,
    })
}

/// Fraction `c` of kept frames that carry a correlated pair.
pub fn spdc_weight(s: &DarkCountScenario) -> Result<f64> {
    let v = ppm_valid_prob(s)?;
    if !(v.total > 0.0) {
        return Err(Error::Undefined("SPDC weight with zero frame retention"));
    }
    Ok((v.spdc_term / v.total).clamp(0.0, 1.0))
}

/// `c N(0, 2 sigma_d^2) + (1 - c) Tri` over the offset between the stations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MixturePdf {
    pub weight_spdc: f64,
    /// Standard deviation of the Gaussian part, `sqrt(2) sigma_d`.
    pub gaussian_std: f64,
    /// The triangle is supported on `[-half_width, half_width]`.
    pub half_width: f64,
}

impl MixturePdf {
    pub fn gaussian_density(&self, t: f64) -> f64 {
        let s = self.gaussian_std;
        if s == 0.0 {
            return if t == 0.0 { f64::INFINITY } else { 0.0 };
        }
        (-0.5 * (t / s).powi(2)).exp() / (s * (2.0 * std::f64::consts::PI).sqrt())
    }

    pub fn triangle_density(&self, t: f64) -> f64 {
        let w = self.half_width;
        if t.abs() >= w {
            0.0
        } else {
            1.0 / w - t.abs() / (w * w)
        }
    }

    pub fn density(&self, t: f64) -> f64 {
        let c = self.weight_spdc;
        let g = if c > 0.0 {
            c * self.gaussian_density(t)
        } else {
            0.0
        };
        g + (1.0 - c) * self.triangle_density(t)
    }

    /// `P(|offset| > x)` for `x >= 0`.
    pub fn tail_mass(&self, x: f64) -> f64 {
        let c = self.weight_spdc;
        let g = if self.gaussian_std == 0.0 {
            0.0
        } else {
            erfc(x / (self.gaussian_std * std::f64::consts::SQRT_2))
        };
        let w = self.half_width;
        let tri = if x >= w { 0.0 } else { (1.0 - x / w).powi(2) };
        c * g + (1.0 - c) * tri
    }
}

pub fn observed_jitter_pdf(s: &DarkCountScenario) -> Result<MixturePdf> {
    Ok(MixturePdf {
        weight_spdc: spdc_weight(s)?,
        gaussian_std: std::f64::consts::SQRT_2 * s.sigma_d,
        half_width: s.frame_width,
    })
}

/// The triangle on `[-n, n]` bins integrated over unit bins `[k - 1/2, k + 1/2]`.
pub fn triangle_pmf(n: usize) -> OffsetPmf {
    let nf = n as f64;
    // mass of [a, b] inside [0, n]
    let mass = |a: f64, b: f64| (b - a) / nf * (1.0 - (a + b) / (2.0 * nf));
    let mut half = Vec::with_capacity(n + 1);
    half.push(2.0 * mass(0.0, 0.5));
    for k in 1..=n {
        let kf = k as f64;
        half.push(mass(kf - 0.5, (kf + 0.5).min(nf)));
    }
    OffsetPmf::from_symmetric_half(&half, 0.0)
}

/// Transition PMF between the stations' symbols with dark-count frames mixed in.
pub fn dc_transition_pmf(s: &DarkCountScenario) -> Result<OffsetPmf> {
    let c = spdc_weight(s)?;
    let g = transition_pmf(s.n, s.sigma_ratio())?;
    Ok(g.mix(c, &triangle_pmf(s.n)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReconciledRate {
    pub p_ppm: f64,
    pub c_weight: f64,
    /// Conditional entropy of the mixed transition PMF.
    pub h_mix: f64,
    /// `max(0, log2 n - h_mix)`.
    pub bits_per_frame: f64,
    /// `p_ppm / T_f * bits_per_frame`.
    pub bits_per_second: f64,
    pub clamped: bool,
}

pub fn reconciled_rate_time(s: &DarkCountScenario) -> Result<ReconciledRate> {
    if s.n < 2 {
        return Err(Error::domain("n", s.n as f64, "n >= 2"));
    }
    let v = ppm_valid_prob(s)?;
    let c = spdc_weight(s)?;
    let pmf = dc_transition_pmf(s)?;
    let mi = mutual_information_with(s.n, &pmf)?;
    Ok(ReconciledRate {
        p_ppm: v.total,
        c_weight: c,
        h_mix: pmf.entropy_bits(),
        bits_per_frame: mi.bits,
        bits_per_second: v.total / s.frame_width * mi.bits,
        clamped: mi.clamped,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DarkCountRow {
    pub dc_ratio: f64,
    pub frame_width_s: f64,
    pub p_ppm: f64,
    pub c_weight: f64,
    pub reconciled_bits_per_s: f64,
}

impl DarkCountRow {
    /// Evaluates `s` with `lambda_dc = dc_ratio * lambda_p`.
    pub fn compute(s: &DarkCountScenario, dc_ratio: f64) -> Result<Self> {
        let s = DarkCountScenario::new(
            s.lambda_p,
            dc_ratio * s.lambda_p,
            s.frame_width,
            s.n,
            s.sigma_d,
        )?;
        let r = reconciled_rate_time(&s)?;
        Ok(DarkCountRow {
            dc_ratio,
            frame_width_s: s.frame_width,
            p_ppm: r.p_ppm,
            c_weight: r.c_weight,
            reconciled_bits_per_s: r.bits_per_second,
        })
    }
}

pub const DARKCOUNT_CSV_HEADER: &str =
    "dc_ratio,frame_width_s,p_ppm,c_weight,reconciled_bits_per_s";

pub fn write_darkcount_csv<W: Write>(mut w: W, rows: &[DarkCountRow]) -> std::io::Result<()> {
    writeln!(w, "{DARKCOUNT_CSV_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{}",
            r.dc_ratio, r.frame_width_s, r.p_ppm, r.c_weight, r.reconciled_bits_per_s
        )?;
    }
    Ok(())
}
