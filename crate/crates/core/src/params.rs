//! System configuration, validation and small shared formulas.
//!
//! The pump coherence time bounds how wide a frame may be chosen, but it
//! never enters a rate formula, so it is not a field here.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// `2 * sqrt(2 * ln 2)`, the ratio between a Gaussian's FWHM and its standard deviation.
pub const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_3;

/// Relative tolerance for the `downtime_seconds == downtime_bins * bin_width` check.
const DOWNTIME_CONSISTENCY_RTOL: f64 = 1e-9;

/// Physical and design configuration of one operating point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemParams {
    /// Photon-pair generation rate, pairs per second.
    pub lambda_p: f64,
    /// Dark count rate of each detector, counts per second.
    #[serde(default)]
    pub lambda_dc: f64,
    /// Frame width `T_f`, seconds.
    pub frame_width: f64,
    /// Number of time bins per frame `n`.
    pub bins_per_frame: usize,
    /// Per-detector jitter standard deviation, seconds.
    #[serde(default)]
    pub sigma_d: f64,
    /// Detector downtime in bins.
    #[serde(default)]
    pub downtime_bins: usize,
    /// Detector downtime in seconds. When absent it is `downtime_bins * bin_width`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub downtime_seconds: Option<f64>,
    /// Reconciliation efficiency `f >= 1`; the public disclosure is `f * H(Y|x)`.
    #[serde(default = "unit_efficiency")]
    pub reconciliation_efficiency: f64,
}

fn unit_efficiency() -> f64 {
    1.0
}

impl Default for SystemParams {
    /// 1 MHz pair rate, 330 ns frames of 8 bins, 80 ps FWHM jitter, one bin of downtime.
    fn default() -> Self {
        SystemParams {
            lambda_p: 1e6,
            lambda_dc: 0.0,
            frame_width: 330e-9,
            bins_per_frame: 8,
            sigma_d: 80e-12 / FWHM_PER_SIGMA,
            downtime_bins: 1,
            downtime_seconds: None,
            reconciliation_efficiency: 1.0,
        }
    }
}

/// Quantities that follow from [`SystemParams`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedParams {
    pub bin_width: f64,
    pub p_occupy: f64,
    pub jitter_ratio: f64,
}

/// One violated invariant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub field: &'static str,
    pub rule: &'static str,
}

/// Every invariant a [`SystemParams`] value violates.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct Violations(pub Vec<Violation>);

impl Violations {
    pub fn fields(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.0.iter().map(|v| v.field)
    }

    pub fn contains(&self, field: &str) -> bool {
        self.0.iter().any(|v| v.field == field)
    }
}

impl fmt::Display for Violations {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{}: {}", v.field, v.rule)?;
        }
        Ok(())
    }
}

impl std::error::Error for Violations {}

impl SystemParams {
    /// Checks every invariant and reports all of the violated ones.
    pub fn validate(self) -> std::result::Result<Self, Violations> {
        let mut out = Vec::new();
        let mut check = |ok: bool, field: &'static str, rule: &'static str| {
            if !ok {
                out.push(Violation { field, rule });
            }
        };
        check(
            self.lambda_p.is_finite() && self.lambda_p > 0.0,
            "lambda_p",
            "lambda_p > 0",
        );
        check(
            self.lambda_dc.is_finite() && self.lambda_dc >= 0.0,
            "lambda_dc",
            "lambda_dc >= 0",
        );
        check(
            self.frame_width.is_finite() && self.frame_width > 0.0,
            "frame_width",
            "frame_width > 0",
        );
        check(
            self.bins_per_frame >= 1,
            "bins_per_frame",
            "bins_per_frame >= 1",
        );
        check(
            self.sigma_d.is_finite() && self.sigma_d >= 0.0,
            "sigma_d",
            "sigma_d >= 0",
        );
        check(
            self.downtime_bins <= self.bins_per_frame,
            "downtime_bins",
            "downtime_bins <= bins_per_frame",
        );
        check(
            self.reconciliation_efficiency.is_finite() && self.reconciliation_efficiency >= 1.0,
            "reconciliation_efficiency",
            "reconciliation_efficiency >= 1",
        );
        if self.lambda_p > 0.0 && self.frame_width > 0.0 && self.bins_per_frame >= 1 {
            check(
                self.p_occupy() < 1.0,
                "lambda_p",
                "bin occupancy probability below 1 in double precision",
            );
        }
        if let Some(ds) = self.downtime_seconds {
            if !(ds.is_finite() && ds >= 0.0) {
                check(false, "downtime_seconds", "downtime_seconds >= 0");
            } else if self.bins_per_frame >= 1 && self.frame_width > 0.0 {
                let expected = self.downtime_bins as f64 * self.bin_width();
                let scale = expected.abs().max(ds.abs()).max(f64::MIN_POSITIVE);
                check(
                    (ds - expected).abs() <= DOWNTIME_CONSISTENCY_RTOL * scale,
                    "downtime_seconds",
                    "downtime_seconds == downtime_bins * bin_width",
                );
            }
        }
        if out.is_empty() {
            Ok(self)
        } else {
            Err(Violations(out))
        }
    }

    /// [`validate`](Self::validate) mapped into the crate error type.
    pub fn validated(self) -> Result<Self> {
        self.validate().map_err(Error::InvalidParams)
    }

    pub fn bin_width(&self) -> f64 {
        self.frame_width / self.bins_per_frame as f64
    }

    pub fn p_occupy(&self) -> f64 {
        -(-self.lambda_p * self.bin_width()).exp_m1()
    }

    pub fn jitter_ratio(&self) -> f64 {
        self.sigma_d / self.frame_width
    }

    /// Dead time in seconds, derived from `downtime_bins` when not set explicitly.
    pub fn dead_time(&self) -> f64 {
        self.downtime_seconds
            .unwrap_or(self.downtime_bins as f64 * self.bin_width())
    }

    pub fn derived(&self) -> DerivedParams {
        DerivedParams {
            bin_width: self.bin_width(),
            p_occupy: self.p_occupy(),
            jitter_ratio: self.jitter_ratio(),
        }
    }

    /// Same system with `n` bins per frame.
    ///
    /// If `downtime_seconds` is set the downtime is held fixed in time and
    /// `downtime_bins` is recomputed (rounded) for the new bin width;
    /// `downtime_seconds` is then snapped to the rounded value so the two
    /// views stay consistent.
    pub fn with_bins(&self, n: usize) -> SystemParams {
        let mut out = self.clone();
        out.bins_per_frame = n;
        if let Some(ds) = self.downtime_seconds {
            let tau = out.bin_width();
            let d = (ds / tau).round().max(0.0) as usize;
            out.downtime_bins = d;
            out.downtime_seconds = Some(d as f64 * tau);
        }
        out
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("SystemParams serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json_string())?;
        Ok(())
    }
}

/// Gaussian standard deviation for a given full width at half maximum.
pub fn fwhm_to_sigma(fwhm: f64) -> Result<f64> {
    if !(fwhm >= 0.0) || !fwhm.is_finite() {
        return Err(Error::domain("fwhm", fwhm, "fwhm >= 0"));
    }
    Ok(fwhm / FWHM_PER_SIGMA)
}

pub fn sigma_to_fwhm(sigma: f64) -> Result<f64> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::domain("sigma", sigma, "sigma >= 0"));
    }
    Ok(sigma * FWHM_PER_SIGMA)
}

/// Probability that a bin of width `bin_width` holds at least one arrival of
/// a Poisson process with rate `lambda_p`: `1 - exp(-lambda_p * bin_width)`.
pub fn bin_occupancy_prob(lambda_p: f64, bin_width: f64) -> Result<f64> {
    if !(lambda_p > 0.0) || !lambda_p.is_finite() {
        return Err(Error::domain("lambda_p", lambda_p, "lambda_p > 0"));
    }
    if !(bin_width > 0.0) || !bin_width.is_finite() {
        return Err(Error::domain("bin_width", bin_width, "bin_width > 0"));
    }
    Ok(-(-lambda_p * bin_width).exp_m1())
}

/// Binary entropy in bits, with `h(0) = h(1) = 0`.
pub fn binary_entropy(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::domain("p", p, "0 <= p <= 1"));
    }
    Ok(xlog2x(p) + xlog2x(1.0 - p))
}

/// `-x log2 x`, zero at `x = 0`.
pub(crate) fn xlog2x(x: f64) -> f64 {
    if x > 0.0 {
        -x * x.log2()
    } else {
        0.0
    }
}

/// Entropy in bits of a probability vector; zero entries contribute nothing.
pub fn entropy_bits(probs: &[f64]) -> f64 {
    probs.iter().map(|&x| xlog2x(x)).sum()
}
