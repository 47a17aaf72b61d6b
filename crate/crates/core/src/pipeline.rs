//! End-to-end secret key rate for one operating point, parameter sweeps and
//! the search for the best bin count.
//!
//! Jitter enters through the reconciliation cost `beta_r`, downtime through
//! the compression ratio `c_dr`, and both are combined multiplicatively:
//! `k_secret = c_dr * (k_raw - beta_r)`. When jitter (or dark counts) and
//! downtime are active together the report is flagged as a separable
//! approximation, since each factor is derived with the other switched off.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::darkcount::{dc_transition_pmf, ppm_valid_prob, DarkCountScenario};
use crate::downtime::{build_omc, compression_ratio, stationary_valid_prob};
use crate::jitter::conditional_entropy;
use crate::{Error, Result, SystemParams};

/// Where the valid-frame probability in `r_secret` came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValidFrameSource {
    /// Independent bins: `n p (1 - p)^(n - 1)`.
    Iid,
    /// Stationary probability of the downtime chain.
    Downtime,
    /// Both stations see exactly one event, dark counts included.
    DarkCount,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub params: SystemParams,
    /// Bin occupancy probability.
    pub p: f64,
    /// `log2 n`, bits per valid frame.
    pub k_raw: f64,
    /// Conditional entropy of Bob's symbol given Alice's.
    pub conditional_entropy: f64,
    /// Bits disclosed for reconciliation, `f * conditional_entropy`.
    pub beta_r: f64,
    /// `k_raw - beta_r`, or 0 when that is negative.
    pub k_reconciled: f64,
    pub c_dr: f64,
    /// `c_dr * k_raw`.
    pub k_uniform: f64,
    /// `c_dr * k_reconciled`.
    pub k_secret: f64,
    pub valid_frame_prob: f64,
    pub valid_frame_source: ValidFrameSource,
    /// `n p (1 - p)^(n - 1)`, reported alongside for comparison.
    pub iid_valid_frame_prob: f64,
    /// Both-station retention probability with dark counts, when they are modelled.
    pub p_ppm: Option<f64>,
    /// `valid_frame_prob * k_raw`.
    pub r_raw: f64,
    /// `valid_frame_prob * k_secret`, bits per frame.
    pub r_secret: f64,
    /// `r_secret / T_f`, bits per second.
    pub r_secret_time: f64,
    /// `k_raw - beta_r` was negative and was clamped.
    pub clamped: bool,
    /// Jitter or dark counts were combined with downtime as independent factors.
    pub separable_approx: bool,
}

pub fn iid_valid_frame_prob(n: usize, p: f64) -> f64 {
    n as f64 * p * (1.0 - p).powi(n as i32 - 1)
}

/// Assembles every rate quantity for one validated operating point.
pub fn assemble_rates(params: &SystemParams) -> Result<RateReport> {
    let params = params.clone().validated()?;
    let n = params.bins_per_frame;
    if n < 2 {
        return Err(Error::domain(
            "bins_per_frame",
            n as f64,
            "n >= 2 for key rates",
        ));
    }
    let d = params.downtime_bins;
    let p = params.p_occupy();
    let k_raw = (n as f64).log2();
    let dark = params.lambda_dc > 0.0;

    let (h, p_ppm) = if dark {
        let s = DarkCountScenario::from_params(&params)?;
        (
            dc_transition_pmf(&s)?.entropy_bits(),
            Some(ppm_valid_prob(&s)?.total),
        )
    } else {
        (conditional_entropy(n, params.jitter_ratio())?, None)
    };
    let beta_r = params.reconciliation_efficiency * h;
    let unclamped = k_raw - beta_r;
    let clamped = unclamped < 0.0;
    let k_reconciled = if clamped { 0.0 } else { unclamped };

    let c_dr = if d == 0 {
        1.0
    } else {
        compression_ratio(&build_omc(n, d, p)?)?
    };
    let iid = iid_valid_frame_prob(n, p);
    let (valid_frame_prob, valid_frame_source) = match p_ppm {
        Some(v) => (v, ValidFrameSource::DarkCount),
        None if d > 0 => (stationary_valid_prob(n, d, p)?, ValidFrameSource::Downtime),
        None => (iid, ValidFrameSource::Iid),
    };
    let k_secret = c_dr * k_reconciled;
    let r_secret = valid_frame_prob * k_secret;
    Ok(RateReport {
        p,
        k_raw,
        conditional_entropy: h,
        beta_r,
        k_reconciled,
        c_dr,
        k_uniform: c_dr * k_raw,
        k_secret,
        valid_frame_prob,
        valid_frame_source,
        iid_valid_frame_prob: iid,
        p_ppm,
        r_raw: valid_frame_prob * k_raw,
        r_secret,
        r_secret_time: r_secret / params.frame_width,
        clamped,
        separable_approx: d > 0 && (params.sigma_d > 0.0 || dark),
        params,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    /// Bins per frame (rounded to an integer).
    N,
    /// Bin occupancy probability; sets `lambda_p`.
    P,
    /// Downtime in bins (rounded to an integer).
    D,
    /// `sigma_d / T_f`; sets `sigma_d`.
    SigmaRatio,
    /// `lambda_dc / lambda_p`; sets `lambda_dc`.
    DcRatio,
}

impl Axis {
    pub const ALL: [Axis; 5] = [Axis::N, Axis::P, Axis::D, Axis::SigmaRatio, Axis::DcRatio];

    pub fn name(self) -> &'static str {
        match self {
            Axis::N => "n",
            Axis::P => "p",
            Axis::D => "d",
            Axis::SigmaRatio => "sigma_ratio",
            Axis::DcRatio => "dc_ratio",
        }
    }

    /// `base` with this axis set to `value`.
    pub fn apply(self, base: &SystemParams, value: f64) -> Result<SystemParams> {
        if !value.is_finite() {
            return Err(Error::domain("axis value", value, "finite"));
        }
        let integer = |v: f64| -> Result<usize> {
            if v < 0.0 {
                Err(Error::domain("axis value", v, "non-negative integer"))
            } else {
                Ok(v.round() as usize)
            }
        };
        let mut out = base.clone();
        match self {
            Axis::N => out = base.with_bins(integer(value)?.max(1)),
            Axis::P => {
                if !(value > 0.0 && value < 1.0) {
                    return Err(Error::domain("p", value, "0 < p < 1"));
                }
                out.lambda_p = -(-value).ln_1p() / base.bin_width();
            }
            Axis::D => {
                out.downtime_bins = integer(value)?;
                if out.downtime_seconds.is_some() {
                    out.downtime_seconds = Some(out.downtime_bins as f64 * out.bin_width());
                }
            }
            Axis::SigmaRatio => out.sigma_d = value * base.frame_width,
            Axis::DcRatio => out.lambda_dc = value * base.lambda_p,
        }
        Ok(out)
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Axis {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Axis::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| {
                format!("unknown axis {s:?} (expected n, p, d, sigma_ratio or dc_ratio)")
            })
    }
}

/// An evenly spaced (or log-spaced) grid along one axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub axis: Axis,
    pub from: f64,
    pub to: f64,
    pub points: usize,
    #[serde(default)]
    pub log: bool,
}

impl SweepSpec {
    pub fn grid(&self) -> Result<Vec<f64>> {
        if self.points == 0 {
            return Err(Error::domain("points", 0.0, "points >= 1"));
        }
        if !self.from.is_finite() || !self.to.is_finite() {
            return Err(Error::domain("sweep range", self.from, "finite bounds"));
        }
        if self.log && !(self.from > 0.0 && self.to > 0.0) {
            return Err(Error::domain(
                "sweep range",
                self.from.min(self.to),
                "positive bounds for a log grid",
            ));
        }
        if self.points == 1 {
            return Ok(vec![self.from]);
        }
        let m = (self.points - 1) as f64;
        Ok((0..self.points)
            .map(|i| {
                let t = i as f64 / m;
                if self.log {
                    (self.from.ln() + t * (self.to.ln() - self.from.ln())).exp()
                } else {
                    self.from + t * (self.to - self.from)
                }
            })
            .collect())
    }
}

/// One sweep point; exactly one of `report` and `error` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub axis_value: Option<f64>,
    pub report: Option<RateReport>,
    pub error: Option<String>,
}

impl RatePoint {
    fn from_result(axis_value: Option<f64>, r: Result<RateReport>) -> Self {
        match r {
            Ok(report) => RatePoint {
                axis_value,
                report: Some(report),
                error: None,
            },
            Err(e) => RatePoint {
                axis_value,
                report: None,
                error: Some(e.to_string()),
            },
        }
    }
}

/// Evaluates every grid point in parallel; output order follows `grid` and a
/// failing point is recorded rather than aborting the sweep.
pub fn sweep(axis: Axis, grid: &[f64], base: &SystemParams) -> Vec<RatePoint> {
    grid.par_iter()
        .map(|&v| {
            RatePoint::from_result(
                Some(v),
                axis.apply(base, v).and_then(|p| assemble_rates(&p)),
            )
        })
        .collect()
}

/// Body of a rates request: one point, or a sweep around `params`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatesRequest {
    pub params: SystemParams,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
}

pub fn handle_rates_request(req: &RatesRequest) -> Result<Vec<RatePoint>> {
    match &req.sweep {
        None => Ok(vec![RatePoint::from_result(
            None,
            assemble_rates(&req.params),
        )]),
        Some(spec) => Ok(sweep(spec.axis, &spec.grid()?, &req.params)),
    }
}

pub const RATES_CSV_HEADER: &str = "axis_value,n,d,p,sigma_ratio,dc_ratio,k_raw,beta_r,k_reconciled,c_dr,k_uniform,k_secret,valid_frame_prob,iid_valid_frame_prob,r_raw,r_secret,r_secret_time,clamped,separable_approx,error";

pub fn write_rates_csv<W: Write>(mut w: W, points: &[RatePoint]) -> std::io::Result<()> {
    writeln!(w, "{RATES_CSV_HEADER}")?;
    for pt in points {
        let axis = pt.axis_value.map(|v| v.to_string()).unwrap_or_default();
        match (&pt.report, &pt.error) {
            (Some(r), _) => {
                let pr = &r.params;
                writeln!(
                    w,
                    "{axis},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},",
                    pr.bins_per_frame,
                    pr.downtime_bins,
                    r.p,
                    pr.jitter_ratio(),
                    pr.lambda_dc / pr.lambda_p,
                    r.k_raw,
                    r.beta_r,
                    r.k_reconciled,
                    r.c_dr,
                    r.k_uniform,
                    r.k_secret,
                    r.valid_frame_prob,
                    r.iid_valid_frame_prob,
                    r.r_raw,
                    r.r_secret,
                    r.r_secret_time,
                    r.clamped,
                    r.separable_approx,
                )?;
            }
            (None, e) => {
                let msg = e.as_deref().unwrap_or("").replace(['"', ','], ";");
                writeln!(w, "{axis},,,,,,,,,,,,,,,,,,,\"{msg}\"")?;
            }
        }
    }
    Ok(())
}

/// Best power-of-two bin count up to `n_max` by secret rate per frame; ties
/// go to the smaller `n`. Points that are invalid for a given `n` are skipped.
pub fn optimize_bins(params: &SystemParams, n_max: usize) -> Result<(usize, RateReport)> {
    if n_max < 2 {
        return Err(Error::domain("n_max", n_max as f64, "n_max >= 2"));
    }
    let candidates: Vec<usize> = (1..usize::BITS)
        .map(|k| 1usize << k)
        .take_while(|&n| n <= n_max)
        .collect();
    let reports: Vec<Option<RateReport>> = candidates
        .par_iter()
        .map(|&n| assemble_rates(&params.with_bins(n)).ok())
        .collect();
    let mut best: Option<(usize, RateReport)> = None;
    for (n, r) in candidates.into_iter().zip(reports) {
        let Some(r) = r else { continue };
        if best.as_ref().is_none_or(|(_, b)| r.r_secret > b.r_secret) {
            best = Some((n, r));
        }
    }
    best.ok_or(Error::Undefined("secret rate at every candidate bin count"))
}
