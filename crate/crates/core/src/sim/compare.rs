use std::fmt;

use serde::Serialize;

use super::detector::{detect, generate_pair_stream, DetectOptions, Station};
use super::ppm::{
    bin_frames, empirical_stats, ppm_extract, EmpiricalStats, Estimate, PpmExtraction,
};
use crate::darkcount::{ppm_valid_prob, DarkCountScenario};
use crate::jitter::{rod, rod_continuous_arrival};
use crate::params::bin_occupancy_prob;
use crate::{Result, SystemParams};

/// Both stations observing the same pair stream for `frames` frames.
#[derive(Debug, Clone, Serialize)]
pub struct Experiment {
    pub params: SystemParams,
    pub frames: u64,
    pub seed: u64,
    pub pairs: usize,
    pub alice: PpmExtraction,
    pub bob: PpmExtraction,
    pub stats: EmpiricalStats,
}

pub fn run_experiment(
    params: &SystemParams,
    frames: u64,
    seed: u64,
    opts: DetectOptions,
) -> Result<Experiment> {
    let params = params.clone().validated()?;
    let window = frames as f64 * params.frame_width;
    let pairs = generate_pair_stream(params.lambda_p, window, seed)?;
    let n = params.bins_per_frame;
    let extract = |station| -> Result<PpmExtraction> {
        let rec = detect(&pairs, &params, station, window, seed, opts)?;
        ppm_extract(&bin_frames(&rec, params.frame_width, n)?, n)
    };
    let alice = extract(Station::Alice)?;
    let bob = extract(Station::Bob)?;
    let stats = empirical_stats(&alice, &bob)?;
    Ok(Experiment {
        frames: alice.total_frames,
        pairs: pairs.len(),
        params,
        seed,
        alice,
        bob,
        stats,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonRow {
    pub quantity: &'static str,
    pub empirical: Option<Estimate>,
    /// Model value, when the model covers this configuration.
    pub analytic: Option<f64>,
    pub z: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Comparison {
    pub frames: u64,
    pub rows: Vec<ComparisonRow>,
}

/// Empirical estimates next to the corresponding closed-form values.
pub fn compare(exp: &Experiment) -> Result<Comparison> {
    let p = &exp.params;
    let n = p.bins_per_frame;
    let no_downtime = p.dead_time() == 0.0;
    let clean = no_downtime && p.lambda_dc == 0.0;
    let occ = bin_occupancy_prob(p.lambda_p + p.lambda_dc, p.bin_width())?;
    let retained_alice =
        Estimate::proportion(exp.alice.retained.len() as u64, exp.alice.total_frames);
    let mut rows = vec![
        (
            "bin occupancy",
            exp.stats.occupancy,
            no_downtime.then_some(occ),
        ),
        (
            "retained fraction",
            retained_alice,
            no_downtime.then(|| n as f64 * occ * (1.0 - occ).powi(n as i32 - 1)),
        ),
    ];
    let p_ppm = if no_downtime {
        Some(ppm_valid_prob(&DarkCountScenario::from_params(p)?)?.total)
    } else {
        None
    };
    rows.push(("co-retained fraction", exp.stats.coincident_retained, p_ppm));
    let sr = p.jitter_ratio();
    rows.push((
        "rod (bin-centred)",
        exp.stats.rod,
        clean.then(|| rod(n, sr)).transpose()?,
    ));
    rows.push((
        "rod (continuous arrival)",
        exp.stats.rod,
        clean.then(|| rod_continuous_arrival(n, sr)).transpose()?,
    ));
    Ok(Comparison {
        frames: exp.frames,
        rows: rows
            .into_iter()
            .map(|(quantity, empirical, analytic)| ComparisonRow {
                quantity,
                empirical,
                analytic,
                z: empirical.zip(analytic).map(|(e, a)| e.z_score(a)),
            })
            .collect(),
    })
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "-".to_string(), |v| format!("{v:.6e}"))
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "frames: {}", self.frames)?;
        writeln!(
            f,
            "{:<26} {:>14} {:>14} {:>14} {:>8}",
            "quantity", "empirical", "std_err", "analytic", "z"
        )?;
        for r in &self.rows {
            writeln!(
                f,
                "{:<26} {:>14} {:>14} {:>14} {:>8}",
                r.quantity,
                opt(r.empirical.map(|e| e.value)),
                opt(r.empirical.map(|e| e.std_err)),
                opt(r.analytic),
                r.z.map_or_else(|| "-".to_string(), |z| format!("{z:.2}")),
            )?;
        }
        Ok(())
    }
}
