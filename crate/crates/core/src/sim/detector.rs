use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::{Error, Result, SystemParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Station {
    Alice,
    Bob,
}

impl Station {
    fn stream(self) -> u64 {
        match self {
            Station::Alice => 1,
            Station::Bob => 2,
        }
    }
}

/// Ground truth about where a detection came from. Extraction never looks at it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Origin {
    /// Photon of the pair with this index in the source stream.
    Spdc {
        pair: usize,
    },
    DarkCount,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::Spdc { pair } => write!(f, "spdc:{pair}"),
            Origin::DarkCount => f.write_str("dark"),
        }
    }
}

impl FromStr for Origin {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "dark" {
            return Ok(Origin::DarkCount);
        }
        s.strip_prefix("spdc:")
            .and_then(|p| p.parse().ok())
            .map(|pair| Origin::Spdc { pair })
            .ok_or_else(|| format!("unknown origin tag {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub time: f64,
    pub origin: Origin,
}

/// Detections of one station over the observation window `[0, window)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub station: Station,
    pub window: f64,
    pub events: Vec<Detection>,
}

impl DetectionRecord {
    pub fn timestamps(&self) -> impl Iterator<Item = f64> + '_ {
        self.events.iter().map(|e| e.time)
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Timestamps are strictly increasing, more than `dead_time` apart and
    /// inside the window.
    pub fn satisfies_dead_time(&self, dead_time: f64) -> bool {
        self.events
            .windows(2)
            .all(|w| w[1].time - w[0].time > dead_time)
            && self.timestamps().all(|t| (0.0..self.window).contains(&t))
    }

    /// Writes `<timestamp_seconds> <origin_tag>` lines.
    pub fn write_text<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for e in &self.events {
            writeln!(w, "{:e} {}", e.time, e.origin)?;
        }
        Ok(())
    }

    /// Reads the line format of [`write_text`](Self::write_text); blank lines
    /// and lines starting with `#` are skipped.
    pub fn read_text<R: BufRead>(r: R, station: Station, window: f64) -> Result<Self> {
        let mut events = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parse_err = |msg: String| Error::Parse { line: i + 1, msg };
            let mut parts = line.split_whitespace();
            let (Some(t), Some(tag), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(parse_err("expected `<timestamp> <tag>`".into()));
            };
            let time: f64 = t.parse().map_err(|e| parse_err(format!("{e}")))?;
            let origin: Origin = tag.parse().map_err(parse_err)?;
            events.push(Detection { time, origin });
        }
        Ok(DetectionRecord {
            station,
            window,
            events,
        })
    }
}

/// Pair-creation times of a Poisson process of rate `lambda_p` on `[0, duration)`.
pub fn generate_pair_stream(lambda_p: f64, duration: f64, seed: u64) -> Result<Vec<f64>> {
    if !(lambda_p > 0.0) || !lambda_p.is_finite() {
        return Err(Error::domain("lambda_p", lambda_p, "lambda_p > 0"));
    }
    if !(duration >= 0.0) || !duration.is_finite() {
        return Err(Error::domain("duration", duration, "duration >= 0"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gap = Exp::new(lambda_p).expect("positive rate");
    let mut out = Vec::with_capacity((lambda_p * duration * 1.01) as usize + 16);
    let mut t = gap.sample(&mut rng);
    while t < duration {
        out.push(t);
        t += gap.sample(&mut rng);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectOptions {
    /// Dark counts blind the detector like photons do. When false, dead time
    /// only filters pair photons and dark counts are added afterwards.
    pub dead_time_on_dark_counts: bool,
}

impl Default for DetectOptions {
    fn default() -> Self {
        DetectOptions {
            dead_time_on_dark_counts: true,
        }
    }
}

fn apply_dead_time(events: &mut Vec<Detection>, dead_time: f64) {
    let mut last = f64::NEG_INFINITY;
    events.retain(|e| {
        if e.time - last > dead_time {
            last = e.time;
            true
        } else {
            false
        }
    });
}

fn sort_by_time(events: &mut [Detection]) {
    events.sort_by(|a, b| a.time.total_cmp(&b.time));
}

/// One station's detector: jitter, dead time and dark counts applied to the
/// pair times, observed over `[0, window)`.
pub fn detect(
    pairs: &[f64],
    params: &SystemParams,
    station: Station,
    window: f64,
    seed: u64,
    opts: DetectOptions,
) -> Result<DetectionRecord> {
    let params = params.clone().validated()?;
    if !(window > 0.0) || !window.is_finite() {
        return Err(Error::domain("window", window, "window > 0"));
    }
    let mut jitter_rng = ChaCha8Rng::seed_from_u64(seed);
    jitter_rng.set_stream(2 * station.stream());
    let mut dark_rng = ChaCha8Rng::seed_from_u64(seed);
    dark_rng.set_stream(2 * station.stream() + 1);

    let normal = (params.sigma_d > 0.0).then(|| Normal::new(0.0, params.sigma_d).expect("sigma"));
    let mut events: Vec<Detection> = pairs
        .iter()
        .enumerate()
        .map(|(pair, &u)| {
            let eta = normal.as_ref().map_or(0.0, |n| n.sample(&mut jitter_rng));
            Detection {
                time: u + eta,
                origin: Origin::Spdc { pair },
            }
        })
        .filter(|e| (0.0..window).contains(&e.time))
        .collect();
    sort_by_time(&mut events);

    let dead = params.dead_time();
    if !opts.dead_time_on_dark_counts {
        apply_dead_time(&mut events, dead);
    }
    if params.lambda_dc > 0.0 {
        let mean = params.lambda_dc * window;
        let count = Poisson::new(mean)
            .expect("positive mean")
            .sample(&mut dark_rng) as usize;
        events.reserve(count);
        for _ in 0..count {
            events.push(Detection {
                time: dark_rng.random::<f64>() * window,
                origin: Origin::DarkCount,
            });
        }
        sort_by_time(&mut events);
    }
    if opts.dead_time_on_dark_counts {
        apply_dead_time(&mut events, dead);
    }
    Ok(DetectionRecord {
        station,
        window,
        events,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ideal() -> SystemParams {
        SystemParams {
            sigma_d: 0.0,
            downtime_bins: 0,
            lambda_dc: 0.0,
            ..SystemParams::default()
        }
    }

    #[test]
    fn ideal_detector_is_identity() {
        let pairs = generate_pair_stream(1e6, 1e-3, 5).unwrap();
        let rec = detect(
            &pairs,
            &ideal(),
            Station::Alice,
            1e-3,
            9,
            DetectOptions::default(),
        )
        .unwrap();
        let times: Vec<f64> = rec.timestamps().collect();
        assert_eq!(times, pairs);
    }

    #[test]
    fn empty_window() {
        assert!(generate_pair_stream(1e6, 0.0, 1).unwrap().is_empty());
    }

    #[test]
    fn seed_determinism() {
        let a = generate_pair_stream(1e6, 1e-3, 42).unwrap();
        let b = generate_pair_stream(1e6, 1e-3, 42).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, generate_pair_stream(1e6, 1e-3, 43).unwrap());
    }

    #[test]
    fn stations_draw_independent_jitter() {
        let p = SystemParams::default();
        let pairs = generate_pair_stream(1e6, 1e-4, 1).unwrap();
        let a = detect(
            &pairs,
            &p,
            Station::Alice,
            1e-4,
            3,
            DetectOptions::default(),
        )
        .unwrap();
        let b = detect(&pairs, &p, Station::Bob, 1e-4, 3, DetectOptions::default()).unwrap();
        assert_ne!(a.events[0].time, b.events[0].time);
    }

    #[test]
    fn text_round_trip() {
        let rec = DetectionRecord {
            station: Station::Bob,
            window: 1.0,
            events: vec![
                Detection {
                    time: 1.25e-7,
                    origin: Origin::Spdc { pair: 3 },
                },
                Detection {
                    time: 0.1 + 0.2,
                    origin: Origin::DarkCount,
                },
            ],
        };
        let mut buf = Vec::new();
        rec.write_text(&mut buf).unwrap();
        let back = DetectionRecord::read_text(&buf[..], Station::Bob, 1.0).unwrap();
        assert_eq!(back, rec);
        assert!(DetectionRecord::read_text(&b"1.0 photon\n"[..], Station::Bob, 1.0).is_err());
    }
}
