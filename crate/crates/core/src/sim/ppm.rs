use std::io::Write;

use serde::Serialize;

use super::detector::DetectionRecord;
use crate::{Error, Result};

/// Occupied bins of one frame, sorted and without repeats.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FrameOccupancy {
    pub frame_index: u64,
    pub occupied_bins: Vec<usize>,
}

/// `(frame, bin)` of time `t` by floor division. A time within a few ulps
/// below a frame or bin boundary (as `k * frame_width` often is) is assigned
/// to the later frame or bin.
pub fn locate(t: f64, frame_width: f64, n: usize) -> (i64, usize) {
    let tol = 4.0 * f64::EPSILON * t.abs().max(frame_width);
    let mut frame = (t / frame_width).floor();
    let mut rem = t - frame * frame_width;
    if rem < 0.0 {
        frame -= 1.0;
        rem += frame_width;
    }
    if frame_width - rem <= tol {
        frame += 1.0;
        rem = 0.0;
    }
    let tau = frame_width / n as f64;
    let mut bin = (rem / tau).floor().max(0.0) as usize;
    if (bin + 1) as f64 * tau - rem <= tol {
        bin += 1;
    }
    if bin >= n {
        frame += 1.0;
        bin = 0;
    }
    (frame as i64, bin)
}

/// Number of whole frames in `[0, window)`.
pub fn frame_count(window: f64, frame_width: f64) -> u64 {
    let x = window / frame_width;
    let r = x.round();
    if (x - r).abs() <= 1e-9 * r.max(1.0) {
        r as u64
    } else {
        x.floor() as u64
    }
}

/// Bins every timestamp; frames without events are emitted empty and events
/// in a trailing partial frame are ignored.
pub fn bin_frames(
    record: &DetectionRecord,
    frame_width: f64,
    n: usize,
) -> Result<Vec<FrameOccupancy>> {
    if !(frame_width > 0.0) || !frame_width.is_finite() {
        return Err(Error::domain("frame_width", frame_width, "frame_width > 0"));
    }
    if n < 1 {
        return Err(Error::domain("n", 0.0, "n >= 1"));
    }
    let total = frame_count(record.window, frame_width);
    let mut frames: Vec<FrameOccupancy> = (0..total)
        .map(|frame_index| FrameOccupancy {
            frame_index,
            occupied_bins: Vec::new(),
        })
        .collect();
    for t in record.timestamps() {
        let (f, b) = locate(t, frame_width, n);
        if f >= 0 && (f as u64) < total {
            let bins = &mut frames[f as usize].occupied_bins;
            if bins.last() != Some(&b) {
                bins.push(b);
            }
        }
    }
    for f in &mut frames {
        f.occupied_bins.sort_unstable();
        f.occupied_bins.dedup();
    }
    Ok(frames)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum RawBits {
    /// Symbols written in binary, most significant bit first.
    Bits(String),
    /// `n` is not a power of two, so symbols have no fixed-width bit form.
    NotPowerOfTwo,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PpmExtraction {
    pub n: usize,
    /// `(frame_index, symbol)` of every frame with exactly one occupied bin.
    pub retained: Vec<(u64, usize)>,
    pub discarded: u64,
    pub total_frames: u64,
    /// Occupied bins over all frames.
    pub occupied_bins: u64,
    pub bits: RawBits,
}

impl PpmExtraction {
    pub fn retained_fraction(&self) -> f64 {
        self.retained.len() as f64 / self.total_frames.max(1) as f64
    }

    /// Writes `frame_index,symbol` rows under a header.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "frame_index,symbol")?;
        for (f, s) in &self.retained {
            writeln!(w, "{f},{s}")?;
        }
        Ok(())
    }
}

/// Keeps frames with exactly one occupied bin and encodes their symbols.
pub fn ppm_extract(frames: &[FrameOccupancy], n: usize) -> Result<PpmExtraction> {
    if n < 1 {
        return Err(Error::domain("n", 0.0, "n >= 1"));
    }
    let mut retained = Vec::new();
    let mut occupied = 0u64;
    for f in frames {
        if let Some(&b) = f.occupied_bins.iter().find(|&&b| b >= n) {
            return Err(Error::domain("bin", b as f64, "bin < n"));
        }
        occupied += f.occupied_bins.len() as u64;
        if let [s] = f.occupied_bins[..] {
            retained.push((f.frame_index, s));
        }
    }
    let bits = if n.is_power_of_two() {
        let width = n.trailing_zeros() as usize;
        let mut s = String::with_capacity(retained.len() * width);
        for &(_, sym) in &retained {
            for i in (0..width).rev() {
                s.push(if sym >> i & 1 == 1 { '1' } else { '0' });
            }
        }
        RawBits::Bits(s)
    } else {
        RawBits::NotPowerOfTwo
    };
    Ok(PpmExtraction {
        n,
        discarded: frames.len() as u64 - retained.len() as u64,
        total_frames: frames.len() as u64,
        occupied_bins: occupied,
        retained,
        bits,
    })
}

/// A proportion with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub std_err: f64,
    pub trials: u64,
}

impl Estimate {
    pub fn proportion(successes: u64, trials: u64) -> Option<Self> {
        if trials == 0 {
            return None;
        }
        let value = successes as f64 / trials as f64;
        Some(Estimate {
            value,
            std_err: (value * (1.0 - value) / trials as f64).sqrt(),
            trials,
        })
    }

    /// `|value - expected|` in standard errors; a zero standard error counts
    /// only an exact match as agreement.
    pub fn z_score(&self, expected: f64) -> f64 {
        let diff = (self.value - expected).abs();
        if self.std_err > 0.0 {
            diff / self.std_err
        } else if diff == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalStats {
    /// Fraction of co-retained frames whose symbols differ; `None` when no
    /// frame was retained by both stations.
    pub rod: Option<Estimate>,
    /// Fraction of frames retained by both stations.
    pub coincident_retained: Option<Estimate>,
    /// Fraction of Alice's bins that are occupied.
    pub occupancy: Option<Estimate>,
    pub co_retained: u64,
}

/// Compares the two stations on the frames both of them kept (frame indices
/// are assumed to be exchanged publicly).
pub fn empirical_stats(alice: &PpmExtraction, bob: &PpmExtraction) -> Result<EmpiricalStats> {
    if alice.n != bob.n || alice.total_frames != bob.total_frames {
        return Err(Error::Undefined(
            "statistics over differently framed extractions",
        ));
    }
    let (mut i, mut j) = (0, 0);
    let (mut both, mut differ) = (0u64, 0u64);
    let (a, b) = (&alice.retained, &bob.retained);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                both += 1;
                differ += u64::from(a[i].1 != b[j].1);
                i += 1;
                j += 1;
            }
        }
    }
    Ok(EmpiricalStats {
        rod: Estimate::proportion(differ, both),
        coincident_retained: Estimate::proportion(both, alice.total_frames),
        occupancy: Estimate::proportion(alice.occupied_bins, alice.total_frames * alice.n as u64),
        co_retained: both,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn occ(frame_index: u64, bins: &[usize]) -> FrameOccupancy {
        FrameOccupancy {
            frame_index,
            occupied_bins: bins.to_vec(),
        }
    }

    #[test]
    fn four_bin_example() {
        let frames = [
            occ(0, &[0]),
            occ(1, &[1, 3]),
            occ(2, &[]),
            occ(3, &[3]),
            occ(4, &[]),
            occ(5, &[1]),
        ];
        let x = ppm_extract(&frames, 4).unwrap();
        let syms: Vec<usize> = x.retained.iter().map(|r| r.1).collect();
        assert_eq!(syms, [0, 3, 1]);
        assert_eq!(x.bits, RawBits::Bits("001101".into()));
        assert_eq!(x.discarded, 3);
    }

    #[test]
    fn non_power_of_two_marks_bits() {
        let x = ppm_extract(&[occ(0, &[2])], 3).unwrap();
        assert_eq!(x.retained, [(0, 2)]);
        assert_eq!(x.bits, RawBits::NotPowerOfTwo);
    }

    #[test]
    fn boundaries() {
        assert_eq!(locate(0.0, 330e-9, 8), (0, 0));
        for k in 1..1000 {
            let t = 330e-9 * k as f64;
            assert_eq!(locate(t, 330e-9, 8), (k, 0), "k={k}");
            let b = 330e-9 / 8.0 * 3.0 + t;
            assert_eq!(locate(b, 330e-9, 8), (k, 3), "k={k}");
        }
        assert_eq!(locate(330e-9 * 0.999, 330e-9, 8), (0, 7));
        assert_eq!(frame_count(3.0 * 330e-9, 330e-9), 3);
    }

    #[test]
    fn no_coincidences_is_undefined_rod() {
        let a = ppm_extract(&[occ(0, &[1]), occ(1, &[])], 4).unwrap();
        let b = ppm_extract(&[occ(0, &[]), occ(1, &[2])], 4).unwrap();
        let s = empirical_stats(&a, &b).unwrap();
        assert!(s.rod.is_none());
        assert_eq!(s.coincident_retained.unwrap().value, 0.0);
    }
}
