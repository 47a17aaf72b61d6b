mod common;

use common::integrate;
use proptest::prelude::*;
use tqkd::darkcount::{
    dc_transition_pmf, frame_event_probs, observed_jitter_pdf, ppm_valid_prob,
    reconciled_rate_time, spdc_weight, triangle_pmf, DarkCountRow, DarkCountScenario, MixturePdf,
};
use tqkd::jitter::{mutual_information, transition_pmf};
use tqkd::sim::{run_experiment, DetectOptions};
use tqkd::SystemParams;

const REF_SIGMA: f64 = 33.97e-12;
const REF_FRAME: f64 = 330e-9;

fn scenario(lambda_p: f64, lambda_dc: f64, tf: f64, n: usize, sigma: f64) -> DarkCountScenario {
    DarkCountScenario::new(lambda_p, lambda_dc, tf, n, sigma).unwrap()
}

fn ratio_grid() -> Vec<f64> {
    (0..=20).map(|i| i as f64 * 0.05).collect()
}

#[test]
fn single_event_probability_peaks_at_one_mean_event() {
    let tf = 1e-9;
    let grid: Vec<f64> = (50..=150).map(|i| i as f64 / 100.0).collect();
    let p1: Vec<f64> = grid
        .iter()
        .map(|&mu| frame_event_probs(mu / tf, tf).unwrap().0)
        .collect();
    let best = (0..grid.len())
        .max_by(|&a, &b| p1[a].total_cmp(&p1[b]))
        .unwrap();
    assert_eq!(grid[best], 1.0);
    assert!((p1[best] - (-1.0f64).exp()).abs() < 1e-15);
    for (&mu, &p) in grid.iter().zip(&p1) {
        let (_, p0) = frame_event_probs(mu / tf, tf).unwrap();
        assert!((p0 - (-mu).exp()).abs() < 1e-15);
        assert!((p - mu * (-mu).exp()).abs() < 1e-15);
    }
    assert!(frame_event_probs(-1.0, tf).is_err());
    assert!(frame_event_probs(1.0, 0.0).is_err());
}

#[test]
fn valid_probability_limits() {
    let tf = REF_FRAME;
    // No dark counts: only the pair term remains.
    let s = scenario(2e6, 0.0, tf, 64, 0.0);
    let v = ppm_valid_prob(&s).unwrap();
    let mu = 2e6 * tf;
    assert_eq!(v.dark_term, 0.0);
    assert!((v.total - mu * (-mu).exp()).abs() < 1e-15);
    // Vanishing pair rate: only coincident dark counts remain.
    let s = scenario(1e-3, 3e6, tf, 64, 0.0);
    let v = ppm_valid_prob(&s).unwrap();
    let m = 3e6 * tf;
    let want = (m * (-m).exp()).powi(2);
    assert!((v.total - want).abs() / want < 1e-6);
    assert!(spdc_weight(&s).unwrap() < 1e-6);
}

#[test]
fn spdc_weight_falls_with_dark_counts_and_frame_width() {
    let base = scenario(1e6, 0.0, REF_FRAME, 1024, REF_SIGMA);
    assert_eq!(spdc_weight(&base).unwrap(), 1.0);
    let cs: Vec<f64> = ratio_grid()
        .iter()
        .map(|&r| spdc_weight(&scenario(1e6, r * 1e6, REF_FRAME, 1024, REF_SIGMA)).unwrap())
        .collect();
    assert!(cs.windows(2).all(|w| w[1] < w[0]), "{cs:?}");
    let widths = [1e-9, 2e-9, 5e-9, 1e-8, 5e-8, 1e-7];
    let cs: Vec<f64> = widths
        .iter()
        .map(|&tf| spdc_weight(&scenario(1e8, 1e7, tf, 64, REF_SIGMA)).unwrap())
        .collect();
    assert!(cs.windows(2).all(|w| w[1] < w[0]), "{cs:?}");
}

#[test]
fn mixture_density_is_normalised_and_symmetric() {
    for tf in [1e-9, 5e-9] {
        let pdf = observed_jitter_pdf(&scenario(1e8, 1e7, tf, 1024, REF_SIGMA)).unwrap();
        let step = pdf.gaussian_std / 400.0;
        let mass = integrate(|t| pdf.density(t), -tf, 0.0, step)
            + integrate(|t| pdf.density(t), 0.0, tf, step);
        assert!((mass - 1.0).abs() < 1e-6, "tf={tf}: {mass}");
        for i in 1..200 {
            let t = tf * i as f64 / 200.0;
            assert_eq!(pdf.density(t), pdf.density(-t));
        }
        for x in [0.5 * pdf.gaussian_std, 3.0 * pdf.gaussian_std, 0.3 * tf] {
            let want = 2.0 * integrate(|t| pdf.density(t), x, tf, step);
            assert!(
                (pdf.tail_mass(x) - want).abs() < 1e-9,
                "x={x}: {} vs {want}",
                pdf.tail_mass(x)
            );
        }
    }
}

#[test]
fn wider_frames_have_heavier_tails() {
    let pdf = |tf| observed_jitter_pdf(&scenario(1e8, 1e7, tf, 1024, REF_SIGMA)).unwrap();
    let (short, long) = (pdf(1e-9), pdf(5e-9));
    let x = 5.0 * std::f64::consts::SQRT_2 * REF_SIGMA;
    assert!(long.tail_mass(x) > short.tail_mass(x));
    let step = short.gaussian_std / 40.0;
    let tail = |m: &MixturePdf, w: f64| 2.0 * integrate(|t| m.density(t), x, w, step);
    assert!(tail(&long, 5e-9) > tail(&short, 1e-9));
}

#[test]
fn triangle_pmf_matches_quadrature() {
    for n in [1usize, 2, 5, 16, 100] {
        let nf = n as f64;
        let tri = MixturePdf {
            weight_spdc: 0.0,
            gaussian_std: 1.0,
            half_width: nf,
        };
        let pmf = triangle_pmf(n);
        for k in -(n as i64)..=n as i64 {
            let kf = k as f64;
            let (a, b) = ((kf - 0.5).max(-nf), (kf + 0.5).min(nf));
            let want = if k == 0 {
                2.0 * integrate(|t| tri.density(t), 0.0, 0.5, 1e-3)
            } else {
                integrate(|t| tri.density(t), a, b, 1e-3)
            };
            assert!((pmf.get(k) - want).abs() < 1e-13, "n={n} k={k}");
        }
        assert!((pmf.total() - 1.0).abs() < 1e-13);
    }
}

#[test]
fn dark_counts_widen_the_transition_pmf() {
    let sr = REF_SIGMA / REF_FRAME;
    let g = transition_pmf(1024, sr).unwrap();
    for r in [0.05, 0.5, 1.0] {
        let mixed = dc_transition_pmf(&scenario(1e6, r * 1e6, REF_FRAME, 1024, REF_SIGMA)).unwrap();
        assert!(mixed.variance() > g.variance());
        assert!((mixed.total() - 1.0).abs() < 1e-12);
        assert!(mixed.is_symmetric(1e-15));
    }
}

#[test]
fn zero_dark_counts_reduce_to_jitter_channel() {
    for &(n, tf, sigma) in &[
        (1024usize, REF_FRAME, REF_SIGMA),
        (64, 5e-9, REF_SIGMA),
        (16, 1e-9, 0.0),
    ] {
        let s = scenario(1e6, 0.0, tf, n, sigma);
        let sr = sigma / tf;
        let g = transition_pmf(n, sr).unwrap();
        let m = dc_transition_pmf(&s).unwrap();
        let bound = g.bound().max(m.bound()) as i64;
        for k in -bound..=bound {
            assert!((g.get(k) - m.get(k)).abs() < 1e-12, "n={n} k={k}");
        }
        let r = reconciled_rate_time(&s).unwrap();
        let mi = mutual_information(n, sr).unwrap().bits;
        assert!((r.bits_per_frame - mi).abs() < 1e-12);
        assert_eq!(r.c_weight, 1.0);
        let (p1, _) = frame_event_probs(1e6, tf).unwrap();
        assert!((r.p_ppm - p1).abs() < 1e-12);
        assert!((r.bits_per_second - p1 / tf * mi).abs() < 1e-12 * r.bits_per_second.max(1.0));
    }
}

#[test]
fn clean_rate_is_one_symbol_per_kept_frame() {
    for n in [2usize, 16, 1024] {
        let s = scenario(3e6, 0.0, REF_FRAME, n, 0.0);
        let r = reconciled_rate_time(&s).unwrap();
        let mu = 3e6 * REF_FRAME;
        let want = mu * (-mu).exp() / REF_FRAME * (n as f64).log2();
        assert!((r.bits_per_second - want).abs() / want < 1e-14);
    }
}

#[test]
fn reconciled_rate_falls_with_dark_count_ratio() {
    let configs = [
        (1e6, REF_FRAME, 1024usize, REF_SIGMA),
        (3e6, REF_FRAME, 19429, REF_SIGMA),
        (1e8, 1e-9, 32, REF_SIGMA),
        (1e8, 5e-9, 128, REF_SIGMA),
    ];
    for (lp, tf, n, sigma) in configs {
        let base = scenario(lp, 0.0, tf, n, sigma);
        let rates: Vec<f64> = ratio_grid()
            .iter()
            .map(|&r| {
                DarkCountRow::compute(&base, r)
                    .unwrap()
                    .reconciled_bits_per_s
            })
            .collect();
        assert!(
            rates.windows(2).all(|w| w[1] < w[0]),
            "lp={lp} tf={tf}: {rates:?}"
        );
    }
}

#[test]
fn coincident_dark_term_is_quadratic() {
    // log-log slope of the dark term over a small-rate grid
    let xs: Vec<f64> = (0..=8).map(|i| 1e2 * 10f64.powf(i as f64 / 4.0)).collect();
    let ys: Vec<f64> = xs
        .iter()
        .map(|&l| {
            ppm_valid_prob(&scenario(1e6, l, REF_FRAME, 1024, REF_SIGMA))
                .unwrap()
                .dark_term
        })
        .collect();
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let m = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / m, ly.iter().sum::<f64>() / m);
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    assert!((slope - 2.0).abs() < 0.05, "{slope}");
}

#[test]
fn valid_probability_matches_simulated_co_retention() {
    let tf = REF_FRAME;
    let lp = 1.0 / tf;
    for (i, ratio) in [0.01, 0.1, 1.0].into_iter().enumerate() {
        let p = SystemParams {
            lambda_p: lp,
            lambda_dc: ratio * lp,
            frame_width: tf,
            bins_per_frame: 1024,
            sigma_d: 0.0,
            downtime_bins: 0,
            downtime_seconds: None,
            reconciliation_efficiency: 1.0,
        };
        let e = run_experiment(&p, 100_000, 40 + i as u64, DetectOptions::default()).unwrap();
        let got = e.stats.coincident_retained.unwrap();
        let want = ppm_valid_prob(&DarkCountScenario::from_params(&p).unwrap())
            .unwrap()
            .total;
        assert!(
            got.z_score(want) < 3.0,
            "ratio={ratio}: {} vs {want}",
            got.value
        );
    }
}

proptest! {
    #[test]
    fn weight_and_probabilities_are_bounded(
        log_lp in 4.0f64..8.0,
        ratio in 0.0f64..2.0,
        log_tf in -9.0f64..-6.5,
    ) {
        let (lp, tf) = (10f64.powf(log_lp), 10f64.powf(log_tf));
        let s = scenario(lp, ratio * lp, tf, 64, REF_SIGMA);
        let v = ppm_valid_prob(&s).unwrap();
        prop_assert!(v.total > 0.0 && v.total <= 1.0);
        prop_assert_eq!(v.total, v.spdc_term + v.dark_term);
        let c = spdc_weight(&s).unwrap();
        prop_assert!((0.0..=1.0).contains(&c));
        let r = reconciled_rate_time(&s).unwrap();
        prop_assert!(r.bits_per_frame >= 0.0 && r.bits_per_frame <= 6.0);
    }
}
