mod common;

use std::collections::BTreeSet;

use common::{admissible_masks, choose, h2, pattern_probs_oracle};
use proptest::prelude::*;
use tqkd::downtime::{
    adjusted_rate, bmcm_state_count, build_detector_chain, build_imc, build_omc, compression_ratio,
    detector_chain_bound, frame_distribution, raw_rate, rmcm_state_count, rule_of_thumb,
    select_method, stationary_distribution, valid_frame_prob, FrameChain, ImcMethod, StateLabel,
    StationaryOptions,
};
use tqkd::sim::{pattern_counts, simulate_frame_patterns, valid_symbol_transitions};

fn stationary(c: &FrameChain) -> tqkd::downtime::StationaryResult {
    c.stationary(StationaryOptions::default()).unwrap()
}

fn eq4(n: usize, p: f64) -> f64 {
    (n as f64).log2() * n as f64 * p * (1.0 - p).powi(n as i32 - 1)
}

#[test]
fn published_state_counts() {
    for (n, d, b, r) in [(2, 1, 3, 5), (4, 1, 8, 9), (4, 0, 16, 5)] {
        assert_eq!(bmcm_state_count(n, d).unwrap(), b);
        assert_eq!(rmcm_state_count(n, d).unwrap(), r);
    }
    for n in 1..=40 {
        assert_eq!(bmcm_state_count(n, 0).unwrap(), 1u64 << n);
    }
}

#[test]
fn built_chains_have_formula_state_counts() {
    for n in 1..=16 {
        for d in 0..=n {
            let b = build_imc(n, d, 0.4, ImcMethod::Bmcm).unwrap();
            assert_eq!(
                b.states() as u64,
                bmcm_state_count(n, d).unwrap(),
                "BMCM n={n} d={d}"
            );
            let r = build_imc(n, d, 0.4, ImcMethod::Rmcm).unwrap();
            assert_eq!(
                r.states() as u64,
                rmcm_state_count(n, d).unwrap(),
                "RMCM n={n} d={d}"
            );
        }
    }
}

#[test]
fn bmcm_states_are_the_admissible_patterns() {
    for n in 1..=12 {
        for d in 0..=n {
            let chain = build_imc(n, d, 0.5, ImcMethod::Bmcm).unwrap();
            let got: BTreeSet<u64> = chain
                .labels()
                .iter()
                .map(|l| match *l {
                    StateLabel::Occupancy { mask, .. } => mask,
                    other => panic!("unexpected label {other}"),
                })
                .collect();
            assert_eq!(got.len(), chain.states());
            let want: BTreeSet<u64> = admissible_masks(n, d).into_iter().collect();
            assert_eq!(got, want, "n={n} d={d}");
        }
    }
}

#[test]
fn two_bin_basic_chain() {
    let p = 0.3;
    let q = 1.0 - p;
    let c = build_imc(2, 1, p, ImcMethod::Bmcm).unwrap();
    let names: Vec<String> = c.labels().iter().map(|l| l.to_string()).collect();
    let mut sorted = names.clone();
    sorted.sort();
    assert_eq!(sorted, ["00", "01", "10"]);
    let idx = |s: &str| names.iter().position(|x| x == s).unwrap();
    let t = c.transitions();
    // After "00" or "10" the detector is ready at the frame start.
    for from in ["00", "10"] {
        assert!((t.prob(idx(from), idx("00")) - q * q).abs() < 1e-15);
        assert!((t.prob(idx(from), idx("10")) - p).abs() < 1e-15);
        assert!((t.prob(idx(from), idx("01")) - q * p).abs() < 1e-15);
    }
    // After "01" the first bin is blind.
    assert!((t.prob(idx("01"), idx("00")) - q).abs() < 1e-15);
    assert!((t.prob(idx("01"), idx("01")) - p).abs() < 1e-15);
    assert_eq!(t.prob(idx("01"), idx("10")), 0.0);
}

#[test]
fn reduced_chain_without_downtime_is_binomial() {
    let p = 0.35;
    let c = build_imc(4, 0, p, ImcMethod::Rmcm).unwrap();
    assert_eq!(c.states(), 5);
    let st = stationary(&c);
    for (label, &pi) in c.labels().iter().zip(&st.distribution) {
        let StateLabel::Triplet {
            d_o: 0,
            n_1: k,
            d_i: 0,
        } = *label
        else {
            panic!("unexpected label {label}");
        };
        let want = choose(4, k as u64) as f64 * p.powi(k as i32) * (1.0 - p).powi(4 - k as i32);
        assert!((pi - want).abs() < 1e-12, "k={k}");
    }
}

#[test]
fn basic_chain_without_downtime_is_independent() {
    let (n, p) = (6, 0.27);
    let c = build_imc(n, 0, p, ImcMethod::Bmcm).unwrap();
    let st = stationary(&c);
    for (label, &pi) in c.labels().iter().zip(&st.distribution) {
        let StateLabel::Occupancy { mask, .. } = *label else {
            unreachable!()
        };
        let k = mask.count_ones() as i32;
        let want = p.powi(k) * (1.0 - p).powi(n as i32 - k);
        assert!((pi - want).abs() < 1e-12);
    }
}

#[test]
fn raw_rate_without_downtime_is_independent_ppm() {
    for n in [2usize, 3, 4, 8, 12, 16] {
        for p in [0.05, 0.1, 0.3, 0.5, 0.9] {
            let c = build_imc(n, 0, p, ImcMethod::Rmcm).unwrap();
            let r = raw_rate(&c, &stationary(&c));
            assert!((r - eq4(n, p)).abs() < 1e-10, "n={n} p={p}");
            assert!((adjusted_rate(n, 0, p).unwrap().adjusted_rate - eq4(n, p)).abs() < 1e-10);
        }
    }
}

#[test]
fn saturated_two_bin_frame_yields_one_bit() {
    let c = build_imc(2, 1, 1.0 - 1e-9, ImcMethod::Bmcm).unwrap();
    assert!((raw_rate(&c, &stationary(&c)) - 1.0).abs() < 1e-6);
}

#[test]
fn methods_agree_on_raw_rate() {
    for n in 1..=12 {
        for d in 0..=n {
            for p in [0.1, 0.5, 0.9] {
                let b = build_imc(n, d, p, ImcMethod::Bmcm).unwrap();
                let r = build_imc(n, d, p, ImcMethod::Rmcm).unwrap();
                let (sb, sr) = (stationary(&b), stationary(&r));
                let (rb, rr) = (raw_rate(&b, &sb), raw_rate(&r, &sr));
                assert!((rb - rr).abs() < 1e-10, "n={n} d={d} p={p}: {rb} vs {rr}");
                assert!((valid_frame_prob(&b, &sb) - valid_frame_prob(&r, &sr)).abs() < 1e-10);
            }
        }
    }
}

#[test]
fn frame_distributions_match_bin_level_oracle() {
    for n in 1..=10 {
        for d in 0..=n {
            for p in [0.2, 0.7] {
                let want = pattern_probs_oracle(n, d, p);
                for method in [ImcMethod::Bmcm, ImcMethod::Rmcm] {
                    let c = build_imc(n, d, p, method).unwrap();
                    let got = frame_distribution(&c, &stationary(&c)).unwrap();
                    let keys: BTreeSet<u64> = got.keys().chain(want.keys()).copied().collect();
                    for k in keys {
                        let (g, w) = (
                            got.get(&k).copied().unwrap_or(0.0),
                            want.get(&k).copied().unwrap_or(0.0),
                        );
                        assert!(
                            (g - w).abs() < 1e-10,
                            "{method:?} n={n} d={d} p={p} mask={k:b}: {g} vs {w}"
                        );
                    }
                }
            }
        }
    }
}

#[test]
fn detector_chain_matches_bound() {
    for (p, d) in [(0.3, 1), (0.9, 3), (0.5, 5), (0.2, 0)] {
        let c = build_detector_chain(p, d).unwrap();
        let st = stationary(&c);
        let ready = c.index_of(&if d == 0 {
            StateLabel::Idle
        } else {
            StateLabel::Ready
        });
        if d > 0 {
            assert!((st.distribution[ready.unwrap()] - 1.0 / (1.0 + p * d as f64)).abs() < 1e-12);
        }
        let b = detector_chain_bound(p, d, 8).unwrap();
        let want = h2(p) / (1.0 + p * d as f64);
        assert!((st.entropy_rate - want).abs() < 1e-10, "p={p} d={d}");
        assert!((b.per_bin - want).abs() < 1e-12);
        assert!((b.per_frame - 8.0 * want).abs() < 1e-12);
        assert!((b.as_printed - want / 8.0).abs() < 1e-12);
    }
    assert_eq!(detector_chain_bound(1.0, 3, 4).unwrap().per_frame, 0.0);
    assert!((detector_chain_bound(0.4, 0, 4).unwrap().per_frame - 4.0 * h2(0.4)).abs() < 1e-12);
}

#[test]
fn method_choice() {
    assert_eq!(select_method(16, 12).unwrap(), ImcMethod::Bmcm);
    assert_eq!(select_method(16, 2).unwrap(), ImcMethod::Rmcm);
    for n in 1..=16 {
        for d in 0..=n {
            let b = admissible_masks(n, d).len() as u64;
            let r = rmcm_state_count(n, d).unwrap();
            let want = if b < r {
                ImcMethod::Bmcm
            } else {
                ImcMethod::Rmcm
            };
            assert_eq!(select_method(n, d).unwrap(), want, "n={n} d={d}");
        }
    }
}

#[test]
fn rule_of_thumb_census() {
    // The half-frame rule only errs towards the reduced method, and agrees
    // with the exact choice on a little over 80% of the grid n <= 24.
    let (mut agree, mut total) = (0, 0);
    for n in 1..=24 {
        for d in 0..=n {
            total += 1;
            let exact = select_method(n, d).unwrap();
            if exact == rule_of_thumb(n, d) {
                agree += 1;
            } else {
                assert_eq!(exact, ImcMethod::Bmcm, "n={n} d={d}");
            }
        }
    }
    assert_eq!((agree, total), (263, 324));
}

#[test]
fn degenerate_occupancy_rejected() {
    for p in [0.0, 1.0, -0.1, f64::NAN] {
        assert!(build_imc(4, 1, p, ImcMethod::Bmcm).is_err());
        assert!(build_omc(4, 1, p).is_err());
    }
    assert!(build_imc(4, 5, 0.5, ImcMethod::Rmcm).is_err());
}

#[test]
fn basic_chain_stationary_matches_bin_simulation() {
    let (n, d, p) = (4, 1, 0.5);
    let frames = 10_000_000 / n;
    let c = build_imc(n, d, p, ImcMethod::Bmcm).unwrap();
    let st = stationary(&c);
    let counts = pattern_counts(&simulate_frame_patterns(n, d, p, frames, 11).unwrap());
    for (label, &pi) in c.labels().iter().zip(&st.distribution) {
        let StateLabel::Occupancy { mask, .. } = *label else {
            unreachable!()
        };
        let k = counts.get(&mask).copied().unwrap_or(0) as f64;
        let nf = frames as f64;
        let z = common::z(k / nf, pi, pi * (1.0 - pi) / nf);
        assert!(z < 3.0, "{label}: {} vs {pi} (z={z:.2})", k / nf);
    }
    assert_eq!(counts.len(), c.states());
}

#[test]
fn output_chain_matches_bin_simulation() {
    let (n, d, p) = (4, 2, 0.7);
    let omc = build_omc(n, d, p).unwrap();
    let patterns = simulate_frame_patterns(n, d, p, 10_000_000 / n, 5).unwrap();
    let counts = valid_symbol_transitions(&patterns, n);
    for (i, row) in counts.iter().enumerate() {
        let total: u64 = row.iter().sum();
        assert!(total > 10_000);
        for (j, &c) in row.iter().enumerate() {
            let pij = omc.transitions().prob(i, j);
            let z = common::z(
                c as f64 / total as f64,
                pij,
                pij * (1.0 - pij) / total as f64,
            );
            assert!(
                z < 3.0,
                "{i}->{j}: {} vs {pij} (z={z:.2})",
                c as f64 / total as f64
            );
        }
    }
}

#[test]
fn output_chain_without_downtime_is_uniform() {
    for n in [2usize, 5, 16] {
        for p in [0.1, 0.5, 0.9] {
            let c = build_omc(n, 0, p).unwrap();
            for i in 0..n {
                for j in 0..n {
                    assert!((c.transitions().prob(i, j) - 1.0 / n as f64).abs() < 1e-12);
                }
            }
        }
    }
}

#[test]
fn saturated_two_bin_output_repeats() {
    let c = build_omc(2, 1, 1.0 - 1e-6).unwrap();
    assert!(c.transitions().prob(0, 0) > 0.999);
}

#[test]
fn compression_ratio_properties() {
    for n in [2usize, 4, 16, 64] {
        for k in 1..=9 {
            let p = k as f64 / 10.0;
            let cr = compression_ratio(&build_omc(n, 0, p).unwrap()).unwrap();
            assert!((cr - 1.0).abs() < 1e-10, "n={n} p={p}");
        }
    }
    assert!(compression_ratio(&build_omc(2, 1, 1.0 - 1e-4).unwrap()).unwrap() < 0.01);
    for p in [0.5, 0.9, 0.99] {
        let cs: Vec<f64> = (0..=8)
            .map(|d| compression_ratio(&build_omc(16, d, p).unwrap()).unwrap())
            .collect();
        assert!(cs.windows(2).all(|w| w[1] <= w[0] + 1e-12), "p={p}: {cs:?}");
        assert!(cs.iter().all(|c| (0.0..=1.0).contains(c)));
    }
}

#[test]
fn adjusted_rate_vanishes_when_saturated() {
    for d in 1..=3 {
        let a = adjusted_rate(4, d, 1.0 - 1e-9).unwrap();
        assert!(a.adjusted_rate < 1e-3, "d={d}: {}", a.adjusted_rate);
    }
}

#[test]
fn adjusted_rate_grows_with_bins_at_fixed_time_downtime() {
    // lambda_p T_f = 2.3 and downtime fixed at a fraction of the frame.
    for frac in [0.125, 0.25, 0.5] {
        let ns: Vec<usize> = (1..=7)
            .map(|k| 1usize << k)
            .filter(|&n| n as f64 * frac >= 1.0)
            .collect();
        let rates: Vec<f64> = ns
            .iter()
            .map(|&n| {
                let p = -(-2.3 / n as f64).exp_m1();
                let d = (n as f64 * frac).round() as usize;
                adjusted_rate(n, d, p).unwrap().adjusted_rate
            })
            .collect();
        assert!(
            rates.windows(2).all(|w| w[1] > w[0]),
            "frac={frac}: {rates:?}"
        );
    }
}

#[test]
fn adjusted_rate_is_unimodal_in_p() {
    let ps: Vec<f64> = (1..100).map(|k| k as f64 / 100.0).collect();
    for (n, d) in [(4, 1), (8, 2), (16, 4)] {
        let r: Vec<f64> = ps
            .iter()
            .map(|&p| adjusted_rate(n, d, p).unwrap().adjusted_rate)
            .collect();
        let peak = r
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert!(r[..=peak].windows(2).all(|w| w[1] >= w[0]), "n={n} d={d}");
        assert!(r[peak..].windows(2).all(|w| w[1] <= w[0]), "n={n} d={d}");
    }
}

#[test]
fn stationary_tolerance_is_met() {
    let c = build_imc(10, 3, 0.6, ImcMethod::Rmcm).unwrap();
    let st = stationary_distribution(&c, 1e-12).unwrap();
    assert!(st.residual <= 1e-12);
    assert!((st.distribution.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert!(st.entropy_rate >= 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn entropy_bounds(n in 1usize..=10, dfrac in 0.0f64..=1.0, p in 0.01f64..0.99) {
        let d = (dfrac * n as f64).round() as usize;
        let mut chains = vec![
            build_imc(n, d, p, ImcMethod::Bmcm).unwrap(),
            build_imc(n, d, p, ImcMethod::Rmcm).unwrap(),
            build_omc(n, d, p).unwrap(),
            build_detector_chain(p, d).unwrap(),
        ];
        for c in chains.drain(..) {
            let st = stationary(&c);
            prop_assert!(st.entropy_rate <= (c.states() as f64).log2() + 1e-12, "{}", c.kind);
            for s in 0..c.states() {
                prop_assert!((c.transitions().row_sum(s) - 1.0).abs() < 1e-12);
            }
        }
        if n >= 2 {
            let a = adjusted_rate(n, d, p).unwrap();
            let per_bin = a.adjusted_rate / n as f64;
            prop_assert!(per_bin <= h2(p) / (1.0 + p * d as f64) + 1e-9);
        }
    }

    #[test]
    fn rows_are_products_of_occupancy_factors(n in 1usize..=8, d in 0usize..=8, p in 0.05f64..0.95) {
        prop_assume!(d <= n);
        let c = build_imc(n, d, p, ImcMethod::Bmcm).unwrap();
        let q = 1.0 - p;
        for s in 0..c.states() {
            for &(t, pr) in c.transitions().row(s) {
                // Some product p^a q^b with a + b <= n.
                let found = (0..=n).any(|a| (0..=n - a).any(|b| {
                    (p.powi(a as i32) * q.powi(b as i32) - pr).abs() <= 1e-14
                }));
                prop_assert!(found, "{} -> {}: {pr}", c.labels()[s], c.labels()[t]);
            }
        }
    }
}
