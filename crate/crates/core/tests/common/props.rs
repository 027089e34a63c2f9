// SPDX-License-Identifier: MIT OR Apache-2.0

//! Property suites shared by the standalone property tests and the acceptance run.

use covchange::channel::{one_ring_raw, Link, Observer, ONE_RING_REPAIR_TOL};
use covchange::detection::{llr_closed_form, llr_from_sample, sample_covariance};
use covchange::linalg::is_hermitian;
use covchange::report::{parse_csv, sort_rows, to_csv, ResultRow};
use covchange::{
    decide, discrimination, llr_statistic, make_dft_pilots, observe_and_estimate, one_ring_covariance, Error,
    Hypothesis, ObservationSet, OneRingParams, SystemParams,
};
use num_complex::Complex64;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};

use super::{random_blocks, random_cov, rel_close};

pub const CASES: u32 = 1000;

pub type Suite = fn(u32) -> Result<(), String>;

fn run<S: Strategy>(
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String> {
    let mut runner = TestRunner::new(Config { cases, failure_persistence: None, ..Config::default() });
    runner.run(&strategy, test).map_err(|e| e.to_string())
}

pub fn llr_antisymmetry(cases: u32) -> Result<(), String> {
    run(cases, (any::<u64>(), 1usize..=6, 1usize..=12, 0.01f64..2.0), |(seed, m, k, n)| {
        let c0 = random_cov(seed, m, 0.0);
        let c1 = random_cov(seed ^ 0x55, m, 0.0);
        let obs = ObservationSet::new(random_blocks(seed, m, k, 1.0 + n), n).unwrap();
        let fwd = llr_statistic(&obs, &c0, &c1).unwrap();
        let rev = llr_statistic(&obs, &c1, &c0).unwrap();
        let scale: f64 = fwd.per_block.iter().map(|v| v.abs()).sum();
        prop_assert!((fwd.value + rev.value).abs() <= 1e-9 * scale.max(1.0));
        prop_assert!(rel_close(fwd.value, fwd.per_block.iter().sum(), 1e-9));
        Ok(())
    })
}

pub fn route_equivalence(cases: u32) -> Result<(), String> {
    run(cases, (any::<u64>(), 1usize..=6, 1usize..=12, 0.01f64..2.0), |(seed, m, k, n)| {
        let c0 = random_cov(seed, m, 0.0);
        let c1 = random_cov(seed.wrapping_add(1), m, 0.0);
        let obs = ObservationSet::new(random_blocks(seed, m, k, 1.0 + n), n).unwrap();
        let direct = llr_statistic(&obs, &c0, &c1).unwrap().value;
        let sample = sample_covariance(&obs).unwrap();
        let pair = discrimination(&c0, &c1, n).unwrap();
        let closed = llr_closed_form(&pair, &sample, k);
        let via_sample = llr_from_sample(&sample, k, &c0, &c1, n).unwrap();
        prop_assert!(rel_close(direct, closed, 1e-8), "direct {direct} closed {closed}");
        prop_assert!(rel_close(direct, via_sample, 1e-8), "direct {direct} sample {via_sample}");
        Ok(())
    })
}

pub fn monotone_threshold(cases: u32) -> Result<(), String> {
    run(cases, (-1e6f64..1e6, -1e6f64..1e6, 0f64..1e6), |(s, t, dt)| {
        let low = decide(s, t).unwrap().hypothesis;
        let high = decide(s, t + dt).unwrap().hypothesis;
        prop_assert!(!(low == Hypothesis::H0 && high == Hypothesis::H1));
        prop_assert_eq!(decide(s, s).unwrap().hypothesis, Hypothesis::H0);
        Ok(())
    })
}

pub fn one_ring_invariants(cases: u32) -> Result<(), String> {
    run(cases, (1usize..=8, 0f64..std::f64::consts::TAU, 0f64..=45.0), |(m, aod, spread_deg)| {
        let params = OneRingParams {
            aod_rad: aod,
            spread_rad: spread_deg.to_radians(),
            quadrature_points: 512,
            ..OneRingParams::default()
        };
        let raw = one_ring_raw(&params, m).unwrap();
        for i in 0..m {
            prop_assert!((raw[(i, i)] - Complex64::new(1.0, 0.0)).norm() < 1e-10);
        }
        match one_ring_covariance(&params, m) {
            Ok(c) => {
                prop_assert!(is_hermitian(c.matrix(), 1e-12));
                let eig = c.eigen();
                prop_assert!(eig.min() >= -1e-10 * eig.max());
                // Flooring negative eigenvalues moves the diagonal by at most |λ_min|.
                for i in 0..m {
                    prop_assert!((c.matrix()[(i, i)].re - 1.0).abs() <= ONE_RING_REPAIR_TOL * eig.max() + 1e-12);
                }
            }
            Err(e) => prop_assert!(matches!(e, Error::ModelFidelity(_)), "unexpected {e}"),
        }
        Ok(())
    })
}

fn label() -> impl Strategy<Value = String> {
    prop_oneof![
        Just("genie".to_string()),
        Just("shrinkage".to_string()),
        (1.01f64..10.0).prop_map(|k| format!("ml(kappa={k})")),
        "[a-z_()=;.0-9]{1,12}",
    ]
}

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![-1e6f64..1e6, Just(0.0), any::<f64>().prop_filter("finite", |v| v.is_finite())]
}

pub fn result_row() -> impl Strategy<Value = ResultRow> {
    (
        label(),
        1usize..500,
        0f64..10.0,
        finite(),
        (0f64..=1.0, 0f64..=1.0),
        prop::option::of((0f64..=1.0, 0f64..=1.0)),
        1usize..10_000_000,
        0f64..1e4,
    )
        .prop_map(|(detector, k, delta, threshold, (fa, md), analytic, trials, wall)| ResultRow {
            detector,
            k,
            delta_aod_deg: delta,
            threshold,
            p_fa_emp: fa,
            p_md_emp: md,
            p_fa_analytic: analytic.map(|a| a.0),
            p_md_analytic: analytic.map(|a| a.1),
            trials,
            wall_time_s: wall,
        })
}

pub fn csv_round_trip(cases: u32) -> Result<(), String> {
    run(cases, prop::collection::vec(result_row(), 1..20), |rows| {
        let text = to_csv(&rows).unwrap();
        let mut expected = rows.clone();
        sort_rows(&mut expected);
        prop_assert_eq!(parse_csv(&text).unwrap(), expected);
        Ok(())
    })
}

pub fn deterministic_seed(cases: u32) -> Result<(), String> {
    run(cases, (any::<u64>(), 1usize..=6, 1usize..=6, any::<bool>()), |(seed, m, k, uplink)| {
        let c = random_cov(seed, m, 0.0);
        let params = SystemParams::from_snr_db(m, m, k, k, 0.0).unwrap();
        let pilots = make_dft_pilots(m, m).unwrap();
        let link = if uplink { Link::Uplink } else { Link::Downlink };
        let a = observe_and_estimate(&c, &params, &pilots, link, seed).unwrap();
        let b = observe_and_estimate(&c, &params, &pilots, link, seed).unwrap();
        prop_assert_eq!(a.estimates, b.estimates);
        let observer = Observer::new(&c, &params, &pilots, link).unwrap();
        prop_assert_eq!(observer.draw(k, seed, &[3, 4]), observer.draw(k, seed, &[3, 4]));
        Ok(())
    })
}

/// The six suites with their names.
pub fn suites() -> Vec<(&'static str, Suite)> {
    vec![
        ("LLR antisymmetry", llr_antisymmetry),
        ("route equivalence", route_equivalence),
        ("monotone threshold", monotone_threshold),
        ("one-ring invariants", one_ring_invariants),
        ("CSV round-trip", csv_round_trip),
        ("deterministic seed", deterministic_seed),
    ]
}
