// SPDX-License-Identifier: MIT OR Apache-2.0

//! Browser bindings: covariance heatmap, analytic genie error curve and a
//! Monte Carlo ROC comparison of the two plug-in detectors.

use covchange::harness::{collect_statistics, DetectorSpec, ExperimentConfig, RingConfig, Scenario, SystemConfig};
use covchange::{one_ring_covariance, Error};
use wasm_bindgen::prelude::*;

fn js_err(e: Error) -> JsValue {
    JsValue::from_str(&e.to_string())
}

fn config(antennas: usize, aod_deg: f64, spread_deg: f64) -> ExperimentConfig {
    ExperimentConfig {
        system: SystemConfig { antennas, pilot_len: antennas, ..Default::default() },
        ring: RingConfig { aod_deg, spread_deg, ..Default::default() },
        ..Default::default()
    }
}

/// Row-major `|C[i][j]|` of the one-ring covariance, `antennas²` values.
#[wasm_bindgen]
pub fn covariance_magnitudes(antennas: usize, aod_deg: f64, spread_deg: f64) -> Result<Vec<f64>, JsValue> {
    let cfg = config(antennas, aod_deg, spread_deg);
    let cov = one_ring_covariance(&cfg.ring.params(), antennas).map_err(js_err)?;
    let m = cov.matrix();
    Ok((0..antennas).flat_map(|i| (0..antennas).map(move |j| m[(i, j)].norm())).collect())
}

/// Analytic equal-error probability of the genie detector for K = 1..=k_max.
#[wasm_bindgen]
pub fn genie_error_curve(
    antennas: usize,
    aod_deg: f64,
    spread_deg: f64,
    delta_aod_deg: f64,
    k_max: usize,
) -> Result<Vec<f64>, JsValue> {
    let cfg = config(antennas, aod_deg, spread_deg);
    (1..=k_max)
        .map(|k| {
            let scenario = Scenario::new(&cfg, k, delta_aod_deg)?;
            let rates = scenario.genie_model()?.equal_error_threshold()?.rates;
            Ok(0.5 * (rates.p_fa + rates.p_md))
        })
        .collect::<covchange::Result<Vec<f64>>>()
        .map_err(js_err)
}

/// Missed-detection rates at each false-alarm target, interleaved as
/// `[ml₀, shrinkage₀, ml₁, shrinkage₁, …]`, from shared Monte Carlo draws.
#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn roc_comparison(
    antennas: usize,
    aod_deg: f64,
    spread_deg: f64,
    delta_aod_deg: f64,
    k: usize,
    trials: usize,
    seed: u64,
    p_fa: &[f64],
) -> Result<Vec<f64>, JsValue> {
    if trials == 0 {
        return Err(JsValue::from_str("trials must be at least 1"));
    }
    let cfg = config(antennas, aod_deg, spread_deg);
    let run = || -> covchange::Result<Vec<f64>> {
        let scenario = Scenario::new(&cfg, k, delta_aod_deg)?;
        let detectors = [
            scenario.detector(&DetectorSpec::Ml { kappa: covchange::estimation::DEFAULT_KAPPA, beta: None })?,
            scenario.detector(&DetectorSpec::Shrinkage)?,
        ];
        let samples = collect_statistics(&scenario, &detectors, trials, seed, &[0])?;
        Ok(p_fa
            .iter()
            .flat_map(|&p| samples.iter().map(move |s| s.at_false_alarm(p).1.p_md))
            .collect())
    };
    run().map_err(js_err)
}
