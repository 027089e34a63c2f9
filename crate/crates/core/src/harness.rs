// SPDX-License-Identifier: MIT OR Apache-2.0

//! Monte Carlo experiments: genie-aided error curves, ROC sweeps for the
//! plug-in detectors and a frame-by-frame protocol simulation.
//!
//! Trial `t` of a scenario draws its channels and noise from the substream
//! `(seed, scenario, t, block)`. The H0 and H1 runs of a trial share that
//! substream and differ only in the channel covariance, so they are paired on
//! common random numbers. Results are collected in trial order, which makes a
//! run reproducible regardless of the number of worker threads.

use std::path::PathBuf;
use std::time::Instant;

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::GenieErrorModel;
use crate::channel::{make_dft_pilots, one_ring_covariance, Link, OneRingParams, Observer, PilotSet, SystemParams};
use crate::covariance::CovarianceMatrix;
use crate::detection::{decide, GenieDetector, Hypothesis, DEGENERATE_TOL};
use crate::error::{config, Error, Result};
use crate::estimation::{estimate_covariance, Estimator, PluginDetector, DEFAULT_KAPPA};
use crate::linalg::CMatrix;
use crate::report::{Manifest, ResultRow};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemConfig {
    pub antennas: usize,
    pub pilot_len: usize,
    pub frame_blocks: usize,
    pub power: f64,
    pub noise_var: f64,
    /// When set, overrides `power` as `noise_var · 10^(snr_db/10)`.
    pub snr_db: Option<f64>,
}

impl Default for SystemConfig {
    fn default() -> Self {
        SystemConfig {
            antennas: 32,
            pilot_len: 32,
            frame_blocks: 200,
            power: 1.0,
            noise_var: 1.0,
            snr_db: None,
        }
    }
}

impl SystemConfig {
    pub fn params(&self, detect_blocks: usize) -> Result<SystemParams> {
        let power = match self.snr_db {
            Some(db) => self.noise_var * 10f64.powf(db / 10.0),
            None => self.power,
        };
        let p = SystemParams {
            antennas: self.antennas,
            pilot_len: self.pilot_len,
            detect_blocks,
            frame_blocks: self.frame_blocks.max(detect_blocks),
            power,
            noise_var: self.noise_var,
        };
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RingConfig {
    pub aod_deg: f64,
    pub spread_deg: f64,
    pub wavelength_m: f64,
    pub spacing_factor: f64,
    pub quadrature_points: usize,
    /// Carrier frequency; recorded in the manifest only.
    pub carrier_hz: f64,
}

impl Default for RingConfig {
    fn default() -> Self {
        RingConfig {
            aod_deg: 30.0,
            spread_deg: 20.0,
            wavelength_m: 3.76e-3,
            spacing_factor: 2.0,
            quadrature_points: 2048,
            carrier_hz: 80e9,
        }
    }
}

impl RingConfig {
    pub fn params(&self) -> OneRingParams {
        OneRingParams {
            aod_rad: self.aod_deg.to_radians(),
            spread_rad: self.spread_deg.to_radians(),
            wavelength_m: self.wavelength_m,
            spacing_factor: self.spacing_factor,
            quadrature_points: self.quadrature_points,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ThresholdPolicy {
    EqualError,
    Explicit { value: f64 },
    /// `count` evenly spaced thresholds; missing bounds span the observed statistics.
    Sweep { min: Option<f64>, max: Option<f64>, count: usize },
}

fn default_kappa() -> f64 {
    DEFAULT_KAPPA
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DetectorSpec {
    Genie,
    Ml {
        #[serde(default = "default_kappa")]
        kappa: f64,
        #[serde(default)]
        beta: Option<f64>,
    },
    Shrinkage,
}

impl DetectorSpec {
    pub fn estimator(&self) -> Option<Estimator> {
        match *self {
            DetectorSpec::Genie => None,
            DetectorSpec::Ml { kappa, beta } => Some(Estimator::Ml { kappa, beta }),
            DetectorSpec::Shrinkage => Some(Estimator::Shrinkage),
        }
    }

    pub fn label(&self) -> String {
        match self.estimator() {
            None => "genie".to_string(),
            Some(e) => e.label(),
        }
    }
}

/// A complete experiment description; the defaults reproduce the reference
/// link (M = T = 32, 0 dB SNR, 20° angle spread, 3.76 mm wavelength).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub system: SystemConfig,
    pub ring: RingConfig,
    pub delta_aod_deg: Vec<f64>,
    pub k_values: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    pub threshold: ThresholdPolicy,
    pub detector: DetectorSpec,
    pub link: Link,
    pub output: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            system: SystemConfig::default(),
            ring: RingConfig::default(),
            delta_aod_deg: vec![0.1, 0.5, 1.0],
            k_values: vec![5, 10, 20, 30],
            trials: 10_000,
            seed: 1,
            threshold: ThresholdPolicy::EqualError,
            detector: DetectorSpec::Genie,
            link: Link::Downlink,
            output: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<ExperimentConfig> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidConfig(format!("cannot read {}: {e}", path.display())))?;
        ExperimentConfig::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return config("trials must be at least 1");
        }
        if self.k_values.is_empty() || self.k_values.contains(&0) {
            return config("k_values must be a non-empty list of positive integers");
        }
        if self.delta_aod_deg.is_empty() || self.delta_aod_deg.iter().any(|d| !d.is_finite()) {
            return config("delta_aod_deg must be a non-empty list of finite angles");
        }
        match self.threshold {
            ThresholdPolicy::Sweep { count, min, max } => {
                if count < 2 {
                    return config("a threshold sweep needs at least 2 points");
                }
                if let (Some(lo), Some(hi)) = (min, max) {
                    if lo >= hi || lo.is_nan() || hi.is_nan() {
                        return config("sweep min must be below max");
                    }
                }
            }
            ThresholdPolicy::Explicit { value } if !value.is_finite() => {
                return config("explicit threshold must be finite");
            }
            _ => {}
        }
        if self.detector == DetectorSpec::Shrinkage && self.k_values.iter().any(|&k| k < 2) {
            return config("shrinkage needs K >= 2");
        }
        if let DetectorSpec::Ml { kappa, beta } = self.detector {
            crate::estimation::MlEstimatorConfig::new(beta.unwrap_or(1.0), kappa)?;
        }
        self.ring.params().validate()?;
        self.system.params(self.k_values[0])?;
        Ok(())
    }

    /// Flat provenance record of this configuration.
    pub fn manifest(&self) -> Manifest {
        let mut m = Manifest::new();
        m.push("seed", self.seed);
        m.push("trials", self.trials);
        m.push("detector", self.detector.label());
        m.push("threshold_policy", format!("{:?}", self.threshold));
        m.push("link", format!("{:?}", self.link).to_lowercase());
        m.push("k_values", format!("{:?}", self.k_values));
        m.push("delta_aod_deg", format!("{:?}", self.delta_aod_deg));
        m.push("antennas", self.system.antennas);
        m.push("pilot_len", self.system.pilot_len);
        m.push("frame_blocks", self.system.frame_blocks);
        m.push("power", self.system.power);
        m.push("noise_var", self.system.noise_var);
        m.push("snr_db", self.system.snr_db.map(|v| v.to_string()).unwrap_or_default());
        m.push("aod_deg", self.ring.aod_deg);
        m.push("spread_deg", self.ring.spread_deg);
        m.push("wavelength_m", self.ring.wavelength_m);
        m.push("spacing_factor", self.ring.spacing_factor);
        m.push("quadrature_points", self.ring.quadrature_points);
        m.push("carrier_hz", self.ring.carrier_hz);
        m
    }
}

/// Pre- and post-change covariances plus everything needed to simulate observations.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub params: SystemParams,
    pub c0: CovarianceMatrix,
    pub c1: CovarianceMatrix,
    pub pilots: PilotSet,
    pub link: Link,
    pub delta_aod_deg: f64,
    observer0: Observer,
    observer1: Observer,
}

impl Scenario {
    pub fn new(cfg: &ExperimentConfig, k: usize, delta_aod_deg: f64) -> Result<Scenario> {
        let params = cfg.system.params(k)?;
        let ring = cfg.ring.params();
        let c0 = one_ring_covariance(&ring, params.antennas)?;
        let c1 = one_ring_covariance(&ring.rotated(delta_aod_deg.to_radians()), params.antennas)?;
        if c0.approx_eq(&c1, DEGENERATE_TOL) {
            return Err(Error::DegenerateHypotheses(format!(
                "ΔΩ = {delta_aod_deg}° leaves the covariance unchanged"
            )));
        }
        Scenario::from_covariances(params, c0, c1, cfg.link, delta_aod_deg)
    }

    pub fn from_covariances(
        params: SystemParams,
        c0: CovarianceMatrix,
        c1: CovarianceMatrix,
        link: Link,
        delta_aod_deg: f64,
    ) -> Result<Scenario> {
        let pilots = make_dft_pilots(params.pilot_len, params.antennas)?;
        let observer0 = Observer::new(&c0, &params, &pilots, link)?;
        let observer1 = Observer::new(&c1, &params, &pilots, link)?;
        Ok(Scenario { params, c0, c1, pilots, link, delta_aod_deg, observer0, observer1 })
    }

    pub fn blocks(&self) -> usize {
        self.params.detect_blocks
    }

    pub fn noise_var_eff(&self) -> f64 {
        self.params.noise_var_eff()
    }

    pub fn observer(&self, truth: Hypothesis) -> &Observer {
        match truth {
            Hypothesis::H0 => &self.observer0,
            Hypothesis::H1 => &self.observer1,
        }
    }

    pub fn genie_model(&self) -> Result<GenieErrorModel> {
        GenieErrorModel::new(&self.c0, &self.c1, self.noise_var_eff(), self.blocks())
    }

    pub fn detector(&self, spec: &DetectorSpec) -> Result<Detector> {
        Ok(match spec.estimator() {
            None => Detector::Genie(GenieDetector::new(&self.c0, &self.c1, self.noise_var_eff())?),
            Some(est) => Detector::Plugin(PluginDetector::new(&self.c0, self.noise_var_eff(), est)?),
        })
    }
}

/// Any detector that maps a block of channel estimates to a statistic.
#[derive(Debug, Clone)]
pub enum Detector {
    Genie(GenieDetector),
    Plugin(PluginDetector),
}

impl Detector {
    pub fn statistic(&self, estimates: &CMatrix) -> Result<f64> {
        match self {
            Detector::Genie(d) => Ok(d.statistic(estimates)),
            Detector::Plugin(d) => d.statistic(estimates),
        }
    }
}

/// Statistics of paired trials under each hypothesis.
#[derive(Debug, Clone, PartialEq)]
pub struct StatisticSamples {
    pub h0: Vec<f64>,
    pub h1: Vec<f64>,
}

/// Empirical (P_FA, P_MD) pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmpiricalRates {
    pub p_fa: f64,
    pub p_md: f64,
}

impl StatisticSamples {
    pub fn trials(&self) -> usize {
        self.h0.len()
    }

    /// False alarm: `S > Θ` under H0. Missed detection: `S ≤ Θ` under H1.
    pub fn rates_at(&self, threshold: f64) -> EmpiricalRates {
        let fa = self.h0.iter().filter(|&&s| s > threshold).count();
        let md = self.h1.iter().filter(|&&s| s <= threshold).count();
        EmpiricalRates {
            p_fa: fa as f64 / self.h0.len() as f64,
            p_md: md as f64 / self.h1.len() as f64,
        }
    }

    /// Lowest threshold whose empirical false-alarm rate does not exceed
    /// `p_fa`, and the missed-detection rate there.
    pub fn at_false_alarm(&self, p_fa: f64) -> (f64, EmpiricalRates) {
        let mut sorted = self.h0.clone();
        sorted.sort_by(|a, b| b.total_cmp(a));
        let idx = ((p_fa * sorted.len() as f64).floor() as usize).min(sorted.len() - 1);
        let threshold = sorted[idx];
        (threshold, self.rates_at(threshold))
    }

    /// Smallest and largest statistic across both hypotheses.
    pub fn range(&self) -> (f64, f64) {
        self.h0.iter().chain(&self.h1).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &s| {
            (lo.min(s), hi.max(s))
        })
    }

    /// Empirical equal-error threshold by bisection on `P_MD − P_FA`.
    pub fn equal_error_threshold(&self) -> f64 {
        let (mut lo, mut hi) = self.range();
        lo -= 1e-9 * lo.abs().max(1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let r = self.rates_at(mid);
            if r.p_md < r.p_fa {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-12 * mid.abs().max(1.0) {
                break;
            }
        }
        0.5 * (lo + hi)
    }
}

const STREAM_MEASURED: u64 = 0;
const STREAM_PILOT: u64 = 1;
const STREAM_FRAMES: u64 = 2;

fn map_trials<T, F>(trials: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..trials as u64).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..trials as u64).map(f).collect()
    }
}

/// Runs `trials` paired trials and evaluates every detector on the same draws.
///
/// `stream` identifies the scenario inside the root seed; trial `t` uses the
/// substream `stream ++ [t]`.
pub fn collect_statistics(
    scenario: &Scenario,
    detectors: &[Detector],
    trials: usize,
    seed: u64,
    stream: &[u64],
) -> Result<Vec<StatisticSamples>> {
    let k = scenario.blocks();
    let per_trial = map_trials(trials, |t| {
        let mut path = stream.to_vec();
        path.push(t);
        let (_, est0) = scenario.observer0.draw(k, seed, &path);
        let (_, est1) = scenario.observer1.draw(k, seed, &path);
        detectors
            .iter()
            .map(|d| Ok((d.statistic(&est0)?, d.statistic(&est1)?)))
            .collect::<Result<Vec<(f64, f64)>>>()
    })?;
    Ok((0..detectors.len())
        .map(|i| StatisticSamples {
            h0: per_trial.iter().map(|v| v[i].0).collect(),
            h1: per_trial.iter().map(|v| v[i].1).collect(),
        })
        .collect())
}

fn sweep_thresholds(min: Option<f64>, max: Option<f64>, count: usize, samples: &StatisticSamples) -> Vec<f64> {
    let (lo_obs, hi_obs) = samples.range();
    let lo = min.unwrap_or(lo_obs - 1e-9 * lo_obs.abs().max(1.0));
    let hi = max.unwrap_or(hi_obs);
    (0..count).map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64).collect()
}

fn scenario_stream(k_idx: usize, d_idx: usize, purpose: u64) -> [u64; 3] {
    [purpose, k_idx as u64, d_idx as u64]
}

/// Genie-aided detector: empirical and analytic error rates for each (K, ΔΩ).
pub fn run_genie_experiment(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    cfg.validate()?;
    if cfg.detector != DetectorSpec::Genie {
        return config("the genie experiment needs detector kind = \"genie\"");
    }
    let mut rows = Vec::new();
    for (ki, &k) in cfg.k_values.iter().enumerate() {
        for (di, &delta) in cfg.delta_aod_deg.iter().enumerate() {
            let start = Instant::now();
            let scenario = Scenario::new(cfg, k, delta)?;
            let model = scenario.genie_model()?;
            let detector = scenario.detector(&cfg.detector)?;
            let samples = collect_statistics(
                &scenario,
                std::slice::from_ref(&detector),
                cfg.trials,
                cfg.seed,
                &scenario_stream(ki, di, STREAM_MEASURED),
            )?
            .remove(0);
            let thresholds = match cfg.threshold {
                ThresholdPolicy::EqualError => vec![model.equal_error_threshold()?.threshold],
                ThresholdPolicy::Explicit { value } => vec![value],
                ThresholdPolicy::Sweep { min, max, count } => sweep_thresholds(min, max, count, &samples),
            };
            let elapsed = start.elapsed().as_secs_f64();
            for t in thresholds {
                let emp = samples.rates_at(t);
                let analytic = model.rates(t);
                rows.push(ResultRow {
                    detector: cfg.detector.label(),
                    k,
                    delta_aod_deg: delta,
                    threshold: t,
                    p_fa_emp: emp.p_fa,
                    p_md_emp: emp.p_md,
                    p_fa_analytic: Some(analytic.p_fa),
                    p_md_analytic: Some(analytic.p_md),
                    trials: cfg.trials,
                    wall_time_s: elapsed,
                });
            }
        }
    }
    Ok(rows)
}

/// Threshold sweep of a plug-in detector, one row per threshold.
pub fn run_roc_experiment(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    cfg.validate()?;
    let ThresholdPolicy::Sweep { min, max, count } = cfg.threshold else {
        return config("the ROC experiment needs a threshold sweep");
    };
    if cfg.detector == DetectorSpec::Genie {
        return config("the ROC experiment needs an ml or shrinkage detector");
    }
    let mut rows = Vec::new();
    for (ki, &k) in cfg.k_values.iter().enumerate() {
        for (di, &delta) in cfg.delta_aod_deg.iter().enumerate() {
            let start = Instant::now();
            let scenario = Scenario::new(cfg, k, delta)?;
            let detector = scenario.detector(&cfg.detector)?;
            let samples = collect_statistics(
                &scenario,
                std::slice::from_ref(&detector),
                cfg.trials,
                cfg.seed,
                &scenario_stream(ki, di, STREAM_MEASURED),
            )?
            .remove(0);
            let elapsed = start.elapsed().as_secs_f64();
            for t in sweep_thresholds(min, max, count, &samples) {
                let emp = samples.rates_at(t);
                rows.push(ResultRow {
                    detector: cfg.detector.label(),
                    k,
                    delta_aod_deg: delta,
                    threshold: t,
                    p_fa_emp: emp.p_fa,
                    p_md_emp: emp.p_md,
                    p_fa_analytic: None,
                    p_md_analytic: None,
                    trials: cfg.trials,
                    wall_time_s: elapsed,
                });
            }
        }
    }
    Ok(rows)
}

/// Equal-error threshold for any detector: analytic for the genie detector,
/// otherwise empirical from a pilot run of `trials / 10` paired trials.
pub fn calibrate_threshold(
    scenario: &Scenario,
    spec: &DetectorSpec,
    trials: usize,
    seed: u64,
    stream: &[u64],
) -> Result<f64> {
    if *spec == DetectorSpec::Genie {
        return Ok(scenario.genie_model()?.equal_error_threshold()?.threshold);
    }
    let detector = scenario.detector(spec)?;
    let mut path = stream.to_vec();
    path.push(STREAM_PILOT);
    let pilot = collect_statistics(scenario, &[detector], (trials / 10).max(10), seed, &path)?;
    Ok(pilot[0].equal_error_threshold())
}

/// One frame of the protocol simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameRecord {
    /// 1-based frame index.
    pub frame: usize,
    /// The true covariance switched at the start of this frame.
    pub change_injected: bool,
    pub decision: Hypothesis,
    pub statistic: f64,
    pub threshold: f64,
    pub reference_updated: bool,
}

enum Reference {
    /// Genie detector: the reference is one of the two known covariances.
    Known { current_is_c0: bool },
    /// Plug-in detector: the reference is the last accepted estimate.
    Estimated(Box<PluginDetector>),
}

/// Walks `num_frames` frames of `N` blocks. The first `K` blocks of each frame
/// are tested against the previous frame's reference covariance; an H1
/// decision replaces the reference. The true covariance is `C0` before
/// `change_frame` and `C1` from it on; `None` injects no change.
///
/// Uses the first entries of `k_values` and `delta_aod_deg`.
pub fn simulate_frames(
    cfg: &ExperimentConfig,
    num_frames: usize,
    change_frame: Option<usize>,
) -> Result<Vec<FrameRecord>> {
    cfg.validate()?;
    if num_frames == 0 {
        return config("need at least one frame");
    }
    if let Some(f) = change_frame {
        if f == 0 || f > num_frames {
            return config(format!("change frame {f} is outside 1..={num_frames}"));
        }
    }
    let k = cfg.k_values[0];
    let scenario = Scenario::new(cfg, k, cfg.delta_aod_deg[0])?;
    let n = scenario.params.frame_blocks;
    let noise = scenario.noise_var_eff();
    let stream = [STREAM_FRAMES];

    let (forward_threshold, reverse_threshold) = match cfg.threshold {
        ThresholdPolicy::Explicit { value } => (value, value),
        ThresholdPolicy::EqualError => {
            let fwd = calibrate_threshold(&scenario, &cfg.detector, cfg.trials, cfg.seed, &stream)?;
            let rev = if cfg.detector == DetectorSpec::Genie {
                GenieErrorModel::new(&scenario.c1, &scenario.c0, noise, k)?.equal_error_threshold()?.threshold
            } else {
                fwd
            };
            (fwd, rev)
        }
        ThresholdPolicy::Sweep { .. } => return config("frame simulation needs a single threshold"),
    };

    let genie_fwd = GenieDetector::new(&scenario.c0, &scenario.c1, noise)?;
    let genie_rev = GenieDetector::new(&scenario.c1, &scenario.c0, noise)?;
    let mut reference = match cfg.detector.estimator() {
        None => Reference::Known { current_is_c0: true },
        Some(est) => Reference::Estimated(Box::new(PluginDetector::new(&scenario.c0, noise, est)?)),
    };

    let mut log = Vec::with_capacity(num_frames);
    for frame in 1..=num_frames {
        let changed = change_frame.is_some_and(|c| frame >= c);
        let truth = if changed { Hypothesis::H1 } else { Hypothesis::H0 };
        let (_, blocks) = scenario.observer(truth).draw(n, cfg.seed, &[STREAM_FRAMES, 1, frame as u64]);
        let window = blocks.columns(0, k).into_owned();
        let (statistic, threshold) = match &reference {
            Reference::Known { current_is_c0: true } => (genie_fwd.statistic(&window), forward_threshold),
            Reference::Known { current_is_c0: false } => (genie_rev.statistic(&window), reverse_threshold),
            Reference::Estimated(det) => (det.statistic(&window)?, forward_threshold),
        };
        let decision = decide(statistic, threshold)?.hypothesis;
        let reference_updated = decision == Hypothesis::H1;
        if reference_updated {
            reference = match reference {
                Reference::Known { current_is_c0 } => Reference::Known { current_is_c0: !current_is_c0 },
                Reference::Estimated(det) => {
                    // Re-estimate from the whole frame.
                    let sample = crate::detection::sample_covariance_of(&blocks);
                    let est = *det.estimator();
                    let c = estimate_covariance(&sample, n, noise, &est)?;
                    Reference::Estimated(Box::new(PluginDetector::new(&c, noise, est)?))
                }
            };
        }
        log.push(FrameRecord {
            frame,
            change_injected: change_frame == Some(frame),
            decision,
            statistic,
            threshold,
            reference_updated,
        });
    }
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg() -> ExperimentConfig {
        ExperimentConfig {
            system: SystemConfig { antennas: 4, pilot_len: 4, frame_blocks: 20, ..Default::default() },
            delta_aod_deg: vec![2.0],
            k_values: vec![5],
            trials: 400,
            ..Default::default()
        }
    }

    #[test]
    fn default_config_is_reference_link() {
        let cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        let p = cfg.system.params(10).unwrap();
        assert_eq!((p.antennas, p.pilot_len), (32, 32));
        assert_eq!(p.snr_db(), 0.0);
        let ring = cfg.ring.params();
        assert!((ring.separation(1) - 7.52e-3).abs() < 1e-15);
        assert!((ring.spread_rad - 20f64.to_radians()).abs() < 1e-15);
    }

    #[test]
    fn config_round_trips_and_rejects_unknown_keys() {
        let cfg = ExperimentConfig {
            threshold: ThresholdPolicy::Sweep { min: None, max: Some(3.0), count: 7 },
            detector: DetectorSpec::Ml { kappa: 3.0, beta: Some(0.1) },
            ..Default::default()
        };
        let text = cfg.to_toml_string();
        assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), cfg);
        let err = ExperimentConfig::from_toml_str("trials = 5\nbogus = 1\n").unwrap_err();
        assert!(matches!(err, Error::InvalidConfig(_)));
        let err = ExperimentConfig::from_toml_str("[system]\nantenas = 4\n").unwrap_err();
        assert!(matches!(err, Error::InvalidConfig(_)));
    }

    #[test]
    fn config_validation() {
        let parse = ExperimentConfig::from_toml_str;
        assert!(parse("trials = 0").is_err());
        assert!(parse("k_values = []").is_err());
        assert!(parse("[threshold]\npolicy = \"sweep\"\ncount = 1\n").is_err());
        assert!(parse("[detector]\nkind = \"ml\"\nkappa = 0.5\n").is_err());
        assert!(parse("k_values = [1]\n[detector]\nkind = \"shrinkage\"\n").is_err());
        let cfg = parse("[detector]\nkind = \"ml\"\n[threshold]\npolicy = \"explicit\"\nvalue = 2.5\n").unwrap();
        assert_eq!(cfg.detector, DetectorSpec::Ml { kappa: DEFAULT_KAPPA, beta: None });
        assert_eq!(cfg.threshold, ThresholdPolicy::Explicit { value: 2.5 });
    }

    #[test]
    fn zero_rotation_is_rejected() {
        let mut cfg = small_cfg();
        cfg.delta_aod_deg = vec![0.0];
        let err = run_genie_experiment(&cfg).unwrap_err();
        assert!(matches!(err, Error::DegenerateHypotheses(_)));
        assert_eq!(err.exit_code(), 2);
        assert!(simulate_frames(&cfg, 3, Some(1)).is_err());
    }

    #[test]
    fn genie_rows_carry_analytic_rates() {
        let rows = run_genie_experiment(&small_cfg()).unwrap();
        assert_eq!(rows.len(), 1);
        let r = &rows[0];
        assert!(r.p_fa_analytic.is_some() && r.p_md_analytic.is_some());
        assert!((r.p_fa_analytic.unwrap() - r.p_md_analytic.unwrap()).abs() < 1e-4);
        for (emp, ana) in [(r.p_fa_emp, r.p_fa_analytic.unwrap()), (r.p_md_emp, r.p_md_analytic.unwrap())] {
            let se = (ana * (1.0 - ana) / r.trials as f64).sqrt();
            assert!((emp - ana).abs() < 4.0 * se + 1e-12, "emp {emp} analytic {ana}");
        }
    }

    #[test]
    fn roc_endpoints_are_extreme() {
        let mut cfg = small_cfg();
        cfg.detector = DetectorSpec::Shrinkage;
        cfg.threshold = ThresholdPolicy::Sweep { min: None, max: None, count: 5 };
        let rows = run_roc_experiment(&cfg).unwrap();
        assert_eq!(rows.len(), 5);
        let first = rows.iter().min_by(|a, b| a.threshold.total_cmp(&b.threshold)).unwrap();
        let last = rows.iter().max_by(|a, b| a.threshold.total_cmp(&b.threshold)).unwrap();
        assert_eq!((first.p_fa_emp, first.p_md_emp), (1.0, 0.0));
        assert_eq!((last.p_fa_emp, last.p_md_emp), (0.0, 1.0));
        assert!(rows.iter().all(|r| r.p_fa_analytic.is_none()));
        cfg.threshold = ThresholdPolicy::EqualError;
        assert!(run_roc_experiment(&cfg).is_err());
    }

    #[test]
    fn results_do_not_depend_on_thread_count() {
        let cfg = small_cfg();
        let scenario = Scenario::new(&cfg, 5, 2.0).unwrap();
        let det = scenario.detector(&DetectorSpec::Ml { kappa: 4.0, beta: None }).unwrap();
        let a = collect_statistics(&scenario, std::slice::from_ref(&det), 64, 9, &[0]).unwrap();
        #[cfg(feature = "parallel")]
        {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
            let b = pool.install(|| collect_statistics(&scenario, &[det], 64, 9, &[0]).unwrap());
            assert_eq!(a, b);
        }
        assert_eq!(a[0].trials(), 64);
    }

    #[test]
    fn frame_validation() {
        let cfg = small_cfg();
        assert!(simulate_frames(&cfg, 5, Some(0)).is_err());
        assert!(simulate_frames(&cfg, 5, Some(6)).is_err());
        let mut sweep = cfg.clone();
        sweep.threshold = ThresholdPolicy::Sweep { min: None, max: None, count: 3 };
        assert!(simulate_frames(&sweep, 5, None).is_err());
        let log = simulate_frames(&cfg, 5, Some(3)).unwrap();
        assert_eq!(log.len(), 5);
        assert!(log.iter().filter(|r| r.change_injected).map(|r| r.frame).eq([3]));
    }

    #[test]
    fn empirical_helpers() {
        let s = StatisticSamples { h0: vec![0.0, 1.0, 2.0, 3.0], h1: vec![2.5, 3.5, 4.5, 5.5] };
        assert_eq!(s.rates_at(2.0), EmpiricalRates { p_fa: 0.25, p_md: 0.0 });
        let (t, r) = s.at_false_alarm(0.25);
        assert_eq!(t, 2.0);
        assert_eq!(r.p_fa, 0.25);
        let eq = s.equal_error_threshold();
        let r = s.rates_at(eq);
        assert!(r.p_md <= 0.25 && r.p_fa <= 0.25);
    }
}
