// SPDX-License-Identifier: MIT OR Apache-2.0

//! Estimators of the unknown post-change covariance and the plug-in detectors
//! built on them.
//!
//! Both estimators share the eigenvectors of the sample covariance, so the
//! plug-in statistic can be evaluated from one Hermitian eigendecomposition.

use crate::channel::ObservationSet;
use crate::covariance::CovarianceMatrix;
use crate::detection::{
    decide, effective_factor, llr_statistic, sample_covariance, sample_covariance_of, Decision,
    Hypothesis, DEGENERATE_TOL,
};
use crate::error::{config, input, Result};
use crate::linalg::{CMatrix, EigenSystem, PdFactor};

/// Eigenvalue box `[β, κβ]` of the condition-number-constrained estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlEstimatorConfig {
    pub beta: f64,
    pub kappa: f64,
}

impl MlEstimatorConfig {
    pub fn new(beta: f64, kappa: f64) -> Result<MlEstimatorConfig> {
        if !(beta.is_finite() && beta > 0.0) {
            return config(format!("beta must be positive, got {beta}"));
        }
        if !(kappa.is_finite() && kappa > 1.0) {
            return config(format!("kappa must exceed 1, got {kappa}"));
        }
        Ok(MlEstimatorConfig { beta, kappa })
    }

    /// Centers `[β, κβ]` geometrically on the average signal eigenvalue
    /// `tr(S)/M − n`: `β = max((tr(S)/M − n)/√κ, 1e-6)`.
    pub fn auto_beta(sample: &CovarianceMatrix, noise_var_eff: f64, kappa: f64) -> Result<Self> {
        let avg = sample.trace() / sample.dim() as f64 - noise_var_eff;
        MlEstimatorConfig::new((avg / kappa.sqrt()).max(1e-6), kappa)
    }
}

pub const DEFAULT_KAPPA: f64 = 4.0;

/// Which estimator the plug-in detector uses for the post-change covariance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Estimator {
    /// Condition-number-constrained ML; `beta = None` selects the automatic rule.
    Ml { kappa: f64, beta: Option<f64> },
    Shrinkage,
}

impl Estimator {
    pub fn label(&self) -> String {
        match self {
            Estimator::Ml { kappa, beta: None } => format!("ml(kappa={kappa})"),
            Estimator::Ml { kappa, beta: Some(b) } => format!("ml(kappa={kappa};beta={b})"),
            Estimator::Shrinkage => "shrinkage".to_string(),
        }
    }
}

/// Estimated eigenvalues of `Ĉ + n·I` in the eigenbasis of the sample covariance.
fn ml_effective_spectrum(sample_values: &[f64], noise_var_eff: f64, cfg: &MlEstimatorConfig) -> Vec<f64> {
    let lo = 1.0 / (cfg.kappa * cfg.beta + noise_var_eff);
    let hi = 1.0 / (cfg.beta + noise_var_eff);
    sample_values
        .iter()
        .map(|&s| {
            let inv = if s > 0.0 { 1.0 / s } else { f64::INFINITY };
            // Clip the inverse eigenvalue into [1/(κβ+n), 1/(β+n)].
            1.0 / inv.max(lo).min(hi)
        })
        .collect()
}

/// Condition-number-constrained ML estimate: inverse sample eigenvalues are
/// clipped into `[1/(κβ+n), 1/(β+n)]`, then inverted and shifted by `−n`.
/// The output spectrum lies in `[β, κβ]`.
pub fn ml_covariance(
    sample: &CovarianceMatrix,
    noise_var_eff: f64,
    cfg: &MlEstimatorConfig,
) -> Result<CovarianceMatrix> {
    check_noise(noise_var_eff)?;
    let eig = sample.eigen();
    let spectrum: Vec<f64> = ml_effective_spectrum(&eig.values, noise_var_eff, cfg)
        .into_iter()
        .map(|e| (e - noise_var_eff).clamp(cfg.beta, cfg.kappa * cfg.beta))
        .collect();
    Ok(CovarianceMatrix::from_trusted(eig.recompose_with(&spectrum)))
}

fn check_noise(noise_var_eff: f64) -> Result<()> {
    if !(noise_var_eff.is_finite() && noise_var_eff >= 0.0) {
        return input(format!("effective noise variance must be >= 0, got {noise_var_eff}"));
    }
    Ok(())
}

/// `log|C + n·I| + tr((C + n·I)⁻¹·S)`, the quantity the constrained ML estimate minimizes.
pub fn ml_objective(sample: &CovarianceMatrix, cov: &CovarianceMatrix, noise_var_eff: f64) -> Result<f64> {
    let f = effective_factor(cov, noise_var_eff)?;
    Ok(f.log_det() + f.trace_solve(sample.matrix()))
}

/// Shrinkage weight `ρ*` computed from the sample covariance, clamped to [0, 1].
pub fn shrinkage_weight(sample_values: &[f64], blocks: usize) -> f64 {
    let m = sample_values.len() as f64;
    let tr: f64 = sample_values.iter().sum();
    let tr_sq: f64 = sample_values.iter().map(|v| v * v).sum();
    let denom = (blocks as f64 - 1.0) / m * (tr_sq - tr * tr / m);
    if denom <= 1e-12 * tr * tr {
        return 1.0;
    }
    let numer = -tr_sq / m + tr * tr;
    (numer / denom).min(1.0).clamp(0.0, 1.0)
}

fn shrinkage_effective_spectrum(sample_values: &[f64], rho: f64, noise_var_eff: f64) -> Vec<f64> {
    let m = sample_values.len() as f64;
    let target = sample_values.iter().sum::<f64>() / m;
    sample_values
        .iter()
        .map(|&s| ((1.0 - rho) * s + rho * target - noise_var_eff).max(0.0) + noise_var_eff)
        .collect()
}

/// Shrinkage estimate `(1 − ρ*)·S + ρ*·(tr(S)/M)·I − n·I` with negative
/// eigenvalues floored at 0. Returns the estimate and `ρ*`.
pub fn shrinkage_covariance(
    sample: &CovarianceMatrix,
    blocks: usize,
    noise_var_eff: f64,
) -> Result<(CovarianceMatrix, f64)> {
    if blocks < 2 {
        return config(format!("shrinkage needs K >= 2, got {blocks}"));
    }
    check_noise(noise_var_eff)?;
    let eig = sample.eigen();
    let rho = shrinkage_weight(&eig.values, blocks);
    let spectrum: Vec<f64> = shrinkage_effective_spectrum(&eig.values, rho, noise_var_eff)
        .into_iter()
        .map(|e| e - noise_var_eff)
        .collect();
    Ok((CovarianceMatrix::from_trusted(eig.recompose_with(&spectrum)), rho))
}

/// Estimates `Ĉ1` from a sample covariance with the chosen method.
pub fn estimate_covariance(
    sample: &CovarianceMatrix,
    blocks: usize,
    noise_var_eff: f64,
    estimator: &Estimator,
) -> Result<CovarianceMatrix> {
    match *estimator {
        Estimator::Ml { kappa, beta } => {
            let cfg = match beta {
                Some(b) => MlEstimatorConfig::new(b, kappa)?,
                None => MlEstimatorConfig::auto_beta(sample, noise_var_eff, kappa)?,
            };
            ml_covariance(sample, noise_var_eff, &cfg)
        }
        Estimator::Shrinkage => Ok(shrinkage_covariance(sample, blocks, noise_var_eff)?.0),
    }
}

#[derive(Debug, Clone)]
pub struct UnknownDetection {
    pub decision: Decision,
    pub estimate: CovarianceMatrix,
    /// The estimate coincides with `C0`, so the statistic is identically 0.
    pub degenerate: bool,
}

/// Plug-in detector: estimate `Ĉ1` from the observations, then threshold `S(H̃, C0, Ĉ1)`.
pub fn detect_unknown(
    obs: &ObservationSet,
    c0: &CovarianceMatrix,
    estimator: &Estimator,
    threshold: f64,
) -> Result<UnknownDetection> {
    let sample = sample_covariance(obs)?;
    let estimate = estimate_covariance(&sample, obs.blocks(), obs.noise_var_eff, estimator)?;
    let stat = llr_statistic(obs, c0, &estimate)?;
    let decision = if stat.degenerate {
        Decision { hypothesis: Hypothesis::H0, statistic: 0.0, threshold }
    } else {
        decide(stat.value, threshold)?
    };
    Ok(UnknownDetection { decision, estimate, degenerate: stat.degenerate })
}

/// Fast plug-in statistic for Monte Carlo runs; `C0 + n·I` is factored once.
#[derive(Debug, Clone)]
pub struct PluginDetector {
    reference: CovarianceMatrix,
    reference_factor: PdFactor,
    noise_var_eff: f64,
    estimator: Estimator,
}

impl PluginDetector {
    pub fn new(c0: &CovarianceMatrix, noise_var_eff: f64, estimator: Estimator) -> Result<Self> {
        if let Estimator::Ml { kappa, beta } = estimator {
            MlEstimatorConfig::new(beta.unwrap_or(1.0), kappa)?;
        }
        Ok(PluginDetector {
            reference: c0.clone(),
            reference_factor: effective_factor(c0, noise_var_eff)?,
            noise_var_eff,
            estimator,
        })
    }

    pub fn estimator(&self) -> &Estimator {
        &self.estimator
    }

    /// `S(H̃, C0, Ĉ1)` for a block of channel estimates (one column per block).
    pub fn statistic(&self, estimates: &CMatrix) -> Result<f64> {
        let k = estimates.ncols();
        let sample = sample_covariance_of(estimates);
        let eig = EigenSystem::of_hermitian(sample.matrix());
        let n = self.noise_var_eff;
        let spectrum = match self.estimator {
            Estimator::Ml { kappa, beta } => {
                let cfg = match beta {
                    Some(b) => MlEstimatorConfig::new(b, kappa)?,
                    None => MlEstimatorConfig::auto_beta(&sample, n, kappa)?,
                };
                ml_effective_spectrum(&eig.values, n, &cfg)
            }
            Estimator::Shrinkage => {
                if k < 2 {
                    return config(format!("shrinkage needs K >= 2, got {k}"));
                }
                let rho = shrinkage_weight(&eig.values, k);
                shrinkage_effective_spectrum(&eig.values, rho, n)
            }
        };
        if spectrum.iter().any(|&e| e.is_nan() || e <= 0.0) {
            return Err(crate::error::Error::NumericalDomain(
                "estimated effective covariance is singular".into(),
            ));
        }
        // Ĉ1 + n·I shares eigenvectors with S, so its likelihood terms are diagonal.
        let log_det1: f64 = spectrum.iter().map(|e| e.ln()).sum();
        let trace1: f64 = eig.values.iter().zip(&spectrum).map(|(s, e)| s / e).sum();
        let trace0 = self.reference_factor.trace_solve(sample.matrix());
        let stat = k as f64 * (self.reference_factor.log_det() - log_det1 + trace0 - trace1);
        if self.is_degenerate(&eig, &spectrum) {
            return Ok(0.0);
        }
        Ok(stat)
    }

    fn is_degenerate(&self, eig: &EigenSystem, spectrum: &[f64]) -> bool {
        let n = self.noise_var_eff;
        let est: Vec<f64> = spectrum.iter().map(|e| e - n).collect();
        let c1 = eig.recompose_with(&est);
        CovarianceMatrix::from_trusted(c1).approx_eq(&self.reference, DEGENERATE_TOL)
    }
}
