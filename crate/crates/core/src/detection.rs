// SPDX-License-Identifier: MIT OR Apache-2.0

//! Log-likelihood sums, the LLR change statistic and the threshold test.
//!
//! Likelihoods use the circularly-symmetric complex Gaussian density
//! `exp(-hᴴC⁻¹h) / (πᴹ|C|)` with the additive `-K·M·log π` dropped; it cancels
//! in every likelihood ratio.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::analysis::DiscriminationPair;
use crate::channel::ObservationSet;
use crate::covariance::CovarianceMatrix;
use crate::error::{input, Error, Result};
use crate::linalg::{hermitian_quad_form, CMatrix, PdFactor};

/// Relative distance under which two hypotheses count as identical.
pub const DEGENERATE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Hypothesis {
    /// No change: the covariance is still the reference one.
    H0,
    /// The covariance changed.
    H1,
}

impl fmt::Display for Hypothesis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Hypothesis::H0 => "H0",
            Hypothesis::H1 => "H1",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decision {
    pub hypothesis: Hypothesis,
    pub statistic: f64,
    pub threshold: f64,
}

/// Declares H1 iff `statistic > threshold`; a tie goes to H0.
pub fn decide(statistic: f64, threshold: f64) -> Result<Decision> {
    if statistic.is_nan() {
        return input("statistic is NaN");
    }
    if threshold.is_nan() {
        return input("threshold is NaN");
    }
    let hypothesis = if statistic > threshold { Hypothesis::H1 } else { Hypothesis::H0 };
    Ok(Decision { hypothesis, statistic, threshold })
}

/// `(1/K)·H̃·H̃ᴴ`.
pub fn sample_covariance(obs: &ObservationSet) -> Result<CovarianceMatrix> {
    if obs.blocks() == 0 {
        return input("observation set is empty");
    }
    Ok(sample_covariance_of(&obs.estimates))
}

pub(crate) fn sample_covariance_of(estimates: &CMatrix) -> CovarianceMatrix {
    let k = estimates.ncols() as f64;
    CovarianceMatrix::from_trusted((estimates * estimates.adjoint()).unscale(k))
}

/// `C + n·I`, the covariance of the noisy ML channel estimate.
pub fn effective_covariance(cov: &CovarianceMatrix, noise_var_eff: f64) -> Result<CovarianceMatrix> {
    if !(noise_var_eff.is_finite() && noise_var_eff >= 0.0) {
        return input(format!("effective noise variance must be >= 0, got {noise_var_eff}"));
    }
    let mut m = cov.matrix().clone();
    for i in 0..m.nrows() {
        m[(i, i)].re += noise_var_eff;
    }
    Ok(CovarianceMatrix::from_trusted(m))
}

pub(crate) fn effective_factor(cov: &CovarianceMatrix, noise_var_eff: f64) -> Result<PdFactor> {
    PdFactor::new(effective_covariance(cov, noise_var_eff)?.matrix())
}

/// `-K·(log|C + n·I| + tr((C + n·I)⁻¹·S))`.
pub fn log_likelihood_sum(
    sample: &CovarianceMatrix,
    k: usize,
    cov: &CovarianceMatrix,
    noise_var_eff: f64,
) -> Result<f64> {
    check_dims(sample, cov)?;
    let f = effective_factor(cov, noise_var_eff)?;
    Ok(-(k as f64) * (f.log_det() + f.trace_solve(sample.matrix())))
}

fn check_dims(a: &CovarianceMatrix, b: &CovarianceMatrix) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::InvalidInput(format!(
            "dimension mismatch: {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    Ok(())
}

/// The LLR change statistic together with its per-block terms.
#[derive(Debug, Clone, PartialEq)]
pub struct LlrStatistic {
    pub value: f64,
    pub per_block: Vec<f64>,
    /// Set when the two hypotheses coincide; the statistic is then identically 0.
    pub degenerate: bool,
}

impl LlrStatistic {
    pub fn blocks(&self) -> usize {
        self.per_block.len()
    }
}

/// `S(H̃, C0, C1) = Σ_k [log p(h̃_k | C1) − log p(h̃_k | C0)]`, summed block by block.
pub fn llr_statistic(
    obs: &ObservationSet,
    c0: &CovarianceMatrix,
    c1: &CovarianceMatrix,
) -> Result<LlrStatistic> {
    check_dims(c0, c1)?;
    if c0.dim() != obs.antennas() {
        return input(format!(
            "observations have {} antennas, covariances are {}x{}",
            obs.antennas(),
            c0.dim(),
            c0.dim()
        ));
    }
    let k = obs.blocks();
    if k == 0 {
        return input("observation set is empty");
    }
    if c0.approx_eq(c1, DEGENERATE_TOL) {
        return Ok(LlrStatistic { value: 0.0, per_block: vec![0.0; k], degenerate: true });
    }
    let f0 = effective_factor(c0, obs.noise_var_eff)?;
    let f1 = effective_factor(c1, obs.noise_var_eff)?;
    let per_block: Vec<f64> = obs
        .estimates
        .column_iter()
        .map(|col| {
            let h = col.into_owned();
            (f0.log_det() + f0.quad_form(&h)) - (f1.log_det() + f1.quad_form(&h))
        })
        .collect();
    Ok(LlrStatistic { value: per_block.iter().sum(), per_block, degenerate: false })
}

/// The same statistic from the sample covariance alone:
/// `S̃(H̃, C1) − S̃(H̃, C0)`.
pub fn llr_from_sample(
    sample: &CovarianceMatrix,
    k: usize,
    c0: &CovarianceMatrix,
    c1: &CovarianceMatrix,
    noise_var_eff: f64,
) -> Result<f64> {
    if c0.approx_eq(c1, DEGENERATE_TOL) {
        return Ok(0.0);
    }
    Ok(log_likelihood_sum(sample, k, c1, noise_var_eff)?
        - log_likelihood_sum(sample, k, c0, noise_var_eff)?)
}

/// Closed form `K·(R + tr(𝑴·S))` using precomputed discrimination quantities.
pub fn llr_closed_form(pair: &DiscriminationPair, sample: &CovarianceMatrix, k: usize) -> f64 {
    let trace = (&pair.m_matrix * sample.matrix()).trace().re;
    k as f64 * (pair.log_det_ratio + trace)
}

/// Genie-aided detector with both hypotheses known; evaluates the statistic
/// as `Σ_k (R + h̃_kᴴ 𝑴 h̃_k)`.
#[derive(Debug, Clone)]
pub struct GenieDetector {
    pair: DiscriminationPair,
}

impl GenieDetector {
    pub fn new(c0: &CovarianceMatrix, c1: &CovarianceMatrix, noise_var_eff: f64) -> Result<Self> {
        Ok(GenieDetector { pair: crate::analysis::discrimination(c0, c1, noise_var_eff)? })
    }

    pub fn pair(&self) -> &DiscriminationPair {
        &self.pair
    }

    pub fn statistic(&self, estimates: &CMatrix) -> f64 {
        estimates
            .column_iter()
            .map(|col| self.pair.log_det_ratio + hermitian_quad_form(&self.pair.m_matrix, &col.into_owned()))
            .sum()
    }
}
