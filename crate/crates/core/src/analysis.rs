// SPDX-License-Identifier: MIT OR Apache-2.0

//! Exact error analysis of the genie-aided detector.
//!
//! Under hypothesis `i` the statistic is `S = K·R + ξ_i / 2` where
//! `ξ_i = Σ_m q_{i,m}·χ²_{2K,m}` is a generalized chi-squared variable whose
//! weights are the eigenvalues of `A_i^{1/2} 𝑴 A_i^{1/2}`, `A_i = C_i + n·I`.
//! Its CDF is computed by numerically inverting the characteristic function
//! (Imhof's real-integral form).

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::ChiSquared;

use crate::covariance::CovarianceMatrix;
use crate::detection::{effective_covariance, DEGENERATE_TOL};
use crate::error::{input, Error, Result};
use crate::linalg::{hermitian_part, hermitian_sqrt, CMatrix, EigenSystem, PdFactor};
use crate::rng::{derive_key, substream};

/// Discrimination quantities of a hypothesis pair.
#[derive(Debug, Clone)]
pub struct DiscriminationPair {
    /// `(C0 + n·I)⁻¹ − (C1 + n·I)⁻¹`.
    pub m_matrix: CMatrix,
    /// `log|C0 + n·I| − log|C1 + n·I|`.
    pub log_det_ratio: f64,
    /// Eigenvalues of `A0^{1/2} 𝑴 A0^{1/2}`, descending.
    pub weights0: Vec<f64>,
    /// Eigenvalues of `A1^{1/2} 𝑴 A1^{1/2}`, descending.
    pub weights1: Vec<f64>,
    pub degenerate: bool,
}

pub fn discrimination(
    c0: &CovarianceMatrix,
    c1: &CovarianceMatrix,
    noise_var_eff: f64,
) -> Result<DiscriminationPair> {
    if c0.dim() != c1.dim() {
        return input(format!("dimension mismatch: {} vs {}", c0.dim(), c1.dim()));
    }
    let a0 = effective_covariance(c0, noise_var_eff)?;
    let a1 = effective_covariance(c1, noise_var_eff)?;
    let f0 = PdFactor::new(a0.matrix())?;
    let f1 = PdFactor::new(a1.matrix())?;
    let m = c0.dim();
    if c0.approx_eq(c1, DEGENERATE_TOL) {
        return Ok(DiscriminationPair {
            m_matrix: CMatrix::zeros(m, m),
            log_det_ratio: 0.0,
            weights0: vec![0.0; m],
            weights1: vec![0.0; m],
            degenerate: true,
        });
    }
    let m_matrix = hermitian_part(&(f0.inverse() - f1.inverse()));
    let weights = |a: &CovarianceMatrix| {
        let root = hermitian_sqrt(a.matrix());
        EigenSystem::of_hermitian(&(&root * &m_matrix * &root)).values
    };
    Ok(DiscriminationPair {
        weights0: weights(&a0),
        weights1: weights(&a1),
        log_det_ratio: f0.log_det() - f1.log_det(),
        m_matrix,
        degenerate: false,
    })
}

/// Weighted sum of independent chi-squared variables sharing one degree-of-freedom count.
#[derive(Debug, Clone, PartialEq)]
pub struct GchiSqSpec {
    weights: Vec<f64>,
    dof: u32,
}

/// Weights below this fraction of the largest magnitude are dropped.
pub const WEIGHT_PRUNE_TOL: f64 = 1e-12;
/// Dynamic range of |weights| kept in the inversion. Smaller components are
/// replaced by their mean; the resulting CDF error is below
/// `0.5e-8·sqrt(2·dof·M)`, under 1e-6 for `dof·M ≤ 5000`.
pub const MAX_WEIGHT_RANGE: f64 = 1e8;
/// Tail truncation bound of the inversion integral.
pub const TRUNCATION_TOL: f64 = 1e-8;
const MONTE_CARLO_DRAWS: usize = 1_000_000;
const MAX_PANELS: usize = 4_000_000;

impl GchiSqSpec {
    /// `dof` must be even and at least 2. An all-zero weight vector yields a
    /// degenerate spec (a point mass at 0).
    pub fn new(weights: &[f64], dof: u32) -> Result<GchiSqSpec> {
        if dof < 2 || !dof.is_multiple_of(2) {
            return input(format!("degrees of freedom must be even and >= 2, got {dof}"));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return input("weights must be finite");
        }
        let largest = weights.iter().fold(0.0f64, |m, w| m.max(w.abs()));
        let weights = weights
            .iter()
            .copied()
            .filter(|w| w.abs() > WEIGHT_PRUNE_TOL * largest && *w != 0.0)
            .collect();
        Ok(GchiSqSpec { weights, dof })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn dof(&self) -> u32 {
        self.dof
    }

    pub fn is_degenerate(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.dof as f64 * self.weights.iter().sum::<f64>()
    }

    pub fn variance(&self) -> f64 {
        2.0 * self.dof as f64 * self.weights.iter().map(|w| w * w).sum::<f64>()
    }

    /// Same distribution with every weight negated, i.e. the law of `−ξ`.
    pub fn negated(&self) -> GchiSqSpec {
        GchiSqSpec { weights: self.weights.iter().map(|w| -w).collect(), dof: self.dof }
    }

    /// Splits off components below `1/MAX_WEIGHT_RANGE` of the largest and
    /// returns the remaining spec with the mean of the dropped part.
    fn fold_negligible(&self) -> (GchiSqSpec, f64) {
        let largest = self.weights.iter().fold(0.0f64, |m, w| m.max(w.abs()));
        let cut = largest / MAX_WEIGHT_RANGE;
        let (kept, dropped): (Vec<f64>, Vec<f64>) = self.weights.iter().partition(|w| w.abs() >= cut);
        let shift = self.dof as f64 * dropped.iter().sum::<f64>();
        (GchiSqSpec { weights: kept, dof: self.dof }, shift)
    }

    /// Draws one variate.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let chi = ChiSquared::new(self.dof as f64).expect("dof >= 2");
        self.weights.iter().map(|w| w * rng.sample(chi)).sum()
    }
}

/// `P(ξ ≤ x)` with absolute accuracy about 1e-6, clamped to [0, 1].
pub fn gchi2_cdf(spec: &GchiSqSpec, x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    let (main, shift) = spec.fold_negligible();
    let x = x - shift;
    match main.weights.len() {
        0 => {
            if x >= 0.0 {
                1.0
            } else {
                0.0
            }
        }
        1 => single_component_cdf(main.weights[0], main.dof, x),
        _ => imhof_cdf(&main, x).unwrap_or_else(|| monte_carlo_cdf(&main, x)),
    }
}

/// `P(χ²_dof ≤ y)` for even `dof`, via the finite Poisson sum.
pub fn chi2_even_cdf(dof: u32, y: f64) -> f64 {
    if y <= 0.0 {
        return 0.0;
    }
    if y.is_infinite() {
        return 1.0;
    }
    let half = y / 2.0;
    let mut term = (-half).exp();
    let mut tail = term;
    for j in 1..dof / 2 {
        term *= half / j as f64;
        tail += term;
    }
    (1.0 - tail).clamp(0.0, 1.0)
}

fn single_component_cdf(w: f64, dof: u32, x: f64) -> f64 {
    if w > 0.0 {
        chi2_even_cdf(dof, x / w)
    } else {
        1.0 - chi2_even_cdf(dof, x / w)
    }
}

/// Characteristic-function inversion. Returns `None` when the integration
/// range would need more than an internal panel budget.
pub fn imhof_cdf(spec: &GchiSqSpec, x: f64) -> Option<f64> {
    if spec.is_degenerate() {
        return Some(if x >= 0.0 { 1.0 } else { 0.0 });
    }
    let h = spec.dof as f64;
    let w = &spec.weights;

    let upper = truncation_point(w, h);
    let omega = 0.5 * h * w.iter().map(|v| v.abs()).sum::<f64>() + 0.5 * x.abs();
    let mut width = (PI / omega).min(upper);
    let integrand = |u: f64| {
        let theta = 0.5 * h * w.iter().map(|l| (l * u).atan()).sum::<f64>() - 0.5 * x * u;
        let log_rho = 0.25 * h * w.iter().map(|l| (l * l * u * u).ln_1p()).sum::<f64>();
        theta.sin() / (u * log_rho.exp())
    };

    let mut previous: Option<f64> = None;
    for _ in 0..5 {
        let panels = (upper / width).ceil() as usize;
        if panels > MAX_PANELS {
            return None;
        }
        let step = upper / panels as f64;
        let total: f64 = (0..panels)
            .map(|p| gauss_legendre(&integrand, p as f64 * step, (p + 1) as f64 * step))
            .sum();
        if let Some(prev) = previous {
            if (total - prev).abs() < 1e-9 {
                return Some((0.5 - total / PI).clamp(0.0, 1.0));
            }
        }
        previous = Some(total);
        width /= 2.0;
    }
    previous.map(|t| (0.5 - t / PI).clamp(0.0, 1.0))
}

/// Smallest `U` such that the tail `∫_U^∞ |integrand|` is below `TRUNCATION_TOL·π`,
/// using `ρ(u) ≥ Π_{j∈S} (|λ_j|·u)^{h/2}` over the best prefix `S` of weights by magnitude.
fn truncation_point(weights: &[f64], h: f64) -> f64 {
    let mut mags: Vec<f64> = weights.iter().map(|w| w.abs()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    let mut best = f64::INFINITY;
    let (mut k, mut log_prod) = (0.0, 0.0);
    for m in mags {
        k += h / 2.0;
        log_prod += h / 2.0 * m.ln();
        let log_u = (-(PI * k * TRUNCATION_TOL).ln() - log_prod) / k;
        best = best.min(log_u.exp());
    }
    best
}

const GL_NODES: [(f64, f64); 8] = [
    (0.095_012_509_837_637_44, 0.189_450_610_455_068_5),
    (0.281_603_550_779_258_9, 0.182_603_415_044_923_6),
    (0.458_016_777_657_227_4, 0.169_156_519_395_002_5),
    (0.617_876_244_402_643_7, 0.149_595_988_816_576_7),
    (0.755_404_408_355_003, 0.124_628_971_255_533_9),
    (0.865_631_202_387_831_7, 0.095_158_511_682_492_78),
    (0.944_575_023_073_232_6, 0.062_253_523_938_647_89),
    (0.989_400_934_991_649_9, 0.027_152_459_411_754_09),
];

/// 16-point Gauss–Legendre rule on `[a, b]`.
fn gauss_legendre(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let (mid, half) = ((a + b) / 2.0, (b - a) / 2.0);
    half * GL_NODES
        .iter()
        .map(|&(x, w)| w * (f(mid - half * x) + f(mid + half * x)))
        .sum::<f64>()
}

fn monte_carlo_cdf(spec: &GchiSqSpec, x: f64) -> f64 {
    let key: Vec<u64> = spec.weights.iter().map(|w| w.to_bits()).collect();
    let mut rng = substream(derive_key(spec.dof as u64, &key), &[]);
    let hits = (0..MONTE_CARLO_DRAWS).filter(|_| spec.sample(&mut rng) <= x).count();
    hits as f64 / MONTE_CARLO_DRAWS as f64
}

/// Missed-detection and false-alarm probabilities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorRates {
    pub p_md: f64,
    pub p_fa: f64,
}

/// Analytic error model of the genie-aided detector for a fixed `K`.
#[derive(Debug, Clone)]
pub struct GenieErrorModel {
    pair: DiscriminationPair,
    blocks: usize,
    under_h1: GchiSqSpec,
    under_h0_negated: GchiSqSpec,
}

impl GenieErrorModel {
    pub fn new(
        c0: &CovarianceMatrix,
        c1: &CovarianceMatrix,
        noise_var_eff: f64,
        blocks: usize,
    ) -> Result<GenieErrorModel> {
        Self::from_pair(discrimination(c0, c1, noise_var_eff)?, blocks)
    }

    pub fn from_pair(pair: DiscriminationPair, blocks: usize) -> Result<GenieErrorModel> {
        if pair.degenerate {
            return Err(Error::DegenerateHypotheses(
                "C0 and C1 coincide; the error probabilities are undefined".into(),
            ));
        }
        if blocks == 0 {
            return input("K must be at least 1");
        }
        let dof = 2 * blocks as u32;
        let under_h1 = GchiSqSpec::new(&pair.weights1, dof)?;
        let under_h0_negated = GchiSqSpec::new(&pair.weights0, dof)?.negated();
        Ok(GenieErrorModel { pair, blocks, under_h1, under_h0_negated })
    }

    pub fn pair(&self) -> &DiscriminationPair {
        &self.pair
    }

    pub fn blocks(&self) -> usize {
        self.blocks
    }

    fn offset(&self, threshold: f64) -> f64 {
        2.0 * (threshold - self.blocks as f64 * self.pair.log_det_ratio)
    }

    /// `P(ξ(q1) ≤ 2(Θ − K·R))`.
    pub fn p_md(&self, threshold: f64) -> f64 {
        gchi2_cdf(&self.under_h1, self.offset(threshold))
    }

    /// `P(ξ(q0) ≥ 2(Θ − K·R)) = P(ξ(−q0) ≤ −2(Θ − K·R))`.
    pub fn p_fa(&self, threshold: f64) -> f64 {
        gchi2_cdf(&self.under_h0_negated, -self.offset(threshold))
    }

    pub fn rates(&self, threshold: f64) -> ErrorRates {
        ErrorRates { p_md: self.p_md(threshold), p_fa: self.p_fa(threshold) }
    }

    /// Mean of the statistic under H0 (≤ 0) and under H1 (≥ 0).
    pub fn statistic_means(&self) -> (f64, f64) {
        let k = self.blocks as f64;
        let r = self.pair.log_det_ratio;
        let s0: f64 = self.pair.weights0.iter().sum();
        let s1: f64 = self.pair.weights1.iter().sum();
        (k * (r + s0), k * (r + s1))
    }

    pub fn equal_error_threshold(&self) -> Result<CalibratedThreshold> {
        let gap = |t: f64| {
            let r = self.rates(t);
            (r.p_md - r.p_fa, r)
        };
        let kr = self.blocks as f64 * self.pair.log_det_ratio;
        let limit = 1e3 * kr.abs() + 1e3;
        let (m0, m1) = self.statistic_means();
        let (mut lo, mut hi) = (m0.min(m1), m0.max(m1));
        let mut span = (hi - lo).max(1.0);
        while gap(lo).0 > 0.0 {
            lo -= span;
            span *= 2.0;
            if lo < kr - limit {
                return Err(Error::Convergence("no lower bracket for the equal-error threshold".into()));
            }
        }
        let mut span = (hi - lo).max(1.0);
        while gap(hi).0 < 0.0 {
            hi += span;
            span *= 2.0;
            if hi > kr + limit {
                return Err(Error::Convergence("no upper bracket for the equal-error threshold".into()));
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let (g, rates) = gap(mid);
            if g.abs() < EQUAL_ERROR_TOL / 10.0 || hi - lo <= 1e-12 * mid.abs().max(1.0) {
                if g.abs() < EQUAL_ERROR_TOL {
                    return Ok(CalibratedThreshold { threshold: mid, rates });
                }
                break;
            }
            if g < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Err(Error::Convergence("equal-error bisection did not converge".into()))
    }
}

pub const EQUAL_ERROR_TOL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibratedThreshold {
    pub threshold: f64,
    pub rates: ErrorRates,
}

/// Analytic `(P_MD, P_FA)` of the genie-aided detector at threshold `Θ`.
pub fn error_probabilities(
    c0: &CovarianceMatrix,
    c1: &CovarianceMatrix,
    noise_var_eff: f64,
    blocks: usize,
    threshold: f64,
) -> Result<ErrorRates> {
    Ok(GenieErrorModel::new(c0, c1, noise_var_eff, blocks)?.rates(threshold))
}

/// Threshold at which the analytic missed-detection and false-alarm rates agree within 1e-4.
pub fn calibrate_equal_error_threshold(
    c0: &CovarianceMatrix,
    c1: &CovarianceMatrix,
    noise_var_eff: f64,
    blocks: usize,
) -> Result<CalibratedThreshold> {
    GenieErrorModel::new(c0, c1, noise_var_eff, blocks)?.equal_error_threshold()
}
