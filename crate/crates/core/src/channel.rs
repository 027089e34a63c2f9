// SPDX-License-Identifier: MIT OR Apache-2.0

//! Channel synthesis: one-ring covariances, DFT pilots, Rayleigh channel draws
//! and per-block maximum-likelihood channel estimates.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::covariance::CovarianceMatrix;
use crate::error::{config, Error, Result};
use crate::linalg::{hermitian_part, CMatrix, CVector, EigenSystem};
use crate::rng::{complex_normal, substream};

/// Link-level parameters shared by both pilot models.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// Base-station antennas, M.
    pub antennas: usize,
    /// Pilot length, T.
    pub pilot_len: usize,
    /// Coherence blocks used for detection in each frame, K.
    pub detect_blocks: usize,
    /// Coherence blocks per frame, N.
    pub frame_blocks: usize,
    /// Linear transmit power, ρ.
    pub power: f64,
    /// Noise variance, σ².
    pub noise_var: f64,
}

impl SystemParams {
    /// Builds parameters from an SNR in dB with unit noise variance.
    pub fn from_snr_db(
        antennas: usize,
        pilot_len: usize,
        detect_blocks: usize,
        frame_blocks: usize,
        snr_db: f64,
    ) -> Result<SystemParams> {
        let p = SystemParams {
            antennas,
            pilot_len,
            detect_blocks,
            frame_blocks,
            power: 10f64.powf(snr_db / 10.0),
            noise_var: 1.0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.antennas == 0 || self.pilot_len == 0 || self.detect_blocks == 0 {
            return config("antennas, pilot length and detection blocks must be positive");
        }
        if self.frame_blocks < self.detect_blocks {
            return config(format!(
                "frame length N = {} is shorter than the detection window K = {}",
                self.frame_blocks, self.detect_blocks
            ));
        }
        if !(self.power > 0.0 && self.power.is_finite()) {
            return config(format!("transmit power must be positive, got {}", self.power));
        }
        if !(self.noise_var >= 0.0 && self.noise_var.is_finite()) {
            return config(format!("noise variance must be non-negative, got {}", self.noise_var));
        }
        Ok(())
    }

    /// Pilot energy E0 = ρ·T.
    pub fn pilot_energy(&self) -> f64 {
        self.power * self.pilot_len as f64
    }

    /// Variance of the per-antenna estimation noise, σ²/E0.
    pub fn noise_var_eff(&self) -> f64 {
        self.noise_var / self.pilot_energy()
    }

    pub fn snr_db(&self) -> f64 {
        10.0 * (self.power / self.noise_var).log10()
    }

    pub fn with_detect_blocks(self, k: usize) -> SystemParams {
        SystemParams { detect_blocks: k, frame_blocks: self.frame_blocks.max(k), ..self }
    }
}

/// Geometry of the one-ring scattering model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OneRingParams {
    /// Angle of departure Ω.
    pub aod_rad: f64,
    /// Angle spread Ψ.
    pub spread_rad: f64,
    /// Carrier wavelength α in meters.
    pub wavelength_m: f64,
    /// Antenna spacing as a multiple of the wavelength; D = spacing_factor·(m1 − m2)·α.
    pub spacing_factor: f64,
    /// Trapezoid nodes on [0, 2π).
    pub quadrature_points: usize,
}

pub const MIN_QUADRATURE_POINTS: usize = 64;

impl Default for OneRingParams {
    fn default() -> Self {
        OneRingParams {
            aod_rad: 30f64.to_radians(),
            spread_rad: 20f64.to_radians(),
            wavelength_m: 3.76e-3,
            spacing_factor: 2.0,
            quadrature_points: 2048,
        }
    }
}

impl OneRingParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.spread_rad.is_finite() && self.spread_rad >= 0.0) {
            return config(format!("angle spread must be >= 0, got {}", self.spread_rad));
        }
        if !self.aod_rad.is_finite() {
            return config("angle of departure must be finite");
        }
        if !(self.wavelength_m.is_finite() && self.wavelength_m > 0.0) {
            return config(format!("wavelength must be positive, got {}", self.wavelength_m));
        }
        if !self.spacing_factor.is_finite() {
            return config("spacing factor must be finite");
        }
        if self.quadrature_points < MIN_QUADRATURE_POINTS {
            return config(format!(
                "quadrature needs at least {MIN_QUADRATURE_POINTS} points, got {}",
                self.quadrature_points
            ));
        }
        Ok(())
    }

    /// Same geometry with the angle of departure shifted by `delta_rad`.
    pub fn rotated(&self, delta_rad: f64) -> OneRingParams {
        OneRingParams { aod_rad: self.aod_rad + delta_rad, ..*self }
    }

    /// Antenna separation D for an index offset `m1 - m2`.
    pub fn separation(&self, lag: i64) -> f64 {
        self.spacing_factor * lag as f64 * self.wavelength_m
    }

    /// Integrand of the one-ring model at scatterer angle `theta` for separation `d`.
    pub fn integrand(&self, d: f64, theta: f64) -> Complex64 {
        let (psi, omega) = (self.spread_rad, self.aod_rad);
        let spread = 1.0 - psi * psi / 4.0 + psi * psi * (2.0 * theta).cos() / 4.0;
        let phase = -(2.0 * PI / self.wavelength_m) * d * omega.sin() * spread;
        let gain = psi * d * omega.cos() * theta.sin();
        Complex64::from_polar(gain.exp(), phase)
    }
}

/// Largest tolerated negative eigenvalue, relative to the largest, before PSD repair is refused.
pub const ONE_RING_REPAIR_TOL: f64 = 1e-6;

/// Entries of the one-ring covariance before symmetrization and PSD repair.
pub fn one_ring_raw(params: &OneRingParams, dim: usize) -> Result<CMatrix> {
    params.validate()?;
    if dim == 0 {
        return config("covariance dimension must be at least 1");
    }
    let q = params.quadrature_points;
    let step = 2.0 * PI / q as f64;
    // The entry depends only on the lag m1 - m2.
    let lags: Vec<Complex64> = (-(dim as i64 - 1)..dim as i64)
        .map(|lag| {
            if lag == 0 {
                return Complex64::new(1.0, 0.0);
            }
            let d = params.separation(lag);
            let sum: Complex64 = (0..q).map(|i| params.integrand(d, i as f64 * step)).sum();
            sum / q as f64
        })
        .collect();
    let offset = dim as i64 - 1;
    Ok(CMatrix::from_fn(dim, dim, |i, j| lags[(i as i64 - j as i64 + offset) as usize]))
}

/// One-ring channel covariance by trapezoid quadrature over the scatterer ring,
/// symmetrized and projected onto the PSD cone.
pub fn one_ring_covariance(params: &OneRingParams, dim: usize) -> Result<CovarianceMatrix> {
    let raw = one_ring_raw(params, dim)?;
    let herm = hermitian_part(&raw);
    let eig = EigenSystem::of_hermitian(&herm);
    if eig.min() < -ONE_RING_REPAIR_TOL * eig.max() {
        return Err(Error::ModelFidelity(format!(
            "one-ring covariance has eigenvalue {:e} against maximum {:e}",
            eig.min(),
            eig.max()
        )));
    }
    if eig.min() < 0.0 {
        Ok(CovarianceMatrix::from_eigen_floored(&eig))
    } else {
        Ok(CovarianceMatrix::from_trusted(herm))
    }
}

/// Uplink pilot sequence and downlink pilot matrix.
#[derive(Debug, Clone)]
pub struct PilotSet {
    /// Length-T uplink pilot, xᴴx = T.
    pub uplink: CVector,
    /// T×M downlink pilot, XᴴX = T·I.
    pub downlink: CMatrix,
}

impl PilotSet {
    pub fn pilot_len(&self) -> usize {
        self.uplink.len()
    }

    pub fn antennas(&self) -> usize {
        self.downlink.ncols()
    }
}

/// Pilots taken from the unnormalized T-point DFT matrix, whose columns have squared norm T.
pub fn make_dft_pilots(pilot_len: usize, antennas: usize) -> Result<PilotSet> {
    if pilot_len == 0 || antennas == 0 {
        return config("pilot length and antenna count must be positive");
    }
    if pilot_len < antennas {
        return config(format!(
            "downlink pilots need T >= M, got T = {pilot_len}, M = {antennas}"
        ));
    }
    let t = pilot_len as f64;
    let dft = |row: usize, col: usize| {
        // Reduce the exponent modulo T so large products keep full precision.
        let k = (row * col) % pilot_len;
        Complex64::from_polar(1.0, -2.0 * PI * k as f64 / t)
    };
    let downlink = CMatrix::from_fn(pilot_len, antennas, dft);
    let uplink = CVector::from_fn(pilot_len, |row, _| dft(row, 0));
    Ok(PilotSet { uplink, downlink })
}

/// Draws CN(0, C) vectors as `L·z` with `L` the Hermitian square root of `C`.
#[derive(Debug, Clone)]
pub struct ChannelSampler {
    factor: CMatrix,
}

impl ChannelSampler {
    pub fn new(cov: &CovarianceMatrix) -> ChannelSampler {
        let eig = cov.eigen();
        ChannelSampler { factor: eig.map_values(|v| v.max(0.0).sqrt()) }
    }

    pub fn dim(&self) -> usize {
        self.factor.nrows()
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> CVector {
        let z = CVector::from_fn(self.dim(), |_, _| complex_normal(rng));
        &self.factor * z
    }
}

/// `K` i.i.d. CN(0, cov) columns, reproducible for a fixed seed.
pub fn sample_channels(cov: &CovarianceMatrix, k: usize, seed: u64) -> CMatrix {
    let sampler = ChannelSampler::new(cov);
    let mut rng = substream(seed, &[]);
    let mut out = CMatrix::zeros(cov.dim(), k);
    for j in 0..k {
        out.set_column(j, &sampler.draw(&mut rng));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Link {
    Uplink,
    Downlink,
}

/// Per-block ML channel estimates, one column per coherence block.
#[derive(Debug, Clone)]
pub struct ObservationSet {
    pub estimates: CMatrix,
    /// σ²/E0.
    pub noise_var_eff: f64,
}

impl ObservationSet {
    pub fn new(estimates: CMatrix, noise_var_eff: f64) -> Result<ObservationSet> {
        if estimates.ncols() == 0 || estimates.nrows() == 0 {
            return Err(Error::InvalidInput("observation set has no blocks".into()));
        }
        if !(noise_var_eff.is_finite() && noise_var_eff >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "effective noise variance must be finite and non-negative, got {noise_var_eff}"
            )));
        }
        Ok(ObservationSet { estimates, noise_var_eff })
    }

    pub fn blocks(&self) -> usize {
        self.estimates.ncols()
    }

    pub fn antennas(&self) -> usize {
        self.estimates.nrows()
    }
}

/// Pilot transmission plus ML estimation for a fixed true covariance.
///
/// Block `k` of a draw keyed by `path` uses the substream `path ++ [k]`; the
/// channel is drawn before the noise, so both links see the same channels.
#[derive(Debug, Clone)]
pub struct Observer {
    sampler: ChannelSampler,
    params: SystemParams,
    pilots: PilotSet,
    link: Link,
}

impl Observer {
    pub fn new(
        cov_true: &CovarianceMatrix,
        params: &SystemParams,
        pilots: &PilotSet,
        link: Link,
    ) -> Result<Observer> {
        params.validate()?;
        let m = params.antennas;
        if cov_true.dim() != m {
            return config(format!("covariance is {0}x{0} but M = {m}", cov_true.dim()));
        }
        if pilots.pilot_len() != params.pilot_len || pilots.downlink.nrows() != params.pilot_len {
            return config("pilot length does not match T");
        }
        if link == Link::Downlink && (pilots.antennas() != m || params.pilot_len < m) {
            return config("downlink pilot matrix must be T x M with T >= M");
        }
        Ok(Observer {
            sampler: ChannelSampler::new(cov_true),
            params: *params,
            pilots: pilots.clone(),
            link,
        })
    }

    /// Channel and ML estimate for one block.
    pub fn block<R: Rng + ?Sized>(&self, rng: &mut R) -> (CVector, CVector) {
        let h = self.sampler.draw(rng);
        let sigma = self.params.noise_var.sqrt();
        let sqrt_rho = self.params.power.sqrt();
        let t = self.params.pilot_len;
        let norm = sqrt_rho * t as f64;
        let estimate = match self.link {
            Link::Uplink => {
                let noise = CMatrix::from_fn(h.len(), t, |_, _| complex_normal(rng) * sigma);
                let received = (&h * self.pilots.uplink.adjoint()).scale(sqrt_rho) + noise;
                (received * &self.pilots.uplink).unscale(norm)
            }
            Link::Downlink => {
                let noise = CVector::from_fn(t, |_, _| complex_normal(rng) * sigma);
                let received = (&self.pilots.downlink * &h).scale(sqrt_rho) + noise;
                (self.pilots.downlink.adjoint() * received).unscale(norm)
            }
        };
        (h, estimate)
    }

    /// Channels and estimates for `k` blocks keyed by `seed` and `path`.
    pub fn draw(&self, k: usize, seed: u64, path: &[u64]) -> (CMatrix, CMatrix) {
        let m = self.sampler.dim();
        let mut channels = CMatrix::zeros(m, k);
        let mut estimates = CMatrix::zeros(m, k);
        let mut key = Vec::with_capacity(path.len() + 1);
        key.extend_from_slice(path);
        key.push(0);
        for j in 0..k {
            *key.last_mut().unwrap() = j as u64;
            let mut rng = substream(seed, &key);
            let (h, est) = self.block(&mut rng);
            channels.set_column(j, &h);
            estimates.set_column(j, &est);
        }
        (channels, estimates)
    }

    pub fn observe(&self, k: usize, seed: u64, path: &[u64]) -> ObservationSet {
        let (_, estimates) = self.draw(k, seed, path);
        ObservationSet { estimates, noise_var_eff: self.params.noise_var_eff() }
    }
}

/// Simulates `params.detect_blocks` pilot blocks under `cov_true` and returns the ML estimates.
pub fn observe_and_estimate(
    cov_true: &CovarianceMatrix,
    params: &SystemParams,
    pilots: &PilotSet,
    link: Link,
    seed: u64,
) -> Result<ObservationSet> {
    let observer = Observer::new(cov_true, params, pilots, link)?;
    Ok(observer.observe(params.detect_blocks, seed, &[]))
}
