// SPDX-License-Identifier: MIT OR Apache-2.0

//! Detection of abrupt changes in the channel covariance matrix of a
//! multi-antenna link.
//!
//! The crate covers the full pipeline:
//!
//! - [`channel`]: one-ring covariances, DFT pilots, Rayleigh draws and per-block
//!   ML channel estimates for uplink and downlink.
//! - [`detection`]: log-likelihood sums, the LLR change statistic and the
//!   threshold test.
//! - [`analysis`]: exact missed-detection / false-alarm probabilities of the
//!   genie-aided detector through a generalized chi-squared CDF, and
//!   equal-error threshold calibration.
//! - [`estimation`]: the condition-number-constrained ML covariance estimate,
//!   the shrinkage benchmark and the plug-in detectors.
//! - [`harness`] and [`report`]: Monte Carlo experiments and CSV output.

pub mod analysis;
pub mod channel;
pub mod covariance;
pub mod detection;
pub mod error;
pub mod estimation;
pub mod harness;
pub mod linalg;
pub mod report;
pub mod rng;

pub use analysis::{
    calibrate_equal_error_threshold, discrimination, error_probabilities, gchi2_cdf,
    DiscriminationPair, ErrorRates, GchiSqSpec, GenieErrorModel,
};
pub use channel::{
    make_dft_pilots, observe_and_estimate, one_ring_covariance, sample_channels, Link,
    ObservationSet, OneRingParams, PilotSet, SystemParams,
};
pub use covariance::CovarianceMatrix;
pub use detection::{
    decide, effective_covariance, llr_statistic, log_likelihood_sum, sample_covariance, Decision,
    Hypothesis, LlrStatistic,
};
pub use error::{Error, Result};
pub use estimation::{
    detect_unknown, ml_covariance, ml_objective, shrinkage_covariance, Estimator,
    MlEstimatorConfig,
};
pub use linalg::EigenSystem;
