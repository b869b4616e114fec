//! Streaming frequency and rate-of-change-of-frequency (RoCoF) estimation
//! for single-channel power-system waveforms.
//!
//! The estimator is a Lyapunov-derived adaptive observer: a harmonic
//! regressor model whose coefficients follow gradient update laws while the
//! fundamental frequency is adjusted by steepest descent on the squared
//! prediction error. Around it sit the pieces needed to exercise it:
//!
//! - [`signal`]: scenario synthesis with exact ground truth, noise and
//!   disturbance injection, phasor-to-waveform reconstruction.
//! - [`estimator`]: the per-sample state machine, learning-rate adaptation,
//!   and the persistence-of-excitation Gram check.
//! - [`baseline`]: rolling-window RoCoF and truth derivative extraction.
//! - [`tuner`]: particle-swarm tuning of the gain vector against ISE.
//! - [`metrics`]: latency-aligned FE/RE statistics and reconstruction error.
//! - [`io`]: the CSV and key-value file formats.
//!
//! ```
//! use rocof_core::estimator::{Estimator, EstimatorConfig};
//! use rocof_core::signal::{synthesize, ScenarioSpec};
//!
//! let spec = ScenarioSpec::tone(50.0, 2.0);
//! let (stream, _truth) = synthesize(&spec, 1200.0, 0).unwrap();
//! let config = EstimatorConfig::default();
//! let series = Estimator::run(&stream, &config).unwrap();
//! let last = series.records.last().unwrap();
//! assert!((last.f_hz - 50.0).abs() < 0.01);
//! ```

pub mod baseline;
pub mod error;
pub mod estimator;
pub mod io;
pub mod kv;
pub mod metrics;
pub mod signal;
pub mod tuner;

pub use error::{Error, Result};
