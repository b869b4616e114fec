//! Test-waveform generation with exact ground truth.

mod profile;
mod scenario;
mod synth;

pub use profile::{EventProfile, FreqProfile};
pub use scenario::{DcEvent, Harmonic, NoiseKind, NoiseSpec, ScenarioSpec, StepSpec};
pub use synth::{
    add_noise, inject_decaying_dc, inject_step, phasor_to_waveform, soft_saturate, synthesize,
};

use crate::estimator::ParameterVector;

/// Uniformly sampled single-channel waveform. Sample `k` is taken at
/// `t0 + k * ts`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleStream {
    pub t0: f64,
    pub ts: f64,
    pub values: Vec<f64>,
}

impl SampleStream {
    pub fn new(t0: f64, ts: f64, values: Vec<f64>) -> Self {
        Self { t0, ts, values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.ts
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.values.len()).map(|k| self.time(k))
    }

    pub fn end_time(&self) -> f64 {
        self.time(self.values.len().saturating_sub(1))
    }
}

/// Per-sample truth emitted alongside a synthesized [`SampleStream`].
///
/// `phase_rad` is the unwrapped instantaneous phase of the fundamental,
/// including any injected phase steps.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub t0: f64,
    pub ts: f64,
    pub freq_hz: Vec<f64>,
    pub rocof_hzps: Vec<f64>,
    pub amp_pu: Vec<f64>,
    pub phase_rad: Vec<f64>,
    pub dc_amp: f64,
    pub dc_tau: f64,
}

impl GroundTruth {
    pub fn len(&self) -> usize {
        self.freq_hz.len().max(self.phase_rad.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.ts
    }
}

/// One synchrophasor report: amplitude, frequency, RoCoF and phase at `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhasorFrame {
    pub t: f64,
    pub amp_pu: f64,
    pub freq_hz: f64,
    pub rocof_hzps: f64,
    pub phase_rad: f64,
}

/// Evaluates the linear-in-parameters signal model `Θᵀ𝕊(t)` with
/// `𝕊 = [cos ω₁t, sin ω₁t, …, cos nω₁t, sin nω₁t, 1, −t]`.
///
/// `a_s[i]` multiplies the cosine term and `a_c[i]` the sine term, so a
/// harmonic of amplitude `a` and phase `φ` has `a_c = a cos φ`, `a_s = a sin φ`.
pub fn eval_model(theta: &ParameterVector, omega1: f64, t: f64) -> f64 {
    let mut acc = theta.a_dc - theta.a_dc1 * t;
    for (i, (ac, as_)) in theta.a_c.iter().zip(&theta.a_s).enumerate() {
        let arg = (i + 1) as f64 * omega1 * t;
        let (s, c) = arg.sin_cos();
        acc += as_ * c + ac * s;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn eval_model_zero_theta() {
        let theta = ParameterVector::zeros(3);
        assert_eq!(eval_model(&theta, 100.0 * PI, 0.37), 0.0);
    }

    #[test]
    fn eval_model_sine_coefficient() {
        let mut theta = ParameterVector::zeros(1);
        theta.a_c[0] = 1.0;
        assert!((eval_model(&theta, 100.0 * PI, 0.005) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn eval_model_taylor_dc_terms() {
        let mut theta = ParameterVector::zeros(2);
        theta.a_dc = 0.2;
        theta.a_dc1 = 0.1;
        assert!((eval_model(&theta, 100.0 * PI, 1.0) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn stream_times() {
        let s = SampleStream::new(1.0, 0.5, vec![0.0; 3]);
        assert_eq!(s.times().collect::<Vec<_>>(), vec![1.0, 1.5, 2.0]);
        assert_eq!(s.end_time(), 2.0);
    }
}
