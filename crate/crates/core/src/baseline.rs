//! Rolling-window RoCoF and finite-difference truth extraction.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::signal::GroundTruth;

/// Time-stamped scalar track (frequency in Hz, or RoCoF in Hz/s).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FreqSeries {
    pub t: Vec<f64>,
    pub f_hz: Vec<f64>,
}

impl FreqSeries {
    pub fn new(t: Vec<f64>, f_hz: Vec<f64>) -> Result<Self> {
        if t.len() != f_hz.len() {
            return Err(Error::InvalidInput("time and value lengths differ".into()));
        }
        if t.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput("timestamps must be strictly increasing".into()));
        }
        Ok(Self { t, f_hz })
    }

    pub fn uniform(t0: f64, ts: f64, f_hz: Vec<f64>) -> Self {
        let t = (0..f_hz.len()).map(|k| t0 + k as f64 * ts).collect();
        Self { t, f_hz }
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Linear interpolation; `None` outside the span.
    pub fn value_at(&self, t: f64) -> Option<f64> {
        let n = self.t.len();
        if n == 0 || t < self.t[0] || t > self.t[n - 1] {
            return None;
        }
        let j = self.t.partition_point(|&x| x <= t);
        if j == 0 {
            return Some(self.f_hz[0]);
        }
        if j >= n {
            return Some(self.f_hz[n - 1]);
        }
        let (t0, t1) = (self.t[j - 1], self.t[j]);
        let w = (t - t0) / (t1 - t0);
        Some(self.f_hz[j - 1] + w * (self.f_hz[j] - self.f_hz[j - 1]))
    }
}

/// `(f(t) − f(t − window)) / window`, stamped at the trailing edge `t`, for
/// every sample where the window fits; `f(t − window)` is interpolated.
pub fn rolling_rocof(series: &FreqSeries, window: f64) -> Result<FreqSeries> {
    let n = series.len();
    if n < 2 {
        return Ok(FreqSeries::default());
    }
    let span = series.t[n - 1] - series.t[0];
    let max_dt = series
        .t
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(0.0f64, f64::max);
    if !(window >= 2.0 * max_dt * (1.0 - 1e-9)) {
        return Err(Error::InvalidInput(format!(
            "window {window} s is shorter than two sample intervals"
        )));
    }
    if window > span {
        return Ok(FreqSeries::default());
    }
    let mut out = FreqSeries::default();
    for (k, &t) in series.t.iter().enumerate() {
        if let Some(past) = series.value_at(t - window) {
            out.t.push(t);
            out.f_hz.push((series.f_hz[k] - past) / window);
        }
    }
    Ok(out)
}

/// Centered-difference derivative at interior points.
pub fn centered_derivative(series: &FreqSeries) -> FreqSeries {
    let n = series.len();
    let mut out = FreqSeries::default();
    for k in 1..n.saturating_sub(1) {
        let dt = series.t[k + 1] - series.t[k - 1];
        out.t.push(series.t[k]);
        out.f_hz.push((series.f_hz[k + 1] - series.f_hz[k - 1]) / dt);
    }
    out
}

/// Frequency and RoCoF from an unwrapped phase track: centered differences
/// of `phase/(2π)`, then of the resulting frequency.
pub fn derivatives_from_phase(t0: f64, ts: f64, phase_rad: &[f64]) -> (FreqSeries, FreqSeries) {
    let cycles = FreqSeries::uniform(t0, ts, phase_rad.iter().map(|p| p / (2.0 * PI)).collect());
    let f = centered_derivative(&cycles);
    let r = centered_derivative(&f);
    (f, r)
}

/// Frequency and RoCoF tracks of `truth`: the stored analytic values when
/// present, otherwise finite differences of the phase track.
pub fn truth_derivatives(truth: &GroundTruth) -> Result<(FreqSeries, FreqSeries)> {
    if truth.is_empty() {
        return Err(Error::InvalidInput("empty ground truth".into()));
    }
    let n = truth.freq_hz.len();
    if n > 0 && truth.rocof_hzps.len() == n {
        return Ok((
            FreqSeries::uniform(truth.t0, truth.ts, truth.freq_hz.clone()),
            FreqSeries::uniform(truth.t0, truth.ts, truth.rocof_hzps.clone()),
        ));
    }
    if truth.phase_rad.len() < 5 {
        return Err(Error::InvalidInput("phase track too short to differentiate".into()));
    }
    Ok(derivatives_from_phase(truth.t0, truth.ts, &truth.phase_rad))
}
