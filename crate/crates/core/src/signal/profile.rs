use std::f64::consts::PI;

use crate::error::{Error, Result};

const TWO_PI: f64 = 2.0 * PI;

/// Frequency trajectory of the fundamental relative to the base frequency.
///
/// Every variant has closed-form frequency, RoCoF and phase integral so the
/// synthesizer can emit exact truth.
#[derive(Debug, Clone, PartialEq)]
pub enum FreqProfile {
    Constant,
    /// Linear move from the base frequency to `to_hz` over
    /// `[t_start, t_start + duration)`, holding `to_hz` afterwards.
    Ramp {
        t_start: f64,
        duration: f64,
        to_hz: f64,
    },
    Event(EventProfile),
}

/// Disturbance-like dip: a raised-cosine RoCoF pulse that takes the
/// frequency down by `peak_dev_hz` with peak slope `peak_rocof_hzps`,
/// followed by a slower raised-cosine recovery of
/// `recovery_fraction * peak_dev_hz` over `recovery_s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventProfile {
    pub t_start: f64,
    pub peak_dev_hz: f64,
    pub peak_rocof_hzps: f64,
    pub recovery_fraction: f64,
    pub recovery_s: f64,
}

impl Default for EventProfile {
    fn default() -> Self {
        Self {
            t_start: 1.0,
            peak_dev_hz: 0.5,
            peak_rocof_hzps: 1.0,
            recovery_fraction: 0.5,
            recovery_s: 4.0,
        }
    }
}

/// Raised-cosine RoCoF pulse with integral `area` over `[t0, t0 + width]`.
#[derive(Debug, Clone, Copy)]
struct Pulse {
    t0: f64,
    width: f64,
    area: f64,
}

impl Pulse {
    fn u(&self, t: f64) -> f64 {
        (t - self.t0) / self.width
    }

    fn rocof(&self, t: f64) -> f64 {
        let u = self.u(t);
        if (0.0..=1.0).contains(&u) {
            self.area / self.width * (1.0 - (TWO_PI * u).cos())
        } else {
            0.0
        }
    }

    fn dev(&self, t: f64) -> f64 {
        let u = self.u(t);
        if u <= 0.0 {
            0.0
        } else if u >= 1.0 {
            self.area
        } else {
            self.area * (u - (TWO_PI * u).sin() / TWO_PI)
        }
    }

    /// Integral of `dev` from `t0` to `t`.
    fn dev_integral(&self, t: f64) -> f64 {
        let u = self.u(t);
        if u <= 0.0 {
            0.0
        } else if u >= 1.0 {
            self.area * self.width * 0.5 + self.area * (t - self.t0 - self.width)
        } else {
            self.area
                * self.width
                * (0.5 * u * u + ((TWO_PI * u).cos() - 1.0) / (TWO_PI * TWO_PI))
        }
    }
}

impl EventProfile {
    fn pulses(&self) -> [Pulse; 2] {
        let dip_width = 2.0 * self.peak_dev_hz / self.peak_rocof_hzps;
        [
            Pulse {
                t0: self.t_start,
                width: dip_width,
                area: -self.peak_dev_hz,
            },
            Pulse {
                t0: self.t_start + dip_width,
                width: self.recovery_s,
                area: self.recovery_fraction * self.peak_dev_hz,
            },
        ]
    }

    fn validate(&self) -> Result<()> {
        let ok = self.peak_dev_hz > 0.0
            && self.peak_rocof_hzps > 0.0
            && self.recovery_s > 0.0
            && (0.0..=1.0).contains(&self.recovery_fraction)
            && self.t_start.is_finite();
        if !ok {
            return Err(Error::InvalidInput(format!("invalid event profile {self:?}")));
        }
        let recovery_peak = 2.0 * self.recovery_fraction * self.peak_dev_hz / self.recovery_s;
        if recovery_peak > self.peak_rocof_hzps {
            return Err(Error::InvalidInput(
                "event recovery is steeper than the peak RoCoF".into(),
            ));
        }
        Ok(())
    }
}

impl FreqProfile {
    pub fn validate(&self) -> Result<()> {
        match self {
            FreqProfile::Constant => Ok(()),
            FreqProfile::Ramp {
                t_start,
                duration,
                to_hz,
            } => {
                if *duration > 0.0 && t_start.is_finite() && *to_hz > 0.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidInput(format!("invalid ramp profile {self:?}")))
                }
            }
            FreqProfile::Event(e) => e.validate(),
        }
    }

    /// Deviation from `base` in Hz.
    pub fn deviation(&self, base: f64, t: f64) -> f64 {
        match self {
            FreqProfile::Constant => 0.0,
            FreqProfile::Ramp {
                t_start,
                duration,
                to_hz,
            } => {
                let u = ((t - t_start) / duration).clamp(0.0, 1.0);
                (to_hz - base) * u
            }
            FreqProfile::Event(e) => e.pulses().iter().map(|p| p.dev(t)).sum(),
        }
    }

    pub fn freq(&self, base: f64, t: f64) -> f64 {
        base + self.deviation(base, t)
    }

    pub fn rocof(&self, base: f64, t: f64) -> f64 {
        match self {
            FreqProfile::Constant => 0.0,
            FreqProfile::Ramp {
                t_start,
                duration,
                to_hz,
            } => {
                if t >= *t_start && t < t_start + duration {
                    (to_hz - base) / duration
                } else {
                    0.0
                }
            }
            FreqProfile::Event(e) => e.pulses().iter().map(|p| p.rocof(t)).sum(),
        }
    }

    /// `∫₀ᵗ f(τ) dτ` in cycles.
    pub fn cycles(&self, base: f64, t: f64) -> f64 {
        base * t + self.deviation_integral(base, t)
    }

    fn deviation_integral(&self, base: f64, t: f64) -> f64 {
        match self {
            FreqProfile::Constant => 0.0,
            FreqProfile::Ramp {
                t_start,
                duration,
                to_hz,
            } => {
                let slope = (to_hz - base) / duration;
                let dt = t - t_start;
                if dt <= 0.0 {
                    0.0
                } else if dt <= *duration {
                    0.5 * slope * dt * dt
                } else {
                    0.5 * slope * duration * duration + (to_hz - base) * (dt - duration)
                }
            }
            FreqProfile::Event(e) => e.pulses().iter().map(|p| p.dev_integral(t)).sum(),
        }
    }

    /// Largest instantaneous frequency the profile reaches.
    pub fn max_freq(&self, base: f64) -> f64 {
        match self {
            FreqProfile::Constant | FreqProfile::Event(_) => base,
            FreqProfile::Ramp { to_hz, .. } => base.max(*to_hz),
        }
    }
}
