use std::f64::consts::PI;
use std::str::FromStr;

use super::profile::{EventProfile, FreqProfile};
use crate::error::{Error, Result};
use crate::kv::{KvDoc, KvWriter};

/// Harmonic of the fundamental; `amp` is relative to the fundamental amplitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Harmonic {
    pub order: usize,
    pub amp: f64,
    pub phase: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseKind {
    #[default]
    Gaussian,
    /// AR(1) low-passed Gaussian, variance-matched.
    Colored,
    /// Gaussian background plus sparse Bernoulli outliers.
    Impulsive,
}

impl NoiseKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NoiseKind::Gaussian => "gaussian",
            NoiseKind::Colored => "colored",
            NoiseKind::Impulsive => "impulsive",
        }
    }
}

impl FromStr for NoiseKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" | "white" => Ok(NoiseKind::Gaussian),
            "colored" | "coloured" => Ok(NoiseKind::Colored),
            "impulsive" => Ok(NoiseKind::Impulsive),
            other => Err(format!("unknown noise kind `{other}`")),
        }
    }
}

/// Additive measurement noise. `level` is the standard deviation as a
/// fraction of the fundamental amplitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub level: f64,
    pub seed: u64,
    pub pole: f64,
    pub impulse_rate: f64,
    pub impulse_scale: f64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            kind: NoiseKind::Gaussian,
            level: 0.0,
            seed: 0,
            pole: 0.9,
            impulse_rate: 0.001,
            impulse_scale: 10.0,
        }
    }
}

impl NoiseSpec {
    pub fn gaussian(level: f64) -> Self {
        Self {
            level,
            ..Self::default()
        }
    }

    pub fn colored(level: f64) -> Self {
        Self {
            kind: NoiseKind::Colored,
            level,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=0.2).contains(&self.level) {
            return Err(Error::InvalidInput(format!(
                "noise level {} outside [0, 0.2]",
                self.level
            )));
        }
        if !(0.0..1.0).contains(&self.pole) {
            return Err(Error::InvalidInput(format!("noise pole {} outside [0, 1)", self.pole)));
        }
        if !(0.0..=1.0).contains(&self.impulse_rate) || !(self.impulse_scale >= 0.0) {
            return Err(Error::InvalidInput("invalid impulse parameters".into()));
        }
        Ok(())
    }
}

/// Amplitude/phase step of the fundamental over `[t_start, t_start + duration)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSpec {
    pub t_start: f64,
    pub duration: f64,
    pub amp_step: f64,
    pub phase_step: f64,
}

impl StepSpec {
    pub fn contains(&self, t: f64) -> bool {
        t >= self.t_start && t < self.t_start + self.duration
    }
}

/// Decaying DC offset `amp·exp(−(t − t_start)/tau)` for `t ≥ t_start`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DcEvent {
    pub t_start: f64,
    pub amp: f64,
    pub tau: f64,
}

impl DcEvent {
    pub fn value(&self, t: f64) -> f64 {
        if t >= self.t_start {
            self.amp * (-(t - self.t_start) / self.tau).exp()
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub duration: f64,
    pub base_freq: f64,
    pub amplitude: f64,
    pub phase0: f64,
    pub profile: FreqProfile,
    pub harmonics: Vec<Harmonic>,
    pub noise: NoiseSpec,
    pub steps: Vec<StepSpec>,
    pub dc_events: Vec<DcEvent>,
    /// Knee of the odd-symmetric soft saturation, if any.
    pub distortion: Option<f64>,
}

impl ScenarioSpec {
    /// Noise-free constant-frequency unit tone.
    pub fn tone(base_freq: f64, duration: f64) -> Self {
        Self {
            duration,
            base_freq,
            amplitude: 1.0,
            phase0: 0.0,
            profile: FreqProfile::Constant,
            harmonics: Vec::new(),
            noise: NoiseSpec::default(),
            steps: Vec::new(),
            dc_events: Vec::new(),
            distortion: None,
        }
    }

    fn event_base(noise: NoiseSpec) -> Self {
        Self {
            profile: FreqProfile::Event(EventProfile::default()),
            noise,
            ..Self::tone(50.0, 10.0)
        }
    }

    /// Frequency event with 2% Gaussian noise.
    pub fn case1() -> Self {
        Self::event_base(NoiseSpec::gaussian(0.02))
    }

    /// Frequency event with 15% Gaussian noise.
    pub fn case1b() -> Self {
        Self::event_base(NoiseSpec::gaussian(0.15))
    }

    /// Event, 2% colored noise, 0.05 pu / 0.04 rad step at 6 s for 0.4 s.
    pub fn case2() -> Self {
        let mut s = Self::event_base(NoiseSpec::colored(0.02));
        s.steps.push(StepSpec {
            t_start: 6.0,
            duration: 0.4,
            amp_step: 0.05,
            phase_step: 0.04,
        });
        s
    }

    /// Event, 2% colored noise, π/8 phase step from 5 s to the end.
    pub fn case2b() -> Self {
        let mut s = Self::event_base(NoiseSpec::colored(0.02));
        s.steps.push(StepSpec {
            t_start: 5.0,
            duration: 5.0,
            amp_step: 0.0,
            phase_step: PI / 8.0,
        });
        s
    }

    /// Event, 2% Gaussian noise, 2% third harmonic, decaying DC at 1 s.
    pub fn case3() -> Self {
        let mut s = Self::event_base(NoiseSpec::gaussian(0.02));
        s.harmonics.push(Harmonic {
            order: 3,
            amp: 0.02,
            phase: 0.0,
        });
        s.dc_events.push(DcEvent {
            t_start: 1.0,
            amp: 0.1,
            tau: 0.05,
        });
        s
    }

    /// Bundled case by name (`case1`, `case1b`, `case2`, `case2b`, `case3`).
    pub fn named(name: &str) -> Option<Self> {
        match name {
            "case1" => Some(Self::case1()),
            "case1b" => Some(Self::case1b()),
            "case2" => Some(Self::case2()),
            "case2b" => Some(Self::case2b()),
            "case3" => Some(Self::case3()),
            _ => None,
        }
    }

    /// Largest harmonic order present (the fundamental counts as 1).
    pub fn max_order(&self) -> usize {
        self.harmonics.iter().map(|h| h.order).max().unwrap_or(1).max(1)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0) || !self.duration.is_finite() {
            return Err(Error::InvalidInput(format!(
                "duration must be positive, got {}",
                self.duration
            )));
        }
        if !(self.base_freq > 0.0) || !(self.amplitude >= 0.0) {
            return Err(Error::InvalidInput(
                "base_freq must be positive and amplitude non-negative".into(),
            ));
        }
        self.profile.validate()?;
        self.noise.validate()?;
        for h in &self.harmonics {
            if h.order < 2 {
                return Err(Error::InvalidInput(format!(
                    "harmonic order must be ≥ 2, got {}",
                    h.order
                )));
            }
        }
        for s in &self.steps {
            let end = s.t_start + s.duration;
            if s.t_start < 0.0 || s.duration < 0.0 || end > self.duration + 1e-9 {
                return Err(Error::InvalidInput(format!(
                    "step window [{}, {}] outside [0, {}]",
                    s.t_start, end, self.duration
                )));
            }
            if s.amp_step <= -1.0 {
                return Err(Error::InvalidInput("amplitude step must exceed −1".into()));
            }
        }
        for d in &self.dc_events {
            if !(d.tau > 0.0) {
                return Err(Error::InvalidInput(format!("dc tau must be positive, got {}", d.tau)));
            }
        }
        if let Some(knee) = self.distortion {
            if !(knee > 0.0) {
                return Err(Error::InvalidInput("distortion knee must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let doc = KvDoc::parse(text)?;
        doc.reject_unknown(known_key)?;
        let mut spec = Self::tone(doc.require("base_freq")?, doc.require("duration")?);
        spec.amplitude = doc.get_or("amplitude", 1.0)?;
        spec.phase0 = doc.get_or("phase0", 0.0)?;

        let profile: String = doc.get_or("profile", "constant".to_string())?;
        spec.profile = match profile.as_str() {
            "constant" => FreqProfile::Constant,
            "ramp" => FreqProfile::Ramp {
                t_start: doc.get_or("ramp.t_start", 0.0)?,
                duration: doc.require("ramp.duration")?,
                to_hz: doc.require("ramp.to_hz")?,
            },
            "event" => {
                let d = EventProfile::default();
                FreqProfile::Event(EventProfile {
                    t_start: doc.get_or("event.t_start", d.t_start)?,
                    peak_dev_hz: doc.get_or("event.peak_dev_hz", d.peak_dev_hz)?,
                    peak_rocof_hzps: doc.get_or("event.peak_rocof_hzps", d.peak_rocof_hzps)?,
                    recovery_fraction: doc
                        .get_or("event.recovery_fraction", d.recovery_fraction)?,
                    recovery_s: doc.get_or("event.recovery_s", d.recovery_s)?,
                })
            }
            other => {
                return Err(Error::parse(
                    doc.line_of("profile").unwrap_or(0),
                    format!("unknown profile `{other}`"),
                ))
            }
        };

        for i in doc.section_indices("harmonic")? {
            spec.harmonics.push(Harmonic {
                order: doc.require(&format!("harmonic.{i}.order"))?,
                amp: doc.require(&format!("harmonic.{i}.amp"))?,
                phase: doc.get_or(&format!("harmonic.{i}.phase"), 0.0)?,
            });
        }

        let d = NoiseSpec::default();
        spec.noise = NoiseSpec {
            kind: match doc.get_str("noise.kind") {
                None => d.kind,
                Some(s) => s.parse().map_err(|m: String| {
                    Error::parse(doc.line_of("noise.kind").unwrap_or(0), m)
                })?,
            },
            level: doc.get_or("noise.level", d.level)?,
            seed: doc.get_or("noise.seed", d.seed)?,
            pole: doc.get_or("noise.pole", d.pole)?,
            impulse_rate: doc.get_or("noise.impulse_rate", d.impulse_rate)?,
            impulse_scale: doc.get_or("noise.impulse_scale", d.impulse_scale)?,
        };

        for i in doc.section_indices("step")? {
            let t_start: f64 = doc.require(&format!("step.{i}.t_start"))?;
            spec.steps.push(StepSpec {
                t_start,
                duration: doc.get_or(&format!("step.{i}.duration"), spec.duration - t_start)?,
                amp_step: doc.get_or(&format!("step.{i}.amp"), 0.0)?,
                phase_step: doc.get_or(&format!("step.{i}.phase"), 0.0)?,
            });
        }

        for i in doc.section_indices("dc")? {
            spec.dc_events.push(DcEvent {
                t_start: doc.require(&format!("dc.{i}.t_start"))?,
                amp: doc.require(&format!("dc.{i}.amp"))?,
                tau: doc.require(&format!("dc.{i}.tau"))?,
            });
        }

        spec.distortion = doc.get("distortion.knee")?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_kv(&self) -> String {
        let mut w = KvWriter::new();
        w.num("duration", self.duration)
            .num("base_freq", self.base_freq)
            .num("amplitude", self.amplitude)
            .num("phase0", self.phase0);
        match &self.profile {
            FreqProfile::Constant => {
                w.text("profile", "constant");
            }
            FreqProfile::Ramp {
                t_start,
                duration,
                to_hz,
            } => {
                w.text("profile", "ramp")
                    .num("ramp.t_start", *t_start)
                    .num("ramp.duration", *duration)
                    .num("ramp.to_hz", *to_hz);
            }
            FreqProfile::Event(e) => {
                w.text("profile", "event")
                    .num("event.t_start", e.t_start)
                    .num("event.peak_dev_hz", e.peak_dev_hz)
                    .num("event.peak_rocof_hzps", e.peak_rocof_hzps)
                    .num("event.recovery_fraction", e.recovery_fraction)
                    .num("event.recovery_s", e.recovery_s);
            }
        }
        for (i, h) in self.harmonics.iter().enumerate() {
            w.int(&format!("harmonic.{}.order", i + 1), h.order)
                .num(&format!("harmonic.{}.amp", i + 1), h.amp)
                .num(&format!("harmonic.{}.phase", i + 1), h.phase);
        }
        let n = &self.noise;
        w.text("noise.kind", n.kind.as_str())
            .num("noise.level", n.level)
            .int("noise.seed", n.seed)
            .num("noise.pole", n.pole)
            .num("noise.impulse_rate", n.impulse_rate)
            .num("noise.impulse_scale", n.impulse_scale);
        for (i, s) in self.steps.iter().enumerate() {
            w.num(&format!("step.{}.t_start", i + 1), s.t_start)
                .num(&format!("step.{}.duration", i + 1), s.duration)
                .num(&format!("step.{}.amp", i + 1), s.amp_step)
                .num(&format!("step.{}.phase", i + 1), s.phase_step);
        }
        for (i, d) in self.dc_events.iter().enumerate() {
            w.num(&format!("dc.{}.t_start", i + 1), d.t_start)
                .num(&format!("dc.{}.amp", i + 1), d.amp)
                .num(&format!("dc.{}.tau", i + 1), d.tau);
        }
        if let Some(knee) = self.distortion {
            w.num("distortion.knee", knee);
        }
        w.finish()
    }
}

fn known_key(key: &str) -> bool {
    const PLAIN: &[&str] = &[
        "duration",
        "base_freq",
        "amplitude",
        "phase0",
        "profile",
        "ramp.t_start",
        "ramp.duration",
        "ramp.to_hz",
        "event.t_start",
        "event.peak_dev_hz",
        "event.peak_rocof_hzps",
        "event.recovery_fraction",
        "event.recovery_s",
        "noise.kind",
        "noise.level",
        "noise.seed",
        "noise.pole",
        "noise.impulse_rate",
        "noise.impulse_scale",
        "distortion.knee",
    ];
    if PLAIN.contains(&key) {
        return true;
    }
    let parts: Vec<&str> = key.split('.').collect();
    if parts.len() != 3 || parts[1].parse::<usize>().is_err() {
        return false;
    }
    matches!(
        (parts[0], parts[2]),
        ("harmonic", "order" | "amp" | "phase")
            | ("step", "t_start" | "duration" | "amp" | "phase")
            | ("dc", "t_start" | "amp" | "tau")
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_cases_round_trip() {
        for name in ["case1", "case1b", "case2", "case2b", "case3"] {
            let spec = ScenarioSpec::named(name).unwrap();
            spec.validate().unwrap();
            let back = ScenarioSpec::parse(&spec.to_kv()).unwrap();
            assert_eq!(back, spec, "{name}");
        }
    }

    #[test]
    fn missing_base_freq_is_named() {
        let err = ScenarioSpec::parse("duration = 1\n").unwrap_err();
        assert!(err.to_string().contains("base_freq"), "{err}");
    }

    #[test]
    fn unknown_key_reports_line() {
        let err = ScenarioSpec::parse("duration = 1\nbase_freq = 50\nbogus = 3\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 3") && msg.contains("bogus"), "{msg}");
    }

    #[test]
    fn rejects_bad_noise_and_steps() {
        let mut s = ScenarioSpec::case1();
        s.noise.level = 0.25;
        assert!(s.validate().is_err());
        let mut s = ScenarioSpec::case1();
        s.steps.push(StepSpec {
            t_start: 9.8,
            duration: 0.5,
            amp_step: 0.0,
            phase_step: 0.1,
        });
        assert!(s.validate().is_err());
        assert!(ScenarioSpec::tone(50.0, 0.0).validate().is_err());
    }

    #[test]
    fn step_duration_defaults_to_end() {
        let s = ScenarioSpec::parse("duration = 10\nbase_freq = 50\nstep.1.t_start = 4\nstep.1.phase = 0.3\n")
            .unwrap();
        assert_eq!(s.steps[0].duration, 6.0);
    }
}
