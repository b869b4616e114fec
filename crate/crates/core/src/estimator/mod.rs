//! The adaptive observer: per-sample parameter, frequency and RoCoF updates.

mod config;
mod pe;

pub use config::{EstimatorConfig, ObsFilter};
pub use pe::{pe_gram, PeGram};

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::signal::SampleStream;

const TWO_PI: f64 = 2.0 * PI;

/// Floor on `g²` in the learning-rate law.
pub const GRAD_FLOOR: f64 = 1e-6;

/// Estimated model coefficients. For harmonic `i`, `a_c[i]` multiplies
/// `sin(iφ)` and `a_s[i]` multiplies `cos(iφ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterVector {
    pub a_c: Vec<f64>,
    pub a_s: Vec<f64>,
    pub a_dc: f64,
    pub a_dc1: f64,
}

impl ParameterVector {
    pub fn zeros(n: usize) -> Self {
        Self {
            a_c: vec![0.0; n],
            a_s: vec![0.0; n],
            a_dc: 0.0,
            a_dc1: 0.0,
        }
    }

    pub fn n(&self) -> usize {
        self.a_c.len()
    }

    /// `[a_s1, a_c1, …, a_sn, a_cn, a_dc, a_dc1]`, matching [`regressor`] order.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(2 * self.n() + 2);
        for (s, c) in self.a_s.iter().zip(&self.a_c) {
            v.push(*s);
            v.push(*c);
        }
        v.push(self.a_dc);
        v.push(self.a_dc1);
        v
    }

    /// Builds coefficients from per-harmonic amplitude and phase so that
    /// harmonic `i` contributes `amp·sin(iφ + phase)`.
    pub fn from_amp_phase(amps: &[f64], phases: &[f64], a_dc: f64, a_dc1: f64) -> Self {
        Self {
            a_c: amps.iter().zip(phases).map(|(a, p)| a * p.cos()).collect(),
            a_s: amps.iter().zip(phases).map(|(a, p)| a * p.sin()).collect(),
            a_dc,
            a_dc1,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.a_c.iter().chain(&self.a_s).all(|v| v.is_finite())
            && self.a_dc.is_finite()
            && self.a_dc1.is_finite()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorState {
    pub theta: ParameterVector,
    /// Fundamental estimate in rad/s; always `2π·f_hz`.
    pub omega1: f64,
    /// Fundamental estimate in Hz, advanced by `rocof_raw·Ts` each step.
    pub f_hz: f64,
    /// Wrapped fundamental phase in `[0, 2π)`.
    pub phase_acc: f64,
    pub k: u64,
    /// Elapsed time since the last re-anchor.
    pub t_anchor: f64,
    pub k_anchor: u64,
    pub eta_k: f64,
    pub zfilt: f64,
    /// Frequency before the most recent step.
    pub last_f: f64,
    /// Unsmoothed RoCoF of the most recent step.
    pub rocof_raw: f64,
    pub residual: f64,
    pub gradient: f64,
    pub diverged: bool,
}

/// One report frame.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateRecord {
    pub t: f64,
    pub f_hz: f64,
    /// Boxcar-smoothed RoCoF.
    pub rocof_hzps: f64,
    pub amps: Vec<f64>,
    /// Instantaneous phase of each harmonic at `t`, wrapped to `(−π, π]`.
    pub phases: Vec<f64>,
    /// DC offset at `t`.
    pub a_dc: f64,
    pub a_dc1: f64,
    pub residual: f64,
    pub eta: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EstimateSeries {
    pub records: Vec<EstimateRecord>,
    /// Sample index at which the estimator diverged, if it did.
    pub diverged_at: Option<u64>,
}

impl EstimateSeries {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Boxcar average over the most recent `len` values.
#[derive(Debug, Clone)]
struct Boxcar {
    buf: Vec<f64>,
    pos: usize,
    filled: usize,
    sum: f64,
}

impl Boxcar {
    fn new(len: usize) -> Self {
        Self {
            buf: vec![0.0; len],
            pos: 0,
            filled: 0,
            sum: 0.0,
        }
    }

    fn push(&mut self, x: f64) -> f64 {
        self.sum += x - self.buf[self.pos];
        self.buf[self.pos] = x;
        self.pos += 1;
        if self.pos == self.buf.len() {
            self.pos = 0;
            // Re-sum once per lap so the running total cannot drift.
            self.sum = self.buf.iter().sum();
        }
        self.filled = (self.filled + 1).min(self.buf.len());
        self.sum / self.filled as f64
    }
}

/// Learning rate for gradient `g`: `β/(Ts·g²)` clamped to
/// `[(1 − band), (1 + band)]·eta_opt`.
pub fn adapt_eta(gradient: f64, config: &EstimatorConfig) -> f64 {
    let raw = config.beta_omega / (config.ts * (gradient * gradient).max(GRAD_FLOOR));
    raw.clamp(
        (1.0 - config.eta_band) * config.eta_opt,
        (1.0 + config.eta_band) * config.eta_opt,
    )
}

/// Amplitude and full-quadrant phase of `a_s·cos + a_c·sin = amp·sin(· + phase)`.
pub fn amp_phase(a_s: f64, a_c: f64) -> (f64, f64) {
    let amp = a_s.hypot(a_c);
    if amp == 0.0 {
        (0.0, 0.0)
    } else {
        (amp, a_s.atan2(a_c))
    }
}

/// `∂(Θᵀ𝕊(t))/∂ω₁` for the absolute-time model evaluated by
/// [`crate::signal::eval_model`].
pub fn model_gradient(theta: &ParameterVector, omega1: f64, t: f64) -> f64 {
    let mut g = 0.0;
    for (i, (ac, as_)) in theta.a_c.iter().zip(&theta.a_s).enumerate() {
        let order = (i + 1) as f64;
        let (s, c) = (order * omega1 * t).sin_cos();
        g += order * t * (ac * c - as_ * s);
    }
    g
}

fn wrap_phase(x: f64) -> f64 {
    let w = x.rem_euclid(TWO_PI);
    if w >= TWO_PI {
        0.0
    } else {
        w
    }
}

fn wrap_pi(x: f64) -> f64 {
    let w = wrap_phase(x);
    if w > PI {
        w - TWO_PI
    } else {
        w
    }
}

/// Streaming estimator instance: configuration plus evolving state.
#[derive(Debug, Clone)]
pub struct Estimator {
    config: EstimatorConfig,
    state: EstimatorState,
    smoother: Boxcar,
    lp_alpha: f64,
    t0: f64,
    cs: Vec<(f64, f64)>,
}

impl Estimator {
    pub fn new(config: EstimatorConfig) -> Result<Self> {
        Self::with_start_time(config, 0.0)
    }

    /// Estimator whose first sample is taken at `t0`.
    pub fn with_start_time(config: EstimatorConfig, t0: f64) -> Result<Self> {
        let state = init(&config)?;
        let lp_alpha = match config.obs_filter {
            ObsFilter::Identity => 0.0,
            ObsFilter::LowPass => (-TWO_PI * config.obs_cutoff_hz * config.ts).exp(),
        };
        Ok(Self {
            smoother: Boxcar::new(config.rocof_smooth_window),
            cs: vec![(0.0, 1.0); config.n],
            config,
            state,
            lp_alpha,
            t0,
        })
    }

    pub fn config(&self) -> &EstimatorConfig {
        &self.config
    }

    pub fn state(&self) -> &EstimatorState {
        &self.state
    }

    /// Re-initializes the state, clearing any divergence.
    pub fn reset(&mut self) {
        self.state = init(&self.config).expect("config validated at construction");
        self.smoother = Boxcar::new(self.config.rocof_smooth_window);
    }

    /// Current regressor `[cos φ, sin φ, …, cos nφ, sin nφ, 1, −t_anchor]`.
    pub fn regressor(&self) -> Vec<f64> {
        regressor(&self.state, &self.config)
    }

    pub fn predict(&self) -> f64 {
        predict(&self.state, &self.config)
    }

    fn fill_trig(&mut self) {
        let phi = self.state.phase_acc;
        for (i, cs) in self.cs.iter_mut().enumerate() {
            let (s, c) = ((i + 1) as f64 * phi).sin_cos();
            *cs = (s, c);
        }
    }

    /// Processes one sample; returns a record every `report_every` samples.
    pub fn step(&mut self, sample: f64) -> Result<Option<EstimateRecord>> {
        if self.state.diverged {
            return Err(Error::AlreadyDiverged);
        }
        self.fill_trig();
        let cfg = &self.config;
        let ts = cfg.ts;
        let st = &mut self.state;
        let phase_before = st.phase_acc;
        let t_anchor = st.t_anchor;

        let th = &mut st.theta;
        let mut pred = th.a_dc - th.a_dc1 * t_anchor;
        for (i, (s, c)) in self.cs.iter().enumerate() {
            pred += th.a_s[i] * c + th.a_c[i] * s;
        }
        let raw = sample - pred;
        let z = match cfg.obs_filter {
            ObsFilter::Identity => raw,
            ObsFilter::LowPass => {
                st.zfilt = self.lp_alpha * st.zfilt + (1.0 - self.lp_alpha) * raw;
                st.zfilt
            }
        };

        for (i, (s, c)) in self.cs.iter().enumerate() {
            th.a_c[i] += ts * cfg.gamma_c[i] * z * s;
            th.a_s[i] += ts * cfg.gamma_s[i] * z * c;
        }
        th.a_dc += ts * cfg.gamma_dc * z;
        th.a_dc1 -= t_anchor * ts * cfg.gamma_dc1 * z;

        let horizon = if cfg.grad_horizon_s > 0.0 {
            cfg.grad_horizon_s
        } else {
            t_anchor
        };
        let mut g = 0.0;
        for (i, (s, c)) in self.cs.iter().enumerate() {
            g += (i + 1) as f64 * horizon * (th.a_c[i] * c - th.a_s[i] * s);
        }
        let eta = adapt_eta(g, cfg);

        // Descent on ½E² with E = â − a = −z: Δω = −Ts·η·E·g = Ts·η·z·g.
        let rocof = eta * z * g / TWO_PI;
        st.last_f = st.f_hz;
        st.f_hz += rocof * ts;
        st.omega1 = TWO_PI * st.f_hz;
        st.rocof_raw = rocof;
        st.eta_k = eta;
        st.residual = z;
        st.gradient = g;

        st.phase_acc = wrap_phase(st.phase_acc + st.omega1 * ts);
        let k = st.k;
        st.k += 1;
        st.k_anchor += 1;
        st.t_anchor = st.k_anchor as f64 * ts;
        if st.t_anchor >= cfg.t_reset_s {
            th.a_dc -= th.a_dc1 * st.t_anchor;
            st.k_anchor = 0;
            st.t_anchor = 0.0;
        }

        let smoothed = self.smoother.push(rocof);

        let finite = st.theta.is_finite()
            && st.f_hz.is_finite()
            && st.phase_acc.is_finite()
            && smoothed.is_finite();
        if !finite || (st.f_hz - cfg.f0).abs() > cfg.f0 / 2.0 {
            st.diverged = true;
            return Err(Error::Diverged { index: k });
        }

        if (k + 1) % cfg.report_every as u64 != 0 {
            return Ok(None);
        }
        let th = &st.theta;
        let mut amps = Vec::with_capacity(cfg.n);
        let mut phases = Vec::with_capacity(cfg.n);
        for i in 0..cfg.n {
            let (a, p) = amp_phase(th.a_s[i], th.a_c[i]);
            amps.push(a);
            phases.push(wrap_pi((i + 1) as f64 * phase_before + p));
        }
        Ok(Some(EstimateRecord {
            t: self.t0 + k as f64 * ts,
            f_hz: st.f_hz,
            rocof_hzps: smoothed,
            amps,
            phases,
            a_dc: th.a_dc - th.a_dc1 * t_anchor,
            a_dc1: th.a_dc1,
            residual: z,
            eta,
        }))
    }

    /// Runs `config` over a whole stream. Divergence stops the run and is
    /// reported through `diverged_at` with the records emitted so far.
    pub fn run(stream: &SampleStream, config: &EstimatorConfig) -> Result<EstimateSeries> {
        // A stream shorter than two samples carries no spacing to check.
        if stream.len() >= 2 && !((stream.ts - config.ts).abs() <= 1e-9) {
            return Err(Error::TsMismatch {
                stream: stream.ts,
                config: config.ts,
            });
        }
        let mut est = Self::with_start_time(config.clone(), stream.t0)?;
        let mut series = EstimateSeries {
            records: Vec::with_capacity(stream.len() / config.report_every + 1),
            diverged_at: None,
        };
        for &x in &stream.values {
            match est.step(x) {
                Ok(Some(r)) => series.records.push(r),
                Ok(None) => {}
                Err(Error::Diverged { index }) => {
                    series.diverged_at = Some(index);
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        Ok(series)
    }
}

/// Initial state: zero parameters at the nominal frequency.
pub fn init(config: &EstimatorConfig) -> Result<EstimatorState> {
    config.validate()?;
    Ok(EstimatorState {
        theta: ParameterVector::zeros(config.n),
        omega1: TWO_PI * config.f0,
        f_hz: config.f0,
        phase_acc: 0.0,
        k: 0,
        t_anchor: 0.0,
        k_anchor: 0,
        eta_k: config.eta_opt,
        zfilt: 0.0,
        last_f: config.f0,
        rocof_raw: 0.0,
        residual: 0.0,
        gradient: 0.0,
        diverged: false,
    })
}

pub fn regressor(state: &EstimatorState, config: &EstimatorConfig) -> Vec<f64> {
    let mut v = Vec::with_capacity(2 * config.n + 2);
    for i in 1..=config.n {
        let (s, c) = (i as f64 * state.phase_acc).sin_cos();
        v.push(c);
        v.push(s);
    }
    v.push(1.0);
    v.push(-state.t_anchor);
    v
}

pub fn predict(state: &EstimatorState, config: &EstimatorConfig) -> f64 {
    // Same summation order as the update step, so a predicted sample yields
    // an exactly zero residual.
    let th = &state.theta;
    let mut pred = th.a_dc - th.a_dc1 * state.t_anchor;
    for i in 0..config.n {
        let (s, c) = ((i + 1) as f64 * state.phase_acc).sin_cos();
        pred += th.a_s[i] * c + th.a_c[i] * s;
    }
    pred
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(n: usize) -> EstimatorConfig {
        EstimatorConfig::default().with_order(n)
    }

    #[test]
    fn init_sets_nominal_frequency() {
        let s = init(&cfg(1)).unwrap();
        assert_eq!(s.omega1, 100.0 * PI);
        let mut c = cfg(1);
        c.f0 = 60.0;
        assert_eq!(init(&c).unwrap().omega1, 120.0 * PI);
        c.n = 0;
        assert!(matches!(init(&c), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn regressor_examples() {
        let c = cfg(1);
        let mut s = init(&c).unwrap();
        assert_eq!(regressor(&s, &c), vec![1.0, 0.0, 1.0, -0.0]);
        s.phase_acc = PI / 2.0;
        s.t_anchor = 2.0;
        let r = regressor(&s, &c);
        assert!(r[0].abs() < 1e-15 && r[1] == 1.0 && r[2] == 1.0 && r[3] == -2.0);
        let c2 = cfg(2);
        let mut s2 = init(&c2).unwrap();
        s2.phase_acc = PI / 2.0;
        let r = regressor(&s2, &c2);
        assert!((r[2] + 1.0).abs() < 1e-15 && r[3].abs() < 1e-15);
    }

    #[test]
    fn predict_examples() {
        let c = cfg(1);
        let mut s = init(&c).unwrap();
        assert_eq!(predict(&s, &c), 0.0);
        s.theta.a_c[0] = 1.0;
        s.phase_acc = PI / 2.0;
        assert!((predict(&s, &c) - 1.0).abs() < 1e-15);
        let mut s = init(&c).unwrap();
        s.theta.a_dc = 0.5;
        assert_eq!(predict(&s, &c), 0.5);
    }

    #[test]
    fn dc_update_substitution() {
        let mut c = cfg(1);
        c.gamma_dc = 10.0;
        let mut e = Estimator::new(c).unwrap();
        e.step(0.5).unwrap();
        assert!((e.state().theta.a_dc - 0.5 * 10.0 / 1200.0).abs() < 1e-15);
        assert!((e.state().theta.a_dc - 0.004167).abs() < 1e-6);
    }

    #[test]
    fn zero_residual_is_fixed_point() {
        let c = cfg(3);
        let mut e = Estimator::new(c).unwrap();
        for k in 0..50 {
            e.step((k as f64 * 0.3).sin()).unwrap();
        }
        let before = e.state().clone();
        let x = e.predict();
        e.step(x).unwrap();
        let after = e.state();
        assert_eq!(after.theta, before.theta);
        assert_eq!(after.f_hz, before.f_hz);
        assert_eq!(after.rocof_raw, 0.0);
        assert_eq!(after.k, before.k + 1);
    }

    #[test]
    fn adapt_eta_examples() {
        let mut c = cfg(1);
        c.eta_opt = 300.0;
        c.eta_band = 0.5;
        assert!((adapt_eta(2.0, &c) - 300.0).abs() < 1e-9);
        c.eta_band = 0.05;
        // η_raw = 400 and 200 via g² = 1200/η_raw.
        assert!((adapt_eta((1200.0f64 / 400.0).sqrt(), &c) - 315.0).abs() < 1e-9);
        assert!((adapt_eta((1200.0f64 / 200.0).sqrt(), &c) - 285.0).abs() < 1e-9);
        assert_eq!(adapt_eta(0.0, &c), 315.0);
    }

    #[test]
    fn amp_phase_examples() {
        let (a, p) = amp_phase(0.6, 0.8);
        assert!((a - 1.0).abs() < 1e-15 && (p - 0.6435).abs() < 1e-4);
        assert_eq!(amp_phase(0.0, 0.0), (0.0, 0.0));
        let (a, p) = amp_phase(1.0, 0.0);
        assert_eq!(a, 1.0);
        assert!((p - PI / 2.0).abs() < 1e-15);
    }

    #[test]
    fn run_rejects_ts_mismatch_and_handles_empty() {
        let c = cfg(1);
        let s = SampleStream::new(0.0, 1e-3, vec![0.0; 10]);
        assert!(matches!(Estimator::run(&s, &c), Err(Error::TsMismatch { .. })));
        let s = SampleStream::new(0.0, 0.0, vec![]);
        assert!(Estimator::run(&s, &c).unwrap().is_empty());
    }

    #[test]
    fn divergence_is_sticky() {
        let mut c = cfg(1);
        c.eta_opt = 1e9;
        let mut e = Estimator::new(c).unwrap();
        let mut hit = None;
        for k in 0..12000 {
            let x = (TWO_PI * 50.0 * k as f64 / 1200.0).sin();
            if let Err(err) = e.step(x) {
                hit = Some(err);
                break;
            }
        }
        assert!(matches!(hit, Some(Error::Diverged { .. })), "{hit:?}");
        assert!(matches!(e.step(0.0), Err(Error::AlreadyDiverged)));
        e.reset();
        assert!(e.step(0.0).is_ok());
    }

    #[test]
    fn boxcar_average() {
        let mut b = Boxcar::new(3);
        assert_eq!(b.push(3.0), 3.0);
        assert_eq!(b.push(6.0), 4.5);
        assert_eq!(b.push(9.0), 6.0);
        assert_eq!(b.push(0.0), 5.0);
    }
}
