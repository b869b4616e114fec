use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::scenario::{NoiseKind, NoiseSpec, ScenarioSpec, StepSpec};
use super::{GroundTruth, PhasorFrame, SampleStream};
use crate::error::{Error, Result};

const TWO_PI: f64 = 2.0 * PI;

/// Renders `spec` at `fs` Hz. The fundamental's phase is the exact integral
/// of the frequency profile; `seed` is added to the scenario's noise seed so
/// one spec can drive a Monte Carlo ensemble.
pub fn synthesize(spec: &ScenarioSpec, fs: f64, seed: u64) -> Result<(SampleStream, GroundTruth)> {
    spec.validate()?;
    if !(fs > 0.0) || !fs.is_finite() {
        return Err(Error::InvalidInput(format!("sampling rate must be positive, got {fs}")));
    }
    let f_max = spec.profile.max_freq(spec.base_freq);
    for order in std::iter::once(1).chain(spec.harmonics.iter().map(|h| h.order)) {
        if order as f64 * f_max >= fs / 2.0 {
            return Err(Error::Nyquist {
                order,
                freq_hz: order as f64 * f_max,
                fs,
            });
        }
    }
    if spec.duration * fs < 2.0 {
        return Err(Error::InvalidInput("duration·fs must be at least 2".into()));
    }

    let n = (spec.duration * fs).round() as usize + 1;
    let ts = 1.0 / fs;
    let base = spec.base_freq;
    let mut values = Vec::with_capacity(n);
    let mut truth = GroundTruth {
        t0: 0.0,
        ts,
        freq_hz: Vec::with_capacity(n),
        rocof_hzps: Vec::with_capacity(n),
        amp_pu: Vec::with_capacity(n),
        phase_rad: Vec::with_capacity(n),
        dc_amp: spec.dc_events.first().map_or(0.0, |d| d.amp),
        dc_tau: spec.dc_events.first().map_or(0.0, |d| d.tau),
    };

    for k in 0..n {
        let t = k as f64 / fs;
        let (amp, offset) = step_state(&spec.steps, t);
        let amp = spec.amplitude * amp;
        let cycles = spec.profile.cycles(base, t);
        // Wrap whole cycles before scaling so the trig argument stays small.
        let frac = cycles - cycles.floor();
        let theta = TWO_PI * frac + spec.phase0 + offset;

        let mut x = amp * theta.sin();
        for h in &spec.harmonics {
            let i = h.order as f64;
            x += spec.amplitude * h.amp * (i * theta + h.phase).sin();
        }
        for d in &spec.dc_events {
            x += d.value(t);
        }
        values.push(x);

        truth.freq_hz.push(spec.profile.freq(base, t));
        truth.rocof_hzps.push(spec.profile.rocof(base, t));
        truth.amp_pu.push(amp);
        truth.phase_rad.push(TWO_PI * cycles + spec.phase0 + offset);
    }

    let mut stream = SampleStream::new(0.0, ts, values);
    if let Some(knee) = spec.distortion {
        stream = soft_saturate(&stream, knee);
    }
    if spec.noise.level > 0.0 {
        let noise = NoiseSpec {
            seed: spec.noise.seed.wrapping_add(seed),
            ..spec.noise
        };
        stream = add_noise(&stream, &noise, spec.amplitude);
    }
    Ok((stream, truth))
}

/// Combined amplitude factor and phase offset of all steps active at `t`.
fn step_state(steps: &[StepSpec], t: f64) -> (f64, f64) {
    steps
        .iter()
        .filter(|s| s.contains(t))
        .fold((1.0, 0.0), |(a, p), s| (a * (1.0 + s.amp_step), p + s.phase_step))
}

/// Adds noise with standard deviation `noise.level · ref_amp`.
pub fn add_noise(stream: &SampleStream, noise: &NoiseSpec, ref_amp: f64) -> SampleStream {
    let mut out = stream.clone();
    let sigma = noise.level * ref_amp;
    if sigma == 0.0 {
        return out;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    match noise.kind {
        NoiseKind::Gaussian => {
            for v in &mut out.values {
                let w: f64 = rng.sample(StandardNormal);
                *v += sigma * w;
            }
        }
        NoiseKind::Colored => {
            // Stationary AR(1): unit variance for every k.
            let p = noise.pole;
            let gain = (1.0 - p * p).sqrt();
            let mut u = 0.0;
            for (k, v) in out.values.iter_mut().enumerate() {
                let w: f64 = rng.sample(StandardNormal);
                u = if k == 0 { w } else { p * u + gain * w };
                *v += sigma * u;
            }
        }
        NoiseKind::Impulsive => {
            for v in &mut out.values {
                let w: f64 = rng.sample(StandardNormal);
                *v += sigma * w;
                if rng.random_bool(noise.impulse_rate) {
                    let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                    *v += sign * noise.impulse_scale * sigma;
                }
            }
        }
    }
    out
}

/// Re-synthesizes the fundamental inside the step window with amplitude
/// `(1 + amp_step)` and phase offset `phase_step`, using `truth` for the
/// fundamental's amplitude and phase. Returns the updated stream and truth.
pub fn inject_step(
    stream: &SampleStream,
    truth: &GroundTruth,
    step: &StepSpec,
) -> Result<(SampleStream, GroundTruth)> {
    if truth.len() != stream.len() {
        return Err(Error::InvalidInput("truth and stream lengths differ".into()));
    }
    let end = step.t_start + step.duration;
    if step.duration < 0.0 || step.t_start < stream.t0 - 1e-12 || end > stream.end_time() + stream.ts {
        return Err(Error::InvalidInput(format!(
            "step window [{}, {end}] outside stream span",
            step.t_start
        )));
    }
    let mut out = stream.clone();
    let mut tr = truth.clone();
    for k in 0..stream.len() {
        let t = stream.time(k);
        if !step.contains(t) {
            continue;
        }
        let a = truth.amp_pu[k];
        let ph = truth.phase_rad[k];
        let a_new = a * (1.0 + step.amp_step);
        let ph_new = ph + step.phase_step;
        out.values[k] += a_new * ph_new.sin() - a * ph.sin();
        tr.amp_pu[k] = a_new;
        tr.phase_rad[k] = ph_new;
    }
    Ok((out, tr))
}

/// Adds `a_dc·exp(−(t − t_start)/tau)` for samples at or after `t_start`.
pub fn inject_decaying_dc(stream: &SampleStream, t_start: f64, a_dc: f64, tau: f64) -> Result<SampleStream> {
    if !(tau > 0.0) {
        return Err(Error::InvalidInput(format!("tau must be positive, got {tau}")));
    }
    let mut out = stream.clone();
    for k in 0..out.len() {
        let t = stream.time(k);
        if t >= t_start {
            out.values[k] += a_dc * (-(t - t_start) / tau).exp();
        }
    }
    Ok(out)
}

/// Odd-symmetric compressor `knee·tanh(x/knee)`.
pub fn soft_saturate(stream: &SampleStream, knee: f64) -> SampleStream {
    let mut out = stream.clone();
    for v in &mut out.values {
        *v = knee * (*v / knee).tanh();
    }
    out
}

/// Rebuilds a waveform from synchrophasor frames: within each frame,
/// `a(k) = a_m·sin(2π·k·Ts·f + π·k²·Ts²·df/dt + θ_m)` with `k` counted from
/// the frame start.
pub fn phasor_to_waveform(frames: &[PhasorFrame], fs: f64) -> Result<SampleStream> {
    let first = frames
        .first()
        .ok_or_else(|| Error::InvalidInput("empty phasor frame sequence".into()))?;
    if !(fs > 0.0) {
        return Err(Error::InvalidInput(format!("sampling rate must be positive, got {fs}")));
    }
    let ts = 1.0 / fs;
    let per_frame = if frames.len() == 1 {
        1
    } else {
        let spacing = frames[1].t - first.t;
        let m = spacing * fs;
        let rounded = m.round();
        if rounded < 1.0 || (m - rounded).abs() > 1e-6 {
            return Err(Error::InvalidInput(format!(
                "fs = {fs} Hz is not a multiple of the frame rate {} Hz",
                1.0 / spacing
            )));
        }
        for w in frames.windows(2) {
            if ((w[1].t - w[0].t) - spacing).abs() > 1e-9 * spacing.max(1.0) {
                return Err(Error::InvalidInput("phasor frames are not uniformly spaced".into()));
            }
        }
        rounded as usize
    };
    let mut values = Vec::with_capacity(frames.len() * per_frame);
    for fr in frames {
        if !(fr.amp_pu >= 0.0) {
            return Err(Error::InvalidInput("negative phasor amplitude".into()));
        }
        for k in 0..per_frame {
            let kt = k as f64 * ts;
            let arg = TWO_PI * kt * fr.freq_hz + PI * kt * kt * fr.rocof_hzps + fr.phase_rad;
            values.push(fr.amp_pu * arg.sin());
        }
    }
    Ok(SampleStream::new(first.t, ts, values))
}
