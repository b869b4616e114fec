//! Global-best particle swarm search over the estimator gains, scored by the
//! integral square frequency error.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimator::{EstimateSeries, Estimator, EstimatorConfig};
use crate::metrics::align;
use crate::signal::{GroundTruth, SampleStream};

/// Score added when a run diverges.
pub const DIVERGENCE_PENALTY: f64 = 1e6;

/// Estimator setting addressed by one search dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GainParam {
    /// `γ_c[i]` and `γ_s[i]` for the fundamental, tied.
    Fundamental,
    /// `γ_c[i]` and `γ_s[i]` for every harmonic above the fundamental, tied.
    Harmonics,
    /// `γ_c[i]` alone (0-based harmonic index).
    GammaC(usize),
    /// `γ_s[i]` alone (0-based harmonic index).
    GammaS(usize),
    GammaDc,
    GammaDc1,
    EtaOpt,
    /// RoCoF boxcar length in samples (rounded).
    SmoothWindow,
}

impl GainParam {
    pub fn name(&self) -> String {
        match self {
            GainParam::Fundamental => "gamma_1".into(),
            GainParam::Harmonics => "gamma_h".into(),
            GainParam::GammaC(i) => format!("gamma_c_{}", i + 1),
            GainParam::GammaS(i) => format!("gamma_s_{}", i + 1),
            GainParam::GammaDc => "gamma_dc".into(),
            GainParam::GammaDc1 => "gamma_dc1".into(),
            GainParam::EtaOpt => "eta_opt".into(),
            GainParam::SmoothWindow => "rocof_smooth_window".into(),
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        let idx = |p: &str| s.strip_prefix(p).and_then(|r| r.parse::<usize>().ok()).filter(|i| *i >= 1);
        Some(match s {
            "gamma_1" => GainParam::Fundamental,
            "gamma_h" => GainParam::Harmonics,
            "gamma_dc" => GainParam::GammaDc,
            "gamma_dc1" => GainParam::GammaDc1,
            "eta_opt" => GainParam::EtaOpt,
            "rocof_smooth_window" => GainParam::SmoothWindow,
            _ => {
                if let Some(i) = idx("gamma_c_") {
                    GainParam::GammaC(i - 1)
                } else if let Some(i) = idx("gamma_s_") {
                    GainParam::GammaS(i - 1)
                } else {
                    return None;
                }
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dim {
    pub param: GainParam,
    pub lower: f64,
    pub upper: f64,
    /// Search in `log10` of the value.
    pub log: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchSpace {
    pub dims: Vec<Dim>,
}

impl SearchSpace {
    pub fn new(dims: Vec<Dim>) -> Result<Self> {
        let s = Self { dims };
        s.validate()?;
        Ok(s)
    }

    /// Fundamental, harmonic, DC gains and `eta_opt`.
    pub fn standard() -> Self {
        let d = |param, lower, upper| Dim {
            param,
            lower,
            upper,
            log: true,
        };
        Self {
            dims: vec![
                d(GainParam::Fundamental, 1.0, 200.0),
                d(GainParam::Harmonics, 0.1, 100.0),
                d(GainParam::GammaDc, 0.01, 50.0),
                d(GainParam::GammaDc1, 0.01, 50.0),
                d(GainParam::EtaOpt, 20.0, 2000.0),
            ],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims.is_empty() {
            return Err(Error::InvalidInput("search space has no dimensions".into()));
        }
        for d in &self.dims {
            if !(d.lower > 0.0 && d.lower < d.upper && d.upper.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "bounds for {} must satisfy 0 < lower < upper",
                    d.param.name()
                )));
            }
        }
        Ok(())
    }

    pub fn check_order(&self, n: usize) -> Result<()> {
        for d in &self.dims {
            if let GainParam::GammaC(i) | GainParam::GammaS(i) = d.param {
                if i >= n {
                    return Err(Error::InvalidInput(format!(
                        "{} exceeds harmonic order {n}",
                        d.param.name()
                    )));
                }
            }
        }
        Ok(())
    }

    /// Box in search coordinates (log10 where flagged).
    pub fn bounds(&self) -> Vec<(f64, f64)> {
        self.dims
            .iter()
            .map(|d| {
                if d.log {
                    (d.lower.log10(), d.upper.log10())
                } else {
                    (d.lower, d.upper)
                }
            })
            .collect()
    }

    /// Maps a point in search coordinates to parameter values.
    pub fn decode(&self, x: &[f64]) -> Vec<f64> {
        self.dims
            .iter()
            .zip(x)
            .map(|(d, v)| if d.log { 10f64.powf(*v) } else { *v })
            .collect()
    }

    /// `base` with the parameter values (not search coordinates) applied.
    pub fn apply(&self, values: &[f64], base: &EstimatorConfig) -> EstimatorConfig {
        let mut c = base.clone();
        for (d, &v) in self.dims.iter().zip(values) {
            match d.param {
                GainParam::Fundamental => {
                    c.gamma_c[0] = v;
                    c.gamma_s[0] = v;
                }
                GainParam::Harmonics => {
                    for i in 1..c.n {
                        c.gamma_c[i] = v;
                        c.gamma_s[i] = v;
                    }
                }
                GainParam::GammaC(i) => c.gamma_c[i] = v,
                GainParam::GammaS(i) => c.gamma_s[i] = v,
                GainParam::GammaDc => c.gamma_dc = v,
                GainParam::GammaDc1 => c.gamma_dc1 = v,
                GainParam::EtaOpt => c.eta_opt = v,
                GainParam::SmoothWindow => c.rocof_smooth_window = (v.round() as usize).max(1),
            }
        }
        c
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsoParams {
    pub swarm_size: usize,
    pub iterations: usize,
    pub inertia: f64,
    pub c1: f64,
    pub c2: f64,
    pub seed: u64,
}

impl Default for PsoParams {
    fn default() -> Self {
        Self {
            swarm_size: 30,
            iterations: 50,
            inertia: 0.7,
            c1: 1.5,
            c2: 1.5,
            seed: 0,
        }
    }
}

impl PsoParams {
    pub fn validate(&self) -> Result<()> {
        if self.swarm_size < 2 || self.iterations < 1 {
            return Err(Error::InvalidInput(
                "PSO needs swarm_size ≥ 2 and iterations ≥ 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsoResult {
    /// Best position in search coordinates.
    pub best: Vec<f64>,
    pub best_score: f64,
    /// Global-best score after initialization and after each iteration.
    pub history: Vec<f64>,
    pub evaluations: usize,
}

fn sanitize(score: f64) -> f64 {
    if score.is_nan() {
        f64::INFINITY
    } else {
        score
    }
}

/// Global-best PSO minimizing `fitness` over the box `bounds`. Velocities
/// are clamped to the box width and positions clipped to the box. Each
/// swarm's fitness values are computed in parallel and merged in particle
/// order, so the result depends only on `pso.seed`.
pub fn pso_minimize<F>(bounds: &[(f64, f64)], pso: &PsoParams, fitness: F) -> Result<PsoResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    pso.validate()?;
    if bounds.is_empty() || bounds.iter().any(|(lo, hi)| !(lo < hi)) {
        return Err(Error::InvalidInput("PSO bounds must be non-empty with lower < upper".into()));
    }
    let dim = bounds.len();
    let width: Vec<f64> = bounds.iter().map(|(lo, hi)| hi - lo).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(pso.seed);
    let mut pos: Vec<Vec<f64>> = (0..pso.swarm_size)
        .map(|_| bounds.iter().map(|&(lo, hi)| rng.random_range(lo..=hi)).collect())
        .collect();
    let mut vel: Vec<Vec<f64>> = (0..pso.swarm_size)
        .map(|_| width.iter().map(|w| rng.random_range(-*w..=*w) * 0.1).collect())
        .collect();

    let eval = |pos: &[Vec<f64>]| -> Vec<f64> {
        pos.par_iter().map(|p| sanitize(fitness(p))).collect()
    };

    let mut scores = eval(&pos);
    let mut evaluations = pos.len();
    let mut pbest = pos.clone();
    let mut pbest_score = scores.clone();
    let mut g = 0;
    for (i, s) in pbest_score.iter().enumerate() {
        if *s < pbest_score[g] {
            g = i;
        }
    }
    let mut gbest = pbest[g].clone();
    let mut gbest_score = pbest_score[g];
    let mut history = Vec::with_capacity(pso.iterations + 1);
    history.push(gbest_score);

    for _ in 0..pso.iterations {
        for i in 0..pso.swarm_size {
            for d in 0..dim {
                let r1: f64 = rng.random();
                let r2: f64 = rng.random();
                let v = pso.inertia * vel[i][d]
                    + pso.c1 * r1 * (pbest[i][d] - pos[i][d])
                    + pso.c2 * r2 * (gbest[d] - pos[i][d]);
                vel[i][d] = v.clamp(-width[d], width[d]);
                pos[i][d] = (pos[i][d] + vel[i][d]).clamp(bounds[d].0, bounds[d].1);
            }
        }
        scores = eval(&pos);
        evaluations += pos.len();
        for i in 0..pso.swarm_size {
            if scores[i] < pbest_score[i] {
                pbest_score[i] = scores[i];
                pbest[i].clone_from(&pos[i]);
            }
        }
        for i in 0..pso.swarm_size {
            if pbest_score[i] < gbest_score {
                gbest_score = pbest_score[i];
                gbest.clone_from(&pbest[i]);
            }
        }
        history.push(gbest_score);
    }
    Ok(PsoResult {
        best: gbest,
        best_score: gbest_score,
        history,
        evaluations,
    })
}

/// Shaping of the ISE fitness.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitnessOptions {
    /// Truth is read this many seconds before each estimate.
    pub latency_s: f64,
    /// Samples whose truth time falls in the first `exclude_s` seconds are skipped.
    pub exclude_s: f64,
    /// Weight of the RoCoF square-error integral added to the frequency one.
    pub rocof_weight: f64,
}

impl Default for FitnessOptions {
    fn default() -> Self {
        Self {
            latency_s: 0.0,
            exclude_s: 0.0,
            rocof_weight: 0.0,
        }
    }
}

/// `Σ (f̂ − f)²·dt + w·Σ (RoCoF̂ − RoCoF)²·dt` over aligned estimates.
pub fn ise(est: &EstimateSeries, truth: &GroundTruth, dt: f64, opts: &FitnessOptions) -> Result<f64> {
    let start = truth.t0 + opts.exclude_s;
    let pairs = align(est, truth, opts.latency_s)?;
    let mut acc = 0.0;
    for p in pairs.iter().filter(|p| p.t - opts.latency_s >= start - 1e-12) {
        acc += (p.f_est - p.f_true).powi(2) * dt;
        if opts.rocof_weight > 0.0 {
            acc += opts.rocof_weight * (p.rocof_est - p.rocof_true).powi(2) * dt;
        }
    }
    Ok(acc)
}

/// ISE of `config` summed over `scenarios`, evaluated at every sample. A
/// diverging or failing run scores at least [`DIVERGENCE_PENALTY`].
pub fn ise_fitness(
    config: &EstimatorConfig,
    scenarios: &[(SampleStream, GroundTruth)],
    opts: &FitnessOptions,
) -> f64 {
    let mut cfg = config.clone();
    cfg.report_every = 1;
    if cfg.validate().is_err() {
        return DIVERGENCE_PENALTY * 10.0;
    }
    let mut total = 0.0;
    for (stream, truth) in scenarios {
        match Estimator::run(stream, &cfg) {
            Ok(series) if series.diverged_at.is_none() => {
                match ise(&series, truth, cfg.ts, opts) {
                    Ok(v) if v.is_finite() => total += v,
                    _ => total += DIVERGENCE_PENALTY,
                }
            }
            _ => total += DIVERGENCE_PENALTY,
        }
    }
    total
}

#[derive(Debug, Clone)]
pub struct TuneResult {
    pub config: EstimatorConfig,
    pub best_score: f64,
    pub history: Vec<f64>,
}

/// Tunes the dimensions of `space` on top of `base` by PSO on [`ise_fitness`].
pub fn pso_tune(
    space: &SearchSpace,
    scenarios: &[(SampleStream, GroundTruth)],
    pso: &PsoParams,
    base: &EstimatorConfig,
    opts: &FitnessOptions,
) -> Result<TuneResult> {
    space.validate()?;
    space.check_order(base.n)?;
    base.validate()?;
    if scenarios.is_empty() {
        return Err(Error::InvalidInput("at least one scenario is required".into()));
    }
    let res = pso_minimize(&space.bounds(), pso, |x| {
        ise_fitness(&space.apply(&space.decode(x), base), scenarios, opts)
    })?;
    Ok(TuneResult {
        config: space.apply(&space.decode(&res.best), base),
        best_score: res.best_score,
        history: res.history,
    })
}

/// Sphere function `Σx²`, the swarm self-test objective.
pub fn sphere(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}
