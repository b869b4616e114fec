use std::str::FromStr;

use crate::error::{Error, Result};
use crate::kv::{KvDoc, KvWriter};

/// Observation filter `G` applied to the prediction residual.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ObsFilter {
    #[default]
    Identity,
    /// One-pole low-pass with cutoff `obs_cutoff_hz`.
    LowPass,
}

impl ObsFilter {
    pub fn as_str(self) -> &'static str {
        match self {
            ObsFilter::Identity => "identity",
            ObsFilter::LowPass => "lowpass",
        }
    }
}

impl FromStr for ObsFilter {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "identity" => Ok(ObsFilter::Identity),
            "lowpass" | "low-pass" | "one-pole" => Ok(ObsFilter::LowPass),
            other => Err(format!("unknown observation filter `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorConfig {
    /// Number of harmonics in the regressor, fundamental included.
    pub n: usize,
    pub f0: f64,
    pub ts: f64,
    /// Gains on the sine coefficients `a_c[i]`.
    pub gamma_c: Vec<f64>,
    /// Gains on the cosine coefficients `a_s[i]`.
    pub gamma_s: Vec<f64>,
    pub gamma_dc: f64,
    pub gamma_dc1: f64,
    pub beta_omega: f64,
    pub eta_opt: f64,
    /// Half-width of the learning-rate clamp around `eta_opt`; 0 pins `η = eta_opt`.
    pub eta_band: f64,
    pub obs_filter: ObsFilter,
    pub obs_cutoff_hz: f64,
    pub rocof_smooth_window: usize,
    pub report_every: usize,
    pub t_reset_s: f64,
    /// Time multiplier of the phase sensitivity in the frequency gradient.
    /// Zero uses the elapsed time since the last re-anchor instead.
    pub grad_horizon_s: f64,
}

/// Gains found by swarm tuning on the 2% noise event scenarios at 1.2 kHz,
/// rounded, with `eta_opt` moved to the RoCoF-error minimum of a
/// fixed-rate sweep. The fundamental and harmonic gains are kept below the
/// swarm optimum: larger ones can lose lock after abrupt phase jumps.
impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            n: 7,
            f0: 50.0,
            ts: 1.0 / 1200.0,
            gamma_c: vec![300.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0],
            gamma_s: vec![18.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0],
            gamma_dc: 5.0,
            gamma_dc1: 0.3,
            beta_omega: 1.0,
            eta_opt: 232.0,
            eta_band: 0.05,
            obs_filter: ObsFilter::Identity,
            obs_cutoff_hz: 500.0,
            rocof_smooth_window: 125,
            report_every: 12,
            t_reset_s: 10.0,
            grad_horizon_s: 1.0,
        }
    }
}

impl EstimatorConfig {
    pub fn fs(&self) -> f64 {
        1.0 / self.ts
    }

    /// Same configuration with `n` harmonics. Added orders reuse the gains of
    /// the highest existing order.
    pub fn with_order(mut self, n: usize) -> Self {
        let extend = |v: &mut Vec<f64>| {
            let last = v.last().copied().unwrap_or(1.0);
            v.resize(n, last);
        };
        extend(&mut self.gamma_c);
        extend(&mut self.gamma_s);
        self.n = n;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.n == 0 {
            return bad("harmonic order n must be at least 1".into());
        }
        if !(self.f0 > 0.0) || !(self.ts > 0.0) {
            return bad("f0 and ts must be positive".into());
        }
        if self.n as f64 * self.f0 >= 0.5 / self.ts {
            return bad(format!(
                "n·f0 = {} Hz is not below Nyquist {} Hz",
                self.n as f64 * self.f0,
                0.5 / self.ts
            ));
        }
        if self.gamma_c.len() != self.n || self.gamma_s.len() != self.n {
            return bad(format!("expected {} gamma_c and gamma_s entries", self.n));
        }
        let gains = self
            .gamma_c
            .iter()
            .chain(&self.gamma_s)
            .chain([&self.gamma_dc, &self.gamma_dc1]);
        for g in gains {
            if !(*g > 0.0) || !g.is_finite() {
                return bad(format!("gains must be positive and finite, got {g}"));
            }
        }
        if !(self.beta_omega > 0.0 && self.beta_omega < 2.0) {
            return bad(format!("beta_omega must lie in (0, 2), got {}", self.beta_omega));
        }
        if !(self.eta_opt > 0.0) || !self.eta_opt.is_finite() {
            return bad(format!("eta_opt must be positive, got {}", self.eta_opt));
        }
        if !(0.0..=0.5).contains(&self.eta_band) {
            return bad(format!("eta_band must lie in [0, 0.5], got {}", self.eta_band));
        }
        if self.obs_filter == ObsFilter::LowPass
            && !(self.obs_cutoff_hz > 0.0 && self.obs_cutoff_hz < 0.5 / self.ts)
        {
            return bad(format!("obs_cutoff_hz {} outside (0, fs/2)", self.obs_cutoff_hz));
        }
        if self.rocof_smooth_window == 0 || self.report_every == 0 {
            return bad("rocof_smooth_window and report_every must be at least 1".into());
        }
        if !(self.t_reset_s > 0.0) {
            return bad("t_reset_s must be positive".into());
        }
        if !(self.grad_horizon_s >= 0.0) || !self.grad_horizon_s.is_finite() {
            return bad("grad_horizon_s must be non-negative".into());
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let doc = KvDoc::parse(text)?;
        let n: usize = doc.require("n")?;
        doc.reject_unknown(|k| known_key(k, n))?;
        let d = Self::default();
        let mut gamma_c = Vec::with_capacity(n);
        let mut gamma_s = Vec::with_capacity(n);
        for i in 1..=n {
            gamma_c.push(doc.require(&format!("gamma_c_{i}"))?);
            gamma_s.push(doc.require(&format!("gamma_s_{i}"))?);
        }
        let cfg = Self {
            n,
            f0: doc.get_or("f0_hz", d.f0)?,
            ts: doc.require("ts_s")?,
            gamma_c,
            gamma_s,
            gamma_dc: doc.require("gamma_dc")?,
            gamma_dc1: doc.require("gamma_dc1")?,
            beta_omega: doc.get_or("beta_omega", d.beta_omega)?,
            eta_opt: doc.require("eta_opt")?,
            eta_band: doc.get_or("eta_band", d.eta_band)?,
            obs_filter: match doc.get_str("obs_filter") {
                None => d.obs_filter,
                Some(s) => s
                    .parse()
                    .map_err(|m: String| Error::parse(doc.line_of("obs_filter").unwrap_or(0), m))?,
            },
            obs_cutoff_hz: doc.get_or("obs_cutoff_hz", d.obs_cutoff_hz)?,
            rocof_smooth_window: doc.get_or("rocof_smooth_window", d.rocof_smooth_window)?,
            report_every: doc.get_or("report_every", d.report_every)?,
            t_reset_s: doc.get_or("t_reset_s", d.t_reset_s)?,
            grad_horizon_s: doc.get_or("grad_horizon_s", d.grad_horizon_s)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_kv(&self) -> String {
        let mut w = KvWriter::new();
        w.int("n", self.n).num("f0_hz", self.f0).num("ts_s", self.ts);
        for i in 0..self.n {
            w.num(&format!("gamma_c_{}", i + 1), self.gamma_c[i])
                .num(&format!("gamma_s_{}", i + 1), self.gamma_s[i]);
        }
        w.num("gamma_dc", self.gamma_dc)
            .num("gamma_dc1", self.gamma_dc1)
            .num("beta_omega", self.beta_omega)
            .num("eta_opt", self.eta_opt)
            .num("eta_band", self.eta_band)
            .text("obs_filter", self.obs_filter.as_str())
            .num("obs_cutoff_hz", self.obs_cutoff_hz)
            .int("rocof_smooth_window", self.rocof_smooth_window)
            .int("report_every", self.report_every)
            .num("t_reset_s", self.t_reset_s)
            .num("grad_horizon_s", self.grad_horizon_s);
        w.finish()
    }
}

fn known_key(key: &str, n: usize) -> bool {
    const PLAIN: &[&str] = &[
        "n",
        "f0_hz",
        "ts_s",
        "gamma_dc",
        "gamma_dc1",
        "beta_omega",
        "eta_opt",
        "eta_band",
        "obs_filter",
        "obs_cutoff_hz",
        "rocof_smooth_window",
        "report_every",
        "t_reset_s",
        "grad_horizon_s",
    ];
    if PLAIN.contains(&key) {
        return true;
    }
    let idx = key
        .strip_prefix("gamma_c_")
        .or_else(|| key.strip_prefix("gamma_s_"))
        .and_then(|s| s.parse::<usize>().ok());
    matches!(idx, Some(i) if (1..=n).contains(&i))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid_and_round_trips() {
        let cfg = EstimatorConfig::default();
        cfg.validate().unwrap();
        assert_eq!(EstimatorConfig::parse(&cfg.to_kv()).unwrap(), cfg);
    }

    #[test]
    fn rejects_invalid() {
        let base = EstimatorConfig::default();
        let cases: Vec<Box<dyn Fn(&mut EstimatorConfig)>> = vec![
            Box::new(|c| c.n = 0),
            Box::new(|c| c.beta_omega = 2.0),
            Box::new(|c| c.beta_omega = 0.0),
            Box::new(|c| c.gamma_c[2] = 0.0),
            Box::new(|c| c.eta_band = 0.6),
            Box::new(|c| *c = c.clone().with_order(12)),
            Box::new(|c| c.gamma_s.pop().map(|_| ()).unwrap_or(())),
        ];
        for (i, f) in cases.iter().enumerate() {
            let mut c = base.clone();
            f(&mut c);
            assert!(c.validate().is_err(), "case {i}");
        }
    }

    #[test]
    fn parse_errors_name_keys_and_lines() {
        let text = EstimatorConfig::default().to_kv().replace("gamma_dc1 = 0.3\n", "");
        let err = EstimatorConfig::parse(&text).unwrap_err();
        assert!(err.to_string().contains("gamma_dc1"), "{err}");
        let text = format!("{}gamma_c_9 = 1\n", EstimatorConfig::default().to_kv());
        let err = EstimatorConfig::parse(&text).unwrap_err();
        assert!(err.to_string().contains("gamma_c_9"), "{err}");
    }

    #[test]
    fn with_order_extends_gains() {
        let c = EstimatorConfig::default().with_order(1).with_order(3);
        assert_eq!(c.gamma_c, vec![300.0, 300.0, 300.0]);
    }
}
