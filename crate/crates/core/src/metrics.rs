//! Latency-aligned frequency/RoCoF error statistics and the normalized
//! reconstruction-error index.

use std::f64::consts::PI;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::estimator::{EstimateSeries, ParameterVector};
use crate::kv::fmt_f64;
use crate::signal::{eval_model, GroundTruth, SampleStream};

/// Default start-up exclusion for table-style metrics.
pub const DEFAULT_EXCLUSION_S: f64 = 0.5;

/// One estimate record paired with truth `latency` seconds earlier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pair {
    pub t: f64,
    pub f_est: f64,
    pub f_true: f64,
    pub rocof_est: f64,
    pub rocof_true: f64,
}

impl Pair {
    pub fn fe(&self) -> f64 {
        (self.f_est - self.f_true).abs()
    }

    pub fn re(&self) -> f64 {
        (self.rocof_est - self.rocof_true).abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsReport {
    pub max_fe: f64,
    pub rmse_fe: f64,
    pub max_re: f64,
    pub rmse_re: f64,
    pub latency_s: f64,
    pub exclusion_s: f64,
    pub n_samples: usize,
    pub recon_error: Option<f64>,
}

/// Row labels used in printed and written reports.
pub const ROW_LABELS: [&str; 4] = [
    "Max (FE) (Hz)",
    "RMSE (FE) (Hz)",
    "Max (RE) (Hz/s)",
    "RMSE (RE) (Hz/s)",
];

impl MetricsReport {
    pub fn values(&self) -> [f64; 4] {
        [self.max_fe, self.rmse_fe, self.max_re, self.rmse_re]
    }

    /// Aligned console table.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        for (label, v) in ROW_LABELS.iter().zip(self.values()) {
            let _ = writeln!(s, "{label:<18} {v:>12.6}");
        }
        if let Some(r) = self.recon_error {
            let _ = writeln!(s, "{:<18} {r:>12.6}", "Recon error");
        }
        let _ = writeln!(
            s,
            "latency {} ms, first {} s excluded, {} pairs",
            self.latency_s * 1e3,
            self.exclusion_s,
            self.n_samples
        );
        s
    }

    /// `metric,value` CSV with the same row labels.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("metric,value\n");
        for (label, v) in ROW_LABELS.iter().zip(self.values()) {
            let _ = writeln!(s, "{label},{}", fmt_f64(v));
        }
        if let Some(r) = self.recon_error {
            let _ = writeln!(s, "Recon error,{}", fmt_f64(r));
        }
        let _ = writeln!(s, "latency_s,{}", fmt_f64(self.latency_s));
        let _ = writeln!(s, "exclusion_s,{}", fmt_f64(self.exclusion_s));
        let _ = writeln!(s, "n_samples,{}", self.n_samples);
        s
    }
}

fn interp(truth: &GroundTruth, series: &[f64], t: f64) -> Option<f64> {
    let n = series.len();
    if n == 0 {
        return None;
    }
    let x = (t - truth.t0) / truth.ts;
    let tol = 1e-9;
    if x < -tol || x > (n - 1) as f64 + tol {
        return None;
    }
    let x = x.clamp(0.0, (n - 1) as f64);
    let i = (x.floor() as usize).min(n.saturating_sub(2));
    if n == 1 {
        return Some(series[0]);
    }
    let w = x - i as f64;
    Some(series[i] + w * (series[i + 1] - series[i]))
}

/// Pairs each record at `t` with truth at `t − latency` (linear
/// interpolation); records outside the truth span are dropped.
pub fn align(est: &EstimateSeries, truth: &GroundTruth, latency: f64) -> Result<Vec<Pair>> {
    if !(latency >= 0.0) {
        return Err(Error::InvalidInput(format!("latency must be non-negative, got {latency}")));
    }
    let pairs: Vec<Pair> = est
        .records
        .iter()
        .filter_map(|r| {
            let tt = r.t - latency;
            Some(Pair {
                t: r.t,
                f_est: r.f_hz,
                f_true: interp(truth, &truth.freq_hz, tt)?,
                rocof_est: r.rocof_hzps,
                rocof_true: interp(truth, &truth.rocof_hzps, tt)?,
            })
        })
        .collect();
    if pairs.is_empty() {
        return Err(Error::NoOverlap);
    }
    Ok(pairs)
}

/// Max and RMS of |FE| and |RE| over `pairs`.
pub fn fe_re(pairs: &[Pair]) -> Result<MetricsReport> {
    if pairs.is_empty() {
        return Err(Error::InvalidInput("no pairs to evaluate".into()));
    }
    let n = pairs.len() as f64;
    let (mut max_fe, mut max_re, mut sfe, mut sre) = (0.0f64, 0.0f64, 0.0, 0.0);
    for p in pairs {
        let (fe, re) = (p.fe(), p.re());
        max_fe = max_fe.max(fe);
        max_re = max_re.max(re);
        sfe += fe * fe;
        sre += re * re;
    }
    Ok(MetricsReport {
        max_fe,
        rmse_fe: (sfe / n).sqrt(),
        max_re,
        rmse_re: (sre / n).sqrt(),
        latency_s: 0.0,
        exclusion_s: 0.0,
        n_samples: pairs.len(),
        recon_error: None,
    })
}

/// Table-style evaluation: aligns with `latency`, drops pairs whose truth
/// time falls in the first `exclusion` seconds, and reports FE/RE.
pub fn evaluate(
    est: &EstimateSeries,
    truth: &GroundTruth,
    latency: f64,
    exclusion: f64,
) -> Result<MetricsReport> {
    let start = truth.t0 + exclusion;
    let pairs: Vec<Pair> = align(est, truth, latency)?
        .into_iter()
        .filter(|p| p.t - latency >= start - 1e-12)
        .collect();
    if pairs.is_empty() {
        return Err(Error::NoOverlap);
    }
    let mut rep = fe_re(&pairs)?;
    rep.latency_s = latency;
    rep.exclusion_s = exclusion;
    Ok(rep)
}

/// `‖measured − â‖₂ / ‖measured‖₂` over samples in `[span.0, span.1]`, where
/// `â` is re-synthesized from the most recent record at or before each
/// sample. Samples before the first record are skipped.
pub fn reconstruction_error(
    est: &EstimateSeries,
    measured: &SampleStream,
    span: Option<(f64, f64)>,
) -> Result<f64> {
    let (lo, hi) = span.unwrap_or((f64::NEG_INFINITY, f64::INFINITY));
    let recs = &est.records;
    if recs.is_empty() {
        return Err(Error::NoOverlap);
    }
    let mut j = 0usize;
    let mut num = 0.0;
    let mut den = 0.0;
    let mut used = 0usize;
    let mut theta = ParameterVector::zeros(0);
    let mut theta_idx = usize::MAX;
    for (k, &x) in measured.values.iter().enumerate() {
        let t = measured.time(k);
        if t < lo || t > hi || t < recs[0].t {
            continue;
        }
        while j + 1 < recs.len() && recs[j + 1].t <= t {
            j += 1;
        }
        let r = &recs[j];
        if theta_idx != j {
            theta = ParameterVector::from_amp_phase(&r.amps, &r.phases, r.a_dc, r.a_dc1);
            theta_idx = j;
        }
        let ahat = eval_model(&theta, 2.0 * PI * r.f_hz, t - r.t);
        num += (x - ahat).powi(2);
        den += x * x;
        used += 1;
    }
    if used == 0 {
        return Err(Error::NoOverlap);
    }
    if den == 0.0 {
        return Err(Error::ZeroEnergy);
    }
    Ok((num / den).sqrt())
}

/// Frequency-error recovery after a disturbance at `onset`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecovery {
    /// FE RMSE over the `pre_window` seconds before onset.
    pub pre_rmse: f64,
    /// Rolling FE RMS over the `rms_window` ending at `onset + deadline`.
    pub rms_at_deadline: f64,
    /// Earliest time from which the rolling RMS stays below `2·pre_rmse`
    /// through the deadline.
    pub recovered_at: Option<f64>,
}

impl StepRecovery {
    pub fn recovered(&self) -> bool {
        self.recovered_at.is_some()
    }
}

/// Measures how quickly the latency-aligned FE settles back below twice its
/// pre-onset RMSE. Several runs of the same scenario (e.g. noise seeds) are
/// pooled: every RMS is taken over the squared errors of all runs together.
/// The recovery scan uses the time grid of the first run.
pub fn step_recovery(
    runs: &[(&EstimateSeries, &GroundTruth)],
    latency: f64,
    onset: f64,
    pre_window: f64,
    rms_window: f64,
    deadline: f64,
) -> Result<StepRecovery> {
    if runs.is_empty() {
        return Err(Error::NoOverlap);
    }
    let all: Vec<Vec<Pair>> = runs
        .iter()
        .map(|(est, truth)| align(est, truth, latency))
        .collect::<Result<_>>()?;
    let rms = |lo: f64, hi: f64| -> Option<f64> {
        let (mut sum, mut count) = (0.0, 0usize);
        for p in all.iter().flatten().filter(|p| p.t >= lo && p.t < hi) {
            sum += p.fe().powi(2);
            count += 1;
        }
        (count > 0).then(|| (sum / count as f64).sqrt())
    };
    let pre_rmse = rms(onset - pre_window, onset).ok_or(Error::NoOverlap)?;
    let end = onset + deadline;
    let rms_at_deadline = rms(end - rms_window, end + 1e-9).ok_or(Error::NoOverlap)?;
    let thr = 2.0 * pre_rmse;
    let mut recovered_at = None;
    for p in all[0].iter().rev().filter(|p| p.t >= onset && p.t <= end + 1e-9) {
        match rms(p.t - rms_window, p.t + 1e-9) {
            Some(v) if v < thr => recovered_at = Some(p.t),
            _ => break,
        }
    }
    Ok(StepRecovery {
        pre_rmse,
        rms_at_deadline,
        recovered_at,
    })
}

/// Mean and worst case (element-wise max) of a set of reports.
pub fn aggregate(reports: &[MetricsReport]) -> Option<(MetricsReport, MetricsReport)> {
    let first = reports.first()?;
    let n = reports.len() as f64;
    let mut mean = *first;
    let mut worst = *first;
    let mut sums = [0.0; 4];
    let mut recon_sum = 0.0;
    let mut recon_all = true;
    for r in reports {
        for (s, v) in sums.iter_mut().zip(r.values()) {
            *s += v;
        }
        worst.max_fe = worst.max_fe.max(r.max_fe);
        worst.rmse_fe = worst.rmse_fe.max(r.rmse_fe);
        worst.max_re = worst.max_re.max(r.max_re);
        worst.rmse_re = worst.rmse_re.max(r.rmse_re);
        worst.n_samples = worst.n_samples.min(r.n_samples);
        match (r.recon_error, worst.recon_error) {
            (Some(a), Some(b)) => {
                worst.recon_error = Some(a.max(b));
                recon_sum += a;
            }
            _ => recon_all = false,
        }
    }
    mean.max_fe = sums[0] / n;
    mean.rmse_fe = sums[1] / n;
    mean.max_re = sums[2] / n;
    mean.rmse_re = sums[3] / n;
    mean.recon_error = recon_all.then_some(recon_sum / n);
    if !recon_all {
        worst.recon_error = None;
    }
    Some((mean, worst))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::EstimateRecord;

    fn record(t: f64, f: f64, r: f64) -> EstimateRecord {
        EstimateRecord {
            t,
            f_hz: f,
            rocof_hzps: r,
            amps: vec![1.0],
            phases: vec![0.0],
            a_dc: 0.0,
            a_dc1: 0.0,
            residual: 0.0,
            eta: 0.0,
        }
    }

    fn ramp_truth(n: usize, ts: f64) -> GroundTruth {
        GroundTruth {
            t0: 0.0,
            ts,
            freq_hz: (0..n).map(|k| 50.0 + k as f64 * ts).collect(),
            rocof_hzps: vec![1.0; n],
            amp_pu: vec![1.0; n],
            phase_rad: vec![0.0; n],
            dc_amp: 0.0,
            dc_tau: 0.0,
        }
    }

    #[test]
    fn align_identity_and_ramp_offset() {
        let truth = ramp_truth(101, 0.01);
        let est = EstimateSeries {
            records: (0..101).map(|k| record(k as f64 * 0.01, 50.0, 0.0)).collect(),
            diverged_at: None,
        };
        let p0 = align(&est, &truth, 0.0).unwrap();
        assert_eq!(p0.len(), 101);
        assert!(p0.iter().enumerate().all(|(k, p)| p.f_true == truth.freq_hz[k]));
        let p1 = align(&est, &truth, 0.1).unwrap();
        assert_eq!(p1.len(), 91);
        let a = p0.iter().find(|p| (p.t - 0.5).abs() < 1e-9).unwrap();
        let b = p1.iter().find(|p| (p.t - 0.5).abs() < 1e-9).unwrap();
        assert!((a.f_true - b.f_true - 0.1).abs() < 1e-9);
    }

    #[test]
    fn align_constant_truth_invariant_and_no_overlap() {
        let mut truth = ramp_truth(101, 0.01);
        truth.freq_hz.iter_mut().for_each(|f| *f = 50.0);
        let est = EstimateSeries {
            records: (20..101).map(|k| record(k as f64 * 0.01, 50.0, 0.0)).collect(),
            diverged_at: None,
        };
        let a = align(&est, &truth, 0.0).unwrap();
        let b = align(&est, &truth, 0.1).unwrap();
        assert!(a.iter().zip(&b).all(|(x, y)| x.f_true == y.f_true));
        let late = EstimateSeries {
            records: vec![record(5.0, 50.0, 0.0)],
            diverged_at: None,
        };
        assert!(matches!(align(&late, &truth, 0.0), Err(Error::NoOverlap)));
    }

    #[test]
    fn fe_re_hand_arithmetic() {
        let pairs: Vec<Pair> = [0.01, -0.02, 0.02]
            .iter()
            .map(|e| Pair {
                t: 0.0,
                f_est: 50.0 + e,
                f_true: 50.0,
                rocof_est: 0.0,
                rocof_true: 0.0,
            })
            .collect();
        let r = fe_re(&pairs).unwrap();
        assert!((r.max_fe - 0.02).abs() < 1e-12);
        assert!((r.rmse_fe - 3e-4f64.sqrt()).abs() < 1e-9);
        assert_eq!(r.max_re, 0.0);
        let mut dup = pairs.clone();
        dup.extend_from_slice(&pairs);
        let d = fe_re(&dup).unwrap();
        assert!((d.rmse_fe - r.rmse_fe).abs() < 1e-15);
    }

    #[test]
    fn reconstruction_extremes() {
        let ts = 1.0 / 1200.0;
        let values: Vec<f64> = (0..1200)
            .map(|k| (2.0 * PI * 50.0 * k as f64 * ts).sin())
            .collect();
        let measured = SampleStream::new(0.0, ts, values);
        let exact = EstimateSeries {
            records: (0..100)
                .map(|j| {
                    let t = j as f64 * 0.01;
                    let mut r = record(t, 50.0, 0.0);
                    r.phases = vec![2.0 * PI * 50.0 * t];
                    r
                })
                .collect(),
            diverged_at: None,
        };
        assert!(reconstruction_error(&exact, &measured, None).unwrap() < 1e-9);
        let mut zero = exact.clone();
        zero.records.iter_mut().for_each(|r| r.amps = vec![0.0]);
        assert!((reconstruction_error(&zero, &measured, None).unwrap() - 1.0).abs() < 1e-15);
        let silent = SampleStream::new(0.0, ts, vec![0.0; 1200]);
        assert!(matches!(
            reconstruction_error(&exact, &silent, None),
            Err(Error::ZeroEnergy)
        ));
    }

    #[test]
    fn aggregate_mean_and_worst() {
        let mk = |x: f64| MetricsReport {
            max_fe: x,
            rmse_fe: x / 2.0,
            max_re: x,
            rmse_re: x / 4.0,
            latency_s: 0.1,
            exclusion_s: 0.5,
            n_samples: 10,
            recon_error: None,
        };
        let (m, w) = aggregate(&[mk(1.0), mk(3.0)]).unwrap();
        assert_eq!(m.max_fe, 2.0);
        assert_eq!(w.max_fe, 3.0);
        assert_eq!(w.rmse_re, 0.75);
        assert!(aggregate(&[]).is_none());
    }

    #[test]
    fn step_recovery_hand_built() {
        // FE 0.01 before t = 5, a 0.1 burst over [5, 5.5), then 0.005.
        let mut truth = ramp_truth(1001, 0.01);
        truth.freq_hz.iter_mut().for_each(|f| *f = 50.0);
        let fe = |t: f64| {
            if t < 5.0 {
                0.01
            } else if t < 5.5 {
                0.1
            } else {
                0.005
            }
        };
        let est = EstimateSeries {
            records: (0..1001)
                .map(|k| {
                    let t = k as f64 * 0.01;
                    record(t, 50.0 + fe(t), 0.0)
                })
                .collect(),
            diverged_at: None,
        };
        let r = step_recovery(&[(&est, &truth)], 0.0, 5.0, 1.0, 0.2, 1.0).unwrap();
        assert!((r.pre_rmse - 0.01).abs() < 1e-12);
        assert!((r.rms_at_deadline - 0.005).abs() < 1e-12);
        // The 0.2 s window clears the burst once it covers only post-burst samples.
        let at = r.recovered_at.unwrap();
        assert!(at > 5.5 && at < 5.75, "{at}");
        assert!(step_recovery(&[(&est, &truth)], 0.0, 5.0, 1.0, 0.2, 0.3)
            .unwrap()
            .recovered_at
            .is_none());
        // Pooling two identical runs changes nothing.
        let two = step_recovery(&[(&est, &truth), (&est, &truth)], 0.0, 5.0, 1.0, 0.2, 1.0).unwrap();
        assert!((two.pre_rmse - r.pre_rmse).abs() < 1e-15);
        assert!((two.rms_at_deadline - r.rms_at_deadline).abs() < 1e-15);
        assert_eq!(two.recovered_at, r.recovered_at);
        assert!(step_recovery(&[], 0.0, 5.0, 1.0, 0.2, 1.0).is_err());
    }
}
