use std::sync::Mutex;

use proptest::prelude::*;

use rocof_core::baseline::{rolling_rocof, FreqSeries};
use rocof_core::estimator::{adapt_eta, EstimateRecord, EstimateSeries, Estimator, EstimatorConfig};
use rocof_core::io;
use rocof_core::metrics::{evaluate, fe_re, reconstruction_error, Pair};
use rocof_core::signal::{add_noise, synthesize, GroundTruth, NoiseKind, NoiseSpec, SampleStream, ScenarioSpec};
use rocof_core::tuner::{pso_minimize, PsoParams};

fn cfg(n: usize) -> EstimatorConfig {
    EstimatorConfig::default().with_order(n)
}

fn noise_kind() -> impl Strategy<Value = NoiseKind> {
    prop_oneof![
        Just(NoiseKind::Gaussian),
        Just(NoiseKind::Colored),
        Just(NoiseKind::Impulsive)
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn zero_residual_is_a_fixed_point(
        warm in prop::collection::vec(-1.5f64..1.5, 1..200),
        n in 1usize..8,
    ) {
        let mut e = Estimator::new(cfg(n)).unwrap();
        for x in warm {
            e.step(x).unwrap();
        }
        let before = e.state().clone();
        let x = e.predict();
        e.step(x).unwrap();
        prop_assert_eq!(&e.state().theta, &before.theta);
        prop_assert_eq!(e.state().f_hz, before.f_hz);
        prop_assert_eq!(e.state().rocof_raw, 0.0);
    }

    #[test]
    fn eta_stays_in_band(g in -1e3f64..1e3, beta in 0.01f64..1.99, band in 0.0f64..0.9, opt in 1.0f64..1e4) {
        let mut c = cfg(1);
        c.beta_omega = beta;
        c.eta_band = band;
        c.eta_opt = opt;
        let eta = adapt_eta(g, &c);
        prop_assert!(eta >= (1.0 - band) * opt - 1e-9 && eta <= (1.0 + band) * opt + 1e-9);
    }

    #[test]
    fn bounded_input_gives_finite_output_or_divergence(
        xs in prop::collection::vec(-2.0f64..2.0, 1..3000),
        eta_scale in prop::sample::select(vec![1.0, 10.0, 1e4]),
    ) {
        let mut c = cfg(3);
        c.eta_opt *= eta_scale;
        let stream = SampleStream { t0: 0.0, ts: c.ts, values: xs };
        let series = Estimator::run(&stream, &c).unwrap();
        for r in &series.records {
            prop_assert!(r.f_hz.is_finite() && r.rocof_hzps.is_finite());
            prop_assert!((r.f_hz - c.f0).abs() <= c.f0 / 2.0);
            prop_assert!(r.amps.iter().chain(&r.phases).all(|v| v.is_finite()));
        }
    }

    #[test]
    fn synthesis_is_deterministic(seed in any::<u64>(), kind in noise_kind(), level in 0.0f64..0.2) {
        let mut spec = ScenarioSpec::case1();
        spec.duration = 0.5;
        spec.noise.kind = kind;
        spec.noise.level = level;
        let a = synthesize(&spec, 1200.0, seed).unwrap();
        let b = synthesize(&spec, 1200.0, seed).unwrap();
        prop_assert_eq!(a.0, b.0);
        prop_assert_eq!(a.1, b.1);
    }

    #[test]
    fn noise_preserves_length_and_grid(
        values in prop::collection::vec(-1.0f64..1.0, 0..500),
        kind in noise_kind(),
        level in 0.0f64..0.5,
        seed in any::<u64>(),
    ) {
        let s = SampleStream { t0: 1.5, ts: 1e-3, values };
        let spec = NoiseSpec { kind, level, seed, ..NoiseSpec::gaussian(level) };
        let out = add_noise(&s, &spec, 1.0);
        prop_assert_eq!(out.len(), s.len());
        prop_assert_eq!(out.t0, s.t0);
        prop_assert_eq!(out.ts, s.ts);
        if level == 0.0 {
            prop_assert_eq!(out.values, s.values);
        }
    }

    #[test]
    fn rolling_rocof_exact_on_affine(a in 45.0f64..55.0, b in -5.0f64..5.0, w_steps in 2usize..200) {
        let ts = 1e-3;
        let s = FreqSeries::uniform(0.0, ts, (0..1000).map(|k| a + b * k as f64 * ts).collect());
        let r = rolling_rocof(&s, w_steps as f64 * ts).unwrap();
        prop_assert_eq!(r.len(), 1000 - w_steps);
        for v in &r.f_hz {
            prop_assert!((v - b).abs() < 1e-6, "{} vs {}", v, b);
        }
    }

    #[test]
    fn metrics_invariants(
        errs in prop::collection::vec((-0.1f64..0.1, -1.0f64..1.0), 1..200),
        shift in -100.0f64..100.0,
    ) {
        let ts = 0.01;
        let truth = GroundTruth {
            t0: 0.0,
            ts,
            freq_hz: (0..errs.len()).map(|k| 50.0 + 0.01 * k as f64).collect(),
            rocof_hzps: vec![1.0; errs.len()],
            amp_pu: vec![1.0; errs.len()],
            phase_rad: vec![0.0; errs.len()],
            dc_amp: 0.0,
            dc_tau: 0.0,
        };
        let record = |k: usize, t: f64| EstimateRecord {
            t,
            f_hz: truth.freq_hz[k] + errs[k].0,
            rocof_hzps: 1.0 + errs[k].1,
            amps: vec![1.0],
            phases: vec![0.0],
            a_dc: 0.0,
            a_dc1: 0.0,
            residual: 0.0,
            eta: 0.0,
        };
        let est = EstimateSeries {
            records: (0..errs.len()).map(|k| record(k, k as f64 * ts)).collect(),
            diverged_at: None,
        };
        let r = evaluate(&est, &truth, 0.0, 0.0).unwrap();
        prop_assert!(r.max_fe >= r.rmse_fe - 1e-15);
        prop_assert!(r.max_re >= r.rmse_re - 1e-15);

        // Shifting both time axes by the same offset changes nothing.
        let truth_s = GroundTruth { t0: shift, ..truth.clone() };
        let est_s = EstimateSeries {
            records: (0..errs.len()).map(|k| record(k, shift + k as f64 * ts)).collect(),
            diverged_at: None,
        };
        let rs = evaluate(&est_s, &truth_s, 0.0, 0.0).unwrap();
        prop_assert_eq!(rs.n_samples, r.n_samples);
        for (x, y) in rs.values().iter().zip(r.values()) {
            prop_assert!((x - y).abs() < 1e-9);
        }

        // Duplicating every pair keeps max and RMSE.
        let pairs: Vec<Pair> = errs
            .iter()
            .map(|&(fe, re)| Pair { t: 0.0, f_est: 50.0 + fe, f_true: 50.0, rocof_est: re, rocof_true: 0.0 })
            .collect();
        let once = fe_re(&pairs).unwrap();
        let mut twice = pairs.clone();
        twice.extend_from_slice(&pairs);
        let dup = fe_re(&twice).unwrap();
        prop_assert_eq!(dup.max_fe, once.max_fe);
        prop_assert!((dup.rmse_fe - once.rmse_fe).abs() <= 1e-12 * once.rmse_fe.max(1e-12));
        prop_assert!((dup.rmse_re - once.rmse_re).abs() <= 1e-12 * once.rmse_re.max(1e-12));
    }

    #[test]
    fn pso_respects_bounds_and_history_is_monotone(
        seed in any::<u64>(),
        bounds in prop::collection::vec((-10.0f64..0.0, 0.1f64..10.0), 1..4),
    ) {
        let seen = Mutex::new(Vec::new());
        let pso = PsoParams { swarm_size: 6, iterations: 10, seed, ..PsoParams::default() };
        let res = pso_minimize(&bounds, &pso, |x| {
            seen.lock().unwrap().push(x.to_vec());
            x.iter().map(|v| (v - 0.05).powi(2)).sum()
        })
        .unwrap();
        for x in seen.into_inner().unwrap() {
            for (v, (lo, hi)) in x.iter().zip(&bounds) {
                prop_assert!(v >= lo && v <= hi);
            }
        }
        prop_assert_eq!(res.history.len(), 11);
        prop_assert!(res.history.windows(2).all(|w| w[1] <= w[0]));
        prop_assert_eq!(*res.history.last().unwrap(), res.best_score);
    }

    #[test]
    fn sample_csv_round_trips_bit_identically(
        values in prop::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), 0..100),
        t0 in -1e3f64..1e3,
    ) {
        let s = SampleStream { t0, ts: 1.0 / 1200.0, values };
        let back = io::parse_samples(&io::samples_to_csv(&s)).unwrap();
        prop_assert_eq!(back.values.len(), s.values.len());
        for (a, b) in back.values.iter().zip(&s.values) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn config_and_scenario_text_round_trip(eta in 1.0f64..5000.0, g in 0.001f64..1000.0, n in 1usize..10) {
        let mut c = cfg(n);
        c.eta_opt = eta;
        c.gamma_c[0] = g;
        prop_assert_eq!(EstimatorConfig::parse(&c.to_kv()).unwrap(), c);
        for name in ["case1", "case1b", "case2", "case2b", "case3"] {
            let mut s = ScenarioSpec::named(name).unwrap();
            s.amplitude = g;
            prop_assert_eq!(ScenarioSpec::parse(&s.to_kv()).unwrap(), s);
        }
    }
}

#[test]
fn harmonic_selectivity_on_clean_tone() {
    let (stream, _) = synthesize(&ScenarioSpec::tone(50.0, 10.0), 1200.0, 0).unwrap();
    let series = Estimator::run(&stream, &cfg(3)).unwrap();
    let last = series.records.last().unwrap();
    assert!(last.amps[1] < 0.01 && last.amps[2] < 0.01, "{:?}", last.amps);
    assert!((last.amps[0] - 1.0).abs() < 0.01, "{:?}", last.amps);
}

#[test]
fn halving_ts_barely_moves_steady_state() {
    let run = |fs: f64| {
        let mut c = EstimatorConfig::default();
        let scale = fs / 1200.0;
        c.ts = 1.0 / fs;
        c.rocof_smooth_window = (c.rocof_smooth_window as f64 * scale) as usize;
        c.report_every = (c.report_every as f64 * scale) as usize;
        let (stream, _) = synthesize(&ScenarioSpec::tone(50.0, 10.0), fs, 0).unwrap();
        Estimator::run(&stream, &c).unwrap().records.last().unwrap().f_hz
    };
    let d = (run(2400.0) - run(1200.0)).abs();
    assert!(d < 1e-3, "{d}");
}

#[test]
fn clean_tone_reconstruction_error() {
    let (stream, _) = synthesize(&ScenarioSpec::tone(50.0, 10.0), 1200.0, 0).unwrap();
    let series = Estimator::run(&stream, &EstimatorConfig::default()).unwrap();
    let e = reconstruction_error(&series, &stream, Some((1.0, 10.0))).unwrap();
    assert!(e < 0.02, "{e}");
}
