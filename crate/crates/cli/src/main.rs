use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use rocof_core::error::Error;
use rocof_core::estimator::{EstimateSeries, Estimator, EstimatorConfig};
use rocof_core::io;
use rocof_core::metrics::{aggregate, evaluate, reconstruction_error, MetricsReport, DEFAULT_EXCLUSION_S};
use rocof_core::signal::{synthesize, GroundTruth, NoiseSpec, SampleStream, ScenarioSpec};
use rocof_core::tuner::{
    pso_minimize, pso_tune, sphere, Dim, FitnessOptions, GainParam, PsoParams, SearchSpace,
};

#[derive(Parser)]
#[command(name = "rocof", version, about = "Adaptive frequency and RoCoF estimation toolkit")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a scenario into sample and truth CSVs.
    Synth(SynthArgs),
    /// Run the estimator over a sample CSV.
    Estimate(EstimateArgs),
    /// Frequency and RoCoF error metrics, from files or a seeded ensemble.
    Metrics(MetricsArgs),
    /// Fixed learning-rate sweep around `eta_opt`.
    SweepEta(SweepArgs),
    /// Swarm search for estimator gains.
    Tune(TuneArgs),
    /// Per-step timing on synthetic input.
    Bench(BenchArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Scenario file, or a bundled name (case1, case1b, case2, case2b, case3).
    scenario: String,
    #[arg(long, default_value_t = 1200.0)]
    fs: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory; receives samples.csv and truth.csv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// Estimator config file; built-in defaults otherwise.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the harmonic count.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    report_every: Option<usize>,
    /// Override `eta_opt` (1/(rad²·s)).
    #[arg(long)]
    eta_opt: Option<f64>,
}

#[derive(Args)]
struct EstimateArgs {
    /// Sample CSV (`t,value`).
    samples: PathBuf,
    #[command(flatten)]
    cfg: ConfigArgs,
    /// Estimate CSV; printed to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct Bounds {
    /// Exit with status 4 if the (mean) max FE exceeds this, in Hz.
    #[arg(long)]
    max_fe: Option<f64>,
    #[arg(long)]
    rmse_fe: Option<f64>,
    /// Exit with status 4 if the (mean) max RE exceeds this, in Hz/s.
    #[arg(long)]
    max_re: Option<f64>,
    #[arg(long)]
    rmse_re: Option<f64>,
}

#[derive(Args)]
struct MetricsArgs {
    /// Estimate CSV (file mode).
    estimates: Option<PathBuf>,
    /// Truth CSV (file mode).
    truth: Option<PathBuf>,
    /// Sample CSV; adds the waveform reconstruction error (file mode).
    #[arg(long)]
    samples: Option<PathBuf>,
    /// Scenario file or bundled name; switches to ensemble mode.
    #[arg(long)]
    scenario: Option<String>,
    /// Ensemble size; seeds 0..N offset by --seed.
    #[arg(long, default_value_t = 20)]
    seeds: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    cfg: ConfigArgs,
    #[arg(long, default_value_t = 100.0)]
    latency_ms: f64,
    #[arg(long, default_value_t = DEFAULT_EXCLUSION_S)]
    exclude_s: f64,
    #[command(flatten)]
    bounds: Bounds,
    /// Report CSV (mean report in ensemble mode).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Scenario file or bundled name.
    scenario: String,
    #[command(flatten)]
    cfg: ConfigArgs,
    #[arg(long, value_delimiter = ',', default_values_t = vec![1.0, 1.02, 1.04, 1.06])]
    ratios: Vec<f64>,
    #[arg(long, default_value_t = 20)]
    seeds: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100.0)]
    latency_ms: f64,
    #[arg(long, default_value_t = DEFAULT_EXCLUSION_S)]
    exclude_s: f64,
    /// Exit with status 4 unless both RMSE rows strictly increase.
    #[arg(long)]
    require_increasing: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TuneArgs {
    /// Scenario files or bundled names.
    scenarios: Vec<String>,
    /// Base config whose untuned fields are kept.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    /// Noise seeds per scenario.
    #[arg(long, default_value_t = 1)]
    seeds: u64,
    /// Search dimension `name:lower:upper[:log]`, repeatable; the standard
    /// five-gain space when omitted.
    #[arg(long = "dim")]
    dims: Vec<String>,
    #[arg(long, default_value_t = 30)]
    swarm: usize,
    #[arg(long, default_value_t = 50)]
    iterations: usize,
    #[arg(long, default_value_t = 0.7)]
    inertia: f64,
    #[arg(long, default_value_t = 1.5)]
    c1: f64,
    #[arg(long, default_value_t = 1.5)]
    c2: f64,
    /// Swarm seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.0)]
    latency_ms: f64,
    #[arg(long, default_value_t = 0.0)]
    exclude_s: f64,
    #[arg(long, default_value_t = 0.0)]
    rocof_weight: f64,
    /// Run the sphere-function self-test in this many dimensions instead.
    #[arg(long)]
    sphere: Option<usize>,
    /// Gains config to write.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Best-score history CSV; defaults to `<out>.history.csv`.
    #[arg(long)]
    history: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    /// Number of timed steps; the input is a 2% noise 50 Hz tone this long.
    #[arg(long, default_value_t = 1_000_000)]
    steps: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Input(String),
    Diverged(String),
    Bounds(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Diverged { .. } | Error::AlreadyDiverged => Failure::Diverged(e.to_string()),
            e => Failure::Input(e.to_string()),
        }
    }
}

type CliResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.cmd {
        Command::Synth(a) => cmd_synth(a),
        Command::Estimate(a) => cmd_estimate(a),
        Command::Metrics(a) => cmd_metrics(a),
        Command::SweepEta(a) => cmd_sweep_eta(a),
        Command::Tune(a) => cmd_tune(a),
        Command::Bench(a) => cmd_bench(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Diverged(m)) => {
            eprintln!("diverged: {m}");
            ExitCode::from(3)
        }
        Err(Failure::Bounds(m)) => {
            eprintln!("bound check failed: {m}");
            ExitCode::from(4)
        }
    }
}

fn load_scenario(arg: &str) -> Result<ScenarioSpec, Failure> {
    let path = Path::new(arg);
    if path.exists() {
        let text = io::read_text(path)?;
        return ScenarioSpec::parse(&text).map_err(|e| e.with_path(path).into());
    }
    ScenarioSpec::named(arg).ok_or_else(|| {
        Failure::Input(format!("`{arg}` is neither a scenario file nor a bundled case"))
    })
}

fn load_config(a: &ConfigArgs) -> Result<EstimatorConfig, Failure> {
    let mut cfg = match &a.config {
        Some(p) => EstimatorConfig::parse(&io::read_text(p)?).map_err(|e| e.with_path(p))?,
        None => EstimatorConfig::default(),
    };
    if let Some(n) = a.n {
        cfg = cfg.with_order(n);
    }
    if let Some(r) = a.report_every {
        cfg.report_every = r;
    }
    if let Some(e) = a.eta_opt {
        cfg.eta_opt = e;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn ms_to_s(ms: f64) -> Result<f64, Failure> {
    if !(ms.is_finite() && ms >= 0.0) {
        return Err(Failure::Input(format!("latency must be ≥ 0 ms, got {ms}")));
    }
    Ok(ms * 1e-3)
}

fn write_or_print(out: Option<&Path>, text: &str) -> CliResult {
    match out {
        Some(p) => io::write_text(p, text).map_err(Into::into),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_synth(a: SynthArgs) -> CliResult {
    let spec = load_scenario(&a.scenario)?;
    let (stream, truth) = synthesize(&spec, a.fs, a.seed)?;
    std::fs::create_dir_all(&a.out).map_err(|source| Error::Io {
        path: a.out.clone(),
        source,
    })?;
    let (sp, tp) = (a.out.join("samples.csv"), a.out.join("truth.csv"));
    io::write_samples(&sp, &stream)?;
    io::write_truth(&tp, &truth)?;
    println!(
        "{} samples at {} Hz -> {}, {}",
        stream.len(),
        a.fs,
        sp.display(),
        tp.display()
    );
    Ok(())
}

fn estimate_notes(cfg: &EstimatorConfig) -> Vec<String> {
    vec![
        format!(
            "n = {}, f0 = {} Hz, ts = {} s, report_every = {}",
            cfg.n, cfg.f0, cfg.ts, cfg.report_every
        ),
        format!(
            "rocof is a {}-sample boxcar mean; t stamps the last sample of each report",
            cfg.rocof_smooth_window
        ),
    ]
}

fn cmd_estimate(a: EstimateArgs) -> CliResult {
    let cfg = load_config(&a.cfg)?;
    let stream = io::read_samples(&a.samples)?;
    let series = Estimator::run(&stream, &cfg)?;
    let mut notes = estimate_notes(&cfg);
    if let Some(k) = series.diverged_at {
        notes.push(format!("diverged at sample {k}; rows stop there"));
    }
    write_or_print(a.out.as_deref(), &io::estimates_to_csv(&series, cfg.n, &notes))?;
    if let Some(k) = series.diverged_at {
        let t = stream.t0 + k as f64 * stream.ts;
        return Err(Failure::Diverged(format!(
            "estimator diverged at sample {k} (t = {t:.6} s) after {} reports",
            series.len()
        )));
    }
    if let (Some(out), Some(last)) = (&a.out, series.records.last()) {
        eprintln!(
            "{} reports -> {}; final f = {:.6} Hz, RoCoF = {:.6} Hz/s",
            series.len(),
            out.display(),
            last.f_hz,
            last.rocof_hzps
        );
    }
    Ok(())
}

fn check_bounds(r: &MetricsReport, b: &Bounds) -> CliResult {
    let checks = [
        ("max FE", r.max_fe, b.max_fe),
        ("RMSE FE", r.rmse_fe, b.rmse_fe),
        ("max RE", r.max_re, b.max_re),
        ("RMSE RE", r.rmse_re, b.rmse_re),
    ];
    let failed: Vec<String> = checks
        .iter()
        .filter_map(|(name, v, lim)| match lim {
            Some(l) if !(v <= l) => Some(format!("{name} {v:.6} > {l}")),
            _ => None,
        })
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Bounds(failed.join(", ")))
    }
}

/// Runs the estimator on every seed of the ensemble. Seed order is kept
/// regardless of scheduling.
fn run_ensemble(
    spec: &ScenarioSpec,
    cfg: &EstimatorConfig,
    seeds: impl IntoParallelIterator<Item = u64>,
) -> Result<Vec<(u64, SampleStream, GroundTruth, EstimateSeries)>, Failure> {
    seeds
        .into_par_iter()
        .map(|s| {
            let (stream, truth) = synthesize(spec, cfg.fs(), s)?;
            let est = Estimator::run(&stream, cfg)?;
            Ok((s, stream, truth, est))
        })
        .collect::<Result<Vec<_>, Error>>()
        .map_err(Into::into)
}

fn cmd_metrics(a: MetricsArgs) -> CliResult {
    let latency = ms_to_s(a.latency_ms)?;
    let report = if let Some(sc) = &a.scenario {
        if a.estimates.is_some() || a.truth.is_some() {
            return Err(Failure::Input("--scenario replaces the estimate/truth files".into()));
        }
        if a.seeds == 0 {
            return Err(Failure::Input("--seeds must be ≥ 1".into()));
        }
        let spec = load_scenario(sc)?;
        let cfg = load_config(&a.cfg)?;
        let runs = run_ensemble(&spec, &cfg, a.seed..a.seed + a.seeds)?;
        let mut reports = Vec::with_capacity(runs.len());
        for (s, _, truth, est) in &runs {
            if let Some(k) = est.diverged_at {
                return Err(Failure::Diverged(format!("seed {s}: diverged at sample {k}")));
            }
            reports.push(evaluate(est, truth, latency, a.exclude_s)?);
        }
        let (mean, worst) = aggregate(&reports).expect("at least one seed");
        println!("mean over {} seeds", reports.len());
        print!("{}", mean.to_table());
        println!("worst case");
        print!("{}", worst.to_table());
        if let Some(p) = &a.out {
            io::write_text(p, &mean.to_csv())?;
        }
        mean
    } else {
        let (Some(ep), Some(tp)) = (&a.estimates, &a.truth) else {
            return Err(Failure::Input(
                "give an estimate CSV and a truth CSV, or --scenario".into(),
            ));
        };
        let (est, _) = io::read_estimates(ep)?;
        let truth = io::read_truth(tp)?;
        let mut rep = evaluate(&est, &truth, latency, a.exclude_s)?;
        if let Some(sp) = &a.samples {
            let stream = io::read_samples(sp)?;
            let span = (truth.t0 + a.exclude_s, f64::INFINITY);
            rep.recon_error = Some(reconstruction_error(&est, &stream, Some(span))?);
        }
        print!("{}", rep.to_table());
        if let Some(p) = &a.out {
            io::write_text(p, &rep.to_csv())?;
        }
        rep
    };
    check_bounds(&report, &a.bounds)
}

fn cmd_sweep_eta(a: SweepArgs) -> CliResult {
    if a.ratios.is_empty() || a.ratios.iter().any(|r| !(*r >= 1.0) || !r.is_finite()) {
        return Err(Failure::Input("ratios must be finite and ≥ 1".into()));
    }
    if a.seeds == 0 {
        return Err(Failure::Input("--seeds must be ≥ 1".into()));
    }
    let latency = ms_to_s(a.latency_ms)?;
    let spec = load_scenario(&a.scenario)?;
    let base = load_config(&a.cfg)?;
    let mut table = String::from("ratio,eta,rmse_fe_hz,rmse_re_hzps,diverged\n");
    let mut rows: Vec<Option<(f64, f64)>> = Vec::new();
    println!("{:>8} {:>10} {:>14} {:>16}", "ratio", "eta", "RMSE FE (Hz)", "RMSE RE (Hz/s)");
    for &ratio in &a.ratios {
        let mut cfg = base.clone();
        cfg.eta_opt = base.eta_opt * ratio;
        cfg.eta_band = 0.0;
        let runs = run_ensemble(&spec, &cfg, a.seed..a.seed + a.seeds)?;
        let diverged: Vec<String> = runs
            .iter()
            .filter_map(|(s, _, _, e)| e.diverged_at.map(|k| format!("seed {s} at sample {k}")))
            .collect();
        if !diverged.is_empty() {
            println!("{ratio:>8} {:>10.3} {:>14} {:>16}  diverged: {}", cfg.eta_opt, "-", "-", diverged.join(", "));
            let _ = writeln!(table, "{},{},,,{}", ratio, cfg.eta_opt, diverged.len());
            rows.push(None);
            continue;
        }
        let reports = runs
            .iter()
            .map(|(_, _, truth, est)| evaluate(est, truth, latency, a.exclude_s))
            .collect::<Result<Vec<_>, _>>()?;
        let (mean, _) = aggregate(&reports).expect("at least one seed");
        println!("{ratio:>8} {:>10.3} {:>14.6} {:>16.6}", cfg.eta_opt, mean.rmse_fe, mean.rmse_re);
        let _ = writeln!(table, "{},{},{:?},{:?},0", ratio, cfg.eta_opt, mean.rmse_fe, mean.rmse_re);
        rows.push(Some((mean.rmse_fe, mean.rmse_re)));
    }
    if let Some(p) = &a.out {
        io::write_text(p, &table)?;
    }
    if rows.iter().any(Option::is_none) {
        return Err(Failure::Diverged("at least one ratio diverged".into()));
    }
    if a.require_increasing {
        let vals: Vec<(f64, f64)> = rows.into_iter().flatten().collect();
        let inc = |f: fn(&(f64, f64)) -> f64| vals.windows(2).all(|w| f(&w[1]) > f(&w[0]));
        if !inc(|v| v.0) || !inc(|v| v.1) {
            return Err(Failure::Bounds("RMSE FE/RE not strictly increasing across ratios".into()));
        }
    }
    Ok(())
}

fn parse_dim(s: &str) -> Result<Dim, Failure> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || Failure::Input(format!("bad --dim `{s}`; expected name:lower:upper[:log]"));
    if !(3..=4).contains(&parts.len()) {
        return Err(bad());
    }
    let param = GainParam::parse(parts[0]).ok_or_else(bad)?;
    let lower: f64 = parts[1].parse().map_err(|_| bad())?;
    let upper: f64 = parts[2].parse().map_err(|_| bad())?;
    let log = match parts.get(3) {
        None => false,
        Some(&"log") => true,
        Some(_) => return Err(bad()),
    };
    Ok(Dim {
        param,
        lower,
        upper,
        log,
    })
}

fn cmd_tune(a: TuneArgs) -> CliResult {
    let pso = PsoParams {
        swarm_size: a.swarm,
        iterations: a.iterations,
        inertia: a.inertia,
        c1: a.c1,
        c2: a.c2,
        seed: a.seed,
    };
    if let Some(dim) = a.sphere {
        if dim == 0 {
            return Err(Failure::Input("--sphere needs at least one dimension".into()));
        }
        let res = pso_minimize(&vec![(-5.0, 5.0); dim], &pso, sphere)?;
        println!(
            "sphere {dim}-D: best score {:.3e} after {} evaluations",
            res.best_score, res.evaluations
        );
        if let Some(h) = &a.history {
            io::write_text(h, &io::history_to_csv(&res.history))?;
        }
        return if res.best_score < 1e-3 {
            Ok(())
        } else {
            Err(Failure::Bounds(format!("sphere best {:.3e} ≥ 1e-3", res.best_score)))
        };
    }
    if a.scenarios.is_empty() {
        return Err(Failure::Input("at least one scenario is required".into()));
    }
    if a.seeds == 0 {
        return Err(Failure::Input("--seeds must be ≥ 1".into()));
    }
    let Some(out) = &a.out else {
        return Err(Failure::Input("--out is required".into()));
    };
    let base = load_config(&ConfigArgs {
        config: a.config.clone(),
        n: a.n,
        report_every: None,
        eta_opt: None,
    })?;
    let space = if a.dims.is_empty() {
        SearchSpace::standard()
    } else {
        SearchSpace::new(a.dims.iter().map(|d| parse_dim(d)).collect::<Result<_, _>>()?)?
    };
    let mut scenarios = Vec::new();
    for name in &a.scenarios {
        let spec = load_scenario(name)?;
        for s in 0..a.seeds {
            scenarios.push(synthesize(&spec, base.fs(), s)?);
        }
    }
    let opts = FitnessOptions {
        latency_s: ms_to_s(a.latency_ms)?,
        exclude_s: a.exclude_s,
        rocof_weight: a.rocof_weight,
    };
    let res = pso_tune(&space, &scenarios, &pso, &base, &opts)?;
    let mut text = format!(
        "# swarm {}x{}, seed {}, best score {:?}\n",
        pso.swarm_size, pso.iterations, pso.seed, res.best_score
    );
    text.push_str(&res.config.to_kv());
    io::write_text(out, &text)?;
    let hist = a.history.clone().unwrap_or_else(|| {
        let mut s = out.as_os_str().to_owned();
        s.push(".history.csv");
        PathBuf::from(s)
    });
    io::write_text(&hist, &io::history_to_csv(&res.history))?;
    println!(
        "best score {:.6e}; gains -> {}, history -> {}",
        res.best_score,
        out.display(),
        hist.display()
    );
    Ok(())
}

fn cmd_bench(a: BenchArgs) -> CliResult {
    if a.steps == 0 {
        return Err(Failure::Input("--steps must be ≥ 1".into()));
    }
    let cfg = load_config(&a.cfg)?;
    let mut spec = ScenarioSpec::tone(cfg.f0, (a.steps - 1) as f64 * cfg.ts);
    spec.noise = NoiseSpec::gaussian(0.02);
    let (stream, _) = synthesize(&spec, cfg.fs(), 0)?;
    let mut est = Estimator::new(cfg.clone())?;
    let mut times = Vec::with_capacity(a.steps);
    let total = Instant::now();
    for k in 0..a.steps {
        let x = stream.values[k.min(stream.values.len() - 1)];
        let t = Instant::now();
        let r = est.step(x);
        times.push(t.elapsed().as_nanos() as f64 * 1e-3);
        r?;
    }
    let wall = total.elapsed().as_secs_f64();
    times.sort_by(f64::total_cmp);
    let mean = times.iter().sum::<f64>() / times.len() as f64;
    let pct = |q: f64| times[((times.len() - 1) as f64 * q).round() as usize];
    let report = format!(
        "steps,{}\nn,{}\nmean_us,{:?}\nmedian_us,{:?}\np99_us,{:?}\nwall_s,{:?}\n",
        a.steps,
        cfg.n,
        mean,
        pct(0.5),
        pct(0.99),
        wall
    );
    println!(
        "n = {}, {} steps: mean {:.3} µs, median {:.3} µs, p99 {:.3} µs per step ({:.1}% of the {:.0} µs real-time budget)",
        cfg.n,
        a.steps,
        mean,
        pct(0.5),
        pct(0.99),
        100.0 * mean / (cfg.ts * 1e6),
        cfg.ts * 1e6
    );
    if let Some(p) = &a.out {
        io::write_text(p, &report)?;
    }
    Ok(())
}
