//! CSV formats for samples, truth, phasors, estimates, baselines and tuning
//! history. Floats are written in shortest round-trip form so files parse
//! back bit-identically. Lines starting with `#` are metadata and are
//! skipped on read.

use std::fmt::Write as _;
use std::fs;
use std::io::Read;
use std::path::Path;

use crate::baseline::FreqSeries;
use crate::error::{Error, Result};
use crate::estimator::{EstimateRecord, EstimateSeries};
use crate::kv::fmt_f64;
use crate::signal::{GroundTruth, PhasorFrame, SampleStream};

pub const SAMPLE_HEADER: &[&str] = &["t", "value"];
pub const TRUTH_HEADER: &[&str] = &["t", "freq_hz", "rocof_hzps", "amp_pu", "phase_rad"];
pub const PHASOR_HEADER: &[&str] = &["t", "amp_pu", "freq_hz", "rocof_hzps", "phase_rad"];
pub const HISTORY_HEADER: &[&str] = &["iteration", "best_score"];

/// Relative tolerance on sample spacing when reading uniform streams.
pub const SPACING_TOL_S: f64 = 1e-9;

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn row(buf: &mut String, values: impl IntoIterator<Item = f64>) {
    let mut first = true;
    for v in values {
        if !first {
            buf.push(',');
        }
        first = false;
        buf.push_str(&fmt_f64(v));
    }
    buf.push('\n');
}

/// Parses a numeric CSV with exactly the `expected` header.
pub fn read_table<R: Read>(reader: R, expected: &[&str]) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let header_line = rdr.position().line().max(1) as usize;
    let headers = rdr
        .headers()
        .map_err(|e| Error::parse(header_line, e.to_string()))?
        .clone();
    let got: Vec<&str> = headers.iter().collect();
    if got != expected {
        return Err(Error::parse(
            header_line,
            format!("expected header `{}`, got `{}`", expected.join(","), got.join(",")),
        ));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            Error::parse(line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != expected.len() {
            return Err(Error::parse(
                line,
                format!("expected {} fields, got {}", expected.len(), rec.len()),
            ));
        }
        let mut vals = Vec::with_capacity(rec.len());
        for (field, name) in rec.iter().zip(expected) {
            let v: f64 = field
                .parse()
                .map_err(|_| Error::parse(line, format!("cannot parse `{field}` as {name}")))?;
            vals.push(v);
        }
        rows.push(vals);
    }
    Ok(rows)
}

fn read_table_file(path: &Path, expected: &[&str]) -> Result<Vec<Vec<f64>>> {
    let file = fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_table(file, expected).map_err(|e| e.with_path(path))
}

/// Start time and spacing of a uniformly spaced time column.
fn uniform_grid(times: &[f64]) -> Result<(f64, f64)> {
    match times.len() {
        0 => Ok((0.0, 0.0)),
        1 => Ok((times[0], 0.0)),
        n => {
            let t0 = times[0];
            let ts = (times[n - 1] - t0) / (n - 1) as f64;
            if !(ts > 0.0) {
                return Err(Error::InvalidInput("timestamps must increase".into()));
            }
            for (k, t) in times.iter().enumerate() {
                if (t - (t0 + k as f64 * ts)).abs() > SPACING_TOL_S {
                    return Err(Error::parse(
                        k + 2,
                        format!("non-uniform sample spacing at t = {t}"),
                    ));
                }
            }
            Ok((t0, ts))
        }
    }
}

pub fn samples_to_csv(s: &SampleStream) -> String {
    let mut buf = String::with_capacity(s.len() * 32);
    buf.push_str("t,value\n");
    for (k, v) in s.values.iter().enumerate() {
        row(&mut buf, [s.time(k), *v]);
    }
    buf
}

pub fn samples_from_rows(rows: &[Vec<f64>]) -> Result<SampleStream> {
    let times: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    let (t0, ts) = uniform_grid(&times)?;
    Ok(SampleStream::new(t0, ts, rows.iter().map(|r| r[1]).collect()))
}

pub fn parse_samples(text: &str) -> Result<SampleStream> {
    samples_from_rows(&read_table(text.as_bytes(), SAMPLE_HEADER)?)
}

pub fn read_samples(path: &Path) -> Result<SampleStream> {
    samples_from_rows(&read_table_file(path, SAMPLE_HEADER)?).map_err(|e| e.with_path(path))
}

pub fn write_samples(path: &Path, s: &SampleStream) -> Result<()> {
    write_text(path, &samples_to_csv(s))
}

pub fn truth_to_csv(t: &GroundTruth) -> String {
    let mut buf = String::with_capacity(t.len() * 80);
    buf.push_str(&TRUTH_HEADER.join(","));
    buf.push('\n');
    for k in 0..t.len() {
        row(
            &mut buf,
            [t.time(k), t.freq_hz[k], t.rocof_hzps[k], t.amp_pu[k], t.phase_rad[k]],
        );
    }
    buf
}

pub fn truth_from_rows(rows: &[Vec<f64>]) -> Result<GroundTruth> {
    let times: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    let (t0, ts) = uniform_grid(&times)?;
    let col = |i: usize| rows.iter().map(|r| r[i]).collect::<Vec<f64>>();
    Ok(GroundTruth {
        t0,
        ts,
        freq_hz: col(1),
        rocof_hzps: col(2),
        amp_pu: col(3),
        phase_rad: col(4),
        dc_amp: 0.0,
        dc_tau: 0.0,
    })
}

pub fn read_truth(path: &Path) -> Result<GroundTruth> {
    truth_from_rows(&read_table_file(path, TRUTH_HEADER)?).map_err(|e| e.with_path(path))
}

pub fn write_truth(path: &Path, t: &GroundTruth) -> Result<()> {
    write_text(path, &truth_to_csv(t))
}

pub fn phasors_to_csv(frames: &[PhasorFrame]) -> String {
    let mut buf = PHASOR_HEADER.join(",");
    buf.push('\n');
    for f in frames {
        row(&mut buf, [f.t, f.amp_pu, f.freq_hz, f.rocof_hzps, f.phase_rad]);
    }
    buf
}

pub fn read_phasors(path: &Path) -> Result<Vec<PhasorFrame>> {
    let rows = read_table_file(path, PHASOR_HEADER)?;
    Ok(rows
        .iter()
        .map(|r| PhasorFrame {
            t: r[0],
            amp_pu: r[1],
            freq_hz: r[2],
            rocof_hzps: r[3],
            phase_rad: r[4],
        })
        .collect())
}

pub fn estimate_header(n: usize) -> Vec<String> {
    let mut h: Vec<String> = ["t", "f_hz", "rocof_hzps", "residual", "a_dc", "a_dc1"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for i in 1..=n {
        h.push(format!("amp_{i}"));
        h.push(format!("phase_{i}"));
    }
    h
}

/// Estimate CSV. `note` lines are written first as `#` metadata.
pub fn estimates_to_csv(series: &EstimateSeries, n: usize, note: &[String]) -> String {
    let mut buf = String::with_capacity(series.len() * (120 + 40 * n));
    for line in note {
        let _ = writeln!(buf, "# {line}");
    }
    buf.push_str(&estimate_header(n).join(","));
    buf.push('\n');
    for r in &series.records {
        let mut vals = vec![r.t, r.f_hz, r.rocof_hzps, r.residual, r.a_dc, r.a_dc1];
        for (a, p) in r.amps.iter().zip(&r.phases) {
            vals.push(*a);
            vals.push(*p);
        }
        row(&mut buf, vals);
    }
    buf
}

/// Reads an estimate CSV; the harmonic count is taken from the header.
pub fn parse_estimates<R: Read>(mut reader: R) -> Result<(EstimateSeries, usize)> {
    let mut text = String::new();
    reader
        .read_to_string(&mut text)
        .map_err(|e| Error::parse(0, e.to_string()))?;
    let header_line = text
        .lines()
        .find(|l| !l.trim_start().starts_with('#') && !l.trim().is_empty())
        .unwrap_or("");
    let cols = header_line.split(',').count();
    if cols < 8 || (cols - 6) % 2 != 0 {
        return Err(Error::parse(1, format!("malformed estimate header `{header_line}`")));
    }
    let n = (cols - 6) / 2;
    let header = estimate_header(n);
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = read_table(text.as_bytes(), &header)?;
    let records = rows
        .into_iter()
        .map(|r| EstimateRecord {
            t: r[0],
            f_hz: r[1],
            rocof_hzps: r[2],
            residual: r[3],
            a_dc: r[4],
            a_dc1: r[5],
            amps: (0..n).map(|i| r[6 + 2 * i]).collect(),
            phases: (0..n).map(|i| r[7 + 2 * i]).collect(),
            eta: 0.0,
        })
        .collect();
    Ok((
        EstimateSeries {
            records,
            diverged_at: None,
        },
        n,
    ))
}

pub fn read_estimates(path: &Path) -> Result<(EstimateSeries, usize)> {
    let file = fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_estimates(file).map_err(|e| e.with_path(path))
}

pub fn write_estimates(path: &Path, series: &EstimateSeries, n: usize, note: &[String]) -> Result<()> {
    write_text(path, &estimates_to_csv(series, n, note))
}

/// Two-column series CSV with the given column names.
pub fn series_to_csv(series: &FreqSeries, cols: [&str; 2], note: &[String]) -> String {
    let mut buf = String::new();
    for line in note {
        let _ = writeln!(buf, "# {line}");
    }
    let _ = writeln!(buf, "{},{}", cols[0], cols[1]);
    for (t, v) in series.t.iter().zip(&series.f_hz) {
        row(&mut buf, [*t, *v]);
    }
    buf
}

pub fn history_to_csv(history: &[f64]) -> String {
    let mut buf = HISTORY_HEADER.join(",");
    buf.push('\n');
    for (i, v) in history.iter().enumerate() {
        let _ = writeln!(buf, "{i},{}", fmt_f64(*v));
    }
    buf
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{synthesize, ScenarioSpec};

    #[test]
    fn samples_round_trip_bitwise() {
        let (s, t) = synthesize(&ScenarioSpec::case1(), 1200.0, 3).unwrap();
        let back = parse_samples(&samples_to_csv(&s)).unwrap();
        assert_eq!(back.values.len(), s.values.len());
        assert!(back.values.iter().zip(&s.values).all(|(a, b)| a.to_bits() == b.to_bits()));
        assert!((back.ts - s.ts).abs() < 1e-15);
        let tr = truth_from_rows(&read_table(truth_to_csv(&t).as_bytes(), TRUTH_HEADER).unwrap())
            .unwrap();
        assert_eq!(tr.phase_rad, t.phase_rad);
        assert_eq!(tr.freq_hz, t.freq_hz);
    }

    #[test]
    fn malformed_rows_report_line() {
        let err = parse_samples("t,value\n0,1\n0.001,abc\n").unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
        let err = parse_samples("time,value\n0,1\n").unwrap_err();
        assert!(err.to_string().contains("header"), "{err}");
        let err = parse_samples("t,value\n0,1\n0.001,2\n0.0025,3\n").unwrap_err();
        assert!(err.to_string().contains("non-uniform"), "{err}");
    }

    #[test]
    fn empty_after_header() {
        let s = parse_samples("t,value\n").unwrap();
        assert!(s.is_empty());
    }

    #[test]
    fn estimates_round_trip() {
        let series = EstimateSeries {
            records: vec![EstimateRecord {
                t: 0.01,
                f_hz: 50.000_000_1,
                rocof_hzps: -0.1,
                amps: vec![1.0, 0.1],
                phases: vec![0.3, -2.0],
                a_dc: 0.01,
                a_dc1: 1e-5,
                residual: 1.0 / 3.0,
                eta: 0.0,
            }],
            diverged_at: None,
        };
        let text = estimates_to_csv(&series, 2, &["note".into()]);
        assert!(text.starts_with("# note\nt,f_hz,rocof_hzps,residual,a_dc,a_dc1,amp_1,phase_1,amp_2,phase_2\n"));
        let (back, n) = parse_estimates(text.as_bytes()).unwrap();
        assert_eq!(n, 2);
        assert_eq!(back, series);
    }

    #[test]
    fn history_format() {
        assert_eq!(history_to_csv(&[2.0, 0.5]), "iteration,best_score\n0,2.0\n1,0.5\n");
    }
}
