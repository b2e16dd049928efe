//! Result files.
//!
//! `<out>` holds line-delimited JSON: a header line (the only line carrying
//! a timestamp), then replicate, detection and convergence records.
//! Wall-clock measurements go to `<out>.timing.jsonl` and a readable report
//! to `<out>.summary.txt`, so `<out>` is reproducible byte for byte.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::harness::{Condition, ExperimentOutput};
use crate::SimError;

#[derive(Serialize)]
struct Line<'a, T: Serialize> {
    #[serde(rename = "type")]
    kind: &'a str,
    config_hash: &'a str,
    #[serde(flatten)]
    body: &'a T,
}

#[derive(Serialize)]
struct Header<'a> {
    timestamp_unix: u64,
    experiment: &'a str,
    config: &'a ExperimentConfig,
}

#[derive(Serialize)]
struct Timing {
    condition: Condition,
    replicate: usize,
    runtime_s: f64,
}

fn push_line<T: Serialize>(buf: &mut String, kind: &str, hash: &str, body: &T) {
    let line = serde_json::to_string(&Line { kind, config_hash: hash, body }).expect("records serialize");
    buf.push_str(&line);
    buf.push('\n');
}

/// The machine-readable record stream.
pub fn render_records(cfg: &ExperimentConfig, out: &ExperimentOutput, timestamp_unix: u64) -> String {
    let hash = cfg.config_hash();
    let mut buf = String::new();
    let header = Header { timestamp_unix, experiment: cfg.experiment.name(), config: cfg };
    push_line(&mut buf, "header", &hash, &header);
    for r in &out.replicates {
        push_line(&mut buf, "replicate", &hash, r);
    }
    for d in &out.detections {
        push_line(&mut buf, "detection", &hash, d);
    }
    for c in &out.convergence {
        push_line(&mut buf, "convergence", &hash, c);
    }
    buf
}

pub fn render_timing(cfg: &ExperimentConfig, out: &ExperimentOutput) -> String {
    let hash = cfg.config_hash();
    let mut buf = String::new();
    for r in &out.replicates {
        let t = Timing { condition: r.condition, replicate: r.replicate, runtime_s: r.runtime_s };
        push_line(&mut buf, "replicate_time", &hash, &t);
    }
    for p in &out.runtime {
        push_line(&mut buf, "runtime", &hash, p);
    }
    for s in &out.slopes {
        push_line(&mut buf, "slope", &hash, s);
    }
    buf
}

fn describe(c: &Condition) -> String {
    match *c {
        Condition::Eps { eps } => format!("eps={eps}"),
        Condition::Position { x, y } => format!("outlier at ({x}, {y})"),
        Condition::Nk { n_per_cluster, eps } => format!("N_k={n_per_cluster} eps={eps}"),
        Condition::N { n } => format!("N={n}"),
        Condition::R { r } => format!("r={r}"),
        Condition::Input => "input".to_string(),
    }
}

fn fmt_score(v: Option<f64>) -> String {
    match v {
        None => "-".into(),
        Some(v) if v.is_finite() => format!("{v:.3}"),
        Some(_) => "invalid".into(),
    }
}

/// Human-readable report.
pub fn render_summary(cfg: &ExperimentConfig, out: &ExperimentOutput) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{} | EM loss {} | criterion loss {} | l = {}..={} | seed {} | config {}",
        cfg.experiment,
        cfg.em_loss,
        cfg.bic_loss,
        cfg.l_min,
        cfg.l_max,
        cfg.seed,
        cfg.config_hash()
    );
    if cfg.experiment == crate::config::Experiment::Enumerate {
        for r in &out.replicates {
            let _ = writeln!(s, "{:>3}  {:>14}  {:>14}  {:>14}", "l", "finite", "asymptotic", "schwarz");
            for c in &r.per_l_scores {
                let _ = writeln!(s, "{:>3}  {:>14}  {:>14}  {:>14}", c.l, fmt_score(c.finite), fmt_score(c.asymptotic), fmt_score(c.schwarz));
            }
            for (p, k) in &r.k_hat {
                let _ = writeln!(s, "K_hat ({p}) = {}", k.map_or("none".to_string(), |k| k.to_string()));
            }
        }
    }
    for d in &out.detections {
        let hist: Vec<String> = d.k_hat_histogram.iter().map(|(k, n)| format!("{k}:{n}")).collect();
        let _ = writeln!(
            s,
            "{:<28} {:<10} p_detect {:.3}  runs {:>4}  histogram [{}]  mean {:.3}s",
            describe(&d.condition),
            d.penalty,
            d.p_detect,
            d.mc_runs,
            hist.join(" "),
            d.mean_runtime_s
        );
    }
    for c in &out.convergence {
        let _ = writeln!(s, "N_k={:<5} l={} {:<10} mean {} ({} runs)", c.n_per_cluster, c.l, c.penalty, fmt_score(c.mean_score), c.valid_runs);
    }
    for p in &out.runtime {
        let _ = writeln!(s, "{:?}={:<6} {:<10} {:.4}s (mean of {})", p.sweep, p.value, p.penalty, p.mean_seconds, p.reps);
    }
    for sl in &out.slopes {
        let _ = writeln!(s, "log-log slope over {:?} ({}) = {:.3}", sl.sweep, sl.penalty, sl.slope);
    }
    s
}

fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(suffix);
    PathBuf::from(name)
}

fn write_file(path: &Path, contents: &str) -> Result<(), SimError> {
    let mut f = fs::File::create(path).map_err(|e| SimError::Io(format!("{}: {e}", path.display())))?;
    f.write_all(contents.as_bytes()).map_err(|e| SimError::Io(format!("{}: {e}", path.display())))
}

/// Writes the record file plus its timing and summary sidecars. Returns the summary text.
pub fn write_outputs(cfg: &ExperimentConfig, out: &ExperimentOutput, path: &Path) -> Result<String, SimError> {
    let now = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| SimError::Io(format!("{}: {e}", dir.display())))?;
    }
    write_file(path, &render_records(cfg, out, now))?;
    write_file(&sidecar(path, ".timing.jsonl"), &render_timing(cfg, out))?;
    let summary = render_summary(cfg, out);
    write_file(&sidecar(path, ".summary.txt"), &summary)?;
    Ok(summary)
}

/// Drops the header line so two record files can be compared.
pub fn strip_header(records: &str) -> &str {
    match records.find('\n') {
        Some(i) if records.starts_with("{\"type\":\"header\"") => &records[i + 1..],
        _ => records,
    }
}
