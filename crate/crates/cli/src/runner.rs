//! Drives one experiment and writes its artifacts.
//!
//! Every run produces, inside its output directory:
//!
//! * `norms.csv`    - `t,h_norm,v_norm,vprime_norm` at every grid node;
//! * `control.csv`  - `t,active,magnitude,u_1..u_M` per step, where
//!   `active` is the 1-based index of the single nonzero channel and `0`
//!   means none (for nonswitching runs `active` is always `0` and
//!   `magnitude` is the largest channel magnitude);
//! * `summary.csv`  - one row of run-level results;
//! * `config.toml`  - echo of the resolved configuration;
//! * `timing.txt`   - wall time, kept out of the CSV data so that repeated
//!   runs of the same configuration are byte-identical;
//! * `FAILED`       - present only when the run aborted, with the message.
//!
//! All data files are written with a fixed 16-digit scientific format and
//! the run executes single-threaded, so artifacts are deterministic.

use crate::config::{Mode, RunConfig};
use anyhow::{bail, Context, Result};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;
use swirhc::coeffs::benchmark_initial_state;
use swirhc::rhc::{self, RhcContext, RhcReport};

#[derive(Clone, Debug)]
pub struct RunArtifacts {
    pub out_dir: PathBuf,
    pub norms: PathBuf,
    pub control: PathBuf,
    pub summary: PathBuf,
    pub config_echo: PathBuf,
}

/// Run-level results, one row of `summary.csv`.
#[derive(Clone, Debug, PartialEq)]
pub struct Summary {
    pub label: String,
    pub mode: String,
    pub m: usize,
    pub mesh_n: usize,
    pub t_infinity: f64,
    pub accumulated_cost: f64,
    pub final_h_norm: f64,
    pub final_vprime_norm: f64,
    pub windows: usize,
    pub inner_iterations: usize,
    pub windows_converged: usize,
    pub aborted: bool,
}

pub struct RunOutcome {
    pub config: RunConfig,
    pub report: RhcReport,
    pub summary: Summary,
    pub artifacts: RunArtifacts,
    pub wall_seconds: f64,
}

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

/// Reads `SWIRHC_THREADS`; unset or `1` pins all kernels to the calling
/// thread (the deterministic default), larger values cap the thread count.
pub fn apply_thread_env() {
    match std::env::var("SWIRHC_THREADS").ok().and_then(|s| s.parse::<usize>().ok()) {
        None | Some(0) | Some(1) => swirhc::use_single_thread(),
        Some(n) => swirhc::faer::set_global_parallelism(swirhc::faer::Par::rayon(n)),
    }
}

pub fn run_experiment(config: &RunConfig, out_dir: &Path) -> Result<RunOutcome> {
    config.validate()?;
    apply_thread_env();
    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("creating output directory {}", out_dir.display()))?;

    let started = Instant::now();
    let ctx = RhcContext::new(&config.rhc_config()).map_err(|e| anyhow::anyhow!("{e}"))?;
    let y0 = swirhc::faer::Col::from_fn(ctx.mesh.n_nodes(), {
        let vals = benchmark_initial_state(&ctx.mesh);
        move |i| vals[i]
    });
    let report = match config.mode {
        Mode::Free => rhc::run_free(&ctx, &y0),
        Mode::Switching => rhc::run_rhc_with_context(&ctx, &y0),
        Mode::Nonswitching => rhc::run_rhc_nonswitching_with_context(&ctx, &y0),
    }
    .map_err(|e| anyhow::anyhow!("{e}"))?;
    let wall_seconds = started.elapsed().as_secs_f64();

    let summary = summarize(config, &report);
    let artifacts = write_artifacts(config, &report, &summary, out_dir, wall_seconds)?;
    Ok(RunOutcome { config: config.clone(), report, summary, artifacts, wall_seconds })
}

fn summarize(config: &RunConfig, report: &RhcReport) -> Summary {
    let finals = report.final_norms();
    Summary {
        label: config.label.clone(),
        mode: config.mode.to_string(),
        m: config.actuators.len(),
        mesh_n: config.mesh_n,
        t_infinity: config.t_infinity,
        accumulated_cost: report.accumulated_cost,
        final_h_norm: finals.h,
        final_vprime_norm: finals.vprime,
        windows: report.window_diagnostics.len(),
        inner_iterations: report.window_diagnostics.iter().map(|w| w.iterations).sum(),
        windows_converged: report.window_diagnostics.iter().filter(|w| w.converged).count(),
        aborted: report.aborted.is_some(),
    }
}

fn write_artifacts(
    config: &RunConfig,
    report: &RhcReport,
    summary: &Summary,
    out_dir: &Path,
    wall_seconds: f64,
) -> Result<RunArtifacts> {
    let norms = out_dir.join("norms.csv");
    let control = out_dir.join("control.csv");
    let summary_path = out_dir.join("summary.csv");
    let config_echo = out_dir.join("config.toml");

    let mut text = String::from("t,h_norm,v_norm,vprime_norm\n");
    for s in &report.norm_history {
        writeln!(text, "{},{},{},{}", fmt(s.t), fmt(s.h), fmt(s.v), fmt(s.vprime)).unwrap();
    }
    std::fs::write(&norms, text).context("writing norms.csv")?;

    let m = report.control.n_channels();
    let mut text = String::from("t,active,magnitude");
    for j in 1..=m {
        write!(text, ",u_{j}").unwrap();
    }
    text.push('\n');
    for k in 0..report.control.n_steps() {
        let step = report.control.step(k);
        let (active, magnitude) = match &report.switching_path {
            Some(path) => (
                path[k].active.map(|j| j + 1).unwrap_or(0),
                path[k].value,
            ),
            None => (0, step.iter().fold(0.0f64, |a, v| a.max(v.abs()))),
        };
        write!(text, "{},{},{}", fmt(report.control.grid.node(k)), active, fmt(magnitude))
            .unwrap();
        for v in step {
            write!(text, ",{}", fmt(*v)).unwrap();
        }
        text.push('\n');
    }
    std::fs::write(&control, text).context("writing control.csv")?;

    std::fs::write(&summary_path, summary_csv(std::slice::from_ref(summary)))
        .context("writing summary.csv")?;
    std::fs::write(&config_echo, config.to_toml()?).context("writing config echo")?;
    std::fs::write(out_dir.join("timing.txt"), format!("wall_seconds: {wall_seconds:.3}\n"))
        .context("writing timing.txt")?;

    if let Some(msg) = &report.aborted {
        std::fs::write(out_dir.join("FAILED"), format!("{msg}\n")).context("writing FAILED")?;
    }

    Ok(RunArtifacts { out_dir: out_dir.to_path_buf(), norms, control, summary: summary_path, config_echo })
}

pub const SUMMARY_HEADER: &str = "label,mode,m,mesh_n,t_infinity,accumulated_cost,final_h_norm,final_vprime_norm,windows,inner_iterations,windows_converged,aborted";

pub fn summary_csv(rows: &[Summary]) -> String {
    let mut text = format!("{SUMMARY_HEADER}\n");
    for s in rows {
        writeln!(
            text,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            s.label,
            s.mode,
            s.m,
            s.mesh_n,
            fmt(s.t_infinity),
            fmt(s.accumulated_cost),
            fmt(s.final_h_norm),
            fmt(s.final_vprime_norm),
            s.windows,
            s.inner_iterations,
            s.windows_converged,
            s.aborted
        )
        .unwrap();
    }
    text
}

pub fn parse_summary(path: &Path) -> Result<Vec<Summary>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading summary {}", path.display()))?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    if header != SUMMARY_HEADER {
        bail!("{}: unrecognized summary header", path.display());
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 12 {
            bail!("{}: row {} has {} fields, expected 12", path.display(), i + 2, f.len());
        }
        rows.push(Summary {
            label: f[0].to_string(),
            mode: f[1].to_string(),
            m: f[2].parse().context("field m")?,
            mesh_n: f[3].parse().context("field mesh_n")?,
            t_infinity: f[4].parse().context("field t_infinity")?,
            accumulated_cost: f[5].parse().context("field accumulated_cost")?,
            final_h_norm: f[6].parse().context("field final_h_norm")?,
            final_vprime_norm: f[7].parse().context("field final_vprime_norm")?,
            windows: f[8].parse().context("field windows")?,
            inner_iterations: f[9].parse().context("field inner_iterations")?,
            windows_converged: f[10].parse().context("field windows_converged")?,
            aborted: f[11].parse().context("field aborted")?,
        });
    }
    Ok(rows)
}

/// Aligned comparison of several run summaries.
pub fn compare_runs(paths: &[PathBuf]) -> Result<String> {
    let mut rows = Vec::new();
    for p in paths {
        rows.extend(parse_summary(p)?);
    }
    if rows.is_empty() {
        bail!("no summary rows found");
    }
    let headers = ["label", "mode", "m", "t_inf", "cost", "final_vprime"];
    let cells: Vec<[String; 6]> = rows
        .iter()
        .map(|s| {
            [
                s.label.clone(),
                s.mode.clone(),
                s.m.to_string(),
                format!("{}", s.t_infinity),
                format!("{:.3e}", s.accumulated_cost),
                format!("{:.3e}", s.final_vprime_norm),
            ]
        })
        .collect();
    let mut widths: Vec<usize> = headers.iter().map(|h| h.len()).collect();
    for row in &cells {
        for (w, c) in widths.iter_mut().zip(row.iter()) {
            *w = (*w).max(c.len());
        }
    }
    let mut out = String::new();
    for (i, h) in headers.iter().enumerate() {
        write!(out, "{:<width$}  ", h, width = widths[i]).unwrap();
    }
    out.push('\n');
    for row in &cells {
        for (i, c) in row.iter().enumerate() {
            write!(out, "{:<width$}  ", c, width = widths[i]).unwrap();
        }
        out.push('\n');
    }
    Ok(out)
}
