use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::Args;
use dmpscale::io::{fmt_f64, write_json};
use dmpscale::metrics::{self, PathStats, RunRecord, SubjectRatio, TimeStats};
use dmpscale::scaling::ExecutionLog;
use dmpscale::trajectory::Trajectory;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::Settings;
use crate::manifest::{existing, load_manifest, MetricsManifest, MetricsRun};

/// Execution-time and path-height report over executed runs.
#[derive(Debug, Args)]
pub struct MetricsArgs {
    /// Metrics manifest JSON listing executed runs.
    pub manifest: PathBuf,
    /// Directory for report.json and the CSV tables.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Serialize)]
pub struct ModeReport {
    pub time: TimeStats,
    pub height_ratios: Vec<SubjectRatio>,
    /// Rank correlation of subject height and ratio; absent when undefined.
    pub height_ratio_spearman: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct RunPath {
    pub mode: String,
    pub subject: String,
    pub wall_time: f64,
    #[serde(flatten)]
    pub stats: PathStats,
}

#[derive(Debug, Serialize)]
pub struct MetricsReport {
    pub modes: BTreeMap<String, ModeReport>,
    pub runs: Vec<RunPath>,
    pub seed: u64,
}

fn load_run(run: &MetricsRun, base: &Path) -> anyhow::Result<RunRecord> {
    let traj_path = match (&run.trajectory, &run.run_dir) {
        (Some(p), _) => existing(base, p)?,
        (None, Some(d)) => existing(base, &d.join("trajectory.csv"))?,
        (None, None) => bail!("run {}/{} has no trajectory", run.mode, run.subject),
    };
    let wall_time = match (run.wall_time, &run.log, &run.run_dir) {
        (Some(t), _, _) => t,
        (None, Some(p), _) => ExecutionLog::load_csv(existing(base, p)?)?.wall_time(),
        (None, None, Some(d)) => ExecutionLog::load_csv(existing(base, &d.join("log.csv"))?)?.wall_time(),
        (None, None, None) => bail!("run {}/{} has no wall time or log", run.mode, run.subject),
    };
    let record = RunRecord {
        mode: run.mode.clone(),
        subject: run.subject.clone(),
        wall_time,
        trajectory: Trajectory::load_csv(traj_path)?,
        user_height: run.height,
    };
    record.validate()?;
    Ok(record)
}

pub fn build_report(manifest: &MetricsManifest, base: &Path, settings: &Settings) -> anyhow::Result<MetricsReport> {
    if manifest.runs.is_empty() {
        return Err(dmpscale::Error::NoData("manifest lists no runs".into()).into());
    }
    let kin = manifest.kinematics.clone().unwrap_or_else(|| settings.run.kinematics.clone());
    let records = manifest
        .runs
        .par_iter()
        .map(|r| load_run(r, base))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let modes: Vec<String> = match &manifest.modes {
        Some(m) => m.clone(),
        None => {
            let mut m: Vec<String> = records.iter().map(|r| r.mode.clone()).collect();
            m.sort();
            m.dedup();
            m
        }
    };
    let mut report = BTreeMap::new();
    for mode in modes {
        let time = metrics::avg_execution_time(&records, &mode).with_context(|| format!("mode {mode}"))?;
        let height_ratios = metrics::height_ratio(&records, &mode, &kin)?;
        let heights: Vec<f64> = height_ratios.iter().map(|s| s.user_height).collect();
        let ratios: Vec<f64> = height_ratios.iter().map(|s| s.ratio).collect();
        let height_ratio_spearman = metrics::spearman(&heights, &ratios).ok();
        report.insert(
            mode,
            ModeReport {
                time,
                height_ratios,
                height_ratio_spearman,
            },
        );
    }
    let runs = records
        .iter()
        .map(|r| {
            Ok(RunPath {
                mode: r.mode.clone(),
                subject: r.subject.clone(),
                wall_time: r.wall_time,
                stats: metrics::path_stats(&r.trajectory, &kin)?,
            })
        })
        .collect::<dmpscale::Result<Vec<_>>>()?;
    Ok(MetricsReport {
        modes: report,
        runs,
        seed: settings.run.seed,
    })
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn run(args: &MetricsArgs, settings: &Settings) -> anyhow::Result<()> {
    let (manifest, base): (MetricsManifest, PathBuf) = load_manifest(&args.manifest)?;
    let report = build_report(&manifest, &base, settings)?;
    let out = &args.out;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    write_json(out.join("report.json"), &report)?;

    let mut time_rows = Vec::new();
    let mut ratio_rows = Vec::new();
    for (mode, m) in &report.modes {
        time_rows.push(vec![mode.clone(), fmt_f64(m.time.mean), fmt_f64(m.time.std), m.time.count.to_string()]);
        for s in &m.height_ratios {
            ratio_rows.push(vec![
                mode.clone(),
                s.subject.clone(),
                fmt_f64(s.user_height),
                fmt_f64(s.ratio),
                s.runs.to_string(),
            ]);
        }
        println!(
            "{mode}: time {:.3} +/- {:.3} s over {} runs; spearman(height, ratio) = {}",
            m.time.mean,
            m.time.std,
            m.time.count,
            m.height_ratio_spearman.map_or("n/a".to_string(), |r| format!("{r:.3}"))
        );
    }
    let path_rows: Vec<Vec<String>> = report
        .runs
        .iter()
        .map(|r| {
            vec![
                r.mode.clone(),
                r.subject.clone(),
                fmt_f64(r.wall_time),
                fmt_f64(r.stats.length),
                fmt_f64(r.stats.mean_z),
                fmt_f64(r.stats.max_z),
            ]
        })
        .collect();
    write_csv(&out.join("time_stats.csv"), &["mode", "mean", "std", "count"], &time_rows)?;
    write_csv(&out.join("height_ratio.csv"), &["mode", "subject", "height", "ratio", "runs"], &ratio_rows)?;
    write_csv(
        &out.join("path_stats.csv"),
        &["mode", "subject", "wall_time", "length", "mean_z", "max_z"],
        &path_rows,
    )?;
    Ok(())
}
