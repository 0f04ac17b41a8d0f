use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::Args;
use dmpscale::io::{write_json, write_table};
use dmpscale::scaling::save_forces;
use dmpscale::sim::{self, RunConfig, RunSummary, TransportRun};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;

use crate::config::{overlay, Settings};
use crate::manifest::{load_manifest, resolve, RunManifest, Subject};

/// Run scripted transports described by manifests.
#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Manifest JSON: one run, or `{"runs": [...]}`.
    #[arg(required = true)]
    pub manifests: Vec<PathBuf>,
}

#[derive(Serialize)]
struct SummaryFile<'a> {
    #[serde(flatten)]
    summary: &'a RunSummary,
    mode: Option<&'a str>,
    subject: Option<&'a Subject>,
    config: &'a RunConfig,
}

struct Job {
    manifest: RunManifest,
    base: PathBuf,
    label: String,
}

fn collect_jobs(paths: &[PathBuf]) -> anyhow::Result<Vec<Job>> {
    let mut jobs = Vec::new();
    for path in paths {
        let (value, base): (Value, PathBuf) = load_manifest(path)?;
        let entries = match value.get("runs") {
            Some(Value::Array(list)) => list.clone(),
            Some(_) => bail!("{}: `runs` must be a list", path.display()),
            None => vec![value],
        };
        for (i, entry) in entries.into_iter().enumerate() {
            let label = format!("{} run {i}", path.display());
            let manifest: RunManifest =
                serde_json::from_value(entry).with_context(|| format!("parsing {label}"))?;
            jobs.push(Job {
                manifest,
                base: base.clone(),
                label,
            });
        }
    }
    let mut seen = BTreeSet::new();
    for job in &jobs {
        let out = resolve(&job.base, &job.manifest.output_dir);
        if !seen.insert(out.clone()) {
            bail!("output directory {} used by more than one run", out.display());
        }
    }
    Ok(jobs)
}

fn run_job(job: &Job, settings: &Settings) -> anyhow::Result<()> {
    let m = &job.manifest;
    let model = m.model(&job.base, &settings.dmp)?;
    let scene = m.scene(&job.base)?;
    let config: RunConfig = overlay(&settings.run, m.config.as_ref()).context("run config overrides")?;
    let y0 = m.y0.clone().unwrap_or_else(|| model.y0_demo.clone());
    let g = m.g.clone().unwrap_or_else(|| model.g_demo.clone());
    let run = sim::simulate_transport(&model, &y0, &g, &scene, &m.profile, &config)?;
    write_outputs(&resolve(&job.base, &m.output_dir), &run, m, &config)
}

fn write_outputs(dir: &Path, run: &TransportRun, m: &RunManifest, config: &RunConfig) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    run.trajectory.save_csv(dir.join("trajectory.csv"))?;
    save_forces(dir.join("forces.csv"), &run.forces)?;
    run.log.save_csv(dir.join("log.csv"))?;
    let header = |cols: &[&str]| cols.iter().map(|c| c.to_string()).collect::<Vec<_>>();
    write_table(
        dir.join("sigma_rho.csv"),
        &header(&["t", "s", "rho", "sigma"]),
        run.log.rows.iter().map(|r| vec![r.t_wall, r.s, r.rho, r.sigma]),
    )?;
    write_table(
        dir.join("path_xyz.csv"),
        &header(&["t", "s", "x", "y", "z"]),
        run.log.rows.iter().map(|r| vec![r.t_wall, r.s, r.p.x, r.p.y, r.p.z]),
    )?;
    write_json(
        dir.join("summary.json"),
        &SummaryFile {
            summary: &run.summary,
            mode: m.mode.as_deref(),
            subject: m.subject.as_ref(),
            config,
        },
    )?;
    Ok(())
}

pub fn run(args: &SimulateArgs, settings: &Settings) -> anyhow::Result<()> {
    let jobs = collect_jobs(&args.manifests)?;
    let results: Vec<anyhow::Result<()>> = jobs
        .par_iter()
        .map(|job| run_job(job, settings).with_context(|| job.label.clone()))
        .collect();
    let batch = jobs.len() > 1;
    let mut first_err = None;
    for (job, res) in jobs.iter().zip(results) {
        match res {
            Ok(()) => println!("{}: wrote {}", job.label, resolve(&job.base, &job.manifest.output_dir).display()),
            Err(e) => {
                if batch {
                    eprintln!("{}: failed: {e:#}", job.label);
                }
                first_err.get_or_insert(e);
            }
        }
    }
    match first_err {
        Some(e) => Err(e),
        None => Ok(()),
    }
}
