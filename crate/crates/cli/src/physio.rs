use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::Context;
use clap::Args;
use dmpscale::io::{fmt_f64, write_json};
use dmpscale::physio::{self, BandPowers, PhysioParams, PhysioRecording, TimeWindow};
use dmpscale::Error;
use serde::Serialize;

use crate::config::Settings;

/// Skin conductance level and EEG band powers per time window.
#[derive(Debug, Args)]
pub struct PhysioArgs {
    /// Recording: CSV with a `<stem>.json` sidecar, or a JSON container.
    pub recording: PathBuf,
    /// Analysis window `start:end` in seconds; repeatable. Defaults to the
    /// whole recording.
    #[arg(long = "window")]
    pub windows: Vec<TimeWindow>,
    /// Report JSON; a CSV with the same stem is written next to it.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Serialize)]
pub struct WindowReport {
    pub window: TimeWindow,
    pub scl_mean: Option<f64>,
    pub band_powers: BTreeMap<String, BandPowers>,
    pub theta_alpha_ratio: Option<f64>,
}

/// Per-subject min-max normalization across windows; `None` when every
/// window gave the same value.
#[derive(Debug, Default, Serialize)]
pub struct Normalized {
    pub scl_mean: Option<Vec<f64>>,
    pub theta_alpha_ratio: Option<Vec<f64>>,
}

#[derive(Debug, Serialize)]
pub struct PhysioReport {
    pub fs: f64,
    pub params: PhysioParams,
    pub windows: Vec<WindowReport>,
    pub normalized: Option<Normalized>,
    pub seed: u64,
}

fn normalize(name: &str, values: Option<Vec<f64>>) -> anyhow::Result<Option<Vec<f64>>> {
    let Some(values) = values else { return Ok(None) };
    match physio::minmax_normalize(&values) {
        Ok(n) => Ok(Some(n)),
        Err(Error::DegenerateRange(v)) => {
            log::warn!("{name} is {v} in every window; not normalized");
            Ok(None)
        }
        Err(e) => Err(e.into()),
    }
}

pub fn analyze(rec: &PhysioRecording, windows: &[TimeWindow], p: &PhysioParams, seed: u64) -> anyhow::Result<PhysioReport> {
    let has = |name: &str| rec.channel(name).is_ok();
    let eeg: Vec<&String> = p.frontal.iter().chain(&p.parietal).collect();
    let eeg_present = eeg.iter().filter(|c| has(c)).count();
    let use_eeg = eeg_present > 0;
    if use_eeg {
        if let Some(missing) = eeg.iter().find(|c| !has(c)) {
            return Err(Error::MissingChannel(missing.to_string()).into());
        }
    }
    let use_eda = has(&p.eda_channel);
    if !use_eda && !use_eeg {
        return Err(Error::MissingChannel(p.eda_channel.clone()).into());
    }

    let windows = if windows.is_empty() {
        vec![TimeWindow::new(0.0, rec.duration())]
    } else {
        windows.to_vec()
    };
    let mut reports = Vec::with_capacity(windows.len());
    for w in &windows {
        let label = || format!("window {}:{}", w.start, w.end);
        let scl_mean = if use_eda {
            Some(physio::scl_mean(rec, *w, p).with_context(label)?)
        } else {
            None
        };
        let mut band_powers = BTreeMap::new();
        let mut theta_alpha_ratio = None;
        if use_eeg {
            for c in &eeg {
                band_powers.insert(c.to_string(), physio::band_powers(rec, c, *w, p).with_context(label)?);
            }
            theta_alpha_ratio = Some(physio::theta_alpha_ratio(rec, *w, p).with_context(label)?);
        }
        reports.push(WindowReport {
            window: *w,
            scl_mean,
            band_powers,
            theta_alpha_ratio,
        });
    }
    let normalized = if reports.len() >= 2 {
        let collect = |f: fn(&WindowReport) -> Option<f64>| reports.iter().map(f).collect::<Option<Vec<f64>>>();
        Some(Normalized {
            scl_mean: normalize("scl_mean", collect(|r| r.scl_mean))?,
            theta_alpha_ratio: normalize("theta_alpha_ratio", collect(|r| r.theta_alpha_ratio))?,
        })
    } else {
        None
    };
    Ok(PhysioReport {
        fs: rec.fs(),
        params: p.clone(),
        windows: reports,
        normalized,
        seed,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

pub fn run(args: &PhysioArgs, settings: &Settings) -> anyhow::Result<()> {
    let rec = PhysioRecording::load(&args.recording)?;
    let report = analyze(&rec, &args.windows, &settings.physio, settings.run.seed)?;
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    write_json(&args.out, &report)?;

    let csv_path = args.out.with_extension("csv");
    let mut w = csv::Writer::from_path(&csv_path).with_context(|| format!("writing {}", csv_path.display()))?;
    w.write_record([
        "start",
        "end",
        "scl_mean",
        "theta_alpha_ratio",
        "scl_mean_normalized",
        "theta_alpha_ratio_normalized",
    ])?;
    let norm = report.normalized.as_ref();
    for (i, r) in report.windows.iter().enumerate() {
        let pick = |v: Option<&Vec<f64>>| v.map(|n| n[i]);
        w.write_record([
            fmt_f64(r.window.start),
            fmt_f64(r.window.end),
            opt(r.scl_mean),
            opt(r.theta_alpha_ratio),
            opt(norm.and_then(|n| pick(n.scl_mean.as_ref()))),
            opt(norm.and_then(|n| pick(n.theta_alpha_ratio.as_ref()))),
        ])?;
        println!(
            "{}..{} s: scl {} ratio {}",
            r.window.start,
            r.window.end,
            r.scl_mean.map_or("-".into(), |v| format!("{v:.4}")),
            r.theta_alpha_ratio.map_or("-".into(), |v| format!("{v:.4}"))
        );
    }
    w.flush()?;
    Ok(())
}
