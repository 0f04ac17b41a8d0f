use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::Args;
use dmpscale::dmp::{self, DmpModel};
use dmpscale::trajectory::{self, Obstacle};

use crate::config::Settings;

/// Roll out a model, re-time it to the speed limit and check it against a scene.
#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Model JSON written by `train`.
    #[arg(long)]
    pub model: PathBuf,
    /// Start configuration, comma separated; defaults to the demonstration's.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub y0: Option<Vec<f64>>,
    /// Goal configuration, comma separated; defaults to the demonstration's.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub g: Option<Vec<f64>>,
    /// Nominal duration in seconds before re-timing.
    #[arg(long)]
    pub duration: Option<f64>,
    /// Cartesian speed limit, m/s.
    #[arg(long)]
    pub v_max: Option<f64>,
    /// Scene JSON (list of boxes and spheres).
    #[arg(long)]
    pub scene: Option<PathBuf>,
    /// Trajectory CSV to write.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: &GenerateArgs, settings: &Settings) -> anyhow::Result<()> {
    let model = DmpModel::load(&args.model)?;
    let y0 = args.y0.clone().unwrap_or_else(|| model.y0_demo.clone());
    let g = args.g.clone().unwrap_or_else(|| model.g_demo.clone());
    for (name, v) in [("y0", &y0), ("g", &g)] {
        if v.len() != model.dof() {
            bail!("{name} has {} values but the model has {} dimensions", v.len(), model.dof());
        }
    }
    let run = &settings.run;
    let kin = &run.kinematics;
    let duration = args.duration.or(run.duration).unwrap_or(model.duration_demo);
    let v_max = args.v_max.unwrap_or(run.v_max);
    let scene: Vec<Obstacle> = match &args.scene {
        Some(p) => Obstacle::load_scene(p)?,
        None => Vec::new(),
    };

    let raw = dmp::rollout(&model, &y0, &g, run.rollout_dt, duration)?;
    let traj = raw.retime_speed_limit(v_max, kin)?;
    let report = trajectory::check_collisions(&traj, &scene, kin, &run.collision)?;
    if !report.is_clean() {
        return Err(dmpscale::Error::Collision(report)).context("refusing to write trajectory");
    }
    traj.save_csv(&args.out)
        .with_context(|| format!("writing trajectory {}", args.out.display()))?;
    log::info!("{} samples over {:.3} s", traj.len(), traj.duration());
    Ok(())
}
