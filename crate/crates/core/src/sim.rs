//! Synthetic demonstrations, scripted operator forces and the end-to-end
//! transport pipeline.
//!
//! The operator is a scripted force source: profiles are sampled on the
//! nominal schedule before execution starts and replayed by wall time.

use std::f64::consts::PI;
use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dmp::{self, Demonstration, DmpModel};
use crate::error::{Error, Result};
use crate::metrics;
use crate::scaling::{self, ExecutionLog, ForceSample, ScalingConfig};
use crate::trajectory::{self, CollisionOptions, KinematicMap, Obstacle, Trajectory, Vec3};

fn default_samples() -> usize {
    201
}

fn default_z_index() -> usize {
    2
}

/// Stand-in for a taught demonstration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SyntheticDemoSpec {
    /// Quintic minimum-jerk profile between `y0` and `g`.
    MinimumJerk {
        y0: Vec<f64>,
        g: Vec<f64>,
        duration: f64,
        #[serde(default = "default_samples")]
        samples: usize,
    },
    /// Minimum-jerk plus a half-sine bump of `peak_height` on dimension
    /// `z_index`. The bump peaks on a sample when `samples` is odd.
    ArcOverZ {
        y0: Vec<f64>,
        g: Vec<f64>,
        duration: f64,
        peak_height: f64,
        #[serde(default = "default_samples")]
        samples: usize,
        #[serde(default = "default_z_index")]
        z_index: usize,
    },
    FromFile { path: PathBuf },
}

fn min_jerk_shape(u: f64) -> f64 {
    u * u * u * (10.0 - 15.0 * u + 6.0 * u * u)
}

pub fn make_demo(spec: &SyntheticDemoSpec) -> Result<Demonstration> {
    let (y0, g, duration, samples, bump) = match spec {
        SyntheticDemoSpec::FromFile { path } => return Demonstration::load_csv(path),
        SyntheticDemoSpec::MinimumJerk {
            y0,
            g,
            duration,
            samples,
        } => (y0, g, *duration, *samples, None),
        SyntheticDemoSpec::ArcOverZ {
            y0,
            g,
            duration,
            peak_height,
            samples,
            z_index,
        } => {
            if *z_index >= y0.len() {
                return Err(Error::invalid(format!(
                    "z index {z_index} out of range for {} dimensions",
                    y0.len()
                )));
            }
            if !peak_height.is_finite() {
                return Err(Error::invalid("peak height must be finite"));
            }
            (y0, g, *duration, *samples, Some((*z_index, *peak_height)))
        }
    };
    if !(duration > 0.0) {
        return Err(Error::invalid(format!("duration must be positive, got {duration}")));
    }
    if y0.len() != g.len() || y0.is_empty() {
        return Err(Error::invalid("y0 and g must be non-empty and of equal length"));
    }
    if samples < 3 {
        return Err(Error::invalid("need at least 3 samples"));
    }
    let last = samples - 1;
    let mut times = Vec::with_capacity(samples);
    let mut configs = Vec::with_capacity(samples);
    for i in 0..samples {
        let u = i as f64 / last as f64;
        let shape = min_jerk_shape(u);
        let mut q: Vec<f64> = y0.iter().zip(g).map(|(a, b)| a + (b - a) * shape).collect();
        if let Some((z, peak)) = bump {
            q[z] += peak * (PI * u).sin();
        }
        times.push(if i == last { duration } else { duration * u });
        configs.push(q);
    }
    // exact endpoints regardless of rounding in the polynomial
    configs[0] = y0.clone();
    configs[last] = g.clone();
    if let Some((z, _)) = bump {
        configs[last][z] = g[z];
    }
    Demonstration::new(times, configs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum ForceDirection {
    /// Along the nominal path tangent (pushing the robot forward).
    Aligned,
    /// Against the nominal path tangent (holding the robot back).
    Opposing,
    /// Fixed Cartesian direction; normalized before use.
    Fixed { vector: [f64; 3] },
}

/// Scripted operator force. Times are wall-clock seconds from the start of execution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ForceProfileSpec {
    Constant {
        amplitude: f64,
        direction: ForceDirection,
    },
    /// `amplitude` inside `[t_start, t_end]`, zero outside.
    Windowed {
        amplitude: f64,
        direction: ForceDirection,
        window: [f64; 2],
    },
    /// Linear from `from` to `to` across the window, zero outside.
    Ramp {
        from: f64,
        to: f64,
        direction: ForceDirection,
        window: [f64; 2],
    },
    /// Sum of the parts.
    Composite { parts: Vec<ForceProfileSpec> },
}

impl ForceProfileSpec {
    pub fn zero() -> Self {
        ForceProfileSpec::Constant {
            amplitude: 0.0,
            direction: ForceDirection::Aligned,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let check_window = |w: &[f64; 2]| {
            if !(w[0] >= 0.0 && w[0] <= w[1] && w[1].is_finite()) {
                Err(Error::invalid(format!("invalid window [{}, {}]", w[0], w[1])))
            } else {
                Ok(())
            }
        };
        let check_dir = |d: &ForceDirection| match d {
            ForceDirection::Fixed { vector } if !vector.iter().all(|v| v.is_finite()) => {
                Err(Error::invalid("fixed force direction must be finite"))
            }
            _ => Ok(()),
        };
        let finite = |a: f64| {
            if a.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid("force amplitude must be finite"))
            }
        };
        match self {
            ForceProfileSpec::Constant { amplitude, direction } => {
                finite(*amplitude)?;
                check_dir(direction)
            }
            ForceProfileSpec::Windowed {
                amplitude,
                direction,
                window,
            } => {
                finite(*amplitude)?;
                check_dir(direction)?;
                check_window(window)
            }
            ForceProfileSpec::Ramp {
                from,
                to,
                direction,
                window,
            } => {
                finite(*from)?;
                finite(*to)?;
                check_dir(direction)?;
                check_window(window)
            }
            ForceProfileSpec::Composite { parts } => parts.iter().try_for_each(|p| p.validate()),
        }
    }

    /// Latest window end, or zero.
    pub fn last_event(&self) -> f64 {
        match self {
            ForceProfileSpec::Constant { .. } => 0.0,
            ForceProfileSpec::Windowed { window, .. } | ForceProfileSpec::Ramp { window, .. } => {
                window[1]
            }
            ForceProfileSpec::Composite { parts } => {
                parts.iter().map(|p| p.last_event()).fold(0.0, f64::max)
            }
        }
    }

    fn force_at(&self, t: f64, tangent: &Vec3) -> Vec3 {
        let along = |a: f64, d: &ForceDirection| -> Vec3 {
            match d {
                ForceDirection::Aligned => tangent * a,
                ForceDirection::Opposing => tangent * -a,
                ForceDirection::Fixed { vector } => {
                    let v = Vec3::from(*vector);
                    let norm = v.norm();
                    if norm > 0.0 {
                        v * (a / norm)
                    } else {
                        Vec3::zeros()
                    }
                }
            }
        };
        let inside = |w: &[f64; 2]| t >= w[0] && t <= w[1];
        match self {
            ForceProfileSpec::Constant { amplitude, direction } => along(*amplitude, direction),
            ForceProfileSpec::Windowed {
                amplitude,
                direction,
                window,
            } => {
                if inside(window) {
                    along(*amplitude, direction)
                } else {
                    Vec3::zeros()
                }
            }
            ForceProfileSpec::Ramp {
                from,
                to,
                direction,
                window,
            } => {
                if !inside(window) {
                    return Vec3::zeros();
                }
                let span = window[1] - window[0];
                let w = if span > 0.0 { (t - window[0]) / span } else { 1.0 };
                along(from + (to - from) * w, direction)
            }
            ForceProfileSpec::Composite { parts } => parts
                .iter()
                .map(|p| p.force_at(t, tangent))
                .fold(Vec3::zeros(), |a, b| a + b),
        }
    }
}

/// Unit direction of motion at path time `s`, falling back to the chord
/// direction where the path is momentarily at rest.
fn motion_direction(traj: &Trajectory, s: f64, kin: &KinematicMap, chord: &Vec3) -> Result<Vec3> {
    let tangent = traj.tangent_at(s, kin)?;
    let norm = tangent.norm();
    Ok(if norm > 0.0 { tangent / norm } else { *chord })
}

/// Samples the profile every `dt` from 0 until both the nominal end of the
/// trajectory and the last window have passed. Aligned and opposing forces
/// follow the path tangent at `min(t, t_f)`, i.e. the nominal schedule.
pub fn make_force_profile(
    spec: &ForceProfileSpec,
    traj: &Trajectory,
    kin: &KinematicMap,
    dt: f64,
) -> Result<Vec<ForceSample>> {
    spec.validate()?;
    if !(dt > 0.0) {
        return Err(Error::invalid("dt must be positive"));
    }
    let t_final = traj.duration();
    let horizon = t_final.max(spec.last_event() + dt);
    let chord = {
        let (_, a) = traj.position_at(0.0, kin)?;
        let (_, b) = traj.position_at(t_final, kin)?;
        let c = b - a;
        if c.norm() > 0.0 {
            c.normalize()
        } else {
            Vec3::zeros()
        }
    };
    let count = (horizon / dt).ceil() as usize;
    (0..=count)
        .map(|k| {
            let t = k as f64 * dt;
            let dir = motion_direction(traj, t.min(t_final), kin, &chord)?;
            Ok(ForceSample::new(t, spec.force_at(t, &dir)))
        })
        .collect()
}

/// Adds seeded isotropic Gaussian noise to every sample.
pub fn add_force_noise(forces: &mut [ForceSample], std_dev: f64, seed: u64) -> Result<()> {
    if std_dev == 0.0 {
        return Ok(());
    }
    let normal = Normal::new(0.0, std_dev).map_err(|e| Error::invalid(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for sample in forces {
        for c in &mut sample.f {
            *c += normal.sample(&mut rng);
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// Nominal duration handed to the rollout, seconds.
    pub duration: Option<f64>,
    pub rollout_dt: f64,
    pub v_max: f64,
    pub kinematics: KinematicMap,
    pub collision: CollisionOptions,
    pub scaling: ScalingConfig,
    pub force_noise_std: f64,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            duration: None,
            rollout_dt: 0.01,
            v_max: trajectory::DEFAULT_V_MAX,
            kinematics: KinematicMap::FirstThree,
            collision: CollisionOptions::default(),
            scaling: ScalingConfig::default(),
            force_noise_std: 0.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub wall_time: f64,
    pub nominal_time: f64,
    /// `wall_time / nominal_time - 1`.
    pub time_increase: f64,
    pub mean_sigma: f64,
    pub min_sigma: f64,
    pub max_sigma: f64,
    pub mean_path_height: f64,
    pub path_length: f64,
    pub steps: usize,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct TransportRun {
    /// Re-timed nominal trajectory that was executed.
    pub trajectory: Trajectory,
    pub forces: Vec<ForceSample>,
    pub log: ExecutionLog,
    pub summary: RunSummary,
}

/// Rollout, speed-limit re-timing, collision check, then scaled execution.
/// A trajectory that touches an obstacle is never executed.
pub fn simulate_transport(
    model: &DmpModel,
    y0: &[f64],
    g: &[f64],
    scene: &[Obstacle],
    profile: &ForceProfileSpec,
    config: &RunConfig,
) -> Result<TransportRun> {
    let kin = &config.kinematics;
    kin.validate()?;
    let duration = config.duration.unwrap_or(model.duration_demo);
    let raw = dmp::rollout(model, y0, g, config.rollout_dt, duration)?;
    let traj = raw.retime_speed_limit(config.v_max, kin)?;
    let report = trajectory::check_collisions(&traj, scene, kin, &config.collision)?;
    if !report.is_clean() {
        return Err(Error::Collision(report));
    }
    let mut forces = make_force_profile(profile, &traj, kin, config.scaling.dt)?;
    add_force_noise(&mut forces, config.force_noise_std, config.seed)?;
    let log = scaling::execute(&traj, &forces, kin, &config.scaling)?;

    let sigmas: Vec<f64> = log.rows.iter().map(|r| r.sigma).collect();
    let stats = metrics::path_stats(&traj, kin)?;
    let nominal_time = traj.duration();
    let wall_time = log.wall_time();
    let summary = RunSummary {
        wall_time,
        nominal_time,
        time_increase: wall_time / nominal_time - 1.0,
        mean_sigma: sigmas.iter().sum::<f64>() / sigmas.len() as f64,
        min_sigma: sigmas.iter().copied().fold(f64::INFINITY, f64::min),
        max_sigma: sigmas.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        mean_path_height: stats.mean_z,
        path_length: stats.length,
        steps: log.rows.len(),
        seed: config.seed,
    };
    Ok(TransportRun {
        trajectory: traj,
        forces,
        log,
        summary,
    })
}
