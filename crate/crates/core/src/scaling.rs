//! Online velocity scaling.
//!
//! The interaction force is projected on the direction of motion to give the
//! agreement `rho`; a sigmoid turns `rho` into a speed override `sigma` in
//! `[sigma_min, 1]`, and the path-time parameter advances by `sigma * dt`
//! every control period. Only the timing law changes; the executed
//! positions are always read off the nominal path.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;
use crate::trajectory::{KinematicMap, Trajectory, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OverrideVariant {
    /// `1 / (1 + exp(-m rho))`; half speed with no force applied.
    Literal,
    /// `min(1, 2 / (1 + exp(-m rho)))`; nominal speed with no force applied.
    #[default]
    UnitAtRest,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScalingConfig {
    /// Sigmoid slope, 1/N.
    pub m: f64,
    /// Control period, seconds.
    pub dt: f64,
    pub sigma_min: f64,
    pub variant: OverrideVariant,
    /// Tangent norms below this (m/s) give no direction; `rho` is zero there.
    pub v_epsilon: f64,
    /// Optional first-order low-pass on the force input, Hz.
    pub force_cutoff_hz: Option<f64>,
    /// Wall time without progress before a stall is reported, seconds.
    pub stall_budget: f64,
}

impl Default for ScalingConfig {
    fn default() -> Self {
        ScalingConfig {
            m: 0.1,
            dt: 0.008,
            sigma_min: 0.0,
            variant: OverrideVariant::UnitAtRest,
            v_epsilon: 1e-3,
            force_cutoff_hz: None,
            stall_budget: 10.0,
        }
    }
}

impl ScalingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.m > 0.0) || !self.m.is_finite() {
            return Err(Error::invalid(format!("slope m must be positive, got {}", self.m)));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::invalid(format!("dt must be positive, got {}", self.dt)));
        }
        if !(0.0..1.0).contains(&self.sigma_min) {
            return Err(Error::invalid(format!(
                "sigma_min must be in [0, 1), got {}",
                self.sigma_min
            )));
        }
        if !(self.v_epsilon >= 0.0) {
            return Err(Error::invalid("v_epsilon must be non-negative"));
        }
        if let Some(fc) = self.force_cutoff_hz {
            if !(fc > 0.0) {
                return Err(Error::invalid("force cutoff must be positive"));
            }
        }
        if !(self.stall_budget > 0.0) {
            return Err(Error::invalid("stall budget must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForceSample {
    pub t: f64,
    pub f: [f64; 3],
}

impl ForceSample {
    pub fn new(t: f64, f: Vec3) -> Self {
        ForceSample {
            t,
            f: [f.x, f.y, f.z],
        }
    }

    pub fn force(&self) -> Vec3 {
        Vec3::from(self.f)
    }
}

const FORCE_HEADER: [&str; 4] = ["t", "fx", "fy", "fz"];

pub fn load_forces(path: impl AsRef<Path>) -> Result<Vec<ForceSample>> {
    let table = io::read_table(path)?;
    if table.columns != FORCE_HEADER {
        return Err(Error::invalid(format!(
            "force profile header must be `t,fx,fy,fz`, got `{}`",
            table.columns.join(",")
        )));
    }
    Ok(table
        .rows
        .iter()
        .map(|r| ForceSample {
            t: r[0],
            f: [r[1], r[2], r[3]],
        })
        .collect())
}

pub fn save_forces(path: impl AsRef<Path>, forces: &[ForceSample]) -> Result<()> {
    let header: Vec<String> = FORCE_HEADER.iter().map(|s| s.to_string()).collect();
    io::write_table(
        path,
        &header,
        forces.iter().map(|s| [s.t, s.f[0], s.f[1], s.f[2]]),
    )
}

/// Component of `f` along the unit direction of `v`; zero when `|v| < v_epsilon`.
pub fn agreement(f: &Vec3, v: &Vec3, v_epsilon: f64) -> f64 {
    let norm = v.norm();
    if norm < v_epsilon || norm == 0.0 {
        return 0.0;
    }
    f.dot(v) / norm
}

/// Maps the agreement to a speed override in `[sigma_min, 1]`.
pub fn speed_override(rho: f64, config: &ScalingConfig) -> f64 {
    let logistic = 1.0 / (1.0 + (-config.m * rho).exp());
    let sigma = match config.variant {
        OverrideVariant::Literal => logistic,
        OverrideVariant::UnitAtRest => (2.0 * logistic).min(1.0),
    };
    sigma.max(config.sigma_min).min(1.0)
}

/// One timing-law update, capped at the end of the path. Landing within
/// rounding distance of the end counts as reaching it.
pub fn step(s: f64, sigma: f64, dt: f64, t_final: f64) -> f64 {
    let next = s + sigma * dt;
    if next >= t_final - 1e-12 * t_final.max(1.0) {
        t_final
    } else {
        next
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub t_wall: f64,
    pub s: f64,
    pub rho: f64,
    pub sigma: f64,
    pub q: Vec<f64>,
    pub p: Vec3,
    pub v: Vec3,
    pub f: Vec3,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExecutionLog {
    pub rows: Vec<LogRow>,
}

impl ExecutionLog {
    /// Wall-clock time at which the end of the path was reached.
    pub fn wall_time(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.t_wall)
    }

    pub fn dof(&self) -> usize {
        self.rows.first().map_or(0, |r| r.q.len())
    }

    pub fn header(n: usize) -> Vec<String> {
        let mut cols: Vec<String> = ["t", "s", "rho", "sigma"].iter().map(|c| c.to_string()).collect();
        cols.extend((1..=n).map(|i| format!("q{i}")));
        for prefix in ["p", "v", "f"] {
            cols.extend(["x", "y", "z"].iter().map(|a| format!("{prefix}{a}")));
        }
        cols
    }

    pub fn to_rows(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        self.rows.iter().map(|r| {
            let mut row = vec![r.t_wall, r.s, r.rho, r.sigma];
            row.extend_from_slice(&r.q);
            row.extend(r.p.iter().chain(r.v.iter()).chain(r.f.iter()));
            row
        })
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        io::write_table(path, &ExecutionLog::header(self.dof()), self.to_rows())
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        let table = io::read_table(path)?;
        let width = table.columns.len();
        if width < 14 || table.columns[..4] != ["t", "s", "rho", "sigma"] {
            return Err(Error::invalid("not an execution log"));
        }
        let n = width - 13;
        if table.columns != ExecutionLog::header(n) {
            return Err(Error::invalid("unexpected execution log header"));
        }
        let v3 = |r: &[f64], at: usize| Vec3::new(r[at], r[at + 1], r[at + 2]);
        let rows = table
            .rows
            .iter()
            .map(|r| LogRow {
                t_wall: r[0],
                s: r[1],
                rho: r[2],
                sigma: r[3],
                q: r[4..4 + n].to_vec(),
                p: v3(r, 4 + n),
                v: v3(r, 7 + n),
                f: v3(r, 10 + n),
            })
            .collect();
        Ok(ExecutionLog { rows })
    }
}

/// Runs the trajectory under force-driven velocity scaling.
///
/// Every control period: hold the latest force sample not newer than the
/// wall clock (zero before the first), project it on the path tangent,
/// convert to an override, log the current state, then advance the path
/// time. The final row sits exactly at the end of the path. The loop is a
/// pure function of its inputs, so identical inputs give identical logs.
pub fn execute(
    traj: &Trajectory,
    forces: &[ForceSample],
    kin: &KinematicMap,
    config: &ScalingConfig,
) -> Result<ExecutionLog> {
    config.validate()?;
    for (index, sample) in forces.iter().enumerate() {
        if !sample.t.is_finite() || sample.f.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFiniteForce { index });
        }
        if index > 0 && sample.t < forces[index - 1].t {
            return Err(Error::invalid(format!(
                "force timestamps must be non-decreasing (sample {index})"
            )));
        }
    }

    let t_final = traj.duration();
    let dt = config.dt;
    let smoothing = config
        .force_cutoff_hz
        .map(|fc| dt / (1.0 / (2.0 * std::f64::consts::PI * fc) + dt));

    let mut rows = Vec::new();
    let mut s = 0.0;
    let mut sigma_prev = speed_override(0.0, config);
    let mut cursor = 0;
    let mut filtered = Vec3::zeros();
    let mut stalled_since: Option<f64> = None;
    let mut warned = false;

    for k in 0usize.. {
        let t_wall = k as f64 * dt;
        while cursor < forces.len() && forces[cursor].t <= t_wall {
            cursor += 1;
        }
        let raw = if cursor == 0 {
            Vec3::zeros()
        } else {
            forces[cursor - 1].force()
        };
        let f = match smoothing {
            Some(a) => {
                filtered += (raw - filtered) * a;
                filtered
            }
            None => raw,
        };

        let tangent = traj.tangent_at(s, kin)?;
        let rho = agreement(&f, &tangent, config.v_epsilon);
        let sigma = speed_override(rho, config);
        let (q, p) = traj.position_at(s, kin)?;
        rows.push(LogRow {
            t_wall,
            s,
            rho,
            sigma,
            q,
            p,
            v: tangent * sigma_prev,
            f,
        });
        if s >= t_final {
            break;
        }

        let next = step(s, sigma, dt, t_final);
        if next > s {
            stalled_since = None;
        } else {
            let since = *stalled_since.get_or_insert(t_wall);
            if t_wall - since >= config.stall_budget {
                if cursor == forces.len() {
                    return Err(Error::Stalled { s, t_wall });
                }
                if !warned {
                    log::warn!("execution stalled at s = {s} since t = {since} s");
                    warned = true;
                }
            }
        }
        s = next;
        sigma_prev = sigma;
    }
    Ok(ExecutionLog { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn literal(m: f64) -> ScalingConfig {
        ScalingConfig {
            m,
            variant: OverrideVariant::Literal,
            ..ScalingConfig::default()
        }
    }

    /// 1 m along x at 0.25 m/s.
    fn straight(duration: f64) -> Trajectory {
        let n = 40;
        let times = (0..=n).map(|k| duration * k as f64 / n as f64).collect();
        let configs = (0..=n)
            .map(|k| vec![k as f64 / n as f64, 0.0, 0.5])
            .collect();
        Trajectory::new(times, configs).unwrap()
    }

    #[test]
    fn agreement_examples() {
        let e = 1e-3;
        assert_eq!(agreement(&Vec3::new(1.0, 0.0, 0.0), &Vec3::new(2.0, 0.0, 0.0), e), 1.0);
        assert_eq!(agreement(&Vec3::new(0.0, 4.0, 0.0), &Vec3::new(2.0, 0.0, 0.0), e), 0.0);
        assert_eq!(agreement(&Vec3::new(1.0, 1.0, 0.0), &Vec3::new(0.0, 3.0, 0.0), e), 1.0);
        assert_eq!(agreement(&Vec3::new(5.0, 1.0, 0.0), &Vec3::new(1e-4, 0.0, 0.0), e), 0.0);
    }

    #[test]
    fn override_examples() {
        assert_eq!(speed_override(0.0, &literal(3.0)), 0.5);
        assert_abs_diff_eq!(
            speed_override(-1.0, &literal(2.0)),
            0.11920292202211755,
            epsilon = 1e-15
        );
        assert_eq!(speed_override(0.0, &ScalingConfig::default()), 1.0);
        let clamped = ScalingConfig {
            sigma_min: 0.2,
            ..literal(1.0)
        };
        assert_eq!(speed_override(-100.0, &clamped), 0.2);
    }

    #[test]
    fn step_examples() {
        assert_eq!(step(0.0, 0.5, 0.008, 10.0), 0.004);
        assert_eq!(step(4.999, 1.0, 0.008, 5.0), 5.0);
        let mut s = 0.0;
        for _ in 0..100 {
            s = step(s, 1.0, 0.0078125, 10.0);
        }
        assert_eq!(s, 0.78125);
    }

    #[test]
    fn config_validation() {
        assert!(ScalingConfig { m: 0.0, ..Default::default() }.validate().is_err());
        assert!(ScalingConfig { dt: -1.0, ..Default::default() }.validate().is_err());
        assert!(ScalingConfig { sigma_min: 1.0, ..Default::default() }.validate().is_err());
        assert!(ScalingConfig::default().validate().is_ok());
    }

    #[test]
    fn zero_force_runs_at_nominal_speed() {
        let traj = straight(4.0);
        let log = execute(&traj, &[], &KinematicMap::FirstThree, &ScalingConfig::default()).unwrap();
        assert!((log.wall_time() - 4.0).abs() <= 0.008);
        assert_eq!(log.rows.last().unwrap().s, 4.0);
        assert!(log.rows.iter().all(|r| r.sigma == 1.0 && r.rho == 0.0));
    }

    #[test]
    fn literal_variant_halves_speed() {
        let traj = straight(4.0);
        let log = execute(&traj, &[], &KinematicMap::FirstThree, &literal(0.1)).unwrap();
        assert!((log.wall_time() - 8.0).abs() <= 0.008, "{}", log.wall_time());
    }

    #[test]
    fn rejects_non_finite_force() {
        let forces = [
            ForceSample::new(0.0, Vec3::zeros()),
            ForceSample { t: 0.1, f: [0.0, f64::NAN, 0.0] },
        ];
        let err = execute(&straight(1.0), &forces, &KinematicMap::FirstThree, &ScalingConfig::default())
            .unwrap_err();
        assert!(matches!(err, Error::NonFiniteForce { index: 1 }));
    }

    #[test]
    fn permanent_full_stop_is_reported_as_stall() {
        // 0 m/s tangent never happens on this path, and a huge opposing
        // force drives the override to exactly zero
        let forces = [ForceSample::new(0.0, Vec3::new(-1e6, 0.0, 0.0))];
        let config = ScalingConfig {
            stall_budget: 0.5,
            ..ScalingConfig::default()
        };
        let err = execute(&straight(1.0), &forces, &KinematicMap::FirstThree, &config).unwrap_err();
        assert!(matches!(err, Error::Stalled { .. }), "{err}");
    }

    #[test]
    fn low_pass_delays_the_slowdown() {
        let traj = straight(4.0);
        let forces = [ForceSample::new(0.0, Vec3::new(-20.0, 0.0, 0.0))];
        let kin = KinematicMap::FirstThree;
        let raw = execute(&traj, &forces, &kin, &ScalingConfig::default()).unwrap();
        let smooth = ScalingConfig {
            force_cutoff_hz: Some(0.5),
            ..ScalingConfig::default()
        };
        let filtered = execute(&traj, &forces, &kin, &smooth).unwrap();
        assert!(filtered.rows[5].sigma > raw.rows[5].sigma);
        assert!(filtered.wall_time() < raw.wall_time());
    }

    #[test]
    fn log_csv_round_trip() {
        let traj = straight(0.2);
        let forces = [ForceSample::new(0.05, Vec3::new(-3.0, 1.0, 0.5))];
        let log = execute(&traj, &forces, &KinematicMap::FirstThree, &ScalingConfig::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.csv");
        log.save_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with(
            "t,s,rho,sigma,q1,q2,q3,px,py,pz,vx,vy,vz,fx,fy,fz\n"
        ));
        assert_eq!(ExecutionLog::load_csv(&path).unwrap(), log);
    }

    #[test]
    fn force_csv_round_trip() {
        let forces = vec![
            ForceSample::new(0.0, Vec3::new(0.0, 0.0, 0.0)),
            ForceSample::new(0.5, Vec3::new(-1.5, 0.25, 1e-3)),
        ];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        save_forces(&path, &forces).unwrap();
        assert_eq!(load_forces(&path).unwrap(), forces);
    }
}
