//! Timed configuration-space trajectories.
//!
//! A [`Trajectory`] is a timed sequence of joint configurations starting at
//! `t = 0`. Between samples the configuration is interpolated linearly, and
//! Cartesian quantities are obtained through a [`KinematicMap`].

mod collision;
mod kinematics;

use std::path::Path;

pub use collision::{check_collisions, Collision, CollisionOptions, CollisionReport, Obstacle};
pub use kinematics::{Joint, KinematicMap, SerialChain, Vec3};

use crate::error::{Error, Result};
use crate::io;

/// Default finite-difference step for [`Trajectory::tangent_at`], seconds.
pub const DEFAULT_TANGENT_STEP: f64 = 1e-3;

/// Default Cartesian speed cap, m/s.
pub const DEFAULT_V_MAX: f64 = 0.25;

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    times: Vec<f64>,
    configs: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn new(times: Vec<f64>, configs: Vec<Vec<f64>>) -> Result<Self> {
        if times.len() != configs.len() {
            return Err(Error::invalid(format!(
                "{} timestamps but {} configurations",
                times.len(),
                configs.len()
            )));
        }
        if times.len() < 2 {
            return Err(Error::invalid("trajectory needs at least 2 samples"));
        }
        if times[0] != 0.0 {
            return Err(Error::invalid(format!(
                "trajectory must start at t = 0, got {}",
                times[0]
            )));
        }
        let n = configs[0].len();
        if n == 0 {
            return Err(Error::invalid("configurations must have at least one dimension"));
        }
        for (i, w) in times.windows(2).enumerate() {
            if !(w[1] > w[0]) || !w[1].is_finite() {
                return Err(Error::invalid(format!(
                    "timestamps must be strictly increasing (sample {})",
                    i + 1
                )));
            }
        }
        for (i, q) in configs.iter().enumerate() {
            if q.len() != n {
                return Err(Error::invalid(format!(
                    "sample {i} has dimension {}, expected {n}",
                    q.len()
                )));
            }
            if q.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("sample {i} is not finite")));
            }
        }
        Ok(Trajectory { times, configs })
    }

    pub fn dof(&self) -> usize {
        self.configs[0].len()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Final time `t_f`.
    pub fn duration(&self) -> f64 {
        *self.times.last().expect("non-empty")
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn configs(&self) -> &[Vec<f64>] {
        &self.configs
    }

    pub fn first(&self) -> &[f64] {
        &self.configs[0]
    }

    pub fn last(&self) -> &[f64] {
        self.configs.last().expect("non-empty")
    }

    /// Linearly interpolated configuration at path time `s`. Exact at sample times.
    pub fn config_at(&self, s: f64) -> Result<Vec<f64>> {
        let t_final = self.duration();
        if !(0.0..=t_final).contains(&s) {
            return Err(Error::OutOfRange { s, t_final });
        }
        let upper = self.times.partition_point(|&t| t <= s);
        let lo = upper - 1;
        if self.times[lo] == s {
            return Ok(self.configs[lo].clone());
        }
        let (t0, t1) = (self.times[lo], self.times[upper]);
        let w = (s - t0) / (t1 - t0);
        Ok(self.configs[lo]
            .iter()
            .zip(&self.configs[upper])
            .map(|(a, b)| a + (b - a) * w)
            .collect())
    }

    pub fn position_at(&self, s: f64, kin: &KinematicMap) -> Result<(Vec<f64>, Vec3)> {
        let q = self.config_at(s)?;
        let p = kin.position(&q)?;
        Ok((q, p))
    }

    pub fn tangent_at(&self, s: f64, kin: &KinematicMap) -> Result<Vec3> {
        self.tangent_at_with_step(s, kin, DEFAULT_TANGENT_STEP)
    }

    /// Finite-difference derivative `dp/ds`, unnormalized.
    ///
    /// Central differences in the interior, second-order one-sided stencils
    /// within one step of either end.
    pub fn tangent_at_with_step(&self, s: f64, kin: &KinematicMap, step: f64) -> Result<Vec3> {
        let t_final = self.duration();
        if !(0.0..=t_final).contains(&s) {
            return Err(Error::OutOfRange { s, t_final });
        }
        if !(step > 0.0) {
            return Err(Error::invalid("tangent step must be positive"));
        }
        let h = step.min(t_final / 2.0);
        let p = |t: f64| -> Result<Vec3> { self.position_at(t.clamp(0.0, t_final), kin).map(|r| r.1) };
        if s - h >= 0.0 && s + h <= t_final {
            Ok((p(s + h)? - p(s - h)?) / (2.0 * h))
        } else if s - h < 0.0 {
            Ok((p(s)? * -3.0 + p(s + h)? * 4.0 - p(s + 2.0 * h)?) / (2.0 * h))
        } else {
            Ok((p(s)? * 3.0 - p(s - h)? * 4.0 + p(s - 2.0 * h)?) / (2.0 * h))
        }
    }

    /// Cartesian positions of every waypoint.
    pub fn cartesian_points(&self, kin: &KinematicMap) -> Result<Vec<Vec3>> {
        self.configs.iter().map(|q| kin.position(q)).collect()
    }

    /// Largest Cartesian speed over all segments, m/s.
    pub fn peak_speed(&self, kin: &KinematicMap) -> Result<f64> {
        let points = self.cartesian_points(kin)?;
        Ok(points
            .windows(2)
            .zip(self.times.windows(2))
            .map(|(p, t)| (p[1] - p[0]).norm() / (t[1] - t[0]))
            .fold(0.0, f64::max))
    }

    /// Multiplies every timestamp by `factor`; geometry is untouched.
    pub fn time_scaled(&self, factor: f64) -> Result<Trajectory> {
        if !(factor > 0.0) || !factor.is_finite() {
            return Err(Error::invalid(format!("time scale must be positive, got {factor}")));
        }
        Ok(Trajectory {
            times: self.times.iter().map(|t| t * factor).collect(),
            configs: self.configs.clone(),
        })
    }

    /// Slows the whole trajectory by one global factor so that no segment
    /// exceeds `v_max` in Cartesian speed. Compliant trajectories are
    /// returned unchanged.
    pub fn retime_speed_limit(&self, v_max: f64, kin: &KinematicMap) -> Result<Trajectory> {
        if !(v_max > 0.0) {
            return Err(Error::invalid(format!("v_max must be positive, got {v_max}")));
        }
        let v_peak = self.peak_speed(kin)?;
        // within rounding of the cap counts as compliant, which makes the
        // operation idempotent
        if v_peak <= v_max * (1.0 + 1e-12) {
            return Ok(self.clone());
        }
        self.time_scaled(v_peak / v_max)
    }

    /// Resamples at `count + 1` uniformly spaced times over `[0, t_f]`.
    pub fn uniform_positions(&self, count: usize, kin: &KinematicMap) -> Result<Vec<Vec3>> {
        let t_final = self.duration();
        (0..=count)
            .map(|k| {
                let s = if k == count {
                    t_final
                } else {
                    t_final * k as f64 / count as f64
                };
                self.position_at(s, kin).map(|r| r.1)
            })
            .collect()
    }

    pub fn from_table(table: &io::Table) -> Result<Self> {
        if table.columns.first().map(String::as_str) != Some("t") {
            return Err(Error::invalid("trajectory CSV must start with a `t` column"));
        }
        let times = table.rows.iter().map(|r| r[0]).collect();
        let configs = table.rows.iter().map(|r| r[1..].to_vec()).collect();
        Trajectory::new(times, configs)
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        Trajectory::from_table(&io::read_table(path)?)
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        io::write_table(path, &io::config_header(self.dof()), self.rows())
    }

    fn rows(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        self.times.iter().zip(&self.configs).map(|(t, q)| {
            let mut row = Vec::with_capacity(q.len() + 1);
            row.push(*t);
            row.extend_from_slice(q);
            row
        })
    }
}
