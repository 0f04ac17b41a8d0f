//! Trajectory indexes: execution-time statistics per mode, height ratio per
//! subject, and path geometry.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trajectory::{KinematicMap, Trajectory};

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub mode: String,
    pub subject: String,
    /// Seconds.
    pub wall_time: f64,
    pub trajectory: Trajectory,
    /// Meters.
    pub user_height: f64,
}

impl RunRecord {
    pub fn validate(&self) -> Result<()> {
        if !(self.wall_time > 0.0) {
            return Err(Error::invalid(format!(
                "run of subject {} has non-positive wall time",
                self.subject
            )));
        }
        if !(self.user_height > 0.0) {
            return Err(Error::invalid(format!(
                "subject {} has non-positive height",
                self.subject
            )));
        }
        Ok(())
    }
}

/// Mean and population standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeStats {
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

pub fn avg_execution_time(records: &[RunRecord], mode: &str) -> Result<TimeStats> {
    let times: Vec<f64> = records
        .iter()
        .filter(|r| r.mode == mode)
        .map(|r| r.validate().map(|_| r.wall_time))
        .collect::<Result<_>>()?;
    if times.is_empty() {
        return Err(Error::NoData(format!("no runs for mode `{mode}`")));
    }
    let count = times.len();
    let mean = times.iter().sum::<f64>() / count as f64;
    let var = times.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / count as f64;
    Ok(TimeStats {
        mean,
        std: var.sqrt(),
        count,
    })
}

/// Mean end-effector height, averaged uniformly in time.
///
/// The path is resampled on a uniform time grid with as many intervals as
/// the trajectory has segments, so a uniformly timed trajectory reduces to
/// the plain sample mean and a globally re-timed one gives the same value.
pub fn z_average(traj: &Trajectory, kin: &KinematicMap) -> Result<f64> {
    let points = traj.uniform_positions(traj.len() - 1, kin)?;
    Ok(points.iter().map(|p| p.z).sum::<f64>() / points.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectRatio {
    pub subject: String,
    pub user_height: f64,
    pub ratio: f64,
    pub runs: usize,
}

/// Average path height over user height, per subject, for one mode.
pub fn height_ratio(records: &[RunRecord], mode: &str, kin: &KinematicMap) -> Result<Vec<SubjectRatio>> {
    let mut per_subject: BTreeMap<&str, (f64, f64, usize)> = BTreeMap::new();
    for r in records.iter().filter(|r| r.mode == mode) {
        r.validate()?;
        if !kin.provides_z(r.trajectory.dof()) {
            return Err(Error::Configuration(format!(
                "kinematic map gives no height for {}-DoF trajectories",
                r.trajectory.dof()
            )));
        }
        let ratio = z_average(&r.trajectory, kin)? / r.user_height;
        let entry = per_subject
            .entry(r.subject.as_str())
            .or_insert((0.0, r.user_height, 0));
        entry.0 += ratio;
        entry.2 += 1;
    }
    if per_subject.is_empty() {
        return Err(Error::NoData(format!("no runs for mode `{mode}`")));
    }
    Ok(per_subject
        .into_iter()
        .map(|(subject, (sum, height, runs))| SubjectRatio {
            subject: subject.to_string(),
            user_height: height,
            ratio: sum / runs as f64,
            runs,
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathStats {
    /// Polyline length, meters.
    pub length: f64,
    /// Time-uniform mean height, meters.
    pub mean_z: f64,
    pub max_z: f64,
}

pub fn path_stats(traj: &Trajectory, kin: &KinematicMap) -> Result<PathStats> {
    let points = traj.cartesian_points(kin)?;
    let length = points.windows(2).map(|w| (w[1] - w[0]).norm()).sum();
    let max_z = points.iter().map(|p| p.z).fold(f64::NEG_INFINITY, f64::max);
    Ok(PathStats {
        length,
        mean_z: z_average(traj, kin)?,
        max_z,
    })
}

/// Average ranks, ties sharing the mean of their positions (1-based).
fn ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            out[idx] = rank;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation (Pearson correlation of average ranks).
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::invalid("need two equal-length series of at least 2 values"));
    }
    let (rx, ry) = (ranks(xs), ranks(ys));
    let n = rx.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::DegenerateRange(if sxx == 0.0 { xs[0] } else { ys[0] }));
    }
    Ok(sxy / (sxx * syy).sqrt())
}
