use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{KinematicMap, Trajectory, Vec3};
use crate::error::{Error, Result};
use crate::io;

/// Static obstacle in the workspace, meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Obstacle {
    /// Axis-aligned box.
    Box { min: [f64; 3], max: [f64; 3] },
    Sphere { center: [f64; 3], radius: f64 },
}

impl Obstacle {
    pub fn validate(&self) -> Result<()> {
        match self {
            Obstacle::Box { min, max } => {
                if min.iter().zip(max).any(|(lo, hi)| !(lo <= hi)) {
                    return Err(Error::invalid("box min must not exceed max"));
                }
            }
            Obstacle::Sphere { center, radius } => {
                if !(*radius > 0.0) || center.iter().any(|c| !c.is_finite()) {
                    return Err(Error::invalid("sphere radius must be positive"));
                }
            }
        }
        Ok(())
    }

    /// Signed distance from `p` to the obstacle surface; zero or negative inside.
    pub fn distance(&self, p: &Vec3) -> f64 {
        match self {
            Obstacle::Box { min, max } => {
                let mut outside = 0.0f64;
                let mut inside = f64::NEG_INFINITY;
                for axis in 0..3 {
                    let below = min[axis] - p[axis];
                    let above = p[axis] - max[axis];
                    let d = below.max(above);
                    if d > 0.0 {
                        outside += d * d;
                    }
                    inside = inside.max(d);
                }
                if outside > 0.0 {
                    outside.sqrt()
                } else {
                    inside
                }
            }
            Obstacle::Sphere { center, radius } => (p - Vec3::from(*center)).norm() - radius,
        }
    }

    pub fn load_scene(path: impl AsRef<Path>) -> Result<Vec<Obstacle>> {
        let scene: Vec<Obstacle> = io::read_json(path)?;
        for ob in &scene {
            ob.validate()?;
        }
        Ok(scene)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CollisionOptions {
    /// Sampling step in path time, seconds.
    pub resolution: f64,
    /// Radius of the sphere swept by the end effector, meters.
    pub clearance: f64,
}

impl Default for CollisionOptions {
    fn default() -> Self {
        CollisionOptions {
            resolution: 0.01,
            clearance: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Collision {
    pub s: f64,
    pub obstacle: usize,
    pub point: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollisionReport {
    pub first: Option<Collision>,
    pub samples_checked: usize,
}

impl CollisionReport {
    pub fn is_clean(&self) -> bool {
        self.first.is_none()
    }
}

impl fmt::Display for CollisionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.first {
            None => write!(f, "clean ({} samples checked)", self.samples_checked),
            Some(c) => write!(
                f,
                "collision with obstacle {} at s = {} s, point ({}, {}, {})",
                c.obstacle, c.s, c.point[0], c.point[1], c.point[2]
            ),
        }
    }
}

/// Checks the end-effector path against static obstacles.
///
/// Path times are sampled at multiples of `resolution` merged with every
/// waypoint time. The first sample whose distance to any obstacle is at
/// most the clearance radius is reported.
pub fn check_collisions(
    traj: &Trajectory,
    obstacles: &[Obstacle],
    kin: &KinematicMap,
    opts: &CollisionOptions,
) -> Result<CollisionReport> {
    if !(opts.resolution > 0.0) {
        return Err(Error::invalid("collision resolution must be positive"));
    }
    for ob in obstacles {
        ob.validate()?;
    }
    let t_final = traj.duration();
    let mut grid: Vec<f64> = (0..)
        .map(|k| k as f64 * opts.resolution)
        .take_while(|&s| s < t_final)
        .chain(traj.times().iter().copied())
        .collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();

    let mut checked = 0;
    for s in grid {
        checked += 1;
        if obstacles.is_empty() {
            continue;
        }
        let (_, p) = traj.position_at(s, kin)?;
        if let Some(idx) = obstacles
            .iter()
            .position(|ob| ob.distance(&p) <= opts.clearance)
        {
            return Ok(CollisionReport {
                first: Some(Collision {
                    s,
                    obstacle: idx,
                    point: [p.x, p.y, p.z],
                }),
                samples_checked: checked,
            });
        }
    }
    Ok(CollisionReport {
        first: None,
        samples_checked: checked,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Along x from 0 to 2 m over 2 s.
    fn straight() -> Trajectory {
        Trajectory::new(
            vec![0.0, 1.0, 2.0],
            vec![vec![0.0, 0.0, 1.0], vec![1.0, 0.0, 1.0], vec![2.0, 0.0, 1.0]],
        )
        .unwrap()
    }

    #[test]
    fn no_obstacles_is_clean() {
        let report = check_collisions(
            &straight(),
            &[],
            &KinematicMap::FirstThree,
            &CollisionOptions::default(),
        )
        .unwrap();
        assert!(report.is_clean());
        assert_eq!(report.samples_checked, 201);
    }

    #[test]
    fn box_on_path_collides_at_entry() {
        let scene = [Obstacle::Box {
            min: [0.935, -0.1, 0.9],
            max: [1.135, 0.1, 1.1],
        }];
        let report = check_collisions(
            &straight(),
            &scene,
            &KinematicMap::FirstThree,
            &CollisionOptions::default(),
        )
        .unwrap();
        // with 0.05 m clearance the end effector touches the box once x >= 0.885,
        // so the first 0.01 s sample inside is s = 0.89
        let hit = report.first.unwrap();
        assert_eq!(hit.obstacle, 0);
        assert!((hit.s - 0.89).abs() < 1e-12, "{hit:?}");
    }

    #[test]
    fn sphere_at_safe_distance_is_clean() {
        // path at y = 0, sphere center 0.2 m away, surface 0.1 m away
        let scene = [Obstacle::Sphere {
            center: [1.0, 0.2, 1.0],
            radius: 0.1,
        }];
        let report = check_collisions(
            &straight(),
            &scene,
            &KinematicMap::FirstThree,
            &CollisionOptions::default(),
        )
        .unwrap();
        assert!(report.is_clean());
    }

    #[test]
    fn box_distance() {
        let b = Obstacle::Box {
            min: [0.0; 3],
            max: [1.0; 3],
        };
        assert_eq!(b.distance(&Vec3::new(2.0, 0.5, 0.5)), 1.0);
        assert_eq!(b.distance(&Vec3::new(0.5, 0.5, 0.5)), -0.5);
        assert!((b.distance(&Vec3::new(2.0, 2.0, 0.5)) - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn scene_json() {
        let scene: Vec<Obstacle> = serde_json::from_str(
            r#"[{"type":"box","min":[0,0,0],"max":[1,1,1]},
                {"type":"sphere","center":[0,0,0],"radius":0.5}]"#,
        )
        .unwrap();
        assert_eq!(scene.len(), 2);
        assert!(Obstacle::Sphere { center: [0.0; 3], radius: -1.0 }.validate().is_err());
    }

    proptest! {
        #[test]
        fn enlarging_never_clears_a_collision(
            cx in 0.0f64..2.0, cy in -0.3f64..0.3, r in 0.01f64..0.4, grow in 0.0f64..0.5
        ) {
            let kin = KinematicMap::FirstThree;
            let opts = CollisionOptions::default();
            let small = [Obstacle::Sphere { center: [cx, cy, 1.0], radius: r }];
            let big = [Obstacle::Sphere { center: [cx, cy, 1.0], radius: r + grow }];
            let a = check_collisions(&straight(), &small, &kin, &opts).unwrap();
            let b = check_collisions(&straight(), &big, &kin, &opts).unwrap();
            prop_assert!(a.is_clean() || !b.is_clean());
        }
    }
}
