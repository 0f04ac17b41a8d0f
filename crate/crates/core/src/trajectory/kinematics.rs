use nalgebra::{Isometry3, Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

/// Maps a configuration to the end-effector's Cartesian position, meters.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum KinematicMap {
    /// The first three configuration entries are x, y, z. Missing entries
    /// read as zero.
    #[default]
    FirstThree,
    SerialChain(SerialChain),
}

/// Chain of revolute joints. Joint `i` translates by `origin` and then
/// rotates by `q[i]` about `axis`, both in the frame of the previous joint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SerialChain {
    pub joints: Vec<Joint>,
    #[serde(default)]
    pub tool: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Joint {
    pub axis: [f64; 3],
    pub origin: [f64; 3],
}

impl KinematicMap {
    pub fn position(&self, q: &[f64]) -> Result<Vec3> {
        match self {
            KinematicMap::FirstThree => {
                let at = |i: usize| q.get(i).copied().unwrap_or(0.0);
                Ok(Vec3::new(at(0), at(1), at(2)))
            }
            KinematicMap::SerialChain(chain) => chain.position(q),
        }
    }

    /// Whether the map yields a meaningful height for `n`-dimensional configurations.
    pub fn provides_z(&self, n: usize) -> bool {
        match self {
            KinematicMap::FirstThree => n >= 3,
            KinematicMap::SerialChain(chain) => chain.joints.len() == n,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let KinematicMap::SerialChain(chain) = self {
            if chain.joints.is_empty() {
                return Err(Error::Configuration("serial chain has no joints".into()));
            }
            for (i, j) in chain.joints.iter().enumerate() {
                let axis = Vec3::from(j.axis);
                if !(axis.norm() > 0.0) || !axis.iter().all(|v| v.is_finite()) {
                    return Err(Error::Configuration(format!("joint {i} has a degenerate axis")));
                }
            }
        }
        Ok(())
    }
}

impl SerialChain {
    pub fn position(&self, q: &[f64]) -> Result<Vec3> {
        if q.len() != self.joints.len() {
            return Err(Error::Configuration(format!(
                "serial chain has {} joints but configuration has {} entries",
                self.joints.len(),
                q.len()
            )));
        }
        let mut pose = Isometry3::identity();
        for (joint, angle) in self.joints.iter().zip(q) {
            let axis = Vec3::from(joint.axis).normalize();
            pose *= Isometry3::new(Vec3::from(joint.origin), axis * *angle);
        }
        Ok((pose * Point3::from(Vec3::from(self.tool))).coords)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn first_three_pads_short_configurations() {
        let kin = KinematicMap::FirstThree;
        assert_eq!(kin.position(&[1.0]).unwrap(), Vec3::new(1.0, 0.0, 0.0));
        assert_eq!(
            kin.position(&[1.0, 2.0, 3.0, 4.0]).unwrap(),
            Vec3::new(1.0, 2.0, 3.0)
        );
        assert!(!kin.provides_z(2));
        assert!(kin.provides_z(3));
    }

    #[test]
    fn planar_two_link_arm() {
        // two unit links rotating about z
        let chain = SerialChain {
            joints: vec![
                Joint { axis: [0.0, 0.0, 1.0], origin: [0.0, 0.0, 0.5] },
                Joint { axis: [0.0, 0.0, 1.0], origin: [1.0, 0.0, 0.0] },
            ],
            tool: [1.0, 0.0, 0.0],
        };
        let kin = KinematicMap::SerialChain(chain);
        let p = kin.position(&[0.0, 0.0]).unwrap();
        assert_abs_diff_eq!(p, Vec3::new(2.0, 0.0, 0.5), epsilon = 1e-12);
        let p = kin.position(&[FRAC_PI_2, 0.0]).unwrap();
        assert_abs_diff_eq!(p, Vec3::new(0.0, 2.0, 0.5), epsilon = 1e-12);
        let p = kin.position(&[0.0, FRAC_PI_2]).unwrap();
        assert_abs_diff_eq!(p, Vec3::new(1.0, 1.0, 0.5), epsilon = 1e-12);
        assert!(kin.position(&[0.0]).is_err());
    }

    #[test]
    fn serde_tagging() {
        let kin: KinematicMap = serde_json::from_str(r#"{"type":"first_three"}"#).unwrap();
        assert_eq!(kin, KinematicMap::FirstThree);
        let kin: KinematicMap = serde_json::from_str(
            r#"{"type":"serial_chain","joints":[{"axis":[0,0,1],"origin":[0,0,0]}]}"#,
        )
        .unwrap();
        assert!(matches!(kin, KinematicMap::SerialChain(_)));
    }
}
