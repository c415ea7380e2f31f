use nalgebra::{Isometry3, Translation3, UnitQuaternion};
use serde::{Deserialize, Serialize};

/// Rigid transform: translation in meters, then roll/pitch/yaw in radians
/// composed as `Rz(yaw)·Ry(pitch)·Rx(roll)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pose {
    #[serde(default)]
    pub translation: [f64; 3],
    #[serde(default)]
    pub rpy: [f64; 3],
}

impl Pose {
    pub const fn identity() -> Self {
        Self {
            translation: [0.0; 3],
            rpy: [0.0; 3],
        }
    }

    pub const fn at(x: f64, y: f64, z: f64) -> Self {
        Self {
            translation: [x, y, z],
            rpy: [0.0; 3],
        }
    }

    pub const fn with_rpy(mut self, roll: f64, pitch: f64, yaw: f64) -> Self {
        self.rpy = [roll, pitch, yaw];
        self
    }

    pub fn is_finite(&self) -> bool {
        self.translation.iter().chain(&self.rpy).all(|v| v.is_finite())
    }

    pub fn to_isometry(&self) -> Isometry3<f64> {
        let [x, y, z] = self.translation;
        let [r, p, yaw] = self.rpy;
        Isometry3::from_parts(Translation3::new(x, y, z), UnitQuaternion::from_euler_angles(r, p, yaw))
    }
}
