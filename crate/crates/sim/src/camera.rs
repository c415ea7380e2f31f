//! Pinhole camera rigidly mounted on the end effector.
//!
//! Camera frame follows the usual vision convention: +z along the optical
//! axis, +x to the image right, +y down. Pixel `(x, y)` has its center at
//! `u = x, v = y`.

use nalgebra::{Isometry3, Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::SimError;
use crate::pose::Pose;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EyeInHandCamera {
    pub intrinsics: Intrinsics,
    /// End-effector → camera transform.
    pub mount: Pose,
    pub width: usize,
    pub height: usize,
}

impl Default for EyeInHandCamera {
    /// 352×352, f = 300 px, looking along the flange's −z with image up
    /// pointing away from the robot base at the default home pose.
    fn default() -> Self {
        use std::f64::consts::{FRAC_PI_2, PI};
        Self {
            intrinsics: Intrinsics {
                fx: 300.0,
                fy: 300.0,
                cx: 176.0,
                cy: 176.0,
            },
            mount: Pose::identity().with_rpy(PI, 0.0, -FRAC_PI_2),
            width: 352,
            height: 352,
        }
    }
}

impl EyeInHandCamera {
    pub fn validate(&self) -> Result<(), SimError> {
        let k = &self.intrinsics;
        let ok = k.fx > 0.0
            && k.fy > 0.0
            && k.cx >= 0.0
            && k.cx < self.width as f64
            && k.cy >= 0.0
            && k.cy < self.height as f64
            && self.width > 0
            && self.height > 0
            && self.width <= 1 << 14
            && self.height <= 1 << 14
            && self.mount.is_finite();
        if ok {
            Ok(())
        } else {
            Err(SimError::InvalidScene("camera intrinsics/resolution out of range".into()))
        }
    }

    /// Camera pose in world coordinates for a given end-effector pose.
    pub fn world_pose(&self, effector: &Isometry3<f64>) -> Isometry3<f64> {
        effector * self.mount.to_isometry()
    }

    /// Pixel coordinates of a camera-frame point in front of the camera.
    pub fn project(&self, p: &Point3<f64>) -> Option<(f64, f64)> {
        if p.z <= 0.0 {
            return None;
        }
        let k = &self.intrinsics;
        Some((k.fx * p.x / p.z + k.cx, k.fy * p.y / p.z + k.cy))
    }

    /// Camera-frame ray direction through `(u, v)`, scaled so that `z = 1`.
    pub fn ray(&self, u: f64, v: f64) -> Vector3<f64> {
        let k = &self.intrinsics;
        Vector3::new((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0)
    }
}
