//! Serial chain of revolute joints.

use nalgebra::{Isometry3, Translation3, Unit, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::SimError;
use crate::pose::Pose;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Joint {
    /// Rotation axis in the joint frame (unit length).
    pub axis: [f64; 3],
    /// Offset from the previous joint frame, applied before the rotation.
    pub origin: [f64; 3],
    /// `[low, high]` in radians.
    pub limits: [f64; 2],
}

impl Joint {
    pub fn new(axis: [f64; 3], origin: [f64; 3], limits: [f64; 2]) -> Self {
        Self { axis, origin, limits }
    }

    pub fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.limits[0], self.limits[1])
    }

    fn transform(&self, angle: f64) -> Isometry3<f64> {
        let [ox, oy, oz] = self.origin;
        let axis = Unit::new_normalize(Vector3::from(self.axis));
        Isometry3::from_parts(Translation3::new(ox, oy, oz), UnitQuaternion::from_axis_angle(&axis, angle))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KinematicChain {
    pub joints: Vec<Joint>,
    /// Joints driven by the controller, in command order.
    pub controlled_indices: Vec<usize>,
    /// Start configuration; empty means all zeros.
    #[serde(default)]
    pub home: Vec<f64>,
    /// Base frame in world coordinates.
    #[serde(default)]
    pub base: Pose,
    /// Flange-to-end-effector offset.
    #[serde(default)]
    pub tool: Pose,
}

impl KinematicChain {
    /// Seven-joint table-top arm; joints 1, 2, 6 and 7 are controlled.
    ///
    /// With all joints at zero the shoulder sits 0.4 m above the table, the
    /// arm reaches straight along +x and the flange points down at
    /// (0.6, 0, 0.32).
    pub fn default_arm() -> Self {
        use std::f64::consts::PI;
        let z = [0.0, 0.0, 1.0];
        let y = [0.0, 1.0, 0.0];
        let x = [1.0, 0.0, 0.0];
        Self {
            joints: vec![
                Joint::new(z, [0.0, 0.0, 0.4], [-PI, PI]),
                Joint::new(y, [0.0, 0.0, 0.0], [-0.6, 1.2]),
                Joint::new(z, [0.3, 0.0, 0.0], [-PI, PI]),
                Joint::new(y, [0.25, 0.0, 0.0], [-2.0, 2.0]),
                Joint::new(x, [0.0, 0.0, 0.0], [-PI, PI]),
                Joint::new(y, [0.05, 0.0, 0.0], [-1.5, 1.5]),
                Joint::new(z, [0.0, 0.0, -0.08], [-PI, PI]),
            ],
            controlled_indices: vec![0, 1, 5, 6],
            home: vec![0.0; 7],
            base: Pose::identity(),
            tool: Pose::identity(),
        }
    }

    pub fn dof(&self) -> usize {
        self.joints.len()
    }

    pub fn home_q(&self) -> Vec<f64> {
        if self.home.is_empty() {
            vec![0.0; self.dof()]
        } else {
            self.home.clone()
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidScene(m));
        if self.joints.is_empty() {
            return bad("chain has no joints".into());
        }
        for (i, j) in self.joints.iter().enumerate() {
            let n = Vector3::from(j.axis).norm();
            if !((n - 1.0).abs() < 1e-6) {
                return bad(format!("joint {i} axis is not unit length"));
            }
            if !j.origin.iter().all(|v| v.is_finite()) {
                return bad(format!("joint {i} origin is not finite"));
            }
            if !(j.limits[0] < j.limits[1]) {
                return bad(format!("joint {i} limits must satisfy low < high"));
            }
        }
        if self.controlled_indices.is_empty() {
            return bad("at least one joint must be controlled".into());
        }
        let mut seen = vec![false; self.dof()];
        for &c in &self.controlled_indices {
            if c >= self.dof() || std::mem::replace(&mut seen[c], true) {
                return bad(format!("controlled index {c} is out of range or repeated"));
            }
        }
        if !self.base.is_finite() || !self.tool.is_finite() {
            return bad("base/tool pose is not finite".into());
        }
        if !self.home.is_empty() {
            self.check_q(&self.home)?;
        }
        Ok(())
    }

    pub fn check_q(&self, q: &[f64]) -> Result<(), SimError> {
        if q.len() != self.dof() {
            return Err(SimError::JointCountMismatch {
                expected: self.dof(),
                got: q.len(),
            });
        }
        for (i, (j, &v)) in self.joints.iter().zip(q).enumerate() {
            if !(v >= j.limits[0] && v <= j.limits[1]) {
                return Err(SimError::JointLimitViolation {
                    joint: i,
                    value: v,
                    low: j.limits[0],
                    high: j.limits[1],
                });
            }
        }
        Ok(())
    }

    /// End-effector pose in world coordinates.
    pub fn forward_kinematics(&self, q: &[f64]) -> Result<Isometry3<f64>, SimError> {
        self.check_q(q)?;
        let mut t = self.base.to_isometry();
        for (j, &angle) in self.joints.iter().zip(q) {
            t *= j.transform(angle);
        }
        Ok(t * self.tool.to_isometry())
    }
}
