//! Kinematic world state: a scene plus the arm's joint vector.

use std::sync::Arc;

use nalgebra::{DVector, Isometry3};
use servobench_core::ProbabilityMap;

use crate::error::SimError;
use crate::image::RgbImage;
use crate::raster::{self, decode_label, Label};
use crate::scene::{Scene, TargetRef};

/// One rendered view with its per-pixel surface labels.
#[derive(Debug, Clone)]
pub struct Frame {
    pub image: RgbImage,
    pub labels: Vec<Label>,
    pub camera_pose: Isometry3<f64>,
    pub scene: Arc<Scene>,
}

impl Frame {
    pub fn width(&self) -> usize {
        self.image.width()
    }

    pub fn height(&self) -> usize {
        self.image.height()
    }

    /// Binary mask of the pixels whose nearest surface the prompt refers to.
    pub fn oracle_mask(&self, prompt: &str) -> ProbabilityMap {
        let targets = self.scene.resolve_prompt(prompt);
        let hit = |l: Label| match decode_label(l) {
            None => false,
            Some(t) => targets
                .iter()
                .any(|m| m.primitive == t.primitive && (m.part.is_none() || m.part == t.part)),
        };
        let scores = self.labels.iter().map(|&l| if hit(l) { 1.0 } else { 0.0 }).collect();
        ProbabilityMap::new(self.width(), self.height(), scores).expect("binary scores of frame size")
    }

    pub fn label_at(&self, x: usize, y: usize) -> Option<TargetRef> {
        decode_label(self.labels[y * self.width() + x])
    }
}

/// Result of applying a joint command.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ApplyOutcome {
    /// Some joint hit a limit and was clamped.
    pub clamped: bool,
}

#[derive(Debug, Clone)]
pub struct SimWorld {
    scene: Arc<Scene>,
    q: Vec<f64>,
    steps: u64,
    clamped: bool,
}

impl SimWorld {
    pub fn new(scene: Scene) -> Result<Self, SimError> {
        scene.validate()?;
        let q = scene.chain.home_q();
        Ok(Self {
            scene: Arc::new(scene),
            q,
            steps: 0,
            clamped: false,
        })
    }

    pub fn scene(&self) -> &Arc<Scene> {
        &self.scene
    }

    /// Full joint vector.
    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn step_count(&self) -> u64 {
        self.steps
    }

    /// Whether the most recent command was clamped at a joint limit.
    pub fn last_clamped(&self) -> bool {
        self.clamped
    }

    pub fn controlled_q(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.scene.chain.controlled_indices.len(),
            self.scene.chain.controlled_indices.iter().map(|&i| self.q[i]),
        )
    }

    pub fn set_q(&mut self, q: &[f64]) -> Result<(), SimError> {
        self.scene.chain.check_q(q)?;
        self.q = q.to_vec();
        Ok(())
    }

    /// Moves the controlled joints to `qc`, clamping at limits.
    pub fn set_controlled(&mut self, qc: &DVector<f64>) -> Result<ApplyOutcome, SimError> {
        let idx = &self.scene.chain.controlled_indices;
        if qc.len() != idx.len() {
            return Err(SimError::JointCountMismatch {
                expected: idx.len(),
                got: qc.len(),
            });
        }
        let mut clamped = false;
        for (&i, &v) in idx.iter().zip(qc.iter()) {
            let c = self.scene.chain.joints[i].clamp(v);
            clamped |= c != v;
            self.q[i] = c;
        }
        Ok(ApplyOutcome { clamped })
    }

    /// `q ← q + Δq` over the controlled joints; counts one step.
    pub fn apply_joint_command(&mut self, dq: &DVector<f64>) -> Result<ApplyOutcome, SimError> {
        let current = self.controlled_q();
        if dq.len() != current.len() {
            return Err(SimError::JointCountMismatch {
                expected: current.len(),
                got: dq.len(),
            });
        }
        let target = current + dq;
        let out = self.set_controlled(&target)?;
        self.steps += 1;
        self.clamped = out.clamped;
        Ok(out)
    }

    pub fn reset(&mut self) {
        self.q = self.scene.chain.home_q();
        self.steps = 0;
        self.clamped = false;
    }

    pub fn effector_pose(&self) -> Isometry3<f64> {
        self.scene
            .chain
            .forward_kinematics(&self.q)
            .expect("world keeps q within limits")
    }

    pub fn camera_pose(&self) -> Isometry3<f64> {
        self.scene.camera.world_pose(&self.effector_pose())
    }

    pub fn render_frame(&self) -> Frame {
        let camera_pose = self.camera_pose();
        let r = raster::render(&self.scene, &camera_pose);
        Frame {
            image: r.image,
            labels: r.labels,
            camera_pose,
            scene: Arc::clone(&self.scene),
        }
    }

    pub fn render_view(&self) -> RgbImage {
        self.render_frame().image
    }

    pub fn render_oracle_mask(&self, prompt: &str) -> ProbabilityMap {
        self.render_frame().oracle_mask(prompt)
    }
}
