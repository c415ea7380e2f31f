//! One servo attempt: render → segment → compose → Broyden step, repeated
//! until the controller settles, gives up, or the operator aborts.

use std::thread;
use std::time::{Duration, Instant};

use nalgebra::{DVector, Point3};
use serde::{Deserialize, Serialize};
use servobench_core::composer::{compose_from_map, ComposeOptions};
use servobench_core::controller::InitError;
use servobench_core::geometry::{stack_residuals, ConstraintKind, GeometricConstraint};
use servobench_core::{initialize_jacobian, servo_step, ControllerConfig, JacobianEstimate, ServoState, ServoStatus, ServoTrace, TraceEntry};
use servobench_sim::{SegProvider, SimWorld};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SessionConfig {
    pub controller: ControllerConfig,
    pub max_steps: u64,
    /// Consecutive frames without a usable constraint before giving up.
    pub perception_patience: usize,
    pub max_attempts: u32,
    /// Meters between the target centroid and the gripper approach ray.
    pub grasp_radius: f64,
    pub compose: ComposeOptions,
    /// Sleep to `controller.rate` between steps.
    pub throttle: bool,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            controller: ControllerConfig::default(),
            max_steps: 500,
            perception_patience: 10,
            max_attempts: 3,
            grasp_radius: 0.03,
            compose: ComposeOptions::default(),
            throttle: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    Converged,
    Diverged,
    StepLimit,
    PerceptionTimeout(String),
    Aborted,
    Failed(String),
}

impl Outcome {
    pub fn label(&self) -> &'static str {
        match self {
            Outcome::Converged => "Converged",
            Outcome::Diverged => "Diverged",
            Outcome::StepLimit => "StepLimit",
            Outcome::PerceptionTimeout(_) => "PerceptionTimeout",
            Outcome::Aborted => "Aborted",
            Outcome::Failed(_) => "Failed",
        }
    }
}

/// Constraint geometry in pixel coordinates, for display.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlayConstraint {
    pub kind: ConstraintKind,
    pub points: Vec<[f64; 2]>,
    pub lines: Vec<[f64; 3]>,
}

impl OverlayConstraint {
    pub fn from_constraint(c: &GeometricConstraint) -> Self {
        Self {
            kind: c.kind,
            points: c
                .points
                .iter()
                .filter_map(|p| p.normalized().ok())
                .map(|p| [p.u, p.v])
                .collect(),
            lines: c
                .lines
                .iter()
                .filter_map(|l| l.unit_normalized().ok())
                .map(|l| [l.a, l.b, l.c])
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepEvent {
    pub attempt: u32,
    pub entry: TraceEntry,
    pub overlay: Vec<OverlayConstraint>,
}

/// Hooks into a running session. Every method has a no-op default.
pub trait SessionObserver {
    fn on_step(&mut self, _event: &StepEvent, _world: &SimWorld) {}
    fn on_attempt_start(&mut self, _attempt: u32) {}
    fn aborted(&self) -> bool {
        false
    }
}

impl SessionObserver for () {}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttemptReport {
    pub attempt: u32,
    pub outcome: Outcome,
    /// Converged and the target lies within the grasp radius of the approach ray.
    pub grasped: bool,
    pub final_e_norm: Option<f64>,
    pub steps: u64,
    #[serde(skip)]
    pub trace: ServoTrace,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionReport {
    pub attempts: Vec<AttemptReport>,
    pub success: bool,
}

impl SessionReport {
    pub fn attempts_used(&self) -> u32 {
        self.attempts.len() as u32
    }

    pub fn last(&self) -> &AttemptReport {
        self.attempts.last().expect("at least one attempt runs")
    }
}

type Observation = (DVector<f64>, Vec<GeometricConstraint>);

fn observe(world: &SimWorld, prompt: &str, kinds: &[ConstraintKind], provider: &dyn SegProvider, opts: ComposeOptions) -> Result<Observation, String> {
    let frame = world.render_frame();
    let map = provider.provide(&frame, prompt).map_err(|e| e.to_string())?;
    let (_, constraints) = compose_from_map(&map, kinds, opts).map_err(|e| e.to_string())?;
    let e = stack_residuals(&constraints).map_err(|e| e.to_string())?;
    Ok((DVector::from_vec(e), constraints))
}

/// Lateral distance from the prompt's target to the ray through the effector pixel.
pub fn grasp_offset(world: &SimWorld, prompt: &str) -> Option<f64> {
    let scene = world.scene();
    let targets = scene.resolve_prompt(prompt);
    if targets.is_empty() {
        return None;
    }
    let n = targets.len() as f64;
    let centroid = targets
        .iter()
        .fold(Point3::origin(), |acc, &t| acc + scene.target_centroid(t).coords / n);
    let cam = world.camera_pose();
    let f1 = servobench_core::composer::effector_point(scene.camera.width as f64, scene.camera.height as f64);
    let dir = (cam.rotation * scene.camera.ray(f1.u, f1.v)).normalize();
    let rel = centroid - Point3::from(cam.translation.vector);
    Some(rel.cross(&dir).norm())
}

fn pace(cfg: &SessionConfig, started: Instant, obs: &dyn SessionObserver) {
    if !cfg.throttle || cfg.controller.rate <= 0.0 {
        return;
    }
    let period = Duration::from_secs_f64(1.0 / cfg.controller.rate);
    while started.elapsed() < period && !obs.aborted() {
        thread::sleep((period - started.elapsed()).min(Duration::from_millis(20)));
    }
}

fn init_jacobian(world: &mut SimWorld, prompt: &str, kinds: &[ConstraintKind], provider: &dyn SegProvider, cfg: &SessionConfig) -> Result<JacobianEstimate, Outcome> {
    let q0 = world.controlled_q();
    let result = initialize_jacobian(&q0, cfg.controller.probe, |q| {
        world.set_controlled(q).map_err(|e| e.to_string())?;
        observe(world, prompt, kinds, provider, cfg.compose).map(|o| o.0)
    });
    world.set_controlled(&q0).expect("controlled vector length is fixed");
    result.map_err(|e| match e {
        InitError::Control(c) => Outcome::Failed(c.to_string()),
        InitError::Callback(m) => Outcome::Failed(format!("perception lost while probing the Jacobian: {m}")),
    })
}

/// Runs one attempt from the world's home pose.
pub fn run_session(
    world: &mut SimWorld,
    prompt: &str,
    kinds: &[ConstraintKind],
    provider: &dyn SegProvider,
    cfg: &SessionConfig,
    attempt: u32,
    obs: &mut dyn SessionObserver,
) -> AttemptReport {
    world.reset();
    let finish = |outcome: Outcome, state: Option<ServoState>, world: &SimWorld| {
        let (trace, final_e_norm, steps) = match state {
            Some(s) => (s.history.clone(), s.history.last().map(|e| e.e_norm), s.step_index),
            None => (ServoTrace::default(), None, 0),
        };
        let grasped = outcome == Outcome::Converged
            && grasp_offset(world, prompt).is_some_and(|d| d <= cfg.grasp_radius);
        AttemptReport {
            attempt,
            outcome,
            grasped,
            final_e_norm,
            steps,
            trace,
        }
    };
    if kinds.is_empty() {
        return finish(Outcome::Failed("no constraint kinds given".into()), None, world);
    }

    // Wait for a first usable observation before probing.
    let mut misses = 0;
    loop {
        if obs.aborted() {
            return finish(Outcome::Aborted, None, world);
        }
        let started = Instant::now();
        match observe(world, prompt, kinds, provider, cfg.compose) {
            Ok(_) => break,
            Err(msg) => {
                misses += 1;
                if misses >= cfg.perception_patience {
                    return finish(Outcome::PerceptionTimeout(msg), None, world);
                }
            }
        }
        pace(cfg, started, obs);
    }

    let jacobian = match init_jacobian(world, prompt, kinds, provider, cfg) {
        Ok(j) => j,
        Err(o) => return finish(o, None, world),
    };
    let mut state = ServoState::new(world.controlled_q(), jacobian);
    let mut reinitialized = false;
    let mut misses = 0;
    loop {
        if obs.aborted() {
            state.abort();
            return finish(Outcome::Aborted, Some(state), world);
        }
        if state.step_index >= cfg.max_steps {
            return finish(Outcome::StepLimit, Some(state), world);
        }
        let started = Instant::now();
        let (e, constraints) = match observe(world, prompt, kinds, provider, cfg.compose) {
            Ok(o) => {
                misses = 0;
                o
            }
            Err(msg) => {
                // Hold pose; the Broyden update waits for the next good frame.
                misses += 1;
                if misses >= cfg.perception_patience {
                    return finish(Outcome::PerceptionTimeout(msg), Some(state), world);
                }
                pace(cfg, started, obs);
                continue;
            }
        };
        state = match servo_step(state, &e, &cfg.controller) {
            Ok(s) => s,
            Err(err) => return finish(Outcome::Failed(err.to_string()), None, world),
        };
        let dq = state.last_command.clone().expect("servo_step sets a command");
        if let Err(err) = world.apply_joint_command(&dq) {
            return finish(Outcome::Failed(err.to_string()), Some(state), world);
        }
        state.sync_applied(world.controlled_q());
        let event = StepEvent {
            attempt,
            entry: state.history.last().expect("step appended").clone(),
            overlay: constraints.iter().map(OverlayConstraint::from_constraint).collect(),
        };
        obs.on_step(&event, world);
        match state.status {
            ServoStatus::Converged => return finish(Outcome::Converged, Some(state), world),
            ServoStatus::Diverged if !reinitialized => {
                reinitialized = true;
                match init_jacobian(world, prompt, kinds, provider, cfg) {
                    Ok(j) => state.reinitialize(j),
                    Err(_) => return finish(Outcome::Diverged, Some(state), world),
                }
            }
            ServoStatus::Diverged => return finish(Outcome::Diverged, Some(state), world),
            _ => {}
        }
        pace(cfg, started, obs);
    }
}

/// Up to `cfg.max_attempts` attempts, stopping at the first grasp.
pub fn run_with_attempts(
    world: &mut SimWorld,
    prompt: &str,
    kinds: &[ConstraintKind],
    provider: &dyn SegProvider,
    cfg: &SessionConfig,
    obs: &mut dyn SessionObserver,
) -> SessionReport {
    let mut attempts = Vec::new();
    for attempt in 1..=cfg.max_attempts.max(1) {
        obs.on_attempt_start(attempt);
        let r = run_session(world, prompt, kinds, provider, cfg, attempt, obs);
        let stop = r.grasped || r.outcome == Outcome::Aborted;
        attempts.push(r);
        if stop {
            break;
        }
    }
    let success = attempts.last().is_some_and(|a| a.grasped);
    SessionReport { attempts, success }
}
