//! Uncalibrated servo control with a Broyden-estimated visuo-motor Jacobian.
//!
//! The Jacobian `J` (residual units per radian) starts from orthogonal
//! finite-difference probes and is corrected after every move with the
//! weighted rank-one update
//!
//! ```text
//! J' = J + λ (Δe − J Δq) Δqᵀ / (ΔqᵀΔq + ε)
//! ```
//!
//! Joint steps come from damped least squares on the current residual,
//! `Δq = −α (JᵀJ + μI)⁻¹ Jᵀ e`, clamped per joint.

use std::fmt;
use std::io::{self, Write};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ControlError {
    #[error("joint {0} has no visible effect on the residual (column norm {1:e})")]
    SingularInitialization(usize, f64),
    #[error("joint step is zero and ε = 0; update undefined")]
    ZeroStep,
    #[error("damped normal matrix is not invertible")]
    NumericalFailure,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("servo step requested in status {0}")]
    InvalidStatus(ServoStatus),
    #[error("invalid controller configuration: {0}")]
    InvalidConfig(String),
}

/// Error from [`initialize_jacobian`]: either the probe itself or the residual callback failed.
#[derive(Debug, Error)]
pub enum InitError<E> {
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error("residual callback failed: {0}")]
    Callback(E),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerConfig {
    /// Broyden weight λ ∈ (0, 1].
    pub lambda: f64,
    /// Denominator regularizer ε ≥ 0 (rad²).
    pub epsilon: f64,
    /// Step gain α ∈ (0, 1].
    pub alpha: f64,
    /// Least-squares damping μ ≥ 0.
    pub mu: f64,
    /// Per-joint step clamp (rad).
    pub max_joint_step: f64,
    /// Residual norm below which a step counts toward convergence.
    pub convergence_tau: f64,
    pub convergence_patience: usize,
    pub divergence_window: usize,
    /// Command rate (Hz). Zero runs unthrottled.
    pub rate: f64,
    /// Finite-difference probe for Jacobian initialization (rad).
    pub probe: f64,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            lambda: 0.05,
            epsilon: 1e-9,
            alpha: 0.1,
            mu: 1e-3,
            max_joint_step: 0.1,
            convergence_tau: 3.0,
            convergence_patience: 3,
            divergence_window: 10,
            rate: 1.0,
            probe: 0.02,
        }
    }
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<(), ControlError> {
        let bad = |m: &str| Err(ControlError::InvalidConfig(m.to_string()));
        if !(self.lambda > 0.0 && self.lambda <= 1.0) {
            return bad("lambda must be in (0, 1]");
        }
        if !(self.epsilon >= 0.0) {
            return bad("epsilon must be >= 0");
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return bad("alpha must be in (0, 1]");
        }
        if !(self.mu >= 0.0) {
            return bad("mu must be >= 0");
        }
        if !(self.max_joint_step > 0.0) {
            return bad("max_joint_step must be > 0");
        }
        if !(self.convergence_tau > 0.0) {
            return bad("convergence_tau must be > 0");
        }
        if self.convergence_patience == 0 || self.divergence_window == 0 {
            return bad("patience and divergence window must be >= 1");
        }
        if !(self.rate >= 0.0) {
            return bad("rate must be >= 0");
        }
        if !(self.probe > 0.0) {
            return bad("probe must be > 0");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JacobianEstimate {
    matrix: DMatrix<f64>,
}

impl JacobianEstimate {
    pub fn new(matrix: DMatrix<f64>) -> Self {
        Self { matrix }
    }

    pub fn zeros(m: usize, n: usize) -> Self {
        Self::new(DMatrix::zeros(m, n))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Residual dimension.
    pub fn m(&self) -> usize {
        self.matrix.nrows()
    }

    /// Controlled joint count.
    pub fn n(&self) -> usize {
        self.matrix.ncols()
    }

    /// Ratio of largest to smallest singular value (∞ when rank-deficient).
    pub fn condition(&self) -> f64 {
        let sv = self.matrix.clone().svd(false, false).singular_values;
        let max = sv.max();
        let min = sv.min();
        if min <= 0.0 { f64::INFINITY } else { max / min }
    }
}

/// Column `j` is `(e(q0 + δ·1_j) − e(q0)) / δ`. The callback is invoked a final
/// time at `q0` so the robot ends where it started.
pub fn initialize_jacobian<E>(
    q0: &DVector<f64>,
    probe: f64,
    mut residual_at: impl FnMut(&DVector<f64>) -> Result<DVector<f64>, E>,
) -> Result<JacobianEstimate, InitError<E>> {
    if !(probe > 0.0) {
        return Err(ControlError::InvalidConfig("probe must be > 0".into()).into());
    }
    let e0 = residual_at(q0).map_err(InitError::Callback)?;
    let n = q0.len();
    let mut j = DMatrix::zeros(e0.len(), n);
    for col in 0..n {
        let mut q = q0.clone();
        q[col] += probe;
        let e = residual_at(&q).map_err(InitError::Callback)?;
        if e.len() != e0.len() {
            return Err(ControlError::DimensionMismatch {
                expected: e0.len(),
                got: e.len(),
            }
            .into());
        }
        j.set_column(col, &((e - &e0) / probe));
    }
    residual_at(q0).map_err(InitError::Callback)?;
    for col in 0..n {
        let norm = j.column(col).norm();
        if norm < 1e-12 {
            return Err(ControlError::SingularInitialization(col, norm).into());
        }
    }
    Ok(JacobianEstimate::new(j))
}

/// Weighted rank-one Broyden correction. `observed` is the residual change seen
/// after executing `dq`; with λ = 1 and ε = 0 the result satisfies `J'·dq = observed`.
pub fn broyden_update(
    j: &JacobianEstimate,
    observed: &DVector<f64>,
    dq: &DVector<f64>,
    cfg: &ControllerConfig,
) -> Result<JacobianEstimate, ControlError> {
    if observed.len() != j.m() {
        return Err(ControlError::DimensionMismatch {
            expected: j.m(),
            got: observed.len(),
        });
    }
    if dq.len() != j.n() {
        return Err(ControlError::DimensionMismatch {
            expected: j.n(),
            got: dq.len(),
        });
    }
    let dq2 = dq.dot(dq);
    if cfg.epsilon == 0.0 && dq2.sqrt() < 1e-12 {
        return Err(ControlError::ZeroStep);
    }
    let innovation = observed - &j.matrix * dq;
    let scale = cfg.lambda / (dq2 + cfg.epsilon);
    Ok(JacobianEstimate::new(&j.matrix + innovation * dq.transpose() * scale))
}

/// Damped least-squares step toward zero residual, clamped to `±max_joint_step`.
pub fn compute_command(
    j: &JacobianEstimate,
    e: &DVector<f64>,
    cfg: &ControllerConfig,
) -> Result<DVector<f64>, ControlError> {
    if e.len() != j.m() {
        return Err(ControlError::DimensionMismatch {
            expected: j.m(),
            got: e.len(),
        });
    }
    if j.matrix.iter().any(|v| !v.is_finite()) {
        return Err(ControlError::NumericalFailure);
    }
    let jt = j.matrix.transpose();
    let mut normal = &jt * &j.matrix;
    for i in 0..j.n() {
        normal[(i, i)] += cfg.mu;
    }
    let sv = normal.clone().svd(false, false).singular_values;
    if !(sv.min() > sv.max() * 1e-14) {
        return Err(ControlError::NumericalFailure);
    }
    let chol = normal.cholesky().ok_or(ControlError::NumericalFailure)?;
    let mut dq = chol.solve(&(jt * e)) * -cfg.alpha;
    if dq.iter().any(|v| !v.is_finite()) {
        return Err(ControlError::NumericalFailure);
    }
    for v in dq.iter_mut() {
        *v = v.clamp(-cfg.max_joint_step, cfg.max_joint_step) + 0.0;
    }
    Ok(dq)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ServoStatus {
    Initializing,
    Running,
    Converged,
    Diverged,
    Aborted,
}

impl ServoStatus {
    pub fn is_terminal(self) -> bool {
        matches!(self, ServoStatus::Converged | ServoStatus::Diverged | ServoStatus::Aborted)
    }
}

impl fmt::Display for ServoStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// One servo step. Serializes to the fixed trace line layout
/// `{"step","q","e","e_norm","status"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub step: u64,
    pub q: Vec<f64>,
    pub e: Vec<f64>,
    pub e_norm: f64,
    pub status: ServoStatus,
    #[serde(skip)]
    pub jacobian_condition: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ServoTrace {
    pub entries: Vec<TraceEntry>,
}

impl ServoTrace {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn last(&self) -> Option<&TraceEntry> {
        self.entries.last()
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> io::Result<()> {
        for entry in &self.entries {
            serde_json::to_writer(&mut w, entry)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = Vec::new();
        self.write_jsonl(&mut out).expect("in-memory write");
        String::from_utf8(out).expect("serde_json emits UTF-8")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ServoState {
    pub q: DVector<f64>,
    /// Residual observed at the most recent step (empty before the first).
    pub e: DVector<f64>,
    pub jacobian: JacobianEstimate,
    pub step_index: u64,
    pub status: ServoStatus,
    pub history: ServoTrace,
    /// Joint step executed after the last observation.
    pub last_dq: Option<DVector<f64>>,
    pub last_command: Option<DVector<f64>>,
    initial_norm: Option<f64>,
    below_tau: usize,
    rising: usize,
}

impl ServoState {
    pub fn new(q: DVector<f64>, jacobian: JacobianEstimate) -> Self {
        Self {
            q,
            e: DVector::zeros(0),
            jacobian,
            step_index: 0,
            status: ServoStatus::Initializing,
            history: ServoTrace::default(),
            last_dq: None,
            last_command: None,
            initial_norm: None,
            below_tau: 0,
            rising: 0,
        }
    }

    /// Records the joint vector the robot actually reached after the last
    /// command (which may differ from the request when joint limits clamp).
    pub fn sync_applied(&mut self, q_actual: DVector<f64>) {
        if let Some(prev) = self.last_dq.as_ref().map(|dq| &self.q - dq) {
            self.last_dq = Some(&q_actual - prev);
        }
        self.q = q_actual;
    }

    /// Swaps in a fresh Jacobian and restarts the divergence bookkeeping.
    pub fn reinitialize(&mut self, jacobian: JacobianEstimate) {
        self.jacobian = jacobian;
        self.status = ServoStatus::Running;
        self.last_dq = None;
        self.initial_norm = None;
        self.rising = 0;
        self.below_tau = 0;
    }

    pub fn abort(&mut self) {
        if !self.status.is_terminal() {
            self.status = ServoStatus::Aborted;
        }
    }

    pub fn e_norm(&self) -> f64 {
        self.e.norm()
    }
}

/// Broyden-update with the residual change since the previous step, compute
/// and apply `Δq`, append the trace entry, then re-evaluate convergence.
pub fn servo_step(
    mut state: ServoState,
    fresh: &DVector<f64>,
    cfg: &ControllerConfig,
) -> Result<ServoState, ControlError> {
    if !matches!(state.status, ServoStatus::Initializing | ServoStatus::Running) {
        return Err(ControlError::InvalidStatus(state.status));
    }
    if fresh.len() != state.jacobian.m() {
        return Err(ControlError::DimensionMismatch {
            expected: state.jacobian.m(),
            got: fresh.len(),
        });
    }
    if let Some(dq) = state.last_dq.take() {
        if state.e.len() == fresh.len() {
            let observed = fresh - &state.e;
            match broyden_update(&state.jacobian, &observed, &dq, cfg) {
                Ok(j) => state.jacobian = j,
                Err(ControlError::ZeroStep) => {}
                Err(err) => return Err(err),
            }
        }
    }

    let dq = compute_command(&state.jacobian, fresh, cfg)?;
    let q_measured = state.q.clone();
    state.q += &dq;
    state.last_dq = Some(dq.clone());
    state.last_command = Some(dq);
    state.step_index += 1;

    let norm = fresh.norm();
    let prev_norm = (state.e.len() == fresh.len()).then(|| state.e.norm());
    state.e = fresh.clone();
    state.history.entries.push(TraceEntry {
        step: state.step_index,
        q: q_measured.iter().copied().collect(),
        e: fresh.iter().copied().collect(),
        e_norm: norm,
        status: ServoStatus::Running,
        jacobian_condition: state.jacobian.condition(),
    });

    let initial = *state.initial_norm.get_or_insert(norm);
    state.below_tau = if norm < cfg.convergence_tau { state.below_tau + 1 } else { 0 };
    state.rising = match prev_norm {
        Some(p) if norm > p => state.rising + 1,
        _ => 0,
    };
    state.status = if state.below_tau >= cfg.convergence_patience {
        ServoStatus::Converged
    } else if state.rising >= cfg.divergence_window || norm > 4.0 * initial {
        ServoStatus::Diverged
    } else {
        ServoStatus::Running
    };
    if let Some(last) = state.history.entries.last_mut() {
        last.status = state.status;
    }
    Ok(state)
}
