//! Core algorithms for prompt-driven uncalibrated visual servoing.
//!
//! - [`geometry`]: homogeneous image points/lines and the four task functions.
//! - [`composer`]: probability map → candidates → principal axes → constraint.
//! - [`controller`]: Broyden-estimated visuo-motor Jacobian and servo steps.
//! - [`metrics`]: mask quality metrics and hybrid-loss terms.
//! - [`probmap`]: the probability map type and its PFM/PGM encodings.

pub mod composer;
pub mod controller;
pub mod geometry;
pub mod metrics;
pub mod probmap;

pub use composer::{
    compose_constraint, pca_analyze, threshold_candidates, CandidateSet, ComposeError,
    ComposeOptions, PrincipalDecomposition,
};
pub use controller::{
    broyden_update, compute_command, initialize_jacobian, servo_step, ControlError,
    ControllerConfig, JacobianEstimate, ServoState, ServoStatus, ServoTrace, TraceEntry,
};
pub use geometry::{
    evaluate_constraint, line_from_points, stack_residuals, ConstraintKind, GeometricConstraint,
    GeometryError, ImageLine, ImagePoint, LineToLineForm,
};
pub use metrics::{MetricError, MetricReport};
pub use probmap::{ProbMapError, ProbabilityMap};
