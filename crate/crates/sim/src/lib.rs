//! Eye-in-hand arm simulator and segmentation providers.
//!
//! A [`Scene`] holds the camera, the kinematic chain and prompt-tagged
//! primitives. [`SimWorld`] adds the joint state, renders views and cuts
//! ground-truth masks from the renderer's label buffer. Providers in
//! [`provider`] turn a rendered frame and a prompt into a probability map.

pub mod camera;
pub mod chain;
pub mod error;
pub mod generator;
pub mod image;
pub mod pose;
pub mod prompt;
pub mod provider;
pub mod raster;
pub mod scene;
pub mod world;

pub use camera::{EyeInHandCamera, Intrinsics};
pub use chain::{Joint, KinematicChain};
pub use error::SimError;
pub use generator::{random_scene, GeneratedScene};
pub use image::RgbImage;
pub use pose::Pose;
pub use provider::{CorruptProvider, CorruptionProfile, OracleProvider, ProviderError, ProviderSpec, RemoteProvider, SegProvider};
pub use scene::{PartRegion, PromptTag, Scene, ScenePrimitive, Shape, TagCategory, TargetRef};
pub use world::{ApplyOutcome, Frame, SimWorld};
