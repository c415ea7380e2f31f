//! Scene description: camera, arm and prompt-tagged primitives.

use std::path::Path;

use nalgebra::{Isometry3, Point3};
use serde::{Deserialize, Serialize};

use crate::camera::EyeInHandCamera;
use crate::chain::KinematicChain;
use crate::error::SimError;
use crate::pose::Pose;
use crate::prompt::{match_strength, normalize, MatchStrength};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum Shape {
    Sphere { radius: f64 },
    /// Full side lengths along the local x, y, z axes.
    Box { extents: [f64; 3] },
    /// Axis along local z, centered on the pose origin.
    Cylinder { radius: f64, height: f64 },
}

impl Shape {
    fn is_valid(&self) -> bool {
        let pos = |v: f64| v.is_finite() && v > 0.0;
        match *self {
            Shape::Sphere { radius } => pos(radius),
            Shape::Box { extents } => extents.iter().all(|&e| pos(e)),
            Shape::Cylinder { radius, height } => pos(radius) && pos(height),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TagCategory {
    AffordanceEnriched,
    ObjectOriented,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PromptTag {
    pub text: String,
    pub category: TagCategory,
}

impl PromptTag {
    pub fn object(text: &str) -> Self {
        Self {
            text: text.into(),
            category: TagCategory::ObjectOriented,
        }
    }

    pub fn affordance(text: &str) -> Self {
        Self {
            text: text.into(),
            category: TagCategory::AffordanceEnriched,
        }
    }
}

/// Sub-shape of a primitive with its own tags (a mug handle, a pen cap).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartRegion {
    pub shape: Shape,
    /// Relative to the owning primitive.
    #[serde(default)]
    pub pose: Pose,
    pub prompt_tags: Vec<PromptTag>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub color: Option<[u8; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenePrimitive {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub shape: Shape,
    #[serde(default)]
    pub pose: Pose,
    pub prompt_tags: Vec<PromptTag>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub parts: Vec<PartRegion>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub color: Option<[u8; 3]>,
}

impl ScenePrimitive {
    pub fn new(shape: Shape, pose: Pose, tags: Vec<PromptTag>) -> Self {
        Self {
            name: None,
            shape,
            pose,
            prompt_tags: tags,
            parts: Vec::new(),
            color: None,
        }
    }

    pub fn named(mut self, name: &str) -> Self {
        self.name = Some(name.into());
        self
    }

    pub fn colored(mut self, rgb: [u8; 3]) -> Self {
        self.color = Some(rgb);
        self
    }

    pub fn with_part(mut self, part: PartRegion) -> Self {
        self.parts.push(part);
        self
    }
}

/// A matched primitive, or one of its parts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TargetRef {
    pub primitive: usize,
    pub part: Option<usize>,
}

pub const MAX_PARTS: usize = 254;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scene {
    pub camera: EyeInHandCamera,
    pub chain: KinematicChain,
    pub primitives: Vec<ScenePrimitive>,
}

impl Scene {
    pub fn from_json(text: &str) -> Result<Self, SimError> {
        let scene: Scene = serde_json::from_str(text)?;
        scene.validate()?;
        Ok(scene)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SimError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("scene serializes")
    }

    pub fn validate(&self) -> Result<(), SimError> {
        self.camera.validate()?;
        self.chain.validate()?;
        if self.primitives.len() >= 1 << 23 {
            return Err(SimError::InvalidScene("too many primitives".into()));
        }
        for (i, p) in self.primitives.iter().enumerate() {
            let what = p.name.clone().unwrap_or_else(|| format!("primitive {i}"));
            check_tags(&p.prompt_tags, &what)?;
            if !p.shape.is_valid() || !p.pose.is_finite() {
                return Err(SimError::InvalidScene(format!("{what}: shape or pose is invalid")));
            }
            if p.parts.len() > MAX_PARTS {
                return Err(SimError::InvalidScene(format!("{what}: too many parts")));
            }
            for (k, part) in p.parts.iter().enumerate() {
                check_tags(&part.prompt_tags, &format!("{what} part {k}"))?;
                if !part.shape.is_valid() || !part.pose.is_finite() {
                    return Err(SimError::InvalidScene(format!("{what} part {k}: shape or pose is invalid")));
                }
            }
        }
        Ok(())
    }

    /// Primitives and parts a prompt refers to. Exact tag matches win; whole-word
    /// matches are used only when nothing matches exactly.
    pub fn resolve_prompt(&self, prompt: &str) -> Vec<TargetRef> {
        let prompt = normalize(prompt);
        let strength = |tags: &[PromptTag]| {
            tags.iter()
                .map(|t| match_strength(&prompt, &normalize(&t.text)))
                .max()
                .unwrap_or(MatchStrength::None)
        };
        let mut hits = Vec::new();
        for (i, p) in self.primitives.iter().enumerate() {
            hits.push((strength(&p.prompt_tags), TargetRef { primitive: i, part: None }));
            for (k, part) in p.parts.iter().enumerate() {
                hits.push((strength(&part.prompt_tags), TargetRef { primitive: i, part: Some(k) }));
            }
        }
        let best = hits.iter().map(|h| h.0).max().unwrap_or(MatchStrength::None);
        if best == MatchStrength::None {
            return Vec::new();
        }
        hits.into_iter().filter(|h| h.0 == best).map(|h| h.1).collect()
    }

    /// World pose of a primitive or part.
    pub fn target_pose(&self, t: TargetRef) -> Isometry3<f64> {
        let p = &self.primitives[t.primitive];
        let base = p.pose.to_isometry();
        match t.part {
            Some(k) => base * p.parts[k].pose.to_isometry(),
            None => base,
        }
    }

    pub fn target_centroid(&self, t: TargetRef) -> Point3<f64> {
        self.target_pose(t) * Point3::origin()
    }
}

fn check_tags(tags: &[PromptTag], what: &str) -> Result<(), SimError> {
    if tags.is_empty() {
        return Err(SimError::InvalidScene(format!("{what} has no prompt tags")));
    }
    if tags.iter().any(|t| normalize(&t.text).is_empty()) {
        return Err(SimError::InvalidScene(format!("{what} has an empty tag")));
    }
    Ok(())
}
