//! Layered configuration: defaults < TOML file < `SERVOBENCH_*` env < flags.

use std::path::Path;

use serde::{Deserialize, Serialize};
use servobench_core::composer::LineEndpoints;
use servobench_core::geometry::LineToLineForm;
use servobench_sim::{CorruptionProfile, ProviderSpec};

use crate::error::HarnessError;
use crate::session::SessionConfig;

pub const ENV_PREFIX: &str = "SERVOBENCH_";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    /// `oracle`, `corrupt` or `remote:HOST:PORT`.
    pub provider: String,
    /// Seeds the corruption noise stream.
    pub seed: u64,
    pub bind: String,
    pub session: SessionConfig,
    pub corruption: CorruptionProfile,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            provider: "oracle".into(),
            seed: 0,
            bind: "127.0.0.1:8080".into(),
            session: SessionConfig::default(),
            corruption: CorruptionProfile::standard(),
        }
    }
}

/// Flat keys accepted from the environment (upper-cased, prefixed).
pub const KEYS: &[&str] = &[
    "provider",
    "seed",
    "bind",
    "max_steps",
    "perception_patience",
    "max_attempts",
    "grasp_radius",
    "throttle",
    "l2l_endpoints",
    "l2l_form",
    "lambda",
    "epsilon",
    "alpha",
    "mu",
    "max_joint_step",
    "convergence_tau",
    "convergence_patience",
    "divergence_window",
    "rate",
    "probe",
    "blur_sigma",
    "noise_sigma",
    "checkerboard_amplitude",
    "checkerboard_period",
];

impl Settings {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        toml::from_str(text).map_err(|e| HarnessError::Settings(e.to_string()))
    }

    /// Defaults, overlaid with `file` (if any) and then with matching
    /// variables from `env`.
    pub fn load(file: Option<&Path>, env: impl IntoIterator<Item = (String, String)>) -> Result<Self, HarnessError> {
        let mut s = match file {
            Some(p) => Self::from_toml(&std::fs::read_to_string(p)?)?,
            None => Self::default(),
        };
        let mut vars: Vec<(String, String)> = env
            .into_iter()
            .filter_map(|(k, v)| k.strip_prefix(ENV_PREFIX).map(|k| (k.to_ascii_lowercase(), v)))
            .filter(|(k, _)| KEYS.contains(&k.as_str()))
            .collect();
        vars.sort();
        for (k, v) in vars {
            s.set(&k, &v)?;
        }
        Ok(s)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), HarnessError> {
        fn p<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, HarnessError> {
            v.trim()
                .parse()
                .map_err(|_| HarnessError::Settings(format!("cannot parse `{v}` for {key}")))
        }
        let c = &mut self.session.controller;
        match key {
            "provider" => {
                value.parse::<ProviderSpec>().map_err(HarnessError::Settings)?;
                self.provider = value.trim().to_string();
            }
            "seed" => self.seed = p(key, value)?,
            "bind" => self.bind = value.trim().to_string(),
            "max_steps" => self.session.max_steps = p(key, value)?,
            "perception_patience" => self.session.perception_patience = p(key, value)?,
            "max_attempts" => self.session.max_attempts = p(key, value)?,
            "grasp_radius" => self.session.grasp_radius = p(key, value)?,
            "throttle" => self.session.throttle = p(key, value)?,
            "l2l_endpoints" => {
                self.session.compose.l2l_endpoints = match value.trim() {
                    "effector_line" => LineEndpoints::EffectorLine,
                    "projected_extremes" => LineEndpoints::ProjectedExtremes,
                    v => return Err(HarnessError::Settings(format!("unknown l2l_endpoints `{v}`"))),
                }
            }
            "l2l_form" => {
                self.session.compose.l2l_form = match value.trim() {
                    "sum" => LineToLineForm::Sum,
                    "stacked" => LineToLineForm::Stacked,
                    v => return Err(HarnessError::Settings(format!("unknown l2l_form `{v}`"))),
                }
            }
            "lambda" => c.lambda = p(key, value)?,
            "epsilon" => c.epsilon = p(key, value)?,
            "alpha" => c.alpha = p(key, value)?,
            "mu" => c.mu = p(key, value)?,
            "max_joint_step" => c.max_joint_step = p(key, value)?,
            "convergence_tau" => c.convergence_tau = p(key, value)?,
            "convergence_patience" => c.convergence_patience = p(key, value)?,
            "divergence_window" => c.divergence_window = p(key, value)?,
            "rate" => c.rate = p(key, value)?,
            "probe" => c.probe = p(key, value)?,
            "blur_sigma" => self.corruption.blur_sigma = p(key, value)?,
            "noise_sigma" => self.corruption.noise_sigma = p(key, value)?,
            "checkerboard_amplitude" => self.corruption.checkerboard_amplitude = p(key, value)?,
            "checkerboard_period" => self.corruption.checkerboard_period = p(key, value)?,
            other => return Err(HarnessError::Settings(format!("unknown setting `{other}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        self.session.controller.validate()?;
        self.provider_spec()?;
        if self.session.max_steps == 0 || self.session.perception_patience == 0 || self.session.max_attempts == 0 {
            return Err(HarnessError::Settings("max_steps, perception_patience and max_attempts must be >= 1".into()));
        }
        if !(self.session.grasp_radius > 0.0) {
            return Err(HarnessError::Settings("grasp_radius must be > 0".into()));
        }
        Ok(())
    }

    /// The configured provider, with the corruption profile and seed applied.
    pub fn provider_spec(&self) -> Result<ProviderSpec, HarnessError> {
        let spec: ProviderSpec = self.provider.parse().map_err(HarnessError::Settings)?;
        Ok(match spec {
            ProviderSpec::Corrupt(_) => ProviderSpec::Corrupt(CorruptionProfile {
                seed: self.seed,
                ..self.corruption.clone()
            }),
            other => other,
        })
    }
}
