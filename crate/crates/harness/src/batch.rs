//! Task manifests and per-category success reports.
//!
//! A manifest is JSON lines, one task per line:
//! `{"name":"apple","scene":"scenes/fruit.json","prompt":"apple","kinds":["p2p"],"category":"Food"}`.
//! Blank lines and lines starting with `#` are skipped. Scene paths are
//! resolved relative to the manifest.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use servobench_core::geometry::ConstraintKind;
use servobench_sim::{ProviderSpec, Scene, SimWorld};

use crate::error::HarnessError;
use crate::session::{run_with_attempts, SessionConfig, SessionObserver};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TaskCategory {
    Food,
    MarkerPen,
    Utility,
    Custom,
}

impl TaskCategory {
    pub fn as_str(self) -> &'static str {
        match self {
            TaskCategory::Food => "Food",
            TaskCategory::MarkerPen => "MarkerPen",
            TaskCategory::Utility => "Utility",
            TaskCategory::Custom => "Custom",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub name: String,
    pub scene: PathBuf,
    pub prompt: String,
    pub kinds: Vec<ConstraintKind>,
    pub category: TaskCategory,
}

pub fn parse_manifest(text: &str) -> Result<Vec<ManifestEntry>, HarnessError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: String| HarnessError::ManifestParse { line: i + 1, message };
        let entry: ManifestEntry = serde_json::from_str(line).map_err(|e| err(e.to_string()))?;
        if entry.kinds.is_empty() {
            return Err(err("task lists no constraint kinds".into()));
        }
        if entry.prompt.trim().is_empty() {
            return Err(err("task has an empty prompt".into()));
        }
        out.push(entry);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub task: String,
    pub category: TaskCategory,
    pub attempts_used: u32,
    pub success: bool,
    pub outcome: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryRate {
    pub category: TaskCategory,
    pub tasks: usize,
    pub successes: usize,
    pub success_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchReport {
    pub categories: Vec<CategoryRate>,
    pub tasks: Vec<TaskRecord>,
}

impl BatchReport {
    pub fn from_records(tasks: Vec<TaskRecord>) -> Self {
        let mut cats: Vec<TaskCategory> = tasks.iter().map(|t| t.category).collect();
        cats.sort();
        cats.dedup();
        let categories = cats
            .into_iter()
            .map(|c| {
                let n = tasks.iter().filter(|t| t.category == c).count();
                let s = tasks.iter().filter(|t| t.category == c && t.success).count();
                CategoryRate {
                    category: c,
                    tasks: n,
                    successes: s,
                    success_rate: s as f64 / n as f64,
                }
            })
            .collect();
        Self { categories, tasks }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("category,tasks,successes,success_rate\n");
        for c in &self.categories {
            writeln!(s, "{},{},{},{:.4}", c.category.as_str(), c.tasks, c.successes, c.success_rate).unwrap();
        }
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Runs every task with up to `cfg.max_attempts` attempts each.
pub fn run_batch(
    manifest: &Path,
    provider: &ProviderSpec,
    cfg: &SessionConfig,
    mut progress: impl FnMut(&TaskRecord),
) -> Result<BatchReport, HarnessError> {
    let entries = parse_manifest(&std::fs::read_to_string(manifest)?)?;
    let base = manifest.parent().unwrap_or(Path::new("."));
    let mut records = Vec::with_capacity(entries.len());
    for entry in entries {
        let scene = Scene::load(base.join(&entry.scene))?;
        let mut world = SimWorld::new(scene)?;
        let p = provider.build();
        let report = run_with_attempts(&mut world, &entry.prompt, &entry.kinds, p.as_ref(), cfg, &mut () as &mut dyn SessionObserver);
        let rec = TaskRecord {
            task: entry.name,
            category: entry.category,
            attempts_used: report.attempts_used(),
            success: report.success,
            outcome: report.last().outcome.label().to_string(),
        };
        progress(&rec);
        records.push(rec);
    }
    Ok(BatchReport::from_records(records))
}
