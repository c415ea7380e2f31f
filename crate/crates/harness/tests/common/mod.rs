#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};

use servobench::SessionConfig;
use servobench_sim::{random_scene, GeneratedScene, Pose, Scene};

/// Fresh directory under the system temp dir, unique per call.
pub fn scratch_dir(tag: &str) -> PathBuf {
    static N: AtomicUsize = AtomicUsize::new(0);
    let d = std::env::temp_dir().join(format!("servobench-{tag}-{}-{}", std::process::id(), N.fetch_add(1, Ordering::Relaxed)));
    std::fs::create_dir_all(&d).unwrap();
    d
}

pub fn fast_config() -> SessionConfig {
    let mut cfg = SessionConfig::default();
    cfg.controller.rate = 0.0;
    cfg
}

pub fn sphere_scene(seed: u64) -> GeneratedScene {
    random_scene(seed)
}

/// The generated target moved far outside the camera's view.
pub fn unreachable_scene(seed: u64) -> GeneratedScene {
    let mut g = random_scene(seed);
    g.scene.primitives[g.target.primitive].pose = Pose::at(-4.0, 3.0, 0.03);
    g
}

pub fn write_scene(dir: &std::path::Path, name: &str, scene: &Scene) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, scene.to_json_pretty()).unwrap();
    p
}
