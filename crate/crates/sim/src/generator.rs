//! Seeded random table-top scenes with one reachable target sphere.

use nalgebra::{Point3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::camera::EyeInHandCamera;
use crate::chain::KinematicChain;
use crate::pose::Pose;
use crate::scene::{PromptTag, Scene, ScenePrimitive, Shape, TargetRef};
use crate::world::SimWorld;

const FRUIT: [(&str, &str, [u8; 3]); 6] = [
    ("apple", "red apple", [190, 30, 35]),
    ("orange", "ripe orange", [235, 130, 20]),
    ("lime", "green lime", [90, 180, 40]),
    ("peach", "soft peach", [240, 160, 120]),
    ("plum", "purple plum", [110, 40, 120]),
    ("lemon", "yellow lemon", [240, 220, 60]),
];

#[derive(Debug, Clone)]
pub struct GeneratedScene {
    pub scene: Scene,
    pub prompt: String,
    pub target: TargetRef,
}

/// Builds the table, a target sphere that the home camera sees at a random
/// pixel inside a 40 px margin, and one untagged-for-the-prompt distractor.
/// The home configuration of the controlled joints is jittered by ±0.05 rad.
pub fn random_scene(seed: u64) -> GeneratedScene {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let camera = EyeInHandCamera::default();
    let mut chain = KinematicChain::default_arm();
    let mut home = chain.home_q();
    for &i in &chain.controlled_indices {
        home[i] = chain.joints[i].clamp(home[i] + rng.random_range(-0.05..0.05));
    }
    chain.home = home;

    let table = ScenePrimitive::new(
        Shape::Box { extents: [1.6, 1.6, 0.04] },
        Pose::at(0.5, 0.0, -0.02),
        vec![PromptTag::object("table")],
    )
    .named("table")
    .colored([120, 110, 100]);
    let mut scene = Scene {
        camera,
        chain,
        primitives: vec![table],
    };
    let world = SimWorld::new(scene.clone()).expect("generated scene is valid");
    let cam_pose = world.camera_pose();
    let margin = 40.0;
    let (w, h) = (scene.camera.width as f64, scene.camera.height as f64);
    let drop_on_table = |rng: &mut ChaCha8Rng, height: f64| {
        let u = rng.random_range(margin..w - margin);
        let v = rng.random_range(margin..h - margin);
        let d = cam_pose.rotation * scene.camera.ray(u, v);
        let o = cam_pose.translation.vector;
        let t = (height - o.z) / d.z;
        Point3::from(o + d * t)
    };

    let (name, alias, color) = FRUIT[rng.random_range(0..FRUIT.len())];
    let radius = rng.random_range(0.02..0.035);
    let c = drop_on_table(&mut rng, radius);
    let target = ScenePrimitive::new(
        Shape::Sphere { radius },
        Pose::at(c.x, c.y, c.z),
        vec![PromptTag::object(name), PromptTag::object(alias), PromptTag::affordance("something to eat")],
    )
    .named(name)
    .colored(color);

    let side = 0.035;
    let mut d = drop_on_table(&mut rng, side / 2.0);
    for _ in 0..32 {
        if (Vector3::new(d.x - c.x, d.y - c.y, 0.0)).norm() >= 0.09 {
            break;
        }
        d = drop_on_table(&mut rng, side / 2.0);
    }
    let block = ScenePrimitive::new(
        Shape::Box { extents: [side; 3] },
        Pose::at(d.x, d.y, d.z).with_rpy(0.0, 0.0, rng.random_range(0.0..1.5)),
        vec![PromptTag::object("toy block"), PromptTag::object("blue cube")],
    )
    .named("block")
    .colored([50, 80, 200]);

    scene.primitives.push(target);
    scene.primitives.push(block);
    GeneratedScene {
        scene,
        prompt: name.to_string(),
        target: TargetRef { primitive: 1, part: None },
    }
}
