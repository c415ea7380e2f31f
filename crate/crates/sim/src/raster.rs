//! Deterministic z-buffered renderer.
//!
//! Spheres are ray-cast analytically per pixel. Boxes and cylinders are
//! tessellated (cylinders with 64 segments), clipped against the near plane
//! and scan-converted with perspective-correct depth. Every pixel also gets a
//! label naming the primitive/part whose surface is nearest, which is what
//! ground-truth masks are cut from.

use std::f64::consts::TAU;

use nalgebra::{Isometry3, Point3, Vector3};

use crate::camera::EyeInHandCamera;
use crate::image::RgbImage;
use crate::scene::{Scene, Shape, TargetRef};

pub const CYLINDER_SEGMENTS: usize = 64;
pub const NEAR_PLANE: f64 = 1e-3;
pub const BACKGROUND: [u8; 3] = [24, 24, 32];

const PALETTE: [[u8; 3]; 6] = [
    [200, 60, 50],
    [60, 150, 70],
    [60, 90, 190],
    [210, 170, 60],
    [150, 80, 170],
    [70, 170, 180],
];

/// Per-pixel surface owner. `0` is background; otherwise the upper bits hold
/// `primitive + 1` and the low byte holds `0` for the body or `part + 1`.
pub type Label = u32;

pub fn encode_label(t: TargetRef) -> Label {
    (((t.primitive as u32) + 1) << 8) | t.part.map_or(0, |k| k as u32 + 1)
}

pub fn decode_label(l: Label) -> Option<TargetRef> {
    if l == 0 {
        return None;
    }
    let part = (l & 0xff) as usize;
    Some(TargetRef {
        primitive: (l >> 8) as usize - 1,
        part: part.checked_sub(1),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rendered {
    pub image: RgbImage,
    pub labels: Vec<Label>,
    /// Camera-frame z of the nearest surface; infinite on background.
    pub depth: Vec<f64>,
}

struct Target<'a> {
    cam: &'a EyeInHandCamera,
    world_to_cam: Isometry3<f64>,
    image: RgbImage,
    labels: Vec<Label>,
    depth: Vec<f64>,
}

/// Renders `scene` from a camera at `camera_pose` (camera → world).
pub fn render(scene: &Scene, camera_pose: &Isometry3<f64>) -> Rendered {
    let cam = &scene.camera;
    let mut t = Target {
        cam,
        world_to_cam: camera_pose.inverse(),
        image: RgbImage::new(cam.width, cam.height, BACKGROUND),
        labels: vec![0; cam.width * cam.height],
        depth: vec![f64::INFINITY; cam.width * cam.height],
    };
    for (i, p) in scene.primitives.iter().enumerate() {
        let base = p.pose.to_isometry();
        let color = p.color.unwrap_or(PALETTE[i % PALETTE.len()]);
        let body = TargetRef { primitive: i, part: None };
        t.draw(&p.shape, &base, encode_label(body), color);
        for (k, part) in p.parts.iter().enumerate() {
            let pc = part.color.unwrap_or([color[0] / 2 + 64, color[1] / 2 + 64, color[2] / 2 + 64]);
            let label = encode_label(TargetRef { primitive: i, part: Some(k) });
            t.draw(&part.shape, &(base * part.pose.to_isometry()), label, pc);
        }
    }
    Rendered {
        image: t.image,
        labels: t.labels,
        depth: t.depth,
    }
}

fn shade(color: [u8; 3], normal_cam: &Vector3<f64>) -> [u8; 3] {
    let light = Vector3::new(-0.3, -0.5, -1.0).normalize();
    let k = 0.45 + 0.55 * normal_cam.dot(&light).abs();
    color.map(|c| (c as f64 * k).round().clamp(0.0, 255.0) as u8)
}

impl Target<'_> {
    fn draw(&mut self, shape: &Shape, pose: &Isometry3<f64>, label: Label, color: [u8; 3]) {
        let to_cam = self.world_to_cam * pose;
        match *shape {
            Shape::Sphere { radius } => self.sphere(&(to_cam * Point3::origin()), radius, label, color),
            Shape::Box { extents } => {
                let [hx, hy, hz] = extents.map(|e| e / 2.0);
                let c: Vec<Point3<f64>> = (0..8)
                    .map(|i| {
                        let sx = if i & 1 == 0 { -hx } else { hx };
                        let sy = if i & 2 == 0 { -hy } else { hy };
                        let sz = if i & 4 == 0 { -hz } else { hz };
                        to_cam * Point3::new(sx, sy, sz)
                    })
                    .collect();
                const FACES: [[usize; 4]; 6] = [
                    [0, 2, 3, 1],
                    [4, 5, 7, 6],
                    [0, 1, 5, 4],
                    [2, 6, 7, 3],
                    [0, 4, 6, 2],
                    [1, 3, 7, 5],
                ];
                for f in FACES {
                    self.triangle([c[f[0]], c[f[1]], c[f[2]]], label, color);
                    self.triangle([c[f[0]], c[f[2]], c[f[3]]], label, color);
                }
            }
            Shape::Cylinder { radius, height } => {
                let h = height / 2.0;
                let rim = |k: usize, z: f64| {
                    let a = TAU * k as f64 / CYLINDER_SEGMENTS as f64;
                    to_cam * Point3::new(radius * a.cos(), radius * a.sin(), z)
                };
                let top_c = to_cam * Point3::new(0.0, 0.0, h);
                let bot_c = to_cam * Point3::new(0.0, 0.0, -h);
                for k in 0..CYLINDER_SEGMENTS {
                    let (b0, b1) = (rim(k, -h), rim(k + 1, -h));
                    let (t0, t1) = (rim(k, h), rim(k + 1, h));
                    self.triangle([b0, b1, t1], label, color);
                    self.triangle([b0, t1, t0], label, color);
                    self.triangle([top_c, t0, t1], label, color);
                    self.triangle([bot_c, b1, b0], label, color);
                }
            }
        }
    }

    fn write(&mut self, x: usize, y: usize, z: f64, label: Label, rgb: [u8; 3]) {
        let i = y * self.cam.width + x;
        if z < self.depth[i] {
            self.depth[i] = z;
            self.labels[i] = label;
            self.image.set(x, y, rgb);
        }
    }

    fn sphere(&mut self, c: &Point3<f64>, r: f64, label: Label, color: [u8; 3]) {
        let (w, h) = (self.cam.width, self.cam.height);
        if c.z + r <= NEAR_PLANE {
            return;
        }
        // The projected bounding cube encloses the silhouette whenever the
        // cube lies entirely in front of the camera.
        let (x0, x1, y0, y1) = if c.z - r > NEAR_PLANE {
            let mut b = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
            for i in 0..8 {
                let p = Point3::new(
                    c.x + if i & 1 == 0 { -r } else { r },
                    c.y + if i & 2 == 0 { -r } else { r },
                    c.z + if i & 4 == 0 { -r } else { r },
                );
                let (u, v) = self.cam.project(&p).expect("in front of camera");
                b = (b.0.min(u), b.1.max(u), b.2.min(v), b.3.max(v));
            }
            if b.1 < 0.0 || b.3 < 0.0 || b.0 > (w - 1) as f64 || b.2 > (h - 1) as f64 {
                return;
            }
            (
                b.0.floor().max(0.0) as usize,
                b.1.ceil().min((w - 1) as f64) as usize,
                b.2.floor().max(0.0) as usize,
                b.3.ceil().min((h - 1) as f64) as usize,
            )
        } else {
            (0, w - 1, 0, h - 1)
        };
        let cv = c.coords;
        let cc = cv.dot(&cv) - r * r;
        for y in y0..=y1 {
            for x in x0..=x1 {
                let d = self.cam.ray(x as f64, y as f64);
                let a = d.dot(&d);
                let b = d.dot(&cv);
                let disc = b * b - a * cc;
                if disc < 0.0 {
                    continue;
                }
                let s = disc.sqrt();
                let t = if (b - s) / a > NEAR_PLANE { (b - s) / a } else { (b + s) / a };
                if t <= NEAR_PLANE {
                    continue;
                }
                let n = (d * t - cv) / r;
                self.write(x, y, t, label, shade(color, &n));
            }
        }
    }

    fn triangle(&mut self, tri: [Point3<f64>; 3], label: Label, color: [u8; 3]) {
        let n = (tri[1] - tri[0]).cross(&(tri[2] - tri[0]));
        if n.norm() == 0.0 {
            return;
        }
        let rgb = shade(color, &n.normalize());
        let poly = clip_near(&tri);
        for k in 1..poly.len().saturating_sub(1) {
            self.raster([poly[0], poly[k], poly[k + 1]], label, rgb);
        }
    }

    fn raster(&mut self, tri: [Point3<f64>; 3], label: Label, rgb: [u8; 3]) {
        let (w, h) = (self.cam.width as f64, self.cam.height as f64);
        let s: Vec<(f64, f64)> = tri.iter().map(|p| self.cam.project(p).expect("clipped")).collect();
        let area = edge(s[0], s[1], s[2]);
        if area == 0.0 || !area.is_finite() {
            return;
        }
        let minx = s.iter().map(|p| p.0).fold(f64::INFINITY, f64::min).ceil().max(0.0);
        let maxx = s.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max).floor().min(w - 1.0);
        let miny = s.iter().map(|p| p.1).fold(f64::INFINITY, f64::min).ceil().max(0.0);
        let maxy = s.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max).floor().min(h - 1.0);
        if minx > maxx || miny > maxy {
            return;
        }
        let inv_z = [1.0 / tri[0].z, 1.0 / tri[1].z, 1.0 / tri[2].z];
        for y in miny as usize..=maxy as usize {
            for x in minx as usize..=maxx as usize {
                let p = (x as f64, y as f64);
                let b0 = edge(s[1], s[2], p) / area;
                let b1 = edge(s[2], s[0], p) / area;
                let b2 = edge(s[0], s[1], p) / area;
                if b0 < 0.0 || b1 < 0.0 || b2 < 0.0 {
                    continue;
                }
                let z = 1.0 / (b0 * inv_z[0] + b1 * inv_z[1] + b2 * inv_z[2]);
                self.write(x, y, z, label, rgb);
            }
        }
    }
}

fn edge(a: (f64, f64), b: (f64, f64), p: (f64, f64)) -> f64 {
    (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0)
}

/// Sutherland–Hodgman against `z = NEAR_PLANE`.
fn clip_near(tri: &[Point3<f64>; 3]) -> Vec<Point3<f64>> {
    let mut out = Vec::with_capacity(4);
    for i in 0..3 {
        let (a, b) = (tri[i], tri[(i + 1) % 3]);
        let (ina, inb) = (a.z >= NEAR_PLANE, b.z >= NEAR_PLANE);
        if ina {
            out.push(a);
        }
        if ina != inb {
            let t = (NEAR_PLANE - a.z) / (b.z - a.z);
            let mut p = a + (b - a) * t;
            p.z = NEAR_PLANE;
            out.push(p);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_codec() {
        for t in [
            TargetRef { primitive: 0, part: None },
            TargetRef { primitive: 7, part: Some(3) },
        ] {
            assert_eq!(decode_label(encode_label(t)), Some(t));
        }
        assert_eq!(decode_label(0), None);
    }

    #[test]
    fn near_clip_keeps_front() {
        let tri = [Point3::new(0.0, 0.0, -1.0), Point3::new(1.0, 0.0, 1.0), Point3::new(0.0, 1.0, 1.0)];
        let poly = clip_near(&tri);
        assert_eq!(poly.len(), 4);
        assert!(poly.iter().all(|p| p.z >= NEAR_PLANE));
    }
}
