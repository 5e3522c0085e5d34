//! Rendered test scenes with known ground truth.
//!
//! A scene is a set of anti-aliased ellipses and rectangles over a smooth
//! background. The modality is the scene intensity; the guide shows the same
//! shapes in color with extra texture, optionally under a known rigid
//! misalignment.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::deform::{identity_grid, DeformationStack};
use crate::error::Result;
use crate::image_io::{ImageBuffer, ImagePair};
use crate::tensor::{Downsampler, Shape, Tensor};

#[derive(Clone, Copy, Debug)]
enum Kind {
    Ellipse { rx: f64, ry: f64 },
    Rect { hx: f64, hy: f64 },
}

#[derive(Clone, Copy, Debug)]
struct Shape2 {
    kind: Kind,
    cx: f64,
    cy: f64,
    angle: f64,
    value: f64,
}

impl Shape2 {
    fn contains(&self, x: f64, y: f64) -> bool {
        let (s, c) = self.angle.sin_cos();
        let (dx, dy) = (x - self.cx, y - self.cy);
        let (u, v) = (c * dx + s * dy, -s * dx + c * dy);
        match self.kind {
            Kind::Ellipse { rx, ry } => (u / rx).powi(2) + (v / ry).powi(2) <= 1.0,
            Kind::Rect { hx, hy } => u.abs() <= hx && v.abs() <= hy,
        }
    }
}

/// A random piecewise-constant scene on the unit square.
#[derive(Clone, Debug)]
pub struct Scene {
    shapes: Vec<Shape2>,
    /// Background `a + b·x + c·y`.
    background: [f64; 3],
    texture: [f64; 4],
}

impl Scene {
    pub fn random(seed: u64, n_shapes: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shapes = (0..n_shapes)
            .map(|_| {
                let kind = if rng.random_bool(0.5) {
                    Kind::Ellipse {
                        rx: rng.random_range(0.05..0.22),
                        ry: rng.random_range(0.05..0.22),
                    }
                } else {
                    Kind::Rect {
                        hx: rng.random_range(0.04..0.18),
                        hy: rng.random_range(0.04..0.18),
                    }
                };
                Shape2 {
                    kind,
                    cx: rng.random_range(0.1..0.9),
                    cy: rng.random_range(0.1..0.9),
                    angle: rng.random_range(0.0..std::f64::consts::PI),
                    value: rng.random_range(0.1..0.95),
                }
            })
            .collect();
        Scene {
            shapes,
            background: [rng.random_range(0.3..0.5), rng.random_range(-0.15..0.15), rng.random_range(-0.15..0.15)],
            texture: [
                rng.random_range(18.0..30.0),
                rng.random_range(18.0..30.0),
                rng.random_range(0.0..6.28),
                rng.random_range(0.0..6.28),
            ],
        }
    }

    /// Intensity at a point of the unit square; later shapes cover earlier ones.
    pub fn intensity(&self, x: f64, y: f64) -> f64 {
        let [a, b, c] = self.background;
        let mut v = a + b * x + c * y;
        for s in &self.shapes {
            if s.contains(x, y) {
                v = s.value;
            }
        }
        v
    }

    /// Guide color: a channel mix of the intensity plus a fine texture.
    pub fn color(&self, x: f64, y: f64) -> [f64; 3] {
        let i = self.intensity(x, y);
        let [fx, fy, px, py] = self.texture;
        let t = 0.06 * (fx * x * std::f64::consts::TAU + px).sin() * (fy * y * std::f64::consts::TAU + py).cos();
        [
            (0.85 * i + 0.1 + t).clamp(0.0, 1.0),
            (0.6 * i + 0.25 - t).clamp(0.0, 1.0),
            (1.0 - 0.7 * i + 0.5 * t).clamp(0.0, 1.0),
        ]
    }
}

/// A rigid offset of the guide relative to the modality, in guide pixels.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Misalignment {
    pub shift_x: f64,
    pub shift_y: f64,
    pub rotation_deg: f64,
}

impl Misalignment {
    /// Scene point seen by guide pixel coordinate `(u, v)` of an `h × w` guide.
    fn scene_point(&self, u: f64, v: f64, h: usize, w: usize) -> (f64, f64) {
        let (cx, cy) = (w as f64 / 2.0, h as f64 / 2.0);
        let (s, c) = self.rotation_deg.to_radians().sin_cos();
        let (du, dv) = (u - cx, v - cy);
        (cx + c * du - s * dv + self.shift_x, cy + s * du + c * dv + self.shift_y)
    }

    /// The affine map, in normalized coordinates, that aligns the guide to
    /// the modality: sampling the guide there reproduces the unshifted scene.
    pub fn ideal_affine(&self, h: usize, w: usize) -> [f64; 6] {
        let (s, c) = self.rotation_deg.to_radians().sin_cos();
        let (hw, hh) = (w as f64 / 2.0, h as f64 / 2.0);
        // n' = D⁻¹ R⁻¹ D (n - t) with D = diag(w/2, h/2), t = shift / (w/2, h/2)
        let (a, b, cc, d) = (c, s * hh / hw, -s * hw / hh, c);
        let (tx, ty) = (self.shift_x / hw, self.shift_y / hh);
        [a, b, -(a * tx + b * ty), cc, d, -(cc * tx + d * ty)]
    }
}

fn supersample(h: usize, w: usize, channels: usize, sub: usize, f: impl Fn(f64, f64) -> [f64; 3]) -> Vec<f32> {
    let mut out = vec![0.0f32; channels * h * w];
    let norm = (sub * sub) as f64;
    for y in 0..h {
        for x in 0..w {
            let mut acc = [0.0f64; 3];
            for sy in 0..sub {
                for sx in 0..sub {
                    let u = x as f64 + (sx as f64 + 0.5) / sub as f64;
                    let v = y as f64 + (sy as f64 + 0.5) / sub as f64;
                    let c = f(u, v);
                    for k in 0..channels {
                        acc[k] += c[k];
                    }
                }
            }
            for k in 0..channels {
                out[k * h * w + y * w + x] = (acc[k] / norm) as f32;
            }
        }
    }
    out
}

/// Renders the scene intensity at `h × w` with anti-aliased edges.
pub fn render_modality(scene: &Scene, h: usize, w: usize) -> Tensor {
    let data = supersample(h, w, 1, 4, |u, v| {
        let i = scene.intensity(u / w as f64, v / h as f64);
        [i, 0.0, 0.0]
    });
    Tensor::new(Shape::new(1, 1, h, w), data)
}

/// Renders the guide at `h × w` under `mis`.
pub fn render_guide(scene: &Scene, h: usize, w: usize, mis: &Misalignment) -> Tensor {
    let data = supersample(h, w, 3, 4, |u, v| {
        let (x, y) = mis.scene_point(u, v, h, w);
        scene.color(x / w as f64, y / h as f64)
    });
    Tensor::new(Shape::new(1, 3, h, w), data)
}

/// An independent-noise guide that carries no information about the scene.
pub fn noise_guide(h: usize, w: usize, seed: u64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor::from_fn(Shape::new(1, 3, h, w), |_| rng.random::<f32>())
}

/// A training pair with its high-resolution modality ground truth.
#[derive(Clone, Debug)]
pub struct SyntheticPair {
    pub pair: ImagePair,
    pub hr_modality: Tensor,
    pub misalignment: Misalignment,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SyntheticSpec {
    /// Side of the high-resolution modality and guide.
    pub hr_size: usize,
    pub r: usize,
    pub shapes: usize,
    pub misalignment: Misalignment,
    pub noise_guide: bool,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            hr_size: 128,
            r: 2,
            shapes: 14,
            misalignment: Misalignment::default(),
            noise_guide: false,
        }
    }
}

impl SyntheticSpec {
    /// Renders scene `seed`; the low-resolution input is the antialiased
    /// bicubic reduction of the HR modality.
    pub fn build(&self, seed: u64) -> Result<SyntheticPair> {
        let scene = Scene::random(seed, self.shapes);
        let n = self.hr_size;
        let hr = render_modality(&scene, n, n);
        let guide = if self.noise_guide {
            noise_guide(n, n, seed ^ 0x9e37_79b9)
        } else {
            render_guide(&scene, n, n, &self.misalignment)
        };
        let lr = Downsampler::Bicubic.apply(&hr, self.r)?;
        let pair = ImagePair::new(ImageBuffer::from_tensor(&lr)?, ImageBuffer::from_tensor(&guide)?, self.r, None)?;
        Ok(SyntheticPair {
            pair,
            hr_modality: hr,
            misalignment: self.misalignment,
        })
    }
}

/// Mean distance, in pixels of an `h × w` image, between where `stack` and
/// the ideal affine `ideal` send each pixel center.
pub fn endpoint_error(stack: &DeformationStack, ideal: &[f64; 6], h: usize, w: usize) -> f64 {
    let grid = identity_grid(h, w);
    let (xs, ys) = (grid.plane(0, 0), grid.plane(0, 1));
    let mut total = 0.0;
    for k in 0..xs.len() {
        let (x, y) = (xs[k], ys[k]);
        let (px, py) = stack.transform_point(x, y);
        let (x, y) = (x as f64, y as f64);
        let qx = ideal[0] * x + ideal[1] * y + ideal[2];
        let qy = ideal[3] * x + ideal[4] * y + ideal[5];
        let dx = (px as f64 - qx) * w as f64 / 2.0;
        let dy = (py as f64 - qy) * h as f64 / 2.0;
        total += (dx * dx + dy * dy).sqrt();
    }
    total / xs.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deform::{AffineParams, DeformConfig};

    #[test]
    fn renders_are_in_range_and_seeded() {
        let a = SyntheticSpec::default().build(1).unwrap();
        let b = SyntheticSpec::default().build(1).unwrap();
        assert_eq!(a.hr_modality, b.hr_modality);
        assert_eq!(a.pair.modality.height(), 64);
        assert_eq!(a.pair.guide.height(), 128);
        assert!(a.hr_modality.data().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn ideal_affine_undoes_the_misalignment() {
        let mis = Misalignment {
            shift_x: 5.0,
            shift_y: -3.0,
            rotation_deg: 3.0,
        };
        let scene = Scene::random(4, 10);
        let (h, w) = (96, 64);
        let clean = render_guide(&scene, h, w, &Misalignment::default());
        let moved = render_guide(&scene, h, w, &mis);
        let mut stack = DeformationStack::new(&DeformConfig::default()).unwrap();
        let p = mis.ideal_affine(h, w);
        stack.affine = AffineParams::from_array(p.map(|v| v as f32));
        let fixed = stack.warp(&moved).unwrap();
        // compare away from the border, where the warp samples outside the image
        let err = |a: &Tensor| {
            let mut total = 0.0;
            let mut n = 0;
            for c in 0..3 {
                for y in 12..h - 12 {
                    for x in 12..w - 12 {
                        total += (a.at(0, c, y, x) - clean.at(0, c, y, x)).abs() as f64;
                        n += 1;
                    }
                }
            }
            total / n as f64
        };
        assert!(err(&fixed) < 0.25 * err(&moved), "{} vs {}", err(&fixed), err(&moved));
        assert!(endpoint_error(&stack, &p, h, w) < 1e-4);
    }
}
