//! Random augmented patch pairs cut from the modality image and the warped
//! guide by differentiable grid sampling.
//!
//! A patch is an affine footprint in modality pixel units:
//! `X = C + M (u - s/2)` with `M = R(θ) · Shear(k) · Scale(σ)` and `u` the
//! position inside the `s × s` patch. The guide patch evaluates the same map
//! at `r` times the density, so both patches cover one scene region.

use rand::Rng;

use crate::error::{Error, Result};
use crate::tensor::{Shape, Tape, Tensor, Var};

/// Consecutive footprint rejections tolerated before giving up.
pub const MAX_REJECTIONS: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AugmentationRanges {
    pub scale: (f32, f32),
    /// Degrees.
    pub rotation: (f32, f32),
    pub shear: (f32, f32),
    /// Fraction of the valid center range that translation may span:
    /// 1 uses the whole image, 0 pins the patch to the center.
    pub translation: f32,
}

impl Default for AugmentationRanges {
    fn default() -> Self {
        AugmentationRanges {
            scale: (0.9, 1.1),
            rotation: (-15.0, 15.0),
            shear: (-0.1, 0.1),
            translation: 1.0,
        }
    }
}

impl AugmentationRanges {
    /// Zero-width ranges at the identity: a deterministic center crop.
    pub const IDENTITY: AugmentationRanges = AugmentationRanges {
        scale: (1.0, 1.0),
        rotation: (0.0, 0.0),
        shear: (0.0, 0.0),
        translation: 0.0,
    };

    pub fn validate(&self) -> Result<()> {
        let ordered = |(a, b): (f32, f32)| a.is_finite() && b.is_finite() && a <= b;
        if !ordered(self.scale) || self.scale.0 <= 0.0 {
            return Err(Error::Config(format!("invalid scale range {:?}", self.scale)));
        }
        if !ordered(self.rotation) || !ordered(self.shear) {
            return Err(Error::Config("rotation and shear ranges need min <= max".into()));
        }
        if !(0.0..=1.0).contains(&self.translation) {
            return Err(Error::Config(format!("translation fraction {} not in [0, 1]", self.translation)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AugmentationParams {
    pub scale: f32,
    /// Radians.
    pub rotation: f32,
    pub shear: f32,
    /// Footprint center in normalized coordinates.
    pub tx: f32,
    pub ty: f32,
}

impl AugmentationParams {
    pub const IDENTITY: AugmentationParams = AugmentationParams {
        scale: 1.0,
        rotation: 0.0,
        shear: 0.0,
        tx: 0.0,
        ty: 0.0,
    };

    /// The linear part `M = R · Shear · Scale` as `[m00, m01, m10, m11]`.
    pub fn matrix(&self) -> [f64; 4] {
        let (s, c) = (self.rotation as f64).sin_cos();
        let k = self.shear as f64;
        let sc = self.scale as f64;
        // R · [[1, k], [0, 1]] · sc
        [c * sc, (c * k - s) * sc, s * sc, (s * k + c) * sc]
    }

    /// Largest `|x|` and `|y|` offsets of the footprint from its center, in
    /// modality pixels, for a patch of side `s`.
    fn half_extent(&self, s: usize) -> (f64, f64) {
        let [a, b, c, d] = self.matrix();
        let h = s as f64 / 2.0;
        ((a.abs() + b.abs()) * h, (c.abs() + d.abs()) * h)
    }
}

/// Draws augmentation parameters whose footprint fits inside an `h × w`
/// modality image. The linear part is redrawn while the footprint is too
/// large for the image; the center is then uniform over the valid range.
pub fn sample_augmentation<R: Rng + ?Sized>(
    rng: &mut R,
    ranges: &AugmentationRanges,
    s: usize,
    h: usize,
    w: usize,
) -> Result<AugmentationParams> {
    let draw = |rng: &mut R, (lo, hi): (f32, f32)| if lo == hi { lo } else { rng.random_range(lo..=hi) };
    for _ in 0..MAX_REJECTIONS {
        let mut aug = AugmentationParams {
            scale: draw(rng, ranges.scale),
            rotation: draw(rng, ranges.rotation).to_radians(),
            shear: draw(rng, ranges.shear),
            tx: 0.0,
            ty: 0.0,
        };
        let (ex, ey) = aug.half_extent(s);
        let (free_x, free_y) = (w as f64 / 2.0 - ex, h as f64 / 2.0 - ey);
        if free_x < 0.0 || free_y < 0.0 {
            continue;
        }
        let t = ranges.translation as f64;
        let cx = draw(rng, (-(free_x * t) as f32, (free_x * t) as f32)) as f64;
        let cy = draw(rng, (-(free_y * t) as f32, (free_y * t) as f32)) as f64;
        aug.tx = (2.0 * cx / w as f64) as f32;
        aug.ty = (2.0 * cy / h as f64) as f32;
        return Ok(aug);
    }
    Err(Error::PatchRejected {
        attempts: MAX_REJECTIONS,
        reason: format!("a {s}×{s} patch does not fit a {h}×{w} image under the sampled scale/rotation/shear"),
    })
}

/// Normalized coordinates of patch position `(u, v)` (in modality patch
/// pixels, `0..s`) for an `h × w` modality image.
pub fn footprint_point(aug: &AugmentationParams, s: usize, h: usize, w: usize, u: f64, v: f64) -> (f64, f64) {
    let [a, b, c, d] = aug.matrix();
    let half = s as f64 / 2.0;
    let (du, dv) = (u - half, v - half);
    let cx = (aug.tx as f64 + 1.0) * w as f64 / 2.0;
    let cy = (aug.ty as f64 + 1.0) * h as f64 / 2.0;
    let (x, y) = (cx + a * du + b * dv, cy + c * du + d * dv);
    (2.0 * x / w as f64 - 1.0, 2.0 * y / h as f64 - 1.0)
}

/// Sampling grid `[1, 2, n, n]` with `n = s·density` over the footprint.
/// Pixel centers sit at `u = (i + 0.5) / density`.
pub fn patch_grid(aug: &AugmentationParams, s: usize, density: usize, h: usize, w: usize) -> Tensor {
    let n = s * density;
    let mut data = vec![0.0f32; 2 * n * n];
    let (xs, ys) = data.split_at_mut(n * n);
    for i in 0..n {
        let v = (i as f64 + 0.5) / density as f64;
        for j in 0..n {
            let u = (j as f64 + 0.5) / density as f64;
            let (x, y) = footprint_point(aug, s, h, w, u, v);
            xs[i * n + j] = x as f32;
            ys[i * n + j] = y as f32;
        }
    }
    Tensor::new(Shape::new(1, 2, n, n), data)
}

fn check_footprint(aug: &AugmentationParams, s: usize, h: usize, w: usize) -> Result<()> {
    const SLACK: f64 = 1e-4;
    let corners = [(0.0, 0.0), (s as f64, 0.0), (0.0, s as f64), (s as f64, s as f64)];
    for (u, v) in corners {
        let (x, y) = footprint_point(aug, s, h, w, u, v);
        if x.abs() > 1.0 + SLACK || y.abs() > 1.0 + SLACK {
            return Err(Error::FootprintOutOfBounds);
        }
    }
    Ok(())
}

/// Tape handles of one patch pair.
#[derive(Clone, Copy, Debug)]
pub struct PatchVars {
    /// `[1, 1, s, s]`.
    pub modality: Var,
    /// `[1, 3, r·s, r·s]`.
    pub guide: Var,
}

/// Crops an `s × s` modality patch and the `r·s × r·s` guide patch over the
/// same footprint. Gradients flow into `guide` (and `modality` if it is a
/// trainable node).
pub fn extract_pair(
    tape: &mut Tape,
    modality: Var,
    guide: Var,
    aug: &AugmentationParams,
    s: usize,
    r: usize,
) -> Result<PatchVars> {
    if s < 8 {
        return Err(Error::InvalidShape {
            op: "extract_pair",
            reason: format!("patch size must be at least 8, got {s}"),
        });
    }
    let (ms, gs) = (tape.shape(modality), tape.shape(guide));
    if gs.h() != r * ms.h() || gs.w() != r * ms.w() {
        return Err(Error::ShapeMismatch {
            op: "extract_pair",
            expected: gs.with_spatial(r * ms.h(), r * ms.w()),
            got: gs,
        });
    }
    check_footprint(aug, s, ms.h(), ms.w())?;
    let mg = tape.constant(patch_grid(aug, s, 1, ms.h(), ms.w()));
    let gg = tape.constant(patch_grid(aug, s, r, ms.h(), ms.w()));
    Ok(PatchVars {
        modality: tape.grid_sample(modality, mg)?,
        guide: tape.grid_sample(guide, gg)?,
    })
}

#[derive(Clone, Debug)]
pub struct PatchPair {
    pub modality: Tensor,
    pub guide: Tensor,
}

impl PatchPair {
    /// Non-differentiable convenience wrapper around [`extract_pair`].
    pub fn extract(modality: &Tensor, guide: &Tensor, aug: &AugmentationParams, s: usize, r: usize) -> Result<Self> {
        let mut tape = Tape::no_grad();
        let m = tape.constant(modality.detached());
        let g = tape.constant(guide.detached());
        let vars = extract_pair(&mut tape, m, g, aug, s, r)?;
        Ok(PatchPair {
            modality: tape.value(vars.modality).clone(),
            guide: tape.value(vars.guide).clone(),
        })
    }
}
