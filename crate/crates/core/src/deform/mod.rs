//! Learnable coarse-to-fine deformation of the guide image.
//!
//! Three layers act on a sampling grid in fixed order: a global affine map,
//! a CPAB (integrated piecewise-affine velocity) transform, and a thin-plate
//! spline. The composed grid is sampled once, so the guide is interpolated a
//! single time no matter how many layers are active.

mod affine;
mod cpab;
mod tps;

pub use affine::{AffineParams, AFFINE_IDENTITY, AFFINE_PARAMS};
pub use cpab::{cpab_basis, CpabBasis, CpabField, Tessellation};
pub use tps::{tps_kernel, TpsParams, TpsSolver};

use crate::error::Result;
use crate::tensor::{Shape, Tape, Tensor, Var};

/// Normalized pixel-center lattice: `x_j = (2j + 1) / w - 1`, likewise for `y`.
/// Shape `[1, 2, h, w]` with channel 0 holding `x` and channel 1 holding `y`.
pub fn identity_grid(h: usize, w: usize) -> Tensor {
    let mut data = vec![0.0f32; 2 * h * w];
    let (xs, ys) = data.split_at_mut(h * w);
    for y in 0..h {
        let gy = ((2 * y + 1) as f64 / h as f64 - 1.0) as f32;
        for x in 0..w {
            xs[y * w + x] = ((2 * x + 1) as f64 / w as f64 - 1.0) as f32;
            ys[y * w + x] = gy;
        }
    }
    Tensor::new(Shape::new(1, 2, h, w), data)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
pub struct LayerFlags {
    pub affine: bool,
    pub cpab: bool,
    pub tps: bool,
}

impl LayerFlags {
    pub const ALL: LayerFlags = LayerFlags {
        affine: true,
        cpab: true,
        tps: true,
    };
    pub const NONE: LayerFlags = LayerFlags {
        affine: false,
        cpab: false,
        tps: false,
    };

    pub fn any(&self) -> bool {
        self.affine || self.cpab || self.tps
    }
}

/// Sizes of the deformation layers.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DeformConfig {
    pub cells_x: usize,
    pub cells_y: usize,
    pub cpab_steps: usize,
    pub tps_side: usize,
    pub tps_lambda: f64,
}

impl Default for DeformConfig {
    fn default() -> Self {
        DeformConfig {
            cells_x: 4,
            cells_y: 4,
            cpab_steps: 32,
            tps_side: 5,
            tps_lambda: 0.0,
        }
    }
}

/// All alignment state: affine → CPAB → TPS.
#[derive(Clone, Debug)]
pub struct DeformationStack {
    pub affine: AffineParams,
    pub cpab: CpabField,
    pub tps: TpsParams,
    /// Layers applied by [`apply_deformation`].
    pub enabled: LayerFlags,
}

/// Tape handles of the parameters of the layers that were applied.
#[derive(Clone, Copy, Debug, Default)]
pub struct StackVars {
    pub affine: Option<Var>,
    pub cpab: Option<Var>,
    pub tps: Option<Var>,
}

impl DeformationStack {
    /// Identity-initialized stack with every layer enabled.
    pub fn new(config: &DeformConfig) -> Result<Self> {
        Ok(DeformationStack {
            affine: AffineParams::default(),
            cpab: CpabField::new(Tessellation::new(config.cells_x, config.cells_y)?, config.cpab_steps)?,
            tps: TpsParams::new(config.tps_side, config.tps_lambda)?,
            enabled: LayerFlags::ALL,
        })
    }

    /// Records the composed sampling grid for an `h × w` output.
    /// Parameters of layers in `trainable` are registered as gradient leaves.
    pub fn record_grid(&self, tape: &mut Tape, h: usize, w: usize, trainable: LayerFlags) -> Result<(Var, StackVars)> {
        let mut grid = tape.constant(identity_grid(h, w));
        let mut vars = StackVars::default();
        let leaf = |tape: &mut Tape, t: &Tensor, train: bool| {
            let mut t = t.detached();
            t.set_requires_grad(train);
            tape.leaf(t)
        };
        if self.enabled.affine {
            let p = leaf(tape, &self.affine.params, trainable.affine);
            grid = tape.affine_warp_grid(p, grid)?;
            vars.affine = Some(p);
        }
        if self.enabled.cpab {
            let c = leaf(tape, &self.cpab.coeffs, trainable.cpab);
            grid = tape.cpab_warp_grid(c, grid, &self.cpab.basis, self.cpab.n_steps)?;
            vars.cpab = Some(c);
        }
        if self.enabled.tps {
            let d = leaf(tape, &self.tps.displacements, trainable.tps);
            grid = tape.tps_warp_grid(d, grid, &self.tps.solver)?;
            vars.tps = Some(d);
        }
        Ok((grid, vars))
    }

    /// Composed coordinates of one normalized point (no tape).
    pub fn transform_point(&self, mut x: f32, mut y: f32) -> (f32, f32) {
        if self.enabled.affine {
            (x, y) = self.affine.apply_point(x, y);
        }
        if self.enabled.cpab {
            (x, y) = self.cpab.transform_point(x, y);
        }
        if self.enabled.tps {
            (x, y) = self.tps.transform_point(x, y);
        }
        (x, y)
    }

    /// Composed grid for an `h × w` output, without gradients.
    pub fn grid(&self, h: usize, w: usize) -> Result<Tensor> {
        let mut tape = Tape::no_grad();
        let (grid, _) = self.record_grid(&mut tape, h, w, LayerFlags::NONE)?;
        Ok(tape.value(grid).clone())
    }

    /// Warps an image without recording gradients.
    pub fn warp(&self, image: &Tensor) -> Result<Tensor> {
        let mut tape = Tape::no_grad();
        let rgb = tape.constant(image.detached());
        let (out, _) = apply_deformation(&mut tape, self, rgb, LayerFlags::NONE)?;
        Ok(tape.value(out).clone())
    }

    /// Trainable parameter tensors paired with the layer they belong to.
    pub fn params_mut(&mut self) -> [(&'static str, &mut Tensor); 3] {
        [
            ("affine", &mut self.affine.params),
            ("cpab", &mut self.cpab.coeffs),
            ("tps", &mut self.tps.displacements),
        ]
    }

    /// Copies the gradients recorded on `tape` into the parameter tensors.
    pub fn collect_grads(&mut self, tape: &Tape, vars: &StackVars) {
        if let Some(v) = vars.affine {
            tape.accumulate_grad(v, &mut self.affine.params);
        }
        if let Some(v) = vars.cpab {
            tape.accumulate_grad(v, &mut self.cpab.coeffs);
        }
        if let Some(v) = vars.tps {
            tape.accumulate_grad(v, &mut self.tps.displacements);
        }
    }

    pub fn zero_grad(&mut self) {
        for (_, p) in self.params_mut() {
            p.zero_grad();
        }
    }
}

/// Warps `rgb` through the stack: the grid is
/// `tps(cpab(affine(identity)))` sampled once with bilinear interpolation.
pub fn apply_deformation(
    tape: &mut Tape,
    stack: &DeformationStack,
    rgb: Var,
    trainable: LayerFlags,
) -> Result<(Var, StackVars)> {
    let s = tape.shape(rgb);
    let (grid, vars) = stack.record_grid(tape, s.h(), s.w(), trainable)?;
    let out = tape.grid_sample(rgb, grid)?;
    Ok((out, vars))
}

/// Red-green alignment overlay: red from the guide's red channel, green
/// from the modality (resized to the guide when needed), blue zero.
pub fn rg_overlay(guide_rgb: &Tensor, modality: &Tensor) -> Tensor {
    let s = guide_rgb.shape();
    let m = if (modality.shape().h(), modality.shape().w()) == (s.h(), s.w()) {
        modality.detached()
    } else {
        crate::tensor::resize::resize_bicubic(modality, s.h(), s.w())
    };
    let mut out = Tensor::zeros(Shape::new(1, 3, s.h(), s.w()));
    out.plane_mut(0, 0).copy_from_slice(guide_rgb.plane(0, 0));
    out.plane_mut(0, 1).copy_from_slice(m.plane(0, 0));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two_grid_uses_pixel_centers() {
        let g = identity_grid(2, 2);
        assert_eq!(g.plane(0, 0), &[-0.5, 0.5, -0.5, 0.5]);
        assert_eq!(g.plane(0, 1), &[-0.5, -0.5, 0.5, 0.5]);
    }

    #[test]
    fn grid_is_point_symmetric() {
        let (h, w) = (5, 8);
        let g = identity_grid(h, w);
        for c in 0..2 {
            let p = g.plane(0, c);
            for k in 0..h * w {
                assert!((p[k] + p[h * w - 1 - k]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn identity_stack_is_identity_warp() {
        let stack = DeformationStack::new(&DeformConfig::default()).unwrap();
        let img = Tensor::from_fn(Shape::new(1, 3, 12, 16), |[_, c, y, x]| ((c * 7 + y * 16 + x) as f32 * 0.13).sin() * 0.5 + 0.5);
        let out = stack.warp(&img).unwrap();
        assert!(out.max_abs_diff(&img) < 1e-5);
    }

    #[test]
    fn overlay_channels() {
        let guide = Tensor::from_fn(Shape::new(1, 3, 2, 2), |[_, c, _, _]| c as f32 * 0.25);
        let m = Tensor::full(Shape::new(1, 1, 2, 2), 0.6);
        let o = rg_overlay(&guide, &m);
        assert_eq!(o.plane(0, 0), &[0.0; 4]);
        assert_eq!(o.plane(0, 1), &[0.6; 4]);
        assert_eq!(o.plane(0, 2), &[0.0; 4]);
    }
}
