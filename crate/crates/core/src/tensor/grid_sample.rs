use super::{Backward, Shape, Tape, Tensor, Var};
use crate::error::{Error, Result};

/// Maps a normalized coordinate to a continuous pixel index under the
/// pixel-center convention: `-1` and `1` are the outer edges of the image.
#[inline]
pub(crate) fn unnormalize(coord: f32, size: usize) -> f32 {
    ((coord + 1.0) * size as f32 - 1.0) * 0.5
}

/// Bilinear taps for one axis, with border clamping.
/// Returns `(i0, i1, frac, inside)` where `inside` is false when the
/// coordinate was clamped (its derivative is then zero).
#[inline]
fn taps(pos: f32, size: usize) -> (usize, usize, f32, bool) {
    let max = (size - 1) as f32;
    let inside = pos > 0.0 && pos < max;
    let p = pos.clamp(0.0, max);
    let i0 = (p.floor() as usize).min(size.saturating_sub(2));
    let i1 = (i0 + 1).min(size - 1);
    (i0, i1, p - i0 as f32, inside)
}

fn check(input: Shape, grid: Shape) -> Result<()> {
    if grid.c() != 2 {
        return Err(Error::InvalidShape {
            op: "grid_sample",
            reason: format!("grid must have 2 channels (x, y), got {grid}"),
        });
    }
    if grid.n() != 1 && grid.n() != input.n() {
        return Err(Error::InvalidShape {
            op: "grid_sample",
            reason: format!("grid batch {} incompatible with input batch {}", grid.n(), input.n()),
        });
    }
    if input.h() == 0 || input.w() == 0 {
        return Err(Error::InvalidShape {
            op: "grid_sample",
            reason: "empty input".into(),
        });
    }
    Ok(())
}

/// Samples `input` at the normalized `(x, y)` locations of `grid`
/// (shape `[1 or n, 2, h_out, w_out]`). Out-of-range locations take the
/// nearest border value.
pub fn grid_sample_bilinear(input: &Tensor, grid: &Tensor) -> Result<Tensor> {
    let (si, sg) = (input.shape(), grid.shape());
    check(si, sg)?;
    let out_shape = Shape::new(si.n(), si.c(), sg.h(), sg.w());
    let mut out = vec![0.0f32; out_shape.numel()];
    let (ih, iw) = (si.h(), si.w());
    let gp = sg.plane();
    for b in 0..si.n() {
        let gb = if sg.n() == 1 { 0 } else { b };
        let gx = grid.plane(gb, 0);
        let gy = grid.plane(gb, 1);
        for k in 0..gp {
            let (x0, x1, fx, _) = taps(unnormalize(gx[k], iw), iw);
            let (y0, y1, fy, _) = taps(unnormalize(gy[k], ih), ih);
            for c in 0..si.c() {
                let plane = input.plane(b, c);
                let top = plane[y0 * iw + x0] * (1.0 - fx) + plane[y0 * iw + x1] * fx;
                let bot = plane[y1 * iw + x0] * (1.0 - fx) + plane[y1 * iw + x1] * fx;
                out[((b * si.c() + c) * gp) + k] = top * (1.0 - fy) + bot * fy;
            }
        }
    }
    Ok(Tensor::new(out_shape, out))
}

struct GridSample;

impl Backward for GridSample {
    fn backward(&self, inputs: &[&Tensor], _: &Tensor, g: &[f32], needs: &[bool]) -> Vec<Option<Vec<f32>>> {
        let (input, grid) = (inputs[0], inputs[1]);
        let (si, sg) = (input.shape(), grid.shape());
        let (ih, iw) = (si.h(), si.w());
        let gp = sg.plane();
        let mut gin = needs[0].then(|| vec![0.0f32; input.len()]);
        let mut ggrid = needs[1].then(|| vec![0.0f32; grid.len()]);
        for b in 0..si.n() {
            let gb = if sg.n() == 1 { 0 } else { b };
            let gx = grid.plane(gb, 0);
            let gy = grid.plane(gb, 1);
            for k in 0..gp {
                let (x0, x1, fx, in_x) = taps(unnormalize(gx[k], iw), iw);
                let (y0, y1, fy, in_y) = taps(unnormalize(gy[k], ih), ih);
                let mut dx = 0.0f32;
                let mut dy = 0.0f32;
                for c in 0..si.c() {
                    let go = g[(b * si.c() + c) * gp + k];
                    if go == 0.0 {
                        continue;
                    }
                    let base = (b * si.c() + c) * ih * iw;
                    if let Some(gin) = gin.as_mut() {
                        gin[base + y0 * iw + x0] += go * (1.0 - fx) * (1.0 - fy);
                        gin[base + y0 * iw + x1] += go * fx * (1.0 - fy);
                        gin[base + y1 * iw + x0] += go * (1.0 - fx) * fy;
                        gin[base + y1 * iw + x1] += go * fx * fy;
                    }
                    if ggrid.is_some() {
                        let plane = input.plane(b, c);
                        let (v00, v01) = (plane[y0 * iw + x0], plane[y0 * iw + x1]);
                        let (v10, v11) = (plane[y1 * iw + x0], plane[y1 * iw + x1]);
                        dx += go * ((v01 - v00) * (1.0 - fy) + (v11 - v10) * fy);
                        dy += go * ((v10 - v00) * (1.0 - fx) + (v11 - v01) * fx);
                    }
                }
                if let Some(gg) = ggrid.as_mut() {
                    let base = gb * 2 * gp;
                    if in_x {
                        gg[base + k] += dx * iw as f32 * 0.5;
                    }
                    if in_y {
                        gg[base + gp + k] += dy * ih as f32 * 0.5;
                    }
                }
            }
        }
        vec![gin, ggrid]
    }
}

impl Tape {
    /// Differentiable bilinear resampling; see [`grid_sample_bilinear`].
    pub fn grid_sample(&mut self, input: Var, grid: Var) -> Result<Var> {
        let out = grid_sample_bilinear(self.value(input), self.value(grid))?;
        Ok(self.record(out, &[input, grid], GridSample))
    }
}
