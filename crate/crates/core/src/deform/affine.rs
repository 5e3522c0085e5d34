use crate::error::{Error, Result};
use crate::tensor::{Backward, Shape, Tape, Tensor, Var};

/// Number of affine parameters, ordered `[a, b, tx, c, d, ty]` so that
/// `x' = a x + b y + tx` and `y' = c x + d y + ty`.
pub const AFFINE_PARAMS: usize = 6;

pub const AFFINE_IDENTITY: [f32; AFFINE_PARAMS] = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0];

/// A global 2×3 affine map acting on normalized coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineParams {
    pub params: Tensor,
}

impl Default for AffineParams {
    fn default() -> Self {
        AffineParams::from_array(AFFINE_IDENTITY)
    }
}

impl AffineParams {
    pub fn from_array(p: [f32; AFFINE_PARAMS]) -> Self {
        AffineParams {
            params: Tensor::new(Shape::new(1, 1, 1, AFFINE_PARAMS), p.to_vec()),
        }
    }

    /// Rotation by `angle` radians (counter-clockwise in image coordinates
    /// with y pointing down) followed by a translation.
    pub fn rotation_translation(angle: f32, tx: f32, ty: f32) -> Self {
        let (s, c) = angle.sin_cos();
        AffineParams::from_array([c, -s, tx, s, c, ty])
    }

    pub fn as_array(&self) -> [f32; AFFINE_PARAMS] {
        let d = self.params.data();
        [d[0], d[1], d[2], d[3], d[4], d[5]]
    }

    pub fn apply_point(&self, x: f32, y: f32) -> (f32, f32) {
        let [a, b, tx, c, d, ty] = self.as_array();
        (a * x + b * y + tx, c * x + d * y + ty)
    }
}

struct AffineGrid;

impl Backward for AffineGrid {
    fn backward(&self, inputs: &[&Tensor], _: &Tensor, g: &[f32], needs: &[bool]) -> Vec<Option<Vec<f32>>> {
        let (p, grid) = (inputs[0].data(), inputs[1]);
        let n = grid.shape().plane();
        let (gx, gy) = g.split_at(n);
        let gparams = needs[0].then(|| {
            let (xs, ys) = (grid.plane(0, 0), grid.plane(0, 1));
            let mut acc = [0.0f64; AFFINE_PARAMS];
            for k in 0..n {
                let (x, y) = (xs[k] as f64, ys[k] as f64);
                let (u, v) = (gx[k] as f64, gy[k] as f64);
                acc[0] += u * x;
                acc[1] += u * y;
                acc[2] += u;
                acc[3] += v * x;
                acc[4] += v * y;
                acc[5] += v;
            }
            acc.iter().map(|&v| v as f32).collect()
        });
        let ggrid = needs[1].then(|| {
            let mut out = vec![0.0f32; 2 * n];
            for k in 0..n {
                out[k] = p[0] * gx[k] + p[3] * gy[k];
                out[n + k] = p[1] * gx[k] + p[4] * gy[k];
            }
            out
        });
        vec![gparams, ggrid]
    }
}

pub(crate) fn check_grid(op: &'static str, shape: Shape) -> Result<()> {
    if shape.n() != 1 || shape.c() != 2 {
        return Err(Error::InvalidShape {
            op,
            reason: format!("expected a [1, 2, h, w] grid, got {shape}"),
        });
    }
    Ok(())
}

impl Tape {
    /// Maps every grid point through the affine parameters (shape `[1,1,1,6]`).
    pub fn affine_warp_grid(&mut self, params: Var, grid: Var) -> Result<Var> {
        check_grid("affine_warp_grid", self.shape(grid))?;
        if self.shape(params).numel() != AFFINE_PARAMS {
            return Err(Error::InvalidShape {
                op: "affine_warp_grid",
                reason: format!("expected {AFFINE_PARAMS} parameters, got {}", self.shape(params)),
            });
        }
        let p = self.value(params).data().to_vec();
        let g = self.value(grid);
        let n = g.shape().plane();
        let (xs, ys) = (g.plane(0, 0), g.plane(0, 1));
        let mut out = vec![0.0f32; 2 * n];
        for k in 0..n {
            out[k] = p[0] * xs[k] + p[1] * ys[k] + p[2];
            out[n + k] = p[3] * xs[k] + p[4] * ys[k] + p[5];
        }
        let out = Tensor::new(g.shape(), out);
        Ok(self.record(out, &[params, grid], AffineGrid))
    }
}
