//! Thin-plate spline warp driven by displacements of a uniform lattice of
//! control points.

use std::sync::Arc;

use nalgebra::{DMatrix, LU, Dyn};

use super::affine::check_grid;
use crate::error::{Error, Result};
use crate::tensor::{Backward, Shape, Tape, Tensor, Var};

/// Radial basis `U(r²) = r² ln r²` with `U(0) = 0`.
#[inline]
pub fn tps_kernel(r2: f64) -> f64 {
    if r2 <= 1e-30 {
        0.0
    } else {
        r2 * r2.ln()
    }
}

/// `dU/d(r²)`; the gradient with respect to a point is `2 Δ · dU/d(r²)`.
#[inline]
fn tps_kernel_slope(r2: f64) -> f64 {
    if r2 <= 1e-30 {
        0.0
    } else {
        r2.ln() + 1.0
    }
}

/// The factorized TPS system for a fixed lattice.
///
/// `[[K + λI, P], [Pᵀ, 0]] [w; a] = [d; 0]` where `K_ij = U(|c_i - c_j|²)`
/// and `P_i = [1, x_i, y_i]`. The matrix depends only on the lattice, so it
/// is factorized once and solved against new displacements on every use.
#[derive(Clone, Debug)]
pub struct TpsSolver {
    k: usize,
    lambda: f64,
    points: Vec<[f64; 2]>,
    lu: LU<f64, Dyn, Dyn>,
}

impl TpsSolver {
    /// `k × k` control points spaced uniformly over `[-1, 1]²`, row-major.
    pub fn lattice(k: usize, lambda: f64) -> Result<Self> {
        if k < 2 {
            return Err(Error::SingularSystem);
        }
        let step = 2.0 / (k - 1) as f64;
        let points = (0..k * k)
            .map(|i| [-1.0 + (i % k) as f64 * step, -1.0 + (i / k) as f64 * step])
            .collect();
        TpsSolver::new(k, points, lambda)
    }

    fn new(k: usize, points: Vec<[f64; 2]>, lambda: f64) -> Result<Self> {
        let n = points.len();
        let mut m = DMatrix::<f64>::zeros(n + 3, n + 3);
        for i in 0..n {
            for j in 0..n {
                let (dx, dy) = (points[i][0] - points[j][0], points[i][1] - points[j][1]);
                m[(i, j)] = tps_kernel(dx * dx + dy * dy);
            }
            m[(i, i)] += lambda;
            let p = [1.0, points[i][0], points[i][1]];
            for (j, v) in p.iter().enumerate() {
                m[(i, n + j)] = *v;
                m[(n + j, i)] = *v;
            }
        }
        let lu = m.lu();
        if !lu.is_invertible() {
            return Err(Error::SingularSystem);
        }
        let det = lu.determinant();
        if !det.is_finite() || det.abs() < 1e-300 {
            return Err(Error::SingularSystem);
        }
        Ok(TpsSolver { k, lambda, points, lu })
    }

    pub fn side(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn control_points(&self) -> &[[f64; 2]] {
        &self.points
    }

    /// Spline coefficients `(n + 3) × 2` for control displacements
    /// `d` laid out as `[dx0, dy0, dx1, dy1, ...]`.
    pub fn solve(&self, displacements: &[f32]) -> DMatrix<f64> {
        let n = self.points.len();
        assert_eq!(displacements.len(), 2 * n);
        let mut rhs = DMatrix::<f64>::zeros(n + 3, 2);
        for i in 0..n {
            rhs[(i, 0)] = displacements[2 * i] as f64;
            rhs[(i, 1)] = displacements[2 * i + 1] as f64;
        }
        self.lu.solve(&rhs).expect("factorization checked at construction")
    }

    /// Displacement of the spline surface at `(x, y)`.
    pub fn evaluate(&self, coeffs: &DMatrix<f64>, x: f64, y: f64) -> (f64, f64) {
        let n = self.points.len();
        let mut dx = coeffs[(n, 0)] + coeffs[(n + 1, 0)] * x + coeffs[(n + 2, 0)] * y;
        let mut dy = coeffs[(n, 1)] + coeffs[(n + 1, 1)] * x + coeffs[(n + 2, 1)] * y;
        for (i, c) in self.points.iter().enumerate() {
            let (ex, ey) = (x - c[0], y - c[1]);
            let u = tps_kernel(ex * ex + ey * ey);
            dx += u * coeffs[(i, 0)];
            dy += u * coeffs[(i, 1)];
        }
        (dx, dy)
    }
}

/// Learnable TPS warp: a factorized lattice plus trainable displacements.
#[derive(Clone, Debug)]
pub struct TpsParams {
    pub solver: Arc<TpsSolver>,
    /// Shape `[1, 1, k², 2]`.
    pub displacements: Tensor,
}

impl TpsParams {
    pub fn new(k: usize, lambda: f64) -> Result<Self> {
        let solver = Arc::new(TpsSolver::lattice(k, lambda)?);
        let n = solver.len();
        Ok(TpsParams {
            solver,
            displacements: Tensor::zeros(Shape::new(1, 1, n, 2)),
        })
    }

    pub fn transform_point(&self, x: f32, y: f32) -> (f32, f32) {
        let coeffs = self.solver.solve(self.displacements.data());
        let (dx, dy) = self.solver.evaluate(&coeffs, x as f64, y as f64);
        (x + dx as f32, y + dy as f32)
    }
}

struct TpsWarp {
    solver: Arc<TpsSolver>,
    coeffs: DMatrix<f64>,
}

impl Backward for TpsWarp {
    fn backward(&self, inputs: &[&Tensor], _: &Tensor, g: &[f32], needs: &[bool]) -> Vec<Option<Vec<f32>>> {
        let grid = inputs[1];
        let n_pts = grid.shape().plane();
        let (xs, ys) = (grid.plane(0, 0), grid.plane(0, 1));
        let points = self.solver.control_points();
        let n = points.len();
        let c = &self.coeffs;
        let mut grad_coeffs = DMatrix::<f64>::zeros(n + 3, 2);
        let mut grad_grid = needs[1].then(|| vec![0.0f32; 2 * n_pts]);
        for k in 0..n_pts {
            let (gx, gy) = (g[k] as f64, g[n_pts + k] as f64);
            if gx == 0.0 && gy == 0.0 {
                continue;
            }
            let (x, y) = (xs[k] as f64, ys[k] as f64);
            // d(out)/d(x,y) = I + J where J is the surface Jacobian
            let mut jxx = c[(n + 1, 0)];
            let mut jxy = c[(n + 2, 0)];
            let mut jyx = c[(n + 1, 1)];
            let mut jyy = c[(n + 2, 1)];
            for (i, p) in points.iter().enumerate() {
                let (ex, ey) = (x - p[0], y - p[1]);
                let r2 = ex * ex + ey * ey;
                let u = tps_kernel(r2);
                grad_coeffs[(i, 0)] += u * gx;
                grad_coeffs[(i, 1)] += u * gy;
                if grad_grid.is_some() {
                    let s = 2.0 * tps_kernel_slope(r2);
                    jxx += s * ex * c[(i, 0)];
                    jxy += s * ey * c[(i, 0)];
                    jyx += s * ex * c[(i, 1)];
                    jyy += s * ey * c[(i, 1)];
                }
            }
            grad_coeffs[(n, 0)] += gx;
            grad_coeffs[(n + 1, 0)] += gx * x;
            grad_coeffs[(n + 2, 0)] += gx * y;
            grad_coeffs[(n, 1)] += gy;
            grad_coeffs[(n + 1, 1)] += gy * x;
            grad_coeffs[(n + 2, 1)] += gy * y;
            if let Some(gg) = grad_grid.as_mut() {
                gg[k] = (gx * (1.0 + jxx) + gy * jyx) as f32;
                gg[n_pts + k] = (gx * jxy + gy * (1.0 + jyy)) as f32;
            }
        }
        let grad_disp = needs[0].then(|| {
            // the system matrix is symmetric, so its inverse transpose is itself
            let back = self.solver.lu.solve(&grad_coeffs).expect("factorization checked at construction");
            (0..n).flat_map(|i| [back[(i, 0)] as f32, back[(i, 1)] as f32]).collect()
        });
        vec![grad_disp, grad_grid]
    }
}

impl Tape {
    /// Moves every grid point by the TPS displacement surface through the
    /// displaced lattice of `solver`.
    pub fn tps_warp_grid(&mut self, displacements: Var, grid: Var, solver: &Arc<TpsSolver>) -> Result<Var> {
        check_grid("tps_warp_grid", self.shape(grid))?;
        if self.shape(displacements).numel() != 2 * solver.len() {
            return Err(Error::InvalidShape {
                op: "tps_warp_grid",
                reason: format!(
                    "expected {} displacement values, got {}",
                    2 * solver.len(),
                    self.shape(displacements)
                ),
            });
        }
        let coeffs = solver.solve(self.value(displacements).data());
        let g = self.value(grid);
        let n = g.shape().plane();
        let (xs, ys) = (g.plane(0, 0), g.plane(0, 1));
        let mut out = vec![0.0f32; 2 * n];
        for k in 0..n {
            let (dx, dy) = solver.evaluate(&coeffs, xs[k] as f64, ys[k] as f64);
            out[k] = xs[k] + dx as f32;
            out[n + k] = ys[k] + dy as f32;
        }
        let out = Tensor::new(g.shape(), out);
        Ok(self.record(
            out,
            &[displacements, grid],
            TpsWarp {
                solver: Arc::clone(solver),
                coeffs,
            },
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deform::identity_grid;

    fn warp(params: &TpsParams, grid: Tensor) -> Tensor {
        let mut tape = Tape::new();
        let d = tape.leaf(params.displacements.clone());
        let g = tape.constant(grid);
        let out = tape.tps_warp_grid(d, g, &params.solver).unwrap();
        tape.value(out).clone()
    }

    #[test]
    fn kernel_vanishes_at_zero() {
        assert_eq!(tps_kernel(0.0), 0.0);
        assert_eq!(tps_kernel(1.0), 0.0);
        assert!((tps_kernel(4.0) - 4.0 * 4f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn lattice_of_one_is_singular() {
        assert!(matches!(TpsSolver::lattice(1, 0.0), Err(Error::SingularSystem)));
    }

    #[test]
    fn zero_displacements_are_identity() {
        let params = TpsParams::new(5, 0.0).unwrap();
        let grid = identity_grid(8, 6);
        assert!(warp(&params, grid.clone()).max_abs_diff(&grid) < 1e-7);
    }

    #[test]
    fn uniform_displacement_is_translation() {
        let mut params = TpsParams::new(4, 0.0).unwrap();
        for (i, v) in params.displacements.data_mut().iter_mut().enumerate() {
            *v = if i % 2 == 0 { 0.05 } else { -0.02 };
        }
        let grid = identity_grid(5, 5);
        let out = warp(&params, grid.clone());
        for k in 0..25 {
            assert!((out.plane(0, 0)[k] - grid.plane(0, 0)[k] - 0.05).abs() < 1e-6);
            assert!((out.plane(0, 1)[k] - grid.plane(0, 1)[k] + 0.02).abs() < 1e-6);
        }
    }
}
