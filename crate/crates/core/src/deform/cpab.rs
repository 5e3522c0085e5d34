//! Continuous piecewise-affine velocity fields and their integration.
//!
//! The domain `[-1, 1]²` is split into `nx × ny` rectangular cells, each cut
//! into four triangles meeting at the cell center. Every triangle carries an
//! affine velocity `v(p) = A [x, y, 1]ᵀ` (six unknowns). Requiring the
//! velocity to agree at both endpoints of every shared edge makes the field
//! continuous; the admissible fields form the null space of that constraint
//! system, for which [`cpab_basis`] builds an orthonormal basis.
//!
//! A transformation is obtained by advecting points through the field for
//! unit time with fixed Euler steps.

use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};

use super::affine::check_grid;
use crate::error::{Error, Result};
use crate::tensor::{Backward, Shape, Tape, Tensor, Var};

/// Triangle position inside a cell.
const TOP: usize = 0;
const RIGHT: usize = 1;
const BOTTOM: usize = 2;
const LEFT: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Tessellation {
    pub nx: usize,
    pub ny: usize,
}

impl Tessellation {
    pub fn new(nx: usize, ny: usize) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::DegenerateTessellation(format!("{nx}x{ny} cells")));
        }
        Ok(Tessellation { nx, ny })
    }

    pub fn triangles(&self) -> usize {
        4 * self.nx * self.ny
    }

    fn cell_size(&self) -> (f64, f64) {
        (2.0 / self.nx as f64, 2.0 / self.ny as f64)
    }

    fn tri(&self, cx: usize, cy: usize, k: usize) -> usize {
        (cy * self.nx + cx) * 4 + k
    }

    /// Cell corners `(tl, tr, br, bl)` and center, in normalized coordinates.
    fn cell_points(&self, cx: usize, cy: usize) -> ([[f64; 2]; 4], [f64; 2]) {
        let (w, h) = self.cell_size();
        let x0 = -1.0 + cx as f64 * w;
        let y0 = -1.0 + cy as f64 * h;
        let (x1, y1) = (x0 + w, y0 + h);
        ([[x0, y0], [x1, y0], [x1, y1], [x0, y1]], [x0 + 0.5 * w, y0 + 0.5 * h])
    }

    /// Triangle containing `(x, y)`; points outside the domain use the
    /// triangle of the nearest boundary cell.
    pub fn locate(&self, x: f32, y: f32) -> usize {
        let (w, h) = self.cell_size();
        let (w, h) = (w as f32, h as f32);
        let cx = (((x + 1.0) / w).floor().max(0.0) as usize).min(self.nx - 1);
        let cy = (((y + 1.0) / h).floor().max(0.0) as usize).min(self.ny - 1);
        let dx = (x - (-1.0 + (cx as f32 + 0.5) * w)) / w;
        let dy = (y - (-1.0 + (cy as f32 + 0.5) * h)) / h;
        let k = if dy.abs() >= dx.abs() {
            if dy < 0.0 {
                TOP
            } else {
                BOTTOM
            }
        } else if dx > 0.0 {
            RIGHT
        } else {
            LEFT
        };
        self.tri(cx, cy, k)
    }

    /// Every shared edge as `(triangle_a, triangle_b, endpoint_1, endpoint_2)`.
    pub fn shared_edges(&self) -> Vec<(usize, usize, [f64; 2], [f64; 2])> {
        let mut edges = Vec::new();
        for cy in 0..self.ny {
            for cx in 0..self.nx {
                let ([tl, tr, br, bl], c) = self.cell_points(cx, cy);
                let t = |k| self.tri(cx, cy, k);
                edges.push((t(TOP), t(RIGHT), tr, c));
                edges.push((t(RIGHT), t(BOTTOM), br, c));
                edges.push((t(BOTTOM), t(LEFT), bl, c));
                edges.push((t(LEFT), t(TOP), tl, c));
                if cx + 1 < self.nx {
                    edges.push((t(RIGHT), self.tri(cx + 1, cy, LEFT), tr, br));
                }
                if cy + 1 < self.ny {
                    edges.push((t(BOTTOM), self.tri(cx, cy + 1, TOP), bl, br));
                }
            }
        }
        edges
    }

    /// Continuity constraints `L a = 0` over the stacked per-triangle
    /// parameters `a` (six per triangle, row-major 2×3).
    pub fn constraint_matrix(&self) -> DMatrix<f64> {
        let edges = self.shared_edges();
        let cols = 6 * self.triangles();
        let mut l = DMatrix::zeros(4 * edges.len(), cols);
        let mut row = 0;
        for (ta, tb, p, q) in edges {
            for v in [p, q] {
                let hom = [v[0], v[1], 1.0];
                for comp in 0..2 {
                    for (j, h) in hom.iter().enumerate() {
                        l[(row, 6 * ta + 3 * comp + j)] = *h;
                        l[(row, 6 * tb + 3 * comp + j)] = -*h;
                    }
                    row += 1;
                }
            }
        }
        l
    }
}

/// Orthonormal basis of continuous piecewise-affine velocity fields.
#[derive(Clone, Debug)]
pub struct CpabBasis {
    tess: Tessellation,
    /// `6T × D`, row-major.
    basis: Vec<f64>,
    dim: usize,
}

/// Builds the null-space basis of the continuity constraints.
pub fn cpab_basis(tess: Tessellation) -> Result<CpabBasis> {
    let tess = Tessellation::new(tess.nx, tess.ny)?;
    let l = tess.constraint_matrix();
    let gram = l.transpose() * &l;
    let n = gram.nrows();
    let eig = SymmetricEigen::new(gram);
    let scale = eig.eigenvalues.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let mut null: Vec<usize> = (0..n).filter(|&i| eig.eigenvalues[i].abs() < 1e-9 * scale).collect();
    null.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]).then(a.cmp(&b)));
    let dim = null.len();
    if dim == 0 {
        return Err(Error::DegenerateTessellation("no continuous velocity fields".into()));
    }
    let mut basis = vec![0.0f64; n * dim];
    for (j, &col) in null.iter().enumerate() {
        let v = eig.eigenvectors.column(col);
        // fix the sign so that construction is reproducible
        let pivot = v.iter().copied().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            basis[i * dim + j] = sign * v[i];
        }
    }
    Ok(CpabBasis { tess, basis, dim })
}

impl CpabBasis {
    pub fn tessellation(&self) -> Tessellation {
        self.tess
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> usize {
        6 * self.tess.triangles()
    }

    pub fn basis(&self) -> &[f64] {
        &self.basis
    }

    /// Per-triangle affine velocity parameters `B θ`.
    pub fn velocity_params(&self, theta: &[f32]) -> Vec<f32> {
        assert_eq!(theta.len(), self.dim);
        self.basis
            .chunks_exact(self.dim)
            .map(|row| row.iter().zip(theta).map(|(b, &t)| b * t as f64).sum::<f64>() as f32)
            .collect()
    }

    /// Coefficients of the orthogonal projection of `params` onto the basis, `Bᵀ a`.
    pub fn project(&self, params: &[f64]) -> Vec<f32> {
        assert_eq!(params.len(), self.rows());
        let mut theta = vec![0.0f64; self.dim];
        for (row, &a) in self.basis.chunks_exact(self.dim).zip(params) {
            theta.iter_mut().zip(row).for_each(|(t, b)| *t += b * a);
        }
        theta.into_iter().map(|t| t as f32).collect()
    }

    /// Coefficients of the field that is the same affine velocity
    /// everywhere (an exactly representable element of the space).
    pub fn uniform_affine(&self, a: [f64; 6]) -> Vec<f32> {
        let params: Vec<f64> = (0..self.tess.triangles()).flat_map(|_| a).collect();
        self.project(&params)
    }

    /// `Bᵀ g` for a gradient over per-triangle parameters.
    fn pull_back(&self, grad_params: &[f64]) -> Vec<f32> {
        self.project(grad_params)
    }
}

#[inline]
fn velocity(a: &[f32], x: f32, y: f32) -> (f32, f32) {
    (a[0] * x + a[1] * y + a[2], a[3] * x + a[4] * y + a[5])
}

/// Learnable CPAB transformation: a shared basis plus trainable coefficients.
#[derive(Clone, Debug)]
pub struct CpabField {
    pub basis: Arc<CpabBasis>,
    /// Shape `[1, 1, 1, D]`.
    pub coeffs: Tensor,
    pub n_steps: usize,
}

impl CpabField {
    pub fn new(tess: Tessellation, n_steps: usize) -> Result<Self> {
        let basis = Arc::new(cpab_basis(tess)?);
        let dim = basis.dim();
        Ok(CpabField {
            basis,
            coeffs: Tensor::zeros(Shape::new(1, 1, 1, dim)),
            n_steps: n_steps.max(1),
        })
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    /// Advects `(x, y)` through the field for unit time.
    pub fn transform_point(&self, x: f32, y: f32) -> (f32, f32) {
        let a = self.basis.velocity_params(self.coeffs.data());
        integrate_point(&self.basis.tess, &a, self.n_steps, x, y, |_, _, _| {})
    }
}

fn integrate_point(
    tess: &Tessellation,
    a: &[f32],
    n_steps: usize,
    mut x: f32,
    mut y: f32,
    mut visit: impl FnMut(f32, f32, usize),
) -> (f32, f32) {
    let h = 1.0 / n_steps as f32;
    for _ in 0..n_steps {
        let t = tess.locate(x, y);
        visit(x, y, t);
        let (vx, vy) = velocity(&a[6 * t..6 * t + 6], x, y);
        x += h * vx;
        y += h * vy;
    }
    (x, y)
}

struct CpabIntegrate {
    basis: Arc<CpabBasis>,
    params: Vec<f32>,
    n_steps: usize,
    /// Per point and step: position before the step and its triangle.
    trajectory: Vec<(f32, f32, u32)>,
}

impl Backward for CpabIntegrate {
    fn backward(&self, _: &[&Tensor], output: &Tensor, g: &[f32], needs: &[bool]) -> Vec<Option<Vec<f32>>> {
        let n = output.shape().plane();
        let steps = self.n_steps;
        let h = 1.0 / steps as f32;
        let mut grad_params = vec![0.0f64; self.params.len()];
        let mut grad_grid = needs[1].then(|| vec![0.0f32; 2 * n]);
        for k in 0..n {
            let (mut lx, mut ly) = (g[k], g[n + k]);
            if lx == 0.0 && ly == 0.0 {
                continue;
            }
            for s in (0..steps).rev() {
                let (x, y, t) = self.trajectory[k * steps + s];
                let t = t as usize;
                let a = &self.params[6 * t..6 * t + 6];
                let gp = &mut grad_params[6 * t..6 * t + 6];
                let (hx, hy) = ((h * lx) as f64, (h * ly) as f64);
                gp[0] += hx * x as f64;
                gp[1] += hx * y as f64;
                gp[2] += hx;
                gp[3] += hy * x as f64;
                gp[4] += hy * y as f64;
                gp[5] += hy;
                let nx = lx + h * (a[0] * lx + a[3] * ly);
                let ny = ly + h * (a[1] * lx + a[4] * ly);
                lx = nx;
                ly = ny;
            }
            if let Some(gg) = grad_grid.as_mut() {
                gg[k] = lx;
                gg[n + k] = ly;
            }
        }
        let grad_coeffs = needs[0].then(|| self.basis.pull_back(&grad_params));
        vec![grad_coeffs, grad_grid]
    }
}

impl Tape {
    /// Advects every grid point through the CPA velocity field spanned by
    /// `basis` with coefficients `coeffs` (shape `[1, 1, 1, D]`).
    pub fn cpab_warp_grid(
        &mut self,
        coeffs: Var,
        grid: Var,
        basis: &Arc<CpabBasis>,
        n_steps: usize,
    ) -> Result<Var> {
        check_grid("cpab_warp_grid", self.shape(grid))?;
        if self.shape(coeffs).numel() != basis.dim() {
            return Err(Error::InvalidShape {
                op: "cpab_warp_grid",
                reason: format!("expected {} coefficients, got {}", basis.dim(), self.shape(coeffs)),
            });
        }
        let n_steps = n_steps.max(1);
        let params = basis.velocity_params(self.value(coeffs).data());
        let g = self.value(grid);
        let n = g.shape().plane();
        let record = self.grad_enabled();
        let mut trajectory = Vec::with_capacity(if record { n * n_steps } else { 0 });
        let mut out = vec![0.0f32; 2 * n];
        let (xs, ys) = (g.plane(0, 0), g.plane(0, 1));
        for k in 0..n {
            let (x, y) = integrate_point(&basis.tess, &params, n_steps, xs[k], ys[k], |x, y, t| {
                if record {
                    trajectory.push((x, y, t as u32));
                }
            });
            out[k] = x;
            out[n + k] = y;
        }
        let out = Tensor::new(g.shape(), out);
        Ok(self.record(
            out,
            &[coeffs, grid],
            CpabIntegrate {
                basis: Arc::clone(basis),
                params,
                n_steps,
                trajectory,
            },
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deform::identity_grid;

    fn rank(m: &DMatrix<f64>) -> usize {
        let svd = m.clone().svd(false, false);
        let max = svd.singular_values.iter().fold(0.0f64, |a, &b| a.max(b));
        svd.singular_values.iter().filter(|&&s| s > 1e-9 * max).count()
    }

    #[test]
    fn zero_cells_are_rejected() {
        assert!(Tessellation::new(0, 3).is_err());
        assert!(cpab_basis(Tessellation { nx: 2, ny: 0 }).is_err());
    }

    #[test]
    fn null_space_dimension_matches_rank() {
        for (nx, ny) in [(1, 1), (2, 2), (3, 2), (4, 4)] {
            let tess = Tessellation::new(nx, ny).unwrap();
            let l = tess.constraint_matrix();
            let basis = cpab_basis(tess).unwrap();
            assert_eq!(basis.dim(), l.ncols() - rank(&l), "{nx}x{ny}");
            // one velocity vector per vertex of the triangulation
            let vertices = (nx + 1) * (ny + 1) + nx * ny;
            assert_eq!(basis.dim(), 2 * vertices);
        }
    }

    #[test]
    fn basis_is_orthonormal_and_continuous() {
        let tess = Tessellation::new(2, 2).unwrap();
        let basis = cpab_basis(tess).unwrap();
        let (r, d) = (basis.rows(), basis.dim());
        let b = DMatrix::from_row_slice(r, d, basis.basis());
        let gram = b.transpose() * &b;
        assert!((gram - DMatrix::identity(d, d)).abs().max() < 1e-6);
        let residual = tess.constraint_matrix() * &b;
        assert!(residual.abs().max() < 1e-5);
    }

    #[test]
    fn locate_picks_the_triangle_facing_each_edge() {
        let tess = Tessellation::new(1, 1).unwrap();
        assert_eq!(tess.locate(0.0, -0.9), TOP);
        assert_eq!(tess.locate(0.9, 0.0), RIGHT);
        assert_eq!(tess.locate(0.1, 0.8), BOTTOM);
        assert_eq!(tess.locate(-0.7, 0.2), LEFT);
        // outside the domain: nearest cell
        assert_eq!(tess.locate(3.0, 0.0), RIGHT);
    }

    #[test]
    fn zero_coefficients_leave_grid() {
        let field = CpabField::new(Tessellation::new(3, 3).unwrap(), 16).unwrap();
        let mut tape = Tape::new();
        let c = tape.leaf(field.coeffs.clone());
        let g = tape.constant(identity_grid(9, 7));
        let out = tape.cpab_warp_grid(c, g, &field.basis, field.n_steps).unwrap();
        assert_eq!(tape.value(out), tape.value(g));
    }
}
