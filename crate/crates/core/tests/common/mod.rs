//! Shared oracles for the integration tests and the acceptance run.
//!
//! Every differentiable op gets an independent float64 "shadow" forward.
//! Analytic gradients from the tape are compared against central
//! differences of the shadow.
#![allow(dead_code)]

use std::sync::Arc;

use cmsr::deform::{cpab_basis, identity_grid, CpabBasis, DeformConfig, DeformationStack, Tessellation, TpsSolver};
use cmsr::net::{predict, NetConfig, NetworkWeights};
use cmsr::tensor::resize::resize_bicubic;
use cmsr::tensor::{grid_sample_bilinear, Shape, Tape, Tensor, Var};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const INSTANCES: usize = 20;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor(rng: &mut ChaCha8Rng, shape: Shape, lo: f32, hi: f32) -> Tensor {
    Tensor::from_fn(shape, |_| rng.random_range(lo..hi))
}

fn f64s(t: &Tensor) -> Vec<f64> {
    t.data().iter().map(|&v| v as f64).collect()
}

/// Worst gradient error of one op over its randomized instances.
#[derive(Clone, Debug)]
pub struct GradReport {
    pub op: &'static str,
    pub instances: usize,
    pub worst: f64,
    pub tol: f64,
}

impl GradReport {
    pub fn passed(&self) -> bool {
        self.instances >= INSTANCES && self.worst < self.tol
    }
}

type Build<'a> = &'a dyn Fn(&mut Tape, &[Var]) -> Var;
type Shadow<'a> = &'a dyn Fn(&[Vec<f64>]) -> Vec<f64>;

/// Maximum error of the tape gradient of `Σ wₖ outₖ` against central
/// differences of `shadow`, relative to the largest numeric gradient.
pub fn check_gradient(inputs: &[Tensor], build: Build, shadow: Shadow, seed: u64) -> f64 {
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.detached().requires_grad())).collect();
    let out = build(&mut tape, &vars);
    let out_shape = tape.value(out).shape();
    let mut r = rng(seed);
    let weights = random_tensor(&mut r, out_shape, -1.0, 1.0);
    let wv = tape.constant(weights.clone());
    let prod = tape.mul(out, wv).unwrap();
    let loss = tape.sum(prod);
    tape.backward(loss).unwrap();

    let w = f64s(&weights);
    let base: Vec<Vec<f64>> = inputs.iter().map(f64s).collect();
    let objective = |x: &[Vec<f64>]| shadow(x).iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
    let h = 1e-6;
    let mut worst_abs = 0.0f64;
    let mut scale = 0.0f64;
    for (i, v) in vars.iter().enumerate() {
        let analytic = tape.grad(*v).map(<[f32]>::to_vec).unwrap_or_else(|| vec![0.0; inputs[i].len()]);
        let mut x = base.clone();
        for j in 0..x[i].len() {
            let orig = x[i][j];
            x[i][j] = orig + h;
            let up = objective(&x);
            x[i][j] = orig - h;
            let down = objective(&x);
            x[i][j] = orig;
            let numeric = (up - down) / (2.0 * h);
            worst_abs = worst_abs.max((analytic[j] as f64 - numeric).abs());
            scale = scale.max(numeric.abs());
        }
    }
    worst_abs / scale.max(1e-6)
}

fn run(op: &'static str, tol: f64, seed: u64, mut instance: impl FnMut(&mut ChaCha8Rng, u64) -> f64) -> GradReport {
    let mut r = rng(seed);
    let worst = (0..INSTANCES as u64).map(|k| instance(&mut r, seed * 1000 + k)).fold(0.0, f64::max);
    GradReport {
        op,
        instances: INSTANCES,
        worst,
        tol,
    }
}

// ---------------------------------------------------------------------------
// float64 shadows

pub fn shadow_conv2d(x: &[f64], xs: Shape, wt: &[f64], ws: Shape, b: &[f64]) -> Vec<f64> {
    let [_, c, h, w] = xs.0;
    let [o, _, kh, kw] = ws.0;
    let (ph, pw) = ((kh / 2) as isize, (kw / 2) as isize);
    let mut out = vec![0.0; o * h * w];
    for oc in 0..o {
        for y in 0..h {
            for xx in 0..w {
                let mut acc = b[oc];
                for ic in 0..c {
                    for ky in 0..kh {
                        for kx in 0..kw {
                            let iy = y as isize + ky as isize - ph;
                            let ix = xx as isize + kx as isize - pw;
                            if iy < 0 || ix < 0 || iy >= h as isize || ix >= w as isize {
                                continue;
                            }
                            acc += wt[((oc * c + ic) * kh + ky) * kw + kx] * x[(ic * h + iy as usize) * w + ix as usize];
                        }
                    }
                }
                out[(oc * h + y) * w + xx] = acc;
            }
        }
    }
    out
}

/// Bilinear sampling with border clamp under the pixel-center convention.
pub fn shadow_grid_sample(img: &[f64], is: Shape, grid: &[f64], gs: Shape) -> Vec<f64> {
    let [_, c, h, w] = is.0;
    let p = gs.plane();
    let axis = |coord: f64, size: usize| -> (usize, usize, f64) {
        let pos = (((coord + 1.0) * size as f64 - 1.0) / 2.0).clamp(0.0, (size - 1) as f64);
        let i0 = (pos.floor() as usize).min(size.saturating_sub(2));
        let i1 = (i0 + 1).min(size - 1);
        (i0, i1, pos - i0 as f64)
    };
    let mut out = vec![0.0; c * p];
    for k in 0..p {
        let (x0, x1, fx) = axis(grid[k], w);
        let (y0, y1, fy) = axis(grid[p + k], h);
        for ch in 0..c {
            let at = |y: usize, x: usize| img[(ch * h + y) * w + x];
            let top = at(y0, x0) * (1.0 - fx) + at(y0, x1) * fx;
            let bot = at(y1, x0) * (1.0 - fx) + at(y1, x1) * fx;
            out[ch * p + k] = top * (1.0 - fy) + bot * fy;
        }
    }
    out
}

fn keys_cubic(x: f64) -> f64 {
    let a = -0.5;
    let x = x.abs();
    if x <= 1.0 {
        (a + 2.0) * x.powi(3) - (a + 3.0) * x * x + 1.0
    } else if x < 2.0 {
        a * x.powi(3) - 5.0 * a * x * x + 8.0 * a * x - 4.0 * a
    } else {
        0.0
    }
}

/// Dense `dst × src` bicubic weight matrix, antialiased when shrinking.
pub fn bicubic_matrix(src: usize, dst: usize) -> DMatrix<f64> {
    let scale = src as f64 / dst as f64;
    let stretch = scale.max(1.0);
    let mut m = DMatrix::zeros(dst, src);
    for i in 0..dst {
        let center = (i as f64 + 0.5) * scale - 0.5;
        let lo = (center - 2.0 * stretch).floor() as isize;
        let hi = (center + 2.0 * stretch).ceil() as isize;
        for j in lo..=hi {
            let idx = j.clamp(0, src as isize - 1) as usize;
            m[(i, idx)] += keys_cubic((j as f64 - center) / stretch);
        }
        let total: f64 = m.row(i).sum();
        m.row_mut(i).scale_mut(1.0 / total);
    }
    m
}

pub fn shadow_resize(img: &[f64], s: Shape, oh: usize, ow: usize) -> Vec<f64> {
    let (my, mx) = (bicubic_matrix(s.h(), oh), bicubic_matrix(s.w(), ow));
    let mut out = Vec::with_capacity(s.n() * s.c() * oh * ow);
    for plane in img.chunks_exact(s.plane()) {
        let p = DMatrix::from_row_slice(s.h(), s.w(), plane);
        let r = &my * p * mx.transpose();
        for y in 0..oh {
            for x in 0..ow {
                out.push(r[(y, x)]);
            }
        }
    }
    out
}

pub fn shadow_affine(p: &[f64], grid: &[f64]) -> Vec<f64> {
    let n = grid.len() / 2;
    let mut out = vec![0.0; 2 * n];
    for k in 0..n {
        let (x, y) = (grid[k], grid[n + k]);
        out[k] = p[0] * x + p[1] * y + p[2];
        out[n + k] = p[3] * x + p[4] * y + p[5];
    }
    out
}

/// Triangle index under the `(cell, top/right/bottom/left)` layout.
fn locate(nx: usize, ny: usize, x: f64, y: f64) -> usize {
    let (cw, ch) = (2.0 / nx as f64, 2.0 / ny as f64);
    let cx = (((x + 1.0) / cw).floor().max(0.0) as usize).min(nx - 1);
    let cy = (((y + 1.0) / ch).floor().max(0.0) as usize).min(ny - 1);
    let dx = (x - (-1.0 + (cx as f64 + 0.5) * cw)) / cw;
    let dy = (y - (-1.0 + (cy as f64 + 0.5) * ch)) / ch;
    let k = if dy.abs() >= dx.abs() {
        if dy < 0.0 {
            0
        } else {
            2
        }
    } else if dx > 0.0 {
        1
    } else {
        3
    };
    (cy * nx + cx) * 4 + k
}

pub fn cpab_params(basis: &CpabBasis, theta: &[f64]) -> Vec<f64> {
    let d = basis.dim();
    basis.basis().chunks_exact(d).map(|row| row.iter().zip(theta).map(|(b, t)| b * t).sum()).collect()
}

/// Euler integration of the CPA field for unit time.
pub fn shadow_cpab(basis: &CpabBasis, steps: usize, theta: &[f64], grid: &[f64]) -> Vec<f64> {
    let tess = basis.tessellation();
    let a = cpab_params(basis, theta);
    let n = grid.len() / 2;
    let h = 1.0 / steps as f64;
    let mut out = vec![0.0; 2 * n];
    for k in 0..n {
        let (mut x, mut y) = (grid[k], grid[n + k]);
        for _ in 0..steps {
            let t = locate(tess.nx, tess.ny, x, y);
            let p = &a[6 * t..6 * t + 6];
            let (vx, vy) = (p[0] * x + p[1] * y + p[2], p[3] * x + p[4] * y + p[5]);
            x += h * vx;
            y += h * vy;
        }
        out[k] = x;
        out[n + k] = y;
    }
    out
}

fn tps_u(r2: f64) -> f64 {
    if r2 == 0.0 { 0.0 } else { r2 * r2.ln() }
}

/// Thin-plate warp of `grid` through a `k × k` lattice, solved from scratch.
pub fn shadow_tps(k: usize, lambda: f64, disp: &[f64], grid: &[f64]) -> Vec<f64> {
    let step = 2.0 / (k - 1) as f64;
    let pts: Vec<[f64; 2]> = (0..k * k).map(|i| [-1.0 + (i % k) as f64 * step, -1.0 + (i / k) as f64 * step]).collect();
    let n = pts.len();
    let mut m = DMatrix::<f64>::zeros(n + 3, n + 3);
    let mut rhs = DMatrix::<f64>::zeros(n + 3, 2);
    for i in 0..n {
        for j in 0..n {
            let d2 = (pts[i][0] - pts[j][0]).powi(2) + (pts[i][1] - pts[j][1]).powi(2);
            m[(i, j)] = tps_u(d2) + if i == j { lambda } else { 0.0 };
        }
        for (j, v) in [1.0, pts[i][0], pts[i][1]].into_iter().enumerate() {
            m[(i, n + j)] = v;
            m[(n + j, i)] = v;
        }
        rhs[(i, 0)] = disp[2 * i];
        rhs[(i, 1)] = disp[2 * i + 1];
    }
    let c = m.lu().solve(&rhs).expect("lattice system is regular");
    let np = grid.len() / 2;
    let mut out = vec![0.0; 2 * np];
    for q in 0..np {
        let (x, y) = (grid[q], grid[np + q]);
        let mut d = [c[(n, 0)] + c[(n + 1, 0)] * x + c[(n + 2, 0)] * y, c[(n, 1)] + c[(n + 1, 1)] * x + c[(n + 2, 1)] * y];
        for (i, p) in pts.iter().enumerate() {
            let u = tps_u((x - p[0]).powi(2) + (y - p[1]).powi(2));
            d[0] += u * c[(i, 0)];
            d[1] += u * c[(i, 1)];
        }
        out[q] = x + d[0];
        out[np + q] = y + d[1];
    }
    out
}

// ---------------------------------------------------------------------------
// gradient suite

/// Grid coordinates spread over (and slightly beyond) the image domain.
fn random_grid(r: &mut ChaCha8Rng, h: usize, w: usize, reach: f32) -> Tensor {
    random_tensor(r, Shape::new(1, 2, h, w), -reach, reach)
}

pub fn grad_conv2d() -> GradReport {
    run("conv2d", 1e-3, 1, |r, seed| {
        let (ci, co) = (r.random_range(1..=3), r.random_range(1..=3));
        let k = [1, 3, 5][r.random_range(0..3)];
        let (h, w) = (r.random_range(3..=7), r.random_range(3..=7));
        let (xs, ws) = (Shape::new(1, ci, h, w), Shape::new(co, ci, k, k));
        let inputs = [
            random_tensor(r, xs, -1.0, 1.0),
            random_tensor(r, ws, -0.5, 0.5),
            random_tensor(r, Shape::new(1, co, 1, 1), -0.5, 0.5),
        ];
        check_gradient(
            &inputs,
            &|t, v| t.conv2d(v[0], v[1], v[2]).unwrap(),
            &|x| shadow_conv2d(&x[0], xs, &x[1], ws, &x[2]),
            seed,
        )
    })
}

pub fn grad_relu() -> GradReport {
    run("relu", 1e-3, 2, |r, seed| {
        let s = Shape::new(1, r.random_range(1..=3), r.random_range(2..=6), r.random_range(2..=6));
        let x = Tensor::from_fn(s, |_| {
            let m = r.random_range(0.05f32..1.0);
            if r.random_bool(0.5) { m } else { -m }
        });
        check_gradient(&[x], &|t, v| t.relu(v[0]), &|x| x[0].iter().map(|v| v.max(0.0)).collect(), seed)
    })
}

pub fn grad_grid_sample() -> GradReport {
    run("grid_sample", 1e-3, 3, |r, seed| {
        let is = Shape::new(1, r.random_range(1..=3), r.random_range(2..=7), r.random_range(2..=7));
        let gs = Shape::new(1, 2, r.random_range(2..=5), r.random_range(2..=5));
        let inputs = [random_tensor(r, is, 0.0, 1.0), random_grid(r, gs.h(), gs.w(), 1.1)];
        check_gradient(
            &inputs,
            &|t, v| t.grid_sample(v[0], v[1]).unwrap(),
            &|x| shadow_grid_sample(&x[0], is, &x[1], gs),
            seed,
        )
    })
}

pub fn grad_resize_bicubic() -> GradReport {
    run("resize_bicubic", 1e-3, 4, |r, seed| {
        let (h, w) = (r.random_range(3..=8), r.random_range(3..=8));
        let (oh, ow) = match r.random_range(0..4) {
            0 => (2 * h, 2 * w),
            1 => (3 * h, 3 * w),
            2 => ((h / 2).max(1), (w / 2).max(1)),
            _ => (r.random_range(2..=10), r.random_range(2..=10)),
        };
        let s = Shape::new(1, r.random_range(1..=2), h, w);
        let inputs = [random_tensor(r, s, 0.0, 1.0)];
        check_gradient(
            &inputs,
            &|t, v| t.resize_bicubic(v[0], oh, ow).unwrap(),
            &|x| shadow_resize(&x[0], s, oh, ow),
            seed,
        )
    })
}

pub fn grad_l1_loss() -> GradReport {
    run("l1_loss", 1e-3, 5, |r, seed| {
        let s = Shape::new(1, r.random_range(1..=3), r.random_range(2..=6), r.random_range(2..=6));
        let target = random_tensor(r, s, 0.0, 1.0);
        let pred = Tensor::from_fn(s, |i| {
            let off = r.random_range(0.02f32..0.5);
            target.at(i[0], i[1], i[2], i[3]) + if r.random_bool(0.5) { off } else { -off }
        });
        let n = s.numel() as f64;
        check_gradient(
            &[pred, target],
            &|t, v| t.l1_loss(v[0], v[1]).unwrap(),
            &|x| vec![x[0].iter().zip(&x[1]).map(|(p, t)| (p - t).abs()).sum::<f64>() / n],
            seed,
        )
    })
}

pub fn grad_affine() -> GradReport {
    run("affine_warp", 1e-3, 6, |r, seed| {
        let (h, w) = (r.random_range(2..=6), r.random_range(2..=6));
        let p = Tensor::new(
            Shape::new(1, 1, 1, 6),
            cmsr::deform::AFFINE_IDENTITY.iter().map(|v| v + r.random_range(-0.3f32..0.3)).collect(),
        );
        let inputs = [p, random_grid(r, h, w, 1.0)];
        check_gradient(
            &inputs,
            &|t, v| t.affine_warp_grid(v[0], v[1]).unwrap(),
            &|x| shadow_affine(&x[0], &x[1]),
            seed,
        )
    })
}

pub fn grad_cpab() -> GradReport {
    run("cpab_warp", 1e-2, 7, |r, seed| {
        let tess = Tessellation::new(r.random_range(1..=3), r.random_range(1..=3)).unwrap();
        let basis = Arc::new(cpab_basis(tess).unwrap());
        let steps = [4, 8, 16][r.random_range(0..3)];
        let theta = random_tensor(r, Shape::new(1, 1, 1, basis.dim()), -0.4, 0.4);
        let (gh, gw) = (r.random_range(2..=5), r.random_range(2..=5));
        let inputs = [theta, random_grid(r, gh, gw, 0.95)];
        let b = Arc::clone(&basis);
        check_gradient(
            &inputs,
            &|t, v| t.cpab_warp_grid(v[0], v[1], &b, steps).unwrap(),
            &|x| shadow_cpab(&basis, steps, &x[0], &x[1]),
            seed,
        )
    })
}

pub fn grad_tps() -> GradReport {
    run("tps_warp", 1e-3, 8, |r, seed| {
        let k = r.random_range(2..=5);
        let lambda = if r.random_bool(0.5) { 0.0 } else { 0.01 };
        let solver = Arc::new(TpsSolver::lattice(k, lambda).unwrap());
        let disp = random_tensor(r, Shape::new(1, 1, k * k, 2), -0.1, 0.1);
        let (gh, gw) = (r.random_range(2..=5), r.random_range(2..=5));
        let inputs = [disp, random_grid(r, gh, gw, 1.1)];
        check_gradient(
            &inputs,
            &|t, v| t.tps_warp_grid(v[0], v[1], &solver).unwrap(),
            &|x| shadow_tps(k, lambda, &x[0], &x[1]),
            seed,
        )
    })
}

/// Affine → CPAB → TPS → bilinear sampling, differentiated end to end.
pub fn grad_stack() -> GradReport {
    run("deformation_stack", 1e-2, 9, |r, seed| {
        let (h, w) = (r.random_range(4..=7), r.random_range(4..=7));
        let cfg = DeformConfig {
            cells_x: 2,
            cells_y: 2,
            cpab_steps: 8,
            tps_side: 3,
            tps_lambda: 0.0,
        };
        let mut stack = DeformationStack::new(&cfg).unwrap();
        let img = random_tensor(r, Shape::new(1, 2, h, w), 0.0, 1.0);
        let affine = Tensor::new(
            Shape::new(1, 1, 1, 6),
            cmsr::deform::AFFINE_IDENTITY.iter().map(|v| v + r.random_range(-0.1f32..0.1)).collect(),
        );
        let coeffs = random_tensor(r, stack.cpab.coeffs.shape(), -0.2, 0.2);
        let disp = random_tensor(r, stack.tps.displacements.shape(), -0.05, 0.05);
        stack.enabled = cmsr::deform::LayerFlags::ALL;
        let (basis, steps, solver) = (Arc::clone(&stack.cpab.basis), cfg.cpab_steps, Arc::clone(&stack.tps.solver));
        let is = img.shape();
        let gs = Shape::new(1, 2, h, w);
        let id: Vec<f64> = identity_grid(h, w).data().iter().map(|&v| v as f64).collect();
        check_gradient(
            &[img, affine, coeffs, disp],
            &|t, v| {
                let g = t.constant(identity_grid(h, w));
                let g = t.affine_warp_grid(v[1], g).unwrap();
                let g = t.cpab_warp_grid(v[2], g, &basis, steps).unwrap();
                let g = t.tps_warp_grid(v[3], g, &solver).unwrap();
                t.grid_sample(v[0], g).unwrap()
            },
            &|x| {
                let g = shadow_affine(&x[1], &id);
                let g = shadow_cpab(&stack.cpab.basis, steps, &x[2], &g);
                let g = shadow_tps(3, 0.0, &x[3], &g);
                shadow_grid_sample(&x[0], is, &g, gs)
            },
            seed,
        )
    })
}

pub fn gradient_suite() -> Vec<GradReport> {
    vec![
        grad_conv2d(),
        grad_relu(),
        grad_grid_sample(),
        grad_resize_bicubic(),
        grad_l1_loss(),
        grad_affine(),
        grad_cpab(),
        grad_tps(),
        grad_stack(),
    ]
}

// ---------------------------------------------------------------------------
// identity suite

pub fn identity_suite() -> Vec<(&'static str, f64)> {
    let mut r = rng(11);
    let img = random_tensor(&mut r, Shape::new(1, 3, 13, 17), 0.0, 1.0);
    let stack = DeformationStack::new(&DeformConfig::default()).unwrap();
    let warped = stack.warp(&img).unwrap();
    let sampled = grid_sample_bilinear(&img, &identity_grid(13, 17)).unwrap();

    let weights = NetworkWeights::zeros(NetConfig::default());
    let m = random_tensor(&mut r, Shape::new(1, 1, 8, 10), 0.0, 1.0);
    let g = random_tensor(&mut r, Shape::new(1, 3, 16, 20), 0.0, 1.0);
    let (sr, _) = predict(&weights, &m, &g, 2).unwrap();
    let bic = resize_bicubic(&m, 16, 20);

    let grid = identity_grid(9, 11);
    let grid_err = |only: cmsr::deform::LayerFlags| {
        let mut s = DeformationStack::new(&DeformConfig::default()).unwrap();
        s.enabled = only;
        s.grid(9, 11).unwrap().max_abs_diff(&grid) as f64
    };
    use cmsr::deform::LayerFlags;
    vec![
        ("identity stack warp", warped.max_abs_diff(&img) as f64),
        ("identity grid sampling", sampled.max_abs_diff(&img) as f64),
        ("zero-weight network = bicubic", sr.max_abs_diff(&bic) as f64),
        ("zero-displacement TPS", grid_err(LayerFlags { affine: false, cpab: false, tps: true })),
        ("zero-coefficient CPAB", grid_err(LayerFlags { affine: false, cpab: true, tps: false })),
    ]
}

// ---------------------------------------------------------------------------
// CPAB structure

/// Largest velocity jump across any shared edge, sampled along each edge.
pub fn cpab_continuity(seed: u64) -> f64 {
    let mut r = rng(seed);
    let mut worst = 0.0f64;
    for (nx, ny) in [(1, 1), (2, 3), (4, 4), (5, 2)] {
        let tess = Tessellation::new(nx, ny).unwrap();
        let basis = cpab_basis(tess).unwrap();
        let theta: Vec<f64> = (0..basis.dim()).map(|_| r.random_range(-1.0..1.0)).collect();
        let a = cpab_params(&basis, &theta);
        for (ta, tb, p, q) in tess.shared_edges() {
            for s in [0.0, 0.25, 0.5, 0.75, 1.0] {
                let (x, y) = (p[0] + s * (q[0] - p[0]), p[1] + s * (q[1] - p[1]));
                let v = |t: usize| {
                    let c = &a[6 * t..6 * t + 6];
                    (c[0] * x + c[1] * y + c[2], c[3] * x + c[4] * y + c[5])
                };
                let (va, vb) = (v(ta), v(tb));
                worst = worst.max((va.0 - vb.0).abs()).max((va.1 - vb.1).abs());
            }
        }
    }
    worst
}

fn cpab_grid(field: &cmsr::deform::CpabField, coeffs: &[f32], grid: &Tensor) -> Tensor {
    let mut tape = Tape::no_grad();
    let c = tape.constant(Tensor::new(field.coeffs.shape(), coeffs.to_vec()));
    let g = tape.constant(grid.clone());
    let out = tape.cpab_warp_grid(c, g, &field.basis, field.n_steps).unwrap();
    tape.value(out).clone()
}

/// Integrating with `θ` then `-θ` returns every point within the reported distance.
pub fn cpab_forward_backward(seed: u64) -> f64 {
    let mut r = rng(seed);
    let field = cmsr::deform::CpabField::new(Tessellation::new(4, 4).unwrap(), 32).unwrap();
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let theta: Vec<f32> = (0..field.dim()).map(|_| r.random_range(-0.3..0.3)).collect();
        let neg: Vec<f32> = theta.iter().map(|v| -v).collect();
        let grid = random_grid(&mut r, 12, 12, 0.9);
        let back = cpab_grid(&field, &neg, &cpab_grid(&field, &theta, &grid));
        worst = worst.max(back.max_abs_diff(&grid) as f64);
    }
    worst
}

/// Uniform velocity `(tx, ty)` must translate every point by exactly that.
pub fn cpab_translation(seed: u64) -> f64 {
    let mut r = rng(seed);
    let field = cmsr::deform::CpabField::new(Tessellation::new(3, 4).unwrap(), 16).unwrap();
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let (tx, ty) = (r.random_range(-0.3..0.3), r.random_range(-0.3..0.3));
        let theta = field.basis.uniform_affine([0.0, 0.0, tx, 0.0, 0.0, ty]);
        let grid = random_grid(&mut r, 7, 9, 0.9);
        let out = cpab_grid(&field, &theta, &grid);
        let n = grid.shape().plane();
        for k in 0..n {
            worst = worst
                .max((out.data()[k] as f64 - grid.data()[k] as f64 - tx).abs())
                .max((out.data()[n + k] as f64 - grid.data()[n + k] as f64 - ty).abs());
        }
    }
    worst
}

// ---------------------------------------------------------------------------
// TPS exactness

/// With `λ = 0` the warp moves every control point by its displacement.
pub fn tps_interpolation(seed: u64) -> f64 {
    let mut r = rng(seed);
    let mut worst = 0.0f64;
    for k in 2..=7 {
        let solver = Arc::new(TpsSolver::lattice(k, 0.0).unwrap());
        let n = solver.len();
        let disp = random_tensor(&mut r, Shape::new(1, 1, n, 2), -0.2, 0.2);
        let pts = solver.control_points();
        let mut g = vec![0.0f32; 2 * n];
        for (i, p) in pts.iter().enumerate() {
            g[i] = p[0] as f32;
            g[n + i] = p[1] as f32;
        }
        let grid = Tensor::new(Shape::new(1, 2, 1, n), g);
        let mut tape = Tape::no_grad();
        let d = tape.constant(disp.clone());
        let gv = tape.constant(grid.clone());
        let out = tape.tps_warp_grid(d, gv, &solver).unwrap();
        let out = tape.value(out);
        for i in 0..n {
            let dx = out.data()[i] - grid.data()[i];
            let dy = out.data()[n + i] - grid.data()[n + i];
            worst = worst
                .max((dx - disp.data()[2 * i]).abs() as f64)
                .max((dy - disp.data()[2 * i + 1]).abs() as f64);
        }
    }
    worst
}
