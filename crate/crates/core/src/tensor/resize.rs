//! Linear resampling: Catmull-Rom bicubic resize with antialiasing and
//! blur-kernel decimation.
//!
//! Both are fixed linear maps of the input, so their backward pass is the
//! transposed map.

use std::path::Path;
use std::rc::Rc;

use super::{Backward, Tape, Tensor, Var};
#[cfg(test)]
use super::Shape;
use crate::error::{Error, Result};

const CUBIC_A: f64 = -0.5;

/// Catmull-Rom cubic convolution kernel (`a = -0.5`).
pub fn cubic(x: f64) -> f64 {
    let x = x.abs();
    if x <= 1.0 {
        ((CUBIC_A + 2.0) * x - (CUBIC_A + 3.0)) * x * x + 1.0
    } else if x < 2.0 {
        ((CUBIC_A * x - 5.0 * CUBIC_A) * x + 8.0 * CUBIC_A) * x - 4.0 * CUBIC_A
    } else {
        0.0
    }
}

/// Sparse weights mapping one axis of length `src` onto `dst` samples.
#[derive(Clone, Debug)]
pub struct AxisPlan {
    src: usize,
    rows: Vec<Vec<(usize, f32)>>,
}

impl AxisPlan {
    /// Bicubic weights under the pixel-center convention. When shrinking,
    /// the kernel is stretched by the scale factor so it also low-passes.
    pub fn bicubic(src: usize, dst: usize) -> Self {
        assert!(src > 0 && dst > 0);
        let scale = src as f64 / dst as f64;
        let stretch = scale.max(1.0);
        let support = 2.0 * stretch;
        let rows = (0..dst)
            .map(|i| {
                let center = (i as f64 + 0.5) * scale - 0.5;
                let lo = (center - support).floor() as isize;
                let hi = (center + support).ceil() as isize;
                let mut taps: Vec<(usize, f64)> = Vec::new();
                for j in lo..=hi {
                    let wgt = cubic((j as f64 - center) / stretch);
                    if wgt == 0.0 {
                        continue;
                    }
                    let idx = j.clamp(0, src as isize - 1) as usize;
                    match taps.iter_mut().find(|(k, _)| *k == idx) {
                        Some((_, w)) => *w += wgt,
                        None => taps.push((idx, wgt)),
                    }
                }
                let total: f64 = taps.iter().map(|(_, w)| w).sum();
                taps.into_iter().map(|(k, w)| (k, (w / total) as f32)).collect()
            })
            .collect();
        AxisPlan { src, rows }
    }

    pub fn src_len(&self) -> usize {
        self.src
    }

    pub fn dst_len(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[Vec<(usize, f32)>] {
        &self.rows
    }
}

/// A linear map between images of fixed sizes, applied per plane.
pub trait LinearResample {
    fn src_size(&self) -> (usize, usize);
    fn dst_size(&self) -> (usize, usize);
    fn apply_plane(&self, src: &[f32], dst: &mut [f32]);
    /// Adds `transpose(map) · grad` into `acc`.
    fn apply_plane_transpose(&self, grad: &[f32], acc: &mut [f32]);

    fn apply(&self, input: &Tensor) -> Tensor {
        let s = input.shape();
        assert_eq!((s.h(), s.w()), self.src_size(), "resample input size");
        let (h, w) = self.dst_size();
        let mut out = Tensor::zeros(s.with_spatial(h, w));
        for n in 0..s.n() {
            for c in 0..s.c() {
                self.apply_plane(input.plane(n, c), out.plane_mut(n, c));
            }
        }
        out
    }
}

/// Separable bicubic resize.
#[derive(Clone, Debug)]
pub struct Resize {
    x: AxisPlan,
    y: AxisPlan,
}

impl Resize {
    pub fn bicubic(src_h: usize, src_w: usize, dst_h: usize, dst_w: usize) -> Self {
        Resize {
            x: AxisPlan::bicubic(src_w, dst_w),
            y: AxisPlan::bicubic(src_h, dst_h),
        }
    }

    pub fn axis_x(&self) -> &AxisPlan {
        &self.x
    }

    pub fn axis_y(&self) -> &AxisPlan {
        &self.y
    }
}

impl LinearResample for Resize {
    fn src_size(&self) -> (usize, usize) {
        (self.y.src, self.x.src)
    }

    fn dst_size(&self) -> (usize, usize) {
        (self.y.dst_len(), self.x.dst_len())
    }

    fn apply_plane(&self, src: &[f32], dst: &mut [f32]) {
        let (sw, dw) = (self.x.src, self.x.dst_len());
        let sh = self.y.src;
        let mut tmp = vec![0.0f32; sh * dw];
        for y in 0..sh {
            let row = &src[y * sw..(y + 1) * sw];
            for (x, taps) in self.x.rows.iter().enumerate() {
                tmp[y * dw + x] = taps.iter().map(|&(k, w)| row[k] * w).sum();
            }
        }
        for (y, taps) in self.y.rows.iter().enumerate() {
            let out = &mut dst[y * dw..(y + 1) * dw];
            out.fill(0.0);
            for &(k, w) in taps {
                let row = &tmp[k * dw..(k + 1) * dw];
                out.iter_mut().zip(row).for_each(|(o, r)| *o += w * r);
            }
        }
    }

    fn apply_plane_transpose(&self, grad: &[f32], acc: &mut [f32]) {
        let (sw, dw) = (self.x.src, self.x.dst_len());
        let sh = self.y.src;
        let mut tmp = vec![0.0f32; sh * dw];
        for (y, taps) in self.y.rows.iter().enumerate() {
            let g = &grad[y * dw..(y + 1) * dw];
            for &(k, w) in taps {
                let row = &mut tmp[k * dw..(k + 1) * dw];
                row.iter_mut().zip(g).for_each(|(r, g)| *r += w * g);
            }
        }
        for y in 0..sh {
            let out = &mut acc[y * sw..(y + 1) * sw];
            for (x, taps) in self.x.rows.iter().enumerate() {
                let g = tmp[y * dw + x];
                for &(k, w) in taps {
                    out[k] += w * g;
                }
            }
        }
    }
}

/// A normalized 2-D blur kernel used for decimation.
#[derive(Clone, Debug, PartialEq)]
pub struct BlurKernel {
    h: usize,
    w: usize,
    weights: Vec<f32>,
}

impl BlurKernel {
    /// Normalizes `weights` (row-major `h × w`) to sum to one.
    pub fn new(h: usize, w: usize, weights: Vec<f32>) -> Result<Self> {
        if h == 0 || w == 0 || weights.len() != h * w {
            return Err(Error::InvalidKernel(format!(
                "{} values do not form a {h}x{w} kernel",
                weights.len()
            )));
        }
        if weights.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidKernel("non-finite weight".into()));
        }
        let total: f64 = weights.iter().map(|&v| v as f64).sum();
        if total.abs() < 1e-12 {
            return Err(Error::InvalidKernel("weights sum to zero".into()));
        }
        let weights = weights.iter().map(|&v| (v as f64 / total) as f32).collect();
        Ok(BlurKernel { h, w, weights })
    }

    /// Parses whitespace-separated rows of floats: one kernel row per line.
    pub fn parse(text: &str) -> Result<Self> {
        let mut rows: Vec<Vec<f32>> = Vec::new();
        for line in text.lines() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let row = line
                .split(|c: char| c.is_whitespace() || c == ',')
                .filter(|s| !s.is_empty())
                .map(|s| s.parse::<f32>().map_err(|e| Error::InvalidKernel(format!("{s:?}: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        let w = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != w) {
            return Err(Error::InvalidKernel("rows have different lengths".into()));
        }
        BlurKernel::new(rows.len(), w, rows.concat())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        BlurKernel::parse(&text).map_err(|e| Error::InvalidKernel(format!("{}: {e}", path.display())))
    }

    pub fn size(&self) -> (usize, usize) {
        (self.h, self.w)
    }

    pub fn weights(&self) -> &[f32] {
        &self.weights
    }
}

/// Blur with a kernel then keep every `factor`-th sample, aligned so that
/// output pixel centers sit at the centers of their `factor × factor` blocks.
#[derive(Clone, Debug)]
pub struct KernelDecimate {
    kernel: BlurKernel,
    factor: usize,
    src: (usize, usize),
}

impl KernelDecimate {
    pub fn new(kernel: BlurKernel, factor: usize, src_h: usize, src_w: usize) -> Self {
        KernelDecimate {
            kernel,
            factor,
            src: (src_h, src_w),
        }
    }

    fn origin(&self, i: usize, ksize: usize) -> isize {
        let r = self.factor as isize;
        // integer offset placing the kernel center on the block center
        i as isize * r + (r - ksize as isize).div_euclid(2)
    }
}

impl LinearResample for KernelDecimate {
    fn src_size(&self) -> (usize, usize) {
        self.src
    }

    fn dst_size(&self) -> (usize, usize) {
        (self.src.0 / self.factor, self.src.1 / self.factor)
    }

    fn apply_plane(&self, src: &[f32], dst: &mut [f32]) {
        let (sh, sw) = self.src;
        let (dh, dw) = self.dst_size();
        let (kh, kw) = self.kernel.size();
        for y in 0..dh {
            let oy = self.origin(y, kh);
            for x in 0..dw {
                let ox = self.origin(x, kw);
                let mut acc = 0.0f32;
                for ky in 0..kh {
                    let iy = (oy + ky as isize).clamp(0, sh as isize - 1) as usize;
                    for kx in 0..kw {
                        let ix = (ox + kx as isize).clamp(0, sw as isize - 1) as usize;
                        acc += self.kernel.weights[ky * kw + kx] * src[iy * sw + ix];
                    }
                }
                dst[y * dw + x] = acc;
            }
        }
    }

    fn apply_plane_transpose(&self, grad: &[f32], acc: &mut [f32]) {
        let (sh, sw) = self.src;
        let (dh, dw) = self.dst_size();
        let (kh, kw) = self.kernel.size();
        for y in 0..dh {
            let oy = self.origin(y, kh);
            for x in 0..dw {
                let ox = self.origin(x, kw);
                let g = grad[y * dw + x];
                for ky in 0..kh {
                    let iy = (oy + ky as isize).clamp(0, sh as isize - 1) as usize;
                    for kx in 0..kw {
                        let ix = (ox + kx as isize).clamp(0, sw as isize - 1) as usize;
                        acc[iy * sw + ix] += self.kernel.weights[ky * kw + kx] * g;
                    }
                }
            }
        }
    }
}

/// How images are reduced by an integer factor.
#[derive(Clone, Debug, Default, PartialEq)]
pub enum Downsampler {
    /// Antialiased bicubic resize.
    #[default]
    Bicubic,
    /// User-provided blur kernel followed by decimation.
    Kernel(BlurKernel),
}

impl Downsampler {
    pub fn plan(&self, h: usize, w: usize, factor: usize) -> Result<Rc<dyn LinearResample>> {
        if factor == 0 || h % factor != 0 || w % factor != 0 {
            return Err(Error::InvalidScale(format!(
                "{h}x{w} is not divisible by factor {factor}"
            )));
        }
        Ok(match self {
            Downsampler::Bicubic => Rc::new(Resize::bicubic(h, w, h / factor, w / factor)),
            Downsampler::Kernel(k) => Rc::new(KernelDecimate::new(k.clone(), factor, h, w)),
        })
    }

    pub fn apply(&self, input: &Tensor, factor: usize) -> Result<Tensor> {
        let s = input.shape();
        Ok(self.plan(s.h(), s.w(), factor)?.apply(input))
    }
}

/// Bicubic resize of every plane to `out_h × out_w`.
pub fn resize_bicubic(input: &Tensor, out_h: usize, out_w: usize) -> Tensor {
    let s = input.shape();
    Resize::bicubic(s.h(), s.w(), out_h, out_w).apply(input)
}

struct Resample(Rc<dyn LinearResample>);

impl Backward for Resample {
    fn backward(&self, inputs: &[&Tensor], output: &Tensor, g: &[f32], needs: &[bool]) -> Vec<Option<Vec<f32>>> {
        vec![needs[0].then(|| {
            let s = inputs[0].shape();
            let so = output.shape();
            let mut acc = vec![0.0f32; inputs[0].len()];
            for n in 0..s.n() {
                for c in 0..s.c() {
                    let gi = (n * s.c() + c) * so.plane();
                    let ai = (n * s.c() + c) * s.plane();
                    self.0.apply_plane_transpose(&g[gi..gi + so.plane()], &mut acc[ai..ai + s.plane()]);
                }
            }
            acc
        })]
    }
}

impl Tape {
    /// Applies a linear resampling map to every plane of `input`.
    pub fn resample(&mut self, input: Var, map: Rc<dyn LinearResample>) -> Result<Var> {
        let s = self.shape(input);
        if (s.h(), s.w()) != map.src_size() {
            let (h, w) = map.src_size();
            return Err(Error::ShapeMismatch {
                op: "resample",
                expected: s.with_spatial(h, w),
                got: s,
            });
        }
        let out = map.apply(self.value(input));
        Ok(self.record(out, &[input], Resample(map)))
    }

    pub fn resize_bicubic(&mut self, input: Var, out_h: usize, out_w: usize) -> Result<Var> {
        if out_h == 0 || out_w == 0 {
            return Err(Error::InvalidShape {
                op: "resize_bicubic",
                reason: format!("output size {out_h}x{out_w}"),
            });
        }
        let s = self.shape(input);
        self.resample(input, Rc::new(Resize::bicubic(s.h(), s.w(), out_h, out_w)))
    }

    /// Reduces `input` by `factor` with the given downsampler.
    pub fn downsample(&mut self, input: Var, down: &Downsampler, factor: usize) -> Result<Var> {
        let s = self.shape(input);
        let plan = down.plan(s.h(), s.w(), factor)?;
        self.resample(input, plan)
    }
}
