use super::gemm::{sgemm, Layout};
use super::{Backward, Shape, Tape, Tensor, Var};
use crate::error::{Error, Result};

/// Spatial geometry of a same-padded convolution.
#[derive(Clone, Copy)]
struct Geometry {
    c: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
}

impl Geometry {
    fn rows(&self) -> usize {
        self.c * self.kh * self.kw
    }

    fn cols(&self) -> usize {
        self.h * self.w
    }

    /// Lays out every receptive field of a `c × h × w` image as a column.
    fn im2col(&self, img: &[f32], col: &mut [f32]) {
        let (h, w) = (self.h as isize, self.w as isize);
        let (ph, pw) = ((self.kh / 2) as isize, (self.kw / 2) as isize);
        let p = self.cols();
        for c in 0..self.c {
            let plane = &img[c * p..(c + 1) * p];
            for ky in 0..self.kh {
                for kx in 0..self.kw {
                    let row = (c * self.kh + ky) * self.kw + kx;
                    let dst = &mut col[row * p..(row + 1) * p];
                    let dy = ky as isize - ph;
                    let dx = kx as isize - pw;
                    for y in 0..h {
                        let out = &mut dst[(y * w) as usize..((y + 1) * w) as usize];
                        let iy = y + dy;
                        if iy < 0 || iy >= h {
                            out.fill(0.0);
                            continue;
                        }
                        let src = &plane[(iy * w) as usize..((iy + 1) * w) as usize];
                        let x0 = (-dx).clamp(0, w);
                        let x1 = (w - dx).clamp(0, w);
                        out[..x0 as usize].fill(0.0);
                        out[x1 as usize..].fill(0.0);
                        if x1 > x0 {
                            out[x0 as usize..x1 as usize]
                                .copy_from_slice(&src[(x0 + dx) as usize..(x1 + dx) as usize]);
                        }
                    }
                }
            }
        }
    }

    /// Adjoint of [`Geometry::im2col`]: scatters columns back onto the image.
    fn col2im(&self, col: &[f32], img: &mut [f32]) {
        let (h, w) = (self.h as isize, self.w as isize);
        let (ph, pw) = ((self.kh / 2) as isize, (self.kw / 2) as isize);
        let p = self.cols();
        for c in 0..self.c {
            let plane = &mut img[c * p..(c + 1) * p];
            for ky in 0..self.kh {
                for kx in 0..self.kw {
                    let row = (c * self.kh + ky) * self.kw + kx;
                    let src = &col[row * p..(row + 1) * p];
                    let dy = ky as isize - ph;
                    let dx = kx as isize - pw;
                    for y in 0..h {
                        let iy = y + dy;
                        if iy < 0 || iy >= h {
                            continue;
                        }
                        let x0 = (-dx).clamp(0, w);
                        let x1 = (w - dx).clamp(0, w);
                        let s = &src[(y * w) as usize..((y + 1) * w) as usize];
                        let d = &mut plane[(iy * w) as usize..((iy + 1) * w) as usize];
                        for x in x0..x1 {
                            d[(x + dx) as usize] += s[x as usize];
                        }
                    }
                }
            }
        }
    }
}

struct Conv2d {
    geom: Geometry,
}

impl Backward for Conv2d {
    fn backward(&self, inputs: &[&Tensor], output: &Tensor, g: &[f32], needs: &[bool]) -> Vec<Option<Vec<f32>>> {
        let (input, weight) = (inputs[0], inputs[1]);
        let geom = self.geom;
        let n = input.shape().n();
        let o = output.shape().c();
        let (k, p) = (geom.rows(), geom.cols());
        let in_per = geom.c * p;

        let mut gin = needs[0].then(|| vec![0.0f32; input.len()]);
        let mut gw = needs[1].then(|| vec![0.0f32; weight.len()]);
        let gb = needs[2].then(|| {
            let mut gb = vec![0.0f32; o];
            for b in 0..n {
                for (oc, acc) in gb.iter_mut().enumerate() {
                    let start = (b * o + oc) * p;
                    *acc += g[start..start + p].iter().sum::<f32>();
                }
            }
            gb
        });

        let mut col = vec![0.0f32; k * p];
        for b in 0..n {
            let gout = &g[b * o * p..(b + 1) * o * p];
            if let Some(gw) = gw.as_mut() {
                geom.im2col(&input.data()[b * in_per..(b + 1) * in_per], &mut col);
                sgemm(o, p, k, gout, Layout::Normal, &col, Layout::Transposed, 1.0, gw);
            }
            if let Some(gin) = gin.as_mut() {
                sgemm(k, o, p, weight.data(), Layout::Transposed, gout, Layout::Normal, 0.0, &mut col);
                geom.col2im(&col, &mut gin[b * in_per..(b + 1) * in_per]);
            }
        }
        vec![gin, gw, gb]
    }
}

impl Tape {
    /// Same-padded (zero padding) 2-D convolution with odd kernel sizes.
    ///
    /// `weight` has shape `[out_c, in_c, kh, kw]`; `bias` holds `out_c` values.
    pub fn conv2d(&mut self, input: Var, weight: Var, bias: Var) -> Result<Var> {
        let si = self.shape(input);
        let sw = self.shape(weight);
        let [o, ci, kh, kw] = sw.0;
        if ci != si.c() {
            return Err(Error::InvalidShape {
                op: "conv2d",
                reason: format!("input has {} channels but weights {sw} expect {ci}", si.c()),
            });
        }
        if kh % 2 == 0 || kw % 2 == 0 {
            return Err(Error::InvalidShape {
                op: "conv2d",
                reason: format!("kernel {kh}x{kw} must have odd sides"),
            });
        }
        if self.shape(bias).numel() != o {
            return Err(Error::InvalidShape {
                op: "conv2d",
                reason: format!("bias has {} values, expected {o}", self.shape(bias).numel()),
            });
        }
        let geom = Geometry {
            c: ci,
            h: si.h(),
            w: si.w(),
            kh,
            kw,
        };
        let (k, p) = (geom.rows(), geom.cols());
        let out_shape = Shape::new(si.n(), o, si.h(), si.w());
        let mut out = vec![0.0f32; out_shape.numel()];
        let mut col = vec![0.0f32; k * p];
        let x = self.value(input).data();
        let wt = self.value(weight).data();
        let bs = self.value(bias).data();
        for b in 0..si.n() {
            let dst = &mut out[b * o * p..(b + 1) * o * p];
            for (oc, chunk) in dst.chunks_exact_mut(p).enumerate() {
                chunk.fill(bs[oc]);
            }
            geom.im2col(&x[b * ci * p..(b + 1) * ci * p], &mut col);
            sgemm(o, k, p, wt, Layout::Normal, &col, Layout::Normal, 1.0, dst);
        }
        Ok(self.record(Tensor::new(out_shape, out), &[input, weight, bias], Conv2d { geom }))
    }
}
