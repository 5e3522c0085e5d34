//! Browser front end. Every image crosses into JS as RGBA bytes of a
//! square canvas whose side is reported by `size()`.

use cmsr::deform::{rg_overlay, AffineParams, DeformationStack};
use cmsr::infer::{iterative_back_projection, super_resolve};
use cmsr::metrics::psnr;
use cmsr::net::NetConfig;
use cmsr::synthetic::{Misalignment, SyntheticPair, SyntheticSpec};
use cmsr::tensor::resize::resize_bicubic;
use cmsr::tensor::{Downsampler, Tensor};
use cmsr::train::{TrainConfig, Trainer};
use rand::{Rng, SeedableRng};
use wasm_bindgen::prelude::*;

/// Interleaved RGBA of a 1- or 3-channel `[1, c, h, w]` tensor.
pub fn rgba(t: &Tensor) -> Vec<u8> {
    let s = t.shape();
    let p = s.h() * s.w();
    let code = |v: f32| (v.clamp(0.0, 1.0) * 255.0).round() as u8;
    let mut out = Vec::with_capacity(4 * p);
    for k in 0..p {
        for c in 0..3 {
            let ch = if s.c() == 1 { 0 } else { c };
            out.push(code(t.data()[ch * p + k]));
        }
        out.push(255);
    }
    out
}

fn replicate(t: &Tensor, f: usize) -> Tensor {
    let w = t.shape().w();
    let s = t.shape().with_spatial(t.shape().h() * f, w * f);
    Tensor::from_fn(s, |[_, _, y, x]| t.data()[(y / f) * w + x / f])
}

fn even_size(size: usize) -> usize {
    (size.clamp(32, 256) / 4) * 4
}

fn scene(seed: u32, size: usize, mis: Misalignment) -> SyntheticPair {
    SyntheticSpec {
        hr_size: size,
        misalignment: mis,
        ..SyntheticSpec::default()
    }
    .build(seed as u64)
    .expect("sizes are clamped to valid values")
}

/// Hand-driven deformation of a rendered guide.
#[wasm_bindgen]
pub struct WarpExplorer {
    size: usize,
    guide: Tensor,
    modality: Tensor,
    stack: DeformationStack,
}

#[wasm_bindgen]
impl WarpExplorer {
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u32, size: usize) -> WarpExplorer {
        let size = even_size(size);
        let data = scene(seed, size, Misalignment::default());
        WarpExplorer {
            size,
            guide: data.pair.guide_tensor(),
            modality: data.hr_modality,
            stack: DeformationStack::new(&TrainConfig::default().deform).expect("default tessellation"),
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Rotation in degrees, translation in pixels, isotropic scale.
    pub fn set_affine(&mut self, angle_deg: f32, tx_px: f32, ty_px: f32, scale: f32) {
        let half = self.size as f32 / 2.0;
        let base = AffineParams::rotation_translation(angle_deg.to_radians(), tx_px / half, ty_px / half).as_array();
        let p = [base[0] * scale, base[1] * scale, base[2], base[3] * scale, base[4] * scale, base[5]];
        self.stack.affine = AffineParams::from_array(p);
    }

    /// Random CPAB coefficients of the given amplitude.
    pub fn set_cpab(&mut self, amplitude: f32, seed: u32) {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed as u64);
        for v in self.stack.cpab.coeffs.data_mut() {
            *v = amplitude * rng.random_range(-1.0..1.0);
        }
    }

    /// Moves the central TPS control point by a pixel offset.
    pub fn set_tps(&mut self, dx_px: f32, dy_px: f32) {
        let half = self.size as f32 / 2.0;
        let n = self.stack.tps.solver.len();
        let d = self.stack.tps.displacements.data_mut();
        d.fill(0.0);
        d[2 * (n / 2)] = dx_px / half;
        d[2 * (n / 2) + 1] = dy_px / half;
    }

    pub fn warped(&self) -> Vec<u8> {
        rgba(&self.stack.warp(&self.guide).expect("guide is RGB"))
    }

    /// Red from the warped guide, green from the modality.
    pub fn overlay(&self) -> Vec<u8> {
        rgba(&rg_overlay(&self.stack.warp(&self.guide).expect("guide is RGB"), &self.modality))
    }

    /// Mean point displacement of the current warp, in pixels.
    pub fn mean_displacement(&self) -> f64 {
        let n = self.size;
        let grid = cmsr::deform::identity_grid(n, n);
        let (xs, ys) = (grid.plane(0, 0), grid.plane(0, 1));
        let total: f64 = xs
            .iter()
            .zip(ys)
            .map(|(&x, &y)| {
                let (px, py) = self.stack.transform_point(x, y);
                (((px - x) as f64).powi(2) + ((py - y) as f64).powi(2)).sqrt()
            })
            .sum();
        total / xs.len() as f64 * n as f64 / 2.0
    }
}

/// Downsample a rendered modality, upsample it again and back-project.
#[wasm_bindgen]
pub struct Resampling {
    size: usize,
    lr_view: Vec<u8>,
    bicubic: Vec<u8>,
    refined: Vec<u8>,
    trace: Vec<f64>,
    psnr_bicubic: f64,
    psnr_refined: f64,
}

#[wasm_bindgen]
impl Resampling {
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u32, size: usize, factor: usize, ibp_iters: usize) -> Resampling {
        let factor = factor.clamp(2, 4);
        let size = (even_size(size) / factor) * factor;
        let hr = scene(seed, size, Misalignment::default()).hr_modality;
        let lr = Downsampler::Bicubic.apply(&hr, factor).expect("size is a multiple of factor");
        let up = resize_bicubic(&lr, size, size);
        let (refined, trace) =
            iterative_back_projection(&up, &lr, factor, &Downsampler::Bicubic, ibp_iters.min(50), 0.0).expect("matching sizes");
        let lr_view = replicate(&lr, factor);
        Resampling {
            size,
            lr_view: rgba(&lr_view),
            bicubic: rgba(&up),
            refined: rgba(&refined),
            trace,
            psnr_bicubic: psnr(&up, &hr, 1.0).unwrap_or(f64::NAN),
            psnr_refined: psnr(&refined.map(|v| v.clamp(0.0, 1.0)), &hr, 1.0).unwrap_or(f64::NAN),
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// The low-resolution input, pixel-replicated to full size.
    pub fn lr_view(&self) -> Vec<u8> {
        self.lr_view.clone()
    }

    pub fn bicubic(&self) -> Vec<u8> {
        self.bicubic.clone()
    }

    pub fn refined(&self) -> Vec<u8> {
        self.refined.clone()
    }

    /// Mean absolute consistency error before each iteration and at the end.
    pub fn trace(&self) -> Vec<f64> {
        self.trace.clone()
    }

    pub fn psnr_bicubic(&self) -> f64 {
        self.psnr_bicubic
    }

    pub fn psnr_refined(&self) -> f64 {
        self.psnr_refined
    }
}

/// A small network trained a few iterations per call.
#[wasm_bindgen]
pub struct Session {
    trainer: Trainer,
    data: SyntheticPair,
    size: usize,
    psnr_bicubic: f64,
}

pub fn session_config(seed: u32) -> TrainConfig {
    TrainConfig {
        patch_size: 16,
        max_iters: 2000,
        net: NetConfig {
            fe1_layers: 3,
            fe1_channels: 12,
            fe2_layers: 4,
            fe2_channels: 12,
        },
        seed: seed as u64,
        ..TrainConfig::default()
    }
}

#[wasm_bindgen]
impl Session {
    /// 2× task on a rendered scene whose guide is shifted by `shift_px`.
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u32, size: usize, shift_px: f64) -> Session {
        let size = even_size(size);
        let data = scene(
            seed,
            size,
            Misalignment {
                shift_x: shift_px,
                ..Misalignment::default()
            },
        );
        let trainer = Trainer::new(&data.pair, session_config(seed)).expect("valid demo config");
        let bic = resize_bicubic(&data.pair.modality_tensor(), size, size);
        Session {
            psnr_bicubic: psnr(&bic, &data.hr_modality, 1.0).unwrap_or(f64::NAN),
            trainer,
            data,
            size,
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Runs up to `n` iterations; returns the last loss, or NaN once stopped.
    pub fn step(&mut self, n: usize) -> f32 {
        let mut last = f32::NAN;
        for _ in 0..n {
            if self.trainer.should_stop().is_some() {
                break;
            }
            match self.trainer.step() {
                Ok(o) => last = o.loss,
                Err(_) => break,
            }
        }
        last
    }

    pub fn iterations(&self) -> usize {
        self.trainer.loss_trace().len()
    }

    pub fn stopped(&self) -> bool {
        self.trainer.should_stop().is_some()
    }

    pub fn learning_rate(&self) -> f64 {
        self.trainer.state.lr
    }

    pub fn loss_trace(&self) -> Vec<f32> {
        self.trainer.loss_trace().to_vec()
    }

    fn predict(&self) -> cmsr::infer::SrOutput {
        let m = self.data.pair.modality_tensor();
        let g = self.data.pair.guide_tensor();
        super_resolve(&self.trainer.weights, &self.trainer.stack, &m, &g, 2).expect("pair ratio is 2")
    }

    /// Single-pass output of the current weights.
    pub fn preview(&self) -> Vec<u8> {
        rgba(&self.predict().sr)
    }

    pub fn overlay(&self) -> Vec<u8> {
        rgba(&rg_overlay(&self.predict().warped_guide, &self.data.hr_modality))
    }

    pub fn psnr(&self) -> f64 {
        let sr = self.predict().sr.map(|v| v.clamp(0.0, 1.0));
        psnr(&sr, &self.data.hr_modality, 1.0).unwrap_or(f64::NAN)
    }

    pub fn psnr_bicubic(&self) -> f64 {
        self.psnr_bicubic
    }

    /// Learned translation in pixels, `[tx, ty]`.
    pub fn translation_px(&self) -> Vec<f32> {
        let p = self.trainer.stack.affine.as_array();
        let half = self.size as f32 / 2.0;
        vec![p[2] * half, p[5] * half]
    }
}
