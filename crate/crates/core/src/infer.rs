//! Full-image super-resolution with a trained model, plus the two
//! refinements (dihedral self-ensemble, iterative back-projection) and
//! gradual multi-stage SR.

use crate::deform::DeformationStack;
use crate::error::{Error, Result};
use crate::image_io::{ImageBuffer, ImagePair};
use crate::net::{predict, NetworkWeights};
use crate::tensor::resize::resize_bicubic;
use crate::tensor::{Downsampler, Shape, Tensor};
use crate::train::{train, TrainConfig, TrainReport};

/// Network output on the full pair.
#[derive(Clone, Debug)]
pub struct SrOutput {
    pub sr: Tensor,
    /// Guide after the learned deformation.
    pub warped_guide: Tensor,
    /// The guide branch's contribution (learned RGB residual).
    pub residual: Tensor,
}

/// Warps the full guide, then runs the network once on the full images.
/// Values are left unclamped.
pub fn super_resolve(
    weights: &NetworkWeights,
    stack: &DeformationStack,
    modality: &Tensor,
    guide: &Tensor,
    r: usize,
) -> Result<SrOutput> {
    check_ratio(modality, guide, r)?;
    let warped_guide = stack.warp(guide)?;
    let (sr, residual) = predict(weights, modality, &warped_guide, r)?;
    Ok(SrOutput {
        sr,
        warped_guide,
        residual,
    })
}

fn check_ratio(modality: &Tensor, guide: &Tensor, r: usize) -> Result<()> {
    let (m, g) = (modality.shape(), guide.shape());
    if g.h() != r * m.h() || g.w() != r * m.w() {
        return Err(Error::ShapeMismatch {
            op: "super_resolve",
            expected: g.with_spatial(r * m.h(), r * m.w()),
            got: g,
        });
    }
    Ok(())
}

/// One of the 8 symmetries of the square: `k % 4` quarter turns, preceded
/// by a horizontal flip when `k >= 4`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Dihedral(pub u8);

impl Dihedral {
    pub const ALL: [Dihedral; 8] = [
        Dihedral(0),
        Dihedral(1),
        Dihedral(2),
        Dihedral(3),
        Dihedral(4),
        Dihedral(5),
        Dihedral(6),
        Dihedral(7),
    ];

    fn flip(self) -> bool {
        self.0 >= 4
    }

    fn turns(self) -> u8 {
        self.0 % 4
    }

    pub fn inverse(self) -> Dihedral {
        if self.flip() {
            self
        } else {
            Dihedral((4 - self.turns()) % 4)
        }
    }

    /// Applies the transform to every plane. Odd turns swap height and width.
    pub fn apply(self, t: &Tensor) -> Tensor {
        let s = t.shape();
        let (h, w) = (s.h(), s.w());
        let (oh, ow) = if self.turns() % 2 == 1 { (w, h) } else { (h, w) };
        let mut out = Tensor::zeros(Shape::new(s.n(), s.c(), oh, ow));
        for n in 0..s.n() {
            for c in 0..s.c() {
                let src = t.plane(n, c);
                let dst = out.plane_mut(n, c);
                for y in 0..oh {
                    for x in 0..ow {
                        // source coordinates of output pixel (y, x)
                        let (sy, sx) = match self.turns() {
                            0 => (y, x),
                            1 => (x, w - 1 - y),
                            2 => (h - 1 - y, w - 1 - x),
                            _ => (h - 1 - x, y),
                        };
                        let sx = if self.flip() { w - 1 - sx } else { sx };
                        dst[y * ow + x] = src[sy * w + sx];
                    }
                }
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Aggregate {
    #[default]
    Median,
    Mean,
}

fn aggregate(members: &[Tensor], how: Aggregate) -> Tensor {
    let shape = members[0].shape();
    let mut out = vec![0.0f32; shape.numel()];
    let mut values = vec![0.0f32; members.len()];
    for (k, o) in out.iter_mut().enumerate() {
        for (v, m) in values.iter_mut().zip(members) {
            *v = m.data()[k];
        }
        *o = match how {
            Aggregate::Mean => (values.iter().map(|&v| v as f64).sum::<f64>() / values.len() as f64) as f32,
            Aggregate::Median => {
                values.sort_by(f32::total_cmp);
                let n = values.len();
                if n % 2 == 1 {
                    values[n / 2]
                } else {
                    (values[n / 2 - 1] + values[n / 2]) / 2.0
                }
            }
        };
    }
    Tensor::new(shape, out)
}

/// Runs the network on all 8 dihedral transforms of the (modality, warped
/// guide) pair, maps each output back and aggregates pixelwise.
/// Returns the aggregate and the inverse-transformed members.
pub fn geometric_self_ensemble(
    weights: &NetworkWeights,
    modality: &Tensor,
    warped_guide: &Tensor,
    r: usize,
    how: Aggregate,
) -> Result<(Tensor, Vec<Tensor>)> {
    check_ratio(modality, warped_guide, r)?;
    let mut members = Vec::with_capacity(8);
    for d in Dihedral::ALL {
        let (sr, _) = predict(weights, &d.apply(modality), &d.apply(warped_guide), r)?;
        members.push(d.inverse().apply(&sr));
    }
    Ok((aggregate(&members, how), members))
}

/// Mean absolute downsample-consistency error `|lr - down(sr)|`.
pub fn consistency_error(sr: &Tensor, lr: &Tensor, r: usize, down: &Downsampler) -> Result<f64> {
    let d = down.apply(sr, r)?;
    if d.shape() != lr.shape() {
        return Err(Error::ShapeMismatch {
            op: "consistency_error",
            expected: lr.shape(),
            got: d.shape(),
        });
    }
    Ok(d.data().iter().zip(lr.data()).map(|(a, b)| (a - b).abs() as f64).sum::<f64>() / lr.len() as f64)
}

/// `sr ← sr + bicubic_up(lr - down(sr))`, at most `n_iters` times, stopping
/// early once the consistency error drops below `tol`. Returns the refined
/// image and the consistency error before each iteration and at the end.
pub fn iterative_back_projection(
    sr: &Tensor,
    lr: &Tensor,
    r: usize,
    down: &Downsampler,
    n_iters: usize,
    tol: f64,
) -> Result<(Tensor, Vec<f64>)> {
    let s = sr.shape();
    if s.h() != r * lr.shape().h() || s.w() != r * lr.shape().w() {
        return Err(Error::ShapeMismatch {
            op: "iterative_back_projection",
            expected: s.with_spatial(r * lr.shape().h(), r * lr.shape().w()),
            got: s,
        });
    }
    let plan = down.plan(s.h(), s.w(), r)?;
    let mut cur = sr.detached();
    let mut trace = Vec::with_capacity(n_iters + 1);
    for _ in 0..n_iters {
        let e: Vec<f32> = lr.data().iter().zip(plan.apply(&cur).data()).map(|(a, b)| a - b).collect();
        let err = e.iter().map(|v| v.abs() as f64).sum::<f64>() / e.len() as f64;
        trace.push(err);
        if err < tol {
            return Ok((cur, trace));
        }
        let up = resize_bicubic(&Tensor::new(lr.shape(), e), s.h(), s.w());
        cur.data_mut().iter_mut().zip(up.data()).for_each(|(c, u)| *c += u);
    }
    let e = plan.apply(&cur);
    trace.push(e.data().iter().zip(lr.data()).map(|(a, b)| (a - b).abs() as f64).sum::<f64>() / e.len() as f64);
    Ok((cur, trace))
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct InferenceConfig {
    /// Scale factor of each gradual stage.
    pub per_stage: usize,
    pub ensemble: bool,
    pub aggregate: Aggregate,
    pub ibp_iters: usize,
    pub ibp_tol: f64,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        InferenceConfig {
            per_stage: 2,
            ensemble: true,
            aggregate: Aggregate::Median,
            ibp_iters: 8,
            ibp_tol: 1e-5,
        }
    }
}

/// Number of stages reaching `target_r` with factor `per_stage`.
pub fn stage_count(target_r: usize, per_stage: usize) -> Result<usize> {
    if per_stage < 2 || target_r < 2 {
        return Err(Error::InvalidScale(format!(
            "scale {target_r} with per-stage factor {per_stage}"
        )));
    }
    let (mut acc, mut n) = (1usize, 0usize);
    while acc < target_r {
        acc *= per_stage;
        n += 1;
    }
    if acc != target_r {
        return Err(Error::InvalidScale(format!(
            "{target_r} is not a power of the per-stage factor {per_stage}"
        )));
    }
    Ok(n)
}

#[derive(Clone, Debug)]
pub struct StageResult {
    /// Refined output of this stage (unclamped).
    pub sr: Tensor,
    /// Network output before ensemble and back-projection.
    pub single_pass: Tensor,
    pub warped_guide: Tensor,
    pub residual: Tensor,
    pub ensemble_members: usize,
    pub ibp_trace: Vec<f64>,
    pub report: TrainReport,
    pub stack: DeformationStack,
    pub weights: NetworkWeights,
}

#[derive(Clone, Debug)]
pub struct SrResult {
    pub sr: Tensor,
    pub stages: Vec<StageResult>,
}

/// Trains and super-resolves one stage whose pair is already at ratio
/// `train.r`; `stack` optionally warm-starts the deformation.
pub fn run_stage(
    pair: &ImagePair,
    train_cfg: &TrainConfig,
    infer: &InferenceConfig,
    warm: Option<DeformationStack>,
) -> Result<StageResult> {
    let outcome = match warm {
        Some(stack) => crate::train::Trainer::with_stack(pair, train_cfg.clone(), stack)?.run()?,
        None => train(pair, train_cfg)?,
    };
    let modality = pair.modality_tensor();
    let guide = pair.guide_tensor();
    let r = pair.r;
    let single = super_resolve(&outcome.weights, &outcome.stack, &modality, &guide, r)?;
    let (sr, members) = if infer.ensemble {
        let (agg, members) = geometric_self_ensemble(&outcome.weights, &modality, &single.warped_guide, r, infer.aggregate)?;
        (agg, members.len())
    } else {
        (single.sr.clone(), 1)
    };
    let down = pair.kernel.clone().map_or(Downsampler::Bicubic, Downsampler::Kernel);
    let (sr, ibp_trace) = iterative_back_projection(&sr, &modality, r, &down, infer.ibp_iters, infer.ibp_tol)?;
    Ok(StageResult {
        sr,
        single_pass: single.sr,
        warped_guide: single.warped_guide,
        residual: single.residual,
        ensemble_members: members,
        ibp_trace,
        report: outcome.report,
        stack: outcome.stack,
        weights: outcome.weights,
    })
}

/// Reaches `pair.r` through stages of `infer.per_stage`. Each stage trains
/// a fresh network on (current modality, guide reduced to the stage ratio),
/// whose deformation starts from the previous stage's affine map; the
/// refined output becomes the next stage's modality input.
pub fn gradual_sr(pair: &ImagePair, train_cfg: &TrainConfig, infer: &InferenceConfig) -> Result<SrResult> {
    let n = stage_count(pair.r, infer.per_stage)?;
    let (h, w) = (pair.modality.height(), pair.modality.width());
    let guide = pair.guide_tensor();
    let mut current = pair.modality.clone();
    let mut stages: Vec<StageResult> = Vec::with_capacity(n);
    let mut scale = 1;
    for k in 0..n {
        scale *= infer.per_stage;
        let stage_guide = if k + 1 == n {
            pair.guide.clone()
        } else {
            ImageBuffer::from_tensor(&resize_bicubic(&guide, h * scale, w * scale))?
        };
        let stage_pair = ImagePair::new(current.clone(), stage_guide, infer.per_stage, pair.kernel.clone())?;
        let cfg = TrainConfig {
            r: infer.per_stage,
            seed: train_cfg.seed.wrapping_add(k as u64),
            ..train_cfg.clone()
        };
        let warm = stages.last().map(|prev| {
            let mut stack = DeformationStack::new(&cfg.deform).expect("config validated by the first stage");
            stack.affine = prev.stack.affine.clone();
            stack
        });
        let stage = run_stage(&stage_pair, &cfg, infer, warm)?;
        current = ImageBuffer::from_tensor(&stage.sr)?;
        stages.push(stage);
    }
    let sr = stages.last().map(|s| s.sr.clone()).expect("at least one stage");
    Ok(SrResult { sr, stages })
}
