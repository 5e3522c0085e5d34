//! The super-resolution network: two convolutional feature extractors whose
//! single-channel outputs are added to the bicubic upsampling of the input.
//!
//! `sr = up + FE1(up) + FE2(guide)` with `up = bicubic(modality, ×r)`.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::tensor::{Shape, Tape, Tensor, Var};

/// Scale applied to the He-initialized head of each extractor.
pub const HEAD_INIT_SCALE: f32 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct NetConfig {
    /// Hidden 3×3 + ReLU layers of the modality branch.
    pub fe1_layers: usize,
    pub fe1_channels: usize,
    /// Hidden 3×3 + ReLU layers of the guide branch.
    pub fe2_layers: usize,
    pub fe2_channels: usize,
}

impl Default for NetConfig {
    fn default() -> Self {
        NetConfig {
            fe1_layers: 8,
            fe1_channels: 64,
            fe2_layers: 6,
            fe2_channels: 64,
        }
    }
}

impl NetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.fe1_layers == 0 || self.fe1_channels == 0 {
            return Err(Error::Config("feature extractor 1 needs at least one layer and channel".into()));
        }
        if !(4..=8).contains(&self.fe2_layers) || !(4..=128).contains(&self.fe2_channels) {
            return Err(Error::Config(format!(
                "feature extractor 2 needs 4-8 layers and 4-128 channels, got {} × {}",
                self.fe2_layers, self.fe2_channels
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvLayer {
    /// `[out, in, k, k]`.
    pub weight: Tensor,
    /// `[1, out, 1, 1]`.
    pub bias: Tensor,
    pub relu: bool,
}

impl ConvLayer {
    fn zeros(out: usize, inp: usize, k: usize, relu: bool) -> Self {
        ConvLayer {
            weight: Tensor::zeros(Shape::new(out, inp, k, k)),
            bias: Tensor::zeros(Shape::new(1, out, 1, 1)),
            relu,
        }
    }

    pub fn fan_in(&self) -> usize {
        let s = self.weight.shape();
        s.c() * s.h() * s.w()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Branch {
    Modality,
    Guide,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NetworkWeights {
    pub config: NetConfig,
    pub fe1: Vec<ConvLayer>,
    pub fe2: Vec<ConvLayer>,
}

fn extractor(input: usize, hidden: usize, channels: usize, head_kernel: usize) -> Vec<ConvLayer> {
    let mut layers = Vec::with_capacity(hidden + 1);
    let mut c = input;
    for _ in 0..hidden {
        layers.push(ConvLayer::zeros(channels, c, 3, true));
        c = channels;
    }
    layers.push(ConvLayer::zeros(1, c, head_kernel, false));
    layers
}

impl NetworkWeights {
    /// All-zero weights: the network reduces to bicubic upsampling.
    pub fn zeros(config: NetConfig) -> Self {
        NetworkWeights {
            config,
            fe1: extractor(1, config.fe1_layers, config.fe1_channels, 3),
            fe2: extractor(3, config.fe2_layers, config.fe2_channels, 1),
        }
    }

    /// He-normal kernels (`std = √(2 / fan_in)`), heads scaled by
    /// [`HEAD_INIT_SCALE`], zero biases.
    pub fn init<R: Rng + ?Sized>(config: NetConfig, rng: &mut R) -> Self {
        let mut w = NetworkWeights::zeros(config);
        for branch in [&mut w.fe1, &mut w.fe2] {
            let last = branch.len() - 1;
            for (i, layer) in branch.iter_mut().enumerate() {
                let std = (2.0 / layer.fan_in() as f64).sqrt();
                let normal = Normal::new(0.0, std).expect("positive std");
                let scale = if i == last { HEAD_INIT_SCALE } else { 1.0 };
                for v in layer.weight.data_mut() {
                    *v = normal.sample(rng) as f32 * scale;
                }
            }
        }
        w
    }

    pub fn layers(&self) -> impl Iterator<Item = &ConvLayer> {
        self.fe1.iter().chain(&self.fe2)
    }

    pub fn layers_mut(&mut self) -> impl Iterator<Item = &mut ConvLayer> {
        self.fe1.iter_mut().chain(self.fe2.iter_mut())
    }

    /// Every weight and bias tensor, FE1 first.
    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers_mut().flat_map(|l| [&mut l.weight, &mut l.bias]).collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers().all(|l| l.weight.is_finite() && l.bias.is_finite())
    }

    pub fn collect_grads(&mut self, tape: &Tape, vars: &[Var]) {
        for (p, v) in self.params_mut().into_iter().zip(vars) {
            tape.accumulate_grad(*v, p);
        }
    }

    pub fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }
}

fn record_params(tape: &mut Tape, layers: &[ConvLayer], trainable: bool, vars: &mut Vec<Var>) -> Vec<(Var, Var, bool)> {
    layers
        .iter()
        .map(|l| {
            let mut w = l.weight.detached();
            let mut b = l.bias.detached();
            w.set_requires_grad(trainable);
            b.set_requires_grad(trainable);
            let (w, b) = (tape.leaf(w), tape.leaf(b));
            vars.extend([w, b]);
            (w, b, l.relu)
        })
        .collect()
}

fn run_layers(tape: &mut Tape, input: Var, layers: &[(Var, Var, bool)]) -> Result<Var> {
    let mut x = input;
    for (i, &(w, b, relu)) in layers.iter().enumerate() {
        let y = tape.conv2d(x, w, b)?;
        let y = if relu {
            let z = tape.relu(y);
            tape.release(y);
            z
        } else {
            y
        };
        if i > 0 {
            tape.release(x);
        }
        x = y;
    }
    Ok(x)
}

/// Runs one extractor on its own, without gradients for the weights.
pub fn feature_extractor_forward(weights: &NetworkWeights, branch: Branch, x: &Tensor) -> Result<Tensor> {
    let layers = match branch {
        Branch::Modality => &weights.fe1,
        Branch::Guide => &weights.fe2,
    };
    let mut tape = Tape::no_grad();
    let mut vars = Vec::new();
    let params = record_params(&mut tape, layers, false, &mut vars);
    let input = tape.constant(x.detached());
    let out = run_layers(&mut tape, input, &params)?;
    Ok(tape.value(out).clone())
}

/// Tape handles produced by [`cmsr_forward`].
#[derive(Clone, Debug)]
pub struct ForwardVars {
    pub sr: Var,
    /// Bicubic upsampling of the modality input.
    pub up: Var,
    pub fe1: Var,
    /// The learned guide residual.
    pub fe2: Var,
    /// Weight and bias leaves in [`NetworkWeights::params_mut`] order.
    pub params: Vec<Var>,
}

/// Records `up + FE1(up) + FE2(guide)`; the guide must be exactly `r` times
/// the modality in both axes.
pub fn cmsr_forward(
    tape: &mut Tape,
    weights: &NetworkWeights,
    modality: Var,
    guide: Var,
    r: usize,
    trainable: bool,
) -> Result<ForwardVars> {
    let (ms, gs) = (tape.shape(modality), tape.shape(guide));
    if ms.c() != 1 || gs.c() != 3 || gs.h() != r * ms.h() || gs.w() != r * ms.w() {
        return Err(Error::ShapeMismatch {
            op: "cmsr_forward",
            expected: Shape::new(ms.n(), 3, r * ms.h(), r * ms.w()),
            got: gs,
        });
    }
    let mut params = Vec::with_capacity(2 * (weights.fe1.len() + weights.fe2.len()));
    let fe1_params = record_params(tape, &weights.fe1, trainable, &mut params);
    let fe2_params = record_params(tape, &weights.fe2, trainable, &mut params);
    let up = tape.resize_bicubic(modality, gs.h(), gs.w())?;
    let fe1 = run_layers(tape, up, &fe1_params)?;
    let fe2 = run_layers(tape, guide, &fe2_params)?;
    let partial = tape.add(up, fe1)?;
    let sr = tape.add(partial, fe2)?;
    Ok(ForwardVars {
        sr,
        up,
        fe1,
        fe2,
        params,
    })
}

/// Eager forward pass returning `(sr, fe2_residual)`.
pub fn predict(weights: &NetworkWeights, modality: &Tensor, guide: &Tensor, r: usize) -> Result<(Tensor, Tensor)> {
    let mut tape = Tape::no_grad();
    let m = tape.constant(modality.detached());
    let g = tape.constant(guide.detached());
    let out = cmsr_forward(&mut tape, weights, m, g, r, false)?;
    Ok((tape.value(out.sr).clone(), tape.value(out.fe2).clone()))
}
