//! Self-supervised training on a single image pair.
//!
//! Each iteration warps the whole guide, cuts one random patch pair and
//! trains the network to reconstruct the modality patch. Two schemes share
//! the ratio `r` between the network inputs:
//!
//! - downsampling-based: inputs are both patches reduced by `r`, the target
//!   is the modality patch itself;
//! - upsampling-based: inputs are the patches as cut, the target is the
//!   bicubic upsampling of the modality patch.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::deform::{apply_deformation, DeformConfig, DeformationStack, LayerFlags};
use crate::error::{Error, Result};
use crate::image_io::ImagePair;
use crate::net::{cmsr_forward, NetConfig, NetworkWeights};
use crate::patch::{extract_pair, sample_augmentation, AugmentationRanges};
use crate::record::{join, Record};
use crate::tensor::{Adam, AdamConfig, Downsampler, Tape, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Scheme {
    DownsamplingBased,
    UpsamplingBased,
}

/// Bernoulli draw: upsampling-based with probability `p_alt`.
pub fn select_scheme<R: Rng + ?Sized>(rng: &mut R, p_alt: f64) -> Scheme {
    if rng.random_bool(p_alt.clamp(0.0, 1.0)) {
        Scheme::UpsamplingBased
    } else {
        Scheme::DownsamplingBased
    }
}

/// Learning-rate multipliers of the deformation layers.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LayerFactors {
    pub affine: f32,
    pub cpab: f32,
    pub tps: f32,
}

impl Default for LayerFactors {
    fn default() -> Self {
        LayerFactors {
            affine: 1.0,
            cpab: 1.0,
            tps: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TrainConfig {
    pub r: usize,
    /// Modality patch side; clamped to the image by [`effective_patch_size`].
    pub patch_size: usize,
    pub base_lr: f64,
    pub min_lr: f64,
    pub lr_factors: LayerFactors,
    /// Probability of the upsampling-based scheme.
    pub p_alt: f64,
    pub max_iters: usize,
    /// Plateau window `W`.
    pub plateau_window: usize,
    pub plateau_threshold: f64,
    pub augmentation: AugmentationRanges,
    /// Fractions of `max_iters` at which CPAB and then TPS join training.
    pub stage_cpab: f64,
    pub stage_tps: f64,
    /// Deformation layers present in the model.
    pub layers: LayerFlags,
    /// When false the deformation stack is applied but never updated.
    pub train_deformation: bool,
    pub net: NetConfig,
    pub deform: DeformConfig,
    pub adam: AdamConfig,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            r: 2,
            patch_size: 32,
            base_lr: 1e-4,
            min_lr: 1e-6,
            lr_factors: LayerFactors::default(),
            p_alt: 0.3,
            max_iters: 3000,
            plateau_window: 100,
            plateau_threshold: 1.5,
            augmentation: AugmentationRanges::default(),
            stage_cpab: 0.2,
            stage_tps: 0.5,
            layers: LayerFlags::ALL,
            train_deformation: true,
            net: NetConfig::default(),
            deform: DeformConfig::default(),
            adam: AdamConfig::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.r < 2 {
            return Err(Error::InvalidScale(format!("scale must be at least 2, got {}", self.r)));
        }
        if !(0.0..=1.0).contains(&self.p_alt) {
            return Err(Error::Config(format!("p_alt {} not in [0, 1]", self.p_alt)));
        }
        if !(self.min_lr > 0.0 && self.base_lr >= self.min_lr) {
            return Err(Error::Config(format!(
                "need base_lr >= min_lr > 0, got {} and {}",
                self.base_lr, self.min_lr
            )));
        }
        if self.plateau_window < 3 {
            return Err(Error::Config("plateau window must be at least 3".into()));
        }
        if !(0.0..=1.0).contains(&self.stage_cpab) || !(0.0..=1.0).contains(&self.stage_tps) {
            return Err(Error::Config("stage fractions must lie in [0, 1]".into()));
        }
        self.augmentation.validate()?;
        self.net.validate()
    }

    /// Layers that are present and whose stage has started at `iteration`.
    pub fn active_layers(&self, iteration: usize) -> LayerFlags {
        let t = iteration as f64;
        let m = self.max_iters as f64;
        LayerFlags {
            affine: self.layers.affine,
            cpab: self.layers.cpab && t >= self.stage_cpab * m,
            tps: self.layers.tps && t >= self.stage_tps * m,
        }
    }
}

/// Patch side actually used for an `h × w` modality image: at most three
/// quarters of the shorter side, a multiple of `r`, and at least 8.
pub fn effective_patch_size(requested: usize, h: usize, w: usize, r: usize) -> Result<usize> {
    let cap = h.min(w) * 3 / 4;
    let s = requested.min(cap) / r * r;
    if s < 8 {
        return Err(Error::InvalidPair(format!(
            "a {h}×{w} modality image is too small for training patches at scale {r}"
        )));
    }
    Ok(s)
}

/// Least-squares slope of `values` against their index, and the standard
/// deviation of the fit residuals.
pub fn ls_slope(values: &[f32]) -> (f64, f64) {
    let n = values.len() as f64;
    let mx = (n - 1.0) / 2.0;
    let my = values.iter().map(|&v| v as f64).sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, &v) in values.iter().enumerate() {
        let dx = i as f64 - mx;
        sxy += dx * (v as f64 - my);
        sxx += dx * dx;
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let ss: f64 = values
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let e = v as f64 - (my + slope * (i as f64 - mx));
            e * e
        })
        .sum();
    (slope, (ss / n).sqrt())
}

/// A window has plateaued when `|slope| <= threshold · std(residuals) / W`
/// (equality admits a perfectly flat window).
pub fn plateau_detected(window: &[f32], threshold: f64) -> bool {
    let (slope, std) = ls_slope(window);
    slope.abs() <= threshold * std / window.len() as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum StopReason {
    Plateau,
    MaxIters,
}

impl StopReason {
    pub fn name(self) -> &'static str {
        match self {
            StopReason::Plateau => "plateau",
            StopReason::MaxIters => "max_iters",
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrainState {
    pub iteration: usize,
    /// Number of ×0.1 decays applied so far.
    pub decays: u32,
    pub lr: f64,
    window: VecDeque<f32>,
    since_decay: usize,
    final_plateau: bool,
}

impl TrainState {
    pub fn new(config: &TrainConfig) -> Self {
        TrainState {
            iteration: 0,
            decays: 0,
            lr: config.base_lr,
            window: VecDeque::with_capacity(config.plateau_window),
            since_decay: 0,
            final_plateau: false,
        }
    }

    pub fn record_loss(&mut self, loss: f32, window: usize) {
        if self.window.len() == window {
            self.window.pop_front();
        }
        self.window.push_back(loss);
        self.since_decay += 1;
        self.iteration += 1;
    }

    /// Applies the slope test once `W` losses have been seen since the
    /// last decay. Returns true when the learning rate was reduced.
    pub fn lr_schedule_update(&mut self, config: &TrainConfig) -> bool {
        let w = config.plateau_window;
        if self.since_decay < w || self.window.len() < w {
            return false;
        }
        let window: Vec<f32> = self.window.iter().copied().collect();
        if !plateau_detected(&window, config.plateau_threshold) {
            return false;
        }
        if self.lr <= config.min_lr {
            self.final_plateau = true;
            return false;
        }
        self.decays += 1;
        self.lr = (config.base_lr / 10f64.powi(self.decays as i32)).max(config.min_lr);
        self.since_decay = 0;
        true
    }

    pub fn should_stop(&self, config: &TrainConfig) -> Option<StopReason> {
        if self.iteration >= config.max_iters {
            Some(StopReason::MaxIters)
        } else if self.final_plateau {
            Some(StopReason::Plateau)
        } else {
            None
        }
    }
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct TrainReport {
    pub iterations: usize,
    pub final_loss: f32,
    pub loss_trace: Vec<f32>,
    /// `(iteration, lr)` at the start and after every decay.
    pub lr_trace: Vec<(usize, f64)>,
    pub up_scheme_steps: usize,
    pub stop_reason: Option<StopReason>,
    pub wall_time_secs: f64,
    pub seed: u64,
    pub patch_size: usize,
}

impl TrainReport {
    /// Mean of the last `n` recorded losses.
    pub fn tail_loss(&self, n: usize) -> f32 {
        let tail = &self.loss_trace[self.loss_trace.len().saturating_sub(n)..];
        if tail.is_empty() {
            return f32::NAN;
        }
        tail.iter().sum::<f32>() / tail.len() as f32
    }

    /// Summary fields as a text record; the full loss trace is omitted.
    pub fn to_record(&self) -> Record {
        let mut r = Record::new();
        r.set("iterations", self.iterations)
            .set("final_loss", self.final_loss)
            .set("tail_loss_100", self.tail_loss(100))
            .set("stop_reason", self.stop_reason.map_or("none", StopReason::name))
            .set("lr_trace", join(self.lr_trace.iter().map(|(i, lr)| format!("{i}:{lr:e}"))))
            .set("up_scheme_steps", self.up_scheme_steps)
            .set("patch_size", self.patch_size)
            .set("wall_time_secs", format!("{:.3}", self.wall_time_secs))
            .set("seed", self.seed);
        r
    }
}

/// Trained model and the run's record.
#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub weights: NetworkWeights,
    pub stack: DeformationStack,
    pub report: TrainReport,
}

#[derive(Clone, Copy, Debug)]
pub struct StepOutcome {
    pub loss: f32,
    pub scheme: Scheme,
    pub lr_decayed: bool,
}

struct Optimizers {
    net: Adam,
    affine: Adam,
    cpab: Adam,
    tps: Adam,
}

#[cfg(not(target_arch = "wasm32"))]
type Clock = Option<std::time::Instant>;
#[cfg(target_arch = "wasm32")]
type Clock = Option<()>;

/// A training session that can be advanced one iteration at a time.
pub struct Trainer {
    config: TrainConfig,
    modality: Tensor,
    guide: Tensor,
    modality_down: Downsampler,
    pub weights: NetworkWeights,
    pub stack: DeformationStack,
    pub state: TrainState,
    rng: ChaCha8Rng,
    opts: Optimizers,
    patch_size: usize,
    loss_trace: Vec<f32>,
    lr_trace: Vec<(usize, f64)>,
    up_steps: usize,
    elapsed: f64,
    clock: Clock,
}

impl Trainer {
    /// Fresh network and identity deformation, both drawn from `config.seed`.
    pub fn new(pair: &ImagePair, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let weights = NetworkWeights::init(config.net, &mut rng);
        let stack = DeformationStack::new(&config.deform)?;
        Trainer::from_parts(pair, config, weights, stack, rng)
    }

    /// Starts from the given deformation (e.g. a warm-started affine).
    pub fn with_stack(pair: &ImagePair, config: TrainConfig, stack: DeformationStack) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let weights = NetworkWeights::init(config.net, &mut rng);
        Trainer::from_parts(pair, config, weights, stack, rng)
    }

    fn from_parts(
        pair: &ImagePair,
        config: TrainConfig,
        weights: NetworkWeights,
        stack: DeformationStack,
        rng: ChaCha8Rng,
    ) -> Result<Self> {
        if pair.r != config.r {
            return Err(Error::Config(format!("pair scale {} differs from config scale {}", pair.r, config.r)));
        }
        let modality = pair.modality_tensor();
        let s = modality.shape();
        let patch_size = effective_patch_size(config.patch_size, s.h(), s.w(), config.r)?;
        let state = TrainState::new(&config);
        let lr_trace = vec![(0, state.lr)];
        Ok(Trainer {
            modality_down: pair.kernel.clone().map_or(Downsampler::Bicubic, Downsampler::Kernel),
            modality,
            guide: pair.guide_tensor(),
            weights,
            stack,
            state,
            rng,
            opts: Optimizers {
                net: Adam::new(config.adam),
                affine: Adam::new(config.adam),
                cpab: Adam::new(config.adam),
                tps: Adam::new(config.adam),
            },
            patch_size,
            loss_trace: Vec::new(),
            lr_trace,
            up_steps: 0,
            elapsed: 0.0,
            clock: None,
            config,
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn patch_size(&self) -> usize {
        self.patch_size
    }

    pub fn loss_trace(&self) -> &[f32] {
        &self.loss_trace
    }

    pub fn should_stop(&self) -> Option<StopReason> {
        self.state.should_stop(&self.config)
    }

    fn tick(&mut self) {
        #[cfg(not(target_arch = "wasm32"))]
        {
            let now = std::time::Instant::now();
            if let Some(prev) = self.clock {
                self.elapsed += now.duration_since(prev).as_secs_f64();
            }
            self.clock = Some(now);
        }
    }

    /// One scheme draw, forward, backward and optimizer update.
    pub fn step(&mut self) -> Result<StepOutcome> {
        if self.clock.is_none() {
            self.tick();
        }
        let scheme = select_scheme(&mut self.rng, self.config.p_alt);
        let (loss, scheme) = self.train_step(scheme)?;
        if scheme == Scheme::UpsamplingBased {
            self.up_steps += 1;
        }
        self.state.record_loss(loss, self.config.plateau_window);
        self.loss_trace.push(loss);
        let lr_decayed = self.state.lr_schedule_update(&self.config);
        if lr_decayed {
            self.lr_trace.push((self.state.iteration, self.state.lr));
        }
        self.tick();
        Ok(StepOutcome { loss, scheme, lr_decayed })
    }

    /// Forward, backward and update for an explicit scheme.
    pub fn train_step(&mut self, scheme: Scheme) -> Result<(f32, Scheme)> {
        let r = self.config.r;
        let s = self.patch_size;
        let active = self.config.active_layers(self.state.iteration);
        self.stack.enabled = active;
        let trainable = if self.config.train_deformation { active } else { LayerFlags::NONE };

        let mut tape = Tape::new();
        let guide = tape.constant(self.guide.detached());
        let modality = tape.constant(self.modality.detached());
        let (warped, stack_vars) = apply_deformation(&mut tape, &self.stack, guide, trainable)?;
        let ms = self.modality.shape();
        let aug = sample_augmentation(&mut self.rng, &self.config.augmentation, s, ms.h(), ms.w())?;
        let patches = extract_pair(&mut tape, modality, warped, &aug, s, r)?;
        let (m_in, g_in, target) = match scheme {
            Scheme::DownsamplingBased => {
                let m_in = tape.downsample(patches.modality, &self.modality_down, r)?;
                let g_in = tape.downsample(patches.guide, &Downsampler::Bicubic, r)?;
                (m_in, g_in, patches.modality)
            }
            Scheme::UpsamplingBased => {
                let target = tape.resize_bicubic(patches.modality, r * s, r * s)?;
                (patches.modality, patches.guide, target)
            }
        };
        let out = cmsr_forward(&mut tape, &self.weights, m_in, g_in, r, true)?;
        let loss_var = tape.l1_loss(out.sr, target)?;
        let loss = tape.value(loss_var).data()[0];
        if !loss.is_finite() {
            return Err(Error::NonFinite(format!(
                "training loss at iteration {} ({scheme:?})",
                self.state.iteration
            )));
        }
        tape.backward(loss_var)?;

        let lr = self.state.lr as f32;
        self.weights.zero_grad();
        self.weights.collect_grads(&tape, &out.params);
        self.opts.net.step(&mut self.weights.params_mut(), lr)?;

        self.stack.zero_grad();
        self.stack.collect_grads(&tape, &stack_vars);
        let f = self.config.lr_factors;
        if trainable.affine {
            self.opts.affine.step(&mut [&mut self.stack.affine.params], lr * f.affine)?;
        }
        if trainable.cpab {
            self.opts.cpab.step(&mut [&mut self.stack.cpab.coeffs], lr * f.cpab)?;
        }
        if trainable.tps {
            self.opts.tps.step(&mut [&mut self.stack.tps.displacements], lr * f.tps)?;
        }
        if !self.weights.is_finite() {
            return Err(Error::NonFinite(format!("network weights after iteration {}", self.state.iteration)));
        }
        Ok((loss, scheme))
    }

    /// Steps until the stop rule fires.
    pub fn run(mut self) -> Result<TrainOutcome> {
        while self.should_stop().is_none() {
            self.step()?;
        }
        Ok(self.finish())
    }

    /// Ends the session; the stack keeps every configured layer enabled.
    pub fn finish(mut self) -> TrainOutcome {
        self.stack.enabled = self.config.layers;
        let report = TrainReport {
            iterations: self.state.iteration,
            final_loss: self.loss_trace.last().copied().unwrap_or(f32::NAN),
            loss_trace: self.loss_trace,
            lr_trace: self.lr_trace,
            up_scheme_steps: self.up_steps,
            stop_reason: self.state.should_stop(&self.config),
            wall_time_secs: self.elapsed,
            seed: self.config.seed,
            patch_size: self.patch_size,
        };
        TrainOutcome {
            weights: self.weights,
            stack: self.stack,
            report,
        }
    }
}

/// Trains a fresh model on `pair` until the stop rule fires.
pub fn train(pair: &ImagePair, config: &TrainConfig) -> Result<TrainOutcome> {
    Trainer::new(pair, config.clone())?.run()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image_io::ImageBuffer;

    fn tiny_config() -> TrainConfig {
        TrainConfig {
            patch_size: 16,
            max_iters: 20,
            plateau_window: 10,
            net: NetConfig {
                fe1_layers: 2,
                fe1_channels: 4,
                fe2_layers: 4,
                fe2_channels: 4,
            },
            ..TrainConfig::default()
        }
    }

    fn tiny_pair() -> ImagePair {
        let (h, w) = (24, 24);
        let m: Vec<f32> = (0..h * w).map(|k| ((k % w) as f32 * 0.3).sin() * 0.4 + 0.5).collect();
        let g: Vec<f32> = (0..3 * 4 * h * w).map(|k| ((k % (2 * w)) as f32 * 0.15).sin() * 0.4 + 0.5).collect();
        ImagePair::new(
            ImageBuffer::new(h, w, 1, m).unwrap(),
            ImageBuffer::new(2 * h, 2 * w, 3, g).unwrap(),
            2,
            None,
        )
        .unwrap()
    }

    #[test]
    fn extreme_probabilities_are_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!((0..1000).all(|_| select_scheme(&mut rng, 0.0) == Scheme::DownsamplingBased));
        assert!((0..1000).all(|_| select_scheme(&mut rng, 1.0) == Scheme::UpsamplingBased));
    }

    #[test]
    fn slope_of_a_line() {
        let v: Vec<f32> = (0..50).map(|i| 3.0 - 0.02 * i as f32).collect();
        let (slope, std) = ls_slope(&v);
        assert!((slope + 0.02).abs() < 1e-6);
        assert!(std < 1e-5);
        assert!(!plateau_detected(&v, 1.5));
        assert!(plateau_detected(&[0.7; 50], 1.5));
    }

    #[test]
    fn lr_decays_on_constant_losses_and_stops_at_min() {
        let config = TrainConfig {
            plateau_window: 10,
            max_iters: 10_000,
            ..TrainConfig::default()
        };
        let mut state = TrainState::new(&config);
        let mut lrs = vec![state.lr];
        while state.should_stop(&config).is_none() {
            state.record_loss(0.5, config.plateau_window);
            if state.lr_schedule_update(&config) {
                lrs.push(state.lr);
            }
            assert!(state.lr >= config.min_lr);
        }
        assert_eq!(lrs, vec![1e-4, 1e-5, 1e-6]);
        assert_eq!(state.should_stop(&config), Some(StopReason::Plateau));
        assert_eq!(state.iteration, 30);
    }

    #[test]
    fn steep_descent_keeps_lr() {
        let config = TrainConfig {
            plateau_window: 10,
            ..TrainConfig::default()
        };
        let mut state = TrainState::new(&config);
        for i in 0..100 {
            state.record_loss(10.0 - 0.05 * i as f32, config.plateau_window);
            assert!(!state.lr_schedule_update(&config));
        }
        assert_eq!(state.lr, config.base_lr);
    }

    #[test]
    fn max_iters_stops() {
        let config = TrainConfig {
            max_iters: 3,
            ..TrainConfig::default()
        };
        let mut state = TrainState::new(&config);
        assert_eq!(state.should_stop(&config), None);
        for _ in 0..3 {
            state.record_loss(1.0, config.plateau_window);
        }
        assert_eq!(state.should_stop(&config), Some(StopReason::MaxIters));
    }

    #[test]
    fn patch_size_is_clamped_to_the_image() {
        assert_eq!(effective_patch_size(32, 128, 128, 2).unwrap(), 32);
        assert_eq!(effective_patch_size(32, 32, 32, 2).unwrap(), 24);
        assert_eq!(effective_patch_size(32, 30, 40, 4).unwrap(), 20);
        assert!(effective_patch_size(32, 8, 8, 2).is_err());
    }

    #[test]
    fn staging_follows_fractions() {
        let config = TrainConfig {
            max_iters: 100,
            ..TrainConfig::default()
        };
        assert_eq!(
            config.active_layers(19),
            LayerFlags {
                affine: true,
                cpab: false,
                tps: false
            }
        );
        assert!(config.active_layers(20).cpab && !config.active_layers(49).tps);
        assert_eq!(config.active_layers(50), LayerFlags::ALL);
    }

    #[test]
    fn affine_stage_leaves_later_layers_untouched() {
        let mut trainer = Trainer::new(&tiny_pair(), tiny_config()).unwrap();
        let before = trainer.weights.clone();
        let stack0 = trainer.stack.clone();
        trainer.step().unwrap();
        assert_ne!(trainer.weights, before);
        assert_ne!(trainer.stack.affine, stack0.affine);
        assert_eq!(trainer.stack.cpab.coeffs, stack0.cpab.coeffs);
        assert_eq!(trainer.stack.tps.displacements, stack0.tps.displacements);
    }

    #[test]
    fn fixed_seed_gives_identical_trace() {
        let config = TrainConfig {
            augmentation: AugmentationRanges::IDENTITY,
            p_alt: 0.0,
            train_deformation: false,
            ..tiny_config()
        };
        let a = train(&tiny_pair(), &config).unwrap();
        let b = train(&tiny_pair(), &config).unwrap();
        assert_eq!(a.report.loss_trace, b.report.loss_trace);
        assert_eq!(a.weights, b.weights);
        assert_eq!(a.report.iterations, 20);
    }

    #[test]
    fn invalid_probability_is_rejected() {
        let config = TrainConfig {
            p_alt: 1.5,
            ..tiny_config()
        };
        assert!(matches!(Trainer::new(&tiny_pair(), config), Err(Error::Config(_))));
    }
}
