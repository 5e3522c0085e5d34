//! Randomized invariants.

mod common;

use cmsr::config::RunConfig;
use cmsr::image_io::{load_image, save_image, BitDepth, ImageBuffer};
use cmsr::infer::{iterative_back_projection, Dihedral};
use cmsr::metrics::{psnr, ssim};
use cmsr::patch::{footprint_point, patch_grid, sample_augmentation, AugmentationRanges};
use cmsr::tensor::{Downsampler, Shape, Tensor};
use cmsr::train::{TrainConfig, TrainState};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn image(seed: u64, shape: Shape) -> Tensor {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    common::random_tensor(&mut r, shape, 0.0, 1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sampled_footprints_stay_inside(seed in any::<u64>(), h in 24usize..80, w in 24usize..80, s in 8usize..20) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let aug = sample_augmentation(&mut rng, &AugmentationRanges::default(), s, h, w).unwrap();
        for (u, v) in [(0.0, 0.0), (s as f64, 0.0), (0.0, s as f64), (s as f64, s as f64)] {
            let (x, y) = footprint_point(&aug, s, h, w, u, v);
            prop_assert!(x.abs() <= 1.0 + 1e-6 && y.abs() <= 1.0 + 1e-6);
        }
    }

    #[test]
    fn coarse_grid_is_block_mean_of_fine_grid(seed in any::<u64>(), r in 2usize..5, s in 8usize..14) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let aug = sample_augmentation(&mut rng, &AugmentationRanges::default(), s, 64, 64).unwrap();
        let coarse = patch_grid(&aug, s, 1, 64, 64);
        let fine = patch_grid(&aug, s, r, 64, 64);
        let n = s * r;
        for c in 0..2 {
            for i in 0..s {
                for j in 0..s {
                    let mut acc = 0.0f64;
                    for a in 0..r {
                        for b in 0..r {
                            acc += fine.plane(0, c)[(i * r + a) * n + j * r + b] as f64;
                        }
                    }
                    let mean = acc / (r * r) as f64;
                    prop_assert!((mean - coarse.plane(0, c)[i * s + j] as f64).abs() < 1e-5);
                }
            }
        }
    }

    #[test]
    fn metrics_are_symmetric_and_dihedral_invariant(seed in any::<u64>(), t in 0u8..8) {
        let s = Shape::new(1, 1, 16, 16);
        let a = image(seed, s);
        let b = image(seed.wrapping_add(1), s);
        let d = Dihedral(t);
        let (p, q) = (psnr(&a, &b, 1.0).unwrap(), psnr(&b, &a, 1.0).unwrap());
        prop_assert!((p - q).abs() < 1e-9);
        prop_assert!((psnr(&d.apply(&a), &d.apply(&b), 1.0).unwrap() - p).abs() < 1e-6);
        let (x, y) = (ssim(&a, &b, 1.0).unwrap(), ssim(&b, &a, 1.0).unwrap());
        prop_assert!((x - y).abs() < 1e-9);
        prop_assert!((ssim(&d.apply(&a), &d.apply(&b), 1.0).unwrap() - x).abs() < 1e-6);
    }

    #[test]
    fn dihedral_inverse_round_trips(seed in any::<u64>(), t in 0u8..8, h in 1usize..9, w in 1usize..9) {
        let a = image(seed, Shape::new(1, 2, h, w));
        let d = Dihedral(t);
        prop_assert_eq!(d.inverse().apply(&d.apply(&a)), a);
    }

    #[test]
    fn back_projection_first_iteration_reduces_error(seed in any::<u64>()) {
        let lr = image(seed, Shape::new(1, 1, 12, 12));
        let sr = image(seed ^ 7, Shape::new(1, 1, 24, 24));
        let (_, trace) = iterative_back_projection(&sr, &lr, 2, &Downsampler::Bicubic, 1, 0.0).unwrap();
        prop_assert!(trace[1] < trace[0], "{:?}", trace);
    }

    #[test]
    fn lr_trace_is_non_increasing_and_quantized(seed in any::<u64>(), noise in 0.0f32..0.05) {
        let cfg = TrainConfig { plateau_window: 10, ..TrainConfig::default() };
        let mut st = TrainState::new(&cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut prev = st.lr;
        for i in 0..400 {
            let loss = 1.0 / (1.0 + i as f32 * 0.01) + rng.random_range(0.0..=noise);
            st.record_loss(loss, cfg.plateau_window);
            st.lr_schedule_update(&cfg);
            prop_assert!(st.lr <= prev && st.lr >= cfg.min_lr);
            let k = (cfg.base_lr / st.lr).log10();
            prop_assert!((k - k.round()).abs() < 1e-9);
            prev = st.lr;
        }
    }

    #[test]
    fn config_echo_round_trips(p in 0.0f64..1.0, iters in 1usize..10000, seed in any::<u64>(), mean in any::<bool>()) {
        let mut cfg = RunConfig::default();
        cfg.train.p_alt = p;
        cfg.train.max_iters = iters;
        cfg.train.seed = seed;
        cfg.infer.aggregate = if mean { cmsr::infer::Aggregate::Mean } else { cmsr::infer::Aggregate::Median };
        prop_assert_eq!(RunConfig::parse(&cfg.to_record().to_string()).unwrap(), cfg);
    }
}

#[test]
fn sixteen_bit_round_trip_is_exact_to_one_code() {
    let dir = tempfile::tempdir().unwrap();
    let t = image(5, Shape::new(1, 1, 9, 11));
    let img = ImageBuffer::from_tensor(&t).unwrap();
    for (depth, name) in [(BitDepth::Sixteen, "a.png"), (BitDepth::Eight, "b.png")] {
        let path = dir.path().join(name);
        save_image(&img, &path, depth).unwrap();
        let back = load_image(&path).unwrap();
        assert_eq!(back.source_bit_depth, depth);
        let step = 0.5 / depth.max_code() + 1e-7;
        for (a, b) in back.data().iter().zip(img.data()) {
            assert!((a - b).abs() <= step, "{depth:?}: {a} vs {b}");
        }
    }
}

#[test]
fn psnr_decreases_with_noise_amplitude() {
    let a = image(9, Shape::new(1, 1, 32, 32));
    let noise = image(10, Shape::new(1, 1, 32, 32));
    let mut last = f64::INFINITY;
    for amp in [0.01f32, 0.02, 0.05, 0.1, 0.2] {
        let b = Tensor::new(a.shape(), a.data().iter().zip(noise.data()).map(|(x, n)| x + amp * (n - 0.5)).collect());
        let p = psnr(&a, &b, 1.0).unwrap();
        assert!(p < last, "{amp}: {p} >= {last}");
        last = p;
    }
}
