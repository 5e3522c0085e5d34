use cmsr::deform::rg_overlay;
use cmsr::synthetic::SyntheticSpec;
use cmsr_web::{rgba, Resampling, Session, WarpExplorer};

#[test]
fn rgba_replicates_gray() {
    let t = cmsr::tensor::Tensor::new(cmsr::tensor::Shape::new(1, 1, 1, 2), vec![0.0, 1.0]);
    assert_eq!(rgba(&t), vec![0, 0, 0, 255, 255, 255, 255, 255]);
}

#[test]
fn identity_explorer_shows_the_naive_blend() {
    let ex = WarpExplorer::new(3, 64);
    let data = SyntheticSpec {
        hr_size: 64,
        ..SyntheticSpec::default()
    }
    .build(3)
    .unwrap();
    assert_eq!(ex.overlay(), rgba(&rg_overlay(&data.pair.guide_tensor(), &data.hr_modality)));
    assert!(ex.mean_displacement() < 1e-3);
}

#[test]
fn explorer_translation_is_reported_in_pixels() {
    let mut ex = WarpExplorer::new(1, 64);
    ex.set_affine(0.0, 3.0, 4.0, 1.0);
    assert!((ex.mean_displacement() - 5.0).abs() < 1e-3);
    ex.set_affine(0.0, 0.0, 0.0, 1.0);
    ex.set_tps(2.0, 0.0);
    let d = ex.mean_displacement();
    assert!(d > 0.0 && d < 2.0);
    ex.set_tps(0.0, 0.0);
    ex.set_cpab(0.3, 9);
    assert!(ex.mean_displacement() > 0.01);
    assert_eq!(ex.warped().len(), 64 * 64 * 4);
}

#[test]
fn back_projection_reduces_inconsistency() {
    let r = Resampling::new(2, 64, 2, 6);
    let t = r.trace();
    assert_eq!(t.len(), 7);
    assert!(t[1] < t[0] && t[6] < t[0]);
    assert_eq!(r.refined().len(), 64 * 64 * 4);
    assert_eq!(r.lr_view().len(), r.bicubic().len());
    assert!(r.psnr_refined().is_finite() && r.psnr_bicubic().is_finite());
}

#[test]
fn session_steps_reduce_loss() {
    let mut s = Session::new(4, 48, 0.0);
    s.step(40);
    assert_eq!(s.iterations(), 40);
    let trace = s.loss_trace();
    let head: f32 = trace[..10].iter().sum();
    let tail: f32 = trace[30..].iter().sum();
    assert!(tail < head, "{head} -> {tail}");
    assert_eq!(s.preview().len(), 48 * 48 * 4);
    assert!(s.psnr().is_finite());
    assert_eq!(s.translation_px().len(), 2);
}

#[test]
fn sessions_are_reproducible() {
    let run = || {
        let mut s = Session::new(5, 32, 1.0);
        s.step(8);
        s.loss_trace()
    };
    assert_eq!(run(), run());
}
