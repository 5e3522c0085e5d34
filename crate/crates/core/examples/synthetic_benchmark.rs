//! Trains on a rendered scene and compares against bicubic upsampling.
//!
//! `cargo run --release -p cmsr-core --example synthetic_benchmark -- [key=value ...]`
//!
//! Accepts every config key plus `shift`, `rotation` and `noise_guide`.

use cmsr::config::RunConfig;
use cmsr::deform::AFFINE_IDENTITY;
use cmsr::infer::super_resolve;
use cmsr::metrics::psnr;
use cmsr::synthetic::{endpoint_error, Misalignment, SyntheticSpec};
use cmsr::tensor::resize::resize_bicubic;
use cmsr::train::train;

fn main() -> cmsr::Result<()> {
    let mut cfg = RunConfig::default();
    let mut spec = SyntheticSpec::default();
    for arg in std::env::args().skip(1) {
        let (k, v) = arg.split_once('=').expect("arguments are key=value");
        match k {
            "shift" => {
                let s: f64 = v.parse().expect("shift");
                spec.misalignment.shift_x = s;
            }
            "rotation" => spec.misalignment.rotation_deg = v.parse().expect("rotation"),
            "noise_guide" => spec.noise_guide = v == "1" || v == "true",
            _ => cfg.set(k, v)?,
        }
    }
    let seed = cfg.train.seed;
    let data = SyntheticSpec { r: cfg.train.r, ..spec }.build(seed)?;
    let out = train(&data.pair, &cfg.train)?;
    let m = data.pair.modality_tensor();
    let g = data.pair.guide_tensor();
    let sr = super_resolve(&out.weights, &out.stack, &m, &g, cfg.train.r)?;
    let n = spec.hr_size;
    let bic = resize_bicubic(&m, n, n);
    let clamp = |t: &cmsr::tensor::Tensor| t.map(|v| v.clamp(0.0, 1.0));
    print!("{}", out.report.to_record());
    if std::env::var_os("CMSR_TRACE").is_some() {
        for w in out.report.loss_trace.chunks(50) {
            let (slope, std) = cmsr::train::ls_slope(w);
            let mean = w.iter().sum::<f32>() / w.len() as f32;
            println!("mean={mean:.5} slope={slope:.3e} std={std:.3e} ratio={:.3}", slope * w.len() as f64 / std);
        }
    }
    if spec.misalignment != Misalignment::default() {
        let ideal = data.misalignment.ideal_affine(n, n);
        let mut identity = out.stack.clone();
        identity.affine = cmsr::deform::AffineParams::from_array(AFFINE_IDENTITY);
        identity.enabled = cmsr::deform::LayerFlags::NONE;
        println!(
            "epe_identity={:.3} epe_learned={:.3} affine={:?}",
            endpoint_error(&identity, &ideal, n, n),
            endpoint_error(&out.stack, &ideal, n, n),
            out.stack.affine
        );
    }
    println!(
        "bicubic={:.3} sr={:.3}",
        psnr(&bic, &data.hr_modality, 1.0)?,
        psnr(&clamp(&sr.sr), &data.hr_modality, 1.0)?
    );
    Ok(())
}
