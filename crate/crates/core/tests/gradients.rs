//! Analytic gradients of every differentiable op against central
//! differences of independent float64 forwards.

mod common;

use common::GradReport;

fn assert_report(rep: GradReport) {
    println!("{}: worst relative error {:.2e} over {} instances", rep.op, rep.worst, rep.instances);
    assert!(rep.passed(), "{} gradient error {:.3e} exceeds {:.0e}", rep.op, rep.worst, rep.tol);
}

#[test]
fn conv2d() {
    assert_report(common::grad_conv2d());
}

#[test]
fn relu() {
    assert_report(common::grad_relu());
}

#[test]
fn grid_sample() {
    assert_report(common::grad_grid_sample());
}

#[test]
fn resize_bicubic() {
    assert_report(common::grad_resize_bicubic());
}

#[test]
fn l1_loss() {
    assert_report(common::grad_l1_loss());
}

#[test]
fn affine_warp() {
    assert_report(common::grad_affine());
}

#[test]
fn cpab_warp() {
    assert_report(common::grad_cpab());
}

#[test]
fn tps_warp() {
    assert_report(common::grad_tps());
}

#[test]
fn composed_deformation_stack() {
    assert_report(common::grad_stack());
}
