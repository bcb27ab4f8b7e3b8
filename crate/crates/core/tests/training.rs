mod common;

use common::*;
use galerkin_gcn::cases::ModeKind;

#[test]
fn essential_values_stay_exact_through_training() {
    assert_eq!(clamping_defect("poisson_square", ModeKind::Forward, 5), 0.0);
    assert_eq!(
        clamping_defect("elasticity_square", ModeKind::Forward, 5),
        0.0
    );
}

#[test]
fn hard_mode_clamps_observations_every_iterate() {
    assert_eq!(
        clamping_defect("poisson_inverse", ModeKind::InverseHard, 5),
        0.0
    );
    assert_eq!(
        clamping_defect("lame_inverse", ModeKind::InverseHard, 5),
        0.0
    );
}

#[test]
fn soft_mode_still_clamps_essential_values() {
    assert_eq!(
        clamping_defect("poisson_inverse", ModeKind::InverseSoft, 5),
        0.0
    );
}

#[test]
fn identical_runs_give_identical_errors() {
    let diff = rerun_difference("poisson_square", ModeKind::Forward, 20);
    assert!(diff <= 1e-12, "{diff:e}");
}
