mod common;

#[test]
fn oracle_residual_vanishes_on_every_case() {
    for (name, r) in common::oracle_residuals() {
        println!("{name:24} |R_u| {r:.3e}");
        assert!(r < 1e-9, "{name}: {r:e}");
    }
}
