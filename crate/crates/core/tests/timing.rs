//! Wall-time sanity of the Fourier formulation. Kept in its own binary so no
//! other test competes for the CPU.

use expint::bench::{run_experiment, ExperimentConfig, LambdaSource};
use expint::scheme::SchemeId;

#[test]
fn first_order_schemes_cost_the_same_per_step() {
    let cfg = ExperimentConfig {
        schemes: vec![SchemeId::Ee, SchemeId::Le, SchemeId::Sle, SchemeId::Bfe],
        steps: vec![256],
        n: 128,
        lambda: LambdaSource::Value(0.6),
        reference_factor: 1,
        repeat: 5,
        ..ExperimentConfig::for_preset("adr2d", None).unwrap()
    };
    // rounds interleave the schemes so a burst of machine load cannot single one out
    let mut times = vec![f64::INFINITY; cfg.schemes.len()];
    for _ in 0..3 {
        let records = run_experiment(&cfg).unwrap();
        for (t, r) in times.iter_mut().zip(&records) {
            *t = t.min(r.seconds);
        }
    }
    let lo = times.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = times.iter().copied().fold(0.0, f64::max);
    for (id, t) in cfg.schemes.iter().zip(&times) {
        println!("{id} {t:.4} s");
    }
    assert!(hi <= 1.2 * lo, "{times:?}");
}
