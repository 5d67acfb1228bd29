//! The closed-form target predictions agree with the abstract optimal-target
//! construction up to fixed norm-equivalence bands, and the slow-regime
//! prediction pair matches the operator-level verdicts at small scale.

mod common;

use hardy_reduce_core::embed_verify::{classical_target, slow_endpoint_targets};
use hardy_reduce_core::norms::{self, NormSpec};
use hardy_reduce_core::params::SobolevParams;

/// Frozen equivalence bands: ratio optimal_target_norm / predicted-norm over
/// 200 seeded random step functions must stay inside [1/b, b]. The values
/// were measured once on this corpus and padded by a third; regressions that
/// leave the band indicate a real change in either norm path.
const BANDS: &[(u32, u32, f64, f64, f64)] = &[
    (3, 1, 2.0, 2.0, 4.0),
    (3, 1, 2.0, 3.0, 2.0),
    (4, 2, 3.0, 1.0, 2.5),
    (5, 1, 4.0, 2.0, 3.0),
];

#[test]
fn classical_predictions_sit_in_fixed_equivalence_bands() {
    for &(n, m, d, p, b) in BANDS {
        let params = SobolevParams::new(n, m, d).unwrap();
        let prediction = classical_target(n, m, d, p).unwrap();
        let base = NormSpec::lebesgue(p);
        let mut rng = common::rng(0x5eed_0001 ^ u64::from(n) << 8 ^ u64::from(m));
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for _ in 0..200 {
            let f = common::random_step(&mut rng, 24, 5.0);
            if f.is_zero() {
                continue;
            }
            let target = norms::optimal_target_norm(&base, &params, &f).unwrap();
            let predicted = norms::norm(&prediction.predicted, &f).unwrap();
            assert!(
                predicted > 0.0 && target > 0.0,
                "degenerate norms at ({n},{m},{d},{p}): {target} vs {predicted}"
            );
            let ratio = target / predicted;
            lo = lo.min(ratio);
            hi = hi.max(ratio);
        }
        eprintln!("band ({n},{m},{d},{p}): measured [{lo:.6}, {hi:.6}], frozen {b}");
        assert!(
            lo >= 1.0 / b && hi <= b,
            "band violation at ({n},{m},{d},{p}): measured [{lo}, {hi}], frozen [{}, {b}]",
            1.0 / b
        );
    }
}

#[test]
fn slow_endpoint_pair_is_consistent_with_norm_ordering() {
    // the radial prediction is the stronger target: its norm dominates the
    // slice prediction's on every profile, while both stay finite on the
    // endpoint domain's unit ball representatives
    let pair = slow_endpoint_targets(3, 1, 1).unwrap();
    let mut rng = common::rng(0x5eed_0002);
    for _ in 0..100 {
        let f = common::random_step(&mut rng, 24, 5.0);
        let slice = norms::norm(&pair.slice_prediction.predicted, &f).unwrap();
        let radial = norms::norm(&pair.radial_prediction.predicted, &f).unwrap();
        assert!(
            radial >= slice * (1.0 - 1e-9),
            "Lorentz(q,1) should dominate Lebesgue(q): {radial} vs {slice}"
        );
    }
}
