mod common;

use censcope::npmle::npmle_em;
use censcope::*;
use proptest::prelude::*;

fn obs(t: f64, u: f64, d: Position) -> CensoredObservation {
    CensoredObservation::new(t, u, d).unwrap()
}

#[test]
fn two_observation_example_matches_grid() {
    let d = Dataset {
        observations: vec![obs(0.2, 0.6, Position::Interval), obs(0.4, 0.8, Position::Right)],
        seed: 0,
        scheme: ObservationScheme::NonSeparated,
        target: TargetDistribution::Uniform01,
    };
    let r = npmle_icm(&d, 1e-10, 5000).unwrap();
    let grid = common::brute_force_max_loglik(&d.observations, 200);
    assert!((r.log_likelihood - grid).abs() < 1e-6, "{} vs {}", r.log_likelihood, grid);
}

#[test]
fn em_steps_approach_icm() {
    // EM is sublinear: 1000 steps suffice for some n=50 datasets, not all.
    let d = generate_dataset(TargetDistribution::Uniform01, ObservationScheme::NonSeparated, 50, 4).unwrap();
    let icm = npmle_icm(&d, 1e-10, 5000).unwrap();
    let em = npmle_em(&d.observations, 1000, 0.0).unwrap();
    assert!((icm.log_likelihood - em.log_likelihood).abs() < 1e-6);

    for seed in 0..8 {
        let d = generate_dataset(TargetDistribution::Uniform01, ObservationScheme::NonSeparated, 50, seed).unwrap();
        let icm = npmle_icm(&d, 1e-10, 5000).unwrap();
        let em = npmle_em(&d.observations, 10_000, 0.0).unwrap();
        let diff = icm.log_likelihood - em.log_likelihood;
        assert!((-1e-10..1e-6).contains(&diff), "seed {seed}: {diff}");
    }
}

#[test]
fn em_step_fixes_the_mle() {
    let d = generate_dataset(TargetDistribution::Uniform01, ObservationScheme::Separated(0.1), 40, 5).unwrap();
    let icm = npmle_icm(&d, 1e-13, 20_000).unwrap();
    let next = em_step(&icm.values, &d).unwrap();
    let moved = icm.values.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(moved < 1e-10, "EM moved the MLE by {moved}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(60))]
    #[test]
    fn icm_never_below_grid_maximum(seed in any::<u64>(), n in 1usize..=4, separated in any::<bool>()) {
        let scheme = if separated { ObservationScheme::Separated(0.1) } else { ObservationScheme::NonSeparated };
        let d = generate_dataset(TargetDistribution::Uniform01, scheme, n, seed).unwrap();
        let r = npmle_icm(&d, 1e-10, 5000).unwrap();
        let grid = common::brute_force_max_loglik(&d.observations, 200);
        prop_assert!(r.log_likelihood >= grid - 1e-6, "icm {} grid {}", r.log_likelihood, grid);
    }
}
