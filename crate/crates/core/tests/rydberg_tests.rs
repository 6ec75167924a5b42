//! Distance conversions and the three-atom benchmark.

use proptest::prelude::*;
use qspe_learn::learner::LearnOptions;
use qspe_learn::rydberg::*;
use qspe_learn::sim::{ExperimentConfig, Mode};

proptest! {
    #[test]
    fn distance_round_trip(r in 4.0f64..12.0, t in 1e-4f64..1e-2) {
        let b = coupling_from_distance(r).unwrap() * t;
        prop_assert!((distance_from_coupling(b, t).unwrap() - r).abs() < 1e-10 * r);
    }

    #[test]
    fn variance_conversion_matches_derivative(r in 6.0f64..9.0, rel in 1e-4f64..1e-2) {
        let t = 1e-3;
        let b = coupling_from_distance(r).unwrap() * t;
        let h = 1e-6 * b;
        let slope = (distance_from_coupling(b + h, t).unwrap() - distance_from_coupling(b - h, t).unwrap()) / (2.0 * h);
        let var_b = (rel * b).powi(2);
        let want = slope * slope * var_b;
        prop_assert!((variance_convert(var_b, b, r) - want).abs() < 1e-6 * want);
    }
}

#[test]
fn benchmark_spec_uses_table_distances() {
    let bench = benchmark();
    let spec = benchmark_spec(&bench).unwrap();
    for (&(i, j), case) in BENCHMARK_PAIRS.iter().zip(&bench.cases) {
        assert!((spec.c[i][j] - case.v).abs() / case.v < 0.01);
    }
    assert!(spec.a.iter().all(|&a| a == BENCHMARK_DRIVE));
}

#[test]
fn exact_pipeline_recovers_distances() {
    let cfg = ExperimentConfig { d: 10, shots: 1, t: 1e-3, mode: Mode::Hybrid, seed: 0 };
    let opts = LearnOptions { exact: true, ..Default::default() };
    let est = learn_distances(&benchmark(), &cfg, &opts).unwrap();
    for e in &est {
        assert!((e.r_hat - e.r).abs() < 1e-3 * e.r, "{e:?}");
    }
}

#[test]
fn sampled_pipeline_orders_distances() {
    let cfg = ExperimentConfig { d: 10, shots: 100_000, t: 1e-3, mode: Mode::Hybrid, seed: 17 };
    let est = learn_distances(&benchmark(), &cfg, &LearnOptions::default()).unwrap();
    assert!(est[0].r_hat < est[1].r_hat && est[1].r_hat < est[2].r_hat);
    for e in &est {
        assert!(e.rel_err <= 0.02, "{e:?}");
        assert!((e.r_hat - e.r).abs() <= 0.02 * e.r, "{e:?}");
    }
}

#[test]
fn wrong_case_count_rejected() {
    let mut b = benchmark();
    b.cases.pop();
    assert!(benchmark_spec(&b).is_err());
}
