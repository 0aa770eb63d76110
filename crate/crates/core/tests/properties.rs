mod common;

use common::pid;
use optfolio::experiment::TrialRecord;
use optfolio::metrics::{budget_grid, compute_ecdf, compute_ert};
use optfolio::problems::Improvement;
use optfolio::{seeding, standard_ladder, target_ladder, ProblemInstance, TargetSpec};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn best_delta_never_increases(
        function in 1u32..=10,
        dim in 2usize..=6,
        seed in 0u64..1000,
        points in prop::collection::vec(prop::collection::vec(-6.0f64..6.0, 6), 1..40),
    ) {
        let mut inst = ProblemInstance::new(pid(function), dim, seed).unwrap();
        let mut last = f64::INFINITY;
        for (n, p) in points.iter().enumerate() {
            inst.evaluate(&p[..dim]).unwrap();
            let d = inst.best_delta().unwrap();
            prop_assert!(d >= 0.0);
            prop_assert!(d <= last);
            prop_assert_eq!(inst.eval_count(), n as u64 + 1);
            last = d;
        }
    }

    #[test]
    fn optimum_value_is_exact(function in 1u32..=10, dim in 2usize..=12, seed in 0u64..10_000) {
        let mut inst = ProblemInstance::new(pid(function), dim, seed).unwrap();
        let x_opt = inst.x_opt().to_vec();
        prop_assert!(x_opt.iter().all(|v| (-4.0..=4.0).contains(v)));
        let tol = if function == 10 { 1e-9 } else { 1e-12 };
        let y = inst.evaluate(&x_opt).unwrap();
        prop_assert!((y - inst.f_opt()).abs() <= tol, "{} vs {}", y, inst.f_opt());
    }

    #[test]
    fn sphere_depends_only_on_distance(seed in 0u64..1000, dir in prop::collection::vec(-1.0f64..1.0, 4), r in 0.1f64..3.0) {
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assume!(norm > 1e-3);
        let inst = ProblemInstance::new(pid(1), 4, seed).unwrap();
        let x: Vec<f64> = inst.x_opt().iter().zip(&dir).map(|(o, d)| o + r * d / norm).collect();
        let axis: Vec<f64> = inst.x_opt().iter().enumerate().map(|(i, o)| if i == 0 { o + r } else { *o }).collect();
        let (a, b) = (inst.value(&x) - inst.f_opt(), inst.value(&axis) - inst.f_opt());
        prop_assert!((a - b).abs() <= 1e-9 * (1.0 + b));
    }

    #[test]
    fn ladders_have_constant_ratio(n in 2usize..80, low_exp in -9.0f64..0.0, span in 0.5f64..6.0) {
        let (low, high) = (10f64.powf(low_exp), 10f64.powf(low_exp + span));
        let ladder = target_ladder(n, low, high).unwrap();
        prop_assert_eq!(ladder.len(), n);
        prop_assert_eq!(ladder[0].delta_f, high);
        prop_assert_eq!(ladder[n - 1].delta_f, low);
        let ratio = ladder[1].delta_f / ladder[0].delta_f;
        for w in ladder.windows(2) {
            prop_assert!(w[1].delta_f < w[0].delta_f);
            prop_assert!(((w[1].delta_f / w[0].delta_f) - ratio).abs() <= 1e-12 * ratio);
        }
    }

    #[test]
    fn ert_is_monotone_in_precision(
        trials in prop::collection::vec((1u64..500, prop::collection::vec(1u64..50, 0..8)), 1..12),
    ) {
        let records: Vec<TrialRecord> = trials.iter().map(|(total_extra, steps)| trace_record(*total_extra, steps)).collect();
        let mut last = 0.0f64;
        for t in standard_ladder() {
            let r = compute_ert(&records, t.delta_f).unwrap();
            prop_assert!(r.ert >= last);
            last = r.ert;
        }
    }

    #[test]
    fn ecdf_is_a_distribution(
        trials in prop::collection::vec((1u64..500, prop::collection::vec(1u64..50, 0..8)), 1..8),
        seed in 0u64..100,
    ) {
        let records: Vec<TrialRecord> = trials.iter().map(|(e, s)| trace_record(*e, s)).collect();
        let mut rng = seeding::stream(&[seed]);
        let c = compute_ecdf(&[records], &standard_ladder(), &budget_grid(), 5, &mut rng).unwrap();
        prop_assert!(c.proportion.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(c.proportion.iter().all(|p| (0.0..=1.0).contains(p)));
    }
}

/// Trace whose precision drops by one decade per step, starting at 10^2.
fn trace_record(extra: u64, gaps: &[u64]) -> TrialRecord {
    let mut evals = 0;
    let trace: Vec<Improvement> = gaps
        .iter()
        .enumerate()
        .map(|(i, g)| {
            evals += g;
            Improvement { evals, delta: 10f64.powi(2 - 2 * i as i32) }
        })
        .collect();
    TrialRecord::from_trace(1, 2, 1, "P", evals + extra, trace)
}

#[test]
fn standard_ladder_endpoints() {
    let l = standard_ladder();
    assert_eq!((l.len(), l[0].delta_f, l[49].delta_f), (50, 1e2, 1e-8));
    assert_eq!(target_ladder(3, 1e-8, 1e2).unwrap().iter().map(|t| t.delta_f).collect::<Vec<_>>(), vec![1e2, 1e-3, 1e-8]);
    assert!(target_ladder(2, 1.0, 1.0).is_err());
    assert!(TargetSpec::new(1e-8).f_t(5.0) > 5.0);
}
