//! TEMPORARY pilot: exercises the acceptance drivers end-to-end at tiny
//! sizes so that structural bugs surface in minutes instead of hours.
//! Deleted before the suite is finalized.

use npgm::clime::{fit_precision, ClimeOptions, FitConfig};
use npgm::derive_seed;
use npgm::edge_tests::InferenceContext;
use npgm::models::{generate_truth, sample_gaussian, GraphKind, GraphModelSpec, Transform};
use npgm::rank::SampleMatrix;
use npgm::subgraph::confidence_subgraph;
use npgm_cli::bench::{bench_power, bench_type1, PowerConfig, Type1Config};

fn mc_fit_config(seed: u64) -> FitConfig {
    FitConfig {
        seed,
        opts: ClimeOptions { tol: 1e-4, max_iter: 200_000, ..ClimeOptions::default() },
        ..FitConfig::default()
    }
}

#[test]
fn pilot_type1_driver() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = Type1Config::defaults(15, 60, 4, 0x71107, dir.path().join("t1.csv"));
    let rows = bench_type1(&cfg).unwrap();
    // 2 graphs × 2 transforms × 2 tests × 2 alphas
    assert_eq!(rows.len(), 16);
    for row in &rows {
        assert!(row.rejection_rate >= 0.0 && row.rejection_rate <= 1.0);
        assert!(row.reps == 4);
        assert!(row.failures <= 1, "unexpected failures: {}", row.failures);
        println!(
            "pilot t1 {}/{}/{} α={:.2}: {:.2} ({} fail)",
            row.graph, row.transform, row.test, row.alpha, row.rejection_rate, row.failures
        );
    }
    assert!(dir.path().join("t1.csv").exists());
}

#[test]
fn pilot_power_driver() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = PowerConfig {
        d: 10,
        n: 60,
        graph: GraphKind::ScaleFree,
        transform: Transform::ExtendedSqrt,
        steps: 3,
        max_weight: 0.4,
        reps: 3,
        alpha: 0.05,
        seed: 0x71109,
        output: dir.path().join("pw.csv"),
        lambda_grid: None,
        cv_folds: 5,
    };
    let rows = bench_power(&cfg).unwrap();
    assert_eq!(rows.len(), 6);
    for test in ["score", "wald"] {
        let mut curve: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r| r.test == test)
            .map(|r| (r.weight, r.rejection_rate))
            .collect();
        curve.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        assert_eq!(curve.len(), 3);
        assert_eq!(curve[0].0, 0.0);
        assert!((curve[2].0 - 0.4).abs() < 1e-12);
        println!("pilot power {test}: {curve:?}");
    }
    assert!(rows.iter().all(|r| r.psi_alpha.is_finite()));
}

#[test]
fn pilot_subgraph_loop() {
    let spec = GraphModelSpec::new(GraphKind::Band3, 8, 0x7110A);
    let truth = generate_truth(&spec).unwrap();
    let true_edges: std::collections::BTreeSet<(usize, usize)> =
        truth.edge_set.iter().copied().collect();
    for r in 0..3u64 {
        let seed = derive_seed(0x7110B, r);
        let z = sample_gaussian(&truth.sigma_star, 150, derive_seed(seed, 0)).unwrap();
        let x = SampleMatrix::new(Transform::ExtendedSqrt.apply_matrix(&z)).unwrap();
        let fit = fit_precision(&x, &mc_fit_config(derive_seed(seed, 1))).unwrap();
        let ctx = InferenceContext::new(&x, fit.theta).unwrap();
        let report = confidence_subgraph(&ctx, 0.05, 200, derive_seed(seed, 2)).unwrap();
        let contained = report.retained_edges.iter().all(|e| true_edges.contains(e));
        println!(
            "pilot subgraph rep {r}: retained {} edges, contained {contained}",
            report.retained_edges.len()
        );
    }
}
