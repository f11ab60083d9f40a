//! Monte Carlo benchmark drivers: per-edge Type-I error tables and power
//! curves with the theoretical local-power overlay.
//!
//! Replicates are parallelized with derived per-replicate seeds, so results
//! are identical for any thread count. Within one table cell every α level
//! and both tests share the same replicate data, which makes the nested
//! rejection regions exact (the α = 0.10 count can never fall below the
//! α = 0.05 count of the same test).

use std::path::PathBuf;

use nalgebra::DMatrix;
use npgm::derive_seed;
use npgm::edge_tests::{local_power_curve, InferenceContext};
use npgm::models::{
    gen_band3, gen_hub, gen_scale_free, generate_truth, sample_gaussian, GraphKind,
    GraphModelSpec, Transform,
};
use npgm::rank::SampleMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::commands::{bench_clime_options, check_alpha, fit_with};
use crate::format::write_table_csv;
use crate::{CliError, CliResult};

/// Fraction of replicates allowed to fail (solver non-convergence or a
/// degenerate test) before the whole benchmark aborts.
const MAX_FAILURE_FRACTION: f64 = 0.1;

/// Fixed null edge the Type-I benchmark tests: among all absent pairs
/// `(j, k)`, `j < k`, the one minimizing `deg(j) + deg(k)` (ties broken in
/// row-major order). A null edge incident to a high-degree node has the
/// densest decorrelation neighborhood and converges to its asymptotic level
/// far more slowly, which would confound a calibration benchmark at moderate
/// sample sizes; a peripheral edge is the representative case.
pub fn peripheral_null_edge(adjacency: &DMatrix<f64>) -> Option<(usize, usize)> {
    let d = adjacency.nrows();
    let degree: Vec<usize> =
        (0..d).map(|j| (0..d).filter(|&k| k != j && adjacency[(j, k)] != 0.0).count()).collect();
    (0..d)
        .flat_map(|j| ((j + 1)..d).map(move |k| (j, k)))
        .filter(|&(j, k)| adjacency[(j, k)] == 0.0)
        .min_by_key(|&(j, k)| (degree[j] + degree[k], j, k))
}

struct RepOutcome {
    p_score: f64,
    p_wald: f64,
    l_hat: f64,
}

/// One full replicate: draw, fit (CV + CLIME), test the designated edge.
fn run_edge_rep(
    sigma_star: &DMatrix<f64>,
    transform: Transform,
    n: usize,
    rep_seed: u64,
    lambda_grid: &Option<Vec<f64>>,
    cv_folds: usize,
    j: usize,
    k: usize,
) -> npgm::Result<RepOutcome> {
    let z = sample_gaussian(sigma_star, n, derive_seed(rep_seed, 0))?;
    let x = SampleMatrix::new(transform.apply_matrix(&z))?;
    let fit = fit_with(&x, lambda_grid.clone(), cv_folds, derive_seed(rep_seed, 1), bench_clime_options())?;
    let ctx = InferenceContext::new(&x, fit.theta)?;
    let report = ctx.test_edge(j, k, 0.05)?;
    Ok(RepOutcome {
        p_score: report.p_score,
        p_wald: report.p_wald,
        l_hat: 2.0 * report.sigma2_hat.sqrt() / report.h_partial,
    })
}

fn split_outcomes(
    results: Vec<npgm::Result<RepOutcome>>,
    context: &str,
) -> CliResult<(Vec<RepOutcome>, usize)> {
    let total = results.len();
    let mut ok = Vec::with_capacity(total);
    let mut failures = 0usize;
    let mut first_error = None;
    for r in results {
        match r {
            Ok(o) => ok.push(o),
            Err(e) => {
                failures += 1;
                first_error.get_or_insert(e);
            }
        }
    }
    if (failures as f64) > MAX_FAILURE_FRACTION * total as f64 {
        return Err(CliError::Solver(format!(
            "{context}: {failures}/{total} replicates failed; first error: {}",
            first_error.expect("at least one failure")
        )));
    }
    Ok((ok, failures))
}

fn rate_and_se(rejections: usize, successes: usize) -> (f64, f64) {
    let rate = rejections as f64 / successes as f64;
    (rate, (rate * (1.0 - rate) / successes as f64).sqrt())
}

fn grid_label(grid: &Option<Vec<f64>>) -> String {
    match grid {
        None => "default".to_string(),
        Some(g) => g.iter().map(f64::to_string).collect::<Vec<_>>().join(";"),
    }
}

// ---------------------------------------------------------------------------
// Type-I error table

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Type1Config {
    pub d: usize,
    pub n: usize,
    pub graphs: Vec<GraphKind>,
    pub transforms: Vec<Transform>,
    pub reps: usize,
    pub alphas: Vec<f64>,
    pub seed: u64,
    pub output: PathBuf,
    pub lambda_grid: Option<Vec<f64>>,
    pub cv_folds: usize,
}

impl Type1Config {
    /// The table setup used when no graph/transform is pinned on the command
    /// line: both graph families and both non-identity transforms, at the
    /// two conventional significance levels.
    pub fn defaults(d: usize, n: usize, reps: usize, seed: u64, output: PathBuf) -> Self {
        Self {
            d,
            n,
            graphs: vec![GraphKind::ScaleFree, GraphKind::Band3],
            transforms: vec![Transform::ExtendedSqrt, Transform::Cubic],
            reps,
            alphas: vec![0.05, 0.10],
            seed,
            output,
            lambda_grid: None,
            cv_folds: 5,
        }
    }
}

/// One row of the Type-I error table. Edge endpoints are 1-based.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Type1Row {
    pub graph: GraphKind,
    pub transform: Transform,
    pub test: String,
    pub alpha: f64,
    pub d: usize,
    pub n: usize,
    pub reps: usize,
    pub failures: usize,
    pub null_edge_j: usize,
    pub null_edge_k: usize,
    pub rejections: usize,
    pub rejection_rate: f64,
    pub mc_se: f64,
    pub seed: u64,
}

const TYPE1_HEADER: &[&str] = &[
    "graph", "transform", "test", "alpha", "d", "n", "reps", "failures", "null_edge_j",
    "null_edge_k", "cv_folds", "lambda_grid", "seed", "rejections", "rejection_rate", "mc_se",
];

fn type1_csv_row(r: &Type1Row, cv_folds: usize, grid: &Option<Vec<f64>>) -> Vec<String> {
    vec![
        r.graph.to_string(),
        r.transform.to_string(),
        r.test.clone(),
        r.alpha.to_string(),
        r.d.to_string(),
        r.n.to_string(),
        r.reps.to_string(),
        r.failures.to_string(),
        r.null_edge_j.to_string(),
        r.null_edge_k.to_string(),
        cv_folds.to_string(),
        grid_label(grid),
        r.seed.to_string(),
        r.rejections.to_string(),
        r.rejection_rate.to_string(),
        r.mc_se.to_string(),
    ]
}

/// Runs the Type-I error benchmark and writes the table CSV. Every cell
/// fixes one graph draw and one absent edge, then replicates the full
/// pipeline (simulate → rank correlation → CV + CLIME → both tests).
pub fn bench_type1(cfg: &Type1Config) -> CliResult<Vec<Type1Row>> {
    if cfg.reps == 0 {
        return Err(CliError::Usage("replication count must be positive".into()));
    }
    if cfg.graphs.is_empty() || cfg.transforms.is_empty() || cfg.alphas.is_empty() {
        return Err(CliError::Usage("graphs, transforms, and alphas must be nonempty".into()));
    }
    for &a in &cfg.alphas {
        check_alpha(a)?;
    }

    let mut rows = Vec::new();
    let mut cell_index = 0u64;
    for &graph in &cfg.graphs {
        for &transform in &cfg.transforms {
            let cell_seed = derive_seed(cfg.seed, cell_index);
            cell_index += 1;
            let spec = GraphModelSpec::new(graph, cfg.d, derive_seed(cell_seed, 0));
            let truth = generate_truth(&spec)?;
            let (nj, nk) = peripheral_null_edge(&truth.adjacency).ok_or_else(|| {
                CliError::Usage(format!("graph {graph} on d = {} has no absent edge", cfg.d))
            })?;

            let results: Vec<npgm::Result<RepOutcome>> = (0..cfg.reps)
                .into_par_iter()
                .map(|r| {
                    run_edge_rep(
                        &truth.sigma_star,
                        transform,
                        cfg.n,
                        derive_seed(cell_seed, 1 + r as u64),
                        &cfg.lambda_grid,
                        cfg.cv_folds,
                        nj,
                        nk,
                    )
                })
                .collect();
            let (outcomes, failures) =
                split_outcomes(results, &format!("type-I cell ({graph}, {transform})"))?;

            for test in ["score", "wald"] {
                for &alpha in &cfg.alphas {
                    let rejections = outcomes
                        .iter()
                        .filter(|o| {
                            let p = if test == "score" { o.p_score } else { o.p_wald };
                            p < alpha
                        })
                        .count();
                    let (rate, se) = rate_and_se(rejections, outcomes.len());
                    rows.push(Type1Row {
                        graph,
                        transform,
                        test: test.to_string(),
                        alpha,
                        d: cfg.d,
                        n: cfg.n,
                        reps: cfg.reps,
                        failures,
                        null_edge_j: nj + 1,
                        null_edge_k: nk + 1,
                        rejections,
                        rejection_rate: rate,
                        mc_se: se,
                        seed: cfg.seed,
                    });
                }
            }
        }
    }

    let csv_rows: Vec<Vec<String>> =
        rows.iter().map(|r| type1_csv_row(r, cfg.cv_folds, &cfg.lambda_grid)).collect();
    write_table_csv(&cfg.output, TYPE1_HEADER, &csv_rows)?;
    Ok(rows)
}

// ---------------------------------------------------------------------------
// Power curve

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PowerConfig {
    pub d: usize,
    pub n: usize,
    pub graph: GraphKind,
    pub transform: Transform,
    /// Number of grid points, endpoints included.
    pub steps: usize,
    pub max_weight: f64,
    pub reps: usize,
    pub alpha: f64,
    pub seed: u64,
    pub output: PathBuf,
    pub lambda_grid: Option<Vec<f64>>,
    pub cv_folds: usize,
}

/// One row of the power table (one grid weight × one test). Endpoints are
/// 1-based; `psi_alpha` is the theoretical local-power overlay evaluated at
/// `k_shift = √n·Θ*_jk / mean(L̂)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PowerRow {
    pub graph: GraphKind,
    pub transform: Transform,
    pub test: String,
    pub alpha: f64,
    pub d: usize,
    pub n: usize,
    pub reps: usize,
    pub failures: usize,
    pub edge_j: usize,
    pub edge_k: usize,
    pub weight: f64,
    pub theta_true: f64,
    pub k_shift: f64,
    pub psi_alpha: f64,
    pub rejections: usize,
    pub rejection_rate: f64,
    pub mc_se: f64,
    pub seed: u64,
}

const POWER_HEADER: &[&str] = &[
    "graph", "transform", "test", "alpha", "d", "n", "reps", "failures", "edge_j", "edge_k",
    "cv_folds", "lambda_grid", "seed", "weight", "theta_true", "k_shift", "psi_alpha",
    "rejections", "rejection_rate", "mc_se",
];

fn power_csv_row(r: &PowerRow, cv_folds: usize, grid: &Option<Vec<f64>>) -> Vec<String> {
    vec![
        r.graph.to_string(),
        r.transform.to_string(),
        r.test.clone(),
        r.alpha.to_string(),
        r.d.to_string(),
        r.n.to_string(),
        r.reps.to_string(),
        r.failures.to_string(),
        r.edge_j.to_string(),
        r.edge_k.to_string(),
        cv_folds.to_string(),
        grid_label(grid),
        r.seed.to_string(),
        r.weight.to_string(),
        r.theta_true.to_string(),
        r.k_shift.to_string(),
        r.psi_alpha.to_string(),
        r.rejections.to_string(),
        r.rejection_rate.to_string(),
        r.mc_se.to_string(),
    ]
}

fn base_adjacency(graph: GraphKind, d: usize, seed: u64) -> npgm::Result<DMatrix<f64>> {
    match graph {
        GraphKind::ScaleFree => gen_scale_free(d, seed),
        GraphKind::Hub => gen_hub(d, 20),
        GraphKind::Band3 => gen_band3(d),
    }
}

/// Runs the power sweep: one extra edge, chosen uniformly among the absent
/// pairs of the base graph, has its weight swept from 0 to `max_weight`.
/// Replicate seeds are shared across weights, coupling the curves so the
/// monotone shape is visible at moderate replication counts.
pub fn bench_power(cfg: &PowerConfig) -> CliResult<Vec<PowerRow>> {
    if cfg.reps == 0 {
        return Err(CliError::Usage("replication count must be positive".into()));
    }
    if cfg.steps < 2 {
        return Err(CliError::Usage(format!("need at least 2 grid steps, got {}", cfg.steps)));
    }
    if !(cfg.max_weight.is_finite() && cfg.max_weight > 0.0) {
        return Err(CliError::Usage(format!("max weight must be positive, got {}", cfg.max_weight)));
    }
    check_alpha(cfg.alpha)?;

    let adjacency = base_adjacency(cfg.graph, cfg.d, derive_seed(cfg.seed, 0))?;
    let (ej, ek) = {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 1));
        loop {
            let j = rng.gen_range(0..cfg.d);
            let k = rng.gen_range(0..cfg.d);
            if j != k && adjacency[(j, k)] == 0.0 {
                break (j.min(k), j.max(k));
            }
        }
    };
    let base_weights = adjacency.map(|a| 0.3 * a);

    let mut rows = Vec::new();
    for step in 0..cfg.steps {
        let weight = cfg.max_weight * step as f64 / (cfg.steps - 1) as f64;
        let mut weights = base_weights.clone();
        weights[(ej, ek)] = weight;
        weights[(ek, ej)] = weight;
        let truth = npgm::models::truth_from_weights(&weights, 0.2)?;
        let theta_true = truth.theta_corr[(ej, ek)];

        let results: Vec<npgm::Result<RepOutcome>> = (0..cfg.reps)
            .into_par_iter()
            .map(|r| {
                run_edge_rep(
                    &truth.sigma_star,
                    cfg.transform,
                    cfg.n,
                    derive_seed(derive_seed(cfg.seed, 2), r as u64),
                    &cfg.lambda_grid,
                    cfg.cv_folds,
                    ej,
                    ek,
                )
            })
            .collect();
        let (outcomes, failures) =
            split_outcomes(results, &format!("power step weight = {weight}"))?;

        let mean_l = outcomes.iter().map(|o| o.l_hat).sum::<f64>() / outcomes.len() as f64;
        let k_shift = (cfg.n as f64).sqrt() * theta_true / mean_l;
        let psi = local_power_curve(k_shift, cfg.alpha);

        for test in ["score", "wald"] {
            let rejections = outcomes
                .iter()
                .filter(|o| {
                    let p = if test == "score" { o.p_score } else { o.p_wald };
                    p < cfg.alpha
                })
                .count();
            let (rate, se) = rate_and_se(rejections, outcomes.len());
            rows.push(PowerRow {
                graph: cfg.graph,
                transform: cfg.transform,
                test: test.to_string(),
                alpha: cfg.alpha,
                d: cfg.d,
                n: cfg.n,
                reps: cfg.reps,
                failures,
                edge_j: ej + 1,
                edge_k: ek + 1,
                weight,
                theta_true,
                k_shift,
                psi_alpha: psi,
                rejections,
                rejection_rate: rate,
                mc_se: se,
                seed: cfg.seed,
            });
        }
    }

    let csv_rows: Vec<Vec<String>> =
        rows.iter().map(|r| power_csv_row(r, cfg.cv_folds, &cfg.lambda_grid)).collect();
    write_table_csv(&cfg.output, POWER_HEADER, &csv_rows)?;
    Ok(rows)
}
