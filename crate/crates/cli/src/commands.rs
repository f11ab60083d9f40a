//! Implementations of the non-benchmark subcommands: simulate, fit,
//! test-edge, and subgraph.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use npgm::clime::{fit_precision, ClimeOptions, FitConfig as CoreFitConfig, FitResult};
use npgm::derive_seed;
use npgm::edge_tests::{EdgeTestReport, InferenceContext};
use npgm::models::{simulate_dataset, GraphKind, GraphModelSpec, Transform};
use npgm::rank::SampleMatrix;
use npgm::subgraph::{confidence_subgraph, SubgraphReport};
use serde::{Deserialize, Serialize};

use crate::format::{
    dot_subgraph, matrix_to_rows, read_json, read_sample_csv, rows_to_matrix, to_json_string,
    write_json, write_sample_csv, ResultRecord,
};
use crate::{io_error, CliError, CliResult};

pub(crate) fn check_alpha(alpha: f64) -> CliResult<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(CliError::Usage(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

// ---------------------------------------------------------------------------
// simulate

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulateConfig {
    pub d: usize,
    pub n: usize,
    pub graph: GraphKind,
    pub transform: Transform,
    pub edge_weight: f64,
    pub diag_shift: f64,
    pub seed: u64,
    pub output: PathBuf,
}

/// Ground-truth sidecar written next to the simulated CSV. Edge endpoints
/// are 1-based.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TruthSidecar {
    pub config: SimulateConfig,
    pub version: String,
    pub d: usize,
    pub transform: Transform,
    pub seed: u64,
    pub edges: Vec<(usize, usize)>,
    pub theta_star: Vec<Vec<f64>>,
    pub theta_corr: Vec<Vec<f64>>,
    pub sigma_star: Vec<Vec<f64>>,
}

/// `<output>.truth.json` for the sample written at `<output>`.
pub fn truth_sidecar_path(csv_path: &Path) -> PathBuf {
    let mut name = csv_path.as_os_str().to_os_string();
    name.push(".truth.json");
    PathBuf::from(name)
}

pub struct SimulateArtifacts {
    pub csv: PathBuf,
    pub truth: PathBuf,
}

/// Draws one synthetic dataset and writes the sample CSV plus the
/// ground-truth sidecar.
pub fn cmd_simulate(cfg: &SimulateConfig) -> CliResult<SimulateArtifacts> {
    let mut spec = GraphModelSpec::new(cfg.graph, cfg.d, derive_seed(cfg.seed, 0));
    spec.edge_weight = cfg.edge_weight;
    spec.diag_shift = cfg.diag_shift;
    let (x, truth) = simulate_dataset(&spec, cfg.n, cfg.transform, derive_seed(cfg.seed, 1))?;
    write_sample_csv(&cfg.output, x.data())?;
    let sidecar = TruthSidecar {
        config: cfg.clone(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        d: cfg.d,
        transform: cfg.transform,
        seed: cfg.seed,
        edges: truth.edge_set.iter().map(|&(j, k)| (j + 1, k + 1)).collect(),
        theta_star: matrix_to_rows(&truth.theta_star),
        theta_corr: matrix_to_rows(&truth.theta_corr),
        sigma_star: matrix_to_rows(&truth.sigma_star),
    };
    let truth_path = truth_sidecar_path(&cfg.output);
    write_json(&truth_path, &sidecar)?;
    Ok(SimulateArtifacts { csv: cfg.output.clone(), truth: truth_path })
}

// ---------------------------------------------------------------------------
// fit

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitCliConfig {
    pub input: PathBuf,
    pub output: PathBuf,
    pub lambda_grid: Option<Vec<f64>>,
    pub cv_folds: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CvEcho {
    pub grid: Vec<f64>,
    #[serde(with = "crate::format::loss_values")]
    pub mean_loss: Vec<f64>,
    pub fold_sizes: Vec<usize>,
}

/// Payload of a `fit` run; also the estimate format `test-edge` consumes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitPayload {
    pub d: usize,
    pub n: usize,
    pub lambda: f64,
    pub theta: Vec<Vec<f64>>,
    pub cv: Option<CvEcho>,
}

/// Solver options for CLI-driven single fits: same tolerances as the library
/// default, but with a much higher iteration cap so occasional hard columns
/// converge instead of aborting the run.
pub(crate) fn cli_clime_options() -> ClimeOptions {
    ClimeOptions { max_iter: 200_000, ..ClimeOptions::default() }
}

/// Solver options for Monte Carlo benchmark replicates. The statistics a
/// replicate contributes are dominated by O(n^{-1/2}) sampling noise, so a
/// 1e-4 solver tolerance is statistically invisible there, while the default
/// 1e-6 makes near-degenerate columns (common at benchmark scale, e.g.
/// d = 50 with n = 100) crawl for hundreds of thousands of iterations.
pub(crate) fn bench_clime_options() -> ClimeOptions {
    ClimeOptions { tol: 1e-4, max_iter: 200_000, ..ClimeOptions::default() }
}

pub(crate) fn fit_with(
    x: &SampleMatrix,
    lambda_grid: Option<Vec<f64>>,
    cv_folds: usize,
    seed: u64,
    opts: ClimeOptions,
) -> npgm::Result<FitResult> {
    let cfg = CoreFitConfig { lambda_grid, cv_folds, seed, opts };
    fit_precision(x, &cfg)
}

pub fn cmd_fit(cfg: &FitCliConfig) -> CliResult<()> {
    let start = Instant::now();
    let x = read_sample_csv(&cfg.input)?;
    let fit = fit_with(&x, cfg.lambda_grid.clone(), cfg.cv_folds, cfg.seed, cli_clime_options())?;
    let payload = FitPayload {
        d: x.d(),
        n: x.n(),
        lambda: fit.lambda,
        theta: matrix_to_rows(&fit.theta),
        cv: fit.cv.map(|c| CvEcho {
            grid: c.grid,
            mean_loss: c.mean_loss,
            fold_sizes: c.fold_sizes,
        }),
    };
    let record =
        ResultRecord::new("fit", cfg.clone(), start.elapsed().as_secs_f64(), payload);
    write_json(&cfg.output, &record)
}

// ---------------------------------------------------------------------------
// test-edge

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TestEdgeConfig {
    pub input: PathBuf,
    pub estimate: PathBuf,
    /// 1-based endpoints.
    pub edge: (usize, usize),
    pub alpha: f64,
    pub output: Option<PathBuf>,
}

/// Reads the `theta` payload out of a `fit` output file.
pub fn read_estimate(path: &Path) -> CliResult<FitPayload> {
    let record: ResultRecord<serde_json::Value, FitPayload> = read_json(path)?;
    Ok(record.payload)
}

/// Runs both edge tests and returns the JSON document that was written (or
/// should be printed to stdout when no output path is configured).
pub fn cmd_test_edge(cfg: &TestEdgeConfig) -> CliResult<String> {
    check_alpha(cfg.alpha)?;
    let (j1, k1) = cfg.edge;
    if j1 == 0 || k1 == 0 {
        return Err(CliError::Usage("edge endpoints are 1-based".into()));
    }
    if j1 == k1 {
        return Err(CliError::Usage(format!("edge endpoints must differ, got ({j1},{k1})")));
    }
    let start = Instant::now();
    let x = read_sample_csv(&cfg.input)?;
    let estimate = read_estimate(&cfg.estimate)?;
    let theta = rows_to_matrix(&estimate.theta)?;
    if theta.nrows() != x.d() {
        return Err(CliError::Data(format!(
            "estimate dimension {} does not match data dimension {}",
            theta.nrows(),
            x.d()
        )));
    }
    let ctx = InferenceContext::new(&x, theta)?;
    let mut report: EdgeTestReport = ctx.test_edge(j1 - 1, k1 - 1, cfg.alpha)?;
    report.j += 1;
    report.k += 1;
    let record = ResultRecord::new(
        "test-edge",
        cfg.clone(),
        start.elapsed().as_secs_f64(),
        report,
    );
    let text = to_json_string(&record)?;
    if let Some(path) = &cfg.output {
        fs::write(path, &text).map_err(|e| io_error(path, e))?;
    }
    Ok(text)
}

// ---------------------------------------------------------------------------
// subgraph

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubgraphCliConfig {
    pub input: PathBuf,
    pub output: PathBuf,
    pub alpha: f64,
    pub n_bootstrap: usize,
    pub lambda_grid: Option<Vec<f64>>,
    pub cv_folds: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubgraphPayload {
    pub d: usize,
    pub n: usize,
    pub lambda: f64,
    pub report: SubgraphReport,
}

#[derive(Debug)]
pub struct SubgraphArtifacts {
    pub json: PathBuf,
    pub dot: PathBuf,
}

fn shift_edges(edges: &mut [(usize, usize)]) {
    for e in edges {
        e.0 += 1;
        e.1 += 1;
    }
}

/// Fits the model, builds the confidence subgraph, and writes the JSON
/// report plus a DOT rendering of the retained edges.
pub fn cmd_subgraph(cfg: &SubgraphCliConfig) -> CliResult<SubgraphArtifacts> {
    check_alpha(cfg.alpha)?;
    let start = Instant::now();
    let x = read_sample_csv(&cfg.input)?;
    let fit = fit_with(&x, cfg.lambda_grid.clone(), cfg.cv_folds, derive_seed(cfg.seed, 0), cli_clime_options())?;
    let ctx = InferenceContext::new(&x, fit.theta)?;
    let mut report: SubgraphReport =
        confidence_subgraph(&ctx, cfg.alpha, cfg.n_bootstrap, derive_seed(cfg.seed, 1))?;
    for e in &mut report.intervals {
        e.j += 1;
        e.k += 1;
    }
    shift_edges(&mut report.retained_edges);
    shift_edges(&mut report.degenerate_edges);

    let dot = dot_subgraph(x.d(), &report.intervals);
    let mut dot_path = cfg.output.with_extension("dot");
    if dot_path == cfg.output {
        let mut name = cfg.output.as_os_str().to_os_string();
        name.push(".dot");
        dot_path = PathBuf::from(name);
    }
    let payload = SubgraphPayload { d: x.d(), n: x.n(), lambda: fit.lambda, report };
    let record =
        ResultRecord::new("subgraph", cfg.clone(), start.elapsed().as_secs_f64(), payload);
    write_json(&cfg.output, &record)?;
    fs::write(&dot_path, dot).map_err(|e| io_error(&dot_path, e))?;
    Ok(SubgraphArtifacts { json: cfg.output.clone(), dot: dot_path })
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn sim_cfg(dir: &Path, d: usize, n: usize, seed: u64) -> SimulateConfig {
        SimulateConfig {
            d,
            n,
            graph: GraphKind::Band3,
            transform: Transform::Identity,
            edge_weight: 0.3,
            diag_shift: 0.2,
            seed,
            output: dir.join("sample.csv"),
        }
    }

    #[test]
    fn simulate_writes_both_files_and_is_deterministic() {
        let dir = tempdir().unwrap();
        let cfg = sim_cfg(dir.path(), 6, 20, 7);
        let art = cmd_simulate(&cfg).unwrap();
        let csv1 = fs::read(&art.csv).unwrap();
        let truth1 = fs::read(&art.truth).unwrap();
        let art2 = cmd_simulate(&cfg).unwrap();
        assert_eq!(csv1, fs::read(&art2.csv).unwrap());
        assert_eq!(truth1, fs::read(&art2.truth).unwrap());

        let x = read_sample_csv(&art.csv).unwrap();
        assert_eq!((x.n(), x.d()), (20, 6));
        let sidecar: TruthSidecar = read_json(&art.truth).unwrap();
        assert_eq!(sidecar.d, 6);
        assert_eq!(sidecar.edges.len(), 3 * 6 - 6);
        assert!(sidecar.edges.iter().all(|&(j, k)| 1 <= j && j < k && k <= 6));
    }

    #[test]
    fn fit_then_test_edge_round_trip() {
        let dir = tempdir().unwrap();
        let cfg = sim_cfg(dir.path(), 6, 80, 3);
        let art = cmd_simulate(&cfg).unwrap();
        let fit_cfg = FitCliConfig {
            input: art.csv.clone(),
            output: dir.path().join("fit.json"),
            lambda_grid: Some(vec![0.2, 0.4]),
            cv_folds: 3,
            seed: 5,
        };
        cmd_fit(&fit_cfg).unwrap();
        let estimate = read_estimate(&fit_cfg.output).unwrap();
        assert_eq!(estimate.d, 6);
        assert_eq!(estimate.theta.len(), 6);
        let cv = estimate.cv.as_ref().unwrap();
        assert_eq!(cv.grid.len(), cv.mean_loss.len());

        let te = TestEdgeConfig {
            input: art.csv.clone(),
            estimate: fit_cfg.output.clone(),
            edge: (1, 2),
            alpha: 0.05,
            output: Some(dir.path().join("edge.json")),
        };
        let text = cmd_test_edge(&te).unwrap();
        let record: ResultRecord<serde_json::Value, EdgeTestReport> =
            serde_json::from_str(&text).unwrap();
        assert_eq!((record.payload.j, record.payload.k), (1, 2));
        assert!(record.payload.p_score > 0.0 && record.payload.p_score <= 1.0);
        assert!(record.payload.p_wald > 0.0 && record.payload.p_wald <= 1.0);
        let on_disk = fs::read_to_string(dir.path().join("edge.json")).unwrap();
        assert_eq!(on_disk, text);
    }

    #[test]
    fn test_edge_rejects_bad_edges() {
        let te = |edge| TestEdgeConfig {
            input: "unused".into(),
            estimate: "unused".into(),
            edge,
            alpha: 0.05,
            output: None,
        };
        assert_eq!(cmd_test_edge(&te((2, 2))).unwrap_err().exit_code(), 2);
        assert_eq!(cmd_test_edge(&te((0, 1))).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn subgraph_writes_json_and_dot() {
        let dir = tempdir().unwrap();
        let cfg = sim_cfg(dir.path(), 6, 60, 11);
        let art = cmd_simulate(&cfg).unwrap();
        let sg = SubgraphCliConfig {
            input: art.csv,
            output: dir.path().join("sub.json"),
            alpha: 0.1,
            n_bootstrap: 150,
            lambda_grid: Some(vec![0.3]),
            cv_folds: 5,
            seed: 2,
        };
        let arts = cmd_subgraph(&sg).unwrap();
        assert_eq!(arts.dot, dir.path().join("sub.dot"));
        let record: ResultRecord<SubgraphCliConfig, SubgraphPayload> =
            read_json(&arts.json).unwrap();
        assert_eq!(record.payload.d, 6);
        assert!(record.payload.report.c_w >= 0.0);
        for e in &record.payload.report.intervals {
            assert!(1 <= e.j && e.j < e.k && e.k <= 6);
        }
        let dot = fs::read_to_string(&arts.dot).unwrap();
        assert!(dot.starts_with("graph confidence_subgraph {"));
        let edge_lines = dot.lines().filter(|l| l.contains("--")).count();
        assert_eq!(edge_lines, record.payload.report.retained_edges.len());
    }

    #[test]
    fn invalid_alpha_is_a_usage_error() {
        let sg = SubgraphCliConfig {
            input: "unused".into(),
            output: "unused".into(),
            alpha: 1.0,
            n_bootstrap: 200,
            lambda_grid: None,
            cv_folds: 5,
            seed: 0,
        };
        assert_eq!(cmd_subgraph(&sg).unwrap_err().exit_code(), 2);
    }
}
