//! `npgm` — simulation, estimation, and inference for rank-based
//! (Gaussian-copula) graphical models.

use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use npgm::models::{GraphKind, Transform};
use npgm_cli::bench::{bench_power, bench_type1, PowerConfig, Type1Config};
use npgm_cli::commands::{
    cmd_fit, cmd_simulate, cmd_subgraph, cmd_test_edge, FitCliConfig, SimulateConfig,
    SubgraphCliConfig, TestEdgeConfig,
};
use npgm_cli::{CliError, CliResult};

#[derive(Parser)]
#[command(
    name = "npgm",
    version,
    about = "Estimation and inference for high-dimensional Gaussian-copula graphical models",
    long_about = "Simulates nonparanormal data, fits sparse precision matrices from Kendall's \
                  tau rank correlations, tests single edges with decorrelated score and Wald \
                  statistics, and builds bootstrap-uniform confidence subgraphs. All commands \
                  are deterministic given their configuration and seed; the thread count never \
                  affects results."
)]
struct Cli {
    /// Worker threads (default: all logical CPUs). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args)]
struct FitFlags {
    /// Comma-separated λ grid (default: 20 log-spaced values)
    #[arg(long)]
    lambda_grid: Option<String>,
    /// Cross-validation folds
    #[arg(long, default_value_t = 5)]
    cv_folds: usize,
}

#[derive(Subcommand)]
enum Cmd {
    /// Draw a synthetic sample; writes a CSV and a ground-truth sidecar
    Simulate {
        /// Number of variables
        #[arg(long)]
        d: usize,
        /// Number of samples
        #[arg(long)]
        n: usize,
        /// Graph family: scale-free | hub | band3
        #[arg(long, default_value = "scale-free")]
        graph: String,
        /// Marginal transform: identity | sqrt | cubic
        #[arg(long, default_value = "identity")]
        transform: String,
        /// Weight placed on every edge of the precision matrix
        #[arg(long, default_value_t = 0.3)]
        edge_weight: f64,
        /// Diagonal margin beyond |λ_min|
        #[arg(long, default_value_t = 0.2)]
        diag_shift: f64,
        #[arg(long)]
        seed: u64,
        /// Sample CSV path; the sidecar lands at <output>.truth.json
        #[arg(long)]
        output: PathBuf,
    },
    /// Estimate a sparse precision matrix (rank correlation + CV + CLIME)
    Fit {
        /// Sample CSV
        #[arg(long)]
        input: PathBuf,
        /// Estimate JSON path
        #[arg(long)]
        output: PathBuf,
        #[command(flatten)]
        fit: FitFlags,
        /// Seed for the cross-validation fold shuffle
        #[arg(long)]
        seed: u64,
    },
    /// Decorrelated score and Wald tests for one edge
    TestEdge {
        /// Sample CSV
        #[arg(long)]
        input: PathBuf,
        /// Estimate JSON produced by `fit`
        #[arg(long)]
        estimate: PathBuf,
        /// Edge as 1-based "j,k"
        #[arg(long)]
        edge: String,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Report JSON path (stdout when omitted)
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Bootstrap-uniform confidence subgraph over all edges
    Subgraph {
        /// Sample CSV
        #[arg(long)]
        input: PathBuf,
        /// Report JSON path; the DOT graph lands next to it
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Bootstrap replicates
        #[arg(long, default_value_t = 1000)]
        bootstrap: usize,
        #[command(flatten)]
        fit: FitFlags,
        #[arg(long)]
        seed: u64,
    },
    /// Type-I error table over graph × transform cells at a fixed null edge
    BenchType1 {
        #[arg(long, default_value_t = 50)]
        d: usize,
        #[arg(long, default_value_t = 100)]
        n: usize,
        /// Restrict to one graph family (default: scale-free and band3)
        #[arg(long)]
        graph: Option<String>,
        /// Restrict to one transform (default: sqrt and cubic)
        #[arg(long)]
        transform: Option<String>,
        /// Replications per cell
        #[arg(long, default_value_t = 500)]
        reps: usize,
        #[arg(long)]
        seed: u64,
        /// Table CSV path
        #[arg(long)]
        output: PathBuf,
        #[command(flatten)]
        fit: FitFlags,
    },
    /// Power curve for one added edge with the theoretical overlay
    BenchPower {
        #[arg(long, default_value_t = 30)]
        d: usize,
        #[arg(long, default_value_t = 200)]
        n: usize,
        /// Base graph family
        #[arg(long, default_value = "scale-free")]
        graph: String,
        /// Marginal transform
        #[arg(long, default_value = "identity")]
        transform: String,
        /// Grid points from 0 to --max-weight, endpoints included
        #[arg(long, default_value_t = 9)]
        steps: usize,
        #[arg(long, default_value_t = 0.8)]
        max_weight: f64,
        /// Replications per grid point
        #[arg(long, default_value_t = 500)]
        reps: usize,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long)]
        seed: u64,
        /// Table CSV path
        #[arg(long)]
        output: PathBuf,
        #[command(flatten)]
        fit: FitFlags,
    },
}

fn parse_graph(s: &str) -> CliResult<GraphKind> {
    GraphKind::from_str(s).map_err(CliError::from)
}

fn parse_transform(s: &str) -> CliResult<Transform> {
    Transform::from_str(s).map_err(CliError::from)
}

fn parse_edge(s: &str) -> CliResult<(usize, usize)> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err(CliError::Usage(format!("edge must be \"j,k\", got {s:?}")));
    }
    let parse = |t: &str| {
        t.trim()
            .parse::<usize>()
            .map_err(|_| CliError::Usage(format!("edge endpoint {t:?} is not a positive integer")))
    };
    Ok((parse(parts[0])?, parse(parts[1])?))
}

fn parse_lambda_grid(s: &Option<String>) -> CliResult<Option<Vec<f64>>> {
    match s {
        None => Ok(None),
        Some(text) => {
            let grid: Result<Vec<f64>, _> =
                text.split(',').map(|t| t.trim().parse::<f64>()).collect();
            let grid = grid
                .map_err(|_| CliError::Usage(format!("could not parse λ grid {text:?}")))?;
            if grid.is_empty() {
                return Err(CliError::Usage("λ grid is empty".into()));
            }
            Ok(Some(grid))
        }
    }
}

fn run(cmd: Cmd) -> CliResult<()> {
    match cmd {
        Cmd::Simulate { d, n, graph, transform, edge_weight, diag_shift, seed, output } => {
            let cfg = SimulateConfig {
                d,
                n,
                graph: parse_graph(&graph)?,
                transform: parse_transform(&transform)?,
                edge_weight,
                diag_shift,
                seed,
                output,
            };
            cmd_simulate(&cfg).map(|_| ())
        }
        Cmd::Fit { input, output, fit, seed } => {
            let cfg = FitCliConfig {
                input,
                output,
                lambda_grid: parse_lambda_grid(&fit.lambda_grid)?,
                cv_folds: fit.cv_folds,
                seed,
            };
            cmd_fit(&cfg)
        }
        Cmd::TestEdge { input, estimate, edge, alpha, output } => {
            let cfg = TestEdgeConfig {
                input,
                estimate,
                edge: parse_edge(&edge)?,
                alpha,
                output,
            };
            let text = cmd_test_edge(&cfg)?;
            if cfg.output.is_none() {
                print!("{text}");
            }
            Ok(())
        }
        Cmd::Subgraph { input, output, alpha, bootstrap, fit, seed } => {
            let cfg = SubgraphCliConfig {
                input,
                output,
                alpha,
                n_bootstrap: bootstrap,
                lambda_grid: parse_lambda_grid(&fit.lambda_grid)?,
                cv_folds: fit.cv_folds,
                seed,
            };
            cmd_subgraph(&cfg).map(|_| ())
        }
        Cmd::BenchType1 { d, n, graph, transform, reps, seed, output, fit } => {
            let mut cfg = Type1Config::defaults(d, n, reps, seed, output);
            if let Some(g) = graph {
                cfg.graphs = vec![parse_graph(&g)?];
            }
            if let Some(t) = transform {
                cfg.transforms = vec![parse_transform(&t)?];
            }
            cfg.lambda_grid = parse_lambda_grid(&fit.lambda_grid)?;
            cfg.cv_folds = fit.cv_folds;
            bench_type1(&cfg).map(|_| ())
        }
        Cmd::BenchPower {
            d,
            n,
            graph,
            transform,
            steps,
            max_weight,
            reps,
            alpha,
            seed,
            output,
            fit,
        } => {
            let cfg = PowerConfig {
                d,
                n,
                graph: parse_graph(&graph)?,
                transform: parse_transform(&transform)?,
                steps,
                max_weight,
                reps,
                alpha,
                seed,
                output,
                lambda_grid: parse_lambda_grid(&fit.lambda_grid)?,
                cv_folds: fit.cv_folds,
            };
            bench_power(&cfg).map(|_| ())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if threads == 0 {
            eprintln!("usage error: --threads must be positive");
            return ExitCode::from(2);
        }
        if let Err(e) =
            rayon::ThreadPoolBuilder::new().num_threads(threads).build_global()
        {
            eprintln!("usage error: could not configure thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
