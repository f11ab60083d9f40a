//! Uniform inference over all edges: multiplier bootstrap for the
//! sup-statistic, simultaneous confidence intervals, and the confidence
//! subgraph.
//!
//! For each edge the per-sample weights are `z_ijk = −z_i/(2σ̂_jk)` with
//! `z_i` the influence scores of the variance estimator, so that
//! `(1/n)Σ_i z_ijk² = 1/4` exactly. One bootstrap replicate draws a single
//! standard-normal multiplier vector `e` — shared by every edge, since the
//! sup-statistic couples them — and realizes
//!
//! ```text
//! W = max_{(j,k)} (1/√n) Σ_i z_ijk · e_i .
//! ```
//!
//! The empirical `(1 − α/2)`-quantile `c_W` widens the per-edge one-step
//! intervals into simultaneous ones; edges whose simultaneous interval
//! excludes zero form the confidence subgraph, which is contained in the
//! true graph with probability at least `1 − α` asymptotically.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::edge_tests::InferenceContext;
use crate::{Error, Result};

/// Per-edge multiplier weights plus the scalars needed for the intervals.
#[derive(Debug, Clone)]
pub struct MultiplierWeights {
    /// Edges that produced usable weights, `j < k`.
    pub edges: Vec<(usize, usize)>,
    /// One length-`n` weight vector per entry of `edges`.
    pub z: Vec<Vec<f64>>,
    /// `σ̂_jk` per edge.
    pub per_edge_sigma: Vec<f64>,
    /// `L_jk = 2σ̂_jk·Θ̂_jj·Θ̂_kk` per edge.
    pub per_edge_l: Vec<f64>,
    /// `Θ̂^W_jk` per edge.
    pub per_edge_theta_w: Vec<f64>,
    /// Edges excluded because some ingredient was degenerate.
    pub degenerate: Vec<(usize, usize)>,
    n: usize,
}

impl MultiplierWeights {
    pub fn n(&self) -> usize {
        self.n
    }
}

/// Computes multiplier weights for the given edges, excluding (and
/// recording) edges whose variance sits at the floor or whose Wald
/// ingredients are degenerate.
pub fn multiplier_weights(
    ctx: &InferenceContext,
    edges: &[(usize, usize)],
) -> Result<MultiplierWeights> {
    if edges.is_empty() {
        return Err(Error::InvalidConfig("edge list for the bootstrap is empty".into()));
    }
    struct EdgeData {
        z: Vec<f64>,
        sigma: f64,
        l: f64,
        theta_w: f64,
    }
    let computed: Vec<(usize, usize, Option<EdgeData>)> = edges
        .par_iter()
        .map(|&(j, k)| {
            let data = (|| -> Result<Option<EdgeData>> {
                let denom = match ctx.diag_product(j, k) {
                    Ok(v) => v,
                    Err(Error::DegenerateDiagonal { .. }) => return Ok(None),
                    Err(e) => return Err(e),
                };
                let theta_w = match ctx.wald_estimate(j, k) {
                    Ok(v) => v,
                    Err(Error::DegenerateDenominator { .. }) => return Ok(None),
                    Err(e) => return Err(e),
                };
                let var = ctx.variance(j, k)?;
                if var.floored {
                    return Ok(None);
                }
                let sigma = var.sigma2.sqrt();
                let scale = -1.0 / (2.0 * sigma);
                let z = ctx
                    .influence_scores(j, k)?
                    .into_iter()
                    .map(|v| v * scale)
                    .collect();
                Ok(Some(EdgeData { z, sigma, l: 2.0 * sigma * denom, theta_w }))
            })();
            data.map(|d| (j, k, d))
        })
        .collect::<Result<_>>()?;

    let mut w = MultiplierWeights {
        edges: Vec::new(),
        z: Vec::new(),
        per_edge_sigma: Vec::new(),
        per_edge_l: Vec::new(),
        per_edge_theta_w: Vec::new(),
        degenerate: Vec::new(),
        n: ctx.n(),
    };
    for (j, k, data) in computed {
        match data {
            Some(d) => {
                w.edges.push((j, k));
                w.z.push(d.z);
                w.per_edge_sigma.push(d.sigma);
                w.per_edge_l.push(d.l);
                w.per_edge_theta_w.push(d.theta_w);
            }
            None => w.degenerate.push((j, k)),
        }
    }
    Ok(w)
}

/// Empirical `(1 − α/2)`-quantile of the bootstrapped sup-statistic.
///
/// Each replicate draws one standard-normal multiplier vector from a
/// deterministic per-replicate stream, so the result is independent of the
/// degree of parallelism. The quantile is the 1-based order statistic at
/// `ceil((1 − α/2)·n_bootstrap)`.
pub fn bootstrap_sup_quantile(
    w: &MultiplierWeights,
    n_bootstrap: usize,
    alpha: f64,
    seed: u64,
) -> Result<f64> {
    if n_bootstrap < 100 {
        return Err(Error::InvalidConfig(format!(
            "bootstrap replicate count must be ≥ 100, got {n_bootstrap}"
        )));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidConfig(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if w.edges.is_empty() {
        return Err(Error::InvalidConfig(
            "no non-degenerate edges available for the bootstrap".into(),
        ));
    }
    let n = w.n;
    let inv_sqrt_n = 1.0 / (n as f64).sqrt();
    let mut sups: Vec<f64> = (0..n_bootstrap)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b as u64);
            let e: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            let mut sup = f64::NEG_INFINITY;
            for z in &w.z {
                let s: f64 = z.iter().zip(&e).map(|(a, b)| a * b).sum();
                sup = sup.max(s * inv_sqrt_n);
            }
            sup
        })
        .collect();
    sups.sort_by(|a, b| a.partial_cmp(b).expect("sup statistics are finite"));
    let level = 1.0 - alpha / 2.0;
    let rank = (level * n_bootstrap as f64).ceil() as usize;
    Ok(sups[rank.clamp(1, n_bootstrap) - 1])
}

/// One edge's simultaneous confidence interval.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EdgeInterval {
    pub j: usize,
    pub k: usize,
    pub theta_w: f64,
    pub l_jk: f64,
    pub low: f64,
    pub high: f64,
    pub retained: bool,
}

/// Result of the confidence-subgraph construction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubgraphReport {
    pub alpha: f64,
    pub n_bootstrap: usize,
    pub seed: u64,
    /// Bootstrap quantile `c_W(1 − α/2)`; zero when every edge was degenerate.
    pub c_w: f64,
    pub intervals: Vec<EdgeInterval>,
    /// Edges whose simultaneous interval excludes zero, `j < k`, sorted.
    pub retained_edges: Vec<(usize, usize)>,
    /// Edges excluded as degenerate (conservatively not retained).
    pub degenerate_edges: Vec<(usize, usize)>,
}

/// Builds the confidence subgraph over all `j < k` at level `alpha`.
///
/// Starting from the complete graph, an edge survives exactly when its
/// simultaneous interval `Θ̂^W_jk ± c_W·L_jk/√n` excludes zero; degenerate
/// edges are dropped (conservative for the containment guarantee).
pub fn confidence_subgraph(
    ctx: &InferenceContext,
    alpha: f64,
    n_bootstrap: usize,
    seed: u64,
) -> Result<SubgraphReport> {
    let d = ctx.d();
    let all_edges: Vec<(usize, usize)> = (0..d)
        .flat_map(|j| ((j + 1)..d).map(move |k| (j, k)))
        .collect();
    let w = multiplier_weights(ctx, &all_edges)?;
    let c_w = if w.edges.is_empty() {
        0.0
    } else {
        bootstrap_sup_quantile(&w, n_bootstrap, alpha, seed)?
    };

    let inv_sqrt_n = 1.0 / (ctx.n() as f64).sqrt();
    let mut intervals = Vec::with_capacity(w.edges.len());
    let mut retained_edges = Vec::new();
    for (idx, &(j, k)) in w.edges.iter().enumerate() {
        let theta_w = w.per_edge_theta_w[idx];
        let half = c_w * w.per_edge_l[idx] * inv_sqrt_n;
        let (low, high) = (theta_w - half, theta_w + half);
        let retained = low > 0.0 || high < 0.0;
        if retained {
            retained_edges.push((j, k));
        }
        intervals.push(EdgeInterval { j, k, theta_w, l_jk: w.per_edge_l[idx], low, high, retained });
    }
    Ok(SubgraphReport {
        alpha,
        n_bootstrap,
        seed,
        c_w,
        intervals,
        retained_edges,
        degenerate_edges: w.degenerate,
    })
}
