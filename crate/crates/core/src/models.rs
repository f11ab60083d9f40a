//! Synthetic ground-truth models: graph generators, precision/correlation
//! construction, Gaussian sampling, and nonparanormal marginal transforms.
//!
//! A graph's adjacency matrix `A` becomes a precision matrix via
//!
//! ```text
//! Θ* = w·A + (|λ_min(w·A)| + shift)·I
//! ```
//!
//! Because the latent model is defined over a *correlation* matrix, the
//! inverse of `Θ*` is rescaled to unit diagonal, and the conformally rescaled
//! precision `Θ_corr = D^{1/2} Θ* D^{1/2}` (with `D = diag(Θ*^{-1})`) is the
//! target of estimation and inference. Diagonal rescaling preserves the
//! support, so the edge set — and every hypothesis of the form `Θ_jk = 0` —
//! is the same for `Θ*` and `Θ_corr`.

use nalgebra::{Cholesky, DMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::rank::SampleMatrix;
use crate::{derive_seed, Error, Result};

/// Which synthetic graph family to generate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum GraphKind {
    /// Preferential-attachment tree (d − 1 edges, connected).
    #[serde(rename = "scale-free")]
    ScaleFree,
    /// Disjoint stars over groups of 20 nodes (19·d/20 edges).
    #[serde(rename = "hub")]
    Hub,
    /// Band graph connecting nodes at distance ≤ 3 (3d − 6 edges).
    #[serde(rename = "band3")]
    Band3,
}

impl std::str::FromStr for GraphKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "scale-free" => Ok(Self::ScaleFree),
            "hub" => Ok(Self::Hub),
            "band3" => Ok(Self::Band3),
            other => Err(Error::InvalidConfig(format!(
                "unknown graph kind {other:?}; expected scale-free, hub, or band3"
            ))),
        }
    }
}

impl std::fmt::Display for GraphKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::ScaleFree => "scale-free",
            Self::Hub => "hub",
            Self::Band3 => "band3",
        })
    }
}

/// Full description of a synthetic model.
#[derive(Debug, Clone)]
pub struct GraphModelSpec {
    pub kind: GraphKind,
    pub d: usize,
    /// Value placed on every off-diagonal nonzero of the precision matrix.
    pub edge_weight: f64,
    /// Margin added beyond `|λ_min|` to make the precision positive definite.
    pub diag_shift: f64,
    /// Seed for the (scale-free) graph draw.
    pub seed: u64,
}

impl GraphModelSpec {
    pub fn new(kind: GraphKind, d: usize, seed: u64) -> Self {
        Self { kind, d, edge_weight: 0.3, diag_shift: 0.2, seed }
    }

    fn validate(&self) -> Result<()> {
        if self.d < 4 {
            return Err(Error::InvalidConfig(format!("d must be ≥ 4, got {}", self.d)));
        }
        if self.edge_weight == 0.0 || !self.edge_weight.is_finite() {
            return Err(Error::InvalidConfig("edge_weight must be nonzero and finite".into()));
        }
        if !(self.diag_shift.is_finite() && self.diag_shift > 0.0) {
            return Err(Error::InvalidConfig("diag_shift must be positive".into()));
        }
        Ok(())
    }
}

/// Ground truth for one synthetic model.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    /// Symmetric 0/1 adjacency with zero diagonal.
    pub adjacency: DMatrix<f64>,
    /// Precision before rescaling: `w·A + (|λ_min| + shift)·I`; its smallest
    /// eigenvalue equals `shift` by construction.
    pub theta_star: DMatrix<f64>,
    /// Latent correlation: `Θ*^{-1}` rescaled to unit diagonal.
    pub sigma_star: DMatrix<f64>,
    /// Conformally rescaled precision `D^{1/2} Θ* D^{1/2} = Σ*^{-1}`: the
    /// matrix the estimators target. Same support as `theta_star`.
    pub theta_corr: DMatrix<f64>,
    /// Edges `(j, k)` with `j < k`, sorted.
    pub edge_set: Vec<(usize, usize)>,
}

/// Preferential-attachment graph: starts from a 2-node chain and attaches
/// each new node to one existing node sampled with probability proportional
/// to its current degree. Always a tree on `d` nodes (d − 1 edges).
pub fn gen_scale_free(d: usize, seed: u64) -> Result<DMatrix<f64>> {
    if d < 3 {
        return Err(Error::InvalidConfig(format!("scale-free graph needs d ≥ 3, got {d}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut adj = DMatrix::zeros(d, d);
    let mut degree = vec![0u64; d];
    adj[(0, 1)] = 1.0;
    adj[(1, 0)] = 1.0;
    degree[0] = 1;
    degree[1] = 1;
    for t in 2..d {
        // Cumulative integer degrees make the draw exact; a new node has
        // degree zero until attached, so only nodes 0..t are candidates.
        let total: u64 = degree[..t].iter().sum();
        let mut u = rng.gen_range(0..total);
        let mut target = 0;
        for (i, &deg) in degree[..t].iter().enumerate() {
            if u < deg {
                target = i;
                break;
            }
            u -= deg;
        }
        adj[(t, target)] = 1.0;
        adj[(target, t)] = 1.0;
        degree[target] += 1;
        degree[t] = 1;
    }
    Ok(adj)
}

/// As [`gen_scale_free`] plus one extra preferential edge, giving exactly
/// `d` edges (some sources describe the family that way); the extra edge
/// joins two distinct, not-yet-adjacent nodes drawn by degree.
pub fn gen_scale_free_with_extra_edge(d: usize, seed: u64) -> Result<DMatrix<f64>> {
    let mut adj = gen_scale_free(d, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 1));
    let degree: Vec<u64> = (0..d)
        .map(|j| adj.column(j).iter().filter(|v| **v != 0.0).count() as u64)
        .collect();
    let total: u64 = degree.iter().sum();
    let draw = |rng: &mut ChaCha8Rng| -> usize {
        let mut u = rng.gen_range(0..total);
        for (i, &deg) in degree.iter().enumerate() {
            if u < deg {
                return i;
            }
            u -= deg;
        }
        d - 1
    };
    loop {
        let a = draw(&mut rng);
        let b = draw(&mut rng);
        if a != b && adj[(a, b)] == 0.0 {
            adj[(a, b)] = 1.0;
            adj[(b, a)] = 1.0;
            return Ok(adj);
        }
    }
}

/// Disjoint stars: nodes are split into consecutive groups of `group_size`,
/// the first node of each group is its hub, and every other member connects
/// only to the hub. Edge count: `d·(group_size − 1)/group_size`.
pub fn gen_hub(d: usize, group_size: usize) -> Result<DMatrix<f64>> {
    if group_size < 2 {
        return Err(Error::InvalidConfig("hub group size must be ≥ 2".into()));
    }
    if d == 0 || d % group_size != 0 {
        return Err(Error::InvalidConfig(format!(
            "hub graph needs d divisible by the group size; got d = {d}, group size {group_size}"
        )));
    }
    let mut adj = DMatrix::zeros(d, d);
    for g in 0..d / group_size {
        let hub = g * group_size;
        for off in 1..group_size {
            adj[(hub, hub + off)] = 1.0;
            adj[(hub + off, hub)] = 1.0;
        }
    }
    Ok(adj)
}

/// Band graph: `A_jk = 1` iff `1 ≤ |j − k| ≤ 3`. Edge count `3d − 6`.
pub fn gen_band3(d: usize) -> Result<DMatrix<f64>> {
    if d < 4 {
        return Err(Error::InvalidConfig(format!("band graph needs d ≥ 4, got {d}")));
    }
    let mut adj = DMatrix::zeros(d, d);
    for j in 0..d {
        for k in (j + 1)..(j + 4).min(d) {
            adj[(j, k)] = 1.0;
            adj[(k, j)] = 1.0;
        }
    }
    Ok(adj)
}

fn validate_adjacency(a: &DMatrix<f64>) -> Result<()> {
    let d = a.nrows();
    if a.ncols() != d {
        return Err(Error::DimensionMismatch { expected: d, got: a.ncols() });
    }
    for j in 0..d {
        if a[(j, j)] != 0.0 {
            return Err(Error::InvalidConfig("adjacency must have zero diagonal".into()));
        }
        for k in 0..d {
            let v = a[(j, k)];
            if v != 0.0 && v != 1.0 {
                return Err(Error::InvalidConfig("adjacency entries must be 0 or 1".into()));
            }
            if v != a[(k, j)] {
                return Err(Error::InvalidConfig("adjacency must be symmetric".into()));
            }
        }
    }
    Ok(())
}

/// Builds the ground truth from an arbitrary symmetric weight matrix (zero
/// diagonal); the edge set is the support of the off-diagonal weights. This
/// is the general form used by power sweeps that move a single edge's weight
/// while holding the others fixed.
pub fn truth_from_weights(weights: &DMatrix<f64>, diag_shift: f64) -> Result<GroundTruth> {
    let d = weights.nrows();
    if weights.ncols() != d {
        return Err(Error::DimensionMismatch { expected: d, got: weights.ncols() });
    }
    if !(diag_shift.is_finite() && diag_shift > 0.0) {
        return Err(Error::InvalidConfig("diag_shift must be positive".into()));
    }
    for j in 0..d {
        if weights[(j, j)] != 0.0 {
            return Err(Error::InvalidConfig("weight matrix must have zero diagonal".into()));
        }
        for k in 0..d {
            if !weights[(j, k)].is_finite() || weights[(j, k)] != weights[(k, j)] {
                return Err(Error::InvalidConfig("weight matrix must be finite and symmetric".into()));
            }
        }
    }

    let lam_min = weights
        .clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let mut theta_star = weights.clone();
    let bump = lam_min.abs() + diag_shift;
    for j in 0..d {
        theta_star[(j, j)] += bump;
    }

    let chol = Cholesky::new(theta_star.clone()).ok_or(Error::FactorizationFailure)?;
    let sigma_pre = chol.inverse();
    let scale: Vec<f64> = (0..d).map(|j| sigma_pre[(j, j)].sqrt()).collect();
    let mut sigma_star = DMatrix::identity(d, d);
    let mut theta_corr = DMatrix::zeros(d, d);
    for j in 0..d {
        theta_corr[(j, j)] = theta_star[(j, j)] * scale[j] * scale[j];
        for k in (j + 1)..d {
            let s = 0.5 * (sigma_pre[(j, k)] + sigma_pre[(k, j)]) / (scale[j] * scale[k]);
            sigma_star[(j, k)] = s;
            sigma_star[(k, j)] = s;
            let t = theta_star[(j, k)] * scale[j] * scale[k];
            theta_corr[(j, k)] = t;
            theta_corr[(k, j)] = t;
        }
    }

    let mut adjacency = DMatrix::zeros(d, d);
    let mut edge_set = Vec::new();
    for j in 0..d {
        for k in (j + 1)..d {
            if weights[(j, k)] != 0.0 {
                adjacency[(j, k)] = 1.0;
                adjacency[(k, j)] = 1.0;
                edge_set.push((j, k));
            }
        }
    }
    Ok(GroundTruth { adjacency, theta_star, sigma_star, theta_corr, edge_set })
}

/// Converts a 0/1 adjacency to ground truth with a uniform edge weight.
pub fn adjacency_to_truth(
    a: &DMatrix<f64>,
    edge_weight: f64,
    diag_shift: f64,
) -> Result<GroundTruth> {
    validate_adjacency(a)?;
    if edge_weight == 0.0 || !edge_weight.is_finite() {
        return Err(Error::InvalidConfig("edge_weight must be nonzero and finite".into()));
    }
    let mut truth = truth_from_weights(&(a * edge_weight), diag_shift)?;
    truth.adjacency = a.clone();
    Ok(truth)
}

/// Generates the ground truth for a full model description.
pub fn generate_truth(spec: &GraphModelSpec) -> Result<GroundTruth> {
    spec.validate()?;
    let adj = match spec.kind {
        GraphKind::ScaleFree => gen_scale_free(spec.d, spec.seed)?,
        GraphKind::Hub => gen_hub(spec.d, 20)?,
        GraphKind::Band3 => gen_band3(spec.d)?,
    };
    adjacency_to_truth(&adj, spec.edge_weight, spec.diag_shift)
}

/// Draws `n` rows from `N(0, Σ)` via the Cholesky factor of `Σ`.
///
/// Returns a raw matrix so single-row draws are possible; wrap the result in
/// [`SampleMatrix`] (or use [`simulate_dataset`]) for estimation, which needs
/// `n ≥ 2`.
pub fn sample_gaussian(sigma: &DMatrix<f64>, n: usize, seed: u64) -> Result<DMatrix<f64>> {
    let d = sigma.nrows();
    if sigma.ncols() != d {
        return Err(Error::DimensionMismatch { expected: d, got: sigma.ncols() });
    }
    if n == 0 {
        return Err(Error::InvalidConfig("sample count must be positive".into()));
    }
    let chol = Cholesky::new(sigma.clone()).ok_or(Error::FactorizationFailure)?;
    let l = chol.l();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = DMatrix::zeros(n, d);
    for i in 0..n {
        // Row i is L·z for a fresh standard-normal z; the lower-triangular
        // structure lets the product accumulate in one pass.
        for j in 0..d {
            let z: f64 = rng.sample(StandardNormal);
            for r in j..d {
                x[(i, r)] += l[(r, j)] * z;
            }
        }
    }
    Ok(x)
}

/// Entrywise marginal transforms. Each is strictly increasing and scaled so
/// the transformed marginal keeps unit variance when the input is standard
/// normal, which leaves Kendall's tau (and hence the whole rank pipeline)
/// exactly unchanged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
pub enum Transform {
    #[default]
    #[serde(rename = "identity")]
    Identity,
    /// `z ↦ sign(z)·|z|^{1/2} / c₁` with `c₁² = E|Z| = ∫|t|φ(t)dt`.
    #[serde(rename = "sqrt")]
    ExtendedSqrt,
    /// `z ↦ z³ / c₂` with `c₂² = E Z⁶ = ∫t⁶φ(t)dt`.
    #[serde(rename = "cubic")]
    Cubic,
}

/// `(E|Z|)^{1/2} = (2/π)^{1/4}`; quadrature gives `∫|t|φ(t)dt = 0.797884560803`.
pub const EXTENDED_SQRT_SCALE: f64 = 0.8932438417380023;
/// `(E Z⁶)^{1/2} = √15`; quadrature gives `∫t⁶φ(t)dt = 15.000000000000`.
pub const CUBIC_SCALE: f64 = 3.872983346207417;

impl Transform {
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Self::Identity => z,
            Self::ExtendedSqrt => z.signum() * z.abs().sqrt() / EXTENDED_SQRT_SCALE,
            Self::Cubic => z * z * z / CUBIC_SCALE,
        }
    }

    pub fn apply_matrix(self, x: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            Self::Identity => x.clone(),
            _ => x.map(|v| self.apply(v)),
        }
    }
}

impl std::str::FromStr for Transform {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(Self::Identity),
            "sqrt" => Ok(Self::ExtendedSqrt),
            "cubic" => Ok(Self::Cubic),
            other => Err(Error::InvalidConfig(format!(
                "unknown transform {other:?}; expected identity, sqrt, or cubic"
            ))),
        }
    }
}

impl std::fmt::Display for Transform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Identity => "identity",
            Self::ExtendedSqrt => "sqrt",
            Self::Cubic => "cubic",
        })
    }
}

/// End-to-end synthetic draw: build the ground truth, sample the latent
/// Gaussian, and apply the marginal transform. The graph uses the seed inside
/// `spec`; the Gaussian draw uses `sample_seed`.
pub fn simulate_dataset(
    spec: &GraphModelSpec,
    n: usize,
    transform: Transform,
    sample_seed: u64,
) -> Result<(SampleMatrix, GroundTruth)> {
    let truth = generate_truth(spec)?;
    let z = sample_gaussian(&truth.sigma_star, n, sample_seed)?;
    let x = SampleMatrix::new(transform.apply_matrix(&z))?;
    Ok((x, truth))
}
