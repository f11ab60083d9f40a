//! Exhaustive small-dimension oracles for the decorrelated-score machinery.
//!
//! Every quantity the inference path computes through closed-form
//! contractions is rebuilt here from its defining linear algebra: the
//! full `d² × d²` Kronecker curvature matrix, an explicit linear solve for
//! the decorrelation weights, and the explicit per-sample second-moment
//! matrix. The production closed forms must agree with these explicit
//! constructions to near machine precision on random well-conditioned
//! instances — any index, transpose, or sign error shows up as a gross
//! mismatch.

use nalgebra::{DMatrix, DVector};
use npgm::edge_tests::{
    decorrelated_score, null_restricted, precision_contract, InferenceContext, NullZeroing,
};
use npgm::rank::{CorrelationEstimate, SampleMatrix};
use npgm::subgraph::multiplier_weights;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

/// Column-major position of entry `(r, c)` in `vec(M)` for a `d × d` matrix.
fn vec_pos(r: usize, c: usize, d: usize) -> usize {
    c * d + r
}

fn vec_of(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(m.as_slice())
}

/// Random symmetric positive-definite matrix with dominant diagonal, so that
/// zeroing any off-diagonal pair keeps it positive definite and all the
/// Kronecker systems stay well conditioned.
fn rand_spd(d: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let a = DMatrix::from_fn(d, d, |_, _| rng.gen_range(-1.0..1.0));
    let s = (&a * a.transpose()) * (0.3 / d as f64);
    let mut m = &s + DMatrix::from_fn(d, d, |r, c| {
        if r == c {
            1.0 + rng.gen_range(0.0..0.5)
        } else {
            0.0
        }
    });
    // Force exact symmetry so downstream checks are not polluted by the
    // floating-point asymmetry of the product above.
    for r in 0..d {
        for c in (r + 1)..d {
            let v = 0.5 * (m[(r, c)] + m[(c, r)]);
            m[(r, c)] = v;
            m[(c, r)] = v;
        }
    }
    m
}

/// Random symmetric matrix with unit diagonal and moderate off-diagonal
/// entries — the shape of a sine-transformed rank correlation matrix.
fn rand_corr_like(d: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let mut m = DMatrix::identity(d, d);
    for r in 0..d {
        for c in (r + 1)..d {
            let v = rng.gen_range(-0.45..0.45);
            m[(r, c)] = v;
            m[(c, r)] = v;
        }
    }
    m
}

/// Decorrelation weights solved explicitly: partition the full `d² × d²`
/// curvature matrix `H` at position `p`, then solve
/// `H[nuis, nuis] · w = H[nuis, p]` with a dense LU factorization.
fn explicit_weights(h: &DMatrix<f64>, p: usize) -> DVector<f64> {
    let d2 = h.nrows();
    let nuis: Vec<usize> = (0..d2).filter(|&c| c != p).collect();
    let h_nn = DMatrix::from_fn(d2 - 1, d2 - 1, |r, c| h[(nuis[r], nuis[c])]);
    let h_np = DVector::from_fn(d2 - 1, |r, _| h[(nuis[r], p)]);
    h_nn.lu().solve(&h_np).expect("nuisance curvature block must be invertible")
}

/// `g[p] − wᵀ g[nuis]` — the decorrelated combination of a gradient vector.
fn decorrelate(g: &DVector<f64>, w: &DVector<f64>, p: usize) -> f64 {
    let mut acc = g[p];
    let mut wi = 0;
    for c in 0..g.len() {
        if c != p {
            acc -= w[wi] * g[c];
            wi += 1;
        }
    }
    acc
}

/// The reduced closed-form score must equal the general decorrelated score
/// assembled from first principles: the gradient of the convex objective
/// `tr(Σ̂Θ) − log det Θ` at the null-restricted point, decorrelated with
/// weights solved from the full Kronecker curvature `Θ̌⁻¹ ⊗ Θ̌⁻¹` at that
/// same point.
#[test]
fn reduced_score_matches_general_score_with_explicit_weights() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0A51);
    let mut max_diff: f64 = 0.0;
    for i in 0..50 {
        let d = 3 + (i % 3);
        let theta = rand_spd(d, &mut rng);
        let sigma = rand_corr_like(d, &mut rng);
        let j = rng.gen_range(0..d);
        let k = (j + 1 + rng.gen_range(0..(d - 1))) % d;
        let p = vec_pos(j, k, d);

        let restricted = null_restricted(&theta, j, k, NullZeroing::Symmetric);
        let restricted_inv = restricted.clone().try_inverse().expect("restricted point is PD");
        let curvature = restricted_inv.kronecker(&restricted_inv);
        let w = explicit_weights(&curvature, p);
        let grad = vec_of(&(&sigma - &restricted_inv));
        let general = decorrelate(&grad, &w, p);

        let reduced = decorrelated_score(&sigma, &theta, j, k, NullZeroing::Symmetric).unwrap();
        max_diff = max_diff.max((general - reduced).abs());
    }
    assert!(max_diff < 1e-10, "max |general − reduced| = {max_diff:.3e}");
}

/// The contraction used for scores and variances must equal both explicit
/// Kronecker constructions of the combination vector `b̂`:
/// (1) the column of `Θ̂ ⊗ Θ̂` at the edge position, normalized by its pivot;
/// (2) `[1, −ŵᵀ]` with `ŵ` solved from the inverse-side curvature
/// `Θ̂⁻¹ ⊗ Θ̂⁻¹`. Their agreement also certifies the block-inverse identity
/// connecting the two forms.
#[test]
fn contraction_matches_explicit_kronecker_column() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0B52);
    let mut max_diff: f64 = 0.0;
    for i in 0..30 {
        let d = 3 + (i % 3);
        let theta = rand_spd(d, &mut rng);
        let m = {
            let raw = DMatrix::from_fn(d, d, |_, _| rng.gen_range(-1.0..1.0));
            (&raw + raw.transpose()) * 0.5
        };
        let j = rng.gen_range(0..d);
        let k = (j + 1 + rng.gen_range(0..(d - 1))) % d;
        let p = vec_pos(j, k, d);
        let vm = vec_of(&m);

        let omega = theta.kronecker(&theta);
        let direct: f64 = omega.column(p).dot(&vm) / omega[(p, p)];

        let theta_inv = theta.clone().try_inverse().unwrap();
        let curvature = theta_inv.kronecker(&theta_inv);
        let w = explicit_weights(&curvature, p);
        let solved = decorrelate(&vm, &w, p);

        let contract = precision_contract(&m, &theta, j, k).unwrap();
        max_diff = max_diff.max((direct - contract).abs()).max((solved - contract).abs());
    }
    assert!(max_diff < 1e-10, "max contraction mismatch = {max_diff:.3e}");
}

/// Per-edge variance from per-sample influence scores must equal the
/// explicit quadratic form `b̂ᵀ R̂ b̂`, where `R̂` is the dense `d² × d²`
/// second-moment matrix of the projected-kernel matrices — assembled here
/// entry by entry from the public kernel accessor.
#[test]
fn variance_matches_explicit_second_moment_contraction() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0C53);
    for &(d, n) in &[(3usize, 6usize), (4, 12), (5, 9)] {
        let data = DMatrix::from_fn(n, d, |_, _| rng.gen_range(-2.0..2.0));
        let x = SampleMatrix::new(data).unwrap();
        let theta = rand_spd(d, &mut rng);
        let ctx = InferenceContext::new(&x, theta.clone()).unwrap();

        // F̂ ⊙ Ĝ^i for each sample, from the public per-edge kernel. The
        // diagonal of F̂ is identically zero (unit diagonal of Σ̂), so the
        // diagonal of the product contributes nothing.
        let mut projected: Vec<DMatrix<f64>> = vec![DMatrix::zeros(d, d); n];
        for a in 0..d {
            for b in (a + 1)..d {
                let kern = ctx.hajek_kernel(a, b).unwrap();
                for (i, g) in kern.g_hat.iter().enumerate() {
                    projected[i][(a, b)] = kern.f_hat * g;
                    projected[i][(b, a)] = kern.f_hat * g;
                }
            }
        }
        let d2 = d * d;
        let mut second_moment = DMatrix::zeros(d2, d2);
        for m in &projected {
            let v = vec_of(m);
            second_moment += &v * v.transpose();
        }
        second_moment /= n as f64;

        let omega = theta.kronecker(&theta);
        for j in 0..d {
            for k in (j + 1)..d {
                let p = vec_pos(j, k, d);
                let b = omega.column(p) / omega[(p, p)];
                let oracle = (b.transpose() * &second_moment * &b)[(0, 0)];
                let var = ctx.variance(j, k).unwrap();
                assert!(
                    (oracle - var.sigma2).abs() < 1e-10,
                    "d={d} n={n} edge ({j},{k}): oracle {oracle:.12e} vs {:.12e}",
                    var.sigma2
                );
            }
        }
    }
}

/// Averaging the per-sample kernel over samples must reproduce the
/// closed-form centering identity: the pairwise sign sums collapse to the
/// rank correlation, leaving `−(π/2)·τ̂_jk + asin([Θ̂⁻¹]_jk)`.
#[test]
fn kernel_mean_reproduces_rank_correlation_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0D54);
    let (d, n) = (4usize, 30usize);
    let data = DMatrix::from_fn(n, d, |_, _| rng.gen_range(-2.0..2.0));
    let x = SampleMatrix::new(data).unwrap();
    let corr = CorrelationEstimate::estimate(&x);
    let theta = rand_spd(d, &mut rng);
    let theta_inv = theta.clone().try_inverse().unwrap();
    let ctx = InferenceContext::new(&x, theta.clone()).unwrap();

    for j in 0..d {
        for k in (j + 1)..d {
            let kern = ctx.hajek_kernel(j, k).unwrap();
            let mean: f64 = kern.g_hat.iter().sum::<f64>() / n as f64;
            let identity = -(PI / 2.0) * corr.tau[(j, k)] + theta_inv[(j, k)].asin();
            assert!(
                (mean - identity).abs() < 1e-13,
                "edge ({j},{k}): mean {mean:.15e} vs identity {identity:.15e}"
            );
            let f_expected = (1.0 - corr.sigma_hat[(j, k)].powi(2)).sqrt();
            assert!((kern.f_hat - f_expected).abs() < 1e-15);
        }
    }
}

/// The normalized multiplier weights are scaled by `−1/(2σ̂)` where `σ̂²` is
/// the mean square of the raw influence scores, so their own mean square is
/// exactly 1/4 on every non-degenerate edge.
#[test]
fn influence_second_moment_is_exactly_one_quarter() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0E55);
    let (d, n) = (5usize, 40usize);
    let data = DMatrix::from_fn(n, d, |_, _| rng.gen_range(-2.0..2.0));
    let x = SampleMatrix::new(data).unwrap();
    let theta = rand_spd(d, &mut rng);
    let ctx = InferenceContext::new(&x, theta).unwrap();

    let edges: Vec<(usize, usize)> =
        (0..d).flat_map(|j| ((j + 1)..d).map(move |k| (j, k))).collect();
    let weights = multiplier_weights(&ctx, &edges).unwrap();
    assert!(
        !weights.edges.is_empty(),
        "at least some edges must be non-degenerate on continuous data"
    );
    for (e, &(j, k)) in weights.edges.iter().enumerate() {
        let mean_sq: f64 =
            weights.z[e].iter().map(|z| z * z).sum::<f64>() / weights.n() as f64;
        assert!(
            (mean_sq - 0.25).abs() < 1e-12,
            "edge ({j},{k}): mean square {mean_sq:.15}"
        );
    }
}

/// The one-step estimate must equal the Newton step of the linearized
/// estimating equation, rebuilt here from full matrix products: root of
/// `t ↦ S(θ̂_jk) + slope·(t − θ̂_jk)` with `S` the plug-in score at the
/// unrestricted fit and `slope` its stated linearization coefficient.
#[test]
fn one_step_estimate_matches_newton_root() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0F56);
    for i in 0..30 {
        let d = 3 + (i % 3);
        let n = 20;
        let data = DMatrix::from_fn(n, d, |_, _| rng.gen_range(-2.0..2.0));
        let x = SampleMatrix::new(data).unwrap();
        let theta = rand_spd(d, &mut rng);
        let ctx = InferenceContext::new(&x, theta.clone()).unwrap();
        let sigma = ctx.sigma_hat().clone();
        let j = rng.gen_range(0..d);
        let k = (j + 1 + rng.gen_range(0..(d - 1))) % d;

        let denom = theta[(j, j)] * theta[(k, k)];
        let quad = (theta.transpose() * &sigma * &theta)[(j, k)];
        let ts = &theta * &sigma;
        let slope_num = ts[(j, k)] + ts.transpose()[(j, k)] - 1.0;
        let score_at_fit = (quad - theta[(j, k)]) / denom;
        let slope = slope_num / denom;
        if slope.abs() < 1e-6 {
            continue;
        }
        let newton_root = theta[(j, k)] - score_at_fit / slope;

        let wald = ctx.wald_test(j, k, 0.05).unwrap();
        assert!(
            (wald.theta_w - newton_root).abs() < 1e-12,
            "instance {i}: one-step {:.15e} vs Newton root {newton_root:.15e}",
            wald.theta_w
        );
    }
}

/// Interchanging the two edge indices must not change the score, and the
/// score must vanish identically when the plug-in pair `(Σ̂, Θ̂)` is an
/// exact inverse pair whose tested entry is already zero.
#[test]
fn score_is_symmetric_and_vanishes_at_exact_null_fixed_point() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x1057);
    for _ in 0..20 {
        let d = 4;
        let theta = rand_spd(d, &mut rng);
        let sigma = rand_corr_like(d, &mut rng);
        let s_jk = decorrelated_score(&sigma, &theta, 1, 3, NullZeroing::Symmetric).unwrap();
        let s_kj = decorrelated_score(&sigma, &theta, 3, 1, NullZeroing::Symmetric).unwrap();
        assert!((s_jk - s_kj).abs() < 1e-14);

        let mut theta0 = theta.clone();
        theta0[(1, 3)] = 0.0;
        theta0[(3, 1)] = 0.0;
        let sigma0 = theta0.clone().try_inverse().unwrap();
        let s0 = decorrelated_score(&sigma0, &theta0, 1, 3, NullZeroing::Symmetric).unwrap();
        assert!(s0.abs() < 1e-12, "fixed-point score {s0:.3e}");
    }
}
