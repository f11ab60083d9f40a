//! Property tests for the rank-correlation layer.
//!
//! The pair statistics are integers, so most invariants here are asserted
//! bitwise: the fast pair counter against the brute-force double loop,
//! invariance under strictly monotone marginal transforms, and column
//! permutation equivariance.

use nalgebra::DMatrix;
use npgm::rank::{
    kendall_tau_matrix, sign_average_tensor, sine_transform, SampleMatrix,
};
use proptest::prelude::*;

/// Brute-force pair statistic: `τ̂_jk = 2/(n(n−1)) Σ_{a<b} sign·sign`,
/// accumulated in integers exactly like the production path.
fn brute_force_tau(x: &SampleMatrix) -> DMatrix<f64> {
    let (n, d) = (x.n(), x.d());
    let sgn = |a: f64, b: f64| -> i64 {
        if a > b {
            1
        } else if a < b {
            -1
        } else {
            0
        }
    };
    let mut tau = DMatrix::identity(d, d);
    for j in 0..d {
        for k in (j + 1)..d {
            let cj = x.column_slice(j);
            let ck = x.column_slice(k);
            let mut s = 0i64;
            for a in 0..n {
                for b in (a + 1)..n {
                    s += sgn(cj[a], cj[b]) * sgn(ck[a], ck[b]);
                }
            }
            let t = (2 * s) as f64 / (n * (n - 1)) as f64;
            tau[(j, k)] = t;
            tau[(k, j)] = t;
        }
    }
    tau
}

fn assert_bitwise_eq(a: &DMatrix<f64>, b: &DMatrix<f64>) {
    assert_eq!(a.nrows(), b.nrows());
    assert_eq!(a.ncols(), b.ncols());
    for r in 0..a.nrows() {
        for c in 0..a.ncols() {
            assert_eq!(
                a[(r, c)].to_bits(),
                b[(r, c)].to_bits(),
                "entry ({r},{c}): {} vs {}",
                a[(r, c)],
                b[(r, c)]
            );
        }
    }
}

/// Strictly monotone marginal maps used to probe rank invariance.
fn monotone(which: usize, v: f64) -> f64 {
    match which % 4 {
        0 => v * v * v,
        1 => v.asinh(),
        2 => 2.5 * v + 7.0,
        _ => (v / 60.0).exp(),
    }
}

/// Data with continuous values; `n ≥ 4` rows, `2 ≤ d ≤ 5` columns.
fn continuous_data() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (4usize..20, 2usize..6).prop_flat_map(|(n, d)| {
        prop::collection::vec(prop::collection::vec(-50.0..50.0f64, d), n)
    })
}

/// Data with heavy ties: entries drawn from a five-point grid.
fn tied_data() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (4usize..20, 2usize..6).prop_flat_map(|(n, d)| {
        prop::collection::vec(prop::collection::vec((0i32..5).prop_map(f64::from), d), n)
    })
}

proptest! {
    /// The O(n log n) pair counter equals the O(n²) double loop bitwise,
    /// with and without ties.
    #[test]
    fn fast_tau_matches_brute_force(rows in continuous_data(), tied in tied_data()) {
        for data in [rows, tied] {
            let x = SampleMatrix::from_rows(&data).unwrap();
            assert_bitwise_eq(&kendall_tau_matrix(&x), &brute_force_tau(&x));
        }
    }

    /// Applying any strictly monotone transform per column leaves every
    /// pair sign unchanged, hence the tau matrix is bitwise identical.
    #[test]
    fn tau_is_invariant_under_monotone_transforms(
        rows in continuous_data(),
        shift in 0usize..4,
    ) {
        let x = SampleMatrix::from_rows(&rows).unwrap();
        let transformed: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| r.iter().enumerate().map(|(j, &v)| monotone(j + shift, v)).collect())
            .collect();
        let y = SampleMatrix::from_rows(&transformed).unwrap();
        assert_bitwise_eq(&kendall_tau_matrix(&x), &kendall_tau_matrix(&y));
    }

    /// Reordering columns permutes the tau matrix accordingly.
    #[test]
    fn tau_is_permutation_equivariant(rows in continuous_data(), rot in 1usize..5) {
        let x = SampleMatrix::from_rows(&rows).unwrap();
        let d = x.d();
        let perm: Vec<usize> = (0..d).map(|j| (j + rot) % d).collect();
        let permuted: Vec<Vec<f64>> =
            rows.iter().map(|r| perm.iter().map(|&j| r[j]).collect()).collect();
        let y = SampleMatrix::from_rows(&permuted).unwrap();
        let tx = kendall_tau_matrix(&x);
        let ty = kendall_tau_matrix(&y);
        for a in 0..d {
            for b in 0..d {
                assert_eq!(ty[(a, b)].to_bits(), tx[(perm[a], perm[b])].to_bits());
            }
        }
    }

    /// Ranges and exact structure: `τ̂ ∈ [−1, 1]` symmetric with unit
    /// diagonal, and the sine transform keeps all of that.
    #[test]
    fn tau_and_sine_transform_are_well_formed(rows in tied_data()) {
        let x = SampleMatrix::from_rows(&rows).unwrap();
        let tau = kendall_tau_matrix(&x);
        let sigma = sine_transform(&tau).unwrap();
        for a in 0..x.d() {
            assert_eq!(tau[(a, a)], 1.0);
            assert_eq!(sigma[(a, a)], 1.0);
            for b in 0..x.d() {
                prop_assert!(tau[(a, b)].abs() <= 1.0);
                prop_assert!(sigma[(a, b)].abs() <= 1.0);
                assert_eq!(tau[(a, b)].to_bits(), tau[(b, a)].to_bits());
                assert_eq!(sigma[(a, b)].to_bits(), sigma[(b, a)].to_bits());
            }
        }
    }

    /// A column co-monotone with another gives `τ̂ = 1` exactly; an
    /// anti-monotone one gives `−1` exactly (continuous data, no ties).
    #[test]
    fn comonotone_columns_reach_the_extremes(base in prop::collection::vec(-100.0..100.0f64, 5..15)) {
        // De-duplicate to guarantee strictly distinct values.
        let mut vals = base;
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        vals.dedup();
        prop_assume!(vals.len() >= 4);
        let rows: Vec<Vec<f64>> =
            vals.iter().map(|&v| vec![v, v * v * v + 2.0, -3.0 * v]).collect();
        let x = SampleMatrix::from_rows(&rows).unwrap();
        let tau = kendall_tau_matrix(&x);
        assert_eq!(tau[(0, 1)], 1.0);
        assert_eq!(tau[(0, 2)], -1.0);
        assert_eq!(tau[(1, 2)], -1.0);
    }

    /// The per-sample sign tensor averages back to the tau matrix bitwise:
    /// its row sums are the same integers the pair counter produces.
    #[test]
    fn sign_tensor_collapses_to_tau(rows in continuous_data()) {
        let x = SampleMatrix::from_rows(&rows).unwrap();
        let tensor = sign_average_tensor(&x);
        assert_bitwise_eq(&tensor.tau_matrix(), &kendall_tau_matrix(&x));
    }
}
