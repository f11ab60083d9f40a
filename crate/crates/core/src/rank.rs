//! Kendall's tau rank correlation, the sine transform, and the per-sample
//! sign-average tensor.
//!
//! For observations `X_1, …, X_n ∈ R^d` the tau estimate for a column pair
//! `(j,k)` is
//!
//! ```text
//! τ̂_jk = 2/(n(n−1)) · Σ_{i<i'} sign[(X_ij − X_i'j)(X_ik − X_i'k)]
//! ```
//!
//! with `sign(0) = 0` for ties, and the latent Gaussian correlation is
//! recovered by `Σ̂_jk = sin(π τ̂_jk / 2)`. Pair signs are accumulated in
//! integers, so tau is invariant — bitwise — under strictly increasing
//! columnwise transforms, and the identity between tau and the row means of
//! the sign-average tensor holds exactly rather than to rounding error.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::{Error, Result};

/// An `n × d` data matrix: rows are samples, columns are variables.
///
/// Validated once at construction (`n ≥ 2`, `d ≥ 2`, all entries finite) so
/// that downstream routines can assume a well-formed input.
#[derive(Debug, Clone)]
pub struct SampleMatrix {
    data: DMatrix<f64>,
}

impl SampleMatrix {
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        let (n, d) = data.shape();
        if n < 2 {
            return Err(Error::InsufficientSamples { required: 2, got: n });
        }
        if d < 2 {
            return Err(Error::DimensionMismatch { expected: 2, got: d });
        }
        for col in 0..d {
            for row in 0..n {
                if !data[(row, col)].is_finite() {
                    return Err(Error::NonFinite { row, col });
                }
            }
        }
        Ok(Self { data })
    }

    /// Builds from row-major sample vectors; every row must have equal length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n < 2 {
            return Err(Error::InsufficientSamples { required: 2, got: n });
        }
        let d = rows[0].len();
        for r in rows {
            if r.len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: r.len() });
            }
        }
        Self::new(DMatrix::from_fn(n, d, |i, j| rows[i][j]))
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn d(&self) -> usize {
        self.data.ncols()
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    /// Contiguous storage of column `j` (samples are column-major).
    pub fn column_slice(&self, j: usize) -> &[f64] {
        let n = self.n();
        &self.data.as_slice()[j * n..(j + 1) * n]
    }

    /// A new matrix containing only the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let d = self.d();
        Self::new(DMatrix::from_fn(rows.len(), d, |i, j| self.data[(rows[i], j)]))
    }
}

/// Kendall's tau matrix `τ̂` together with its sine transform `Σ̂`.
#[derive(Debug, Clone)]
pub struct CorrelationEstimate {
    pub tau: DMatrix<f64>,
    pub sigma_hat: DMatrix<f64>,
}

impl CorrelationEstimate {
    /// Computes both `τ̂` and `Σ̂` from raw samples.
    pub fn estimate(x: &SampleMatrix) -> Self {
        let tau = kendall_tau_matrix(x);
        let sigma_hat = sine_transform(&tau).expect("kendall tau is always in [-1, 1]");
        Self { tau, sigma_hat }
    }
}

/// Sign of `a − b` as an integer, with ties mapping to zero.
#[inline]
fn cmp_sign(a: f64, b: f64) -> i64 {
    if a > b {
        1
    } else if a < b {
        -1
    } else {
        0
    }
}

/// Sum over all pairs `i < i'` of `sign[(X_ij − X_i'j)(X_ik − X_i'k)]`,
/// plus the per-sample row sums `Σ_{i'≠i} sign[…]`.
fn pair_sign_sums(cj: &[f64], ck: &[f64]) -> Vec<i64> {
    let n = cj.len();
    let mut rows = vec![0i64; n];
    for a in 0..n {
        for b in (a + 1)..n {
            let s = cmp_sign(cj[a], cj[b]) * cmp_sign(ck[a], ck[b]);
            rows[a] += s;
            rows[b] += s;
        }
    }
    rows
}

/// Strict inversions (`a < b` by position, `v[a] > v[b]` by value) counted by
/// a bottom-up merge sort; ties never count. Sorts `v` in place.
fn count_inversions(v: &mut [f64]) -> i64 {
    let n = v.len();
    let mut buf = v.to_vec();
    let mut count = 0i64;
    let mut width = 1;
    while width < n {
        let mut left = 0;
        while left + width < n {
            let mid = left + width;
            let right = (left + 2 * width).min(n);
            let (mut i, mut j, mut k) = (left, mid, left);
            while i < mid && j < right {
                if v[j] < v[i] {
                    count += (mid - i) as i64;
                    buf[k] = v[j];
                    j += 1;
                } else {
                    buf[k] = v[i];
                    i += 1;
                }
                k += 1;
            }
            buf[k..k + (mid - i)].copy_from_slice(&v[i..mid]);
            buf[k + (mid - i)..right].copy_from_slice(&v[j..right]);
            v[left..right].copy_from_slice(&buf[left..right]);
            left += 2 * width;
        }
        width *= 2;
    }
    count
}

fn tied_pairs<T: PartialEq>(sorted: &[T], eq: impl Fn(&T, &T) -> bool) -> i64 {
    let mut total = 0i64;
    let mut run = 1i64;
    for w in sorted.windows(2) {
        if eq(&w[0], &w[1]) {
            run += 1;
        } else {
            total += run * (run - 1) / 2;
            run = 1;
        }
    }
    total + run * (run - 1) / 2
}

/// `Σ_{i<i'} sign[(X_ij − X_i'j)(X_ik − X_i'k)]` in `O(n log n)` by Knight's
/// algorithm: concordant − discordant = untied pairs − 2·inversions, with all
/// tie corrections counted exactly in integers. Agrees with the brute-force
/// double loop pair for pair.
fn knight_pair_stat(cj: &[f64], ck: &[f64]) -> i64 {
    let n = cj.len();
    let n0 = (n as i64) * (n as i64 - 1) / 2;
    let mut pairs: Vec<(f64, f64)> = cj.iter().copied().zip(ck.iter().copied()).collect();
    pairs.sort_by(|a, b| a.partial_cmp(b).expect("entries validated finite"));
    let ties_x = tied_pairs(&pairs, |a, b| a.0 == b.0);
    let ties_xy = tied_pairs(&pairs, |a, b| a == b);

    // In (x asc, y asc) order, strict y-inversions are exactly the strictly
    // discordant pairs: x-tied pairs appear y-ascending and never invert.
    let mut ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let discordant = count_inversions(&mut ys);
    let ties_y = tied_pairs(&ys, |a, b| a == b);

    (n0 - ties_x - ties_y + ties_xy) - 2 * discordant
}

/// Kendall's tau matrix: symmetric, entries in `[-1, 1]`, diagonal set to 1.
///
/// Each column pair costs `O(n log n)`; the result is bitwise identical to
/// the brute-force pair enumeration because the pair counts are integers.
pub fn kendall_tau_matrix(x: &SampleMatrix) -> DMatrix<f64> {
    let (n, d) = (x.n(), x.d());
    let denom = (n * (n - 1)) as f64;

    let pairs: Vec<(usize, usize)> = (0..d)
        .flat_map(|j| ((j + 1)..d).map(move |k| (j, k)))
        .collect();
    let sums: Vec<i64> = pairs
        .par_iter()
        .map(|&(j, k)| knight_pair_stat(x.column_slice(j), x.column_slice(k)))
        .collect();

    let mut tau = DMatrix::identity(d, d);
    for (&(j, k), &s) in pairs.iter().zip(&sums) {
        let t = (2 * s) as f64 / denom;
        tau[(j, k)] = t;
        tau[(k, j)] = t;
    }
    tau
}

/// Sine transform `Σ̂_jk = sin(π τ̂_jk / 2)` off the diagonal, exactly 1 on it.
///
/// Entries may exceed `[-1, 1]` by at most `1e-12` (they are clamped); larger
/// excursions are rejected.
pub fn sine_transform(tau: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let d = tau.nrows();
    if tau.ncols() != d {
        return Err(Error::DimensionMismatch { expected: d, got: tau.ncols() });
    }
    let mut sigma = DMatrix::identity(d, d);
    for j in 0..d {
        for k in (j + 1)..d {
            let t = tau[(j, k)];
            if t.abs() > 1.0 + 1e-12 {
                return Err(Error::TauOutOfRange { j, k, value: t });
            }
            let s = (std::f64::consts::FRAC_PI_2 * t.clamp(-1.0, 1.0)).sin();
            sigma[(j, k)] = s;
            sigma[(k, j)] = s;
        }
    }
    Ok(sigma)
}

/// Per-sample sign averages: `s[i][j][k] = 1/(n−1) Σ_{i'≠i} sign[(X_ij − X_i'j)(X_ik − X_i'k)]`.
///
/// This is the data-dependent part of the Hájek projection of the tau
/// U-statistic onto single samples; the variance estimator and the multiplier
/// bootstrap both consume it. Row sums are stored as integers so that
/// `mean_i s[i][j][k] == τ̂_jk` holds exactly.
///
/// Memory is `n·d²` words; for the dimensions this crate targets (hundreds of
/// variables) that is at most a few hundred megabytes.
#[derive(Debug, Clone)]
pub struct SignAverageTensor {
    n: usize,
    d: usize,
    /// Row sums `Σ_{i'≠i} sign[…]`, laid out as `sums[(j·d + k)·n + i]`.
    sums: Vec<i64>,
}

impl SignAverageTensor {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// `s[i][j][k]` as a real number.
    pub fn value(&self, i: usize, j: usize, k: usize) -> f64 {
        self.pair_sums(j, k)[i] as f64 / (self.n - 1) as f64
    }

    /// Integer row sums for a column pair, indexed by sample.
    pub fn pair_sums(&self, j: usize, k: usize) -> &[i64] {
        let base = (j * self.d + k) * self.n;
        &self.sums[base..base + self.n]
    }

    /// Mean over samples of `s[i][j][k]`; equals `τ̂_jk` exactly.
    pub fn mean_over_samples(&self, j: usize, k: usize) -> f64 {
        let total: i64 = self.pair_sums(j, k).iter().sum();
        total as f64 / (self.n * (self.n - 1)) as f64
    }

    /// Tau matrix derived from the stored pair sums; bitwise identical to
    /// [`kendall_tau_matrix`] on the same data.
    pub fn tau_matrix(&self) -> DMatrix<f64> {
        let mut tau = DMatrix::identity(self.d, self.d);
        for j in 0..self.d {
            for k in (j + 1)..self.d {
                let t = self.mean_over_samples(j, k);
                tau[(j, k)] = t;
                tau[(k, j)] = t;
            }
        }
        tau
    }
}

/// Computes the full sign-average tensor, `sign(0) = 0` for ties.
pub fn sign_average_tensor(x: &SampleMatrix) -> SignAverageTensor {
    let (n, d) = (x.n(), x.d());
    let pairs: Vec<(usize, usize)> = (0..d)
        .flat_map(|j| (j..d).map(move |k| (j, k)))
        .collect();
    let computed: Vec<Vec<i64>> = pairs
        .par_iter()
        .map(|&(j, k)| pair_sign_sums(x.column_slice(j), x.column_slice(k)))
        .collect();

    let mut sums = vec![0i64; n * d * d];
    for (&(j, k), rows) in pairs.iter().zip(&computed) {
        sums[(j * d + k) * n..(j * d + k + 1) * n].copy_from_slice(rows);
        if j != k {
            sums[(k * d + j) * n..(k * d + j + 1) * n].copy_from_slice(rows);
        }
    }
    SignAverageTensor { n, d, sums }
}
