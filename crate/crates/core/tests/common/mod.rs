//! Test-side oracles, independent of the library's polynomial algebra:
//! Golub–Welsch Gauss nodes, explicit-sum Legendre evaluation and seeded
//! random method generators.
#![allow(dead_code)]

use csrk::legendre::{BivariatePoly, Scalar, UnivariatePoly};
use csrk::method::{CsrkMethod, Entries};
use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Gauss–Legendre rule on `[0,1]` from the eigen-decomposition of the Jacobi matrix.
pub fn gauss_oracle(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut jac = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let kf = k as f64;
        let off = kf / (4.0 * kf * kf - 1.0).sqrt();
        jac[(k, k - 1)] = off;
        jac[(k - 1, k)] = off;
    }
    let eig = SymmetricEigen::new(jac);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let v0 = eig.eigenvectors[(0, i)];
            ((1.0 + eig.eigenvalues[i]) / 2.0, v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

/// The 30-node oracle rule, computed once.
pub fn gauss30() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: std::sync::OnceLock<(Vec<f64>, Vec<f64>)> = std::sync::OnceLock::new();
    RULE.get_or_init(|| gauss_oracle(30))
}

/// `w_a P_k(x_a)` on the oracle nodes for `k < 16`.
fn weighted_table() -> &'static Vec<Vec<f64>> {
    static TABLE: std::sync::OnceLock<Vec<Vec<f64>>> = std::sync::OnceLock::new();
    TABLE.get_or_init(|| {
        let (x, w) = gauss30();
        (0..16)
            .map(|k| x.iter().zip(w).map(|(&t, &wt)| wt * p_explicit(k, t)).collect())
            .collect()
    })
}

fn binomial(n: u64, k: u64) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `P_n(x) = √(2n+1) Σ_k C(n,k)² x^k (x−1)^{n−k}`; no alternating cancellation on `[0,1]`.
pub fn p_explicit(n: usize, x: f64) -> f64 {
    let n64 = n as u64;
    let sum: f64 = (0..=n64)
        .map(|k| binomial(n64, k).powi(2) * x.powi(k as i32) * (x - 1.0).powi((n64 - k) as i32))
        .sum();
    (2.0 * n as f64 + 1.0).sqrt() * sum
}

/// Derivative of [`p_explicit`], term by term.
pub fn dp_explicit(n: usize, x: f64) -> f64 {
    let n64 = n as u64;
    let sum: f64 = (0..=n64)
        .map(|k| {
            let (kf, rest) = (k as f64, (n64 - k) as f64);
            let left = if k > 0 { kf * x.powi(k as i32 - 1) * (x - 1.0).powi((n64 - k) as i32) } else { 0.0 };
            let right = if k < n64 { rest * x.powi(k as i32) * (x - 1.0).powi((n64 - k) as i32 - 1) } else { 0.0 };
            binomial(n64, k).powi(2) * (left + right)
        })
        .sum();
    (2.0 * n as f64 + 1.0).sqrt() * sum
}

pub fn to_f64s(c: &[Scalar]) -> Vec<f64> {
    c.iter().map(Scalar::to_f64).collect()
}

pub fn grid_f64(rows: &[Vec<Scalar>]) -> Vec<Vec<f64>> {
    rows.iter().map(|r| to_f64s(r)).collect()
}

pub fn eval_uni(c: &[f64], x: f64) -> f64 {
    c.iter().enumerate().map(|(i, v)| v * p_explicit(i, x)).sum()
}

pub fn eval_bi(rows: &[Vec<f64>], tau: f64, sigma: f64) -> f64 {
    let ps: Vec<f64> = (0..rows.first().map_or(0, Vec::len)).map(|j| p_explicit(j, sigma)).collect();
    rows.iter()
        .enumerate()
        .map(|(i, row)| p_explicit(i, tau) * row.iter().zip(&ps).map(|(v, p)| v * p).sum::<f64>())
        .sum()
}

/// `∂_τ A(τ, σ)` from the explicit-sum derivative.
pub fn eval_bi_dtau(rows: &[Vec<f64>], tau: f64, sigma: f64) -> f64 {
    let ps: Vec<f64> = (0..rows.first().map_or(0, Vec::len)).map(|j| p_explicit(j, sigma)).collect();
    rows.iter()
        .enumerate()
        .map(|(i, row)| dp_explicit(i, tau) * row.iter().zip(&ps).map(|(v, p)| v * p).sum::<f64>())
        .sum()
}

/// Legendre coefficients `Σ_a w_a f(x_a) P_k(x_a)` for `k < n`, from node values.
pub fn project_nodes(values: &[f64], n: usize) -> Vec<f64> {
    let table = weighted_table();
    (0..n)
        .map(|k| table[k].iter().zip(values).map(|(p, v)| p * v).sum())
        .collect()
}

/// Legendre coefficients `∫ f P_k` for `k < n`, by the oracle rule.
pub fn project(f: impl Fn(f64) -> f64, n: usize) -> Vec<f64> {
    let values: Vec<f64> = gauss30().0.iter().map(|&t| f(t)).collect();
    project_nodes(&values, n)
}

/// Coefficients `∫∫ f P_i(τ) P_j(σ)` for `i < n`, `j < m`, from `grid[a][b] = f(x_a, x_b)`.
pub fn project2_nodes(grid: &[Vec<f64>], n: usize, m: usize) -> Vec<Vec<f64>> {
    let table = weighted_table();
    let q = grid.len();
    // inner[a][j] = Σ_b w_b P_j(x_b) f(x_a, x_b)
    let inner: Vec<Vec<f64>> = grid
        .iter()
        .map(|row| (0..m).map(|j| (0..q).map(|b| table[j][b] * row[b]).sum()).collect())
        .collect();
    (0..n)
        .map(|i| (0..m).map(|j| (0..q).map(|a| table[i][a] * inner[a][j]).sum()).collect())
        .collect()
}

pub fn project2(f: impl Fn(f64, f64) -> f64, n: usize, m: usize) -> Vec<Vec<f64>> {
    let x = &gauss30().0;
    let grid: Vec<Vec<f64>> = x.iter().map(|&t| x.iter().map(|&s| f(t, s)).collect()).collect();
    project2_nodes(&grid, n, m)
}

pub fn max_abs(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// A small exact scalar: `p/q` or `p/q·√r` with `r ∈ {2, 3, 5}`.
pub fn small_scalar(r: &mut (impl Rng + ?Sized)) -> Scalar {
    let p = r.gen_range(-4i64..=4);
    let q = r.gen_range(1i64..=6);
    let base = Scalar::from_frac(p, q);
    match r.gen_range(0..4) {
        0 => base.mul_sqrt(2),
        1 => base.mul_sqrt(3),
        2 => base.mul_sqrt(5),
        _ => base,
    }
}

pub fn random_poly(r: &mut impl Rng, max_degree: usize) -> UnivariatePoly {
    let d = r.gen_range(0..=max_degree);
    UnivariatePoly::new((0..=d).map(|_| small_scalar(r)).collect())
}

/// Fills columns `j ≥ 1` at random, damping entry `(i, j)` by `1/(i+j)` like a smooth kernel.
fn fill_damped(r: &mut impl Rng, rows: &mut [Vec<Scalar>]) {
    for (i, row) in rows.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate().skip(1) {
            if r.gen_bool(0.5) {
                *v = small_scalar(r).div_int((i + j) as i64);
            }
        }
    }
}

/// Random `A` grid of degree at most `max_degree` with `B ≡ 1`, `C = τ`.
pub fn random_normalized(r: &mut impl Rng, max_degree: usize) -> CsrkMethod {
    let mut rows = vec![vec![Scalar::zero(); max_degree + 1]; max_degree + 1];
    fill_damped(r, &mut rows);
    rows[0][0] = Scalar::from_frac(1, 2);
    rows[1][0] = "1/6*sqrt(3)".parse().unwrap();
    CsrkMethod::normalized("random", BivariatePoly::new(rows)).unwrap()
}

/// Random `(A, B, C)` with `B ≈ 1` and `C ≈ τ` perturbed by exact scalars up to degree 3,
/// and `A` of degree ≤ `max_degree`. Half of the samples keep `∫B = 1`.
pub fn random_general(r: &mut impl Rng, max_degree: usize) -> CsrkMethod {
    let perturb = |r: &mut dyn rand::RngCore, base: &[Scalar]| -> Vec<Scalar> {
        let mut v: Vec<Scalar> = (0..=3).map(|_| small_scalar(r).div_int(8)).collect();
        for (k, b) in base.iter().enumerate() {
            v[k] = &v[k] + b;
        }
        v
    };
    let mut b = perturb(r, &[Scalar::one()]);
    if r.gen_bool(0.5) {
        b[0] = Scalar::one();
    }
    let c = perturb(r, &[Scalar::from_frac(1, 2), "1/6*sqrt(3)".parse().unwrap()]);
    let mut rows = vec![vec![Scalar::zero(); max_degree + 1]; max_degree + 1];
    fill_damped(r, &mut rows);
    for (i, v) in c.iter().enumerate() {
        rows[i][0] = v.clone();
    }
    CsrkMethod::new(
        "random-general",
        BivariatePoly::new(rows),
        UnivariatePoly::new(b),
        UnivariatePoly::new(c),
    )
    .unwrap()
}

/// Random skew input for the symplectic family, strictly above the diagonal and off
/// row 0 (whose mirror would break `C = τ`), damped by `1/(i+j)`.
pub fn random_skew(r: &mut impl Rng, max_degree: usize, count: usize) -> Entries {
    let mut e = Entries::new();
    while e.len() < count {
        let i = r.gen_range(1..max_degree);
        let j = r.gen_range(i + 1..=max_degree);
        e.insert((i, j), small_scalar(r).div_int(4 * (i + j) as i64));
    }
    e
}

/// Random odd-parity entries with `j ≥ 1` for the symmetric family, damped by `1/(i+j)`.
pub fn random_odd(r: &mut impl Rng, max_degree: usize, count: usize) -> Entries {
    let mut e = Entries::new();
    while e.len() < count {
        let i = r.gen_range(0..=max_degree);
        let j = r.gen_range(1..=max_degree);
        if (i + j) % 2 == 1 {
            e.insert((i, j), small_scalar(r).div_int(4 * (i + j) as i64));
        }
    }
    e
}
