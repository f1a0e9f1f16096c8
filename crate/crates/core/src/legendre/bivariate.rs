use std::collections::BTreeMap;

use super::{eval_legendre_all, Field, Scalar, UnivariatePoly};

/// `Σ c_ij P_i(τ) P_j(σ)` stored as a dense row-major grid, rows indexed by `i` (τ).
///
/// Trailing zero rows and columns are trimmed, so `rows() − 1` and `cols() − 1`
/// are the true degrees in τ and σ.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct BivariatePoly {
    c: Vec<Vec<Scalar>>,
}

impl std::fmt::Debug for BivariatePoly {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list()
            .entries(
                self.c
                    .iter()
                    .map(|r| r.iter().map(|x| x.to_string()).collect::<Vec<_>>()),
            )
            .finish()
    }
}

impl BivariatePoly {
    /// Builds from possibly ragged rows, padding with zeros and trimming.
    pub fn new(rows: Vec<Vec<Scalar>>) -> Self {
        let width = rows.iter().map(Vec::len).max().unwrap_or(0);
        let mut c: Vec<Vec<Scalar>> = rows
            .into_iter()
            .map(|mut r| {
                r.resize(width, Scalar::zero());
                r
            })
            .collect();
        while c.last().is_some_and(|r| r.iter().all(Scalar::is_zero)) {
            c.pop();
        }
        let mut cols = c.first().map_or(0, Vec::len);
        while cols > 0 && c.iter().all(|r| r[cols - 1].is_zero()) {
            cols -= 1;
        }
        for r in &mut c {
            r.truncate(cols);
        }
        if cols == 0 {
            c.clear();
        }
        Self { c }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn from_entries(entries: &BTreeMap<(usize, usize), Scalar>) -> Self {
        let rows = entries.keys().map(|k| k.0 + 1).max().unwrap_or(0);
        let cols = entries.keys().map(|k| k.1 + 1).max().unwrap_or(0);
        let mut c = vec![vec![Scalar::zero(); cols]; rows];
        for (&(i, j), v) in entries {
            c[i][j] = v.clone();
        }
        Self::new(c)
    }

    /// `u(τ) v(σ)`.
    pub fn outer(u: &UnivariatePoly, v: &UnivariatePoly) -> Self {
        Self::new(
            u.coeffs()
                .iter()
                .map(|a| v.coeffs().iter().map(|b| a * b).collect())
                .collect(),
        )
    }

    pub fn rows(&self) -> usize {
        self.c.len()
    }

    pub fn cols(&self) -> usize {
        self.c.first().map_or(0, Vec::len)
    }

    pub fn degree_tau(&self) -> usize {
        self.rows().saturating_sub(1)
    }

    pub fn degree_sigma(&self) -> usize {
        self.cols().saturating_sub(1)
    }

    pub fn is_zero(&self) -> bool {
        self.c.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> Scalar {
        self.c
            .get(i)
            .and_then(|r| r.get(j))
            .cloned()
            .unwrap_or_default()
    }

    pub fn as_rows(&self) -> &[Vec<Scalar>] {
        &self.c
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, &Scalar)> {
        self.c
            .iter()
            .enumerate()
            .flat_map(|(i, r)| r.iter().enumerate().map(move |(j, v)| (i, j, v)))
    }

    pub fn max_abs(&self) -> Scalar {
        Scalar::max_abs(self.c.iter().flatten())
    }

    /// Coefficients of `P_j(σ)` as a polynomial in τ.
    pub fn column(&self, j: usize) -> UnivariatePoly {
        UnivariatePoly::new(self.c.iter().map(|r| r.get(j).cloned().unwrap_or_default()).collect())
    }

    /// Coefficients of `P_i(τ)` as a polynomial in σ.
    pub fn row(&self, i: usize) -> UnivariatePoly {
        UnivariatePoly::new(self.c.get(i).cloned().unwrap_or_default())
    }

    /// `(τ, σ) ↦ f(σ, τ)`.
    pub fn transpose(&self) -> Self {
        let (r, k) = (self.rows(), self.cols());
        Self::new(
            (0..k)
                .map(|j| (0..r).map(|i| self.c[i][j].clone()).collect())
                .collect(),
        )
    }

    fn zip_with(&self, other: &Self, f: impl Fn(&Scalar, &Scalar) -> Scalar) -> Self {
        let rows = self.rows().max(other.rows());
        let cols = self.cols().max(other.cols());
        Self::new(
            (0..rows)
                .map(|i| (0..cols).map(|j| f(&self.get(i, j), &other.get(i, j))).collect())
                .collect(),
        )
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, s: &Scalar) -> Self {
        Self::new(
            self.c
                .iter()
                .map(|r| r.iter().map(|x| x * s).collect())
                .collect(),
        )
    }

    /// `∫₀¹ f(τ, σ) v(σ) dσ`, a polynomial in τ.
    pub fn apply_sigma(&self, v: &UnivariatePoly) -> UnivariatePoly {
        UnivariatePoly::new(
            self.c
                .iter()
                .map(|r| r.iter().zip(v.coeffs()).map(|(a, b)| a * b).sum())
                .collect(),
        )
    }

    /// `∫₀¹ v(τ) f(τ, σ) dτ`, a polynomial in σ.
    pub fn apply_tau(&self, v: &UnivariatePoly) -> UnivariatePoly {
        let mut out = vec![Scalar::zero(); self.cols()];
        for (r, a) in self.c.iter().zip(v.coeffs()) {
            if a.is_zero() {
                continue;
            }
            for (slot, x) in out.iter_mut().zip(r) {
                *slot += &(a * x);
            }
        }
        UnivariatePoly::new(out)
    }

    /// `∫₀¹ f(τ, s) g(s, σ) ds`, which by orthonormality is the matrix product.
    pub fn compose(&self, other: &Self) -> Self {
        let inner = self.cols().min(other.rows());
        Self::new(
            (0..self.rows())
                .map(|i| {
                    (0..other.cols())
                        .map(|j| (0..inner).map(|k| &self.c[i][k] * &other.c[k][j]).sum())
                        .collect()
                })
                .collect(),
        )
    }

    /// `p(τ) f(τ, σ)`.
    pub fn mul_tau(&self, p: &UnivariatePoly) -> Self {
        let cols: Vec<UnivariatePoly> = (0..self.cols()).map(|j| self.column(j).mul(p)).collect();
        let rows = cols.iter().map(|c| c.coeffs().len()).max().unwrap_or(0);
        Self::new(
            (0..rows)
                .map(|i| cols.iter().map(|c| c.coeff(i)).collect())
                .collect(),
        )
    }

    /// `p(σ) f(τ, σ)`.
    pub fn mul_sigma(&self, p: &UnivariatePoly) -> Self {
        Self::new(
            (0..self.rows())
                .map(|i| self.row(i).mul(p).into_coeffs())
                .collect(),
        )
    }

    /// `f(1−τ, 1−σ)`.
    pub fn reflect(&self) -> Self {
        Self::new(
            self.c
                .iter()
                .enumerate()
                .map(|(i, r)| {
                    r.iter()
                        .enumerate()
                        .map(|(j, x)| if (i + j) % 2 == 0 { x.clone() } else { -x })
                        .collect()
                })
                .collect(),
        )
    }

    /// `∂f/∂τ`.
    pub fn derivative_tau(&self) -> Self {
        let cols: Vec<UnivariatePoly> = (0..self.cols())
            .map(|j| self.column(j).derivative())
            .collect();
        let rows = self.rows().saturating_sub(1);
        Self::new(
            (0..rows)
                .map(|i| cols.iter().map(|c| c.coeff(i)).collect())
                .collect(),
        )
    }

    /// `f(x, σ)` as a polynomial in σ.
    pub fn at_tau<F: Field>(&self, x: &F) -> Vec<F> {
        let basis = eval_legendre_all(self.degree_tau(), x);
        (0..self.cols())
            .map(|j| {
                self.c
                    .iter()
                    .zip(&basis)
                    .fold(F::zero(), |acc, (r, p)| acc.add(&p.mul(&F::from_scalar(&r[j]))))
            })
            .collect()
    }

    /// Exact `f(x, σ)` as a Legendre polynomial in σ.
    pub fn at_tau_exact(&self, x: &Scalar) -> UnivariatePoly {
        UnivariatePoly::new(self.at_tau(x))
    }

    pub fn eval<F: Field>(&self, tau: &F, sigma: &F) -> F {
        if self.is_zero() {
            return F::zero();
        }
        let row = self.at_tau(tau);
        let basis = eval_legendre_all(self.degree_sigma(), sigma);
        row.iter()
            .zip(&basis)
            .fold(F::zero(), |acc, (a, p)| acc.add(&a.mul(p)))
    }

    pub fn to_f64(&self) -> Vec<Vec<f64>> {
        self.c
            .iter()
            .map(|r| r.iter().map(Scalar::to_f64).collect())
            .collect()
    }
}

/// Float evaluation of a coefficient grid.
pub(crate) fn eval_grid_f64(c: &[Vec<f64>], tau: f64, sigma: f64) -> f64 {
    if c.is_empty() {
        return 0.0;
    }
    let pt = eval_legendre_all(c.len() - 1, &tau);
    let ps = eval_legendre_all(c[0].len().saturating_sub(1), &sigma);
    c.iter()
        .zip(&pt)
        .map(|(r, a)| a * r.iter().zip(&ps).map(|(x, b)| x * b).sum::<f64>())
        .sum()
}
