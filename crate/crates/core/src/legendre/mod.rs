//! Normalized shifted Legendre polynomials on `[0, 1]` and exact algebra in that basis.
//!
//! `P_0 = 1` and `P_n(x) = √(2n+1)/n! · dⁿ/dxⁿ (xⁿ(x−1)ⁿ)`, orthonormal in L²(0, 1).
//! Internally each `P_n` is `√(2n+1) · P̃_n` where `P̃_n(x) = P_n^{std}(2x−1)` has
//! integer monomial coefficients, so every basis conversion reduces to rational
//! arithmetic plus one normalization radical per index.

mod bivariate;
mod poly;
mod scalar;

use std::sync::OnceLock;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;
use thiserror::Error;

pub use bivariate::BivariatePoly;
pub(crate) use bivariate::eval_grid_f64 as bivariate_eval_f64;
pub(crate) use poly::eval_f64_coeffs as univariate_eval_f64;
pub use poly::{antiderivative_f64, UnivariatePoly};
pub use scalar::{Scalar, PRIMES};

/// Largest Legendre index a stored method coefficient may use.
pub const BASIS_CAP: usize = 32;

/// Largest degree intermediate polynomials may reach during verification.
pub const WORK_DEGREE: usize = 128;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LegendreError {
    #[error("xi is defined for index >= 1, got {0}")]
    XiIndex(usize),
    #[error("degree {degree} exceeds the basis cap {cap}")]
    BasisCapExceeded { degree: usize, cap: usize },
    #[error("cannot represent sqrt({0}): prime factor outside the supported table")]
    UnsupportedRadical(u64),
    #[error("division by zero")]
    DivisionByZero,
    #[error("division by a multi-radical scalar `{0}` is not supported")]
    UnsupportedDivision(String),
    #[error("cannot parse exact scalar `{0}`")]
    Parse(String),
}

/// Coefficient field for polynomial evaluation: exact [`Scalar`] or `f64`.
pub trait Field: Clone {
    fn zero() -> Self;
    fn from_int(n: i64) -> Self;
    fn sqrt_of(n: u64) -> Self;
    fn add(&self, other: &Self) -> Self;
    fn sub(&self, other: &Self) -> Self;
    fn mul(&self, other: &Self) -> Self;
    fn div_int(&self, n: i64) -> Self;
    fn from_scalar(s: &Scalar) -> Self;
}

impl Field for f64 {
    fn zero() -> Self {
        0.0
    }
    fn from_int(n: i64) -> Self {
        n as f64
    }
    fn sqrt_of(n: u64) -> Self {
        (n as f64).sqrt()
    }
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn sub(&self, other: &Self) -> Self {
        self - other
    }
    fn mul(&self, other: &Self) -> Self {
        self * other
    }
    fn div_int(&self, n: i64) -> Self {
        self / n as f64
    }
    fn from_scalar(s: &Scalar) -> Self {
        s.to_f64()
    }
}

impl Field for Scalar {
    fn zero() -> Self {
        Scalar::zero()
    }
    fn from_int(n: i64) -> Self {
        Scalar::from_int(n)
    }
    fn sqrt_of(n: u64) -> Self {
        Scalar::sqrt_int(n).expect("normalization radicand outside the prime table")
    }
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn sub(&self, other: &Self) -> Self {
        self - other
    }
    fn mul(&self, other: &Self) -> Self {
        self * other
    }
    fn div_int(&self, n: i64) -> Self {
        Scalar::div_int(self, n)
    }
    fn from_scalar(s: &Scalar) -> Self {
        s.clone()
    }
}

/// Values `P̃_0(x), …, P̃_n(x)` of the unnormalized shifted polynomials.
fn shifted_values<F: Field>(n: usize, x: &F) -> Vec<F> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(F::from_int(1));
    if n == 0 {
        return out;
    }
    let u = x.mul(&F::from_int(2)).sub(&F::from_int(1));
    out.push(u.clone());
    for k in 1..n {
        // (k+1) P̃_{k+1} = (2k+1)(2x−1) P̃_k − k P̃_{k−1}
        let a = u.mul(&out[k]).mul(&F::from_int(2 * k as i64 + 1));
        let b = out[k - 1].mul(&F::from_int(k as i64));
        out.push(a.sub(&b).div_int(k as i64 + 1));
    }
    out
}

/// `P_ι(x)` via the three-term recurrence.
pub fn eval_legendre<F: Field>(index: usize, x: &F) -> F {
    let v = shifted_values(index, x);
    v[index].mul(&F::sqrt_of(2 * index as u64 + 1))
}

/// `P_0(x), …, P_n(x)`.
pub fn eval_legendre_all<F: Field>(n: usize, x: &F) -> Vec<F> {
    shifted_values(n, x)
        .into_iter()
        .enumerate()
        .map(|(k, v)| v.mul(&F::sqrt_of(2 * k as u64 + 1)))
        .collect()
}

/// `ξ_ι = 1 / (2√(4ι²−1))`, exactly.
pub fn xi(index: usize) -> Result<Scalar, LegendreError> {
    if index == 0 {
        return Err(LegendreError::XiIndex(0));
    }
    let m = 4 * (index as u64) * (index as u64) - 1;
    // 1/(2√m) = √m / (2m)
    let q = BigRational::new(BigInt::one(), BigInt::from(2 * m));
    Scalar::rational_sqrt(q, m)
}

pub(crate) fn xi_unchecked(index: usize) -> Scalar {
    xi(index).expect("xi index >= 1")
}

struct Tables {
    /// `shifted[n][k]`: coefficient of `x^k` in `P̃_n`.
    shifted: Vec<Vec<BigRational>>,
    /// `moments[m][n] = ∫₀¹ x^m P̃_n(x) dx`.
    moments: Vec<Vec<BigRational>>,
}

fn tables() -> &'static Tables {
    static TABLES: OnceLock<Tables> = OnceLock::new();
    TABLES.get_or_init(|| {
        let size = WORK_DEGREE + 1;
        let ratio = |p: u64, q: u64| BigRational::new(BigInt::from(p), BigInt::from(q));
        // coefficient of x^k in P̃_n is (−1)^{n+k} C(n,k) C(n+k,k)
        let shifted = (0..size as u64)
            .map(|n| {
                let mut row = Vec::with_capacity(n as usize + 1);
                let sign = if n % 2 == 0 { 1 } else { -1 };
                let mut c = BigRational::from_integer(BigInt::from(sign));
                for k in 0..=n {
                    row.push(c.clone());
                    // C(n,k+1)C(n+k+1,k+1) / (C(n,k)C(n+k,k)) = (n−k)(n+k+1)/(k+1)²
                    c = -c * ratio((n - k) * (n + k + 1), (k + 1) * (k + 1));
                }
                row
            })
            .collect();
        // ∫₀¹ x^m P̃_n = m!² / ((m−n)! (m+n+1)!) for n ≤ m, else 0
        let moments = (0..size as u64)
            .map(|m| {
                let mut row = vec![BigRational::from_integer(BigInt::from(0)); size];
                let mut v = ratio(1, m + 1);
                for n in 0..=m {
                    row[n as usize] = v.clone();
                    v *= ratio(m - n, m + n + 2);
                }
                row
            })
            .collect();
        Tables { shifted, moments }
    })
}

/// Monomial coefficients (rational) of the unnormalized shifted polynomial `P̃_n`.
pub fn shifted_monomial_coeffs(n: usize) -> &'static [BigRational] {
    &tables().shifted[n]
}

pub(crate) fn moment(m: usize, n: usize) -> &'static BigRational {
    &tables().moments[m][n]
}

/// Legendre coefficients of `x^m`, built by m-fold antiderivative of `P_0` scaled by `m!`.
pub fn monomial_to_legendre(m: usize) -> UnivariatePoly {
    let mut p = UnivariatePoly::constant(Scalar::one());
    for k in 1..=m {
        p = p.antiderivative().scale_int(k as i64);
    }
    p
}

/// `⟨u, v⟩ = ∫₀¹ u v` by orthonormality.
pub fn inner_product(u: &UnivariatePoly, v: &UnivariatePoly) -> Scalar {
    u.coeffs()
        .iter()
        .zip(v.coeffs())
        .map(|(a, b)| a * b)
        .sum()
}

/// `∫₀ˣ p(t) dt`.
pub fn antiderivative(p: &UnivariatePoly) -> UnivariatePoly {
    p.antiderivative()
}
