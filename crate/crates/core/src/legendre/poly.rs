use serde::{Deserialize, Serialize};

use super::{
    eval_legendre_all, moment, shifted_monomial_coeffs, xi_unchecked, Field, LegendreError,
    Scalar, BASIS_CAP, WORK_DEGREE,
};

/// Polynomial on `[0, 1]` stored by its shifted-Legendre coefficients; entry `ι` multiplies `P_ι`.
///
/// Trailing zero coefficients are trimmed, so the zero polynomial has no coefficients.
#[derive(Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UnivariatePoly {
    coeffs: Vec<Scalar>,
}

impl std::fmt::Debug for UnivariatePoly {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list()
            .entries(self.coeffs.iter().map(|c| c.to_string()))
            .finish()
    }
}

impl UnivariatePoly {
    pub fn new(mut coeffs: Vec<Scalar>) -> Self {
        while coeffs.last().is_some_and(Scalar::is_zero) {
            coeffs.pop();
        }
        Self { coeffs }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: Scalar) -> Self {
        Self::new(vec![c])
    }

    /// `P_ι`.
    pub fn basis(index: usize) -> Self {
        let mut c = vec![Scalar::zero(); index + 1];
        c[index] = Scalar::one();
        Self::new(c)
    }

    /// The identity `x = ½P_0 + (√3/6)P_1`.
    pub fn identity() -> Self {
        super::monomial_to_legendre(1)
    }

    pub fn coeffs(&self) -> &[Scalar] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Scalar> {
        self.coeffs
    }

    /// Coefficient of `P_ι`, zero beyond the stored length.
    pub fn coeff(&self, index: usize) -> Scalar {
        self.coeffs.get(index).cloned().unwrap_or_default()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree; the zero polynomial reports 0.
    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn check_cap(&self) -> Result<(), LegendreError> {
        if self.degree() > BASIS_CAP {
            return Err(LegendreError::BasisCapExceeded {
                degree: self.degree(),
                cap: BASIS_CAP,
            });
        }
        Ok(())
    }

    pub fn eval<F: Field>(&self, x: &F) -> F {
        if self.coeffs.is_empty() {
            return F::zero();
        }
        let basis = eval_legendre_all(self.degree(), x);
        self.coeffs
            .iter()
            .zip(&basis)
            .fold(F::zero(), |acc, (c, p)| acc.add(&p.mul(&F::from_scalar(c))))
    }

    pub fn eval_f64(&self, x: f64) -> f64 {
        let c = self.to_f64_coeffs();
        eval_f64_coeffs(&c, x)
    }

    pub fn to_f64_coeffs(&self) -> Vec<f64> {
        self.coeffs.iter().map(Scalar::to_f64).collect()
    }

    /// Exact value at 0: `Σ c_ι (−1)^ι √(2ι+1)`.
    pub fn at_zero(&self) -> Scalar {
        self.eval(&Scalar::zero())
    }

    pub fn at_one(&self) -> Scalar {
        self.eval(&Scalar::one())
    }

    /// `∫₀¹ p`, which is the `P_0` coefficient.
    pub fn integral(&self) -> Scalar {
        self.coeff(0)
    }

    pub fn scale(&self, c: &Scalar) -> Self {
        Self::new(self.coeffs.iter().map(|x| x * c).collect())
    }

    pub fn scale_int(&self, n: i64) -> Self {
        Self::new(self.coeffs.iter().map(|x| x.scale_int(n)).collect())
    }

    pub fn add(&self, other: &Self) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        Self::new((0..n).map(|i| self.coeff(i) + other.coeff(i)).collect())
    }

    pub fn sub(&self, other: &Self) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        Self::new((0..n).map(|i| self.coeff(i) - other.coeff(i)).collect())
    }

    /// `p(1 − x)`, using `P_ι(1−x) = (−1)^ι P_ι(x)`.
    pub fn reflect(&self) -> Self {
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .map(|(i, c)| if i % 2 == 0 { c.clone() } else { -c })
                .collect(),
        )
    }

    /// `∫₀ˣ p(t) dt` termwise:
    /// `∫P_0 = ξ_1 P_1 + ½P_0`, `∫P_ι = ξ_{ι+1} P_{ι+1} − ξ_ι P_{ι−1}`.
    pub fn antiderivative(&self) -> Self {
        if self.coeffs.is_empty() {
            return Self::zero();
        }
        let mut out = vec![Scalar::zero(); self.coeffs.len() + 1];
        for (i, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            if i == 0 {
                out[0] += &c.div_int(2);
            } else {
                out[i - 1] -= &(c * &xi_unchecked(i));
            }
            out[i + 1] += &(c * &xi_unchecked(i + 1));
        }
        Self::new(out)
    }

    /// `p'`, from `P_n' = 2√(2n+1) Σ_{k<n, n−k odd} √(2k+1) P_k`.
    pub fn derivative(&self) -> Self {
        if self.coeffs.len() <= 1 {
            return Self::zero();
        }
        let mut out = vec![Scalar::zero(); self.coeffs.len() - 1];
        for (n, c) in self.coeffs.iter().enumerate().skip(1) {
            if c.is_zero() {
                continue;
            }
            let scaled = c.mul_sqrt(2 * n as u64 + 1).scale_int(2);
            let mut k = n - 1;
            loop {
                out[k] += &scaled.mul_sqrt(2 * k as u64 + 1);
                if k < 2 {
                    break;
                }
                k -= 2;
            }
        }
        Self::new(out)
    }

    /// Monomial coefficients `m_k` with `p(x) = Σ m_k x^k`.
    pub fn to_monomial(&self) -> Vec<Scalar> {
        let mut out = vec![Scalar::zero(); self.coeffs.len()];
        for (n, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let normalized = c.mul_sqrt(2 * n as u64 + 1);
            for (k, r) in shifted_monomial_coeffs(n).iter().enumerate() {
                out[k] += &normalized.scale(r);
            }
        }
        out
    }

    /// Inverse of [`to_monomial`](Self::to_monomial): `c_ι = √(2ι+1) Σ_m m_m ∫x^m P̃_ι`.
    pub fn from_monomial(mono: &[Scalar]) -> Self {
        assert!(
            mono.len() <= WORK_DEGREE + 1,
            "polynomial degree exceeds the working limit {WORK_DEGREE}"
        );
        let mut out = vec![Scalar::zero(); mono.len()];
        for (m, v) in mono.iter().enumerate() {
            if v.is_zero() {
                continue;
            }
            for (n, slot) in out.iter_mut().enumerate().take(m + 1) {
                *slot += &v.scale(moment(m, n));
            }
        }
        Self::new(
            out.into_iter()
                .enumerate()
                .map(|(n, c)| c.mul_sqrt(2 * n as u64 + 1))
                .collect(),
        )
    }

    /// Exact product, routed through the monomial basis.
    pub fn mul(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::zero();
        }
        let a = self.to_monomial();
        let b = other.to_monomial();
        Self::from_monomial(&convolve(&a, &b))
    }

    pub fn pow(&self, k: usize) -> Self {
        let mut acc = Self::constant(Scalar::one());
        for _ in 0..k {
            acc = acc.mul(self);
        }
        acc
    }
}

pub(crate) fn convolve(a: &[Scalar], b: &[Scalar]) -> Vec<Scalar> {
    let mut out = vec![Scalar::zero(); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        if x.is_zero() {
            continue;
        }
        for (j, y) in b.iter().enumerate() {
            if !y.is_zero() {
                out[i + j] += &(x * y);
            }
        }
    }
    out
}

/// Float counterpart of [`UnivariatePoly::antiderivative`].
pub fn antiderivative_f64(c: &[f64]) -> Vec<f64> {
    if c.is_empty() {
        return Vec::new();
    }
    let xi = |k: usize| 1.0 / (2.0 * ((4 * k * k - 1) as f64).sqrt());
    let mut out = vec![0.0; c.len() + 1];
    for (i, v) in c.iter().enumerate() {
        if i == 0 {
            out[0] += v / 2.0;
        } else {
            out[i - 1] -= v * xi(i);
        }
        out[i + 1] += v * xi(i + 1);
    }
    out
}

pub(crate) fn eval_f64_coeffs(c: &[f64], x: f64) -> f64 {
    if c.is_empty() {
        return 0.0;
    }
    eval_legendre_all(c.len() - 1, &x)
        .iter()
        .zip(c)
        .map(|(p, a)| p * a)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn s(x: &str) -> Scalar {
        x.parse().unwrap()
    }

    #[test]
    fn antiderivative_formulas() {
        let p0 = UnivariatePoly::basis(0);
        assert_eq!(
            p0.antiderivative(),
            UnivariatePoly::new(vec![s("1/2"), xi_unchecked(1)])
        );
        let p1 = UnivariatePoly::basis(1);
        assert_eq!(
            p1.antiderivative(),
            UnivariatePoly::new(vec![-xi_unchecked(1), Scalar::zero(), xi_unchecked(2)])
        );
        let x2 = p0.antiderivative().antiderivative().scale_int(2);
        assert_eq!(
            x2,
            UnivariatePoly::new(vec![s("1/3"), s("1/6*sqrt(3)"), s("1/30*sqrt(5)")])
        );
    }

    #[test]
    fn product_of_identities() {
        let x = UnivariatePoly::identity();
        assert_eq!(x.mul(&x), super::super::monomial_to_legendre(2));
        assert_eq!(x.pow(5), super::super::monomial_to_legendre(5));
    }

    #[test]
    fn boundary_values_exact() {
        let x = UnivariatePoly::identity();
        assert!(x.at_zero().is_zero());
        assert_eq!(x.at_one(), Scalar::one());
        assert_eq!(x.reflect(), UnivariatePoly::constant(Scalar::one()).sub(&x));
    }

    #[test]
    fn generic_eval_agrees() {
        let p = UnivariatePoly::new(vec![s("1/3"), s("-2/5"), s("7/11*sqrt(3)"), s("1/2")]);
        let x = Scalar::from_frac(2, 9);
        let exact = p.eval(&x).to_f64();
        assert!((exact - p.eval_f64(2.0 / 9.0)).abs() < 1e-14);
        // monomial route
        let mono = p.to_monomial();
        let via_mono = mono
            .iter()
            .rev()
            .fold(Scalar::zero(), |acc, c| &acc * &x + c);
        assert_eq!(via_mono, p.eval(&x));
    }

    fn rational_poly() -> impl Strategy<Value = UnivariatePoly> {
        prop::collection::vec((-20i64..=20, 1i64..=9), 0..=9).prop_map(|v| {
            UnivariatePoly::new(v.into_iter().map(|(p, q)| Scalar::from_frac(p, q)).collect())
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn derivative_inverts_antiderivative(p in rational_poly()) {
            let q = p.antiderivative();
            prop_assert_eq!(q.derivative(), p.clone());
            prop_assert!(q.at_zero().is_zero());
        }

        #[test]
        fn monomial_round_trip(p in rational_poly()) {
            prop_assert_eq!(UnivariatePoly::from_monomial(&p.to_monomial()), p);
        }
    }
}
