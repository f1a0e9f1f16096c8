//! Continuous-stage RK methods and their constructor families.
//!
//! A method is the triple `(A(τ,σ), B(τ), C(τ))` with
//! `Z_τ = z₀ + h ∫₀¹ A(τ,σ) f(t₀ + C_σ h, Z_σ) dσ` and
//! `z₁ = z₀ + h ∫₀¹ B_τ f(t₀ + C_τ h, Z_τ) dτ`.
//! `A` is stored through its coefficient grid `α_(i,j)` on `P_i(τ) P_j(σ)`.
//!
//! Every constructor fixes `B ≡ 1`, `C = τ`; general `(B, C)` are reachable only
//! through [`CsrkMethod::new`].

use std::collections::BTreeMap;

use thiserror::Error;

use crate::legendre::{
    eval_legendre_all, xi, BivariatePoly, LegendreError, Scalar, UnivariatePoly, BASIS_CAP,
};

/// Sparse coefficient input keyed by `(i, j)`.
pub type Entries = BTreeMap<(usize, usize), Scalar>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MethodError {
    #[error("consistency violated at P_{index}: column 0 of alpha has {found}, C has {expected}")]
    ConsistencyViolation {
        index: usize,
        expected: Scalar,
        found: Scalar,
    },
    #[error(transparent)]
    Legendre(#[from] LegendreError),
    #[error("order-4 relation fails: sum_(i>=3) alpha_(0,i) alpha_(i,1) = {0}, expected 0")]
    Order4ConstraintViolation(Scalar),
    #[error("order-by-order construction supports target orders 2, 3, 4; got {0}")]
    UnsupportedOrder(u32),
    #[error("simplifying levels must be >= 1, got alpha={alpha}, beta={beta}")]
    InvalidLevels { alpha: usize, beta: usize },
    #[error("free entry ({i},{j}) lies outside the permitted region: {reason}")]
    FreeEntryOutsideRegion { i: usize, j: usize, reason: String },
    #[error("skew-symmetry conflict at ({i},{j}): {reason}")]
    SkewConflict { i: usize, j: usize, reason: String },
    #[error("index pair ({i},{j}) has even sum; symmetric families take odd i+j only")]
    ParityViolation { i: usize, j: usize },
    #[error("the Legendre energy-preserving family needs omega_0 = 1, got {0}")]
    OmegaZero(Scalar),
    #[error("omega list is empty")]
    EmptyOmega,
    #[error("{omegas} omegas but {generators} generators")]
    GeneratorCountMismatch { omegas: usize, generators: usize },
    #[error("this family requires generators")]
    MissingGenerators,
}

/// A continuous-stage Runge-Kutta method `(A, B, C)`.
#[derive(Clone, PartialEq)]
pub struct CsrkMethod {
    label: String,
    alpha: BivariatePoly,
    b: UnivariatePoly,
    c: UnivariatePoly,
    alpha_f64: Vec<Vec<f64>>,
    b_f64: Vec<f64>,
    c_f64: Vec<f64>,
}

impl std::fmt::Debug for CsrkMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CsrkMethod")
            .field("label", &self.label)
            .field("alpha", &self.alpha)
            .field("b", &self.b)
            .field("c", &self.c)
            .finish()
    }
}

impl CsrkMethod {
    /// Validates the basis cap and the consistency `C_τ = ∫₀¹ A(τ,σ) dσ`, i.e. column 0 of
    /// `alpha` equals the Legendre coefficients of `C`.
    pub fn new(
        label: impl Into<String>,
        alpha: BivariatePoly,
        b: UnivariatePoly,
        c: UnivariatePoly,
    ) -> Result<Self, MethodError> {
        for degree in [alpha.degree_tau(), alpha.degree_sigma()] {
            if degree > BASIS_CAP {
                return Err(LegendreError::BasisCapExceeded {
                    degree,
                    cap: BASIS_CAP,
                }
                .into());
            }
        }
        b.check_cap()?;
        c.check_cap()?;
        let column = alpha.column(0);
        let n = column.coeffs().len().max(c.coeffs().len());
        for index in 0..n {
            let (found, expected) = (column.coeff(index), c.coeff(index));
            if found != expected {
                return Err(MethodError::ConsistencyViolation {
                    index,
                    expected,
                    found,
                });
            }
        }
        let alpha_f64 = alpha.to_f64();
        let b_f64 = b.to_f64_coeffs();
        let c_f64 = c.to_f64_coeffs();
        Ok(Self {
            label: label.into(),
            alpha,
            b,
            c,
            alpha_f64,
            b_f64,
            c_f64,
        })
    }

    /// `B ≡ 1`, `C = τ` with the given `A` grid.
    pub fn normalized(label: impl Into<String>, alpha: BivariatePoly) -> Result<Self, MethodError> {
        Self::new(
            label,
            alpha,
            UnivariatePoly::constant(Scalar::one()),
            UnivariatePoly::identity(),
        )
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn alpha(&self) -> &BivariatePoly {
        &self.alpha
    }

    pub fn b(&self) -> &UnivariatePoly {
        &self.b
    }

    pub fn c(&self) -> &UnivariatePoly {
        &self.c
    }

    /// `α_(i,j)`.
    pub fn coeff(&self, i: usize, j: usize) -> Scalar {
        self.alpha.get(i, j)
    }

    /// π^τ, the degree of A in τ.
    pub fn degree_tau(&self) -> usize {
        self.alpha.degree_tau()
    }

    /// π^σ, the degree of A in σ.
    pub fn degree_sigma(&self) -> usize {
        self.alpha.degree_sigma()
    }

    pub fn is_normalized(&self) -> bool {
        self.b == UnivariatePoly::constant(Scalar::one()) && self.c == UnivariatePoly::identity()
    }

    /// Exact `A(τ, σ)`.
    pub fn eval_a(&self, tau: &Scalar, sigma: &Scalar) -> Scalar {
        self.alpha.eval(tau, sigma)
    }

    pub fn eval_a_f64(&self, tau: f64, sigma: f64) -> f64 {
        crate::legendre::bivariate_eval_f64(&self.alpha_f64, tau, sigma)
    }

    pub fn eval_b_f64(&self, tau: f64) -> f64 {
        crate::legendre::univariate_eval_f64(&self.b_f64, tau)
    }

    pub fn eval_c_f64(&self, tau: f64) -> f64 {
        crate::legendre::univariate_eval_f64(&self.c_f64, tau)
    }

    /// Float Legendre coefficients of `A(τ, ·)`.
    pub fn a_row_f64(&self, tau: f64) -> Vec<f64> {
        if self.alpha_f64.is_empty() {
            return Vec::new();
        }
        let p = eval_legendre_all(self.alpha_f64.len() - 1, &tau);
        let cols = self.alpha_f64[0].len();
        (0..cols)
            .map(|j| self.alpha_f64.iter().zip(&p).map(|(r, pi)| r[j] * pi).sum())
            .collect()
    }
}

fn half() -> Scalar {
    Scalar::from_frac(1, 2)
}

fn xi1() -> Scalar {
    xi(1).expect("xi(1)")
}

/// Grid of `1/2 + ξ₁P₁(τ)`, the column forced by `C = τ`.
fn consistent_base() -> Entries {
    let mut e = Entries::new();
    e.insert((0, 0), half());
    e.insert((1, 0), xi1());
    e
}

fn set(entries: &mut Entries, key: (usize, usize), value: Scalar) {
    if value.is_zero() {
        entries.remove(&key);
    } else {
        entries.insert(key, value);
    }
}

fn check_index_cap(i: usize, j: usize) -> Result<(), MethodError> {
    let degree = i.max(j);
    if degree > BASIS_CAP {
        return Err(LegendreError::BasisCapExceeded {
            degree,
            cap: BASIS_CAP,
        }
        .into());
    }
    Ok(())
}

/// Fills `α_(0,0) = 1/2`, `α_(1,0) = √3/6` and the free entries (`j ≥ 1`); order ≥ 3 forces
/// `α_(0,1) = −√3/6`, order 4 additionally forces `α_(1,1) = α_(0,2) = 0` and requires
/// `Σ_{i≥3} α_(0,i) α_(i,1) = 0`.
pub fn construct_order_by_order(target_order: u32, free: &Entries) -> Result<CsrkMethod, MethodError> {
    if !(2..=4).contains(&target_order) {
        return Err(MethodError::UnsupportedOrder(target_order));
    }
    let mut e = consistent_base();
    for (&(i, j), v) in free {
        check_index_cap(i, j)?;
        if j == 0 {
            return Err(MethodError::FreeEntryOutsideRegion {
                i,
                j,
                reason: "column 0 is fixed by C = tau".into(),
            });
        }
        set(&mut e, (i, j), v.clone());
    }
    if target_order >= 3 {
        set(&mut e, (0, 1), -xi1());
    }
    if target_order == 4 {
        e.remove(&(1, 1));
        e.remove(&(0, 2));
        let bilinear: Scalar = e
            .iter()
            .filter(|(&(i, j), _)| i == 0 && j >= 3)
            .map(|(&(_, k), v)| v * &e.get(&(k, 1)).cloned().unwrap_or_default())
            .sum();
        if !bilinear.is_zero() {
            return Err(MethodError::Order4ConstraintViolation(bilinear));
        }
    }
    CsrkMethod::normalized(
        format!("order-by-order(p={target_order})"),
        BivariatePoly::from_entries(&e),
    )
}

/// `A = 1/2 + Σ_{ι≤N₁} ξ_{ι+1} P_{ι+1}(τ)P_ι(σ) − Σ_{ι≤N₂} ξ_{ι+1} P_{ι+1}(σ)P_ι(τ) + Σ_{i≥β, j≥α} α_(i,j) P_i(τ)P_j(σ)`
/// with `N₁ = max(α−1, β−2)`, `N₂ = max(α−2, β−1)`.
pub fn construct_simplifying(
    alpha_level: usize,
    beta_level: usize,
    free: &Entries,
) -> Result<CsrkMethod, MethodError> {
    if alpha_level < 1 || beta_level < 1 {
        return Err(MethodError::InvalidLevels {
            alpha: alpha_level,
            beta: beta_level,
        });
    }
    let (a, b) = (alpha_level as i64, beta_level as i64);
    let n1 = (a - 1).max(b - 2) as usize;
    let n2 = (a - 2).max(b - 1) as usize;
    check_index_cap(n1 + 1, n2 + 1)?;
    let mut e = Entries::new();
    e.insert((0, 0), half());
    for k in 0..=n1 {
        let key = (k + 1, k);
        let v = e.get(&key).cloned().unwrap_or_default() + xi(k + 1)?;
        set(&mut e, key, v);
    }
    for k in 0..=n2 {
        let key = (k, k + 1);
        let v = e.get(&key).cloned().unwrap_or_default() - xi(k + 1)?;
        set(&mut e, key, v);
    }
    for (&(i, j), v) in free {
        check_index_cap(i, j)?;
        if i < beta_level || j < alpha_level {
            return Err(MethodError::FreeEntryOutsideRegion {
                i,
                j,
                reason: format!("free parameters need i >= {beta_level} and j >= {alpha_level}"),
            });
        }
        let total = e.get(&(i, j)).cloned().unwrap_or_default() + v;
        set(&mut e, (i, j), total);
    }
    CsrkMethod::normalized(
        format!("simplifying(alpha={alpha_level},beta={beta_level})"),
        BivariatePoly::from_entries(&e),
    )
}

/// `A = 1/2 + Σ_{i+j>0} α_(i,j) P_i(τ)P_j(σ)` with skew-symmetric `α`.
///
/// Entries may be given on either side of the diagonal; the mirrored entry is derived.
/// `α_(1,0) = √3/6` comes from consistency, so `α_(0,1) = −√3/6` is implied.
pub fn construct_symplectic(skew: &Entries) -> Result<CsrkMethod, MethodError> {
    let mut e = consistent_base();
    e.insert((0, 1), -xi1());
    for (&(i, j), v) in skew {
        check_index_cap(i, j)?;
        if i == j {
            if !v.is_zero() {
                return Err(MethodError::SkewConflict {
                    i,
                    j,
                    reason: "skew-symmetry forces a zero diagonal".into(),
                });
            }
            continue;
        }
        let (lo, hi, upper) = if i < j { (i, j, v.clone()) } else { (j, i, -v) };
        if (lo, hi) == (0, 1) {
            if upper != -xi1() {
                return Err(MethodError::SkewConflict {
                    i,
                    j,
                    reason: "alpha_(0,1) must equal -sqrt(3)/6 by consistency".into(),
                });
            }
            continue;
        }
        if let Some(prev) = e.get(&(lo, hi)) {
            if *prev != upper {
                return Err(MethodError::SkewConflict {
                    i,
                    j,
                    reason: "entry supplied twice with inconsistent values".into(),
                });
            }
        }
        set(&mut e, (lo, hi), upper.clone());
        set(&mut e, (hi, lo), -upper);
    }
    CsrkMethod::normalized("symplectic", BivariatePoly::from_entries(&e))
}

/// `A = 1/2 + Σ_{i+j odd} ω_ij P_i(τ)P_j(σ)`; `ω_10 = √3/6` is inserted when absent.
pub fn construct_symmetric(odd: &Entries) -> Result<CsrkMethod, MethodError> {
    let mut e = Entries::new();
    e.insert((0, 0), half());
    for (&(i, j), v) in odd {
        check_index_cap(i, j)?;
        if (i + j) % 2 == 0 {
            return Err(MethodError::ParityViolation { i, j });
        }
        set(&mut e, (i, j), v.clone());
    }
    if !odd.contains_key(&(1, 0)) {
        e.insert((1, 0), xi1());
    }
    CsrkMethod::normalized("symmetric", BivariatePoly::from_entries(&e))
}

/// Weights `ω_ι` and optional generators `g_ι` for `A = Σ ω_ι (∫₀^τ g_ι) g_ι(σ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EpSpec {
    pub omegas: Vec<Scalar>,
    pub generators: Option<Vec<UnivariatePoly>>,
}

impl EpSpec {
    pub fn legendre(omegas: Vec<Scalar>) -> Self {
        Self {
            omegas,
            generators: None,
        }
    }

    pub fn general(omegas: Vec<Scalar>, generators: Vec<UnivariatePoly>) -> Self {
        Self {
            omegas,
            generators: Some(generators),
        }
    }

    /// `ω_ι`, zero past the end of the list.
    pub fn omega(&self, index: usize) -> Scalar {
        self.omegas.get(index).cloned().unwrap_or_default()
    }

    /// Generator `g_ι`; `P_ι` when generators are absent.
    pub fn generator(&self, index: usize) -> UnivariatePoly {
        match &self.generators {
            Some(g) => g[index].clone(),
            None => UnivariatePoly::basis(index),
        }
    }
}

/// What the Legendre energy-preserving family guarantees for a given `ω`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EpClaims {
    /// `κ = min{ι : ω_ι ≠ 1}`, with `ω_ι = 0` past the list.
    pub kappa: usize,
    /// `2κ`.
    pub order: usize,
    /// Whether `ω_κ/(2κ−1) − ω_{κ+1}/(2κ+1) = 2/(4κ²−1)` holds.
    pub tuned: bool,
    /// `2κ+4` when tuned, otherwise `2κ+2`.
    pub conjugate_symplectic_order: usize,
}

impl EpClaims {
    pub fn from_omegas(spec: &EpSpec) -> Self {
        let one = Scalar::one();
        let kappa = (0..)
            .find(|&i| spec.omega(i) != one)
            .expect("a finite omega list always has an entry different from 1");
        let k = kappa as i64;
        let tuned = kappa >= 1 && {
            let lhs = spec.omega(kappa).div_int(2 * k - 1) - spec.omega(kappa + 1).div_int(2 * k + 1);
            lhs == Scalar::from_frac(2, 4 * k * k - 1)
        };
        Self {
            kappa,
            order: 2 * kappa,
            tuned,
            conjugate_symplectic_order: 2 * kappa + if tuned { 4 } else { 2 },
        }
    }
}

fn assemble_ep(spec: &EpSpec) -> Result<BivariatePoly, MethodError> {
    let mut acc = BivariatePoly::zero();
    for (index, w) in spec.omegas.iter().enumerate() {
        if w.is_zero() {
            continue;
        }
        let g = spec.generator(index);
        let integral = g.antiderivative();
        integral.check_cap()?;
        acc = acc.add(&BivariatePoly::outer(&integral.scale(w), &g));
    }
    Ok(acc)
}

/// `A(τ,σ) = Σ_ι ω_ι (∫₀^τ P_ι) P_ι(σ)` with `ω₀ = 1`.
pub fn construct_ep_legendre(spec: &EpSpec) -> Result<(CsrkMethod, EpClaims), MethodError> {
    if spec.omegas.is_empty() {
        return Err(MethodError::EmptyOmega);
    }
    if spec.omegas[0] != Scalar::one() {
        return Err(MethodError::OmegaZero(spec.omegas[0].clone()));
    }
    let legendre = EpSpec::legendre(spec.omegas.clone());
    let alpha = assemble_ep(&legendre)?;
    let method = CsrkMethod::normalized("ep-legendre", alpha)?;
    Ok((method, EpClaims::from_omegas(&legendre)))
}

/// Result of the general energy-preserving construction.
#[derive(Debug, Clone, PartialEq)]
pub struct EpGeneral {
    pub method: CsrkMethod,
    /// Whether the consistency-derived `C` equals `τ`.
    pub c_is_tau: bool,
}

/// `A(τ,σ) = Σ_ι ω_ι (∫₀^τ g_ι) g_ι(σ)`, `B ≡ 1`, `C` derived from consistency.
pub fn construct_ep_general(spec: &EpSpec) -> Result<EpGeneral, MethodError> {
    let generators = spec.generators.as_ref().ok_or(MethodError::MissingGenerators)?;
    if spec.omegas.is_empty() {
        return Err(MethodError::EmptyOmega);
    }
    if generators.len() != spec.omegas.len() {
        return Err(MethodError::GeneratorCountMismatch {
            omegas: spec.omegas.len(),
            generators: generators.len(),
        });
    }
    for g in generators {
        g.check_cap()?;
    }
    let alpha = assemble_ep(spec)?;
    let c = alpha.column(0);
    let c_is_tau = c == UnivariatePoly::identity();
    let method = CsrkMethod::new(
        "ep-general",
        alpha,
        UnivariatePoly::constant(Scalar::one()),
        c,
    )?;
    Ok(EpGeneral { method, c_is_tau })
}

/// `A = 1/2 + τ − σ`, the smallest symplectic and symmetric method of order 4.
pub fn minimal_symplectic() -> CsrkMethod {
    construct_symplectic(&Entries::new())
        .expect("empty skew input is admissible")
        .with_label("minimal-symplectic")
}

/// `A = τ`, the average vector field method.
pub fn average_vector_field() -> CsrkMethod {
    construct_ep_legendre(&EpSpec::legendre(vec![Scalar::one()]))
        .expect("omega = [1] is admissible")
        .0
        .with_label("avf")
}
