//! Exact coefficient-space certificates for csRK methods.
//!
//! Everything here works on the Legendre coefficient grid of `A` and the
//! coefficient vectors of `B`, `C`. Integrals collapse to inner products by
//! orthonormality, so every residual is an exact [`Scalar`] and every
//! "holds" flag means the residual is exactly zero.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::{self, Execution};
use crate::legendre::{
    antiderivative_f64, inner_product, univariate_eval_f64, BivariatePoly, Scalar,
    UnivariatePoly, WORK_DEGREE,
};
use crate::method::{CsrkMethod, EpSpec};

/// Default probing depth for `C̆` and `D̆`.
pub const DEFAULT_LEVEL_CAP: usize = 10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VerifyError {
    #[error("symmetry condition needs integral of B equal to 1, got {0}")]
    SymmetricPrecondition(Scalar),
}

const TARGETS: [(i64, i64); 8] = [
    (1, 1),
    (1, 2),
    (1, 3),
    (1, 6),
    (1, 4),
    (1, 8),
    (1, 12),
    (1, 24),
];

/// Residuals `value − target` of order conditions (1)–(8), in that order.
pub type OrderResiduals = [Scalar; 8];

/// Outcome of the direct order-condition check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrderCheck {
    pub order: u8,
    pub residuals: OrderResiduals,
}

fn target(k: usize) -> Scalar {
    Scalar::from_frac(TARGETS[k].0, TARGETS[k].1)
}

/// Order conditions (1)–(8) for arbitrary `(A, B, C)`, by exact polynomial algebra.
pub fn order_residuals_general(m: &CsrkMethod) -> OrderResiduals {
    let (a, b, c) = (m.alpha(), m.b(), m.c());
    let c2 = c.mul(c);
    let c3 = c2.mul(c);
    let bc = b.mul(c);
    // ∫ A(τ,σ) C_σ dσ, a polynomial in τ
    let ac = a.apply_sigma(c);
    let values = [
        b.integral(),
        inner_product(b, c),
        inner_product(b, &c2),
        inner_product(b, &ac),
        inner_product(b, &c3),
        inner_product(&bc, &ac),
        inner_product(b, &a.apply_sigma(&c2)),
        inner_product(b, &a.apply_sigma(&ac)),
    ];
    std::array::from_fn(|k| &values[k] - &target(k))
}

/// Reduced `α`-relations valid for `B ≡ 1`, `C = τ`; `None` otherwise.
pub fn order_residuals_fast(m: &CsrkMethod) -> Option<OrderResiduals> {
    if !m.is_normalized() {
        return None;
    }
    let a = |i, j| m.coeff(i, j);
    let r3_6 = Scalar::rational_sqrt(num_rational::BigRational::new(1.into(), 6.into()), 3).ok()?;
    let r3_12 = r3_6.div_int(2);
    let r5_30 = Scalar::rational_sqrt(num_rational::BigRational::new(1.into(), 30.into()), 5).ok()?;
    let q = Scalar::from_frac;
    let cond4 = q(1, 2) * a(0, 0) + &r3_6 * a(0, 1);
    let cond6 = q(1, 4) * a(0, 0) + &r3_12 * a(1, 0) + &r3_12 * a(0, 1) + q(1, 12) * a(1, 1);
    let cond7 = q(1, 3) * a(0, 0) + &r3_6 * a(0, 1) + &r5_30 * a(0, 2);
    let n = m.alpha().rows().max(m.alpha().cols());
    let s0: Scalar = (0..n).map(|i| a(0, i) * a(i, 0)).sum();
    let s1: Scalar = (0..n).map(|i| a(0, i) * a(i, 1)).sum();
    let cond8 = q(1, 2) * s0 + &r3_6 * s1;
    let z = Scalar::zero;
    Some([
        z(),
        z(),
        z(),
        cond4 - target(3),
        z(),
        cond6 - target(5),
        cond7 - target(6),
        cond8 - target(7),
    ])
}

fn staged_order(r: &OrderResiduals) -> u8 {
    let holds = |range: std::ops::Range<usize>| r[range].iter().all(Scalar::is_zero);
    if !holds(0..1) {
        0
    } else if !holds(1..2) {
        1
    } else if !holds(2..4) {
        2
    } else if !holds(4..8) {
        3
    } else {
        4
    }
}

/// Largest `p ≤ 4` whose conditions all hold: (1)→1, (1)–(2)→2, (1)–(4)→3, (1)–(8)→4.
pub fn check_order_conditions(m: &CsrkMethod) -> OrderCheck {
    let residuals = order_residuals_fast(m).unwrap_or_else(|| order_residuals_general(m));
    OrderCheck {
        order: staged_order(&residuals),
        residuals,
    }
}

/// A simplifying-assumption level; `B̆` may hold for every κ.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    Finite(usize),
    Unbounded,
}

impl Level {
    pub fn value_or(self, cap: usize) -> usize {
        match self {
            Level::Finite(n) => n,
            Level::Unbounded => cap,
        }
    }
}

impl Serialize for Level {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Level::Finite(n) => s.serialize_u64(*n as u64),
            Level::Unbounded => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Level {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match serde_json::Value::deserialize(d)? {
            serde_json::Value::String(s) if s == "inf" => Ok(Level::Unbounded),
            serde_json::Value::Number(n) => n
                .as_u64()
                .map(|v| Level::Finite(v as usize))
                .ok_or_else(|| serde::de::Error::custom("level must be a nonnegative integer")),
            other => Err(serde::de::Error::custom(format!("invalid level {other}"))),
        }
    }
}

/// Levels `(ρ, η, ζ)` of `B̆`, `C̆`, `D̆`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimplifyingLevels {
    #[serde(rename = "B")]
    pub b: Level,
    #[serde(rename = "C")]
    pub c: usize,
    #[serde(rename = "D")]
    pub d: usize,
    pub cap: usize,
}

/// Cached powers `C^0, C^1, …` of a polynomial.
struct Powers<'a> {
    base: &'a UnivariatePoly,
    cache: Vec<UnivariatePoly>,
}

impl<'a> Powers<'a> {
    fn new(base: &'a UnivariatePoly) -> Self {
        Self {
            base,
            cache: vec![UnivariatePoly::constant(Scalar::one())],
        }
    }

    /// `C^k`, or `None` once the degree would pass the working limit.
    fn get(&mut self, k: usize) -> Option<&UnivariatePoly> {
        if k * self.base.degree() > WORK_DEGREE / 2 {
            return None;
        }
        while self.cache.len() <= k {
            let next = self.cache.last().unwrap().mul(self.base);
            self.cache.push(next);
        }
        Some(&self.cache[k])
    }
}

/// `∫₀¹ B C^{κ−1} − 1/κ`.
pub fn b_breve_defect(m: &CsrkMethod, kappa: usize) -> Scalar {
    let p = m.c().pow(kappa - 1);
    inner_product(m.b(), &p) - Scalar::from_frac(1, kappa as i64)
}

/// `∫₀¹ A(τ,σ) C_σ^{κ−1} dσ − C_τ^κ / κ`, a polynomial in τ.
pub fn c_breve_defect(m: &CsrkMethod, kappa: usize) -> UnivariatePoly {
    let lhs = m.alpha().apply_sigma(&m.c().pow(kappa - 1));
    let rhs = m.c().pow(kappa).scale(&Scalar::from_frac(1, kappa as i64));
    lhs.sub(&rhs)
}

/// `∫₀¹ B_τ C_τ^{κ−1} A(τ,σ) dτ − B_σ(1 − C_σ^κ)/κ`, a polynomial in σ.
pub fn d_breve_defect(m: &CsrkMethod, kappa: usize) -> UnivariatePoly {
    let weight = m.b().mul(&m.c().pow(kappa - 1));
    let lhs = m.alpha().apply_tau(&weight);
    let one = UnivariatePoly::constant(Scalar::one());
    let rhs = m
        .b()
        .mul(&one.sub(&m.c().pow(kappa)))
        .scale(&Scalar::from_frac(1, kappa as i64));
    lhs.sub(&rhs)
}

/// Largest `ρ ≤ 2·cap`, `η ≤ cap`, `ζ ≤ cap` for which `B̆(ρ)`, `C̆(η)`, `D̆(ζ)` hold.
///
/// `ρ` is reported unbounded when `B ≡ 1`, `C = τ`. Probing stops early if the
/// powers of `C` outgrow the working degree; the level reached is then a lower bound.
pub fn check_simplifying(m: &CsrkMethod, cap: usize) -> SimplifyingLevels {
    let mut powers = Powers::new(m.c());
    let one = UnivariatePoly::constant(Scalar::one());

    let mut rho = 0;
    for kappa in 1..=2 * cap {
        let Some(p) = powers.get(kappa - 1) else { break };
        if inner_product(m.b(), p) != Scalar::from_frac(1, kappa as i64) {
            break;
        }
        rho = kappa;
    }
    let b_level = if rho == 2 * cap && m.is_normalized() {
        Level::Unbounded
    } else {
        Level::Finite(rho)
    };

    let mut eta = 0;
    for kappa in 1..=cap {
        let (Some(prev), Some(next)) = (powers.get(kappa - 1).cloned(), powers.get(kappa).cloned())
        else {
            break;
        };
        let lhs = m.alpha().apply_sigma(&prev);
        if lhs != next.scale(&Scalar::from_frac(1, kappa as i64)) {
            break;
        }
        eta = kappa;
    }

    let mut zeta = 0;
    for kappa in 1..=cap {
        let (Some(prev), Some(next)) = (powers.get(kappa - 1).cloned(), powers.get(kappa).cloned())
        else {
            break;
        };
        let lhs = m.alpha().apply_tau(&m.b().mul(&prev));
        let rhs = m
            .b()
            .mul(&one.sub(&next))
            .scale(&Scalar::from_frac(1, kappa as i64));
        if lhs != rhs {
            break;
        }
        zeta = kappa;
    }

    SimplifyingLevels {
        b: b_level,
        c: eta,
        d: zeta,
        cap,
    }
}

/// `min(ρ, 2η+2, η+ζ+1)` with an unbounded `ρ` read as `2·cap`.
pub fn guaranteed_order_from(levels: &SimplifyingLevels) -> usize {
    let rho = levels.b.value_or(2 * levels.cap);
    rho.min(2 * levels.c + 2).min(levels.c + levels.d + 1)
}

pub fn guaranteed_order(m: &CsrkMethod) -> usize {
    guaranteed_order_from(&check_simplifying(m, DEFAULT_LEVEL_CAP))
}

/// `M(τ,σ) = B_τ A(τ,σ) + B_σ A(σ,τ) − B_τ B_σ`.
pub fn symplectic_defect(m: &CsrkMethod) -> BivariatePoly {
    let g = m.alpha().mul_tau(m.b());
    g.add(&g.transpose())
        .sub(&BivariatePoly::outer(m.b(), m.b()))
}

/// Max-norm of the coefficients of [`symplectic_defect`].
pub fn symplectic_residual(m: &CsrkMethod) -> Scalar {
    symplectic_defect(m).max_abs()
}

/// `A(τ,σ) + A(1−τ,1−σ) − B_σ`; requires `∫B = 1`.
pub fn symmetric_defect(m: &CsrkMethod) -> Result<BivariatePoly, VerifyError> {
    let integral = m.b().integral();
    if integral != Scalar::one() {
        return Err(VerifyError::SymmetricPrecondition(integral));
    }
    let b_sigma = BivariatePoly::outer(&UnivariatePoly::constant(Scalar::one()), m.b());
    Ok(m.alpha().add(&m.alpha().reflect()).sub(&b_sigma))
}

pub fn symmetric_residual(m: &CsrkMethod) -> Result<Scalar, VerifyError> {
    Ok(symmetric_defect(m)?.max_abs())
}

/// The three energy-preservation defects:
/// `∂_τA(τ,σ) − ∂_σA(σ,τ)`, `A(0,σ)` and `A(1,σ) − B_σ`.
pub fn energy_preserving_defects(m: &CsrkMethod) -> (BivariatePoly, UnivariatePoly, UnivariatePoly) {
    let d = m.alpha().derivative_tau();
    let sym = d.sub(&d.transpose());
    let at0 = m.alpha().at_tau_exact(&Scalar::zero());
    let at1 = m.alpha().at_tau_exact(&Scalar::one()).sub(m.b());
    (sym, at0, at1)
}

pub fn energy_preserving_residual(m: &CsrkMethod) -> [Scalar; 3] {
    let (sym, at0, at1) = energy_preserving_defects(m);
    [
        sym.max_abs(),
        Scalar::max_abs(at0.coeffs()),
        Scalar::max_abs(at1.coeffs()),
    ]
}

/// Outcome of the generator condition for `C̆(η)` in the general energy-preserving family.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Epm2Check {
    pub holds: bool,
    /// First `(i, j)` where `Σ_ι ω_ι a_ιi a_ιj` misses its target.
    pub witness: Option<(usize, usize)>,
}

/// Checks `Σ_ι ω_ι a_ιi a_ιj = δ_ij` for `i, j < η` and `= 0` for `i < η ≤ j`.
pub fn check_epm2_condition(spec: &EpSpec, eta: usize) -> Epm2Check {
    let generators: Vec<UnivariatePoly> =
        (0..spec.omegas.len()).map(|k| spec.generator(k)).collect();
    let width = generators
        .iter()
        .map(|g| g.coeffs().len())
        .max()
        .unwrap_or(0)
        .max(eta);
    for i in 0..eta {
        for j in 0..width {
            let s: Scalar = spec
                .omegas
                .iter()
                .zip(&generators)
                .map(|(w, g)| w * &g.coeff(i) * g.coeff(j))
                .sum();
            let expected = if i == j { Scalar::one() } else { Scalar::zero() };
            if s != expected {
                return Epm2Check {
                    holds: false,
                    witness: Some((i, j)),
                };
            }
        }
    }
    Epm2Check {
        holds: true,
        witness: None,
    }
}

/// `∫₀¹ |p(σ)| dσ` for Legendre coefficients `c`, split at the sign changes of `p`.
fn integral_abs(c: &[f64]) -> f64 {
    if c.is_empty() {
        return 0.0;
    }
    let anti = antiderivative_f64(c);
    let f = |x: f64| univariate_eval_f64(c, x);
    let big_f = |x: f64| univariate_eval_f64(&anti, x);
    let n = 16 * c.len().max(4);
    let mut cuts = vec![0.0];
    let mut prev_x = 0.0;
    let mut prev_v = f(0.0);
    for k in 1..=n {
        let x = k as f64 / n as f64;
        let v = f(x);
        if prev_v * v < 0.0 {
            let (mut lo, mut hi, mut flo) = (prev_x, x, prev_v);
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                let fm = f(mid);
                if fm * flo > 0.0 {
                    lo = mid;
                    flo = fm;
                } else {
                    hi = mid;
                }
            }
            cuts.push(0.5 * (lo + hi));
        }
        prev_x = x;
        prev_v = v;
    }
    cuts.push(1.0);
    cuts.windows(2).map(|w| (big_f(w[1]) - big_f(w[0])).abs()).sum()
}

/// `max_τ ∫₀¹ |A(τ,σ)| dσ`: 64 samples in τ, then golden-section refinement to 1e-6.
pub fn max_row_abs_integral(m: &CsrkMethod) -> f64 {
    let g = |t: f64| integral_abs(&m.a_row_f64(t));
    let samples = 64;
    let values: Vec<f64> = (0..=samples).map(|k| g(k as f64 / samples as f64)).collect();
    let (best, &best_value) = values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .unwrap();
    let mut lo = best.saturating_sub(1) as f64 / samples as f64;
    let mut hi = (best + 1).min(samples) as f64 / samples as f64;
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let (mut f1, mut f2) = (g(x1), g(x2));
    while hi - lo > 1e-6 {
        if f1 > f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = g(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = g(x2);
        }
    }
    best_value.max(f1).max(f2)
}

/// Step size below which the stage equations have a unique solution:
/// `1 / (L · max_τ ∫₀¹ |A(τ,σ)| dσ)`.
pub fn stage_contraction_bound(m: &CsrkMethod, lipschitz: f64) -> f64 {
    1.0 / (lipschitz * max_row_abs_integral(m))
}

/// Which geometric conditions hold exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PropertyFlags {
    pub symplectic: bool,
    pub symmetric: bool,
    pub energy_preserving: bool,
}

/// Full certificate for one method.
#[derive(Debug, Clone, PartialEq)]
pub struct PropertyReport {
    pub verified_order_direct: u8,
    pub order_residuals: OrderResiduals,
    pub breve: SimplifyingLevels,
    pub guaranteed_order: usize,
    pub symplectic_residual: Scalar,
    /// `None` when `∫B ≠ 1`, where the symmetry condition does not apply.
    pub symmetric_residual: Option<Scalar>,
    pub ep_residuals: [Scalar; 3],
    pub flags: PropertyFlags,
    pub h_bound_per_unit_l: f64,
}

pub fn verify(m: &CsrkMethod) -> PropertyReport {
    verify_with_cap(m, DEFAULT_LEVEL_CAP)
}

pub fn verify_with_cap(m: &CsrkMethod, cap: usize) -> PropertyReport {
    let order = check_order_conditions(m);
    let breve = check_simplifying(m, cap);
    let symplectic_residual = symplectic_residual(m);
    let symmetric_residual = symmetric_residual(m).ok();
    let ep_residuals = energy_preserving_residual(m);
    let flags = PropertyFlags {
        symplectic: symplectic_residual.is_zero(),
        symmetric: symmetric_residual.as_ref().is_some_and(Scalar::is_zero),
        energy_preserving: ep_residuals.iter().all(Scalar::is_zero),
    };
    PropertyReport {
        verified_order_direct: order.order,
        order_residuals: order.residuals,
        guaranteed_order: guaranteed_order_from(&breve),
        breve,
        symplectic_residual,
        symmetric_residual,
        ep_residuals,
        flags,
        h_bound_per_unit_l: stage_contraction_bound(m, 1.0),
    }
}

/// Verifies a batch of methods, fanning out per method.
pub fn verify_batch(methods: &[CsrkMethod], exec: Execution) -> Vec<PropertyReport> {
    exec::map(exec, methods, verify)
}
