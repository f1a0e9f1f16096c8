//! Quadrature rules and the map from a csRK method to a classical Butcher tableau.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::method::CsrkMethod;
use crate::verify::check_simplifying;

pub const MAX_STAGES: usize = 20;
const ORDER_TOL: f64 = 1e-12;
const PREDICTION_LEVEL_CAP: usize = 10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiscretizeError {
    #[error("{rule} rule needs {min} <= s <= {max}, got s = {s}")]
    StagesOutOfRange {
        rule: &'static str,
        s: usize,
        min: usize,
        max: usize,
    },
    #[error("invalid quadrature: {0}")]
    InvalidQuadrature(String),
    #[error("invalid tableau: {0}")]
    InvalidTableau(String),
    #[error("order prediction needs B = 1 and C = tau")]
    NotNormalized,
    #[error("tableau csv: {0}")]
    Csv(String),
}

/// Nodes and weights on `[0, 1]` with their moment order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Quadrature {
    pub id: String,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub order: usize,
}

#[derive(Deserialize)]
struct RawQuadrature {
    #[serde(default)]
    id: Option<String>,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl<'de> Deserialize<'de> for Quadrature {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = RawQuadrature::deserialize(d)?;
        Quadrature::custom(raw.id.unwrap_or_else(|| "custom".into()), raw.nodes, raw.weights)
            .map_err(serde::de::Error::custom)
    }
}

impl Quadrature {
    /// Validates and certifies a user-supplied rule.
    pub fn custom(
        id: impl Into<String>,
        nodes: Vec<f64>,
        weights: Vec<f64>,
    ) -> Result<Self, DiscretizeError> {
        let bad = |msg: &str| Err(DiscretizeError::InvalidQuadrature(msg.into()));
        if nodes.is_empty() || nodes.len() != weights.len() {
            return bad("nodes and weights must be nonempty and of equal length");
        }
        if nodes.iter().chain(&weights).any(|v| !v.is_finite()) {
            return bad("non-finite entry");
        }
        if nodes.iter().any(|&c| !(0.0..=1.0).contains(&c)) {
            return bad("nodes must lie in [0, 1]");
        }
        if nodes.windows(2).any(|w| w[0] >= w[1]) {
            return bad("nodes must be strictly increasing");
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-14 {
            return bad(&format!("weights sum to {total}, not 1"));
        }
        let mut q = Quadrature {
            id: id.into(),
            nodes,
            weights,
            order: 0,
        };
        q.order = quadrature_order(&q, 40);
        Ok(q)
    }

    pub fn stages(&self) -> usize {
        self.nodes.len()
    }

    /// `c_i + c_{s+1−i} = 1` and `b_i = b_{s+1−i}` to 1e-15.
    pub fn is_symmetric(&self) -> bool {
        let s = self.stages();
        (0..s).all(|i| {
            (self.nodes[i] + self.nodes[s - 1 - i] - 1.0).abs() <= 1e-15
                && (self.weights[i] - self.weights[s - 1 - i]).abs() <= 1e-15
        })
    }
}

/// `(P_n(x), P_n'(x))` for the classical Legendre polynomial on `[−1, 1]`.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let n = n as f64;
    let dp = n * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Mirrors the lower half of a rule so the result is exactly symmetric about 1/2.
fn symmetrize(nodes: &mut [f64], weights: &mut [f64]) {
    let s = nodes.len();
    for i in 0..s / 2 {
        nodes[s - 1 - i] = 1.0 - nodes[i];
        weights[s - 1 - i] = weights[i];
    }
    if s % 2 == 1 {
        nodes[s / 2] = 0.5;
    }
}

/// Gauss–Legendre rule with `s` nodes, order `2s`.
pub fn gauss_legendre(s: usize) -> Result<Quadrature, DiscretizeError> {
    if !(1..=MAX_STAGES).contains(&s) {
        return Err(DiscretizeError::StagesOutOfRange {
            rule: "gauss",
            s,
            min: 1,
            max: MAX_STAGES,
        });
    }
    let mut nodes = vec![0.0; s];
    let mut weights = vec![0.0; s];
    for k in 0..s {
        // descending roots of P_s, so node k lands at ascending position k
        let mut x = (std::f64::consts::PI * (k as f64 + 0.75) / (s as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(s, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(s, x);
        nodes[s - 1 - k] = (1.0 + x) / 2.0;
        weights[s - 1 - k] = 1.0 / ((1.0 - x * x) * dp * dp);
    }
    symmetrize(&mut nodes, &mut weights);
    Ok(Quadrature {
        id: format!("gauss-{s}"),
        order: quadrature_order_raw(&nodes, &weights, 40),
        nodes,
        weights,
    })
}

/// Gauss–Lobatto rule with `s ≥ 2` nodes including both endpoints, order `2s − 2`.
pub fn lobatto(s: usize) -> Result<Quadrature, DiscretizeError> {
    if !(2..=MAX_STAGES).contains(&s) {
        return Err(DiscretizeError::StagesOutOfRange {
            rule: "lobatto",
            s,
            min: 2,
            max: MAX_STAGES,
        });
    }
    let n = s - 1;
    let nf = n as f64;
    let mut nodes = vec![0.0; s];
    let mut weights = vec![0.0; s];
    nodes[s - 1] = 1.0;
    weights[0] = 1.0 / (nf * (nf + 1.0));
    weights[s - 1] = weights[0];
    // interior nodes are the roots of P_n'
    for k in 1..n {
        let mut x = -(std::f64::consts::PI * k as f64 / nf).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(n, x);
            let d2p = (2.0 * x * dp - nf * (nf + 1.0) * p) / (1.0 - x * x);
            let dx = dp / d2p;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (p, _) = legendre_with_derivative(n, x);
        nodes[k] = (1.0 + x) / 2.0;
        weights[k] = 1.0 / (nf * (nf + 1.0) * p * p);
    }
    symmetrize(&mut nodes, &mut weights);
    Ok(Quadrature {
        id: format!("lobatto-{s}"),
        order: quadrature_order_raw(&nodes, &weights, 40),
        nodes,
        weights,
    })
}

fn quadrature_order_raw(nodes: &[f64], weights: &[f64], cap: usize) -> usize {
    (1..=cap)
        .take_while(|&k| {
            let moment: f64 = nodes
                .iter()
                .zip(weights)
                .map(|(c, b)| b * c.powi(k as i32 - 1))
                .sum();
            (moment - 1.0 / k as f64).abs() <= ORDER_TOL
        })
        .last()
        .unwrap_or(0)
}

/// Largest `p ≤ cap` with `Σ b_i c_i^{k−1} = 1/k` for every `k ≤ p`, to 1e-12.
pub fn quadrature_order(q: &Quadrature, cap: usize) -> usize {
    quadrature_order_raw(&q.nodes, &q.weights, cap)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub method: String,
    pub quadrature: String,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} @ {}", self.method, self.quadrature)
    }
}

/// A classical `s`-stage Runge–Kutta method.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ButcherTableau {
    pub s: usize,
    pub c: Vec<f64>,
    pub b: Vec<f64>,
    pub a: Vec<Vec<f64>>,
    pub provenance: Provenance,
}

#[derive(Deserialize)]
struct RawTableau {
    #[serde(default)]
    s: Option<usize>,
    c: Vec<f64>,
    b: Vec<f64>,
    a: Vec<Vec<f64>>,
    provenance: Provenance,
}

impl<'de> Deserialize<'de> for ButcherTableau {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = RawTableau::deserialize(d)?;
        if raw.s.is_some_and(|s| s != raw.c.len()) {
            return Err(serde::de::Error::custom("stage count disagrees with c"));
        }
        ButcherTableau::new(raw.a, raw.b, raw.c, raw.provenance).map_err(serde::de::Error::custom)
    }
}

impl ButcherTableau {
    pub fn new(
        a: Vec<Vec<f64>>,
        b: Vec<f64>,
        c: Vec<f64>,
        provenance: Provenance,
    ) -> Result<Self, DiscretizeError> {
        let s = c.len();
        if s == 0 || b.len() != s || a.len() != s || a.iter().any(|row| row.len() != s) {
            return Err(DiscretizeError::InvalidTableau(format!(
                "shape mismatch: |c| = {s}, |b| = {}, a is {}x?",
                b.len(),
                a.len()
            )));
        }
        if a.iter().flatten().chain(&b).chain(&c).any(|v| !v.is_finite()) {
            return Err(DiscretizeError::InvalidTableau("non-finite entry".into()));
        }
        Ok(Self {
            s,
            c,
            b,
            a,
            provenance,
        })
    }

    /// Forward Euler, a one-stage explicit method.
    pub fn explicit_euler() -> Self {
        Self::new(
            vec![vec![0.0]],
            vec![1.0],
            vec![0.0],
            Provenance {
                method: "explicit-euler".into(),
                quadrature: "none".into(),
            },
        )
        .unwrap()
    }

    pub fn is_explicit(&self) -> bool {
        (0..self.s).all(|i| self.a[i][i..].iter().all(|&v| v == 0.0))
    }

    /// One row per stage: `c_i, b_i, a_i1..a_is`, shortest round-trip decimals.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("c,b");
        for j in 1..=self.s {
            out.push_str(&format!(",a{j}"));
        }
        out.push('\n');
        for i in 0..self.s {
            let row: Vec<String> = [self.c[i], self.b[i]]
                .iter()
                .chain(&self.a[i])
                .map(|v| v.to_string())
                .collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str, provenance: Provenance) -> Result<Self, DiscretizeError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        lines
            .next()
            .filter(|h| h.trim_start().starts_with('c'))
            .ok_or_else(|| DiscretizeError::Csv("missing header".into()))?;
        let (mut a, mut b, mut c) = (Vec::new(), Vec::new(), Vec::new());
        for (k, line) in lines.enumerate() {
            let vals = line
                .split(',')
                .map(|f| f.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| DiscretizeError::Csv(format!("row {}: {e}", k + 1)))?;
            if vals.len() < 2 {
                return Err(DiscretizeError::Csv(format!("row {} too short", k + 1)));
            }
            c.push(vals[0]);
            b.push(vals[1]);
            a.push(vals[2..].to_vec());
        }
        Self::new(a, b, c, provenance)
    }
}

/// `a_ij = b_j A(c_i, c_j)`, `b̂_i = b_i B(c_i)`, stage nodes `c_i`.
pub fn discretize(m: &CsrkMethod, q: &Quadrature) -> ButcherTableau {
    let s = q.stages();
    let a = (0..s)
        .map(|i| {
            (0..s)
                .map(|j| q.weights[j] * m.eval_a_f64(q.nodes[i], q.nodes[j]))
                .collect()
        })
        .collect();
    let b = (0..s).map(|i| q.weights[i] * m.eval_b_f64(q.nodes[i])).collect();
    ButcherTableau::new(
        a,
        b,
        q.nodes.clone(),
        Provenance {
            method: m.label().to_owned(),
            quadrature: q.id.clone(),
        },
    )
    .expect("finite method and rule give a finite tableau")
}

/// Lower bound on the classical order of `discretize(m, q)`:
/// `min(p, 2α+2, α+β+1)` with `α = min(η, p − π^σ)`, `β = min(ζ, p − π^τ)`.
pub fn predicted_rk_order(m: &CsrkMethod, q: &Quadrature) -> Result<usize, DiscretizeError> {
    if !m.is_normalized() {
        return Err(DiscretizeError::NotNormalized);
    }
    let levels = check_simplifying(m, PREDICTION_LEVEL_CAP);
    let p = q.order as i64;
    let alpha = (levels.c as i64).min(p - m.degree_sigma() as i64).max(0);
    let beta = (levels.d as i64).min(p - m.degree_tau() as i64).max(0);
    Ok(p.min(2 * alpha + 2).min(alpha + beta + 1) as usize)
}

/// `max_ij |b_i a_ij + b_j a_ji − b_i b_j|`.
pub fn rk_symplectic_residual(t: &ButcherTableau) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..t.s {
        for j in 0..t.s {
            let m = t.b[i] * t.a[i][j] + t.b[j] * t.a[j][i] - t.b[i] * t.b[j];
            worst = worst.max(m.abs());
        }
    }
    worst
}

/// `max_ij |a_{s+1−i, s+1−j} + a_ij − b_j|`, zero for a symmetric tableau on symmetric nodes.
pub fn rk_symmetry_residual(t: &ButcherTableau) -> f64 {
    let s = t.s;
    let mut worst: f64 = 0.0;
    for i in 0..s {
        for j in 0..s {
            let r = t.a[s - 1 - i][s - 1 - j] + t.a[i][j] - t.b[j];
            worst = worst.max(r.abs());
        }
    }
    worst
}
