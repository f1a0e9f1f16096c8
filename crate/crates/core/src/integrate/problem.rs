use std::fmt;
use std::sync::Arc;

use super::IntegrateError;

pub type Rhs = Arc<dyn Fn(f64, &[f64]) -> Vec<f64> + Send + Sync>;
pub type StateFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type Solution = Arc<dyn Fn(f64) -> Vec<f64> + Send + Sync>;

/// An initial value problem `ż = f(t, z)`, optionally Hamiltonian.
///
/// Hamiltonian states are ordered `z = (q, p)` with `ż = (∂H/∂p, −∂H/∂q)`.
#[derive(Clone)]
pub struct OdeProblem {
    pub name: String,
    pub z0: Vec<f64>,
    pub t0: f64,
    /// Lipschitz estimate used only for step-size advice.
    pub lipschitz: Option<f64>,
    rhs: Rhs,
    hamiltonian: Option<StateFn>,
    invariants: Vec<(String, StateFn)>,
    exact: Option<Solution>,
}

impl fmt::Debug for OdeProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OdeProblem")
            .field("name", &self.name)
            .field("z0", &self.z0)
            .field("t0", &self.t0)
            .field("lipschitz", &self.lipschitz)
            .field("hamiltonian", &self.hamiltonian.is_some())
            .field(
                "invariants",
                &self.invariants.iter().map(|(n, _)| n).collect::<Vec<_>>(),
            )
            .field("exact", &self.exact.is_some())
            .finish()
    }
}

impl OdeProblem {
    pub fn new(
        name: impl Into<String>,
        z0: Vec<f64>,
        rhs: impl Fn(f64, &[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            z0,
            t0: 0.0,
            lipschitz: None,
            rhs: Arc::new(rhs),
            hamiltonian: None,
            invariants: Vec::new(),
            exact: None,
        }
    }

    /// Attaches `H` after checking `f = (∂H/∂p, −∂H/∂q)` by central differences
    /// at ten states scattered around `z0`.
    pub fn with_hamiltonian(
        mut self,
        h: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Result<Self, IntegrateError> {
        let d = self.dim();
        if d % 2 != 0 {
            return Err(IntegrateError::InvalidArgument(format!(
                "a Hamiltonian problem needs even dimension, got {d}"
            )));
        }
        let h: StateFn = Arc::new(h);
        for k in 1..=10 {
            // Kronecker sequence, deterministic and well spread
            let z: Vec<f64> = (0..d)
                .map(|i| {
                    let step = (2.0 + i as f64).sqrt().fract();
                    self.z0[i] + 0.2 * ((k as f64 * step).fract() - 0.5)
                })
                .collect();
            let grad = fd_gradient(&*h, &z);
            let f = self.rhs(self.t0, &z);
            let half = d / 2;
            for i in 0..half {
                let mismatch = (f[i] - grad[half + i])
                    .abs()
                    .max((f[half + i] + grad[i]).abs());
                if mismatch > 1e-8 {
                    return Err(IntegrateError::HamiltonianMismatch {
                        state: z,
                        mismatch,
                    });
                }
            }
        }
        self.hamiltonian = Some(h);
        Ok(self)
    }

    pub fn with_invariant(
        mut self,
        name: impl Into<String>,
        q: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.invariants.push((name.into(), Arc::new(q)));
        self
    }

    pub fn with_exact(mut self, sol: impl Fn(f64) -> Vec<f64> + Send + Sync + 'static) -> Self {
        self.exact = Some(Arc::new(sol));
        self
    }

    pub fn with_lipschitz(mut self, l: f64) -> Self {
        self.lipschitz = Some(l);
        self
    }

    pub fn dim(&self) -> usize {
        self.z0.len()
    }

    pub fn rhs(&self, t: f64, z: &[f64]) -> Vec<f64> {
        (self.rhs)(t, z)
    }

    pub fn is_hamiltonian(&self) -> bool {
        self.hamiltonian.is_some()
    }

    pub fn energy(&self, z: &[f64]) -> Option<f64> {
        self.hamiltonian.as_ref().map(|h| h(z))
    }

    pub fn invariants(&self) -> impl Iterator<Item = (&str, &StateFn)> {
        self.invariants.iter().map(|(n, q)| (n.as_str(), q))
    }

    pub fn exact(&self, t: f64) -> Option<Vec<f64>> {
        self.exact.as_ref().map(|s| s(t))
    }

    pub fn has_exact(&self) -> bool {
        self.exact.is_some()
    }
}

fn fd_gradient(h: &(dyn Fn(&[f64]) -> f64 + Send + Sync), z: &[f64]) -> Vec<f64> {
    let delta = 1e-6;
    let mut w = z.to_vec();
    (0..z.len())
        .map(|i| {
            w[i] = z[i] + delta;
            let up = h(&w);
            w[i] = z[i] - delta;
            let down = h(&w);
            w[i] = z[i];
            (up - down) / (2.0 * delta)
        })
        .collect()
}

/// Optional overrides for [`builtin_problem`].
#[derive(Debug, Clone, Default)]
pub struct ProblemParams {
    /// Initial state; harmonic defaults to `(1, 0)`, pendulum to `(0, 1.5)`.
    pub z0: Option<Vec<f64>>,
    /// Kepler eccentricity, default 0.6.
    pub eccentricity: Option<f64>,
}

pub const BUILTIN_PROBLEMS: [&str; 3] = ["harmonic", "pendulum", "kepler"];

pub fn builtin_problem(name: &str, params: &ProblemParams) -> Result<OdeProblem, IntegrateError> {
    let check_dim = |z: &[f64], d: usize| {
        if z.len() == d {
            Ok(())
        } else {
            Err(IntegrateError::DimensionMismatch {
                expected: d,
                found: z.len(),
            })
        }
    };
    match name {
        "harmonic" => {
            let z0 = params.z0.clone().unwrap_or_else(|| vec![1.0, 0.0]);
            check_dim(&z0, 2)?;
            let (q0, p0) = (z0[0], z0[1]);
            OdeProblem::new("harmonic", z0, |_, z| vec![z[1], -z[0]])
                .with_exact(move |t| {
                    let (s, c) = t.sin_cos();
                    vec![q0 * c + p0 * s, p0 * c - q0 * s]
                })
                .with_lipschitz(1.0)
                .with_hamiltonian(|z| 0.5 * (z[0] * z[0] + z[1] * z[1]))
        }
        "pendulum" => {
            let z0 = params.z0.clone().unwrap_or_else(|| vec![0.0, 1.5]);
            check_dim(&z0, 2)?;
            OdeProblem::new("pendulum", z0, |_, z| vec![z[1], -z[0].sin()])
                .with_lipschitz(1.0)
                .with_hamiltonian(|z| 0.5 * z[1] * z[1] - z[0].cos())
        }
        "kepler" => {
            let e = params.eccentricity.unwrap_or(0.6);
            if !(0.0..1.0).contains(&e) {
                return Err(IntegrateError::InvalidArgument(format!(
                    "kepler needs 0 <= e < 1, got {e}"
                )));
            }
            let start = vec![1.0 - e, 0.0, 0.0, ((1.0 + e) / (1.0 - e)).sqrt()];
            let custom = params.z0.clone();
            let z0 = custom.clone().unwrap_or(start);
            check_dim(&z0, 4)?;
            let r_min = (z0[0] * z0[0] + z0[1] * z0[1]).sqrt().min(1.0 - e);
            let mut problem = OdeProblem::new("kepler", z0, |_, z| {
                let r3 = (z[0] * z[0] + z[1] * z[1]).powf(1.5);
                vec![z[2], z[3], -z[0] / r3, -z[1] / r3]
            })
            .with_lipschitz(2.0 / r_min.powi(3))
            .with_invariant("angular_momentum", |z| z[0] * z[3] - z[1] * z[2]);
            if custom.is_none() {
                problem = problem.with_exact(move |t| kepler_orbit(e, t));
            }
            problem.with_hamiltonian(|z| {
                0.5 * (z[2] * z[2] + z[3] * z[3]) - 1.0 / (z[0] * z[0] + z[1] * z[1]).sqrt()
            })
        }
        other => Err(IntegrateError::UnknownProblem(other.to_owned())),
    }
}

/// Unit semi-major-axis orbit starting at perihelion, from Kepler's equation.
fn kepler_orbit(e: f64, t: f64) -> Vec<f64> {
    let mean = t.rem_euclid(std::f64::consts::TAU);
    let mut ecc = if e > 0.8 { std::f64::consts::PI } else { mean };
    for _ in 0..50 {
        let dx = (ecc - e * ecc.sin() - mean) / (1.0 - e * ecc.cos());
        ecc -= dx;
        if dx.abs() < 1e-16 {
            break;
        }
    }
    let (s, c) = ecc.sin_cos();
    let w = (1.0 - e * e).sqrt();
    let denom = 1.0 - e * c;
    vec![c - e, w * s, -s / denom, w * c / denom]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_starts() {
        let h = builtin_problem("harmonic", &ProblemParams::default()).unwrap();
        let z = h.exact(1.0).unwrap();
        assert!((z[0] - 1f64.cos()).abs() < 1e-15 && (z[1] + 1f64.sin()).abs() < 1e-15);
        let p = builtin_problem("pendulum", &ProblemParams::default()).unwrap();
        assert!((p.energy(&p.z0).unwrap() - 0.125).abs() < 1e-15);
        let k = builtin_problem("kepler", &ProblemParams::default()).unwrap();
        assert!((k.energy(&k.z0).unwrap() + 0.5).abs() < 1e-15);
        assert!(builtin_problem("kepler", &ProblemParams { eccentricity: Some(1.0), z0: None }).is_err());
        assert!(matches!(
            builtin_problem("lorenz", &ProblemParams::default()),
            Err(IntegrateError::UnknownProblem(_))
        ));
    }

    #[test]
    fn kepler_reference_is_consistent() {
        let k = builtin_problem("kepler", &ProblemParams::default()).unwrap();
        assert_eq!(k.exact(0.0).unwrap(), k.z0);
        let h0 = k.energy(&k.z0).unwrap();
        let (_, l) = k.invariants().next().unwrap();
        let l0 = l(&k.z0);
        for t in [0.3, 1.7, 4.0, 9.5] {
            let z = k.exact(t).unwrap();
            assert!((k.energy(&z).unwrap() - h0).abs() < 1e-14);
            assert!((l(&z) - l0).abs() < 1e-14);
        }
        let circ = builtin_problem("kepler", &ProblemParams { eccentricity: Some(0.0), z0: None })
            .unwrap();
        let back = circ.exact(std::f64::consts::TAU).unwrap();
        assert!(back.iter().zip(&circ.z0).all(|(a, b)| (a - b).abs() < 1e-14));
    }

    #[test]
    fn wrong_hamiltonian_is_rejected() {
        let p = OdeProblem::new("flipped", vec![1.0, 0.0], |_, z| vec![-z[1], z[0]]);
        assert!(matches!(
            p.with_hamiltonian(|z| 0.5 * (z[0] * z[0] + z[1] * z[1])),
            Err(IntegrateError::HamiltonianMismatch { .. })
        ));
    }
}
