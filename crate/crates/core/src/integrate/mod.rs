//! Implicit Runge–Kutta stepping of tableaus and the empirical diagnostics
//! (convergence order, energy drift, reversibility, symplecticity).

mod problem;

pub use problem::{builtin_problem, OdeProblem, ProblemParams, Rhs, Solution, StateFn, BUILTIN_PROBLEMS};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::discretize::ButcherTableau;
use crate::exec::{self, Execution};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntegrateError {
    #[error(
        "stage iteration did not converge in {iterations} iterations (last increment {increment:e}){}",
        advisory_suffix(*advisory_h)
    )]
    NonConvergence {
        iterations: usize,
        increment: f64,
        advisory_h: Option<f64>,
    },
    #[error("non-finite stage values")]
    NonFinite,
    #[error("step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<IntegrateError>,
    },
    #[error("problem has no Hamiltonian")]
    MissingHamiltonian,
    #[error("problem has no invariant named {0}")]
    MissingInvariant(String),
    #[error("rhs disagrees with the Hamiltonian vector field by {mismatch:e} at {state:?}")]
    HamiltonianMismatch { state: Vec<f64>, mismatch: f64 },
    #[error("unknown problem {0:?}")]
    UnknownProblem(String),
    #[error("expected state dimension {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("{0}")]
    InvalidArgument(String),
}

fn advisory_suffix(h: Option<f64>) -> String {
    match h {
        Some(h) => format!("; fixed-point contraction is guaranteed only for h < {h:.6}"),
        None => String::new(),
    }
}

impl IntegrateError {
    /// The error with any step wrapper removed.
    pub fn root(&self) -> &IntegrateError {
        match self {
            IntegrateError::AtStep { source, .. } => source.root(),
            other => other,
        }
    }

    pub fn is_non_convergence(&self) -> bool {
        matches!(self.root(), IntegrateError::NonConvergence { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Solver {
    #[default]
    FixedPoint,
    /// Newton on the full stage system with a finite-difference Jacobian.
    Newton,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepperConfig {
    /// Max-norm bound on successive stage iterates.
    pub tol: f64,
    pub max_iter: usize,
    pub solver: Solver,
}

impl Default for StepperConfig {
    fn default() -> Self {
        Self {
            tol: 1e-14,
            max_iter: 100,
            solver: Solver::FixedPoint,
        }
    }
}

impl StepperConfig {
    pub fn newton() -> Self {
        Self {
            solver: Solver::Newton,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<(), IntegrateError> {
        if !(self.tol > 0.0) || self.max_iter == 0 {
            return Err(IntegrateError::InvalidArgument(format!(
                "stepper needs tol > 0 and max_iter >= 1, got {} and {}",
                self.tol, self.max_iter
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub z: Vec<f64>,
    pub iterations: usize,
}

/// `1 / (L · max_i Σ_j |a_ij|)`, the tableau counterpart of the stage contraction bound.
pub fn tableau_contraction_bound(t: &ButcherTableau, lipschitz: f64) -> f64 {
    let norm = t
        .a
        .iter()
        .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    1.0 / (lipschitz * norm)
}

fn max_norm_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn all_finite(v: &[Vec<f64>]) -> bool {
    v.iter().flatten().all(|x| x.is_finite())
}

/// One step with signed `h`; `h < 0` steps backward in time.
fn step_signed(
    t: &ButcherTableau,
    p: &OdeProblem,
    tn: f64,
    zn: &[f64],
    h: f64,
    cfg: &StepperConfig,
) -> Result<StepResult, IntegrateError> {
    cfg.validate()?;
    if zn.len() != p.dim() {
        return Err(IntegrateError::DimensionMismatch {
            expected: p.dim(),
            found: zn.len(),
        });
    }
    if h == 0.0 {
        return Ok(StepResult {
            z: zn.to_vec(),
            iterations: 0,
        });
    }
    let s = t.s;
    let d = zn.len();
    let times: Vec<f64> = t.c.iter().map(|c| tn + c * h).collect();
    let mut stages = vec![zn.to_vec(); s];
    let mut derivs: Vec<Vec<f64>> = (0..s).map(|j| p.rhs(times[j], &stages[j])).collect();
    let mut iterations = 0;
    let mut increment = f64::INFINITY;
    while iterations < cfg.max_iter {
        iterations += 1;
        let next: Vec<Vec<f64>> = match cfg.solver {
            Solver::FixedPoint => (0..s)
                .map(|i| {
                    let mut u = zn.to_vec();
                    for j in 0..s {
                        let w = h * t.a[i][j];
                        if w != 0.0 {
                            for k in 0..d {
                                u[k] += w * derivs[j][k];
                            }
                        }
                    }
                    u
                })
                .collect(),
            Solver::Newton => newton_update(t, p, &times, zn, h, &stages, &derivs),
        };
        if !all_finite(&next) {
            return Err(IntegrateError::NonFinite);
        }
        increment = stages
            .iter()
            .zip(&next)
            .map(|(a, b)| max_norm_diff(a, b))
            .fold(0.0, f64::max);
        let scale = next.iter().flatten().fold(1.0f64, |m, x| m.max(x.abs()));
        stages = next;
        derivs = (0..s).map(|j| p.rhs(times[j], &stages[j])).collect();
        if !all_finite(&derivs) {
            return Err(IntegrateError::NonFinite);
        }
        // successive iterates cannot agree below a few ulps of the stage magnitude
        if increment <= cfg.tol.max(8.0 * f64::EPSILON * scale) {
            let mut z = zn.to_vec();
            for i in 0..s {
                for k in 0..d {
                    z[k] += h * t.b[i] * derivs[i][k];
                }
            }
            if z.iter().any(|x| !x.is_finite()) {
                return Err(IntegrateError::NonFinite);
            }
            return Ok(StepResult { z, iterations });
        }
    }
    Err(IntegrateError::NonConvergence {
        iterations,
        increment,
        advisory_h: p.lipschitz.map(|l| tableau_contraction_bound(t, l)),
    })
}

/// One Newton update of all stages for `G(U) = U − z − h (A ⊗ I) F(U) = 0`.
fn newton_update(
    t: &ButcherTableau,
    p: &OdeProblem,
    times: &[f64],
    zn: &[f64],
    h: f64,
    stages: &[Vec<f64>],
    derivs: &[Vec<f64>],
) -> Vec<Vec<f64>> {
    let s = t.s;
    let d = zn.len();
    let n = s * d;
    let jacobians: Vec<DMatrix<f64>> = (0..s)
        .map(|j| {
            let mut jac = DMatrix::zeros(d, d);
            let mut w = stages[j].clone();
            for k in 0..d {
                let delta = 1e-7 * stages[j][k].abs().max(1.0);
                w[k] = stages[j][k] + delta;
                let up = p.rhs(times[j], &w);
                w[k] = stages[j][k] - delta;
                let down = p.rhs(times[j], &w);
                w[k] = stages[j][k];
                for r in 0..d {
                    jac[(r, k)] = (up[r] - down[r]) / (2.0 * delta);
                }
            }
            jac
        })
        .collect();
    let mut matrix = DMatrix::<f64>::identity(n, n);
    let mut rhs = DVector::<f64>::zeros(n);
    for i in 0..s {
        for k in 0..d {
            let mut g = stages[i][k] - zn[k];
            for j in 0..s {
                g -= h * t.a[i][j] * derivs[j][k];
            }
            rhs[i * d + k] = -g;
        }
        for j in 0..s {
            let w = h * t.a[i][j];
            if w == 0.0 {
                continue;
            }
            for r in 0..d {
                for c in 0..d {
                    matrix[(i * d + r, j * d + c)] -= w * jacobians[j][(r, c)];
                }
            }
        }
    }
    let delta = matrix
        .lu()
        .solve(&rhs)
        .unwrap_or_else(|| DVector::from_element(n, f64::NAN));
    (0..s)
        .map(|i| (0..d).map(|k| stages[i][k] + delta[i * d + k]).collect())
        .collect()
}

/// One step of size `h > 0` from `(tn, zn)`; stages start from `zn`.
pub fn rk_step(
    t: &ButcherTableau,
    p: &OdeProblem,
    tn: f64,
    zn: &[f64],
    h: f64,
    cfg: &StepperConfig,
) -> Result<StepResult, IntegrateError> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(IntegrateError::InvalidArgument(format!("step size must be positive, got {h}")));
    }
    step_signed(t, p, tn, zn, h, cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub h: f64,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// Stage iterations per step; entry 0 belongs to the initial state.
    pub iterations: Vec<usize>,
}

impl Trajectory {
    pub fn final_state(&self) -> &[f64] {
        self.states.last().expect("trajectory holds the initial state")
    }

    pub fn steps(&self) -> usize {
        self.states.len() - 1
    }

    /// Header `t,z1..zd,iters`, one row per stored state.
    pub fn to_csv(&self) -> String {
        let d = self.states[0].len();
        let mut out = String::from("t");
        for k in 1..=d {
            out.push_str(&format!(",z{k}"));
        }
        out.push_str(",iters\n");
        for ((t, z), it) in self.times.iter().zip(&self.states).zip(&self.iterations) {
            out.push_str(&t.to_string());
            for v in z {
                out.push(',');
                out.push_str(&v.to_string());
            }
            out.push_str(&format!(",{it}\n"));
        }
        out
    }
}

/// `n_steps` steps of size `h` from the problem's initial state.
pub fn integrate(
    t: &ButcherTableau,
    p: &OdeProblem,
    h: f64,
    n_steps: usize,
    cfg: &StepperConfig,
) -> Result<Trajectory, IntegrateError> {
    if n_steps == 0 {
        return Err(IntegrateError::InvalidArgument("n_steps must be at least 1".into()));
    }
    let mut traj = Trajectory {
        h,
        times: Vec::with_capacity(n_steps + 1),
        states: Vec::with_capacity(n_steps + 1),
        iterations: Vec::with_capacity(n_steps + 1),
    };
    traj.times.push(p.t0);
    traj.states.push(p.z0.clone());
    traj.iterations.push(0);
    for n in 0..n_steps {
        let tn = p.t0 + n as f64 * h;
        let step = rk_step(t, p, tn, &traj.states[n], h, cfg).map_err(|e| IntegrateError::AtStep {
            step: n,
            source: Box::new(e),
        })?;
        traj.times.push(p.t0 + (n + 1) as f64 * h);
        traj.states.push(step.z);
        traj.iterations.push(step.iterations);
    }
    Ok(traj)
}

/// Errors below this are treated as round-off, not truncation.
pub const ERROR_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reference {
    /// Exact solution when available, otherwise a refined run.
    #[default]
    Auto,
    Exact,
    /// The same tableau at `h_min / 8`.
    Refined,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderEstimate {
    pub h: Vec<f64>,
    pub errors: Vec<f64>,
    /// `log2(e_k / e_{k+1}) / log2(h_k / h_{k+1})` for consecutive pairs.
    pub pairwise_ratios: Vec<f64>,
    /// Least-squares slope of `log e` against `log h`; `None` when saturated.
    pub slope: Option<f64>,
    pub saturated: bool,
}

/// Global error at `t_final` over a geometric sequence of step sizes.
pub fn empirical_order(
    t: &ButcherTableau,
    p: &OdeProblem,
    h_list: &[f64],
    t_final: f64,
    cfg: &StepperConfig,
    reference: Reference,
    execution: Execution,
) -> Result<OrderEstimate, IntegrateError> {
    let invalid = |m: String| Err(IntegrateError::InvalidArgument(m));
    if h_list.len() < 3 {
        return invalid(format!("need at least 3 step sizes, got {}", h_list.len()));
    }
    if h_list.iter().any(|h| !(*h > 0.0)) || h_list.windows(2).any(|w| w[1] >= w[0]) {
        return invalid("step sizes must be positive and strictly decreasing".into());
    }
    let ratio = h_list[0] / h_list[1];
    if h_list.windows(2).any(|w| ((w[0] / w[1]) / ratio - 1.0).abs() > 1e-9) {
        return invalid("step sizes must decrease geometrically".into());
    }
    let steps_for = |h: f64| -> Result<usize, IntegrateError> {
        let n = (t_final / h).round();
        if n < 1.0 || (n * h - t_final).abs() > 1e-9 * t_final.abs().max(1.0) {
            return Err(IntegrateError::InvalidArgument(format!(
                "h = {h} does not divide t_final = {t_final}"
            )));
        }
        Ok(n as usize)
    };
    let use_exact = match reference {
        Reference::Exact if !p.has_exact() => {
            return invalid(format!("{} has no exact solution", p.name));
        }
        Reference::Exact => true,
        Reference::Refined => false,
        Reference::Auto => p.has_exact(),
    };
    let h_ref = h_list[h_list.len() - 1] / 8.0;
    let mut runs: Vec<(f64, usize)> = h_list
        .iter()
        .map(|&h| Ok((h, steps_for(h)?)))
        .collect::<Result<_, IntegrateError>>()?;
    if !use_exact {
        runs.push((h_ref, steps_for(h_ref)?));
    }
    let finals = exec::map(execution, &runs, |&(h, n)| {
        integrate(t, p, h, n, cfg).map(|tr| tr.final_state().to_vec())
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    let reference_state = if use_exact {
        p.exact(p.t0 + t_final).expect("checked above")
    } else {
        finals[finals.len() - 1].clone()
    };
    let errors: Vec<f64> = finals[..h_list.len()]
        .iter()
        .map(|z| max_norm_diff(z, &reference_state))
        .collect();
    let saturated = errors.iter().any(|&e| e < ERROR_FLOOR);
    let pairwise_ratios = errors
        .windows(2)
        .zip(h_list.windows(2))
        .map(|(e, h)| (e[0] / e[1]).log2() / (h[0] / h[1]).log2())
        .collect();
    let slope = (!saturated).then(|| {
        let xs: Vec<f64> = h_list.iter().map(|h| h.ln()).collect();
        let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
        let n = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        sxy / sxx
    });
    Ok(OrderEstimate {
        h: h_list.to_vec(),
        errors,
        pairwise_ratios,
        slope,
        saturated,
    })
}

/// `max_n |H(z_n) − H(z_0)|`.
pub fn energy_drift(traj: &Trajectory, p: &OdeProblem) -> Result<f64, IntegrateError> {
    let h0 = p.energy(&traj.states[0]).ok_or(IntegrateError::MissingHamiltonian)?;
    Ok(traj
        .states
        .iter()
        .map(|z| (p.energy(z).unwrap() - h0).abs())
        .fold(0.0, f64::max))
}

/// `max_n |Q(z_n) − Q(z_0)|` for a named invariant `Q`.
pub fn invariant_drift(traj: &Trajectory, p: &OdeProblem, name: &str) -> Result<f64, IntegrateError> {
    let (_, q) = p
        .invariants()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| IntegrateError::MissingInvariant(name.to_owned()))?;
    let q0 = q(&traj.states[0]);
    Ok(traj.states.iter().map(|z| (q(z) - q0).abs()).fold(0.0, f64::max))
}

/// `‖Φ_{−h}(Φ_h(z)) − z‖∞`, starting at the problem's initial time.
pub fn symmetry_residual(
    t: &ButcherTableau,
    p: &OdeProblem,
    z: &[f64],
    h: f64,
    cfg: &StepperConfig,
) -> Result<f64, IntegrateError> {
    let forward = step_signed(t, p, p.t0, z, h, cfg)?;
    let back = step_signed(t, p, p.t0 + h, &forward.z, -h, cfg)?;
    Ok(max_norm_diff(&back.z, z))
}

/// `max |Ψᵀ J Ψ − J|` for the one-step Jacobian `Ψ`, by central differences
/// with increment 1e-6.
pub fn symplecticity_residual(
    t: &ButcherTableau,
    p: &OdeProblem,
    z: &[f64],
    h: f64,
    cfg: &StepperConfig,
) -> Result<f64, IntegrateError> {
    if !p.is_hamiltonian() {
        return Err(IntegrateError::MissingHamiltonian);
    }
    if h == 0.0 {
        // Ψ = I exactly; differencing would only add round-off
        return Ok(0.0);
    }
    let n = z.len();
    let half = n / 2;
    let delta = 1e-6;
    let mut psi = DMatrix::<f64>::zeros(n, n);
    let mut w = z.to_vec();
    for k in 0..n {
        w[k] = z[k] + delta;
        let up = step_signed(t, p, p.t0, &w, h, cfg)?.z;
        w[k] = z[k] - delta;
        let down = step_signed(t, p, p.t0, &w, h, cfg)?.z;
        w[k] = z[k];
        for r in 0..n {
            psi[(r, k)] = (up[r] - down[r]) / (2.0 * delta);
        }
    }
    let mut j = DMatrix::<f64>::zeros(n, n);
    for i in 0..half {
        j[(i, half + i)] = 1.0;
        j[(half + i, i)] = -1.0;
    }
    let defect = psi.transpose() * &j * &psi - &j;
    Ok(defect.amax())
}

/// Diagnostics sidecar for integration and convergence runs.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Diagnostics {
    pub empirical_order: Option<f64>,
    pub pairwise_ratios: Vec<f64>,
    pub energy_drift: Option<f64>,
    pub symmetry_residual: Option<f64>,
    pub symplecticity_residual: Option<f64>,
    #[serde(skip_serializing_if = "std::collections::BTreeMap::is_empty")]
    pub invariant_drift: std::collections::BTreeMap<String, f64>,
}
