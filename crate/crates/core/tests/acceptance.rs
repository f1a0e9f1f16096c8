//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the report reads top to bottom. The
//! process fails if any criterion fails, except those listed in `UNATTAINABLE`,
//! whose stated target contradicts the mathematics; they are still evaluated
//! at their stated tolerance and reported as FAIL.

mod common;

use std::time::Instant;

use common::*;
use csrk::discretize::{
    discretize, gauss_legendre, lobatto, predicted_rk_order, rk_symplectic_residual,
    ButcherTableau, Quadrature,
};
use csrk::exec::Execution;
use csrk::integrate::{
    builtin_problem, empirical_order, energy_drift, integrate, invariant_drift, rk_step,
    symmetry_residual, symplecticity_residual, OdeProblem, ProblemParams, Reference,
    StepperConfig, BUILTIN_PROBLEMS,
};
use csrk::legendre::{BivariatePoly, Scalar, UnivariatePoly};
use csrk::method::{
    average_vector_field, construct_ep_general, construct_ep_legendre, construct_order_by_order,
    construct_simplifying, construct_symmetric, construct_symplectic, minimal_symplectic,
    CsrkMethod, EpSpec, Entries,
};
use csrk::verify::{
    c_breve_defect, check_order_conditions, d_breve_defect, energy_preserving_defects,
    energy_preserving_residual, order_residuals_fast, order_residuals_general,
    stage_contraction_bound, symmetric_defect, symplectic_defect, verify,
};
use rand::Rng;

/// Criterion 9 asks for a contraction bound of 1.6 for `A = 1/2 + τ − σ`; the
/// row integral `∫|A(1,σ)| dσ` is exactly 1, so the bound is 1.
const UNATTAINABLE: &[u32] = &[9];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn s(x: &str) -> Scalar {
    x.parse().unwrap()
}

fn harmonic() -> OdeProblem {
    builtin_problem("harmonic", &ProblemParams::default()).unwrap()
}

fn pendulum() -> OdeProblem {
    builtin_problem("pendulum", &ProblemParams::default()).unwrap()
}

fn kepler() -> OdeProblem {
    builtin_problem("kepler", &ProblemParams::default()).unwrap()
}

fn gauss(k: usize) -> Quadrature {
    gauss_legendre(k).unwrap()
}

fn consistent(m: &CsrkMethod) -> bool {
    m.alpha().apply_sigma(&UnivariatePoly::constant(Scalar::one())) == *m.c()
}

fn criterion_1() -> Outcome {
    let mut r = rng(1);
    let mut count = 0;
    let mut bad = Vec::new();
    let mut check = |family: &str, m: CsrkMethod| {
        count += 1;
        if !consistent(&m) {
            bad.push(family.to_owned());
        }
    };
    for _ in 0..50 {
        let target = r.gen_range(2..=4u32);
        let mut free = Entries::new();
        for _ in 0..r.gen_range(0..4) {
            let (i, j) = (r.gen_range(1..5), r.gen_range(1..5));
            free.insert((i, j), small_scalar(&mut r));
        }
        check("order", construct_order_by_order(target, &free).unwrap());
    }
    for _ in 0..50 {
        let (a, b) = (r.gen_range(1..=4), r.gen_range(1..=4));
        let mut free = Entries::new();
        for _ in 0..r.gen_range(0..3) {
            let (i, j) = (r.gen_range(b..b + 3), r.gen_range(a..a + 3));
            free.insert((i, j), small_scalar(&mut r));
        }
        check("simplifying", construct_simplifying(a, b, &free).unwrap());
    }
    for _ in 0..50 {
        let n = r.gen_range(0..4);
        check("symplectic", construct_symplectic(&random_skew(&mut r, 5, n)).unwrap());
    }
    for _ in 0..50 {
        let n = r.gen_range(0..4);
        check("symmetric", construct_symmetric(&random_odd(&mut r, 5, n)).unwrap());
    }
    for _ in 0..50 {
        let mut omegas = vec![Scalar::one()];
        for _ in 0..r.gen_range(0..4) {
            omegas.push(small_scalar(&mut r));
        }
        check("ep-legendre", construct_ep_legendre(&EpSpec::legendre(omegas)).unwrap().0);
    }
    for _ in 0..50 {
        let n = r.gen_range(1..4);
        let omegas: Vec<Scalar> = (0..n).map(|_| small_scalar(&mut r)).collect();
        let generators: Vec<UnivariatePoly> = (0..n).map(|_| random_poly(&mut r, 3)).collect();
        check(
            "ep-general",
            construct_ep_general(&EpSpec::general(omegas, generators)).unwrap().method,
        );
    }
    outcome(
        bad.is_empty(),
        format!("{count} constructions over 6 families, {} inconsistent {bad:?}", bad.len()),
    )
}

fn criterion_2() -> Outcome {
    let mut r = rng(2);
    let r3_6 = s("1/6*sqrt(3)");
    let r3_12 = s("1/12*sqrt(3)");
    let r5_30 = s("1/30*sqrt(5)");
    let mut mismatches = 0;
    for _ in 0..50 {
        let m = random_normalized(&mut r, 4);
        let a = |i, j| m.coeff(i, j);
        let general = order_residuals_general(&m);
        let fast = order_residuals_fast(&m).unwrap();
        let n = m.alpha().rows().max(m.alpha().cols());
        let reductions = [
            s("1/2") * a(0, 0) + &r3_6 * a(0, 1) - s("1/6"),
            s("1/4") * a(0, 0) + &r3_12 * a(1, 0) + &r3_12 * a(0, 1) + s("1/12") * a(1, 1)
                - s("1/8"),
            s("1/3") * a(0, 0) + &r3_6 * a(0, 1) + &r5_30 * a(0, 2) - s("1/12"),
            s("1/2") * (0..n).map(|i| a(0, i) * a(i, 0)).sum::<Scalar>()
                + &r3_6 * (0..n).map(|i| a(0, i) * a(i, 1)).sum::<Scalar>()
                - s("1/24"),
        ];
        let same_reduced = [3, 5, 6, 7]
            .iter()
            .zip(&reductions)
            .all(|(&k, red)| general[k] == *red);
        if general != fast || !same_reduced {
            mismatches += 1;
        }
    }
    outcome(
        mismatches == 0,
        format!("50 random methods, fast path vs general path vs reduced relations: {mismatches} mismatches"),
    )
}

fn criterion_3() -> Outcome {
    let r = 3f64.sqrt() / 6.0;
    let want_a = [[0.25, 0.25 - r], [0.25 + r, 0.25]];
    let mut worst: f64 = 0.0;
    for (a, b) in [(1, 1), (2, 1)] {
        let t = discretize(&construct_simplifying(a, b, &Entries::new()).unwrap(), &gauss(2));
        for i in 0..2 {
            worst = worst.max((t.b[i] - 0.5).abs());
            for j in 0..2 {
                worst = worst.max((t.a[i][j] - want_a[i][j]).abs());
            }
        }
    }
    outcome(worst <= 1e-13, format!("max deviation from the 2-stage Gauss tableau {worst:.2e}"))
}

struct OrderCase {
    name: &'static str,
    method: CsrkMethod,
    certified: usize,
    stages: usize,
    problem: OdeProblem,
    h: [f64; 4],
    t_final: f64,
}

fn order_cases() -> Vec<OrderCase> {
    let (ep11, claims) = construct_ep_legendre(&EpSpec::legendre(vec![Scalar::one(); 2])).unwrap();
    let minimal = minimal_symplectic();
    let avf = average_vector_field();
    vec![
        OrderCase {
            name: "1/2+tau-sigma, gauss 2, harmonic",
            certified: check_order_conditions(&minimal).order as usize,
            method: minimal,
            stages: 2,
            problem: harmonic(),
            h: [0.2, 0.1, 0.05, 0.025],
            t_final: 1.0,
        },
        OrderCase {
            name: "AVF, gauss 3, pendulum",
            certified: check_order_conditions(&avf).order as usize,
            method: avf,
            stages: 3,
            problem: pendulum(),
            h: [0.2, 0.1, 0.05, 0.025],
            t_final: 2.0,
        },
        OrderCase {
            name: "omega=[1,1], gauss 4, pendulum",
            certified: claims.order,
            method: ep11,
            stages: 4,
            problem: pendulum(),
            h: [0.2, 0.1, 0.05, 0.025],
            t_final: 2.0,
        },
    ]
}

struct OrderRun {
    name: &'static str,
    certified: usize,
    predicted: usize,
    slope: f64,
}

fn order_runs() -> Vec<OrderRun> {
    order_cases()
        .into_iter()
        .map(|c| {
            let q = gauss(c.stages);
            let t = discretize(&c.method, &q);
            let est = empirical_order(
                &t,
                &c.problem,
                &c.h,
                c.t_final,
                &StepperConfig::default(),
                Reference::Auto,
                Execution::Parallel,
            )
            .unwrap();
            OrderRun {
                name: c.name,
                certified: c.certified,
                predicted: predicted_rk_order(&c.method, &q).unwrap(),
                slope: est.slope.unwrap_or(f64::NAN),
            }
        })
        .collect()
}

fn criterion_4(runs: &[OrderRun]) -> Outcome {
    let direct_avf = verify(&average_vector_field()).verified_order_direct;
    let mut pass = direct_avf == 2;
    let mut parts = Vec::new();
    for run in runs {
        let ok = (run.slope - run.certified as f64).abs() <= 0.2;
        pass &= ok;
        parts.push(format!("{}: certified {}, slope {:.3}", run.name, run.certified, run.slope));
    }
    pass &= runs.iter().map(|r| r.certified).collect::<Vec<_>>() == [4, 2, 4];
    outcome(pass, parts.join("; "))
}

fn criterion_5(runs: &[OrderRun]) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for run in runs {
        pass &= run.slope >= run.predicted as f64 - 0.2;
        parts.push(format!("{}: predicted {} <= {:.3}", run.name, run.predicted, run.slope));
    }
    let gap = &runs[0];
    let strict = gap.predicted == 3 && (gap.slope - 4.0).abs() <= 0.2;
    pass &= strict;
    parts.push(format!("strict gap reproduced: {strict}"));
    outcome(pass, parts.join("; "))
}

fn criterion_6() -> Outcome {
    let mut r = rng(6);
    let p = kepler();
    let cfg = StepperConfig::default();
    let (mut tab, mut drift, mut sympl): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for _ in 0..20 {
        let n = r.gen_range(1..5);
        let m = construct_symplectic(&random_skew(&mut r, 4, n)).unwrap();
        for k in 1..=3 {
            let t = discretize(&m, &gauss(k));
            tab = tab.max(rk_symplectic_residual(&t));
            let traj = match integrate(&t, &p, 0.01, 1000, &cfg) {
                Ok(tr) => tr,
                Err(e) => return outcome(false, format!("integration failed: {e}")),
            };
            drift = drift.max(invariant_drift(&traj, &p, "angular_momentum").unwrap());
            sympl = sympl.max(symplecticity_residual(&t, &p, &p.z0, 0.01, &cfg).unwrap());
        }
    }
    outcome(
        tab <= 1e-14 && drift <= 1e-10 && sympl <= 1e-8,
        format!(
            "60 tableaus: tableau residual {tab:.2e}, angular momentum drift {drift:.2e}, one-step symplecticity {sympl:.2e}"
        ),
    )
}

fn criterion_7() -> Outcome {
    let p = pendulum();
    let cfg = StepperConfig::default();
    let mut pass = true;
    let mut parts = Vec::new();
    for omegas in [vec![Scalar::one()], vec![Scalar::one(); 2]] {
        let (m, _) = construct_ep_legendre(&EpSpec::legendre(omegas.clone())).unwrap();
        let exact = energy_preserving_residual(&m).iter().all(Scalar::is_zero);
        let traj = integrate(&discretize(&m, &gauss(10)), &p, 0.1, 1000, &cfg).unwrap();
        let drift = energy_drift(&traj, &p).unwrap();
        pass &= exact && drift < 1e-10;
        let label = vec!["1"; omegas.len()].join(",");
        parts.push(format!("omega=[{label}]: exact {exact}, drift {drift:.2e}"));
    }
    let euler = integrate(&ButcherTableau::explicit_euler(), &p, 0.1, 1000, &cfg).unwrap();
    let control = energy_drift(&euler, &p).unwrap();
    pass &= control > 1e-3;
    parts.push(format!("explicit Euler drift {control:.2e}"));
    outcome(pass, parts.join("; "))
}

fn criterion_8() -> Outcome {
    let mut r = rng(8);
    let mut methods = vec![
        minimal_symplectic(),
        average_vector_field(),
        construct_ep_legendre(&EpSpec::legendre(vec![Scalar::one(); 2])).unwrap().0,
        construct_simplifying(2, 1, &Entries::new()).unwrap(),
    ];
    for _ in 0..4 {
        let n = r.gen_range(1..4);
        methods.push(construct_symmetric(&random_odd(&mut r, 4, n)).unwrap());
    }
    methods.retain(|m| verify(m).flags.symmetric);
    let mut rules: Vec<Quadrature> = (1..=4).map(gauss).collect();
    rules.extend((2..=4).map(|k| lobatto(k).unwrap()));
    let cfg = StepperConfig::default();
    let mut worst: f64 = 0.0;
    let (mut runs, mut newton_runs) = (0, 0);
    for m in &methods {
        for q in &rules {
            let t = discretize(m, q);
            for name in BUILTIN_PROBLEMS {
                let p = builtin_problem(name, &ProblemParams::default()).unwrap();
                // Newton is the fallback past the fixed-point contraction bound
                let result = symmetry_residual(&t, &p, &p.z0, 0.1, &cfg).or_else(|e| {
                    if e.is_non_convergence() {
                        newton_runs += 1;
                        symmetry_residual(&t, &p, &p.z0, 0.1, &StepperConfig::newton())
                    } else {
                        Err(e)
                    }
                });
                match result {
                    Ok(v) => worst = worst.max(v),
                    Err(e) => return outcome(false, format!("{} {}: {e}", m.label(), q.id)),
                }
                runs += 1;
            }
        }
    }
    let control = BUILTIN_PROBLEMS
        .iter()
        .map(|name| {
            let p = builtin_problem(name, &ProblemParams::default()).unwrap();
            symmetry_residual(&ButcherTableau::explicit_euler(), &p, &p.z0, 0.1, &cfg).unwrap()
        })
        .fold(f64::INFINITY, f64::min);
    outcome(
        worst < 1e-12 && control > 1e-4,
        format!(
            "{} methods x {} rules x 3 problems ({runs} runs, {newton_runs} via Newton): max residual {worst:.2e}; explicit Euler min {control:.2e}",
            methods.len(),
            rules.len()
        ),
    )
}

fn criterion_9() -> Outcome {
    let bound = stage_contraction_bound(&minimal_symplectic(), 1.0);
    let bound_ok = (bound - 1.6).abs() <= 1e-6;
    let decay = OdeProblem::new("decay", vec![1.0], |_, z| vec![-z[0]]).with_lipschitz(1.0);
    let midpoint = discretize(&minimal_symplectic(), &gauss(1));
    let cfg = StepperConfig::default();
    let large = rk_step(&midpoint, &decay, 0.0, &[1.0], 2.0, &cfg);
    let small = rk_step(&midpoint, &decay, 0.0, &[1.0], 0.5, &cfg);
    let fails_large = large.as_ref().is_err_and(|e| e.is_non_convergence());
    let converges_small = small.as_ref().is_ok_and(|z| (z.z[0] - 0.75 / 1.25).abs() < 1e-14);
    outcome(
        bound_ok && fails_large && converges_small,
        format!(
            "bound {bound:.9} (target 1.6 +- 1e-6); fixed point at h=2: no convergence {fails_large}; at h=0.5: converges {converges_small}"
        ),
    )
}

fn coeff_gap(exact: &[Scalar], oracle: &[f64]) -> f64 {
    let n = exact.len().max(oracle.len());
    (0..n)
        .map(|k| {
            let e = exact.get(k).map_or(0.0, Scalar::to_f64);
            let o = oracle.get(k).copied().unwrap_or(0.0);
            (e - o).abs()
        })
        .fold(0.0, f64::max)
}

fn grid_gap(exact: &BivariatePoly, oracle: &[Vec<f64>]) -> f64 {
    let mut worst: f64 = 0.0;
    for (i, row) in oracle.iter().enumerate() {
        for (j, o) in row.iter().enumerate() {
            worst = worst.max((exact.get(i, j).to_f64() - o).abs());
        }
    }
    let covered = exact.rows() <= oracle.len() && exact.cols() <= oracle.first().map_or(0, Vec::len);
    if covered {
        worst
    } else {
        f64::INFINITY
    }
}

/// Max gap between every exact residual and its oracle-quadrature counterpart.
fn oracle_gap(m: &CsrkMethod) -> f64 {
    let (x, w) = gauss30();
    let q = x.len();
    let rows = grid_f64(m.alpha().as_rows());
    let (bc, cc) = (to_f64s(m.b().coeffs()), to_f64s(m.c().coeffs()));
    let a = |t: f64, s: f64| eval_bi(&rows, t, s);
    let b: Vec<f64> = x.iter().map(|&t| eval_uni(&bc, t)).collect();
    let c: Vec<f64> = x.iter().map(|&t| eval_uni(&cc, t)).collect();
    let ag: Vec<Vec<f64>> = x.iter().map(|&t| x.iter().map(|&s| a(t, s)).collect()).collect();
    let quad = |f: &dyn Fn(usize) -> f64| (0..q).map(|k| w[k] * f(k)).sum::<f64>();
    // node values of ∫ A(x_a, σ) g(σ) dσ
    let apply = |g: &[f64]| -> Vec<f64> {
        (0..q).map(|i| (0..q).map(|k| w[k] * ag[i][k] * g[k]).sum()).collect()
    };
    let c2: Vec<f64> = c.iter().map(|v| v * v).collect();
    let ac = apply(&c);
    let ac2 = apply(&c2);
    let aac = apply(&ac);
    let oracle_order = [
        quad(&|k| b[k]) - 1.0,
        quad(&|k| b[k] * c[k]) - 0.5,
        quad(&|k| b[k] * c2[k]) - 1.0 / 3.0,
        quad(&|k| b[k] * ac[k]) - 1.0 / 6.0,
        quad(&|k| b[k] * c2[k] * c[k]) - 0.25,
        quad(&|k| b[k] * c[k] * ac[k]) - 0.125,
        quad(&|k| b[k] * ac2[k]) - 1.0 / 12.0,
        quad(&|k| b[k] * aac[k]) - 1.0 / 24.0,
    ];
    let mut worst = coeff_gap(&check_order_conditions(m).residuals, &oracle_order);

    for kappa in 1..=3 {
        let (k, kf) = (kappa as i32, kappa as f64);
        let powk1: Vec<f64> = c.iter().map(|v| v.powi(k - 1)).collect();
        let cdef = c_breve_defect(m, kappa);
        let applied = apply(&powk1);
        let values: Vec<f64> = (0..q).map(|i| applied[i] - c[i].powi(k) / kf).collect();
        worst = worst.max(coeff_gap(cdef.coeffs(), &project_nodes(&values, cdef.coeffs().len() + 2)));
        let ddef = d_breve_defect(m, kappa);
        let values: Vec<f64> = (0..q)
            .map(|j| {
                (0..q).map(|i| w[i] * b[i] * powk1[i] * ag[i][j]).sum::<f64>()
                    - b[j] * (1.0 - c[j].powi(k)) / kf
            })
            .collect();
        worst = worst.max(coeff_gap(ddef.coeffs(), &project_nodes(&values, ddef.coeffs().len() + 2)));
    }

    let size = 10;
    let grid = |f: &dyn Fn(usize, usize) -> f64| -> Vec<Vec<f64>> {
        (0..q).map(|i| (0..q).map(|j| f(i, j)).collect()).collect()
    };
    let sym = grid(&|i, j| b[i] * ag[i][j] + b[j] * ag[j][i] - b[i] * b[j]);
    worst = worst.max(grid_gap(&symplectic_defect(m), &project2_nodes(&sym, size, size)));

    match symmetric_defect(m) {
        Ok(def) => {
            let vals = grid(&|i, j| ag[i][j] + a(1.0 - x[i], 1.0 - x[j]) - b[j]);
            worst = worst.max(grid_gap(&def, &project2_nodes(&vals, size, size)));
        }
        Err(_) => {
            if (quad(&|k| b[k]) - 1.0).abs() < 1e-12 {
                return f64::INFINITY;
            }
        }
    }

    let (dsym, at0, at1) = energy_preserving_defects(m);
    let d: Vec<Vec<f64>> = x.iter().map(|&t| x.iter().map(|&s| eval_bi_dtau(&rows, t, s)).collect()).collect();
    let vals = grid(&|i, j| d[i][j] - d[j][i]);
    worst = worst.max(grid_gap(&dsym, &project2_nodes(&vals, size, size)));
    worst = worst.max(coeff_gap(at0.coeffs(), &project(|s| a(0.0, s), size)));
    worst = worst.max(coeff_gap(at1.coeffs(), &project(|s| a(1.0, s) - eval_uni(&bc, s), size)));
    worst
}

fn criterion_10() -> Outcome {
    let mut r = rng(10);
    let mut worst: f64 = 0.0;
    for k in 0..50 {
        let m = if k % 2 == 0 {
            random_normalized(&mut r, 6)
        } else {
            random_general(&mut r, 6)
        };
        worst = worst.max(oracle_gap(&m));
    }
    outcome(
        worst <= 1e-12,
        format!("50 random methods of degree <= 6: max |exact - quadrature| = {worst:.2e}"),
    )
}

fn main() {
    let started = Instant::now();
    let mut failures = Vec::new();
    let mut report = |n: u32, title: &str, run: &dyn Fn() -> Outcome| {
        let t0 = Instant::now();
        let o = run();
        let status = if o.pass { "PASS" } else { "FAIL" };
        println!(
            "criterion {n:>2} {status} [{:>6.2}s] {title}: {}",
            t0.elapsed().as_secs_f64(),
            o.detail
        );
        if !o.pass {
            failures.push(n);
        }
    };
    report(1, "consistency certificate", &criterion_1);
    report(2, "reduced coefficient relations", &criterion_2);
    report(3, "Gauss recovery", &criterion_3);
    let t0 = Instant::now();
    let runs = order_runs();
    println!("  (order sweeps computed in {:.2}s)", t0.elapsed().as_secs_f64());
    report(4, "order certificates vs empirical order", &|| criterion_4(&runs));
    report(5, "predicted order is a lower bound", &|| criterion_5(&runs));
    report(6, "symplectic transfer", &criterion_6);
    report(7, "energy preservation", &criterion_7);
    report(8, "symmetry", &criterion_8);
    report(9, "stage contraction bound", &criterion_9);
    report(10, "oracle quadrature equivalence", &criterion_10);
    let unexpected: Vec<u32> = failures
        .iter()
        .copied()
        .filter(|n| !UNATTAINABLE.contains(n))
        .collect();
    println!(
        "{} of 10 criteria pass in {:.2}s; failing: {failures:?}; documented unattainable: {UNATTAINABLE:?}",
        10 - failures.len(),
        started.elapsed().as_secs_f64()
    );
    if !unexpected.is_empty() {
        eprintln!("unexpected acceptance failures: {unexpected:?}");
        std::process::exit(1);
    }
}
