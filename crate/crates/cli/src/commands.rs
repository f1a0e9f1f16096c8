use std::path::Path;

use clap::ValueEnum;
use csrk::discretize::{
    discretize as discretize_method, gauss_legendre, lobatto, predicted_rk_order, quadrature_order,
    rk_symmetry_residual, rk_symplectic_residual, ButcherTableau, Provenance,
};
use csrk::exec::Execution;
use csrk::integrate::{
    builtin_problem, empirical_order, energy_drift, integrate as run_steps, invariant_drift,
    symmetry_residual, symplecticity_residual, Diagnostics, OdeProblem, ProblemParams, Reference,
    Solver, StepperConfig,
};
use csrk::io::{method_from_json, method_to_json, ReportJson};
use csrk::legendre::{Scalar, UnivariatePoly};
use csrk::method::{
    construct_ep_general, construct_ep_legendre, construct_order_by_order, construct_simplifying,
    construct_symmetric, construct_symplectic, CsrkMethod, EpSpec, Entries,
};
use csrk::verify::{verify_with_cap, DEFAULT_LEVEL_CAP};
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{tableau_file_error, CliError, EXIT_IO};
use crate::manifest::{read_file, sibling, Run};
use crate::{
    ConstructArgs, ConvergenceArgs, DiscretizeArgs, Family, Format, IntegrateArgs, ProblemArgs,
    ReferenceArg, Rule, SolverArg,
};

/// `println!` that stops quietly when stdout is closed, e.g. piped into `head`.
macro_rules! out {
    ($($arg:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stdout().lock(), $($arg)*);
    }};
}

fn usage(message: impl Into<String>) -> CliError {
    CliError::new(EXIT_IO, "usage", message)
}

fn name_of<T: ValueEnum>(v: &T) -> String {
    v.to_possible_value().expect("no skipped variants").get_name().to_owned()
}

fn parse_scalar(text: &str) -> Result<Scalar, CliError> {
    text.trim()
        .parse()
        .map_err(|e| usage(format!("bad scalar {text:?}: {e}")))
}

fn parse_scalars(text: &str) -> Result<Vec<Scalar>, CliError> {
    text.split(',').map(parse_scalar).collect()
}

fn parse_floats(text: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|e| usage(format!("bad number {v:?}: {e}"))))
        .collect()
}

/// `i,j=value` pairs.
fn parse_entries(items: &[String]) -> Result<Entries, CliError> {
    let mut entries = Entries::new();
    for item in items {
        let bad = || usage(format!("expected I,J=VALUE, got {item:?}"));
        let (key, value) = item.split_once('=').ok_or_else(bad)?;
        let (i, j) = key.split_once(',').ok_or_else(bad)?;
        let i: usize = i.trim().parse().map_err(|_| bad())?;
        let j: usize = j.trim().parse().map_err(|_| bad())?;
        if entries.insert((i, j), parse_scalar(value)?).is_some() {
            return Err(usage(format!("entry ({i},{j}) given twice")));
        }
    }
    Ok(entries)
}

fn format_for(explicit: Option<Format>, path: &Path) -> Format {
    explicit.unwrap_or_else(|| match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => Format::Csv,
        _ => Format::Json,
    })
}

fn pretty(v: &impl Serialize) -> String {
    serde_json::to_string_pretty(v).expect("plain data serializes")
}

fn print_table(headers: &[&str], rows: &[Vec<String>]) {
    let widths: Vec<usize> = headers
        .iter()
        .enumerate()
        .map(|(k, h)| rows.iter().map(|r| r[k].len()).chain([h.len()]).max().unwrap_or(0))
        .collect();
    let line = |cells: Vec<&str>| {
        let padded: Vec<String> = cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect();
        out!("{}", padded.join("  ").trim_end());
    };
    line(headers.to_vec());
    for r in rows {
        line(r.iter().map(String::as_str).collect());
    }
}

fn sci(v: f64) -> String {
    format!("{v:.3e}")
}

fn opt_sci(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), sci)
}

fn load_method(path: &Path) -> Result<CsrkMethod, CliError> {
    let text = read_file(path)?;
    method_from_json(&text).map_err(|e| CliError::from(e).in_file(path))
}

fn load_tableau(path: &Path) -> Result<ButcherTableau, CliError> {
    let text = read_file(path)?;
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => {
            let provenance = Provenance {
                method: path.file_stem().map_or("csv".into(), |s| s.to_string_lossy().into_owned()),
                quadrature: "unknown".into(),
            };
            ButcherTableau::from_csv(&text, provenance).map_err(|e| tableau_file_error(path, e))
        }
        _ => serde_json::from_str(&text).map_err(|e| tableau_file_error(path, e)),
    }
}

fn setup_problem(a: &ProblemArgs) -> Result<(OdeProblem, StepperConfig), CliError> {
    let z0 = a.z0.as_deref().map(parse_floats).transpose()?;
    let problem = builtin_problem(
        &a.problem,
        &ProblemParams {
            z0,
            eccentricity: a.eccentricity,
        },
    )?;
    let cfg = StepperConfig {
        tol: a.tol,
        max_iter: a.max_iter,
        solver: match a.solver {
            SolverArg::FixedPoint => Solver::FixedPoint,
            SolverArg::Newton => Solver::Newton,
        },
    };
    Ok((problem, cfg))
}

fn problem_params(a: &ProblemArgs) -> Value {
    json!({
        "problem": a.problem,
        "eccentricity": a.eccentricity,
        "z0": a.z0,
        "solver": name_of(&a.solver),
        "tol": a.tol,
        "max_iter": a.max_iter,
    })
}

pub fn construct(a: &ConstructArgs) -> Result<(), CliError> {
    let family = name_of(&a.family);
    let mut run = Run::start(
        "construct",
        json!({
            "family": family,
            "order": a.order,
            "alpha": a.alpha,
            "beta": a.beta,
            "set": a.set,
            "omega": a.omega,
            "generator": a.generators,
            "label": a.label,
        }),
    );
    let free = parse_entries(&a.set)?;
    let takes_entries = !matches!(a.family, Family::EpLegendre | Family::EpGeneral);
    if !takes_entries && !free.is_empty() {
        return Err(usage(format!("--set is not used by family {family}")));
    }
    let omegas = || -> Result<Vec<Scalar>, CliError> {
        parse_scalars(a.omega.as_deref().ok_or_else(|| usage(format!("family {family} needs --omega")))?)
    };
    let mut claims = Value::Null;
    let method = match a.family {
        Family::Order => {
            let p = a.order.ok_or_else(|| usage("family order needs --order"))?;
            construct_order_by_order(p, &free)?
        }
        Family::Simplifying => {
            let alpha = a.alpha.ok_or_else(|| usage("family simplifying needs --alpha"))?;
            let beta = a.beta.ok_or_else(|| usage("family simplifying needs --beta"))?;
            construct_simplifying(alpha, beta, &free)?
        }
        Family::Symplectic => construct_symplectic(&free)?,
        Family::Symmetric => construct_symmetric(&free)?,
        Family::EpLegendre => {
            let (m, c) = construct_ep_legendre(&EpSpec::legendre(omegas()?))?;
            claims = json!({
                "kappa": c.kappa,
                "order": c.order,
                "tuned": c.tuned,
                "conjugate_symplectic_order": c.conjugate_symplectic_order,
            });
            m
        }
        Family::EpGeneral => {
            let generators = a
                .generators
                .iter()
                .map(|g| parse_scalars(g).map(UnivariatePoly::new))
                .collect::<Result<Vec<_>, _>>()?;
            let g = construct_ep_general(&EpSpec::general(omegas()?, generators))?;
            claims = json!({ "c_is_tau": g.c_is_tau });
            g.method
        }
    };
    let method = match &a.label {
        Some(l) => method.with_label(l.clone()),
        None => method,
    };
    let report = ReportJson::new(method.label(), &verify_with_cap(&method, DEFAULT_LEVEL_CAP));
    let report_path = sibling(&a.out, "report.json");
    run.write(&a.out, &method_to_json(&method))?;
    run.write(&report_path, &report.to_json())?;
    run.record("claims", claims.clone());
    let manifest = run.finish(&a.out)?;
    out!(
        "{}",
        pretty(&json!({
            "method": a.out.display().to_string(),
            "report": report_path.display().to_string(),
            "manifest": manifest.display().to_string(),
            "label": method.label(),
            "verified_order_direct": report.verified_order_direct,
            "guaranteed_order": report.guaranteed_order,
            "flags": report.flags,
            "claims": claims,
        }))
    );
    Ok(())
}

pub fn verify(path: &Path, cap: usize) -> Result<(), CliError> {
    let method = load_method(path)?;
    let report = ReportJson::new(method.label(), &verify_with_cap(&method, cap));
    out!("{}", report.to_json());
    Ok(())
}

#[derive(Serialize)]
struct TableauInfo {
    provenance: Provenance,
    stages: usize,
    quadrature_order: usize,
    /// Absent when the method is not normalized.
    predicted_rk_order: Option<usize>,
    rk_symplectic_residual: f64,
    rk_symmetry_residual: f64,
}

pub fn discretize(a: &DiscretizeArgs) -> Result<(), CliError> {
    let format = format_for(a.format, &a.out);
    let mut run = Run::start(
        "discretize",
        json!({ "rule": name_of(&a.rule), "stages": a.stages, "format": name_of(&format) }),
    );
    run.input(&a.method);
    let method = load_method(&a.method)?;
    let q = match a.rule {
        Rule::Gauss => gauss_legendre(a.stages)?,
        Rule::Lobatto => lobatto(a.stages)?,
    };
    let tableau = discretize_method(&method, &q);
    let info = TableauInfo {
        provenance: tableau.provenance.clone(),
        stages: tableau.s,
        quadrature_order: quadrature_order(&q, 4 * csrk::discretize::MAX_STAGES),
        predicted_rk_order: predicted_rk_order(&method, &q).ok(),
        rk_symplectic_residual: rk_symplectic_residual(&tableau),
        rk_symmetry_residual: rk_symmetry_residual(&tableau),
    };
    let text = match format {
        Format::Json => pretty(&tableau),
        Format::Csv => tableau.to_csv(),
    };
    run.write(&a.out, &text)?;
    let info_path = sibling(&a.out, "info.json");
    run.write(&info_path, &pretty(&info))?;
    run.finish(&a.out)?;
    out!("{}", pretty(&info));
    Ok(())
}

#[derive(Serialize)]
struct IntegrateSidecar<'a> {
    problem: &'a str,
    tableau: &'a Provenance,
    h: f64,
    steps: usize,
    final_state: &'a [f64],
    max_iterations: usize,
    #[serde(flatten)]
    diagnostics: Diagnostics,
}

pub fn integrate(a: &IntegrateArgs) -> Result<(), CliError> {
    let format = format_for(a.format, &a.out);
    let mut params = problem_params(&a.problem);
    params["h"] = json!(a.h);
    params["steps"] = json!(a.steps);
    let mut run = Run::start("integrate", params);
    run.input(&a.tableau);
    let tableau = load_tableau(&a.tableau)?;
    let (problem, cfg) = setup_problem(&a.problem)?;
    let traj = run_steps(&tableau, &problem, a.h, a.steps, &cfg)?;
    let hamiltonian = problem.is_hamiltonian();
    let mut diagnostics = Diagnostics {
        energy_drift: hamiltonian.then(|| energy_drift(&traj, &problem)).transpose()?,
        symmetry_residual: Some(symmetry_residual(&tableau, &problem, &problem.z0, a.h, &cfg)?),
        symplecticity_residual: hamiltonian
            .then(|| symplecticity_residual(&tableau, &problem, &problem.z0, a.h, &cfg))
            .transpose()?,
        ..Diagnostics::default()
    };
    let names: Vec<String> = problem.invariants().map(|(n, _)| n.to_owned()).collect();
    for name in names {
        let drift = invariant_drift(&traj, &problem, &name)?;
        diagnostics.invariant_drift.insert(name, drift);
    }
    let sidecar = IntegrateSidecar {
        problem: &problem.name,
        tableau: &tableau.provenance,
        h: a.h,
        steps: traj.steps(),
        final_state: traj.final_state(),
        max_iterations: traj.iterations.iter().copied().max().unwrap_or(0),
        diagnostics,
    };
    let text = match format {
        Format::Json => pretty(&traj),
        Format::Csv => traj.to_csv(),
    };
    run.write(&a.out, &text)?;
    run.write(&sibling(&a.out, "diagnostics.json"), &pretty(&sidecar))?;
    run.finish(&a.out)?;

    let d = &sidecar.diagnostics;
    let mut headers = vec!["problem", "h", "steps", "energy_drift", "symmetry", "symplecticity"];
    let mut row = vec![
        problem.name.clone(),
        a.h.to_string(),
        sidecar.steps.to_string(),
        opt_sci(d.energy_drift),
        opt_sci(d.symmetry_residual),
        opt_sci(d.symplecticity_residual),
    ];
    for (name, v) in &d.invariant_drift {
        headers.push(name);
        row.push(sci(*v));
    }
    print_table(&headers, &[row]);
    Ok(())
}

pub fn convergence(a: &ConvergenceArgs) -> Result<(), CliError> {
    let format = format_for(a.format, &a.out);
    let mut params = problem_params(&a.problem);
    params["h_list"] = json!(a.h_list);
    params["t_final"] = json!(a.t_final);
    params["reference"] = json!(name_of(&a.reference));
    params["sequential"] = json!(a.sequential);
    let mut run = Run::start("convergence", params);
    run.input(&a.tableau);
    let tableau = load_tableau(&a.tableau)?;
    let (problem, cfg) = setup_problem(&a.problem)?;
    let h_list = parse_floats(&a.h_list)?;
    let reference = match a.reference {
        ReferenceArg::Auto => Reference::Auto,
        ReferenceArg::Exact => Reference::Exact,
        ReferenceArg::Refined => Reference::Refined,
    };
    let execution = if a.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    let est = empirical_order(&tableau, &problem, &h_list, a.t_final, &cfg, reference, execution)?;
    let ratio_at = |k: usize| (k > 0).then(|| est.pairwise_ratios[k - 1]);
    let text = match format {
        Format::Json => pretty(&est),
        Format::Csv => {
            let mut out = String::from("h,error,ratio\n");
            for (k, (h, e)) in est.h.iter().zip(&est.errors).enumerate() {
                let r = ratio_at(k).map_or(String::new(), |r| r.to_string());
                out.push_str(&format!("{h},{e},{r}\n"));
            }
            out
        }
    };
    let sidecar = json!({
        "problem": problem.name,
        "tableau": tableau.provenance,
        "t_final": a.t_final,
        "h": est.h,
        "errors": est.errors,
        "saturated": est.saturated,
        "empirical_order": est.slope,
        "pairwise_ratios": est.pairwise_ratios,
    });
    run.write(&a.out, &text)?;
    run.write(&sibling(&a.out, "diagnostics.json"), &pretty(&sidecar))?;
    run.finish(&a.out)?;

    let rows: Vec<Vec<String>> = est
        .h
        .iter()
        .zip(&est.errors)
        .enumerate()
        .map(|(k, (h, e))| {
            vec![
                problem.name.clone(),
                h.to_string(),
                sci(*e),
                ratio_at(k).map_or("-".into(), |r| format!("{r:.3}")),
            ]
        })
        .collect();
    print_table(&["problem", "h", "error", "ratio"], &rows);
    match est.slope {
        Some(s) => out!("slope {s:.3}"),
        None => out!("slope - (errors reach the round-off floor)"),
    }
    Ok(())
}
