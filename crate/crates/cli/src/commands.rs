//! One function per subcommand; each returns an [`Output`] and leaves file
//! handling to the caller.

use std::collections::BTreeMap;
use std::sync::mpsc;

use anyhow::{Context, Result};
use serde_json::{json, Value};
use trapbec_core::critical_temperature::xi_coefficient_phase_space;
use trapbec_core::hartree_radial::HartreeSummary;
use trapbec_core::ideal_gas::beta_critical;
use trapbec_core::{
    compare_to_semiclassical, find_tc, ideal_state, run_suite, solve_hartree, solve_selfconsistent,
    tc_slope_check, xi_coefficient, HartreeOptions, Potential, SolverOptions, Suite, TcOptions,
};

use crate::artifacts::{num, Output, Table};
use crate::config::{Command, RunConfig};

const SC_UNITS: &str =
    "hbar = k_B = 1; one-body symbol p^2 + omega^2 x^2/4; beta is the inverse temperature; \
energies per particle; densities per unit volume with unit total mass";
const HARTREE_UNITS: &str =
    "semiclassical scaling hbar = N^(-1/3); one-body operator -hbar^2 Laplacian + omega^2 x^2/4; \
mean field (v*rho)/N; free energy is extensive; rho counts particles (total mass N)";
const PROPS_UNITS: &str = "dimensionless margins and ratios";

pub fn run(config: &RunConfig) -> Result<Output> {
    match config.command() {
        Command::Ideal => ideal(config),
        Command::Solve => solve(config),
        Command::Tc => tc(config),
        Command::Xi => xi(config),
        Command::Slope => slope(config),
        Command::Hartree => hartree(config),
        Command::Compare => compare(config),
        Command::Props => props(config),
        Command::Sweep => sweep(config),
    }
}

fn sc_options(c: &RunConfig) -> SolverOptions {
    let mut o = SolverOptions::default();
    if let Some(t) = c.tol {
        o.tol = t;
    }
    if let Some(m) = c.max_iter {
        o.max_iter = m;
    }
    if let Some(n) = c.n_grid {
        o.n_grid = n;
    }
    if let Some(d) = c.damping {
        o.damping = d;
    }
    o.validate = c.validate;
    o
}

fn tc_options(c: &RunConfig) -> TcOptions {
    let mut o = TcOptions::default();
    if let Some(t) = c.tol {
        o.tol = t;
    }
    if let Some(m) = c.max_iter {
        o.max_iter = m;
    }
    if let Some(n) = c.n_grid {
        o.n_grid = n;
    }
    o.validate = c.validate;
    o
}

fn hartree_options(c: &RunConfig) -> HartreeOptions {
    let mut o = HartreeOptions::default();
    if let Some(t) = c.tol {
        o.tol = t;
    }
    if let Some(m) = c.max_iter {
        o.max_iter = m;
    }
    if let Some(n) = c.n_grid {
        o.n_grid = n;
    }
    if let Some(d) = c.damping {
        o.damping = d;
    }
    o.validate = c.validate;
    o
}

fn beta(c: &RunConfig) -> f64 {
    c.beta
        .expect("beta presence is checked during config resolution")
}

fn potential(c: &RunConfig) -> Result<Potential> {
    Ok(c.potential()?)
}

fn ideal(c: &RunConfig) -> Result<Output> {
    let b = beta(c);
    let s = ideal_state(b, c.omega)?;
    let beta0 = beta_critical(c.omega)?;
    let mut table = Table::new(&["r", "rho_thermal"]);
    for (&r, &rho) in s.rho0.grid.nodes.iter().zip(&s.rho0.values) {
        table.push([num(r), num(rho)]);
    }
    Ok(Output {
        units: SC_UNITS.into(),
        result: json!({
            "beta": b,
            "omega": c.omega,
            "beta0": beta0,
            "beta_over_beta0": b / beta0,
            "g0": s.g0,
            "mu0": s.mu0,
            "free_energy": s.free_energy,
        }),
        table: Some(table),
        exit_code: 0,
    })
}

fn solve(c: &RunConfig) -> Result<Output> {
    let v = potential(c)?;
    let s = solve_selfconsistent(beta(c), c.omega, &v, c.lambda, &sc_options(c))?;
    let mut table = Table::new(&["r", "rho_thermal", "w_eff"]);
    for ((&r, &rho), &w) in s
        .grid()
        .nodes
        .iter()
        .zip(&s.rho_thermal.values)
        .zip(&s.w_eff)
    {
        table.push([num(r), num(rho), num(w)]);
    }
    Ok(Output {
        units: SC_UNITS.into(),
        result: json!({
            "beta": s.beta,
            "omega": s.omega,
            "lambda": s.lambda,
            "g": s.g,
            "mu": s.mu,
            "free_energy": s.free_energy,
            "interaction_energy": s.interaction_energy,
            "mean_field_origin": s.mean_field_origin,
            "residual": s.residual,
            "iterations": s.iterations,
        }),
        table: Some(table),
        exit_code: 0,
    })
}

fn tc(c: &RunConfig) -> Result<Output> {
    let v = potential(c)?;
    let r = find_tc(c.lambda, c.omega, &v, &tc_options(c))?;
    let mut table = Table::new(&["r", "rho_c"]);
    for (&x, &rho) in r.rho_c.grid.nodes.iter().zip(&r.rho_c.values) {
        table.push([num(x), num(rho)]);
    }
    Ok(Output {
        units: SC_UNITS.into(),
        result: json!({
            "lambda": r.lambda,
            "omega": r.omega,
            "beta0": r.beta0,
            "beta_c": r.beta_c,
            "beta_c_over_beta0": r.beta_c / r.beta0,
            "bracket": [r.bracket.0, r.bracket.1],
            "iterations": r.iterations,
            "residual": r.residual,
            "residual_ratios": r.residual_ratios,
        }),
        table: Some(table),
        exit_code: 0,
    })
}

fn xi(c: &RunConfig) -> Result<Output> {
    let v = potential(c)?;
    let reduced = xi_coefficient(c.omega, &v)?;
    let direct = xi_coefficient_phase_space(c.omega, &v)?;
    Ok(Output {
        units: SC_UNITS.into(),
        result: json!({
            "omega": c.omega,
            "xi": reduced,
            "xi_phase_space": direct,
            "relative_difference": (reduced - direct).abs() / reduced.abs(),
        }),
        table: None,
        exit_code: 0,
    })
}

fn slope(c: &RunConfig) -> Result<Output> {
    let v = potential(c)?;
    let r = tc_slope_check(c.omega, &v, &c.lambdas, &tc_options(c))?;
    let mut table = Table::new(&["lambda", "beta_c", "slope"]);
    for ((&l, &b), &s) in r.lambdas.iter().zip(&r.beta_c).zip(&r.slopes) {
        table.push([num(l), num(b), num(s)]);
    }
    Ok(Output {
        units: SC_UNITS.into(),
        result: serde_json::to_value(&r)?,
        table: Some(table),
        exit_code: 0,
    })
}

fn hartree(c: &RunConfig) -> Result<Output> {
    let v = potential(c)?.scaled(c.lambda);
    let n = c.n.expect("n presence is checked during config resolution");
    let s = solve_hartree(n, beta(c), c.omega, &v, &hartree_options(c))?;
    let summary: HartreeSummary = s.summary(20);
    let mut table = Table::new(&["r", "rho"]);
    for (&r, &rho) in summary.r.iter().zip(&summary.rho) {
        table.push([num(r), num(rho)]);
    }
    let mut result = serde_json::to_value(&summary)?;
    if let Value::Object(map) = &mut result {
        map.remove("r");
        map.remove("rho");
        map.insert("lambda".into(), json!(c.lambda));
    }
    Ok(Output {
        units: HARTREE_UNITS.into(),
        result,
        table: Some(table),
        exit_code: 0,
    })
}

fn compare(c: &RunConfig) -> Result<Output> {
    let v = potential(c)?;
    let ns: Vec<usize> = if c.ns.is_empty() {
        vec![c.n.expect("checked during config resolution")]
    } else {
        c.ns.clone()
    };
    let sc = solve_selfconsistent(beta(c), c.omega, &v, c.lambda, &sc_options(c))?;
    let hopts = hartree_options(c);
    let vh = v.scaled(c.lambda);
    let mut table = Table::new(&["n", "ray", "t", "husimi", "semiclassical"]);
    let mut reports = Vec::new();
    for &n in &ns {
        let h = solve_hartree(n, beta(c), c.omega, &vh, &hopts)?;
        let report = compare_to_semiclassical(&h, &sc)?;
        for s in &report.samples {
            table.push([
                n.to_string(),
                s.ray.name().to_string(),
                num(s.t),
                num(s.husimi),
                num(s.semiclassical),
            ]);
        }
        let mut value = serde_json::to_value(&report)?;
        if let Value::Object(map) = &mut value {
            map.remove("samples");
            map.insert(
                "gap_over_hbar_omega".into(),
                json!(h.gap / (h.hbar * h.omega)),
            );
        }
        reports.push(value);
    }
    Ok(Output {
        units: format!("{HARTREE_UNITS}; rays use the thermal variable t = sqrt(beta)|p|"),
        result: json!({
            "beta": beta(c),
            "omega": c.omega,
            "lambda": c.lambda,
            "g_sc": sc.g,
            "reports": reports,
        }),
        table: Some(table),
        exit_code: 0,
    })
}

fn props(c: &RunConfig) -> Result<Output> {
    let suites: Vec<Suite> = if c.suite == "all" {
        Suite::ALL.to_vec()
    } else {
        vec![Suite::from_name(&c.suite)?]
    };
    let mut table = Table::new(&["suite", "instance", "label", "value"]);
    let mut reports = Vec::new();
    let mut all_passed = true;
    for suite in suites {
        let r = run_suite(suite, c.seed, c.instances)?;
        for (i, (v, label)) in r.values.iter().zip(&r.labels).enumerate() {
            table.push([r.suite.clone(), i.to_string(), label.clone(), num(*v)]);
        }
        all_passed &= r.passed;
        reports.push(json!({
            "suite": r.suite,
            "seed": r.seed,
            "instances": r.instances,
            "worst_value": r.worst_value,
            "worst_instance": r.worst_instance,
            "worst_label": r.labels.get(r.worst_instance),
            "threshold": r.threshold,
            "passed": r.passed,
        }));
    }
    Ok(Output {
        units: PROPS_UNITS.into(),
        result: json!({ "seed": c.seed, "passed": all_passed, "suites": reports }),
        table: Some(table),
        exit_code: if all_passed { 0 } else { 1 },
    })
}

/// Fans the `(λ, β)` grid out over a bounded pool; a single collector
/// receives rows in completion order and emits them in grid order.
fn sweep(c: &RunConfig) -> Result<Output> {
    let v = potential(c)?;
    let lambdas = if c.lambdas.is_empty() {
        vec![c.lambda]
    } else {
        c.lambdas.clone()
    };
    let points: Vec<(f64, f64)> = lambdas
        .iter()
        .flat_map(|&l| c.betas.iter().map(move |&b| (l, b)))
        .collect();
    let opts = sc_options(c);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(c.workers.unwrap_or(0))
        .build()
        .context("building the worker pool")?;
    let (tx, rx) = mpsc::channel();
    pool.scope(|scope| {
        for (index, &(lambda, beta)) in points.iter().enumerate() {
            let tx = tx.clone();
            let v = &v;
            let opts = &opts;
            let omega = c.omega;
            scope.spawn(move |_| {
                let result = solve_selfconsistent(beta, omega, v, lambda, opts);
                // The receiver outlives the scope, so sending cannot fail.
                let _ = tx.send((index, result));
            });
        }
    });
    drop(tx);

    let mut pending = BTreeMap::new();
    let mut next = 0;
    let mut table = Table::new(&[
        "lambda",
        "beta",
        "g",
        "mu",
        "free_energy",
        "residual",
        "iters",
    ]);
    let mut failures = Vec::new();
    let mut exit_code = 0;
    for (index, result) in rx {
        pending.insert(index, result);
        while let Some(result) = pending.remove(&next) {
            let (lambda, beta) = points[next];
            match result {
                Ok(s) => table.push([
                    num(lambda),
                    num(beta),
                    num(s.g),
                    num(s.mu),
                    num(s.free_energy),
                    num(s.residual),
                    s.iterations.to_string(),
                ]),
                Err(e) => {
                    exit_code = exit_code.max(crate::exit_code_for(&e));
                    failures
                        .push(json!({ "lambda": lambda, "beta": beta, "error": e.to_string() }));
                }
            }
            next += 1;
        }
    }
    Ok(Output {
        units: SC_UNITS.into(),
        result: json!({
            "omega": c.omega,
            "points": points.len(),
            "solved": table.rows.len(),
            "failures": failures,
        }),
        table: Some(table),
        exit_code,
    })
}
