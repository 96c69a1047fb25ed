//! Acceptance suite: one test per criterion, each printing a single
//! `criterion N: PASS|FAIL` line to stdout (bypassing output capture) before
//! asserting.

use std::io::Write;
use std::sync::OnceLock;
use std::time::Instant;

use trapbec_core::critical_temperature::{
    beta_bracket, find_tc_from, lipschitz_ratio, random_unit_density, tc_grid,
    xi_coefficient_phase_space,
};
use trapbec_core::inequality_lab::{run_suite, Suite};
use trapbec_core::sc_solver::{
    evaluate_functional, free_energy_of_state, PhaseSpacePair, DEFAULT_MOMENTUM_POINTS,
};
use trapbec_core::special_functions::{mehler_kernel, mehler_trace, zeta};
use trapbec_core::{
    compare_to_semiclassical, dual_objective, find_tc, make_gaussian_potential, solve_hartree,
    solve_selfconsistent, tc_slope_check, xi_coefficient, DistanceReport, HartreeOptions,
    HartreeState, Potential, RadialDensity, RadialGrid, SCState, SolverOptions, TcOptions,
};

const OMEGA: f64 = 2.0;
const SEED: u64 = 7;

fn report(criterion: u32, title: &str, passed: bool, detail: &str) {
    let status = if passed { "PASS" } else { "FAIL" };
    let line = format!("criterion {criterion} [{title}]: {status} ({detail})\n");
    let mut out = std::io::stdout().lock();
    out.write_all(line.as_bytes()).unwrap();
    out.flush().unwrap();
}

fn gaussian() -> Potential {
    make_gaussian_potential(1.0, 1.0).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// `Li_s(e^{−t})` by direct summation, used as an independent oracle.
fn polylog_series(s: f64, t: f64) -> f64 {
    let mut sum = 0.0;
    for k in 1..50_000_000u64 {
        let kf = k as f64;
        let term = (-t * kf).exp() / kf.powf(s);
        sum += term;
        if term < 1e-19 * sum {
            break;
        }
    }
    sum
}

// ---------------------------------------------------------------------------
// 1. Ideal-gas oracle
// ---------------------------------------------------------------------------

#[test]
fn criterion_1_ideal_oracle() {
    let start = Instant::now();
    let v = gaussian();
    let z3 = zeta(3.0).unwrap();
    let z4 = zeta(4.0).unwrap();
    let omega = 1.0;
    let mut worst: f64 = 0.0;
    let mut bad = Vec::new();
    for k in 0..10 {
        let x = (0.7 + (3.0 - 0.7) * k as f64 / 9.0) * z3.cbrt();
        let beta = x / omega;
        let s = solve_selfconsistent(beta, omega, &v, 0.0, &SolverOptions::default()).unwrap();
        let x3 = x.powi(3);
        let (g0, mu0, f0) = if x3 >= z3 {
            (1.0 - z3 / x3, 0.0, -z4 / (beta * x3))
        } else {
            // Li₃(e^{βμ₀}) = (βω)³ by bisection on t = −βμ₀.
            let (mut lo, mut hi) = (1e-14f64, 60.0f64);
            for _ in 0..200 {
                let mid = (lo * hi).sqrt();
                if polylog_series(3.0, mid) > x3 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let t = (lo * hi).sqrt();
            let mu = -t / beta;
            (0.0, mu, mu - polylog_series(4.0, t) / (beta * x3))
        };
        let errs = [
            if g0 == 0.0 { s.g.abs() } else { rel(s.g, g0) },
            if mu0 == 0.0 {
                s.mu.abs()
            } else {
                rel(s.mu, mu0)
            },
            rel(s.free_energy, f0),
        ];
        let e = errs.iter().fold(0.0f64, |m, &x| m.max(x));
        if e >= 1e-6 {
            bad.push(format!("beta*omega={x:.4}: {errs:?}"));
        }
        worst = worst.max(e);
    }
    let secs = start.elapsed().as_secs_f64();
    let passed = bad.is_empty() && secs < 10.0;
    report(
        1,
        "ideal-gas oracle",
        passed,
        &format!("max relative error {worst:.2e} over 10 points, {secs:.2} s"),
    );
    assert!(passed, "{bad:?}, {secs} s");
}

// ---------------------------------------------------------------------------
// 2. Criticality structure, shared with criterion 9
// ---------------------------------------------------------------------------

struct CriticalityRun {
    lambda: f64,
    beta_c: f64,
    beta0: f64,
    bracket: (f64, f64),
    boundary: f64,
    states: Vec<(f64, SCState)>,
}

fn criticality_runs() -> &'static Vec<CriticalityRun> {
    static RUNS: OnceLock<Vec<CriticalityRun>> = OnceLock::new();
    RUNS.get_or_init(|| {
        let v = gaussian();
        let opts = SolverOptions::default();
        [0.01, 0.05]
            .into_iter()
            .map(|lambda| {
                let tc = find_tc(lambda, OMEGA, &v, &TcOptions::default()).unwrap();
                let states = [0.8, 0.9, 0.97, 0.995, 1.005, 1.03, 1.1, 1.25]
                    .iter()
                    .map(|&f| {
                        let beta = f * tc.beta_c;
                        (
                            beta,
                            solve_selfconsistent(beta, OMEGA, &v, lambda, &opts).unwrap(),
                        )
                    })
                    .collect();
                // Phase boundary of the solver alone, by bisection on g > 0.
                let (mut lo, mut hi) = beta_bracket(lambda, OMEGA, &v).unwrap();
                lo *= 0.99;
                hi *= 1.01;
                while hi - lo > 1e-5 * tc.beta0 {
                    let mid = 0.5 * (lo + hi);
                    let s = solve_selfconsistent(mid, OMEGA, &v, lambda, &opts).unwrap();
                    if s.g > 0.0 {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                CriticalityRun {
                    lambda,
                    beta_c: tc.beta_c,
                    beta0: tc.beta0,
                    bracket: tc.bracket,
                    boundary: 0.5 * (lo + hi),
                    states,
                }
            })
            .collect()
    })
}

#[test]
fn criterion_2_criticality() {
    let mut problems = Vec::new();
    let mut worst_gap: f64 = 0.0;
    for run in criticality_runs() {
        for (beta, s) in &run.states {
            let ok = if *beta > run.beta_c {
                s.g > 0.0 && s.mu == 0.0
            } else {
                s.g == 0.0 && s.mu < 0.0
            };
            if !ok {
                problems.push(format!(
                    "lambda={} beta={beta}: g={} mu={}",
                    run.lambda, s.g, s.mu
                ));
            }
        }
        let gap = (run.boundary - run.beta_c).abs() / run.beta0;
        worst_gap = worst_gap.max(gap);
        if gap >= 1e-3 {
            problems.push(format!(
                "lambda={}: boundary {} vs beta_c {}",
                run.lambda, run.boundary, run.beta_c
            ));
        }
        if !(run.bracket.0 <= run.beta_c && run.beta_c <= run.bracket.1) {
            problems.push(format!(
                "lambda={}: beta_c outside bracket {:?}",
                run.lambda, run.bracket
            ));
        }
    }
    let passed = problems.is_empty();
    report(
        2,
        "criticality structure",
        passed,
        &format!(
            "{} inconsistencies on 16 solves, |boundary - beta_c|/beta0 <= {worst_gap:.1e}",
            problems.len()
        ),
    );
    assert!(passed, "{problems:?}");
}

// ---------------------------------------------------------------------------
// 3. Mean-field shift of the critical temperature
// ---------------------------------------------------------------------------

#[test]
fn criterion_3_mean_field_shift() {
    let start = Instant::now();
    let v = gaussian();
    let xi = xi_coefficient(OMEGA, &v).unwrap();
    let direct = xi_coefficient_phase_space(OMEGA, &v).unwrap();
    let slope = tc_slope_check(OMEGA, &v, &[0.04, 0.02, 0.01], &TcOptions::default()).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let routes = rel(direct, xi);
    let passed = xi > 0.0 && slope.relative_deviation < 0.05 && routes < 1e-5 && secs < 120.0;
    report(
        3,
        "mean-field shift",
        passed,
        &format!(
            "Xi={xi:.8}, extrapolated slope {:.8} (deviation {:.1e}), 1D vs 2D {routes:.1e}, {secs:.1} s",
            slope.extrapolated_slope, slope.relative_deviation
        ),
    );
    assert!(passed);
}

// ---------------------------------------------------------------------------
// 4. Contraction of T
// ---------------------------------------------------------------------------

#[test]
fn criterion_4_contraction() {
    let v = gaussian();
    let opts = TcOptions::default();
    let mut max_ratio: f64 = 0.0;
    let mut max_spread: f64 = 0.0;
    let mut ok = true;
    for lambda in [0.01, 0.05] {
        let grid = tc_grid(lambda, OMEGA, &v, opts.n_grid).unwrap();
        for pair in 0..25u64 {
            let a = random_unit_density(&grid, 0.7, 1000 * SEED + 2 * pair).unwrap();
            let b = random_unit_density(&grid, 0.7, 1000 * SEED + 2 * pair + 1).unwrap();
            let r = lipschitz_ratio(&a, &b, lambda, OMEGA, &v).unwrap();
            max_ratio = max_ratio.max(r);
            ok &= r < 1.0;
        }
        let reference = find_tc(lambda, OMEGA, &v, &opts).unwrap();
        for seed in 0..4u64 {
            let init = random_unit_density(&grid, 0.4 + 0.3 * seed as f64, 77 + seed).unwrap();
            let other = find_tc_from(lambda, OMEGA, &v, &init, &opts).unwrap();
            let dist = grid.l1_distance_3d(&reference.rho_c.values, &other.rho_c.values);
            let dbeta = rel(other.beta_c, reference.beta_c);
            let spread = dist.max(dbeta);
            max_spread = max_spread.max(spread);
            ok &= spread <= 10.0 * opts.tol;
        }
    }
    report(
        4,
        "contraction",
        ok,
        &format!(
            "max Lipschitz ratio {max_ratio:.3} on 50 pairs, fixed-point spread {max_spread:.1e} (limit {:.0e})",
            10.0 * opts.tol
        ),
    );
    assert!(ok);
}

// ---------------------------------------------------------------------------
// 5–7. Finite-N Hartree runs
// ---------------------------------------------------------------------------

const NS: [usize; 3] = [1024, 4096, 16384];
const LAMBDAS: [f64; 2] = [0.0, 0.05];

struct HartreeRun {
    lambda: f64,
    n: usize,
    state: HartreeState,
    distance: DistanceReport,
}

struct HartreeRuns {
    runs: Vec<HartreeRun>,
    seconds: f64,
}

fn hartree_beta() -> f64 {
    2.0 * zeta(3.0).unwrap().cbrt() / OMEGA
}

fn hartree_runs() -> &'static HartreeRuns {
    static RUNS: OnceLock<HartreeRuns> = OnceLock::new();
    RUNS.get_or_init(|| {
        let start = Instant::now();
        let v = gaussian();
        let beta = hartree_beta();
        let mut runs = Vec::new();
        for lambda in LAMBDAS {
            let sc =
                solve_selfconsistent(beta, OMEGA, &v, lambda, &SolverOptions::default()).unwrap();
            for n in NS {
                let state = solve_hartree(
                    n,
                    beta,
                    OMEGA,
                    &v.scaled(lambda),
                    &HartreeOptions::default(),
                )
                .unwrap();
                let distance = compare_to_semiclassical(&state, &sc).unwrap();
                runs.push(HartreeRun {
                    lambda,
                    n,
                    state,
                    distance,
                });
            }
        }
        HartreeRuns {
            runs,
            seconds: start.elapsed().as_secs_f64(),
        }
    })
}

fn nonincreasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] <= w[0])
}

#[test]
fn criterion_5_finite_n_trends() {
    let all = hartree_runs();
    let mut monotone = true;
    let mut parts = Vec::new();
    for lambda in LAMBDAS {
        let runs: Vec<&HartreeRun> = all.runs.iter().filter(|r| r.lambda == lambda).collect();
        let cond: Vec<f64> = runs.iter().map(|r| r.distance.condensate_error).collect();
        let husimi: Vec<f64> = runs.iter().map(|r| r.distance.husimi_discrepancy).collect();
        monotone &= nonincreasing(&cond) && nonincreasing(&husimi);
        parts.push(format!(
            "lambda={lambda}: |N0/N-g| {} husimi {}",
            cond.iter()
                .map(|x| format!("{x:.4}"))
                .collect::<Vec<_>>()
                .join(">"),
            husimi
                .iter()
                .map(|x| format!("{x:.4}"))
                .collect::<Vec<_>>()
                .join(">"),
        ));
    }
    let final_error = all
        .runs
        .iter()
        .find(|r| r.lambda == 0.0 && r.n == 16384)
        .map(|r| r.distance.condensate_error)
        .unwrap();
    let within = final_error < 0.02;
    let fast = all.seconds < 900.0;
    let passed = monotone && within && fast;
    report(
        5,
        "finite-N trends",
        passed,
        &format!(
            "{}; monotone={monotone}; N=16384 ideal condensate error {final_error:.4} (limit 0.02); {:.0} s",
            parts.join("; "),
            all.seconds
        ),
    );
    assert!(monotone, "discrepancies are not monotone");
    assert!(fast, "runtime {} s", all.seconds);
    assert!(
        within,
        "condensate-fraction error {final_error} at N=16384 is not below 0.02"
    );
}

#[test]
fn criterion_6_spectral_gap() {
    let all = hartree_runs();
    let ratio = |r: &HartreeRun| r.state.gap / (r.state.hbar * r.state.omega);
    let interacting: Vec<f64> = all
        .runs
        .iter()
        .filter(|r| r.lambda > 0.0)
        .map(ratio)
        .collect();
    let free: Vec<f64> = all
        .runs
        .iter()
        .filter(|r| r.lambda == 0.0)
        .map(ratio)
        .collect();
    let lo = interacting.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = interacting.iter().copied().fold(0.0, f64::max);
    let variation = (hi - lo) / lo;
    let free_err = free.iter().map(|g| (g - 1.0).abs()).fold(0.0, f64::max);
    let passed = lo >= 0.5 && variation < 0.2 && free_err < 1e-3;
    report(
        6,
        "spectral gap",
        passed,
        &format!(
            "gap/(hbar omega) in [{lo:.4}, {hi:.4}] (variation {:.1}%), v=0 deviation {free_err:.1e}",
            100.0 * variation
        ),
    );
    assert!(passed);
}

#[test]
fn criterion_7_duality() {
    let all = hartree_runs();
    let n = 4096;
    let state = &all
        .runs
        .iter()
        .find(|r| r.lambda == 0.05 && r.n == n)
        .unwrap()
        .state;
    let ideal = &all
        .runs
        .iter()
        .find(|r| r.lambda == 0.0 && r.n == n)
        .unwrap()
        .state;
    let f = state.free_energy;
    let tol = 1e-6 * f.abs().max(1.0);
    let grid: &RadialGrid = &state.grid;
    let mut worst_excess = f64::NEG_INFINITY;
    let mut ok = true;
    let mut candidates: Vec<RadialDensity> = (0..10u64)
        .map(|k| {
            let unit = random_unit_density(grid, 0.5 + 0.1 * k as f64, 500 + k).unwrap();
            let values = unit.values.iter().map(|x| x * n as f64).collect();
            RadialDensity::new(grid.clone(), values, 0.0).unwrap()
        })
        .collect();
    candidates.push(ideal.rho.clone());
    for eta in &candidates {
        let d = dual_objective(eta, state).unwrap();
        worst_excess = worst_excess.max(d - f);
        ok &= d <= f + tol;
    }
    let at_minimiser = dual_objective(&state.rho, state).unwrap();
    let match_err = rel(at_minimiser, f);
    ok &= match_err < 1e-6;
    report(
        7,
        "duality",
        ok,
        &format!(
            "max dual - F^H over 11 densities {worst_excess:.3e}, relative mismatch at the minimiser {match_err:.1e}"
        ),
    );
    assert!(ok);
}

// ---------------------------------------------------------------------------
// 8. Inequality suites
// ---------------------------------------------------------------------------

#[test]
fn criterion_8_inequality_suites() {
    let start = Instant::now();
    let mut passed = true;
    let mut parts = Vec::new();
    for suite in Suite::ALL {
        let r = run_suite(suite, SEED, None).unwrap();
        passed &= r.passed;
        parts.push(format!(
            "{} n={} worst={:.2e}",
            r.suite, r.instances, r.worst_value
        ));
    }
    let secs = start.elapsed().as_secs_f64();
    passed &= secs < 300.0;
    report(
        8,
        "inequality suites",
        passed,
        &format!("{}; {secs:.1} s", parts.join(", ")),
    );
    assert!(passed);
}

// ---------------------------------------------------------------------------
// 9. Internal consistency
// ---------------------------------------------------------------------------

#[test]
fn criterion_9_internal_consistency() {
    let v = gaussian();
    let mut worst_functional: f64 = 0.0;
    for run in criticality_runs() {
        for (beta, s) in &run.states {
            let pair = PhaseSpacePair::from_state(s, DEFAULT_MOMENTUM_POINTS).unwrap();
            let direct = evaluate_functional(&pair, *beta, OMEGA, &v.scaled(run.lambda)).unwrap();
            let stored = free_energy_of_state(s, &v).unwrap();
            worst_functional = worst_functional.max(rel(direct, stored));
        }
    }
    let (omega, hbar) = (1.0, 0.5);
    let mut worst_mehler: f64 = 0.0;
    for tau in [0.1f64, 0.5, 1.0, 2.0, 5.0] {
        let t = tau / (hbar * omega);
        let exact = (2.0 * (0.5 * tau).sinh()).powi(-3);
        let r_max = (60.0 * hbar / (omega * (0.5 * tau).tanh())).sqrt() + 1.0;
        let grid = RadialGrid::gauss_legendre(r_max, 256).unwrap();
        let diag: Vec<f64> = grid
            .nodes
            .iter()
            .map(|&r| mehler_kernel(t, [0.0, 0.0, r], [0.0, 0.0, r], omega, hbar).unwrap())
            .collect();
        worst_mehler = worst_mehler
            .max(rel(grid.integrate_3d(&diag), exact))
            .max(rel(mehler_trace(t, omega, hbar), exact));
    }
    let passed = worst_functional < 1e-6 && worst_mehler < 1e-8;
    report(
        9,
        "internal consistency",
        passed,
        &format!(
            "functional vs stored free energy {worst_functional:.1e} on 16 states, Mehler trace {worst_mehler:.1e} at 5 values"
        ),
    );
    assert!(passed);
}
