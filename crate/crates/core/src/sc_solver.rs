//! Self-consistent solution of the semiclassical minimisation problem and
//! direct evaluation of the semiclassical free-energy functional on
//! phase-space pairs `(γ, g)`.
//!
//! The minimiser depends on momentum only through `p²`, so the solver works
//! with the spatial density `ρ(r) = β^{−3/2} η(βW(r))` and reconstructs the
//! phase-space density `γ(p, r) = (e^{β(p² + W(r))} − 1)^{−1}` on demand.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ideal_gas::{self, GRID_EXPONENT};
use crate::potentials::{
    curvature_constant, interaction_energy, radial_convolution, require_valid, Potential,
    RadialDensity,
};
use crate::quadrature::RadialGrid;
use crate::special_functions::{
    bose_entropy_f_prime_unchecked, bose_entropy_f_unchecked, eta_unchecked,
    polylog_exp_neg_unchecked, PolylogOrder,
};

/// Starting point of the fixed-point iteration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Initialization {
    /// Ideal-gas minimiser at the same `(β, ω)`.
    Ideal,
    /// Uniform unit-mass ball of the given radius, no condensate.
    UniformBall { radius: f64 },
}

/// Numerical options for [`solve_selfconsistent`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Stopping tolerance on the L¹ fixed-point residual (density plus
    /// condensate fraction).
    pub tol: f64,
    pub max_iter: usize,
    /// Initial mixing parameter θ in `ρ ← (1−θ)ρ + θ·Φ(ρ)`; halved whenever
    /// the residual grows.
    pub damping: f64,
    pub n_grid: usize,
    pub init: Initialization,
    /// Reject potentials that fail [`crate::potentials::validate_assumption`].
    pub validate: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iter: 2000,
            damping: 0.5,
            n_grid: ideal_gas::DEFAULT_GRID_POINTS,
            init: Initialization::Ideal,
            validate: true,
        }
    }
}

/// Semiclassical minimiser.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SCState {
    pub beta: f64,
    pub omega: f64,
    pub lambda: f64,
    /// Coupling of the full interaction `λv` (the potential's own coupling
    /// times `λ`).
    pub coupling: f64,
    /// Thermal density (no point mass).
    pub rho_thermal: RadialDensity,
    /// Condensate fraction.
    pub g: f64,
    /// Chemical potential in the shifted convention (mean field at the
    /// origin subtracted).
    pub mu: f64,
    /// `W(r) = ω²r²/4 + λ(v∗ϱ)(r) − λ(v∗ϱ)(0) − μ` on the grid of `rho_thermal`.
    pub w_eff: Vec<f64>,
    /// `λ(v∗ϱ)(0)`.
    pub mean_field_origin: f64,
    /// `D(ϱ, ϱ)` for the interaction `λv`.
    pub interaction_energy: f64,
    pub free_energy: f64,
    /// Euler–Lagrange residual `‖ρ − β^{−3/2}η(βW)‖_{L¹}`.
    pub residual: f64,
    pub iterations: usize,
}

impl SCState {
    /// Full density `ϱ = ρᵗʰ + g δ`.
    pub fn density(&self) -> RadialDensity {
        RadialDensity {
            point_mass: self.g,
            ..self.rho_thermal.clone()
        }
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.rho_thermal.grid
    }

    /// Phase-space density `(e^{β(p² + W(r))} − 1)^{−1}` at grid node `i`.
    pub fn gamma_at_node(&self, p: f64, i: usize) -> f64 {
        1.0 / (self.beta * (p * p + self.w_eff[i])).exp_m1()
    }

    pub fn total_mass(&self) -> f64 {
        self.rho_thermal.thermal_mass() + self.g
    }
}

/// Radius beyond which `βW(r) ≥ 45` for any unit-mass density, using the
/// curvature bound `W ≥ c ω² r²`.
pub fn sc_grid_radius(beta: f64, omega: f64, v_full: &Potential) -> Result<f64> {
    let c = curvature_constant(v_full, omega);
    if !(c > 0.0) {
        return Err(Error::Precondition(format!(
            "curvature constant {c} is not positive; the Hessian bound fails"
        )));
    }
    Ok((GRID_EXPONENT / (beta * c)).sqrt() / omega)
}

/// Potential part `U(r) = ω²r²/4 + (v∗ϱ)(r) − (v∗ϱ)(0)` on the grid, together
/// with `(v∗ϱ)(0)`.
fn mean_field(v_full: &Potential, rho: &RadialDensity, omega: f64) -> Result<(Vec<f64>, f64)> {
    let quarter = 0.25 * omega * omega;
    if v_full.coupling == 0.0 {
        let u = rho.grid.nodes.iter().map(|r| quarter * r * r).collect();
        return Ok((u, 0.0));
    }
    let conv = radial_convolution(v_full, rho)?;
    let u = rho
        .grid
        .nodes
        .iter()
        .zip(&conv.values)
        .map(|(r, c)| (quarter * r * r + c - conv.at_origin).max(0.0))
        .collect();
    Ok((u, conv.at_origin))
}

fn thermal_values(u: &[f64], beta: f64, mu: f64) -> Vec<f64> {
    let scale = beta.powf(-1.5);
    u.iter()
        .map(|x| scale * eta_unchecked(beta * (x - mu)))
        .collect()
}

/// Given `U`, returns `(g, μ, ρᵗʰ)` with unit total mass: the condensed
/// branch when the thermal mass at `μ = 0` is below one, otherwise `g = 0`
/// and `μ < 0` from bisection. A deficit within `tie_tol` counts as critical.
pub(crate) fn normalize(
    u: &[f64],
    grid: &RadialGrid,
    beta: f64,
    tie_tol: f64,
) -> Result<(f64, f64, Vec<f64>)> {
    let at_zero = thermal_values(u, beta, 0.0);
    let deficit = 1.0 - grid.integrate_3d(&at_zero);
    if deficit.abs() < tie_tol {
        return Ok((0.0, 0.0, at_zero));
    }
    if deficit > 0.0 {
        return Ok((deficit, 0.0, at_zero));
    }
    let mass = |x: f64| grid.integrate_3d(&thermal_values(u, beta, x / beta));
    let (mut lo, mut hi) = (-1.0, 0.0);
    while mass(lo) > 1.0 {
        hi = lo;
        lo *= 2.0;
        if lo < -1e4 {
            return Err(Error::Bracket {
                solver: "sc_solver::normalize",
                detail: "no chemical potential with beta*mu >= -1e4 normalises the density".into(),
            });
        }
    }
    while hi - lo > 1e-15 * lo.abs().max(1e-3) {
        let mid = 0.5 * (lo + hi);
        if mass(mid) > 1.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let mu = 0.5 * (lo + hi) / beta;
    Ok((0.0, mu, thermal_values(u, beta, mu)))
}

fn initial_density(
    beta: f64,
    omega: f64,
    grid: &RadialGrid,
    init: Initialization,
) -> Result<(Vec<f64>, f64)> {
    match init {
        Initialization::Ideal => {
            let state = ideal_gas::ideal_state_on(beta, omega, grid.clone())?;
            Ok((state.rho0.values, state.g0))
        }
        Initialization::UniformBall { radius } => {
            if !(radius > 0.0) {
                return Err(Error::Precondition("ball radius must be positive".into()));
            }
            let raw: Vec<f64> = grid
                .nodes
                .iter()
                .map(|&r| if r <= radius { 1.0 } else { 0.0 })
                .collect();
            let mass = grid.integrate_3d(&raw);
            if mass <= 0.0 {
                return Err(Error::Precondition("ball contains no grid nodes".into()));
            }
            Ok((raw.into_iter().map(|x| x / mass).collect(), 0.0))
        }
    }
}

/// Solves the semiclassical Euler–Lagrange equations for the interaction
/// `λ v` by damped fixed-point iteration with an inner normalisation step.
pub fn solve_selfconsistent(
    beta: f64,
    omega: f64,
    v: &Potential,
    lambda: f64,
    opts: &SolverOptions,
) -> Result<SCState> {
    if !(lambda >= 0.0) {
        return Err(Error::Precondition(format!(
            "lambda must be >= 0, got {lambda}"
        )));
    }
    if !(beta > 0.0 && omega > 0.0) {
        return Err(Error::Precondition(
            "beta and omega must be positive".into(),
        ));
    }
    let v_full = v.scaled(lambda);
    if opts.validate && lambda > 0.0 {
        require_valid(&v_full, omega)?;
    }
    let grid = RadialGrid::gauss_legendre(sc_grid_radius(beta, omega, &v_full)?, opts.n_grid)?;
    let (mut rho, mut g) = initial_density(beta, omega, &grid, opts.init)?;
    let tie_tol = 0.1 * opts.tol;
    let mut theta = opts.damping.clamp(1e-3, 1.0);
    let mut prev_residual = f64::INFINITY;
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        iterations += 1;
        let density = RadialDensity {
            grid: grid.clone(),
            values: rho.clone(),
            point_mass: g,
        };
        let (u, _) = mean_field(&v_full, &density, omega)?;
        let (g_new, _, rho_new) = normalize(&u, &grid, beta, tie_tol)?;
        residual = grid.l1_distance_3d(&rho_new, &rho) + (g_new - g).abs();
        if residual < opts.tol {
            rho = rho_new;
            g = g_new;
            break;
        }
        if residual > prev_residual {
            theta = (0.5 * theta).max(1.0 / 1024.0);
        }
        prev_residual = residual;
        // A map that is constant in ρ (λ = 0) converges in one full step.
        let step = if lambda == 0.0 { 1.0 } else { theta };
        for (x, y) in rho.iter_mut().zip(&rho_new) {
            *x += step * (y - *x);
        }
        g += step * (g_new - g);
    }
    if residual >= opts.tol {
        return Err(Error::NonConvergence {
            solver: "solve_selfconsistent",
            iterations,
            residual,
        });
    }
    finish_state(
        beta, omega, lambda, &v_full, grid, rho, g, iterations, tie_tol,
    )
}

#[allow(clippy::too_many_arguments)]
fn finish_state(
    beta: f64,
    omega: f64,
    lambda: f64,
    v_full: &Potential,
    grid: RadialGrid,
    rho: Vec<f64>,
    g: f64,
    iterations: usize,
    tie_tol: f64,
) -> Result<SCState> {
    let density = RadialDensity::new(grid.clone(), rho, g)?;
    let (u, mean_field_origin) = mean_field(v_full, &density, omega)?;
    // μ from the final mean field; the branch is the one of the converged iterate.
    let (_, mu, _) = normalize(&u, &grid, beta, tie_tol)?;
    let mu = if g > 0.0 { 0.0 } else { mu };
    let w_eff: Vec<f64> = u.iter().map(|x| x - mu).collect();
    let el = thermal_values(&u, beta, mu);
    let residual = grid.l1_distance_3d(&el, &density.values);
    let interaction = if v_full.coupling == 0.0 {
        0.0
    } else {
        interaction_energy(&density, &density, v_full)?
    };
    let mut state = SCState {
        beta,
        omega,
        lambda,
        coupling: v_full.coupling,
        rho_thermal: density.thermal_part(),
        g,
        mu,
        w_eff,
        mean_field_origin,
        interaction_energy: interaction,
        free_energy: 0.0,
        residual,
        iterations,
    };
    state.free_energy = free_energy_from_parts(&state);
    Ok(state)
}

fn free_energy_from_parts(state: &SCState) -> f64 {
    let beta = state.beta;
    let li: Vec<f64> = state
        .w_eff
        .iter()
        .map(|w| polylog_exp_neg_unchecked(PolylogOrder::FiveHalves, beta * w))
        .collect();
    let pressure = state.grid().integrate_3d(&li) * (4.0 * PI * beta).powf(-1.5) / beta;
    -pressure + state.mean_field_origin + state.mu - state.interaction_energy
}

/// Free energy of a solved state,
/// `−β^{−1}(4πβ)^{−3/2} ∫ Li_{5/2}(e^{−βW}) + λ(v∗ϱ)(0) + μ − D(ϱ, ϱ)`,
/// recomputing the mean-field terms from `v` (unscaled; the state's `λ` is applied).
pub fn free_energy_of_state(state: &SCState, v: &Potential) -> Result<f64> {
    let v_full = v.scaled(state.lambda);
    let density = state.density();
    let (mean_field_origin, interaction) = if v_full.coupling == 0.0 {
        (0.0, 0.0)
    } else {
        (
            radial_convolution(&v_full, &density)?.at_origin,
            interaction_energy(&density, &density, &v_full)?,
        )
    };
    let recomputed = SCState {
        mean_field_origin,
        interaction_energy: interaction,
        ..state.clone()
    };
    Ok(free_energy_from_parts(&recomputed))
}

/// Phase-space density `γ(p, r)` sampled on a tensor grid, plus a condensate
/// fraction `g`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseSpacePair {
    pub p_grid: RadialGrid,
    pub r_grid: RadialGrid,
    /// Row-major samples: `gamma[i * p_grid.len() + j] = γ(p_j, r_i)`.
    pub gamma: Vec<f64>,
    pub g: f64,
}

/// Default number of momentum nodes for reconstructed pairs.
pub const DEFAULT_MOMENTUM_POINTS: usize = 256;

impl PhaseSpacePair {
    pub fn new(p_grid: RadialGrid, r_grid: RadialGrid, gamma: Vec<f64>, g: f64) -> Result<Self> {
        if gamma.len() != p_grid.len() * r_grid.len() {
            return Err(Error::Precondition(
                "gamma has the wrong number of samples".into(),
            ));
        }
        if gamma.iter().any(|x| !(x.is_finite() && *x >= 0.0)) || !(0.0..=1.0).contains(&g) {
            return Err(Error::Admissibility(
                "gamma must be finite and nonnegative and g in [0, 1]".into(),
            ));
        }
        Ok(Self {
            p_grid,
            r_grid,
            gamma,
            g,
        })
    }

    /// Minimiser `(γ^sc, g^sc)` of a solved state on a momentum grid reaching
    /// `βp² = 45`.
    pub fn from_state(state: &SCState, n_p: usize) -> Result<Self> {
        let p_grid = RadialGrid::gauss_legendre((GRID_EXPONENT / state.beta).sqrt(), n_p)?;
        let r_grid = state.grid().clone();
        let mut gamma = Vec::with_capacity(p_grid.len() * r_grid.len());
        for i in 0..r_grid.len() {
            for &p in &p_grid.nodes {
                gamma.push(state.gamma_at_node(p, i));
            }
        }
        Self::new(p_grid, r_grid, gamma, state.g)
    }

    fn n_p(&self) -> usize {
        self.p_grid.len()
    }

    /// `(2π)^{−3} (4π)² ∫∫ p² r² F(γ(p, r), p, r) dp dr`.
    fn phase_integral(&self, mut f: impl FnMut(f64, f64, usize) -> f64) -> f64 {
        let n_p = self.n_p();
        let mut total = 0.0;
        for (i, (&r, &wr)) in self
            .r_grid
            .nodes
            .iter()
            .zip(&self.r_grid.weights)
            .enumerate()
        {
            let mut inner = 0.0;
            for (j, (&p, &wp)) in self
                .p_grid
                .nodes
                .iter()
                .zip(&self.p_grid.weights)
                .enumerate()
            {
                inner += wp * p * p * f(self.gamma[i * n_p + j], p, i);
            }
            total += wr * r * r * inner;
        }
        total * 16.0 * PI * PI / (8.0 * PI.powi(3))
    }

    /// Spatial density `(2π)^{−3} ∫ γ(p, r) dp` with the condensate as point mass.
    pub fn density(&self) -> Result<RadialDensity> {
        let n_p = self.n_p();
        let scale = 4.0 * PI / (8.0 * PI.powi(3));
        let values = (0..self.r_grid.len())
            .map(|i| {
                scale
                    * self
                        .p_grid
                        .nodes
                        .iter()
                        .zip(&self.p_grid.weights)
                        .enumerate()
                        .map(|(j, (&p, &w))| w * p * p * self.gamma[i * n_p + j])
                        .sum::<f64>()
            })
            .collect();
        RadialDensity::new(self.r_grid.clone(), values, self.g)
    }

    /// `(2π)^{−3} ∫ γ + g − 1`.
    pub fn admissibility_defect(&self) -> f64 {
        self.phase_integral(|gamma, _, _| gamma) + self.g - 1.0
    }

    fn check_admissible(&self, tol: f64) -> Result<()> {
        let defect = self.admissibility_defect();
        if defect.abs() > tol {
            return Err(Error::Admissibility(format!(
                "(2pi)^-3 int gamma + g - 1 = {defect:e}"
            )));
        }
        Ok(())
    }

    /// Random admissible perturbation: `γ` is multiplied by a smooth positive
    /// random profile, `g` is moved by up to `amplitude`, and `γ` is rescaled
    /// to restore unit mass.
    pub fn random_perturbation(&self, seed: u64, amplitude: f64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coeffs: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (p_scale, r_scale) = (self.p_grid.r_max, self.r_grid.r_max);
        let n_p = self.n_p();
        let mut gamma = self.gamma.clone();
        for (i, &r) in self.r_grid.nodes.iter().enumerate() {
            for (j, &p) in self.p_grid.nodes.iter().enumerate() {
                let (x, y) = (PI * r / r_scale, PI * p / p_scale);
                let bump = coeffs[0] * x.cos()
                    + coeffs[1] * y.cos()
                    + coeffs[2] * (2.0 * x).cos()
                    + coeffs[3] * (2.0 * y).cos()
                    + coeffs[4] * (x + y).sin()
                    + coeffs[5];
                gamma[i * n_p + j] *= (amplitude * bump / 6.0).exp();
            }
        }
        let g = (self.g + amplitude * rng.gen_range(-1.0..1.0)).clamp(0.0, 0.999);
        let mut pair = Self::new(self.p_grid.clone(), self.r_grid.clone(), gamma, g)?;
        let thermal = pair.admissibility_defect() + 1.0 - g;
        let factor = (1.0 - g) / thermal;
        pair.gamma.iter_mut().for_each(|x| *x *= factor);
        Ok(pair)
    }
}

/// Tolerance on `(2π)^{−3}∫γ + g − 1` accepted by [`evaluate_functional`].
pub const ADMISSIBILITY_TOL: f64 = 1e-6;

/// Semiclassical free energy
/// `(2π)^{−3} ∫ (p² + ω²x²/4) γ − β^{−1} S(γ) + D(ϱ, ϱ)` of an admissible pair.
/// `v_full` is the complete interaction (any coupling already applied).
pub fn evaluate_functional(
    pair: &PhaseSpacePair,
    beta: f64,
    omega: f64,
    v_full: &Potential,
) -> Result<f64> {
    pair.check_admissible(ADMISSIBILITY_TOL)?;
    let quarter = 0.25 * omega * omega;
    let nodes = &pair.r_grid.nodes;
    let energy = pair.phase_integral(|gamma, p, i| (p * p + quarter * nodes[i] * nodes[i]) * gamma);
    let entropy_term = pair.phase_integral(|gamma, _, _| bose_entropy_f_unchecked(gamma)) / beta;
    let interaction = if v_full.coupling == 0.0 {
        0.0
    } else {
        let density = pair.density()?;
        interaction_energy(&density, &density, v_full)?
    };
    Ok(energy + entropy_term + interaction)
}

/// Semiclassical relative entropy
/// `(2π)^{−3} ∫ [f(m) − f(γ) − f′(γ)(m − γ)]` of `pair` with respect to the
/// state's minimiser. The pair must live on the state's radial grid.
pub fn sc_relative_entropy_to_state(pair: &PhaseSpacePair, state: &SCState) -> Result<f64> {
    if pair.r_grid != *state.grid() {
        return Err(Error::Precondition(
            "pair and state must share the radial grid".into(),
        ));
    }
    let value = pair.phase_integral(|m, p, i| {
        let gamma = state.gamma_at_node(p, i);
        let fp = bose_entropy_f_prime_unchecked(gamma);
        let d = bose_entropy_f_unchecked(m) - bose_entropy_f_unchecked(gamma) - fp * (m - gamma);
        d.max(0.0)
    });
    Ok(value)
}
