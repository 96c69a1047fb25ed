//! Transition temperature of the interacting semiclassical gas.
//!
//! At criticality the condensate vanishes and `μ = 0`, so the critical pair
//! `(β, ρ)` solves `ρ = β^{−3/2} η(β W_λ[ρ])` with unit mass, where
//! `W_λ[ρ](r) = ω²r²/4 + λ(v∗ρ)(r) − λ(v∗ρ)(0)`. The map `T` fixes `W_λ[ρ]`,
//! picks the unique `β` giving unit mass, and returns the new density.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ideal_gas::{beta_critical, ideal_density_at, DEFAULT_GRID_POINTS};
use crate::potentials::{
    convolution_laplacian_at_origin, convolve_at, radial_convolution, require_valid, Potential,
    RadialDensity,
};
use crate::quadrature::{self, RadialGrid};
use crate::sc_solver::sc_grid_radius;
use crate::special_functions::{eta_prime_unchecked, eta_unchecked};

/// Options for [`find_tc`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TcOptions {
    /// Stopping tolerance on `‖Tρ − ρ‖_{L¹}`.
    pub tol: f64,
    pub max_iter: usize,
    pub n_grid: usize,
    /// Reject potentials that fail [`crate::potentials::validate_assumption`].
    pub validate: bool,
}

impl Default for TcOptions {
    fn default() -> Self {
        Self {
            tol: 1e-11,
            max_iter: 500,
            n_grid: DEFAULT_GRID_POINTS,
            validate: true,
        }
    }
}

/// Critical point for coupling `λ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TcResult {
    pub lambda: f64,
    pub omega: f64,
    /// Ideal critical inverse temperature `ζ(3)^{1/3}/ω`.
    pub beta0: f64,
    pub beta_c: f64,
    /// Unit-mass critical density.
    pub rho_c: RadialDensity,
    pub iterations: usize,
    /// Last L¹ fixed-point residual.
    pub residual: f64,
    /// A priori bracket `((1+κλ)^{−1/2}β₀, (1−κλ)^{−1/2}β₀)` with
    /// `κ = 2·sup‖D²v‖/ω²`.
    pub bracket: (f64, f64),
    /// Ratios of successive residuals, an empirical contraction estimate.
    pub residual_ratios: Vec<f64>,
}

/// A priori bounds on `β_c` from `|λ(v∗ρ)(r) − λ(v∗ρ)(0)| ≤ λ sup‖D²v‖ r²/2`.
pub fn beta_bracket(lambda: f64, omega: f64, v: &Potential) -> Result<(f64, f64)> {
    let beta0 = beta_critical(omega)?;
    let kappa = 2.0 * v.effective_hessian_sup() / (omega * omega);
    let x = kappa * lambda;
    if x >= 1.0 {
        return Err(Error::Precondition(format!(
            "lambda * 2 sup|D^2 v| / omega^2 = {x} must be below 1"
        )));
    }
    Ok((beta0 / (1.0 + x).sqrt(), beta0 / (1.0 - x).sqrt()))
}

/// Grid that resolves `β^{−3/2}η(βW_λ)` for every `β` in the bracket.
pub fn tc_grid(lambda: f64, omega: f64, v: &Potential, n_grid: usize) -> Result<RadialGrid> {
    let (beta_lo, _) = beta_bracket(lambda, omega, v)?;
    RadialGrid::gauss_legendre(sc_grid_radius(beta_lo, omega, &v.scaled(lambda))?, n_grid)
}

fn potential_part(rho: &RadialDensity, lambda: f64, omega: f64, v: &Potential) -> Result<Vec<f64>> {
    let quarter = 0.25 * omega * omega;
    if lambda == 0.0 {
        return Ok(rho.grid.nodes.iter().map(|r| quarter * r * r).collect());
    }
    let conv = radial_convolution(&v.scaled(lambda), rho)?;
    Ok(rho
        .grid
        .nodes
        .iter()
        .zip(&conv.values)
        .map(|(r, c)| (quarter * r * r + c - conv.at_origin).max(0.0))
        .collect())
}

fn mass_at(beta: f64, u: &[f64], grid: &RadialGrid) -> f64 {
    let scale = beta.powf(-1.5);
    4.0 * PI
        * grid
            .nodes
            .iter()
            .zip(&grid.weights)
            .zip(u)
            .map(|((r, w), x)| w * r * r * scale * eta_unchecked(beta * x))
            .sum::<f64>()
}

/// One application of `T`: returns the unit-mass density `β^{−3/2}η(βW_λ[ρ])`
/// and its `β`, found by bisection on `[β₀/2, 2β₀]` to `1e−12` relative.
pub fn apply_t(
    rho: &RadialDensity,
    lambda: f64,
    omega: f64,
    v: &Potential,
) -> Result<(RadialDensity, f64)> {
    if rho.point_mass != 0.0 {
        return Err(Error::Precondition(
            "T acts on densities without point mass".into(),
        ));
    }
    let mass = rho.thermal_mass();
    if (mass - 1.0).abs() > 1e-6 {
        return Err(Error::Precondition(format!(
            "T needs unit mass, got {mass}"
        )));
    }
    let u = potential_part(rho, lambda, omega, v)?;
    let beta0 = beta_critical(omega)?;
    let (mut lo, mut hi) = (0.5 * beta0, 2.0 * beta0);
    if mass_at(lo, &u, &rho.grid) < 1.0 || mass_at(hi, &u, &rho.grid) > 1.0 {
        return Err(Error::Bracket {
            solver: "apply_t",
            detail: "no beta in [beta0/2, 2 beta0] gives unit mass".into(),
        });
    }
    while hi - lo > 1e-13 * hi {
        let mid = 0.5 * (lo + hi);
        if mass_at(mid, &u, &rho.grid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let beta = 0.5 * (lo + hi);
    let scale = beta.powf(-1.5);
    let mut values: Vec<f64> = u.iter().map(|x| scale * eta_unchecked(beta * x)).collect();
    // Remove the residual bisection error from the mass.
    let m = rho.grid.integrate_3d(&values);
    values.iter_mut().for_each(|x| *x /= m);
    Ok((RadialDensity::new(rho.grid.clone(), values, 0.0)?, beta))
}

/// Unit-mass critical ideal density `β₀^{−3/2}η(β₀ω²r²/4)` on `grid`.
pub fn ideal_critical_density(omega: f64, grid: &RadialGrid) -> Result<RadialDensity> {
    let beta0 = beta_critical(omega)?;
    let mut values: Vec<f64> = grid
        .nodes
        .iter()
        .map(|&r| ideal_density_at(r, beta0, omega, 0.0))
        .collect();
    let m = grid.integrate_3d(&values);
    values.iter_mut().for_each(|x| *x /= m);
    RadialDensity::new(grid.clone(), values, 0.0)
}

/// Iterates `T` from the critical ideal density.
pub fn find_tc(lambda: f64, omega: f64, v: &Potential, opts: &TcOptions) -> Result<TcResult> {
    let grid = tc_grid(lambda, omega, v, opts.n_grid)?;
    let start = ideal_critical_density(omega, &grid)?;
    find_tc_from(lambda, omega, v, &start, opts)
}

/// Iterates `T` from an arbitrary unit-mass radial density, resampled onto
/// the solver grid.
pub fn find_tc_from(
    lambda: f64,
    omega: f64,
    v: &Potential,
    initial: &RadialDensity,
    opts: &TcOptions,
) -> Result<TcResult> {
    if !(lambda >= 0.0) {
        return Err(Error::Precondition(format!(
            "lambda must be >= 0, got {lambda}"
        )));
    }
    if opts.validate && lambda > 0.0 {
        require_valid(&v.scaled(lambda), omega)?;
    }
    let bracket = beta_bracket(lambda, omega, v)?;
    let grid = tc_grid(lambda, omega, v, opts.n_grid)?;
    let mut values: Vec<f64> = if initial.grid == grid {
        initial.values.clone()
    } else {
        grid.nodes.iter().map(|&r| initial.value_at(r)).collect()
    };
    let m = grid.integrate_3d(&values);
    if !(m > 0.0) {
        return Err(Error::Precondition(
            "initial density has no mass on the grid".into(),
        ));
    }
    values.iter_mut().for_each(|x| *x /= m);
    let mut rho = RadialDensity::new(grid, values, 0.0)?;
    let mut residuals: Vec<f64> = Vec::new();
    let mut increases = 0;
    for iteration in 1..=opts.max_iter {
        let (next, beta) = apply_t(&rho, lambda, omega, v)?;
        let residual = rho.grid.l1_distance_3d(&next.values, &rho.values);
        if let Some(&last) = residuals.last() {
            if residual > last {
                increases += 1;
                if increases >= 5 {
                    return Err(Error::Divergence {
                        function: "find_tc",
                        detail: format!(
                            "residual grew for 5 consecutive iterations (now {residual:e}); \
                             lambda = {lambda} is outside the contraction regime"
                        ),
                    });
                }
            } else {
                increases = 0;
            }
        }
        residuals.push(residual);
        rho = next;
        if residual < opts.tol {
            let residual_ratios = residuals
                .windows(2)
                .filter(|w| w[0] > 1e3 * opts.tol)
                .map(|w| w[1] / w[0])
                .collect();
            return Ok(TcResult {
                lambda,
                omega,
                beta0: beta_critical(omega)?,
                beta_c: beta,
                rho_c: rho,
                iterations: iteration,
                residual,
                bracket,
                residual_ratios,
            });
        }
    }
    Err(Error::NonConvergence {
        solver: "find_tc",
        iterations: opts.max_iter,
        residual: residuals.last().copied().unwrap_or(f64::INFINITY),
    })
}

/// Empirical Lipschitz ratio `‖Tρ₁ − Tρ₂‖₁ / ‖ρ₁ − ρ₂‖₁` for two unit-mass
/// densities on the same grid.
pub fn lipschitz_ratio(
    rho1: &RadialDensity,
    rho2: &RadialDensity,
    lambda: f64,
    omega: f64,
    v: &Potential,
) -> Result<f64> {
    if rho1.grid != rho2.grid {
        return Err(Error::Precondition("densities must share a grid".into()));
    }
    let denom = rho1.grid.l1_distance_3d(&rho1.values, &rho2.values);
    if denom == 0.0 {
        return Err(Error::Precondition("densities coincide".into()));
    }
    let (t1, _) = apply_t(rho1, lambda, omega, v)?;
    let (t2, _) = apply_t(rho2, lambda, omega, v)?;
    Ok(rho1.grid.l1_distance_3d(&t1.values, &t2.values) / denom)
}

/// Random unit-mass radial density: a mixture of up to three Gaussians whose
/// widths are drawn around `length`.
pub fn random_unit_density(grid: &RadialGrid, length: f64, seed: u64) -> Result<RadialDensity> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=3);
    let comps: Vec<(f64, f64)> = (0..n)
        .map(|_| (rng.gen_range(0.1..1.0), length * rng.gen_range(0.3..1.5)))
        .collect();
    let mut values: Vec<f64> = grid
        .nodes
        .iter()
        .map(|&r| {
            comps
                .iter()
                .map(|(w, s)| w * s.powi(-3) * (-0.5 * r * r / (s * s)).exp())
                .sum()
        })
        .collect();
    let m = grid.integrate_3d(&values);
    values.iter_mut().for_each(|x| *x /= m);
    RadialDensity::new(grid.clone(), values, 0.0)
}

/// `δ(r) = (v∗ρ₀)(0) − (v∗ρ₀)(r)` for the critical ideal density `ρ₀`, with a
/// Laplacian series near the origin where the difference cancels.
struct MeanFieldDip {
    rho0: RadialDensity,
    v: Potential,
    at_origin: f64,
    laplacian: f64,
    crossover: f64,
}

impl MeanFieldDip {
    fn new(omega: f64, v: &Potential) -> Result<Self> {
        let beta0 = beta_critical(omega)?;
        let grid = crate::ideal_gas::density_grid(beta0, omega, DEFAULT_GRID_POINTS)?;
        let rho0 = ideal_critical_density(omega, &grid)?;
        let at_origin = convolve_at(v, &rho0, 0.0);
        let laplacian = convolution_laplacian_at_origin(v, &rho0);
        // Below this radius the neglected r⁴ term is ~1e−12 of the r² term.
        let length = v.range().min(1.0 / (omega * beta0.sqrt()));
        Ok(Self {
            rho0,
            v: v.clone(),
            at_origin,
            laplacian,
            crossover: 1e-6 * length,
        })
    }

    fn at(&self, r: f64) -> f64 {
        if r < self.crossover {
            -r * r * self.laplacian / 6.0
        } else {
            self.at_origin - convolve_at(&self.v, &self.rho0, r)
        }
    }
}

/// `(v∗ρ₀)(0) − (v∗ρ₀)(r)` at the given radii for the critical ideal density.
pub fn mean_field_dip(omega: f64, v: &Potential, radii: &[f64]) -> Result<Vec<f64>> {
    let dip = MeanFieldDip::new(omega, v)?;
    Ok(radii.iter().map(|&r| dip.at(r)).collect())
}

/// Mean-field shift
/// `Ξ = −(β₀^{−1/2}/3) ∫ η′(β₀ω²x²/4) [(v∗ρ₀)(0) − (v∗ρ₀)(x)] dx`, a radial
/// quadrature after the momentum integral has been done in closed form.
pub fn xi_coefficient(omega: f64, v: &Potential) -> Result<f64> {
    let beta0 = beta_critical(omega)?;
    let dip = MeanFieldDip::new(omega, v)?;
    let quarter = 0.25 * omega * omega;
    let r_max = dip.rho0.grid.r_max;
    let integrand = |r: f64| {
        if r == 0.0 {
            return 0.0;
        }
        r * r * eta_prime_unchecked(beta0 * quarter * r * r) * dip.at(r)
    };
    let value = quadrature::integrate(integrand, 0.0, r_max, 1e-16, 1e-12)?;
    Ok(-4.0 * PI * value / (3.0 * beta0.sqrt()))
}

/// The same coefficient from the phase-space form
/// `(β₀/24π³) ∫∫ γ₀² e^{β₀(p² + ω²x²/4)} [(v∗ρ₀)(0) − (v∗ρ₀)(x)] dp dx`
/// by nested radial quadrature, without using `η′`.
pub fn xi_coefficient_phase_space(omega: f64, v: &Potential) -> Result<f64> {
    let beta0 = beta_critical(omega)?;
    let dip = MeanFieldDip::new(omega, v)?;
    let quarter = 0.25 * omega * omega;
    let r_max = dip.rho0.grid.r_max;
    let p_max = (2.0 * crate::ideal_gas::GRID_EXPONENT / beta0).sqrt();
    let mut failure = None;
    let outer = quadrature::integrate(
        |r| {
            if r == 0.0 {
                return 0.0;
            }
            let pot = quarter * r * r;
            // γ² e^{x} = 1/(4 sinh²(x/2)), peaked at p ~ √V.
            let f = |p: f64| {
                let half = 0.5 * beta0 * (p * p + pot);
                p * p / (4.0 * half.sinh().powi(2))
            };
            let split = (4.0 * pot.sqrt()).min(p_max);
            let inner = quadrature::integrate(f, 0.0, split, 1e-18, 1e-13)
                .and_then(|a| Ok(a + quadrature::integrate(f, split, p_max, 1e-18, 1e-13)?));
            match inner {
                Ok(x) => r * r * x * dip.at(r),
                Err(e) => {
                    failure.get_or_insert(e);
                    0.0
                }
            }
        },
        0.0,
        r_max,
        1e-16,
        1e-11,
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(beta0 / (24.0 * PI.powi(3)) * 16.0 * PI * PI * outer)
}

/// Comparison of the measured critical-temperature shift with `Ξ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeReport {
    pub omega: f64,
    pub beta0: f64,
    pub lambdas: Vec<f64>,
    pub beta_c: Vec<f64>,
    /// `(β_c(λ)/β₀ − 1)/λ` per grid point.
    pub slopes: Vec<f64>,
    /// Polynomial (Richardson) extrapolation of the slopes to `λ = 0`.
    pub extrapolated_slope: f64,
    pub xi: f64,
    /// `|extrapolated − Ξ|/Ξ`.
    pub relative_deviation: f64,
}

/// Value at zero of the interpolating polynomial through `(x_i, y_i)`
/// (Neville's scheme).
pub fn extrapolate_to_zero(xs: &[f64], ys: &[f64]) -> f64 {
    let mut p = ys.to_vec();
    let n = xs.len();
    for k in 1..n {
        for i in 0..n - k {
            p[i] = (xs[i + k] * p[i] - xs[i] * p[i + 1]) / (xs[i + k] - xs[i]);
        }
    }
    p[0]
}

/// Solves for `β_c` on `lambda_grid` and extrapolates the first-order slope.
pub fn tc_slope_check(
    omega: f64,
    v: &Potential,
    lambda_grid: &[f64],
    opts: &TcOptions,
) -> Result<SlopeReport> {
    if lambda_grid.is_empty() || lambda_grid.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::Precondition(
            "lambda grid must be nonempty and positive".into(),
        ));
    }
    let results: Vec<TcResult> = lambda_grid
        .par_iter()
        .map(|&l| find_tc(l, omega, v, opts))
        .collect::<Result<_>>()?;
    let beta0 = beta_critical(omega)?;
    let beta_c: Vec<f64> = results.iter().map(|r| r.beta_c).collect();
    let slopes: Vec<f64> = lambda_grid
        .iter()
        .zip(&beta_c)
        .map(|(l, b)| (b / beta0 - 1.0) / l)
        .collect();
    let extrapolated_slope = extrapolate_to_zero(lambda_grid, &slopes);
    let xi = xi_coefficient(omega, v)?;
    Ok(SlopeReport {
        omega,
        beta0,
        lambdas: lambda_grid.to_vec(),
        beta_c,
        slopes,
        extrapolated_slope,
        xi,
        relative_deviation: ((extrapolated_slope - xi) / xi).abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::make_gaussian_potential;

    fn gaussian() -> Potential {
        make_gaussian_potential(1.0, 1.0).unwrap()
    }

    #[test]
    fn zero_coupling_gives_ideal_critical_point() {
        let tc = find_tc(0.0, 2.0, &gaussian(), &TcOptions::default()).unwrap();
        let beta0 = beta_critical(2.0).unwrap();
        assert!(((tc.beta_c - beta0) / beta0).abs() < 1e-11);
        assert!(tc.iterations <= 2);
        let grid = tc.rho_c.grid.clone();
        let (rho, beta) = apply_t(
            &ideal_critical_density(2.0, &grid).unwrap(),
            0.0,
            2.0,
            &gaussian(),
        )
        .unwrap();
        assert!(((beta - beta0) / beta0).abs() < 1e-11);
        assert!((rho.thermal_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn interaction_raises_critical_beta_within_bracket() {
        let v = gaussian();
        let tc = find_tc(0.05, 2.0, &v, &TcOptions::default()).unwrap();
        assert!(tc.beta_c > tc.beta0);
        assert!(tc.bracket.0 <= tc.beta_c && tc.beta_c <= tc.bracket.1);
        assert!((tc.rho_c.thermal_mass() - 1.0).abs() < 1e-9);
        assert!(tc.residual_ratios.iter().all(|&k| k < 1.0));
    }

    #[test]
    fn t_output_stays_in_bracket_for_random_inputs() {
        let v = gaussian();
        let (lambda, omega) = (0.05, 2.0);
        let grid = tc_grid(lambda, omega, &v, 256).unwrap();
        let (lo, hi) = beta_bracket(lambda, omega, &v).unwrap();
        for seed in 0..10 {
            let rho = random_unit_density(&grid, 0.7, seed).unwrap();
            let (out, beta) = apply_t(&rho, lambda, omega, &v).unwrap();
            assert!(lo <= beta && beta <= hi, "seed {seed}");
            assert!((out.thermal_mass() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn xi_is_positive_and_routes_agree() {
        let v = gaussian();
        let xi = xi_coefficient(2.0, &v).unwrap();
        let direct = xi_coefficient_phase_space(2.0, &v).unwrap();
        assert!(xi > 0.0);
        assert!(((xi - direct) / xi).abs() < 1e-5, "{xi} vs {direct}");
    }

    #[test]
    fn dip_is_nonnegative_and_matches_series_near_origin() {
        let v = gaussian();
        let radii: Vec<f64> = (0..200).map(|k| 0.03 * k as f64).collect();
        let dip = mean_field_dip(2.0, &v, &radii).unwrap();
        assert!(dip.iter().all(|&d| d >= 0.0));
        let series = MeanFieldDip::new(2.0, &v).unwrap();
        let r = 1e-3;
        let direct = series.at_origin - convolve_at(&v, &series.rho0, r);
        let approx = -r * r * series.laplacian / 6.0;
        assert!(((direct - approx) / approx).abs() < 1e-5);
    }

    #[test]
    fn neville_extrapolation_is_exact_for_polynomials() {
        let xs = [0.04, 0.02, 0.01];
        let ys: Vec<f64> = xs.iter().map(|x| 0.3 + 2.0 * x - 5.0 * x * x).collect();
        assert!((extrapolate_to_zero(&xs, &ys) - 0.3).abs() < 1e-13);
    }

    #[test]
    fn bracket_requires_hessian_condition() {
        let v = gaussian();
        assert!(beta_bracket(2.0, 2.0, &v).is_err());
        let (lo, hi) = beta_bracket(0.0, 2.0, &v).unwrap();
        assert_eq!(lo, hi);
    }
}
