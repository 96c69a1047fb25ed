//! Semiclassical ideal Bose gas in a harmonic trap: critical temperature,
//! condensate fraction, chemical potential, density profile, free energy,
//! and the Fourier transform of the thermal density.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::potentials::RadialDensity;
use crate::quadrature::{self, RadialGrid};
use crate::special_functions::{eta_unchecked, polylog_exp_neg_unchecked, zeta, PolylogOrder};

/// Default number of radial nodes for density grids.
pub const DEFAULT_GRID_POINTS: usize = 512;

/// Value of `β ω² r_max²/4` at the outer edge of density grids; the Bose
/// factor there is below `e^{−45}`.
pub const GRID_EXPONENT: f64 = 45.0;

/// Ideal-gas solution at inverse temperature `beta` and trap frequency `omega`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdealState {
    pub beta: f64,
    pub omega: f64,
    /// Condensate fraction.
    pub g0: f64,
    /// Chemical potential, zero in the condensed phase.
    pub mu0: f64,
    /// Thermal density with the condensate as point mass.
    pub rho0: RadialDensity,
    pub free_energy: f64,
}

fn zeta3() -> f64 {
    zeta(3.0).expect("zeta(3) is finite")
}

fn check_positive(function: &'static str, beta: f64, omega: f64) -> Result<()> {
    if beta > 0.0 && omega > 0.0 && beta.is_finite() && omega.is_finite() {
        Ok(())
    } else {
        Err(domain(
            function,
            format!("need beta, omega > 0, got beta={beta}, omega={omega}"),
        ))
    }
}

/// Critical inverse temperature `β₀ = ζ(3)^{1/3}/ω`.
pub fn beta_critical(omega: f64) -> Result<f64> {
    check_positive("beta_critical", 1.0, omega)?;
    Ok(zeta3().cbrt() / omega)
}

/// Radial grid on which `β^{−3/2}η(βω²r²/4)` has decayed below `e^{−45}`.
pub fn density_grid(beta: f64, omega: f64, n_points: usize) -> Result<RadialGrid> {
    check_positive("density_grid", beta, omega)?;
    RadialGrid::gauss_legendre((4.0 * GRID_EXPONENT / beta).sqrt() / omega, n_points)
}

/// `βμ₀` for the normal phase, from `Li₃(e^{βμ₀}) = (βω)³`.
fn solve_beta_mu(beta_omega: f64) -> Result<f64> {
    let target = beta_omega.powi(3);
    let mass = |x: f64| polylog_exp_neg_unchecked(PolylogOrder::Three, -x);
    let (mut lo, mut hi) = (-50.0, 0.0);
    if mass(lo) > target {
        return Err(Error::Bracket {
            solver: "ideal_state",
            detail: format!("beta*omega = {beta_omega} requires beta*mu below -50"),
        });
    }
    while hi - lo > 1e-14 * lo.abs().max(1.0) {
        let mid = 0.5 * (lo + hi);
        if mass(mid) > target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Condensate fraction and chemical potential at `(β, ω)`.
pub fn ideal_fraction_and_mu(beta: f64, omega: f64) -> Result<(f64, f64)> {
    check_positive("ideal_state", beta, omega)?;
    let beta_omega = beta * omega;
    let thermal = zeta3() / beta_omega.powi(3);
    if thermal <= 1.0 {
        Ok((1.0 - thermal, 0.0))
    } else {
        Ok((0.0, solve_beta_mu(beta_omega)? / beta))
    }
}

/// Thermal density `β^{−3/2} η(β(ω²r²/4 − μ))`.
pub fn ideal_density_at(r: f64, beta: f64, omega: f64, mu: f64) -> f64 {
    beta.powf(-1.5) * eta_unchecked(beta * (0.25 * omega * omega * r * r - mu))
}

/// Ideal-gas state on the default grid.
pub fn ideal_state(beta: f64, omega: f64) -> Result<IdealState> {
    ideal_state_on(beta, omega, density_grid(beta, omega, DEFAULT_GRID_POINTS)?)
}

/// Ideal-gas state with the density sampled on a caller-supplied grid.
pub fn ideal_state_on(beta: f64, omega: f64, grid: RadialGrid) -> Result<IdealState> {
    let (g0, mu0) = ideal_fraction_and_mu(beta, omega)?;
    let values = grid
        .nodes
        .iter()
        .map(|&r| ideal_density_at(r, beta, omega, mu0))
        .collect();
    Ok(IdealState {
        beta,
        omega,
        g0,
        mu0,
        rho0: RadialDensity::new(grid, values, g0)?,
        free_energy: ideal_free_energy(beta, omega)?,
    })
}

/// Minimal free energy of the ideal gas:
/// `−ζ(4)/(β(βω)³)` when condensed, `−Li₄(e^{βμ₀})/(β(βω)³) + μ₀` otherwise.
pub fn ideal_free_energy(beta: f64, omega: f64) -> Result<f64> {
    let (_, mu0) = ideal_fraction_and_mu(beta, omega)?;
    let pressure = polylog_exp_neg_unchecked(PolylogOrder::Four, -beta * mu0);
    Ok(-pressure / (beta * (beta * omega).powi(3)) + mu0)
}

/// Fourier transform `ρ̂₀(p) = (2π)^{−3/2} ∫ ρ₀ᵗʰ(x) e^{−ip·x} dx` of the
/// thermal ideal density, from its Gaussian-series representation
/// `(2π)^{−3/2} (βω)^{−3} Σ_α α^{−3} e^{αβμ₀} e^{−p²/(αβω²)}`.
pub fn rho0_fourier(p: f64, beta: f64, omega: f64) -> Result<f64> {
    let (_, mu0) = ideal_fraction_and_mu(beta, omega)?;
    let c = p * p / (beta * omega * omega);
    let bm = beta * mu0;
    let term = |alpha: f64| alpha.powi(-3) * (alpha * bm - c / alpha).exp();
    const K: usize = 256;
    let head: f64 = (1..K).map(|a| term(a as f64)).sum();
    // Euler–Maclaurin for Σ_{α≥K}: ∫_K^∞ + f(K)/2 − f′(K)/12.
    let k = K as f64;
    let fk = term(k);
    let dfk = fk * (-3.0 / k + bm + c / (k * k));
    let tail_integral = if bm == 0.0 {
        // ∫_K^∞ α^{−3} e^{−c/α} dα = ∫_0^{1/K} u e^{−cu} du
        let u = 1.0 / k;
        if c * u < 1e-6 {
            u * u / 2.0 - c * u * u * u / 3.0
        } else {
            (1.0 - (-c * u).exp() * (1.0 + c * u)) / (c * c)
        }
    } else {
        quadrature::integrate_to_infinity(term, k, 1e-18, 1e-12)?
    };
    let sum = head + tail_integral + 0.5 * fk - dfk / 12.0;
    Ok((2.0 * std::f64::consts::PI).powf(-1.5) * sum / (beta * omega).powi(3))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    const ZETA3: f64 = 1.202_056_903_159_594_3;
    const ZETA4: f64 = 1.082_323_233_711_138_2;

    #[test]
    fn critical_beta_examples() {
        let b1 = beta_critical(1.0).unwrap();
        assert!((b1 - 1.063_265_385_316_368_5).abs() < 1e-15);
        assert!((beta_critical(2.0).unwrap() - 0.5 * b1).abs() < 1e-15);
        assert!(beta_critical(0.0).is_err());
    }

    #[test]
    fn condensed_fraction_at_twice_critical() {
        let beta = 2.0 * ZETA3.cbrt();
        let state = ideal_state(beta, 1.0).unwrap();
        assert!((state.g0 - 0.875).abs() < 1e-14);
        assert_eq!(state.mu0, 0.0);
        assert!((state.rho0.total_mass() - 1.0).abs() < 1e-10);
        let f = -ZETA4 / (beta * 8.0 * ZETA3);
        assert!((state.free_energy - f).abs() < 1e-15);
        assert!((state.free_energy + 0.052_926_149_134_194_13).abs() < 1e-14);
    }

    #[test]
    fn critical_point_has_no_condensate() {
        let state = ideal_state(ZETA3.cbrt(), 1.0).unwrap();
        assert!(state.g0.abs() < 1e-14);
        assert_eq!(state.mu0, 0.0);
        assert!((state.rho0.thermal_mass() - 1.0).abs() < 1e-10);
    }

    fn normalisation_by_phase_space_quadrature(beta: f64, omega: f64, mu: f64) -> f64 {
        // (2π)^{−3} (4π)² ∫∫ p² r² / (e^{β(p² + ω²r²/4 − μ)} − 1) dp dr
        let inner = |r: f64| {
            let v = 0.25 * omega * omega * r * r - mu;
            quadrature::integrate_to_infinity(
                |p| p * p / (beta * (p * p + v)).exp_m1(),
                0.0,
                1e-14,
                1e-12,
            )
            .unwrap()
        };
        let outer =
            quadrature::integrate_to_infinity(|r| r * r * inner(r), 0.0, 1e-13, 1e-11).unwrap();
        16.0 * PI * PI * outer / (8.0 * PI.powi(3))
    }

    #[test]
    fn normal_phase_mu_matches_quadrature() {
        let beta = 0.8 * ZETA3.cbrt();
        let state = ideal_state(beta, 1.0).unwrap();
        assert_eq!(state.g0, 0.0);
        assert!(state.mu0 < 0.0);
        let mass = normalisation_by_phase_space_quadrature(beta, 1.0, state.mu0);
        assert!((mass - 1.0).abs() < 1e-8, "mass {mass}");
        assert!((state.rho0.thermal_mass() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn free_energy_matches_phase_space_quadrature() {
        // F₀ = (2π)^{−3}∫ β^{−1} ln(1 − e^{−β(p²+V−μ)}) + μ, written as a 2D radial integral.
        for &(beta, omega) in &[(2.0 * ZETA3.cbrt(), 1.0), (0.8 * ZETA3.cbrt() / 1.5, 1.5)] {
            let (_, mu) = ideal_fraction_and_mu(beta, omega).unwrap();
            let inner = |r: f64| {
                let v = 0.25 * omega * omega * r * r - mu;
                quadrature::integrate_to_infinity(
                    |p| p * p * (-(-beta * (p * p + v)).exp()).ln_1p(),
                    0.0,
                    1e-15,
                    1e-12,
                )
                .unwrap()
            };
            let outer =
                quadrature::integrate_to_infinity(|r| r * r * inner(r), 0.0, 1e-14, 1e-11).unwrap();
            let f = 16.0 * PI * PI * outer / (8.0 * PI.powi(3)) / beta + mu;
            let exact = ideal_free_energy(beta, omega).unwrap();
            assert!(((f - exact) / exact).abs() < 1e-7, "{f} vs {exact}");
        }
    }

    #[test]
    fn fraction_and_mu_are_monotone_and_continuous() {
        let b0 = beta_critical(1.0).unwrap();
        let mut prev = (0.0, f64::NEG_INFINITY);
        let mut prev_f = f64::NEG_INFINITY;
        for k in 0..=60 {
            let beta = b0 * (0.6 + 0.02 * k as f64);
            let (g, mu) = ideal_fraction_and_mu(beta, 1.0).unwrap();
            assert!(g >= prev.0 - 1e-15 && g <= 1.0);
            assert!(mu <= 0.0 && g * mu == 0.0);
            if beta < b0 * (1.0 - 1e-9) {
                assert!(mu < 0.0);
            }
            if k > 0 {
                assert!((g - prev.0).abs() < 0.1 && (mu - prev.1).abs() < 0.4);
            }
            let f = ideal_free_energy(beta, 1.0).unwrap();
            // F decreases with temperature, i.e. increases with β.
            assert!(f >= prev_f - 1e-15);
            prev = (g, mu);
            prev_f = f;
        }
    }

    #[test]
    fn fourier_transform_examples() {
        let beta = beta_critical(1.0).unwrap();
        let at_zero = rho0_fourier(0.0, beta, 1.0).unwrap();
        assert!((at_zero - (2.0 * PI).powf(-1.5)).abs() < 1e-12);
        let state = ideal_state(beta, 1.0).unwrap();
        for &p in &[0.3, 1.0, 2.5, 6.0] {
            let direct = quadrature::integrate(
                |r| {
                    let x = p * r;
                    r * r * ideal_density_at(r, beta, 1.0, 0.0) * x.sin() / x
                },
                1e-300,
                state.rho0.grid.r_max,
                1e-14,
                1e-12,
            )
            .unwrap()
                * 4.0
                * PI
                * (2.0 * PI).powf(-1.5);
            let series = rho0_fourier(p, beta, 1.0).unwrap();
            assert!(
                (direct - series).abs() < 1e-9,
                "p = {p}: {direct} vs {series}"
            );
            assert!(series > 0.0);
        }
        // Normal phase uses the integrated tail.
        let hot = 0.7 * beta;
        let mass = ideal_state(hot, 1.0).unwrap().rho0.thermal_mass();
        assert!(
            (rho0_fourier(0.0, hot, 1.0).unwrap() - mass * (2.0 * PI).powf(-1.5)).abs() < 1e-10
        );
    }

    proptest::proptest! {
        #[test]
        fn fourier_transform_is_nonnegative(p in 0.0f64..40.0, t in 0.6f64..3.0) {
            let beta = t * beta_critical(1.0).unwrap();
            proptest::prop_assert!(rho0_fourier(p, beta, 1.0).unwrap() >= 0.0);
        }

        #[test]
        fn total_mass_is_one(t in 0.7f64..3.0, omega in 0.5f64..3.0) {
            let beta = t * beta_critical(omega).unwrap();
            let state = ideal_state(beta, omega).unwrap();
            proptest::prop_assert!((state.rho0.total_mass() - 1.0).abs() < 1e-8);
        }
    }
}
