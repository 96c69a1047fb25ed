//! Finite-N grand-canonical Hartree solver in the mean-field scaling
//! `ħ = N^{−1/3}`, interaction `v/N`, for a harmonic trap.
//!
//! The one-body operator `h = −ħ²Δ + ω²|x|²/4 + (v∗ϱ)/N` is radial, so it is
//! diagonalised channel by channel in angular momentum `ℓ` with second-order
//! finite differences on a uniform grid with Dirichlet ends. The density is
//! `ϱ(r) = (4π)^{−1} Σ (2ℓ+1) n_{nℓ} |u_{nℓ}(r)|²/r²` with Bose occupations
//! `n = (e^{β(e−μ)} − 1)^{−1}`, and the loop is damped until `ϱ` is
//! reproduced.
//!
//! Husimi functions use the Gaussian window `ℓ(x) = π^{−3/4}e^{−x²/2}`, for
//! which the overlap of a coherent state with a radial mode reduces to a
//! one-dimensional integral against a modified spherical Bessel function of
//! complex argument.

use std::f64::consts::PI;

use nalgebra::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potentials::{
    convolve_at_points, interaction_energy, require_valid, Potential, RadialDensity,
};
use crate::quadrature::{integrate_to_infinity, RadialGrid};
use crate::sc_solver::SCState;
use crate::special_functions::bose_entropy_f_unchecked;
use crate::tridiagonal::SymTridiagonal;

/// Interior points of the radial finite-difference grid.
pub const DEFAULT_HARTREE_GRID: usize = 2048;

/// Levels with `β(e − e₀)` above this value are discarded; the Bose weight
/// at the cutoff is then below `1e−10`.
pub const DEFAULT_CUTOFF_EXPONENT: f64 = 23.0;

/// Largest admissible estimated occupation beyond the cutoff, relative to N.
pub const CUTOFF_TAIL_LIMIT: f64 = 1e-6;

/// Lower end, upper end and default sample count of the comparison rays,
/// in the thermal variable `t = √β·|p|`.
pub const RAY_T_MIN: f64 = 0.5;
pub const RAY_T_MAX: f64 = 3.0;
pub const DEFAULT_RAY_SAMPLES: usize = 11;

/// Half-width of the radial window, in units of `√ħ`, outside which the
/// coherent state is negligible.
const WINDOW_HALF_WIDTH: f64 = 9.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HartreeOptions {
    pub n_grid: usize,
    /// Tolerance on `‖ϱ_out − ϱ_in‖_{L¹}/N`.
    pub tol: f64,
    pub max_iter: usize,
    /// Initial mixing weight of the new density.
    pub damping: f64,
    pub cutoff_exponent: f64,
    pub validate: bool,
}

impl Default for HartreeOptions {
    fn default() -> Self {
        Self {
            n_grid: DEFAULT_HARTREE_GRID,
            tol: 1e-9,
            max_iter: 200,
            damping: 0.8,
            cutoff_exponent: DEFAULT_CUTOFF_EXPONENT,
            validate: true,
        }
    }
}

/// Eigenvalues and occupations of one angular-momentum channel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HartreeChannel {
    pub ell: usize,
    pub eigenvalues: Vec<f64>,
    pub occupations: Vec<f64>,
}

/// Self-consistent Hartree state. Radial eigenfunctions are not stored; they
/// are regenerated on demand by [`HartreeState::radial_eigenfunction`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HartreeState {
    pub n_particles: f64,
    pub hbar: f64,
    pub beta: f64,
    pub omega: f64,
    /// Full interaction (coupling applied); the mean field is `(v∗ϱ)/N`.
    pub potential: Potential,
    pub grid: RadialGrid,
    /// `(v∗ϱ)(r)/N` on the grid nodes, the field that generated the spectrum.
    pub mean_field: Vec<f64>,
    pub channels: Vec<HartreeChannel>,
    pub mu: f64,
    /// Density with total mass N.
    pub rho: RadialDensity,
    /// Occupation of the ground mode.
    pub n0: f64,
    /// `e₁ − e₀` over all channels.
    pub gap: f64,
    pub free_energy: f64,
    /// `‖ϱ_out − ϱ_in‖_{L¹}/N` at the last iteration.
    pub residual: f64,
    pub iterations: usize,
    pub cutoff_energy: f64,
    /// Estimated occupation above the cutoff.
    pub cutoff_tail: f64,
}

/// Compact JSON-friendly view of a [`HartreeState`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HartreeSummary {
    pub n_particles: f64,
    pub hbar: f64,
    pub beta: f64,
    pub omega: f64,
    pub coupling: f64,
    pub mu: f64,
    pub n0: f64,
    pub condensate_fraction: f64,
    pub gap: f64,
    pub gap_over_hbar_omega: f64,
    pub free_energy: f64,
    pub residual: f64,
    pub iterations: usize,
    pub ell_max: usize,
    pub levels: usize,
    pub cutoff_energy: f64,
    pub cutoff_tail: f64,
    /// Lowest levels as `(ℓ, n_r, e, occupation)`.
    pub spectrum_head: Vec<(usize, usize, f64, f64)>,
    pub r: Vec<f64>,
    pub rho: Vec<f64>,
}

struct Setup {
    n: f64,
    hbar: f64,
    beta: f64,
    omega: f64,
    grid: RadialGrid,
    h: f64,
}

impl Setup {
    fn new(n: f64, beta: f64, omega: f64, n_grid: usize) -> Result<Self> {
        let hbar = n.powf(-1.0 / 3.0);
        // ω²R²/4 ≥ 40/β and ≥ 40ħω.
        let r_max = 2.0 / omega * (40.0 * (1.0 / beta).max(hbar * omega)).sqrt();
        let grid = RadialGrid::uniform_interior(r_max, n_grid)?;
        let h = grid.uniform_spacing().expect("uniform grid");
        Ok(Self {
            n,
            hbar,
            beta,
            omega,
            grid,
            h,
        })
    }

    fn from_state(state: &HartreeState) -> Self {
        Self {
            n: state.n_particles,
            hbar: state.hbar,
            beta: state.beta,
            omega: state.omega,
            h: state.grid.uniform_spacing().expect("uniform grid"),
            grid: state.grid.clone(),
        }
    }

    fn hbar_omega(&self) -> f64 {
        self.hbar * self.omega
    }

    fn channel(&self, mean_field: &[f64], ell: usize) -> SymTridiagonal {
        let k = self.hbar * self.hbar / (self.h * self.h);
        let centrifugal = self.hbar * self.hbar * (ell * (ell + 1)) as f64;
        let w2 = 0.25 * self.omega * self.omega;
        let diag = self
            .grid
            .nodes
            .iter()
            .zip(mean_field)
            .map(|(&r, &m)| 2.0 * k + centrifugal / (r * r) + w2 * r * r + m)
            .collect();
        SymTridiagonal::new(diag, -k)
    }
}

#[derive(Clone, Debug)]
struct Spectrum {
    channels: Vec<Vec<f64>>,
    e0: f64,
    cutoff: f64,
}

impl Spectrum {
    /// `(degeneracy, β(e − e₀))` for every level.
    fn levels(&self, beta: f64) -> Vec<(f64, f64)> {
        self.channels
            .iter()
            .enumerate()
            .flat_map(|(ell, es)| {
                let deg = (2 * ell + 1) as f64;
                es.iter().map(move |&e| (deg, beta * (e - self.e0)))
            })
            .collect()
    }
}

fn compute_spectrum(
    setup: &Setup,
    mean_field: &[f64],
    previous: Option<&Spectrum>,
    cutoff_exponent: f64,
) -> Result<Spectrum> {
    let hw = setup.hbar_omega();
    let ground = setup.channel(mean_field, 0);
    let guess = match previous {
        Some(s) => s.e0,
        None => {
            let (lo, hi) = ground.gershgorin();
            ground.bisect_eigenvalue(0, lo, hi, 0.05 * hw)
        }
    };
    let e0 = ground.eigenvalue_near(0, guess, hw)?;
    let cutoff = e0 + cutoff_exponent / setup.beta;
    let mut ell_max = 0;
    while setup.channel(mean_field, ell_max + 1).sturm_count(cutoff) > 0 {
        ell_max += 1;
    }
    let channels = (0..=ell_max)
        .into_par_iter()
        .map(|ell| {
            let guesses = previous
                .and_then(|s| s.channels.get(ell))
                .map(Vec::as_slice)
                .unwrap_or(&[]);
            setup
                .channel(mean_field, ell)
                .eigenvalues_below(cutoff, guesses, 2.0 * hw)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Spectrum {
        channels,
        e0,
        cutoff,
    })
}

fn occupation(x: f64) -> f64 {
    1.0 / x.exp_m1()
}

/// Solves `Σ (2ℓ+1)/(e^{x+d} − 1) = N` for `d = β(e₀ − μ) > 0`.
fn solve_offset(levels: &[(f64, f64)], n: f64) -> Result<f64> {
    let count = |d: f64| {
        levels
            .iter()
            .map(|&(g, x)| g * occupation(x + d))
            .sum::<f64>()
    };
    // The ground level alone holds N particles at d = ln(1 + 1/N).
    let mut lo = (1.0 / n).ln_1p();
    let mut hi = 1.0;
    while count(hi) > n {
        hi *= 2.0;
        if hi > 1e4 {
            return Err(Error::Bracket {
                solver: "hartree chemical potential",
                detail: "occupation does not fall below N".into(),
            });
        }
    }
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if count(mid) > n {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi / lo - 1.0 < 1e-15 {
            break;
        }
    }
    let d = (lo * hi).sqrt();
    let total = count(d);
    if (total - n).abs() > 1e-6 * n {
        return Err(Error::Bracket {
            solver: "hartree chemical potential",
            detail: format!("total occupation {total} differs from N = {n}"),
        });
    }
    Ok(d)
}

/// Density (mass N) from the spectrum and the offset `d = β(e₀ − μ)`.
fn build_density(setup: &Setup, mean_field: &[f64], spectrum: &Spectrum, d: f64) -> Vec<f64> {
    let m = setup.grid.len();
    let hw = setup.hbar_omega();
    let floor = 1e-15 * setup.n;
    let acc = spectrum
        .channels
        .par_iter()
        .enumerate()
        .fold(
            || vec![0.0; m],
            |mut acc, (ell, es)| {
                let matrix = setup.channel(mean_field, ell);
                let deg = (2 * ell + 1) as f64;
                for &e in es {
                    let w = deg * occupation(setup.beta * (e - spectrum.e0) + d);
                    if w < floor {
                        continue;
                    }
                    let u = matrix.eigenvector(e, hw);
                    for (a, x) in acc.iter_mut().zip(&u) {
                        *a += w * x * x;
                    }
                }
                acc
            },
        )
        .reduce(
            || vec![0.0; m],
            |mut a, b| {
                a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
                a
            },
        );
    // Unit Euclidean vectors u satisfy Σ h (u/√h)² = 1.
    acc.iter()
        .zip(&setup.grid.nodes)
        .map(|(&a, &r)| a / (setup.h * 4.0 * PI * r * r))
        .collect()
}

fn mean_field_of(setup: &Setup, v: &Potential, rho: &RadialDensity) -> Result<Vec<f64>> {
    if v.coupling == 0.0 {
        return Ok(vec![0.0; setup.grid.len()]);
    }
    let scaled = RadialDensity {
        values: rho.values.iter().map(|x| x / setup.n).collect(),
        point_mass: rho.point_mass / setup.n,
        grid: rho.grid.clone(),
    };
    let values = convolve_at_points(v, &scaled, &setup.grid.nodes);
    if values.iter().any(|x| !x.is_finite()) {
        return Err(Error::Quadrature("non-finite Hartree mean field".into()));
    }
    Ok(values)
}

/// Occupation above the cutoff estimated with the oscillator density of
/// states `(E − e₀ + 3ħω/2)²/(2(ħω)³)`.
fn cutoff_tail(setup: &Setup, spectrum: &Spectrum, d: f64) -> Result<f64> {
    let hw = setup.hbar_omega();
    let beta = setup.beta;
    let y_cut = spectrum.cutoff - spectrum.e0;
    integrate_to_infinity(
        |y| {
            let g = (y + 1.5 * hw).powi(2) / (2.0 * hw.powi(3));
            g * occupation(beta * y + d)
        },
        y_cut,
        1e-12 * setup.n,
        1e-8,
    )
}

/// Solves the Hartree equation for `n` particles.
pub fn solve_hartree(
    n: usize,
    beta: f64,
    omega: f64,
    v: &Potential,
    opts: &HartreeOptions,
) -> Result<HartreeState> {
    if n < 10 {
        return Err(Error::Precondition(format!("need N >= 10, got {n}")));
    }
    if !(beta > 0.0 && beta.is_finite() && omega > 0.0 && omega.is_finite()) {
        return Err(Error::Precondition(
            "beta and omega must be positive and finite".into(),
        ));
    }
    if !(opts.tol > 0.0 && opts.damping > 0.0 && opts.damping <= 1.0 && opts.cutoff_exponent > 0.0)
    {
        return Err(Error::Precondition("invalid Hartree options".into()));
    }
    if opts.validate && v.coupling != 0.0 {
        require_valid(v, omega)?;
    }
    let setup = Setup::new(n as f64, beta, omega, opts.n_grid)?;
    let nf = setup.n;
    let m = setup.grid.len();

    let mut mean_field = vec![0.0; m];
    let mut spectrum = compute_spectrum(&setup, &mean_field, None, opts.cutoff_exponent)?;
    let mut d = solve_offset(&spectrum.levels(beta), nf)?;
    let mut rho_out = build_density(&setup, &mean_field, &spectrum, d);
    let mut residual = 0.0;
    let mut iterations = 1;

    if v.coupling != 0.0 {
        let mut rho_in = rho_out.clone();
        let mut theta = opts.damping;
        let mut prev_residual = f64::INFINITY;
        let mut converged = false;
        for iter in 1..=opts.max_iter {
            iterations = iter;
            let density = RadialDensity::new(setup.grid.clone(), rho_in.clone(), 0.0)?;
            mean_field = mean_field_of(&setup, v, &density)?;
            spectrum =
                compute_spectrum(&setup, &mean_field, Some(&spectrum), opts.cutoff_exponent)?;
            d = solve_offset(&spectrum.levels(beta), nf)?;
            rho_out = build_density(&setup, &mean_field, &spectrum, d);
            residual = setup.grid.l1_distance_3d(&rho_out, &rho_in) / nf;
            if residual < opts.tol {
                converged = true;
                break;
            }
            if residual > prev_residual {
                theta = (0.5 * theta).max(0.05);
            }
            prev_residual = residual;
            for (a, b) in rho_in.iter_mut().zip(&rho_out) {
                *a = (1.0 - theta) * *a + theta * b;
            }
        }
        if !converged {
            return Err(Error::NonConvergence {
                solver: "solve_hartree",
                iterations,
                residual,
            });
        }
    }

    let tail = cutoff_tail(&setup, &spectrum, d)?;
    if tail > CUTOFF_TAIL_LIMIT * nf {
        return Err(Error::CutoffTooLow(format!(
            "estimated occupation {tail:e} above E_cut = {} exceeds {:e}",
            spectrum.cutoff,
            CUTOFF_TAIL_LIMIT * nf
        )));
    }
    finish_state(
        setup, v, mean_field, spectrum, d, rho_out, residual, iterations, tail,
    )
}

#[allow(clippy::too_many_arguments)]
fn finish_state(
    setup: Setup,
    v: &Potential,
    mean_field: Vec<f64>,
    spectrum: Spectrum,
    d: f64,
    rho_values: Vec<f64>,
    residual: f64,
    iterations: usize,
    cutoff_tail: f64,
) -> Result<HartreeState> {
    let beta = setup.beta;
    let mu = spectrum.e0 - d / beta;
    let channels: Vec<HartreeChannel> = spectrum
        .channels
        .iter()
        .enumerate()
        .map(|(ell, es)| HartreeChannel {
            ell,
            occupations: es
                .iter()
                .map(|&e| occupation(beta * (e - spectrum.e0) + d))
                .collect(),
            eigenvalues: es.clone(),
        })
        .collect();
    let n0 = channels[0].occupations[0];
    let hw = setup.hbar_omega();
    let second = |ell: usize, k: usize| -> Result<f64> {
        match spectrum.channels.get(ell).and_then(|es| es.get(k)) {
            Some(&e) => Ok(e),
            None => {
                let matrix = setup.channel(&mean_field, ell);
                let (lo, hi) = matrix.gershgorin();
                let guess = matrix.bisect_eigenvalue(k, lo, hi, 0.05 * hw);
                matrix.eigenvalue_near(k, guess, hw)
            }
        }
    };
    let gap = second(0, 1)?.min(second(1, 0)?) - spectrum.e0;
    let rho = RadialDensity::new(setup.grid.clone(), rho_values, 0.0)?;
    let interaction = if v.coupling == 0.0 {
        0.0
    } else {
        interaction_energy(&rho, &rho, v)?
    };
    let one_body: f64 = channels
        .iter()
        .map(|c| {
            let deg = (2 * c.ell + 1) as f64;
            deg * c
                .eigenvalues
                .iter()
                .zip(&c.occupations)
                .map(|(&e, &n)| n * e + bose_entropy_f_unchecked(n) / beta)
                .sum::<f64>()
        })
        .sum();
    Ok(HartreeState {
        n_particles: setup.n,
        hbar: setup.hbar,
        beta,
        omega: setup.omega,
        potential: v.clone(),
        grid: setup.grid,
        mean_field,
        channels,
        mu,
        rho,
        n0,
        gap,
        free_energy: one_body - interaction / setup.n,
        residual,
        iterations,
        cutoff_energy: spectrum.cutoff,
        cutoff_tail,
    })
}

impl HartreeState {
    pub fn ground_energy(&self) -> f64 {
        self.channels[0].eigenvalues[0]
    }

    pub fn ell_max(&self) -> usize {
        self.channels.len() - 1
    }

    pub fn level_count(&self) -> usize {
        self.channels.iter().map(|c| c.eigenvalues.len()).sum()
    }

    /// `Σ (2ℓ+1) n_{nℓ}`.
    pub fn total_occupation(&self) -> f64 {
        self.channels
            .iter()
            .map(|c| (2 * c.ell + 1) as f64 * c.occupations.iter().sum::<f64>())
            .sum()
    }

    /// Finite-difference matrix of channel `ell` for the stored mean field.
    pub fn channel_operator(&self, ell: usize) -> SymTridiagonal {
        Setup::from_state(self).channel(&self.mean_field, ell)
    }

    /// Radial eigenfunction `u_{kℓ}` on the grid nodes, normalised so that
    /// `∫ u² dr = 1` and positive near the origin.
    pub fn radial_eigenfunction(&self, ell: usize, k: usize) -> Result<Vec<f64>> {
        let e = *self
            .channels
            .get(ell)
            .and_then(|c| c.eigenvalues.get(k))
            .ok_or_else(|| {
                Error::Precondition(format!("no level (ℓ={ell}, n={k}) below the cutoff"))
            })?;
        let h = self.grid.uniform_spacing().expect("uniform grid");
        let u = self
            .channel_operator(ell)
            .eigenvector(e, self.hbar * self.omega);
        Ok(u.into_iter().map(|x| x / h.sqrt()).collect())
    }

    /// Levels sorted by energy as `(ℓ, n_r, e, occupation)`.
    pub fn spectrum_head(&self, count: usize) -> Vec<(usize, usize, f64, f64)> {
        let mut all: Vec<_> = self
            .channels
            .iter()
            .flat_map(|c| {
                c.eigenvalues
                    .iter()
                    .zip(&c.occupations)
                    .enumerate()
                    .map(move |(k, (&e, &n))| (c.ell, k, e, n))
            })
            .collect();
        all.sort_by(|a, b| a.2.total_cmp(&b.2));
        all.truncate(count);
        all
    }

    pub fn summary(&self, head: usize) -> HartreeSummary {
        HartreeSummary {
            n_particles: self.n_particles,
            hbar: self.hbar,
            beta: self.beta,
            omega: self.omega,
            coupling: self.potential.coupling,
            mu: self.mu,
            n0: self.n0,
            condensate_fraction: condensate_fraction(self),
            gap: self.gap,
            gap_over_hbar_omega: self.gap / (self.hbar * self.omega),
            free_energy: self.free_energy,
            residual: self.residual,
            iterations: self.iterations,
            ell_max: self.ell_max(),
            levels: self.level_count(),
            cutoff_energy: self.cutoff_energy,
            cutoff_tail: self.cutoff_tail,
            spectrum_head: self.spectrum_head(head),
            r: self.grid.nodes.clone(),
            rho: self.rho.values.clone(),
        }
    }
}

/// Largest single-mode occupation divided by N.
pub fn condensate_fraction(state: &HartreeState) -> f64 {
    state
        .channels
        .iter()
        .flat_map(|c| c.occupations.iter().copied())
        .fold(0.0, f64::max)
        / state.n_particles
}

/// `e₁ − e₀` over all channels.
pub fn spectral_gap(state: &HartreeState) -> f64 {
    state.gap
}

/// `(βħω)³ Σ_{modes ≠ ground} (2ℓ+1) ζ(β(e − μ))` with
/// `ζ(t) = (1 + e^t)/(e^t − 1)²`.
pub fn scaled_excited_trace(state: &HartreeState) -> f64 {
    let beta = state.beta;
    let sum: f64 = state
        .channels
        .iter()
        .map(|c| {
            let deg = (2 * c.ell + 1) as f64;
            let skip = usize::from(c.ell == 0);
            deg * c
                .eigenvalues
                .iter()
                .skip(skip)
                .map(|&e| {
                    let t = beta * (e - state.mu);
                    let em1 = t.exp_m1();
                    (2.0 + em1) / (em1 * em1)
                })
                .sum::<f64>()
        })
        .sum();
    sum * (beta * state.hbar * state.omega).powi(3)
}

/// Dual functional `β^{−1}Σ(2ℓ+1)ln(1 − e^{−β(e[η]−μ)}) + μN − D(η,η)/N`,
/// where `e[η]` is the spectrum of `h + v∗η/N` and `μ` fixes the particle
/// number to N. `eta` is resampled onto the state's grid when needed.
pub fn dual_objective(eta: &RadialDensity, state: &HartreeState) -> Result<f64> {
    let setup = Setup::from_state(state);
    let eta = if eta.grid == state.grid {
        eta.clone()
    } else {
        let values = state.grid.nodes.iter().map(|&r| eta.value_at(r)).collect();
        RadialDensity::new(state.grid.clone(), values, eta.point_mass)?
    };
    let v = &state.potential;
    let mean_field = mean_field_of(&setup, v, &eta)?;
    let cutoff_exponent = state.beta * (state.cutoff_energy - state.ground_energy());
    let previous = Spectrum {
        channels: state
            .channels
            .iter()
            .map(|c| c.eigenvalues.clone())
            .collect(),
        e0: state.ground_energy(),
        cutoff: state.cutoff_energy,
    };
    let spectrum = compute_spectrum(&setup, &mean_field, Some(&previous), cutoff_exponent)?;
    let levels = spectrum.levels(state.beta);
    let d = solve_offset(&levels, setup.n)
        .map_err(|e| Error::Precondition(format!("no feasible chemical potential: {e}")))?;
    let mu = spectrum.e0 - d / state.beta;
    let log_sum: f64 = levels
        .iter()
        .map(|&(g, x)| g * (-(-(x + d)).exp_m1()).ln())
        .sum();
    let interaction = if v.coupling == 0.0 {
        0.0
    } else {
        interaction_energy(&eta, &eta, v)?
    };
    Ok(log_sum / state.beta + mu * setup.n - interaction / setup.n)
}

/// Direction pattern of a phase-space ray.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Ray {
    /// `p` and `q` both along the z axis.
    Parallel,
    /// `q` along z, `p` along x.
    Perpendicular,
}

impl Ray {
    pub const BOTH: [Ray; 2] = [Ray::Parallel, Ray::Perpendicular];

    pub fn name(self) -> &'static str {
        match self {
            Ray::Parallel => "parallel",
            Ray::Perpendicular => "perpendicular",
        }
    }

    /// Phase-space point `(p, q)` at thermal parameter `t`:
    /// `|p| = t/√β`, `|q| = 2t/(ω√β)`.
    pub fn point(self, t: f64, beta: f64, omega: f64) -> ([f64; 3], [f64; 3]) {
        let p = t / beta.sqrt();
        let q = 2.0 * t / (omega * beta.sqrt());
        match self {
            Ray::Parallel => ([0.0, 0.0, p], [0.0, 0.0, q]),
            Ray::Perpendicular => ([p, 0.0, 0.0], [0.0, 0.0, q]),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HusimiSample {
    pub ray: Ray,
    pub t: f64,
    pub p: [f64; 3],
    pub q: [f64; 3],
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HusimiSlice {
    pub samples: Vec<HusimiSample>,
    /// Description of the coherent-state window.
    pub window: String,
    /// Largest occupation of the sampled operator.
    pub largest_occupation: f64,
}

/// Which operator the Husimi function is taken of.
#[derive(Clone, Debug, PartialEq)]
pub enum ModeWeights {
    /// `γ` itself.
    All,
    /// `Qγ`, the ground mode removed.
    ExcludeGround,
    /// `Σ w |φ_{kℓm}⟩⟨φ_{kℓm}|` summed over m, entries `(ℓ, k, w)`.
    Custom(Vec<(usize, usize, f64)>),
}

/// `ln i_ℓ(z)` for `ℓ = 0..=lmax` as (log modulus, phase), for `Re z ≥ 0`.
pub(crate) fn log_bessel_i(z: Complex<f64>, lmax: usize) -> Vec<(f64, f64)> {
    let az = z.norm();
    if az == 0.0 {
        let mut out = vec![(f64::NEG_INFINITY, 0.0); lmax + 1];
        out[0] = (0.0, 0.0);
        return out;
    }
    if az < 1e-9 {
        // Leading term z^ℓ/(2ℓ+1)!!; the correction is below 1e−18.
        let mut log_dfact = 0.0;
        return (0..=lmax)
            .map(|l| {
                log_dfact += ((2 * l + 1) as f64).ln();
                (l as f64 * az.ln() - log_dfact, l as f64 * z.arg())
            })
            .collect();
    }
    let log_i0 = if az < 0.5 {
        series_i(z, 0).ln()
    } else {
        z + (1.0 - (-2.0 * z).exp()).ln() - (2.0 * z).ln()
    };
    let log_i1 = if az < 0.5 {
        series_i(z, 1).ln()
    } else {
        let e = (-2.0 * z).exp();
        z - (2.0 * z * z).ln() + (z * (1.0 + e) - (1.0 - e)).ln()
    };
    let top = lmax.max(1);
    let start = top.max(az.ceil() as usize) + 30 + (10.0 * az.cbrt()).ceil() as usize;
    let mut stored = vec![(Complex::new(0.0, 0.0), 0.0); top + 1];
    let mut f_next = Complex::new(0.0, 0.0);
    let mut f = Complex::new(1.0, 0.0);
    let mut scale = 0.0;
    let big = 1e250;
    let inv_z = 1.0 / z;
    for k in (1..=start).rev() {
        if k <= top {
            stored[k] = (f, scale);
        }
        let f_prev = inv_z * (2 * k + 1) as f64 * f + f_next;
        f_next = f;
        f = f_prev;
        if f.norm() > big {
            f /= big;
            f_next /= big;
            scale += big.ln();
        }
    }
    stored[0] = (f, scale);
    let (anchor, log_true) = if log_i0.re >= log_i1.re {
        (0, log_i0)
    } else {
        (1, log_i1)
    };
    let (fa, sa) = stored[anchor];
    let shift = log_true - fa.ln() - sa;
    (0..=lmax)
        .map(|l| {
            let (fl, sl) = stored[l];
            if fl.norm() == 0.0 {
                return (f64::NEG_INFINITY, 0.0);
            }
            let lg = fl.ln() + sl + shift;
            (lg.re, lg.im)
        })
        .collect()
}

/// Power series `i_ℓ(z) = z^ℓ Σ_k (z²/2)^k / (k! (2ℓ+2k+1)!!)`.
fn series_i(z: Complex<f64>, ell: usize) -> Complex<f64> {
    let mut dfact = 1.0;
    for j in 0..=ell {
        dfact *= (2 * j + 1) as f64;
    }
    let half_z2 = 0.5 * z * z;
    let mut term = Complex::new(1.0 / dfact, 0.0);
    let mut sum = term;
    for k in 1..60 {
        term = term * half_z2 / (k as f64 * (2 * ell + 2 * k + 1) as f64);
        sum += term;
        if term.norm() < 1e-18 * sum.norm() {
            break;
        }
    }
    let mut power = Complex::new(1.0, 0.0);
    for _ in 0..ell {
        power *= z;
    }
    sum * power
}

/// `ln P_ℓ(x)` for `x ≥ 1` and `ℓ = 0..=lmax`, by upward ratios.
pub(crate) fn log_legendre_ge1(x: f64, lmax: usize) -> Vec<f64> {
    let x = x.max(1.0);
    let mut out = Vec::with_capacity(lmax + 1);
    out.push(0.0);
    let mut ratio = x;
    let mut acc = 0.0;
    for l in 1..=lmax {
        if l > 1 {
            let m = (l - 1) as f64;
            ratio = ((2.0 * m + 1.0) * x - m / ratio) / (m + 1.0);
        }
        acc += ratio.ln();
        out.push(acc);
    }
    out
}

/// Precomputed angular and radial factors of one coherent state.
struct CoherentFactors {
    lo: usize,
    /// Row-major `(ℓ, window node)`: `e^{E(ℓ,r) − M_ℓ + iφ}` times `h·r`.
    amplitude: Vec<Complex<f64>>,
    width: usize,
    /// `ln` of the ℓ-dependent prefactor including `2M_ℓ`; `−∞` if absent.
    log_prefactor: Vec<f64>,
}

fn coherent_factors(
    state: &HartreeState,
    p: [f64; 3],
    q: [f64; 3],
    lmax: usize,
) -> CoherentFactors {
    let hbar = state.hbar;
    let h = state.grid.uniform_spacing().expect("uniform grid");
    let mut p = p;
    let dot = |a: [f64; 3], b: [f64; 3]| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    let mut qq = dot(q, q);
    let mut pp = dot(p, p);
    let mut qp = dot(q, p);
    // k·k vanishes when |p| = |q| with p ⊥ q; a relative nudge of 1e−7 in p
    // keeps the factorised formula finite.
    let kk_norm = ((qq - pp).powi(2) + 4.0 * qp * qp).sqrt();
    if qq + pp > 0.0 && kk_norm < 1e-10 * (qq + pp) {
        p = [
            p[0] * (1.0 + 1e-7),
            p[1] * (1.0 + 1e-7),
            p[2] * (1.0 + 1e-7),
        ];
        pp = dot(p, p);
        qp = dot(q, p);
        qq = dot(q, q);
    }
    let kk = Complex::new(qq - pp, 2.0 * qp) / (hbar * hbar);
    let t_big = (qq + pp) / (hbar * hbar);
    let kappa = kk.sqrt();
    let kappa = if kappa.re < 0.0 { -kappa } else { kappa };
    let log_p: Vec<f64> = if t_big == 0.0 {
        let mut v = vec![0.0; lmax + 1];
        v.iter_mut().skip(1).for_each(|x| *x = f64::NEG_INFINITY);
        v
    } else {
        log_legendre_ge1(t_big / kk.norm(), lmax)
    };
    let qn = qq.sqrt();
    let half = WINDOW_HALF_WIDTH * hbar.sqrt();
    let nodes = &state.grid.nodes;
    let lo = nodes.partition_point(|&r| r < qn - half);
    let hi = nodes.partition_point(|&r| r <= qn + half);
    let width = hi - lo;
    let mut exponent = vec![0.0; (lmax + 1) * width];
    let mut phase = vec![0.0; (lmax + 1) * width];
    for (j, &r) in nodes[lo..hi].iter().enumerate() {
        let gauss = -(r * r + qq) / (2.0 * hbar);
        for (l, (lm, ph)) in log_bessel_i(kappa * r, lmax).into_iter().enumerate() {
            exponent[l * width + j] = gauss + lm;
            phase[l * width + j] = ph;
        }
    }
    let base = -1.5 * (PI * hbar).ln() + (4.0 * PI).ln();
    let mut amplitude = vec![Complex::new(0.0, 0.0); (lmax + 1) * width];
    let mut log_prefactor = vec![f64::NEG_INFINITY; lmax + 1];
    for l in 0..=lmax {
        let row = &exponent[l * width..(l + 1) * width];
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !m.is_finite() || !log_p[l].is_finite() {
            continue;
        }
        for j in 0..width {
            let r = nodes[lo + j];
            amplitude[l * width + j] =
                Complex::from_polar((row[j] - m).exp(), phase[l * width + j]) * (h * r);
        }
        log_prefactor[l] = base + ((2 * l + 1) as f64).ln() + log_p[l] + 2.0 * m;
    }
    CoherentFactors {
        lo,
        amplitude,
        width,
        log_prefactor,
    }
}

/// Husimi function `Σ_modes w Σ_m |⟨ℓ^ħ_{p,q}, φ_{kℓm}⟩|²` at the given
/// phase-space points `(p, q)`.
pub fn husimi_values(
    state: &HartreeState,
    points: &[([f64; 3], [f64; 3])],
    weights: &ModeWeights,
) -> Result<Vec<f64>> {
    let mut selected: Vec<Vec<(usize, f64)>> = vec![Vec::new(); state.channels.len()];
    match weights {
        ModeWeights::All | ModeWeights::ExcludeGround => {
            let skip_ground = matches!(weights, ModeWeights::ExcludeGround);
            let floor = 1e-14 * state.n_particles;
            for c in &state.channels {
                for (k, &n) in c.occupations.iter().enumerate() {
                    if (skip_ground && c.ell == 0 && k == 0) || n < floor {
                        continue;
                    }
                    selected[c.ell].push((k, n));
                }
            }
        }
        ModeWeights::Custom(list) => {
            for &(ell, k, w) in list {
                if state
                    .channels
                    .get(ell)
                    .and_then(|c| c.eigenvalues.get(k))
                    .is_none()
                {
                    return Err(Error::Precondition(format!(
                        "no level (ℓ={ell}, n={k}) below the cutoff"
                    )));
                }
                selected[ell].push((k, w));
            }
        }
    }
    let lmax = selected.iter().rposition(|s| !s.is_empty()).unwrap_or(0);
    let factors: Vec<CoherentFactors> = points
        .par_iter()
        .map(|&(p, q)| coherent_factors(state, p, q, lmax))
        .collect();
    let h = state.grid.uniform_spacing().expect("uniform grid");
    let totals = selected
        .par_iter()
        .enumerate()
        .filter(|(_, modes)| !modes.is_empty())
        .map(|(ell, modes)| {
            let matrix = state.channel_operator(ell);
            let mut out = vec![0.0; points.len()];
            for &(k, w) in modes {
                let e = state.channels[ell].eigenvalues[k];
                let u = matrix.eigenvector(e, state.hbar * state.omega);
                for (slot, f) in out.iter_mut().zip(&factors) {
                    if !f.log_prefactor[ell].is_finite() || f.width == 0 {
                        continue;
                    }
                    let row = &f.amplitude[ell * f.width..(ell + 1) * f.width];
                    let overlap: Complex<f64> = row
                        .iter()
                        .zip(&u[f.lo..f.lo + f.width])
                        .map(|(a, &x)| a * x)
                        .sum();
                    *slot += w * (f.log_prefactor[ell] - h.ln()).exp() * overlap.norm_sqr();
                }
            }
            out
        })
        .reduce(
            || vec![0.0; points.len()],
            |mut a, b| {
                a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
                a
            },
        );
    if totals.iter().any(|x| !x.is_finite()) {
        return Err(Error::Quadrature("non-finite Husimi value".into()));
    }
    Ok(totals)
}

/// Evenly spaced thermal parameters on `[RAY_T_MIN, RAY_T_MAX]`.
pub fn ray_parameters(n_samples: usize) -> Vec<f64> {
    if n_samples == 1 {
        return vec![RAY_T_MIN];
    }
    (0..n_samples)
        .map(|i| RAY_T_MIN + (RAY_T_MAX - RAY_T_MIN) * i as f64 / (n_samples - 1) as f64)
        .collect()
}

/// Husimi function of `Qγ` (ground mode removed) along the given rays.
pub fn husimi_slice(state: &HartreeState, rays: &[Ray], n_samples: usize) -> Result<HusimiSlice> {
    if n_samples == 0 {
        return Err(Error::Precondition(
            "need at least one sample per ray".into(),
        ));
    }
    let ts = ray_parameters(n_samples);
    let mut meta = Vec::new();
    let mut points = Vec::new();
    for &ray in rays {
        for &t in &ts {
            let (p, q) = ray.point(t, state.beta, state.omega);
            meta.push((ray, t));
            points.push((p, q));
        }
    }
    let values = husimi_values(state, &points, &ModeWeights::ExcludeGround)?;
    let largest_occupation = state
        .channels
        .iter()
        .flat_map(|c| {
            let skip = usize::from(c.ell == 0);
            c.occupations.iter().skip(skip).copied()
        })
        .fold(0.0, f64::max);
    let samples = meta
        .into_iter()
        .zip(points)
        .zip(values)
        .map(|(((ray, t), (p, q)), value)| HusimiSample {
            ray,
            t,
            p,
            q,
            value,
        })
        .collect();
    Ok(HusimiSlice {
        samples,
        window: "gaussian pi^(-3/4) exp(-x^2/2)".into(),
        largest_occupation,
    })
}

/// `|⟨ℓ^ħ_{p₁,q₁}, ℓ^ħ_{p₂,q₂}⟩|² = exp(−(|q₁−q₂|² + |p₁−p₂|²)/(2ħ))` for the
/// Gaussian window.
pub fn coherent_overlap_sq(
    p1: [f64; 3],
    q1: [f64; 3],
    p2: [f64; 3],
    q2: [f64; 3],
    hbar: f64,
) -> f64 {
    let d2: f64 = (0..3)
        .map(|i| (q1[i] - q2[i]).powi(2) + (p1[i] - p2[i]).powi(2))
        .sum();
    (-d2 / (2.0 * hbar)).exp()
}

/// One row of the Hartree versus semiclassical comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RaySample {
    pub ray: Ray,
    pub t: f64,
    pub husimi: f64,
    pub semiclassical: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceReport {
    pub n_particles: f64,
    pub condensate_fraction: f64,
    pub g_sc: f64,
    /// `|N₀/N − g^sc|`.
    pub condensate_error: f64,
    /// Trapezoidal `∫ |m − γ^sc| t⁵ dt` along each ray, the R⁶ measure
    /// restricted to the ray.
    pub parallel_l1: f64,
    pub perpendicular_l1: f64,
    /// Mean of the two ray discrepancies.
    pub husimi_discrepancy: f64,
    /// Mean of `∫ |m − γ^sc| dt` over the two rays, without the volume factor.
    pub unweighted_discrepancy: f64,
    pub samples: Vec<RaySample>,
    pub note: String,
}

/// Compares a Hartree state with the semiclassical minimiser at the same
/// temperature, trap frequency and coupling.
pub fn compare_to_semiclassical(
    hstate: &HartreeState,
    scstate: &SCState,
) -> Result<DistanceReport> {
    compare_with_samples(hstate, scstate, DEFAULT_RAY_SAMPLES)
}

pub fn compare_with_samples(
    hstate: &HartreeState,
    scstate: &SCState,
    n_samples: usize,
) -> Result<DistanceReport> {
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1e-300);
    if !close(hstate.beta, scstate.beta) || !close(hstate.omega, scstate.omega) {
        return Err(Error::Precondition(format!(
            "mismatched states: Hartree (β={}, ω={}) vs semiclassical (β={}, ω={})",
            hstate.beta, hstate.omega, scstate.beta, scstate.omega
        )));
    }
    let hc = hstate.potential.coupling;
    if (hc - scstate.coupling).abs() > 1e-12 * hc.abs().max(scstate.coupling.abs()) {
        return Err(Error::Precondition(format!(
            "mismatched couplings: Hartree {hc} vs semiclassical {}",
            scstate.coupling
        )));
    }
    let slice = husimi_slice(hstate, &Ray::BOTH, n_samples)?;
    let beta = scstate.beta;
    let samples: Vec<RaySample> = slice
        .samples
        .iter()
        .map(|s| {
            let p2: f64 = s.p.iter().map(|x| x * x).sum();
            let r = s.q.iter().map(|x| x * x).sum::<f64>().sqrt();
            let w = scstate.grid().interpolate(&scstate.w_eff, r);
            RaySample {
                ray: s.ray,
                t: s.t,
                husimi: s.value,
                semiclassical: occupation(beta * (p2 + w)),
            }
        })
        .collect();
    // Along a ray the phase-space point scales linearly with t, so the R⁶
    // volume element restricted to the ray is proportional to t⁵ dt.
    let ray_l1 = |ray: Ray, power: i32| -> f64 {
        let pts: Vec<&RaySample> = samples.iter().filter(|s| s.ray == ray).collect();
        let f = |s: &RaySample| s.t.powi(power) * (s.husimi - s.semiclassical).abs();
        pts.windows(2)
            .map(|w| 0.5 * (w[1].t - w[0].t) * (f(w[0]) + f(w[1])))
            .sum()
    };
    let parallel_l1 = ray_l1(Ray::Parallel, 5);
    let perpendicular_l1 = ray_l1(Ray::Perpendicular, 5);
    let unweighted_discrepancy = 0.5 * (ray_l1(Ray::Parallel, 0) + ray_l1(Ray::Perpendicular, 0));
    let fraction = condensate_fraction(hstate);
    Ok(DistanceReport {
        n_particles: hstate.n_particles,
        condensate_fraction: fraction,
        g_sc: scstate.g,
        condensate_error: (fraction - scstate.g).abs(),
        parallel_l1,
        perpendicular_l1,
        husimi_discrepancy: 0.5 * (parallel_l1 + perpendicular_l1),
        unweighted_discrepancy,
        samples,
        note: format!(
            "Husimi discrepancy sampled on parallel and perpendicular rays, t in [{RAY_T_MIN}, {RAY_T_MAX}] with weight t^5, not the full phase-space L1 norm"
        ),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::make_gaussian_potential;
    use crate::quadrature::gauss_legendre_on;

    fn free(n: usize, beta: f64, omega: f64, n_grid: usize, x_cut: f64) -> HartreeState {
        let v = make_gaussian_potential(1.0, 1.0)
            .unwrap()
            .with_coupling(0.0);
        let opts = HartreeOptions {
            n_grid,
            cutoff_exponent: x_cut,
            ..Default::default()
        };
        solve_hartree(n, beta, omega, &v, &opts).unwrap()
    }

    #[test]
    fn bessel_matches_closed_forms() {
        let i2 = |z: Complex<f64>| ((z * z + 3.0) * z.sinh() - 3.0 * z * z.cosh()) / (z * z * z);
        for &z in &[
            Complex::new(0.7, 0.0),
            Complex::new(3.0, 2.0),
            Complex::new(0.0, 5.0),
            Complex::new(12.0, -4.0),
            Complex::new(0.2, 0.3),
        ] {
            let logs = log_bessel_i(z, 6);
            let got = Complex::from_polar(logs[2].0.exp(), logs[2].1);
            let want = i2(z);
            assert!(
                (got - want).norm() < 1e-10 * want.norm(),
                "z={z}: {got} vs {want}"
            );
            for (l, &(log_mod, arg)) in logs.iter().enumerate() {
                if z.norm() < 4.0 {
                    let s = series_i(z, l);
                    let g = Complex::from_polar(log_mod.exp(), arg);
                    assert!((g - s).norm() < 1e-9 * s.norm(), "l={l} z={z}");
                }
            }
        }
        // Large argument: i_ℓ(x) ~ e^x/(2x).
        let logs = log_bessel_i(Complex::new(400.0, 0.0), 3);
        assert!((logs[0].0 - (400.0 - 800f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn legendre_log_matches_recurrence() {
        let x = 1.7;
        let logs = log_legendre_ge1(x, 5);
        let p5 = (63.0 * x.powi(5) - 70.0 * x.powi(3) + 15.0 * x) / 8.0;
        assert!((logs[5] - f64::ln(p5)).abs() < 1e-13);
    }

    #[test]
    fn free_spectrum_is_the_oscillator() {
        let s = free(64, 2.0, 1.0, 2048, 23.0);
        let hw = s.hbar * s.omega;
        for c in s.channels.iter().take(5) {
            for (k, &e) in c.eigenvalues.iter().take(4).enumerate() {
                let exact = hw * (2.0 * k as f64 + c.ell as f64 + 1.5);
                assert!(
                    (e - exact).abs() < 2e-4 * exact,
                    "ℓ={} k={k}: {e} vs {exact}",
                    c.ell
                );
            }
        }
        assert!((spectral_gap(&s) / hw - 1.0).abs() < 1e-3);
        assert!((s.total_occupation() - 64.0).abs() < 1e-6 * 64.0);
        assert!(s.mu < s.ground_energy());
        assert!(s
            .channels
            .iter()
            .all(|c| c.occupations.iter().all(|&n| n >= 0.0)));
        assert!((s.rho.total_mass() - 64.0).abs() < 1e-6 * 64.0);
    }

    #[test]
    fn free_occupations_match_degeneracy_sum() {
        // Exact oscillator: level E_k = ħω(k + 3/2) with degeneracy (k+1)(k+2)/2.
        let n = 512;
        let beta = 3.0;
        let s = free(n, beta, 1.0, 2048, 23.0);
        let hw = s.hbar;
        let total = |mu: f64| -> f64 {
            (0..4000)
                .map(|k| {
                    let e = hw * (k as f64 + 1.5);
                    0.5 * ((k + 1) * (k + 2)) as f64 / (beta * (e - mu)).exp_m1()
                })
                .sum()
        };
        let (mut lo, mut hi) = (-5.0, 1.5 * hw - 1e-12);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if total(mid) > n as f64 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let mu = 0.5 * (lo + hi);
        let n0_exact = 1.0 / (beta * (1.5 * hw - mu)).exp_m1();
        assert!(
            (s.n0 - n0_exact).abs() < 2e-3 * n as f64,
            "{} vs {n0_exact}",
            s.n0
        );
    }

    #[test]
    fn ground_mode_husimi_is_gaussian() {
        // For ω = 2 the oscillator ground state is the coherent state at the origin.
        let s = free(27, 1.0, 2.0, 1024, 23.0);
        let hbar = s.hbar;
        let pts = [
            ([0.0, 0.0, 0.0], [0.0, 0.0, 0.0]),
            ([0.0, 0.0, 0.3], [0.0, 0.0, 0.4]),
            ([0.5, 0.0, 0.0], [0.0, 0.0, 0.2]),
            ([0.2, 0.0, 0.0], [0.0, 0.0, 0.6]),
            ([0.3, 0.1, -0.2], [0.1, 0.4, 0.3]),
            ([0.4, 0.0, 0.0], [0.0, 0.0, 0.4]),
        ];
        let vals = husimi_values(&s, &pts, &ModeWeights::Custom(vec![(0, 0, 1.0)])).unwrap();
        for (v, (p, q)) in vals.iter().zip(&pts) {
            let want = coherent_overlap_sq(*p, *q, [0.0; 3], [0.0; 3], hbar);
            assert!((v - want).abs() < 2e-4, "{p:?} {q:?}: {v} vs {want}");
        }
    }

    #[test]
    fn coherent_overlap_matches_quadrature() {
        // The 3D overlap factorises over coordinates.
        let hbar = 0.3;
        let (p1, q1, p2, q2) = (
            [0.2, -0.1, 0.5],
            [0.3, 0.0, -0.2],
            [-0.1, 0.2, 0.1],
            [0.0, 0.4, 0.1],
        );
        let nodes = gauss_legendre_on(200, -6.0, 6.0);
        let mut amp = Complex::new(1.0, 0.0);
        for i in 0..3 {
            let c = |x: f64, p: f64, q: f64| {
                Complex::from_polar(
                    (PI * hbar).powf(-0.25) * (-(x - q).powi(2) / (2.0 * hbar)).exp(),
                    p * x / hbar,
                )
            };
            let s: Complex<f64> = nodes
                .iter()
                .map(|&(x, w)| c(x, p1[i], q1[i]).conj() * c(x, p2[i], q2[i]) * w)
                .sum();
            amp *= s;
        }
        let want = coherent_overlap_sq(p1, q1, p2, q2, hbar);
        assert!((amp.norm_sqr() - want).abs() < 1e-12);
        assert!((coherent_overlap_sq(p1, q1, p1, q1, hbar) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn husimi_resolves_the_identity() {
        // Summing over every mode of a basis reproduces the unit norm of the
        // coherent state.
        let s = free(20, 4.0, 2.0, 512, 74.0);
        let all: Vec<(usize, usize, f64)> = s
            .channels
            .iter()
            .flat_map(|c| (0..c.eigenvalues.len()).map(move |k| (c.ell, k, 1.0)))
            .collect();
        let pts = [
            ([0.0, 0.0, 0.4], [0.0, 0.0, 0.5]),
            ([0.6, 0.0, 0.0], [0.0, 0.0, 0.3]),
            ([0.1, 0.2, 0.0], [0.5, -0.2, 0.1]),
        ];
        let vals = husimi_values(&s, &pts, &ModeWeights::Custom(all)).unwrap();
        for v in vals {
            assert!((v - 1.0).abs() < 1e-4, "{v}");
        }
    }

    #[test]
    fn husimi_integrates_to_the_trace() {
        let s = free(20, 1.0, 2.0, 256, 23.0);
        let weights = ModeWeights::Custom(vec![(0, 0, 1.0), (1, 0, 0.5), (0, 1, 0.25)]);
        let qs = gauss_legendre_on(24, 0.0, 3.5);
        let ps = gauss_legendre_on(24, 0.0, 3.5);
        let cs = gauss_legendre_on(12, -1.0, 1.0);
        let mut points = Vec::new();
        let mut w = Vec::new();
        for &(q, wq) in &qs {
            for &(p, wp) in &ps {
                for &(c, wc) in &cs {
                    let sn = (1.0 - c * c).sqrt();
                    points.push(([p * sn, 0.0, p * c], [0.0, 0.0, q]));
                    w.push(wq * wp * wc * q * q * p * p);
                }
            }
        }
        let vals = husimi_values(&s, &points, &weights).unwrap();
        let integral: f64 = vals.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() * 8.0 * PI * PI;
        let trace = integral / (2.0 * PI * s.hbar).powi(3);
        // The ℓ = 1 entry carries its three magnetic components.
        assert!((trace - (1.0 + 3.0 * 0.5 + 0.25)).abs() < 1e-3, "{trace}");
        assert!(vals.iter().all(|&v| (0.0..=1.0 + 1e-9).contains(&v)));
    }

    #[test]
    fn interacting_state_is_self_consistent() {
        let v = make_gaussian_potential(1.0, 1.0)
            .unwrap()
            .with_coupling(0.05);
        let n = 256;
        let opts = HartreeOptions {
            n_grid: 1024,
            ..Default::default()
        };
        let s = solve_hartree(n, 2.0, 1.0, &v, &opts).unwrap();
        assert!(s.residual < opts.tol);
        assert!((s.total_occupation() - n as f64).abs() < 1e-6 * n as f64);
        assert!(s.mu < s.ground_energy());
        assert!(s.gap / (s.hbar * s.omega) > 0.5);
        // Dual at the solution equals the free energy; other densities lie below.
        let dual = dual_objective(&s.rho, &s).unwrap();
        assert!(
            (dual - s.free_energy).abs() < 1e-6 * s.free_energy.abs().max(1.0),
            "{dual} vs {}",
            s.free_energy
        );
        let free_state = free(n, 2.0, 1.0, 1024, 23.0);
        let ideal = dual_objective(&free_state.rho, &s).unwrap();
        assert!(ideal <= s.free_energy + 1e-8);
        let ratio = scaled_excited_trace(&s);
        assert!(ratio.is_finite() && ratio > 0.0);
    }

    #[test]
    fn mismatched_comparison_is_rejected() {
        use crate::sc_solver::{solve_selfconsistent, SolverOptions};
        let v = make_gaussian_potential(1.0, 1.0).unwrap();
        let sc = solve_selfconsistent(2.0, 1.0, &v, 0.0, &SolverOptions::default()).unwrap();
        let h = free(64, 2.5, 1.0, 512, 23.0);
        assert!(matches!(
            compare_to_semiclassical(&h, &sc),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn small_n_is_rejected() {
        let v = make_gaussian_potential(1.0, 1.0).unwrap();
        assert!(solve_hartree(5, 1.0, 1.0, &v, &HartreeOptions::default()).is_err());
    }
}
