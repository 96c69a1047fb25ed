//! Radial two-body interaction potentials, their validation against the
//! trap frequency, and radial convolutions with densities that may carry a
//! point mass at the origin.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::quadrature::{self, RadialGrid};

/// Shape of the unscaled interaction profile.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Profile {
    /// `a·exp(−r²/(2σ²))`.
    Gaussian { amplitude: f64, width: f64 },
    /// Cubic spline through tabulated samples, zero beyond the last knot.
    Table(TableProfile),
}

/// Tabulated radial profile with a cubic spline interpolant that is flat
/// at the origin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableProfile {
    r: Vec<f64>,
    v: Vec<f64>,
    /// Spline second derivatives at the knots.
    m: Vec<f64>,
    /// `Φ(r_i) = ∫₀^{r_i} t v(t) dt` at the knots.
    phi: Vec<f64>,
}

/// Radial interaction `coupling·profile(r)` together with the metadata used
/// to check the standing assumptions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Potential {
    pub profile: Profile,
    /// Multiplier applied to the profile; the effective potential is
    /// `coupling·profile`.
    pub coupling: f64,
    /// Unscaled `profile(0)`.
    pub v0: f64,
    /// Unscaled `∫_{R³} profile`.
    pub l1_norm: f64,
    /// Unscaled estimate of `sup_x ‖D² profile(x)‖`.
    pub hessian_sup: f64,
}

/// Gaussian potential `a·exp(−r²/(2σ²))` with unit coupling.
pub fn make_gaussian_potential(amplitude: f64, width: f64) -> Result<Potential> {
    if !(amplitude > 0.0 && width > 0.0) || !amplitude.is_finite() || !width.is_finite() {
        return Err(domain(
            "make_gaussian_potential",
            format!("need a > 0 and sigma > 0, got a={amplitude}, sigma={width}"),
        ));
    }
    Ok(Potential {
        profile: Profile::Gaussian { amplitude, width },
        coupling: 1.0,
        v0: amplitude,
        l1_norm: amplitude * (2.0 * PI * width * width).powf(1.5),
        hessian_sup: amplitude / (width * width),
    })
}

impl TableProfile {
    fn new(r: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        if r.len() != v.len() || r.len() < 4 {
            return Err(domain(
                "Potential::from_table",
                "need at least 4 (r, v) rows",
            ));
        }
        if r[0] != 0.0 {
            return Err(domain("Potential::from_table", "table must start at r = 0"));
        }
        if r.windows(2).any(|w| !(w[1] > w[0])) || v.iter().any(|x| !x.is_finite()) {
            return Err(domain(
                "Potential::from_table",
                "radii must be strictly increasing and values finite",
            ));
        }
        let m = spline_second_derivatives(&r, &v);
        let mut table = Self {
            r,
            v,
            m,
            phi: Vec::new(),
        };
        let mut phi = vec![0.0];
        for i in 0..table.r.len() - 1 {
            let seg = table.segment_moment(table.r[i], table.r[i + 1]);
            phi.push(phi[i] + seg);
        }
        table.phi = phi;
        Ok(table)
    }

    fn r_last(&self) -> f64 {
        *self.r.last().expect("table nonempty")
    }

    fn segment(&self, r: f64) -> usize {
        match self.r.binary_search_by(|x| x.total_cmp(&r)) {
            Ok(i) => i.min(self.r.len() - 2),
            Err(i) => i.saturating_sub(1).min(self.r.len() - 2),
        }
    }

    /// Value, first and second derivative of the spline at `r`.
    fn eval(&self, r: f64) -> (f64, f64, f64) {
        if r > self.r_last() {
            return (0.0, 0.0, 0.0);
        }
        let i = self.segment(r);
        let (x0, x1) = (self.r[i], self.r[i + 1]);
        let h = x1 - x0;
        let a = (x1 - r) / h;
        let b = (r - x0) / h;
        let (m0, m1) = (self.m[i], self.m[i + 1]);
        let value = a * self.v[i]
            + b * self.v[i + 1]
            + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0;
        let slope = (self.v[i + 1] - self.v[i]) / h
            + ((1.0 - 3.0 * a * a) * m0 + (3.0 * b * b - 1.0) * m1) * h / 6.0;
        (value, slope, a * m0 + b * m1)
    }

    /// `∫_{x0}^{x1} t v(t) dt` within one spline segment; the integrand is a quartic
    /// so three Gauss–Legendre points are exact.
    fn segment_moment(&self, x0: f64, x1: f64) -> f64 {
        const NODES: [f64; 3] = [-0.774_596_669_241_483_4, 0.0, 0.774_596_669_241_483_4];
        const WEIGHTS: [f64; 3] = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];
        let c = 0.5 * (x0 + x1);
        let h = 0.5 * (x1 - x0);
        NODES
            .iter()
            .zip(WEIGHTS)
            .map(|(x, w)| {
                let t = c + h * x;
                w * t * self.eval(t).0
            })
            .sum::<f64>()
            * h
    }

    /// `Φ(u) = ∫₀^u t v(t) dt`.
    fn phi(&self, u: f64) -> f64 {
        if u >= self.r_last() {
            return *self.phi.last().expect("table nonempty");
        }
        let i = self.segment(u);
        self.phi[i] + self.segment_moment(self.r[i], u)
    }
}

/// Spline second derivatives with zero slope at the origin (the even
/// extension of a radial profile) and a natural end condition at the last knot.
fn spline_second_derivatives(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    // Thomas algorithm on rows 0..n−1; the last row pins m_{n−1} = 0.
    let mut c_prime = vec![0.0; n];
    let mut d_prime = vec![0.0; n];
    let h0 = x[1] - x[0];
    c_prime[0] = 0.5;
    d_prime[0] = 3.0 * (y[1] - y[0]) / (h0 * h0);
    for i in 1..n - 1 {
        let h0 = x[i] - x[i - 1];
        let h1 = x[i + 1] - x[i];
        let a = h0 / 6.0;
        let b = (h0 + h1) / 3.0;
        let c = h1 / 6.0;
        let d = (y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0;
        let denom = b - a * c_prime[i - 1];
        c_prime[i] = c / denom;
        d_prime[i] = (d - a * d_prime[i - 1]) / denom;
    }
    let mut m = vec![0.0; n];
    for i in (0..n - 1).rev() {
        m[i] = d_prime[i] - c_prime[i] * m[i + 1];
    }
    m
}

impl Potential {
    /// Builds a spline potential from `(r, v(r))` samples starting at `r = 0`.
    pub fn from_table(r: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        let table = TableProfile::new(r, v)?;
        let v0 = table.v[0];
        let mut pot = Potential {
            profile: Profile::Table(table),
            coupling: 1.0,
            v0,
            l1_norm: 0.0,
            hessian_sup: 0.0,
        };
        pot.l1_norm = pot.table_l1_norm()?;
        pot.hessian_sup = pot.table_hessian_estimate();
        Ok(pot)
    }

    /// Reads a two-column whitespace- or comma-separated table; lines
    /// starting with `#` are ignored.
    pub fn from_table_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        let mut r = Vec::new();
        let mut v = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .collect();
            if cols.len() != 2 {
                return Err(Error::Parse(format!(
                    "line {}: expected two columns, found {}",
                    lineno + 1,
                    cols.len()
                )));
            }
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))
            };
            r.push(parse(cols[0])?);
            v.push(parse(cols[1])?);
        }
        Self::from_table(r, v)
    }

    /// Copy with the coupling replaced.
    pub fn with_coupling(&self, coupling: f64) -> Self {
        Self {
            coupling,
            ..self.clone()
        }
    }

    /// Copy with the coupling multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        self.with_coupling(self.coupling * factor)
    }

    /// Hessian bound of the effective (coupled) potential.
    pub fn effective_hessian_sup(&self) -> f64 {
        self.coupling * self.hessian_sup
    }

    /// Effective `∫ v`.
    pub fn effective_l1_norm(&self) -> f64 {
        self.coupling * self.l1_norm
    }

    /// Radius beyond which the profile is negligible (below `1e−17·v0`) or zero.
    pub fn range(&self) -> f64 {
        match &self.profile {
            Profile::Gaussian { width, .. } => 9.0 * width,
            Profile::Table(t) => t.r_last(),
        }
    }

    /// `v(r)`.
    pub fn value(&self, r: f64) -> f64 {
        self.coupling * self.profile_value(r.abs())
    }

    fn profile_value(&self, r: f64) -> f64 {
        match &self.profile {
            Profile::Gaussian { amplitude, width } => {
                amplitude * (-0.5 * r * r / (width * width)).exp()
            }
            Profile::Table(t) => t.eval(r).0,
        }
    }

    /// `v′(r)`.
    pub fn derivative(&self, r: f64) -> f64 {
        self.coupling
            * match &self.profile {
                Profile::Gaussian { amplitude, width } => {
                    let s2 = width * width;
                    -amplitude * r / s2 * (-0.5 * r * r / s2).exp()
                }
                Profile::Table(t) => t.eval(r).1,
            }
    }

    /// `v″(r)`.
    pub fn second_derivative(&self, r: f64) -> f64 {
        self.coupling
            * match &self.profile {
                Profile::Gaussian { amplitude, width } => {
                    let s2 = width * width;
                    amplitude * (r * r / s2 - 1.0) / s2 * (-0.5 * r * r / s2).exp()
                }
                Profile::Table(t) => t.eval(r).2,
            }
    }

    /// Laplacian `v″(r) + 2v′(r)/r` of the radial function, with the
    /// limit `3v″(0)` at the origin.
    pub fn laplacian(&self, r: f64) -> f64 {
        if r == 0.0 {
            return 3.0 * self.second_derivative(0.0);
        }
        self.second_derivative(r) + 2.0 * self.derivative(r) / r
    }

    /// Fourier transform `v̂(p) = (2π)^{−3/2} ∫ v(x) e^{−ip·x} dx`.
    pub fn fourier(&self, p: f64) -> Result<f64> {
        let p = p.abs();
        match &self.profile {
            Profile::Gaussian { amplitude, width } => Ok(self.coupling
                * amplitude
                * width.powi(3)
                * (-0.5 * width * width * p * p).exp()),
            Profile::Table(t) => {
                let integrand = |r: f64| {
                    let x = p * r;
                    let sinc = if x < 1e-4 {
                        1.0 - x * x / 6.0
                    } else {
                        x.sin() / x
                    };
                    r * r * t.eval(r).0 * sinc
                };
                let mut total = 0.0;
                for w in t.r.windows(2) {
                    total += quadrature::integrate(integrand, w[0], w[1], 1e-14, 1e-12)?;
                }
                Ok(self.coupling * 4.0 * PI * total * (2.0 * PI).powf(-1.5))
            }
        }
    }

    /// Shell integral `∫_{|r−s|}^{r+s} t v(t) dt`, the angular part of the
    /// radial convolution.
    pub fn shell_integral(&self, r: f64, s: f64) -> f64 {
        let (r, s) = (r.abs(), s.abs());
        self.coupling
            * match &self.profile {
                Profile::Gaussian { amplitude, width } => {
                    let s2 = width * width;
                    let d = r - s;
                    amplitude * s2 * (-0.5 * d * d / s2).exp() * -(-2.0 * r * s / s2).exp_m1()
                }
                Profile::Table(t) => t.phi(r + s) - t.phi((r - s).abs()),
            }
    }

    fn table_l1_norm(&self) -> Result<f64> {
        let Profile::Table(t) = &self.profile else {
            return Ok(self.l1_norm);
        };
        let mut total = 0.0;
        for w in t.r.windows(2) {
            total += quadrature::integrate(|r| r * r * t.eval(r).0, w[0], w[1], 1e-15, 1e-13)?;
        }
        Ok(4.0 * PI * total)
    }

    /// Estimate of the largest Hessian eigenvalue magnitude, taken as the
    /// maximum of `|v″|` (radial direction) and `|v′/r|` (transverse
    /// directions) on a fine sample. This is an estimate, not a certificate.
    fn table_hessian_estimate(&self) -> f64 {
        let Profile::Table(t) = &self.profile else {
            return self.hessian_sup;
        };
        let n = 8192;
        let r_last = t.r_last();
        let mut sup: f64 = t.m.iter().fold(0.0, |acc, m| acc.max(m.abs()));
        for k in 1..=n {
            let r = r_last * k as f64 / n as f64;
            let (_, d1, d2) = t.eval(r);
            sup = sup.max(d2.abs()).max((d1 / r).abs());
        }
        sup
    }
}

/// Outcome of checking a potential against the standing assumptions for a
/// given trap frequency.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub omega: f64,
    pub coupling: f64,
    /// `v(r) ≥ 0` on all sampled radii.
    pub nonnegative: bool,
    pub min_value: f64,
    /// `∫ v` finite.
    pub integrable: bool,
    /// `v̂(p) ≥ −tol` on all sampled momenta.
    pub positive_type: bool,
    pub min_fourier: f64,
    /// `coupling·hessian_sup < ω²/2`.
    pub hessian_bound: bool,
    pub hessian_sup: f64,
    pub hessian_limit: f64,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.nonnegative && self.integrable && self.positive_type && self.hessian_bound
    }

    /// One-line description of the failed conditions.
    pub fn summary(&self) -> String {
        let mut failures = Vec::new();
        if !self.nonnegative {
            failures.push(format!("negative value {:e}", self.min_value));
        }
        if !self.integrable {
            failures.push("not integrable".to_string());
        }
        if !self.positive_type {
            failures.push(format!("negative Fourier value {:e}", self.min_fourier));
        }
        if !self.hessian_bound {
            failures.push(format!(
                "Hessian bound {} >= omega^2/2 = {}",
                self.hessian_sup, self.hessian_limit
            ));
        }
        if failures.is_empty() {
            "all conditions hold".to_string()
        } else {
            failures.join("; ")
        }
    }
}

/// Checks nonnegativity, integrability, positive type, and the strict
/// Hessian bound `coupling·sup‖D²v‖ < ω²/2`.
pub fn validate_assumption(v: &Potential, omega: f64) -> ValidationReport {
    let range = v.range();
    let n = 2048;
    let min_value = (0..=n)
        .map(|k| v.value(range * k as f64 / n as f64))
        .fold(f64::INFINITY, f64::min);
    let scale = v.value(0.0).abs().max(f64::MIN_POSITIVE);
    let p_max = 60.0 / range.max(1e-12);
    let mut min_fourier = f64::INFINITY;
    let mut fourier_ok = true;
    for k in 0..=200 {
        match v.fourier(p_max * k as f64 / 200.0) {
            Ok(x) => min_fourier = min_fourier.min(x),
            Err(_) => fourier_ok = false,
        }
    }
    let fourier_scale = v
        .fourier(0.0)
        .map(f64::abs)
        .unwrap_or(1.0)
        .max(f64::MIN_POSITIVE);
    let l1 = v.effective_l1_norm();
    let hessian_sup = v.effective_hessian_sup();
    let hessian_limit = 0.5 * omega * omega;
    ValidationReport {
        omega,
        coupling: v.coupling,
        nonnegative: min_value >= -1e-14 * scale,
        min_value,
        integrable: l1.is_finite(),
        positive_type: fourier_ok && min_fourier >= -1e-10 * fourier_scale,
        min_fourier,
        hessian_bound: hessian_sup < hessian_limit,
        hessian_sup,
        hessian_limit,
    }
}

/// Runs [`validate_assumption`] and converts a failure into an error.
pub fn require_valid(v: &Potential, omega: f64) -> Result<()> {
    let report = validate_assumption(v, omega);
    if report.passed() {
        Ok(())
    } else {
        Err(Error::Validation(Box::new(report)))
    }
}

/// Curvature constant `c = 1/4 − coupling·hessian_sup/(2ω²)` of the lower
/// bound `ω²r²/4 + (v∗ρ)(r) − (v∗ρ)(0) ≥ c ω² r²` for unit-mass symmetric ρ.
pub fn curvature_constant(v: &Potential, omega: f64) -> f64 {
    0.25 - v.effective_hessian_sup() / (2.0 * omega * omega)
}

/// Radial number density on a grid plus an optional point mass at the origin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialDensity {
    pub grid: RadialGrid,
    pub values: Vec<f64>,
    pub point_mass: f64,
}

impl RadialDensity {
    pub fn new(grid: RadialGrid, values: Vec<f64>, point_mass: f64) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Precondition(format!(
                "density has {} values for {} grid nodes",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(domain(
                "RadialDensity::new",
                "values must be finite and >= 0",
            ));
        }
        if !(point_mass >= 0.0 && point_mass.is_finite()) {
            return Err(domain(
                "RadialDensity::new",
                "point mass must be finite and >= 0",
            ));
        }
        Ok(Self {
            grid,
            values,
            point_mass,
        })
    }

    /// Density that is a pure point mass at the origin.
    pub fn point(grid: RadialGrid, mass: f64) -> Result<Self> {
        let n = grid.len();
        Self::new(grid, vec![0.0; n], mass)
    }

    /// `4π ∫ r² ρ dr` without the point mass.
    pub fn thermal_mass(&self) -> f64 {
        self.grid.integrate_3d(&self.values)
    }

    pub fn total_mass(&self) -> f64 {
        self.thermal_mass() + self.point_mass
    }

    /// Interpolated density at radius `r` (point mass excluded).
    pub fn value_at(&self, r: f64) -> f64 {
        self.grid.interpolate(&self.values, r).max(0.0)
    }

    /// Same density with the point mass removed.
    pub fn thermal_part(&self) -> Self {
        Self {
            point_mass: 0.0,
            ..self.clone()
        }
    }
}

/// Convolution `v∗ρ` evaluated at the origin and at the density's grid nodes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialConvolution {
    pub at_origin: f64,
    pub values: Vec<f64>,
}

/// `(v∗ρ)(r) = (2π/r) ∫ s ρ(s) [∫_{|r−s|}^{r+s} t v(t) dt] ds + g·v(r)`, with
/// the limit `4π ∫ s² v(s) ρ(s) ds + g·v(0)` at `r = 0`.
pub fn convolve_at(v: &Potential, rho: &RadialDensity, r: f64) -> f64 {
    let r = r.abs();
    let grid = &rho.grid;
    let thermal = if r < 1e-12 {
        4.0 * PI
            * grid
                .nodes
                .iter()
                .zip(&grid.weights)
                .zip(&rho.values)
                .map(|((&s, &w), &x)| w * s * s * v.value(s) * x)
                .sum::<f64>()
    } else {
        2.0 * PI / r
            * grid
                .nodes
                .iter()
                .zip(&grid.weights)
                .zip(&rho.values)
                .filter(|(_, &x)| x != 0.0)
                .map(|((&s, &w), &x)| w * s * x * v.shell_integral(r, s))
                .sum::<f64>()
    };
    thermal + rho.point_mass * v.value(r)
}

/// `v∗ρ` at arbitrary radii.
pub fn convolve_at_points(v: &Potential, rho: &RadialDensity, points: &[f64]) -> Vec<f64> {
    use rayon::prelude::*;
    points.par_iter().map(|&r| convolve_at(v, rho, r)).collect()
}

/// `v∗ρ` at the origin and on the grid of `ρ`.
pub fn radial_convolution(v: &Potential, rho: &RadialDensity) -> Result<RadialConvolution> {
    let values = convolve_at_points(v, rho, &rho.grid.nodes);
    let at_origin = convolve_at(v, rho, 0.0);
    if !at_origin.is_finite() || values.iter().any(|x| !x.is_finite()) {
        return Err(Error::Quadrature("non-finite radial convolution".into()));
    }
    Ok(RadialConvolution { at_origin, values })
}

/// `Δ(v∗ρ)(0) = ((Δv)∗ρ)(0)`.
pub fn convolution_laplacian_at_origin(v: &Potential, rho: &RadialDensity) -> f64 {
    let grid = &rho.grid;
    4.0 * PI
        * grid
            .nodes
            .iter()
            .zip(&grid.weights)
            .zip(&rho.values)
            .map(|((&s, &w), &x)| w * s * s * v.laplacian(s) * x)
            .sum::<f64>()
        + rho.point_mass * v.laplacian(0.0)
}

/// `D(ρ₁, ρ₂) = ½ ∫∫ v(x−y) dρ₁(x) dρ₂(y)`, point masses included.
pub fn interaction_energy(
    rho1: &RadialDensity,
    rho2: &RadialDensity,
    v: &Potential,
) -> Result<f64> {
    let t2 = rho2.thermal_part();
    let conv2 = convolve_at_points(v, &t2, &rho1.grid.nodes);
    let thermal_cross = rho1.grid.integrate_3d(
        &rho1
            .values
            .iter()
            .zip(&conv2)
            .map(|(a, b)| a * b)
            .collect::<Vec<_>>(),
    );
    let g1_term = if rho1.point_mass != 0.0 {
        rho1.point_mass * convolve_at(v, &t2, 0.0)
    } else {
        0.0
    };
    let g2_term = if rho2.point_mass != 0.0 {
        rho2.point_mass * convolve_at(v, &rho1.thermal_part(), 0.0)
    } else {
        0.0
    };
    let total = 0.5
        * (rho1.point_mass * rho2.point_mass * v.value(0.0) + g1_term + g2_term + thermal_cross);
    if total.is_finite() {
        Ok(total)
    } else {
        Err(Error::Quadrature("non-finite interaction energy".into()))
    }
}

/// Checks `ω²r²/4 + (v∗ρ)(r) − (v∗ρ)(0) ≥ c ω² r²` on the grid of ρ and
/// returns the smallest slack `W(r) − cω²r²` (negative means violated).
pub fn curvature_bound_slack(v: &Potential, rho: &RadialDensity, omega: f64) -> Result<f64> {
    let c = curvature_constant(v, omega);
    let conv = radial_convolution(v, rho)?;
    Ok(rho
        .grid
        .nodes
        .iter()
        .zip(&conv.values)
        .map(|(&r, &x)| {
            0.25 * omega * omega * r * r + x - conv.at_origin - c * omega * omega * r * r
        })
        .fold(f64::INFINITY, f64::min))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gaussian_density(grid: &RadialGrid, mass: f64, s: f64) -> RadialDensity {
        let norm = mass * (2.0 * PI * s * s).powf(-1.5);
        let values = grid
            .nodes
            .iter()
            .map(|r| norm * (-0.5 * r * r / (s * s)).exp())
            .collect();
        RadialDensity::new(grid.clone(), values, 0.0).unwrap()
    }

    #[test]
    fn gaussian_metadata() {
        let v = make_gaussian_potential(1.0, 1.0).unwrap();
        assert_eq!(v.value(0.0), 1.0);
        assert!((v.l1_norm - (2.0 * PI).powf(1.5)).abs() < 1e-12);
        assert_eq!(v.hessian_sup, 1.0);
        assert!(make_gaussian_potential(0.0, 1.0).is_err());
    }

    #[test]
    fn gaussian_hessian_sup_matches_brute_force() {
        // Largest Hessian eigenvalue magnitude over radii: max(|v″|, |v′/r|).
        let v = make_gaussian_potential(1.3, 0.7).unwrap();
        let mut sup = v.second_derivative(0.0).abs();
        for k in 1..20000 {
            let r = k as f64 * 1e-3;
            sup = sup
                .max(v.second_derivative(r).abs())
                .max((v.derivative(r) / r).abs());
        }
        assert!((sup - v.hessian_sup).abs() < 1e-6 * v.hessian_sup);
    }

    #[test]
    fn validation_examples() {
        let v = make_gaussian_potential(1.0, 1.0).unwrap();
        assert!(validate_assumption(&v, 2.0).passed());
        let report = validate_assumption(&v, 1.0);
        assert!(!report.hessian_bound && report.nonnegative && report.positive_type);
        assert!(require_valid(&v, 1.0).is_err());
        let strong = make_gaussian_potential(2.0, 1.0).unwrap();
        assert!(!validate_assumption(&strong, 2.0).passed());
        let r: Vec<f64> = (0..50).map(|k| 0.1 * k as f64).collect();
        let vals: Vec<f64> = r.iter().map(|&x| (1.0 - x) * (-x * x).exp()).collect();
        let signed = Potential::from_table(r, vals).unwrap();
        assert!(!validate_assumption(&signed, 10.0).nonnegative);
    }

    #[test]
    fn table_reproduces_gaussian() {
        let r: Vec<f64> = (0..=900).map(|k| 0.01 * k as f64).collect();
        let vals: Vec<f64> = r.iter().map(|&x| (-0.5 * x * x).exp()).collect();
        let table = Potential::from_table(r, vals).unwrap();
        let exact = make_gaussian_potential(1.0, 1.0).unwrap();
        assert!((table.l1_norm - exact.l1_norm).abs() < 1e-6 * exact.l1_norm);
        assert!((table.hessian_sup - 1.0).abs() < 1e-3);
        for &p in &[0.0, 0.7, 2.0] {
            assert!((table.fourier(p).unwrap() - exact.fourier(p).unwrap()).abs() < 1e-6);
        }
        for &(a, b) in &[(0.3, 0.5), (1.0, 2.5), (4.0, 0.1)] {
            let d = table.shell_integral(a, b) - exact.shell_integral(a, b);
            assert!(d.abs() < 1e-7, "shell ({a}, {b}): {d}");
        }
        assert!(validate_assumption(&table, 2.0).passed());
    }

    #[test]
    fn table_file_parsing() {
        let dir = std::env::temp_dir().join(format!("trapbec-table-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("v.txt");
        let mut text = String::from("# r v\n");
        for k in 0..=400 {
            let r = 0.02 * k as f64;
            text.push_str(&format!("{r}, {}\n", (-0.5 * r * r).exp()));
        }
        std::fs::write(&path, text).unwrap();
        let v = Potential::from_table_file(&path).unwrap();
        assert!((v.value(0.5) - (-0.125f64).exp()).abs() < 1e-6);
        std::fs::write(&path, "0 1 2\n").unwrap();
        assert!(matches!(
            Potential::from_table_file(&path),
            Err(Error::Parse(_))
        ));
        std::fs::remove_dir_all(dir).ok();
    }

    #[test]
    fn gaussian_fourier_matches_radial_transform() {
        let v = make_gaussian_potential(0.8, 1.3).unwrap();
        for &p in &[0.0, 0.5, 1.7] {
            let direct = quadrature::integrate(
                |r| {
                    let x = p * r;
                    let sinc = if x < 1e-8 { 1.0 } else { x.sin() / x };
                    r * r * v.value(r) * sinc
                },
                0.0,
                20.0,
                1e-14,
                1e-12,
            )
            .unwrap()
                * 4.0
                * PI
                * (2.0 * PI).powf(-1.5);
            assert!((direct - v.fourier(p).unwrap()).abs() < 1e-10);
        }
    }

    #[test]
    fn point_mass_convolution_is_the_potential() {
        let v = make_gaussian_potential(1.0, 1.0).unwrap();
        let grid = RadialGrid::gauss_legendre(8.0, 128).unwrap();
        let rho = RadialDensity::point(grid, 1.0).unwrap();
        let conv = radial_convolution(&v, &rho).unwrap();
        assert_eq!(conv.at_origin, 1.0);
        for (r, c) in rho.grid.nodes.iter().zip(&conv.values) {
            assert!((c - v.value(*r)).abs() < 1e-15);
        }
    }

    #[test]
    fn gaussian_gaussian_convolution_closed_form() {
        // a e^{-r²/2σ²} ∗ (mass, width s) Gaussian = a σ³/(σ²+s²)^{3/2} e^{-r²/2(σ²+s²)} · mass
        let (a, sigma, s, mass) = (1.0, 1.0, 0.8, 1.0);
        let v = make_gaussian_potential(a, sigma).unwrap();
        let grid = RadialGrid::gauss_legendre(10.0, 512).unwrap();
        let rho = gaussian_density(&grid, mass, s);
        let conv = radial_convolution(&v, &rho).unwrap();
        let total = sigma * sigma + s * s;
        let exact =
            |r: f64| mass * a * sigma.powi(3) / total.powf(1.5) * (-0.5 * r * r / total).exp();
        assert!(((conv.at_origin - exact(0.0)) / exact(0.0)).abs() < 1e-8);
        for (&r, &c) in grid.nodes.iter().zip(&conv.values) {
            if r < 6.0 {
                assert!(((c - exact(r)) / exact(r)).abs() < 1e-8, "r = {r}");
            }
        }
        // Mass identity.
        let lhs = grid.integrate_3d(&conv.values);
        assert!(((lhs - v.l1_norm * mass) / lhs).abs() < 1e-6);
        // Laplacian at the origin against the closed form.
        let lap = convolution_laplacian_at_origin(&v, &rho);
        let lap_exact = -3.0 / total * exact(0.0);
        assert!(((lap - lap_exact) / lap_exact).abs() < 1e-8);
    }

    #[test]
    fn interaction_energy_examples() {
        let v = make_gaussian_potential(1.0, 1.0).unwrap();
        let grid = RadialGrid::gauss_legendre(10.0, 256).unwrap();
        let unit = RadialDensity::point(grid.clone(), 1.0).unwrap();
        assert!((interaction_energy(&unit, &unit, &v).unwrap() - 0.5).abs() < 1e-15);
        // Fourier-side oracle: ½ (2π)^{3/2} ∫ v̂ |ρ̂|² dp with ρ̂ = (2π)^{-3/2} e^{-s²p²/2}.
        let s = 0.9;
        let rho = gaussian_density(&grid, 1.0, s);
        let fourier_side = 0.5
            * (2.0 * PI).powf(1.5)
            * quadrature::integrate(
                |p| {
                    let rho_hat_sq = (2.0 * PI).powi(-3) * (-s * s * p * p).exp();
                    4.0 * PI * p * p * v.fourier(p).unwrap() * rho_hat_sq
                },
                0.0,
                30.0,
                1e-15,
                1e-13,
            )
            .unwrap();
        let direct = interaction_energy(&rho, &rho, &v).unwrap();
        assert!(((direct - fourier_side) / direct).abs() < 1e-8);
    }

    #[test]
    fn curvature_bound_holds_for_validated_potential() {
        let v = make_gaussian_potential(1.0, 1.0)
            .unwrap()
            .with_coupling(0.5);
        let grid = RadialGrid::gauss_legendre(10.0, 256).unwrap();
        for s in [0.3, 1.0, 2.5] {
            let rho = gaussian_density(&grid, 1.0, s);
            assert!(curvature_bound_slack(&v, &rho, 2.0).unwrap() >= -1e-12);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn positive_type_form_is_nonnegative(
            w1 in 0.2f64..2.0, w2 in 0.2f64..2.0, m1 in 0.0f64..2.0, m2 in 0.0f64..2.0, g in 0.0f64..1.0,
        ) {
            // Signed measure ν = ρ₁ − ρ₂ built from Gaussians and a point mass.
            let v = make_gaussian_potential(1.0, 1.0).unwrap();
            let grid = RadialGrid::gauss_legendre(12.0, 256).unwrap();
            let a = gaussian_density(&grid, m1, w1);
            let mut b = gaussian_density(&grid, m2, w2);
            b.point_mass = g;
            let form = interaction_energy(&a, &a, &v).unwrap() + interaction_energy(&b, &b, &v).unwrap()
                - 2.0 * interaction_energy(&a, &b, &v).unwrap();
            prop_assert!(form >= -1e-10);
        }

        #[test]
        fn convolution_preserves_mass(s in 0.3f64..2.0, m in 0.1f64..3.0, g in 0.0f64..1.0) {
            let v = make_gaussian_potential(1.0, 0.7).unwrap();
            let grid = RadialGrid::gauss_legendre(14.0, 256).unwrap();
            let mut rho = gaussian_density(&grid, m, s);
            rho.point_mass = g;
            let conv = radial_convolution(&v, &rho).unwrap();
            let lhs = grid.integrate_3d(&conv.values);
            prop_assert!(((lhs - v.l1_norm * (m + g)) / lhs).abs() < 1e-6);
        }
    }
}
