//! Quadrature rules shared by the solvers: an adaptive Gauss–Kronrod
//! integrator for scalar integrals and radial grids carrying fixed weights
//! for functions sampled on nodes.

use std::collections::BinaryHeap;
use std::f64::consts::PI;
use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_225,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Adaptive 15-point Gauss–Kronrod integration of `f` over `[a, b]`.
///
/// Subdivides the interval with the largest error estimate until the summed
/// estimate drops below `max(abs_tol, rel_tol·|I|)`. Fails with
/// [`Error::Quadrature`] when 4000 subintervals do not suffice or the
/// integrand produces non-finite values.
pub fn integrate<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let (value, error) = gk15(&mut f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Segment { a, b, value, error });
    let mut total = value;
    let mut total_err = error;
    for _ in 0..4000 {
        if !total.is_finite() {
            return Err(Error::Quadrature(format!(
                "non-finite integrand on [{a}, {b}]"
            )));
        }
        if total_err <= abs_tol.max(rel_tol * total.abs()) {
            return Ok(total);
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        let (v1, e1) = gk15(&mut f, worst.a, mid);
        let (v2, e2) = gk15(&mut f, mid, worst.b);
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.error;
        heap.push(Segment {
            a: worst.a,
            b: mid,
            value: v1,
            error: e1,
        });
        heap.push(Segment {
            a: mid,
            b: worst.b,
            value: v2,
            error: e2,
        });
    }
    // Recompute the error sum to shed accumulated rounding before giving up.
    let err: f64 = heap.iter().map(|s| s.error).sum();
    if err <= abs_tol.max(rel_tol * total.abs()) {
        Ok(total)
    } else {
        Err(Error::Quadrature(format!(
            "tolerance {abs_tol:e} not met on [{a}, {b}], estimate {err:e}"
        )))
    }
}

/// Adaptive integration of `f` over `[a, ∞)` via the map `x = a + t/(1−t)`.
pub fn integrate_to_infinity<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<f64> {
    integrate(
        |t| {
            if t >= 1.0 {
                return 0.0;
            }
            let s = 1.0 - t;
            let v = f(a + t / s);
            if v == 0.0 {
                0.0
            } else {
                v / (s * s)
            }
        },
        0.0,
        1.0,
        abs_tol,
        rel_tol,
    )
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`, ordered by increasing node.
pub fn gauss_legendre(order: usize) -> Vec<(f64, f64)> {
    let order = NonZeroUsize::new(order.max(1)).expect("order is positive");
    let rule = GaussLegendre::new(order);
    let mut pairs: Vec<(f64, f64)> = rule.as_node_weight_pairs().to_vec();
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    pairs
}

/// Gauss–Legendre nodes and weights mapped to `[a, b]`.
pub fn gauss_legendre_on(order: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    gauss_legendre(order)
        .into_iter()
        .map(|(x, w)| (c + h * x, h * w))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
enum Layout {
    /// Composite Gauss–Legendre panels; `edges` has one more entry than panels.
    Panels { edges: Vec<f64>, order: usize },
    /// Interior nodes `h, 2h, …, n h` with trapezoidal weights and zero
    /// boundary values at `0` and `(n+1) h`.
    Uniform { h: f64 },
}

/// Nodes and weights for integrals over `[0, r_max]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialGrid {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub r_max: f64,
    layout: Layout,
}

/// Gauss–Legendre order used inside every panel of a composite grid.
pub const PANEL_ORDER: usize = 8;

impl RadialGrid {
    /// Composite Gauss–Legendre grid with `n_points` nodes (a multiple of
    /// [`PANEL_ORDER`], at least 32). The first panel is refined
    /// geometrically towards the origin, where phase-space integrands of
    /// critical Bose factors lose smoothness.
    pub fn gauss_legendre(r_max: f64, n_points: usize) -> Result<Self> {
        if !(r_max > 0.0 && r_max.is_finite()) {
            return Err(crate::error::domain(
                "RadialGrid::gauss_legendre",
                format!("r_max must be positive, got {r_max}"),
            ));
        }
        if n_points % PANEL_ORDER != 0 || n_points < 4 * PANEL_ORDER {
            return Err(crate::error::domain(
                "RadialGrid::gauss_legendre",
                format!("n_points must be a multiple of {PANEL_ORDER} and >= 32, got {n_points}"),
            ));
        }
        let n_panels = n_points / PANEL_ORDER;
        let n_grade = (n_panels / 4).min(10);
        let width = r_max / (n_panels - n_grade + 1) as f64;
        let mut edges = vec![0.0];
        for k in (0..n_grade).rev() {
            edges.push(width / f64::powi(2.0, k as i32));
        }
        for k in 1..=(n_panels - n_grade) {
            edges.push(width * (k + 1) as f64);
        }
        *edges.last_mut().expect("edges nonempty") = r_max;
        let rule = gauss_legendre(PANEL_ORDER);
        let mut nodes = Vec::with_capacity(n_points);
        let mut weights = Vec::with_capacity(n_points);
        for pair in edges.windows(2) {
            let c = 0.5 * (pair[0] + pair[1]);
            let h = 0.5 * (pair[1] - pair[0]);
            for &(x, w) in &rule {
                nodes.push(c + h * x);
                weights.push(h * w);
            }
        }
        Ok(Self {
            nodes,
            weights,
            r_max,
            layout: Layout::Panels {
                edges,
                order: PANEL_ORDER,
            },
        })
    }

    /// Uniform interior grid with `n` nodes on `(0, r_max)`; the endpoints
    /// carry implicit zero values (Dirichlet data).
    pub fn uniform_interior(r_max: f64, n: usize) -> Result<Self> {
        if !(r_max > 0.0 && r_max.is_finite()) || n < 4 {
            return Err(crate::error::domain(
                "RadialGrid::uniform_interior",
                format!("need r_max > 0 and n >= 4, got r_max={r_max}, n={n}"),
            ));
        }
        let h = r_max / (n + 1) as f64;
        Ok(Self {
            nodes: (1..=n).map(|i| i as f64 * h).collect(),
            weights: vec![h; n],
            r_max,
            layout: Layout::Uniform { h },
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Spacing of a uniform grid, `None` for panel grids.
    pub fn uniform_spacing(&self) -> Option<f64> {
        match self.layout {
            Layout::Uniform { h } => Some(h),
            Layout::Panels { .. } => None,
        }
    }

    /// `∫₀^{r_max} f(r) dr` for samples `f` on the nodes.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        debug_assert_eq!(f.len(), self.len());
        self.weights.iter().zip(f).map(|(w, v)| w * v).sum()
    }

    /// `4π ∫ r² f(r) dr`, the integral over R³ of a radial function.
    pub fn integrate_3d(&self, f: &[f64]) -> f64 {
        4.0 * PI
            * self
                .weights
                .iter()
                .zip(&self.nodes)
                .zip(f)
                .map(|((w, r), v)| w * r * r * v)
                .sum::<f64>()
    }

    /// `4π ∫ r² |f(r) − g(r)| dr`, the L¹(R³) distance of radial functions.
    pub fn l1_distance_3d(&self, f: &[f64], g: &[f64]) -> f64 {
        4.0 * PI
            * self
                .weights
                .iter()
                .zip(&self.nodes)
                .zip(f.iter().zip(g))
                .map(|((w, r), (a, b))| w * r * r * (a - b).abs())
                .sum::<f64>()
    }

    /// Interpolates node samples at radius `r` (the function is taken to be
    /// even in `r` and zero beyond `r_max`).
    pub fn interpolate(&self, values: &[f64], r: f64) -> f64 {
        let r = r.abs();
        if r > self.r_max {
            return 0.0;
        }
        match &self.layout {
            Layout::Panels { edges, order } => {
                let panel = match edges.binary_search_by(|e| e.total_cmp(&r)) {
                    Ok(i) => i.min(edges.len() - 2),
                    Err(i) => i.saturating_sub(1).min(edges.len() - 2),
                };
                let lo = panel * order;
                lagrange(&self.nodes[lo..lo + order], &values[lo..lo + order], r)
            }
            Layout::Uniform { h } => {
                let n = self.nodes.len();
                let x = r / h;
                let i = (x.floor() as isize - 1).clamp(0, n as isize - 4) as usize;
                lagrange(&self.nodes[i..i + 4], &values[i..i + 4], r)
            }
        }
    }
}

fn lagrange(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let mut total = 0.0;
    for (i, (&xi, &yi)) in xs.iter().zip(ys).enumerate() {
        let mut basis = 1.0;
        for (j, &xj) in xs.iter().enumerate() {
            if i != j {
                basis *= (x - xj) / (xi - xj);
            }
        }
        total += basis * yi;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_kronrod_integrates_smooth_and_peaked_functions() {
        let v = integrate(|x| x.sin(), 0.0, PI, 1e-13, 1e-13).unwrap();
        assert!((v - 2.0).abs() < 1e-12);
        let peak = integrate(
            |x| (-(x - 0.3f64).powi(2) / 1e-4).exp(),
            0.0,
            1.0,
            1e-13,
            1e-12,
        )
        .unwrap();
        assert!((peak - (PI * 1e-4).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn semi_infinite_integral_of_gaussian() {
        let v = integrate_to_infinity(|x| (-x * x).exp(), 0.0, 1e-13, 1e-12).unwrap();
        assert!((v - 0.5 * PI.sqrt()).abs() < 1e-11);
    }

    #[test]
    fn integrator_reports_failure_for_nonintegrable_input() {
        let r = integrate(|x| 1.0 / x, 0.0, 1.0, 1e-12, 1e-12);
        assert!(matches!(r, Err(Error::Quadrature(_))));
    }

    #[test]
    fn panel_grid_integrates_gaussian_moment_to_machine_precision() {
        let grid = RadialGrid::gauss_legendre(12.0, 512).unwrap();
        let f: Vec<f64> = grid.nodes.iter().map(|r| (-r * r).exp()).collect();
        // ∫ e^{-|x|²} d³x = π^{3/2}
        assert!((grid.integrate_3d(&f) - PI.powf(1.5)).abs() < 1e-13);
        assert_eq!(grid.len(), 512);
        assert!(grid.nodes.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn panel_interpolation_is_spectrally_accurate() {
        let grid = RadialGrid::gauss_legendre(10.0, 256).unwrap();
        let f: Vec<f64> = grid.nodes.iter().map(|r| (-0.5 * r * r).exp()).collect();
        for &r in &[0.0, 0.013, 0.5, 1.7, 3.3, 9.99] {
            let exact = (-0.5f64 * r * r).exp();
            assert!((grid.interpolate(&f, r) - exact).abs() < 1e-9, "r = {r}");
        }
        assert_eq!(grid.interpolate(&f, 11.0), 0.0);
    }

    #[test]
    fn uniform_grid_trapezoid_and_interpolation() {
        let grid = RadialGrid::uniform_interior(PI, 999).unwrap();
        let f: Vec<f64> = grid.nodes.iter().map(|r| r.sin()).collect();
        assert!((grid.integrate(&f) - 2.0).abs() < 1e-5);
        assert!((grid.interpolate(&f, 1.0) - 1f64.sin()).abs() < 1e-9);
    }
}
