//! Brute-force checks of the inequalities behind the semiclassical limit on
//! small instances: coherent-state resolution of the identity, Berezin–Lieb,
//! trace convexity under projections, relative-entropy coercivity in phase
//! space and for operators, and the lower bound for positive-type
//! interactions.
//!
//! Every random suite is seeded and reproducible; each instance draws from
//! its own ChaCha stream derived from the suite seed and the instance index.

use std::f64::consts::PI;

use nalgebra::{Complex, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::potentials::{
    convolve_at, interaction_energy, make_gaussian_potential, Potential, RadialDensity,
};
use crate::quadrature::{gauss_legendre_on, RadialGrid};
use crate::special_functions::{bose_entropy_f_prime_unchecked, bose_entropy_f_unchecked};

type C64 = Complex<f64>;

/// Convex scalar functions used by the trace inequalities.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ConvexFn {
    /// `x ↦ c·x`, affine (equality case).
    Linear(f64),
    /// `x ↦ c·x²`.
    Square(f64),
    /// `x ↦ x^s` on `x ≥ 0`, `s > 1`.
    Power(f64),
    /// `x ↦ x ln x` on `x ≥ 0`.
    XLogX,
    /// Bose entropy `f(x) = x ln x − (1+x) ln(1+x)` on `x ≥ 0`.
    BoseEntropy,
}

impl ConvexFn {
    /// Whether the function is only defined for `x ≥ 0`.
    pub fn needs_nonnegative(self) -> bool {
        matches!(
            self,
            ConvexFn::Power(_) | ConvexFn::XLogX | ConvexFn::BoseEntropy
        )
    }

    /// Value at `x`; arguments of half-line functions are clamped at 0 to
    /// absorb rounding in computed spectra.
    pub fn eval(self, x: f64) -> f64 {
        match self {
            ConvexFn::Linear(c) => c * x,
            ConvexFn::Square(c) => c * x * x,
            ConvexFn::Power(s) => x.max(0.0).powf(s),
            ConvexFn::XLogX => {
                let x = x.max(0.0);
                if x == 0.0 {
                    0.0
                } else {
                    x * x.ln()
                }
            }
            ConvexFn::BoseEntropy => bose_entropy_f_unchecked(x.max(0.0)),
        }
    }

    pub fn name(self) -> String {
        match self {
            ConvexFn::Linear(c) => format!("linear({c})"),
            ConvexFn::Square(c) => format!("square({c})"),
            ConvexFn::Power(s) => format!("power({s})"),
            ConvexFn::XLogX => "xlogx".into(),
            ConvexFn::BoseEntropy => "bose_entropy".into(),
        }
    }
}

fn instance_rng(seed: u64, suite: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ suite.rotate_left(32));
    rng.set_stream(index as u64);
    rng
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

// ---------------------------------------------------------------------------
// Coherent-state resolution of the identity
// ---------------------------------------------------------------------------

/// Normalised 1D Hermite function `ψ_n` of length scale `s`.
fn hermite_functions(x: f64, scale: f64, nmax: usize) -> Vec<f64> {
    let y = x / scale;
    let mut out = Vec::with_capacity(nmax + 1);
    let g = (-0.5 * y * y).exp() / (PI.sqrt() * scale).sqrt();
    out.push(g);
    if nmax >= 1 {
        out.push(2f64.sqrt() * y * g);
    }
    for n in 2..=nmax {
        let nf = n as f64;
        let next = (2.0 / nf).sqrt() * y * out[n - 1] - ((nf - 1.0) / nf).sqrt() * out[n - 2];
        out.push(next);
    }
    out
}

/// Probe wave function `Σ c_n ψ_{n₁}(x)ψ_{n₂}(y)ψ_{n₃}(z)` built from
/// Hermite functions of a common length scale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HermiteProbe {
    pub scale: f64,
    pub terms: Vec<([usize; 3], f64)>,
}

impl HermiteProbe {
    /// Single product mode.
    pub fn mode(scale: f64, n: [usize; 3]) -> Self {
        Self {
            scale,
            terms: vec![(n, 1.0)],
        }
    }

    /// Normalised combination (orthonormality of the modes is used).
    pub fn normalized(scale: f64, terms: Vec<([usize; 3], f64)>) -> Result<Self> {
        let norm = terms.iter().map(|t| t.1 * t.1).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(domain(
                "HermiteProbe::normalized",
                "zero or non-finite probe",
            ));
        }
        Ok(Self {
            scale,
            terms: terms.into_iter().map(|(n, c)| (n, c / norm)).collect(),
        })
    }

    fn max_index(&self) -> usize {
        self.terms.iter().flat_map(|t| t.0).max().unwrap_or(0)
    }
}

/// 1D phase-space Gram matrix `(2πħ)^{−1}∫⟨ψ_j, c_{p,q}⟩⟨c_{p,q}, ψ_k⟩ dp dq`
/// by direct quadrature of the coherent-state overlaps.
fn phase_space_gram(hbar: f64, scale: f64, nmax: usize) -> DMatrix<C64> {
    // Extent covering the probe modes and the window.
    let reach = scale * (2.0 * nmax as f64 + 1.0).sqrt();
    let x_ext = reach + 10.0 * hbar.sqrt().max(scale);
    let xs = composite_gl(-x_ext, x_ext, 24, 12);
    let q_ext = x_ext;
    let p_ext =
        hbar / scale * (2.0 * nmax as f64 + 1.0).sqrt() + 10.0 * hbar.sqrt().max(hbar / scale);
    let qs = composite_gl(-q_ext, q_ext, 16, 10);
    let ps = composite_gl(-p_ext, p_ext, 16, 10);
    let psi: Vec<Vec<f64>> = xs
        .iter()
        .map(|&(x, _)| hermite_functions(x, scale, nmax))
        .collect();
    let norm = (PI * hbar).powf(-0.25);
    let rows: Vec<DMatrix<C64>> = qs
        .par_iter()
        .map(|&(q, wq)| {
            let mut acc = DMatrix::<C64>::zeros(nmax + 1, nmax + 1);
            for &(p, wp) in &ps {
                let mut ov = vec![C64::new(0.0, 0.0); nmax + 1];
                for ((x, wx), ps_x) in xs.iter().zip(&psi) {
                    let c = C64::from_polar(
                        norm * (-(x - q).powi(2) / (2.0 * hbar)).exp(),
                        p * x / hbar,
                    ) * *wx;
                    for (o, &f) in ov.iter_mut().zip(ps_x) {
                        *o += c * f;
                    }
                }
                let w = wq * wp / (2.0 * PI * hbar);
                for j in 0..=nmax {
                    for k in 0..=nmax {
                        acc[(j, k)] += ov[j].conj() * ov[k] * w;
                    }
                }
            }
            acc
        })
        .collect();
    rows.into_iter()
        .fold(DMatrix::zeros(nmax + 1, nmax + 1), |a, b| a + b)
}

fn composite_gl(a: f64, b: f64, panels: usize, order: usize) -> Vec<(f64, f64)> {
    let h = (b - a) / panels as f64;
    (0..panels)
        .flat_map(|i| gauss_legendre_on(order, a + i as f64 * h, a + (i + 1) as f64 * h))
        .collect()
}

/// `|(2πħ)^{−3}∫|⟨probe, ℓ^ħ_{p,q}⟩|² dp dq − 1|` for the Gaussian window.
pub fn coherent_resolution_check(hbar: f64, probe: &HermiteProbe) -> Result<f64> {
    if !(hbar > 0.0 && probe.scale > 0.0) {
        return Err(domain(
            "coherent_resolution_check",
            "need hbar > 0 and scale > 0",
        ));
    }
    let norm: f64 = probe.terms.iter().map(|t| t.1 * t.1).sum();
    if (norm - 1.0).abs() > 1e-12 {
        return Err(domain(
            "coherent_resolution_check",
            "probe must be normalised",
        ));
    }
    let g = phase_space_gram(hbar, probe.scale, probe.max_index());
    let mut total = C64::new(0.0, 0.0);
    for (n, c) in &probe.terms {
        for (m, d) in &probe.terms {
            let mut prod = C64::new(c * d, 0.0);
            for i in 0..3 {
                prod *= g[(n[i], m[i])];
            }
            total += prod;
        }
    }
    if !total.re.is_finite() {
        return Err(Error::Quadrature("non-finite resolution integral".into()));
    }
    Ok((total.re - 1.0).abs())
}

/// The five standard probes: the window itself, the first excited state of
/// the `ω = 1` oscillator, a seeded random superposition of five oscillator
/// modes, and two mixed modes at other length scales.
pub fn standard_probes(hbar: f64, seed: u64) -> Result<Vec<(String, HermiteProbe)>> {
    let osc = (2.0 * hbar).sqrt();
    let mut rng = instance_rng(seed, 0x5052_4f42, 0);
    let mut terms = Vec::new();
    while terms.len() < 5 {
        let n = [
            rng.gen_range(0..3),
            rng.gen_range(0..3),
            rng.gen_range(0..3),
        ];
        if terms.iter().all(|(m, _)| *m != n) {
            terms.push((n, normal(&mut rng)));
        }
    }
    Ok(vec![
        ("window".into(), HermiteProbe::mode(hbar.sqrt(), [0, 0, 0])),
        (
            "oscillator_first_excited".into(),
            HermiteProbe::mode(osc, [1, 0, 0]),
        ),
        (
            "random_superposition".into(),
            HermiteProbe::normalized(osc, terms)?,
        ),
        (
            "narrow_mixture".into(),
            HermiteProbe::normalized(0.7 * hbar.sqrt(), vec![([1, 1, 0], 0.6), ([0, 0, 2], -0.8)])?,
        ),
        (
            "wide_mode".into(),
            HermiteProbe::mode(1.5 * hbar.sqrt(), [2, 1, 0]),
        ),
    ])
}

// ---------------------------------------------------------------------------
// Berezin–Lieb
// ---------------------------------------------------------------------------

/// Outcome of a Berezin–Lieb comparison in one degree of freedom.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BerezinLiebReport {
    /// `(2πħ)^{−1}∫ζ(a) − tr ζ(A)`.
    pub margin: f64,
    pub phase_space: f64,
    pub trace: f64,
    /// Fraction of `(2πħ)^{−1}∫a` outside the basis.
    pub tail_weight: f64,
}

/// Phase-space box and quadrature for [`berezin_lieb_check`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseBox {
    pub extent: f64,
    pub panels: usize,
    pub order: usize,
}

impl Default for PhaseBox {
    fn default() -> Self {
        Self {
            extent: 7.0,
            panels: 14,
            order: 10,
        }
    }
}

/// Berezin–Lieb margin for the anti-Wick operator
/// `A = (2πħ)^{−1}∫ a(p,q) |c_{p,q}⟩⟨c_{p,q}| dp dq` assembled in the first
/// `basis_dim` Hermite functions of length scale `√ħ` (one degree of
/// freedom). `ζ` must vanish at 0 so that the discarded modes do not count.
pub fn berezin_lieb_check<F>(
    symbol: F,
    zeta: ConvexFn,
    hbar: f64,
    basis_dim: usize,
    region: &PhaseBox,
) -> Result<BerezinLiebReport>
where
    F: Fn(f64, f64) -> f64 + Sync,
{
    if !(hbar > 0.0) || basis_dim == 0 {
        return Err(domain(
            "berezin_lieb_check",
            "need hbar > 0 and basis_dim >= 1",
        ));
    }
    let nodes = composite_gl(-region.extent, region.extent, region.panels, region.order);
    let d = basis_dim;
    let partial: Vec<(DMatrix<C64>, f64, f64, f64)> = nodes
        .par_iter()
        .map(|&(q, wq)| {
            let mut acc = DMatrix::<C64>::zeros(d, d);
            let (mut zeta_int, mut a_int, mut tail_int) = (0.0, 0.0, 0.0);
            for &(p, wp) in &nodes {
                let a = symbol(p, q);
                if !(a >= 0.0) || !a.is_finite() {
                    return Err(domain(
                        "berezin_lieb_check",
                        format!("symbol must be finite and >= 0, got {a}"),
                    ));
                }
                let w = wq * wp / (2.0 * PI * hbar);
                zeta_int += w * zeta.eval(a);
                if a == 0.0 {
                    continue;
                }
                a_int += w * a;
                // ⟨ψ_n, c_{p,q}⟩ = e^{−|α|²/2} αⁿ/√n! up to a common phase.
                let alpha = C64::new(q, p) / (2.0 * hbar).sqrt();
                let r2 = alpha.norm_sqr();
                let mut v = vec![C64::new(0.0, 0.0); d];
                let mut term = C64::new((-0.5 * r2).exp(), 0.0);
                let mut inside = 0.0;
                for (n, slot) in v.iter_mut().enumerate() {
                    if n > 0 {
                        term *= alpha / (n as f64).sqrt();
                    }
                    *slot = term;
                    inside += term.norm_sqr();
                }
                tail_int += w * a * (1.0 - inside).max(0.0);
                let wa = w * a;
                for k in 0..d {
                    let ck = v[k].conj() * wa;
                    for j in k..d {
                        acc[(j, k)] += v[j] * ck;
                    }
                }
            }
            Ok((acc, zeta_int, a_int, tail_int))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut a_mat = DMatrix::<C64>::zeros(d, d);
    let (mut zeta_int, mut a_int, mut tail_int) = (0.0, 0.0, 0.0);
    for (m, z, a, t) in partial {
        a_mat += m;
        zeta_int += z;
        a_int += a;
        tail_int += t;
    }
    for k in 0..d {
        for j in 0..k {
            a_mat[(j, k)] = a_mat[(k, j)].conj();
        }
    }
    let tail_weight = if a_int > 0.0 { tail_int / a_int } else { 0.0 };
    if tail_weight > 1e-8 {
        return Err(Error::Truncation(format!(
            "weight {tail_weight:e} of the symbol lies outside {d} basis functions"
        )));
    }
    let eig = a_mat.symmetric_eigenvalues();
    let trace: f64 = eig.iter().map(|&x| zeta.eval(x)).sum();
    Ok(BerezinLiebReport {
        margin: zeta_int - trace,
        phase_space: zeta_int,
        trace,
        tail_weight,
    })
}

/// Random smooth symbol: a sum of Gaussian bumps or a shifted Bose factor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum RandomSymbol {
    Bumps(Vec<(f64, f64, f64, f64)>),
    /// `(e^{β(p² + ω²q²/4) + δ} − 1)^{−1}` with `(β, ω, δ)`.
    BoseFactor(f64, f64, f64),
}

impl RandomSymbol {
    pub fn eval(&self, p: f64, q: f64) -> f64 {
        match self {
            RandomSymbol::Bumps(list) => list
                .iter()
                .map(|&(w, p0, q0, s)| {
                    w * (-((p - p0).powi(2) + (q - q0).powi(2)) / (2.0 * s * s)).exp()
                })
                .sum(),
            RandomSymbol::BoseFactor(beta, omega, delta) => {
                1.0 / (beta * (p * p + 0.25 * omega * omega * q * q) + delta).exp_m1()
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Trace convexity
// ---------------------------------------------------------------------------

fn apply_fn(a: &DMatrix<f64>, f: ConvexFn) -> (Vec<f64>, DMatrix<f64>) {
    let eig = a.clone().symmetric_eigen();
    (
        eig.eigenvalues.iter().map(|&x| f.eval(x)).collect(),
        eig.eigenvectors,
    )
}

/// `tr[Q f(A) Q] − tr[f(QAQ)]`, with `f(QAQ)` taken on the range of the
/// projection `Q`.
pub fn trace_convexity_check(a: &DMatrix<f64>, q: &DMatrix<f64>, f: ConvexFn) -> Result<f64> {
    let d = a.nrows();
    if a.ncols() != d || q.nrows() != d || q.ncols() != d {
        return Err(Error::Precondition(
            "A and Q must be square of equal size".into(),
        ));
    }
    if d > 64 {
        return Err(Error::Precondition(format!("dimension {d} exceeds 64")));
    }
    if (a - a.transpose()).amax() > 1e-12 * a.amax().max(1.0) {
        return Err(domain("trace_convexity_check", "A must be symmetric"));
    }
    if (q * q - q).amax() > 1e-10 || (q - q.transpose()).amax() > 1e-12 {
        return Err(domain(
            "trace_convexity_check",
            "Q must be an orthogonal projection",
        ));
    }
    let (fa, v) = apply_fn(a, f);
    // tr[Q f(A) Q] = Σ_i f(λ_i) ‖Q v_i‖².
    let lhs: f64 = (0..d)
        .map(|i| fa[i] * (q * v.column(i)).norm_squared())
        .sum();
    // Orthonormal basis of range(Q) from its eigenvectors with eigenvalue 1.
    let qe = q.clone().symmetric_eigen();
    let cols: Vec<DVector<f64>> = (0..d)
        .filter(|&i| qe.eigenvalues[i] > 0.5)
        .map(|i| qe.eigenvectors.column(i).into_owned())
        .collect();
    if cols.is_empty() {
        return Ok(lhs);
    }
    let u = DMatrix::from_columns(&cols);
    let b = u.transpose() * a * &u;
    let b = 0.5 * (&b + b.transpose());
    let rhs: f64 = b.symmetric_eigenvalues().iter().map(|&x| f.eval(x)).sum();
    Ok(lhs - rhs)
}

/// Random orthogonal projection of rank `k` in dimension `d`.
pub fn random_projection(rng: &mut ChaCha8Rng, d: usize, k: usize) -> DMatrix<f64> {
    let m = DMatrix::from_fn(d, k.max(1), |_, _| normal(rng));
    let qr = m.qr();
    let u = qr.q();
    let u = u.columns(0, k.min(d)).into_owned();
    &u * u.transpose()
}

/// Random symmetric matrix; positive semidefinite when `psd` is set.
pub fn random_symmetric(rng: &mut ChaCha8Rng, d: usize, psd: bool) -> DMatrix<f64> {
    let m = DMatrix::from_fn(d, d, |_, _| normal(rng));
    if psd {
        &m * m.transpose() / d as f64
    } else {
        0.5 * (&m + m.transpose())
    }
}

// ---------------------------------------------------------------------------
// Relative-entropy coercivity
// ---------------------------------------------------------------------------

/// Two nonnegative functions sampled on a common quadrature grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseSampleSet {
    pub weights: Vec<f64>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl PhaseSampleSet {
    pub fn new(weights: Vec<f64>, a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        if weights.len() != a.len() || a.len() != b.len() {
            return Err(Error::Precondition(
                "weights, a and b must have equal length".into(),
            ));
        }
        let ok = |v: &[f64]| v.iter().all(|x| x.is_finite() && *x >= 0.0);
        if !ok(&weights) || !ok(&a) || !ok(&b) {
            return Err(domain(
                "PhaseSampleSet::new",
                "weights and samples must be finite and >= 0",
            ));
        }
        Ok(Self { weights, a, b })
    }

    /// Random instance with `n` samples; `b > 0` everywhere.
    pub fn random(rng: &mut ChaCha8Rng, n: usize) -> Self {
        let scale_a = 10f64.powf(rng.gen_range(-2.0..2.0));
        let scale_b = 10f64.powf(rng.gen_range(-2.0..2.0));
        let weights = (0..n).map(|_| rng.gen_range(0.01..1.0)).collect();
        let a = (0..n)
            .map(|_| {
                if rng.gen_bool(0.1) {
                    0.0
                } else {
                    scale_a * rng.gen::<f64>().powi(2)
                }
            })
            .collect();
        let b = (0..n).map(|_| scale_b * rng.gen_range(0.01..1.0)).collect();
        Self { weights, a, b }
    }
}

/// Scalar Bregman divergence of the Bose entropy,
/// `a ln(a/b) − (1+a) ln((1+a)/(1+b))`.
pub fn bose_divergence(a: f64, b: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    if b == 0.0 {
        return f64::INFINITY;
    }
    let fa = bose_entropy_f_unchecked(a);
    let fb = bose_entropy_f_unchecked(b);
    (fa - fb - bose_entropy_f_prime_unchecked(b) * (a - b)).max(0.0)
}

/// `𝒮(a,b) · ∫(a+b)(1+b) / (∫|a−b|)²`; `+∞` when `a = b`.
pub fn phase_coercivity_ratio(s: &PhaseSampleSet) -> f64 {
    let mut rel = 0.0;
    let mut mass = 0.0;
    let mut l1 = 0.0;
    for ((&w, &a), &b) in s.weights.iter().zip(&s.a).zip(&s.b) {
        rel += w * bose_divergence(a, b);
        mass += w * (a + b) * (1.0 + b);
        l1 += w * (a - b).abs();
    }
    if l1 == 0.0 {
        return f64::INFINITY;
    }
    rel * mass / (l1 * l1)
}

/// Pair of nonnegative Hermitian matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteOperatorPair {
    pub a: DMatrix<C64>,
    pub b: DMatrix<C64>,
}

fn hermitian_eigen(m: &DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    let e = m.clone().symmetric_eigen();
    (e.eigenvalues.iter().copied().collect(), e.eigenvectors)
}

fn function_of(m: &DMatrix<C64>, f: impl Fn(f64) -> f64) -> DMatrix<C64> {
    let (vals, vecs) = hermitian_eigen(m);
    let d = DMatrix::from_diagonal(&DVector::from_iterator(
        vals.len(),
        vals.iter().map(|&x| C64::new(f(x), 0.0)),
    ));
    &vecs * d * vecs.adjoint()
}

impl FiniteOperatorPair {
    pub fn new(a: DMatrix<C64>, b: DMatrix<C64>) -> Result<Self> {
        let d = a.nrows();
        if a.ncols() != d || b.nrows() != d || b.ncols() != d {
            return Err(Error::Precondition(
                "a and b must be square of equal size".into(),
            ));
        }
        if d > 64 {
            return Err(Error::Precondition(format!("dimension {d} exceeds 64")));
        }
        for m in [&a, &b] {
            let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
            if (m - m.adjoint()).iter().any(|z| z.norm() > 1e-12 * scale) {
                return Err(domain(
                    "FiniteOperatorPair::new",
                    "matrices must be Hermitian",
                ));
            }
            if hermitian_eigen(m).0.iter().any(|&x| x < -1e-12 * scale) {
                return Err(domain(
                    "FiniteOperatorPair::new",
                    "matrices must be nonnegative",
                ));
            }
        }
        Ok(Self { a, b })
    }

    /// Diagonal (commuting) pair.
    pub fn diagonal(a: &[f64], b: &[f64]) -> Result<Self> {
        let to = |v: &[f64]| {
            DMatrix::from_diagonal(&DVector::from_iterator(
                v.len(),
                v.iter().map(|&x| C64::new(x, 0.0)),
            ))
        };
        Self::new(to(a), to(b))
    }

    /// Random pair in dimension `d`; `b` is positive definite.
    pub fn random(rng: &mut ChaCha8Rng, d: usize) -> Self {
        let sa = 10f64.powf(rng.gen_range(-1.5..1.5));
        let sb = 10f64.powf(rng.gen_range(-1.5..1.5));
        let mut gen = |shift: f64, scale: f64| {
            let m = DMatrix::from_fn(d, d, |_, _| C64::new(normal(rng), normal(rng)));
            let mut h = &m * m.adjoint() * C64::new(scale / d as f64, 0.0);
            for i in 0..d {
                h[(i, i)] += C64::new(shift, 0.0);
            }
            (&h + h.adjoint()) * C64::new(0.5, 0.0)
        };
        let a = gen(0.0, sa);
        let b = gen(0.05 * sb, sb);
        Self { a, b }
    }

    /// Bosonic relative entropy
    /// `tr[a(ln a − ln b) − (1+a)(ln(1+a) − ln(1+b))]`.
    pub fn relative_entropy(&self) -> f64 {
        let d = self.a.nrows();
        let xlogx = |x: f64| if x <= 0.0 { 0.0 } else { x * x.ln() };
        let (av, _) = hermitian_eigen(&self.a);
        let tr_a_log_a: f64 = av.iter().map(|&x| xlogx(x)).sum();
        let tr_1a_log_1a: f64 = av
            .iter()
            .map(|&x| (1.0 + x.max(0.0)) * x.max(0.0).ln_1p())
            .sum();
        let log_b = function_of(&self.b, |x| x.max(f64::MIN_POSITIVE).ln());
        let log_1b = function_of(&self.b, |x| x.max(0.0).ln_1p());
        let one = DMatrix::<C64>::identity(d, d);
        let tr_a_log_b = (&self.a * log_b).trace().re;
        let tr_1a_log_1b = ((&one + &self.a) * log_1b).trace().re;
        (tr_a_log_a - tr_a_log_b - tr_1a_log_1a + tr_1a_log_1b).max(0.0)
    }
}

/// `𝒮(a,b) · ‖1+b‖ · tr[a+b] / ‖a−b‖₁²`; `+∞` when `a = b`.
pub fn operator_coercivity_ratio(pair: &FiniteOperatorPair) -> f64 {
    let (diff, _) = hermitian_eigen(&(&pair.a - &pair.b));
    let trace_norm: f64 = diff.iter().map(|x| x.abs()).sum();
    let scale = pair
        .a
        .iter()
        .chain(pair.b.iter())
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    if trace_norm <= 1e-14 * scale.max(1e-300) {
        return f64::INFINITY;
    }
    let (bv, _) = hermitian_eigen(&pair.b);
    let op_norm = 1.0 + bv.iter().copied().fold(0.0, f64::max);
    let tr = (&pair.a + &pair.b).trace().re;
    pair.relative_entropy() * op_norm * tr / (trace_norm * trace_norm)
}

// ---------------------------------------------------------------------------
// Positive-type lower bound
// ---------------------------------------------------------------------------

/// `Σ_{i<j} v(x_i − x_j) − [Σ_i (η∗v)(x_i) − D(η,η) − N v(0)/2]`.
pub fn positive_type_bound_check(
    points: &[[f64; 3]],
    eta: &RadialDensity,
    v: &Potential,
) -> Result<f64> {
    let n = points.len();
    let mut pair_sum = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let d: f64 = (0..3)
                .map(|k| (points[i][k] - points[j][k]).powi(2))
                .sum::<f64>()
                .sqrt();
            pair_sum += v.value(d);
        }
    }
    let field: f64 = points
        .iter()
        .map(|x| convolve_at(v, eta, (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt()))
        .sum();
    let d_eta = interaction_energy(eta, eta, v)?;
    let margin = pair_sum - (field - d_eta - 0.5 * n as f64 * v.value(0.0));
    if !margin.is_finite() {
        return Err(Error::Quadrature("non-finite positive-type margin".into()));
    }
    Ok(margin)
}

/// Gaussian radial density of total mass `mass` and width `s`.
pub fn gaussian_density(grid: RadialGrid, mass: f64, s: f64) -> Result<RadialDensity> {
    let c = mass * (2.0 * PI * s * s).powf(-1.5);
    let values = grid
        .nodes
        .iter()
        .map(|&r| c * (-r * r / (2.0 * s * s)).exp())
        .collect();
    RadialDensity::new(grid, values, 0.0)
}

// ---------------------------------------------------------------------------
// Seeded suites
// ---------------------------------------------------------------------------

/// The property suites.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Suite {
    Resolution,
    BerezinLieb,
    TraceConvexity,
    PhaseCoercivity,
    OperatorCoercivity,
    PositiveType,
}

impl Suite {
    pub const ALL: [Suite; 6] = [
        Suite::Resolution,
        Suite::BerezinLieb,
        Suite::TraceConvexity,
        Suite::PhaseCoercivity,
        Suite::OperatorCoercivity,
        Suite::PositiveType,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Resolution => "resolution",
            Suite::BerezinLieb => "berezin_lieb",
            Suite::TraceConvexity => "trace_convexity",
            Suite::PhaseCoercivity => "phase_coercivity",
            Suite::OperatorCoercivity => "operator_coercivity",
            Suite::PositiveType => "positive_type",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|s| s.name() == name)
            .ok_or_else(|| Error::Parse(format!("unknown suite '{name}'")))
    }

    /// Default number of random instances.
    pub fn default_instances(self) -> usize {
        match self {
            Suite::Resolution => 5,
            Suite::BerezinLieb => 100,
            Suite::TraceConvexity => 1000,
            Suite::PhaseCoercivity => 1000,
            Suite::OperatorCoercivity => 1000,
            Suite::PositiveType => 200,
        }
    }

    /// Pass criterion: `value ≥ threshold` (margins) or `value > threshold`
    /// (ratios, checked with strict inequality).
    fn threshold(self) -> (f64, bool) {
        match self {
            Suite::Resolution => (1e-5, false),
            Suite::BerezinLieb => (-1e-8, false),
            Suite::TraceConvexity => (-1e-10, false),
            Suite::PhaseCoercivity | Suite::OperatorCoercivity => (0.0, true),
            Suite::PositiveType => (-1e-8, false),
        }
    }
}

/// Result of one seeded suite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: String,
    pub seed: u64,
    pub instances: usize,
    /// Smallest margin or ratio; for the resolution suite the largest defect.
    pub worst_value: f64,
    pub worst_instance: usize,
    pub threshold: f64,
    pub passed: bool,
    /// Per-instance values in instance order.
    pub values: Vec<f64>,
    pub labels: Vec<String>,
}

fn run_instance(suite: Suite, seed: u64, i: usize) -> Result<(f64, String)> {
    let mut rng = instance_rng(seed, suite as u64 + 1, i);
    match suite {
        Suite::Resolution => unreachable!("handled separately"),
        Suite::BerezinLieb => {
            let hbar = rng.gen_range(0.25..0.6);
            let symbol = if rng.gen_bool(0.25) {
                RandomSymbol::BoseFactor(rng.gen_range(1.0..2.5), 2.0, rng.gen_range(0.1..1.0))
            } else {
                let k = rng.gen_range(1..=3);
                RandomSymbol::Bumps(
                    (0..k)
                        .map(|_| {
                            (
                                rng.gen_range(0.2..2.0),
                                rng.gen_range(-1.0..1.0),
                                rng.gen_range(-1.0..1.0),
                                rng.gen_range(0.3..0.6),
                            )
                        })
                        .collect(),
                )
            };
            let zeta = match rng.gen_range(0..4) {
                0 => ConvexFn::Square(rng.gen_range(0.5..2.0)),
                1 => ConvexFn::BoseEntropy,
                2 => ConvexFn::Power(rng.gen_range(1.2..3.0)),
                _ => ConvexFn::XLogX,
            };
            let report = berezin_lieb_check(
                |p, q| symbol.eval(p, q),
                zeta,
                hbar,
                48,
                &PhaseBox::default(),
            )?;
            Ok((
                report.margin,
                format!("hbar={hbar:.3} zeta={}", zeta.name()),
            ))
        }
        Suite::TraceConvexity => {
            let d = rng.gen_range(2..=16);
            let k = rng.gen_range(1..=d);
            let f = match rng.gen_range(0..3) {
                0 => ConvexFn::Square(1.0),
                1 => ConvexFn::BoseEntropy,
                _ => ConvexFn::XLogX,
            };
            let a = random_symmetric(&mut rng, d, f.needs_nonnegative());
            let q = random_projection(&mut rng, d, k);
            Ok((
                trace_convexity_check(&a, &q, f)?,
                format!("d={d} k={k} f={}", f.name()),
            ))
        }
        Suite::PhaseCoercivity => {
            let n = rng.gen_range(1..=64);
            let s = PhaseSampleSet::random(&mut rng, n);
            Ok((phase_coercivity_ratio(&s), format!("n={n}")))
        }
        Suite::OperatorCoercivity => {
            let d = [2, 4, 8][rng.gen_range(0..3)];
            let pair = FiniteOperatorPair::random(&mut rng, d);
            Ok((operator_coercivity_ratio(&pair), format!("d={d}")))
        }
        Suite::PositiveType => {
            let n = rng.gen_range(1..=30);
            let points: Vec<[f64; 3]> = (0..n)
                .map(|_| [normal(&mut rng), normal(&mut rng), normal(&mut rng)])
                .collect();
            let v = make_gaussian_potential(rng.gen_range(0.2..2.0), rng.gen_range(0.3..1.5))?;
            let mass = rng.gen_range(0.0..1.5) * n as f64;
            let width = rng.gen_range(0.5..2.0);
            let grid = RadialGrid::gauss_legendre(12.0 * width, 256)?;
            let eta = gaussian_density(grid, mass, width)?;
            Ok((
                positive_type_bound_check(&points, &eta, &v)?,
                format!("n={n} mass={mass:.3}"),
            ))
        }
    }
}

/// Runs one suite with `instances` seeded random instances (`None` for the
/// default count).
pub fn run_suite(suite: Suite, seed: u64, instances: Option<usize>) -> Result<SuiteReport> {
    let count = instances.unwrap_or_else(|| suite.default_instances());
    let (threshold, strict) = suite.threshold();
    let results: Vec<(f64, String)> = if suite == Suite::Resolution {
        let hbar = 0.3;
        standard_probes(hbar, seed)?
            .into_iter()
            .take(count)
            .map(|(name, probe)| Ok((coherent_resolution_check(hbar, &probe)?, name)))
            .collect::<Result<_>>()?
    } else {
        (0..count)
            .into_par_iter()
            .map(|i| run_instance(suite, seed, i))
            .collect::<Result<_>>()?
    };
    let (values, labels): (Vec<f64>, Vec<String>) = results.into_iter().unzip();
    let (worst_instance, worst_value, passed) = if suite == Suite::Resolution {
        let (i, v) = values
            .iter()
            .copied()
            .enumerate()
            .fold((0, 0.0), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
        (i, v, values.iter().all(|&v| v < threshold))
    } else {
        let (i, v) = values
            .iter()
            .copied()
            .enumerate()
            .fold(
                (0, f64::INFINITY),
                |acc, (i, v)| if v < acc.1 { (i, v) } else { acc },
            );
        let ok = if strict {
            values.iter().all(|&v| v > threshold)
        } else {
            values.iter().all(|&v| v >= threshold)
        };
        (i, v, ok)
    };
    Ok(SuiteReport {
        suite: suite.name().into(),
        seed,
        instances: values.len(),
        worst_value,
        worst_instance,
        threshold,
        passed,
        values,
        labels,
    })
}
