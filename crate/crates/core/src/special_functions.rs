//! Scalar building blocks: the Bose entropy function, Riemann zeta values,
//! polylogarithms of the orders needed for Bose integrals, the integrated
//! Bose function `η`, and the harmonic-oscillator heat kernel.
//!
//! All functions are pure and may be called concurrently.

use std::f64::consts::PI;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{domain, Error, Result};

/// Orders `s` for which [`polylog`] is implemented.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PolylogOrder {
    Half,
    ThreeHalves,
    FiveHalves,
    Three,
    Four,
}

impl PolylogOrder {
    pub const ALL: [PolylogOrder; 5] = [
        PolylogOrder::Half,
        PolylogOrder::ThreeHalves,
        PolylogOrder::FiveHalves,
        PolylogOrder::Three,
        PolylogOrder::Four,
    ];

    pub fn s(self) -> f64 {
        match self {
            PolylogOrder::Half => 0.5,
            PolylogOrder::ThreeHalves => 1.5,
            PolylogOrder::FiveHalves => 2.5,
            PolylogOrder::Three => 3.0,
            PolylogOrder::Four => 4.0,
        }
    }

    /// Maps a numeric order to the enum; only the listed orders are accepted.
    pub fn from_s(s: f64) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|o| o.s() == s)
            .ok_or_else(|| domain("PolylogOrder::from_s", format!("unsupported order {s}")))
    }

    fn index(self) -> usize {
        self as usize
    }
}

/// Bose entropy function `f(x) = x ln x − (1+x) ln(1+x)` for `x ≥ 0`.
pub fn bose_entropy_f(x: f64) -> Result<f64> {
    if !(x >= 0.0) || x.is_infinite() {
        return Err(domain(
            "bose_entropy_f",
            format!("need finite x >= 0, got {x}"),
        ));
    }
    Ok(bose_entropy_f_unchecked(x))
}

/// [`bose_entropy_f`] without argument checks, for inner loops that already
/// guarantee `x ≥ 0`.
pub(crate) fn bose_entropy_f_unchecked(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else if x < 1e-12 {
        x * (x.ln() - 1.0) - 0.5 * x * x
    } else if x < 1.0 {
        x * x.ln() - (1.0 + x) * x.ln_1p()
    } else {
        // x ln(x/(1+x)) − ln(1+x), free of cancellation for large x
        -x * (1.0 / x).ln_1p() - x.ln_1p()
    }
}

/// Derivative `f′(x) = ln(x/(1+x))` for `x > 0`.
pub fn bose_entropy_f_prime(x: f64) -> Result<f64> {
    if !(x > 0.0) || x.is_infinite() {
        return Err(domain(
            "bose_entropy_f_prime",
            format!("need finite x > 0, got {x}"),
        ));
    }
    Ok(bose_entropy_f_prime_unchecked(x))
}

pub(crate) fn bose_entropy_f_prime_unchecked(x: f64) -> f64 {
    -(1.0 / x).ln_1p()
}

const BERNOULLI_2K: [f64; 10] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
    43867.0 / 798.0,
    -174611.0 / 330.0,
];

/// Riemann zeta function for real `s ≠ 1`.
///
/// Uses Euler–Maclaurin summation for `s > 0` and the functional equation
/// for `s < 0`.
pub fn zeta(s: f64) -> Result<f64> {
    if s == 1.0 || !s.is_finite() {
        return Err(Error::Divergence {
            function: "zeta",
            detail: format!("pole or non-finite argument {s}"),
        });
    }
    Ok(zeta_real(s))
}

fn zeta_real(s: f64) -> f64 {
    if s == 0.0 {
        return -0.5;
    }
    if s < 0.0 {
        if s.fract() == 0.0 && (s as i64) % 2 == 0 {
            return 0.0;
        }
        let t = 1.0 - s;
        return 2f64.powf(s) * PI.powf(s - 1.0) * (0.5 * PI * s).sin() * gamma(t) * zeta_real(t);
    }
    if s > 60.0 {
        return 1.0 + 2f64.powf(-s) + 3f64.powf(-s);
    }
    let n = 20.0_f64;
    let mut sum: f64 = (1..20).map(|k| (k as f64).powf(-s)).sum();
    sum += n.powf(1.0 - s) / (s - 1.0) + 0.5 * n.powf(-s);
    // Euler–Maclaurin tail: B_{2j}/(2j)! · s(s+1)…(s+2j−2) · N^{−s−2j+1}
    let mut rising = s;
    let mut fact = 2.0;
    let mut npow = n.powf(-s - 1.0);
    for (j, b) in BERNOULLI_2K.iter().enumerate() {
        sum += b / fact * rising * npow;
        let k = 2 * j as i32 + 2;
        rising *= (s + k as f64 - 1.0) * (s + k as f64);
        fact *= (k + 1) as f64 * (k + 2) as f64;
        npow /= n * n;
    }
    sum
}

const NEAR_ONE_TERMS: usize = 32;
const SERIES_TERMS: usize = 64;

struct PolylogTable {
    s: f64,
    /// `k^{−s}` for `k = 1..=SERIES_TERMS`.
    inv_pow: Vec<f64>,
    /// `ζ(s−k)(−1)^k/k!` for the expansion in `t = −ln z`; for integer `s`
    /// the logarithmic index `k = s−1` is set to zero.
    coeffs: Vec<f64>,
    /// `Γ(1−s)` for non-integer `s`.
    gamma_term: f64,
    /// For integer `s = n`: `H_{n−1}` and `(−1)^{n−1}/(n−1)!`.
    log_term: Option<(usize, f64, f64)>,
}

fn table(order: PolylogOrder) -> &'static PolylogTable {
    static TABLES: OnceLock<Vec<PolylogTable>> = OnceLock::new();
    &TABLES.get_or_init(|| {
        PolylogOrder::ALL
            .iter()
            .map(|o| build_table(o.s()))
            .collect()
    })[order.index()]
}

fn build_table(s: f64) -> PolylogTable {
    let inv_pow = (1..=SERIES_TERMS).map(|k| (k as f64).powf(-s)).collect();
    let integer = s.fract() == 0.0;
    let n = s as usize;
    let mut coeffs = Vec::with_capacity(NEAR_ONE_TERMS);
    let mut fact = 1.0;
    for k in 0..NEAR_ONE_TERMS {
        if k > 0 {
            fact *= k as f64;
        }
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        if integer && k + 1 == n {
            coeffs.push(0.0);
        } else {
            coeffs.push(zeta_real(s - k as f64) * sign / fact);
        }
    }
    let log_term = if integer {
        let harmonic: f64 = (1..n).map(|j| 1.0 / j as f64).sum();
        let fact: f64 = (1..n).map(|j| j as f64).product();
        let sign = if (n - 1) % 2 == 0 { 1.0 } else { -1.0 };
        Some((n - 1, harmonic, sign / fact))
    } else {
        None
    };
    PolylogTable {
        s,
        inv_pow,
        coeffs,
        gamma_term: if integer { 0.0 } else { gamma(1.0 - s) },
        log_term,
    }
}

/// Polylogarithm `Li_s(z) = Σ_{k≥1} z^k/k^s` for `z ∈ [0, 1]`.
///
/// The direct series is used for `z ≤ 1/2`; closer to one the expansion in
/// powers of `t = −ln z` converges geometrically. Absolute accuracy is about
/// `1e−13` over the whole interval.
pub fn polylog(order: PolylogOrder, z: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&z) {
        return Err(domain("polylog", format!("need z in [0, 1], got {z}")));
    }
    if order == PolylogOrder::Half && z == 1.0 {
        return Err(Error::Divergence {
            function: "polylog",
            detail: "Li_{1/2} diverges at z = 1".into(),
        });
    }
    if z <= 0.5 {
        Ok(series(table(order), z))
    } else {
        Ok(near_one(table(order), -z.ln()))
    }
}

/// `Li_s(e^{−t})` for `t ≥ 0`, evaluated without forming `z` first so that
/// small `t` keeps full relative precision.
pub fn polylog_exp_neg(order: PolylogOrder, t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(domain("polylog_exp_neg", format!("need t >= 0, got {t}")));
    }
    if order == PolylogOrder::Half && t == 0.0 {
        return Err(Error::Divergence {
            function: "polylog_exp_neg",
            detail: "Li_{1/2}(e^{-t}) diverges at t = 0".into(),
        });
    }
    Ok(polylog_exp_neg_unchecked(order, t))
}

pub(crate) fn polylog_exp_neg_unchecked(order: PolylogOrder, t: f64) -> f64 {
    let tab = table(order);
    if t >= std::f64::consts::LN_2 {
        series(tab, (-t).exp())
    } else {
        near_one(tab, t.max(0.0))
    }
}

fn series(tab: &PolylogTable, z: f64) -> f64 {
    let mut sum = 0.0;
    let mut zk = 1.0;
    for &w in &tab.inv_pow {
        zk *= z;
        let term = zk * w;
        sum += term;
        if term < 1e-18 * sum {
            break;
        }
    }
    sum
}

fn near_one(tab: &PolylogTable, t: f64) -> f64 {
    // Horner evaluation of Σ c_k t^k.
    let mut sum = 0.0;
    for &c in tab.coeffs.iter().rev() {
        sum = sum * t + c;
    }
    match tab.log_term {
        Some((power, harmonic, scale)) => {
            if t > 0.0 {
                sum += scale * t.powi(power as i32) * (harmonic - t.ln());
            } else if power == 0 {
                // Li_1 is not among the supported orders; kept for completeness.
                return f64::INFINITY;
            }
            sum
        }
        None => sum + tab.gamma_term * t.powf(tab.s - 1.0),
    }
}

/// `(4π)^{−3/2}`, the normalisation that turns `Li_s(e^{−t})` into p-integrals.
pub const FOUR_PI_POW_M32: f64 = 0.022_448_390_265_645_82;

/// Integrated Bose function
/// `η(t) = (2π)^{−3} ∫ dp (e^{p²+t} − 1)^{−1} = (4π)^{−3/2} Li_{3/2}(e^{−t})`.
pub fn eta(t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(domain("eta", format!("need t >= 0, got {t}")));
    }
    Ok(eta_unchecked(t))
}

/// [`eta`] with negative arguments clamped to zero; used where rounding can
/// push an effective potential a few ulps below zero.
pub(crate) fn eta_unchecked(t: f64) -> f64 {
    if t > 700.0 {
        return FOUR_PI_POW_M32 * (-t).exp();
    }
    FOUR_PI_POW_M32 * polylog_exp_neg_unchecked(PolylogOrder::ThreeHalves, t.max(0.0))
}

/// Derivative `η′(t) = −(4π)^{−3/2} Li_{1/2}(e^{−t})` for `t > 0`.
pub fn eta_prime(t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(domain("eta_prime", format!("need t > 0, got {t}")));
    }
    Ok(eta_prime_unchecked(t))
}

pub(crate) fn eta_prime_unchecked(t: f64) -> f64 {
    if t > 700.0 {
        return -FOUR_PI_POW_M32 * (-t).exp();
    }
    -FOUR_PI_POW_M32 * polylog_exp_neg_unchecked(PolylogOrder::Half, t)
}

/// Heat kernel `e^{−t h}(x, y)` of `h = −ħ²Δ + ω²x²/4` on R³.
///
/// With `Ω = ω/ħ` and `τ = tħω` the kernel reads
/// `(Ω/2)^{3/2} (2π sinh τ)^{−3/2} exp(−(Ω/4)[(x²+y²)/tanh τ − 2x·y/sinh τ])`,
/// evaluated in log space so that large `τ` does not overflow.
pub fn mehler_kernel(t: f64, x: [f64; 3], y: [f64; 3], omega: f64, hbar: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(domain("mehler_kernel", format!("need t > 0, got {t}")));
    }
    if !(omega > 0.0 && hbar > 0.0) {
        return Err(domain(
            "mehler_kernel",
            format!("need omega, hbar > 0, got {omega}, {hbar}"),
        ));
    }
    let big_omega = omega / hbar;
    let tau = t * hbar * omega;
    let log_sinh = if tau > 20.0 {
        tau - std::f64::consts::LN_2 + (-(-2.0 * tau).exp()).ln_1p()
    } else {
        tau.sinh().ln()
    };
    let x2: f64 = x.iter().map(|a| a * a).sum();
    let y2: f64 = y.iter().map(|a| a * a).sum();
    let xy: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
    let inv_sinh = if tau > 700.0 { 0.0 } else { 1.0 / tau.sinh() };
    let exponent = -0.25 * big_omega * ((x2 + y2) / tau.tanh() - 2.0 * xy * inv_sinh);
    let log_k = 1.5 * (0.5 * big_omega).ln() - 1.5 * ((2.0 * PI).ln() + log_sinh) + exponent;
    if log_k > 709.0 {
        return Err(Error::Divergence {
            function: "mehler_kernel",
            detail: format!("kernel overflows at t = {t}"),
        });
    }
    Ok(log_k.exp())
}

/// Closed-form trace `(2 sinh(tħω/2))^{−3}` of `e^{−t h}`.
pub fn mehler_trace(t: f64, omega: f64, hbar: f64) -> f64 {
    let half = 0.5 * t * hbar * omega;
    if half > 20.0 {
        (-3.0 * half).exp()
    } else {
        (2.0 * half.sinh()).powi(-3)
    }
}
