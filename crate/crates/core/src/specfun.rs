//! Special functions and the moment constants of `p`-generalized Gaussians.
//!
//! Everything here is a pure function of its arguments. The gamma-function
//! routines work in log-space so that ratios such as `Γ(n/2)²/Γ(n−1/2)` stay
//! representable for dimensions in the millions.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// ½·ln(2π)
const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// The norm index `p ∈ [1, ∞]`.
///
/// Internally `+∞` is the only non-finite value allowed; [`PIndex::new`]
/// rejects NaN and anything below 1.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct PIndex(f64);

impl PIndex {
    pub const INFINITY: PIndex = PIndex(f64::INFINITY);

    pub fn new(p: f64) -> Result<Self> {
        if p.is_nan() || p < 1.0 {
            return Err(Error::domain("PIndex", format!("p must lie in [1, ∞], got {p}")));
        }
        Ok(PIndex(p))
    }

    /// Shorthand for a finite index known to be valid at the call site.
    ///
    /// Panics if `p` is not a finite real `≥ 1`.
    pub fn finite(p: f64) -> Self {
        assert!(p.is_finite() && p >= 1.0, "invalid finite p: {p}");
        PIndex(p)
    }

    pub fn is_infinite(self) -> bool {
        self.0.is_infinite()
    }

    /// `Some(p)` for a finite index.
    pub fn as_finite(self) -> Option<f64> {
        if self.is_infinite() {
            None
        } else {
            Some(self.0)
        }
    }

    /// `1/p`, taken to be 0 at infinity.
    pub fn recip(self) -> f64 {
        if self.is_infinite() {
            0.0
        } else {
            1.0 / self.0
        }
    }

    /// Raw value, `f64::INFINITY` for the cube.
    pub fn value(self) -> f64 {
        self.0
    }
}

impl fmt::Display for PIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_infinite() {
            f.write_str("inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl FromStr for PIndex {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "+inf" | "∞" => Ok(PIndex::INFINITY),
            other => {
                let p: f64 = other
                    .parse()
                    .map_err(|_| Error::domain("PIndex", format!("cannot parse {s:?} as p")))?;
                PIndex::new(p)
            }
        }
    }
}

impl Serialize for PIndex {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self.as_finite() {
            Some(p) => serializer.serialize_f64(p),
            None => serializer.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for PIndex {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        let parsed = match Raw::deserialize(deserializer)? {
            Raw::Num(p) => PIndex::new(p),
            Raw::Text(s) => s.parse(),
        };
        parsed.map_err(serde::de::Error::custom)
    }
}

// Lanczos approximation, g = 7, nine terms.
const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Tail of the Stirling series, `ln Γ(x) − [(x−½)ln x − x + ½ln 2π]`.
///
/// Accurate to roughly 1e-17 for `x ≥ 10`.
pub(crate) fn stirling_tail(x: f64) -> f64 {
    const C: [f64; 7] = [
        1.0 / 12.0,
        -1.0 / 360.0,
        1.0 / 1260.0,
        -1.0 / 1680.0,
        1.0 / 1188.0,
        -691.0 / 360_360.0,
        1.0 / 156.0,
    ];
    let r = 1.0 / x;
    let r2 = r * r;
    let mut acc = 0.0;
    for c in C.iter().rev() {
        acc = acc * r2 + c;
    }
    acc * r
}

/// `ln Γ(x)` for `x > 0`.
pub fn log_gamma(x: f64) -> Result<f64> {
    if x.is_nan() || x <= 0.0 {
        return Err(Error::domain("log_gamma", format!("x must be positive, got {x}")));
    }
    Ok(log_gamma_unchecked(x))
}

pub(crate) fn log_gamma_unchecked(x: f64) -> f64 {
    if x.is_infinite() {
        return f64::INFINITY;
    }
    if x >= 10.0 {
        return (x - 0.5) * x.ln() - x + HALF_LN_2PI + stirling_tail(x);
    }
    if x < 0.5 {
        // Γ(x) = Γ(x+1)/x keeps the Lanczos sum in its accurate range.
        return log_gamma_unchecked(x + 1.0) - x.ln();
    }
    let z = x - 1.0;
    let mut sum = LANCZOS[0];
    for (k, c) in LANCZOS.iter().enumerate().skip(1) {
        sum += c / (z + k as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    HALF_LN_2PI + (z + 0.5) * t.ln() - t + sum.ln()
}

/// `ln Γ(x + a) − ln Γ(x)`, accurate even when both terms are huge.
pub fn log_gamma_diff(x: f64, a: f64) -> f64 {
    if x >= 10.0 && x + a >= 10.0 {
        // Stirling form with the large logarithms cancelled analytically.
        (x + a - 0.5) * (a / x).ln_1p() + a * x.ln() - a + stirling_tail(x + a)
            - stirling_tail(x)
    } else {
        log_gamma_unchecked(x + a) - log_gamma_unchecked(x)
    }
}

/// `M_p(α) = Γ((α+1)/p) / Γ(1/p)` for finite `p`.
pub fn mp_ratio(p: PIndex, alpha: f64) -> Result<f64> {
    let Some(p) = p.as_finite() else {
        return Err(Error::domain("mp_ratio", "p = ∞ has no gamma ratio; use abs_moment"));
    };
    check_alpha("mp_ratio", alpha)?;
    Ok((log_gamma_unchecked((alpha + 1.0) / p) - log_gamma_unchecked(1.0 / p)).exp())
}

/// `E|g|^α` for a `p`-generalized Gaussian `g`.
///
/// For finite `p` this is `p^{α/p}·M_p(α)`; at `p = ∞` the variable is
/// uniform on `[−1, 1]` and the moment is `1/(α+1)`.
pub fn abs_moment(p: PIndex, alpha: f64) -> Result<f64> {
    check_alpha("abs_moment", alpha)?;
    if alpha == 0.0 {
        return Ok(1.0);
    }
    match p.as_finite() {
        None => Ok(1.0 / (alpha + 1.0)),
        Some(pf) => {
            let log_m = log_gamma_unchecked((alpha + 1.0) / pf) - log_gamma_unchecked(1.0 / pf);
            Ok((alpha / pf * pf.ln() + log_m).exp())
        }
    }
}

fn check_alpha(op: &'static str, alpha: f64) -> Result<()> {
    if alpha.is_nan() || alpha < 0.0 || alpha.is_infinite() {
        return Err(Error::domain(op, format!("alpha must be finite and ≥ 0, got {alpha}")));
    }
    Ok(())
}

/// Normalising constant `C_p = 2 p^{1/p} Γ(1 + 1/p)` of the density
/// `e^{−|x|^p/p}`; 2 for the uniform law on `[−1, 1]`.
pub fn norm_const(p: PIndex) -> f64 {
    match p.as_finite() {
        None => 2.0,
        Some(p) => 2.0 * (p.ln() / p + log_gamma_unchecked(1.0 + 1.0 / p)).exp(),
    }
}

/// `ln C_p`.
pub(crate) fn log_norm_const(p: f64) -> f64 {
    std::f64::consts::LN_2 + p.ln() / p + log_gamma_unchecked(1.0 + 1.0 / p)
}

/// `ln B(a, b)`.
pub fn log_beta(a: f64, b: f64) -> f64 {
    if a >= 10.0 && b >= 10.0 {
        let s = a + b;
        (a - 0.5) * (a / s).ln() + (b - 0.5) * (b / s).ln() - 0.5 * s.ln()
            + HALF_LN_2PI
            + stirling_tail(a)
            + stirling_tail(b)
            - stirling_tail(s)
    } else {
        log_gamma_unchecked(a) + log_gamma_unchecked(b) - log_gamma_unchecked(a + b)
    }
}

/// Regularized incomplete beta function `I_x(a, b)`.
///
/// Continued fraction (modified Lentz) on whichever tail converges fastest.
pub fn reg_inc_beta(a: f64, b: f64, x: f64) -> Result<f64> {
    if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
        return Err(Error::domain("reg_inc_beta", format!("need a, b > 0, got a={a}, b={b}")));
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::domain("reg_inc_beta", format!("x must lie in [0, 1], got {x}")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x == 1.0 {
        return Ok(1.0);
    }
    if x > (a + 1.0) / (a + b + 2.0) {
        Ok(1.0 - beta_tail(b, a, 1.0 - x)?)
    } else {
        beta_tail(a, b, x)
    }
}

/// `I_x(a, b)` evaluated directly by continued fraction; only accurate for
/// `x ≤ (a+1)/(a+b+2)`.
fn beta_tail(a: f64, b: f64, x: f64) -> Result<f64> {
    let log_front = if a >= 10.0 && b >= 10.0 {
        // a·ln(x/x₀) + b·ln((1−x)/(1−x₀)) with x₀ = a/(a+b), plus the
        // Stirling remainder of 1/B(a, b).
        let s = a + b;
        let d = x * s - a;
        a * (d / a).ln_1p() + b * (-d / b).ln_1p() + 0.5 * (a * b / s).ln()
            - HALF_LN_2PI
            - stirling_tail(a)
            - stirling_tail(b)
            + stirling_tail(s)
    } else {
        a * x.ln() + b * (-x).ln_1p() - log_beta(a, b)
    };
    Ok(log_front.exp() * beta_cf(a, b, x)? / a)
}

fn beta_cf(a: f64, b: f64, x: f64) -> Result<f64> {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    let max_iter = 200 + (10.0 * a.max(b).sqrt()) as usize * 4;

    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=max_iter {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            return Ok(h);
        }
    }
    Err(Error::convergence(
        "reg_inc_beta",
        format!("continued fraction stalled for a={a}, b={b}, x={x}"),
    ))
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}
