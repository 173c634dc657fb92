//! The cube `B_∞^n`: the summands are `|u − u'|²` with `u, u'` uniform on
//! `[−1, 1]`, and `|u − u'|` has density `1 − x/2` on `[0, 2]`.

use crate::extended::Extended;
use crate::quadrature::integrate;

use super::RatePoint;

const REL_TOL: f64 = 1e-13;
const MAX_PIECES: usize = 4000;
/// A conjugate maximizer beyond this is taken as a diverging sequence.
const T_UNBOUNDED: f64 = 1e8;

/// Breakpoints `0, w, 4w, 16w, …, 2` around a peak of width `w` at 0.
fn breaks(width: f64) -> Vec<f64> {
    let mut out = vec![0.0];
    let mut b = width;
    while b < 2.0 {
        out.push(b);
        b *= 4.0;
    }
    out.push(2.0);
    out
}

/// `(Λ, Λ', Λ'')` of `X = |u − u'|²`.
///
/// For `t > 0` the mass sits near `x = 2`; there the integral is rewritten
/// with `s = 2 − x`, `x² = 4 − s(4 − s)`, so that `Λ = 4t + ln ∫ e^{−t s(4−s)} s/2 ds`
/// and the moments of `w = s(4 − s)` carry the derivatives without
/// cancellation.
pub fn cube_log_mgf_derivatives(t: f64) -> [f64; 3] {
    if t.is_nan() {
        return [f64::NAN; 3];
    }
    if t <= 0.0 {
        let width = if t < -1.0 { 1.0 / (-t).sqrt() } else { 2.0 };
        let r = integrate(
            |x| {
                let x2 = x * x;
                let f = (t * x2).exp() * (1.0 - 0.5 * x);
                [f, f * x2, f * x2 * x2]
            },
            &breaks(width),
            REL_TOL,
            0.0,
            MAX_PIECES,
        );
        match r {
            Ok(r) => {
                let m1 = r.value[1] / r.value[0];
                [r.value[0].ln(), m1, r.value[2] / r.value[0] - m1 * m1]
            }
            Err(_) => [f64::NAN; 3],
        }
    } else {
        let width = if t > 1.0 { 1.0 / t } else { 2.0 };
        let r = integrate(
            |s| {
                let w = s * (4.0 - s);
                let f = (-t * w).exp() * 0.5 * s;
                [f, f * w, f * w * w]
            },
            &breaks(width),
            REL_TOL,
            0.0,
            MAX_PIECES,
        );
        match r {
            Ok(r) => {
                let m1 = r.value[1] / r.value[0];
                [4.0 * t + r.value[0].ln(), 4.0 - m1, r.value[2] / r.value[0] - m1 * m1]
            }
            Err(_) => [f64::NAN; 3],
        }
    }
}

/// `Λ(t) = ln ∫₀² e^{t x²}(1 − x/2) dx`, the log-MGF of `|u − u'|²`.
pub fn cube_log_mgf(t: f64) -> f64 {
    cube_log_mgf_derivatives(t)[0]
}

/// Rate function `Λ*(z²)` of the normalized distance in the cube.
pub fn cube_rate(z: f64) -> Extended {
    cube_rate_point(z).rate
}

/// [`cube_rate`] with the maximizing `t` as diagnostic.
pub(crate) fn cube_rate_point(z: f64) -> RatePoint {
    if z.is_nan() {
        return RatePoint::infinite(z, false);
    }
    if z < 0.0 {
        return RatePoint::infinite(z, true);
    }
    let x = z * z;
    let slope = |t: f64| cube_log_mgf_derivatives(t)[1] - x;

    // Bracket the root of Λ'(t) = x; none exists when x is outside (0, 4).
    let f0 = slope(0.0);
    if f0 == 0.0 {
        return finish(z, x, 0.0);
    }
    let dir = if f0 < 0.0 { 1.0 } else { -1.0 };
    let (mut lo, mut hi) = (0.0, dir);
    loop {
        let f = slope(hi);
        if f.is_nan() {
            return RatePoint::infinite(z, false);
        }
        if (f > 0.0) == (dir > 0.0) || f == 0.0 {
            break;
        }
        lo = hi;
        hi *= 2.0;
        if hi.abs() > T_UNBOUNDED {
            return RatePoint::infinite(z, true);
        }
    }
    if lo > hi {
        std::mem::swap(&mut lo, &mut hi);
    }

    // Safeguarded Newton on the increasing function Λ' − x.
    let mut t = 0.5 * (lo + hi);
    for _ in 0..200 {
        let [_, d1, d2] = cube_log_mgf_derivatives(t);
        let f = d1 - x;
        if f.abs() <= 1e-15 * x.max(1e-300) || hi - lo <= 1e-15 * t.abs().max(1e-12) {
            break;
        }
        if f < 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        let newton = t - f / d2;
        t = if newton > lo && newton < hi && d2 > 0.0 {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    finish(z, x, t)
}

fn finish(z: f64, x: f64, t: f64) -> RatePoint {
    let value = x * t - cube_log_mgf(t);
    RatePoint {
        z,
        rate: Extended::Finite(value),
        inner_argmin: Some(t),
        converged: value.is_finite(),
    }
}
