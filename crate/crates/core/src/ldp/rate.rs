//! Rate functions of the normalized distance, obtained from `Λ*` by the
//! contraction principle.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::extended::Extended;
use crate::optimize::{minimize, minimize_below};
use crate::sampler::DomainKind;
use crate::specfun::PIndex;

use super::conjugate::Conjugator;
use super::cube::cube_rate_point;

/// Tolerance of the inner one-dimensional searches, in the log variable.
pub const INNER_TOLERANCE: f64 = 1e-7;
const INNER_STEP: f64 = 0.25;

/// A rate value with diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatePoint {
    pub z: f64,
    pub rate: Extended,
    /// Boundary: the minimizing `y`. Ball: the minimizing radial factor
    /// `z₁`. Cube: the maximizing dual `t`. `None` when the rate is `+∞`.
    pub inner_argmin: Option<f64>,
    pub converged: bool,
}

impl RatePoint {
    pub(crate) fn infinite(z: f64, converged: bool) -> Self {
        RatePoint {
            z,
            rate: Extended::PosInfinity,
            inner_argmin: None,
            converged,
        }
    }
}

/// `I_U(z) = −ln z` on `(0, 1]`, the rate of `U^{1/n}`.
pub fn rate_radial(z: f64) -> Extended {
    if z > 0.0 && z <= 1.0 {
        Extended::Finite(-z.ln())
    } else {
        Extended::PosInfinity
    }
}

/// Boundary rate `inf { Λ*(x, y) : √x·y^{−1/p} = z }`, parametrized by
/// `s = ln y` with `x = z²·e^{2s/p}`.
pub fn rate_boundary(p: f64, z: f64) -> Result<Extended> {
    let mut conj = Conjugator::new(p)?;
    Ok(boundary_point(&mut conj, z, 0.0).0.rate)
}

/// Returns the point and the minimizing `s = ln y`.
fn boundary_point(conj: &mut Conjugator, z: f64, s0: f64) -> (RatePoint, f64) {
    if z.is_nan() {
        return (RatePoint::infinite(z, false), s0);
    }
    if z <= 0.0 {
        // x = 0 lies outside the interior of the support.
        return (RatePoint::infinite(z, true), s0);
    }
    let p = conj.p();
    let z2 = z * z;
    let mut phi = |s: f64| conj.conjugate(z2 * (2.0 * s / p).exp(), s.exp()).value.to_f64();
    let m = minimize(&mut phi, s0, INNER_STEP, INNER_TOLERANCE);
    let at = conj.conjugate(z2 * (2.0 * m.x / p).exp(), m.x.exp());
    let point = RatePoint {
        z,
        rate: at.value,
        inner_argmin: at.value.is_finite().then(|| m.x.exp()),
        converged: m.converged && at.converged,
    };
    (point, m.x)
}

/// Ball rate `inf_{z₁ ∈ (0, 1]} [−ln z₁ + I_W(z/z₁)]`, searched over
/// `ln z₁ ≤ 0`.
pub fn rate_ball(p: f64, z: f64) -> Result<Extended> {
    let mut conj = Conjugator::new(p)?;
    Ok(ball_point(&mut conj, z).rate)
}

fn ball_point(conj: &mut Conjugator, z: f64) -> RatePoint {
    if z.is_nan() {
        return RatePoint::infinite(z, false);
    }
    if z <= 0.0 {
        return RatePoint::infinite(z, true);
    }
    let mut s_inner = 0.0;
    let mut objective = |u: f64| {
        let (point, s) = boundary_point(conj, z * (-u).exp(), s_inner);
        if point.rate.is_finite() {
            s_inner = s;
        }
        point.rate.plus(-u).to_f64()
    };
    let m = minimize_below(&mut objective, 0.0, INNER_STEP, INNER_TOLERANCE);
    let (at, _) = boundary_point(conj, z * (-m.x).exp(), s_inner);
    let rate = at.rate.plus(-m.x);
    RatePoint {
        z,
        rate,
        inner_argmin: rate.is_finite().then(|| m.x.exp()),
        converged: m.converged && at.converged,
    }
}

/// Rate function values on a uniform grid, with per-point diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateCurve {
    pub p: PIndex,
    pub domain: DomainKind,
    pub z_grid: Vec<f64>,
    pub rates: Vec<Extended>,
    pub minimizers: Vec<RateDiagnostics>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateDiagnostics {
    pub inner_argmin: Option<f64>,
    pub converged: bool,
}

impl RateCurve {
    pub fn all_converged(&self) -> bool {
        self.minimizers.iter().all(|m| m.converged)
    }
}

/// The rate function for `(p, domain)` at one point.
pub fn rate_point(p: PIndex, domain: DomainKind, z: f64) -> Result<RatePoint> {
    match (p.as_finite(), domain) {
        (Some(pf), _) if pf < 2.0 => Err(Error::Unsupported(format!("LDP requires p ≥ 2, got p = {pf}"))),
        (Some(pf), DomainKind::BallBoundary) => {
            let mut conj = Conjugator::new(pf)?;
            Ok(boundary_point(&mut conj, z, 0.0).0)
        }
        (Some(pf), DomainKind::BallInterior) => Ok(ball_point(&mut Conjugator::new(pf)?, z)),
        (None, DomainKind::BallInterior) => Ok(cube_rate_point(z)),
        (None, DomainKind::BallBoundary) => Err(Error::Unsupported(
            "no rate function is available for the boundary of the cube".into(),
        )),
    }
}

/// Evaluates the rate function on `steps` equally spaced points of
/// `[z_min, z_max]` using every available core.
pub fn rate_curve(p: PIndex, domain: DomainKind, z_min: f64, z_max: f64, steps: usize) -> Result<RateCurve> {
    rate_curve_with_workers(p, domain, z_min, z_max, steps, crate::stats::default_workers())
}

/// [`rate_curve`] on a pool of `workers` threads. Each grid point is solved
/// from scratch, so the values do not depend on `workers`.
pub fn rate_curve_with_workers(
    p: PIndex,
    domain: DomainKind,
    z_min: f64,
    z_max: f64,
    steps: usize,
    workers: usize,
) -> Result<RateCurve> {
    if !(z_min.is_finite() && z_max.is_finite() && z_min < z_max) {
        return Err(Error::domain("rate_curve", format!("need z_min < z_max, got [{z_min}, {z_max}]")));
    }
    if steps < 2 {
        return Err(Error::domain("rate_curve", format!("need at least 2 steps, got {steps}")));
    }
    if workers == 0 {
        return Err(Error::domain("rate_curve", "workers must be at least 1"));
    }
    // Reject unsupported combinations before spawning anything.
    rate_point(p, domain, f64::NAN)?;
    let h = (z_max - z_min) / (steps - 1) as f64;
    let z_grid: Vec<f64> = (0..steps)
        .map(|i| if i + 1 == steps { z_max } else { z_min + i as f64 * h })
        .collect();
    let points: Vec<RatePoint> = crate::stats::with_pool(workers, || {
        z_grid
            .par_iter()
            .map(|&z| rate_point(p, domain, z).expect("combination checked above"))
            .collect()
    });
    Ok(RateCurve {
        p,
        domain,
        rates: points.iter().map(|pt| pt.rate).collect(),
        minimizers: points
            .iter()
            .map(|pt| RateDiagnostics {
                inner_argmin: pt.inner_argmin,
                converged: pt.converged,
            })
            .collect(),
        z_grid,
    })
}
