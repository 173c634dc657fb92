//! Legendre–Fenchel transform `Λ*(x, y) = sup_t [x·t₁ + y·t₂ − Λ(t)]`.
//!
//! The concave objective is maximized by damped Newton steps with Armijo
//! backtracking. For `p > 2`, `Λ` stays finite on the edge `t₂ = 1/p`
//! (when `t₁ < 0`) without its gradient blowing up, so the supremum can sit
//! on that edge; the edge is then held active and Newton continues in `t₁`
//! alone.

use serde::Serialize;

use crate::error::Result;
use crate::extended::Extended;

use super::mgf::{check_ldp_p, finite_at, gaussian_log_mgf, MgfEvaluation, MgfWorkspace};

/// Objective values above this are reported as `+∞`.
pub const UNBOUNDED_THRESHOLD: f64 = 1e4;
const MAX_ITERATIONS: usize = 200;
const ARMIJO: f64 = 1e-4;

/// Outcome of one conjugate evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Conjugate {
    pub value: Extended,
    /// The maximizing dual point (last iterate when unbounded).
    pub t: [f64; 2],
    pub converged: bool,
    /// The maximizer lies on the edge `t₂ = 1/p`.
    pub on_boundary: bool,
    pub iterations: usize,
}

/// Evaluates `Λ*` repeatedly, warm-starting each solve from the previous
/// maximizer and reusing one quadrature workspace.
pub struct Conjugator {
    p: f64,
    workspace: Option<MgfWorkspace>,
    warm: [f64; 2],
}

impl Conjugator {
    /// Uses the closed-form `Λ` at `p = 2`.
    pub fn new(p: f64) -> Result<Self> {
        check_ldp_p("legendre2", p)?;
        Ok(Conjugator {
            p,
            workspace: (p != 2.0).then(|| MgfWorkspace::new(p)),
            warm: [0.0; 2],
        })
    }

    /// Forces quadrature even at `p = 2`.
    pub fn with_quadrature(p: f64) -> Result<Self> {
        check_ldp_p("legendre2", p)?;
        Ok(Conjugator {
            p,
            workspace: Some(MgfWorkspace::new(p)),
            warm: [0.0; 2],
        })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    fn edge(&self) -> f64 {
        if self.p == 2.0 {
            f64::INFINITY
        } else {
            1.0 / self.p
        }
    }

    fn eval(&mut self, t: [f64; 2]) -> Option<MgfEvaluation> {
        if !finite_at(self.p, t[0], t[1]) {
            return None;
        }
        let ev = match self.workspace.as_mut() {
            Some(ws) => ws.evaluate(t[0], t[1]),
            None => gaussian_log_mgf(t[0], t[1]).ok()?,
        };
        ev.value.is_finite().then_some(ev)
    }

    /// `Λ*(x, y)`; `+∞` off the open quadrant, which is the interior of the
    /// support of `(|g − g'|², |g'|^p)`.
    pub fn conjugate(&mut self, x: f64, y: f64) -> Conjugate {
        if !(x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite()) {
            return Conjugate {
                value: Extended::PosInfinity,
                t: [f64::NAN; 2],
                converged: !(x.is_nan() || y.is_nan()),
                on_boundary: false,
                iterations: 0,
            };
        }
        let edge = self.edge();
        let start = self.warm;
        let (mut t, mut ev) = match self.eval(start) {
            Some(ev) => (start, ev),
            None => {
                let origin = [0.0; 2];
                (origin, self.eval(origin).expect("Λ is finite at the origin"))
            }
        };
        let objective = |t: [f64; 2], ev: &MgfEvaluation| x * t[0] + y * t[1] - ev.value;
        let mut f = objective(t, &ev);
        let mut reliable = ev.reliable;
        let mut converged = false;
        let mut iterations = 0;
        while iterations < MAX_ITERATIONS {
            iterations += 1;
            let r = [x - ev.grad[0], y - ev.grad[1]];
            let h = ev.hessian;
            let on_edge = t[1] >= edge;
            let mut d = newton_direction(h, r);
            if on_edge && d[1] > 0.0 {
                // The edge is active: optimize t₁ alone.
                d = [r[0] / h[0][0].max(f64::MIN_POSITIVE), 0.0];
            }
            let decrement = r[0] * d[0] + r[1] * d[1];
            let scale = 1.0 + x.abs() + y.abs();
            if decrement <= 1e-14 || (r[0].abs().max(if on_edge { 0.0 } else { r[1].abs() }) <= 1e-12 * scale) {
                converged = true;
                break;
            }
            let mut alpha = 1.0;
            let mut accepted = None;
            for _ in 0..60 {
                let mut trial = [t[0] + alpha * d[0], t[1] + alpha * d[1]];
                if trial[1] > edge {
                    trial[1] = edge;
                }
                if let Some(ev_trial) = self.eval(trial) {
                    let f_trial = objective(trial, &ev_trial);
                    let gain = r[0] * (trial[0] - t[0]) + r[1] * (trial[1] - t[1]);
                    if f_trial >= f + ARMIJO * gain.max(0.0) && f_trial.is_finite() {
                        accepted = Some((trial, ev_trial, f_trial));
                        break;
                    }
                }
                alpha *= 0.5;
            }
            let Some((trial, ev_trial, f_trial)) = accepted else {
                // No ascent left at f64 resolution: stationary up to noise.
                converged = decrement <= 1e-9;
                break;
            };
            t = trial;
            ev = ev_trial;
            f = f_trial;
            reliable &= ev.reliable;
            if f > UNBOUNDED_THRESHOLD || t[0].abs().max(t[1].abs()) > 1e8 {
                return Conjugate {
                    value: Extended::PosInfinity,
                    t,
                    converged: true,
                    on_boundary: t[1] >= edge,
                    iterations,
                };
            }
        }
        if t[0].is_finite() && t[1].is_finite() {
            self.warm = t;
        }
        Conjugate {
            value: Extended::Finite(f),
            t,
            converged: converged && reliable,
            on_boundary: t[1] >= edge,
            iterations,
        }
    }
}

/// Solves `H d = r`, falling back to steepest ascent when `H` is not
/// numerically positive definite.
fn newton_direction(h: [[f64; 2]; 2], r: [f64; 2]) -> [f64; 2] {
    let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
    if h[0][0] > 0.0 && det > 1e-14 * h[0][0] * h[1][1] {
        [(h[1][1] * r[0] - h[0][1] * r[1]) / det, (h[0][0] * r[1] - h[1][0] * r[0]) / det]
    } else {
        let s = 1.0 / (h[0][0].abs() + h[1][1].abs()).max(1.0);
        [s * r[0], s * r[1]]
    }
}

/// `Λ*(x, y)` for the summand pair `(|g − g'|², |g'|^p)`.
pub fn legendre2(p: f64, x: f64, y: f64) -> Result<Extended> {
    Ok(Conjugator::new(p)?.conjugate(x, y).value)
}
