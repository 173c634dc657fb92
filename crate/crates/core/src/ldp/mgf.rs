//! The bivariate log-MGF `Λ(t₁, t₂) = ln E exp(t₁|g − g'|² + t₂|g'|^p)` of two
//! independent `p`-generalized Gaussians.
//!
//! For `p > 2` it is evaluated on a tensor Gauss–Kronrod grid over
//! `[−R, R] × [0, R]` (the integrand is even under `(x, y) ↦ (−x, −y)`),
//! with `R` and the panel width adapted to the integrand. At `p = 2` the
//! Gaussian closed form `−½ ln D`, `D = 1 − 4t₁ − 2t₂ + 4t₁t₂`, is used.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::quadrature::CompositeNodes;
use crate::specfun::log_norm_const;

/// Target relative error of a quadrature evaluation.
pub const MGF_TOLERANCE: f64 = 1e-9;

/// Refinement stops once the estimate is this far below the target.
const REFINE_TOLERANCE: f64 = 1e-10;
/// The integrand must have dropped by `e^{-40}` on the outer panels.
const TAIL_DROP: f64 = 40.0;
const MIN_WIDTH: f64 = 1.0 / 512.0;
const MAX_NODES: usize = 6_000_000;
const MAX_EXPANSIONS: usize = 40;

/// `Λ` at a dual point, with gradient and Hessian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MgfEvaluation {
    pub t1: f64,
    pub t2: f64,
    pub value: f64,
    /// `(E_t|g − g'|², E_t|g'|^p)` under the tilted law.
    pub grad: [f64; 2],
    /// Covariance of `(|g − g'|², |g'|^p)` under the tilted law.
    pub hessian: [[f64; 2]; 2],
    /// Estimated relative error; 0 for the closed form.
    pub quad_error: f64,
    pub reliable: bool,
}

pub(crate) fn check_ldp_p(op: &str, p: f64) -> Result<()> {
    if p >= 2.0 && p.is_finite() {
        Ok(())
    } else {
        Err(Error::Unsupported(format!("{op}: LDP requires p ≥ 2, got p = {p}")))
    }
}

fn gaussian_det(t1: f64, t2: f64) -> f64 {
    1.0 - 4.0 * t1 - 2.0 * t2 + 4.0 * t1 * t2
}

/// Whether `Λ(t₁, t₂)` is finite at an interior point of its domain.
///
/// For `p > 2` the `|x|^p` term dominates any quadratic, so only
/// `t₂ < 1/p` matters. At `p = 2` the exponent is a quadratic form that
/// must be negative definite.
pub fn mgf_domain_contains(p: f64, t1: f64, t2: f64) -> Result<bool> {
    check_ldp_p("mgf_domain_contains", p)?;
    if !(t1.is_finite() && t2.is_finite()) {
        return Ok(false);
    }
    Ok(if p == 2.0 {
        1.0 - 2.0 * t1 > 0.0 && gaussian_det(t1, t2) > 0.0
    } else {
        t2 < 1.0 / p
    })
}

/// The closure points where `Λ` is still finite. For `p > 2` this adds the
/// edge `t₂ = 1/p, t₁ < 0`, where the Gaussian factor `e^{t₁(x−y)²}` alone
/// keeps `y` integrable.
pub(crate) fn finite_at(p: f64, t1: f64, t2: f64) -> bool {
    if !(t1.is_finite() && t2.is_finite()) {
        return false;
    }
    if p == 2.0 {
        1.0 - 2.0 * t1 > 0.0 && gaussian_det(t1, t2) > 0.0
    } else {
        t2 < 1.0 / p || (t2 == 1.0 / p && t1 < 0.0)
    }
}

/// Closed-form `Λ` for `p = 2`.
pub fn gaussian_log_mgf(t1: f64, t2: f64) -> Result<MgfEvaluation> {
    if !finite_at(2.0, t1, t2) {
        return Err(Error::domain("gaussian_log_mgf", format!("({t1}, {t2}) outside the domain")));
    }
    let d = gaussian_det(t1, t2);
    let dd = [-4.0 + 4.0 * t2, -2.0 + 4.0 * t1];
    let outer = |i: usize, j: usize| dd[i] * dd[j] / (2.0 * d * d);
    Ok(MgfEvaluation {
        t1,
        t2,
        value: -0.5 * d.ln(),
        grad: [-dd[0] / (2.0 * d), -dd[1] / (2.0 * d)],
        hessian: [
            [outer(0, 0), outer(0, 1) - 2.0 / d],
            [outer(1, 0) - 2.0 / d, outer(1, 1)],
        ],
        quad_error: 0.0,
        reliable: true,
    })
}

/// `Λ(t₁, t₂)`: the closed form at `p = 2`, quadrature otherwise.
pub fn log_mgf(p: f64, t1: f64, t2: f64) -> Result<MgfEvaluation> {
    check_ldp_p("log_mgf", p)?;
    if p == 2.0 {
        return gaussian_log_mgf(t1, t2);
    }
    log_mgf_quadrature(p, t1, t2)
}

/// `Λ(t₁, t₂)` by quadrature, for any `p ≥ 2` (including `p = 2`, where it
/// cross-checks the closed form).
pub fn log_mgf_quadrature(p: f64, t1: f64, t2: f64) -> Result<MgfEvaluation> {
    check_ldp_p("log_mgf", p)?;
    if !mgf_domain_contains(p, t1, t2)? {
        return Err(Error::domain("log_mgf", format!("({t1}, {t2}) outside the domain for p = {p}")));
    }
    let ev = MgfWorkspace::new(p).evaluate(t1, t2);
    if ev.reliable {
        Ok(ev)
    } else {
        Err(Error::convergence(
            "log_mgf",
            format!("quadrature error {:.3e} at ({t1}, {t2})", ev.quad_error),
        ))
    }
}

struct Axis {
    x: Vec<f64>,
    wk: Vec<f64>,
    wg: Vec<f64>,
    /// `|x|^p/p` on the x axis, `|y|^p` on the y axis.
    pow: Vec<f64>,
}

impl Axis {
    fn new(nodes: CompositeNodes, p: f64, divide: bool) -> Self {
        let pow = nodes
            .x
            .iter()
            .map(|v| {
                let a = v.abs().powf(p);
                if divide {
                    a / p
                } else {
                    a
                }
            })
            .collect();
        Axis {
            x: nodes.x,
            wk: nodes.wk,
            wg: nodes.wg,
            pow,
        }
    }
}

/// Quadrature grid reused across evaluations at nearby dual points. The
/// radius and panel width only ever grow finer.
pub struct MgfWorkspace {
    p: f64,
    radius: f64,
    width: f64,
    grid: Option<(Axis, Axis)>,
}

impl MgfWorkspace {
    pub fn new(p: f64) -> Self {
        MgfWorkspace {
            p,
            radius: 1.1 * (45.0 * p).powf(1.0 / p),
            width: 0.5,
            grid: None,
        }
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    fn build(&mut self) {
        let panels = (self.radius / self.width).ceil().max(1.0) as usize;
        let left = CompositeNodes::uniform(-self.radius, 0.0, panels);
        let right = CompositeNodes::uniform(0.0, self.radius, panels);
        let mut xs = left.clone();
        xs.x.extend(right.x.iter());
        xs.wk.extend(right.wk.iter());
        xs.wg.extend(right.wg.iter());
        self.grid = Some((Axis::new(xs, self.p, true), Axis::new(right, self.p, false)));
    }

    fn node_count(&self) -> usize {
        let panels = (self.radius / self.width).ceil().max(1.0) as usize;
        2 * 15 * 15 * panels * panels
    }

    /// Evaluates `Λ` at a point where it is finite (see [`finite_at`]).
    /// Callers must check that first: outside, the adaptation gives up and
    /// the result is flagged unreliable.
    pub fn evaluate(&mut self, t1: f64, t2: f64) -> MgfEvaluation {
        let mut expansions = 0;
        loop {
            if self.grid.is_none() {
                self.build();
            }
            let (xs, ys) = self.grid.as_ref().expect("grid built above");
            let pass = tensor_pass(xs, ys, self.p, t1, t2);
            match pass {
                Pass::Truncated if expansions < MAX_EXPANSIONS && self.node_count() <= MAX_NODES => {
                    expansions += 1;
                    self.radius *= 1.5;
                    self.grid = None;
                }
                Pass::Truncated => return unreliable(t1, t2),
                Pass::Done(ev) => {
                    let refine = ev.quad_error > REFINE_TOLERANCE
                        && self.width > MIN_WIDTH
                        && 4 * self.node_count() <= MAX_NODES;
                    if !refine {
                        return ev;
                    }
                    self.width *= 0.5;
                    self.grid = None;
                }
            }
        }
    }
}

fn unreliable(t1: f64, t2: f64) -> MgfEvaluation {
    MgfEvaluation {
        t1,
        t2,
        value: f64::NAN,
        grad: [f64::NAN; 2],
        hessian: [[f64::NAN; 2]; 2],
        quad_error: f64::INFINITY,
        reliable: false,
    }
}

enum Pass {
    Truncated,
    Done(MgfEvaluation),
}

fn tensor_pass(xs: &Axis, ys: &Axis, p: f64, t1: f64, t2: f64) -> Pass {
    let c = t2 - 1.0 / p;
    let exponent = |i: usize, j: usize| {
        let d = xs.x[i] - ys.x[j];
        t1 * d * d + c * ys.pow[j] - xs.pow[i]
    };
    let (nx, ny) = (xs.x.len(), ys.x.len());
    let mut top = f64::NEG_INFINITY;
    let mut rim = f64::NEG_INFINITY;
    for j in 0..ny {
        let y_rim = j + 15 >= ny;
        for i in 0..nx {
            let e = exponent(i, j);
            top = top.max(e);
            if y_rim || i < 15 || i + 15 >= nx {
                rim = rim.max(e);
            }
        }
    }
    if !top.is_finite() || rim > top - TAIL_DROP {
        return Pass::Truncated;
    }

    // Kronrod sums of 1, d², a, d⁴, d²a, a² and Gauss sums of 1, d², a.
    let mut k = [0.0; 6];
    let mut g = [0.0; 3];
    for j in 0..ny {
        let a = ys.pow[j];
        let (mut s0, mut s1, mut s2, mut g0, mut g1) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for i in 0..nx {
            let d = xs.x[i] - ys.x[j];
            let d2 = d * d;
            let f = (t1 * d2 + c * a - xs.pow[i] - top).exp();
            let fk = xs.wk[i] * f;
            s0 += fk;
            s1 += fk * d2;
            s2 += fk * d2 * d2;
            let fg = xs.wg[i] * f;
            g0 += fg;
            g1 += fg * d2;
        }
        let wk = ys.wk[j];
        k[0] += wk * s0;
        k[1] += wk * s1;
        k[2] += wk * a * s0;
        k[3] += wk * s2;
        k[4] += wk * a * s1;
        k[5] += wk * a * a * s0;
        let wg = ys.wg[j];
        g[0] += wg * g0;
        g[1] += wg * g1;
        g[2] += wg * a * g0;
    }
    let quad_error = (0..3)
        .map(|c| {
            let rel = ((k[c] - g[c]) / k[c]).abs();
            rel.min((200.0 * rel).powf(1.5))
        })
        .fold(0.0_f64, f64::max);
    let i0 = k[0];
    let m = [k[1] / i0, k[2] / i0];
    let cov = |second: f64, a: f64, b: f64| second / i0 - a * b;
    let ev = MgfEvaluation {
        t1,
        t2,
        value: (2.0 * i0).ln() + top - 2.0 * log_norm_const(p),
        grad: m,
        hessian: [
            [cov(k[3], m[0], m[0]), cov(k[4], m[0], m[1])],
            [cov(k[4], m[0], m[1]), cov(k[5], m[1], m[1])],
        ],
        quad_error,
        reliable: quad_error.is_finite() && quad_error <= MGF_TOLERANCE,
    };
    Pass::Done(ev)
}
