//! One-dimensional minimization: bracket expansion plus golden-section
//! search. Objectives may return `+∞`; they are assumed unimodal on the
//! region searched.

/// Outcome of a 1-D minimization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Minimum {
    pub x: f64,
    pub value: f64,
    /// Bracket shrank below the tolerance.
    pub converged: bool,
    pub evaluations: usize,
}

const INV_PHI: f64 = 0.618_033_988_749_894_8;
const MAX_EXPANSIONS: usize = 60;

/// Golden-section search on `[a, c]`.
fn golden(f: &mut impl FnMut(f64) -> f64, mut a: f64, mut c: f64, tol: f64, evals: &mut usize) -> Minimum {
    let mut x1 = c - INV_PHI * (c - a);
    let mut x2 = a + INV_PHI * (c - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    *evals += 2;
    while (c - a).abs() > tol {
        if f1 <= f2 {
            c = x2;
            x2 = x1;
            f2 = f1;
            x1 = c - INV_PHI * (c - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (c - a);
            f2 = f(x2);
        }
        *evals += 1;
    }
    let (x, value) = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
    Minimum {
        x,
        value,
        converged: true,
        evaluations: *evals,
    }
}

/// Minimizes over the whole line, starting from `x0`.
///
/// The step is doubled away from `x0` until a three-point pattern
/// `f(a) ≥ f(b) ≤ f(c)` brackets a minimum; golden-section search then
/// shrinks the bracket to `tol`.
pub fn minimize(mut f: impl FnMut(f64) -> f64, x0: f64, step: f64, tol: f64) -> Minimum {
    let mut evals = 0;
    let mut eval = |x: f64, evals: &mut usize| {
        *evals += 1;
        f(x)
    };
    let (mut a, mut b, mut c) = (x0 - step, x0, x0 + step);
    let (mut fa, mut fb, mut fc) = (eval(a, &mut evals), eval(b, &mut evals), eval(c, &mut evals));
    let mut h = step;
    let mut expansions = 0;
    while !(fb <= fa && fb <= fc) {
        if expansions == MAX_EXPANSIONS {
            let (x, value) = [(a, fa), (b, fb), (c, fc)]
                .into_iter()
                .min_by(|l, r| l.1.total_cmp(&r.1))
                .unwrap_or((b, fb));
            return Minimum {
                x,
                value,
                converged: false,
                evaluations: evals,
            };
        }
        h *= 2.0;
        if fa < fc {
            // Downhill to the left.
            (c, fc) = (b, fb);
            (b, fb) = (a, fa);
            a = b - h;
            fa = eval(a, &mut evals);
        } else {
            (a, fa) = (b, fb);
            (b, fb) = (c, fc);
            c = b + h;
            fc = eval(c, &mut evals);
        }
        expansions += 1;
    }
    let mut inner = |x: f64| f(x);
    let mut m = golden(&mut inner, a, c, tol, &mut evals);
    if fb < m.value {
        m.x = b;
        m.value = fb;
    }
    m
}

/// Minimizes over `(−∞, upper]`.
///
/// Points `upper − step·(2^k − 1)` are probed until the objective turns
/// upward; golden-section search then runs on the last three probes. A
/// minimum at `upper` itself is detected by one probe at `upper − tol`.
pub fn minimize_below(mut f: impl FnMut(f64) -> f64, upper: f64, step: f64, tol: f64) -> Minimum {
    let mut evals = 2;
    let f_upper = f(upper);
    // Unimodality: a rise just below `upper` pins the minimum to [upper − tol, upper].
    if f(upper - tol) >= f_upper {
        return Minimum {
            x: upper,
            value: f_upper,
            converged: true,
            evaluations: evals,
        };
    }
    let mut probes = vec![(upper, f_upper)];
    let mut offset = step;
    loop {
        let x = upper - offset;
        let fx = f(x);
        evals += 1;
        probes.push((x, fx));
        let k = probes.len();
        if fx > probes[k - 2].1 || probes.len() > MAX_EXPANSIONS {
            break;
        }
        offset = 2.0 * offset + step;
    }
    let k = probes.len();
    let lo = probes[k - 1].0;
    let hi = if k >= 3 { probes[k - 3].0 } else { upper };
    let mut m = golden(&mut f, lo, hi, tol, &mut evals);
    let best = probes
        .iter()
        .copied()
        .min_by(|l, r| l.1.total_cmp(&r.1))
        .unwrap_or((upper, f_upper));
    if best.1 < m.value {
        m.x = best.0;
        m.value = best.1;
    }
    m.converged = probes.len() <= MAX_EXPANSIONS;
    m.evaluations = evals;
    m
}
