//! Gauss–Kronrod quadrature: an adaptive 1-D integrator for vector-valued
//! integrands and composite node sets for tensor-product rules.

use crate::error::{Error, Result};

// 15-point Kronrod extension of the 7-point Gauss rule (QUADPACK qk15).
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
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
// Gauss weights for XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// The 15 Kronrod nodes on `[−1, 1]` with Kronrod and (embedded) Gauss
/// weights; the Gauss weight is zero at the 8 Kronrod-only nodes.
pub(crate) fn kronrod15() -> [(f64, f64, f64); 15] {
    let mut out = [(0.0, 0.0, 0.0); 15];
    for k in 0..7 {
        let wg = if k % 2 == 1 { WG[k / 2] } else { 0.0 };
        out[k] = (-XGK[k], WGK[k], wg);
        out[14 - k] = (XGK[k], WGK[k], wg);
    }
    out[7] = (0.0, WGK[7], WG[3]);
    out
}

/// Nodes and weights of a composite 15-point rule.
#[derive(Debug, Clone, Default)]
pub(crate) struct CompositeNodes {
    pub x: Vec<f64>,
    /// Kronrod weights.
    pub wk: Vec<f64>,
    /// Embedded Gauss weights (zero off the Gauss nodes).
    pub wg: Vec<f64>,
}

impl CompositeNodes {
    /// `panels` equal panels covering `[lo, hi]`.
    pub fn uniform(lo: f64, hi: f64, panels: usize) -> Self {
        let rule = kronrod15();
        let mut out = CompositeNodes::default();
        let h = (hi - lo) / panels as f64;
        for k in 0..panels {
            let mid = lo + (k as f64 + 0.5) * h;
            for &(t, wk, wg) in &rule {
                out.x.push(mid + 0.5 * h * t);
                out.wk.push(0.5 * h * wk);
                out.wg.push(0.5 * h * wg);
            }
        }
        out
    }
}

/// Result of [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct Integral<const K: usize> {
    pub value: [f64; K],
    pub error: [f64; K],
    pub intervals: usize,
}

struct Piece<const K: usize> {
    lo: f64,
    hi: f64,
    value: [f64; K],
    error: [f64; K],
}

fn gk15<const K: usize>(f: &mut impl FnMut(f64) -> [f64; K], lo: f64, hi: f64) -> Piece<K> {
    let half = 0.5 * (hi - lo);
    let mid = 0.5 * (hi + lo);
    let mut kron = [0.0; K];
    let mut gauss = [0.0; K];
    for (t, wk, wg) in kronrod15() {
        let v = f(mid + half * t);
        for c in 0..K {
            kron[c] += wk * v[c];
            gauss[c] += wg * v[c];
        }
    }
    let mut value = [0.0; K];
    let mut error = [0.0; K];
    for c in 0..K {
        value[c] = half * kron[c];
        error[c] = (half * (kron[c] - gauss[c])).abs();
    }
    Piece {
        lo,
        hi,
        value,
        error,
    }
}

/// Adaptive Gauss–Kronrod integration of a vector-valued integrand.
///
/// The interval `[breaks[0], breaks.last()]` is first split at every
/// breakpoint; the piece with the largest normalized error is then bisected
/// until every component satisfies `err ≤ max(abs_tol, rel_tol·|I|)`.
pub fn integrate<const K: usize>(
    mut f: impl FnMut(f64) -> [f64; K],
    breaks: &[f64],
    rel_tol: f64,
    abs_tol: f64,
    max_pieces: usize,
) -> Result<Integral<K>> {
    assert!(breaks.len() >= 2, "need at least one interval");
    let mut pieces: Vec<Piece<K>> = breaks
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| gk15(&mut f, w[0], w[1]))
        .collect();
    loop {
        let mut value = [0.0; K];
        let mut error = [0.0; K];
        for piece in &pieces {
            for c in 0..K {
                value[c] += piece.value[c];
                error[c] += piece.error[c];
            }
        }
        let budget: [f64; K] = std::array::from_fn(|c| abs_tol.max(rel_tol * value[c].abs()));
        if (0..K).all(|c| error[c] <= budget[c]) {
            return Ok(Integral {
                value,
                error,
                intervals: pieces.len(),
            });
        }
        if pieces.len() >= max_pieces {
            return Err(Error::convergence(
                "integrate",
                format!("error {error:?} above tolerance after {max_pieces} subintervals"),
            ));
        }
        let score = |p: &Piece<K>| -> f64 {
            (0..K)
                .map(|c| p.error[c] / budget[c].max(f64::MIN_POSITIVE))
                .sum()
        };
        let worst = pieces
            .iter()
            .enumerate()
            .max_by(|a, b| score(a.1).total_cmp(&score(b.1)))
            .map(|(i, _)| i)
            .unwrap_or(0);
        let piece = pieces.swap_remove(worst);
        let mid = 0.5 * (piece.lo + piece.hi);
        if !(mid > piece.lo && mid < piece.hi) {
            return Err(Error::convergence("integrate", "interval collapsed below f64 resolution"));
        }
        pieces.push(gk15(&mut f, piece.lo, mid));
        pieces.push(gk15(&mut f, mid, piece.hi));
    }
}
