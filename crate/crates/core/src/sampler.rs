//! Exact, reproducible samplers for `l_p^n` balls and their boundaries.
//!
//! Points are built from the Schechtman–Zinn representation: if `G` has
//! i.i.d. coordinates with density `∝ e^{−|x|^p/p}` then `G/‖G‖_p` follows
//! the cone measure on `∂B_p^n`, and `U^{1/n}·G/‖G‖_p` is uniform in `B_p^n`.
//! A `p`-generalized Gaussian is drawn as `±(p·Γ)^{1/p}` with
//! `Γ ~ Gamma(1/p, 1)`.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::specfun::PIndex;

/// A seeded random stream; `(seed, substream)` identifies the sequence.
///
/// Backed by the ChaCha8 block function, which is counter based: distinct
/// substream ids select disjoint keystreams under the same key.
#[derive(Clone, Debug)]
pub struct RandomStream {
    rng: ChaCha8Rng,
    seed: u64,
    substream: u64,
    flip_signs: bool,
}

impl RandomStream {
    pub fn new(seed: u64, substream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(substream);
        RandomStream {
            rng,
            seed,
            substream,
            flip_signs: false,
        }
    }

    /// Same sequence, but every random sign comes out negated.
    pub fn with_flipped_signs(mut self) -> Self {
        self.flip_signs = !self.flip_signs;
        self
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn substream(&self) -> u64 {
        self.substream
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform on the open interval `(0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// A fair random sign, `±1.0`.
    pub fn sign(&mut self) -> f64 {
        let negative = (self.rng.next_u64() >> 63 == 1) != self.flip_signs;
        if negative {
            -1.0
        } else {
            1.0
        }
    }

    /// Uniform on `[−1, 1]`, built as a sign times a uniform magnitude.
    pub fn symmetric_uniform(&mut self) -> f64 {
        let magnitude = self.uniform();
        self.sign() * magnitude
    }

    /// Uniform index in `0..n`.
    pub fn index(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }
}

/// Which set the random points are drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DomainKind {
    /// Uniform in `B_p^n`.
    #[serde(rename = "interior")]
    BallInterior,
    /// Cone measure on `∂B_p^n`; face-uniform for the cube.
    #[serde(rename = "boundary")]
    BallBoundary,
}

impl fmt::Display for DomainKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DomainKind::BallInterior => "interior",
            DomainKind::BallBoundary => "boundary",
        })
    }
}

impl FromStr for DomainKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "interior" | "ball" | "inside" => Ok(DomainKind::BallInterior),
            "boundary" | "sphere" | "surface" => Ok(DomainKind::BallBoundary),
            _ => Err(Error::domain("DomainKind", format!("unknown domain {s:?}"))),
        }
    }
}

/// A point of `B_p^n` or `∂B_p^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSample {
    pub coords: Vec<f64>,
    pub p: PIndex,
    pub domain: DomainKind,
}

impl PointSample {
    pub fn norm(&self) -> f64 {
        lp_norm(&self.coords, self.p)
    }
}

/// `‖x‖_p`, scaled by the largest entry so large `p` does not overflow.
pub fn lp_norm(x: &[f64], p: PIndex) -> f64 {
    let max = x.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    match p.as_finite() {
        None => max,
        Some(_) if max == 0.0 => 0.0,
        Some(p) => max * x.iter().map(|v| (v.abs() / max).powf(p)).sum::<f64>().powf(1.0 / p),
    }
}

/// Natural log of one Gamma(shape, 1) draw.
///
/// Marsaglia–Tsang squeeze for `shape ≥ 1`; smaller shapes are boosted with
/// `G_a = G_{a+1}·U^{1/a}`, kept in log space since `U^{1/a}` underflows for
/// tiny `a`.
pub(crate) fn sample_log_gamma(stream: &mut RandomStream, shape: f64) -> f64 {
    if shape == 1.0 {
        return (-stream.uniform().ln()).ln();
    }
    if shape < 1.0 {
        let boosted = sample_log_gamma(stream, shape + 1.0);
        return boosted + stream.uniform().ln() / shape;
    }
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let x = stream.standard_normal();
        let v = 1.0 + c * x;
        if v <= 0.0 {
            continue;
        }
        let v = v * v * v;
        let u = stream.uniform();
        let x2 = x * x;
        if u < 1.0 - 0.0331 * x2 * x2 || u.ln() < 0.5 * x2 + d * (1.0 - v + v.ln()) {
            return d.ln() + v.ln();
        }
    }
}

/// One exact draw from Gamma(shape, scale 1).
pub fn sample_gamma(stream: &mut RandomStream, shape: f64) -> f64 {
    assert!(shape > 0.0 && shape.is_finite(), "gamma shape must be positive, got {shape}");
    sample_log_gamma(stream, shape).exp()
}

/// Draws `(g, ln|g|^p)` for finite `p`; the power comes straight from the
/// gamma variate, so no `powf` round trip is needed.
fn pgauss_with_log_power(stream: &mut RandomStream, p: f64) -> (f64, f64) {
    let log_pow = p.ln() + sample_log_gamma(stream, 1.0 / p);
    let magnitude = (log_pow / p).exp();
    (stream.sign() * magnitude, log_pow)
}

/// One draw with density `C_p^{-1} e^{−|x|^p/p}`; uniform on `[−1, 1]` at
/// `p = ∞`.
pub fn sample_pgauss(stream: &mut RandomStream, p: PIndex) -> f64 {
    match p.as_finite() {
        Some(p) => pgauss_with_log_power(stream, p).0,
        None => stream.symmetric_uniform(),
    }
}

/// Fills `buf` with i.i.d. `p`-generalized Gaussians and returns `‖G‖_p`.
///
/// The powers are accumulated as a running log-sum-exp: for large `p` every
/// `|g_i|^p` may underflow even though the norm itself is moderate.
fn fill_pgauss(stream: &mut RandomStream, p: f64, buf: &mut [f64]) -> f64 {
    let mut top = f64::NEG_INFINITY;
    let mut scaled_sum = 0.0;
    for x in buf.iter_mut() {
        let (g, log_pow) = pgauss_with_log_power(stream, p);
        *x = g;
        if log_pow > top {
            scaled_sum = scaled_sum * (top - log_pow).exp() + 1.0;
            top = log_pow;
        } else {
            scaled_sum += (log_pow - top).exp();
        }
    }
    ((top + scaled_sum.ln()) / p).exp()
}

/// Writes a boundary point into `buf` and returns `‖G‖_p` of the underlying
/// Gaussian vector (1 for the cube).
pub(crate) fn fill_boundary(stream: &mut RandomStream, p: PIndex, buf: &mut [f64]) -> f64 {
    match p.as_finite() {
        Some(pf) => {
            let norm = fill_pgauss(stream, pf, buf);
            let inv = 1.0 / norm;
            buf.iter_mut().for_each(|x| *x *= inv);
            norm
        }
        None => {
            buf.iter_mut().for_each(|x| *x = stream.symmetric_uniform());
            let face = stream.index(buf.len());
            buf[face] = stream.sign();
            1.0
        }
    }
}

pub(crate) fn fill_ball(stream: &mut RandomStream, p: PIndex, buf: &mut [f64]) {
    match p {
        p if p.is_infinite() => buf.iter_mut().for_each(|x| *x = stream.symmetric_uniform()),
        p => {
            fill_boundary(stream, p, buf);
            let radius = (stream.uniform().ln() / buf.len() as f64).exp();
            buf.iter_mut().for_each(|x| *x *= radius);
        }
    }
}

fn fill_point(stream: &mut RandomStream, p: PIndex, domain: DomainKind, buf: &mut [f64]) {
    match domain {
        DomainKind::BallBoundary => {
            fill_boundary(stream, p, buf);
        }
        DomainKind::BallInterior => fill_ball(stream, p, buf),
    }
}

/// A point with the cone measure on `∂B_p^n`.
pub fn sample_boundary(stream: &mut RandomStream, p: PIndex, n: usize) -> PointSample {
    assert!(n >= 1, "dimension must be positive");
    let mut coords = vec![0.0; n];
    fill_boundary(stream, p, &mut coords);
    PointSample {
        coords,
        p,
        domain: DomainKind::BallBoundary,
    }
}

/// A uniform point of `B_p^n`.
pub fn sample_ball(stream: &mut RandomStream, p: PIndex, n: usize) -> PointSample {
    assert!(n >= 1, "dimension must be positive");
    let mut coords = vec![0.0; n];
    fill_ball(stream, p, &mut coords);
    PointSample {
        coords,
        p,
        domain: DomainKind::BallInterior,
    }
}

/// `n^{1/p − 1/2}`, the scale that makes the distance converge.
pub fn distance_scale(p: PIndex, n: usize) -> f64 {
    (n as f64).powf(p.recip() - 0.5)
}

/// Reusable scratch space for repeated distance draws.
#[derive(Debug, Clone)]
pub struct PairSampler {
    p: PIndex,
    domain: DomainKind,
    scale: f64,
    x: Vec<f64>,
    y: Vec<f64>,
}

impl PairSampler {
    pub fn new(p: PIndex, n: usize, domain: DomainKind) -> Self {
        assert!(n >= 1, "dimension must be positive");
        PairSampler {
            p,
            domain,
            scale: distance_scale(p, n),
            x: vec![0.0; n],
            y: vec![0.0; n],
        }
    }

    /// `n^{1/p−1/2}·‖X−Y‖₂` for two fresh independent points.
    pub fn distance(&mut self, stream: &mut RandomStream) -> f64 {
        fill_point(stream, self.p, self.domain, &mut self.x);
        fill_point(stream, self.p, self.domain, &mut self.y);
        self.scale * euclid_dist(&self.x, &self.y)
    }

    /// `n^{1/p−1/2}·‖G−G'‖₂/‖G‖_p` with unnormalized Gaussian vectors.
    pub fn surrogate(&mut self, stream: &mut RandomStream) -> f64 {
        let p = self
            .p
            .as_finite()
            .expect("surrogate statistic needs finite p");
        let norm = fill_pgauss(stream, p, &mut self.x);
        fill_pgauss(stream, p, &mut self.y);
        self.scale * euclid_dist(&self.x, &self.y) / norm
    }
}

fn euclid_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// One draw of the normalized distance `n^{1/p−1/2}‖X−Y‖₂`.
pub fn sample_pair_distance(
    stream: &mut RandomStream,
    p: PIndex,
    n: usize,
    domain: DomainKind,
) -> f64 {
    PairSampler::new(p, n, domain).distance(stream)
}

/// One draw of `W_n = n^{1/p−1/2}‖G−G'‖₂/‖G‖_p`, the statistic that shares
/// the distance's limit law.
pub fn sample_surrogate(stream: &mut RandomStream, p: PIndex, n: usize) -> Result<f64> {
    if p.is_infinite() {
        return Err(Error::domain("sample_surrogate", "p must be finite"));
    }
    Ok(PairSampler::new(p, n, DomainKind::BallBoundary).surrogate(stream))
}
