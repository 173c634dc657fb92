//! Monte Carlo batches of the distance statistic and the empirical
//! statistics used to check them against theory.
//!
//! Trial `i` of a batch always draws from substream `i` of the batch seed, so
//! the values (and their order) do not depend on how many workers ran them.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::sampler::{DomainKind, PairSampler, RandomStream};
use crate::specfun::{normal_cdf, PIndex};

/// Trials handed to a worker at a time.
const BLOCK: usize = 512;

/// Default cap on `trials·n` for batches that keep every value.
pub const DEFAULT_ELEMENT_BUDGET: u128 = 20_000_000_000;

/// Draws of the normalized distance `T_n = n^{1/p−1/2}‖X−Y‖₂`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleBatch {
    pub values: Vec<f64>,
    pub p: PIndex,
    pub n: usize,
    pub domain: DomainKind,
    pub trials: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentSummary {
    pub mean: f64,
    /// Unbiased (N−1) sample variance.
    pub variance: f64,
    pub count: usize,
    pub std_error_mean: f64,
}

/// Welford accumulator; `merge` is Chan's pairwise update.
#[derive(Debug, Clone, Copy, Default)]
pub struct Welford {
    count: usize,
    mean: f64,
    m2: f64,
}

impl Welford {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Welford) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let total = (self.count + other.count) as f64;
        let delta = other.mean - self.mean;
        self.mean += delta * other.count as f64 / total;
        self.m2 += other.m2 + delta * delta * self.count as f64 * other.count as f64 / total;
        self.count += other.count;
    }

    pub fn summary(&self) -> Result<MomentSummary> {
        if self.count == 0 {
            return Err(Error::EmptySample);
        }
        let variance = if self.count > 1 {
            (self.m2 / (self.count - 1) as f64).max(0.0)
        } else {
            0.0
        };
        Ok(MomentSummary {
            mean: self.mean,
            variance,
            count: self.count,
            std_error_mean: (variance / self.count as f64).sqrt(),
        })
    }
}

fn check_trials(trials: usize, workers: usize) -> Result<()> {
    if trials == 0 {
        return Err(Error::domain("run_batch", "trials must be at least 1"));
    }
    if workers == 0 {
        return Err(Error::domain("run_batch", "workers must be at least 1"));
    }
    Ok(())
}

pub(crate) fn with_pool<T: Send>(workers: usize, job: impl FnOnce() -> T + Send) -> T {
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(job),
        Err(_) => job(),
    }
}

/// Runs `trials` independent distance draws, in parallel over `workers`
/// threads.
pub fn run_batch(
    p: PIndex,
    n: usize,
    domain: DomainKind,
    trials: usize,
    seed: u64,
    workers: usize,
) -> Result<SampleBatch> {
    run_batch_with_budget(p, n, domain, trials, seed, workers, DEFAULT_ELEMENT_BUDGET)
}

/// [`run_batch`] with an explicit cap on `trials·n`.
pub fn run_batch_with_budget(
    p: PIndex,
    n: usize,
    domain: DomainKind,
    trials: usize,
    seed: u64,
    workers: usize,
    element_budget: u128,
) -> Result<SampleBatch> {
    check_trials(trials, workers)?;
    if n == 0 {
        return Err(Error::domain("run_batch", "dimension must be at least 1"));
    }
    let requested = trials as u128 * n as u128;
    if requested > element_budget {
        return Err(Error::Resource {
            requested,
            budget: element_budget,
        });
    }
    let mut values = vec![0.0; trials];
    with_pool(workers, || {
        values
            .par_chunks_mut(BLOCK)
            .enumerate()
            .for_each(|(block, chunk)| {
                let mut sampler = PairSampler::new(p, n, domain);
                for (k, slot) in chunk.iter_mut().enumerate() {
                    let trial = (block * BLOCK + k) as u64;
                    *slot = sampler.distance(&mut RandomStream::new(seed, trial));
                }
            })
    });
    Ok(SampleBatch {
        values,
        p,
        n,
        domain,
        trials,
        seed,
    })
}

/// Folds `f(T_n)` over a batch without storing it. Blocks are reduced in
/// trial order, so the result is independent of the worker count.
#[allow(clippy::too_many_arguments)]
fn stream_fold<A, F, M>(
    p: PIndex,
    n: usize,
    domain: DomainKind,
    trials: usize,
    seed: u64,
    workers: usize,
    fold: F,
    merge: M,
) -> Result<A>
where
    A: Default + Send,
    F: Fn(&mut A, f64) + Sync,
    M: Fn(&mut A, A),
{
    check_trials(trials, workers)?;
    let blocks = trials.div_ceil(BLOCK);
    let partials: Vec<A> = with_pool(workers, || {
        (0..blocks)
            .into_par_iter()
            .map(|block| {
                let mut sampler = PairSampler::new(p, n, domain);
                let mut acc = A::default();
                let end = ((block + 1) * BLOCK).min(trials);
                for trial in block * BLOCK..end {
                    let t = sampler.distance(&mut RandomStream::new(seed, trial as u64));
                    fold(&mut acc, t);
                }
                acc
            })
            .collect()
    });
    let mut total = A::default();
    for part in partials {
        merge(&mut total, part);
    }
    Ok(total)
}

/// Streaming moments of `T_n` for batches too large to keep in memory.
pub fn streaming_moments(
    p: PIndex,
    n: usize,
    domain: DomainKind,
    trials: usize,
    seed: u64,
    workers: usize,
) -> Result<MomentSummary> {
    stream_fold(
        p,
        n,
        domain,
        trials,
        seed,
        workers,
        |acc: &mut Welford, t| acc.push(t),
        |total, part| total.merge(&part),
    )?
    .summary()
}

/// Mean and unbiased variance of a batch.
pub fn empirical_moments(batch: &SampleBatch) -> Result<MomentSummary> {
    moments(&batch.values)
}

pub fn moments(values: &[f64]) -> Result<MomentSummary> {
    let mut acc = Welford::default();
    values.iter().for_each(|&x| acc.push(x));
    acc.summary()
}

/// Standard error of the unbiased sample variance, from the fourth central
/// moment: `√((m₄ − s⁴)/N)`.
pub fn variance_standard_error(values: &[f64]) -> Result<f64> {
    let s = moments(values)?;
    let m4 = values.iter().map(|x| (x - s.mean).powi(4)).sum::<f64>() / s.count as f64;
    Ok(((m4 - s.variance * s.variance).max(0.0) / s.count as f64).sqrt())
}

/// Kolmogorov–Smirnov distance between the sample and `N(center, sigma2)`.
pub fn ks_distance(values: &[f64], center: f64, sigma2: f64) -> Result<f64> {
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(Error::domain("ks_distance", format!("sigma2 must be positive, got {sigma2}")));
    }
    let sigma = sigma2.sqrt();
    ks_distance_cdf(values, |x| normal_cdf((x - center) / sigma))
}

/// Kolmogorov–Smirnov distance between the sample and an arbitrary CDF.
///
/// Both one-sided gaps are evaluated at every sorted point, which handles
/// ties.
pub fn ks_distance_cdf(values: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let d = sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (((i + 1) as f64 / n) - f).max(f - i as f64 / n)
        })
        .fold(0.0_f64, f64::max);
    Ok(d.clamp(0.0, 1.0))
}

/// Two-sample Kolmogorov–Smirnov statistic.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d = 0.0_f64;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// Monte Carlo estimate of `−(1/n)·ln P(T_n ≥ z)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailEstimate {
    pub z: f64,
    pub rate: f64,
    pub hits: usize,
    pub trials: usize,
    /// True when no trial reached `z`; `rate` is then only a lower bound.
    pub censored: bool,
}

impl TailEstimate {
    fn new(z: f64, hits: usize, trials: usize, n: usize) -> Self {
        let frac = hits.max(1) as f64 / trials as f64;
        TailEstimate {
            z,
            rate: -frac.ln() / n as f64,
            hits,
            trials,
            censored: hits == 0,
        }
    }
}

/// `(−ln(max(hits,1)/trials)/n, hits)` for the event `T_n ≥ z`.
pub fn empirical_tail_rate(
    p: PIndex,
    n: usize,
    domain: DomainKind,
    z: f64,
    trials: usize,
    seed: u64,
) -> Result<(f64, usize)> {
    let est = shared_tail_rates(p, n, domain, &[z], trials, seed, default_workers())?;
    Ok((est[0].rate, est[0].hits))
}

/// Tail estimates for several thresholds from one common sample, streamed
/// so `trials` can be far larger than memory would allow.
pub fn shared_tail_rates(
    p: PIndex,
    n: usize,
    domain: DomainKind,
    zs: &[f64],
    trials: usize,
    seed: u64,
    workers: usize,
) -> Result<Vec<TailEstimate>> {
    let k = zs.len();
    let counts = stream_fold(
        p,
        n,
        domain,
        trials,
        seed,
        workers,
        |acc: &mut Vec<usize>, t| {
            if acc.is_empty() {
                acc.resize(k, 0);
            }
            for (c, &z) in acc.iter_mut().zip(zs) {
                if t >= z {
                    *c += 1;
                }
            }
        },
        |total, part| {
            if total.is_empty() {
                total.resize(k, 0);
            }
            for (t, c) in total.iter_mut().zip(part) {
                *t += c;
            }
        },
    )?;
    Ok(zs
        .iter()
        .zip(counts.iter().chain(std::iter::repeat(&0)))
        .map(|(&z, &hits)| TailEstimate::new(z, hits, trials, n))
        .collect())
}

/// Tail estimates computed on a stored batch.
pub fn tail_rates_from_batch(batch: &SampleBatch, zs: &[f64]) -> Vec<TailEstimate> {
    zs.iter()
        .map(|&z| {
            let hits = batch.values.iter().filter(|&&t| t >= z).count();
            TailEstimate::new(z, hits, batch.trials, batch.n)
        })
        .collect()
}

/// Number of available cores, at least 1.
pub fn default_workers() -> usize {
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moments_small_cases() {
        let m = moments(&[1.0, 1.0, 1.0]).unwrap();
        assert_eq!((m.mean, m.variance), (1.0, 0.0));
        let m = moments(&[0.0, 2.0]).unwrap();
        assert_eq!((m.mean, m.variance), (1.0, 2.0));
        assert!((m.std_error_mean - 1.0).abs() < 1e-15);
        assert_eq!(moments(&[]), Err(Error::EmptySample));
    }

    #[test]
    fn welford_merge_matches_single_pass() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i * 7919) % 1013) as f64 / 17.0).collect();
        let whole = moments(&xs).unwrap();
        let mut a = Welford::default();
        let mut b = Welford::default();
        xs[..333].iter().for_each(|&x| a.push(x));
        xs[333..].iter().for_each(|&x| b.push(x));
        a.merge(&b);
        let merged = a.summary().unwrap();
        assert!((merged.mean - whole.mean).abs() < 1e-12);
        assert!((merged.variance - whole.variance).abs() < 1e-10);
    }

    #[test]
    fn ks_single_point_at_median() {
        assert_eq!(ks_distance(&[0.0], 0.0, 1.0).unwrap(), 0.5);
        assert!(ks_distance(&[0.0], 0.0, 0.0).is_err());
        assert!(ks_distance(&[], 0.0, 1.0).is_err());
    }

    #[test]
    fn ks_handles_ties() {
        // Two tied points at the median: the empirical CDF jumps 0 → 1.
        assert_eq!(ks_distance(&[0.0, 0.0], 0.0, 1.0).unwrap(), 0.5);
    }

    #[test]
    fn two_sample_ks_extremes() {
        assert_eq!(ks_two_sample(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(ks_two_sample(&[1.0, 2.0], &[3.0, 4.0]).unwrap(), 1.0);
    }

    #[test]
    fn batch_is_independent_of_worker_count() {
        let p = PIndex::finite(2.0);
        let a = run_batch(p, 3, DomainKind::BallBoundary, 5000, 17, 1).unwrap();
        let b = run_batch(p, 3, DomainKind::BallBoundary, 5000, 17, 8).unwrap();
        assert_eq!(a.values, b.values);
        let m1 = streaming_moments(p, 3, DomainKind::BallBoundary, 5000, 17, 1).unwrap();
        let m8 = streaming_moments(p, 3, DomainKind::BallBoundary, 5000, 17, 8).unwrap();
        assert_eq!(m1, m8);
        let direct = empirical_moments(&a).unwrap();
        assert!((direct.mean - m1.mean).abs() < 1e-13);
    }

    #[test]
    fn budget_is_enforced() {
        let err = run_batch_with_budget(PIndex::finite(2.0), 100, DomainKind::BallInterior, 1000, 1, 1, 50_000);
        assert!(matches!(err, Err(Error::Resource { .. })));
        assert!(run_batch(PIndex::finite(2.0), 3, DomainKind::BallInterior, 0, 1, 1).is_err());
    }

    #[test]
    fn tail_rate_certain_event() {
        let (rate, hits) =
            empirical_tail_rate(PIndex::finite(2.0), 10, DomainKind::BallBoundary, 0.0, 2000, 3)
                .unwrap();
        assert_eq!((rate, hits), (0.0, 2000));
    }

    #[test]
    fn tail_rate_below_centre_is_small() {
        let n = 50;
        let (rate, _) =
            empirical_tail_rate(PIndex::finite(2.0), n, DomainKind::BallBoundary, 1.2, 20_000, 3)
                .unwrap();
        assert!(rate <= std::f64::consts::LN_2 / n as f64);
    }

    #[test]
    fn censored_tail_is_flagged() {
        let est = shared_tail_rates(
            PIndex::finite(2.0),
            10,
            DomainKind::BallBoundary,
            &[1.0, 2.5],
            1000,
            3,
            1,
        )
        .unwrap();
        assert!(!est[0].censored);
        assert!(est[1].censored && est[1].hits == 0);
        assert!((est[1].rate - (1000f64).ln() / 10.0).abs() < 1e-12);
    }

    #[test]
    fn shared_sample_matches_stored_batch() {
        let p = PIndex::INFINITY;
        let zs = [0.7, 0.8, 0.9, 1.0];
        let streamed = shared_tail_rates(p, 12, DomainKind::BallInterior, &zs, 4000, 5, 3).unwrap();
        let batch = run_batch(p, 12, DomainKind::BallInterior, 4000, 5, 1).unwrap();
        assert_eq!(streamed, tail_rates_from_batch(&batch, &zs));
        assert!(streamed.windows(2).all(|w| w[0].rate <= w[1].rate));
    }
}
