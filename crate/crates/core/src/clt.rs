//! Central-limit constants of the normalized distance, the exact distance
//! law between two uniform points on the Euclidean sphere, and reports that
//! compare both against Monte Carlo batches.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::sampler::DomainKind;
use crate::specfun::{abs_moment, log_gamma_diff, reg_inc_beta, PIndex};
use crate::stats::{ks_distance, moments, run_batch, variance_standard_error, SampleBatch};

/// Limit constants of `√n(T_n − center) → N(0, σ²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CltConstants {
    pub p: PIndex,
    pub center: f64,
    /// The delta-method variance `(m₄ + m₂²)/(4m₂)`.
    pub sigma2: f64,
    /// At `p = 2`, the variance `1/2` implied by the exact sphere law.
    pub sigma2_alternate: Option<f64>,
}

impl CltConstants {
    pub fn new(p: PIndex) -> Self {
        CltConstants {
            p,
            center: clt_center(p),
            sigma2: clt_variance(p),
            sigma2_alternate: (p.as_finite() == Some(2.0)).then_some(0.5),
        }
    }
}

/// `√(2·E|g|²)`: `√2·√(Γ(3/p)/Γ(1/p))·p^{1/p}`, and `√(2/3)` for the cube.
pub fn clt_center(p: PIndex) -> f64 {
    (2.0 * second_moment(p)).sqrt()
}

fn second_moment(p: PIndex) -> f64 {
    abs_moment(p, 2.0).expect("alpha = 2 is a valid moment order")
}

/// Limit variance `p^{2/p}(M_p(4) + M_p(2)²)/(4M_p(2))`; `7/30` at `p = ∞`.
///
/// Written with `m_k = E|g|^k` this is `(m₄ + m₂²)/(4m₂)`, which is how it is
/// evaluated.
pub fn clt_variance(p: PIndex) -> f64 {
    if p.is_infinite() {
        return 7.0 / 30.0;
    }
    let m2 = second_moment(p);
    let m4 = abs_moment(p, 4.0).expect("alpha = 4 is a valid moment order");
    (m4 + m2 * m2) / (4.0 * m2)
}

fn check_sphere_dim(op: &'static str, n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::domain(op, format!("sphere dimension must be at least 2, got {n}")));
    }
    Ok(())
}

/// `P(‖X − Y‖₂ ≤ t)` for independent uniform points on `S^{n−1}`.
///
/// The inner product `⟨X, Y⟩` is `2B − 1` with `B ~ Beta((n−1)/2, (n−1)/2)`,
/// so the CDF is `I_{t²/4}((n−1)/2, (n−1)/2)`.
pub fn sphere_cdf(n: usize, t: f64) -> Result<f64> {
    check_sphere_dim("sphere_cdf", n)?;
    if t.is_nan() {
        return Err(Error::domain("sphere_cdf", "t is NaN"));
    }
    if t <= 0.0 {
        return Ok(0.0);
    }
    if t >= 2.0 {
        return Ok(1.0);
    }
    let a = 0.5 * (n as f64 - 1.0);
    reg_inc_beta(a, a, 0.25 * t * t)
}

/// `ln(E‖X − Y‖₂ / √2)` on `S^{n−1}`, via the duplication formula:
/// the mean is `√2·Γ(m)²/(Γ(m − ¼)Γ(m + ¼))` with `m = n/2`.
fn log_sphere_mean_ratio(n: usize) -> f64 {
    let m = 0.5 * n as f64;
    -(log_gamma_diff(m, -0.25) + log_gamma_diff(m, 0.25))
}

/// Mean distance `2^{n−1}Γ(n/2)²/(√π Γ(n − 1/2))` between two uniform
/// points on `S^{n−1}`.
pub fn sphere_mean(n: usize) -> Result<f64> {
    check_sphere_dim("sphere_mean", n)?;
    Ok(std::f64::consts::SQRT_2 * log_sphere_mean_ratio(n).exp())
}

/// Variance `2 − sphere_mean(n)²` of the distance on `S^{n−1}`.
///
/// Evaluated as `−2·expm1(2L)` with `L` the log mean ratio, which keeps full
/// relative accuracy when the variance is `O(1/n)`.
pub fn sphere_variance(n: usize) -> Result<f64> {
    check_sphere_dim("sphere_variance", n)?;
    let l = log_sphere_mean_ratio(n);
    Ok((-2.0 * (2.0 * l).exp_m1()).max(0.0))
}

/// Moments of `Z = √n(T_n − center)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EmpiricalClt {
    /// Mean of the raw statistic `T_n`.
    pub mean_t: f64,
    pub std_error_t: f64,
    pub mean_z: f64,
    pub var_z: f64,
    /// Standard error of `var_z`.
    pub var_z_std_error: f64,
}

/// Which limit variance the sample supports, when two candidates exist.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VarianceVerdict {
    /// The candidate closer to the empirical variance.
    pub preferred_sigma2: f64,
    /// `(var_z − σ²)/se` for the delta-method variance.
    pub z_score_theory: f64,
    /// `(var_z − σ²_alt)/se` for the alternate variance.
    pub z_score_alternate: f64,
    /// The KS distances rank the candidates the same way.
    pub ks_agrees: bool,
    /// The rejected candidate is at least 10 standard errors away.
    pub unambiguous: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CltReport {
    pub constants: CltConstants,
    pub p: PIndex,
    pub n: usize,
    pub domain: DomainKind,
    pub trials: usize,
    pub seed: u64,
    pub empirical: EmpiricalClt,
    /// KS distance of `Z` against `N(0, σ²)`.
    pub ks_vs_theory: f64,
    /// KS distance of `Z` against `N(0, σ²_alt)`, when an alternate exists.
    pub ks_vs_alternate: Option<f64>,
    /// `|mean_t − center| ≤ 4·se + 0.5/n`.
    pub center_consistent: bool,
    pub variance_verdict: Option<VarianceVerdict>,
}

/// Runs a batch and compares it with the limit constants.
pub fn clt_report(
    p: PIndex,
    n: usize,
    domain: DomainKind,
    trials: usize,
    seed: u64,
    workers: usize,
) -> Result<CltReport> {
    if trials < 100 {
        return Err(Error::domain("clt_report", format!("need at least 100 trials, got {trials}")));
    }
    let batch = run_batch(p, n, domain, trials, seed, workers)?;
    clt_report_from_batch(&batch)
}

/// [`clt_report`] on an existing batch.
pub fn clt_report_from_batch(batch: &SampleBatch) -> Result<CltReport> {
    let constants = CltConstants::new(batch.p);
    let root_n = (batch.n as f64).sqrt();
    let z: Vec<f64> = batch.values.iter().map(|t| root_n * (t - constants.center)).collect();
    let t_summary = moments(&batch.values)?;
    let z_summary = moments(&z)?;
    let var_se = variance_standard_error(&z)?;
    let empirical = EmpiricalClt {
        mean_t: t_summary.mean,
        std_error_t: t_summary.std_error_mean,
        mean_z: z_summary.mean,
        var_z: z_summary.variance,
        var_z_std_error: var_se,
    };
    let ks_vs_theory = ks_distance(&z, 0.0, constants.sigma2)?;
    let ks_vs_alternate = match constants.sigma2_alternate {
        Some(alt) => Some(ks_distance(&z, 0.0, alt)?),
        None => None,
    };
    let variance_verdict = constants.sigma2_alternate.zip(ks_vs_alternate).map(|(alt, ks_alt)| {
        let z_theory = (empirical.var_z - constants.sigma2) / var_se;
        let z_alt = (empirical.var_z - alt) / var_se;
        let theory_wins = z_theory.abs() <= z_alt.abs();
        VarianceVerdict {
            preferred_sigma2: if theory_wins { constants.sigma2 } else { alt },
            z_score_theory: z_theory,
            z_score_alternate: z_alt,
            ks_agrees: theory_wins == (ks_vs_theory <= ks_alt),
            unambiguous: z_theory.abs().max(z_alt.abs()) >= 10.0,
        }
    });
    let center_consistent = (empirical.mean_t - constants.center).abs()
        <= 4.0 * empirical.std_error_t + 0.5 / batch.n as f64;
    Ok(CltReport {
        constants,
        p: batch.p,
        n: batch.n,
        domain: batch.domain,
        trials: batch.trials,
        seed: batch.seed,
        empirical,
        ks_vs_theory,
        ks_vs_alternate,
        center_consistent,
        variance_verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::integrate;
    use crate::sampler::{sample_pgauss, RandomStream};
    use crate::stats::Welford;

    const INF: PIndex = PIndex::INFINITY;

    #[test]
    fn centers_and_variances() {
        assert!((clt_center(PIndex::finite(2.0)) - 2f64.sqrt()).abs() < 1e-14);
        assert!((clt_center(INF) - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!((clt_center(PIndex::finite(1.0)) - 2.0).abs() < 1e-13);
        assert!((clt_variance(INF) - 7.0 / 30.0).abs() < 1e-15);
        assert!((clt_variance(PIndex::finite(2.0)) - 1.0).abs() < 1e-13);
        // The finite-p formula is continuous at p = ∞.
        assert!((clt_variance(PIndex::finite(1e6)) - 7.0 / 30.0).abs() < 1e-3);
        for p in [1.0, 1.5, 2.0, 3.0, 7.5, 40.0] {
            let p = PIndex::finite(p);
            let c = clt_center(p);
            assert!((c * c - 2.0 * abs_moment(p, 2.0).unwrap()).abs() < 1e-12);
        }
        assert_eq!(CltConstants::new(PIndex::finite(2.0)).sigma2_alternate, Some(0.5));
        assert_eq!(CltConstants::new(INF).sigma2_alternate, None);
    }

    #[test]
    fn sphere_closed_forms() {
        assert!((sphere_mean(3).unwrap() - 4.0 / 3.0).abs() < 1e-12);
        assert!((sphere_mean(2).unwrap() - 4.0 / std::f64::consts::PI).abs() < 1e-12);
        assert!((sphere_variance(3).unwrap() - 2.0 / 9.0).abs() < 1e-12);
        let pi2 = std::f64::consts::PI.powi(2);
        assert!((sphere_variance(2).unwrap() - (2.0 - 16.0 / pi2)).abs() < 1e-12);
        let n = 1e6;
        let expect = 2f64.sqrt() - 1.0 / (4.0 * 2f64.sqrt() * n);
        assert!((sphere_mean(1_000_000).unwrap() - expect).abs() < 1e-9);
        let prod = 2.0 * 1e5 * sphere_variance(100_000).unwrap();
        assert!((prod - 1.0).abs() < 1e-4, "{prod}");
        assert!(sphere_mean(1).is_err());
    }

    #[test]
    fn sphere_cdf_shape() {
        assert!((sphere_cdf(3, 1.0).unwrap() - 0.25).abs() < 1e-12);
        for n in [2, 3, 7, 50, 1000] {
            assert!((sphere_cdf(n, 2f64.sqrt()).unwrap() - 0.5).abs() < 1e-10);
            assert_eq!(sphere_cdf(n, 0.0).unwrap(), 0.0);
            assert_eq!(sphere_cdf(n, 2.0).unwrap(), 1.0);
            let mut last = 0.0;
            for k in 0..=400 {
                let f = sphere_cdf(n, k as f64 * 0.005).unwrap();
                assert!(f >= last - 1e-15, "n={n} k={k}");
                last = f;
            }
        }
        for k in 0..20 {
            let t = 0.1 * k as f64;
            assert!((sphere_cdf(3, t).unwrap() - t * t / 4.0).abs() < 1e-12);
        }
    }

    #[test]
    fn cdf_reproduces_mean() {
        // E[T] = ∫₀² (1 − F(t)) dt, which avoids differentiating F.
        for n in [3, 5, 10] {
            let r = integrate(|t| [1.0 - sphere_cdf(n, t).unwrap()], &[0.0, 1.0, 2.0], 1e-12, 0.0, 500)
                .unwrap();
            let mean = sphere_mean(n).unwrap();
            assert!((r.value[0] - mean).abs() < 1e-6, "n={n}: {} vs {mean}", r.value[0]);
        }
    }

    #[test]
    fn covariance_entries_match_monte_carlo() {
        // (|g − g'|², |g|^p): Var d² = 2m₄ + 2m₂², Var|g|^p = p, Cov = 2m₂.
        for p in [1.0, 3.0] {
            let pi = PIndex::finite(p);
            let m2 = abs_moment(pi, 2.0).unwrap();
            let m4 = abs_moment(pi, 4.0).unwrap();
            let draws = 2_000_000;
            let mut stream = RandomStream::new(42, p as u64);
            let (mut w_d, mut w_a) = (Welford::default(), Welford::default());
            let mut pairs = Vec::with_capacity(draws);
            for _ in 0..draws {
                let g = sample_pgauss(&mut stream, pi);
                let h = sample_pgauss(&mut stream, pi);
                let d = (g - h).powi(2);
                let a = g.abs().powf(p);
                w_d.push(d);
                w_a.push(a);
                pairs.push((d, a));
            }
            let (md, ma) = (w_d.summary().unwrap().mean, w_a.summary().unwrap().mean);
            let check = |name: &str, values: Vec<f64>, target: f64| {
                let s = moments(&values).unwrap();
                assert!(
                    (s.mean - target).abs() < 4.0 * s.std_error_mean,
                    "p={p} {name}: {} vs {target} (se {})",
                    s.mean,
                    s.std_error_mean
                );
            };
            check("var d²", pairs.iter().map(|&(d, _)| (d - md).powi(2)).collect(), 2.0 * m4 + 2.0 * m2 * m2);
            check("var |g|^p", pairs.iter().map(|&(_, a)| (a - ma).powi(2)).collect(), p);
            check("cov", pairs.iter().map(|&(d, a)| (d - md) * (a - ma)).collect(), 2.0 * m2);
        }
    }

    #[test]
    fn report_on_small_batch() {
        let r = clt_report(INF, 50, DomainKind::BallInterior, 2000, 3, 1).unwrap();
        assert!(r.ks_vs_alternate.is_none() && r.variance_verdict.is_none());
        assert!((0.0..=1.0).contains(&r.ks_vs_theory));
        let r = clt_report(PIndex::finite(2.0), 50, DomainKind::BallBoundary, 2000, 3, 1).unwrap();
        assert!(r.ks_vs_alternate.is_some() && r.variance_verdict.is_some());
        assert!(clt_report(INF, 50, DomainKind::BallInterior, 99, 3, 1).is_err());
    }
}
