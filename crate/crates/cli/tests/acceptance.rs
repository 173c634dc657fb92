//! End-to-end acceptance checks. Each test prints one PASS/FAIL line.
//! Tests share one lock so their wall-clock figures are not distorted by
//! each other.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::process::Command;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use lpdist::clt::{clt_center, clt_report, sphere_cdf, sphere_mean, sphere_variance};
use lpdist::ldp::{
    cube_log_mgf, cube_log_mgf_derivatives, cube_rate, gaussian_log_mgf, log_mgf, log_mgf_quadrature,
    mgf_domain_contains, rate_ball, rate_boundary, rate_curve_with_workers, rate_point, Conjugator,
};
use lpdist::sampler::sample_pgauss;
use lpdist::specfun::abs_moment;
use lpdist::stats::{default_workers, ks_distance_cdf, run_batch, shared_tail_rates, streaming_moments, Welford};
use lpdist::{DomainKind, Extended, PIndex, RandomStream};

const SEED: u64 = 1;
static LOCK: Mutex<()> = Mutex::new(());

fn finish(id: u32, ok: bool, elapsed: Duration, limit: Duration, detail: &str) {
    let in_time = elapsed <= limit;
    let pass = ok && in_time;
    // Written to the stream directly so the line shows even when libtest
    // captures the output of passing tests.
    let _ = writeln!(
        std::io::stderr(),
        "criterion {id}: {} ({detail}; {:.1} s of {} s allowed)",
        if pass { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        limit.as_secs()
    );
    assert!(ok, "criterion {id} failed: {detail}");
    assert!(in_time, "criterion {id} exceeded its time budget");
}

fn lock() -> std::sync::MutexGuard<'static, ()> {
    LOCK.lock().unwrap_or_else(|e| e.into_inner())
}

fn workers() -> usize {
    default_workers()
}

#[test]
fn criterion_01_sphere_law() {
    let _g = lock();
    let start = Instant::now();
    let mut ok = true;
    let mut parts = Vec::new();
    for n in [3, 10, 100] {
        let batch = run_batch(PIndex::finite(2.0), n, DomainKind::BallBoundary, 100_000, SEED, workers()).unwrap();
        let ks = ks_distance_cdf(&batch.values, |t| sphere_cdf(n, t).unwrap()).unwrap();
        ok &= ks <= 0.006;
        parts.push(format!("n={n} KS={ks:.5}"));
    }
    finish(1, ok, start.elapsed(), Duration::from_secs(60), &parts.join(", "));
}

#[test]
fn criterion_02_sphere_moments() {
    let _g = lock();
    let start = Instant::now();
    let m3 = sphere_mean(3).unwrap();
    let m2 = sphere_mean(2).unwrap();
    let n = 100_000;
    let scaled = 2.0 * n as f64 * sphere_variance(n).unwrap();
    let s = streaming_moments(PIndex::finite(2.0), 3, DomainKind::BallBoundary, 1_000_000, SEED, workers()).unwrap();
    let z = (s.mean - 4.0 / 3.0) / s.std_error_mean;
    let ok = (m3 - 4.0 / 3.0).abs() <= 1e-12
        && (m2 - 4.0 / std::f64::consts::PI).abs() <= 1e-12
        && (0.999..=1.001).contains(&scaled)
        && z.abs() <= 4.0;
    let detail = format!(
        "mean(3) err {:.1e}, mean(2) err {:.1e}, 2n·var {scaled:.6}, MC mean z-score {z:.2}",
        (m3 - 4.0 / 3.0).abs(),
        (m2 - 4.0 / std::f64::consts::PI).abs()
    );
    finish(2, ok, start.elapsed(), Duration::from_secs(60), &detail);
}

#[test]
fn criterion_03_clt_centers() {
    let _g = lock();
    let start = Instant::now();
    let n = 1000;
    let mut ok = true;
    let mut parts = Vec::new();
    for p in [PIndex::finite(1.0), PIndex::finite(2.0), PIndex::finite(4.0), PIndex::INFINITY] {
        for domain in [DomainKind::BallInterior, DomainKind::BallBoundary] {
            let s = streaming_moments(p, n, domain, 100_000, SEED, workers()).unwrap();
            let dev = (s.mean - clt_center(p)).abs();
            let band = 4.0 * s.std_error_mean + 0.5 / n as f64;
            if dev > band {
                ok = false;
                parts.push(format!("p={p} {domain}: |Δ|={dev:.2e} > {band:.2e}"));
            }
        }
    }
    if parts.is_empty() {
        parts.push("all 8 (p, domain) pairs inside the band".into());
    }
    finish(3, ok, start.elapsed(), Duration::from_secs(300), &parts.join(", "));
}

#[test]
fn criterion_04_cube_variance() {
    let _g = lock();
    let start = Instant::now();
    let r = clt_report(PIndex::INFINITY, 200, DomainKind::BallInterior, 100_000, SEED, workers()).unwrap();
    let rel = (r.empirical.var_z / (7.0 / 30.0) - 1.0).abs();
    let ok = rel <= 0.05 && r.ks_vs_theory <= 0.01;
    let detail = format!("Var(Z)={:.5} ({:.2}% off 7/30), KS={:.5}", r.empirical.var_z, 100.0 * rel, r.ks_vs_theory);
    finish(4, ok, start.elapsed(), Duration::from_secs(60), &detail);
}

#[test]
fn criterion_05_sphere_variance_adjudication() {
    let _g = lock();
    let start = Instant::now();
    let r = clt_report(PIndex::finite(2.0), 500, DomainKind::BallBoundary, 100_000, SEED, workers()).unwrap();
    let verdict = r.variance_verdict.expect("p = 2 has an alternate variance");
    let ok = verdict.unambiguous && r.ks_vs_alternate.is_some() && verdict.z_score_theory.is_finite();
    let detail = format!(
        "Var(Z)={:.5}±{:.5}: z vs 1 = {:.1}, z vs 1/2 = {:.1}, KS vs 1 = {:.4}, KS vs 1/2 = {:.4}, preferred {}",
        r.empirical.var_z,
        r.empirical.var_z_std_error,
        verdict.z_score_theory,
        verdict.z_score_alternate,
        r.ks_vs_theory,
        r.ks_vs_alternate.unwrap_or(f64::NAN),
        verdict.preferred_sigma2
    );
    finish(5, ok, start.elapsed(), Duration::from_secs(60), &detail);
}

#[test]
fn criterion_06_log_mgf_oracle() {
    let _g = lock();
    let start = Instant::now();
    let t1s = [-1.0, -0.6, -0.3, -0.1, 0.0, 0.05, 0.1];
    let t2s = [-1.0, -0.5, -0.2, 0.0, 0.1, 0.2, 0.3];
    let mut worst: f64 = 0.0;
    let mut ok = true;
    for &t1 in &t1s {
        for &t2 in &t2s {
            assert!(mgf_domain_contains(2.0, t1, t2).unwrap(), "({t1}, {t2}) must be interior");
            let q = log_mgf_quadrature(2.0, t1, t2).unwrap();
            let exact = gaussian_log_mgf(t1, t2).unwrap();
            let err = (q.value - exact.value).abs();
            ok &= err <= 1e-8;
            worst = worst.max(err);
        }
    }
    finish(6, ok, start.elapsed(), Duration::from_secs(60), &format!("max |Λ_quad − Λ_exact| = {worst:.2e} on 7×7"));
}

#[test]
fn criterion_07_conjugate_identities() {
    let _g = lock();
    let start = Instant::now();
    let mut ok = true;
    let mut worst: f64 = 0.0;
    for p in [2.0, 3.0] {
        let mut stream = RandomStream::new(SEED, p as u64);
        let mut conj = Conjugator::new(p).unwrap();
        let mut done = 0;
        while done < 20 {
            let t1 = -1.5 + 1.7 * stream.uniform();
            let t2 = -1.5 + (1.5 + 0.9 / p) * stream.uniform();
            if !mgf_domain_contains(p, t1, t2).unwrap() {
                continue;
            }
            let ev = log_mgf(p, t1, t2).unwrap();
            let expect = ev.grad[0] * t1 + ev.grad[1] * t2 - ev.value;
            let got = conj.conjugate(ev.grad[0], ev.grad[1]).value.to_f64();
            let err = (got - expect).abs();
            ok &= err <= 1e-6;
            worst = worst.max(err);
            done += 1;
        }
    }
    let mut centers = Vec::new();
    for p in [2.0, 3.0, 4.0] {
        let c = clt_center(PIndex::finite(p));
        let b = rate_boundary(p, c).unwrap().to_f64();
        let v = rate_ball(p, c).unwrap().to_f64();
        ok &= b.abs() <= 1e-6 && v.abs() <= 1e-6;
        centers.push(format!("p={p}: {b:.1e}/{v:.1e}"));
    }
    let cube = cube_rate((2.0f64 / 3.0).sqrt()).to_f64();
    ok &= cube.abs() <= 1e-8;
    let detail = format!(
        "Fenchel max err {worst:.1e}; boundary/ball rate at center {}; cube {cube:.1e}",
        centers.join(", ")
    );
    finish(7, ok, start.elapsed(), Duration::from_secs(300), &detail);
}

#[test]
fn criterion_08_cube_constants() {
    let _g = lock();
    let start = Instant::now();
    let v0 = cube_log_mgf(0.0);
    let h = 1e-4;
    let d1 = (cube_log_mgf(h) - cube_log_mgf(-h)) / (2.0 * h);
    let d2 = cube_log_mgf_derivatives(0.0)[2];
    let ok = v0.abs() <= 1e-11 && (d1 - 2.0 / 3.0).abs() <= 1e-6 && (d2 - 28.0 / 45.0).abs() <= 1e-5;
    let detail = format!(
        "Λ(0)={v0:.1e}, Λ'(0) err {:.1e}, Λ''(0) err {:.1e}",
        (d1 - 2.0 / 3.0).abs(),
        (d2 - 28.0 / 45.0).abs()
    );
    finish(8, ok, start.elapsed(), Duration::from_secs(10), &detail);
}

#[test]
fn criterion_09_rate_curve_shape() {
    let _g = lock();
    let start = Instant::now();
    let mut ok = true;
    let mut parts = Vec::new();
    let cases = [
        (PIndex::finite(2.0), DomainKind::BallBoundary),
        (PIndex::finite(3.0), DomainKind::BallInterior),
        (PIndex::INFINITY, DomainKind::BallInterior),
    ];
    for (p, domain) in cases {
        let z_star = clt_center(p);
        let curve = rate_curve_with_workers(p, domain, 0.2 * z_star, 1.8 * z_star, 50, workers()).unwrap();
        let rates: Vec<f64> = curve.rates.iter().map(|r| r.to_f64()).collect();
        let min_rate = rates.iter().copied().fold(f64::INFINITY, f64::min);
        let nonneg = min_rate >= -1e-10;

        // Zero at z*: the smallest grid value is next to z*, it is no larger
        // than the quadratic bowl allows at half a grid step, and the rate at
        // z* itself vanishes.
        let h = curve.z_grid[1] - curve.z_grid[0];
        let argmin = (0..rates.len()).min_by(|&a, &b| rates[a].total_cmp(&rates[b])).unwrap();
        let adjacent = (curve.z_grid[argmin] - z_star).abs() <= h;
        let k = argmin.clamp(1, rates.len() - 2);
        let bowl = rates[k - 1] - 2.0 * rates[k] + rates[k + 1];
        let zero_ok = adjacent && min_rate <= 1.5 * bowl / 8.0 + 1e-6;
        let at_center = rate_point(p, domain, z_star).unwrap().rate.to_f64();
        let zero_ok = zero_ok && at_center.abs() <= 1e-6;

        let finite: Vec<f64> = rates.iter().copied().filter(|r| r.is_finite()).collect();
        let min_second = finite
            .windows(3)
            .map(|w| w[0] - 2.0 * w[1] + w[2])
            .fold(f64::INFINITY, f64::min);
        let convex = min_second >= -1e-4;
        let converged = curve.all_converged();
        ok &= nonneg && zero_ok && convex && converged;
        parts.push(format!(
            "p={p} {domain}: min {min_rate:.2e}, I(z*) {at_center:.1e}, min Δ² {min_second:.2e}{}",
            if converged { "" } else { ", not converged" }
        ));
    }
    finish(9, ok, start.elapsed(), Duration::from_secs(600), &parts.join("; "));
}

#[test]
fn criterion_10_tail_rate_trend() {
    let _g = lock();
    let start = Instant::now();
    let zs = [0.95, 1.05];
    let est = shared_tail_rates(PIndex::INFINITY, 40, DomainKind::BallInterior, &zs, 10_000_000, SEED, workers()).unwrap();
    let mut ok = est[0].rate <= est[1].rate;
    let mut parts = Vec::new();
    for e in &est {
        let theory = cube_rate(e.z);
        let Extended::Finite(t) = theory else { panic!("cube rate finite inside (0, 2)") };
        let ratio = e.rate / t;
        ok &= !e.censored && (0.5..=2.0).contains(&ratio);
        parts.push(format!("z={}: {:.4} vs {t:.4} ({} hits)", e.z, e.rate, e.hits));
    }
    finish(10, ok, start.elapsed(), Duration::from_secs(600), &parts.join(", "));
}

#[test]
fn criterion_11_moment_oracles() {
    let _g = lock();
    let start = Instant::now();
    const DRAWS: usize = 10_000_000;
    let mut ok = true;
    let mut worst: f64 = 0.0;
    let mut failures = Vec::new();
    let mut check = |label: String, w: &Welford, target: f64| {
        let s = w.summary().unwrap();
        let dev = (s.mean - target).abs();
        let z = if s.std_error_mean > 0.0 { dev / s.std_error_mean } else if dev == 0.0 { 0.0 } else { f64::INFINITY };
        worst = worst.max(z);
        if z > 4.0 {
            ok = false;
            failures.push(format!("{label}: z={z:.2}"));
        }
    };
    for (i, p) in [1.0, 1.5, 2.0, 3.0, 4.0, f64::INFINITY].into_iter().enumerate() {
        let pi = if p.is_finite() { PIndex::finite(p) } else { PIndex::INFINITY };
        let alphas: Vec<f64> = if p.is_finite() {
            vec![0.0, 1.0, 2.0, 4.0, p, p + 2.0, 2.0 * p]
        } else {
            vec![0.0, 1.0, 2.0, 4.0]
        };
        let targets: Vec<f64> = alphas.iter().map(|&a| abs_moment(pi, a).unwrap()).collect();
        let mut acc = vec![Welford::default(); alphas.len()];
        let (m2, m4) = (abs_moment(pi, 2.0).unwrap(), abs_moment(pi, 4.0).unwrap());
        // Centred at the exact means 2m₂ and 1, so each product is unbiased.
        let (mut var_d, mut var_a, mut cov) = (Welford::default(), Welford::default(), Welford::default());
        let mut stream = RandomStream::new(SEED, i as u64);
        for _ in 0..DRAWS {
            let g = sample_pgauss(&mut stream, pi);
            let x = g.abs();
            for (w, &a) in acc.iter_mut().zip(&alphas) {
                w.push(if a == 0.0 { 1.0 } else { x.powf(a) });
            }
            if p.is_finite() {
                let h = sample_pgauss(&mut stream, pi);
                let d = (g - h).powi(2) - 2.0 * m2;
                let a = h.abs().powf(p) - 1.0;
                var_d.push(d * d);
                var_a.push(a * a);
                cov.push(d * a);
            }
        }
        for ((w, a), t) in acc.iter().zip(&alphas).zip(&targets) {
            check(format!("E|g|^{a} at p={pi}"), w, *t);
        }
        if p.is_finite() {
            check(format!("Var|g−g'|² at p={pi}"), &var_d, 2.0 * m4 + 2.0 * m2 * m2);
            check(format!("Var|g|^p at p={pi}"), &var_a, p);
            check(format!("Cov at p={pi}"), &cov, 2.0 * m2);
        }
    }
    let detail = if failures.is_empty() {
        format!("largest |z| {worst:.2} over all moments and covariance entries")
    } else {
        failures.join(", ")
    };
    finish(11, ok, start.elapsed(), Duration::from_secs(300), &detail);
}

fn run_cli(args: &[&str], workers: usize) {
    let status = Command::new(env!("CARGO_BIN_EXE_lpdist"))
        .args(args)
        .args(["--workers", &workers.to_string()])
        .env_remove("LPDIST_WORKERS")
        .status()
        .unwrap();
    assert!(status.success(), "{args:?} failed");
}

/// The columns of a CSV file; the manifest is excluded by construction.
fn values(path: &Path) -> String {
    fs::read_to_string(path).unwrap()
}

#[test]
fn criterion_12_reproducibility() {
    let _g = lock();
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let commands: [(&str, &[&str]); 5] = [
        ("sample", &["sample", "--p", "3", "--n", "50", "--trials", "5000", "--seed", "1"]),
        ("clt-check", &["clt-check", "--p", "inf", "--domain", "boundary", "--n", "40", "--trials", "5000", "--seed", "1"]),
        ("sphere-exact", &["sphere-exact", "--n", "7", "--t", "1.2"]),
        ("rate", &["rate", "--p", "3", "--domain", "boundary", "--z-min", "0.5", "--z-max", "1.5", "--steps", "4"]),
        ("tail", &["tail", "--p", "inf", "--n", "40", "--z", "0.95,1.05", "--trials", "200000", "--seed", "1"]),
    ];
    let mut ok = true;
    let mut differing = Vec::new();
    for (name, args) in commands {
        let mut outputs = Vec::new();
        for (run, w) in [1, 1, 3].into_iter().enumerate() {
            let path = dir.path().join(format!("{name}-{run}.csv"));
            let mut full: Vec<&str> = args.to_vec();
            let p = path.to_str().unwrap().to_string();
            full.push("--csv");
            full.push(&p);
            run_cli(&full, w);
            outputs.push(values(&path));
        }
        if outputs.iter().any(|o| *o != outputs[0]) {
            ok = false;
            differing.push(name);
        }
    }
    let detail = if differing.is_empty() {
        "all five commands byte-identical across reruns and worker counts 1/3".to_string()
    } else {
        format!("differing: {}", differing.join(", "))
    };
    finish(12, ok, start.elapsed(), Duration::from_secs(600), &detail);
}
