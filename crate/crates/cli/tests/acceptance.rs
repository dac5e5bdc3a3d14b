//! Acceptance suite. Runs every criterion in sequence, prints one
//! `CRITERION n PASS|FAIL` line each, and exits non-zero if a criterion
//! fails that is not listed in `KNOWN_UNATTAINABLE`.

use std::fs;
use std::path::Path;
use std::time::Instant;

use chrono::NaiveDate;
use staylength::densfit::{self, FamilyKind};
use staylength::glm::{self, GlmFamily, GlmOptions};
use staylength::hurdle;
use staylength::ingest::IngestOptions;
use staylength::rng::PhiloxStream;
use staylength::sarima::{self, MonthlySeries, SarimaOptions, SarimaParams};
use staylength::simgen::{self, BookingSimSpec, NbRegressionSpec, SarimaSimSpec};
use staylength::wstats::{self, WeightedSample};
use staylength::{BookingTable, Phase, YearMonth};
use staylength_cli::{run_pipeline, run_simulate, PipelineConfig};
use statrs::distribution::{ContinuousCDF, Normal};

/// Sub-checks whose pinned threshold cannot be met by the exact
/// arithmetic; they print FAIL but do not fail the run.
const KNOWN_UNATTAINABLE: &[&str] = &["9:p_value"];

struct Outcome {
    checks: Vec<(String, bool, String)>,
}

impl Outcome {
    fn new() -> Self {
        Self { checks: Vec::new() }
    }

    fn check(&mut self, name: &str, ok: bool, detail: impl Into<String>) {
        self.checks.push((name.to_string(), ok, detail.into()));
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn table_from(rows: impl IntoIterator<Item = (i64, u64)>) -> BookingTable {
    let day = NaiveDate::from_ymd_opt(2019, 6, 1).unwrap();
    BookingTable::from_rows(rows.into_iter().map(|(n, w)| (n, w, day)), &IngestOptions::default()).unwrap()
}

fn criterion_1(o: &mut Outcome) {
    let mut s = PhiloxStream::new(101, 0);
    let (mut worst_mean, mut worst_var, mut quantile_mismatch) = (0.0f64, 0.0f64, 0usize);
    let probs = [0.01, 0.1, 0.25, 0.5, 0.75, 0.9, 0.99, 1.0];
    for _ in 0..500 {
        let len = 1 + s.below(200) as usize;
        let values: Vec<f64> = (0..len).map(|_| (10.0 * s.standard_normal() * 64.0).round() / 64.0).collect();
        let weights: Vec<f64> = (0..len).map(|_| (1 + s.below(20)) as f64).collect();
        let mut expanded = Vec::new();
        for (v, w) in values.iter().zip(&weights) {
            expanded.extend(std::iter::repeat_n(*v, *w as usize));
        }
        let n = expanded.len() as f64;
        let mean = expanded.iter().sum::<f64>() / n;
        let var = expanded.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        let sample = WeightedSample::new(values, weights).unwrap();
        worst_mean = worst_mean.max((wstats::weighted_mean(&sample).unwrap() - mean).abs() / mean.abs().max(1.0));
        worst_var = worst_var.max(rel(wstats::weighted_variance(&sample).unwrap(), var));
        expanded.sort_by(f64::total_cmp);
        let got = wstats::weighted_quantiles(&sample, &probs).unwrap();
        for (p, q) in probs.iter().zip(got) {
            let idx = (0..expanded.len()).find(|&i| (i + 1) as f64 / n >= *p).unwrap();
            quantile_mismatch += usize::from(expanded[idx] != q);
        }
    }
    o.check("mean", worst_mean < 1e-12, format!("max rel err {worst_mean:.2e}"));
    o.check("variance", worst_var < 1e-12, format!("max rel err {worst_var:.2e}"));
    o.check("quantiles", quantile_mismatch == 0, format!("{quantile_mismatch} mismatches"));
}

fn criterion_2(o: &mut Outcome) {
    let mut s = PhiloxStream::new(202, 0);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let mu = 0.5 + 1.5 * s.uniform();
        let sigma = 0.3 + 0.9 * s.uniform();
        let rows: Vec<(i64, u64)> = (0..(20 + s.below(200)))
            .map(|_| {
                let y = (mu + sigma * s.standard_normal()).exp().round().clamp(1.0, 180.0) as i64;
                (y, 1 + s.below(50))
            })
            .collect();
        let sample = table_from(rows).sample();
        let (m, sd) = densfit::lognormal_closed_form(&sample).unwrap();
        let fit = densfit::fit_sample(FamilyKind::LogNormal, &sample).unwrap();
        let [fm, fs] = fit.family.params();
        worst = worst.max((fm - m).abs()).max((fs - sd).abs());
    }
    o.check("lognormal_mle", worst < 1e-6, format!("max param diff {worst:.2e}"));
}

fn ln_factorial(k: u64) -> f64 {
    (2..=k).map(|j| (j as f64).ln()).sum()
}

/// Adaptive Simpson on `[a, b]`; `tol` bounds the error of each panel.
fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            rec(f, a, m, fa, flm, fm, left, tol, depth - 1) + rec(f, m, b, fm, frm, fb, right, tol, depth - 1)
        }
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    rec(f, a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), tol, 40)
}

/// `P(K = k)` for `K | Z ~ Poisson(exp(μ + σZ))`, integrating over `z`
/// on both sides of the integrand's mode.
fn pln_oracle(k: u64, mu: f64, sigma: f64) -> f64 {
    let kf = k as f64;
    let log_f = |z: f64| kf * (mu + sigma * z) - (mu + sigma * z).exp() - ln_factorial(k) - 0.5 * z * z;
    let mut z = 0.0;
    for _ in 0..100 {
        let e = (mu + sigma * z).exp();
        let g = kf * sigma - sigma * e - z;
        let h = -sigma * sigma * e - 1.0;
        z -= g / h;
    }
    let peak = log_f(z);
    let f = |t: f64| (log_f(t) - peak).exp();
    let tol = 1e-14;
    let integral = simpson(&f, z - 40.0, z, tol) + simpson(&f, z, z + 40.0, tol);
    integral * peak.exp() / (2.0 * std::f64::consts::PI).sqrt()
}

fn criterion_3(o: &mut Outcome) {
    let mut worst_norm = 0.0f64;
    for (mu, sigma) in [(0.5, 0.3), (1.0, 0.7), (1.5, 1.0), (2.0, 1.2), (1.0, 1.5)] {
        let total: f64 = (0..40_000).map(|k| densfit::pln_log_pmf(k, mu, sigma).unwrap().exp()).sum();
        worst_norm = worst_norm.max((total - 1.0).abs());
    }
    o.check("normalization", worst_norm < 1e-8, format!("max |Σp − 1| {worst_norm:.2e}"));

    let mut worst_poisson = 0.0f64;
    for mu in [-1.0, 0.5, 1.5, 3.0] {
        let lambda = f64::exp(mu);
        for k in 0..60u64 {
            let poisson = (k as f64 * mu - lambda - ln_factorial(k)).exp();
            let pln = densfit::pln_log_pmf(k, mu, 1e-4).unwrap().exp();
            worst_poisson = worst_poisson.max((pln - poisson).abs());
        }
    }
    o.check("poisson_limit", worst_poisson < 1e-6, format!("max abs diff {worst_poisson:.2e}"));

    let mut s = PhiloxStream::new(303, 0);
    let mut worst_spot = 0.0f64;
    for i in 0..20 {
        let mu = -0.5 + 3.5 * s.uniform();
        let sigma = if i < 5 { 3.0 + 1.5 * s.uniform() } else { 0.1 + 2.5 * s.uniform() };
        let k = s.below(120);
        let got = densfit::pln_log_pmf(k, mu, sigma).unwrap().exp();
        let want = pln_oracle(k, mu, sigma);
        worst_spot = worst_spot.max(rel(got, want));
    }
    o.check("spot_values", worst_spot < 1e-8, format!("max rel err {worst_spot:.2e} over 20 points"));
}

/// Median of three nights and 2.9% of stays at 28 nights or more.
fn calibrated_lognormal() -> (f64, f64) {
    let mu = 3f64.ln();
    let z = Normal::standard().inverse_cdf(1.0 - 0.029);
    (mu, (27.5f64.ln() - mu) / z)
}

fn criterion_4(o: &mut Outcome) {
    let (mu, sigma) = calibrated_lognormal();
    let mut s = PhiloxStream::new(404, 0);
    let mut counts = vec![0u64; 181];
    for _ in 0..100_000 {
        let y = (mu + sigma * s.standard_normal()).exp().round().clamp(1.0, 180.0) as usize;
        counts[y] += 1;
    }
    let table = table_from(counts.iter().enumerate().filter(|(_, c)| **c > 0).map(|(y, c)| (y as i64, *c)));
    let fit = |k| densfit::fit_weighted(k, &table).unwrap();
    let (ln, pln, gamma) = (fit(FamilyKind::LogNormal), fit(FamilyKind::PoissonLogNormal), fit(FamilyKind::Gamma));
    o.check(
        "aic_order",
        ln.aic < pln.aic && pln.aic < gamma.aic,
        format!("AIC lognormal {:.1} < pln {:.1} < gamma {:.1}", ln.aic, pln.aic, gamma.aic),
    );
}

/// Planted coefficients: intercept, post_vaccine, pre_covid, feb..dec.
fn planted_beta() -> [f64; glm::DESIGN_COLUMNS] {
    let mut beta = [0.0; glm::DESIGN_COLUMNS];
    beta[0] = 4f64.ln();
    beta[1] = 0.935f64.ln();
    beta[2] = 0.838f64.ln();
    let months = [0.01, -0.02, 0.030f64.ln_1p(), 0.02, 0.04, 0.06, 0.05, 0.0, -0.03, -0.05, 0.03];
    beta[3..].copy_from_slice(&months);
    beta
}

const PLANTED: [(&str, usize, f64); 3] = [("post_vaccine", 1, 0.935), ("pre_covid", 2, 0.838), ("apr", 5, 1.030)];

fn criterion_5(o: &mut Outcome) {
    let beta = planted_beta();
    let labels = glm::design_labels();
    let data = simgen::simulate_nb_regression(&NbRegressionSpec { beta, theta: 2.0, total: 1_000_000, seed: 505 }).unwrap();
    let fit = glm::fit_data(&data, GlmFamily::NegBin, &GlmOptions::default()).unwrap();
    let se = fit.standard_errors();
    let mut detail = Vec::new();
    let mut ok = fit.converged && fit.n_eff == 1e6;
    for (label, j, truth) in PLANTED {
        assert_eq!(labels[j], label);
        let irr = fit.coefficients[j].exp();
        let z = (fit.coefficients[j] - truth.ln()).abs() / se[j];
        ok &= rel(irr, truth) < 0.01 && z < 3.0;
        detail.push(format!("{label} {irr:.4} (|z| {z:.2})"));
    }
    o.check("recovery", ok, detail.join(", "));

    let (mut covered, mut total) = (0usize, 0usize);
    for rep in 0..200u64 {
        let spec = NbRegressionSpec { beta, theta: 2.0, total: 20_000, seed: 10_000 + rep };
        let data = simgen::simulate_nb_regression(&spec).unwrap();
        let fit = glm::fit_data(&data, GlmFamily::NegBin, &GlmOptions::default()).unwrap();
        let se = fit.standard_errors();
        for (_, j, truth) in PLANTED {
            let (lo, hi) = (fit.coefficients[j] - glm::WALD_Z * se[j], fit.coefficients[j] + glm::WALD_Z * se[j]);
            covered += usize::from(lo <= truth.ln() && truth.ln() <= hi);
            total += 1;
        }
    }
    let coverage = covered as f64 / total as f64;
    o.check(
        "coverage",
        (0.90..=0.99).contains(&coverage),
        format!("{:.1}% of {total} intervals", 100.0 * coverage),
    );
}

fn criterion_6(o: &mut Outcome) {
    let uplift = |a: (f64, f64), b: (f64, f64)| {
        let rows = hurdle::impact_from_pairs(&[(Phase::PostVaccine, a.0, a.1), (Phase::PreCovid, b.0, b.1)], Phase::PreCovid)
            .unwrap();
        rows.iter().find(|r| r.phase == Phase::PostVaccine).unwrap().excess_vs_pre
    };
    let first = uplift((0.029, 42.6), (0.015, 45.8));
    let second = uplift((0.022, 45.8), (0.015, 45.8));
    o.check("uplift_0.55", (first - 0.55).abs() <= 0.01, format!("{first:.4}"));
    o.check("uplift_0.32", (second - 0.32).abs() <= 0.01, format!("{second:.4}"));

    let mut worst = 0.0f64;
    for seed in 0..20 {
        let spec = BookingSimSpec {
            start: YearMonth { year: 2019, month: 1 },
            end: YearMonth { year: 2021, month: 12 },
            intensity: 300,
            seed,
            ..BookingSimSpec::default()
        };
        let table = simgen::simulate_bookings(&spec).unwrap();
        for thr in [7, 28, 90] {
            let d = hurdle::empirical_decomposition(&table, thr);
            worst = worst.max((d.recombined() - d.mean).abs());
        }
    }
    o.check("decomposition", worst < 1e-12, format!("max |recombined − mean| {worst:.2e}"));
}

/// Dense Gaussian log density of the doubly differenced series, with the
/// MA(13) covariance built from its own ψ weights.
fn dense_oracle(x: &[f64], ma1: f64, sma12: f64, sigma2: f64) -> f64 {
    let mut psi = [0.0; 14];
    psi[0] = 1.0;
    psi[1] = ma1;
    psi[12] = sma12;
    psi[13] = ma1 * sma12;
    let n = x.len();
    let cov = nalgebra::DMatrix::from_fn(n, n, |i, j| {
        let h = i.abs_diff(j);
        if h > 13 {
            return 0.0;
        }
        sigma2 * (0..14 - h).map(|t| psi[t] * psi[t + h]).sum::<f64>()
    });
    let ch = cov.cholesky().expect("positive definite");
    let logdet = 2.0 * ch.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let v = nalgebra::DVector::from_column_slice(x);
    let quad = v.dot(&ch.solve(&v));
    -0.5 * (n as f64 * (2.0 * std::f64::consts::PI).ln() + logdet + quad)
}

fn criterion_7(o: &mut Outcome) {
    let mut s = PhiloxStream::new(707, 0);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let n = 27 + s.below(10) as usize;
        let values: Vec<f64> = (0..n).map(|t| 3.0 + 0.01 * t as f64 + s.standard_normal()).collect();
        let series = MonthlySeries::new(YearMonth { year: 2015, month: 1 }, values.clone()).unwrap();
        let params = SarimaParams {
            ma1: 1.9 * s.uniform() - 0.95,
            sma12: 1.9 * s.uniform() - 0.95,
            beta: Vec::new(),
            sigma2: 0.02 + 2.0 * s.uniform(),
        };
        let opts = SarimaOptions { include_xreg: false, include_drift: false };
        let got = sarima::exact_loglik(&params, &series, &opts).unwrap();
        let z: Vec<f64> = (13..n).map(|t| values[t] - values[t - 1] - values[t - 12] + values[t - 13]).collect();
        let want = dense_oracle(&z, params.ma1, params.sma12, params.sigma2);
        worst = worst.max((got - want).abs());
    }
    o.check("dense_oracle", worst < 1e-8, format!("max abs diff {worst:.2e} over 50 draws"));
}

fn criterion_8(o: &mut Outcome) {
    let truth = SarimaSimSpec::default();
    let (mut hits, mut boundary) = (0, 0);
    for rep in 0..100u64 {
        let series = simgen::simulate_sarima(&SarimaSimSpec { seed: 800 + rep, ..truth.clone() }).unwrap();
        let fit = sarima::fit_sarima(&series, &SarimaOptions::default()).unwrap();
        boundary += usize::from(fit.on_boundary());
        let beta = |label: &str| {
            let i = fit.beta_labels.iter().position(|l| l == label).unwrap();
            (fit.beta[i], fit.se[2 + i])
        };
        let (post, post_se) = beta("post_vaccine");
        let (pre, pre_se) = beta("pre_covid");
        let within = [
            (fit.ma1, truth.ma1, fit.se[0]),
            (fit.sma12, truth.sma12, fit.se[1]),
            (post, truth.beta_post, post_se),
            (pre, truth.beta_pre, pre_se),
            (fit.sigma2, truth.sigma2, fit.sigma2_se),
        ]
        .iter()
        .all(|(est, t, se)| se.is_finite() && (est - t).abs() <= 3.0 * se);
        hits += usize::from(within);
    }
    o.check("within_3se", hits >= 90, format!("{hits}/100 replications, {boundary} on the boundary"));
}

fn criterion_9(o: &mut Outcome) {
    let full = sarima::information_criteria(-12.52, 5, 59);
    let null = sarima::information_criteria(-25.73, 3, 59);
    let lr = sarima::lr_test_values(-12.52, 5, -25.73, 3).unwrap();
    let tol = 0.01 + 1e-9;
    o.check("aic_full", (full.aic - 35.04).abs() <= tol, format!("{:.4}", full.aic));
    o.check("aic_null", (null.aic - 57.45).abs() <= tol, format!("{:.4}", null.aic));
    o.check("lr_statistic", (lr.statistic - 26.42).abs() <= tol && lr.dof == 2, format!("{:.4} on {} df", lr.statistic, lr.dof));
    let exact = (-26.42f64 / 2.0).exp();
    o.check(
        "p_value_exact",
        rel(lr.p_value, exact) < 1e-9,
        format!("p = {:.4e}, closed form exp(-13.21) = {exact:.4e}", lr.p_value),
    );
    o.check("p_value", lr.p_value < 1e-6, format!("p = {:.4e} is not below 1e-6", lr.p_value));
}

fn criterion_10(o: &mut Outcome) {
    let x: Vec<f64> = (0..24).map(|t| (((t * 5 + 3) % 13) as f64 - 6.0) / 4.0 + 0.1 * t as f64).collect();
    let lb = sarima::ljung_box(&x, 10, 0).unwrap();
    let n = 24.0;
    let m = x.iter().sum::<f64>() / n;
    let c0: f64 = x.iter().map(|v| (v - m).powi(2)).sum();
    let mut q = 0.0;
    for k in 1..=10 {
        let ck: f64 = (k..24).map(|t| (x[t] - m) * (x[t - k] - m)).sum();
        q += (ck / c0).powi(2) / (n - k as f64);
    }
    let hand = n * (n + 2.0) * q;
    o.check("reference", (lb.statistic - hand).abs() < 1e-10, format!("Q {:.10} vs {hand:.10}", lb.statistic));

    let (mut white_ok, mut ar_ok) = (0, 0);
    for rep in 0..200u64 {
        let mut s = PhiloxStream::new(1000, rep);
        let e: Vec<f64> = (0..200).map(|_| s.standard_normal()).collect();
        white_ok += usize::from(sarima::ljung_box(&e, 12, 0).unwrap().p_value > 0.05);
        let mut ar = vec![0.0; 200];
        ar[0] = e[0] / (1.0f64 - 0.64).sqrt();
        for t in 1..200 {
            ar[t] = 0.8 * ar[t - 1] + e[t];
        }
        ar_ok += usize::from(sarima::ljung_box(&ar, 12, 0).unwrap().p_value < 0.01);
    }
    o.check("white_noise", white_ok >= 180, format!("{white_ok}/200 with p > 0.05"));
    o.check("ar1", ar_ok >= 190, format!("{ar_ok}/200 with p < 0.01"));
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

fn criterion_11(o: &mut Outcome) {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("bookings.csv");
    run_simulate(None, &input, Some(1111)).unwrap();
    let run = |name: &str| {
        let out = tmp.path().join(name);
        let report = run_pipeline(&PipelineConfig::new(&input, &out)).unwrap();
        (report.succeeded(), snapshot(&out))
    };
    let (ok_a, a) = run("a");
    let (ok_b, b) = run("b");
    o.check("byte_identical", ok_a && ok_b && !a.is_empty() && a == b, format!("{} files compared", a.len()));
}

type Criterion = (u32, &'static str, f64, fn(&mut Outcome));

fn main() {
    let criteria: [Criterion; 11] = [
        (1, "weighted statistics oracle", 10.0, criterion_1),
        (2, "log-normal closed form", 30.0, criterion_2),
        (3, "PLN correctness", f64::INFINITY, criterion_3),
        (4, "model ranking", 60.0, criterion_4),
        (5, "NB regression recovery", 300.0, criterion_5),
        (6, "hurdle arithmetic", f64::INFINITY, criterion_6),
        (7, "SARIMA likelihood oracle", 20.0, criterion_7),
        (8, "SARIMA recovery", 300.0, criterion_8),
        (9, "LR bookkeeping", f64::INFINITY, criterion_9),
        (10, "Ljung-Box", f64::INFINITY, criterion_10),
        (11, "end-to-end determinism", f64::INFINITY, criterion_11),
    ];
    let mut unexpected = 0;
    for (id, title, budget, run) in criteria {
        let started = Instant::now();
        let mut o = Outcome::new();
        run(&mut o);
        let secs = started.elapsed().as_secs_f64();
        o.check("runtime", secs < budget, format!("{secs:.2}s (budget {budget}s)"));
        let pass = o.checks.iter().all(|c| c.1);
        println!("CRITERION {id} {} {title} ({secs:.2}s)", if pass { "PASS" } else { "FAIL" });
        for (name, ok, detail) in &o.checks {
            let tag = format!("{id}:{name}");
            let known = KNOWN_UNATTAINABLE.contains(&tag.as_str());
            let mark = match (ok, known) {
                (true, _) => "ok",
                (false, true) => "FAIL (known unattainable)",
                (false, false) => "FAIL",
            };
            println!("    {name}: {mark}: {detail}");
            unexpected += usize::from(!ok && !known);
        }
    }
    if unexpected > 0 {
        println!("{unexpected} unexpected failing check(s)");
        std::process::exit(1);
    }
}
