//! Weighted maximum-likelihood fits of the log-normal, Gamma and
//! Poisson–lognormal families, information-criterion ranking and CDF overlay
//! data.
//!
//! The continuous families are evaluated directly at the integer stay
//! lengths (no continuity correction). All likelihoods group the sample by
//! distinct value first, so a table and its integer-weight expansion produce
//! the same sums.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::gamma::{digamma, gamma_lr, ln_gamma};

use crate::error::{Error, Result};
use crate::ingest::BookingTable;
use crate::numeric::{log_sum_exp, CompensatedSum};
use crate::optim::{self, NelderMeadOptions, Objective, QuasiNewtonOptions};
use crate::quadrature::{adaptive_gk, hermite_rule};
use crate::wstats::{self, WeightedSample};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_7;

/// Number of free parameters in every supported family.
pub const FAMILY_PARAMS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum FamilyKind {
    LogNormal,
    Gamma,
    PoissonLogNormal,
}

impl FamilyKind {
    pub const ALL: [FamilyKind; 3] = [FamilyKind::LogNormal, FamilyKind::PoissonLogNormal, FamilyKind::Gamma];

    pub fn name(self) -> &'static str {
        match self {
            FamilyKind::LogNormal => "lognormal",
            FamilyKind::Gamma => "gamma",
            FamilyKind::PoissonLogNormal => "pln",
        }
    }
}

impl fmt::Display for FamilyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FamilyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lognormal" => Ok(FamilyKind::LogNormal),
            "gamma" => Ok(FamilyKind::Gamma),
            "pln" => Ok(FamilyKind::PoissonLogNormal),
            other => Err(Error::InvalidInput(format!("unknown family '{other}'"))),
        }
    }
}

/// A parametrized family. Gamma uses the shape/rate parametrization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum DensityFamily {
    LogNormal { mu: f64, sigma: f64 },
    Gamma { shape: f64, rate: f64 },
    PoissonLogNormal { mu: f64, sigma: f64 },
}

impl DensityFamily {
    pub fn kind(&self) -> FamilyKind {
        match self {
            DensityFamily::LogNormal { .. } => FamilyKind::LogNormal,
            DensityFamily::Gamma { .. } => FamilyKind::Gamma,
            DensityFamily::PoissonLogNormal { .. } => FamilyKind::PoissonLogNormal,
        }
    }

    pub fn params(&self) -> [f64; 2] {
        match *self {
            DensityFamily::LogNormal { mu, sigma } | DensityFamily::PoissonLogNormal { mu, sigma } => [mu, sigma],
            DensityFamily::Gamma { shape, rate } => [shape, rate],
        }
    }

    fn validate(&self) -> Result<()> {
        let [a, b] = self.params();
        let ok = match self {
            DensityFamily::Gamma { .. } => a > 0.0 && b > 0.0,
            _ => a.is_finite() && b > 0.0,
        };
        if ok && a.is_finite() && b.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("invalid parameters {self:?}")))
        }
    }

    /// Log density (continuous families) or log pmf (PLN) at `y`.
    pub fn log_density(&self, y: f64) -> Result<f64> {
        match *self {
            DensityFamily::LogNormal { mu, sigma } => {
                let ly = y.ln();
                let z = (ly - mu) / sigma;
                Ok(-ly - sigma.ln() - LN_SQRT_2PI - 0.5 * z * z)
            }
            DensityFamily::Gamma { shape, rate } => {
                Ok(shape * rate.ln() - ln_gamma(shape) + (shape - 1.0) * y.ln() - rate * y)
            }
            DensityFamily::PoissonLogNormal { mu, sigma } => {
                if y < 0.0 || y.fract() != 0.0 {
                    return Err(Error::InvalidInput(format!(
                        "Poisson–lognormal needs non-negative integer support, got {y}"
                    )));
                }
                pln_log_pmf(y as u64, mu, sigma)
            }
        }
    }

    /// CDF at `y`; the PLN CDF sums the pmf over `0..=y`.
    pub fn cdf(&self, y: f64) -> Result<f64> {
        match *self {
            DensityFamily::LogNormal { mu, sigma } => {
                Ok(Normal::standard().cdf((y.ln() - mu) / sigma))
            }
            DensityFamily::Gamma { shape, rate } => Ok(gamma_lr(shape, rate * y)),
            DensityFamily::PoissonLogNormal { mu, sigma } => {
                let mut acc = CompensatedSum::new();
                for k in 0..=(y.floor() as u64) {
                    acc.add(pln_log_pmf(k, mu, sigma)?.exp());
                }
                Ok(acc.value().min(1.0))
            }
        }
    }
}

/// `G(z) = log[Poisson(k; e^{μ+σz}) φ(z)]`, the log-integrand of the PLN pmf.
fn pln_log_integrand(k: f64, lgk1: f64, mu: f64, sigma: f64, z: f64) -> f64 {
    let eta = mu + sigma * z;
    k * eta - eta.exp() - lgk1 - 0.5 * z * z - LN_SQRT_2PI
}

/// Mode of the (strictly concave) log-integrand and its curvature there.
fn pln_mode(k: f64, mu: f64, sigma: f64) -> (f64, f64) {
    let deriv = |z: f64| k * sigma - sigma * (mu + sigma * z).exp() - z;
    // G' is strictly decreasing: bracket the root, then safeguarded Newton.
    let (mut lo, mut hi) = (-1.0, 1.0);
    while deriv(lo) < 0.0 {
        lo *= 2.0;
    }
    while deriv(hi) > 0.0 {
        hi *= 2.0;
    }
    let mut z = 0.0f64.clamp(lo, hi);
    for _ in 0..200 {
        let d = deriv(z);
        if d > 0.0 {
            lo = z;
        } else {
            hi = z;
        }
        let curv = sigma * sigma * (mu + sigma * z).exp() + 1.0;
        let mut next = z + d / curv;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - z).abs() <= 1e-14 * (1.0 + z.abs()) {
            z = next;
            break;
        }
        z = next;
    }
    let curv = sigma * sigma * (mu + sigma * z).exp() + 1.0;
    (z, curv)
}

/// Log pmf of the Poisson–lognormal distribution,
/// `log ∫ Poisson(k; e^{μ+σz}) φ(z) dz`.
///
/// The integral is recentred on the mode of the log-integrand and scaled by
/// its curvature before applying Gauss–Hermite quadrature; the node count
/// starts at 40 and doubles until successive estimates agree to 1e-9. For
/// `σ > 3` adaptive Gauss–Kronrod on the same recentred integrand is used.
pub fn pln_log_pmf(k: u64, mu: f64, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) || !sigma.is_finite() || !mu.is_finite() {
        return Err(Error::InvalidInput(format!("PLN parameters mu={mu}, sigma={sigma}")));
    }
    let kf = k as f64;
    let lgk1 = ln_gamma(kf + 1.0);
    let (mode, curv) = pln_mode(kf, mu, sigma);
    let scale = (2.0 / curv).sqrt();
    let g = |z: f64| pln_log_integrand(kf, lgk1, mu, sigma, z);
    let peak = g(mode);

    let fail = |detail: String| Error::Quadrature { k, mu, sigma, detail };

    if sigma > 3.0 {
        let width = 1.0 / curv.sqrt();
        let mut bp = vec![mode - 40.0, mode + 40.0];
        let mut r = width;
        while r < 40.0 {
            bp.push(mode - r);
            bp.push(mode + r);
            r *= 4.0;
        }
        bp.push(mode);
        bp.sort_by(f64::total_cmp);
        let (v, err) = adaptive_gk(|z| (g(z) - peak).exp(), &bp, 0.0, 1e-13, 4000);
        if !(v > 0.0) || err > 1e-10 * v {
            return Err(fail(format!("adaptive quadrature error {err:e} on value {v:e}")));
        }
        return Ok(peak + v.ln());
    }

    let mut previous: Option<f64> = None;
    for n in [40usize, 80, 160, 320] {
        let rule = hermite_rule(n);
        let terms: Vec<f64> = rule
            .nodes
            .iter()
            .zip(&rule.log_weights)
            .map(|(x, lw)| lw + g(mode + scale * x) + x * x)
            .collect();
        let est = scale.ln() + log_sum_exp(&terms);
        if !est.is_finite() {
            return Err(fail(format!("non-finite estimate with {n} nodes")));
        }
        if let Some(prev) = previous {
            if (est - prev).abs() < 1e-9 {
                return Ok(est);
            }
        }
        previous = Some(est);
    }
    Err(fail("Gauss–Hermite estimates did not stabilise by 320 nodes".into()))
}

/// Distinct values with summed weights.
#[derive(Debug, Clone)]
struct Grouped {
    values: Vec<f64>,
    weights: Vec<f64>,
    total: f64,
}

impl Grouped {
    fn from_sample(s: &WeightedSample) -> Self {
        let mut pairs: Vec<(f64, f64)> = s.values().iter().copied().zip(s.weights().iter().copied()).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut values: Vec<f64> = Vec::new();
        let mut sums: Vec<CompensatedSum> = Vec::new();
        for (v, w) in pairs {
            if values.last() == Some(&v) {
                sums.last_mut().unwrap().add(w);
            } else {
                values.push(v);
                let mut acc = CompensatedSum::new();
                acc.add(w);
                sums.push(acc);
            }
        }
        let weights: Vec<f64> = sums.iter().map(|a| a.value()).collect();
        let total = weights.iter().copied().collect::<CompensatedSum>().value();
        Self { values, weights, total }
    }

    fn loglik(&self, family: &DensityFamily) -> Result<f64> {
        let mut acc = CompensatedSum::new();
        for (y, w) in self.values.iter().zip(&self.weights) {
            let lf = family.log_density(*y)?;
            if !lf.is_finite() {
                return Err(Error::NonFinite { point: vec![*y] });
            }
            acc.add(w * lf);
        }
        Ok(acc.value())
    }

    fn weighted_log_moments(&self) -> (f64, f64) {
        let mut s1 = CompensatedSum::new();
        for (y, w) in self.values.iter().zip(&self.weights) {
            s1.add(w * y.ln());
        }
        let m = s1.value() / self.total;
        let mut s2 = CompensatedSum::new();
        for (y, w) in self.values.iter().zip(&self.weights) {
            let d = y.ln() - m;
            s2.add(w * d * d);
        }
        (m, s2.value() / self.total)
    }

    fn weighted_moments(&self) -> (f64, f64) {
        let s = WeightedSample::new(self.values.clone(), self.weights.clone()).expect("grouped sample is valid");
        (
            wstats::weighted_mean(&s).expect("non-empty"),
            wstats::weighted_variance(&s).expect("non-empty"),
        )
    }
}

/// Σ wᵢ log f(yᵢ | θ) over a booking table.
pub fn weighted_loglik(family: &DensityFamily, table: &BookingTable) -> Result<f64> {
    weighted_loglik_sample(family, &table.sample())
}

pub fn weighted_loglik_sample(family: &DensityFamily, sample: &WeightedSample) -> Result<f64> {
    family.validate()?;
    if sample.values().iter().any(|y| *y <= 0.0) {
        return Err(Error::InvalidInput("stay lengths must be positive".into()));
    }
    Grouped::from_sample(sample).loglik(family)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityFit {
    pub family: DensityFamily,
    pub loglik: f64,
    pub aic: f64,
    pub bic: f64,
    pub n_eff: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl DensityFit {
    fn new(family: DensityFamily, loglik: f64, n_eff: f64, converged: bool, iterations: usize) -> Self {
        let (aic, bic) = information_criteria(loglik, FAMILY_PARAMS, n_eff);
        Self {
            family,
            loglik,
            aic,
            bic,
            n_eff,
            converged,
            iterations,
        }
    }
}

/// `(AIC, BIC) = (2k − 2ℓ, k ln n − 2ℓ)`.
pub fn information_criteria(loglik: f64, k: usize, n_eff: f64) -> (f64, f64) {
    let k = k as f64;
    (2.0 * k - 2.0 * loglik, k * n_eff.ln() - 2.0 * loglik)
}

/// Closed-form weighted log-normal MLE: mean and population variance of
/// `ln y`. Returns `(μ̂, σ̂)`.
pub fn lognormal_closed_form(sample: &WeightedSample) -> Result<(f64, f64)> {
    let g = Grouped::from_sample(sample);
    if g.values.iter().any(|y| *y <= 0.0) {
        return Err(Error::InvalidInput("stay lengths must be positive".into()));
    }
    let (m, v) = g.weighted_log_moments();
    Ok((m, v.sqrt()))
}

/// Fit one family to a booking table by weighted maximum likelihood.
pub fn fit_weighted(kind: FamilyKind, table: &BookingTable) -> Result<DensityFit> {
    fit_sample(kind, &table.sample())
}

/// Fit one family to an arbitrary positive weighted sample.
///
/// Log-normal and Gamma use the bounded quasi-Newton solver with analytic
/// gradients on `(μ, ln σ)` and `(ln k, ln λ)`; the PLN uses Nelder–Mead on
/// `(μ, ln σ)`. Objectives are divided by Σw so tolerances do not depend on
/// the booking count.
pub fn fit_sample(kind: FamilyKind, sample: &WeightedSample) -> Result<DensityFit> {
    let g = Grouped::from_sample(sample);
    if g.values.iter().any(|y| *y <= 0.0) {
        return Err(Error::InvalidInput("stay lengths must be positive".into()));
    }
    if kind == FamilyKind::PoissonLogNormal && g.values.iter().any(|y| y.fract() != 0.0) {
        return Err(Error::InvalidInput("Poisson–lognormal needs integer stay lengths".into()));
    }
    let degenerate = g.values.len() < 2;
    if degenerate && kind != FamilyKind::PoissonLogNormal {
        return Err(Error::Degenerate(format!(
            "all stay lengths equal {}; the {kind} likelihood is unbounded",
            g.values[0]
        )));
    }
    let (mean, var) = g.weighted_moments();
    match kind {
        FamilyKind::LogNormal => fit_lognormal(&g, mean, var),
        FamilyKind::Gamma => fit_gamma(&g, mean, var),
        FamilyKind::PoissonLogNormal => fit_pln(&g, mean, var),
    }
}

fn lognormal_start(mean: f64, var: f64) -> (f64, f64) {
    let s2 = (1.0 + var / (mean * mean)).ln().max(1e-4);
    (mean.ln() - 0.5 * s2, s2.sqrt())
}

fn fit_lognormal(g: &Grouped, mean: f64, var: f64) -> Result<DensityFit> {
    let logs: Vec<f64> = g.values.iter().map(|y| y.ln()).collect();
    let sum_log: f64 = logs.iter().zip(&g.weights).map(|(l, w)| w * l).sum::<f64>() / g.total;
    let value = |x: &[f64]| -> f64 {
        let (mu, ls) = (x[0], x[1]);
        let inv = (-2.0 * ls).exp();
        let mut acc = CompensatedSum::new();
        for (l, w) in logs.iter().zip(&g.weights) {
            let d = l - mu;
            acc.add(w * d * d);
        }
        sum_log + ls + LN_SQRT_2PI + 0.5 * inv * acc.value() / g.total
    };
    let gradient = |x: &[f64]| -> Vec<f64> {
        let (mu, ls) = (x[0], x[1]);
        let inv = (-2.0 * ls).exp();
        let (mut d1, mut d2) = (CompensatedSum::new(), CompensatedSum::new());
        for (l, w) in logs.iter().zip(&g.weights) {
            let d = l - mu;
            d1.add(w * d);
            d2.add(w * d * d);
        }
        vec![-inv * d1.value() / g.total, 1.0 - inv * d2.value() / g.total]
    };
    let obj = Objective::new(2, value)
        .with_gradient(gradient)
        .with_bounds(vec![-50.0, (1e-8f64).ln()], vec![50.0, (1e3f64).ln()]);
    let (mu0, s0) = lognormal_start(mean, var);
    let res = optim::minimize_quasi_newton(&obj, &[mu0, s0.ln()], &QuasiNewtonOptions::default())?;
    let family = DensityFamily::LogNormal {
        mu: res.argmin[0],
        sigma: res.argmin[1].exp(),
    };
    let (m_cf, v_cf) = g.weighted_log_moments();
    let agrees = (res.argmin[0] - m_cf).abs() < 1e-6 && (res.argmin[1].exp() - v_cf.sqrt()).abs() < 1e-6;
    let loglik = g.loglik(&family)?;
    Ok(DensityFit::new(family, loglik, g.total, res.converged && agrees, res.iterations))
}

fn fit_gamma(g: &Grouped, mean: f64, var: f64) -> Result<DensityFit> {
    let mut s_y = CompensatedSum::new();
    let mut s_ly = CompensatedSum::new();
    for (y, w) in g.values.iter().zip(&g.weights) {
        s_y.add(w * y);
        s_ly.add(w * y.ln());
    }
    let ybar = s_y.value() / g.total;
    let lybar = s_ly.value() / g.total;
    // Mean negative log-likelihood in (ln k, ln λ).
    let value = move |x: &[f64]| -> f64 {
        let (k, lam) = (x[0].exp(), x[1].exp());
        -(k * x[1] - ln_gamma(k) + (k - 1.0) * lybar - lam * ybar)
    };
    let gradient = move |x: &[f64]| -> Vec<f64> {
        let (k, lam) = (x[0].exp(), x[1].exp());
        vec![-k * (x[1] - digamma(k) + lybar), -(k - lam * ybar)]
    };
    let obj = Objective::new(2, value)
        .with_gradient(gradient)
        .with_bounds(vec![(1e-6f64).ln(), (1e-8f64).ln()], vec![(1e6f64).ln(), (1e8f64).ln()]);
    let k0 = (mean * mean / var).clamp(1e-3, 1e5);
    let l0 = (mean / var).clamp(1e-7, 1e7);
    let res = optim::minimize_quasi_newton(&obj, &[k0.ln(), l0.ln()], &QuasiNewtonOptions::default())?;
    let shape = polish_gamma_shape(res.argmin[0], ybar.ln() - lybar);
    let family = DensityFamily::Gamma {
        shape,
        rate: shape / ybar,
    };
    let loglik = g.loglik(&family)?;
    Ok(DensityFit::new(family, loglik, g.total, res.converged, res.iterations))
}

/// Refines the shape by bisecting `ln k − ψ(k) = s` in `ln k` from the
/// quasi-Newton estimate. The left side decreases in `k`, and the rate is
/// then `k / ȳ` exactly. The likelihood is nearly flat along that ridge,
/// so the quasi-Newton stopping rule alone can leave a visible score.
fn polish_gamma_shape(log_k0: f64, s: f64) -> f64 {
    let f = |lk: f64| lk - digamma(lk.exp()) - s;
    let (lo_bound, hi_bound) = ((1e-6f64).ln(), (1e6f64).ln());
    let (mut lo, mut hi) = ((log_k0 - 0.5).max(lo_bound), (log_k0 + 0.5).min(hi_bound));
    while f(lo) < 0.0 && lo > lo_bound {
        lo = (lo - 2.0).max(lo_bound);
    }
    while f(hi) > 0.0 && hi < hi_bound {
        hi = (hi + 2.0).min(hi_bound);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (0.5 * (lo + hi)).exp()
}

fn fit_pln(g: &Grouped, mean: f64, var: f64) -> Result<DensityFit> {
    let value = |x: &[f64]| -> f64 {
        let fam = DensityFamily::PoissonLogNormal {
            mu: x[0],
            sigma: x[1].exp(),
        };
        match g.loglik(&fam) {
            Ok(l) => -l / g.total,
            Err(_) => f64::INFINITY,
        }
    };
    let obj = Objective::new(2, value);
    let s2 = if var > mean {
        (1.0 + (var - mean) / (mean * mean)).ln()
    } else {
        0.01
    };
    let s0 = s2.max(1e-4).sqrt();
    let mu0 = mean.ln() - 0.5 * s0 * s0;
    let opts = NelderMeadOptions {
        initial_step: Some(vec![0.1, 0.1]),
        ..Default::default()
    };
    let res = optim::minimize_nelder_mead(&obj, &[mu0, s0.ln()], &opts)?;
    let family = DensityFamily::PoissonLogNormal {
        mu: res.argmin[0],
        sigma: res.argmin[1].exp(),
    };
    let loglik = g.loglik(&family)?;
    Ok(DensityFit::new(family, loglik, g.total, res.converged, res.iterations))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedFit {
    pub family: FamilyKind,
    pub k: usize,
    pub loglik: f64,
    pub aic: f64,
    pub bic: f64,
    pub delta_aic: f64,
}

/// Ascending AIC, ties broken by BIC, then input order.
pub fn rank_models(fits: &[DensityFit]) -> Result<Vec<RankedFit>> {
    if fits.len() < 2 {
        return Err(Error::InvalidInput("ranking needs at least two fits".into()));
    }
    let n = fits[0].n_eff;
    if let Some(f) = fits.iter().find(|f| (f.n_eff - n).abs() > 1e-9 * n.abs()) {
        return Err(Error::InvalidInput(format!(
            "fits come from different tables (n_eff {} vs {})",
            n, f.n_eff
        )));
    }
    let mut order: Vec<&DensityFit> = fits.iter().collect();
    order.sort_by(|a, b| a.aic.total_cmp(&b.aic).then(a.bic.total_cmp(&b.bic)));
    let best = order[0].aic;
    Ok(order
        .into_iter()
        .map(|f| RankedFit {
            family: f.family.kind(),
            k: FAMILY_PARAMS,
            loglik: f.loglik,
            aic: f.aic,
            bic: f.bic,
            delta_aic: f.aic - best,
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OverlayPoint {
    pub y: f64,
    pub ecdf: f64,
    pub fitted_cdf: f64,
}

/// Empirical and fitted CDF at each distinct stay length.
pub fn overlay_points(fit: &DensityFit, table: &BookingTable) -> Result<Vec<OverlayPoint>> {
    overlay_points_sample(fit, &table.sample())
}

pub fn overlay_points_sample(fit: &DensityFit, sample: &WeightedSample) -> Result<Vec<OverlayPoint>> {
    let g = Grouped::from_sample(sample);
    let mut cum = CompensatedSum::new();
    let mut out = Vec::with_capacity(g.values.len());
    // PLN CDF is accumulated incrementally rather than re-summed per point.
    let mut pln_cum = CompensatedSum::new();
    let mut pln_next = 0u64;
    for (i, (y, w)) in g.values.iter().zip(&g.weights).enumerate() {
        cum.add(*w);
        let ecdf = if i + 1 == g.values.len() { 1.0 } else { (cum.value() / g.total).min(1.0) };
        let fitted = match fit.family {
            DensityFamily::PoissonLogNormal { mu, sigma } => {
                while pln_next as f64 <= *y {
                    pln_cum.add(pln_log_pmf(pln_next, mu, sigma)?.exp());
                    pln_next += 1;
                }
                pln_cum.value().min(1.0)
            }
            ref other => other.cdf(*y)?,
        };
        out.push(OverlayPoint {
            y: *y,
            ecdf,
            fitted_cdf: fitted.clamp(0.0, 1.0),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::PhiloxStream;

    fn sample(v: &[f64], w: &[f64]) -> WeightedSample {
        WeightedSample::new(v.to_vec(), w.to_vec()).unwrap()
    }

    fn poisson_log_pmf(k: u64, lambda: f64) -> f64 {
        k as f64 * lambda.ln() - lambda - ln_gamma(k as f64 + 1.0)
    }

    #[test]
    fn lognormal_loglik_closed_form() {
        let fam = DensityFamily::LogNormal { mu: 0.0, sigma: 1.0 };
        let l = weighted_loglik_sample(&fam, &sample(&[1.0], &[3.0])).unwrap();
        let expected = 3.0 * (1.0 / (2.0 * std::f64::consts::PI).sqrt()).ln();
        assert!((l - expected).abs() < 1e-12);
        assert!((l + 2.7568).abs() < 1e-4);
    }

    #[test]
    fn doubling_weights_doubles_loglik() {
        let fam = DensityFamily::Gamma { shape: 1.7, rate: 0.4 };
        let s1 = sample(&[1.0, 3.0, 8.0], &[2.0, 5.0, 1.0]);
        let s2 = sample(&[1.0, 3.0, 8.0], &[4.0, 10.0, 2.0]);
        let l1 = weighted_loglik_sample(&fam, &s1).unwrap();
        let l2 = weighted_loglik_sample(&fam, &s2).unwrap();
        assert!((l2 - 2.0 * l1).abs() < 1e-12 * l1.abs());
    }

    #[test]
    fn pln_small_sigma_is_poisson() {
        for k in [0u64, 1, 2, 3, 7, 15] {
            let pln = pln_log_pmf(k, 1.0, 1e-4).unwrap().exp();
            let pois = poisson_log_pmf(k, 1f64.exp()).exp();
            assert!((pln - pois).abs() < 1e-6, "k={k}: {pln} vs {pois}");
        }
    }

    #[test]
    fn pln_normalizes() {
        let total: f64 = (0..=200).map(|k| pln_log_pmf(k, 1.0, 0.5).unwrap().exp()).sum();
        assert!((total - 1.0).abs() < 1e-8, "{total}");
    }

    #[test]
    fn pln_is_continuous_across_the_rule_switch() {
        for k in [0u64, 1, 5, 40, 200] {
            let gh = pln_log_pmf(k, 0.3, 3.0).unwrap();
            let gk = pln_log_pmf(k, 0.3, 3.0 + 1e-12).unwrap();
            assert!((gh - gk).abs() < 1e-8, "k={k}: {gh} vs {gk}");
        }
    }

    #[test]
    fn pln_rejects_bad_sigma() {
        assert!(pln_log_pmf(2, 0.0, 0.0).is_err());
        assert!(pln_log_pmf(2, 0.0, -1.0).is_err());
    }

    #[test]
    fn lognormal_matches_closed_form_exactly_representable() {
        let e = std::f64::consts::E;
        let s = sample(&[e, e.powi(3)], &[2.0, 2.0]);
        let (mu, sigma) = lognormal_closed_form(&s).unwrap();
        assert!((mu - 2.0).abs() < 1e-12);
        assert!((sigma * sigma - 1.0).abs() < 1e-12);
        let fit = fit_sample(FamilyKind::LogNormal, &s).unwrap();
        assert!(fit.converged);
        let [m, sd] = fit.family.params();
        assert!((m - 2.0).abs() < 1e-6 && (sd - 1.0).abs() < 1e-6);
    }

    #[test]
    fn degenerate_data_errors_for_continuous_families() {
        let s = sample(&[3.0, 3.0], &[1.0, 4.0]);
        assert!(matches!(fit_sample(FamilyKind::LogNormal, &s), Err(Error::Degenerate(_))));
        assert!(matches!(fit_sample(FamilyKind::Gamma, &s), Err(Error::Degenerate(_))));
    }

    #[test]
    fn gamma_recovery_and_score() {
        let truth = statrs::distribution::Gamma::new(2.0, 0.5).unwrap();
        let mut rng = PhiloxStream::new(11, 0);
        let n = 20_000;
        let mut values = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for _ in 0..n {
            values.push(truth.inverse_cdf(rng.uniform()));
            weights.push((1 + rng.below(9)) as f64);
        }
        let s = WeightedSample::new(values, weights).unwrap();
        assert!(s.total_weight() > 9e4);
        let fit = fit_sample(FamilyKind::Gamma, &s).unwrap();
        assert!(fit.converged);
        let [k, lam] = fit.family.params();
        assert!((k / 2.0 - 1.0).abs() < 0.02, "shape {k}");
        assert!((lam / 0.5 - 1.0).abs() < 0.02, "rate {lam}");

        // Weighted score by central differences on (k, λ).
        let ll = |p: &[f64]| {
            weighted_loglik_sample(&DensityFamily::Gamma { shape: p[0], rate: p[1] }, &s).unwrap()
        };
        let grad = optim::central_difference(ll, &[k, lam]).unwrap();
        let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        assert!(norm < 1e-6 * s.total_weight(), "score norm {norm}");
    }

    #[test]
    fn replicated_weights_fit_identically() {
        let v = [1.0, 2.0, 2.0, 3.0, 5.0, 9.0, 14.0];
        let w = [3.0, 1.0, 2.0, 4.0, 2.0, 1.0, 1.0];
        let compact = sample(&v, &w);
        let mut ev = Vec::new();
        for (y, k) in v.iter().zip(&w) {
            for _ in 0..(*k as usize) {
                ev.push(*y);
            }
        }
        let ones = vec![1.0; ev.len()];
        let expanded = sample(&ev, &ones);
        for kind in FamilyKind::ALL {
            let a = fit_sample(kind, &compact).unwrap();
            let b = fit_sample(kind, &expanded).unwrap();
            for (x, y) in a.family.params().iter().zip(b.family.params()) {
                assert!((x - y).abs() < 1e-8, "{kind}: {x} vs {y}");
            }
        }
    }

    #[test]
    fn ic_arithmetic() {
        let fit = DensityFit::new(DensityFamily::LogNormal { mu: 0.0, sigma: 1.0 }, -10.0, 100.0, true, 1);
        assert_eq!(fit.aic, 24.0);
        assert_eq!(fit.bic, 2.0 * 100f64.ln() + 20.0);
    }

    #[test]
    fn ranking_orders_by_aic() {
        let a = DensityFit::new(DensityFamily::LogNormal { mu: 0.0, sigma: 1.0 }, -10.0, 100.0, true, 1);
        let b = DensityFit::new(DensityFamily::Gamma { shape: 1.0, rate: 1.0 }, -20.0, 100.0, true, 1);
        let r = rank_models(&[b.clone(), a.clone()]).unwrap();
        assert_eq!(r[0].family, FamilyKind::LogNormal);
        assert_eq!(r[1].delta_aic, 20.0);
        let tie = rank_models(&[b.clone(), b.clone()]).unwrap();
        assert_eq!(tie[1].delta_aic, 0.0);
        let other = DensityFit::new(DensityFamily::Gamma { shape: 1.0, rate: 1.0 }, -20.0, 50.0, true, 1);
        assert!(rank_models(&[a.clone(), other]).is_err());
        assert!(rank_models(&[a]).is_err());
    }

    #[test]
    fn overlay_lognormal_cdf() {
        let s = sample(&[1.0, 2.0, 4.0, 9.0], &[1.0, 2.0, 3.0, 4.0]);
        let fit = fit_sample(FamilyKind::LogNormal, &s).unwrap();
        let pts = overlay_points_sample(&fit, &s).unwrap();
        assert_eq!(pts.len(), 4);
        assert_eq!(pts.last().unwrap().ecdf, 1.0);
        let [mu, sigma] = fit.family.params();
        for p in &pts {
            let expected = Normal::standard().cdf((p.y.ln() - mu) / sigma);
            assert!((p.fitted_cdf - expected).abs() < 1e-15);
        }
        for w in pts.windows(2) {
            assert!(w[0].ecdf <= w[1].ecdf && w[0].fitted_cdf <= w[1].fitted_cdf);
        }
    }
}
