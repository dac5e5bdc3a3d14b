//! Regression with ARIMA(0,1,1)(0,1,1)₁₂ errors on a monthly series.
//!
//! The response and every regressor are passed through the same operator
//! `(1−B)(1−B¹²)`, after which the errors form the moving average
//! `w_t = (1 + θB)(1 + ΘB¹²) ε_t`, an MA(13) with coefficients
//! `ψ = (1, θ, 0, …, 0, Θ, θΘ)`. The sign convention is the one used by
//! R's `arima`: a negative θ means negative lag-1 autocorrelation
//! `θ/(1+θ²)`.
//!
//! The exact Gaussian likelihood is evaluated with the innovations algorithm.
//! The same innovations transform whitens the regressors, so for fixed MA
//! parameters β is the GLS solution and σ² has the closed form `S/n`; only
//! `(θ, Θ)` are optimized numerically, through `tanh` to stay inside the
//! invertible region.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::ingest::{MonthlyRow, Phase, PhaseBoundaries, YearMonth};
use crate::numeric::CompensatedSum;
use crate::optim::{self, Objective, QuasiNewtonOptions};

/// Seasonal period.
pub const SEASON: usize = 12;
/// Order of the combined moving average.
const MA_ORDER: usize = SEASON + 1;
/// Smallest series length that leaves at least 13 differenced points.
pub const MIN_LENGTH: usize = 26;
/// `|MA| above this is reported as sitting on the invertibility boundary.
pub const BOUNDARY: f64 = 0.999;

/// `(1−B)^d (1−B^s)^D` applied to `series`.
pub fn difference(series: &[f64], d: usize, seasonal_d: usize, s: usize) -> Result<Vec<f64>> {
    if d > 1 || seasonal_d > 1 {
        return Err(Error::InvalidInput("only d, D ∈ {0, 1} are supported".into()));
    }
    if series.len() <= d + seasonal_d * s {
        return Err(Error::InvalidInput(format!(
            "series of length {} is too short for d={d}, D={seasonal_d}, s={s}",
            series.len()
        )));
    }
    let mut out = series.to_vec();
    if seasonal_d == 1 {
        out = (s..out.len()).map(|t| out[t] - out[t - s]).collect();
    }
    if d == 1 {
        out = (1..out.len()).map(|t| out[t] - out[t - 1]).collect();
    }
    Ok(out)
}

fn double_difference(series: &[f64]) -> Result<Vec<f64>> {
    difference(series, 1, 1, SEASON)
}

/// A gap-free monthly series with optional exogenous columns.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonthlySeries {
    pub start: YearMonth,
    pub values: Vec<f64>,
    pub xreg_labels: Vec<String>,
    /// Regressor columns, each as long as `values`.
    pub xreg: Vec<Vec<f64>>,
}

impl MonthlySeries {
    pub fn new(start: YearMonth, values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("series contains non-finite values".into()));
        }
        Ok(Self { start, values, xreg_labels: Vec::new(), xreg: Vec::new() })
    }

    pub fn with_xreg(mut self, label: &str, column: Vec<f64>) -> Result<Self> {
        if column.len() != self.values.len() {
            return Err(Error::InvalidInput(format!(
                "regressor '{label}' has {} values for a series of {}",
                column.len(),
                self.values.len()
            )));
        }
        self.xreg_labels.push(label.to_string());
        self.xreg.push(column);
        Ok(self)
    }

    /// Adds undifferenced Post-vaccine and Pre-COVID indicators; a month
    /// belongs to the phase of its 15th day.
    pub fn with_phase_dummies(self, boundaries: &PhaseBoundaries) -> Result<Self> {
        let phases: Vec<Phase> = self.months().map(|m| boundaries.assign_month(m)).collect();
        let indicator = |p: Phase| phases.iter().map(|&q| if q == p { 1.0 } else { 0.0 }).collect();
        self.with_xreg("post_vaccine", indicator(Phase::PostVaccine))?
            .with_xreg("pre_covid", indicator(Phase::PreCovid))
    }

    /// Series of weighted monthly means, which must cover consecutive months.
    pub fn from_monthly_rows(rows: &[MonthlyRow]) -> Result<Self> {
        let first = rows.first().ok_or(Error::EmptyTable)?;
        for pair in rows.windows(2) {
            if pair[1].month != pair[0].month.succ() {
                return Err(Error::InvalidInput(format!(
                    "monthly series has a gap between {} and {}",
                    pair[0].month, pair[1].month
                )));
            }
        }
        Self::new(first.month, rows.iter().map(|r| r.wmean).collect())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn months(&self) -> impl Iterator<Item = YearMonth> + '_ {
        let start = self.start.ordinal();
        (0..self.values.len() as i64).map(move |i| YearMonth::from_ordinal(start + i))
    }
}

/// Which regression terms enter the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SarimaOptions {
    /// Use the series' exogenous columns.
    pub include_xreg: bool,
    /// Add a constant to the doubly differenced equation.
    pub include_drift: bool,
}

impl Default for SarimaOptions {
    fn default() -> Self {
        Self { include_xreg: true, include_drift: false }
    }
}

/// Differenced response, differenced regressor columns and their labels.
struct Differenced {
    z: Vec<f64>,
    columns: Vec<Vec<f64>>,
    labels: Vec<String>,
}

fn prepare(series: &MonthlySeries, opts: &SarimaOptions) -> Result<Differenced> {
    if series.len() < MIN_LENGTH {
        return Err(Error::InvalidInput(format!(
            "need at least {MIN_LENGTH} months, got {}",
            series.len()
        )));
    }
    let z = double_difference(&series.values)?;
    let mut columns = Vec::new();
    let mut labels = Vec::new();
    if opts.include_xreg {
        if series.xreg.is_empty() {
            return Err(Error::InvalidInput("regressors requested but the series has none".into()));
        }
        for (label, col) in series.xreg_labels.iter().zip(&series.xreg) {
            columns.push(double_difference(col)?);
            labels.push(label.clone());
        }
    }
    if opts.include_drift {
        columns.push(vec![1.0; z.len()]);
        labels.push("drift".into());
    }
    Ok(Differenced { z, columns, labels })
}

/// Parameters of the regression-with-SARIMA-errors model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SarimaParams {
    pub ma1: f64,
    pub sma12: f64,
    pub beta: Vec<f64>,
    pub sigma2: f64,
}

/// Autocovariances `γ(0..=13)` of `(1+θB)(1+ΘB¹²)ε` for unit innovation variance.
pub fn ma_autocovariance(ma1: f64, sma12: f64) -> [f64; MA_ORDER + 1] {
    let mut psi = [0.0; MA_ORDER + 1];
    psi[0] = 1.0;
    psi[1] = ma1;
    psi[SEASON] = sma12;
    psi[MA_ORDER] = ma1 * sma12;
    let mut gamma = [0.0; MA_ORDER + 1];
    for h in 0..=MA_ORDER {
        gamma[h] = (0..=MA_ORDER - h).map(|j| psi[j] * psi[j + h]).sum();
    }
    gamma
}

/// Innovations-algorithm coefficients for an MA(q) with autocovariances
/// `gamma`: `theta[t][l]` is `θ_{t,l}` and `r[t]` the one-step prediction
/// variance of observation `t`.
struct Innovations {
    theta: Vec<[f64; MA_ORDER + 1]>,
    r: Vec<f64>,
}

impl Innovations {
    fn new(gamma: &[f64; MA_ORDER + 1], n: usize) -> Result<Self> {
        let q = MA_ORDER;
        let mut theta = vec![[0.0; MA_ORDER + 1]; n];
        let mut r = vec![0.0; n];
        r[0] = gamma[0];
        for t in 1..n {
            let lo = t.saturating_sub(q);
            for k in lo..t {
                let mut acc = gamma[t - k];
                for j in lo..k {
                    acc -= theta[k][k - j] * theta[t][t - j] * r[j];
                }
                theta[t][t - k] = acc / r[k];
            }
            let mut v = gamma[0];
            for j in lo..t {
                v -= theta[t][t - j].powi(2) * r[j];
            }
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Numerical(format!(
                    "innovation variance {v} at t={t}; MA covariance not positive definite"
                )));
            }
            r[t] = v;
        }
        Ok(Self { theta, r })
    }

    /// Standardized innovations `e_t/√r_t` of `x`.
    fn whiten(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        let mut e = vec![0.0; n];
        for t in 0..n {
            let m = t.min(MA_ORDER);
            let pred: f64 = (1..=m).map(|l| self.theta[t][l] * e[t - l]).sum();
            e[t] = x[t] - pred;
        }
        e.iter().zip(&self.r).map(|(v, r)| v / r.sqrt()).collect()
    }

    fn sum_log_r(&self) -> f64 {
        self.r.iter().map(|r| r.ln()).sum()
    }
}

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Exact Gaussian log-likelihood of differenced data `z` with regression
/// part `Σ βⱼ columnsⱼ`.
fn differenced_loglik(
    z: &[f64],
    columns: &[Vec<f64>],
    ma1: f64,
    sma12: f64,
    beta: &[f64],
    sigma2: f64,
) -> Result<f64> {
    if !(sigma2 > 0.0) {
        return Err(Error::InvalidInput(format!("sigma2 must be positive, got {sigma2}")));
    }
    if beta.len() != columns.len() {
        return Err(Error::InvalidInput(format!(
            "{} coefficients for {} regressors",
            beta.len(),
            columns.len()
        )));
    }
    let n = z.len();
    let inn = Innovations::new(&ma_autocovariance(ma1, sma12), n)?;
    let resid: Vec<f64> = (0..n)
        .map(|t| z[t] - columns.iter().zip(beta).map(|(c, b)| c[t] * b).sum::<f64>())
        .collect();
    let s: f64 = inn.whiten(&resid).iter().map(|e| e * e).collect::<CompensatedSum>().value();
    Ok(-0.5 * (n as f64 * (LN_2PI + sigma2.ln()) + inn.sum_log_r() + s / sigma2))
}

/// Exact log-likelihood of the series under `params`. `params.beta` follows
/// the regressor order implied by `opts` (exogenous columns, then drift).
pub fn exact_loglik(params: &SarimaParams, series: &MonthlySeries, opts: &SarimaOptions) -> Result<f64> {
    let d = prepare(series, opts)?;
    differenced_loglik(&d.z, &d.columns, params.ma1, params.sma12, &params.beta, params.sigma2)
}

/// Profile over β and σ² at fixed MA parameters.
struct Profile {
    beta: Vec<f64>,
    sigma2: f64,
    loglik: f64,
    residuals: Vec<f64>,
}

fn profile(z: &[f64], columns: &[Vec<f64>], ma1: f64, sma12: f64) -> Result<Profile> {
    let n = z.len();
    let inn = Innovations::new(&ma_autocovariance(ma1, sma12), n)?;
    let zw = inn.whiten(z);
    let beta = if columns.is_empty() {
        Vec::new()
    } else {
        let xw: Vec<Vec<f64>> = columns.iter().map(|c| inn.whiten(c)).collect();
        let a = DMatrix::from_fn(n, columns.len(), |i, j| xw[j][i]);
        let qr = a.qr();
        let rhs = qr.q().transpose() * DVector::from_column_slice(&zw);
        qr.r()
            .solve_upper_triangular(&rhs)
            .ok_or_else(|| Error::Numerical("regressors are collinear after differencing".into()))?
            .iter()
            .copied()
            .collect()
    };
    let resid: Vec<f64> = (0..n)
        .map(|t| z[t] - columns.iter().zip(&beta).map(|(c, b)| c[t] * b).sum::<f64>())
        .collect();
    let residuals = inn.whiten(&resid);
    let s = residuals.iter().map(|e| e * e).collect::<CompensatedSum>().value();
    let sigma2 = s / n as f64;
    if !(sigma2 > 0.0) {
        return Err(Error::Degenerate("zero residual variance".into()));
    }
    let loglik = -0.5 * (n as f64 * (LN_2PI + sigma2.ln() + 1.0) + inn.sum_log_r());
    Ok(Profile { beta, sigma2, loglik, residuals })
}

/// Information criteria with `k` counting every estimated parameter
/// including σ², and `n` the number of differenced observations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InformationCriteria {
    pub aic: f64,
    pub aicc: f64,
    pub bic: f64,
}

pub fn information_criteria(loglik: f64, k: usize, n: usize) -> InformationCriteria {
    let (kf, nf) = (k as f64, n as f64);
    let aic = 2.0 * kf - 2.0 * loglik;
    InformationCriteria {
        aic,
        aicc: aic + 2.0 * kf * (kf + 1.0) / (nf - kf - 1.0),
        bic: kf * nf.ln() - 2.0 * loglik,
    }
}

/// A fitted model. `se` lists standard errors for `ma1`, `sma12`, then `beta`.
#[derive(Debug, Clone, Serialize)]
pub struct SarimaFit {
    pub ma1: f64,
    pub sma12: f64,
    pub beta: Vec<f64>,
    pub beta_labels: Vec<String>,
    pub se: Vec<f64>,
    pub sigma2: f64,
    pub sigma2_se: f64,
    pub loglik: f64,
    /// Number of estimated parameters, σ² included.
    pub k: usize,
    /// Number of doubly differenced observations.
    pub n: usize,
    pub aic: f64,
    pub aicc: f64,
    pub bic: f64,
    /// Standardized innovations, one per differenced observation.
    pub residuals: Vec<f64>,
    pub converged: bool,
    pub warnings: Vec<String>,
}

impl SarimaFit {
    /// `(name, estimate, se)` rows: MA terms then regression coefficients.
    pub fn coefficient_rows(&self) -> Vec<(String, f64, f64)> {
        let mut rows = vec![
            ("ma1".to_string(), self.ma1, self.se[0]),
            ("sma12".to_string(), self.sma12, self.se[1]),
        ];
        for (i, label) in self.beta_labels.iter().enumerate() {
            rows.push((label.clone(), self.beta[i], self.se[2 + i]));
        }
        rows
    }

    pub fn on_boundary(&self) -> bool {
        self.ma1.abs() > BOUNDARY || self.sma12.abs() > BOUNDARY
    }
}

/// Fit the model to a monthly series.
pub fn fit_sarima(series: &MonthlySeries, opts: &SarimaOptions) -> Result<SarimaFit> {
    let d = prepare(series, opts)?;
    fit_differenced(&d.z, &d.columns, &d.labels)
}

/// Fit an MA(1)×SMA(1)₁₂ regression to data that is already differenced.
pub fn fit_differenced(z: &[f64], columns: &[Vec<f64>], labels: &[String]) -> Result<SarimaFit> {
    let n = z.len();
    let p = columns.len();
    if n < MA_ORDER {
        return Err(Error::InvalidInput(format!("only {n} differenced observations")));
    }
    if labels.len() != p || columns.iter().any(|c| c.len() != n) {
        return Err(Error::InvalidInput("regressor columns do not match the series".into()));
    }
    for (label, c) in labels.iter().zip(columns) {
        if c.iter().all(|v| *v == 0.0) {
            return Err(Error::RankDeficient { columns: vec![label.clone()] });
        }
    }
    if n <= p + 3 {
        return Err(Error::InvalidInput("too few observations for the parameters".into()));
    }

    let objective = |a: &[f64]| -> f64 {
        match profile(z, columns, a[0].tanh(), a[1].tanh()) {
            Ok(pr) => -pr.loglik / n as f64,
            Err(_) => f64::INFINITY,
        }
    };
    let obj = Objective::new(2, objective).with_bounds(vec![-12.0; 2], vec![12.0; 2]);
    let qn = QuasiNewtonOptions::default();
    let starts: [[f64; 2]; 5] = [[0.0, 0.0], [-0.5, -0.5], [-0.5, 0.3], [0.3, -0.5], [0.3, 0.3]];
    let mut best: Option<optim::OptResult> = None;
    for s in starts {
        let x0 = [s[0].atanh(), s[1].atanh()];
        if let Ok(res) = optim::minimize_quasi_newton(&obj, &x0, &qn) {
            if best.as_ref().is_none_or(|b| res.value < b.value) {
                best = Some(res);
            }
        }
    }
    let best = best.ok_or_else(|| Error::Numerical("every optimizer start failed".into()))?;
    let (ma1, sma12) = (best.argmin[0].tanh(), best.argmin[1].tanh());
    let pr = profile(z, columns, ma1, sma12)?;

    let mut warnings = Vec::new();
    if !best.converged {
        warnings.push("optimizer stopped before convergence".to_string());
    }
    if sma12.abs() > BOUNDARY || ma1.abs() > BOUNDARY {
        warnings.push(format!(
            "MA estimate on the invertibility boundary (ma1={ma1:.4}, sma12={sma12:.4}); \
             standard errors are unreliable"
        ));
    }

    // Observed information for (θ, Θ, β) with σ² concentrated out.
    let neg_loglik = |x: &[f64]| -> f64 {
        let n_f = n as f64;
        let inner = || -> Result<f64> {
            let inn = Innovations::new(&ma_autocovariance(x[0], x[1]), n)?;
            let resid: Vec<f64> = (0..n)
                .map(|t| z[t] - columns.iter().zip(&x[2..]).map(|(c, b)| c[t] * b).sum::<f64>())
                .collect();
            let s: f64 = inn.whiten(&resid).iter().map(|e| e * e).sum();
            Ok(0.5 * (n_f * (LN_2PI + (s / n_f).ln() + 1.0) + inn.sum_log_r()))
        };
        inner().unwrap_or(f64::INFINITY)
    };
    let mut x_hat = vec![ma1, sma12];
    x_hat.extend(&pr.beta);
    let se = match optim::central_hessian(neg_loglik, &x_hat) {
        Ok(h) => {
            let m = DMatrix::from_fn(p + 2, p + 2, |i, j| h[i][j]);
            match m.clone().cholesky() {
                Some(ch) => {
                    let inv = ch.inverse();
                    (0..p + 2).map(|i| inv[(i, i)].sqrt()).collect()
                }
                None => {
                    warnings.push("observed information is not positive definite".into());
                    vec![f64::NAN; p + 2]
                }
            }
        }
        Err(_) => {
            warnings.push("observed information could not be evaluated".into());
            vec![f64::NAN; p + 2]
        }
    };

    let k = 2 + p + 1;
    let ic = information_criteria(pr.loglik, k, n);
    Ok(SarimaFit {
        ma1,
        sma12,
        beta: pr.beta,
        beta_labels: labels.to_vec(),
        se,
        sigma2: pr.sigma2,
        sigma2_se: pr.sigma2 * (2.0 / n as f64).sqrt(),
        loglik: pr.loglik,
        k,
        n,
        aic: ic.aic,
        aicc: ic.aicc,
        bic: ic.bic,
        residuals: pr.residuals,
        converged: best.converged,
        warnings,
    })
}

/// A chi-squared test result.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChiSquaredTest {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

fn chi2_upper(statistic: f64, dof: usize) -> f64 {
    if dof == 0 {
        return 1.0;
    }
    ChiSquared::new(dof as f64).map(|d| d.sf(statistic)).unwrap_or(f64::NAN)
}

/// Likelihood-ratio test from log-likelihoods and parameter counts.
pub fn lr_test_values(loglik_full: f64, k_full: usize, loglik_null: f64, k_null: usize) -> Result<ChiSquaredTest> {
    if k_full < k_null {
        return Err(Error::InvalidInput("the full model has fewer parameters than the null".into()));
    }
    let statistic = 2.0 * (loglik_full - loglik_null);
    if statistic < -1e-8 * loglik_full.abs().max(1.0) {
        return Err(Error::InvalidInput(format!(
            "full log-likelihood {loglik_full} is below the null {loglik_null}; models are not nested"
        )));
    }
    let statistic = statistic.max(0.0);
    let dof = k_full - k_null;
    Ok(ChiSquaredTest { statistic, dof, p_value: chi2_upper(statistic, dof) })
}

/// Likelihood-ratio test of nested fits on the same data.
pub fn lr_test(full: &SarimaFit, null: &SarimaFit) -> Result<ChiSquaredTest> {
    if full.n != null.n {
        return Err(Error::InvalidInput("fits use different data".into()));
    }
    lr_test_values(full.loglik, full.k, null.loglik, null.k)
}

/// Sample autocorrelations at lags `1..=max_lag` (mean-centred).
pub fn acf(x: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    let n = x.len();
    if n < 2 || max_lag >= n {
        return Err(Error::InvalidInput(format!("cannot take {max_lag} lags of {n} values")));
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let c: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let c0: f64 = c.iter().map(|v| v * v).sum();
    if !(c0 > 0.0) {
        return Err(Error::Degenerate("zero variance series".into()));
    }
    Ok((1..=max_lag)
        .map(|k| (k..n).map(|t| c[t] * c[t - k]).sum::<f64>() / c0)
        .collect())
}

/// Ljung–Box portmanteau test `Q = n(n+2) Σ ρ̂ₖ²/(n−k)` on `max_lag − fitdf`
/// degrees of freedom.
pub fn ljung_box(residuals: &[f64], max_lag: usize, fitdf: usize) -> Result<ChiSquaredTest> {
    if max_lag <= fitdf || max_lag == 0 {
        return Err(Error::InvalidInput(format!("max_lag {max_lag} must exceed fitdf {fitdf}")));
    }
    let n = residuals.len();
    if n <= max_lag {
        return Err(Error::InvalidInput(format!("{n} residuals for lag {max_lag}")));
    }
    let rho = acf(residuals, max_lag)?;
    let nf = n as f64;
    let q = nf * (nf + 2.0)
        * rho.iter().enumerate().map(|(i, r)| r * r / (nf - (i + 1) as f64)).sum::<f64>();
    let dof = max_lag - fitdf;
    Ok(ChiSquaredTest { statistic: q, dof, p_value: chi2_upper(q, dof) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HistogramBin {
    pub low: f64,
    pub high: f64,
    pub count: usize,
}

/// Equal-width histogram with Sturges' bin count.
pub fn histogram(x: &[f64]) -> Result<Vec<HistogramBin>> {
    if x.is_empty() {
        return Err(Error::EmptyTable);
    }
    let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return Err(Error::Degenerate("all values are equal".into()));
    }
    let bins = ((x.len() as f64).log2().ceil() as usize + 1).max(1);
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for v in x {
        let i = (((v - lo) / width) as usize).min(bins - 1);
        counts[i] += 1;
    }
    Ok(counts
        .into_iter()
        .enumerate()
        .map(|(i, count)| HistogramBin {
            low: lo + i as f64 * width,
            high: if i + 1 == bins { hi } else { lo + (i + 1) as f64 * width },
            count,
        })
        .collect())
}

#[derive(Debug, Clone, Serialize)]
pub struct DiagnosticsReport {
    /// Autocorrelations at lags `1..`.
    pub acf: Vec<f64>,
    /// `1.96/√n`.
    pub acf_bound: f64,
    pub histogram: Vec<HistogramBin>,
    /// Ljung–Box tests keyed by their maximum lag.
    pub ljung_box: Vec<(usize, ChiSquaredTest)>,
}

/// Lags of the reported ACF and Ljung–Box tests.
pub const ACF_LAGS: usize = 24;
pub const LJUNG_BOX_LAGS: [usize; 2] = [12, 24];
/// Degrees of freedom removed for the two MA parameters.
pub const LJUNG_BOX_FITDF: usize = 2;

pub fn residual_diagnostics(fit: &SarimaFit) -> Result<DiagnosticsReport> {
    let r = &fit.residuals;
    let n = r.len();
    let acf = acf(r, ACF_LAGS.min(n - 1))?;
    let ljung_box = LJUNG_BOX_LAGS
        .iter()
        .filter(|&&l| l < n)
        .map(|&l| ljung_box(r, l, LJUNG_BOX_FITDF).map(|t| (l, t)))
        .collect::<Result<_>>()?;
    Ok(DiagnosticsReport {
        acf,
        acf_bound: 1.96 / (n as f64).sqrt(),
        histogram: histogram(r)?,
        ljung_box,
    })
}
