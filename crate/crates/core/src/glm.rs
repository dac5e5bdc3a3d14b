//! Frequency-weighted generalized linear models fitted by iteratively
//! reweighted least squares: negative binomial and Poisson with log link,
//! binomial with logit link.
//!
//! The standard design has an intercept, Post-vaccine and Pre-COVID
//! indicators (Restriction is the baseline) and eleven month indicators
//! (January is the reference). Records sharing a design row and a response
//! are interchangeable under frequency weights, so [`cell_data`] merges them
//! before fitting.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::ingest::{BookingRecord, BookingTable, Phase, YearMonth};
use crate::numeric::CompensatedSum;
use crate::optim::golden_section;

/// Number of columns in the standard phase/month design.
pub const DESIGN_COLUMNS: usize = 14;

const MONTH_LABELS: [&str; 12] = [
    "jan", "feb", "mar", "apr", "may", "jun", "jul", "aug", "sep", "oct", "nov", "dec",
];

/// Column labels of the standard design, in column order.
pub fn design_labels() -> Vec<String> {
    let mut labels = vec!["intercept".to_string(), "post_vaccine".into(), "pre_covid".into()];
    labels.extend(MONTH_LABELS[1..].iter().map(|m| m.to_string()));
    labels
}

/// One row of the standard design for a `(phase, calendar month)` cell.
pub fn design_row(phase: Phase, month: u32) -> [f64; DESIGN_COLUMNS] {
    let mut row = [0.0; DESIGN_COLUMNS];
    row[0] = 1.0;
    match phase {
        Phase::PostVaccine => row[1] = 1.0,
        Phase::PreCovid => row[2] = 1.0,
        Phase::Restriction => {}
    }
    if (2..=12).contains(&month) {
        row[month as usize + 1] = 1.0;
    }
    row
}

/// A labelled design matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    matrix: DMatrix<f64>,
    labels: Vec<String>,
}

impl DesignMatrix {
    pub fn new(matrix: DMatrix<f64>, labels: Vec<String>) -> Result<Self> {
        if labels.len() != matrix.ncols() {
            return Err(Error::InvalidInput(format!(
                "{} labels for {} columns",
                labels.len(),
                matrix.ncols()
            )));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite design entry".into()));
        }
        Ok(Self { matrix, labels })
    }

    /// Standard design from `(phase, month)` cells.
    pub fn from_cells(cells: &[(Phase, u32)]) -> Self {
        let matrix = DMatrix::from_fn(cells.len(), DESIGN_COLUMNS, |i, j| {
            design_row(cells[i].0, cells[i].1)[j]
        });
        Self { matrix, labels: design_labels() }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn nrows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.matrix.row(i).iter().copied().collect()
    }
}

/// Standard design with one row per table record.
pub fn build_design(table: &BookingTable) -> DesignMatrix {
    let cells: Vec<_> = table.records().iter().map(|r| (r.phase, r.month)).collect();
    DesignMatrix::from_cells(&cells)
}

/// Design, response and frequency weights ready for fitting.
#[derive(Debug, Clone)]
pub struct GlmData {
    pub design: DesignMatrix,
    pub y: Vec<f64>,
    pub w: Vec<f64>,
}

/// Merge records into `(phase, month, response)` cells with summed weights.
pub fn cell_data<'a>(
    records: impl IntoIterator<Item = &'a BookingRecord>,
    response: impl Fn(&BookingRecord) -> f64,
) -> GlmData {
    let mut cells: BTreeMap<(usize, u32, u64), (Phase, f64, u64)> = BTreeMap::new();
    for r in records {
        let y = response(r);
        cells
            .entry((r.phase.index(), r.month, y.to_bits()))
            .and_modify(|c| c.2 += r.weight)
            .or_insert((r.phase, y, r.weight));
    }
    let mut keys = Vec::with_capacity(cells.len());
    let mut y = Vec::with_capacity(cells.len());
    let mut w = Vec::with_capacity(cells.len());
    for ((_, month, _), (phase, value, weight)) in cells {
        keys.push((phase, month));
        y.push(value);
        w.push(weight as f64);
    }
    GlmData { design: DesignMatrix::from_cells(&keys), y, w }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum GlmFamily {
    /// Negative binomial, log link, `Var(y) = μ + μ²/θ`.
    NegBin,
    /// Binomial (0/1 response), logit link.
    Logistic,
    /// Poisson, log link.
    Poisson,
}

/// Treatment of the negative-binomial size parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThetaMode {
    /// Profile-likelihood estimate alternated with IRLS.
    Estimate,
    Fixed(f64),
}

#[derive(Debug, Clone)]
pub struct GlmOptions {
    pub theta: ThetaMode,
    /// Relative change of the deviance that ends IRLS.
    pub deviance_tol: f64,
    /// Largest coefficient step accepted as converged.
    pub step_tol: f64,
    pub max_iter: usize,
    /// Bounds for `θ`.
    pub theta_range: (f64, f64),
    /// Joint change of `(β, log θ)` that ends the alternation.
    pub outer_tol: f64,
    pub max_outer: usize,
}

impl Default for GlmOptions {
    fn default() -> Self {
        Self {
            theta: ThetaMode::Estimate,
            deviance_tol: 1e-8,
            step_tol: 1e-9,
            max_iter: 50,
            theta_range: (1e-3, 1e6),
            outer_tol: 1e-8,
            max_outer: 100,
        }
    }
}

/// A fitted GLM. `covariance` is the inverse weighted Fisher information
/// for the coefficients.
#[derive(Debug, Clone)]
pub struct GlmFit {
    pub family: GlmFamily,
    pub labels: Vec<String>,
    pub coefficients: Vec<f64>,
    pub covariance: DMatrix<f64>,
    pub theta: Option<f64>,
    pub loglik: f64,
    pub deviance: f64,
    pub pearson_chi2: f64,
    pub n_eff: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl GlmFit {
    pub fn standard_errors(&self) -> Vec<f64> {
        (0..self.coefficients.len())
            .map(|i| self.covariance[(i, i)].max(0.0).sqrt())
            .collect()
    }

    pub fn coefficient(&self, label: &str) -> Option<f64> {
        self.labels
            .iter()
            .position(|l| l == label)
            .map(|i| self.coefficients[i])
    }

    pub fn linear_predictor(&self, x: &[f64]) -> f64 {
        x.iter().zip(&self.coefficients).map(|(a, b)| a * b).sum()
    }

    /// Mean (log link) or probability (logit link) for a design row.
    pub fn predict(&self, x: &[f64]) -> f64 {
        inverse_link(self.family, self.linear_predictor(x))
    }

    /// Prediction for a cell of the standard design.
    pub fn predict_cell(&self, phase: Phase, month: u32) -> Result<f64> {
        if self.labels != design_labels() {
            return Err(Error::InvalidInput(
                "fit does not use the standard phase/month design".into(),
            ));
        }
        Ok(self.predict(&design_row(phase, month)))
    }

    /// Weighted score vector `∂ℓ/∂β` at the fitted coefficients.
    pub fn score(&self, design: &DesignMatrix, y: &[f64], w: &[f64]) -> Vec<f64> {
        let theta = self.theta.unwrap_or(f64::INFINITY);
        let x = design.matrix();
        let mut acc = vec![CompensatedSum::new(); x.ncols()];
        for i in 0..x.nrows() {
            let row: Vec<f64> = x.row(i).iter().copied().collect();
            let mu = self.predict(&row);
            let s = match self.family {
                GlmFamily::NegBin => (y[i] - mu) / (1.0 + mu / theta),
                GlmFamily::Poisson | GlmFamily::Logistic => y[i] - mu,
            };
            for (a, xv) in acc.iter_mut().zip(&row) {
                a.add(w[i] * xv * s);
            }
        }
        acc.iter().map(|a| a.value()).collect()
    }
}

fn inverse_link(family: GlmFamily, eta: f64) -> f64 {
    match family {
        GlmFamily::Logistic => 1.0 / (1.0 + (-eta).exp()),
        GlmFamily::NegBin | GlmFamily::Poisson => eta.exp(),
    }
}

/// `ln(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

const PROB_EPS: f64 = 10.0 * f64::EPSILON;

/// Per-observation log-likelihood contribution (unweighted).
fn log_density(family: GlmFamily, y: f64, eta: f64, theta: f64) -> f64 {
    match family {
        GlmFamily::Logistic => y * -softplus(-eta) + (1.0 - y) * -softplus(eta),
        GlmFamily::Poisson => y * eta - eta.exp() - ln_gamma(y + 1.0),
        GlmFamily::NegBin => {
            // Written as y·η − (y+θ)·ln(1+μ/θ) plus the Pochhammer term
            // without its y·ln θ part, so nothing cancels when θ is large.
            let mu = eta.exp();
            let rising = if y.fract() == 0.0 && y <= 1e4 {
                (0..y as u64).map(|j| (j as f64 / theta).ln_1p()).sum::<f64>()
            } else {
                ln_gamma(y + theta) - ln_gamma(theta) - y * theta.ln()
            };
            rising - ln_gamma(y + 1.0) + y * eta - (y + theta) * (mu / theta).ln_1p()
        }
    }
}

/// Per-observation deviance contribution (unweighted).
fn unit_deviance(family: GlmFamily, y: f64, mu: f64, theta: f64) -> f64 {
    let ylog = |a: f64, b: f64| if a > 0.0 { a * (a / b).ln() } else { 0.0 };
    match family {
        GlmFamily::Logistic => 2.0 * (ylog(y, mu) + ylog(1.0 - y, 1.0 - mu)),
        GlmFamily::Poisson => 2.0 * (ylog(y, mu) - (y - mu)),
        GlmFamily::NegBin => 2.0 * (ylog(y, mu) - (y + theta) * ((y - mu) / (mu + theta)).ln_1p()),
    }
}

fn variance(family: GlmFamily, mu: f64, theta: f64) -> f64 {
    match family {
        GlmFamily::Logistic => (mu * (1.0 - mu)).max(PROB_EPS),
        GlmFamily::Poisson => mu,
        GlmFamily::NegBin => mu + mu * mu / theta,
    }
}

/// Weighted log-likelihood at the linear predictors `eta`.
fn total_loglik(family: GlmFamily, y: &[f64], w: &[f64], eta: &[f64], theta: f64) -> f64 {
    y.iter()
        .zip(w)
        .zip(eta)
        .map(|((&yi, &wi), &ei)| wi * log_density(family, yi, ei, theta))
        .collect::<CompensatedSum>()
        .value()
}

/// Columns that are (numerically) linear combinations of earlier columns,
/// found by Gram–Schmidt with re-orthogonalization.
fn collinear_columns(x: &DMatrix<f64>, w: &[f64]) -> Vec<usize> {
    let scaled = DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| x[(i, j)] * w[i].sqrt());
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut bad = Vec::new();
    for j in 0..x.ncols() {
        let col = scaled.column(j).into_owned();
        let norm0 = col.norm();
        let mut v = col;
        for _ in 0..2 {
            for q in &basis {
                let c = q.dot(&v);
                v -= q * c;
            }
        }
        let norm = v.norm();
        if norm0 == 0.0 || norm <= 1e-9 * norm0 {
            bad.push(j);
        } else {
            basis.push(v / norm);
        }
    }
    bad
}

/// Weighted least squares by QR of `√W X`. Returns the solution and `R`.
fn weighted_ls(x: &DMatrix<f64>, wt: &[f64], z: &[f64]) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let a = DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| x[(i, j)] * wt[i].sqrt());
    let b = DVector::from_fn(x.nrows(), |i, _| z[i] * wt[i].sqrt());
    let qr = a.qr();
    let r = qr.r();
    let qtb = qr.q().transpose() * b;
    let beta = r
        .solve_upper_triangular(&qtb)
        .ok_or_else(|| Error::Numerical("singular weighted least-squares system".into()))?;
    Ok((beta, r))
}

struct IrlsOutcome {
    beta: DVector<f64>,
    r: DMatrix<f64>,
    converged: bool,
    iterations: usize,
}

/// IRLS for fixed `θ` (ignored unless negative binomial).
fn irls(
    family: GlmFamily,
    x: &DMatrix<f64>,
    y: &[f64],
    w: &[f64],
    theta: f64,
    start: Option<&DVector<f64>>,
    opts: &GlmOptions,
) -> Result<IrlsOutcome> {
    let n = x.nrows();
    let mut eta: Vec<f64> = match start {
        Some(b) => (x * b).iter().copied().collect(),
        None => y
            .iter()
            .map(|&yi| match family {
                GlmFamily::Logistic => {
                    let m = (yi + 0.5) / 2.0;
                    (m / (1.0 - m)).ln()
                }
                _ => (yi + 0.1).ln(),
            })
            .collect(),
    };
    let mut beta: Option<DVector<f64>> = start.cloned();
    let mut dev_old = -2.0 * total_loglik(family, y, w, &eta, theta);
    let mut r_last = None;
    for iter in 1..=opts.max_iter {
        let mut wt = Vec::with_capacity(n);
        let mut z = Vec::with_capacity(n);
        for i in 0..n {
            let mut mu = inverse_link(family, eta[i]);
            if family == GlmFamily::Logistic {
                mu = mu.clamp(PROB_EPS, 1.0 - PROB_EPS);
            }
            // dμ/dη is μ for the log link and μ(1−μ) for the logit link.
            let dmu = match family {
                GlmFamily::Logistic => variance(family, mu, theta),
                _ => mu,
            };
            wt.push(w[i] * dmu * dmu / variance(family, mu, theta));
            z.push(eta[i] + (y[i] - mu) / dmu);
        }
        let (mut proposal, r) = weighted_ls(x, &wt, &z)?;
        let mut new_eta: Vec<f64> = (x * &proposal).iter().copied().collect();
        let mut dev = -2.0 * total_loglik(family, y, w, &new_eta, theta);
        // Step halving guards against overshoot from poor starting values.
        if let Some(prev) = &beta {
            let mut halvings = 0;
            while !(dev.is_finite() && dev <= dev_old + 1e-10 * dev_old.abs()) && halvings < 40 {
                proposal = (&proposal + prev) * 0.5;
                new_eta = (x * &proposal).iter().copied().collect();
                dev = -2.0 * total_loglik(family, y, w, &new_eta, theta);
                halvings += 1;
            }
        }
        if !dev.is_finite() {
            return Err(Error::NonFinite { point: proposal.iter().copied().collect() });
        }
        let step = match &beta {
            Some(prev) => (&proposal - prev).amax(),
            None => f64::INFINITY,
        };
        let rel = (dev - dev_old).abs() / (dev.abs() + 0.1);
        beta = Some(proposal);
        eta = new_eta;
        dev_old = dev;
        r_last = Some(r);
        if rel < opts.deviance_tol && step < opts.step_tol * (1.0 + beta.as_ref().unwrap().amax()) {
            return Ok(IrlsOutcome {
                beta: beta.unwrap(),
                r: r_last.unwrap(),
                converged: true,
                iterations: iter,
            });
        }
    }
    Ok(IrlsOutcome {
        beta: beta.unwrap(),
        r: r_last.unwrap(),
        converged: false,
        iterations: opts.max_iter,
    })
}

/// Maximizes the negative-binomial log-likelihood in `θ` for fixed means.
fn estimate_theta(y: &[f64], w: &[f64], mu: &[f64], range: (f64, f64)) -> f64 {
    // lnΓ(y+θ) − lnΓ(θ) = Σ_{j<y} ln(θ+j) for integer y; summing the logs
    // once per distinct y avoids the cancellation of two huge lnΓ values.
    let integer = y.iter().all(|&v| v >= 0.0 && v.fract() == 0.0 && v <= 1e5);
    let mut by_count: BTreeMap<u64, f64> = BTreeMap::new();
    if integer {
        for (&yi, &wi) in y.iter().zip(w) {
            *by_count.entry(yi as u64).or_default() += wi;
        }
    }
    let neg_profile = |log_theta: f64| -> f64 {
        let theta = log_theta.exp();
        let mut acc = CompensatedSum::new();
        if integer {
            let mut running = 0.0;
            let mut j = 0u64;
            for (&count, &weight) in &by_count {
                while j < count {
                    running += (theta + j as f64).ln();
                    j += 1;
                }
                acc.add(weight * running);
            }
        } else {
            for (&yi, &wi) in y.iter().zip(w) {
                acc.add(wi * (ln_gamma(yi + theta) - ln_gamma(theta)));
            }
        }
        for ((&yi, &wi), &mi) in y.iter().zip(w).zip(mu) {
            acc.add(wi * (theta * (theta / (theta + mi)).ln() + yi * (mi / (theta + mi)).ln()));
        }
        -acc.value()
    };
    golden_section(neg_profile, range.0.ln(), range.1.ln(), 1e-10).0.exp()
}

/// Maximum-likelihood fit of a frequency-weighted GLM.
///
/// For the negative binomial with [`ThetaMode::Estimate`], IRLS for `β` at
/// fixed `θ` alternates with a golden-section maximization of the
/// likelihood in `log θ` until both change by less than `outer_tol`.
pub fn fit_weighted_glm(
    design: &DesignMatrix,
    y: &[f64],
    w: &[f64],
    family: GlmFamily,
    opts: &GlmOptions,
) -> Result<GlmFit> {
    let x = design.matrix();
    let (n, p) = (x.nrows(), x.ncols());
    if y.len() != n || w.len() != n {
        return Err(Error::InvalidInput(format!(
            "design has {n} rows but {} responses and {} weights",
            y.len(),
            w.len()
        )));
    }
    if n == 0 || p == 0 {
        return Err(Error::InvalidInput("empty design".into()));
    }
    if w.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidInput("weights must be positive and finite".into()));
    }
    match family {
        GlmFamily::Logistic => {
            if y.iter().any(|&v| v != 0.0 && v != 1.0) {
                return Err(Error::InvalidInput("logistic response must be 0 or 1".into()));
            }
            if y.iter().all(|&v| v == y[0]) {
                return Err(Error::Degenerate("logistic response has a single class".into()));
            }
        }
        _ => {
            if y.iter().any(|&v| !(v >= 0.0 && v.is_finite())) {
                return Err(Error::InvalidInput("count response must be non-negative".into()));
            }
        }
    }
    let bad = collinear_columns(x, w);
    if !bad.is_empty() {
        return Err(Error::RankDeficient {
            columns: bad.iter().map(|&j| design.labels()[j].clone()).collect(),
        });
    }

    let (outcome, theta) = match (family, opts.theta) {
        (GlmFamily::NegBin, ThetaMode::Fixed(t)) => {
            if !(t > 0.0) {
                return Err(Error::InvalidInput(format!("theta must be positive, got {t}")));
            }
            (irls(family, x, y, w, t, None, opts)?, Some(t))
        }
        (GlmFamily::NegBin, ThetaMode::Estimate) => {
            let mut fit = irls(GlmFamily::Poisson, x, y, w, f64::INFINITY, None, opts)?;
            let mut theta = f64::NAN;
            let mut converged = false;
            let mut iterations = fit.iterations;
            for _ in 0..opts.max_outer {
                let mu: Vec<f64> = (x * &fit.beta).iter().map(|e| e.exp()).collect();
                let new_theta = estimate_theta(y, w, &mu, opts.theta_range);
                let next = irls(family, x, y, w, new_theta, Some(&fit.beta), opts)?;
                iterations += next.iterations;
                let change = (&next.beta - &fit.beta)
                    .amax()
                    .max((new_theta.ln() - theta.ln()).abs());
                theta = new_theta;
                let inner_ok = next.converged;
                fit = next;
                if inner_ok && change < opts.outer_tol {
                    converged = true;
                    break;
                }
            }
            fit.converged = converged;
            fit.iterations = iterations;
            (fit, Some(theta))
        }
        _ => (irls(family, x, y, w, f64::INFINITY, None, opts)?, None),
    };

    let theta_val = theta.unwrap_or(f64::INFINITY);
    let eta: Vec<f64> = (x * &outcome.beta).iter().copied().collect();
    let mut deviance = CompensatedSum::new();
    let mut pearson = CompensatedSum::new();
    for i in 0..n {
        let mu = inverse_link(family, eta[i]);
        deviance.add(w[i] * unit_deviance(family, y[i], mu, theta_val));
        pearson.add(w[i] * (y[i] - mu).powi(2) / variance(family, mu, theta_val));
    }
    let r_inv = outcome
        .r
        .solve_upper_triangular(&DMatrix::identity(p, p))
        .ok_or_else(|| Error::Numerical("singular information matrix".into()))?;
    let covariance = &r_inv * r_inv.transpose();
    let separated = family == GlmFamily::Logistic && eta.iter().any(|e| e.abs() > 30.0);

    Ok(GlmFit {
        family,
        labels: design.labels().to_vec(),
        coefficients: outcome.beta.iter().copied().collect(),
        covariance,
        theta,
        loglik: total_loglik(family, y, w, &eta, theta_val),
        deviance: deviance.value(),
        pearson_chi2: pearson.value(),
        n_eff: w.iter().copied().collect::<CompensatedSum>().value(),
        converged: outcome.converged && !separated,
        iterations: outcome.iterations,
    })
}

/// Fit on [`GlmData`].
pub fn fit_data(data: &GlmData, family: GlmFamily, opts: &GlmOptions) -> Result<GlmFit> {
    fit_weighted_glm(&data.design, &data.y, &data.w, family, opts)
}

/// Negative-binomial regression of nights on the standard design.
pub fn fit_nb_table(table: &BookingTable, opts: &GlmOptions) -> Result<GlmFit> {
    let data = cell_data(table.records(), |r| r.nights as f64);
    fit_data(&data, GlmFamily::NegBin, opts)
}

/// Two-sided 95% normal quantile used for Wald intervals.
pub const WALD_Z: f64 = 1.96;

/// `exp(coefficient)` with its Wald 95% interval.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateRatioRow {
    pub label: String,
    pub coefficient: f64,
    pub se: f64,
    pub ratio: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Percent change against the reference level, e.g. `+3.0% vs jan`.
    pub interpretation: String,
}

/// Rate ratios (log link) or odds ratios (logit link) for every
/// non-intercept coefficient.
pub fn rate_ratios(fit: &GlmFit) -> Vec<RateRatioRow> {
    let se = fit.standard_errors();
    fit.labels
        .iter()
        .enumerate()
        .filter(|(_, l)| l.as_str() != "intercept")
        .map(|(i, label)| {
            let b = fit.coefficients[i];
            let ratio = b.exp();
            let reference = if MONTH_LABELS.contains(&label.as_str()) {
                "jan"
            } else {
                "restriction"
            };
            RateRatioRow {
                label: label.clone(),
                coefficient: b,
                se: se[i],
                ratio,
                ci_low: (b - WALD_Z * se[i]).exp(),
                ci_high: (b + WALD_Z * se[i]).exp(),
                interpretation: format!("{:+.1}% vs {reference}", 100.0 * (ratio - 1.0)),
            }
        })
        .collect()
}

/// Observed and model-predicted weighted mean for one calendar month.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonthlyOverlay {
    pub month: YearMonth,
    pub observed: f64,
    pub predicted: f64,
}

/// Per year-month weighted averages of observed nights and of `μ̂ = exp(xᵀβ̂)`.
pub fn predict_monthly_mean(fit: &GlmFit, table: &BookingTable) -> Result<Vec<MonthlyOverlay>> {
    let mut groups: BTreeMap<YearMonth, (CompensatedSum, CompensatedSum, f64)> = BTreeMap::new();
    for r in table.records() {
        let mu = fit.predict_cell(r.phase, r.month)?;
        let w = r.weight as f64;
        let g = groups
            .entry(r.year_month())
            .or_insert_with(|| (CompensatedSum::new(), CompensatedSum::new(), 0.0));
        g.0.add(w * r.nights as f64);
        g.1.add(w * mu);
        g.2 += w;
    }
    Ok(groups
        .into_iter()
        .map(|(month, (obs, pred, w))| MonthlyOverlay {
            month,
            observed: obs.value() / w,
            predicted: pred.value() / w,
        })
        .collect())
}
