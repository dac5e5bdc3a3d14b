//! Seeded synthetic data with known parameters, used as ground truth for
//! the estimators.
//!
//! Every generator draws from Philox streams keyed by `(seed, unit)`, where
//! the unit is a calendar month (bookings), a design cell (NB regression) or
//! the whole series (SARIMA), so units can be generated independently and in
//! any order.
//!
//! Booking process for one booking created on date `d` in phase `p` and
//! calendar month `m`:
//!
//! * long with probability `logit⁻¹(a₀ + a_p + a_m)`;
//! * a long stay is `threshold + NB(mean = exp(z₀ + z_p + z_m) − threshold, θ)`,
//!   so its expected length is `exp(z₀ + z_p + z_m)`;
//! * a short stay is a log-normal with log-mean `μ + b_p + b_m` and log-sd
//!   `σ`, truncated to `[0.5, threshold − 0.5)` and rounded to the nearest
//!   night, giving support `1..threshold−1`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use chrono::{Days, NaiveDate};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::glm::{design_row, DesignMatrix, GlmData, DESIGN_COLUMNS};
use crate::ingest::{BookingTable, IngestOptions, Phase, PhaseBoundaries, YearMonth};
use crate::rng::PhiloxStream;
use crate::sarima::{MonthlySeries, MIN_LENGTH, SEASON};

/// Parameters of the two-part booking generator. Phase offsets are
/// `[post_vaccine, pre_covid]` relative to Restriction; month offsets run
/// January to December.
#[derive(Debug, Clone, PartialEq)]
pub struct BookingSimSpec {
    pub start: YearMonth,
    pub end: YearMonth,
    pub boundaries: PhaseBoundaries,
    /// Bookings generated per calendar month.
    pub intensity: u64,
    pub seed: u64,
    pub threshold: u32,
    pub cap: u32,
    pub short_mu: f64,
    pub short_sigma: f64,
    pub short_phase: [f64; 2],
    pub short_month: [f64; 12],
    pub long_logit_intercept: f64,
    pub long_logit_phase: [f64; 2],
    pub long_logit_month: [f64; 12],
    pub long_nb_intercept: f64,
    pub long_nb_phase: [f64; 2],
    pub long_nb_month: [f64; 12],
    pub long_theta: f64,
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

impl Default for BookingSimSpec {
    /// Long-stay prevalence 2.9% in Restriction, odds ratio 0.74 after
    /// vaccination and 1.5% before COVID; expected long stay 42.6 nights in
    /// Restriction, 7.5% longer in both other phases.
    fn default() -> Self {
        Self {
            start: YearMonth { year: 2019, month: 1 },
            end: YearMonth { year: 2023, month: 12 },
            boundaries: PhaseBoundaries::default(),
            intensity: 2000,
            seed: 1,
            threshold: 28,
            cap: 180,
            short_mu: 1.0,
            short_sigma: 0.6,
            short_phase: [-0.05, -0.15],
            short_month: [0.0; 12],
            long_logit_intercept: logit(0.029),
            long_logit_phase: [0.74f64.ln(), logit(0.015) - logit(0.029)],
            long_logit_month: [0.0; 12],
            long_nb_intercept: 42.6f64.ln(),
            long_nb_phase: [1.075f64.ln(), 1.075f64.ln()],
            long_nb_month: [0.0; 12],
            long_theta: 2.0,
        }
    }
}

fn phase_offset(offsets: &[f64; 2], phase: Phase) -> f64 {
    match phase {
        Phase::PostVaccine => offsets[0],
        Phase::PreCovid => offsets[1],
        Phase::Restriction => 0.0,
    }
}

fn parse_array<const N: usize>(key: &str, value: &str) -> Result<[f64; N]> {
    let parts: Vec<f64> = value
        .split(',')
        .map(|v| v.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::InvalidInput(format!("{key}: {e}")))?;
    parts
        .try_into()
        .map_err(|p: Vec<f64>| Error::InvalidInput(format!("{key}: expected {N} values, got {}", p.len())))
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| Error::InvalidInput(format!("{key}: {e}")))
}

fn join(values: &[f64]) -> String {
    values.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}

impl BookingSimSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidInput(m.to_string()));
        if self.intensity == 0 {
            return bad("intensity must be at least 1");
        }
        if self.end < self.start {
            return bad("end month precedes start month");
        }
        if !(self.short_sigma > 0.0) || !(self.long_theta > 0.0) {
            return bad("short_sigma and long_theta must be positive");
        }
        if self.threshold < 2 || self.cap < self.threshold {
            return bad("need 2 ≤ threshold ≤ cap");
        }
        let all = [self.short_mu, self.long_logit_intercept, self.long_nb_intercept]
            .into_iter()
            .chain(self.short_phase)
            .chain(self.short_month)
            .chain(self.long_logit_phase)
            .chain(self.long_logit_month)
            .chain(self.long_nb_phase)
            .chain(self.long_nb_month);
        if all.into_iter().any(|v| !v.is_finite()) {
            return bad("non-finite parameter");
        }
        Ok(())
    }

    /// Parse `key = value` lines; `#` starts a comment and missing keys keep
    /// their defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut spec = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                row: lineno + 1,
                message: format!("expected key = value, got '{line}'"),
            })?;
            let (key, value) = (key.trim(), value.trim());
            let date = |v: &str| {
                NaiveDate::parse_from_str(v, "%Y-%m-%d")
                    .map_err(|e| Error::InvalidInput(format!("{key}: {e}")))
            };
            match key {
                "start" => spec.start = parse_value(key, value)?,
                "end" => spec.end = parse_value(key, value)?,
                "pre_end" => spec.boundaries.pre_end = date(value)?,
                "restriction_end" => spec.boundaries.restriction_end = date(value)?,
                "intensity" => spec.intensity = parse_value(key, value)?,
                "seed" => spec.seed = parse_value(key, value)?,
                "threshold" => spec.threshold = parse_value(key, value)?,
                "cap" => spec.cap = parse_value(key, value)?,
                "short_mu" => spec.short_mu = parse_value(key, value)?,
                "short_sigma" => spec.short_sigma = parse_value(key, value)?,
                "short_phase" => spec.short_phase = parse_array(key, value)?,
                "short_month" => spec.short_month = parse_array(key, value)?,
                "long_logit_intercept" => spec.long_logit_intercept = parse_value(key, value)?,
                "long_logit_phase" => spec.long_logit_phase = parse_array(key, value)?,
                "long_logit_month" => spec.long_logit_month = parse_array(key, value)?,
                "long_nb_intercept" => spec.long_nb_intercept = parse_value(key, value)?,
                "long_nb_phase" => spec.long_nb_phase = parse_array(key, value)?,
                "long_nb_month" => spec.long_nb_month = parse_array(key, value)?,
                "long_theta" => spec.long_theta = parse_value(key, value)?,
                other => {
                    return Err(Error::Parse {
                        row: lineno + 1,
                        message: format!("unknown key '{other}'"),
                    })
                }
            }
        }
        spec.boundaries = PhaseBoundaries::new(spec.boundaries.pre_end, spec.boundaries.restriction_end)?;
        spec.validate()?;
        Ok(spec)
    }

    /// Serialize every field in the format read by [`BookingSimSpec::parse`].
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("start", self.start.to_string());
        kv("end", self.end.to_string());
        kv("pre_end", self.boundaries.pre_end.format("%Y-%m-%d").to_string());
        kv("restriction_end", self.boundaries.restriction_end.format("%Y-%m-%d").to_string());
        kv("intensity", self.intensity.to_string());
        kv("seed", self.seed.to_string());
        kv("threshold", self.threshold.to_string());
        kv("cap", self.cap.to_string());
        kv("short_mu", self.short_mu.to_string());
        kv("short_sigma", self.short_sigma.to_string());
        kv("short_phase", join(&self.short_phase));
        kv("short_month", join(&self.short_month));
        kv("long_logit_intercept", self.long_logit_intercept.to_string());
        kv("long_logit_phase", join(&self.long_logit_phase));
        kv("long_logit_month", join(&self.long_logit_month));
        kv("long_nb_intercept", self.long_nb_intercept.to_string());
        kv("long_nb_phase", join(&self.long_nb_phase));
        kv("long_nb_month", join(&self.long_nb_month));
        kv("long_theta", self.long_theta.to_string());
        s
    }

    /// Long-stay probability for a cell.
    pub fn prevalence(&self, phase: Phase, month: u32) -> f64 {
        let eta = self.long_logit_intercept
            + phase_offset(&self.long_logit_phase, phase)
            + self.long_logit_month[month as usize - 1];
        1.0 / (1.0 + (-eta).exp())
    }

    /// Expected length of a long stay for a cell.
    pub fn long_mean(&self, phase: Phase, month: u32) -> f64 {
        (self.long_nb_intercept + phase_offset(&self.long_nb_phase, phase) + self.long_nb_month[month as usize - 1])
            .exp()
    }

    fn short_log_mean(&self, phase: Phase, month: u32) -> f64 {
        self.short_mu + phase_offset(&self.short_phase, phase) + self.short_month[month as usize - 1]
    }
}

/// Log-normal with parameters `(mu, sigma)` truncated to `[lo, hi)` and
/// rounded, by inversion.
fn truncated_lognormal_rounded(u: f64, mu: f64, sigma: f64, lo: f64, hi: f64) -> u32 {
    let n = Normal::standard();
    let a = n.cdf((lo.ln() - mu) / sigma);
    let b = n.cdf((hi.ln() - mu) / sigma);
    let z = n.inverse_cdf(a + u * (b - a));
    let y = (mu + sigma * z).exp().clamp(lo, hi);
    (y.round() as u32).clamp(lo.ceil() as u32, (hi - 0.5).floor() as u32)
}

/// Draw one stay length for a booking in the given cell.
fn draw_stay(spec: &BookingSimSpec, s: &mut PhiloxStream, phase: Phase, month: u32) -> u32 {
    let thr = spec.threshold as f64;
    let nights = if s.uniform() < spec.prevalence(phase, month) {
        let excess = (spec.long_mean(phase, month) - thr).max(0.0);
        spec.threshold as u64 + s.negative_binomial(excess, spec.long_theta)
    } else {
        let u = s.uniform();
        truncated_lognormal_rounded(u, spec.short_log_mean(phase, month), spec.short_sigma, 0.5, thr - 0.5)
            as u64
    };
    nights.clamp(1, spec.cap as u64) as u32
}

/// Generate a collapsed booking table from the two-part process.
pub fn simulate_bookings(spec: &BookingSimSpec) -> Result<BookingTable> {
    spec.validate()?;
    let mut counts: BTreeMap<(NaiveDate, u32), u64> = BTreeMap::new();
    let first = spec.start.ordinal();
    for ord in first..=spec.end.ordinal() {
        let ym = YearMonth::from_ordinal(ord);
        let mut s = PhiloxStream::new(spec.seed, (ord - first) as u64);
        let days = ym.days() as u64;
        for _ in 0..spec.intensity {
            let date = ym.first_day() + Days::new(s.below(days));
            let phase = spec.boundaries.assign(date);
            let nights = draw_stay(spec, &mut s, phase, ym.month);
            *counts.entry((date, nights)).or_default() += 1;
        }
    }
    let opts = IngestOptions {
        cap: spec.cap,
        collapse: true,
        boundaries: spec.boundaries,
        source: format!("simulated(seed={})", spec.seed),
    };
    BookingTable::from_rows(
        counts.into_iter().map(|((date, nights), w)| (nights as i64, w, date)),
        &opts,
    )
}

/// Negative-binomial regression data on the standard phase/month design.
#[derive(Debug, Clone, PartialEq)]
pub struct NbRegressionSpec {
    /// Coefficients in the column order of the standard design.
    pub beta: [f64; DESIGN_COLUMNS],
    pub theta: f64,
    /// Total number of draws, spread evenly over the 36 cells.
    pub total: u64,
    pub seed: u64,
}

/// Draw NB responses for every `(phase, month)` cell and merge equal
/// responses within a cell into weighted rows.
pub fn simulate_nb_regression(spec: &NbRegressionSpec) -> Result<GlmData> {
    if !(spec.theta > 0.0) || spec.total == 0 {
        return Err(Error::InvalidInput("need theta > 0 and total ≥ 1".into()));
    }
    let cells: Vec<(Phase, u32)> = Phase::ALL
        .iter()
        .flat_map(|&p| (1..=12).map(move |m| (p, m)))
        .collect();
    let per = spec.total / cells.len() as u64;
    let extra = spec.total % cells.len() as u64;
    let mut keys = Vec::new();
    let (mut y, mut w) = (Vec::new(), Vec::new());
    for (c, &(phase, month)) in cells.iter().enumerate() {
        let row = design_row(phase, month);
        let mu = row.iter().zip(&spec.beta).map(|(a, b)| a * b).sum::<f64>().exp();
        let mut s = PhiloxStream::new(spec.seed, c as u64);
        let mut counts: BTreeMap<u64, u64> = BTreeMap::new();
        for _ in 0..per + u64::from((c as u64) < extra) {
            *counts.entry(s.negative_binomial(mu, spec.theta)).or_default() += 1;
        }
        for (k, n) in counts {
            keys.push((phase, month));
            y.push(k as f64);
            w.push(n as f64);
        }
    }
    Ok(GlmData { design: DesignMatrix::from_cells(&keys), y, w })
}

/// Parameters of a regression with (0,1,1)(0,1,1)₁₂ errors.
#[derive(Debug, Clone, PartialEq)]
pub struct SarimaSimSpec {
    pub ma1: f64,
    pub sma12: f64,
    pub beta_post: f64,
    pub beta_pre: f64,
    pub sigma2: f64,
    pub n: usize,
    pub start: YearMonth,
    pub boundaries: PhaseBoundaries,
    /// Initial level and seasonal pattern of the first 13 months.
    pub level: f64,
    pub seasonal: [f64; 12],
    pub seed: u64,
}

impl Default for SarimaSimSpec {
    fn default() -> Self {
        Self {
            ma1: -0.76,
            sma12: -0.9,
            beta_post: 0.062,
            beta_pre: -1.17,
            sigma2: 0.066,
            n: 288,
            start: YearMonth { year: 2000, month: 1 },
            boundaries: PhaseBoundaries::default(),
            level: 4.0,
            seasonal: [0.0; 12],
            seed: 1,
        }
    }
}

/// Simulate `y_t = level + seasonal + β·D_t + u_t`, where `u_t = 0` for the
/// first 13 months and `(1−B)(1−B¹²)u_t = (1+θB)(1+ΘB¹²)ε_t` afterwards.
/// The returned series carries the undifferenced phase dummies.
pub fn simulate_sarima(spec: &SarimaSimSpec) -> Result<MonthlySeries> {
    if !(spec.ma1.abs() < 1.0 && spec.sma12.abs() < 1.0) {
        return Err(Error::InvalidInput("simulation requires |θ| < 1 and |Θ| < 1".into()));
    }
    if !(spec.sigma2 >= 0.0) || spec.n < MIN_LENGTH {
        return Err(Error::InvalidInput(format!(
            "need sigma2 ≥ 0 and at least {MIN_LENGTH} months"
        )));
    }
    let n = spec.n;
    let mut s = PhiloxStream::new(spec.seed, 0);
    let sd = spec.sigma2.sqrt();
    let e: Vec<f64> = (0..n).map(|_| sd * s.standard_normal()).collect();
    let mut u = vec![0.0; n];
    for t in SEASON + 1..n {
        let w = e[t] + spec.ma1 * e[t - 1] + spec.sma12 * e[t - SEASON] + spec.ma1 * spec.sma12 * e[t - SEASON - 1];
        u[t] = u[t - 1] + u[t - SEASON] - u[t - SEASON - 1] + w;
    }
    let base = MonthlySeries::new(spec.start, vec![0.0; n])?.with_phase_dummies(&spec.boundaries)?;
    let values = base
        .months()
        .enumerate()
        .map(|(t, ym)| {
            spec.level
                + spec.seasonal[ym.month as usize - 1]
                + spec.beta_post * base.xreg[0][t]
                + spec.beta_pre * base.xreg[1][t]
                + u[t]
        })
        .collect();
    Ok(MonthlySeries { values, ..base })
}
