//! Batch pipeline behind the `staylength` command: configuration, stage
//! orchestration, report tables and the run summary.
//!
//! Every table goes to its own file in the output directory, as CSV or
//! JSON. The monthly series is always CSV because `fit-sarima` reads it
//! back. Output bytes depend only on the input and the configuration;
//! wall-clock timings are kept out of the files.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use chrono::NaiveDate;
use serde::Serialize;
use staylength::densfit::{self, FamilyKind};
use staylength::glm::{self, GlmFamily, GlmFit, GlmOptions};
use staylength::hurdle;
use staylength::ingest::{self, IngestOptions, MonthlyRow};
use staylength::sarima::{self, MonthlySeries, SarimaFit, SarimaOptions};
use staylength::{wstats, BookingTable, Phase, PhaseBoundaries};

/// Failure classes, mapped to process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    Usage,
    Data,
    Numerical,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Usage => 1,
            ErrorKind::Data => 2,
            ErrorKind::Numerical => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            kind: ErrorKind::Usage,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self {
            kind: ErrorKind::Data,
            message: message.into(),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<staylength::Error> for CliError {
    fn from(e: staylength::Error) -> Self {
        let kind = if e.is_numerical() {
            ErrorKind::Numerical
        } else {
            ErrorKind::Data
        };
        Self {
            kind,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::data(e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Analysis stages in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Descriptives,
    FitDist,
    FitNb,
    FitLogit,
    FitHurdle,
    FitSarima,
}

impl Stage {
    pub const ALL: [Stage; 6] = [
        Stage::Descriptives,
        Stage::FitDist,
        Stage::FitNb,
        Stage::FitLogit,
        Stage::FitHurdle,
        Stage::FitSarima,
    ];

    /// Stages run by `report` when none are selected.
    pub const REPORT: [Stage; 5] = [
        Stage::Descriptives,
        Stage::FitDist,
        Stage::FitNb,
        Stage::FitHurdle,
        Stage::FitSarima,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Descriptives => "descriptives",
            Stage::FitDist => "fit-dist",
            Stage::FitNb => "fit-nb",
            Stage::FitLogit => "fit-logit",
            Stage::FitHurdle => "fit-hurdle",
            Stage::FitSarima => "fit-sarima",
        }
    }
}

impl FromStr for Stage {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| CliError::usage(format!("unknown stage '{s}'")))
    }
}

/// Parse a comma-separated stage list.
pub fn parse_stages(s: &str) -> CliResult<Vec<Stage>> {
    let mut stages: Vec<Stage> = s
        .split(',')
        .map(|p| p.trim().parse())
        .collect::<CliResult<_>>()?;
    stages.sort();
    stages.dedup();
    Ok(stages)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(CliError::usage(format!("unknown format '{other}'"))),
        }
    }
}

/// Parse `pre_end=YYYY-MM-DD,restr_end=YYYY-MM-DD`; either key may be
/// omitted to keep its default.
pub fn parse_phases(s: &str) -> CliResult<PhaseBoundaries> {
    let mut b = PhaseBoundaries::default();
    for part in s.split(',') {
        let (key, value) = part.split_once('=').ok_or_else(|| {
            CliError::usage(format!("expected key=date in --phases, got '{part}'"))
        })?;
        let date = NaiveDate::parse_from_str(value.trim(), "%Y-%m-%d")
            .map_err(|e| CliError::usage(format!("--phases {key}: {e}")))?;
        match key.trim() {
            "pre_end" => b.pre_end = date,
            "restr_end" | "restriction_end" => b.restriction_end = date,
            other => return Err(CliError::usage(format!("unknown --phases key '{other}'"))),
        }
    }
    PhaseBoundaries::new(b.pre_end, b.restriction_end).map_err(|e| CliError::usage(e.to_string()))
}

/// What the input file holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InputKind {
    /// `nights,weight,created_date` booking rows.
    Bookings,
    /// `month,wmean,wsd,total_weight` series written by `descriptives`.
    Monthly,
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub input: PathBuf,
    pub input_kind: InputKind,
    pub out_dir: PathBuf,
    pub boundaries: PhaseBoundaries,
    pub cap: u32,
    pub threshold: u32,
    pub stages: Vec<Stage>,
    pub format: Format,
    pub collapse: bool,
    pub families: Vec<FamilyKind>,
    pub include_dummies: bool,
    pub include_drift: bool,
}

impl PipelineConfig {
    pub fn new(input: impl Into<PathBuf>, out_dir: impl Into<PathBuf>) -> Self {
        Self {
            input: input.into(),
            input_kind: InputKind::Bookings,
            out_dir: out_dir.into(),
            boundaries: PhaseBoundaries::default(),
            cap: 180,
            threshold: hurdle::DEFAULT_THRESHOLD,
            stages: Stage::REPORT.to_vec(),
            format: Format::Csv,
            collapse: true,
            families: FamilyKind::ALL.to_vec(),
            include_dummies: true,
            include_drift: false,
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.boundaries.pre_end >= self.boundaries.restriction_end {
            return Err(CliError::usage("phase boundaries must be strictly ordered"));
        }
        if self.threshold < 2 {
            return Err(CliError::usage("threshold must be at least 2"));
        }
        if self.cap < self.threshold {
            return Err(CliError::usage(format!(
                "cap {} is below the threshold {}",
                self.cap, self.threshold
            )));
        }
        if self.stages.is_empty() {
            return Err(CliError::usage("no stages selected"));
        }
        if self.families.is_empty() {
            return Err(CliError::usage("no density families selected"));
        }
        if self.input_kind == InputKind::Monthly && self.stages != [Stage::FitSarima] {
            return Err(CliError::usage(
                "a monthly series input only supports fit-sarima",
            ));
        }
        if !self.input.is_file() {
            return Err(CliError::data(format!(
                "input '{}' is not a readable file",
                self.input.display()
            )));
        }
        Ok(())
    }
}

/// A value in an output table.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Text(String),
    Int(i64),
    Float(f64),
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Text(v.to_string())
    }
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Text(s) => s.clone(),
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => v.to_string(),
        }
    }

    fn json(&self) -> serde_json::Value {
        match self {
            Cell::Text(s) => serde_json::Value::String(s.clone()),
            Cell::Int(v) => serde_json::Value::from(*v),
            Cell::Float(v) => serde_json::Number::from_f64(*v)
                .map(serde_json::Value::Number)
                .unwrap_or(serde_json::Value::Null),
        }
    }
}

/// A named rectangular report table.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: &'static str,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &'static str, header: &[&'static str]) -> Self {
        Self {
            name,
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    /// Write to `dir` and return the file name.
    pub fn write(&self, dir: &Path, format: Format) -> CliResult<String> {
        let file = match format {
            Format::Csv => format!("{}.csv", self.name),
            Format::Json => format!("{}.json", self.name),
        };
        let mut out = BufWriter::new(File::create(dir.join(&file))?);
        match format {
            Format::Csv => {
                writeln!(out, "{}", self.header.join(","))?;
                for row in &self.rows {
                    let fields: Vec<String> = row.iter().map(Cell::csv).collect();
                    writeln!(out, "{}", fields.join(","))?;
                }
            }
            Format::Json => {
                let rows: Vec<serde_json::Value> = self
                    .rows
                    .iter()
                    .map(|row| {
                        let map = self
                            .header
                            .iter()
                            .zip(row)
                            .map(|(h, c)| (h.to_string(), c.json()))
                            .collect::<serde_json::Map<_, _>>();
                        serde_json::Value::Object(map)
                    })
                    .collect();
                serde_json::to_writer_pretty(&mut out, &rows)
                    .map_err(|e| CliError::data(e.to_string()))?;
                writeln!(out)?;
            }
        }
        out.flush()?;
        Ok(file)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StageStatus {
    Ok,
    Failed,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageReport {
    pub stage: Stage,
    pub status: StageStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error_kind: Option<ErrorKind>,
    pub outputs: Vec<String>,
}

/// Summary of one run. Timings are excluded from serialization so the JSON
/// summary is reproducible.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub input: String,
    pub provenance: Option<ingest::Provenance>,
    pub stages: Vec<StageReport>,
    /// Every file written, in the order written.
    pub outputs: Vec<String>,
    /// Headline scalars such as fitted dispersion and log-likelihoods.
    pub summary: BTreeMap<String, f64>,
    pub warnings: Vec<String>,
    #[serde(skip)]
    pub timings: Vec<(Stage, f64)>,
}

impl RunReport {
    /// Most severe failure class across stages, if any.
    pub fn failure(&self) -> Option<ErrorKind> {
        self.stages
            .iter()
            .filter_map(|s| s.error_kind)
            .max_by_key(|k| k.exit_code())
    }

    pub fn exit_code(&self) -> i32 {
        self.failure().map_or(0, ErrorKind::exit_code)
    }

    pub fn succeeded(&self) -> bool {
        self.stages.iter().all(|s| s.status == StageStatus::Ok)
    }
}

/// Results of one stage: tables to write plus summary values and warnings.
#[derive(Default)]
struct StageOutput {
    tables: Vec<(Table, Format)>,
    summary: Vec<(String, f64)>,
    warnings: Vec<String>,
}

fn ratio_table(name: &'static str, ratio: &'static str, fit: &GlmFit) -> Table {
    let mut t = Table::new(name, &["label", ratio, "ci_low", "ci_high"]);
    for r in glm::rate_ratios(fit) {
        t.push(vec![
            r.label.into(),
            r.ratio.into(),
            r.ci_low.into(),
            r.ci_high.into(),
        ]);
    }
    t
}

fn glm_warnings(what: &str, fit: &GlmFit, out: &mut StageOutput) {
    if !fit.converged {
        out.warnings.push(format!(
            "{what}: fit did not converge (possible separation)"
        ));
    }
}

fn stage_descriptives(table: &BookingTable, cfg: &PipelineConfig) -> CliResult<StageOutput> {
    let mut out = StageOutput::default();
    let mut t = Table::new(
        "descriptives",
        &[
            "phase",
            "mean",
            "median",
            "p25",
            "p75",
            "sd",
            "total_weight",
        ],
    );
    for d in wstats::phase_descriptives(table)? {
        t.push(vec![
            d.phase.label().into(),
            d.mean.into(),
            d.median.into(),
            d.p25.into(),
            d.p75.into(),
            d.sd.into(),
            d.total_weight.into(),
        ]);
    }
    out.tables.push((t, cfg.format));
    let mut monthly = Table::new("monthly", &["month", "wmean", "wsd", "total_weight"]);
    for p in ingest::monthly_aggregate(table)? {
        monthly.push(vec![
            p.month.to_string().into(),
            Cell::Text(format!("{:.12}", p.wmean)),
            Cell::Text(format!("{:.12}", p.wsd)),
            p.total_weight.into(),
        ]);
    }
    out.tables.push((monthly, Format::Csv));
    Ok(out)
}

fn stage_densities(table: &BookingTable, cfg: &PipelineConfig) -> CliResult<StageOutput> {
    let mut out = StageOutput::default();
    let fits = cfg
        .families
        .iter()
        .map(|&k| densfit::fit_weighted(k, table))
        .collect::<staylength::Result<Vec<_>>>()?;
    let mut t = Table::new(
        "density_fits",
        &[
            "rank",
            "family",
            "k",
            "loglik",
            "aic",
            "bic",
            "delta_aic",
            "param1",
            "param2",
            "converged",
        ],
    );
    let mut order: Vec<usize> = (0..fits.len()).collect();
    order.sort_by(|&a, &b| {
        fits[a]
            .aic
            .total_cmp(&fits[b].aic)
            .then(fits[a].bic.total_cmp(&fits[b].bic))
    });
    let best = fits[order[0]].aic;
    for (rank, &i) in order.iter().enumerate() {
        let f = &fits[i];
        let [p1, p2] = f.family.params();
        t.push(vec![
            (rank + 1).into(),
            f.family.kind().name().into(),
            densfit::FAMILY_PARAMS.into(),
            f.loglik.into(),
            f.aic.into(),
            f.bic.into(),
            (f.aic - best).into(),
            p1.into(),
            p2.into(),
            f.converged.into(),
        ]);
        if !f.converged {
            out.warnings.push(format!(
                "fit-dist: {} fit did not converge",
                f.family.kind()
            ));
        }
        out.summary
            .push((format!("fit-dist.{}.aic", f.family.kind()), f.aic));
    }
    out.tables.push((t, cfg.format));
    let mut overlay = Table::new("density_overlay", &["family", "y", "ecdf", "fitted_cdf"]);
    for f in &fits {
        for p in densfit::overlay_points(f, table)? {
            overlay.push(vec![
                f.family.kind().name().into(),
                p.y.into(),
                p.ecdf.into(),
                p.fitted_cdf.into(),
            ]);
        }
    }
    out.tables.push((overlay, cfg.format));
    Ok(out)
}

fn stage_nb(table: &BookingTable, cfg: &PipelineConfig) -> CliResult<StageOutput> {
    let mut out = StageOutput::default();
    let fit = glm::fit_nb_table(table, &GlmOptions::default())?;
    glm_warnings("fit-nb", &fit, &mut out);
    out.tables
        .push((ratio_table("nb_irr", "irr", &fit), cfg.format));
    let mut overlay = Table::new("nb_overlay", &["month", "observed", "predicted"]);
    for m in glm::predict_monthly_mean(&fit, table)? {
        overlay.push(vec![
            m.month.to_string().into(),
            m.observed.into(),
            m.predicted.into(),
        ]);
    }
    out.tables.push((overlay, cfg.format));
    out.summary
        .push(("fit-nb.theta".into(), fit.theta.unwrap_or(f64::NAN)));
    out.summary.push(("fit-nb.loglik".into(), fit.loglik));
    Ok(out)
}

fn stage_logit(table: &BookingTable, cfg: &PipelineConfig) -> CliResult<StageOutput> {
    let mut out = StageOutput::default();
    let thr = cfg.threshold;
    let data = glm::cell_data(table.records(), |r| f64::from(u8::from(r.nights >= thr)));
    let fit = glm::fit_data(&data, GlmFamily::Logistic, &GlmOptions::default())?;
    glm_warnings("fit-logit", &fit, &mut out);
    out.tables
        .push((ratio_table("logit_or", "or", &fit), cfg.format));
    out.summary.push(("fit-logit.loglik".into(), fit.loglik));
    Ok(out)
}

fn stage_hurdle(table: &BookingTable, cfg: &PipelineConfig) -> CliResult<StageOutput> {
    let mut out = StageOutput::default();
    let fit = hurdle::fit_hurdle(table, cfg.threshold, &GlmOptions::default())?;
    glm_warnings("fit-hurdle logistic part", &fit.logit_part, &mut out);
    glm_warnings("fit-hurdle NB part", &fit.nb_part, &mut out);
    out.tables.push((
        ratio_table("hurdle_logit_or", "or", &fit.logit_part),
        cfg.format,
    ));
    out.tables.push((
        ratio_table("hurdle_nb_irr", "irr", &fit.nb_part),
        cfg.format,
    ));
    let present: Vec<Phase> = Phase::ALL
        .into_iter()
        .filter(|&p| table.records().iter().any(|r| r.phase == p))
        .collect();
    let reference = if present.contains(&Phase::PreCovid) {
        Phase::PreCovid
    } else {
        present[0]
    };
    if reference != Phase::PreCovid {
        out.warnings.push(format!(
            "fit-hurdle: no Pre-COVID bookings; impact excess is relative to {reference}"
        ));
    }
    let mut t = Table::new(
        "hurdle_impact",
        &[
            "phase",
            "prevalence",
            "conditional_mean",
            "contribution",
            "excess_vs_pre",
        ],
    );
    for r in hurdle::combined_impact(&fit, reference)? {
        t.push(vec![
            r.phase.label().into(),
            r.prevalence.into(),
            r.conditional_mean.into(),
            r.contribution.into(),
            r.excess_vs_pre.into(),
        ]);
    }
    out.tables.push((t, cfg.format));
    Ok(out)
}

/// Phase dummies whose doubly differenced column is identically zero carry
/// no information and are dropped with a warning.
fn series_with_dummies(
    rows: &[MonthlyRow],
    cfg: &PipelineConfig,
    warnings: &mut Vec<String>,
) -> CliResult<MonthlySeries> {
    let plain = MonthlySeries::from_monthly_rows(rows)?;
    let full = plain.clone().with_phase_dummies(&cfg.boundaries)?;
    let mut kept = plain;
    for (label, col) in full.xreg_labels.iter().zip(&full.xreg) {
        let informative = col.len() > sarima::SEASON + 1
            && sarima::difference(col, 1, 1, sarima::SEASON)?
                .iter()
                .any(|v| *v != 0.0);
        if informative {
            kept = kept.with_xreg(label, col.clone())?;
        } else {
            warnings.push(format!(
                "fit-sarima: dropped '{label}', which is constant after differencing"
            ));
        }
    }
    Ok(kept)
}

fn sarima_row(t: &mut Table, model: &str, fit: &SarimaFit) {
    t.push(vec![
        model.into(),
        fit.loglik.into(),
        fit.k.into(),
        fit.n.into(),
        fit.aic.into(),
        fit.aicc.into(),
        fit.bic.into(),
    ]);
}

fn stage_sarima(rows: &[MonthlyRow], cfg: &PipelineConfig) -> CliResult<StageOutput> {
    let mut out = StageOutput::default();
    let series = series_with_dummies(rows, cfg, &mut out.warnings)?;
    let drift = cfg.include_drift;
    let null = sarima::fit_sarima(
        &series,
        &SarimaOptions {
            include_xreg: false,
            include_drift: drift,
        },
    )?;
    let full = if cfg.include_dummies && !series.xreg.is_empty() {
        Some(sarima::fit_sarima(
            &series,
            &SarimaOptions {
                include_xreg: true,
                include_drift: drift,
            },
        )?)
    } else {
        None
    };
    let primary = full.as_ref().unwrap_or(&null);
    out.warnings
        .extend(primary.warnings.iter().map(|w| format!("fit-sarima: {w}")));

    let mut coef = Table::new("sarima_coef", &["parameter", "estimate", "se"]);
    for (name, est, se) in primary.coefficient_rows() {
        coef.push(vec![name.into(), est.into(), se.into()]);
    }
    coef.push(vec![
        "sigma2".into(),
        primary.sigma2.into(),
        primary.sigma2_se.into(),
    ]);
    out.tables.push((coef, cfg.format));

    let mut sel = Table::new(
        "sarima_selection",
        &["model", "loglik", "k", "n", "aic", "aicc", "bic"],
    );
    if let Some(f) = &full {
        sarima_row(&mut sel, "full", f);
    }
    sarima_row(&mut sel, "null", &null);
    out.tables.push((sel, cfg.format));
    if let Some(f) = &full {
        let lr = sarima::lr_test(f, &null)?;
        let mut t = Table::new("sarima_lr", &["statistic", "dof", "p_value"]);
        t.push(vec![lr.statistic.into(), lr.dof.into(), lr.p_value.into()]);
        out.tables.push((t, cfg.format));
        out.summary
            .push(("fit-sarima.full.loglik".into(), f.loglik));
    }
    out.summary
        .push(("fit-sarima.null.loglik".into(), null.loglik));

    let mut resid = Table::new("sarima_residuals", &["month", "residual"]);
    let months: Vec<_> = series.months().skip(sarima::SEASON + 1).collect();
    for (m, r) in months.iter().zip(&primary.residuals) {
        resid.push(vec![m.to_string().into(), (*r).into()]);
    }
    out.tables.push((resid, cfg.format));

    let diag = sarima::residual_diagnostics(primary)?;
    let mut acf = Table::new("sarima_acf", &["lag", "acf", "lower", "upper"]);
    for (i, a) in diag.acf.iter().enumerate() {
        acf.push(vec![
            (i + 1).into(),
            (*a).into(),
            (-diag.acf_bound).into(),
            diag.acf_bound.into(),
        ]);
    }
    out.tables.push((acf, cfg.format));
    let mut lb = Table::new("sarima_ljung_box", &["lag", "statistic", "dof", "p_value"]);
    for (lag, t) in &diag.ljung_box {
        lb.push(vec![
            (*lag).into(),
            t.statistic.into(),
            t.dof.into(),
            t.p_value.into(),
        ]);
    }
    out.tables.push((lb, cfg.format));
    let mut hist = Table::new("sarima_histogram", &["low", "high", "count"]);
    for b in &diag.histogram {
        hist.push(vec![b.low.into(), b.high.into(), b.count.into()]);
    }
    out.tables.push((hist, cfg.format));
    Ok(out)
}

fn load_table(cfg: &PipelineConfig) -> CliResult<BookingTable> {
    let opts = IngestOptions {
        cap: cfg.cap,
        collapse: cfg.collapse,
        boundaries: cfg.boundaries,
        source: cfg.input.display().to_string(),
    };
    Ok(ingest::load_bookings(File::open(&cfg.input)?, &opts)?)
}

fn monthly_rows(table: &BookingTable) -> CliResult<Vec<MonthlyRow>> {
    Ok(ingest::monthly_aggregate(table)?
        .into_iter()
        .map(|p| MonthlyRow {
            month: p.month,
            wmean: p.wmean,
            wsd: p.wsd,
            total_weight: p.total_weight,
        })
        .collect())
}

/// Guess the input kind from the header line: a file starting with a
/// `month` column is a monthly series, anything else is booking rows.
pub fn detect_input_kind(path: &Path) -> CliResult<InputKind> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::data(format!("cannot read '{}': {e}", path.display())))?;
    let header = text.lines().next().unwrap_or("");
    Ok(
        if header
            .trim_start_matches('\u{feff}')
            .split(',')
            .next()
            .map(str::trim)
            == Some("month")
        {
            InputKind::Monthly
        } else {
            InputKind::Bookings
        },
    )
}

/// Validate the configuration, then run the selected stages in order.
///
/// Stages run in a fixed order; after a failure the remaining stages are
/// marked as skipped. A configuration error returns `Err` before anything is written. Stage
/// failures are recorded in the report; a failed ingest marks every stage
/// as skipped.
pub fn run_pipeline(cfg: &PipelineConfig) -> CliResult<RunReport> {
    cfg.validate()?;
    fs::create_dir_all(&cfg.out_dir)
        .map_err(|e| CliError::usage(format!("cannot create '{}': {e}", cfg.out_dir.display())))?;

    let mut report = RunReport {
        input: cfg.input.display().to_string(),
        provenance: None,
        stages: Vec::new(),
        outputs: Vec::new(),
        summary: BTreeMap::new(),
        warnings: Vec::new(),
        timings: Vec::new(),
    };
    let mut stages = cfg.stages.clone();
    stages.sort();
    stages.dedup();

    let loaded: CliResult<(Option<BookingTable>, Vec<MonthlyRow>)> = match cfg.input_kind {
        InputKind::Monthly => File::open(&cfg.input)
            .map_err(CliError::from)
            .and_then(|f| Ok((None, ingest::read_monthly_csv(f)?))),
        InputKind::Bookings => load_table(cfg).and_then(|t| {
            let rows = if stages.contains(&Stage::FitSarima) {
                monthly_rows(&t)?
            } else {
                Vec::new()
            };
            Ok((Some(t), rows))
        }),
    };
    let (table, rows) = match loaded {
        Ok(v) => v,
        Err(e) => {
            for &stage in &stages {
                report.stages.push(StageReport {
                    stage,
                    status: StageStatus::Skipped,
                    error: Some(format!("input could not be loaded: {e}")),
                    error_kind: Some(e.kind),
                    outputs: Vec::new(),
                });
            }
            return Ok(report);
        }
    };
    report.provenance = table.as_ref().map(|t| t.provenance().clone());

    let mut halted: Option<Stage> = None;
    for stage in stages {
        if let Some(upstream) = halted {
            report.stages.push(StageReport {
                stage,
                status: StageStatus::Skipped,
                error: Some(format!("not run because {} failed", upstream.name())),
                error_kind: None,
                outputs: Vec::new(),
            });
            continue;
        }
        let started = Instant::now();
        let result = match (stage, &table) {
            (Stage::FitSarima, _) => stage_sarima(&rows, cfg),
            (_, None) => Err(CliError::usage("stage needs booking input")),
            (Stage::Descriptives, Some(t)) => stage_descriptives(t, cfg),
            (Stage::FitDist, Some(t)) => stage_densities(t, cfg),
            (Stage::FitNb, Some(t)) => stage_nb(t, cfg),
            (Stage::FitLogit, Some(t)) => stage_logit(t, cfg),
            (Stage::FitHurdle, Some(t)) => stage_hurdle(t, cfg),
        };
        let entry = match result.and_then(|out| {
            let files = out
                .tables
                .iter()
                .map(|(t, f)| t.write(&cfg.out_dir, *f))
                .collect::<CliResult<Vec<_>>>()?;
            Ok((out, files))
        }) {
            Ok((out, files)) => {
                report.summary.extend(out.summary);
                report.warnings.extend(out.warnings);
                report.outputs.extend(files.iter().cloned());
                StageReport {
                    stage,
                    status: StageStatus::Ok,
                    error: None,
                    error_kind: None,
                    outputs: files,
                }
            }
            Err(e) => {
                halted = Some(stage);
                StageReport {
                    stage,
                    status: StageStatus::Failed,
                    error: Some(e.message),
                    error_kind: Some(e.kind),
                    outputs: Vec::new(),
                }
            }
        };
        report.stages.push(entry);
        report
            .timings
            .push((stage, started.elapsed().as_secs_f64()));
    }
    Ok(report)
}

/// Outcome of `simulate`.
#[derive(Debug, Clone, Serialize)]
pub struct SimulateReport {
    pub output: String,
    pub rows: usize,
    pub total_weight: u64,
    pub seed: u64,
}

/// Draw a synthetic booking file. Without a spec file the default
/// generator settings are used; `seed` overrides the spec's seed.
pub fn run_simulate(
    spec: Option<&Path>,
    out: &Path,
    seed: Option<u64>,
) -> CliResult<SimulateReport> {
    let mut sim = match spec {
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| CliError::usage(format!("cannot read spec '{}': {e}", p.display())))?;
            staylength::simgen::BookingSimSpec::parse(&text)
                .map_err(|e| CliError::usage(e.to_string()))?
        }
        None => staylength::simgen::BookingSimSpec::default(),
    };
    if let Some(s) = seed {
        sim.seed = s;
    }
    sim.validate().map_err(|e| CliError::usage(e.to_string()))?;
    let table = staylength::simgen::simulate_bookings(&sim)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut w = BufWriter::new(File::create(out)?);
    table.write_csv(&mut w)?;
    w.flush()?;
    Ok(SimulateReport {
        output: out.display().to_string(),
        rows: table.len(),
        total_weight: table.total_weight(),
        seed: sim.seed,
    })
}
