//! Booking-record ingestion: parsing, stay-length filtering, collapsing of
//! identical reservations and phase labelling.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::wstats::{self, WeightedSample};

/// Default upper bound on retained stay lengths (inclusive).
pub const DEFAULT_STAY_CAP: u32 = 180;

/// Pandemic phase of a booking's creation date. `Restriction` is the
/// regression baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Phase {
    PreCovid,
    Restriction,
    PostVaccine,
}

impl Phase {
    pub const ALL: [Phase; 3] = [Phase::PreCovid, Phase::Restriction, Phase::PostVaccine];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        match self {
            Phase::PreCovid => "pre_covid",
            Phase::Restriction => "restriction",
            Phase::PostVaccine => "post_vaccine",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Phase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pre_covid" | "pre" => Ok(Phase::PreCovid),
            "restriction" | "restr" => Ok(Phase::Restriction),
            "post_vaccine" | "post" => Ok(Phase::PostVaccine),
            other => Err(Error::InvalidInput(format!("unknown phase '{other}'"))),
        }
    }
}

/// Last calendar day of the pre-COVID and restriction phases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseBoundaries {
    pub pre_end: NaiveDate,
    pub restriction_end: NaiveDate,
}

impl Default for PhaseBoundaries {
    fn default() -> Self {
        Self {
            pre_end: NaiveDate::from_ymd_opt(2020, 3, 14).unwrap(),
            restriction_end: NaiveDate::from_ymd_opt(2021, 6, 14).unwrap(),
        }
    }
}

impl PhaseBoundaries {
    pub fn new(pre_end: NaiveDate, restriction_end: NaiveDate) -> Result<Self> {
        if pre_end >= restriction_end {
            return Err(Error::InvalidInput(format!(
                "phase boundaries must be strictly ordered: {pre_end} >= {restriction_end}"
            )));
        }
        Ok(Self { pre_end, restriction_end })
    }

    pub fn assign(&self, date: NaiveDate) -> Phase {
        if date <= self.pre_end {
            Phase::PreCovid
        } else if date <= self.restriction_end {
            Phase::Restriction
        } else {
            Phase::PostVaccine
        }
    }

    /// Phase used for a whole calendar month: the phase of its 15th day,
    /// which is the phase covering the majority of days for the default
    /// boundaries.
    pub fn assign_month(&self, month: YearMonth) -> Phase {
        self.assign(month.mid_month())
    }
}

/// Phase of a creation date under the default boundaries.
pub fn assign_phase(date: NaiveDate) -> Phase {
    PhaseBoundaries::default().assign(date)
}

/// A calendar year-month, ordered chronologically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct YearMonth {
    pub year: i32,
    pub month: u32,
}

impl YearMonth {
    pub fn new(year: i32, month: u32) -> Result<Self> {
        if !(1..=12).contains(&month) {
            return Err(Error::InvalidInput(format!("month {month} out of range")));
        }
        Ok(Self { year, month })
    }

    pub fn of(date: NaiveDate) -> Self {
        Self {
            year: date.year(),
            month: date.month(),
        }
    }

    /// Months since year 0, January.
    pub fn ordinal(self) -> i64 {
        self.year as i64 * 12 + (self.month as i64 - 1)
    }

    pub fn from_ordinal(ordinal: i64) -> Self {
        Self {
            year: ordinal.div_euclid(12) as i32,
            month: ordinal.rem_euclid(12) as u32 + 1,
        }
    }

    pub fn succ(self) -> Self {
        Self::from_ordinal(self.ordinal() + 1)
    }

    pub fn first_day(self) -> NaiveDate {
        NaiveDate::from_ymd_opt(self.year, self.month, 1).unwrap()
    }

    pub fn mid_month(self) -> NaiveDate {
        NaiveDate::from_ymd_opt(self.year, self.month, 15).unwrap()
    }

    pub fn days(self) -> u32 {
        let next = self.succ().first_day();
        (next - self.first_day()).num_days() as u32
    }
}

impl fmt::Display for YearMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for YearMonth {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidInput(format!("expected YYYY-MM, got '{s}'"));
        let (y, m) = s.trim().split_once('-').ok_or_else(bad)?;
        let year = y.parse().map_err(|_| bad())?;
        let month = m.parse().map_err(|_| bad())?;
        YearMonth::new(year, month)
    }
}

/// One collapsed reservation row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BookingRecord {
    pub nights: u32,
    pub weight: u64,
    pub created: NaiveDate,
    pub phase: Phase,
    pub month: u32,
}

impl BookingRecord {
    pub fn new(nights: u32, weight: u64, created: NaiveDate, boundaries: &PhaseBoundaries) -> Self {
        Self {
            nights,
            weight,
            created,
            phase: boundaries.assign(created),
            month: created.month(),
        }
    }

    pub fn year_month(&self) -> YearMonth {
        YearMonth::of(self.created)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: String,
    pub rows_read: u64,
    pub rows_dropped: u64,
    pub weight_read: u64,
    pub weight_dropped: u64,
}

impl Provenance {
    /// Key-value sidecar text.
    pub fn to_sidecar(&self) -> String {
        format!(
            "source={}\nrows_read={}\nrows_dropped={}\nweight_read={}\nweight_dropped={}\n",
            self.source, self.rows_read, self.rows_dropped, self.weight_read, self.weight_dropped
        )
    }
}

#[derive(Debug, Clone)]
pub struct IngestOptions {
    pub cap: u32,
    pub collapse: bool,
    pub boundaries: PhaseBoundaries,
    pub source: String,
}

impl Default for IngestOptions {
    fn default() -> Self {
        Self {
            cap: DEFAULT_STAY_CAP,
            collapse: true,
            boundaries: PhaseBoundaries::default(),
            source: String::from("<stream>"),
        }
    }
}

/// Immutable, validated collection of booking records.
#[derive(Debug, Clone, PartialEq)]
pub struct BookingTable {
    records: Vec<BookingRecord>,
    provenance: Provenance,
    boundaries: PhaseBoundaries,
}

impl BookingTable {
    /// Build a table from raw `(nights, weight, created)` triples, applying the
    /// same filtering and collapsing rules as [`load_bookings`].
    pub fn from_rows(
        rows: impl IntoIterator<Item = (i64, u64, NaiveDate)>,
        opts: &IngestOptions,
    ) -> Result<Self> {
        let mut provenance = Provenance {
            source: opts.source.clone(),
            ..Default::default()
        };
        let mut kept = Vec::new();
        for (nights, weight, created) in rows {
            if weight == 0 {
                return Err(Error::InvalidInput(format!(
                    "zero weight for booking created {created}"
                )));
            }
            provenance.rows_read += 1;
            provenance.weight_read += weight;
            if nights < 1 || nights > opts.cap as i64 {
                provenance.rows_dropped += 1;
                provenance.weight_dropped += weight;
                continue;
            }
            kept.push(BookingRecord::new(nights as u32, weight, created, &opts.boundaries));
        }
        if kept.is_empty() {
            return Err(Error::EmptyTable);
        }
        let records = if opts.collapse { collapse(kept) } else { kept };
        Ok(Self {
            records,
            provenance,
            boundaries: opts.boundaries,
        })
    }

    pub fn records(&self) -> &[BookingRecord] {
        &self.records
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn boundaries(&self) -> &PhaseBoundaries {
        &self.boundaries
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn total_weight(&self) -> u64 {
        self.records.iter().map(|r| r.weight).sum()
    }

    /// Nights and weights as a weighted sample.
    pub fn sample(&self) -> WeightedSample {
        WeightedSample::from_records(self.records.iter())
    }

    /// Serialize in the input format (`nights,weight,created_date`).
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "nights,weight,created_date")?;
        for r in &self.records {
            writeln!(out, "{},{},{}", r.nights, r.weight, r.created.format("%Y-%m-%d"))?;
        }
        Ok(())
    }

    /// Sub-table with the records selected by `keep`; provenance is copied.
    pub fn filter(&self, keep: impl Fn(&BookingRecord) -> bool) -> Option<Self> {
        let records: Vec<_> = self.records.iter().filter(|r| keep(r)).cloned().collect();
        if records.is_empty() {
            return None;
        }
        Some(Self {
            records,
            provenance: self.provenance.clone(),
            boundaries: self.boundaries,
        })
    }
}

fn collapse(records: Vec<BookingRecord>) -> Vec<BookingRecord> {
    let mut merged: BTreeMap<(NaiveDate, u32), BookingRecord> = BTreeMap::new();
    for r in records {
        merged
            .entry((r.created, r.nights))
            .and_modify(|m| m.weight += r.weight)
            .or_insert(r);
    }
    merged.into_values().collect()
}

/// Parse a `nights,weight,created_date` table, drop stays outside
/// `[1, cap]`, assign phases and (optionally) merge rows sharing
/// `(nights, created)`.
pub fn load_bookings<R: Read>(source: R, opts: &IngestOptions) -> Result<BookingTable> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let headers = reader.headers().map_err(|e| Error::Parse {
        row: 1,
        message: e.to_string(),
    })?;
    let expected = ["nights", "weight", "created_date"];
    if headers.len() != 3 || headers.iter().zip(expected).any(|(h, e)| h != e) {
        return Err(Error::Parse {
            row: 1,
            message: format!("header must be nights,weight,created_date, got {headers:?}"),
        });
    }

    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| Error::Parse {
            row,
            message: e.to_string(),
        })?;
        if rec.len() != 3 {
            return Err(Error::Parse {
                row,
                message: format!("expected 3 fields, found {}", rec.len()),
            });
        }
        let nights: i64 = rec[0].parse().map_err(|_| Error::Parse {
            row,
            message: format!("nights '{}' is not an integer", &rec[0]),
        })?;
        let weight: u64 = rec[1].parse().map_err(|_| Error::Parse {
            row,
            message: format!("weight '{}' is not a positive integer", &rec[1]),
        })?;
        if weight == 0 {
            return Err(Error::Parse {
                row,
                message: "weight must be at least 1".into(),
            });
        }
        let created = NaiveDate::parse_from_str(&rec[2], "%Y-%m-%d").map_err(|e| Error::Parse {
            row,
            message: format!("created_date '{}': {e}", &rec[2]),
        })?;
        rows.push((nights, weight, created));
    }
    BookingTable::from_rows(rows, opts)
}

/// Booking-weighted moments for one calendar month.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonthlyPoint {
    pub month: YearMonth,
    pub wmean: f64,
    pub wsd: f64,
    pub total_weight: u64,
    /// Weight share per phase, indexed by [`Phase::index`].
    pub phase_share: [f64; 3],
}

/// One point per distinct year-month, in chronological order.
pub fn monthly_aggregate(table: &BookingTable) -> Result<Vec<MonthlyPoint>> {
    if table.is_empty() {
        return Err(Error::EmptyTable);
    }
    let mut groups: BTreeMap<YearMonth, Vec<&BookingRecord>> = BTreeMap::new();
    for r in table.records() {
        groups.entry(r.year_month()).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|(month, recs)| {
            let sample = WeightedSample::from_records(recs.iter().copied());
            let total_weight: u64 = recs.iter().map(|r| r.weight).sum();
            let mut phase_share = [0.0; 3];
            for r in &recs {
                phase_share[r.phase.index()] += r.weight as f64;
            }
            phase_share.iter_mut().for_each(|s| *s /= total_weight as f64);
            Ok(MonthlyPoint {
                month,
                wmean: wstats::weighted_mean(&sample)?,
                wsd: wstats::weighted_variance(&sample)?.sqrt(),
                total_weight,
                phase_share,
            })
        })
        .collect()
}

/// Write the `month,wmean,wsd,total_weight` series.
pub fn write_monthly_csv<W: Write>(points: &[MonthlyPoint], mut out: W) -> Result<()> {
    writeln!(out, "month,wmean,wsd,total_weight")?;
    for p in points {
        writeln!(out, "{},{:.12},{:.12},{}", p.month, p.wmean, p.wsd, p.total_weight)?;
    }
    Ok(())
}

/// A monthly row read back from a `month,wmean,wsd,total_weight` file.
#[derive(Debug, Clone, PartialEq)]
pub struct MonthlyRow {
    pub month: YearMonth,
    pub wmean: f64,
    pub wsd: f64,
    pub total_weight: u64,
}

pub fn read_monthly_csv<R: Read>(source: R) -> Result<Vec<MonthlyRow>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| Error::Parse {
            row,
            message: e.to_string(),
        })?;
        let field = |j: usize| -> Result<&str> {
            rec.get(j).ok_or_else(|| Error::Parse {
                row,
                message: format!("missing column {}", j + 1),
            })
        };
        let parse_err = |what: &str| Error::Parse {
            row,
            message: format!("bad {what}"),
        };
        rows.push(MonthlyRow {
            month: field(0)?.parse().map_err(|_| parse_err("month"))?,
            wmean: field(1)?.parse().map_err(|_| parse_err("wmean"))?,
            wsd: field(2)?.parse().map_err(|_| parse_err("wsd"))?,
            total_weight: field(3)?.parse().map_err(|_| parse_err("total_weight"))?,
        });
    }
    if rows.is_empty() {
        return Err(Error::EmptyTable);
    }
    Ok(rows)
}
