//! Booking-weighted moments and quantiles.
//!
//! Weights are frequency weights: a row with weight `w` stands for `w`
//! identical bookings. Variances use the population form `Σw(y−ȳ)²/Σw`, and
//! quantiles invert the right-continuous weighted ECDF from the left, so a
//! quantile is always one of the observed values.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{BookingRecord, BookingTable, Phase};
use crate::numeric::{compensated_sum, CompensatedSum};

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSample {
    values: Vec<f64>,
    weights: Vec<f64>,
}

impl WeightedSample {
    pub fn new(values: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if values.len() != weights.len() {
            return Err(Error::InvalidInput(format!(
                "{} values but {} weights",
                values.len(),
                weights.len()
            )));
        }
        if values.is_empty() {
            return Err(Error::InvalidInput("empty weighted sample".into()));
        }
        if let Some(w) = weights.iter().find(|w| !(**w > 0.0) || !w.is_finite()) {
            return Err(Error::InvalidInput(format!("weight {w} is not positive")));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite value in sample".into()));
        }
        Ok(Self { values, weights })
    }

    pub(crate) fn from_records<'a>(records: impl Iterator<Item = &'a BookingRecord>) -> Self {
        let (values, weights) = records.map(|r| (r.nights as f64, r.weight as f64)).unzip();
        Self { values, weights }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        compensated_sum(self.weights.iter().copied())
    }

    fn check(&self) -> Result<()> {
        if self.values.is_empty() {
            Err(Error::InvalidInput("empty weighted sample".into()))
        } else {
            Ok(())
        }
    }
}

pub fn weighted_mean(s: &WeightedSample) -> Result<f64> {
    s.check()?;
    let num = compensated_sum(s.values.iter().zip(&s.weights).map(|(y, w)| w * y));
    Ok(num / s.total_weight())
}

/// Population-form weighted variance.
pub fn weighted_variance(s: &WeightedSample) -> Result<f64> {
    let mean = weighted_mean(s)?;
    let mut acc = CompensatedSum::new();
    for (y, w) in s.values.iter().zip(&s.weights) {
        let d = y - mean;
        acc.add(w * d * d);
    }
    Ok(acc.value() / s.total_weight())
}

fn check_probability(p: f64) -> Result<()> {
    if p > 0.0 && p <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("probability {p} outside (0, 1]")))
    }
}

/// `inf{ y : F_w(y) ≥ p }`.
pub fn weighted_quantile(s: &WeightedSample, p: f64) -> Result<f64> {
    Ok(weighted_quantiles(s, &[p])?[0])
}

/// Several quantiles with a single sort.
pub fn weighted_quantiles(s: &WeightedSample, probs: &[f64]) -> Result<Vec<f64>> {
    s.check()?;
    for &p in probs {
        check_probability(p)?;
    }
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&a, &b| s.values[a].total_cmp(&s.values[b]));
    let total = s.total_weight();
    let mut cumulative = Vec::with_capacity(order.len());
    let mut acc = CompensatedSum::new();
    for &i in &order {
        acc.add(s.weights[i]);
        cumulative.push(acc.value());
    }
    Ok(probs
        .iter()
        .map(|&p| {
            let pos = cumulative.partition_point(|&c| c / total < p);
            s.values[order[pos.min(order.len() - 1)]]
        })
        .collect())
}

/// Weighted descriptives for one pandemic phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseDescriptives {
    pub phase: Phase,
    pub mean: f64,
    pub median: f64,
    pub p25: f64,
    pub p75: f64,
    pub sd: f64,
    pub total_weight: u64,
}

/// Per-phase descriptives in phase order; phases without records are omitted.
pub fn phase_descriptives(table: &BookingTable) -> Result<Vec<PhaseDescriptives>> {
    let mut out = Vec::new();
    for phase in Phase::ALL {
        let recs: Vec<&BookingRecord> = table.records().iter().filter(|r| r.phase == phase).collect();
        if recs.is_empty() {
            continue;
        }
        let sample = WeightedSample::from_records(recs.iter().copied());
        let q = weighted_quantiles(&sample, &[0.25, 0.5, 0.75])?;
        out.push(PhaseDescriptives {
            phase,
            mean: weighted_mean(&sample)?,
            median: q[1],
            p25: q[0],
            p75: q[2],
            sd: weighted_variance(&sample)?.sqrt(),
            total_weight: recs.iter().map(|r| r.weight).sum(),
        });
    }
    Ok(out)
}
