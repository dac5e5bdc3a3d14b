//! Two-part long-stay model: a weighted logistic regression for
//! `Pr(y ≥ threshold)` and a weighted negative-binomial regression for
//! `E[y | y ≥ threshold]`, both on the standard phase/month design, plus the
//! decomposition of the mean into long-stay prevalence times conditional
//! length.
//!
//! The second part is an ordinary NB fitted to the long-stay subset; the
//! likelihood carries no truncation correction.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::glm::{self, GlmFamily, GlmFit, GlmOptions};
use crate::ingest::{BookingTable, Phase};
use crate::numeric::CompensatedSum;

/// Stays of at least this many nights count as long.
pub const DEFAULT_THRESHOLD: u32 = 28;

/// Fitted logistic and NB parts with the training table's booking mass per
/// `(phase, calendar month)`, used to average cell predictions to phases.
#[derive(Debug, Clone)]
pub struct HurdleFit {
    pub logit_part: GlmFit,
    pub nb_part: GlmFit,
    pub threshold: u32,
    month_mass: [[f64; 12]; 3],
}

pub fn fit_hurdle(table: &BookingTable, threshold: u32, opts: &GlmOptions) -> Result<HurdleFit> {
    if threshold < 1 {
        return Err(Error::InvalidInput("threshold must be at least 1".into()));
    }
    let records = table.records();
    let long = records.iter().filter(|r| r.nights >= threshold).count();
    if long == 0 {
        return Err(Error::Degenerate(format!("no stays of {threshold}+ nights")));
    }
    if long == records.len() {
        return Err(Error::Degenerate(format!("every stay is {threshold}+ nights")));
    }
    let gate = glm::cell_data(records, |r| f64::from(u8::from(r.nights >= threshold)));
    let logit_part = glm::fit_data(&gate, GlmFamily::Logistic, opts)?;
    let lengths = glm::cell_data(records.iter().filter(|r| r.nights >= threshold), |r| r.nights as f64);
    let nb_part = glm::fit_data(&lengths, GlmFamily::NegBin, opts)?;

    let mut month_mass = [[0.0; 12]; 3];
    for r in records {
        month_mass[r.phase.index()][r.month as usize - 1] += r.weight as f64;
    }
    Ok(HurdleFit { logit_part, nb_part, threshold, month_mass })
}

impl HurdleFit {
    /// `logit⁻¹` of the logistic linear predictor for a cell.
    pub fn prevalence(&self, phase: Phase, month: u32) -> Result<f64> {
        self.logit_part.predict_cell(phase, month)
    }

    /// `exp` of the NB linear predictor for a cell.
    pub fn conditional_mean(&self, phase: Phase, month: u32) -> Result<f64> {
        self.nb_part.predict_cell(phase, month)
    }

    fn phase_average(&self, phase: Phase, f: impl Fn(u32) -> Result<f64>) -> Result<Option<f64>> {
        let mass = &self.month_mass[phase.index()];
        let total: f64 = mass.iter().sum();
        if total == 0.0 {
            return Ok(None);
        }
        let mut acc = CompensatedSum::new();
        for (m, &w) in mass.iter().enumerate() {
            if w > 0.0 {
                acc.add(w * f(m as u32 + 1)?);
            }
        }
        Ok(Some(acc.value() / total))
    }

    /// Cell prevalences averaged over months, weighted by the phase's
    /// booking mass per month. `None` when the phase has no bookings.
    pub fn phase_prevalence(&self, phase: Phase) -> Result<Option<f64>> {
        self.phase_average(phase, |m| self.prevalence(phase, m))
    }

    /// Cell conditional means averaged with the same month weights as
    /// [`HurdleFit::phase_prevalence`].
    pub fn phase_conditional_mean(&self, phase: Phase) -> Result<Option<f64>> {
        self.phase_average(phase, |m| self.conditional_mean(phase, m))
    }
}

/// Long-stay contribution of one phase and its excess over the reference.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImpactRow {
    pub phase: Phase,
    pub prevalence: f64,
    pub conditional_mean: f64,
    /// `prevalence × conditional_mean`.
    pub contribution: f64,
    /// `contribution − contribution(reference)`.
    pub excess_vs_pre: f64,
}

/// Impact rows from `(phase, prevalence, conditional mean)` triples.
pub fn impact_from_pairs(pairs: &[(Phase, f64, f64)], reference: Phase) -> Result<Vec<ImpactRow>> {
    let base = pairs
        .iter()
        .find(|p| p.0 == reference)
        .ok_or_else(|| Error::InvalidInput(format!("reference phase {reference} missing")))?;
    let base_contribution = base.1 * base.2;
    pairs
        .iter()
        .map(|&(phase, prevalence, conditional_mean)| {
            if !(0.0..=1.0).contains(&prevalence) {
                return Err(Error::InvalidInput(format!("prevalence {prevalence} outside [0, 1]")));
            }
            let contribution = prevalence * conditional_mean;
            Ok(ImpactRow {
                phase,
                prevalence,
                conditional_mean,
                contribution,
                excess_vs_pre: contribution - base_contribution,
            })
        })
        .collect()
}

/// Phase-level impact rows from a fitted model, for the phases present in
/// the training data.
pub fn combined_impact(fit: &HurdleFit, reference: Phase) -> Result<Vec<ImpactRow>> {
    let mut pairs = Vec::new();
    for phase in Phase::ALL {
        if let (Some(p), Some(m)) = (fit.phase_prevalence(phase)?, fit.phase_conditional_mean(phase)?) {
            pairs.push((phase, p, m));
        }
    }
    impact_from_pairs(&pairs, reference)
}

/// Model-free split of the weighted mean at a threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EmpiricalDecomposition {
    pub mean: f64,
    pub long_share: f64,
    /// Mean of the long stays; 0 when there are none.
    pub long_mean: f64,
    pub short_share: f64,
    /// Mean of the short stays; 0 when there are none.
    pub short_mean: f64,
}

impl EmpiricalDecomposition {
    /// `Pr(long)·E[y|long] + Pr(short)·E[y|short]`.
    pub fn recombined(&self) -> f64 {
        self.long_share * self.long_mean + self.short_share * self.short_mean
    }
}

pub fn empirical_decomposition(table: &BookingTable, threshold: u32) -> EmpiricalDecomposition {
    let (mut wl, mut sl, mut ws, mut ss) = (
        CompensatedSum::new(),
        CompensatedSum::new(),
        CompensatedSum::new(),
        CompensatedSum::new(),
    );
    for r in table.records() {
        let (w, y) = (r.weight as f64, r.nights as f64);
        if r.nights >= threshold {
            wl.add(w);
            sl.add(w * y);
        } else {
            ws.add(w);
            ss.add(w * y);
        }
    }
    let (wl, sl, ws, ss) = (wl.value(), sl.value(), ws.value(), ss.value());
    let total = wl + ws;
    let ratio = |a: f64, b: f64| if b > 0.0 { a / b } else { 0.0 };
    EmpiricalDecomposition {
        mean: (sl + ss) / total,
        long_share: wl / total,
        long_mean: ratio(sl, wl),
        short_share: ws / total,
        short_mean: ratio(ss, ws),
    }
}
