//! Browser bindings for the static demo page.
//!
//! Each exported function takes plain numbers and returns a JSON string,
//! so the page needs no bundler or generated type glue beyond the
//! `wasm-bindgen` shim. The `*_data` functions hold the logic and are
//! usable natively.

use serde::Serialize;
use staylength::densfit::{self, DensityFamily, FamilyKind};
use staylength::sarima;
use staylength::simgen::{self, BookingSimSpec, SarimaSimSpec};
use staylength::YearMonth;
use wasm_bindgen::prelude::*;

/// Upper bound on the support shown in the PLN comparison.
const MAX_NIGHTS: u64 = 180;

#[derive(Debug, Clone, Serialize)]
pub struct PmfPoint {
    pub k: u64,
    pub pln: f64,
    /// Log-normal probability mass of `[k − ½, k + ½)`.
    pub lognormal: f64,
}

/// PLN pmf against the binned log-normal with the same `(μ, σ)`.
pub fn pln_curve_data(mu: f64, sigma: f64, kmax: u64) -> staylength::Result<Vec<PmfPoint>> {
    let ln = DensityFamily::LogNormal { mu, sigma };
    let kmax = kmax.clamp(1, MAX_NIGHTS);
    (0..=kmax)
        .map(|k| {
            let lo = if k == 0 { 0.0 } else { ln.cdf(k as f64 - 0.5)? };
            let hi = ln.cdf(k as f64 + 0.5)?;
            Ok(PmfPoint { k, pln: densfit::pln_log_pmf(k, mu, sigma)?.exp(), lognormal: hi - lo })
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct FamilyCurve {
    pub family: &'static str,
    pub params: [f64; 2],
    pub aic: f64,
    pub delta_aic: f64,
    pub points: Vec<densfit::OverlayPoint>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RankingDemo {
    pub bookings: u64,
    pub mean: f64,
    pub families: Vec<FamilyCurve>,
}

/// Simulate a year of bookings, fit the three families and return them in
/// AIC order with their CDF overlays.
pub fn rank_fits_data(seed: u64, intensity: u32) -> staylength::Result<RankingDemo> {
    let spec = BookingSimSpec {
        start: YearMonth { year: 2022, month: 1 },
        end: YearMonth { year: 2022, month: 12 },
        intensity: u64::from(intensity.clamp(50, 5000)),
        seed,
        ..BookingSimSpec::default()
    };
    let table = simgen::simulate_bookings(&spec)?;
    let fits = FamilyKind::ALL
        .iter()
        .map(|&k| densfit::fit_weighted(k, &table))
        .collect::<staylength::Result<Vec<_>>>()?;
    let ranked = densfit::rank_models(&fits)?;
    let mut families = Vec::new();
    for r in ranked {
        let fit = fits.iter().find(|f| f.family.kind() == r.family).expect("ranked fit comes from the input");
        let mut points = densfit::overlay_points(fit, &table)?;
        points.retain(|p| p.y <= 60.0);
        families.push(FamilyCurve {
            family: r.family.name(),
            params: fit.family.params(),
            aic: r.aic,
            delta_aic: r.delta_aic,
            points,
        });
    }
    let sample = table.sample();
    Ok(RankingDemo {
        bookings: table.total_weight(),
        mean: staylength::wstats::weighted_mean(&sample)?,
        families,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct AcfDemo {
    pub lags: Vec<usize>,
    pub sample: Vec<f64>,
    pub theoretical: Vec<f64>,
    pub bound: f64,
}

/// Sample ACF of a simulated doubly differenced series next to the
/// theoretical ACF of its MA(1)×SMA(1)₁₂ process.
pub fn sarima_acf_data(ma1: f64, sma12: f64, n: usize, seed: u64) -> staylength::Result<AcfDemo> {
    let spec = SarimaSimSpec {
        ma1: ma1.clamp(-0.98, 0.98),
        sma12: sma12.clamp(-0.98, 0.98),
        beta_post: 0.0,
        beta_pre: 0.0,
        n: n.clamp(sarima::MIN_LENGTH + 24, 2400),
        seed,
        ..SarimaSimSpec::default()
    };
    let series = simgen::simulate_sarima(&spec)?;
    let z = sarima::difference(&series.values, 1, 1, sarima::SEASON)?;
    let max_lag = sarima::ACF_LAGS.min(z.len() - 1);
    let sample = sarima::acf(&z, max_lag)?;
    let gamma = sarima::ma_autocovariance(spec.ma1, spec.sma12);
    let theoretical = (1..=max_lag).map(|h| gamma.get(h).map_or(0.0, |g| g / gamma[0])).collect();
    Ok(AcfDemo {
        lags: (1..=max_lag).collect(),
        sample,
        theoretical,
        bound: 1.96 / (z.len() as f64).sqrt(),
    })
}

fn to_js<T: Serialize>(result: staylength::Result<T>) -> Result<String, JsValue> {
    let value = result.map_err(|e| JsValue::from_str(&e.to_string()))?;
    serde_json::to_string(&value).map_err(|e| JsValue::from_str(&e.to_string()))
}

#[wasm_bindgen]
pub fn pln_curve(mu: f64, sigma: f64, kmax: u32) -> Result<String, JsValue> {
    to_js(pln_curve_data(mu, sigma, u64::from(kmax)))
}

#[wasm_bindgen]
pub fn rank_fits(seed: u32, intensity: u32) -> Result<String, JsValue> {
    to_js(rank_fits_data(u64::from(seed), intensity))
}

#[wasm_bindgen]
pub fn sarima_acf(ma1: f64, sma12: f64, n: u32, seed: u32) -> Result<String, JsValue> {
    to_js(sarima_acf_data(ma1, sma12, n as usize, u64::from(seed)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pln_curve_sums_close_to_one() {
        let pts = pln_curve_data(1.0, 0.6, 180).unwrap();
        let pln: f64 = pts.iter().map(|p| p.pln).sum();
        let ln: f64 = pts.iter().map(|p| p.lognormal).sum();
        assert!((pln - 1.0).abs() < 1e-6);
        assert!((ln - 1.0).abs() < 1e-6);
        assert_eq!(pts.len(), 181);
    }

    #[test]
    fn ranking_is_sorted_and_serializes() {
        let demo = rank_fits_data(3, 200).unwrap();
        assert_eq!(demo.families.len(), 3);
        assert_eq!(demo.families[0].delta_aic, 0.0);
        assert!(demo.families.windows(2).all(|w| w[0].aic <= w[1].aic));
        assert!(demo.families.iter().all(|f| !f.points.is_empty()));
        let json = to_js(Ok(demo)).unwrap();
        assert!(json.contains("\"delta_aic\""));
    }

    #[test]
    fn acf_tracks_the_theoretical_spikes() {
        let demo = sarima_acf_data(-0.6, -0.6, 2400, 5).unwrap();
        assert_eq!(demo.lags.len(), 24);
        for lag in [1usize, 12] {
            let (s, t) = (demo.sample[lag - 1], demo.theoretical[lag - 1]);
            assert!((s - t).abs() < 4.0 * demo.bound, "lag {lag}: {s} vs {t}");
        }
        assert_eq!(demo.theoretical[5], 0.0);
    }
}
