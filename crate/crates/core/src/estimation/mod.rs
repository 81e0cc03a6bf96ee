//! Inverse pipeline: PSD estimation, background and interferer fitting,
//! parameter-distribution fitting and campaign characterization.

mod background;
mod campaign;
mod distfit;
mod interferers;
mod lm;
mod welch;

pub use background::{
    fit_background, BackgroundFit, B_MAX, B_MIN, MASK_THRESHOLD_DB, MAX_ROBUST_ITERATIONS,
    MIN_FIT_POINTS,
};
pub use campaign::{
    characterize_campaign, characterize_campaign_with, CampaignResult, TraceFailure,
};
pub use distfit::{
    fit_gamma, fit_normal, ks_statistic, DistributionFit, Family, KsResult, KS_LEVELS, MIN_SAMPLES,
};
pub use interferers::{
    extract_from_residual, extract_interferers, InterfererFit, MAX_CLUSTER_PEAKS,
    MIN_PEAK_SEPARATION, PEAK_THRESHOLD_DB, REGION_FLOOR_DB,
};
pub use welch::{segment_len, welch_psd, welch_psd_with, DEFAULT_RESOLUTION_HZ, MIN_SEGMENTS};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{BackgroundLaw, BackgroundParams, Band, StationaryModel};
use crate::trace::PsdTrace;

/// Outcome of fitting one PSD trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub background: BackgroundParams,
    /// RMS of `trace - model` over in-band points, in dB.
    pub residual_rms_db: f64,
    pub interferers: Vec<InterfererFit>,
    /// Robust background iterations used.
    pub iterations: usize,
    pub band: Band,
}

impl FitReport {
    /// The fitted stationary model.
    pub fn model(&self) -> StationaryModel {
        StationaryModel {
            background: self.background,
            interferers: self.interferers.iter().map(|i| i.interferer).collect(),
            band: self.band,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Fits the background over `band`, then extracts interferers from the
/// in-band residual.
pub fn fit_trace(trace: &PsdTrace, band: &Band) -> Result<(FitReport, BackgroundFit)> {
    let bg = fit_background(trace, band)?;
    let freqs: Vec<f64> = bg.in_band.iter().map(|&k| trace.freqs_hz()[k]).collect();
    let resid: Vec<f64> = bg
        .in_band
        .iter()
        .map(|&k| bg.residuals.psd_dbm_hz()[k])
        .collect();
    let interferers = extract_from_residual(&freqs, &resid);
    let mut report = FitReport {
        background: bg.params,
        residual_rms_db: 0.0,
        interferers,
        iterations: bg.iterations,
        band: *band,
    };
    let model = report.model();
    let sse: f64 = bg
        .in_band
        .iter()
        .map(|&k| {
            let (f, p) = (trace.freqs_hz()[k], trace.psd_dbm_hz()[k]);
            let fit = model.background.level_dbm_hz(f)
                + crate::model::narrowband_unchecked(&model.interferers, f);
            (p - fit).powi(2)
        })
        .sum();
    report.residual_rms_db = (sse / bg.in_band.len() as f64).sqrt();
    Ok((report, bg))
}
