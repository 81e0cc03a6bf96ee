use serde::{Deserialize, Serialize};

use super::distfit::{fit_gamma, fit_normal, DistributionFit};
use super::{fit_trace, FitReport};
use crate::error::{argument, Error, Result};
use crate::exec::Execution;
use crate::model::{BackgroundParams, Band};
use crate::stochastic::{CenterPrior, CountSpec, ParameterPriors};

/// Unit of the pooled center frequencies (Hz).
pub const CENTER_UNIT_HZ: f64 = 1.0e5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceFailure {
    pub index: usize,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignResult {
    pub priors: ParameterPriors,
    pub amplitude_fit: DistributionFit,
    pub center_fit: DistributionFit,
    pub width_fit: DistributionFit,
    pub reports: Vec<FitReport>,
    pub failures: Vec<TraceFailure>,
}

/// Fits every trace, pools the extracted interferer parameters and fits their
/// distributions. Fails when more than half of the traces cannot be fitted.
pub fn characterize_campaign(
    traces: &[crate::trace::PsdTrace],
    band: &Band,
) -> Result<CampaignResult> {
    characterize_campaign_with(traces, band, Execution::default())
}

pub fn characterize_campaign_with(
    traces: &[crate::trace::PsdTrace],
    band: &Band,
    exec: Execution,
) -> Result<CampaignResult> {
    if traces.len() < 2 {
        return Err(argument(format!(
            "a campaign needs at least 2 traces, got {}",
            traces.len()
        )));
    }
    band.validate()?;
    let outcomes = exec.map_slice(traces, |t| fit_trace(t, band).map(|(r, _)| r));

    let mut reports = Vec::new();
    let mut failures = Vec::new();
    for (index, o) in outcomes.into_iter().enumerate() {
        match o {
            Ok(r) => reports.push(r),
            Err(e) => failures.push(TraceFailure {
                index,
                error: e.to_string(),
            }),
        }
    }
    if 2 * failures.len() > traces.len() {
        let detail: Vec<String> = failures
            .iter()
            .map(|f| format!("trace {}: {}", f.index, f.error))
            .collect();
        return Err(Error::Fit(format!(
            "{} of {} traces failed: {}",
            failures.len(),
            traces.len(),
            detail.join("; ")
        )));
    }

    let pooled = reports
        .iter()
        .flat_map(|r| r.interferers.iter().map(|i| i.interferer));
    let amps: Vec<f64> = pooled.clone().map(|i| i.amplitude_db).collect();
    let centers: Vec<f64> = pooled
        .clone()
        .map(|i| i.center_hz / CENTER_UNIT_HZ)
        .collect();
    let widths: Vec<f64> = pooled.map(|i| i.sigma_hz).collect();
    let amplitude_fit = fit_gamma(&amps).map_err(|e| pool_error("amplitude", e))?;
    let center_fit = fit_normal(&centers).map_err(|e| pool_error("center", e))?;
    let width_fit = fit_gamma(&widths).map_err(|e| pool_error("width", e))?;

    let lambda = amps.len() as f64 / reports.len() as f64;
    let background = BackgroundParams {
        a: median(reports.iter().map(|r| r.background.a).collect()),
        b: median(reports.iter().map(|r| r.background.b).collect()),
        c: median(reports.iter().map(|r| r.background.c).collect()),
    };
    let priors = ParameterPriors {
        amp_db: amplitude_fit.gamma_spec().unwrap(),
        center: CenterPrior {
            law: center_fit.normal_spec().unwrap(),
            unit_hz: CENTER_UNIT_HZ,
        },
        width_hz: width_fit.gamma_spec().unwrap(),
        count: CountSpec { lambda },
        background,
        band: *band,
    };
    Ok(CampaignResult {
        priors,
        amplitude_fit,
        center_fit,
        width_fit,
        reports,
        failures,
    })
}

fn pool_error(what: &str, e: Error) -> Error {
    Error::Fit(format!("pooled {what} distribution: {e}"))
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
