//! Gamma and Normal fits of parameter samples, with Kolmogorov-Smirnov checks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{digamma, trigamma};
use crate::stochastic::{GammaSpec, NormalSpec};

pub const MIN_SAMPLES: usize = 10;

/// Significance levels and asymptotic KS coefficients `c(alpha)`; the critical
/// distance is `c(alpha) / sqrt(n)`.
pub const KS_LEVELS: [(f64, f64); 3] = [(0.10, 1.224), (0.05, 1.358), (0.01, 1.628)];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub n: usize,
    /// Significance levels at which the fit is not rejected.
    pub pass_at: Vec<f64>,
}

impl KsResult {
    pub fn passes(&self, alpha: f64) -> bool {
        self.pass_at.contains(&alpha)
    }

    pub fn critical_value(n: usize, alpha: f64) -> Option<f64> {
        KS_LEVELS
            .iter()
            .find(|(a, _)| *a == alpha)
            .map(|(_, c)| c / (n as f64).sqrt())
    }
}

/// Two-sided KS distance `sup |F_n - F|` between the samples and `cdf`.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<KsResult> {
    if samples.len() < MIN_SAMPLES {
        return Err(Error::Argument(format!(
            "KS test needs at least {MIN_SAMPLES} samples, got {}",
            samples.len()
        )));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(ks_sorted(&sorted, cdf))
}

pub(crate) fn ks_sorted(sorted: &[f64], cdf: impl Fn(f64) -> f64) -> KsResult {
    let n = sorted.len() as f64;
    let statistic = sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x).clamp(0.0, 1.0);
            let above = (i + 1) as f64 / n - f;
            let below = f - i as f64 / n;
            above.max(below)
        })
        .fold(0.0, f64::max);
    let pass_at = KS_LEVELS
        .iter()
        .filter(|(_, c)| statistic <= c / n.sqrt())
        .map(|(a, _)| *a)
        .collect();
    KsResult {
        statistic,
        n: sorted.len(),
        pass_at,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum Family {
    Gamma { shape: f64, scale: f64 },
    Normal { mean: f64, std: f64 },
}

impl Family {
    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            Family::Gamma { shape, scale } => GammaSpec { shape, scale }.cdf(x),
            Family::Normal { mean, std } => NormalSpec { mean, std }.cdf(x),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionFit {
    #[serde(flatten)]
    pub family: Family,
    pub ks: KsResult,
}

impl DistributionFit {
    pub fn gamma_spec(&self) -> Option<GammaSpec> {
        match self.family {
            Family::Gamma { shape, scale } => Some(GammaSpec { shape, scale }),
            _ => None,
        }
    }

    pub fn normal_spec(&self) -> Option<NormalSpec> {
        match self.family {
            Family::Normal { mean, std } => Some(NormalSpec { mean, std }),
            _ => None,
        }
    }
}

fn check_samples(samples: &[f64]) -> Result<(f64, f64)> {
    if samples.len() < MIN_SAMPLES {
        return Err(Error::Fit(format!(
            "need at least {MIN_SAMPLES} samples, got {}",
            samples.len()
        )));
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::Fit("samples must be finite".into()));
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    if !(var > 0.0) {
        return Err(Error::Fit("samples have zero variance".into()));
    }
    Ok((mean, var))
}

/// Maximum-likelihood Gamma fit.
///
/// Starts from the method-of-moments shape `mean^2 / var` and solves
/// `ln k - digamma(k) = ln(mean) - mean(ln x)` by Newton iteration; the scale is
/// then `mean / k`.
pub fn fit_gamma(samples: &[f64]) -> Result<DistributionFit> {
    let (mean, var) = check_samples(samples)?;
    if samples.iter().any(|&v| v <= 0.0) {
        return Err(Error::Fit(
            "gamma fit needs strictly positive samples".into(),
        ));
    }
    let n = samples.len() as f64;
    let mean_ln = samples.iter().map(|v| v.ln()).sum::<f64>() / n;
    let s = mean.ln() - mean_ln;
    let mut k = mean * mean / var;
    if s > 0.0 {
        for _ in 0..100 {
            let g = k.ln() - digamma(k) - s;
            let dg = 1.0 / k - trigamma(k);
            let mut next = k - g / dg;
            if !(next > 0.0) {
                next = 0.5 * k;
            }
            let done = (next - k).abs() <= 1e-12 * k;
            k = next;
            if done {
                break;
            }
        }
    }
    if !(k.is_finite() && k > 0.0) {
        return Err(Error::Fit("gamma shape iteration diverged".into()));
    }
    let family = Family::Gamma {
        shape: k,
        scale: mean / k,
    };
    let ks = ks_statistic(samples, |x| family.cdf(x))?;
    Ok(DistributionFit { family, ks })
}

/// Maximum-likelihood Normal fit (population standard deviation).
pub fn fit_normal(samples: &[f64]) -> Result<DistributionFit> {
    let (mean, var) = check_samples(samples)?;
    let family = Family::Normal {
        mean,
        std: var.sqrt(),
    };
    let ks = ks_statistic(samples, |x| family.cdf(x))?;
    Ok(DistributionFit { family, ks })
}
