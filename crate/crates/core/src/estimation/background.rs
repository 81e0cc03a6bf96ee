//! Robust power-law fit of the colored background.
//!
//! For a fixed exponent `b` the model `a * x + c` with `x = (f / 1 MHz)^b` is
//! linear, so `a` and `c` come from ordinary least squares and only the
//! profile sum of squares over `b` needs a 1-D search. A coarse scan of
//! `[B_MIN, B_MAX]` brackets the minimum, golden-section search refines it.
//! Points sitting more than [`MASK_THRESHOLD_DB`] above the fit are then
//! masked and the fit repeated until the mask stops growing.

use crate::error::{Error, Result};
use crate::model::{BackgroundParams, Band, HZ_PER_MHZ};
use crate::trace::PsdTrace;

pub const B_MIN: f64 = 0.01;
pub const B_MAX: f64 = 3.0;
pub const MASK_THRESHOLD_DB: f64 = 3.0;
pub const MAX_ROBUST_ITERATIONS: usize = 5;
pub const MIN_FIT_POINTS: usize = 8;

const SCAN_POINTS: usize = 64;
const GOLDEN_TOL: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq)]
pub struct BackgroundFit {
    pub params: BackgroundParams,
    /// `psd - background` at every point of the input trace.
    pub residuals: PsdTrace,
    /// Indices of the in-band points.
    pub in_band: Vec<usize>,
    /// Final mask over `in_band`; `true` marks an excluded point.
    pub mask: Vec<bool>,
    /// Mask used by each successive fit.
    pub mask_history: Vec<Vec<bool>>,
    /// RMS of the residual over unmasked in-band points.
    pub residual_rms_db: f64,
    pub iterations: usize,
}

/// Fits `a * (f / 1 MHz)^b + c` to the in-band part of `trace` in the dB domain.
pub fn fit_background(trace: &PsdTrace, band: &Band) -> Result<BackgroundFit> {
    band.validate()?;
    let in_band = trace.in_band_indices(band);
    if in_band.len() < MIN_FIT_POINTS {
        return Err(Error::Fit(format!(
            "{} in-band points, need at least {MIN_FIT_POINTS}",
            in_band.len()
        )));
    }
    let f_mhz: Vec<f64> = in_band
        .iter()
        .map(|&k| trace.freqs_hz()[k] / HZ_PER_MHZ)
        .collect();
    let y: Vec<f64> = in_band.iter().map(|&k| trace.psd_dbm_hz()[k]).collect();

    let mut mask = vec![false; in_band.len()];
    let mut history = Vec::new();
    let mut params = fit_unmasked(&f_mhz, &y, &mask)?;
    history.push(mask.clone());
    let mut iterations = 1;
    loop {
        let mut grown = mask.clone();
        for (i, m) in grown.iter_mut().enumerate() {
            let fit = params.a * f_mhz[i].powf(params.b) + params.c;
            if y[i] - fit > MASK_THRESHOLD_DB {
                *m = true;
            }
        }
        if grown == mask || iterations >= MAX_ROBUST_ITERATIONS {
            break;
        }
        mask = grown;
        params = fit_unmasked(&f_mhz, &y, &mask)?;
        history.push(mask.clone());
        iterations += 1;
    }

    let residuals =
        trace.map_levels(|f, p| p - (params.a * (f / HZ_PER_MHZ).powf(params.b) + params.c))?;
    let (sum, count) =
        in_band
            .iter()
            .zip(&mask)
            .filter(|(_, &m)| !m)
            .fold((0.0, 0usize), |(s, n), (&k, _)| {
                let r = residuals.psd_dbm_hz()[k];
                (s + r * r, n + 1)
            });
    Ok(BackgroundFit {
        params,
        residuals,
        in_band,
        mask,
        mask_history: history,
        residual_rms_db: (sum / count as f64).sqrt(),
        iterations,
    })
}

fn fit_unmasked(f_mhz: &[f64], y: &[f64], mask: &[bool]) -> Result<BackgroundParams> {
    let (fs, ys): (Vec<f64>, Vec<f64>) = f_mhz
        .iter()
        .zip(y)
        .zip(mask)
        .filter(|(_, &m)| !m)
        .map(|((&f, &v), _)| (f, v))
        .unzip();
    if fs.len() < MIN_FIT_POINTS {
        return Err(Error::Fit(format!(
            "only {} unmasked points remain, need at least {MIN_FIT_POINTS}",
            fs.len()
        )));
    }
    let ln_f: Vec<f64> = fs.iter().map(|f| f.ln()).collect();
    let profile = |b: f64| linear_fit(&ln_f, &ys, b).2;

    // coarse scan to bracket the global minimum
    let step = (B_MAX - B_MIN) / (SCAN_POINTS - 1) as f64;
    let grid: Vec<f64> = (0..SCAN_POINTS).map(|i| B_MIN + i as f64 * step).collect();
    let best = grid
        .iter()
        .map(|&b| profile(b))
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(i, _)| i)
        .unwrap();
    let lo = grid[best.saturating_sub(1)];
    let hi = grid[(best + 1).min(SCAN_POINTS - 1)];
    let b = golden_section(profile, lo, hi, GOLDEN_TOL);
    let (a, c, sse) = linear_fit(&ln_f, &ys, b);
    if !(a.is_finite() && c.is_finite() && sse.is_finite()) {
        return Err(Error::Fit("degenerate least-squares system".into()));
    }
    Ok(BackgroundParams { a, b, c })
}

/// Least squares of `y ~ a x + c` with `x = exp(b ln f)`; returns `(a, c, sse)`.
fn linear_fit(ln_f: &[f64], y: &[f64], b: f64) -> (f64, f64, f64) {
    let n = y.len() as f64;
    let x: Vec<f64> = ln_f.iter().map(|l| (b * l).exp()).collect();
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (xi, yi) in x.iter().zip(y) {
        sxx += (xi - mx) * (xi - mx);
        sxy += (xi - mx) * (yi - my);
    }
    let a = sxy / sxx;
    let c = my - a * mx;
    let sse = x
        .iter()
        .zip(y)
        .map(|(xi, yi)| {
            let r = yi - (a * xi + c);
            r * r
        })
        .sum();
    (a, c, sse)
}

/// Minimizes a unimodal `f` on `[lo, hi]`.
pub(crate) fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..200 {
        if hi - lo <= tol * (1.0 + lo.abs()) {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        x1
    } else {
        x2
    }
}
