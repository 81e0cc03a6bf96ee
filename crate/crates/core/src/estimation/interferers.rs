//! Narrowband interferer extraction from the residual above the background.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::lm::{levenberg_marquardt, LeastSquares};
use crate::error::Result;
use crate::model::{BackgroundLaw, BackgroundParams, Interferer};
use crate::trace::PsdTrace;

/// Residual level a local maximum must exceed to count as a peak (dB).
pub const PEAK_THRESHOLD_DB: f64 = 3.0;
/// Minimum distance between accepted peaks, in grid steps.
pub const MIN_PEAK_SEPARATION: usize = 2;
/// Lower bound of the fit-region threshold (dB).
pub const REGION_FLOOR_DB: f64 = 1.0;
/// Largest number of peaks fitted jointly.
pub const MAX_CLUSTER_PEAKS: usize = 5;

const MAX_LM_ITERATIONS: usize = 300;
/// Smallest accepted fitted width, in grid steps.
const MIN_SIGMA_STEPS: f64 = 0.1;

/// One extracted interferer with its fit diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterfererFit {
    #[serde(flatten)]
    pub interferer: Interferer,
    /// RMS misfit over the (cluster) fit region, in dB.
    pub residual_rms_db: f64,
    /// False when the least-squares fit failed and moment estimates are reported.
    pub converged: bool,
}

/// Extracts interferers from `trace` after removing `background`.
pub fn extract_interferers(
    trace: &PsdTrace,
    background: &BackgroundParams,
) -> Result<Vec<InterfererFit>> {
    background.validate()?;
    let residual: Vec<f64> = trace
        .iter()
        .map(|(f, p)| p - background.level_dbm_hz(f))
        .collect();
    Ok(extract_from_residual(trace.freqs_hz(), &residual))
}

/// Extracts Gaussian bumps from a residual (dB above background) sampled at
/// strictly increasing `freqs`.
pub fn extract_from_residual(freqs: &[f64], residual: &[f64]) -> Vec<InterfererFit> {
    let peaks = find_peaks(residual);
    if peaks.is_empty() {
        return Vec::new();
    }
    let regions: Vec<(usize, usize)> = peaks.iter().map(|&k| region(residual, k)).collect();

    let mut out = Vec::with_capacity(peaks.len());
    for cluster in clusters(&regions) {
        for group in cluster.chunks(MAX_CLUSTER_PEAKS) {
            out.extend(fit_group(freqs, residual, &peaks, &regions, group));
        }
    }
    out.sort_by(|a, b| a.interferer.canonical_cmp(&b.interferer));
    out
}

/// Local maxima above the threshold, at least `MIN_PEAK_SEPARATION` apart
/// (the higher one wins).
fn find_peaks(r: &[f64]) -> Vec<usize> {
    let n = r.len();
    let mut candidates: Vec<usize> = (0..n)
        .filter(|&k| {
            r[k] > PEAK_THRESHOLD_DB
                && (k == 0 || r[k] >= r[k - 1])
                && (k + 1 == n || r[k] > r[k + 1])
        })
        .collect();
    candidates.sort_by(|&a, &b| r[b].total_cmp(&r[a]).then(a.cmp(&b)));
    let mut accepted: Vec<usize> = Vec::new();
    for k in candidates {
        if accepted
            .iter()
            .all(|&j| k.abs_diff(j) >= MIN_PEAK_SEPARATION)
        {
            accepted.push(k);
        }
    }
    accepted.sort_unstable();
    accepted
}

/// Contiguous run around `k` where the residual exceeds
/// `max(REGION_FLOOR_DB, A / e^2)`, widened to at least two points per side.
fn region(r: &[f64], k: usize) -> (usize, usize) {
    let threshold = REGION_FLOOR_DB.max(r[k] * (-2f64).exp());
    let mut lo = k;
    while lo > 0 && r[lo - 1] > threshold {
        lo -= 1;
    }
    let mut hi = k;
    while hi + 1 < r.len() && r[hi + 1] > threshold {
        hi += 1;
    }
    (
        lo.min(k.saturating_sub(2)),
        hi.max((k + 2).min(r.len() - 1)),
    )
}

/// Groups peak indices whose regions overlap or touch.
fn clusters(regions: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = Vec::new();
    let mut reach = 0usize;
    for (i, &(lo, hi)) in regions.iter().enumerate() {
        match out.last_mut() {
            Some(c) if lo <= reach + 1 => {
                c.push(i);
                reach = reach.max(hi);
            }
            _ => {
                out.push(vec![i]);
                reach = hi;
            }
        }
    }
    out
}

struct GaussianSum<'a> {
    /// Frequencies in grid units relative to `origin`.
    u: &'a [f64],
    y: &'a [f64],
}

impl GaussianSum<'_> {
    fn eval(p: &[f64], u: f64) -> f64 {
        p.chunks_exact(3)
            .map(|g| {
                let d = u - g[1];
                g[0] * (-(d * d) / (2.0 * g[2] * g[2])).exp()
            })
            .sum()
    }
}

impl LeastSquares for GaussianSum<'_> {
    fn n_points(&self) -> usize {
        self.u.len()
    }

    fn residuals(&self, p: &[f64], r: &mut [f64]) {
        for ((ri, &u), &y) in r.iter_mut().zip(self.u).zip(self.y) {
            *ri = y - Self::eval(p, u);
        }
    }

    fn jacobian(&self, p: &[f64], jac: &mut DMatrix<f64>) {
        for (i, &u) in self.u.iter().enumerate() {
            for (g, chunk) in p.chunks_exact(3).enumerate() {
                let (a, c, s) = (chunk[0], chunk[1], chunk[2]);
                let d = u - c;
                let e = (-(d * d) / (2.0 * s * s)).exp();
                jac[(i, 3 * g)] = e;
                jac[(i, 3 * g + 1)] = a * e * d / (s * s);
                jac[(i, 3 * g + 2)] = a * e * d * d / (s * s * s);
            }
        }
    }

    fn admissible(&self, p: &[f64]) -> bool {
        let (lo, hi) = (self.u[0], self.u[self.u.len() - 1]);
        p.chunks_exact(3).all(|g| {
            g[0] > 0.0 && g[2] > 0.0 && g[1] >= lo && g[1] <= hi && g.iter().all(|v| v.is_finite())
        })
    }
}

fn fit_group(
    freqs: &[f64],
    r: &[f64],
    peaks: &[usize],
    regions: &[(usize, usize)],
    group: &[usize],
) -> Vec<InterfererFit> {
    let lo = group.iter().map(|&i| regions[i].0).min().unwrap();
    let hi = group.iter().map(|&i| regions[i].1).max().unwrap();
    let origin = freqs[lo];
    // grid unit: mean spacing over the region
    let unit = (freqs[hi] - freqs[lo]) / (hi - lo) as f64;
    let u: Vec<f64> = freqs[lo..=hi].iter().map(|f| (f - origin) / unit).collect();
    let y = &r[lo..=hi];

    let moments: Vec<[f64; 3]> = group
        .iter()
        .map(|&i| moment_estimate(freqs, r, peaks[i], regions[i]))
        .collect();
    let start: Vec<f64> = moments
        .iter()
        .flat_map(|m| [m[0], (m[1] - origin) / unit, m[2] / unit])
        .collect();

    let problem = GaussianSum { u: &u, y };
    let enough_points = u.len() >= start.len();
    let outcome = enough_points.then(|| levenberg_marquardt(&problem, &start, MAX_LM_ITERATIONS));
    // a component that shrank below the region floor or to a sub-grid width
    // has collapsed; the joint solution is then not trusted
    let intact = |p: &[f64]| {
        p.chunks_exact(3)
            .all(|g| g[0] >= REGION_FLOOR_DB && g[2] >= MIN_SIGMA_STEPS)
    };
    let (params, converged) = match outcome {
        Some(o) if o.converged && intact(&o.params) => (o.params, true),
        _ => (start.clone(), false),
    };
    let mut resid = vec![0.0; u.len()];
    problem.residuals(&params, &mut resid);
    let rms = (resid.iter().map(|v| v * v).sum::<f64>() / resid.len() as f64).sqrt();

    params
        .chunks_exact(3)
        .map(|g| InterfererFit {
            interferer: Interferer {
                amplitude_db: g[0],
                center_hz: origin + g[1] * unit,
                sigma_hz: g[2] * unit,
            },
            residual_rms_db: rms,
            converged,
        })
        .collect()
}

/// Peak height, peak frequency and second-moment width over the peak's own
/// lobe: the part of its region reached without climbing toward a neighbour.
fn moment_estimate(freqs: &[f64], r: &[f64], k: usize, (lo, hi): (usize, usize)) -> [f64; 3] {
    let (mut a, mut b) = (k, k);
    while a > lo && r[a - 1] <= r[a] {
        a -= 1;
    }
    while b < hi && r[b + 1] <= r[b] {
        b += 1;
    }
    let (lo, hi) = (a, b);
    let f0 = freqs[k];
    let (mut w, mut m2) = (0.0, 0.0);
    for j in lo..=hi {
        let weight = r[j].max(0.0);
        w += weight;
        m2 += weight * (freqs[j] - f0).powi(2);
    }
    let step = if hi > lo {
        (freqs[hi] - freqs[lo]) / (hi - lo) as f64
    } else {
        1.0
    };
    let sigma = if w > 0.0 { (m2 / w).sqrt() } else { 0.0 };
    [r[k], f0, sigma.max(0.5 * step)]
}
