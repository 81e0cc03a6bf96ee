//! Time-domain realization of a stationary-noise model.
//!
//! [`synthesize`] shapes a random-phase spectrum on the FFT grid so that its
//! one-sided PSD equals the model level in every in-band bin, then inverts it.
//! Levels are converted from dBm/Hz to V^2/Hz through a reference impedance.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{argument, Result};
use crate::model::{narrowband_unchecked, BackgroundLaw, StationaryModel};
use crate::stochastic::RngState;

/// Unit conversion context between dBm and volts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitContext {
    pub reference_impedance_ohm: f64,
}

impl Default for UnitContext {
    fn default() -> Self {
        UnitContext {
            reference_impedance_ohm: 50.0,
        }
    }
}

impl UnitContext {
    pub fn new(reference_impedance_ohm: f64) -> Result<Self> {
        if !(reference_impedance_ohm.is_finite() && reference_impedance_ohm > 0.0) {
            return Err(argument(format!(
                "reference impedance must be positive, got {reference_impedance_ohm}"
            )));
        }
        Ok(UnitContext {
            reference_impedance_ohm,
        })
    }
}

/// Converts a density in dBm/Hz to V^2/Hz across the reference impedance.
#[inline]
pub fn dbmhz_to_v2hz(level_dbm_hz: f64, ctx: &UnitContext) -> f64 {
    10f64.powf(level_dbm_hz / 10.0) * 1e-3 * ctx.reference_impedance_ohm
}

/// Inverse of [`dbmhz_to_v2hz`]. Zero density maps to `-inf`.
#[inline]
pub fn v2hz_to_dbmhz(density_v2_hz: f64, ctx: &UnitContext) -> f64 {
    10.0 * (density_v2_hz / ctx.reference_impedance_ohm / 1e-3).log10()
}

/// Real voltage samples at a fixed rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    sample_rate_hz: f64,
    samples: Vec<f64>,
}

impl Waveform {
    pub fn new(sample_rate_hz: f64, samples: Vec<f64>) -> Result<Self> {
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(argument(format!(
                "sample rate must be positive, got {sample_rate_hz}"
            )));
        }
        if samples.is_empty() {
            return Err(argument("waveform needs at least one sample"));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(argument("waveform contains non-finite samples"));
        }
        Ok(Waveform {
            sample_rate_hz,
            samples,
        })
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.samples.len() as f64
    }

    /// Mean of the squared samples, in V^2.
    pub fn mean_power(&self) -> f64 {
        self.samples.iter().map(|v| v * v).sum::<f64>() / self.samples.len() as f64
    }

    pub fn rms(&self) -> f64 {
        self.mean_power().sqrt()
    }
}

/// Synthesizes `duration_s` of Gaussian colored noise whose one-sided PSD
/// follows the model inside its band.
///
/// Bin `k` of an `n`-point spectrum (bin spacing `df = fs / n`) inside the band
/// gets magnitude `sqrt(S(f_k) * df * n^2 / 2)` and a uniform random phase;
/// DC, Nyquist and out-of-band bins are zero. The mirrored half is the complex
/// conjugate and the inverse transform is scaled by `1/n`, so the mean power
/// equals the sum of `S(f_k) * df` over in-band bins.
pub fn synthesize(
    m: &StationaryModel,
    duration_s: f64,
    sample_rate_hz: f64,
    rng: &mut RngState,
    ctx: &UnitContext,
) -> Result<Waveform> {
    m.band.validate()?;
    if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
        return Err(argument(format!(
            "sample rate must be positive, got {sample_rate_hz}"
        )));
    }
    if sample_rate_hz < 2.0 * m.band.f_max_hz {
        return Err(argument(format!(
            "sample rate {sample_rate_hz} Hz is below twice the band edge {} Hz",
            m.band.f_max_hz
        )));
    }
    if !(duration_s.is_finite() && duration_s > 0.0) {
        return Err(argument(format!(
            "duration must be positive, got {duration_s}"
        )));
    }
    let n = (duration_s * sample_rate_hz).round() as usize;
    if n == 0 {
        return Err(argument(format!(
            "duration {duration_s} s at {sample_rate_hz} Hz yields no samples"
        )));
    }

    let mut spectrum = shaped_spectrum(m, n, sample_rate_hz, rng, ctx);
    let nf = n as f64;
    FftPlanner::new().plan_fft_inverse(n).process(&mut spectrum);
    let samples = spectrum.iter().map(|c| c.re / nf).collect();
    Waveform::new(sample_rate_hz, samples)
}

/// Mean power (V^2) of an `n`-sample [`synthesize`] output: the model density
/// summed over the in-band bins of the FFT grid. Phases do not affect it.
pub fn expected_mean_power(
    m: &StationaryModel,
    n: usize,
    sample_rate_hz: f64,
    ctx: &UnitContext,
) -> f64 {
    let df = sample_rate_hz / n as f64;
    (1..=n.saturating_sub(1) / 2)
        .map(|k| k as f64 * df)
        .filter(|&f| m.band.contains(f))
        .map(|f| {
            let level = m.background.level_dbm_hz(f) + narrowband_unchecked(&m.interferers, f);
            dbmhz_to_v2hz(level, ctx) * df
        })
        .sum()
}

/// Random-phase, conjugate-symmetric spectrum of `n` bins for [`synthesize`].
pub(crate) fn shaped_spectrum(
    m: &StationaryModel,
    n: usize,
    sample_rate_hz: f64,
    rng: &mut RngState,
    ctx: &UnitContext,
) -> Vec<Complex64> {
    let df = sample_rate_hz / n as f64;
    let nf = n as f64;
    let mut spectrum = vec![Complex64::new(0.0, 0.0); n];
    // bins strictly between DC and Nyquist
    let last = (n - 1) / 2;
    for k in 1..=last {
        let f = k as f64 * df;
        if !m.band.contains(f) {
            continue;
        }
        let level = m.background.level_dbm_hz(f) + narrowband_unchecked(&m.interferers, f);
        let s = dbmhz_to_v2hz(level, ctx);
        let mag = (s * df * nf * nf / 2.0).sqrt();
        let phase = std::f64::consts::TAU * rng.uniform();
        let x = Complex64::from_polar(mag, phase);
        spectrum[k] = x;
        spectrum[n - k] = x.conj();
    }

    spectrum
}

/// Amplitude histogram (as a density) and empirical CDF of a waveform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeDistribution {
    /// `n_bins + 1` edges spanning `[min, max]`.
    pub bin_edges: Vec<f64>,
    /// Density per bin; integrates to one over the edges.
    pub pdf: Vec<f64>,
    /// Sorted samples.
    pub sorted: Vec<f64>,
    /// Fraction of samples `<= sorted[i]`.
    pub cdf: Vec<f64>,
}

impl AmplitudeDistribution {
    pub fn bin_width(&self) -> f64 {
        self.bin_edges[1] - self.bin_edges[0]
    }

    pub fn bin_centers(&self) -> Vec<f64> {
        self.bin_edges
            .windows(2)
            .map(|w| 0.5 * (w[0] + w[1]))
            .collect()
    }
}

pub fn amplitude_distribution(w: &Waveform, n_bins: usize) -> Result<AmplitudeDistribution> {
    if n_bins == 0 {
        return Err(argument("n_bins must be positive"));
    }
    if w.len() < n_bins {
        return Err(argument(format!(
            "{} samples cannot fill {n_bins} bins",
            w.len()
        )));
    }
    let mut sorted = w.samples().to_vec();
    sorted.sort_by(f64::total_cmp);
    let (lo, hi) = (sorted[0], sorted[sorted.len() - 1]);
    if lo == hi {
        return Err(argument(
            "waveform is constant; amplitude distribution is degenerate",
        ));
    }
    let width = (hi - lo) / n_bins as f64;
    let bin_edges: Vec<f64> = (0..=n_bins)
        .map(|i| {
            if i == n_bins {
                hi
            } else {
                lo + i as f64 * width
            }
        })
        .collect();
    let mut counts = vec![0usize; n_bins];
    for &x in &sorted {
        let idx = (((x - lo) / width) as usize).min(n_bins - 1);
        counts[idx] += 1;
    }
    let n = sorted.len() as f64;
    let pdf = counts.iter().map(|&c| c as f64 / (n * width)).collect();

    let mut cdf = vec![0.0; sorted.len()];
    let mut i = sorted.len();
    while i > 0 {
        // every member of a run of ties gets the count through the run's end
        let end = i;
        let v = sorted[i - 1];
        while i > 0 && sorted[i - 1] == v {
            i -= 1;
        }
        let p = end as f64 / n;
        cdf[i..end].iter_mut().for_each(|c| *c = p);
    }
    Ok(AmplitudeDistribution {
        bin_edges,
        pdf,
        sorted,
        cdf,
    })
}
