//! Parametric stationary-noise model: colored background plus a sum of
//! Gaussian-shaped narrowband interferers, superposed in the dB domain.
//!
//! The background follows a power law in frequency, `a * f^b + c` dBm/Hz,
//! with `f` expressed in MHz. Each interferer contributes
//! `A * exp(-(f - f_c)^2 / (2 sigma^2))` dB on top of the background.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{argument, Error, Result};
use crate::exec::Execution;
use crate::trace::PsdTrace;

/// Hz per MHz; the power law is evaluated on frequency in MHz.
pub const HZ_PER_MHZ: f64 = 1.0e6;

/// Default lower band edge of narrowband PLC (Hz).
pub const DEFAULT_F_MIN_HZ: f64 = 9.0e3;
/// Default upper band edge of narrowband PLC (Hz).
pub const DEFAULT_F_MAX_HZ: f64 = 500.0e3;

/// A frequency band `[f_min_hz, f_max_hz]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub f_min_hz: f64,
    pub f_max_hz: f64,
}

impl Default for Band {
    fn default() -> Self {
        Band {
            f_min_hz: DEFAULT_F_MIN_HZ,
            f_max_hz: DEFAULT_F_MAX_HZ,
        }
    }
}

impl Band {
    pub fn new(f_min_hz: f64, f_max_hz: f64) -> Result<Self> {
        let band = Band { f_min_hz, f_max_hz };
        band.validate()?;
        Ok(band)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.f_min_hz.is_finite() && self.f_max_hz.is_finite())
            || self.f_min_hz <= 0.0
            || self.f_min_hz >= self.f_max_hz
        {
            return Err(argument(format!(
                "band must satisfy 0 < f_min < f_max, got [{}, {}]",
                self.f_min_hz, self.f_max_hz
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn contains(&self, f_hz: f64) -> bool {
        f_hz >= self.f_min_hz && f_hz <= self.f_max_hz
    }

    pub fn width_hz(&self) -> f64 {
        self.f_max_hz - self.f_min_hz
    }
}

impl FromStr for Band {
    type Err = Error;

    /// Parses `LO:HI` in Hz.
    fn from_str(s: &str) -> Result<Self> {
        let (lo, hi) = s
            .split_once(':')
            .ok_or_else(|| argument(format!("band `{s}` is not of the form LO:HI")))?;
        let parse = |v: &str| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| argument(format!("band edge `{v}` is not a number")))
        };
        Band::new(parse(lo)?, parse(hi)?)
    }
}

impl fmt::Display for Band {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.f_min_hz, self.f_max_hz)
    }
}

/// A background PSD law: level in dBm/Hz as a function of frequency in Hz.
///
/// Only the power law is provided; other decay laws can implement this trait.
pub trait BackgroundLaw {
    fn level_dbm_hz(&self, f_hz: f64) -> f64;
}

/// Power-law colored background `a * (f / 1 MHz)^b + c` in dBm/Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BackgroundParams {
    /// Coefficient in dBm/Hz per MHz^b.
    pub a: f64,
    /// Decay exponent.
    pub b: f64,
    /// Offset in dBm/Hz.
    pub c: f64,
}

impl BackgroundParams {
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self> {
        let p = BackgroundParams { a, b, c };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a.is_finite() && self.b.is_finite() && self.c.is_finite()) {
            return Err(argument("background parameters must be finite"));
        }
        if self.b < 0.0 {
            return Err(argument(format!(
                "background exponent b must be non-negative, got {}",
                self.b
            )));
        }
        Ok(())
    }
}

impl BackgroundLaw for BackgroundParams {
    #[inline]
    fn level_dbm_hz(&self, f_hz: f64) -> f64 {
        self.a * (f_hz / HZ_PER_MHZ).powf(self.b) + self.c
    }
}

/// Named background presets fitted to strong and weak measured noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Worst,
    Best,
}

impl Preset {
    pub const ALL: [Preset; 2] = [Preset::Worst, Preset::Best];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Worst => "worst",
            Preset::Best => "best",
        }
    }

    pub fn params(self) -> BackgroundParams {
        match self {
            Preset::Worst => BackgroundParams {
                a: -66.76,
                b: 0.3942,
                c: -12.9,
            },
            Preset::Best => BackgroundParams {
                a: -76.95,
                b: 0.25,
                c: 0.03,
            },
        }
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "worst" => Ok(Preset::Worst),
            "best" => Ok(Preset::Best),
            other => Err(Error::UnknownPreset(other.to_string())),
        }
    }
}

/// Looks up a background preset by name (`worst` or `best`).
pub fn preset(name: &str) -> Result<BackgroundParams> {
    Ok(name.parse::<Preset>()?.params())
}

/// One narrowband interferer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interferer {
    /// Peak height in dB above the background.
    pub amplitude_db: f64,
    pub center_hz: f64,
    /// Gaussian standard deviation in Hz.
    pub sigma_hz: f64,
}

impl Interferer {
    pub fn new(amplitude_db: f64, center_hz: f64, sigma_hz: f64) -> Result<Self> {
        let i = Interferer {
            amplitude_db,
            center_hz,
            sigma_hz,
        };
        i.validate()?;
        Ok(i)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = self.amplitude_db.is_finite()
            && self.center_hz.is_finite()
            && self.sigma_hz.is_finite();
        if !finite || self.amplitude_db < 0.0 || self.center_hz <= 0.0 || self.sigma_hz <= 0.0 {
            return Err(argument(format!(
                "interferer requires amplitude_db >= 0, center_hz > 0, sigma_hz > 0; got {self:?}"
            )));
        }
        Ok(())
    }

    /// Contribution in dB at `f_hz`.
    #[inline]
    pub fn level_db(&self, f_hz: f64) -> f64 {
        let d = f_hz - self.center_hz;
        self.amplitude_db * (-(d * d) / (2.0 * self.sigma_hz * self.sigma_hz)).exp()
    }

    /// Canonical order: ascending center, ties by descending amplitude.
    pub fn canonical_cmp(&self, other: &Self) -> Ordering {
        self.center_hz
            .total_cmp(&other.center_hz)
            .then_with(|| other.amplitude_db.total_cmp(&self.amplitude_db))
            .then_with(|| self.sigma_hz.total_cmp(&other.sigma_hz))
    }
}

/// Background plus narrowband interferers over a band.
///
/// The interferer list is kept in canonical order (see
/// [`Interferer::canonical_cmp`]) so equality and serialization are
/// deterministic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryModel {
    pub background: BackgroundParams,
    pub interferers: Vec<Interferer>,
    #[serde(default)]
    pub band: Band,
}

impl StationaryModel {
    pub fn new(
        background: BackgroundParams,
        mut interferers: Vec<Interferer>,
        band: Band,
    ) -> Result<Self> {
        background.validate()?;
        band.validate()?;
        for i in &interferers {
            i.validate()?;
        }
        interferers.sort_by(Interferer::canonical_cmp);
        Ok(StationaryModel {
            background,
            interferers,
            band,
        })
    }

    /// Background-only model over the default band.
    pub fn background_only(background: BackgroundParams) -> Self {
        StationaryModel {
            background,
            interferers: Vec::new(),
            band: Band::default(),
        }
    }

    pub fn from_preset(p: Preset) -> Self {
        Self::background_only(p.params())
    }

    /// Checks invariants and restores canonical interferer order.
    pub fn validated(self) -> Result<Self> {
        Self::new(self.background, self.interferers, self.band)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: StationaryModel = serde_json::from_str(s)?;
        m.validated()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }
}

fn check_frequency(f_hz: f64) -> Result<()> {
    if !f_hz.is_finite() || f_hz <= 0.0 {
        return Err(Error::Domain(format!(
            "frequency must be positive and finite, got {f_hz}"
        )));
    }
    Ok(())
}

/// Background level in dBm/Hz at `f_hz`.
pub fn eval_background(p: &BackgroundParams, f_hz: f64) -> Result<f64> {
    check_frequency(f_hz)?;
    Ok(p.level_dbm_hz(f_hz))
}

/// Summed interferer contribution in dB at `f_hz`; zero when there are none.
pub fn eval_narrowband(m: &StationaryModel, f_hz: f64) -> Result<f64> {
    check_frequency(f_hz)?;
    Ok(narrowband_unchecked(&m.interferers, f_hz))
}

#[inline]
pub(crate) fn narrowband_unchecked(interferers: &[Interferer], f_hz: f64) -> f64 {
    interferers.iter().map(|i| i.level_db(f_hz)).sum()
}

/// Stationary noise level in dBm/Hz: background plus interferers in dB.
pub fn eval_stationary(m: &StationaryModel, f_hz: f64) -> Result<f64> {
    Ok(eval_background(&m.background, f_hz)? + eval_narrowband(m, f_hz)?)
}

/// Evaluates the model on `n_points` uniformly spaced frequencies spanning
/// `band` inclusively.
pub fn eval_psd_grid(m: &StationaryModel, band: &Band, n_points: usize) -> Result<PsdTrace> {
    eval_psd_grid_with(m, band, n_points, Execution::default())
}

pub fn eval_psd_grid_with(
    m: &StationaryModel,
    band: &Band,
    n_points: usize,
    exec: Execution,
) -> Result<PsdTrace> {
    if n_points < 2 {
        return Err(argument(format!("n_points must be >= 2, got {n_points}")));
    }
    band.validate()?;
    let freqs = uniform_grid(band, n_points);
    let psd = exec.map_slice(&freqs, |&f| {
        m.background.level_dbm_hz(f) + narrowband_unchecked(&m.interferers, f)
    });
    PsdTrace::new(freqs, psd)
}

/// `n` points from `f_min` to `f_max`, both endpoints exact.
pub(crate) fn uniform_grid(band: &Band, n: usize) -> Vec<f64> {
    let step = band.width_hz() / (n - 1) as f64;
    (0..n)
        .map(|k| {
            if k == n - 1 {
                band.f_max_hz
            } else {
                band.f_min_hz + k as f64 * step
            }
        })
        .collect()
}
