use serde::{Deserialize, Serialize};

use crate::error::{argument, Result};
use crate::model::Band;

/// A one-sided PSD trace: strictly increasing frequencies (Hz) and levels
/// (dBm/Hz) of equal length.
///
/// Any length of two or more is accepted here; fitters impose their own
/// minimum point counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsdTrace {
    freqs_hz: Vec<f64>,
    psd_dbm_hz: Vec<f64>,
}

impl PsdTrace {
    pub fn new(freqs_hz: Vec<f64>, psd_dbm_hz: Vec<f64>) -> Result<Self> {
        if freqs_hz.len() != psd_dbm_hz.len() {
            return Err(argument(format!(
                "trace columns differ in length ({} vs {})",
                freqs_hz.len(),
                psd_dbm_hz.len()
            )));
        }
        if freqs_hz.len() < 2 {
            return Err(argument("trace needs at least 2 points"));
        }
        if freqs_hz.iter().chain(&psd_dbm_hz).any(|v| !v.is_finite()) {
            return Err(argument("trace contains non-finite values"));
        }
        if freqs_hz.windows(2).any(|w| w[0] >= w[1]) {
            return Err(argument("trace frequencies must be strictly increasing"));
        }
        Ok(PsdTrace {
            freqs_hz,
            psd_dbm_hz,
        })
    }

    pub fn freqs_hz(&self) -> &[f64] {
        &self.freqs_hz
    }

    pub fn psd_dbm_hz(&self) -> &[f64] {
        &self.psd_dbm_hz
    }

    pub fn len(&self) -> usize {
        self.freqs_hz.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs_hz.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.freqs_hz
            .iter()
            .copied()
            .zip(self.psd_dbm_hz.iter().copied())
    }

    /// Indices of points whose frequency lies inside `band`.
    pub fn in_band_indices(&self, band: &Band) -> Vec<usize> {
        (0..self.len())
            .filter(|&k| band.contains(self.freqs_hz[k]))
            .collect()
    }

    /// Returns a copy with each level replaced by `f(freq_hz, level)`.
    pub fn map_levels(&self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let psd = self.iter().map(|(fr, p)| f(fr, p)).collect();
        PsdTrace::new(self.freqs_hz.clone(), psd)
    }
}
