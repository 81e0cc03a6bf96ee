use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{argument, Result};
use crate::exec::Execution;
use crate::synthesis::{v2hz_to_dbmhz, UnitContext, Waveform};
use crate::trace::PsdTrace;

/// Analyzer resolution bandwidth used when none is given (Hz).
pub const DEFAULT_RESOLUTION_HZ: f64 = 3000.0;

/// Minimum number of averaged segments.
pub const MIN_SEGMENTS: usize = 4;

/// Segments per work item; partial sums are combined in chunk order.
const CHUNK_SEGMENTS: usize = 64;

/// Power-of-two segment length closest to `sample_rate / resolution`.
pub fn segment_len(sample_rate_hz: f64, resolution_hz: f64) -> usize {
    let target = (sample_rate_hz / resolution_hz).max(2.0);
    let lower = 1usize << (target.log2().floor() as u32);
    let upper = lower << 1;
    if target - lower as f64 <= upper as f64 - target {
        lower
    } else {
        upper
    }
}

/// Welch PSD: Hann window, 50% overlap, one-sided, in dBm/Hz.
///
/// Density is `2 |X_k|^2 / (fs * sum w^2)` (not doubled at Nyquist), so white
/// noise of variance `s2` reads `s2 / (fs/2)` V^2/Hz. The DC bin is dropped;
/// the trace runs from `fs/L` to `fs/2`.
pub fn welch_psd(w: &Waveform, resolution_hz: f64, ctx: &UnitContext) -> Result<PsdTrace> {
    welch_psd_with(w, resolution_hz, ctx, Execution::default())
}

pub fn welch_psd_with(
    w: &Waveform,
    resolution_hz: f64,
    ctx: &UnitContext,
    exec: Execution,
) -> Result<PsdTrace> {
    if !(resolution_hz.is_finite() && resolution_hz > 0.0) {
        return Err(argument(format!(
            "resolution must be positive, got {resolution_hz}"
        )));
    }
    let fs = w.sample_rate_hz();
    let len = segment_len(fs, resolution_hz);
    let hop = len / 2;
    let x = w.samples();
    if x.len() < len {
        return Err(argument(format!(
            "waveform of {} samples is shorter than one {len}-sample segment",
            x.len()
        )));
    }
    let segments = (x.len() - len) / hop + 1;
    if segments < MIN_SEGMENTS {
        return Err(argument(format!(
            "waveform of {} samples yields {segments} segments of {len}; need {MIN_SEGMENTS}",
            x.len()
        )));
    }

    let window: Vec<f64> = (0..len)
        .map(|i| 0.5 - 0.5 * (std::f64::consts::TAU * i as f64 / len as f64).cos())
        .collect();
    let window_power: f64 = window.iter().map(|v| v * v).sum();
    let fft = FftPlanner::new().plan_fft_forward(len);
    let half = len / 2;

    let chunks = segments.div_ceil(CHUNK_SEGMENTS);
    let partial = exec.map_indexed(chunks, |c| {
        let mut acc = vec![0.0; half + 1];
        let mut buf = vec![Complex64::new(0.0, 0.0); len];
        let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        let first = c * CHUNK_SEGMENTS;
        for s in first..(first + CHUNK_SEGMENTS).min(segments) {
            let seg = &x[s * hop..s * hop + len];
            for ((b, &v), &wv) in buf.iter_mut().zip(seg).zip(&window) {
                *b = Complex64::new(v * wv, 0.0);
            }
            fft.process_with_scratch(&mut buf, &mut scratch);
            for (a, b) in acc.iter_mut().zip(&buf[..=half]) {
                *a += b.norm_sqr();
            }
        }
        acc
    });
    let mut total = vec![0.0; half + 1];
    for p in &partial {
        for (t, v) in total.iter_mut().zip(p) {
            *t += v;
        }
    }

    let scale = 1.0 / (segments as f64 * fs * window_power);
    let mut freqs = Vec::with_capacity(half);
    let mut psd = Vec::with_capacity(half);
    for (k, &p) in total.iter().enumerate().skip(1) {
        let one_sided = if k == half { 1.0 } else { 2.0 };
        let density = (one_sided * p * scale).max(f64::MIN_POSITIVE);
        freqs.push(k as f64 * fs / len as f64);
        psd.push(v2hz_to_dbmhz(density, ctx));
    }
    PsdTrace::new(freqs, psd)
}
