//! File formats: PSD trace CSV, waveform CSV and the `NBW1` binary waveform.
//!
//! Human-readable numbers are rounded to 12 significant digits and printed in
//! their shortest round-trip form.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::synthesis::Waveform;
use crate::trace::PsdTrace;

pub const TRACE_HEADER: [&str; 2] = ["freq_hz", "psd_dbm_hz"];
pub const WAVEFORM_HEADER: [&str; 2] = ["t_s", "volts"];
pub const BIN_MAGIC: &[u8; 4] = b"NBW1";
/// Bytes before the first sample: magic, sample rate (f64 LE), 4 reserved zero bytes.
pub const BIN_HEADER_LEN: usize = 16;

/// Formats `v` with 12 significant digits, dropping trailing zeros.
pub fn format_sig12(v: f64) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    let rounded: f64 = format!("{v:.11e}").parse().expect("formatted float parses");
    let mag = rounded.abs();
    if rounded == 0.0 || (1e-4..1e15).contains(&mag) {
        format!("{rounded}")
    } else {
        format!("{rounded:e}")
    }
}

/// Writes a two-column CSV with the given header.
pub fn write_columns<W: Write>(out: W, header: &[&str], columns: &[&[f64]]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    let rows = columns.first().map_or(0, |c| c.len());
    let mut record = Vec::with_capacity(columns.len());
    for r in 0..rows {
        record.clear();
        record.extend(columns.iter().map(|c| format_sig12(c[r])));
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a numeric CSV whose header must equal `header`.
pub fn read_columns<R: Read>(input: R, header: &[&str]) -> Result<Vec<Vec<f64>>> {
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input);
    let got: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if got != header {
        return Err(Error::Parse(format!(
            "expected CSV header `{}`, found `{}`",
            header.join(","),
            got.join(",")
        )));
    }
    let mut cols = vec![Vec::new(); header.len()];
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        if rec.len() != header.len() {
            return Err(Error::Parse(format!(
                "row {} has {} fields",
                line + 2,
                rec.len()
            )));
        }
        for (c, field) in rec.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| {
                Error::Parse(format!("row {}: `{field}` is not a number", line + 2))
            })?;
            cols[c].push(v);
        }
    }
    Ok(cols)
}

pub fn write_trace_csv<W: Write>(out: W, trace: &PsdTrace) -> Result<()> {
    write_columns(out, &TRACE_HEADER, &[trace.freqs_hz(), trace.psd_dbm_hz()])
}

pub fn read_trace_csv<R: Read>(input: R) -> Result<PsdTrace> {
    let mut cols = read_columns(input, &TRACE_HEADER)?;
    let psd = cols.pop().unwrap();
    let freqs = cols.pop().unwrap();
    PsdTrace::new(freqs, psd)
}

pub fn write_waveform_csv<W: Write>(out: W, w: &Waveform) -> Result<()> {
    let t: Vec<f64> = (0..w.len())
        .map(|i| i as f64 / w.sample_rate_hz())
        .collect();
    write_columns(out, &WAVEFORM_HEADER, &[&t, w.samples()])
}

/// Reads a `t_s,volts` CSV; the rate is recovered from the time span.
pub fn read_waveform_csv<R: Read>(input: R) -> Result<Waveform> {
    let mut cols = read_columns(input, &WAVEFORM_HEADER)?;
    let volts = cols.pop().unwrap();
    let t = cols.pop().unwrap();
    if t.len() < 2 {
        return Err(Error::Parse(
            "waveform CSV needs two rows to determine the sample rate".into(),
        ));
    }
    let span = t[t.len() - 1] - t[0];
    if !(span > 0.0) {
        return Err(Error::Parse("waveform CSV times must increase".into()));
    }
    let rate = (t.len() - 1) as f64 / span;
    // timestamps carry 12 significant digits, so snap the rate to that precision
    let rate: f64 = format_sig12(rate).parse().unwrap();
    Waveform::new(rate, volts)
}

pub fn write_waveform_bin<W: Write>(mut out: W, w: &Waveform) -> Result<()> {
    let mut buf = Vec::with_capacity(BIN_HEADER_LEN + 8 * w.len());
    buf.extend_from_slice(BIN_MAGIC);
    buf.extend_from_slice(&w.sample_rate_hz().to_le_bytes());
    buf.extend_from_slice(&[0u8; 4]);
    for v in w.samples() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    out.write_all(&buf)?;
    out.flush()?;
    Ok(())
}

pub fn read_waveform_bin<R: Read>(mut input: R) -> Result<Waveform> {
    let mut buf = Vec::new();
    input.read_to_end(&mut buf)?;
    decode_waveform_bin(&buf)
}

pub fn decode_waveform_bin(buf: &[u8]) -> Result<Waveform> {
    if buf.len() < BIN_HEADER_LEN || &buf[..4] != BIN_MAGIC {
        return Err(Error::Parse("missing NBW1 header".into()));
    }
    let body = &buf[BIN_HEADER_LEN..];
    if !body.len().is_multiple_of(8) {
        return Err(Error::Parse(format!(
            "sample payload of {} bytes is not a multiple of 8",
            body.len()
        )));
    }
    let rate = f64::from_le_bytes(buf[4..12].try_into().unwrap());
    let samples = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Waveform::new(rate, samples)
}

/// Decodes either waveform format, picking binary when the magic is present.
pub fn decode_waveform(bytes: &[u8]) -> Result<Waveform> {
    if bytes.starts_with(BIN_MAGIC) {
        decode_waveform_bin(bytes)
    } else {
        read_waveform_csv(bytes)
    }
}
