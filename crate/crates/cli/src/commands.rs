use std::path::{Path, PathBuf};

use nbplc_core::estimation::{
    characterize_campaign, fit_background, fit_normal, fit_trace, ks_statistic, welch_psd,
    FitReport,
};
use nbplc_core::io::{
    decode_waveform, read_trace_csv, write_columns, write_trace_csv, write_waveform_bin,
    write_waveform_csv,
};
use nbplc_core::model::eval_psd_grid;
use nbplc_core::stochastic::{sample_models, NormalSpec};
use nbplc_core::synthesis::{amplitude_distribution, expected_mean_power, synthesize};
use nbplc_core::{
    Band, ParameterPriors, Preset, PsdTrace, RngState, StationaryModel, UnitContext, Waveform,
};
use serde_json::{json, Value};

use crate::output::{
    companion, create_dir, read_input, read_input_string, write_atomic, write_json, write_with,
    CmdResult, Failure,
};
use crate::{Command, FitInput, ModelSource, Units, WaveFormat};

/// Significance level at which `validate` reports pass or fail.
const VALIDATE_ALPHA: f64 = 0.01;

pub fn run(cmd: Command) -> CmdResult {
    match cmd {
        Command::Presets { out } => presets(out.as_deref()),
        Command::EvalPsd {
            source,
            band,
            points,
            out,
        } => eval_psd(&source, band, points, out.as_deref()),
        Command::Sample {
            priors,
            seed,
            count,
            out,
        } => sample(priors.as_deref(), seed.seed, count, &out),
        Command::Generate {
            source,
            duration,
            rate,
            seed,
            format,
            units,
            out,
        } => generate(&source, duration, rate, seed.seed, format, &units, &out),
        Command::Fit {
            input,
            band,
            resolution,
            units,
            out,
        } => fit(&input, &band, resolution, &units, &out),
        Command::Characterize {
            traces,
            band,
            out,
            report,
        } => characterize(&traces, &band, &out, report.as_deref()),
        Command::Validate {
            source,
            seed,
            duration,
            rate,
            bins,
            cdf_points,
            units,
            out,
        } => {
            let opts = ValidateOpts {
                seed: seed.seed,
                duration,
                rate,
                bins,
                cdf_points,
            };
            validate(&source, &opts, &units, &out)
        }
    }
}

fn load_model(source: &ModelSource) -> CmdResult<StationaryModel> {
    match (&source.model, &source.preset) {
        (Some(path), _) => {
            let text = read_input_string(path)?;
            StationaryModel::from_json(&text)
                .map_err(|e| Failure::input(format!("{}: {e}", path.display())))
        }
        (None, Some(name)) => Ok(StationaryModel::from_preset(name.parse::<Preset>()?)),
        (None, None) => Err(Failure::input("one of --model or --preset is required")),
    }
}

fn unit_context(units: &Units) -> CmdResult<UnitContext> {
    Ok(UnitContext::new(units.impedance)?)
}

fn emit(out: Option<&Path>, bytes: Vec<u8>) -> CmdResult {
    match out {
        Some(path) => write_atomic(path, &bytes),
        None => {
            use std::io::Write;
            std::io::stdout()
                .write_all(&bytes)
                .map_err(|e| Failure::io(format!("cannot write standard output: {e}")))
        }
    }
}

fn presets(out: Option<&Path>) -> CmdResult {
    let table: serde_json::Map<String, Value> = Preset::ALL
        .iter()
        .map(|p| (p.name().to_string(), json!(p.params())))
        .collect();
    let mut text = serde_json::to_string_pretty(&table).expect("presets serialize");
    text.push('\n');
    emit(out, text.into_bytes())
}

fn eval_psd(
    source: &ModelSource,
    band: Option<Band>,
    points: usize,
    out: Option<&Path>,
) -> CmdResult {
    let model = load_model(source)?;
    let band = band.unwrap_or(model.band);
    let trace = eval_psd_grid(&model, &band, points)?;
    let mut buf = Vec::new();
    write_trace_csv(&mut buf, &trace).map_err(|e| Failure::io(e.to_string()))?;
    emit(out, buf)
}

fn sample(priors: Option<&Path>, seed: u64, count: usize, dir: &Path) -> CmdResult {
    if count == 0 {
        return Err(Failure::input("--count must be at least 1"));
    }
    let priors = match priors {
        Some(path) => ParameterPriors::from_json(&read_input_string(path)?)
            .map_err(|e| Failure::input(format!("{}: {e}", path.display())))?,
        None => ParameterPriors::default(),
    };
    let models = sample_models(seed, &priors, count)?;
    create_dir(dir)?;
    let width = count.saturating_sub(1).to_string().len().max(4);
    for (i, m) in models.iter().enumerate() {
        let mut text = m.to_json();
        text.push('\n');
        write_atomic(
            &dir.join(format!("model_{i:0width$}.json")),
            text.as_bytes(),
        )?;
    }
    let total: usize = models.iter().map(|m| m.interferers.len()).sum();
    println!(
        "wrote {count} models to {} ({total} interferers, seed {seed})",
        dir.display()
    );
    Ok(())
}

fn generate(
    source: &ModelSource,
    duration: f64,
    rate: f64,
    seed: u64,
    format: WaveFormat,
    units: &Units,
    out: &Path,
) -> CmdResult {
    let model = load_model(source)?;
    let ctx = unit_context(units)?;
    let w = synthesize(&model, duration, rate, &mut RngState::from_seed(seed), &ctx)?;
    match format {
        WaveFormat::Csv => write_with(out, |buf| write_waveform_csv(buf, &w))?,
        WaveFormat::Bin => write_with(out, |buf| write_waveform_bin(buf, &w))?,
    }
    println!(
        "samples={} rate_hz={} rms_v={} seed={seed}",
        w.len(),
        rate,
        nbplc_core::io::format_sig12(w.rms())
    );
    Ok(())
}

fn load_fit_input(
    input: &FitInput,
    resolution: f64,
    ctx: &UnitContext,
) -> CmdResult<(PsdTrace, bool)> {
    if let Some(path) = &input.trace {
        let bytes = read_input(path)?;
        let trace = read_trace_csv(bytes.as_slice())
            .map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
        return Ok((trace, false));
    }
    let path = input.waveform.as_ref().expect("clap enforces one input");
    let bytes = read_input(path)?;
    let w: Waveform =
        decode_waveform(&bytes).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    Ok((welch_psd(&w, resolution, ctx)?, true))
}

fn fit(input: &FitInput, band: &Band, resolution: f64, units: &Units, out: &Path) -> CmdResult {
    let ctx = unit_context(units)?;
    let (trace, from_waveform) = load_fit_input(input, resolution, &ctx)?;
    let source = input
        .trace
        .as_ref()
        .or(input.waveform.as_ref())
        .map(|p| p.display().to_string());
    if from_waveform {
        let psd_path = companion(out, "psd.csv");
        write_with(&psd_path, |buf| write_trace_csv(buf, &trace))?;
    }

    match fit_trace(&trace, band) {
        Ok((report, bg)) => {
            write_with(&companion(out, "residual.csv"), |buf| {
                write_trace_csv(buf, &bg.residuals)
            })?;
            write_json(out, &fit_document(&report, source))?;
            println!(
                "background a={} b={} c={}; {} interferers; residual {} dB rms",
                nbplc_core::io::format_sig12(report.background.a),
                nbplc_core::io::format_sig12(report.background.b),
                nbplc_core::io::format_sig12(report.background.c),
                report.interferers.len(),
                nbplc_core::io::format_sig12(report.residual_rms_db),
            );
            Ok(())
        }
        Err(e) => {
            let failure = Failure::from(e);
            let partial = json!({
                "status": "failed",
                "error": failure.message,
                "input": source,
                "points": trace.len(),
                "in_band_points": trace.in_band_indices(band).len(),
                "band": band,
                // the background stage may still succeed when extraction is what failed
                "background": fit_background(&trace, band).ok().map(|b| b.params),
            });
            write_json(out, &partial)?;
            Err(failure)
        }
    }
}

fn fit_document(report: &FitReport, source: Option<String>) -> Value {
    let mut doc = json!({ "status": "ok", "input": source });
    if let (Value::Object(d), Value::Object(r)) = (&mut doc, json!(report)) {
        d.extend(r);
    }
    doc
}

fn characterize(traces: &[PathBuf], band: &Band, out: &Path, report: Option<&Path>) -> CmdResult {
    let loaded = traces
        .iter()
        .map(|path| {
            let bytes = read_input(path)?;
            read_trace_csv(bytes.as_slice())
                .map_err(|e| Failure::input(format!("{}: {e}", path.display())))
        })
        .collect::<CmdResult<Vec<_>>>()?;
    match characterize_campaign(&loaded, band) {
        Ok(result) => {
            write_json(out, &result.priors)?;
            if let Some(path) = report {
                write_json(path, &result)?;
            }
            println!(
                "{} traces fitted, {} failed; lambda={} amplitude shape={}",
                result.reports.len(),
                result.failures.len(),
                nbplc_core::io::format_sig12(result.priors.count.lambda),
                nbplc_core::io::format_sig12(result.priors.amp_db.shape),
            );
            Ok(())
        }
        Err(e) => {
            let failure = Failure::from(e);
            if failure.code == crate::output::EXIT_FIT {
                let partial = json!({
                    "status": "failed",
                    "error": failure.message,
                    "traces": traces.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
                });
                write_json(out, &partial)?;
            }
            Err(failure)
        }
    }
}

struct ValidateOpts {
    seed: u64,
    duration: f64,
    rate: f64,
    bins: usize,
    cdf_points: usize,
}

/// Synthesizes from the model and compares the amplitude distribution with
/// the zero-mean Gaussian whose variance is the model's in-band power.
fn validate(source: &ModelSource, opts: &ValidateOpts, units: &Units, out: &Path) -> CmdResult {
    if opts.cdf_points < 2 {
        return Err(Failure::input("--cdf-points must be at least 2"));
    }
    let model = load_model(source)?;
    let ctx = unit_context(units)?;
    let w = synthesize(
        &model,
        opts.duration,
        opts.rate,
        &mut RngState::from_seed(opts.seed),
        &ctx,
    )?;
    let model_std = expected_mean_power(&model, w.len(), opts.rate, &ctx).sqrt();
    let reference = NormalSpec::new(0.0, model_std)?;
    let dist = amplitude_distribution(&w, opts.bins)?;
    let ks = ks_statistic(w.samples(), |x| reference.cdf(x))?;
    let fitted = fit_normal(w.samples())?;

    let centers = dist.bin_centers();
    let model_pdf: Vec<f64> = centers.iter().map(|&x| normal_pdf(x, model_std)).collect();
    let pdf_path = companion(out, "pdf.csv");
    write_with(&pdf_path, |buf| {
        write_columns(
            buf,
            &["amplitude_v", "empirical_pdf", "model_pdf"],
            &[&centers, &dist.pdf, &model_pdf],
        )
    })?;

    let n = dist.sorted.len();
    let rows = opts.cdf_points.min(n);
    let picks: Vec<usize> = (0..rows).map(|i| i * (n - 1) / (rows - 1)).collect();
    let xs: Vec<f64> = picks.iter().map(|&i| dist.sorted[i]).collect();
    let emp: Vec<f64> = picks.iter().map(|&i| dist.cdf[i]).collect();
    let theo: Vec<f64> = xs.iter().map(|&x| reference.cdf(x)).collect();
    let cdf_path = companion(out, "cdf.csv");
    write_with(&cdf_path, |buf| {
        write_columns(
            buf,
            &["amplitude_v", "empirical_cdf", "model_cdf"],
            &[&xs, &emp, &theo],
        )
    })?;

    let passed = ks.passes(VALIDATE_ALPHA);
    let report = json!({
        "status": "ok",
        "seed": opts.seed,
        "samples": w.len(),
        "sample_rate_hz": opts.rate,
        "rms_v": w.rms(),
        "model_rms_v": model_std,
        "reference": { "family": "normal", "mean": 0.0, "std": model_std },
        "fitted": fitted.family,
        "ks_statistic": ks.statistic,
        "n": ks.n,
        "pass_at": ks.pass_at,
        "alpha": VALIDATE_ALPHA,
        "passed": passed,
        "pdf_file": file_name(&pdf_path),
        "cdf_file": file_name(&cdf_path),
    });
    write_json(out, &report)?;
    println!(
        "KS D={} n={} {} at alpha={VALIDATE_ALPHA}",
        nbplc_core::io::format_sig12(ks.statistic),
        ks.n,
        if passed { "PASS" } else { "FAIL" }
    );
    Ok(())
}

fn normal_pdf(x: f64, std: f64) -> f64 {
    let z = x / std;
    (-0.5 * z * z).exp() / (std * (std::f64::consts::TAU).sqrt())
}

fn file_name(p: &Path) -> String {
    p.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}
