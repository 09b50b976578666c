use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::json;

use mci_deconv::evaluation::{
    heatmap, run_grid, write_raw_csv, write_summary_csv, CellSummary, Heatmap, Method, SimulationConfig,
};
use mci_deconv::homotopy::{compute_path, SolverKind};
use mci_deconv::io::{read_hrf, read_series, write_activations, write_hrf};
use mci_deconv::mci::{gmm_classify, gmm_fit, mci_from_path, ActivationEstimate, FallbackReason};
use mci_deconv::selection::select;
use mci_deconv::signal::{canonical_hrf, ols_estimate, toeplitz, ConvolutionOperator, HrfKernel, TimeSeries};
use mci_deconv::Error;

use crate::manifest::{now_unix, FileDigest, RunManifest};
use crate::{DeconvolveArgs, Failure, HrfArgs, PathArgs, SimulateArgs, Solver, OUTPUT_DIR_ENV};

const DEFAULT_TR: f64 = 2.5;
const DEFAULT_DURATION: f64 = 32.0;

fn run_err(e: impl std::fmt::Display) -> Failure {
    Failure::Run(e.to_string())
}

fn load_config<T: DeserializeOwned + Default>(path: &Option<PathBuf>, inputs: &mut Vec<FileDigest>) -> Result<T, Failure> {
    let Some(path) = path else { return Ok(T::default()) };
    let text = fs::read_to_string(path).map_err(|e| Failure::Usage(format!("config {}: {e}", path.display())))?;
    let cfg = serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("config {}: {e}", path.display())))?;
    inputs.push(FileDigest::of(path).map_err(run_err)?);
    Ok(cfg)
}

fn default_out() -> PathBuf {
    std::env::var_os(OUTPUT_DIR_ENV).map_or_else(|| PathBuf::from("results"), PathBuf::from)
}

fn input_err(path: &Path, e: Error) -> Failure {
    match e {
        Error::InvalidParameter(msg) => Failure::Usage(format!("{}: {msg}", path.display())),
        e => Failure::Input(format!("{}: {e}", path.display())),
    }
}

fn read_series_file(path: &Path, tr: Option<f64>, inputs: &mut Vec<FileDigest>) -> Result<TimeSeries, Failure> {
    let f = File::open(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    let y = read_series(f, tr).map_err(|e| input_err(path, e))?;
    inputs.push(FileDigest::of(path).map_err(run_err)?);
    Ok(y)
}

fn load_kernel(
    hrf_file: &Option<PathBuf>,
    hrf_shift: Option<usize>,
    tr: f64,
    inputs: &mut Vec<FileDigest>,
) -> Result<HrfKernel, Failure> {
    match hrf_file {
        Some(_) if hrf_shift.is_some() => Err(Failure::Usage("hrf_shift and hrf_file are mutually exclusive".into())),
        Some(path) => {
            let f = File::open(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
            let h = read_hrf(f, tr).map_err(|e| input_err(path, e))?;
            inputs.push(FileDigest::of(path).map_err(run_err)?);
            Ok(h)
        }
        None => canonical_hrf(tr, hrf_shift.unwrap_or(0), DEFAULT_DURATION).map_err(|e| Failure::Usage(e.to_string())),
    }
}

fn write_with(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> mci_deconv::Result<()>) -> Result<FileDigest, Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| run_err(format!("{}: {e}", dir.display())))?;
    }
    let file = File::create(path).map_err(|e| run_err(format!("{}: {e}", path.display())))?;
    let mut w = BufWriter::new(file);
    f(&mut w).map_err(|e| run_err(format!("{}: {e}", path.display())))?;
    w.flush().map_err(|e| run_err(format!("{}: {e}", path.display())))?;
    drop(w);
    FileDigest::of(path).map_err(run_err)
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<FileDigest, Failure> {
    write_with(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        writeln!(w)?;
        Ok(())
    })
}

fn sidecar(path: &Path) -> PathBuf {
    let mut s: OsString = path.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

#[derive(Serialize)]
struct SimulationSummary<'a> {
    config: &'a SimulationConfig,
    records: usize,
    failures: usize,
    partial: bool,
    cells: &'a [CellSummary],
    jaccard: Vec<Heatmap>,
}

pub fn simulate(args: SimulateArgs) -> Result<(), Failure> {
    let started = now_unix();
    let mut inputs = Vec::new();
    let file: SimulateArgs = load_config(&args.config, &mut inputs)?;
    let d = SimulationConfig::default();
    let config = SimulationConfig {
        n: args.n.or(file.n).unwrap_or(d.n),
        spike_counts: args.spikes.or(file.spikes).unwrap_or(d.spike_counts),
        snr_values: args.snr.or(file.snr).unwrap_or(d.snr_values),
        replicates: args.reps.or(file.reps).unwrap_or(d.replicates),
        methods: args.methods.or(file.methods).unwrap_or(d.methods),
        tr: args.tr.or(file.tr).unwrap_or(d.tr),
        hrf_shift: args.hrf_shift.or(file.hrf_shift).unwrap_or(d.hrf_shift),
        seed: args.seed.or(file.seed).unwrap_or(d.seed),
    };
    let parallelism = args.parallelism.or(file.parallelism).unwrap_or(0);
    let out = args.out.or(file.out).unwrap_or_else(default_out);
    config.validate().map_err(|e| Failure::Usage(e.to_string()))?;

    let result = run_grid(&config, parallelism).map_err(run_err)?;
    let failures = result.failures();
    let jaccard = config
        .methods
        .iter()
        .map(|&m| heatmap(&result, m, "jaccard"))
        .collect::<mci_deconv::Result<Vec<_>>>()
        .map_err(run_err)?;
    let summary = SimulationSummary {
        config: &config,
        records: result.raw.len(),
        failures,
        partial: failures > 0,
        cells: &result.summary,
        jaccard,
    };

    let resolved = SimulateArgs {
        config: None,
        n: Some(config.n),
        spikes: Some(config.spike_counts.clone()),
        snr: Some(config.snr_values.clone()),
        reps: Some(config.replicates),
        methods: Some(config.methods.clone()),
        seed: Some(config.seed),
        tr: Some(config.tr),
        hrf_shift: Some(config.hrf_shift),
        parallelism: Some(parallelism),
        out: Some(out.clone()),
    };
    let mut manifest = RunManifest::new("simulate", resolved, Some(config.seed), started);
    manifest.inputs = inputs;
    manifest.outputs.push(write_with(&out.join("raw.csv"), |w| write_raw_csv(&result.raw, w))?);
    manifest.outputs.push(write_with(&out.join("summary.csv"), |w| write_summary_csv(&result.summary, w))?);
    manifest.outputs.push(write_json(&out.join("summary.json"), &summary)?);
    manifest.write(&out.join("manifest.json")).map_err(run_err)?;

    if failures > 0 {
        return Err(Failure::Partial(format!(
            "{failures} of {} method runs failed; see the error column of {}",
            result.raw.len(),
            out.join("raw.csv").display()
        )));
    }
    Ok(())
}

fn run_method(
    method: Method,
    y: &TimeSeries,
    op: &ConvolutionOperator,
) -> mci_deconv::Result<(ActivationEstimate, Option<FallbackReason>, serde_json::Value)> {
    match (method.solver(), method.criterion()) {
        (Some(kind), None) => {
            let path = compute_path(kind, op, y.values())?;
            let outcome = mci_from_path(y, op, &path)?;
            let details = serde_json::to_value(&outcome.diagnostics)?;
            Ok((outcome.estimate, outcome.fallback, details))
        }
        (Some(kind), Some(criterion)) => {
            let path = compute_path(kind, op, y.values())?;
            let sel = select(&path, y.values(), op, criterion)?;
            let details = json!({
                "solver_kind": kind,
                "lambda0": path.lambda0,
                "criterion": criterion,
                "selected_lambda": sel.lambda,
                "trace": sel.trace,
            });
            Ok((sel.estimate, None, details))
        }
        (None, _) => {
            let xi = ols_estimate(y, op)?;
            let model = gmm_fit(&xi)?;
            let estimate = gmm_classify(&xi, &model)?;
            Ok((estimate, None, json!({ "xi": xi, "model": model })))
        }
    }
}

pub fn deconvolve(args: DeconvolveArgs) -> Result<(), Failure> {
    let started = now_unix();
    let mut inputs = Vec::new();
    let file: DeconvolveArgs = load_config(&args.config, &mut inputs)?;
    let input = args.input.or(file.input).ok_or_else(|| Failure::Usage("--input is required".into()))?;
    let tr = args.tr.or(file.tr);
    let hrf_shift = args.hrf_shift.or(file.hrf_shift);
    let hrf_file = args.hrf_file.or(file.hrf_file);
    let method = args.method.or(file.method).unwrap_or(Method::MciDs);
    let out = args.out.or(file.out).unwrap_or_else(default_out);

    let y = read_series_file(&input, tr, &mut inputs)?;
    let h = load_kernel(&hrf_file, hrf_shift, y.tr(), &mut inputs)?;
    let op = toeplitz(&h, y.len()).map_err(run_err)?;
    let (estimate, fallback, details) = run_method(method, &y, &op).map_err(|e| run_err(format!("{method}: {e}")))?;

    let diagnostics = json!({
        "method": method,
        "n": y.len(),
        "tr": y.tr(),
        "hrf": {
            "source": if hrf_file.is_some() { "file" } else { "canonical" },
            "onset_shift": h.onset_shift(),
            "coefficients": h.coefficients(),
        },
        "support": estimate.support(),
        "fallback": fallback,
        "details": details,
    });
    let resolved = DeconvolveArgs {
        config: None,
        input: Some(input),
        tr: Some(y.tr()),
        hrf_shift: if hrf_file.is_some() { None } else { Some(h.onset_shift()) },
        hrf_file,
        method: Some(method),
        out: Some(out.clone()),
    };
    let mut manifest = RunManifest::new("deconvolve", resolved, None, started);
    manifest.inputs = inputs;
    manifest.outputs.push(write_with(&out.join("activations.csv"), |w| write_activations(&estimate, w))?);
    manifest.outputs.push(write_json(&out.join("diagnostics.json"), &diagnostics)?);
    manifest.write(&out.join("manifest.json")).map_err(run_err)
}

pub fn hrf(args: HrfArgs) -> Result<(), Failure> {
    let started = now_unix();
    let mut inputs = Vec::new();
    let file: HrfArgs = load_config(&args.config, &mut inputs)?;
    let tr = args.tr.or(file.tr).unwrap_or(DEFAULT_TR);
    let shift = args.hrf_shift.or(file.hrf_shift).unwrap_or(0);
    let duration = args.duration.or(file.duration).unwrap_or(DEFAULT_DURATION);
    let out = args.out.or(file.out);
    let h = canonical_hrf(tr, shift, duration).map_err(|e| Failure::Usage(e.to_string()))?;

    let Some(out) = out else {
        return write_hrf(&h, std::io::stdout().lock()).map_err(run_err);
    };
    let resolved = HrfArgs {
        config: None,
        tr: Some(tr),
        hrf_shift: Some(shift),
        duration: Some(duration),
        out: Some(out.clone()),
    };
    let mut manifest = RunManifest::new("hrf", resolved, None, started);
    manifest.inputs = inputs;
    manifest.outputs.push(write_with(&out, |w| write_hrf(&h, w))?);
    manifest.write(&sidecar(&out)).map_err(run_err)
}

pub fn path(args: PathArgs) -> Result<(), Failure> {
    let started = now_unix();
    let mut inputs = Vec::new();
    let file: PathArgs = load_config(&args.config, &mut inputs)?;
    let input = args.input.or(file.input).ok_or_else(|| Failure::Usage("--input is required".into()))?;
    let tr = args.tr.or(file.tr);
    let hrf_shift = args.hrf_shift.or(file.hrf_shift);
    let hrf_file = args.hrf_file.or(file.hrf_file);
    let solver = args.solver.or(file.solver).unwrap_or(Solver::Dantzig);
    let out = args.out.or(file.out);

    let y = read_series_file(&input, tr, &mut inputs)?;
    let h = load_kernel(&hrf_file, hrf_shift, y.tr(), &mut inputs)?;
    let op = toeplitz(&h, y.len()).map_err(run_err)?;
    let kind = match solver {
        Solver::Lasso => SolverKind::Lasso,
        Solver::Dantzig => SolverKind::Dantzig,
    };
    let path = compute_path(kind, &op, y.values()).map_err(run_err)?;
    let text = path.to_json().map_err(run_err)? + "\n";

    let Some(out) = out else {
        return std::io::stdout().lock().write_all(text.as_bytes()).map_err(run_err);
    };
    let resolved = PathArgs {
        config: None,
        input: Some(input),
        tr: Some(y.tr()),
        hrf_shift: if hrf_file.is_some() { None } else { Some(h.onset_shift()) },
        hrf_file,
        solver: Some(solver),
        out: Some(out.clone()),
    };
    let mut manifest = RunManifest::new("path", resolved, None, started);
    manifest.inputs = inputs;
    manifest.outputs.push(write_with(&out, |w| Ok(w.write_all(text.as_bytes())?))?);
    manifest.write(&sidecar(&out)).map_err(run_err)
}
