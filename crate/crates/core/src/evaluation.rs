//! Scoring against ground truth and the simulation grid.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::homotopy::{compute_path, HomotopyPath, SolverKind};
use crate::mci::{gmm_classify, gmm_fit, mci_from_path, ActivationEstimate};
use crate::selection::{select, CriterionKind};
use crate::signal::{
    add_noise_at_snr, canonical_hrf, convolve, generate_sparse_signal, ols_estimate, toeplitz,
    ConvolutionOperator, HrfKernel, SparseSignal, TimeSeries,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "mci-ds")]
    MciDs,
    #[serde(rename = "mci-lasso")]
    MciLasso,
    #[serde(rename = "ds-aic")]
    DsAic,
    #[serde(rename = "ds-bic")]
    DsBic,
    #[serde(rename = "ds-aicc")]
    DsAicc,
    #[serde(rename = "lasso-aic")]
    LassoAic,
    #[serde(rename = "lasso-bic")]
    LassoBic,
    #[serde(rename = "lasso-aicc")]
    LassoAicc,
    #[serde(rename = "bc-gmm")]
    BcGmm,
}

impl Method {
    pub const ALL: [Method; 9] = [
        Method::MciDs,
        Method::MciLasso,
        Method::DsAic,
        Method::DsBic,
        Method::DsAicc,
        Method::LassoAic,
        Method::LassoBic,
        Method::LassoAicc,
        Method::BcGmm,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::MciDs => "mci-ds",
            Method::MciLasso => "mci-lasso",
            Method::DsAic => "ds-aic",
            Method::DsBic => "ds-bic",
            Method::DsAicc => "ds-aicc",
            Method::LassoAic => "lasso-aic",
            Method::LassoBic => "lasso-bic",
            Method::LassoAicc => "lasso-aicc",
            Method::BcGmm => "bc-gmm",
        }
    }

    /// Path solver the method needs, if any.
    pub fn solver(self) -> Option<SolverKind> {
        match self {
            Method::MciDs | Method::DsAic | Method::DsBic | Method::DsAicc => Some(SolverKind::Dantzig),
            Method::MciLasso | Method::LassoAic | Method::LassoBic | Method::LassoAicc => Some(SolverKind::Lasso),
            Method::BcGmm => None,
        }
    }

    /// Information criterion the method selects with, if any.
    pub fn criterion(self) -> Option<CriterionKind> {
        match self {
            Method::DsAic | Method::LassoAic => Some(CriterionKind::Aic),
            Method::DsBic | Method::LassoBic => Some(CriterionKind::Bic),
            Method::DsAicc | Method::LassoAicc => Some(CriterionKind::Aicc),
            _ => None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown method '{s}'")))
    }
}

/// Output of one method on one series.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodRun {
    pub estimate: ActivationEstimate,
    /// The MCI mixture step failed and the AICc solution was used instead.
    pub fallback: bool,
}

/// Runs `methods` on the same series, sharing paths and the OLS estimate.
/// Results are in the order of `methods`.
pub fn run_methods(y: &TimeSeries, op: &ConvolutionOperator, methods: &[Method]) -> Vec<Result<MethodRun>> {
    let mut paths: Vec<(SolverKind, std::result::Result<HomotopyPath, String>)> = Vec::new();
    for kind in [SolverKind::Dantzig, SolverKind::Lasso] {
        if methods.iter().any(|m| m.solver() == Some(kind)) {
            paths.push((kind, compute_path(kind, op, y.values()).map_err(|e| e.to_string())));
        }
    }
    let path_for = |kind: SolverKind| -> Result<&HomotopyPath> {
        let (_, p) = paths.iter().find(|(k, _)| *k == kind).expect("path computed for every needed solver");
        p.as_ref().map_err(|e| Error::SolverStall { lambda: f64::NAN, reason: e.clone() })
    };
    methods
        .iter()
        .map(|&m| -> Result<MethodRun> {
            match (m.solver(), m.criterion()) {
                (Some(kind), Some(crit)) => {
                    let sel = select(path_for(kind)?, y.values(), op, crit)?;
                    Ok(MethodRun { estimate: sel.estimate, fallback: false })
                }
                (Some(kind), None) => {
                    let out = mci_from_path(y, op, path_for(kind)?)?;
                    Ok(MethodRun { estimate: out.estimate, fallback: out.fallback.is_some() })
                }
                (None, _) => {
                    let xi = ols_estimate(y, op)?;
                    let model = gmm_fit(&xi)?;
                    Ok(MethodRun { estimate: gmm_classify(&xi, &model)?, fallback: false })
                }
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub jaccard: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub detected_events: usize,
}

/// Confusion counts of the estimated support against the true one. Ratios
/// with an empty denominator are 1.
pub fn score(truth: &SparseSignal, estimate: &ActivationEstimate) -> Result<MetricsRecord> {
    let n = truth.len();
    if estimate.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: estimate.len() });
    }
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for (t, l) in truth.values().iter().zip(estimate.labels()) {
        match (*t != 0.0, *l == 1) {
            (true, true) => tp += 1,
            (false, true) => fp += 1,
            (false, false) => tn += 1,
            (true, false) => fn_ += 1,
        }
    }
    let ratio = |num: usize, den: usize| if den == 0 { 1.0 } else { num as f64 / den as f64 };
    Ok(MetricsRecord {
        tp,
        fp,
        tn,
        fn_,
        jaccard: ratio(tp, tp + fp + fn_),
        sensitivity: ratio(tp, tp + fn_),
        specificity: ratio(tn, tn + fp),
        detected_events: tp + fp,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub n: usize,
    pub spike_counts: Vec<usize>,
    pub snr_values: Vec<f64>,
    pub replicates: usize,
    pub methods: Vec<Method>,
    pub tr: f64,
    #[serde(default)]
    pub hrf_shift: usize,
    pub seed: u64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            n: 300,
            spike_counts: vec![1, 5, 10, 20, 30, 50],
            snr_values: vec![0.8, 1.4, 2.0, 2.7, 3.5],
            replicates: 100,
            methods: vec![Method::MciDs, Method::DsAicc, Method::BcGmm],
            tr: 2.5,
            hrf_shift: 0,
            seed: 0,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.n < 2 {
            return bad(format!("n must be >= 2, got {}", self.n));
        }
        if self.spike_counts.is_empty() || self.spike_counts.iter().any(|&k| k == 0 || k > self.n) {
            return bad(format!("spike counts must be in 1..={}", self.n));
        }
        if self.snr_values.is_empty() || self.snr_values.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return bad("snr values must be positive and finite".into());
        }
        if self.replicates == 0 {
            return bad("replicates must be positive".into());
        }
        if self.methods.is_empty() {
            return bad("at least one method is required".into());
        }
        if !(self.tr > 0.0) || !self.tr.is_finite() {
            return bad(format!("tr must be positive, got {}", self.tr));
        }
        Ok(())
    }

    pub fn hrf(&self) -> Result<HrfKernel> {
        canonical_hrf(self.tr, self.hrf_shift, 32.0)
    }
}

/// One method on one replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRecord {
    pub method: Method,
    pub spikes: usize,
    pub snr: f64,
    pub replicate: usize,
    pub metrics: Option<MetricsRecord>,
    pub fallback: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    pub config: SimulationConfig,
    pub raw: Vec<RawRecord>,
    pub summary: Vec<CellSummary>,
}

impl SimulationResult {
    pub fn failures(&self) -> usize {
        self.raw.iter().filter(|r| r.error.is_some()).count()
    }
}

/// Random stream of one replicate, keyed by the base seed and its cell.
pub fn replicate_rng(seed: u64, spikes: usize, snr: f64, replicate: usize) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&(spikes as u64).to_le_bytes());
    key[16..24].copy_from_slice(&snr.to_bits().to_le_bytes());
    key[24..].copy_from_slice(&(replicate as u64).to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// Draws spikes and noise for one replicate. Spike sets whose convolution is
/// identically zero (spikes only where the kernel has not started) are redrawn.
pub fn simulate_replicate(
    n: usize,
    spikes: usize,
    snr: f64,
    h: &HrfKernel,
    rng: &mut ChaCha8Rng,
) -> Result<(SparseSignal, TimeSeries)> {
    for _ in 0..1000 {
        let s = generate_sparse_signal(n, spikes, rng)?;
        let clean = convolve(&s, h)?;
        match add_noise_at_snr(&clean, snr, rng) {
            Ok(y) => return Ok((s, y)),
            Err(Error::DegenerateInput(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::DegenerateInput("could not draw a non-constant series".into()))
}

/// Runs every method on every replicate of the grid. `parallelism` threads
/// (0 means rayon's default); the result does not depend on it.
pub fn run_grid(config: &SimulationConfig, parallelism: usize) -> Result<SimulationResult> {
    config.validate()?;
    let h = config.hrf()?;
    let op = toeplitz(&h, config.n)?;
    op.gram();

    let mut tasks = Vec::new();
    for &k in &config.spike_counts {
        for &snr in &config.snr_values {
            for rep in 0..config.replicates {
                tasks.push((k, snr, rep));
            }
        }
    }
    let run_one = |&(k, snr, rep): &(usize, f64, usize)| -> Vec<RawRecord> {
        let mut rng = replicate_rng(config.seed, k, snr, rep);
        let record = |method, metrics, fallback, error| RawRecord {
            method,
            spikes: k,
            snr,
            replicate: rep,
            metrics,
            fallback,
            error,
        };
        let (truth, y) = match simulate_replicate(config.n, k, snr, &h, &mut rng) {
            Ok(v) => v,
            Err(e) => return config.methods.iter().map(|&m| record(m, None, false, Some(e.to_string()))).collect(),
        };
        let runs = run_methods(&y, &op, &config.methods);
        config
            .methods
            .iter()
            .zip(runs)
            .map(|(&m, run)| match run.and_then(|r| Ok((score(&truth, &r.estimate)?, r.fallback))) {
                Ok((metrics, fallback)) => record(m, Some(metrics), fallback, None),
                Err(e) => record(m, None, false, Some(e.to_string())),
            })
            .collect()
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    let nested: Vec<Vec<RawRecord>> = pool.install(|| tasks.par_iter().map(run_one).collect());
    let raw: Vec<RawRecord> = nested.into_iter().flatten().collect();
    let summary = aggregate(&raw)?;
    Ok(SimulationResult { config: config.clone(), raw, summary })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    /// Mean and sample standard deviation (0 for fewer than two values).
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self { mean: f64::NAN, std: f64::NAN };
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        Self { mean, std }
    }
}

/// Per-cell statistics over the successful replicates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub method: Method,
    pub spikes: usize,
    pub snr: f64,
    pub replicates: usize,
    pub failures: usize,
    pub fallbacks: usize,
    pub jaccard: Stat,
    pub sensitivity: Stat,
    pub specificity: Stat,
    pub detected_events: Stat,
}

/// Groups raw records by `(method, spikes, snr)` in that sort order.
pub fn aggregate(raw: &[RawRecord]) -> Result<Vec<CellSummary>> {
    if raw.is_empty() {
        return Err(Error::DegenerateInput("no records to aggregate".into()));
    }
    let mut sorted: Vec<&RawRecord> = raw.iter().collect();
    sorted.sort_by(|a, b| {
        (a.method, a.spikes).cmp(&(b.method, b.spikes)).then(a.snr.total_cmp(&b.snr)).then(a.replicate.cmp(&b.replicate))
    });
    let mut out = Vec::new();
    for cell in sorted.chunk_by(|a, b| a.method == b.method && a.spikes == b.spikes && a.snr == b.snr) {
        let ok: Vec<&MetricsRecord> = cell.iter().filter_map(|r| r.metrics.as_ref()).collect();
        let col = |f: fn(&MetricsRecord) -> f64| Stat::of(&ok.iter().map(|m| f(m)).collect::<Vec<_>>());
        out.push(CellSummary {
            method: cell[0].method,
            spikes: cell[0].spikes,
            snr: cell[0].snr,
            replicates: cell.len(),
            failures: cell.len() - ok.len(),
            fallbacks: cell.iter().filter(|r| r.fallback).count(),
            jaccard: col(|m| m.jaccard),
            sensitivity: col(|m| m.sensitivity),
            specificity: col(|m| m.specificity),
            detected_events: col(|m| m.detected_events as f64),
        });
    }
    Ok(out)
}

pub fn find_cell(summary: &[CellSummary], method: Method, spikes: usize, snr: f64) -> Option<&CellSummary> {
    summary.iter().find(|c| c.method == method && c.spikes == spikes && c.snr == snr)
}

/// Matrix of one statistic over the grid, rows by spike count, columns by SNR.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Heatmap {
    pub method: Method,
    pub metric: String,
    pub spike_counts: Vec<usize>,
    pub snr_values: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

pub fn heatmap(result: &SimulationResult, method: Method, metric: &str) -> Result<Heatmap> {
    let pick: fn(&CellSummary) -> f64 = match metric {
        "jaccard" => |c| c.jaccard.mean,
        "sensitivity" => |c| c.sensitivity.mean,
        "specificity" => |c| c.specificity.mean,
        "detected_events" => |c| c.detected_events.mean,
        other => return Err(Error::InvalidParameter(format!("unknown metric '{other}'"))),
    };
    let cfg = &result.config;
    let values = cfg
        .spike_counts
        .iter()
        .map(|&k| {
            cfg.snr_values
                .iter()
                .map(|&snr| find_cell(&result.summary, method, k, snr).map_or(f64::NAN, pick))
                .collect()
        })
        .collect();
    Ok(Heatmap {
        method,
        metric: metric.to_string(),
        spike_counts: cfg.spike_counts.clone(),
        snr_values: cfg.snr_values.clone(),
        values,
    })
}

const RAW_HEADER: [&str; 15] = [
    "method",
    "spikes",
    "snr",
    "replicate",
    "tp",
    "fp",
    "tn",
    "fn",
    "jaccard",
    "sensitivity",
    "specificity",
    "detected_events",
    "fallback",
    "status",
    "error",
];

pub fn write_raw_csv<W: Write>(raw: &[RawRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RAW_HEADER)?;
    for r in raw {
        let mut row = vec![r.method.to_string(), r.spikes.to_string(), r.snr.to_string(), r.replicate.to_string()];
        match &r.metrics {
            Some(m) => row.extend([
                m.tp.to_string(),
                m.fp.to_string(),
                m.tn.to_string(),
                m.fn_.to_string(),
                m.jaccard.to_string(),
                m.sensitivity.to_string(),
                m.specificity.to_string(),
                m.detected_events.to_string(),
            ]),
            None => row.extend(std::iter::repeat_n(String::new(), 8)),
        }
        row.push(r.fallback.to_string());
        row.push(if r.error.is_some() { "error" } else { "ok" }.to_string());
        row.push(r.error.clone().unwrap_or_default());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_raw_csv<R: std::io::Read>(input: R) -> Result<Vec<RawRecord>> {
    let mut rdr = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row?;
        let line = i + 2;
        let parse_err = |what: &str| Error::Parse { line, reason: format!("bad {what}") };
        let get = |idx: usize| row.get(idx).unwrap_or("");
        let num = |idx: usize, what: &str| get(idx).parse::<f64>().map_err(|_| parse_err(what));
        let count = |idx: usize, what: &str| get(idx).parse::<usize>().map_err(|_| parse_err(what));
        let metrics = if get(13) == "ok" {
            Some(MetricsRecord {
                tp: count(4, "tp")?,
                fp: count(5, "fp")?,
                tn: count(6, "tn")?,
                fn_: count(7, "fn")?,
                jaccard: num(8, "jaccard")?,
                sensitivity: num(9, "sensitivity")?,
                specificity: num(10, "specificity")?,
                detected_events: count(11, "detected_events")?,
            })
        } else {
            None
        };
        out.push(RawRecord {
            method: get(0).parse().map_err(|_| parse_err("method"))?,
            spikes: count(1, "spikes")?,
            snr: num(2, "snr")?,
            replicate: count(3, "replicate")?,
            metrics,
            fallback: get(12).parse().map_err(|_| parse_err("fallback"))?,
            error: if get(13) == "ok" { None } else { Some(get(14).to_string()) },
        });
    }
    Ok(out)
}

pub fn write_summary_csv<W: Write>(summary: &[CellSummary], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "method",
        "spikes",
        "snr",
        "replicates",
        "failures",
        "fallbacks",
        "jaccard_mean",
        "jaccard_std",
        "sensitivity_mean",
        "sensitivity_std",
        "specificity_mean",
        "specificity_std",
        "detected_events_mean",
        "detected_events_std",
    ])?;
    for c in summary {
        let mut row = vec![
            c.method.to_string(),
            c.spikes.to_string(),
            c.snr.to_string(),
            c.replicates.to_string(),
            c.failures.to_string(),
            c.fallbacks.to_string(),
        ];
        for s in [c.jaccard, c.sensitivity, c.specificity, c.detected_events] {
            row.push(s.mean.to_string());
            row.push(s.std.to_string());
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn truth(n: usize, support: &[usize]) -> SparseSignal {
        let mut v = vec![0.0; n];
        for &j in support {
            v[j] = 1.0;
        }
        SparseSignal::from_values(v).unwrap()
    }

    fn labels(n: usize, support: &[usize]) -> ActivationEstimate {
        let mut l = vec![2u8; n];
        for &j in support {
            l[j] = 1;
        }
        ActivationEstimate::from_labels(l, &vec![1.0; n]).unwrap()
    }

    #[test]
    fn perfect_and_disjoint_scores() {
        let m = score(&truth(10, &[1, 4]), &labels(10, &[1, 4])).unwrap();
        assert_eq!((m.jaccard, m.sensitivity, m.specificity), (1.0, 1.0, 1.0));
        let m = score(&truth(10, &[1, 4]), &labels(10, &[2, 5])).unwrap();
        assert_eq!(m.jaccard, 0.0);
        assert_eq!(m.tp + m.fp + m.tn + m.fn_, 10);
    }

    #[test]
    fn jaccard_from_counts() {
        let t: Vec<usize> = (0..10).collect();
        let mut e: Vec<usize> = (0..6).collect();
        e.extend([10, 11]);
        let m = score(&truth(20, &t), &labels(20, &e)).unwrap();
        assert_eq!((m.tp, m.fp, m.fn_), (6, 2, 4));
        assert_eq!(m.jaccard, 0.5);
    }

    #[test]
    fn empty_supports_agree() {
        let m = score(&SparseSignal::from_values(vec![0.0; 5]).unwrap(), &labels(5, &[])).unwrap();
        assert_eq!(m.jaccard, 1.0);
    }

    #[test]
    fn stats() {
        let s = Stat::of(&[0.4, 0.6]);
        assert!((s.mean - 0.5).abs() < 1e-15);
        assert_eq!(Stat::of(&[0.3, 0.3, 0.3]).std, 0.0);
    }

    #[test]
    fn method_ids_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
            assert_eq!(serde_json::to_string(&m).unwrap(), format!("\"{m}\""));
        }
        assert!("mci".parse::<Method>().is_err());
    }
}
