//! Information-criterion selection of a single solution from a path.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::homotopy::HomotopyPath;
use crate::mci::ActivationEstimate;
use crate::signal::ConvolutionOperator;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CriterionKind {
    Aic,
    Bic,
    Aicc,
}

impl CriterionKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CriterionKind::Aic => "aic",
            CriterionKind::Bic => "bic",
            CriterionKind::Aicc => "aicc",
        }
    }
}

/// Criterion evaluated at one candidate solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionScore {
    pub lambda: f64,
    pub k: usize,
    pub rss: f64,
    pub score: f64,
    pub kind: CriterionKind,
    /// Set when `rss == 0`; such candidates never win.
    pub degenerate: bool,
}

/// Gaussian-likelihood criteria with constants dropped:
/// `aic = n ln(rss) + 2k`, `bic = n ln(rss) + k ln(n)`,
/// `aicc = aic + 2k(k+1)/(n-k-1)`.
///
/// `rss == 0` gives `-inf`; AICc with `k >= n - 1` gives `+inf`.
pub fn criterion_value(rss: f64, k: usize, n: usize, kind: CriterionKind) -> Result<f64> {
    if !(rss >= 0.0) || !rss.is_finite() {
        return Err(Error::InvalidParameter(format!("rss must be finite and >= 0, got {rss}")));
    }
    if n == 0 || k > n {
        return Err(Error::InvalidParameter(format!("need 0 <= k <= n and n > 0, got k={k}, n={n}")));
    }
    let (nf, kf) = (n as f64, k as f64);
    if kind == CriterionKind::Aicc && k > 0 && k + 1 >= n {
        return Ok(f64::INFINITY);
    }
    if rss == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    let fit = nf * rss.ln();
    Ok(match kind {
        CriterionKind::Aic => fit + 2.0 * kf,
        CriterionKind::Bic => fit + kf * nf.ln(),
        CriterionKind::Aicc => {
            let aic = fit + 2.0 * kf;
            if k == 0 {
                aic
            } else {
                aic + 2.0 * kf * (kf + 1.0) / (nf - kf - 1.0)
            }
        }
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub lambda: f64,
    pub estimate: ActivationEstimate,
    /// Candidates in decreasing `lambda`, starting with the zero solution.
    pub trace: Vec<CriterionScore>,
}

/// Scores the zero solution and the low end of every path segment and returns
/// the minimizer. Ties go to the larger `lambda`.
pub fn select(path: &HomotopyPath, y: &[f64], h: &ConvolutionOperator, kind: CriterionKind) -> Result<Selection> {
    if y.len() != path.dim {
        return Err(Error::DimensionMismatch { expected: path.dim, got: y.len() });
    }
    let n = y.len();
    let zero = vec![0.0; n];
    let mut candidates: Vec<(f64, &[f64])> = vec![(path.lambda0, &zero)];
    for (idx, seg) in path.segments.iter().enumerate() {
        candidates.push((seg.lambda_low, path.solution_low(idx)));
    }

    let mut trace = Vec::with_capacity(candidates.len());
    let mut best: Option<usize> = None;
    for (lambda, s) in &candidates {
        let fit = h.apply(s)?;
        let rss: f64 = y.iter().zip(&fit).map(|(a, b)| (a - b).powi(2)).sum();
        let k = s.iter().filter(|v| **v != 0.0).count();
        let score = criterion_value(rss, k, n, kind)?;
        let degenerate = rss == 0.0;
        trace.push(CriterionScore { lambda: *lambda, k, rss, score, kind, degenerate });
        let i = trace.len() - 1;
        if !degenerate && best.is_none_or(|b| score < trace[b].score) {
            best = Some(i);
        }
    }
    let best = best.ok_or(Error::SelectionFailure)?;
    Ok(Selection {
        lambda: trace[best].lambda,
        estimate: ActivationEstimate::from_solution(candidates[best].1),
        trace,
    })
}

/// Writes `lambda,k,rss,score` rows.
pub fn write_trace_csv<W: Write>(trace: &[CriterionScore], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["lambda", "k", "rss", "score", "kind"])?;
    for c in trace {
        w.write_record([
            c.lambda.to_string(),
            c.k.to_string(),
            c.rss.to_string(),
            c.score.to_string(),
            c.kind.as_str().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
