//! Regularization paths for the LASSO and the Dantzig selector.
//!
//! Both problems are parameterized exactly as
//!
//! * LASSO: `argmin_s  lambda * ||s||_1 + ||y - H s||_2^2`
//! * Dantzig: `argmin_s ||s||_1  s.t.  ||H^T (y - H s)||_inf <= lambda`
//!
//! (no 1/2 on the quadratic). Solutions are piecewise linear in `lambda`; a
//! path stores the breakpoints `lambda_0 > lambda_1 > ... > lambda_K` together
//! with the support and sign pattern valid on each open interval.

mod active;
mod dantzig;
mod lasso;
pub mod oracle;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::ConvolutionOperator;

pub use active::SINGULAR_TOL;
pub use dantzig::dantzig_path;
pub use lasso::lasso_path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Lasso,
    Dantzig,
}

impl SolverKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SolverKind::Lasso => "lasso",
            SolverKind::Dantzig => "dantzig",
        }
    }
}

/// One linear piece of the path, valid for `lambda_low < lambda < lambda_high`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSegment {
    pub lambda_high: f64,
    pub lambda_low: f64,
    /// Sorted active indices.
    pub support: Vec<usize>,
    /// `+1`/`-1`, aligned with `support`.
    pub signs: Vec<i8>,
    /// Full-length solution at `lambda_high`.
    #[serde(skip)]
    pub solution_high: Vec<f64>,
}

/// Counters describing how the path computation went.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PathDiagnostics {
    /// Breakpoint events processed (including zero-length ones).
    pub events: usize,
    /// Events where several candidates reached the boundary together; the
    /// smallest index was taken.
    pub ties: usize,
    /// True if the active matrix became numerically singular before `lambda = 0`.
    pub rank_limited: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomotopyPath {
    pub solver_kind: SolverKind,
    pub lambda0: f64,
    pub terminal_lambda: f64,
    pub segments: Vec<PathSegment>,
    /// Solution at `terminal_lambda`.
    #[serde(skip)]
    pub terminal_solution: Vec<f64>,
    pub dim: usize,
    pub diagnostics: PathDiagnostics,
}

/// Path computation with the solver selected at runtime.
pub fn compute_path(kind: SolverKind, h: &ConvolutionOperator, y: &[f64]) -> Result<HomotopyPath> {
    match kind {
        SolverKind::Lasso => lasso_path(h, y),
        SolverKind::Dantzig => dantzig_path(h, y),
    }
}

impl HomotopyPath {
    /// Transition points `lambda_0, ..., lambda_K` in decreasing order.
    pub fn transition_points(&self) -> Vec<f64> {
        let mut pts: Vec<f64> = self.segments.iter().map(|s| s.lambda_high).collect();
        pts.push(self.terminal_lambda);
        pts
    }

    /// Solution at `lambda`, interpolated within the containing segment.
    pub fn solution_at(&self, lambda: f64) -> Result<Vec<f64>> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidParameter(format!("lambda must be finite and >= 0, got {lambda}")));
        }
        if lambda >= self.lambda0 || self.segments.is_empty() {
            if lambda < self.terminal_lambda {
                return Err(Error::OutOfRange { lambda, terminal: self.terminal_lambda });
            }
            if self.segments.is_empty() {
                return Ok(self.terminal_solution.clone());
            }
            return Ok(vec![0.0; self.dim]);
        }
        if lambda < self.terminal_lambda {
            return Err(Error::OutOfRange { lambda, terminal: self.terminal_lambda });
        }
        // Segments are ordered by decreasing lambda.
        let idx = self.segments.partition_point(|s| s.lambda_low > lambda);
        let idx = idx.min(self.segments.len() - 1);
        let seg = &self.segments[idx];
        if lambda == seg.lambda_high {
            return Ok(seg.solution_high.clone());
        }
        let low = self.solution_low(idx);
        if lambda == seg.lambda_low {
            return Ok(low.to_vec());
        }
        let t = (seg.lambda_high - lambda) / (seg.lambda_high - seg.lambda_low);
        Ok(seg.solution_high.iter().zip(low).map(|(a, b)| a + t * (b - a)).collect())
    }

    /// Solution at the low end of segment `idx`.
    pub fn solution_low(&self, idx: usize) -> &[f64] {
        match self.segments.get(idx + 1) {
            Some(next) => &next.solution_high,
            None => &self.terminal_solution,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&PathExport::from(self))?)
    }
}

/// Serialized form of a path: segment boundaries, supports and signs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathExport {
    pub solver_kind: SolverKind,
    pub lambda0: f64,
    pub terminal_lambda: f64,
    pub segments: Vec<SegmentExport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentExport {
    pub lambda_high: f64,
    pub lambda_low: f64,
    pub support: Vec<usize>,
    pub signs: Vec<i8>,
}

impl From<&HomotopyPath> for PathExport {
    fn from(path: &HomotopyPath) -> Self {
        Self {
            solver_kind: path.solver_kind,
            lambda0: path.lambda0,
            terminal_lambda: path.terminal_lambda,
            segments: path
                .segments
                .iter()
                .map(|s| SegmentExport {
                    lambda_high: s.lambda_high,
                    lambda_low: s.lambda_low,
                    support: s.support.clone(),
                    signs: s.signs.clone(),
                })
                .collect(),
        }
    }
}

/// Shared bookkeeping for both path builders.
pub(crate) struct PathBuilder {
    kind: SolverKind,
    dim: usize,
    lambda0: f64,
    segments: Vec<PathSegment>,
    diagnostics: PathDiagnostics,
}

impl PathBuilder {
    pub(crate) fn new(kind: SolverKind, dim: usize, lambda0: f64) -> Self {
        Self { kind, dim, lambda0, segments: Vec::new(), diagnostics: PathDiagnostics::default() }
    }

    pub(crate) fn diagnostics(&mut self) -> &mut PathDiagnostics {
        &mut self.diagnostics
    }

    /// Records the piece `(low, high)` with the active set `(active, signs)` and
    /// the solution `at_high`. Zero-length pieces are skipped.
    pub(crate) fn push(&mut self, high: f64, low: f64, active: &[usize], signs: &[f64], at_high: &[f64]) {
        if !(high > low) {
            return;
        }
        let mut pairs: Vec<(usize, i8)> =
            active.iter().zip(signs).map(|(&j, &s)| (j, if s > 0.0 { 1 } else { -1 })).collect();
        pairs.sort_unstable_by_key(|p| p.0);
        self.segments.push(PathSegment {
            lambda_high: high,
            lambda_low: low,
            support: pairs.iter().map(|p| p.0).collect(),
            signs: pairs.iter().map(|p| p.1).collect(),
            solution_high: at_high.to_vec(),
        });
    }

    pub(crate) fn finish(self, terminal_lambda: f64, terminal_solution: Vec<f64>) -> HomotopyPath {
        HomotopyPath {
            solver_kind: self.kind,
            lambda0: self.lambda0,
            terminal_lambda,
            segments: self.segments,
            terminal_solution,
            dim: self.dim,
            diagnostics: self.diagnostics,
        }
    }
}

/// Candidate breakpoint; ties are broken toward the smallest index.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Candidate<E> {
    pub step: f64,
    pub index: usize,
    pub event: E,
}

/// Picks the smallest step; candidates within `tol` of it count as tied and
/// the smallest index wins. Returns the winner and whether a tie occurred.
pub(crate) fn pick<E: Copy>(cands: &[Candidate<E>], tol: f64) -> Option<(Candidate<E>, bool)> {
    let min = cands.iter().map(|c| c.step).fold(f64::INFINITY, f64::min);
    if !min.is_finite() {
        return None;
    }
    let mut tied = cands.iter().filter(|c| c.step <= min + tol);
    let first = *tied.next()?;
    let mut best = first;
    let mut tie = false;
    for c in tied {
        tie = true;
        if c.index < best.index {
            best = *c;
        }
    }
    Some((best, tie))
}

pub(crate) fn check_inputs(h: &ConvolutionOperator, y: &[f64]) -> Result<()> {
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("observation"));
    }
    if h.dim() != y.len() {
        return Err(Error::DimensionMismatch { expected: h.dim(), got: y.len() });
    }
    if h.matrix().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("operator"));
    }
    Ok(())
}

pub(crate) fn sign(x: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// Index of the largest `|v_i|`, smallest index on ties.
pub(crate) fn argmax_abs(v: &[f64]) -> (usize, f64) {
    v.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &x)| if x.abs() > bv { (i, x.abs()) } else { (bi, bv) })
}
