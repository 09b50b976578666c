//! Mixture components inference.
//!
//! The path of sparse solutions gives each time point a prior probability of
//! activation; weights from the theory of mixtures with varying concentrations
//! turn the OLS estimate into kernel densities of the activation and noise
//! components; a Bayes classifier then labels every point.

mod gmm;
mod mixture;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::homotopy::{compute_path, HomotopyPath, SolverKind};
use crate::selection::{select, CriterionKind};
use crate::signal::{ols_estimate, toeplitz, ConvolutionOperator, HrfKernel, TimeSeries};

pub use gmm::{gmm_classify, gmm_fit, gmm_posteriors, GmmModel, EM_MAX_ITER, EM_TOL};
pub use mixture::{
    activation_probabilities, bayes_classify, component_moments, kde_eval, kde_raw, mvc_weights,
    silverman_bandwidth, ComponentDensity, ComponentMoments, MixtureProbabilities, MvcWeights,
    SIGMA_FLOOR, SINGULAR_DESIGN_TOL,
};

/// Per-point labels: 1 for activation, 2 for noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivationEstimate {
    labels: Vec<u8>,
    amplitudes: Vec<f64>,
    support: Vec<usize>,
}

impl ActivationEstimate {
    /// Amplitudes are `xi_j` where the label is 1 and zero elsewhere.
    pub fn from_labels(labels: Vec<u8>, xi: &[f64]) -> Result<Self> {
        if labels.len() != xi.len() {
            return Err(Error::DimensionMismatch { expected: xi.len(), got: labels.len() });
        }
        if labels.iter().any(|l| *l != 1 && *l != 2) {
            return Err(Error::InvalidParameter("labels must be 1 or 2".into()));
        }
        let support: Vec<usize> = (0..labels.len()).filter(|&j| labels[j] == 1).collect();
        let amplitudes = labels.iter().zip(xi).map(|(l, x)| if *l == 1 { *x } else { 0.0 }).collect();
        Ok(Self { labels, amplitudes, support })
    }

    /// Nonzero coefficients of `s` are the activations.
    pub fn from_solution(s: &[f64]) -> Self {
        let labels: Vec<u8> = s.iter().map(|v| if *v != 0.0 { 1 } else { 2 }).collect();
        let support = (0..s.len()).filter(|&j| s[j] != 0.0).collect();
        Self { labels, amplitudes: s.to_vec(), support }
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.amplitudes
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FallbackReason {
    /// The activation probabilities are (nearly) constant.
    SingularDesign,
    /// A component has all-zero weights.
    DegenerateComponent,
    /// A component's weighted variance was not positive and had to be floored.
    NonPositiveVariance,
}

/// Quantities behind an MCI classification, for inspection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureDiagnostics {
    pub solver_kind: SolverKind,
    pub lambda0: f64,
    pub terminal_lambda: f64,
    pub segments: usize,
    pub xi: Vec<f64>,
    pub p1: Vec<f64>,
    pub a1: Option<Vec<f64>>,
    pub a2: Option<Vec<f64>>,
    pub components: Vec<ComponentSummary>,
    /// Points where a component density was negative and clamped to zero.
    pub negative_density_points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComponentSummary {
    pub component: usize,
    pub mean: f64,
    pub sigma: f64,
    pub bandwidth: f64,
    pub sigma_clamped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MciOutcome {
    pub estimate: ActivationEstimate,
    /// Set when the mixture step could not be carried out and the AICc-selected
    /// path solution was returned instead.
    pub fallback: Option<FallbackReason>,
    pub diagnostics: MixtureDiagnostics,
}

impl MciOutcome {
    pub fn diagnostics_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.diagnostics)?)
    }
}

/// Builds the convolution operator for `h`, computes the path and classifies.
pub fn mci_deconvolve(y: &TimeSeries, h: &HrfKernel, kind: SolverKind) -> Result<MciOutcome> {
    let op = toeplitz(h, y.len())?;
    let path = compute_path(kind, &op, y.values())?;
    mci_from_path(y, &op, &path)
}

/// Classification step for a path already computed on `(op, y)`.
pub fn mci_from_path(y: &TimeSeries, op: &ConvolutionOperator, path: &HomotopyPath) -> Result<MciOutcome> {
    let xi = ols_estimate(y, op)?;
    let mut diagnostics = MixtureDiagnostics {
        solver_kind: path.solver_kind,
        lambda0: path.lambda0,
        terminal_lambda: path.terminal_lambda,
        segments: path.segments.len(),
        xi: xi.clone(),
        p1: vec![0.0; xi.len()],
        a1: None,
        a2: None,
        components: Vec::new(),
        negative_density_points: 0,
    };
    let p = activation_probabilities(path)?;
    diagnostics.p1 = p.activation().to_vec();

    let fitted = mvc_weights(&p).and_then(|w| {
        let f1 = ComponentDensity::fit(&xi, &w, 1)?;
        let f2 = ComponentDensity::fit(&xi, &w, 2)?;
        Ok((w, f1, f2))
    });
    let fall_back = |reason: FallbackReason, diagnostics: MixtureDiagnostics| -> Result<MciOutcome> {
        let chosen = select(path, y.values(), op, CriterionKind::Aicc)?;
        Ok(MciOutcome { estimate: chosen.estimate, fallback: Some(reason), diagnostics })
    };
    let (w, f1, f2) = match fitted {
        Ok(parts) => parts,
        Err(Error::SingularDesign(_)) => return fall_back(FallbackReason::SingularDesign, diagnostics),
        Err(Error::DegenerateComponent { .. }) => return fall_back(FallbackReason::DegenerateComponent, diagnostics),
        Err(e) => return Err(e),
    };

    for f in [&f1, &f2] {
        diagnostics.components.push(ComponentSummary {
            component: f.component,
            mean: f.moments.mean,
            sigma: f.moments.sigma,
            bandwidth: f.bandwidth,
            sigma_clamped: f.moments.clamped,
        });
    }
    diagnostics.a1 = Some(w.a1);
    diagnostics.a2 = Some(w.a2);
    if f1.moments.clamped || f2.moments.clamped {
        return fall_back(FallbackReason::NonPositiveVariance, diagnostics);
    }
    diagnostics.negative_density_points = xi.iter().filter(|&&x| f1.raw(x) < 0.0 || f2.raw(x) < 0.0).count();
    let estimate = bayes_classify(&xi, &p, &f1, &f2)?;
    Ok(MciOutcome { estimate, fallback: None, diagnostics })
}
