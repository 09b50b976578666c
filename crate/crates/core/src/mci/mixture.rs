//! Path-derived mixing probabilities, MVC weights and weighted kernel densities.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::homotopy::HomotopyPath;
use crate::signal::sample_std;

use super::ActivationEstimate;

/// Below this `<p,p> - <p,1>^2` the two-component weights are undefined.
pub const SINGULAR_DESIGN_TOL: f64 = 1e-12;

/// Relative floor applied to a non-positive weighted variance.
pub const SIGMA_FLOOR: f64 = 1e-6;

/// Per-point probabilities of the activation component; the noise component
/// is the complement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureProbabilities {
    p1: Vec<f64>,
}

impl MixtureProbabilities {
    pub fn new(p1: Vec<f64>) -> Result<Self> {
        if p1.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidParameter("probabilities must lie in [0, 1]".into()));
        }
        Ok(Self { p1 })
    }

    pub fn len(&self) -> usize {
        self.p1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p1.is_empty()
    }

    pub fn activation(&self) -> &[f64] {
        &self.p1
    }

    pub fn noise(&self) -> Vec<f64> {
        self.p1.iter().map(|p| 1.0 - p).collect()
    }

    /// `p_j^m` for `m` in `{1, 2}`.
    pub fn get(&self, j: usize, m: usize) -> f64 {
        match m {
            1 => self.p1[j],
            2 => 1.0 - self.p1[j],
            _ => panic!("component must be 1 or 2, got {m}"),
        }
    }
}

/// Fraction of `(terminal_lambda, lambda0)`, measured against `lambda0`, during
/// which each coordinate is in the active set.
pub fn activation_probabilities(path: &HomotopyPath) -> Result<MixtureProbabilities> {
    if !(path.lambda0 > 0.0) {
        return Err(Error::DegenerateInput("path has lambda0 = 0".into()));
    }
    let mut p1 = vec![0.0; path.dim];
    for seg in &path.segments {
        let len = seg.lambda_high - seg.lambda_low;
        for &j in &seg.support {
            p1[j] += len;
        }
    }
    for p in &mut p1 {
        *p = (*p / path.lambda0).clamp(0.0, 1.0);
    }
    Ok(MixtureProbabilities { p1 })
}

/// Two-component weights with `<a^k, p^m> = delta_km` under `<u,v> = mean(u v)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MvcWeights {
    pub a1: Vec<f64>,
    pub a2: Vec<f64>,
}

impl MvcWeights {
    pub fn component(&self, m: usize) -> &[f64] {
        match m {
            1 => &self.a1,
            2 => &self.a2,
            _ => panic!("component must be 1 or 2, got {m}"),
        }
    }
}

pub fn mvc_weights(p: &MixtureProbabilities) -> Result<MvcWeights> {
    let n = p.len() as f64;
    if p.is_empty() {
        return Err(Error::DegenerateInput("empty probability vector".into()));
    }
    let a: f64 = p.p1.iter().map(|v| v * v).sum::<f64>() / n;
    let b: f64 = p.p1.iter().sum::<f64>() / n;
    let det = a - b * b;
    if !(det > SINGULAR_DESIGN_TOL) {
        return Err(Error::SingularDesign(format!("activation probabilities are nearly constant (det {det:e})")));
    }
    let a1 = p.p1.iter().map(|&pj| ((1.0 - b) * pj + (a - b)) / det).collect();
    let a2 = p.p1.iter().map(|&pj| (a - b * pj) / det).collect();
    Ok(MvcWeights { a1, a2 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComponentMoments {
    pub mean: f64,
    pub sigma: f64,
    /// The weighted variance was not positive and `sigma` was floored.
    pub clamped: bool,
}

/// Weighted mean `mean(a xi)` and variance `sum a (xi - mean)^2 / (N - 1)`.
pub fn component_moments(xi: &[f64], a: &[f64]) -> Result<ComponentMoments> {
    let n = xi.len();
    if a.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: a.len() });
    }
    if n < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 points, got {n}")));
    }
    if a.iter().all(|w| *w == 0.0) {
        return Err(Error::DegenerateComponent { component: 0, reason: "all weights are zero".into() });
    }
    let mean = a.iter().zip(xi).map(|(w, x)| w * x).sum::<f64>() / n as f64;
    let var = a.iter().zip(xi).map(|(w, x)| w * (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    if var > 0.0 {
        return Ok(ComponentMoments { mean, sigma: var.sqrt(), clamped: false });
    }
    let floor = SIGMA_FLOOR * sample_std(xi);
    if !(floor > 0.0) {
        return Err(Error::DegenerateComponent { component: 0, reason: "observations are constant".into() });
    }
    Ok(ComponentMoments { mean, sigma: floor, clamped: true })
}

/// `1.06 sigma n^(-1/5)`.
pub fn silverman_bandwidth(sigma: f64, n: usize) -> Result<f64> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidParameter(format!("sigma must be positive, got {sigma}")));
    }
    if n < 2 {
        return Err(Error::InvalidParameter(format!("need n >= 2, got {n}")));
    }
    Ok(1.06 * sigma * (n as f64).powf(-0.2))
}

fn gaussian(t: f64) -> f64 {
    (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Weighted Gaussian kernel sum `sum a_j K((x - xi_j) / b) / (b N)`; may be negative.
pub fn kde_raw(xi: &[f64], a: &[f64], b: f64, x: f64) -> f64 {
    let n = xi.len() as f64;
    xi.iter().zip(a).map(|(c, w)| w * gaussian((x - c) / b)).sum::<f64>() / (b * n)
}

/// [`kde_raw`] clamped at zero.
pub fn kde_eval(xi: &[f64], a: &[f64], b: f64, x: f64) -> f64 {
    kde_raw(xi, a, b, x).max(0.0)
}

/// Kernel density of one mixture component built from `(xi, a^m)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentDensity {
    pub component: usize,
    pub bandwidth: f64,
    pub moments: ComponentMoments,
    centers: Vec<f64>,
    weights: Vec<f64>,
}

impl ComponentDensity {
    pub fn fit(xi: &[f64], weights: &MvcWeights, component: usize) -> Result<Self> {
        let a = weights.component(component);
        let moments = component_moments(xi, a).map_err(|e| match e {
            Error::DegenerateComponent { reason, .. } => Error::DegenerateComponent { component, reason },
            other => other,
        })?;
        let bandwidth = silverman_bandwidth(moments.sigma, xi.len())?;
        Ok(Self { component, bandwidth, moments, centers: xi.to_vec(), weights: a.to_vec() })
    }

    pub fn raw(&self, x: f64) -> f64 {
        kde_raw(&self.centers, &self.weights, self.bandwidth, x)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.raw(x).max(0.0)
    }
}

/// Label 1 where `p_j^1 f1(xi_j) > p_j^2 f2(xi_j)`, label 2 otherwise.
pub fn bayes_classify(
    xi: &[f64],
    p: &MixtureProbabilities,
    f1: &ComponentDensity,
    f2: &ComponentDensity,
) -> Result<ActivationEstimate> {
    if p.len() != xi.len() {
        return Err(Error::DimensionMismatch { expected: xi.len(), got: p.len() });
    }
    let labels = xi
        .iter()
        .enumerate()
        .map(|(j, &x)| {
            let post1 = p.get(j, 1) * f1.eval(x);
            let post2 = p.get(j, 2) * f2.eval(x);
            if post1 > post2 {
                1
            } else {
                2
            }
        })
        .collect();
    ActivationEstimate::from_labels(labels, xi)
}
