//! Two-component Gaussian mixture fitted by EM, used as a baseline classifier.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::sample_std;

use super::ActivationEstimate;

pub const EM_TOL: f64 = 1e-8;
pub const EM_MAX_ITER: usize = 500;
/// Initial `(low, high)` quantiles of the component means, one pair per restart.
const INIT_QUANTILES: [(f64, f64); 5] = [(0.10, 0.90), (0.05, 0.95), (0.20, 0.80), (0.25, 0.75), (0.02, 0.98)];
/// A component whose std falls below this fraction of `std(xi)` has collapsed.
const COLLAPSE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmModel {
    pub weights: [f64; 2],
    pub means: [f64; 2],
    pub stds: [f64; 2],
    /// Index (0 or 1) of the component with the larger `|mean|`.
    pub activation: usize,
    pub log_likelihood: f64,
    pub iterations: usize,
    /// Log-likelihood after each EM iteration of the selected restart.
    #[serde(skip)]
    pub trace: Vec<f64>,
}

fn log_normal(x: f64, mean: f64, std: f64) -> f64 {
    let z = (x - mean) / std;
    -0.5 * z * z - std.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
}

fn log_sum_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Log-likelihood and responsibilities of component 0.
fn e_step(xi: &[f64], w: &[f64; 2], mu: &[f64; 2], sd: &[f64; 2], resp: &mut [f64]) -> f64 {
    let (lw0, lw1) = (w[0].ln(), w[1].ln());
    let mut ll = 0.0;
    for (r, &x) in resp.iter_mut().zip(xi) {
        let l0 = lw0 + log_normal(x, mu[0], sd[0]);
        let l1 = lw1 + log_normal(x, mu[1], sd[1]);
        let tot = log_sum_exp(l0, l1);
        *r = (l0 - tot).exp();
        ll += tot;
    }
    ll
}

struct Run {
    weights: [f64; 2],
    means: [f64; 2],
    stds: [f64; 2],
    ll: f64,
    iterations: usize,
    trace: Vec<f64>,
}

fn run_em(xi: &[f64], init: (f64, f64), spread: f64) -> Option<Run> {
    let n = xi.len() as f64;
    let floor = COLLAPSE * spread;
    let mut w = [0.5, 0.5];
    let mut mu = [init.0, init.1];
    let mut sd = [spread, spread];
    let mut resp = vec![0.0; xi.len()];
    let mut ll = e_step(xi, &w, &mu, &sd, &mut resp);
    let mut trace = Vec::new();
    for it in 1..=EM_MAX_ITER {
        let n0: f64 = resp.iter().sum();
        let n1 = n - n0;
        if !(n0 > 0.0 && n1 > 0.0) {
            return None;
        }
        mu[0] = resp.iter().zip(xi).map(|(r, x)| r * x).sum::<f64>() / n0;
        mu[1] = resp.iter().zip(xi).map(|(r, x)| (1.0 - r) * x).sum::<f64>() / n1;
        let v0 = resp.iter().zip(xi).map(|(r, x)| r * (x - mu[0]).powi(2)).sum::<f64>() / n0;
        let v1 = resp.iter().zip(xi).map(|(r, x)| (1.0 - r) * (x - mu[1]).powi(2)).sum::<f64>() / n1;
        sd = [v0.sqrt(), v1.sqrt()];
        w = [n0 / n, n1 / n];
        if sd.iter().any(|s| !(*s >= floor)) || w.iter().any(|p| !(*p > 0.0 && *p < 1.0)) {
            return None;
        }
        let next = e_step(xi, &w, &mu, &sd, &mut resp);
        trace.push(next);
        let done = (next - ll).abs() <= EM_TOL * ll.abs().max(1.0);
        ll = next;
        if done {
            return Some(Run { weights: w, means: mu, stds: sd, ll, iterations: it, trace });
        }
    }
    None
}

/// Fits by EM from several quantile-based starts; the converged run with the
/// highest likelihood wins, earlier starts on ties.
pub fn gmm_fit(xi: &[f64]) -> Result<GmmModel> {
    if xi.len() < 4 {
        return Err(Error::InvalidParameter(format!("need at least 4 points, got {}", xi.len())));
    }
    if xi.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("mixture input"));
    }
    let spread = sample_std(xi);
    if !(spread > 0.0) {
        return Err(Error::FitFailure("input is constant".into()));
    }
    let mut sorted = xi.to_vec();
    sorted.sort_by(f64::total_cmp);

    let mut best: Option<Run> = None;
    for (lo, hi) in INIT_QUANTILES {
        let (a, b) = (quantile(&sorted, lo), quantile(&sorted, hi));
        if let Some(run) = run_em(xi, (a, b), spread) {
            if best.as_ref().is_none_or(|r| run.ll > r.ll) {
                best = Some(run);
            }
        }
    }
    let run = best.ok_or_else(|| Error::FitFailure("EM did not converge from any start".into()))?;
    let activation = if run.means[1].abs() > run.means[0].abs() { 1 } else { 0 };
    Ok(GmmModel {
        weights: run.weights,
        means: run.means,
        stds: run.stds,
        activation,
        log_likelihood: run.ll,
        iterations: run.iterations,
        trace: run.trace,
    })
}

/// Posterior probability of the activation component at each point.
pub fn gmm_posteriors(xi: &[f64], model: &GmmModel) -> Vec<f64> {
    let mut resp = vec![0.0; xi.len()];
    e_step(xi, &model.weights, &model.means, &model.stds, &mut resp);
    if model.activation == 0 {
        resp
    } else {
        resp.into_iter().map(|r| 1.0 - r).collect()
    }
}

/// Maximum-posterior labels; ties go to the noise component.
pub fn gmm_classify(xi: &[f64], model: &GmmModel) -> Result<ActivationEstimate> {
    let act = model.activation;
    let other = 1 - act;
    let labels = xi
        .iter()
        .map(|&x| {
            let la = model.weights[act].ln() + log_normal(x, model.means[act], model.stds[act]);
            let lo = model.weights[other].ln() + log_normal(x, model.means[other], model.stds[other]);
            if la > lo {
                1
            } else {
                2
            }
        })
        .collect();
    ActivationEstimate::from_labels(labels, xi)
}
