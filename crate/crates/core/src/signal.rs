//! Discrete convolutional forward model.
//!
//! `y_k = sum_{i=0}^{N_h-1} h_i s_{k-i} + e_k` with `s_{k-i} = 0` before the
//! first sample, i.e. causal zero-padded convolution. Indices are zero-based.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative singular-value cutoff of the truncated-SVD least-squares solve.
pub const OLS_RCOND: f64 = 1e-10;

/// Uniformly sampled real-valued signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    values: Vec<f64>,
    tr: f64,
}

impl TimeSeries {
    pub fn new(values: Vec<f64>, tr: f64) -> Result<Self> {
        if !(tr > 0.0) || !tr.is_finite() {
            return Err(Error::InvalidParameter(format!("sampling period must be > 0, got {tr}")));
        }
        if values.len() < 2 {
            return Err(Error::InvalidParameter(format!(
                "a time series needs at least 2 samples, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("time series"));
        }
        Ok(Self { values, tr })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn tr(&self) -> f64 {
        self.tr
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Sample standard deviation (denominator `N - 1`).
    pub fn std(&self) -> f64 {
        sample_std(&self.values)
    }
}

/// Sparse event train; the support is kept in sync with the nonzero entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseSignal {
    values: Vec<f64>,
    support: Vec<usize>,
}

impl SparseSignal {
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("sparse signal"));
        }
        let support = values
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(j, _)| j)
            .collect();
        Ok(Self { values, support })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Parameters of the double-gamma response shape, in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HrfShape {
    pub response_delay: f64,
    pub undershoot_delay: f64,
    pub response_dispersion: f64,
    pub undershoot_dispersion: f64,
    /// Ratio of response to undershoot amplitude.
    pub ratio: f64,
}

impl Default for HrfShape {
    fn default() -> Self {
        Self {
            response_delay: 6.0,
            undershoot_delay: 16.0,
            response_dispersion: 1.0,
            undershoot_dispersion: 1.0,
            ratio: 6.0,
        }
    }
}

impl HrfShape {
    /// Unnormalized double-gamma value at `t` seconds.
    pub fn eval(&self, t: f64) -> f64 {
        gamma_pdf(t, self.response_delay / self.response_dispersion, self.response_dispersion)
            - gamma_pdf(t, self.undershoot_delay / self.undershoot_dispersion, self.undershoot_dispersion)
                / self.ratio
    }
}

/// Sampled hemodynamic response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HrfKernel {
    coefficients: Vec<f64>,
    tr: f64,
    onset_shift: usize,
}

impl HrfKernel {
    pub fn new(coefficients: Vec<f64>, tr: f64, onset_shift: usize) -> Result<Self> {
        if !(tr > 0.0) || !tr.is_finite() {
            return Err(Error::InvalidParameter(format!("sampling period must be > 0, got {tr}")));
        }
        if coefficients.is_empty() {
            return Err(Error::InvalidParameter("empty kernel".into()));
        }
        if coefficients.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("kernel"));
        }
        if coefficients.iter().all(|v| *v == 0.0) {
            return Err(Error::InvalidParameter("kernel is identically zero".into()));
        }
        Ok(Self { coefficients, tr, onset_shift })
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn tr(&self) -> f64 {
        self.tr
    }

    pub fn onset_shift(&self) -> usize {
        self.onset_shift
    }

    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }
}

/// Canonical double-gamma HRF sampled every `tr` seconds from 0 to `duration`,
/// delayed by `onset_shift` samples and scaled to unit L1 mass.
pub fn canonical_hrf(tr: f64, onset_shift: usize, duration: f64) -> Result<HrfKernel> {
    hrf_with_shape(&HrfShape::default(), tr, onset_shift, duration)
}

pub fn hrf_with_shape(shape: &HrfShape, tr: f64, onset_shift: usize, duration: f64) -> Result<HrfKernel> {
    if !(tr > 0.0) || !tr.is_finite() {
        return Err(Error::InvalidParameter(format!("tr must be > 0, got {tr}")));
    }
    if !(duration >= tr) || !duration.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "duration must be >= tr ({tr}), got {duration}"
        )));
    }
    let samples = (duration / tr + 1e-9).floor() as usize + 1;
    let mut coefficients = vec![0.0; onset_shift];
    coefficients.extend((0..samples).map(|k| shape.eval(k as f64 * tr)));
    let mass: f64 = coefficients.iter().map(|c| c.abs()).sum();
    if !(mass > 0.0) {
        return Err(Error::InvalidParameter("kernel has zero mass".into()));
    }
    coefficients.iter_mut().for_each(|c| *c /= mass);
    HrfKernel::new(coefficients, tr, onset_shift)
}

/// Gamma density with the given shape and scale; zero for `t <= 0`.
fn gamma_pdf(t: f64, shape: f64, scale: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let x = t / scale;
    ((shape - 1.0) * x.ln() - x - ln_gamma(shape)).exp() / scale
}

/// Lanczos approximation (g = 7, n = 9), accurate to ~1e-15 for positive arguments.
fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let t = x + 7.5;
    let series = COEF[1..]
        .iter()
        .enumerate()
        .fold(COEF[0], |acc, (i, c)| acc + c / (x + i as f64 + 1.0));
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + series.ln()
}

/// Lower-triangular Toeplitz convolution matrix with cached derived products.
#[derive(Debug)]
pub struct ConvolutionOperator {
    kernel: Vec<f64>,
    matrix: DMatrix<f64>,
    gram: OnceLock<DMatrix<f64>>,
    pinv: OnceLock<DMatrix<f64>>,
}

impl Clone for ConvolutionOperator {
    fn clone(&self) -> Self {
        Self {
            kernel: self.kernel.clone(),
            matrix: self.matrix.clone(),
            gram: OnceLock::new(),
            pinv: OnceLock::new(),
        }
    }
}

impl ConvolutionOperator {
    /// Wraps an arbitrary square matrix; used for dense test designs.
    pub fn from_matrix(matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch { expected: matrix.nrows(), got: matrix.ncols() });
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("operator"));
        }
        let kernel = matrix.column(0).iter().copied().collect();
        Ok(Self { kernel, matrix, gram: OnceLock::new(), pinv: OnceLock::new() })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// First column of the operator.
    pub fn kernel(&self) -> &[f64] {
        &self.kernel
    }

    /// `H^T H`, computed once.
    pub fn gram(&self) -> &DMatrix<f64> {
        self.gram.get_or_init(|| self.matrix.tr_mul(&self.matrix))
    }

    pub fn apply(&self, s: &[f64]) -> Result<Vec<f64>> {
        self.check_len(s.len())?;
        Ok((&self.matrix * DVector::from_column_slice(s)).as_slice().to_vec())
    }

    /// `H^T y`.
    pub fn correlate(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.check_len(y.len())?;
        Ok(self.matrix.tr_mul(&DVector::from_column_slice(y)).as_slice().to_vec())
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: len });
        }
        Ok(())
    }

    /// Truncated-SVD pseudo-inverse, computed once.
    fn pseudo_inverse(&self) -> &DMatrix<f64> {
        self.pinv.get_or_init(|| {
            let svd = self.matrix.clone().svd(true, true);
            let smax = svd.singular_values.max();
            let cutoff = smax * OLS_RCOND;
            let u = svd.u.as_ref().expect("u requested");
            let vt = svd.v_t.as_ref().expect("v_t requested");
            let n = self.dim();
            let mut pinv = DMatrix::zeros(n, n);
            for (k, &sv) in svd.singular_values.iter().enumerate() {
                if sv > cutoff && sv > 0.0 {
                    let vk = vt.row(k).transpose();
                    let uk = u.column(k);
                    pinv += (vk / sv) * uk.transpose();
                }
            }
            pinv
        })
    }
}

/// Builds the `n x n` causal convolution matrix of `h`.
pub fn toeplitz(h: &HrfKernel, n: usize) -> Result<ConvolutionOperator> {
    if h.len() >= n {
        return Err(Error::InvalidParameter(format!(
            "kernel length {} must be smaller than the series length {n}",
            h.len()
        )));
    }
    let mut matrix = DMatrix::zeros(n, n);
    for j in 0..n {
        for (i, &hi) in h.coefficients().iter().enumerate() {
            if j + i < n {
                matrix[(j + i, j)] = hi;
            }
        }
    }
    let mut kernel = h.coefficients().to_vec();
    kernel.resize(n, 0.0);
    Ok(ConvolutionOperator { kernel, matrix, gram: OnceLock::new(), pinv: OnceLock::new() })
}

/// Matrix-free causal convolution of `s` with `h`, truncated to `len(s)`.
pub fn convolve(s: &SparseSignal, h: &HrfKernel) -> Result<TimeSeries> {
    let n = s.len();
    if h.len() >= n {
        return Err(Error::InvalidParameter(format!(
            "kernel length {} must be smaller than the series length {n}",
            h.len()
        )));
    }
    let mut out = vec![0.0; n];
    for &j in s.support() {
        let amp = s.values()[j];
        for (i, &hi) in h.coefficients().iter().enumerate() {
            if j + i >= n {
                break;
            }
            out[j + i] += hi * amp;
        }
    }
    TimeSeries::new(out, h.tr())
}

/// Exactly `k` unit spikes at distinct uniformly drawn positions.
pub fn generate_sparse_signal<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Result<SparseSignal> {
    if k == 0 || k > n {
        return Err(Error::InvalidParameter(format!("spike count must be in 1..={n}, got {k}")));
    }
    let mut values = vec![0.0; n];
    for j in rand::seq::index::sample(rng, n, k) {
        values[j] = 1.0;
    }
    SparseSignal::from_values(values)
}

/// Adds i.i.d. Gaussian noise with standard deviation `std(clean) / snr`.
pub fn add_noise_at_snr<R: Rng + ?Sized>(clean: &TimeSeries, snr: f64, rng: &mut R) -> Result<TimeSeries> {
    if !(snr > 0.0) || snr.is_nan() {
        return Err(Error::InvalidParameter(format!("snr must be > 0, got {snr}")));
    }
    let sd = clean.std();
    if !(sd > 0.0) {
        return Err(Error::DegenerateInput("clean series is constant".into()));
    }
    let sigma = sd / snr;
    let values = clean
        .values()
        .iter()
        .map(|&v| {
            let z: f64 = rng.sample(StandardNormal);
            v + sigma * z
        })
        .collect();
    TimeSeries::new(values, clean.tr())
}

/// Minimum-norm least-squares solution of `y ~ H xi` by truncated SVD.
pub fn ols_estimate(y: &TimeSeries, h: &ConvolutionOperator) -> Result<Vec<f64>> {
    h.check_len(y.len())?;
    let pinv = h.pseudo_inverse();
    Ok((pinv * DVector::from_column_slice(y.values())).as_slice().to_vec())
}

pub(crate) fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

pub(crate) fn sample_std(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let m = mean(x);
    (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn ln_gamma_matches_factorials() {
        assert!((ln_gamma(6.0) - 120f64.ln()).abs() < 1e-12);
        assert!((ln_gamma(16.0) - 1_307_674_368_000f64.ln()).abs() < 1e-10);
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-12);
    }

    #[test]
    fn canonical_hrf_shape() {
        let h = canonical_hrf(2.5, 0, 32.0).unwrap();
        assert_eq!(h.len(), 13);
        // Independent evaluation of the double-gamma at t = k * 2.5 with
        // integer shapes 6 and 16: t^5 e^-t / 5! - t^15 e^-t / (6 * 15!).
        let fact = |n: u32| (1..=n).map(f64::from).product::<f64>();
        let raw: Vec<f64> = (0..13)
            .map(|k| {
                let t = k as f64 * 2.5;
                t.powi(5) * (-t).exp() / fact(5) - t.powi(15) * (-t).exp() / (6.0 * fact(15))
            })
            .collect();
        let mass: f64 = raw.iter().map(|v| v.abs()).sum();
        for (a, b) in h.coefficients().iter().zip(&raw) {
            assert!((a - b / mass).abs() < 1e-12);
        }
        let argmax = (0..13).max_by(|&a, &b| raw[a].total_cmp(&raw[b])).unwrap();
        assert_eq!(argmax, 2, "peak at t = 5 s");
        assert!(h.coefficients()[6..].iter().any(|&c| c < 0.0), "late undershoot");
        assert_eq!(h.coefficients()[0], 0.0);
        let l1: f64 = h.coefficients().iter().map(|c| c.abs()).sum();
        assert!((l1 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn onset_shift_delays_by_one_sample() {
        let h0 = canonical_hrf(2.5, 0, 32.0).unwrap();
        let h1 = canonical_hrf(2.5, 1, 32.0).unwrap();
        assert_eq!(h1.len(), h0.len() + 1);
        assert_eq!(h1.coefficients()[0], 0.0);
        assert_eq!(&h1.coefficients()[1..], h0.coefficients());
        assert_eq!(h1.onset_shift(), 1);
    }

    #[test]
    fn hrf_rejects_bad_parameters() {
        assert!(matches!(canonical_hrf(0.0, 0, 32.0), Err(Error::InvalidParameter(_))));
        assert!(matches!(canonical_hrf(-1.0, 0, 32.0), Err(Error::InvalidParameter(_))));
        assert!(matches!(canonical_hrf(2.5, 0, 1.0), Err(Error::InvalidParameter(_))));
        assert!(matches!(canonical_hrf(2.5, 0, 0.0), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn toeplitz_small_cases() {
        let h = HrfKernel::new(vec![1.0, 0.5], 1.0, 0).unwrap();
        let op = toeplitz(&h, 3).unwrap();
        let expected = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.5, 1.0, 0.0, 0.0, 0.5, 1.0]);
        assert_eq!(op.matrix(), &expected);

        let id = HrfKernel::new(vec![1.0], 1.0, 0).unwrap();
        assert_eq!(toeplitz(&id, 3).unwrap().matrix(), &DMatrix::identity(3, 3));

        assert!(matches!(toeplitz(&h, 2), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn toeplitz_is_lower_triangular_with_constant_diagonals() {
        let h = canonical_hrf(2.5, 1, 32.0).unwrap();
        let op = toeplitz(&h, 40).unwrap();
        let m = op.matrix();
        for r in 0..40 {
            for c in 0..40 {
                if c > r {
                    assert_eq!(m[(r, c)], 0.0);
                } else if r > 0 && c > 0 {
                    assert_eq!(m[(r, c)], m[(r - 1, c - 1)]);
                }
            }
        }
    }

    #[test]
    fn convolve_delta_and_zero() {
        let h = canonical_hrf(2.5, 0, 32.0).unwrap();
        let mut v = vec![0.0; 30];
        v[0] = 1.0;
        let s = SparseSignal::from_values(v).unwrap();
        let y = convolve(&s, &h).unwrap();
        assert_eq!(&y.values()[..13], h.coefficients());
        assert!(y.values()[13..].iter().all(|&x| x == 0.0));

        let zero = SparseSignal::from_values(vec![0.0; 30]).unwrap();
        assert!(convolve(&zero, &h).unwrap().values().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn convolve_matches_dense_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let h = canonical_hrf(2.5, 0, 32.0).unwrap();
        let s: Vec<f64> = (0..20).map(|_| rng.random_range(-1.0..1.0)).collect();
        let op = toeplitz(&h, 20).unwrap();
        let dense = op.apply(&s).unwrap();
        let fast = convolve(&SparseSignal::from_values(s).unwrap(), &h).unwrap();
        for (a, b) in dense.iter().zip(fast.values()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn sparse_signal_generation() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = generate_sparse_signal(300, 30, &mut rng).unwrap();
        assert_eq!(s.support().len(), 30);
        assert!(s.values().iter().all(|&v| v == 0.0 || v == 1.0));

        let full = generate_sparse_signal(5, 5, &mut rng).unwrap();
        assert_eq!(full.values(), &[1.0; 5]);

        let a = generate_sparse_signal(100, 10, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = generate_sparse_signal(100, 10, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(a, b);

        assert!(matches!(generate_sparse_signal(5, 6, &mut rng), Err(Error::InvalidParameter(_))));
        assert!(matches!(generate_sparse_signal(5, 0, &mut rng), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn noise_level_follows_snr() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000;
        // Alternating +-1 has sample std sqrt(n / (n - 1)).
        let clean: Vec<f64> = (0..n).map(|k| if k % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let clean = TimeSeries::new(clean, 1.0).unwrap();
        let noisy = add_noise_at_snr(&clean, 2.0, &mut rng).unwrap();
        let noise: Vec<f64> = noisy.values().iter().zip(clean.values()).map(|(a, b)| a - b).collect();
        let expected = clean.std() / 2.0;
        assert!((sample_std(&noise) / expected - 1.0).abs() < 0.02);

        let quiet = add_noise_at_snr(&clean, 1e12, &mut rng).unwrap();
        let tol = 1e-9 * clean.std();
        for (a, b) in quiet.values().iter().zip(clean.values()) {
            assert!((a - b).abs() < tol);
        }
    }

    #[test]
    fn noise_rejects_constant_series() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let flat = TimeSeries::new(vec![1.0; 10], 1.0).unwrap();
        assert!(matches!(add_noise_at_snr(&flat, 2.0, &mut rng), Err(Error::DegenerateInput(_))));
        let ok = TimeSeries::new(vec![0.0, 1.0], 1.0).unwrap();
        assert!(matches!(add_noise_at_snr(&ok, 0.0, &mut rng), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn ols_identity_and_inversion() {
        let id = toeplitz(&HrfKernel::new(vec![1.0], 1.0, 0).unwrap(), 5).unwrap();
        let y = TimeSeries::new(vec![1.0, -2.0, 3.0, 0.5, 0.0], 1.0).unwrap();
        for (a, b) in ols_estimate(&y, &id).unwrap().iter().zip(y.values()) {
            assert!((a - b).abs() < 1e-12);
        }

        let h = HrfKernel::new(vec![1.0, 0.6, 0.3, -0.1], 1.0, 0).unwrap();
        let op = toeplitz(&h, 20).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = generate_sparse_signal(20, 4, &mut rng).unwrap();
        let y = convolve(&s, &h).unwrap();
        let xi = ols_estimate(&y, &op).unwrap();
        for (a, b) in xi.iter().zip(s.values()) {
            assert!((a - b).abs() < 1e-8);
        }

        let bad = TimeSeries::new(vec![0.0; 4], 1.0).unwrap();
        assert!(matches!(ols_estimate(&bad, &op), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn ols_rank_deficient_is_minimal_residual() {
        // h_0 = 0 makes H strictly lower triangular and singular.
        let h = HrfKernel::new(vec![0.0, 1.0, 0.4], 1.0, 0).unwrap();
        let op = toeplitz(&h, 12).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let y: Vec<f64> = (0..12).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y = TimeSeries::new(y, 1.0).unwrap();
        let xi = ols_estimate(&y, &op).unwrap();
        assert!(xi.iter().all(|v| v.is_finite()));

        // Oracle: nalgebra's own pseudo-inverse.
        let pinv = op.matrix().clone().pseudo_inverse(1e-12).unwrap();
        let oracle = pinv * DVector::from_column_slice(y.values());
        for (a, b) in xi.iter().zip(oracle.iter()) {
            assert!((a - b).abs() < 1e-8);
        }

        let residual = |x: &[f64]| {
            let fit = op.apply(x).unwrap();
            fit.iter().zip(y.values()).map(|(f, v)| (v - f).powi(2)).sum::<f64>()
        };
        let base = residual(&xi);
        for t in 0..20 {
            let pert: Vec<f64> = xi.iter().map(|v| v + 1e-3 * rng.random_range(-1.0..1.0)).collect();
            assert!(residual(&pert) >= base - 1e-12, "perturbation {t} reduced the residual");
        }
    }
}
