#![allow(dead_code)]

use mci_deconv::signal::{toeplitz, ConvolutionOperator, HrfKernel};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random test design: even seeds give a Toeplitz operator from a decaying
/// random kernel, odd seeds a dense Gaussian matrix.
pub fn random_instance(seed: u64, n: usize) -> (ConvolutionOperator, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let op = if seed % 2 == 0 {
        let len = rng.random_range(2..=(n / 2).max(2));
        let mut coef: Vec<f64> = (0..len)
            .map(|i| rng.random_range(-1.0..1.0) * 0.7f64.powi(i as i32))
            .collect();
        coef[0] = 1.0 + rng.random_range(0.0..0.5);
        toeplitz(&HrfKernel::new(coef, 1.0, 0).unwrap(), n).unwrap()
    } else {
        let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0) / (n as f64).sqrt());
        ConvolutionOperator::from_matrix(m).unwrap()
    };
    let y = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    (op, y)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn l1(a: &[f64]) -> f64 {
    a.iter().map(|v| v.abs()).sum()
}

/// `H^T (y - H s)`.
pub fn residual_correlation(op: &ConvolutionOperator, y: &[f64], s: &[f64]) -> Vec<f64> {
    let fit = op.apply(s).unwrap();
    let resid: Vec<f64> = y.iter().zip(&fit).map(|(a, b)| a - b).collect();
    op.correlate(&resid).unwrap()
}
