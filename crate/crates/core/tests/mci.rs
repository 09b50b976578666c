use mci_deconv::homotopy::SolverKind;
use mci_deconv::mci::{
    bayes_classify, component_moments, kde_raw, mci_deconvolve, mvc_weights, ComponentDensity, MixtureProbabilities,
};
use mci_deconv::signal::{canonical_hrf, TimeSeries};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn random_probabilities(n: usize, rng: &mut ChaCha8Rng) -> MixtureProbabilities {
    loop {
        let p: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        if p.iter().any(|v| (v - p[0]).abs() > 1e-3) {
            return MixtureProbabilities::new(p).unwrap();
        }
    }
}

fn inner(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>() / u.len() as f64
}

#[test]
fn mvc_weights_are_biorthogonal_to_probabilities() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for n in [10, 100, 1000] {
        for _ in 0..30 {
            let p = random_probabilities(n, &mut rng);
            let w = mvc_weights(&p).unwrap();
            let pm = [p.activation().to_vec(), p.noise()];
            for k in 0..2 {
                for m in 0..2 {
                    let want = if k == m { 1.0 } else { 0.0 };
                    let got = inner(w.component(k + 1), &pm[m]);
                    assert!((got - want).abs() <= 1e-10, "n={n} k={k} m={m}: {got}");
                }
            }
        }
    }
}

#[test]
fn indicator_weights_recover_cluster_moments() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let hi = Normal::new(4.0, 0.5).unwrap();
    let lo = Normal::new(0.0, 0.3).unwrap();
    let n = 600;
    let member: Vec<bool> = (0..n).map(|j| j % 3 == 0).collect();
    let xi: Vec<f64> = member.iter().map(|&m| if m { hi.sample(&mut rng) } else { lo.sample(&mut rng) }).collect();
    let p = MixtureProbabilities::new(member.iter().map(|&m| if m { 1.0 } else { 0.0 }).collect()).unwrap();
    let w = mvc_weights(&p).unwrap();

    for (component, want_in) in [(1, true), (2, false)] {
        let cluster: Vec<f64> = xi.iter().zip(&member).filter(|(_, &m)| m == want_in).map(|(x, _)| *x).collect();
        let k = cluster.len() as f64;
        let mean = cluster.iter().sum::<f64>() / k;
        let sd = (cluster.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt();
        let got = component_moments(&xi, w.component(component)).unwrap();
        assert!(!got.clamped);
        assert!((got.mean - mean).abs() <= 0.1 * mean.abs().max(sd), "component {component} mean");
        assert!((got.sigma - sd).abs() <= 0.1 * sd, "component {component} sigma {} vs {sd}", got.sigma);
    }
}

fn trapezoid(f: impl Fn(f64) -> f64, lo: f64, hi: f64, steps: usize) -> f64 {
    let dx = (hi - lo) / steps as f64;
    let mut total = 0.5 * (f(lo) + f(hi));
    for i in 1..steps {
        total += f(lo + i as f64 * dx);
    }
    total * dx
}

#[test]
fn kernel_densities_integrate_to_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let xi: Vec<f64> = (0..200).map(|_| rng.random_range(-3.0..5.0)).collect();
    let ones = vec![1.0; xi.len()];
    let area = trapezoid(|x| kde_raw(&xi, &ones, 0.4, x), -10.0, 12.0, 20_000);
    assert!((area - 1.0).abs() <= 1e-3, "{area}");

    // MVC weights have unit mean, so the signed density still has unit mass.
    let p = random_probabilities(xi.len(), &mut rng);
    let w = mvc_weights(&p).unwrap();
    for m in [1, 2] {
        let area = trapezoid(|x| kde_raw(&xi, w.component(m), 0.4, x), -10.0, 12.0, 20_000);
        assert!((area - 1.0).abs() <= 1e-3, "component {m}: {area}");
    }
}

#[test]
fn raising_activation_probability_never_removes_a_detection() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let n = 150;
    let xi: Vec<f64> = (0..n)
        .map(|j| if j % 10 == 0 { 3.0 + rng.random::<f64>() } else { rng.random_range(-0.5..0.5) })
        .collect();
    let p1: Vec<f64> = (0..n).map(|j| if j % 10 == 0 { 0.7 } else { 0.2 } + 0.1 * rng.random::<f64>()).collect();
    let p = MixtureProbabilities::new(p1.clone()).unwrap();
    let w = mvc_weights(&p).unwrap();
    let f1 = ComponentDensity::fit(&xi, &w, 1).unwrap();
    let f2 = ComponentDensity::fit(&xi, &w, 2).unwrap();
    let base = bayes_classify(&xi, &p, &f1, &f2).unwrap();

    for _ in 0..20 {
        let raised: Vec<f64> = p1.iter().map(|v| (v + 0.3 * rng.random::<f64>()).min(1.0)).collect();
        let q = MixtureProbabilities::new(raised).unwrap();
        let more = bayes_classify(&xi, &q, &f1, &f2).unwrap();
        for j in base.support() {
            assert_eq!(more.labels()[*j], 1, "index {j} lost its activation label");
        }
    }
}

#[test]
fn pipeline_is_deterministic() {
    let h = canonical_hrf(2.5, 0, 32.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let noise = Normal::new(0.0, 0.3).unwrap();
    let mut s = vec![0.0; 120];
    for j in [10, 40, 41, 80, 95] {
        s[j] = 1.0 + rng.random::<f64>();
    }
    let clean = mci_deconv::signal::convolve(&mci_deconv::signal::SparseSignal::from_values(s).unwrap(), &h).unwrap();
    let y = TimeSeries::new(clean.values().iter().map(|v| v + noise.sample(&mut rng)).collect(), 2.5).unwrap();
    for kind in [SolverKind::Dantzig, SolverKind::Lasso] {
        let a = mci_deconvolve(&y, &h, kind).unwrap();
        let b = mci_deconvolve(&y, &h, kind).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn pure_noise_yields_a_near_empty_support() {
    let h = canonical_hrf(2.5, 0, 32.0).unwrap();
    let n = 100;
    let mut sizes: Vec<usize> = (0..100u64)
        .map(|seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
            let y: Vec<f64> = (0..n).map(|_| Normal::new(0.0, 1.0).unwrap().sample(&mut rng)).collect();
            let y = TimeSeries::new(y, 2.5).unwrap();
            mci_deconvolve(&y, &h, SolverKind::Dantzig).unwrap().estimate.support().len()
        })
        .collect();
    sizes.sort_unstable();
    let median = sizes[sizes.len() / 2];
    assert!(median as f64 <= 0.05 * n as f64, "median support {median}, sizes {sizes:?}");
}
