mod common;

use common::{l1, max_abs_diff, random_instance, residual_correlation};
use mci_deconv::homotopy::{compute_path, dantzig_path, lasso_path, oracle, HomotopyPath, PathExport, SolverKind};
use mci_deconv::signal::{canonical_hrf, toeplitz, ConvolutionOperator};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn interior_lambdas(path: &HomotopyPath, seg: usize, count: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let s = &path.segments[seg];
    (0..count)
        .map(|_| {
            let t: f64 = rng.random_range(0.05..0.95);
            s.lambda_low + t * (s.lambda_high - s.lambda_low)
        })
        .collect()
}

fn support_signs(s: &[f64], tol: f64) -> (Vec<usize>, Vec<i8>) {
    let idx: Vec<usize> = (0..s.len()).filter(|&j| s[j].abs() > tol).collect();
    let signs = idx.iter().map(|&j| if s[j] > 0.0 { 1 } else { -1 }).collect();
    (idx, signs)
}

fn stored_solutions(path: &HomotopyPath) -> Vec<(f64, Vec<f64>)> {
    let mut out: Vec<(f64, Vec<f64>)> =
        path.segments.iter().map(|s| (s.lambda_high, s.solution_high.clone())).collect();
    out.push((path.terminal_lambda, path.terminal_solution.clone()));
    out
}

#[test]
fn lasso_midpoints_match_oracle_on_toeplitz_20() {
    for seed in [0u64, 2, 4, 6] {
        let (op, y) = random_instance(seed, 20);
        let path = lasso_path(&op, &y).unwrap();
        for seg in &path.segments {
            let mid = 0.5 * (seg.lambda_high + seg.lambda_low);
            let s = path.solution_at(mid).unwrap();
            let o = oracle::lasso_oracle(op.matrix(), &y, mid).unwrap();
            assert!(max_abs_diff(&s, &o) < 1e-6, "seed {seed} lambda {mid}");
        }
    }
}

#[test]
fn lasso_supports_and_signs_are_constant_on_segments() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for seed in 0..12u64 {
        let (op, y) = random_instance(seed, 8 + seed as usize);
        let path = lasso_path(&op, &y).unwrap();
        for (m, seg) in path.segments.iter().enumerate() {
            for lam in interior_lambdas(&path, m, 5, &mut rng) {
                let o = oracle::lasso_oracle(op.matrix(), &y, lam).unwrap();
                let (idx, signs) = support_signs(&o, 1e-7);
                assert_eq!(idx, seg.support, "seed {seed} segment {m}");
                assert_eq!(signs, seg.signs, "seed {seed} segment {m}");
            }
        }
    }
}

#[test]
fn lasso_stored_solutions_satisfy_kkt() {
    for seed in 0..20u64 {
        let (op, y) = random_instance(seed, 10 + seed as usize);
        let path = lasso_path(&op, &y).unwrap();
        for (lam, s) in stored_solutions(&path) {
            let g = residual_correlation(&op, &y, &s);
            for j in 0..s.len() {
                let lhs = 2.0 * g[j];
                if s[j] != 0.0 {
                    assert!((lhs - lam * s[j].signum()).abs() <= 1e-8, "seed {seed} lambda {lam} j {j}");
                } else {
                    assert!(lhs.abs() <= lam + 1e-8, "seed {seed} lambda {lam} j {j}");
                }
            }
        }
    }
}

#[test]
fn dantzig_matches_lp_oracle_and_stays_feasible() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for seed in 0..10u64 {
        let (op, y) = random_instance(seed, 15);
        let path = dantzig_path(&op, &y).unwrap();
        let lo = path.terminal_lambda;
        for _ in 0..5 {
            let lam = lo + rng.random_range(0.0..1.0) * (path.lambda0 - lo);
            let s = path.solution_at(lam).unwrap();
            let o = oracle::dantzig_oracle(op.matrix(), &y, lam).unwrap();
            assert!((l1(&s) - l1(&o)).abs() < 1e-6, "seed {seed} lambda {lam}");
            let viol = residual_correlation(&op, &y, &s).iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(viol <= lam + 1e-9, "seed {seed} lambda {lam}");
        }
    }
}

#[test]
fn dantzig_stored_solutions_are_feasible() {
    for seed in 0..20u64 {
        let (op, y) = random_instance(seed, 6 + seed as usize);
        let path = dantzig_path(&op, &y).unwrap();
        for (lam, s) in stored_solutions(&path) {
            let viol = residual_correlation(&op, &y, &s).iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(viol <= lam + 1e-9, "seed {seed} lambda {lam}");
        }
    }
}

#[test]
fn hrf_operator_paths_end_at_rank_limit() {
    // The sampled HRF starts at zero, so the last column of H vanishes.
    let op = toeplitz(&canonical_hrf(2.5, 0, 32.0).unwrap(), 30).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let y: Vec<f64> = (0..30).map(|_| rng.random_range(-1.0..1.0)).collect();
    for kind in [SolverKind::Lasso, SolverKind::Dantzig] {
        let path = compute_path(kind, &op, &y).unwrap();
        assert!(path.terminal_lambda >= 0.0);
        assert!(path.segments.iter().all(|s| !s.support.contains(&29)), "{kind:?}");
        if path.terminal_lambda > 0.0 {
            assert!(path.diagnostics.rank_limited);
            assert!(path.solution_at(0.5 * path.terminal_lambda).is_err());
        }
    }
}

#[test]
fn path_export_round_trips() {
    let (op, y) = random_instance(4, 12);
    let path = dantzig_path(&op, &y).unwrap();
    let json = path.to_json().unwrap();
    let back: PathExport = serde_json::from_str(&json).unwrap();
    assert_eq!(back.solver_kind, SolverKind::Dantzig);
    assert_eq!(back.lambda0, path.lambda0);
    assert_eq!(back.segments.len(), path.segments.len());
    assert_eq!(back.segments[0].support, path.segments[0].support);
    assert!(json.contains("\"solver_kind\": \"dantzig\""));
}

fn check_structure(path: &HomotopyPath) {
    if let Some(first) = path.segments.first() {
        assert_eq!(first.lambda_high, path.lambda0);
    }
    for w in path.segments.windows(2) {
        assert_eq!(w[0].lambda_low, w[1].lambda_high);
    }
    for seg in &path.segments {
        assert!(seg.lambda_high > seg.lambda_low && seg.lambda_low >= 0.0);
        assert_eq!(seg.support.len(), seg.signs.len());
        assert!(seg.signs.iter().all(|&s| s == 1 || s == -1));
        for (j, v) in seg.solution_high.iter().enumerate() {
            if *v != 0.0 {
                assert!(seg.support.binary_search(&j).is_ok());
            }
        }
    }
    assert_eq!(path.segments.last().map_or(path.lambda0, |s| s.lambda_low), path.terminal_lambda);
    assert_eq!(path.solution_at(2.0 * path.lambda0 + 1.0).unwrap(), vec![0.0; path.dim]);
}

fn scaled_matches(a: &HomotopyPath, b: &HomotopyPath, c: f64) {
    assert_eq!(a.segments.len(), b.segments.len());
    let ta = a.transition_points();
    let tb = b.transition_points();
    for (x, y) in ta.iter().zip(&tb) {
        assert!((c * x - y).abs() <= 1e-9 * (1.0 + y.abs()));
    }
    for (sa, sb) in a.segments.iter().zip(&b.segments) {
        assert_eq!(sa.support, sb.support);
        assert_eq!(sa.signs, sb.signs);
        let scaled: Vec<f64> = sa.solution_high.iter().map(|v| c * v).collect();
        assert!(max_abs_diff(&scaled, &sb.solution_high) <= 1e-8 * (1.0 + c));
    }
}

fn instance_strategy() -> impl Strategy<Value = (ConvolutionOperator, Vec<f64>)> {
    (0u64..1000, 4usize..16).prop_map(|(seed, n)| random_instance(seed, n))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn paths_are_well_formed((op, y) in instance_strategy()) {
        for kind in [SolverKind::Lasso, SolverKind::Dantzig] {
            check_structure(&compute_path(kind, &op, &y).unwrap());
        }
    }

    #[test]
    fn paths_scale_with_observation((op, y) in instance_strategy(), c in 0.1f64..10.0) {
        let ys: Vec<f64> = y.iter().map(|v| c * v).collect();
        for kind in [SolverKind::Lasso, SolverKind::Dantzig] {
            let a = compute_path(kind, &op, &y).unwrap();
            let b = compute_path(kind, &op, &ys).unwrap();
            scaled_matches(&a, &b, c);
        }
    }

    #[test]
    fn transition_points_are_exact((op, y) in instance_strategy()) {
        let path = lasso_path(&op, &y).unwrap();
        for seg in &path.segments {
            prop_assert_eq!(path.solution_at(seg.lambda_high).unwrap(), seg.solution_high.clone());
        }
    }
}
