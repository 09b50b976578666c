//! LARS-type homotopy for the LASSO, with coefficient drops.
//!
//! Internally the path is followed in `mu = lambda / 2`, for which the KKT
//! conditions read `H^T (y - H s) = mu * sign(s)` on the active set and
//! `|H^T (y - H s)| <= mu` elsewhere.

use crate::error::{Error, Result};
use crate::signal::ConvolutionOperator;

use super::active::ActiveInverse;
use super::{argmax_abs, check_inputs, pick, sign, Candidate, HomotopyPath, PathBuilder, SolverKind};

#[derive(Debug, Clone, Copy, PartialEq)]
enum Event {
    Drop,
    Add,
    End,
}

pub fn lasso_path(h: &ConvolutionOperator, y: &[f64]) -> Result<HomotopyPath> {
    check_inputs(h, y)?;
    let n = h.dim();
    let gram = h.gram();
    let corr = h.correlate(y)?;

    let (first, mu0) = argmax_abs(&corr);
    let mut builder = PathBuilder::new(SolverKind::Lasso, n, 2.0 * mu0);
    let mut s = vec![0.0; n];
    if mu0 == 0.0 {
        return Ok(builder.finish(0.0, s));
    }

    let tie_tol = 1e-13 * mu0;
    let mut mu = mu0;
    let mut active = ActiveInverse::new(gram);
    let mut signs: Vec<f64> = Vec::new();
    let mut in_active = vec![false; n];
    active.push(first, first).map_err(|_| Error::SolverStall {
        lambda: 2.0 * mu,
        reason: "first column has zero norm".into(),
    })?;
    signs.push(sign(corr[first]));
    in_active[first] = true;

    let mut just_dropped: Option<usize> = None;
    let mut zero_steps = 0usize;
    let max_events = 50 * n + 100;

    loop {
        let set = active.cols().to_vec();
        let dir = active.solve(&signs);
        // Residual correlations r = c - G s and their rate of change w = G[:, P] dir.
        let mut r = corr.clone();
        let mut w = vec![0.0; n];
        for (q, &j) in set.iter().enumerate() {
            let col = gram.column(j);
            let (sj, dj) = (s[j], dir[q]);
            for k in 0..n {
                r[k] -= col[k] * sj;
                w[k] += col[k] * dj;
            }
        }

        let mut cands: Vec<Candidate<Event>> = Vec::new();
        cands.push(Candidate { step: mu, index: usize::MAX, event: Event::End });
        for (q, &j) in set.iter().enumerate() {
            if s[j] != 0.0 && dir[q] != 0.0 {
                let step = -s[j] / dir[q];
                if step > 0.0 {
                    cands.push(Candidate { step, index: j, event: Event::Drop });
                }
            }
        }
        for k in 0..n {
            if in_active[k] {
                continue;
            }
            // A just-dropped index sits on the boundary; only a later crossing counts.
            let floor = if just_dropped == Some(k) { tie_tol } else { f64::NEG_INFINITY };
            if 1.0 - w[k] > 0.0 {
                let step = (mu - r[k]).max(0.0) / (1.0 - w[k]);
                if step > floor {
                    cands.push(Candidate { step, index: k, event: Event::Add });
                }
            }
            if 1.0 + w[k] > 0.0 {
                let step = (mu + r[k]).max(0.0) / (1.0 + w[k]);
                if step > floor {
                    cands.push(Candidate { step, index: k, event: Event::Add });
                }
            }
        }
        // Reaching mu = 0 takes precedence over simultaneous events.
        let (best, tie) = if cands.iter().any(|c| c.event != Event::End && c.step < mu - tie_tol) {
            pick(&cands, tie_tol).expect("non-empty candidate list")
        } else {
            (cands[0], false)
        };
        let step = best.step.min(mu);

        let at_high = s.clone();
        let high = mu;
        for (q, &j) in set.iter().enumerate() {
            s[j] += step * dir[q];
        }
        mu -= step;
        if best.event == Event::End {
            mu = 0.0;
        }
        builder.push(2.0 * high, 2.0 * mu, &set, &signs, &at_high);
        let diag = builder.diagnostics();
        diag.events += 1;
        if tie {
            diag.ties += 1;
        }

        if best.event == Event::End {
            return Ok(builder.finish(0.0, s));
        }
        if step > 0.0 {
            zero_steps = 0;
        } else {
            zero_steps += 1;
        }
        if zero_steps > n + 1 || builder.diagnostics().events > max_events {
            return Err(Error::SolverStall { lambda: 2.0 * mu, reason: "no progress in lambda".into() });
        }

        just_dropped = None;
        match best.event {
            Event::Drop => {
                let j = best.index;
                let q = active.cols().iter().position(|&c| c == j).expect("active index");
                s[j] = 0.0;
                if active.remove(q, q).is_err() {
                    builder.diagnostics().rank_limited = true;
                    return Ok(builder.finish(2.0 * mu, s));
                }
                signs.remove(q);
                in_active[j] = false;
                just_dropped = Some(j);
            }
            Event::Add => {
                let k = best.index;
                if active.push(k, k).is_err() {
                    builder.diagnostics().rank_limited = true;
                    return Ok(builder.finish(2.0 * mu, s));
                }
                let rk = r[k] - step * w[k];
                signs.push(sign(rk));
                in_active[k] = true;
            }
            Event::End => unreachable!(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{toeplitz, HrfKernel};
    use nalgebra::DMatrix;

    #[test]
    fn one_dimensional_closed_form() {
        // argmin lambda |s| + (2 - s)^2 is s = 2 - lambda / 2 on (0, 4).
        let h = ConvolutionOperator::from_matrix(DMatrix::from_element(1, 1, 1.0)).unwrap();
        let path = lasso_path(&h, &[2.0]).unwrap();
        assert_eq!(path.lambda0, 4.0);
        assert_eq!(path.segments.len(), 1);
        assert_eq!(path.segments[0].support, vec![0]);
        assert_eq!(path.terminal_lambda, 0.0);
        assert_eq!(path.solution_at(2.0).unwrap(), vec![1.0]);
        assert_eq!(path.solution_at(1.0).unwrap(), vec![1.5]);
        assert_eq!(path.solution_at(0.0).unwrap(), vec![2.0]);
    }

    #[test]
    fn zero_observation_gives_trivial_path() {
        let h = ConvolutionOperator::from_matrix(DMatrix::identity(3, 3)).unwrap();
        let path = lasso_path(&h, &[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(path.lambda0, 0.0);
        assert!(path.segments.is_empty());
        assert_eq!(path.solution_at(1.0).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn identity_path_enters_by_magnitude() {
        let h = ConvolutionOperator::from_matrix(DMatrix::identity(3, 3)).unwrap();
        let path = lasso_path(&h, &[3.0, 2.0, 1.0]).unwrap();
        assert_eq!(path.transition_points(), vec![6.0, 4.0, 2.0, 0.0]);
        let supports: Vec<_> = path.segments.iter().map(|s| s.support.clone()).collect();
        assert_eq!(supports, vec![vec![0], vec![0, 1], vec![0, 1, 2]]);
    }

    #[test]
    fn singular_operator_stops_at_rank() {
        let h = HrfKernel::new(vec![0.0, 1.0, 0.5], 1.0, 0).unwrap();
        let op = toeplitz(&h, 6).unwrap();
        let path = lasso_path(&op, &[0.1, 0.3, -0.2, 1.0, 0.4, -0.7]).unwrap();
        assert!(path.segments.iter().all(|s| !s.support.contains(&5)));
        for w in path.segments.windows(2) {
            assert!(w[0].lambda_high > w[0].lambda_low);
            assert_eq!(w[0].lambda_low, w[1].lambda_high);
        }
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let h = ConvolutionOperator::from_matrix(DMatrix::identity(3, 3)).unwrap();
        assert!(matches!(lasso_path(&h, &[1.0, 2.0]), Err(Error::DimensionMismatch { .. })));
    }
}
