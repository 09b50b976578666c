//! Primal-dual pursuit homotopy for the Dantzig selector.
//!
//! With `G = H^T H` and `c = H^T y`, the selector at `lambda` is the LP
//! `min ||s||_1  s.t.  |c - G s| <= lambda`. Its optimality conditions involve a
//! primal support `P` (signs `sigma`), a set `D` of active constraints (signs
//! `zeta`, with `c_D - G[D, P] s_P = lambda * zeta`) and a dual vector `u`
//! supported on `D` with `G[P, D] u_D = sigma` and `|G u| <= 1` elsewhere.
//! `|P| = |D|` on every segment, so `s_P` moves along `G[D, P]^{-1} zeta` while
//! `u` stays fixed. At a breakpoint either a primal coefficient hits zero or a
//! constraint becomes active; the dual vector is then moved along a one
//! dimensional direction until it either drops a constraint or admits a new
//! primal coefficient, which restores `|P| = |D|`.

use crate::error::{Error, Result};
use crate::signal::ConvolutionOperator;

use super::active::ActiveInverse;
use super::{argmax_abs, check_inputs, pick, sign, Candidate, HomotopyPath, PathBuilder, SolverKind};

#[derive(Debug, Clone, Copy, PartialEq)]
enum PrimalEvent {
    Drop,
    Constraint,
    End,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum DualEvent {
    /// A dual coefficient reaches zero; its constraint leaves `D`.
    Release,
    /// `|(G u)_k|` reaches one; `k` joins `P`.
    Admit,
}

pub fn dantzig_path(h: &ConvolutionOperator, y: &[f64]) -> Result<HomotopyPath> {
    check_inputs(h, y)?;
    let n = h.dim();
    let gram = h.gram();
    let corr = h.correlate(y)?;

    let (first_row, lambda0) = argmax_abs(&corr);
    let mut builder = PathBuilder::new(SolverKind::Dantzig, n, lambda0);
    let mut s = vec![0.0; n];
    if lambda0 == 0.0 {
        return Ok(builder.finish(0.0, s));
    }
    let tie_tol = 1e-13 * lambda0;
    let stall = |lambda: f64, reason: &str| Error::SolverStall { lambda, reason: reason.into() };

    // Entry: constraint `first_row` is active; u = theta * zeta e_row grows until
    // |G[:, row]| * theta reaches one at the first primal coordinate.
    let zeta0 = sign(corr[first_row]);
    let (first_col, gmax) = argmax_abs(gram.column(first_row).as_slice());
    if gmax == 0.0 {
        return Err(stall(lambda0, "dominant constraint has an empty Gram column"));
    }
    let mut active = ActiveInverse::new(gram);
    active.push(first_row, first_col).map_err(|_| stall(lambda0, "singular entry pivot"))?;
    let mut zeta: Vec<f64> = vec![zeta0];
    let mut sigma: Vec<f64> = vec![sign(zeta0 * gram[(first_row, first_col)])];
    let mut in_primal = vec![false; n];
    let mut in_dual = vec![false; n];
    in_primal[first_col] = true;
    in_dual[first_row] = true;
    let mut u = vec![0.0; n];
    u[first_row] = zeta0 / gmax;

    let mut lambda = lambda0;
    let mut skip_row: Option<usize> = None;
    let mut zero_steps = 0usize;
    let max_events = 50 * n + 100;

    loop {
        let cols = active.cols().to_vec();
        let rows = active.rows().to_vec();
        let dir = active.solve(&zeta);
        // r = c - G s and its rate w = G[:, P] dir as lambda decreases.
        let mut r = corr.clone();
        let mut w = vec![0.0; n];
        for (q, &j) in cols.iter().enumerate() {
            let col = gram.column(j);
            let (sj, dj) = (s[j], dir[q]);
            for k in 0..n {
                r[k] -= col[k] * sj;
                w[k] += col[k] * dj;
            }
        }

        let mut cands: Vec<Candidate<PrimalEvent>> = vec![Candidate {
            step: lambda,
            index: usize::MAX,
            event: PrimalEvent::End,
        }];
        for (q, &j) in cols.iter().enumerate() {
            if s[j] != 0.0 && dir[q] != 0.0 {
                let step = -s[j] / dir[q];
                if step > 0.0 {
                    cands.push(Candidate { step, index: j, event: PrimalEvent::Drop });
                }
            }
        }
        for i in 0..n {
            if in_dual[i] {
                continue;
            }
            // A just-released constraint sits on the boundary; only a later crossing counts.
            let floor = if skip_row == Some(i) { tie_tol } else { f64::NEG_INFINITY };
            if 1.0 - w[i] > 0.0 {
                let step = (lambda - r[i]).max(0.0) / (1.0 - w[i]);
                if step > floor {
                    cands.push(Candidate { step, index: i, event: PrimalEvent::Constraint });
                }
            }
            if 1.0 + w[i] > 0.0 {
                let step = (lambda + r[i]).max(0.0) / (1.0 + w[i]);
                if step > floor {
                    cands.push(Candidate { step, index: i, event: PrimalEvent::Constraint });
                }
            }
        }
        let (best, tie) = if cands.iter().any(|c| c.event != PrimalEvent::End && c.step < lambda - tie_tol) {
            pick(&cands, tie_tol).expect("non-empty candidate list")
        } else {
            (cands[0], false)
        };
        let step = best.step.min(lambda);

        let at_high = s.clone();
        let high = lambda;
        for (q, &j) in cols.iter().enumerate() {
            s[j] += step * dir[q];
        }
        lambda -= step;
        if best.event == PrimalEvent::End {
            lambda = 0.0;
        }
        builder.push(high, lambda, &cols, &sigma, &at_high);
        let diag = builder.diagnostics();
        diag.events += 1;
        if tie {
            diag.ties += 1;
        }
        if best.event == PrimalEvent::End {
            return Ok(builder.finish(0.0, s));
        }
        zero_steps = if step > 0.0 { 0 } else { zero_steps + 1 };
        if zero_steps > 2 * n + 2 || builder.diagnostics().events > max_events {
            return Err(stall(lambda, "no progress in lambda"));
        }

        // Current dual image g = G u; equals sigma on P.
        let u_rows: Vec<f64> = rows.iter().map(|&l| u[l]).collect();
        let g = gram_times(gram, &rows, &u_rows);
        skip_row = None;

        let (du_rows, extra): (Vec<f64>, Option<(usize, f64)>) = match best.event {
            PrimalEvent::Drop => {
                // Move u so that (G u)_j leaves sigma_j while staying fixed on P \ {j}.
                let j = best.index;
                let q = cols.iter().position(|&c| c == j).expect("active column");
                s[j] = 0.0;
                let mut rhs = vec![0.0; cols.len()];
                rhs[q] = -sigma[q];
                (active.solve_transpose(&rhs), None)
            }
            PrimalEvent::Constraint => {
                // New constraint i joins with u_i growing as theta * zeta_i.
                let i = best.index;
                let zi = sign(r[i] - step * w[i]);
                let rhs: Vec<f64> = cols.iter().map(|&c| -zi * gram[(i, c)]).collect();
                (active.solve_transpose(&rhs), Some((i, zi)))
            }
            PrimalEvent::End => unreachable!(),
        };

        let mut dual_rows = rows.clone();
        let mut du_full_rows = du_rows.clone();
        if let Some((i, zi)) = extra {
            dual_rows.push(i);
            du_full_rows.push(zi);
        }
        let a = gram_times(gram, &dual_rows, &du_full_rows);

        let mut dcands: Vec<Candidate<DualEvent>> = Vec::new();
        for (p, &l) in rows.iter().enumerate() {
            let d = du_rows[p];
            if d != 0.0 && u[l] != 0.0 {
                let theta = -u[l] / d;
                if theta > 0.0 {
                    dcands.push(Candidate { step: theta, index: l, event: DualEvent::Release });
                }
            }
        }
        let dropped = match best.event {
            PrimalEvent::Drop => Some(best.index),
            _ => None,
        };
        for k in 0..n {
            if in_primal[k] && dropped != Some(k) {
                continue;
            }
            if a[k] > 0.0 {
                let theta = (1.0 - g[k]).max(0.0) / a[k];
                if dropped != Some(k) || theta > 0.0 {
                    dcands.push(Candidate { step: theta, index: k, event: DualEvent::Admit });
                }
            } else if a[k] < 0.0 {
                let theta = (-1.0 - g[k]).min(0.0) / a[k];
                if dropped != Some(k) || theta > 0.0 {
                    dcands.push(Candidate { step: theta, index: k, event: DualEvent::Admit });
                }
            }
        }
        let dual_tol = 1e-13;
        let Some((dbest, dtie)) = pick(&dcands, dual_tol) else {
            return Err(stall(lambda, "dual update is unbounded"));
        };
        if dtie {
            builder.diagnostics().ties += 1;
        }
        let theta = dbest.step;

        for (p, &l) in rows.iter().enumerate() {
            u[l] += theta * du_rows[p];
        }
        if let Some((i, zi)) = extra {
            u[i] = theta * zi;
        }

        let outcome = match (best.event, dbest.event) {
            (PrimalEvent::Drop, DualEvent::Release) => {
                let j = best.index;
                let q = active.cols().iter().position(|&c| c == j).expect("active column");
                let l = dbest.index;
                let p = active.rows().iter().position(|&x| x == l).expect("active row");
                let res = active.remove(p, q);
                if res.is_ok() {
                    sigma.remove(q);
                    zeta.remove(p);
                    in_primal[j] = false;
                    in_dual[l] = false;
                    u[l] = 0.0;
                    skip_row = Some(l);
                }
                res
            }
            (PrimalEvent::Drop, DualEvent::Admit) => {
                let j = best.index;
                let q = active.cols().iter().position(|&c| c == j).expect("active column");
                let k = dbest.index;
                let gk = g[k] + theta * a[k];
                let res = active.replace_col(q, k);
                if res.is_ok() {
                    in_primal[j] = false;
                    in_primal[k] = true;
                    sigma[q] = sign(gk);
                }
                res
            }
            (PrimalEvent::Constraint, DualEvent::Release) => {
                let (i, zi) = extra.expect("constraint event");
                let l = dbest.index;
                let p = active.rows().iter().position(|&x| x == l).expect("active row");
                let res = active.replace_row(p, i);
                if res.is_ok() {
                    zeta[p] = zi;
                    in_dual[l] = false;
                    in_dual[i] = true;
                    u[l] = 0.0;
                    skip_row = Some(l);
                }
                res
            }
            (PrimalEvent::Constraint, DualEvent::Admit) => {
                let (i, zi) = extra.expect("constraint event");
                let k = dbest.index;
                let gk = g[k] + theta * a[k];
                let res = active.push(i, k);
                if res.is_ok() {
                    zeta.push(zi);
                    sigma.push(sign(gk));
                    in_dual[i] = true;
                    in_primal[k] = true;
                }
                res
            }
            (PrimalEvent::End, _) => unreachable!(),
        };
        if outcome.is_err() {
            if let Some((i, _)) = extra {
                if !in_dual[i] {
                    u[i] = 0.0;
                }
            }
            builder.diagnostics().rank_limited = true;
            return Ok(builder.finish(lambda, s));
        }

        // Re-derive the dual vector from the new square system.
        let urows = active.solve_transpose(&sigma);
        u.iter_mut().for_each(|x| *x = 0.0);
        for (p, &l) in active.rows().iter().enumerate() {
            u[l] = urows[p];
        }
    }
}

/// `G[:, rows] v`.
fn gram_times(gram: &nalgebra::DMatrix<f64>, rows: &[usize], v: &[f64]) -> Vec<f64> {
    let n = gram.nrows();
    let mut out = vec![0.0; n];
    for (&l, &vl) in rows.iter().zip(v) {
        if vl == 0.0 {
            continue;
        }
        let col = gram.column(l);
        for k in 0..n {
            out[k] += col[k] * vl;
        }
    }
    out
}
