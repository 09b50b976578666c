//! Fixed-lambda reference solvers, independent of the homotopy code.
//!
//! `lasso_oracle` runs cyclic coordinate descent on the exact LASSO objective
//! until the duality gap is below tolerance; `dantzig_oracle` solves the LP
//! form of the Dantzig selector with a dense two-phase simplex.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Duality-gap target of the coordinate-descent oracle, relative to `max(1, ||y||^2)`.
pub const LASSO_GAP_TOL: f64 = 1e-10;

const MAX_SWEEPS: usize = 2_000_000;

/// Minimizes `lambda * ||s||_1 + ||y - H s||^2` by coordinate descent.
pub fn lasso_oracle(h: &DMatrix<f64>, y: &[f64], lambda: f64) -> Result<Vec<f64>> {
    let (m, n) = h.shape();
    if y.len() != m {
        return Err(Error::DimensionMismatch { expected: m, got: y.len() });
    }
    if !(lambda >= 0.0) {
        return Err(Error::InvalidParameter(format!("lambda must be >= 0, got {lambda}")));
    }
    let norms: Vec<f64> = (0..n).map(|j| h.column(j).norm_squared()).collect();
    let yy: f64 = y.iter().map(|v| v * v).sum();
    let tol = LASSO_GAP_TOL * yy.max(1.0);
    let half = lambda / 2.0;

    let mut s = vec![0.0; n];
    let mut resid = y.to_vec();
    for sweep in 0..MAX_SWEEPS {
        for j in 0..n {
            if norms[j] == 0.0 {
                continue;
            }
            let col = h.column(j);
            let rho: f64 = col.iter().zip(&resid).map(|(a, b)| a * b).sum::<f64>() + norms[j] * s[j];
            let next = soft(rho, half) / norms[j];
            let delta = next - s[j];
            if delta != 0.0 {
                for (r, a) in resid.iter_mut().zip(col.iter()) {
                    *r -= a * delta;
                }
                s[j] = next;
            }
        }
        if sweep % 10 == 0 {
            if lasso_gap(h, y, &s, lambda) <= tol {
                return Ok(s);
            }
            // Stationary point on the current sign pattern: returned if it
            // certifies, otherwise a restart point when it lowers the objective.
            let polished = if sweep % 500 == 0 { active_set(h, y, &s, lambda) } else { polish(h, y, &s, lambda) };
            if let Some(polished) = polished {
                if lasso_gap(h, y, &polished, lambda) <= tol {
                    return Ok(polished);
                }
                if objective(h, y, &polished, lambda) < objective(h, y, &s, lambda) {
                    let fit = h * nalgebra::DVector::from_column_slice(&polished);
                    resid = y.iter().zip(fit.iter()).map(|(a, b)| a - b).collect();
                    s = polished;
                }
            }
        }
    }
    Err(Error::OracleFailure(format!(
        "coordinate descent did not reach gap {tol:e} in {MAX_SWEEPS} sweeps"
    )))
}

/// Primal minus dual objective at `s`, using the rescaled residual as dual point.
pub fn lasso_gap(h: &DMatrix<f64>, y: &[f64], s: &[f64], lambda: f64) -> f64 {
    let fit = h * nalgebra::DVector::from_column_slice(s);
    let resid: Vec<f64> = y.iter().zip(fit.iter()).map(|(a, b)| a - b).collect();
    let rr: f64 = resid.iter().map(|v| v * v).sum();
    let primal = rr + lambda * s.iter().map(|v| v.abs()).sum::<f64>();
    let corr = h.tr_mul(&nalgebra::DVector::from_column_slice(&resid));
    let cmax = corr.amax();
    let scale = if cmax > 0.0 { (lambda / (2.0 * cmax)).min(1.0) } else { 1.0 };
    // Dual of the objective: max 2 theta.y - ||theta||^2 s.t. ||H^T theta||_inf <= lambda / 2.
    let dual: f64 = resid.iter().zip(y).map(|(r, yv)| 2.0 * scale * r * yv - (scale * r).powi(2)).sum();
    primal - dual
}

/// Solves `H_P^T H_P s_P = H_P^T y - lambda / 2 * sign_P` on the support of
/// `s`; `None` if the system is singular or a sign flips.
fn polish(h: &DMatrix<f64>, y: &[f64], s: &[f64], lambda: f64) -> Option<Vec<f64>> {
    let support: Vec<usize> = (0..s.len()).filter(|&j| s[j] != 0.0).collect();
    let mut out = vec![0.0; s.len()];
    if support.is_empty() {
        return Some(out);
    }
    let hp = h.select_columns(&support);
    let hty = hp.tr_mul(&nalgebra::DVector::from_column_slice(y));
    let rhs = nalgebra::DVector::from_iterator(
        support.len(),
        support.iter().enumerate().map(|(q, &j)| hty[q] - lambda / 2.0 * s[j].signum()),
    );
    let sol = hp.tr_mul(&hp).lu().solve(&rhs)?;
    for (q, &j) in support.iter().enumerate() {
        if sol[q] * s[j] <= 0.0 {
            return None;
        }
        out[j] = sol[q];
    }
    Some(out)
}

/// Active-set refinement from the sign pattern of `s`: re-solves on the
/// support, drops sign flips and adds the worst KKT violator until none is left.
fn active_set(h: &DMatrix<f64>, y: &[f64], s: &[f64], lambda: f64) -> Option<Vec<f64>> {
    let n = s.len();
    let mut cur = s.to_vec();
    for _ in 0..2 * n + 2 {
        let next = match polish(h, y, &cur, lambda) {
            Some(v) => v,
            None => {
                let dropped = drop_flips(h, y, &cur, lambda)?;
                cur = dropped;
                continue;
            }
        };
        let fit = h * nalgebra::DVector::from_column_slice(&next);
        let resid = nalgebra::DVector::from_iterator(y.len(), y.iter().zip(fit.iter()).map(|(a, b)| a - b));
        let corr = h.tr_mul(&resid);
        let worst = (0..n)
            .filter(|&j| next[j] == 0.0 && 2.0 * corr[j].abs() > lambda)
            .max_by(|&a, &b| corr[a].abs().total_cmp(&corr[b].abs()));
        match worst {
            Some(j) => {
                cur = next;
                cur[j] = f64::MIN_POSITIVE * corr[j].signum();
            }
            None => return Some(next),
        }
    }
    None
}

/// `s` with the coordinates whose sign flips in the support re-solve zeroed.
fn drop_flips(h: &DMatrix<f64>, y: &[f64], s: &[f64], lambda: f64) -> Option<Vec<f64>> {
    let support: Vec<usize> = (0..s.len()).filter(|&j| s[j] != 0.0).collect();
    let hp = h.select_columns(&support);
    let hty = hp.tr_mul(&nalgebra::DVector::from_column_slice(y));
    let rhs = nalgebra::DVector::from_iterator(
        support.len(),
        support.iter().enumerate().map(|(q, &j)| hty[q] - lambda / 2.0 * s[j].signum()),
    );
    let sol = hp.tr_mul(&hp).lu().solve(&rhs)?;
    let mut out = s.to_vec();
    for (q, &j) in support.iter().enumerate() {
        if sol[q] * s[j] <= 0.0 {
            out[j] = 0.0;
        }
    }
    Some(out)
}

fn objective(h: &DMatrix<f64>, y: &[f64], s: &[f64], lambda: f64) -> f64 {
    let fit = h * nalgebra::DVector::from_column_slice(s);
    let rr: f64 = y.iter().zip(fit.iter()).map(|(a, b)| (a - b).powi(2)).sum();
    rr + lambda * s.iter().map(|v| v.abs()).sum::<f64>()
}

fn soft(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

/// Feasibility and optimality tolerance of the simplex oracle.
pub const LP_TOL: f64 = 1e-9;

/// Solves `min ||s||_1 s.t. ||H^T (y - H s)||_inf <= lambda` as a linear program
/// in `(s+, s-) >= 0`.
pub fn dantzig_oracle(h: &DMatrix<f64>, y: &[f64], lambda: f64) -> Result<Vec<f64>> {
    let (m, n) = h.shape();
    if y.len() != m {
        return Err(Error::DimensionMismatch { expected: m, got: y.len() });
    }
    if !(lambda >= 0.0) {
        return Err(Error::InvalidParameter(format!("lambda must be >= 0, got {lambda}")));
    }
    let gram = h.tr_mul(h);
    let corr = h.tr_mul(&nalgebra::DVector::from_column_slice(y));
    // G (s+ - s-) <= c + lambda  and  -G (s+ - s-) <= lambda - c.
    let mut a = DMatrix::zeros(2 * n, 2 * n);
    let mut b = vec![0.0; 2 * n];
    for i in 0..n {
        for j in 0..n {
            a[(i, j)] = gram[(i, j)];
            a[(i, n + j)] = -gram[(i, j)];
            a[(n + i, j)] = -gram[(i, j)];
            a[(n + i, n + j)] = gram[(i, j)];
        }
        b[i] = corr[i] + lambda;
        b[n + i] = lambda - corr[i];
    }
    let cost = vec![1.0; 2 * n];
    let x = simplex_min(&a, &b, &cost)?;
    Ok((0..n).map(|j| x[j] - x[n + j]).collect())
}

/// Dense two-phase simplex with Bland's rule: `min c.x s.t. A x <= b, x >= 0`.
pub fn simplex_min(a: &DMatrix<f64>, b: &[f64], cost: &[f64]) -> Result<Vec<f64>> {
    let (m, n) = a.shape();
    // Columns: n structural, m slacks, one artificial per row with b < 0, rhs.
    let neg: Vec<usize> = (0..m).filter(|&i| b[i] < 0.0).collect();
    let n_art = neg.len();
    let width = n + m + n_art + 1;
    let rhs = width - 1;
    let mut t = DMatrix::zeros(m, width);
    let mut basis = vec![0usize; m];
    let mut art = 0;
    for i in 0..m {
        let flip = if b[i] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            t[(i, j)] = flip * a[(i, j)];
        }
        t[(i, n + i)] = flip;
        t[(i, rhs)] = flip * b[i];
        if b[i] < 0.0 {
            t[(i, n + m + art)] = 1.0;
            basis[i] = n + m + art;
            art += 1;
        } else {
            basis[i] = n + i;
        }
    }

    if n_art > 0 {
        let mut phase1 = vec![0.0; width - 1];
        for k in 0..n_art {
            phase1[n + m + k] = 1.0;
        }
        run_simplex(&mut t, &mut basis, &phase1, width - 1)?;
        let infeas: f64 = (0..m).filter(|&i| basis[i] >= n + m).map(|i| t[(i, rhs)]).sum();
        if infeas > LP_TOL {
            return Err(Error::OracleFailure(format!("LP infeasible (phase-one residual {infeas:e})")));
        }
        // Pivot remaining zero-level artificials out of the basis where possible.
        for i in 0..m {
            if basis[i] >= n + m {
                if let Some(j) = (0..n + m).find(|&j| t[(i, j)].abs() > LP_TOL) {
                    pivot(&mut t, &mut basis, i, j);
                }
            }
        }
    }
    let mut phase2 = vec![0.0; width - 1];
    phase2[..n].copy_from_slice(cost);
    // Artificials are barred from re-entering.
    run_simplex(&mut t, &mut basis, &phase2, n + m)?;

    let mut x = vec![0.0; n];
    for i in 0..m {
        if basis[i] < n {
            x[basis[i]] = t[(i, rhs)];
        }
    }
    Ok(x)
}

fn run_simplex(t: &mut DMatrix<f64>, basis: &mut [usize], cost: &[f64], allowed: usize) -> Result<()> {
    let (m, width) = t.shape();
    let rhs = width - 1;
    let max_iter = 50_000;
    for _ in 0..max_iter {
        // Reduced costs c_j - c_B B^-1 A_j; enter the first negative one (Bland).
        let entering = (0..allowed).find(|&j| {
            if basis.contains(&j) {
                return false;
            }
            let rc = cost[j] - (0..m).map(|i| cost[basis[i]] * t[(i, j)]).sum::<f64>();
            rc < -LP_TOL
        });
        let Some(j) = entering else {
            return Ok(());
        };
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..m {
            let aij = t[(i, j)];
            if aij > LP_TOL {
                let ratio = t[(i, rhs)] / aij;
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((bi, br)) => {
                        if ratio < br - 1e-12 || (ratio <= br + 1e-12 && basis[i] < basis[bi]) {
                            Some((i, ratio))
                        } else {
                            Some((bi, br))
                        }
                    }
                };
            }
        }
        let Some((i, _)) = leave else {
            return Err(Error::OracleFailure("LP unbounded".into()));
        };
        pivot(t, basis, i, j);
    }
    Err(Error::OracleFailure("simplex iteration cap reached".into()))
}

fn pivot(t: &mut DMatrix<f64>, basis: &mut [usize], row: usize, col: usize) {
    let (m, width) = t.shape();
    let p = t[(row, col)];
    for j in 0..width {
        t[(row, j)] /= p;
    }
    for i in 0..m {
        if i != row {
            let f = t[(i, col)];
            if f != 0.0 {
                for j in 0..width {
                    let v = t[(row, j)];
                    t[(i, j)] -= f * v;
                }
            }
        }
    }
    basis[row] = col;
}
