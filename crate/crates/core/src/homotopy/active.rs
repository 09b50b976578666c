//! Inverse of a square submatrix `G[rows, cols]` of a symmetric Gram matrix,
//! maintained under row/column insertions, deletions and replacements.
//!
//! Storage: `inv` is `k x k` row-major with `inv[a * k + b]`, where `a` indexes
//! positions in `cols` and `b` positions in `rows` (so `inv * G[rows, cols] = I`).

use nalgebra::DMatrix;

/// Relative pivot below which an update is treated as making the matrix singular.
pub const SINGULAR_TOL: f64 = 1e-10;

/// Number of rank-one updates between full refactorizations.
const REFRESH_EVERY: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Singular {
    pub pivot: f64,
}

#[derive(Debug, Clone)]
pub struct ActiveInverse<'g> {
    gram: &'g DMatrix<f64>,
    rows: Vec<usize>,
    cols: Vec<usize>,
    inv: Vec<f64>,
    updates: usize,
}

impl<'g> ActiveInverse<'g> {
    pub fn new(gram: &'g DMatrix<f64>) -> Self {
        Self { gram, rows: Vec::new(), cols: Vec::new(), inv: Vec::new(), updates: 0 }
    }

    pub fn rows(&self) -> &[usize] {
        &self.rows
    }

    pub fn cols(&self) -> &[usize] {
        &self.cols
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    #[inline]
    fn at(&self, a: usize, b: usize) -> f64 {
        self.inv[a * self.len() + b]
    }

    fn scale(&self, r: usize, c: usize) -> f64 {
        (self.gram[(r, r)] * self.gram[(c, c)]).sqrt().max(f64::MIN_POSITIVE)
    }

    /// Solves `G[rows, cols] x = b`; `b` is indexed by row position, `x` by column position.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = self.apply(b);
        // One step of iterative refinement against the exact Gram entries.
        let k = self.len();
        let mut res = b.to_vec();
        for (p, &r) in self.rows.iter().enumerate() {
            for (q, &c) in self.cols.iter().enumerate() {
                res[p] -= self.gram[(r, c)] * x[q];
            }
        }
        let corr = self.apply(&res);
        for q in 0..k {
            x[q] += corr[q];
        }
        x
    }

    /// Solves `G[rows, cols]^T u = b`; `b` is indexed by column position, `u` by row position.
    pub fn solve_transpose(&self, b: &[f64]) -> Vec<f64> {
        let mut u = self.apply_transpose(b);
        let k = self.len();
        let mut res = b.to_vec();
        for (q, &c) in self.cols.iter().enumerate() {
            for (p, &r) in self.rows.iter().enumerate() {
                res[q] -= self.gram[(r, c)] * u[p];
            }
        }
        let corr = self.apply_transpose(&res);
        for p in 0..k {
            u[p] += corr[p];
        }
        u
    }

    fn apply(&self, b: &[f64]) -> Vec<f64> {
        let k = self.len();
        (0..k)
            .map(|a| {
                let row = &self.inv[a * k..(a + 1) * k];
                row.iter().zip(b).map(|(x, y)| x * y).sum()
            })
            .collect()
    }

    fn apply_transpose(&self, b: &[f64]) -> Vec<f64> {
        let k = self.len();
        let mut out = vec![0.0; k];
        for (a, &ba) in b.iter().enumerate() {
            if ba == 0.0 {
                continue;
            }
            let row = &self.inv[a * k..(a + 1) * k];
            for (o, x) in out.iter_mut().zip(row) {
                *o += x * ba;
            }
        }
        out
    }

    /// Borders the matrix with row `r` and column `c`.
    pub fn push(&mut self, r: usize, c: usize) -> Result<(), Singular> {
        let k = self.len();
        let col: Vec<f64> = self.rows.iter().map(|&ri| self.gram[(ri, c)]).collect();
        let row: Vec<f64> = self.cols.iter().map(|&ci| self.gram[(r, ci)]).collect();
        let bc = self.apply(&col);
        let rb = self.apply_transpose(&row);
        let schur = self.gram[(r, c)] - row.iter().zip(&bc).map(|(x, y)| x * y).sum::<f64>();
        if schur.abs() <= SINGULAR_TOL * self.scale(r, c) {
            return Err(Singular { pivot: schur });
        }
        let k1 = k + 1;
        let mut inv = vec![0.0; k1 * k1];
        for a in 0..k {
            for b in 0..k {
                inv[a * k1 + b] = self.at(a, b) + bc[a] * rb[b] / schur;
            }
            inv[a * k1 + k] = -bc[a] / schur;
        }
        for b in 0..k {
            inv[k * k1 + b] = -rb[b] / schur;
        }
        inv[k * k1 + k] = 1.0 / schur;
        self.inv = inv;
        self.rows.push(r);
        self.cols.push(c);
        self.after_update();
        Ok(())
    }

    /// Deletes the row at position `p` and the column at position `q`.
    pub fn remove(&mut self, p: usize, q: usize) -> Result<(), Singular> {
        let k = self.len();
        let pivot = self.at(q, p);
        if pivot == 0.0 || !pivot.is_finite() {
            return Err(Singular { pivot });
        }
        let k0 = k - 1;
        let mut inv = Vec::with_capacity(k0 * k0);
        for a in (0..k).filter(|&a| a != q) {
            let f = self.at(a, p) / pivot;
            for b in (0..k).filter(|&b| b != p) {
                inv.push(self.at(a, b) - f * self.at(q, b));
            }
        }
        self.inv = inv;
        self.rows.remove(p);
        self.cols.remove(q);
        self.after_update();
        Ok(())
    }

    /// Replaces the column at position `q` by Gram column `c`.
    pub fn replace_col(&mut self, q: usize, c: usize) -> Result<(), Singular> {
        let k = self.len();
        let m: Vec<f64> = self.rows.iter().map(|&r| self.gram[(r, c)]).collect();
        let z = self.apply(&m);
        let old_norm = self.rows.iter().map(|&r| self.gram[(r, self.cols[q])].powi(2)).sum::<f64>().sqrt();
        let new_norm = m.iter().map(|v| v * v).sum::<f64>().sqrt();
        if z[q].abs() * old_norm <= SINGULAR_TOL * new_norm || new_norm == 0.0 {
            return Err(Singular { pivot: z[q] });
        }
        let bq: Vec<f64> = self.inv[q * k..(q + 1) * k].to_vec();
        for a in 0..k {
            let f = if a == q { (z[a] - 1.0) / z[q] } else { z[a] / z[q] };
            for b in 0..k {
                self.inv[a * k + b] -= f * bq[b];
            }
        }
        self.cols[q] = c;
        self.after_update();
        Ok(())
    }

    /// Replaces the row at position `p` by Gram row `r`.
    pub fn replace_row(&mut self, p: usize, r: usize) -> Result<(), Singular> {
        let k = self.len();
        let m: Vec<f64> = self.cols.iter().map(|&c| self.gram[(r, c)]).collect();
        let z = self.apply_transpose(&m);
        let old_norm = self.cols.iter().map(|&c| self.gram[(self.rows[p], c)].powi(2)).sum::<f64>().sqrt();
        let new_norm = m.iter().map(|v| v * v).sum::<f64>().sqrt();
        if z[p].abs() * old_norm <= SINGULAR_TOL * new_norm || new_norm == 0.0 {
            return Err(Singular { pivot: z[p] });
        }
        let bp: Vec<f64> = (0..k).map(|a| self.at(a, p)).collect();
        for a in 0..k {
            for b in 0..k {
                let f = if b == p { (z[b] - 1.0) / z[p] } else { z[b] / z[p] };
                self.inv[a * k + b] -= bp[a] * f;
            }
        }
        self.rows[p] = r;
        self.after_update();
        Ok(())
    }

    fn after_update(&mut self) {
        self.updates += 1;
        if self.updates % REFRESH_EVERY == 0 {
            self.refactor();
        }
    }

    /// Recomputes the inverse from scratch; keeps the old one if LU fails.
    pub fn refactor(&mut self) {
        let k = self.len();
        if k == 0 {
            return;
        }
        let m = DMatrix::from_fn(k, k, |p, q| self.gram[(self.rows[p], self.cols[q])]);
        if let Some(inv) = m.lu().try_inverse() {
            if inv.iter().all(|v| v.is_finite()) {
                for a in 0..k {
                    for b in 0..k {
                        self.inv[a * k + b] = inv[(a, b)];
                    }
                }
            }
        }
    }
}
