//! Sparse symmetric linear algebra: CSR storage with a fixed sparsity
//! pattern, a Jacobi-preconditioned conjugate gradient solver, and a dense
//! Gaussian elimination fallback used as a cross-check on small systems.

use crate::{Error, Result};

/// Compressed sparse row matrix with an immutable pattern.  Entries are
/// addressed by binary search within a row, so assembly can scatter element
/// contributions without building an intermediate triplet list.
#[derive(Clone)]
pub struct CsrMatrix {
    row_ptr: Vec<usize>,
    col_idx: Vec<u32>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Creates a zero matrix over the given pattern.  Column indices must be
    /// sorted and unique within each row.
    pub fn from_pattern(row_ptr: Vec<usize>, col_idx: Vec<u32>) -> CsrMatrix {
        assert!(!row_ptr.is_empty(), "row_ptr must have n + 1 entries");
        assert_eq!(*row_ptr.last().unwrap(), col_idx.len());
        debug_assert!(row_ptr
            .windows(2)
            .all(|w| col_idx[w[0]..w[1]].windows(2).all(|c| c[0] < c[1])));
        let nnz = col_idx.len();
        CsrMatrix {
            row_ptr,
            col_idx,
            values: vec![0.0; nnz],
        }
    }

    pub fn n(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        self.col_idx[lo..hi]
            .binary_search(&(j as u32))
            .ok()
            .map(|k| lo + k)
    }

    /// Adds `v` to entry `(i, j)`.  The entry must exist in the pattern.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self
            .slot(i, j)
            .unwrap_or_else(|| panic!("entry ({i}, {j}) is not in the sparsity pattern"));
        self.values[k] += v;
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self
            .slot(i, j)
            .unwrap_or_else(|| panic!("entry ({i}, {j}) is not in the sparsity pattern"));
        self.values[k] = v;
    }

    /// Entry `(i, j)`, zero if outside the pattern.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |k| self.values[k])
    }

    pub fn row(&self, i: usize) -> (&[u32], &[f64]) {
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        (&self.col_idx[lo..hi], &self.values[lo..hi])
    }

    pub fn row_mut(&mut self, i: usize) -> (&[u32], &mut [f64]) {
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        (&self.col_idx[lo..hi], &mut self.values[lo..hi])
    }

    /// `y = A x`.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n());
        assert_eq!(y.len(), self.n());
        for i in 0..self.n() {
            let (cols, vals) = (
                &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]],
                &self.values[self.row_ptr[i]..self.row_ptr[i + 1]],
            );
            let mut acc = 0.0;
            for (c, v) in cols.iter().zip(vals) {
                acc += v * x[*c as usize];
            }
            y[i] = acc;
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n()).map(|i| self.get(i, i)).collect()
    }

    /// Dense copy, for cross-checks on small systems.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.n()]; self.n()];
        for i in 0..self.n() {
            let (cols, vals) = self.row(i);
            for (c, v) in cols.iter().zip(vals) {
                out[i][*c as usize] = *v;
            }
        }
        out
    }
}

/// Convergence report for an iterative solve.  `residual` is the true
/// residual norm `|b - A x|` recomputed after the last iteration, not the
/// recurrence value.
#[derive(Clone, Debug)]
pub struct SolveStats {
    pub iterations: usize,
    pub residual: f64,
    pub relative_residual: f64,
    pub residual_history: Vec<f64>,
}

#[derive(Clone, Copy, Debug)]
pub struct CgOptions {
    pub rel_tol: f64,
    /// Defaults to `20 sqrt(n) + 200` when `None`.
    pub max_iter: Option<usize>,
}

impl Default for CgOptions {
    fn default() -> CgOptions {
        CgOptions {
            rel_tol: 1e-10,
            max_iter: None,
        }
    }
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Jacobi-preconditioned conjugate gradients from a zero initial guess.
pub fn cg_solve(a: &CsrMatrix, b: &[f64], opts: &CgOptions) -> Result<(Vec<f64>, SolveStats)> {
    cg_solve_observed(a, b, opts, |_, _, _| {})
}

/// Same as [`cg_solve`], invoking `observer(iteration, iterate, residual)`
/// after every update.
pub fn cg_solve_observed(
    a: &CsrMatrix,
    b: &[f64],
    opts: &CgOptions,
    mut observer: impl FnMut(usize, &[f64], f64),
) -> Result<(Vec<f64>, SolveStats)> {
    let n = a.n();
    if b.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: b.len(),
        });
    }
    let max_iter = opts
        .max_iter
        .unwrap_or_else(|| 20 * (n as f64).sqrt().ceil() as usize + 200);

    let diag = a.diagonal();
    if let Some((i, &d)) = diag.iter().enumerate().find(|(_, &d)| !(d > 0.0)) {
        return Err(Error::invalid(format!(
            "Jacobi preconditioner needs a positive diagonal, but a[{i}][{i}] = {d}"
        )));
    }
    let inv_diag: Vec<f64> = diag.iter().map(|d| 1.0 / d).collect();

    let norm_b = norm2(b);
    let mut x = vec![0.0; n];
    if norm_b == 0.0 {
        return Ok((
            x,
            SolveStats {
                iterations: 0,
                residual: 0.0,
                relative_residual: 0.0,
                residual_history: Vec::new(),
            },
        ));
    }

    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz: f64 = r.iter().zip(&z).map(|(r, z)| r * z).sum();
    let mut history = Vec::new();

    let mut iterations = 0;
    let tol = opts.rel_tol * norm_b;
    let mut converged = norm2(&r) <= tol;
    while !converged && iterations < max_iter {
        a.matvec(&p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(p, q)| p * q).sum();
        if !(pap > 0.0) {
            return Err(Error::Breakdown {
                iteration: iterations,
                curvature: pap,
            });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        iterations += 1;
        let res = norm2(&r);
        history.push(res);
        observer(iterations, &x, res);
        if res <= tol {
            converged = true;
        } else {
            for i in 0..n {
                z[i] = r[i] * inv_diag[i];
            }
            let rz_new: f64 = r.iter().zip(&z).map(|(r, z)| r * z).sum();
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
    }

    // Recompute the true residual; the recurrence can drift.
    a.matvec(&x, &mut ap);
    let true_res = norm2(
        &b.iter()
            .zip(&ap)
            .map(|(b, ax)| b - ax)
            .collect::<Vec<f64>>(),
    );
    let stats = SolveStats {
        iterations,
        residual: true_res,
        relative_residual: true_res / norm_b,
        residual_history: history,
    };
    if !converged {
        return Err(Error::NotConverged {
            iterations,
            residual: stats.relative_residual,
        });
    }
    Ok((x, stats))
}

/// Dense Gaussian elimination with partial pivoting.  Quadratic memory;
/// meant for oracle checks and tiny systems only.
pub fn dense_solve(a: &[Vec<f64>], b: &[f64]) -> Result<Vec<f64>> {
    let n = b.len();
    if a.len() != n || a.iter().any(|row| row.len() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: a.len(),
        });
    }
    let mut m: Vec<Vec<f64>> = a.to_vec();
    let mut rhs = b.to_vec();
    let scale = m
        .iter()
        .flat_map(|r| r.iter())
        .fold(0.0f64, |acc, v| acc.max(v.abs()))
        .max(1.0);

    let mut perm: Vec<usize> = (0..n).collect();
    for k in 0..n {
        let (piv, &pval) = m[k..]
            .iter()
            .map(|row| &row[k])
            .enumerate()
            .max_by(|x, y| x.1.abs().partial_cmp(&y.1.abs()).expect("finite matrix"))
            .expect("non-empty column");
        let piv = piv + k;
        if pval.abs() < 1e-14 * scale {
            return Err(Error::SingularMatrix {
                pivot: k,
                value: pval,
            });
        }
        if piv != k {
            m.swap(piv, k);
            rhs.swap(piv, k);
            perm.swap(piv, k);
        }
        let pivot = m[k][k];
        for i in k + 1..n {
            let f = m[i][k] / pivot;
            if f == 0.0 {
                continue;
            }
            for j in k..n {
                let mkj = m[k][j];
                m[i][j] -= f * mkj;
            }
            rhs[i] -= f * rhs[k];
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let mut acc = rhs[k];
        for j in k + 1..n {
            acc -= m[k][j] * x[j];
        }
        x[k] = acc / m[k][k];
    }
    Ok(x)
}
