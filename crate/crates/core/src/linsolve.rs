//! Sparse linear algebra for the global systems.
//!
//! Factorizations are delegated to `faer` (supernodal Cholesky for the SPD
//! stiffness systems, sparse LU for large patch saddle-point systems). A
//! Jacobi-preconditioned conjugate gradient is available as an alternative
//! for the SPD case.

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, SparseColMatRef, SymbolicSparseColMatRef, Triplet};
use faer::{Mat, Side};

use crate::error::{Error, Result};

/// Compressed sparse row matrix with summed duplicates.
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn from_triplets(n_rows: usize, n_cols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut counts = vec![0usize; n_rows + 1];
        for &(i, _, _) in triplets {
            counts[i + 1] += 1;
        }
        for i in 0..n_rows {
            counts[i + 1] += counts[i];
        }
        let mut cols = vec![0usize; triplets.len()];
        let mut vals = vec![0.0; triplets.len()];
        let mut next = counts.clone();
        for &(i, j, v) in triplets {
            cols[next[i]] = j;
            vals[next[i]] = v;
            next[i] += 1;
        }
        let mut row_ptr = Vec::with_capacity(n_rows + 1);
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        row_ptr.push(0);
        let mut order: Vec<usize> = Vec::new();
        for i in 0..n_rows {
            let (s, e) = (counts[i], counts[i + 1]);
            order.clear();
            order.extend(s..e);
            order.sort_by_key(|&k| cols[k]);
            let mut last: Option<usize> = None;
            for &k in &order {
                if last == Some(cols[k]) {
                    *values.last_mut().expect("entry exists") += vals[k];
                } else {
                    col_idx.push(cols[k]);
                    values.push(vals[k]);
                    last = Some(cols[k]);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self {
            n_rows,
            n_cols,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Wraps CSR arrays whose rows have sorted, unique column indices.
    pub fn from_raw(
        n_rows: usize,
        n_cols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        let ok = row_ptr.len() == n_rows + 1
            && row_ptr[0] == 0
            && row_ptr.windows(2).all(|w| w[0] <= w[1])
            && row_ptr[n_rows] == col_idx.len()
            && col_idx.len() == values.len()
            && (0..n_rows).all(|i| {
                let row = &col_idx[row_ptr[i]..row_ptr[i + 1]];
                row.windows(2).all(|w| w[0] < w[1]) && row.iter().all(|&j| j < n_cols)
            });
        if !ok {
            return Err(Error::SingularSystem("malformed CSR arrays".into()));
        }
        Ok(Self {
            n_rows,
            n_cols,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.col_idx[s..e]
            .iter()
            .copied()
            .zip(self.values[s..e].iter().copied())
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n_rows)
            .map(|i| self.row(i).map(|(j, v)| v * x[j]).sum())
            .collect()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n_rows)
            .map(|i| self.row(i).find(|&(j, _)| j == i).map_or(0.0, |(_, v)| v))
            .collect()
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        let scale = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for i in 0..self.n_rows {
            for (j, v) in self.row(i) {
                let vt = self.row(j).find(|&(c, _)| c == i).map_or(0.0, |(_, v)| v);
                if (v - vt).abs() > tol * scale {
                    return false;
                }
            }
        }
        true
    }

    fn to_faer(&self) -> Result<SparseColMat<usize, f64>> {
        let triplets: Vec<_> = (0..self.n_rows)
            .flat_map(|i| self.row(i).map(move |(j, v)| Triplet::new(i, j, v)))
            .collect();
        SparseColMat::try_new_from_triplets(self.n_rows, self.n_cols, &triplets)
            .map_err(|e| Error::SingularSystem(format!("cannot build sparse matrix: {e:?}")))
    }
}

/// Solver used for the symmetric positive definite stiffness systems.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum LinearSolver {
    /// Sparse Cholesky factorization.
    #[default]
    Cholesky,
    /// Jacobi-preconditioned conjugate gradient.
    Pcg { rel_tol: f64, max_iter: usize },
    /// Cholesky up to `max_direct` unknowns, PCG above.
    Auto { max_direct: usize },
}

pub fn solve_spd(a: &CsrMatrix, b: &[f64], solver: LinearSolver) -> Result<Vec<f64>> {
    if a.n_rows == 0 {
        return Ok(Vec::new());
    }
    match solver {
        LinearSolver::Cholesky => cholesky_solve(a, b),
        LinearSolver::Pcg { rel_tol, max_iter } => pcg(a, b, rel_tol, max_iter),
        LinearSolver::Auto { max_direct } => {
            if a.n_rows <= max_direct {
                cholesky_solve(a, b)
            } else {
                pcg(a, b, 1e-12, 50 * a.n_rows)
            }
        }
    }
}

fn cholesky_solve(a: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>> {
    // For a symmetric matrix the CSR arrays are also its CSC arrays.
    let symbolic = SymbolicSparseColMatRef::new_checked(a.n_rows, a.n_cols, &a.row_ptr, None, &a.col_idx);
    let mat = SparseColMatRef::new(symbolic, &a.values);
    let llt = mat
        .sp_cholesky(Side::Lower)
        .map_err(|e| Error::SingularSystem(format!("Cholesky failed: {e:?}")))?;
    let mut rhs = Mat::<f64>::from_fn(b.len(), 1, |i, _| b[i]);
    llt.solve_in_place(rhs.as_mut());
    Ok((0..b.len()).map(|i| rhs[(i, 0)]).collect())
}

/// Sparse LU with partial pivoting for general (indefinite) systems.
pub fn solve_general(a: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>> {
    if a.n_rows == 0 {
        return Ok(Vec::new());
    }
    let mat = a.to_faer()?;
    let lu = mat
        .sp_lu()
        .map_err(|e| Error::SingularSystem(format!("sparse LU failed: {e:?}")))?;
    let mut rhs = Mat::<f64>::from_fn(b.len(), 1, |i, _| b[i]);
    lu.solve_in_place(rhs.as_mut());
    let x: Vec<f64> = (0..b.len()).map(|i| rhs[(i, 0)]).collect();
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularSystem("sparse LU produced non-finite values".into()));
    }
    Ok(x)
}

fn pcg(a: &CsrMatrix, b: &[f64], rel_tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    let n = b.len();
    let inv_diag: Vec<f64> = a
        .diagonal()
        .into_iter()
        .map(|d| if d > 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>();
    let b_norm = dot(b, b).sqrt();
    if b_norm == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    for it in 0..max_iter {
        let ap = a.mul_vec(&p);
        let alpha = rz / dot(&p, &ap);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let res = dot(&r, &r).sqrt() / b_norm;
        if res <= rel_tol {
            log::debug!("PCG converged in {} iterations", it + 1);
            return Ok(x);
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    let res = dot(&r, &r).sqrt() / b_norm;
    Err(Error::NotConverged {
        iterations: max_iter,
        residual: res,
    })
}
