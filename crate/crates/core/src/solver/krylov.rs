//! BiCGSTAB with an incomplete LU(0) preconditioner.

use crate::error::{Error, Result};
use crate::sparse::{SparseMatrix, dot, norm};

/// ILU(0): L and U share the sparsity pattern of A.
#[derive(Debug, Clone)]
pub struct Ilu0 {
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
    diag: Vec<usize>,
}

impl Ilu0 {
    pub fn new(a: &SparseMatrix) -> Result<Ilu0> {
        let n = a.nrows();
        let (rp, ci, v) = a.raw();
        let (row_ptr, col_idx, mut values) = (rp.to_vec(), ci.to_vec(), v.to_vec());
        let mut diag = vec![usize::MAX; n];
        for i in 0..n {
            for k in row_ptr[i]..row_ptr[i + 1] {
                if col_idx[k] == i {
                    diag[i] = k;
                }
            }
            if diag[i] == usize::MAX {
                return Err(Error::Solve(format!("ILU(0): missing diagonal in row {i}")));
            }
        }
        let mut pos = vec![usize::MAX; n];
        for i in 0..n {
            for k in row_ptr[i]..row_ptr[i + 1] {
                pos[col_idx[k]] = k;
            }
            for k in row_ptr[i]..diag[i] {
                let col = col_idx[k];
                let pivot = values[diag[col]];
                if pivot == 0.0 {
                    return Err(Error::Solve(format!("ILU(0): zero pivot in row {col}")));
                }
                values[k] /= pivot;
                let lik = values[k];
                for kk in diag[col] + 1..row_ptr[col + 1] {
                    let p = pos[col_idx[kk]];
                    if p != usize::MAX {
                        values[p] -= lik * values[kk];
                    }
                }
            }
            for k in row_ptr[i]..row_ptr[i + 1] {
                pos[col_idx[k]] = usize::MAX;
            }
            if values[diag[i]] == 0.0 {
                return Err(Error::Solve(format!("ILU(0): zero pivot in row {i}")));
            }
        }
        Ok(Ilu0 { row_ptr, col_idx, values, diag })
    }

    /// Solve `L U x = b` in place.
    pub fn apply(&self, x: &mut [f64]) {
        let n = x.len();
        for i in 0..n {
            let mut s = x[i];
            for k in self.row_ptr[i]..self.diag[i] {
                s -= self.values[k] * x[self.col_idx[k]];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in self.diag[i] + 1..self.row_ptr[i + 1] {
                s -= self.values[k] * x[self.col_idx[k]];
            }
            x[i] = s / self.values[self.diag[i]];
        }
    }
}

/// Right-preconditioned BiCGSTAB; converged when ‖b − Ax‖ ≤ tol·‖b‖.
pub fn bicgstab(a: &SparseMatrix, b: &[f64], precond: &Ilu0, tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    let n = b.len();
    let bnorm = norm(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok(x);
    }
    let mut r = b.to_vec();
    let r0 = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut ph = vec![0.0; n];
    let mut sh = vec![0.0; n];
    let mut t = vec![0.0; n];
    let mut s = vec![0.0; n];
    for _ in 0..max_iter {
        let rho_new = dot(&r0, &r);
        if rho_new == 0.0 {
            break;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        ph.copy_from_slice(&p);
        precond.apply(&mut ph);
        a.matvec_into(&ph, &mut v);
        alpha = rho / dot(&r0, &v);
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        if norm(&s) <= tol * bnorm {
            for i in 0..n {
                x[i] += alpha * ph[i];
            }
            return Ok(x);
        }
        sh.copy_from_slice(&s);
        precond.apply(&mut sh);
        a.matvec_into(&sh, &mut t);
        omega = dot(&t, &s) / dot(&t, &t);
        for i in 0..n {
            x[i] += alpha * ph[i] + omega * sh[i];
            r[i] = s[i] - omega * t[i];
        }
        if norm(&r) <= tol * bnorm {
            return Ok(x);
        }
        if omega == 0.0 || !omega.is_finite() {
            break;
        }
    }
    let res: Vec<f64> = a.matvec(&x).iter().zip(b).map(|(ax, bi)| bi - ax).collect();
    Err(Error::NotConverged { iterations: max_iter, residual: norm(&res) / bnorm })
}
