//! Compressed sparse row matrices and a Jacobi-preconditioned conjugate
//! gradient solver. Assembly merges element contributions in a fixed order,
//! and the matrix-vector product is row-parallel with per-row sequential
//! sums, so results are bit-identical at any thread count.

use rayon::prelude::*;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<u32>,
    pub vals: Vec<f64>,
}

impl CsrMatrix {
    /// Build from unordered triplets, summing duplicates. Triplets are sorted
    /// by (row, col) with a stable sort, so the result does not depend on the
    /// assembly traversal order beyond floating-point addition order, which
    /// is fixed by the (row, col, insertion) ordering.
    pub fn from_triplets(n: usize, mut triplets: Vec<(u32, u32, f64)>) -> Self {
        triplets.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; n + 1];
        let mut cols: Vec<u32> = Vec::new();
        let mut vals: Vec<f64> = Vec::new();
        let mut last: Option<(u32, u32)> = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(c);
                vals.push(v);
                last = Some((r, c));
            }
            row_ptr[r as usize + 1] = cols.len();
        }
        for i in 1..=n {
            row_ptr[i] = row_ptr[i].max(row_ptr[i - 1]);
        }
        CsrMatrix { n, row_ptr, cols, vals }
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n];
        for r in 0..self.n {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                if self.cols[k] as usize == r {
                    d[r] += self.vals[k];
                }
            }
        }
        d
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(y.len(), self.n);
        y.par_iter_mut().enumerate().for_each(|(r, yr)| {
            let mut s = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                s += self.vals[k] * x[self.cols[k] as usize];
            }
            *yr = s;
        });
    }

    pub fn matvec_alloc(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec(x, &mut y);
        y
    }

    /// x^T M y with a fixed summation order.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut s = 0.0;
        for r in 0..self.n {
            let mut row = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                row += self.vals[k] * y[self.cols[k] as usize];
            }
            s += x[r] * row;
        }
        s
    }
}

#[derive(Debug, Clone)]
pub struct CgOutcome {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Jacobi-preconditioned CG for symmetric positive definite systems.
///
/// Fails with `WellPosedness` when a search direction has non-positive
/// curvature (the system is indefinite), and with `SolverNonConvergence`
/// when the iteration cap is exhausted.
pub fn cg_solve(
    mat: &CsrMatrix,
    rhs: &[f64],
    rel_tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, CgOutcome)> {
    let n = mat.n;
    let rhs_norm = dot(rhs, rhs).sqrt();
    if rhs_norm == 0.0 {
        return Ok((vec![0.0; n], CgOutcome { iterations: 0, relative_residual: 0.0 }));
    }
    let diag = mat.diagonal();
    let inv_diag: Vec<f64> = diag
        .iter()
        .map(|&d| if d.abs() > 1e-300 { 1.0 / d } else { 1.0 })
        .collect();

    let mut x = vec![0.0; n];
    let mut r = rhs.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(ri, di)| ri * di).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for it in 0..max_iter {
        mat.matvec(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(Error::WellPosedness(format!(
                "non-positive curvature p.Ap = {pap:.3e} at iteration {it}: system is indefinite"
            )));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let res = dot(&r, &r).sqrt() / rhs_norm;
        if res <= rel_tol {
            return Ok((x, CgOutcome { iterations: it + 1, relative_residual: res }));
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
    let res = dot(&r, &r).sqrt() / rhs_norm;
    Err(Error::SolverNonConvergence { iterations: max_iter, residual: res })
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian_1d(n: usize) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i as u32, i as u32, 2.0));
            if i > 0 {
                t.push((i as u32, i as u32 - 1, -1.0));
            }
            if i + 1 < n {
                t.push((i as u32, i as u32 + 1, -1.0));
            }
        }
        CsrMatrix::from_triplets(n, t)
    }

    #[test]
    fn triplets_sum_duplicates() {
        let m = CsrMatrix::from_triplets(
            2,
            vec![(0, 0, 1.0), (0, 0, 2.0), (1, 0, 0.5), (0, 1, -1.0), (1, 1, 4.0)],
        );
        assert_eq!(m.nnz(), 4);
        let y = m.matvec_alloc(&[1.0, 1.0]);
        assert_eq!(y, vec![2.0, 4.5]);
    }

    #[test]
    fn cg_solves_laplacian() {
        let n = 200;
        let m = laplacian_1d(n);
        let xs: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let b = m.matvec_alloc(&xs);
        let (x, out) = cg_solve(&m, &b, 1e-12, 10 * n).unwrap();
        assert!(out.relative_residual <= 1e-12);
        for i in 0..n {
            assert!((x[i] - xs[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn cg_flags_indefinite() {
        let m = CsrMatrix::from_triplets(2, vec![(0, 0, 1.0), (1, 1, -1.0)]);
        let err = cg_solve(&m, &[1.0, 1.0], 1e-10, 100).unwrap_err();
        assert!(matches!(err, Error::WellPosedness(_)));
    }

    #[test]
    fn matvec_deterministic_across_thread_counts() {
        let n = 500;
        let m = laplacian_1d(n);
        let x: Vec<f64> = (0..n).map(|i| ((i * 7919) % 83) as f64 * 0.013 - 0.5).collect();
        let base = m.matvec_alloc(&x);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(2).build().unwrap();
        let alt = pool.install(|| m.matvec_alloc(&x));
        assert_eq!(base, alt);
    }
}
