//! Sparse-matrix plumbing: a compact CSR container for matrix-vector products
//! and a reusable LU factorization handle for the linear solves.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMat, Triplet};

use crate::error::{Error, Result};

/// Square sparse matrix in CSR form.
#[derive(Debug, Clone, PartialEq)]
pub struct CsMat {
    dim: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    vals: Vec<f64>,
}

impl CsMat {
    /// Builds from triplets, summing duplicates. Entries must be in range.
    pub fn from_triplets(dim: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut entries: Vec<(usize, usize, f64)> = triplets.to_vec();
        entries.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut rows = Vec::with_capacity(entries.len());
        let mut cols = Vec::with_capacity(entries.len());
        let mut vals: Vec<f64> = Vec::with_capacity(entries.len());
        for &(r, c, v) in &entries {
            if rows.last() == Some(&r) && cols.last() == Some(&c) {
                *vals.last_mut().unwrap() += v;
            } else {
                rows.push(r);
                cols.push(c);
                vals.push(v);
            }
        }
        csr_from_sorted(dim, &rows, &cols, &vals)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Nonzero columns and values of one row.
    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let (lo, hi) = (self.row_ptr[r], self.row_ptr[r + 1]);
        (&self.col_idx[lo..hi], &self.vals[lo..hi])
    }

    /// out = A x
    pub fn mul_vec(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.dim);
        debug_assert_eq!(out.len(), self.dim);
        for r in 0..self.dim {
            let (lo, hi) = (self.row_ptr[r], self.row_ptr[r + 1]);
            let mut acc = 0.0;
            for k in lo..hi {
                acc += self.vals[k] * x[self.col_idx[k]];
            }
            out[r] = acc;
        }
    }
}

/// Shared sparsity pattern with two aligned value arrays, so that linear
/// combinations alpha*M + beta*K reuse one symbolic factorization.
#[derive(Debug, Clone)]
pub struct MatrixPair {
    dim: usize,
    rows: Vec<usize>,
    cols: Vec<usize>,
    mass_vals: Vec<f64>,
    stiff_vals: Vec<f64>,
    mass_csr: CsMat,
    stiff_csr: CsMat,
}

impl MatrixPair {
    /// Builds both matrices on the union pattern from aligned triplets
    /// (row, col, stiffness value, mass value). Duplicates are summed.
    pub fn from_triplets(dim: usize, triplets: &[(usize, usize, f64, f64)]) -> Self {
        let mut entries: Vec<(usize, usize, f64, f64)> = triplets.to_vec();
        entries.sort_unstable_by_key(|&(r, c, ..)| (r, c));
        let mut rows = Vec::with_capacity(entries.len());
        let mut cols = Vec::with_capacity(entries.len());
        let mut kv: Vec<f64> = Vec::with_capacity(entries.len());
        let mut mv: Vec<f64> = Vec::with_capacity(entries.len());
        for &(r, c, k, m) in &entries {
            if rows.last() == Some(&r) && cols.last() == Some(&c) {
                *kv.last_mut().unwrap() += k;
                *mv.last_mut().unwrap() += m;
            } else {
                rows.push(r);
                cols.push(c);
                kv.push(k);
                mv.push(m);
            }
        }
        let mass_csr = csr_from_sorted(dim, &rows, &cols, &mv);
        let stiff_csr = csr_from_sorted(dim, &rows, &cols, &kv);
        MatrixPair { dim, rows, cols, mass_vals: mv, stiff_vals: kv, mass_csr, stiff_csr }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mass(&self) -> &CsMat {
        &self.mass_csr
    }

    pub fn stiffness(&self) -> &CsMat {
        &self.stiff_csr
    }

    fn to_col_mat(&self, vals: impl Fn(usize) -> f64) -> Result<SparseColMat<usize, f64>> {
        let trip: Vec<Triplet<usize, usize, f64>> = (0..self.rows.len())
            .map(|i| Triplet::new(self.rows[i], self.cols[i], vals(i)))
            .collect();
        SparseColMat::try_new_from_triplets(self.dim, self.dim, &trip)
            .map_err(|e| Error::Solver { step: 0, msg: format!("sparse matrix construction failed: {e:?}") })
    }

    /// Symbolic LU of the shared pattern; reusable across refactorizations.
    pub fn symbolic(&self) -> Result<FactorSymbolic> {
        let mat = self.to_col_mat(|i| self.mass_vals[i] + self.stiff_vals[i])?;
        let sym = SymbolicLu::try_new(mat.symbolic())
            .map_err(|e| Error::Solver { step: 0, msg: format!("symbolic factorization failed: {e:?}") })?;
        Ok(FactorSymbolic { sym })
    }

    /// Factorizes alpha*M + beta*K, reusing a symbolic analysis if given.
    pub fn factorize_combo(
        &self,
        alpha_mass: f64,
        beta_stiff: f64,
        symbolic: Option<&FactorSymbolic>,
    ) -> Result<LinearSolveHandle> {
        let mat = self.to_col_mat(|i| alpha_mass * self.mass_vals[i] + beta_stiff * self.stiff_vals[i])?;
        let lu = match symbolic {
            Some(s) => Lu::try_new_with_symbolic(s.sym.clone(), mat.as_ref()),
            None => {
                let sym = SymbolicLu::try_new(mat.symbolic())
                    .map_err(|e| Error::Solver { step: 0, msg: format!("symbolic factorization failed: {e:?}") })?;
                Lu::try_new_with_symbolic(sym, mat.as_ref())
            }
        }
        .map_err(|e| Error::Solver { step: 0, msg: format!("LU factorization failed: {e:?}") })?;
        Ok(LinearSolveHandle { lu, dim: self.dim })
    }
}

fn csr_from_sorted(dim: usize, rows: &[usize], cols: &[usize], vals: &[f64]) -> CsMat {
    let mut row_ptr = vec![0usize; dim + 1];
    for &r in rows {
        row_ptr[r + 1] += 1;
    }
    for r in 0..dim {
        row_ptr[r + 1] += row_ptr[r];
    }
    CsMat { dim, row_ptr, col_idx: cols.to_vec(), vals: vals.to_vec() }
}

/// Reusable symbolic LU analysis of a fixed sparsity pattern.
pub struct FactorSymbolic {
    sym: SymbolicLu<usize>,
}

/// LU factorization of a sparse matrix, reusable across right-hand sides.
pub struct LinearSolveHandle {
    lu: Lu<usize, f64>,
    dim: usize,
}

impl LinearSolveHandle {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Solves A x = b in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        debug_assert_eq!(b.len(), self.dim);
        let mut mat = faer::Mat::<f64>::zeros(self.dim, 1);
        for (i, &v) in b.iter().enumerate() {
            mat[(i, 0)] = v;
        }
        self.lu.solve_in_place(mat.as_mut());
        for (i, v) in b.iter_mut().enumerate() {
            *v = mat[(i, 0)];
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

/// Euclidean norm.
pub fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Max norm.
pub fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, &x| m.max(x.abs()))
}
