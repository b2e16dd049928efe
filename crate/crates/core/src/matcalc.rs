//! vec / vech, the duplication matrix and Kronecker products.
//!
//! `vech` stacks the lower triangle column by column, matching the column
//! order used by [`duplication_matrix`].

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// `r(r+1)/2`.
pub fn vech_len(r: usize) -> usize {
    r * (r + 1) / 2
}

/// Position of `(i, j)`, `i ≥ j`, inside `vech`.
pub fn vech_index(r: usize, i: usize, j: usize) -> usize {
    debug_assert!(i >= j && i < r);
    j * r - j * (j + 1) / 2 + i
}

/// Column-stacking `vec`.
pub fn vec(a: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(a.as_slice())
}

pub fn vech(s: &DMatrix<f64>) -> Result<DVector<f64>> {
    let r = s.nrows();
    if s.ncols() != r {
        return Err(Error::DimensionMismatch { expected: r, found: s.ncols() });
    }
    let scale = s.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    let mut out = DVector::zeros(vech_len(r));
    for j in 0..r {
        for i in j..r {
            if (s[(i, j)] - s[(j, i)]).abs() > 1e-9 * scale {
                return Err(Error::NotSymmetric);
            }
            out[vech_index(r, i, j)] = s[(i, j)];
        }
    }
    Ok(out)
}

/// Inverse of [`vech`]: the symmetric matrix with the given lower triangle.
pub fn unvech(v: &DVector<f64>, r: usize) -> Result<DMatrix<f64>> {
    if v.len() != vech_len(r) {
        return Err(Error::DimensionMismatch { expected: vech_len(r), found: v.len() });
    }
    let mut s = DMatrix::zeros(r, r);
    for j in 0..r {
        for i in j..r {
            let x = v[vech_index(r, i, j)];
            s[(i, j)] = x;
            s[(j, i)] = x;
        }
    }
    Ok(s)
}

/// The `r² × r(r+1)/2` 0/1 matrix with `D vech(A) = vec(A)` for symmetric `A`.
#[derive(Debug, Clone, PartialEq)]
pub struct DuplicationMatrix {
    dim: usize,
    mat: DMatrix<f64>,
}

impl DuplicationMatrix {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.mat
    }

    /// `(DᵀD)⁻¹Dᵀ`. `DᵀD` is diagonal with entries 1 (diagonal positions) or 2.
    pub fn pseudo_inverse(&self) -> DMatrix<f64> {
        let mut p = self.mat.transpose();
        for k in 0..p.nrows() {
            let count: f64 = p.row(k).sum();
            p.row_mut(k).unscale_mut(count);
        }
        p
    }
}

pub fn duplication_matrix(r: usize) -> DuplicationMatrix {
    let mut mat = DMatrix::zeros(r * r, vech_len(r));
    for j in 0..r {
        for i in 0..r {
            let k = if i >= j { vech_index(r, i, j) } else { vech_index(r, j, i) };
            // vec index of (i, j) is j*r + i
            mat[(j * r + i, k)] = 1.0;
        }
    }
    DuplicationMatrix { dim: r, mat }
}

/// Commutation matrix `K` with `K vec(A) = vec(Aᵀ)` for `m × n` `A`.
pub fn commutation_matrix(m: usize, n: usize) -> DMatrix<f64> {
    let mut k = DMatrix::zeros(m * n, m * n);
    for i in 0..m {
        for j in 0..n {
            // vec(A)[j*m + i] = A[i,j] = vec(Aᵀ)[i*n + j]
            k[(i * n + j, j * m + i)] = 1.0;
        }
    }
    k
}

pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (p, q) = b.shape();
    let mut out = DMatrix::zeros(a.nrows() * p, a.ncols() * q);
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            let aij = a[(i, j)];
            if aij == 0.0 {
                continue;
            }
            let mut block = out.view_mut((i * p, j * q), (p, q));
            block.zip_apply(b, |o, bv| *o = aij * bv);
        }
    }
    out
}
