//! Singular value decomposition built on the Hermitian eigensolver.

use super::eig::hermitian_eig;
use super::matrix::{inner, vec_norm, ComplexMatrix, C64};
use super::ToleranceConfig;
use crate::error::Result;

/// `a = left · diag(singulars) · right*` with square unitary factors.
#[derive(Debug, Clone)]
pub struct Svd {
    pub left: ComplexMatrix,
    /// Descending, length `min(rows, cols)`.
    pub singulars: Vec<f64>,
    pub right: ComplexMatrix,
}

impl Svd {
    pub fn reconstruct(&self) -> ComplexMatrix {
        let (m, n) = (self.left.rows(), self.right.rows());
        let sigma = ComplexMatrix::from_fn(m, n, |i, j| {
            if i == j {
                C64::new(self.singulars[i], 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        self.left.matmul(&sigma).matmul(&self.right.adjoint())
    }

    pub fn max(&self) -> f64 {
        self.singulars.first().copied().unwrap_or(0.0)
    }
}

/// Singular value decomposition.
///
/// Diagonalizes the Gram matrix of the smaller side, reads singular values
/// off as column norms of `a·V` and recovers the other factor by
/// normalizing those columns. Columns for numerically zero singular values
/// are completed by Gram–Schmidt against the standard basis.
pub fn svd(a: &ComplexMatrix, cfg: &ToleranceConfig) -> Result<Svd> {
    if a.rows() < a.cols() {
        let t = svd(&a.adjoint(), cfg)?;
        return Ok(Svd {
            left: t.right,
            singulars: t.singulars,
            right: t.left,
        });
    }
    let (m, n) = a.shape();
    let gram = a.adjoint_mul(a);
    let eig = hermitian_eig(&gram, cfg)?;
    let b = a.matmul(&eig.basis);

    let norms: Vec<f64> = (0..n).map(|j| vec_norm(&b.col(j))).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));
    let singulars: Vec<f64> = order.iter().map(|&i| norms[i]).collect();
    let right = eig.basis.select_cols(&order);

    let smax = singulars.first().copied().unwrap_or(0.0);
    let zero_cut = smax * 1e-13;
    let mut left_cols: Vec<Vec<C64>> = Vec::with_capacity(m);
    for (k, &j) in order.iter().enumerate() {
        if singulars[k] <= zero_cut || singulars[k] == 0.0 {
            break;
        }
        let mut col = b.col(j);
        orthogonalize(&mut col, &left_cols);
        orthogonalize(&mut col, &left_cols);
        let nrm = vec_norm(&col);
        if nrm <= 0.5 * singulars[k] {
            // Lost to cancellation; treat as a null direction.
            break;
        }
        col.iter_mut().for_each(|z| *z /= nrm);
        left_cols.push(col);
    }
    complete_basis(&mut left_cols, m);
    let left = columns_to_matrix(&left_cols, m);
    Ok(Svd {
        left,
        singulars,
        right,
    })
}

/// Singular values only, descending.
pub fn singular_values(a: &ComplexMatrix, cfg: &ToleranceConfig) -> Result<Vec<f64>> {
    let small = if a.rows() < a.cols() { a.adjoint() } else { a.clone() };
    let eig = hermitian_eig(&small.adjoint_mul(&small), cfg)?;
    let b = small.matmul(&eig.basis);
    let mut s: Vec<f64> = (0..b.cols()).map(|j| vec_norm(&b.col(j))).collect();
    s.sort_by(|x, y| y.total_cmp(x));
    Ok(s)
}

pub(crate) fn orthogonalize(v: &mut [C64], basis: &[Vec<C64>]) {
    for e in basis {
        let c = inner(v, e);
        for (x, y) in v.iter_mut().zip(e) {
            *x -= c * y;
        }
    }
}

/// Extends orthonormal columns to an orthonormal basis of `C^dim`, drawing
/// candidates from the standard basis in index order.
pub(crate) fn complete_basis(cols: &mut Vec<Vec<C64>>, dim: usize) {
    let mut k = 0;
    while cols.len() < dim && k < dim {
        let mut e = vec![C64::new(0.0, 0.0); dim];
        e[k] = C64::new(1.0, 0.0);
        orthogonalize(&mut e, cols);
        orthogonalize(&mut e, cols);
        let nrm = vec_norm(&e);
        if nrm > 1e-3 {
            e.iter_mut().for_each(|z| *z /= nrm);
            cols.push(e);
        }
        k += 1;
    }
    debug_assert_eq!(cols.len(), dim, "basis completion fell short");
}

pub(crate) fn columns_to_matrix(cols: &[Vec<C64>], rows: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols.len(), |i, j| cols[j][i])
}
