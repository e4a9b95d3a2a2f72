//! Independent oracles and input builders shared by the integration tests.
//!
//! Norms, singular values and eigenvalues are recomputed with nalgebra so
//! the checks do not reuse the crate's own Jacobi code.

#![allow(dead_code)]

use isometrica::numerics::ComplexMatrix;
use isometrica::operators::{random_partial_isometry_with, BlockOperator, BlockShape};
use isometrica::random::{gaussian_matrix, stream_rng};
use isometrica::C64;
use nalgebra::DMatrix;

pub fn to_na(a: &ComplexMatrix) -> DMatrix<C64> {
    DMatrix::from_row_slice(a.rows(), a.cols(), a.as_slice())
}

pub fn from_na(m: &DMatrix<C64>) -> ComplexMatrix {
    ComplexMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Singular values in descending order, padded with zeros to `min(rows, cols)`.
pub fn oracle_singular_values(a: &ComplexMatrix) -> Vec<f64> {
    let k = a.rows().min(a.cols());
    if k == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = to_na(a).singular_values().iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s.resize(k, 0.0);
    s
}

pub fn oracle_norm(a: &ComplexMatrix) -> f64 {
    oracle_singular_values(a).first().copied().unwrap_or(0.0)
}

pub fn oracle_block_norm(a: &BlockOperator) -> f64 {
    a.blocks().iter().map(oracle_norm).fold(0.0, f64::max)
}

/// Eigenvalues of a Hermitian matrix in descending order.
pub fn oracle_eigenvalues(h: &ComplexMatrix) -> Vec<f64> {
    let mut v: Vec<f64> = to_na(h).symmetric_eigen().eigenvalues.iter().copied().collect();
    v.sort_by(|x, y| y.total_cmp(x));
    v
}

/// Polar factor of a full-column-rank matrix: `a (a*a)^{-1/2}`.
pub fn oracle_polar_full_rank(a: &ComplexMatrix) -> ComplexMatrix {
    let m = to_na(a);
    let gram = m.adjoint() * &m;
    let eig = gram.symmetric_eigen();
    let inv_sqrt = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| C64::new(1.0 / l.sqrt(), 0.0)));
    let root = &eig.eigenvectors * inv_sqrt * eig.eigenvectors.adjoint();
    from_na(&(m * root))
}

pub fn gaussian(seed: u64, rows: usize, cols: usize) -> ComplexMatrix {
    gaussian_matrix(&mut stream_rng(seed, 0), rows, cols)
}

pub fn op(rows: &[&[f64]]) -> BlockOperator {
    ComplexMatrix::from_real_rows(rows).into()
}

/// Random projection of rank `r` in dimension `n`.
pub fn random_projection(seed: u64, n: usize, r: usize) -> ComplexMatrix {
    let shape = BlockShape::single(n, n).unwrap();
    random_partial_isometry_with(&mut stream_rng(seed, 1), &shape, &[r])
        .unwrap()
        .gram()
        .into_blocks()
        .remove(0)
}

pub fn max_abs_diff(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    (a - b).max_abs()
}
