//! Cyclic Jacobi eigensolver for complex Hermitian matrices.

use super::matrix::{ComplexMatrix, C64};
use super::ToleranceConfig;
use crate::error::{Error, Result};

/// Sweep budget for the cyclic Jacobi iteration.
pub const MAX_SWEEPS: usize = 100;

/// Eigendecomposition `h = basis · diag(values) · basis*`.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    /// Eigenvalues, descending; ties keep the original diagonal order.
    pub values: Vec<f64>,
    /// Unitary matrix whose columns are the eigenvectors.
    pub basis: ComplexMatrix,
}

impl HermitianEigen {
    pub fn reconstruct(&self) -> ComplexMatrix {
        self.map_values(|x| x)
    }

    /// `basis · diag(f(values)) · basis*`.
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> ComplexMatrix {
        let n = self.values.len();
        let scaled = ComplexMatrix::from_fn(n, n, |i, j| self.basis[(i, j)] * f(self.values[j]));
        scaled.matmul(&self.basis.adjoint())
    }
}

fn off_diagonal_mass(a: &ComplexMatrix) -> f64 {
    let n = a.rows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[(i, j)].norm_sqr();
            }
        }
    }
    s.sqrt()
}

/// Eigenvalues and eigenvectors of a Hermitian matrix.
///
/// Rotations visit the strict upper triangle in row-major order, so the
/// result is a deterministic function of the input bits. Converges when the
/// off-diagonal Frobenius mass drops to `eig_tol · ‖h‖_F`, after which one
/// more sweep is run: Jacobi converges quadratically, so this brings
/// eigenvectors of tiny eigenvalues to working precision at little cost.
pub fn hermitian_eig(h: &ComplexMatrix, cfg: &ToleranceConfig) -> Result<HermitianEigen> {
    if !h.is_square() {
        return Err(Error::ShapeMismatch(format!(
            "eigensolver needs a square matrix, got {}x{}",
            h.rows(),
            h.cols()
        )));
    }
    let n = h.rows();
    let norm = h.frobenius_norm();
    let defect = h.hermitian_defect();
    if defect > cfg.iso_tol * norm {
        return Err(Error::NotHermitian { defect });
    }

    let mut a = h.hermitian_part();
    let mut v = ComplexMatrix::identity(n);
    let target = cfg.eig_tol * norm;

    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        if off_diagonal_mass(&a) <= target {
            converged = true;
            sweep(&mut a, &mut v);
            break;
        }
        sweep(&mut a, &mut v);
    }
    if !converged {
        let off = off_diagonal_mass(&a);
        if off > target {
            return Err(Error::NoConvergence {
                sweeps: MAX_SWEEPS,
                off,
            });
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    // Stable sort: equal eigenvalues keep their original index order.
    order.sort_by(|&i, &j| a[(j, j)].re.total_cmp(&a[(i, i)].re));
    let values = order.iter().map(|&i| a[(i, i)].re).collect();
    let basis = v.select_cols(&order);
    Ok(HermitianEigen { values, basis })
}

fn sweep(a: &mut ComplexMatrix, v: &mut ComplexMatrix) {
    let n = a.rows();
    for p in 0..n {
        for q in (p + 1)..n {
            rotate(a, v, p, q);
        }
    }
}

/// One complex Jacobi rotation annihilating `a[p][q]`.
///
/// With `a_pq = r e^{iφ}` the 2×2 block is `P M P*`, `P = diag(1, e^{-iφ})`
/// and `M` real symmetric; the rotation is `G = P R` with `R` the real
/// Jacobi rotation of `M`.
fn rotate(a: &mut ComplexMatrix, v: &mut ComplexMatrix, p: usize, q: usize) {
    let apq = a[(p, q)];
    let r = apq.norm();
    if r == 0.0 {
        return;
    }
    let app = a[(p, p)].re;
    let aqq = a[(q, q)].re;
    // Skip rotations below the representable scale of the diagonal.
    if r <= f64::EPSILON * 1e-3 * (app.abs() + aqq.abs()) {
        a[(p, q)] = C64::new(0.0, 0.0);
        a[(q, p)] = C64::new(0.0, 0.0);
        return;
    }
    let phase = apq / r;
    let theta = (aqq - app) / (2.0 * r);
    let t = if theta == 0.0 {
        1.0
    } else {
        theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
    };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;
    let pc = phase.conj();
    let n = a.rows();

    // A ← A G
    for k in 0..n {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = akp * c - akq * pc * s;
        a[(k, q)] = akp * s + akq * pc * c;
    }
    // A ← G* A
    for k in 0..n {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = apk * c - aqk * phase * s;
        a[(q, k)] = apk * s + aqk * phase * c;
    }
    a[(p, q)] = C64::new(0.0, 0.0);
    a[(q, p)] = C64::new(0.0, 0.0);
    a[(p, p)] = C64::new(app - t * r, 0.0);
    a[(q, q)] = C64::new(aqq + t * r, 0.0);

    // V ← V G
    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = vkp * c - vkq * pc * s;
        v[(k, q)] = vkp * s + vkq * pc * c;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::matrix::{ONE, ZERO};

    fn cfg() -> ToleranceConfig {
        ToleranceConfig::default()
    }

    #[test]
    fn diagonal_input_is_sorted_descending() {
        let h = ComplexMatrix::diag_real(&[0.0, 3.0]);
        let e = hermitian_eig(&h, &cfg()).unwrap();
        assert_eq!(e.values, vec![3.0, 0.0]);
        let swap = ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]);
        assert_eq!(e.basis, swap);
    }

    #[test]
    fn swap_matrix_has_eigenvalues_plus_minus_one() {
        let h = ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let e = hermitian_eig(&h, &cfg()).unwrap();
        assert!((e.values[0] - 1.0).abs() < 1e-14);
        assert!((e.values[1] + 1.0).abs() < 1e-14);
    }

    #[test]
    fn complex_two_by_two_is_diagonalized() {
        let h = ComplexMatrix::from_vec(
            2,
            2,
            vec![
                C64::new(2.0, 0.0),
                C64::new(0.3, -1.1),
                C64::new(0.3, 1.1),
                C64::new(-1.0, 0.0),
            ],
        )
        .unwrap();
        let e = hermitian_eig(&h, &cfg()).unwrap();
        let d = e.basis.adjoint().matmul(&h).matmul(&e.basis);
        assert!(d[(0, 1)].norm() < 1e-14);
        // trace and determinant are preserved
        let tr: f64 = e.values.iter().sum();
        assert!((tr - 1.0).abs() < 1e-14);
        let det = e.values[0] * e.values[1];
        assert!((det - (-2.0 - (0.09 + 1.21))).abs() < 1e-13);
    }

    #[test]
    fn rejects_non_hermitian() {
        let h = ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]);
        assert!(matches!(
            hermitian_eig(&h, &cfg()),
            Err(Error::NotHermitian { .. })
        ));
        let r = ComplexMatrix::zeros(2, 3);
        assert!(matches!(hermitian_eig(&r, &cfg()), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn zero_matrix_gives_identity_basis() {
        let e = hermitian_eig(&ComplexMatrix::zeros(3, 3), &cfg()).unwrap();
        assert_eq!(e.values, vec![0.0; 3]);
        assert_eq!(e.basis, ComplexMatrix::identity(3));
    }

    #[test]
    fn equal_eigenvalues_keep_index_order() {
        let h = ComplexMatrix::diag_real(&[1.0, 2.0, 1.0]);
        let e = hermitian_eig(&h, &cfg()).unwrap();
        assert_eq!(e.values, vec![2.0, 1.0, 1.0]);
        assert_eq!(e.basis[(1, 0)], ONE);
        assert_eq!(e.basis[(0, 1)], ONE);
        assert_eq!(e.basis[(2, 2)], ONE);
        assert_eq!(e.basis[(0, 2)], ZERO);
    }
}
