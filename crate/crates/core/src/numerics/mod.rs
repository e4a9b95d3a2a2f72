//! Dense complex linear algebra: matrices, Hermitian eigensolver, SVD,
//! operator norm and functional calculus.

mod eig;
mod matrix;
mod svd;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use eig::{hermitian_eig, HermitianEigen, MAX_SWEEPS};
pub use matrix::{inner, vec_norm, ComplexMatrix, C64, ONE, ZERO};
pub use svd::{singular_values, svd, Svd};
pub(crate) use svd::{columns_to_matrix, orthogonalize};

/// Numerical tolerances shared by every operation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToleranceConfig {
    /// Singular values at or below `rank_tol · σ_max` count as zero.
    pub rank_tol: f64,
    /// Residual bound for partial-isometry and projection predicates.
    pub iso_tol: f64,
    /// Relative off-diagonal mass at which Jacobi sweeps stop.
    pub eig_tol: f64,
    /// Largest allowed norm step between consecutive path samples.
    pub path_step_max: f64,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        Self {
            rank_tol: 1e-9,
            iso_tol: 1e-8,
            eig_tol: 1e-12,
            path_step_max: 0.1,
        }
    }
}

impl ToleranceConfig {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("rank_tol", self.rank_tol),
            ("iso_tol", self.iso_tol),
            ("eig_tol", self.eig_tol),
            ("path_step_max", self.path_step_max),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        if self.rank_tol >= 1.0 {
            return Err(Error::InvalidArgument("rank_tol must be below 1".into()));
        }
        Ok(())
    }
}

/// Operator (spectral) norm: the largest singular value.
pub fn op_norm(a: &ComplexMatrix) -> f64 {
    if !a.is_finite() {
        return f64::NAN;
    }
    if a.rows() == 0 || a.cols() == 0 || a.max_abs() == 0.0 {
        return 0.0;
    }
    // The Gram matrix is Hermitian by construction, so the only failure
    // mode left is the sweep budget, which Jacobi never exhausts at these sizes.
    singular_values(a, &ToleranceConfig::default())
        .expect("Gram matrix eigensolve")
        .first()
        .copied()
        .unwrap_or(0.0)
}

/// `f(h)` for Hermitian `h`, through its eigendecomposition.
pub fn fun_calc(
    h: &ComplexMatrix,
    f: impl Fn(f64) -> f64,
    cfg: &ToleranceConfig,
) -> Result<ComplexMatrix> {
    Ok(hermitian_eig(h, cfg)?.map_values(f))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn op_norm_examples() {
        assert_eq!(op_norm(&ComplexMatrix::identity(4)), 1.0);
        let a = ComplexMatrix::from_real_rows(&[&[0.0, 2.0], &[0.0, 0.0]]);
        assert!((op_norm(&a) - 2.0).abs() < 1e-15);
        assert_eq!(op_norm(&ComplexMatrix::zeros(3, 2)), 0.0);
    }

    #[test]
    fn op_norm_of_projection_difference_is_sine() {
        let s3 = 3f64.sqrt();
        let p = ComplexMatrix::from_real_rows(&[&[1.0, 0.0], &[0.0, 0.0]]);
        let q = ComplexMatrix::from_real_rows(&[&[0.25, s3 / 4.0], &[s3 / 4.0, 0.75]]);
        let d = op_norm(&(&p - &q));
        assert!((d - (std::f64::consts::PI / 3.0).sin()).abs() < 1e-14);
    }

    #[test]
    fn fun_calc_constant_and_inverse() {
        let cfg = ToleranceConfig::default();
        let one = fun_calc(&ComplexMatrix::diag_real(&[2.0, 3.0]), |_| 1.0, &cfg).unwrap();
        assert!((&one - &ComplexMatrix::identity(2)).max_abs() < 1e-15);
        let eps = 0.5;
        let inv = fun_calc(
            &ComplexMatrix::diag_real(&[2.0, 0.0]),
            |t| if t >= eps { 1.0 / t } else { 0.0 },
            &cfg,
        )
        .unwrap();
        assert!((&inv - &ComplexMatrix::diag_real(&[0.5, 0.0])).max_abs() < 1e-15);
    }

    #[test]
    fn fun_calc_identity_returns_input() {
        let cfg = ToleranceConfig::default();
        let h = ComplexMatrix::from_vec(
            2,
            2,
            vec![C64::new(1.0, 0.0), C64::new(0.0, 2.0), C64::new(0.0, -2.0), C64::new(-3.0, 0.0)],
        )
        .unwrap();
        let back = fun_calc(&h, |t| t, &cfg).unwrap();
        assert!((&back - &h).max_abs() < 1e-12);
    }

    #[test]
    fn tolerance_validation() {
        assert!(ToleranceConfig::default().validate().is_ok());
        let bad = ToleranceConfig {
            rank_tol: 1.5,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = ToleranceConfig {
            iso_tol: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
