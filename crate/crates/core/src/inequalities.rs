//! Norm inequalities between partial isometries and their support projections.
//!
//! - For partial isometries, `‖u*u − v*v‖ ≤ ‖u − v‖`; projections attain it.
//! - For extremal partial isometries with `d = ‖u − v‖ ≤ √2`,
//!   `‖u*u − v*v‖ ≤ d·(1 − d²/4)^{1/2}`, attained by pairs of rank-one
//!   co-isometries `h × f`, `h × g` with `(f, g) = cos θ`.
//!
//! Also here: the rank-one minimization at the core of the first
//! inequality, solved in closed form and by an independent grid search.

use std::f64::consts::SQRT_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{ComplexMatrix, ToleranceConfig, C64};
use crate::operators::{is_partial_isometry, require_extremal, BlockOperator};

/// Margins within this distance of zero count as equality cases.
pub const EQUALITY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InequalityMargin {
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs − lhs`.
    pub margin: f64,
    pub is_equality_case: bool,
}

impl InequalityMargin {
    pub fn new(lhs: f64, rhs: f64) -> Self {
        let margin = rhs - lhs;
        Self {
            lhs,
            rhs,
            margin,
            is_equality_case: margin.abs() <= EQUALITY_TOL,
        }
    }
}

fn require_pi(w: &BlockOperator, cfg: &ToleranceConfig) -> Result<()> {
    let c = is_partial_isometry(w, cfg);
    if !c.is_partial_isometry {
        return Err(Error::NotPartialIsometry { residual: c.residual });
    }
    Ok(())
}

/// `‖u*u − v*v‖` against `‖u − v‖`.
pub fn check_thm1(u: &BlockOperator, v: &BlockOperator, cfg: &ToleranceConfig) -> Result<InequalityMargin> {
    require_pi(u, cfg)?;
    require_pi(v, cfg)?;
    let lhs = u.gram().distance(&v.gram())?;
    let rhs = u.distance(v)?;
    Ok(InequalityMargin::new(lhs, rhs))
}

/// Left-support version `‖uu* − vv*‖ ≤ ‖u − v‖`, i.e. [`check_thm1`]
/// applied to the adjoints.
pub fn check_thm1_left(
    u: &BlockOperator,
    v: &BlockOperator,
    cfg: &ToleranceConfig,
) -> Result<InequalityMargin> {
    check_thm1(&u.adjoint(), &v.adjoint(), cfg)
}

/// `d·(1 − d²/4)^{1/2}`.
pub fn extremal_bound(d: f64) -> f64 {
    d * (1.0 - d * d / 4.0).max(0.0).sqrt()
}

/// `‖u*u − v*v‖` against `extremal_bound(‖u − v‖)` for extremal `u`, `v`.
pub fn check_thm7(u: &BlockOperator, v: &BlockOperator, cfg: &ToleranceConfig) -> Result<InequalityMargin> {
    require_extremal(u, cfg)?;
    require_extremal(v, cfg)?;
    let d = u.distance(v)?;
    if d > SQRT_2 + 1e-12 {
        return Err(Error::OutOfRange { distance: d });
    }
    let lhs = u.gram().distance(&v.gram())?;
    Ok(InequalityMargin::new(lhs, extremal_bound(d)))
}

/// Equality pair for the extremal bound: `u = (h × f) ⊕ 1_k`,
/// `v = (h × g) ⊕ 1_k` with unit `h ∈ C¹`, `f = e₁`, `g = cos θ e₁ + sin θ e₂`.
/// Both are `(1 + k) × (2 + k)` co-isometries with `‖u − v‖ = 2 sin(θ/2)`
/// and `‖u*u − v*v‖ = sin θ`.
pub fn sharpness_thm7(theta: f64, pad: usize) -> Result<(BlockOperator, BlockOperator)> {
    if !(0.0..=std::f64::consts::FRAC_PI_2).contains(&theta) {
        return Err(Error::InvalidArgument(format!("theta {theta} must lie in [0, π/2]")));
    }
    let h = [C64::new(1.0, 0.0)];
    let f = [C64::new(1.0, 0.0), C64::new(0.0, 0.0)];
    let g = [C64::new(theta.cos(), 0.0), C64::new(theta.sin(), 0.0)];
    let pad_id = ComplexMatrix::identity(pad);
    let u = ComplexMatrix::rank_one(&h, &f).direct_sum(&pad_id);
    let v = ComplexMatrix::rank_one(&h, &g).direct_sum(&pad_id);
    Ok((u.into(), v.into()))
}

/// Closed form and grid oracle for `min ‖g × e₁ − h × k‖` over unit `g`, `h`
/// with `(e₁, k) = cos φ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankOneMin {
    /// `sin φ`.
    pub closed_form: f64,
    /// Square root of the grid minimum of the larger eigenvalue of `t(x, y)`.
    pub brute_force: f64,
    pub minimizer_x: f64,
    pub minimizer_y: f64,
    /// Grid spacing of the final zoom stage.
    pub resolution: f64,
}

/// Larger eigenvalue of the 2×2 Gram matrix `t` of `g × e₁ − h × k`, where
/// `(g, h) = x + iy`.
pub fn gram_top_eigenvalue(phi: f64, x: f64, y: f64) -> f64 {
    let (s, c) = phi.sin_cos();
    let a = 1.0 + c * c - 2.0 * x * c;
    let d = s * s;
    let b = C64::new(c * s - x * s, y * s);
    let half_tr = 0.5 * (a + d);
    let half_diff = 0.5 * (a - d);
    half_tr + (half_diff * half_diff + b.norm_sqr()).sqrt()
}

pub const GRID_POINTS: usize = 200;
pub const ZOOM_FACTOR: f64 = 10.0;
pub const ZOOM_STAGES: usize = 8;

fn grid_argmin(phi: f64, cx: f64, cy: f64, half_width: f64) -> (f64, f64, f64) {
    let n = GRID_POINTS;
    let step = 2.0 * half_width / (n - 1) as f64;
    let mut best = (f64::INFINITY, cx, cy);
    for i in 0..n {
        let x = cx - half_width + i as f64 * step;
        for j in 0..n {
            let y = cy - half_width + j as f64 * step;
            if x * x + y * y > 1.0 {
                continue;
            }
            let val = gram_top_eigenvalue(phi, x, y);
            if val < best.0 {
                best = (val, x, y);
            }
        }
    }
    best
}

/// Minimizes over the unit disk by a coarse grid followed by repeated
/// 10× zooms around the current argmin.
pub fn rank_one_min(phi: f64) -> Result<RankOneMin> {
    if !(phi > 0.0 && phi <= std::f64::consts::FRAC_PI_2) {
        return Err(Error::InvalidArgument(format!("phi {phi} must lie in (0, π/2]")));
    }
    let mut half_width = 1.0;
    let (mut val, mut x, mut y) = grid_argmin(phi, 0.0, 0.0, half_width);
    for _ in 1..ZOOM_STAGES {
        half_width /= ZOOM_FACTOR;
        let (v2, x2, y2) = grid_argmin(phi, x, y, half_width);
        if v2 <= val {
            (val, x, y) = (v2, x2, y2);
        }
    }
    Ok(RankOneMin {
        closed_form: phi.sin(),
        brute_force: val.sqrt(),
        minimizer_x: x,
        minimizer_y: y,
        resolution: 2.0 * half_width / (GRID_POINTS - 1) as f64,
    })
}

/// Shape of `d ↦ d(1 − d²/4)^{1/2}` on a sorted grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundShape {
    pub values: Vec<f64>,
    /// Nondecreasing on the points `≤ √2`.
    pub increasing_below: bool,
    /// Nonincreasing on the points `≥ √2`.
    pub decreasing_above: bool,
    /// `d ≥ d(1 − d²/4)^{1/2}` on the points `≤ √2`.
    pub dominated_by_linear: bool,
    pub max_value: f64,
    pub argmax: f64,
    pub verdict: bool,
}

pub fn bound_shape_check(d_values: &[f64]) -> Result<BoundShape> {
    if d_values.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidArgument("d values must be sorted".into()));
    }
    if d_values.iter().any(|d| !(0.0..=2.0).contains(d)) {
        return Err(Error::InvalidArgument("d values must lie in [0, 2]".into()));
    }
    let values: Vec<f64> = d_values.iter().map(|&d| extremal_bound(d)).collect();
    let pairs: Vec<(f64, f64)> = d_values.iter().copied().zip(values.iter().copied()).collect();
    let increasing_below = pairs
        .windows(2)
        .filter(|w| w[1].0 <= SQRT_2)
        .all(|w| w[1].1 >= w[0].1);
    let decreasing_above = pairs
        .windows(2)
        .filter(|w| w[0].0 >= SQRT_2)
        .all(|w| w[1].1 <= w[0].1);
    let dominated_by_linear = pairs.iter().filter(|p| p.0 <= SQRT_2).all(|&(d, b)| d >= b);
    let (argmax, max_value) = pairs
        .iter()
        .copied()
        .fold((0.0, f64::NEG_INFINITY), |acc, p| if p.1 > acc.1 { p } else { acc });
    Ok(BoundShape {
        verdict: increasing_below && decreasing_above && dominated_by_linear,
        values,
        increasing_below,
        decreasing_above,
        dominated_by_linear,
        max_value,
        argmax,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::projection_geometry::angle_projection;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, FRAC_PI_6};

    fn cfg() -> ToleranceConfig {
        ToleranceConfig::default()
    }

    #[test]
    fn thm1_equal_and_projection_pairs() {
        let u: BlockOperator = angle_projection(0.0, 2).into();
        let m = check_thm1(&u, &u, &cfg()).unwrap();
        assert_eq!((m.lhs, m.rhs), (0.0, 0.0));
        assert!(m.is_equality_case);

        let v: BlockOperator = angle_projection(FRAC_PI_3, 2).into();
        let m = check_thm1(&u, &v, &cfg()).unwrap();
        assert!((m.lhs - FRAC_PI_3.sin()).abs() < 1e-14);
        assert!((m.rhs - FRAC_PI_3.sin()).abs() < 1e-14);
        assert!(m.is_equality_case);
    }

    #[test]
    fn thm1_rejects_contraction() {
        let a: BlockOperator = ComplexMatrix::diag_real(&[1.0, 0.5]).into();
        assert!(matches!(
            check_thm1(&a, &a, &cfg()),
            Err(Error::NotPartialIsometry { .. })
        ));
    }

    #[test]
    fn thm7_rank_one_coisometries() {
        let u: BlockOperator = ComplexMatrix::from_real_rows(&[&[1.0, 0.0]]).into();
        let m = check_thm7(&u, &u, &cfg()).unwrap();
        assert!(m.is_equality_case && m.lhs == 0.0);

        let t = FRAC_PI_3;
        let v: BlockOperator = ComplexMatrix::from_real_rows(&[&[t.cos(), t.sin()]]).into();
        let m = check_thm7(&u, &v, &cfg()).unwrap();
        assert!((u.distance(&v).unwrap() - 1.0).abs() < 1e-14);
        assert!((m.rhs - t.sin()).abs() < 1e-14);
        assert!((m.lhs - t.sin()).abs() < 1e-14);
        assert!(m.is_equality_case);
    }

    #[test]
    fn thm7_out_of_range_and_non_extremal() {
        let u: BlockOperator = ComplexMatrix::from_real_rows(&[&[1.0, 0.0]]).into();
        let v: BlockOperator = ComplexMatrix::from_real_rows(&[&[-1.0, 0.0]]).into();
        assert!(matches!(check_thm7(&u, &v, &cfg()), Err(Error::OutOfRange { .. })));
        let w: BlockOperator = ComplexMatrix::diag_real(&[1.0, 0.0]).into();
        assert!(matches!(check_thm7(&w, &w, &cfg()), Err(Error::NotExtremal { .. })));
    }

    #[test]
    fn sharpness_examples() {
        let (u, v) = sharpness_thm7(0.0, 2).unwrap();
        assert_eq!(u, v);
        assert_eq!(u.block(0).shape(), (3, 4));

        let (u, v) = sharpness_thm7(FRAC_PI_2, 0).unwrap();
        let m = check_thm7(&u, &v, &cfg()).unwrap();
        assert!((u.distance(&v).unwrap() - SQRT_2).abs() < 1e-14);
        assert!((m.lhs - 1.0).abs() < 1e-14 && (m.rhs - 1.0).abs() < 1e-7);

        let (u, v) = sharpness_thm7(FRAC_PI_3, 3).unwrap();
        assert!((u.distance(&v).unwrap() - 2.0 * (FRAC_PI_6).sin()).abs() < 1e-10);
        assert!((u.gram().distance(&v.gram()).unwrap() - FRAC_PI_3.sin()).abs() < 1e-10);
        assert!(sharpness_thm7(2.0, 0).is_err());
    }

    #[test]
    fn rank_one_min_examples() {
        let r = rank_one_min(FRAC_PI_2).unwrap();
        assert!((r.brute_force - 1.0).abs() < 1e-6);
        assert!(r.minimizer_x.abs() < 1e-4);

        let r = rank_one_min(FRAC_PI_3).unwrap();
        assert!((r.closed_form - 0.75f64.sqrt()).abs() < 1e-15);
        assert!((r.brute_force - r.closed_form).abs() < 1e-6);
        assert!((r.minimizer_x - 0.5).abs() < 1e-4);

        let r = rank_one_min(FRAC_PI_6).unwrap();
        assert!((r.brute_force - 0.5).abs() < 1e-6);
        assert!(r.minimizer_y.abs() <= r.resolution);
    }

    #[test]
    fn gram_eigenvalue_on_real_axis() {
        // at y = 0 the larger eigenvalue is 1 − x cos φ + |x − cos φ|
        for &phi in &[0.3f64, 0.9, 1.4] {
            for k in 0..=20 {
                let x = -1.0 + 0.1 * k as f64;
                let expected = 1.0 - x * phi.cos() + (x - phi.cos()).abs();
                assert!((gram_top_eigenvalue(phi, x, 0.0) - expected).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn bound_shape_examples() {
        assert_eq!(extremal_bound(0.0), 0.0);
        assert!((extremal_bound(SQRT_2) - 1.0).abs() < 1e-15);
        let grid: Vec<f64> = (0..1000).map(|k| 2.0 * k as f64 / 999.0).collect();
        let s = bound_shape_check(&grid).unwrap();
        assert!(s.verdict);
        assert!((s.argmax - SQRT_2).abs() < 2.0 / 999.0);
        assert!(bound_shape_check(&[1.0, 0.5]).is_err());
    }
}
