//! Geometry of a pair of orthogonal projections.
//!
//! Any two projections `p`, `q` on `C^n` split the space into five mutually
//! orthogonal pieces:
//!
//! ```text
//! H00 = ker p ∩ ker q     H01 = ker p ∩ ran q
//! H10 = ran p ∩ ker q     H11 = ran p ∩ ran q
//! H'  = generic part, a sum of 2-dimensional cells
//! ```
//!
//! On a generic cell with principal angle `θ ∈ (0, π/2)` the pair takes the
//! form `p = [[1, 0], [0, 0]]`, `q = [[cos²θ, cosθ sinθ], [cosθ sinθ, sin²θ]]`.
//! Everything else in this module (distances, connecting partial isometries,
//! angle capping, projection paths) is computed from that canonical form or
//! checked against it.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{
    columns_to_matrix, hermitian_eig, op_norm, orthogonalize, vec_norm, ComplexMatrix,
    ToleranceConfig, C64,
};
use crate::operators::BlockOperator;
use crate::polar::polar_pi;

/// `max(‖p − p*‖, ‖p² − p‖)`.
pub fn projection_residual(p: &ComplexMatrix) -> f64 {
    if !p.is_square() {
        return f64::INFINITY;
    }
    let herm = op_norm(&(p - &p.adjoint()));
    let idem = op_norm(&(&p.matmul(p) - p));
    herm.max(idem)
}

/// Multiple of the input projection residuals below which `sin² θ` or
/// `cos² θ` is treated as zero.
const CORNER_NOISE_FACTOR: f64 = 8.0;

fn require_projection(p: &ComplexMatrix, cfg: &ToleranceConfig) -> Result<()> {
    let residual = projection_residual(p);
    if residual > cfg.iso_tol || residual.is_nan() {
        return Err(Error::NotProjection { residual });
    }
    Ok(())
}

fn split_eigenspaces(p: &ComplexMatrix, cfg: &ToleranceConfig) -> Result<(ComplexMatrix, ComplexMatrix)> {
    let e = hermitian_eig(&p.hermitian_part(), cfg)?;
    let range: Vec<usize> = (0..e.values.len()).filter(|&i| e.values[i] > 0.5).collect();
    let kernel: Vec<usize> = (0..e.values.len()).filter(|&i| e.values[i] <= 0.5).collect();
    Ok((e.basis.select_cols(&range), e.basis.select_cols(&kernel)))
}

/// Orthonormal basis (as columns) of the range of a projection.
pub fn range_basis(p: &ComplexMatrix, cfg: &ToleranceConfig) -> Result<ComplexMatrix> {
    Ok(split_eigenspaces(p, cfg)?.0)
}

/// Dimensions of the four corner subspaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CornerDims {
    pub d00: usize,
    pub d01: usize,
    pub d10: usize,
    pub d11: usize,
}

impl CornerDims {
    pub fn as_tuple(&self) -> (usize, usize, usize, usize) {
        (self.d00, self.d01, self.d10, self.d11)
    }

    fn total(&self) -> usize {
        self.d00 + self.d01 + self.d10 + self.d11
    }
}

/// Canonical form of a projection pair.
///
/// Columns of `basis` are ordered `H00, H01, H10, H11`, then one
/// `(e1, e2)` pair per angle, with `e1 ∈ ran p` and `e2 ∈ ker p`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FivePartDecomposition {
    pub basis: ComplexMatrix,
    pub dims: CornerDims,
    /// Principal angles of the generic part, ascending, in `(0, π/2)`.
    pub angles: Vec<f64>,
}

fn cell_q(theta: f64) -> [[f64; 2]; 2] {
    let (s, c) = theta.sin_cos();
    [[c * c, c * s], [c * s, s * s]]
}

impl FivePartDecomposition {
    pub fn dim(&self) -> usize {
        self.basis.rows()
    }

    fn generic_offset(&self) -> usize {
        self.dims.total()
    }

    /// `p` in the canonical basis.
    pub fn canonical_p(&self) -> ComplexMatrix {
        let n = self.dim();
        let mut m = ComplexMatrix::zeros(n, n);
        let d = self.dims;
        for i in (d.d00 + d.d01)..d.total() {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        let off = self.generic_offset();
        for k in 0..self.angles.len() {
            let i = off + 2 * k;
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    /// `q` in the canonical basis, with the generic angles replaced by `angles`.
    fn canonical_q_with(&self, angles: &[f64]) -> ComplexMatrix {
        let n = self.dim();
        let mut m = ComplexMatrix::zeros(n, n);
        let d = self.dims;
        for i in d.d00..(d.d00 + d.d01) {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        for i in (d.d00 + d.d01 + d.d10)..d.total() {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        let off = self.generic_offset();
        for (k, &theta) in angles.iter().enumerate() {
            let cell = cell_q(theta);
            for a in 0..2 {
                for b in 0..2 {
                    m[(off + 2 * k + a, off + 2 * k + b)] = C64::new(cell[a][b], 0.0);
                }
            }
        }
        m
    }

    pub fn canonical_q(&self) -> ComplexMatrix {
        self.canonical_q_with(&self.angles)
    }

    fn to_ambient(&self, m: &ComplexMatrix) -> ComplexMatrix {
        self.basis.matmul(m).matmul(&self.basis.adjoint())
    }

    pub fn reconstruct_p(&self) -> ComplexMatrix {
        self.to_ambient(&self.canonical_p())
    }

    pub fn reconstruct_q(&self) -> ComplexMatrix {
        self.to_ambient(&self.canonical_q())
    }

    /// Largest reconstruction error of `p`, `q`, and of `basis` as a unitary.
    pub fn reconstruction_residual(&self, p: &ComplexMatrix, q: &ComplexMatrix) -> f64 {
        let n = self.dim();
        let unitary = op_norm(&(&self.basis.adjoint_mul(&self.basis) - &ComplexMatrix::identity(n)));
        let rp = op_norm(&(&self.reconstruct_p() - p));
        let rq = op_norm(&(&self.reconstruct_q() - q));
        unitary.max(rp).max(rq)
    }

    pub fn max_angle(&self) -> Option<f64> {
        self.angles.iter().copied().reduce(f64::max)
    }

    /// `‖p − q‖` read off the canonical form.
    pub fn distance(&self) -> f64 {
        if self.dims.d01 > 0 || self.dims.d10 > 0 {
            1.0
        } else {
            self.max_angle().map_or(0.0, f64::sin)
        }
    }
}

/// Five-part decomposition of a projection pair.
///
/// Works from an eigenbasis of the compression of `q` to `ran p`. For each
/// eigenvector `e1` the angle is `atan2(‖(1−q)e1‖, ‖q e1‖)`, which is
/// accurate at both ends of `[0, π/2]`; angles within `eig_tol` of either
/// end are absorbed into `H11` / `H10`. So are vectors whose compression
/// eigenvalue sits within the input noise (a multiple of the projection
/// residuals) of 1 or 0: there the eigenvectors of a near-degenerate cluster
/// mix freely and the per-vector angle is not meaningful. Partners are
/// `e2 ∝ (1−p) q e1`, and the rest of `ker p` is split by `q` into
/// `H00` and `H01`.
pub fn five_part_decomposition(
    p: &ComplexMatrix,
    q: &ComplexMatrix,
    cfg: &ToleranceConfig,
) -> Result<FivePartDecomposition> {
    if !p.is_square() || p.shape() != q.shape() {
        return Err(Error::ShapeMismatch(format!(
            "projection pair {}x{} / {}x{}",
            p.rows(),
            p.cols(),
            q.rows(),
            q.cols()
        )));
    }
    require_projection(p, cfg)?;
    require_projection(q, cfg)?;
    let n = p.rows();
    let noise = CORNER_NOISE_FACTOR * (projection_residual(p) + projection_residual(q) + n as f64 * f64::EPSILON);
    let id = ComplexMatrix::identity(n);
    let one_minus_p = &id - p;
    let one_minus_q = &id - q;

    let (range_p, kernel_p) = split_eigenspaces(p, cfg)?;
    let compression = range_p.adjoint_mul(&q.matmul(&range_p)).hermitian_part();
    let ce = hermitian_eig(&compression, cfg)?;
    let e1s = range_p.matmul(&ce.basis);

    let mut h10 = Vec::new();
    let mut h11 = Vec::new();
    let mut generic: Vec<(f64, Vec<C64>, Vec<C64>)> = Vec::new();
    for j in 0..e1s.cols() {
        let e1 = e1s.col(j);
        let c = vec_norm(&q.apply(&e1));
        let s = vec_norm(&one_minus_q.apply(&e1));
        let theta = s.atan2(c);
        let lambda = ce.values[j];
        if theta <= cfg.eig_tol || 1.0 - lambda <= noise {
            h11.push(e1);
        } else if theta >= FRAC_PI_2 - cfg.eig_tol || lambda <= noise {
            h10.push(e1);
        } else {
            let mut e2: Vec<C64> = one_minus_p
                .apply(&one_minus_q.apply(&e1))
                .into_iter()
                .map(|z| -z)
                .collect();
            let nrm = vec_norm(&e2);
            e2.iter_mut().for_each(|z| *z /= nrm);
            generic.push((theta, e1, e2));
        }
    }
    // Ascending angle; stable so equal angles keep eigenvector order.
    generic.sort_by(|a, b| a.0.total_cmp(&b.0));

    // Remainder of ker p, orthogonal to the partners e2.
    let mut e2_basis: Vec<Vec<C64>> = Vec::new();
    for (_, _, e2) in &generic {
        let mut v = e2.clone();
        orthogonalize(&mut v, &e2_basis);
        orthogonalize(&mut v, &e2_basis);
        let nrm = vec_norm(&v);
        v.iter_mut().for_each(|z| *z /= nrm);
        e2_basis.push(v);
    }
    let e2_mat = columns_to_matrix(&e2_basis, n);
    let rest_proj = &kernel_p.matmul(&kernel_p.adjoint()) - &e2_mat.matmul(&e2_mat.adjoint());
    let rest = range_basis(&rest_proj, cfg)?;
    if rest.cols() + e2_basis.len() != kernel_p.cols() {
        return Err(Error::IllConditioned {
            value: (rest.cols() + e2_basis.len()) as f64,
            cutoff: kernel_p.cols() as f64,
        });
    }
    let rest_q = rest.adjoint_mul(&q.matmul(&rest)).hermitian_part();
    let re = hermitian_eig(&rest_q, cfg)?;
    let rest_rot = rest.matmul(&re.basis);
    let mut h00 = Vec::new();
    let mut h01 = Vec::new();
    for (j, &lambda) in re.values.iter().enumerate() {
        if (lambda - lambda.round()).abs() > 1e-6 {
            return Err(Error::IllConditioned {
                value: lambda,
                cutoff: 0.5,
            });
        }
        if lambda > 0.5 {
            h01.push(rest_rot.col(j));
        } else {
            h00.push(rest_rot.col(j));
        }
    }

    let dims = CornerDims {
        d00: h00.len(),
        d01: h01.len(),
        d10: h10.len(),
        d11: h11.len(),
    };
    let mut cols: Vec<Vec<C64>> = Vec::with_capacity(n);
    cols.extend(h00);
    cols.extend(h01);
    cols.extend(h10);
    cols.extend(h11);
    let mut angles = Vec::with_capacity(generic.len());
    for ((theta, e1, _), e2) in generic.into_iter().zip(e2_basis) {
        angles.push(theta);
        cols.push(e1);
        cols.push(e2);
    }
    debug_assert_eq!(dims.total() + 2 * angles.len(), n);
    Ok(FivePartDecomposition {
        basis: columns_to_matrix(&cols, n),
        dims,
        angles,
    })
}

/// `‖p − q‖` computed from the canonical form: 1 when a cross corner is
/// present, otherwise the sine of the largest principal angle.
pub fn projection_distance(p: &ComplexMatrix, q: &ComplexMatrix, cfg: &ToleranceConfig) -> Result<f64> {
    Ok(five_part_decomposition(p, q, cfg)?.distance())
}

/// Connecting partial isometry `r = u(p_to·p_from)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConnectingIsometry {
    /// `r* r = p_from`, `r r* = p_to`.
    pub r: ComplexMatrix,
    /// Smallest nonzero singular value of `p_to·p_from` (the cosine of
    /// the largest principal angle).
    pub gap: f64,
    /// Lipschitz constant `3 / gap` for `r` against perturbations of
    /// `p_from` that keep the distance below 1.
    pub lipschitz_bound: f64,
}

pub fn connecting_pi(
    p_from: &ComplexMatrix,
    p_to: &ComplexMatrix,
    cfg: &ToleranceConfig,
) -> Result<ConnectingIsometry> {
    if !p_from.is_square() || p_from.shape() != p_to.shape() {
        return Err(Error::ShapeMismatch("connecting_pi projections".into()));
    }
    require_projection(p_from, cfg)?;
    require_projection(p_to, cfg)?;
    let distance = op_norm(&(p_from - p_to));
    let limit = 1.0 - cfg.rank_tol;
    if distance >= limit {
        return Err(Error::TooFar { distance, limit });
    }
    let pd = polar_pi(&BlockOperator::from(p_to.matmul(p_from)), cfg)?;
    let gap = pd.gap;
    let r = pd.u.into_blocks().remove(0);
    Ok(ConnectingIsometry {
        r,
        gap,
        lipschitz_bound: if gap > 0.0 { 3.0 / gap } else { 0.0 },
    })
}

/// Result of [`cap_angles`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CappedPair {
    pub q_capped: ComplexMatrix,
    /// `w* w = q_capped`, `w w* = q`.
    pub w: ComplexMatrix,
    /// False when every angle was already at most the cap (then `w = q`).
    pub capped: bool,
    pub max_angle: f64,
    /// `‖w − q‖`.
    pub displacement: f64,
    /// `2 sin((max_angle − cap)/2)`, or 0 when nothing was capped.
    pub bound: f64,
}

/// Replaces every principal angle above `cap` by `cap`.
///
/// On a capped cell `q = g_θ g_θ*` becomes `g_cap g_cap*` and `w = g_θ g_cap*`
/// so that `‖w − q‖ = ‖g_cap − g_θ‖ = 2 sin((θ − cap)/2)`. Corner subspaces
/// are left untouched.
pub fn cap_angles(
    p: &ComplexMatrix,
    q: &ComplexMatrix,
    cap: f64,
    cfg: &ToleranceConfig,
) -> Result<CappedPair> {
    if !(cap > 0.0 && cap < FRAC_PI_2) {
        return Err(Error::InvalidArgument(format!("cap {cap} must lie in (0, π/2)")));
    }
    let dec = five_part_decomposition(p, q, cfg)?;
    let max_angle = dec.max_angle().unwrap_or(0.0);
    if max_angle <= cap {
        return Ok(CappedPair {
            q_capped: q.clone(),
            w: q.clone(),
            capped: false,
            max_angle,
            displacement: 0.0,
            bound: 0.0,
        });
    }
    let capped_angles: Vec<f64> = dec.angles.iter().map(|&t| t.min(cap)).collect();
    let q_hat = dec.canonical_q_with(&capped_angles);
    let mut w_hat = dec.canonical_q();
    let off = dec.generic_offset();
    for (k, (&theta, &theta_c)) in dec.angles.iter().zip(&capped_angles).enumerate() {
        if theta == theta_c {
            continue;
        }
        let (s, c) = theta.sin_cos();
        let (sc, cc) = theta_c.sin_cos();
        let g = [c, s];
        let gc = [cc, sc];
        for a in 0..2 {
            for b in 0..2 {
                w_hat[(off + 2 * k + a, off + 2 * k + b)] = C64::new(g[a] * gc[b], 0.0);
            }
        }
    }
    let w = dec.to_ambient(&w_hat);
    let q_capped = dec.to_ambient(&q_hat);
    Ok(CappedPair {
        displacement: op_norm(&(&w - q)),
        bound: 2.0 * ((max_angle - cap) / 2.0).sin(),
        q_capped,
        w,
        capped: true,
        max_angle,
    })
}

/// `g(t) = w_t p w_t*` with `w_t = u((1 − t) + t z)` and
/// `z = qp + (1 − q)(1 − p)`. `g(0) = p` and `g(1) = q` are returned exactly.
pub fn projection_path_at(
    p: &ComplexMatrix,
    q: &ComplexMatrix,
    t: f64,
    cfg: &ToleranceConfig,
) -> Result<ComplexMatrix> {
    if t == 0.0 {
        return Ok(p.clone());
    }
    let n = p.rows();
    let id = ComplexMatrix::identity(n);
    let z = &q.matmul(p) + &(&id - q).matmul(&(&id - p));
    let m = &id.scale_real(1.0 - t) + &z.scale_real(t);
    let w = polar_pi(&BlockOperator::from(m), cfg)?.u.into_blocks().remove(0);
    let g = w.matmul(p).matmul(&w.adjoint()).hermitian_part();
    if t == 1.0 {
        let miss = op_norm(&(&g - q));
        if miss > cfg.iso_tol {
            return Err(Error::NotProjection { residual: miss });
        }
        return Ok(q.clone());
    }
    Ok(g)
}

/// Sampled projection path with its verification data.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProjectionPath {
    pub samples: Vec<(f64, ComplexMatrix)>,
    /// `max_t ‖g(t) − q‖`, required to stay below 1.
    pub max_distance_to_target: f64,
    pub max_step: f64,
    pub max_projection_residual: f64,
}

/// Uniformly sampled path of projections from `p` to `q` (`n_samples ≥ 2`).
pub fn projection_path(
    p: &ComplexMatrix,
    q: &ComplexMatrix,
    n_samples: usize,
    cfg: &ToleranceConfig,
) -> Result<ProjectionPath> {
    if n_samples < 2 {
        return Err(Error::InvalidArgument("a path needs at least 2 samples".into()));
    }
    if !p.is_square() || p.shape() != q.shape() {
        return Err(Error::ShapeMismatch("projection_path projections".into()));
    }
    require_projection(p, cfg)?;
    require_projection(q, cfg)?;
    let distance = op_norm(&(p - q));
    let limit = 1.0 - cfg.rank_tol;
    if distance >= limit {
        return Err(Error::TooFar { distance, limit });
    }
    let mut samples = Vec::with_capacity(n_samples);
    let mut max_distance_to_target: f64 = 0.0;
    let mut max_step: f64 = 0.0;
    let mut max_projection_residual: f64 = 0.0;
    for k in 0..n_samples {
        let t = if k == n_samples - 1 {
            1.0
        } else {
            k as f64 / (n_samples - 1) as f64
        };
        let g = projection_path_at(p, q, t, cfg)?;
        let residual = projection_residual(&g);
        if residual > cfg.iso_tol {
            return Err(Error::NotProjection { residual });
        }
        max_projection_residual = max_projection_residual.max(residual);
        let to_q = op_norm(&(&g - q));
        if to_q >= 1.0 {
            return Err(Error::TooFar {
                distance: to_q,
                limit: 1.0,
            });
        }
        max_distance_to_target = max_distance_to_target.max(to_q);
        if let Some((_, prev)) = samples.last() {
            let step = op_norm(&(&g - prev));
            if step > cfg.path_step_max {
                return Err(Error::StepTooLarge {
                    step,
                    max: cfg.path_step_max,
                });
            }
            max_step = max_step.max(step);
        }
        samples.push((t, g));
    }
    Ok(ProjectionPath {
        samples,
        max_distance_to_target,
        max_step,
        max_projection_residual,
    })
}

/// Rank-one projection onto `(cos θ, sin θ)` padded into dimension `n ≥ 2`.
pub fn angle_projection(theta: f64, n: usize) -> ComplexMatrix {
    let cell = cell_q(theta);
    ComplexMatrix::from_fn(n, n, |i, j| {
        if i < 2 && j < 2 {
            C64::new(cell[i][j], 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    })
}
