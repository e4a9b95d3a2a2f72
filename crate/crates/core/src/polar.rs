//! Canonical polar decomposition `a = u(a)·|a|`, spectral gaps, and the
//! relative-inverse and left-support alignment used to analyse continuity
//! of `a ↦ u(a)`.
//!
//! Numerical rank is decided against the relative cutoff
//! `rank_tol · σ_max`, where `σ_max` is the norm of the whole block
//! operator. A singular value inside the guard band
//! `(cutoff / 10, cutoff · 10)` makes the rank ambiguous and is reported as
//! [`Error::IllConditioned`] instead of being silently rounded.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{svd, ComplexMatrix, Svd, ToleranceConfig};
use crate::operators::{BlockOperator, DefectPattern};
use crate::projection_geometry::{projection_residual, range_basis};

/// Result of [`polar_pi`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolarData {
    /// The partial isometry `u(a)`.
    pub u: BlockOperator,
    /// `|a| = (a* a)^{1/2}`, truncated at the rank cutoff.
    pub modulus: BlockOperator,
    /// `u u*`.
    pub left_support: BlockOperator,
    /// `u* u`.
    pub right_support: BlockOperator,
    /// Smallest singular value above the cutoff; 0 for `a = 0`.
    pub gap: f64,
    pub ranks: Vec<usize>,
}

impl PolarData {
    pub fn defect_pattern(&self) -> DefectPattern {
        DefectPattern::from_ranks(&self.u.shape(), &self.ranks)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralGap {
    pub gap: f64,
    pub ranks: Vec<usize>,
}

struct RankedSvds {
    svds: Vec<Svd>,
    ranks: Vec<usize>,
    gap: f64,
}

fn ranked_svds(a: &BlockOperator, cfg: &ToleranceConfig) -> Result<RankedSvds> {
    let svds = a
        .blocks()
        .iter()
        .map(|b| svd(b, cfg))
        .collect::<Result<Vec<_>>>()?;
    let smax = svds.iter().map(Svd::max).fold(0.0, f64::max);
    let cutoff = cfg.rank_tol * smax;
    let mut gap = f64::INFINITY;
    let mut ranks = Vec::with_capacity(svds.len());
    for s in &svds {
        let mut r = 0;
        for &sigma in &s.singulars {
            if sigma > cutoff / 10.0 && sigma < cutoff * 10.0 {
                return Err(Error::IllConditioned { value: sigma, cutoff });
            }
            if sigma > cutoff {
                r += 1;
                gap = gap.min(sigma);
            }
        }
        ranks.push(r);
    }
    if !gap.is_finite() {
        gap = 0.0;
    }
    Ok(RankedSvds { svds, ranks, gap })
}

/// Smallest nonzero singular value and blockwise numerical ranks. The
/// spectrum of `|a|` omits `(0, gap)`.
pub fn spectral_gap(a: &BlockOperator, cfg: &ToleranceConfig) -> Result<SpectralGap> {
    let r = ranked_svds(a, cfg)?;
    Ok(SpectralGap {
        gap: r.gap,
        ranks: r.ranks,
    })
}

/// Canonical polar decomposition. `u(0) = 0`.
pub fn polar_pi(a: &BlockOperator, cfg: &ToleranceConfig) -> Result<PolarData> {
    let RankedSvds { svds, ranks, gap } = ranked_svds(a, cfg)?;
    let mut u_blocks = Vec::with_capacity(svds.len());
    let mut mod_blocks = Vec::with_capacity(svds.len());
    for (s, &r) in svds.iter().zip(&ranks) {
        let idx: Vec<usize> = (0..r).collect();
        let l = s.left.select_cols(&idx);
        let rt = s.right.select_cols(&idx);
        u_blocks.push(l.matmul(&rt.adjoint()));
        let scaled = ComplexMatrix::from_fn(rt.rows(), r, |i, j| rt[(i, j)] * s.singulars[j]);
        mod_blocks.push(scaled.matmul(&rt.adjoint()));
    }
    let u = BlockOperator::new(u_blocks)?;
    let modulus = BlockOperator::new(mod_blocks)?;
    Ok(PolarData {
        left_support: u.cogram(),
        right_support: u.gram(),
        u,
        modulus,
        gap,
        ranks,
    })
}

/// Shorthand for `polar_pi(a).u`.
pub fn polar_u(a: &BlockOperator, cfg: &ToleranceConfig) -> Result<BlockOperator> {
    Ok(polar_pi(a, cfg)?.u)
}

/// `L_r R_r*` per block, keeping the top `ranks[i]` singular pairs of block
/// `i` whatever their size. This is the nearest partial isometry of the
/// given ranks when the kept singular values are nonzero.
pub fn truncated_polar(a: &BlockOperator, ranks: &[usize], cfg: &ToleranceConfig) -> Result<BlockOperator> {
    if ranks.len() != a.num_blocks() {
        return Err(Error::ShapeMismatch(format!(
            "{} ranks for {} blocks",
            ranks.len(),
            a.num_blocks()
        )));
    }
    let blocks = a
        .blocks()
        .iter()
        .zip(ranks)
        .enumerate()
        .map(|(block, (m, &r))| {
            let max = m.rows().min(m.cols());
            if r > max {
                return Err(Error::RankTooLarge { block, rank: r, max });
            }
            let s = svd(m, cfg)?;
            let idx: Vec<usize> = (0..r).collect();
            Ok(s.left.select_cols(&idx).matmul(&s.right.select_cols(&idx).adjoint()))
        })
        .collect::<Result<Vec<_>>>()?;
    BlockOperator::new(blocks)
}

/// The unique `s` with `s = q s p`, `s a q = q` and `p a s = p`.
///
/// Computed blockwise as the inverse of the compressed corner
/// `P* a Q : ran q → ran p`, re-embedded through the range bases.
pub fn relative_inverse(
    a: &BlockOperator,
    p: &BlockOperator,
    q: &BlockOperator,
    cfg: &ToleranceConfig,
) -> Result<BlockOperator> {
    if p.num_blocks() != a.num_blocks() || q.num_blocks() != a.num_blocks() {
        return Err(Error::ShapeMismatch("relative_inverse block counts".into()));
    }
    let scale = a.norm().max(f64::MIN_POSITIVE);
    let mut blocks = Vec::with_capacity(a.num_blocks());
    for (block, ((ab, pb), qb)) in a.blocks().iter().zip(p.blocks()).zip(q.blocks()).enumerate() {
        if pb.shape() != (ab.rows(), ab.rows()) || qb.shape() != (ab.cols(), ab.cols()) {
            return Err(Error::ShapeMismatch(format!("projection shapes in block {block}")));
        }
        for proj in [pb, qb] {
            let residual = projection_residual(proj);
            if residual > cfg.iso_tol {
                return Err(Error::NotProjection { residual });
            }
        }
        let pr = range_basis(pb, cfg)?;
        let qr = range_basis(qb, cfg)?;
        if pr.cols() != qr.cols() {
            return Err(Error::CornerSingular { block });
        }
        let k = pr.cols();
        if k == 0 {
            blocks.push(ComplexMatrix::zeros(ab.cols(), ab.rows()));
            continue;
        }
        let corner = pr.adjoint_mul(&ab.matmul(&qr));
        let s = svd(&corner, cfg)?;
        let smin = s.singulars[k - 1];
        if smin <= cfg.rank_tol * scale {
            return Err(Error::CornerSingular { block });
        }
        // corner⁻¹ = R Σ⁻¹ L*
        let r_scaled = ComplexMatrix::from_fn(k, k, |i, j| s.right[(i, j)] / s.singulars[j]);
        let inv = r_scaled.matmul(&s.left.adjoint());
        blocks.push(qr.matmul(&inv).matmul(&pr.adjoint()));
    }
    BlockOperator::new(blocks)
}

/// Result of [`align_left_support`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Alignment {
    /// `b = (1 − p0·a_n·s)·a_n`.
    pub b: BlockOperator,
    /// `‖(p0·a_n·s)²‖`.
    pub nilpotency_residual: f64,
    /// `‖b − a_n‖`.
    pub displacement: f64,
    /// `‖p0·a_n‖·‖s‖·‖a_n‖`.
    pub displacement_bound: f64,
}

/// Strips the `p0`-component from the left of `a_n` by the nilpotent
/// correction `b = (1 − p0 a_n s) a_n`. Requires `s = q s p` with `p ⟂ p0`.
pub fn align_left_support(
    a_n: &BlockOperator,
    p0: &BlockOperator,
    s: &BlockOperator,
) -> Result<Alignment> {
    let p0a = p0.mul(a_n)?;
    let nil = p0a.mul(s)?;
    let nilpotency_residual = nil.mul(&nil)?.norm();
    let n = nil.norm();
    if nilpotency_residual > 1e-10 * n.powi(2).max(1.0) {
        return Err(Error::NotNilpotent {
            residual: nilpotency_residual,
        });
    }
    let factor = a_n.left_unit().sub(&nil)?;
    let b = factor.mul(a_n)?;
    Ok(Alignment {
        displacement: b.distance(a_n)?,
        displacement_bound: p0a.norm() * s.norm() * a_n.norm(),
        nilpotency_residual,
        b,
    })
}
