//! Block operators: elements of a finite direct sum of rectangular corners.
//!
//! A [`BlockOperator`] is a tuple of matrices `(a_1, …, a_k)` with `a_i` of
//! size `out_i × in_i`. Products, adjoints and norms act blockwise and the
//! norm is the maximum of the block norms. Extremality is read per corner:
//! a partial isometry is extremal iff no block carries both a left and a
//! right defect, i.e. every block is an isometry or a co-isometry.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{op_norm, svd, ComplexMatrix, ToleranceConfig, C64};
use crate::random::{gaussian_matrix, stream_rng};

/// Ordered `(out_dim, in_dim)` pairs, one per block.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BlockShape(Vec<(usize, usize)>);

impl BlockShape {
    pub fn new(blocks: Vec<(usize, usize)>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::InvalidArgument("block shape must be nonempty".into()));
        }
        if blocks.iter().any(|&(o, i)| o == 0 || i == 0) {
            return Err(Error::InvalidArgument("block dimensions must be at least 1".into()));
        }
        Ok(Self(blocks))
    }

    pub fn single(out_dim: usize, in_dim: usize) -> Result<Self> {
        Self::new(vec![(out_dim, in_dim)])
    }

    pub fn blocks(&self) -> &[(usize, usize)] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.iter().map(|&(o, i)| (i, o)).collect())
    }
}

/// Element of `⊕_i B(C^{in_i}, C^{out_i})`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BlockOperatorRepr")]
pub struct BlockOperator {
    blocks: Vec<ComplexMatrix>,
}

#[derive(Deserialize)]
struct BlockOperatorRepr {
    blocks: Vec<ComplexMatrix>,
}

impl TryFrom<BlockOperatorRepr> for BlockOperator {
    type Error = Error;

    fn try_from(r: BlockOperatorRepr) -> Result<Self> {
        BlockOperator::new(r.blocks)
    }
}

impl From<ComplexMatrix> for BlockOperator {
    fn from(m: ComplexMatrix) -> Self {
        Self { blocks: vec![m] }
    }
}

impl BlockOperator {
    pub fn new(blocks: Vec<ComplexMatrix>) -> Result<Self> {
        BlockShape::new(blocks.iter().map(|b| b.shape()).collect())?;
        Ok(Self { blocks })
    }

    pub fn zeros(shape: &BlockShape) -> Self {
        Self {
            blocks: shape
                .blocks()
                .iter()
                .map(|&(o, i)| ComplexMatrix::zeros(o, i))
                .collect(),
        }
    }

    /// Blockwise identities on the given (square) dimensions.
    pub fn identity(dims: &[usize]) -> Self {
        Self {
            blocks: dims.iter().map(|&n| ComplexMatrix::identity(n)).collect(),
        }
    }

    /// Unit of the right corner: identities of size `in_i`.
    pub fn right_unit(&self) -> Self {
        Self::identity(&self.blocks.iter().map(|b| b.cols()).collect::<Vec<_>>())
    }

    /// Unit of the left corner: identities of size `out_i`.
    pub fn left_unit(&self) -> Self {
        Self::identity(&self.blocks.iter().map(|b| b.rows()).collect::<Vec<_>>())
    }

    pub fn shape(&self) -> BlockShape {
        BlockShape(self.blocks.iter().map(|b| b.shape()).collect())
    }

    pub fn blocks(&self) -> &[ComplexMatrix] {
        &self.blocks
    }

    pub fn block(&self, i: usize) -> &ComplexMatrix {
        &self.blocks[i]
    }

    pub fn into_blocks(self) -> Vec<ComplexMatrix> {
        self.blocks
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn map(&self, f: impl FnMut(&ComplexMatrix) -> ComplexMatrix) -> Self {
        Self {
            blocks: self.blocks.iter().map(f).collect(),
        }
    }

    pub fn try_map(&self, f: impl FnMut(&ComplexMatrix) -> Result<ComplexMatrix>) -> Result<Self> {
        Ok(Self {
            blocks: self.blocks.iter().map(f).collect::<Result<_>>()?,
        })
    }

    fn zip_with(
        &self,
        other: &Self,
        mut f: impl FnMut(&ComplexMatrix, &ComplexMatrix) -> Result<ComplexMatrix>,
    ) -> Result<Self> {
        if self.blocks.len() != other.blocks.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} blocks vs {} blocks",
                self.blocks.len(),
                other.blocks.len()
            )));
        }
        Ok(Self {
            blocks: self
                .blocks
                .iter()
                .zip(&other.blocks)
                .map(|(a, b)| f(a, b))
                .collect::<Result<_>>()?,
        })
    }

    pub fn adjoint(&self) -> Self {
        self.map(ComplexMatrix::adjoint)
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a.try_mul(b))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| {
            a.check_same_shape(b)?;
            Ok(a + b)
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| {
            a.check_same_shape(b)?;
            Ok(a - b)
        })
    }

    pub fn scale(&self, s: C64) -> Self {
        self.map(|b| b.scale(s))
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.map(|b| b.scale_real(s))
    }

    /// `(1 − t)·self + t·other`.
    pub fn lerp(&self, other: &Self, t: f64) -> Result<Self> {
        self.zip_with(other, |a, b| {
            a.check_same_shape(b)?;
            Ok(&a.scale_real(1.0 - t) + &b.scale_real(t))
        })
    }

    /// C*-norm: maximum of the block operator norms.
    pub fn norm(&self) -> f64 {
        self.blocks.iter().map(op_norm).fold(0.0, f64::max)
    }

    /// `‖self − other‖`.
    pub fn distance(&self, other: &Self) -> Result<f64> {
        Ok(self.sub(other)?.norm())
    }

    /// `self* · self`.
    pub fn gram(&self) -> Self {
        self.map(|b| b.adjoint_mul(b))
    }

    /// `self · self*`.
    pub fn cogram(&self) -> Self {
        self.map(|b| b.matmul(&b.adjoint()))
    }

    pub fn max_abs(&self) -> f64 {
        self.blocks.iter().map(ComplexMatrix::max_abs).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.blocks.iter().all(ComplexMatrix::is_finite)
    }

    /// Direct sum of the block lists (concatenation of corners).
    pub fn concat(&self, other: &Self) -> Self {
        let mut blocks = self.blocks.clone();
        blocks.extend(other.blocks.iter().cloned());
        Self { blocks }
    }
}

/// Defect ranks of one block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockDefect {
    /// Rank of `1 − u u*`.
    pub left: usize,
    /// Rank of `1 − u* u`.
    pub right: usize,
}

impl BlockDefect {
    pub fn is_extremal(&self) -> bool {
        self.left == 0 || self.right == 0
    }
}

/// Per-block defect ranks. Its support (which blocks carry a left or a
/// right defect) stands in for the defect ideals of a direct sum.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DefectPattern(pub Vec<BlockDefect>);

impl DefectPattern {
    /// Pattern of an element of rank `ranks[i]` in each block.
    pub fn from_ranks(shape: &BlockShape, ranks: &[usize]) -> Self {
        Self(
            shape
                .blocks()
                .iter()
                .zip(ranks)
                .map(|(&(o, i), &r)| BlockDefect {
                    left: o - r,
                    right: i - r,
                })
                .collect(),
        )
    }

    pub fn blocks(&self) -> &[BlockDefect] {
        &self.0
    }

    /// `(has left defect, has right defect)` per block.
    pub fn support(&self) -> Vec<(bool, bool)> {
        self.0.iter().map(|d| (d.left > 0, d.right > 0)).collect()
    }

    pub fn is_extremal(&self) -> bool {
        self.0.iter().all(BlockDefect::is_extremal)
    }

    /// First block whose defect support differs, if any.
    pub fn first_support_difference(&self, other: &Self) -> Option<usize> {
        let (a, b) = (self.support(), other.support());
        if a.len() != b.len() {
            return Some(a.len().min(b.len()));
        }
        a.iter().zip(&b).position(|(x, y)| x != y)
    }
}

/// Outcome of the partial-isometry test `‖w w* w − w‖ ≤ iso_tol`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IsometryCheck {
    pub is_partial_isometry: bool,
    pub residual: f64,
}

pub fn partial_isometry_residual(w: &BlockOperator) -> f64 {
    w.blocks()
        .iter()
        .map(|b| op_norm(&(&b.matmul(&b.adjoint_mul(b)) - b)))
        .fold(0.0, f64::max)
}

pub fn is_partial_isometry(w: &BlockOperator, cfg: &ToleranceConfig) -> IsometryCheck {
    let residual = partial_isometry_residual(w);
    IsometryCheck {
        is_partial_isometry: residual <= cfg.iso_tol,
        residual,
    }
}

fn require_partial_isometry(w: &BlockOperator, cfg: &ToleranceConfig) -> Result<()> {
    let check = is_partial_isometry(w, cfg);
    if !check.is_partial_isometry {
        return Err(Error::NotPartialIsometry {
            residual: check.residual,
        });
    }
    Ok(())
}

/// Blockwise ranks of a partial isometry, read off `tr(w* w)`.
pub fn partial_isometry_ranks(w: &BlockOperator) -> Vec<usize> {
    w.blocks()
        .iter()
        .map(|b| b.frobenius_norm().powi(2).round() as usize)
        .collect()
}

/// Defect pattern of a partial isometry.
pub fn defect_pattern(w: &BlockOperator, cfg: &ToleranceConfig) -> Result<DefectPattern> {
    require_partial_isometry(w, cfg)?;
    Ok(DefectPattern::from_ranks(&w.shape(), &partial_isometry_ranks(w)))
}

/// Left and right defect projections `(1 − w w*, 1 − w* w)`.
pub fn defect_projections(
    w: &BlockOperator,
    cfg: &ToleranceConfig,
) -> Result<(BlockOperator, BlockOperator)> {
    require_partial_isometry(w, cfg)?;
    let p0 = w.left_unit().sub(&w.cogram())?;
    let q0 = w.right_unit().sub(&w.gram())?;
    Ok((p0, q0))
}

/// Extremality in the block model: no block has both defects.
pub fn is_extremal(w: &BlockOperator, cfg: &ToleranceConfig) -> Result<bool> {
    Ok(defect_pattern(w, cfg)?.is_extremal())
}

/// Errors unless `w` is an extremal partial isometry.
pub fn require_extremal(w: &BlockOperator, cfg: &ToleranceConfig) -> Result<()> {
    let pattern = defect_pattern(w, cfg)?;
    match pattern.blocks().iter().position(|d| !d.is_extremal()) {
        Some(block) => Err(Error::NotExtremal { block }),
        None => Ok(()),
    }
}

fn check_ranks(shape: &BlockShape, ranks: &[usize]) -> Result<()> {
    if ranks.len() != shape.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} ranks for {} blocks",
            ranks.len(),
            shape.len()
        )));
    }
    for (block, (&(o, i), &r)) in shape.blocks().iter().zip(ranks).enumerate() {
        if r > o.min(i) {
            return Err(Error::RankTooLarge {
                block,
                rank: r,
                max: o.min(i),
            });
        }
    }
    Ok(())
}

/// Random element `L_r diag(σ) R_r*` with prescribed block ranks and
/// singular values drawn uniformly from `sigma_range`.
pub fn random_operator_with<R: Rng + ?Sized>(
    rng: &mut R,
    shape: &BlockShape,
    ranks: &[usize],
    sigma_range: (f64, f64),
) -> Result<BlockOperator> {
    check_ranks(shape, ranks)?;
    let cfg = ToleranceConfig::default();
    let mut blocks = Vec::with_capacity(shape.len());
    for (&(o, i), &r) in shape.blocks().iter().zip(ranks) {
        let g = gaussian_matrix(rng, o, i);
        let s = svd(&g, &cfg)?;
        let mut out = ComplexMatrix::zeros(o, i);
        for k in 0..r {
            let sigma = if sigma_range.0 == sigma_range.1 {
                sigma_range.0
            } else {
                rng.random_range(sigma_range.0..sigma_range.1)
            };
            let l = s.left.col(k);
            let rr = s.right.col(k);
            out = &out + &ComplexMatrix::rank_one(&l, &rr).scale_real(sigma);
        }
        blocks.push(out);
    }
    BlockOperator::new(blocks)
}

/// Random partial isometry with exactly `ranks[i]` in block `i`: the polar
/// factor `L_r R_r*` of a rank-truncated Gaussian matrix.
pub fn random_partial_isometry_with<R: Rng + ?Sized>(
    rng: &mut R,
    shape: &BlockShape,
    ranks: &[usize],
) -> Result<BlockOperator> {
    random_operator_with(rng, shape, ranks, (1.0, 1.0))
}

/// Seeded variant of [`random_partial_isometry_with`].
pub fn random_partial_isometry(shape: &BlockShape, ranks: &[usize], seed: u64) -> Result<BlockOperator> {
    random_partial_isometry_with(&mut stream_rng(seed, 0), shape, ranks)
}

pub fn full_ranks(shape: &BlockShape) -> Vec<usize> {
    shape.blocks().iter().map(|&(o, i)| o.min(i)).collect()
}

/// Random extremal partial isometry: full rank in every block, hence an
/// isometry, co-isometry or unitary per block.
pub fn random_extremal_with<R: Rng + ?Sized>(rng: &mut R, shape: &BlockShape) -> BlockOperator {
    random_partial_isometry_with(rng, shape, &full_ranks(shape))
        .expect("full ranks are always admissible")
}

pub fn random_extremal(shape: &BlockShape, seed: u64) -> BlockOperator {
    random_extremal_with(&mut stream_rng(seed, 0), shape)
}
