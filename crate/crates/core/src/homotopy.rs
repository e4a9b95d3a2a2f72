//! Certified paths of partial isometries.
//!
//! Two constructions are provided:
//!
//! - [`path_thm4`] for partial isometries with `‖u − v‖ < 1`. Stage one
//!   freezes the right support `p = u*u` and follows `s ↦ u(((1−s)u + sv)·p)`
//!   from `u` to `w = u(vp)`. Stage two rotates the right support along a
//!   projection path `g(s)` from `p` to `q = v*v` and follows `s ↦ u(v·g(s))`
//!   from `w` to `v`.
//! - [`path_thm5`] for extremal partial isometries with `‖u − v‖ < 2`:
//!   `s ↦ u((1−s)u + sv)`. Along the segment every singular value stays at
//!   least `1 − ‖u − v‖/2`, so the polar factor is continuous and extremal.
//!
//! Sampling starts from a uniform grid and bisects every interval whose
//! step exceeds `path_step_max`, for at most [`MAX_REFINEMENTS`] rounds.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::{
    defect_pattern, is_partial_isometry, partial_isometry_ranks, require_extremal, BlockOperator,
    DefectPattern,
};
use crate::numerics::{op_norm, ToleranceConfig};
use crate::polar::polar_pi;
use crate::projection_geometry::projection_path_at;

pub const MAX_REFINEMENTS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Construction {
    /// Right-support freeze followed by a projection path on the right support.
    SupportFreezeThenRotate,
    /// Polar factor of the straight segment between extremal endpoints.
    ExtremalSegment,
    /// Path read from a file or assembled by hand.
    External,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PathSample {
    pub t: f64,
    pub operator: BlockOperator,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IsometryPath {
    pub construction: Construction,
    pub samples: Vec<PathSample>,
    /// Smallest spectral gap of the operators whose polar factors form the
    /// path. Only known for constructed paths.
    pub min_segment_gap: Option<f64>,
}

impl IsometryPath {
    pub fn first(&self) -> Option<&BlockOperator> {
        self.samples.first().map(|s| &s.operator)
    }

    pub fn last(&self) -> Option<&BlockOperator> {
        self.samples.last().map(|s| &s.operator)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

struct Sampled {
    t: f64,
    w: BlockOperator,
    gap: f64,
}

/// Samples `eval` on `[0, 1]`, refining until every step is at most
/// `path_step_max`.
fn sample_adaptive(
    eval: &dyn Fn(f64) -> Result<(BlockOperator, f64)>,
    resolution: usize,
    cfg: &ToleranceConfig,
) -> Result<Vec<Sampled>> {
    let n = resolution.max(2);
    let mut samples = (0..n)
        .map(|k| {
            let t = if k == n - 1 { 1.0 } else { k as f64 / (n - 1) as f64 };
            eval(t).map(|(w, gap)| Sampled { t, w, gap })
        })
        .collect::<Result<Vec<_>>>()?;

    for round in 0..=MAX_REFINEMENTS {
        let mut worst: f64 = 0.0;
        let mut refined = Vec::with_capacity(samples.len() * 2);
        let mut changed = false;
        let mut iter = samples.into_iter().peekable();
        while let Some(cur) = iter.next() {
            let next_t = iter.peek().map(|nx| (nx.t, cur.w.distance(&nx.w)));
            let split = match next_t {
                Some((nt, step)) => {
                    let step = step?;
                    worst = worst.max(step);
                    (step > cfg.path_step_max).then_some(0.5 * (cur.t + nt))
                }
                None => None,
            };
            refined.push(cur);
            if let Some(mid) = split {
                if round < MAX_REFINEMENTS {
                    let (w, gap) = eval(mid)?;
                    refined.push(Sampled { t: mid, w, gap });
                    changed = true;
                }
            }
        }
        samples = refined;
        if !changed {
            if worst > cfg.path_step_max {
                return Err(Error::StepTooLarge {
                    step: worst,
                    max: cfg.path_step_max,
                });
            }
            return Ok(samples);
        }
    }
    unreachable!("last refinement round never inserts samples")
}

fn require_same_shape(u: &BlockOperator, v: &BlockOperator) -> Result<()> {
    if u.shape() != v.shape() {
        return Err(Error::ShapeMismatch("path endpoints have different shapes".into()));
    }
    Ok(())
}

fn require_pi(w: &BlockOperator, cfg: &ToleranceConfig) -> Result<()> {
    let c = is_partial_isometry(w, cfg);
    if !c.is_partial_isometry {
        return Err(Error::NotPartialIsometry { residual: c.residual });
    }
    Ok(())
}

/// Polar factor of `a` with its gap, checked to have the expected ranks.
fn polar_with_ranks(
    a: &BlockOperator,
    ranks: &[usize],
    cfg: &ToleranceConfig,
) -> Result<(BlockOperator, f64)> {
    let pd = polar_pi(a, cfg)?;
    if pd.ranks != ranks {
        return Err(Error::IllConditioned {
            value: pd.gap,
            cutoff: cfg.rank_tol * a.norm(),
        });
    }
    Ok((pd.u, pd.gap))
}

/// Homotopy through partial isometries between `u` and `v` with `‖u − v‖ < 1`.
pub fn path_thm4(
    u: &BlockOperator,
    v: &BlockOperator,
    resolution: usize,
    cfg: &ToleranceConfig,
) -> Result<IsometryPath> {
    require_same_shape(u, v)?;
    require_pi(u, cfg)?;
    require_pi(v, cfg)?;
    let distance = u.distance(v)?;
    let limit = 1.0 - cfg.rank_tol;
    if distance >= limit {
        return Err(Error::TooFar { distance, limit });
    }
    let ranks = partial_isometry_ranks(u);
    let p = u.gram();
    let q = v.gram();

    let stage1 = |s: f64| -> Result<(BlockOperator, f64)> {
        let a = u.lerp(v, s)?.mul(&p)?;
        let (w, gap) = polar_with_ranks(&a, &ranks, cfg)?;
        Ok((if s == 0.0 { u.clone() } else { w }, gap))
    };
    let stage2 = |s: f64| -> Result<(BlockOperator, f64)> {
        let g = BlockOperator::new(
            p.blocks()
                .iter()
                .zip(q.blocks())
                .map(|(pb, qb)| {
                    let g = projection_path_at(pb, qb, s, cfg)?;
                    let to_q = op_norm(&(&g - qb));
                    if to_q >= 1.0 {
                        return Err(Error::TooFar {
                            distance: to_q,
                            limit: 1.0,
                        });
                    }
                    Ok(g)
                })
                .collect::<Result<Vec<_>>>()?,
        )?;
        let (w, gap) = polar_with_ranks(&v.mul(&g)?, &ranks, cfg)?;
        Ok((if s == 1.0 { v.clone() } else { w }, gap))
    };

    let first = sample_adaptive(&stage1, resolution, cfg)?;
    let second = sample_adaptive(&stage2, resolution, cfg)?;
    let min_gap = first
        .iter()
        .chain(&second)
        .map(|s| s.gap)
        .fold(f64::INFINITY, f64::min);

    let mut samples: Vec<PathSample> = first
        .into_iter()
        .map(|s| PathSample {
            t: 0.5 * s.t,
            operator: s.w,
        })
        .collect();
    // Both stages share w = u(vp): stage two starts where stage one ends.
    samples.extend(second.into_iter().skip(1).map(|s| PathSample {
        t: 0.5 + 0.5 * s.t,
        operator: s.w,
    }));
    Ok(IsometryPath {
        construction: Construction::SupportFreezeThenRotate,
        samples,
        min_segment_gap: Some(min_gap),
    })
}

/// Extremal homotopy between extremal `u` and `v` with `‖u − v‖ < 2`.
pub fn path_thm5(
    u: &BlockOperator,
    v: &BlockOperator,
    resolution: usize,
    cfg: &ToleranceConfig,
) -> Result<IsometryPath> {
    require_same_shape(u, v)?;
    require_extremal(u, cfg)?;
    require_extremal(v, cfg)?;
    let distance = u.distance(v)?;
    let limit = 2.0 - cfg.rank_tol;
    if distance >= limit {
        return Err(Error::TooFar { distance, limit });
    }
    let pu = defect_pattern(u, cfg)?;
    let pv = defect_pattern(v, cfg)?;
    if let Some(block) = pattern_conflict(&pu, &pv) {
        return Err(Error::PatternConflict { block });
    }
    let ranks = partial_isometry_ranks(u);

    let segment = |s: f64| -> Result<(BlockOperator, f64)> {
        let a = u.lerp(v, s)?;
        let (w, gap) = polar_with_ranks(&a, &ranks, cfg)?;
        let w = if s == 0.0 {
            u.clone()
        } else if s == 1.0 {
            v.clone()
        } else {
            w
        };
        Ok((w, gap))
    };
    let sampled = sample_adaptive(&segment, resolution, cfg)?;
    let min_gap = sampled.iter().map(|s| s.gap).fold(f64::INFINITY, f64::min);
    Ok(IsometryPath {
        construction: Construction::ExtremalSegment,
        samples: sampled
            .into_iter()
            .map(|s| PathSample { t: s.t, operator: s.w })
            .collect(),
        min_segment_gap: Some(min_gap),
    })
}

/// First block where one operator has only a left defect and the other only
/// a right defect (the block form of `I₁J₂ ≠ {0}` or `I₂J₁ ≠ {0}`).
pub fn pattern_conflict(a: &DefectPattern, b: &DefectPattern) -> Option<usize> {
    a.support()
        .iter()
        .zip(b.support())
        .position(|(&(al, ar), (bl, br))| (al && !ar && br && !bl) || (ar && !al && bl && !br))
}

/// Recomputed verification data for a path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathCertificate {
    pub all_partial_isometries: bool,
    pub max_residual: f64,
    pub max_step: f64,
    /// t strictly increasing from exactly 0 to exactly 1.
    pub t_grid_valid: bool,
    /// `None` when no endpoints were supplied.
    pub endpoints_match: Option<bool>,
    pub endpoint_distance: Option<f64>,
    /// `None` unless extremality was demanded.
    pub all_extremal: Option<bool>,
    /// Blockwise rank of `w* w` is the same at every sample.
    pub rank_constant: bool,
    /// Endpoint defect patterns coincide.
    pub endpoint_patterns_equal: bool,
    pub min_segment_gap: Option<f64>,
    pub samples: usize,
    pub passes: bool,
}

/// Recomputes every certificate field from the samples. Per-sample checks
/// run in parallel; aggregation is order-independent.
pub fn verify_path(
    path: &IsometryPath,
    endpoints: Option<(&BlockOperator, &BlockOperator)>,
    require_extremal: bool,
    cfg: &ToleranceConfig,
) -> PathCertificate {
    struct Local {
        residual: f64,
        ranks: Vec<usize>,
        pattern: DefectPattern,
    }
    let locals: Vec<Local> = path
        .samples
        .par_iter()
        .map(|s| {
            let residual = is_partial_isometry(&s.operator, cfg).residual;
            let ranks = partial_isometry_ranks(&s.operator);
            let pattern = DefectPattern::from_ranks(&s.operator.shape(), &ranks);
            Local {
                residual,
                ranks,
                pattern,
            }
        })
        .collect();

    let max_residual = locals.iter().map(|l| l.residual).fold(0.0, f64::max);
    let all_partial_isometries =
        !locals.is_empty() && locals.iter().all(|l| l.residual <= cfg.iso_tol);
    let max_step = path
        .samples
        .windows(2)
        .map(|w| w[0].operator.distance(&w[1].operator).unwrap_or(f64::INFINITY))
        .fold(0.0, f64::max);
    let t_grid_valid = path.samples.first().is_some_and(|s| s.t == 0.0)
        && path.samples.last().is_some_and(|s| s.t == 1.0)
        && path.samples.windows(2).all(|w| w[0].t < w[1].t);
    let rank_constant = locals.windows(2).all(|w| w[0].ranks == w[1].ranks);
    let endpoint_patterns_equal = match (locals.first(), locals.last()) {
        (Some(a), Some(b)) => a.pattern == b.pattern,
        _ => false,
    };
    let all_extremal = require_extremal.then(|| {
        all_partial_isometries && locals.iter().all(|l| l.pattern.is_extremal())
    });
    let endpoint_distance = endpoints.and_then(|(u, v)| {
        let (a, b) = (path.first()?, path.last()?);
        Some(a.distance(u).ok()?.max(b.distance(v).ok()?))
    });
    let endpoints_match = endpoints.map(|_| endpoint_distance.is_some_and(|d| d <= cfg.iso_tol));

    let passes = all_partial_isometries
        && t_grid_valid
        && max_step <= cfg.path_step_max
        && endpoints_match.unwrap_or(true)
        && all_extremal.unwrap_or(true);
    PathCertificate {
        all_partial_isometries,
        max_residual,
        max_step,
        t_grid_valid,
        endpoints_match,
        endpoint_distance,
        all_extremal,
        rank_constant,
        endpoint_patterns_equal,
        min_segment_gap: path.min_segment_gap,
        samples: path.samples.len(),
        passes,
    }
}

/// Obstruction to a homotopy between two partial isometries.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum HomotopyObstruction {
    /// `rank(w* w)` is a continuous integer along any path of partial
    /// isometries, so differing block ranks rule out a homotopy.
    RankMismatch {
        block: usize,
        rank_u: usize,
        rank_v: usize,
    },
    /// Extremal endpoints with different defect supports cannot be joined
    /// through extremal partial isometries.
    PatternMismatch { block: usize },
    /// No obstruction found. This is not a proof that a homotopy exists.
    NoObstruction,
}

/// Classifies a pair from its block ranks and, for extremal pairs, its
/// defect patterns.
pub fn classify_obstruction(
    ranks_u: &[usize],
    ranks_v: &[usize],
    extremal_patterns: Option<(&DefectPattern, &DefectPattern)>,
) -> HomotopyObstruction {
    if let Some(block) = ranks_u.iter().zip(ranks_v).position(|(a, b)| a != b) {
        return HomotopyObstruction::RankMismatch {
            block,
            rank_u: ranks_u[block],
            rank_v: ranks_v[block],
        };
    }
    if let Some((pu, pv)) = extremal_patterns {
        if let Some(block) = pu.first_support_difference(pv) {
            return HomotopyObstruction::PatternMismatch { block };
        }
    }
    HomotopyObstruction::NoObstruction
}

pub fn non_homotopy_certificate(
    u: &BlockOperator,
    v: &BlockOperator,
    cfg: &ToleranceConfig,
) -> Result<HomotopyObstruction> {
    require_same_shape(u, v)?;
    let pu = defect_pattern(u, cfg)?;
    let pv = defect_pattern(v, cfg)?;
    let ranks_u = partial_isometry_ranks(u);
    let ranks_v = partial_isometry_ranks(v);
    let extremal = (pu.is_extremal() && pv.is_extremal()).then_some((&pu, &pv));
    Ok(classify_obstruction(&ranks_u, &ranks_v, extremal))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{ComplexMatrix, C64};
    use crate::operators::BlockDefect;
    use crate::projection_geometry::angle_projection;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    fn cfg() -> ToleranceConfig {
        ToleranceConfig::default()
    }

    fn op(rows: &[&[f64]]) -> BlockOperator {
        ComplexMatrix::from_real_rows(rows).into()
    }

    #[test]
    fn equal_endpoints_give_constant_path() {
        let u = op(&[&[1.0, 0.0], &[0.0, 0.0]]);
        let path = path_thm4(&u, &u, 8, &cfg()).unwrap();
        let cert = verify_path(&path, Some((&u, &u)), false, &cfg());
        assert!(cert.passes);
        assert!(cert.max_step < 1e-14);
        assert_eq!(cert.endpoint_distance, Some(0.0));
    }

    #[test]
    fn thm4_projection_pair() {
        let u = op(&[&[1.0, 0.0], &[0.0, 0.0]]);
        let v: BlockOperator = angle_projection(FRAC_PI_4, 2).into();
        assert!((u.distance(&v).unwrap() - FRAC_PI_4.sin()).abs() < 1e-14);
        let path = path_thm4(&u, &v, 8, &cfg()).unwrap();
        assert_eq!(path.first(), Some(&u));
        assert_eq!(path.last(), Some(&v));
        let cert = verify_path(&path, Some((&u, &v)), false, &cfg());
        assert!(cert.passes, "{cert:?}");
        assert!(cert.rank_constant);
    }

    #[test]
    fn thm4_rejects_zero_versus_rank_one() {
        let u = op(&[&[0.0, 0.0], &[0.0, 0.0]]);
        let v = op(&[&[1.0, 0.0], &[0.0, 0.0]]);
        assert!(matches!(path_thm4(&u, &v, 8, &cfg()), Err(Error::TooFar { .. })));
    }

    #[test]
    fn thm5_unitary_phase_path() {
        let alpha = FRAC_PI_2;
        let u: BlockOperator = ComplexMatrix::identity(2).into();
        let mut vm = ComplexMatrix::identity(2);
        vm[(1, 1)] = C64::from_polar(1.0, alpha);
        let v: BlockOperator = vm.into();
        assert!((u.distance(&v).unwrap() - 2f64.sqrt()).abs() < 1e-14);
        let path = path_thm5(&u, &v, 8, &cfg()).unwrap();
        for s in &path.samples {
            let z = C64::new(1.0 - s.t, 0.0) + C64::from_polar(s.t, alpha);
            let mut expected = ComplexMatrix::identity(2);
            expected[(1, 1)] = z / z.norm();
            assert!(op_norm(&(s.operator.block(0) - &expected)) < 1e-12);
        }
        let cert = verify_path(&path, Some((&u, &v)), true, &cfg());
        assert!(cert.passes && cert.all_extremal == Some(true));
    }

    #[test]
    fn thm5_coisometry_beyond_extremal_bound_range() {
        let theta = 2.0 * std::f64::consts::FRAC_PI_3;
        let u = op(&[&[1.0, 0.0]]);
        let v = op(&[&[theta.cos(), theta.sin()]]);
        let d = u.distance(&v).unwrap();
        assert!((d - 3f64.sqrt()).abs() < 1e-14);
        let path = path_thm5(&u, &v, 8, &cfg()).unwrap();
        let gap = path.min_segment_gap.unwrap();
        assert!(gap >= 1.0 - d / 2.0 - 1e-9);
        // the segment midpoint has norm cos(θ/2) = 1/2
        assert!((gap - 0.5).abs() < 1e-12);
        let cert = verify_path(&path, Some((&u, &v)), true, &cfg());
        assert!(cert.passes && cert.endpoint_patterns_equal);
    }

    #[test]
    fn thm5_rejects_antipodal_pair() {
        let u = op(&[&[1.0, 0.0]]);
        let v = op(&[&[-1.0, 0.0]]);
        assert!(matches!(path_thm5(&u, &v, 8, &cfg()), Err(Error::TooFar { .. })));
        let w = op(&[&[1.0, 0.0], &[0.0, 0.0]]);
        assert!(matches!(path_thm5(&w, &w, 8, &cfg()), Err(Error::NotExtremal { .. })));
    }

    #[test]
    fn corrupted_sample_is_caught() {
        let u = op(&[&[1.0, 0.0], &[0.0, 0.0]]);
        let v: BlockOperator = angle_projection(0.3, 2).into();
        let mut path = path_thm4(&u, &v, 8, &cfg()).unwrap();
        let mid = path.samples.len() / 2;
        let mut blocks = path.samples[mid].operator.clone().into_blocks();
        blocks[0][(0, 1)] += C64::new(0.5, 0.0);
        path.samples[mid].operator = BlockOperator::new(blocks).unwrap();
        let cert = verify_path(&path, Some((&u, &v)), false, &cfg());
        assert!(!cert.all_partial_isometries);
        assert!(!cert.passes);
    }

    #[test]
    fn constant_external_path() {
        let u = op(&[&[0.0, 1.0], &[0.0, 0.0]]);
        let path = IsometryPath {
            construction: Construction::External,
            samples: vec![
                PathSample { t: 0.0, operator: u.clone() },
                PathSample { t: 1.0, operator: u.clone() },
            ],
            min_segment_gap: None,
        };
        let cert = verify_path(&path, None, false, &cfg());
        assert!(cert.passes);
        assert_eq!(cert.max_step, 0.0);
        assert_eq!(cert.endpoints_match, None);
    }

    #[test]
    fn obstructions() {
        let zero = op(&[&[0.0, 0.0], &[0.0, 0.0]]);
        let e = op(&[&[1.0, 0.0], &[0.0, 0.0]]);
        assert_eq!(
            non_homotopy_certificate(&zero, &e, &cfg()).unwrap(),
            HomotopyObstruction::RankMismatch { block: 0, rank_u: 0, rank_v: 1 }
        );
        assert_eq!(
            non_homotopy_certificate(&e, &e, &cfg()).unwrap(),
            HomotopyObstruction::NoObstruction
        );
        // Equal ranks with swapped defect sides, built directly as patterns.
        let iso = DefectPattern(vec![BlockDefect { left: 1, right: 0 }]);
        let coiso = DefectPattern(vec![BlockDefect { left: 0, right: 1 }]);
        assert_eq!(
            classify_obstruction(&[2], &[2], Some((&iso, &coiso))),
            HomotopyObstruction::PatternMismatch { block: 0 }
        );
        assert_eq!(pattern_conflict(&iso, &coiso), Some(0));
        assert_eq!(pattern_conflict(&iso, &iso), None);
    }
}
