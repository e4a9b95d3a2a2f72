//! Continuity points of the polar map `a ↦ u(a)`.
//!
//! In finite dimensions every operator has closed range, so the criterion
//! "0 is the only closed range element of `p₀ A q₀`" becomes the algebraic
//! condition `p₀ A q₀ = {0}`: in every block, the left defect `p₀ = 1 − uu*`
//! or the right defect `q₀ = 1 − u*u` of `a` vanishes. When it fails, any
//! nonzero `b = p₀ b q₀` is a witness: `u(a + tb) = u(a) + u(b)` for every
//! `t > 0`, so `u(a + tb)` stays at distance 1 from `u(a)`.
//!
//! The experiments here are sampled; verdicts hold at the sampled scale only.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{vec_norm, ComplexMatrix, ToleranceConfig, C64};
use crate::operators::BlockOperator;
use crate::polar::{polar_pi, spectral_gap, PolarData};
use crate::random::gaussian_matrix;

/// Step sizes used for the gap trace and the observed jump.
pub const PROBE_STEPS: [f64; 3] = [1e-1, 1e-2, 1e-3];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContinuityReport {
    pub is_continuity_point: bool,
    /// `b = p₀ (ξ × η) q₀` with `‖b‖ = 1`, present iff not a continuity point.
    pub witness: Option<BlockOperator>,
    pub witness_block: Option<usize>,
    /// `‖u(a + tb) − u(a)‖` at the smallest probe step.
    pub observed_jump: Option<f64>,
    /// `(t, gap(a + tb))`; just `(0, gap(a))` for continuity points.
    pub gap_trace: Vec<(f64, f64)>,
}

fn defect_projections_of(pd: &PolarData) -> Result<(BlockOperator, BlockOperator)> {
    let p0 = pd.u.left_unit().sub(&pd.left_support)?;
    let q0 = pd.u.right_unit().sub(&pd.right_support)?;
    Ok((p0, q0))
}

/// Normalized column of the projection with the largest norm; ties go to
/// the lowest index.
fn top_direction(proj: &ComplexMatrix) -> Vec<C64> {
    let norms: Vec<f64> = (0..proj.cols()).map(|j| vec_norm(&proj.col(j))).collect();
    let best = norms.iter().copied().fold(0.0, f64::max);
    let j = norms
        .iter()
        .position(|&n| n >= best - 1e-12)
        .expect("projection has columns");
    let col = proj.col(j);
    col.into_iter().map(|z| z / norms[j]).collect()
}

/// Decides whether `a` is a continuity point of `u` and builds a witness if not.
pub fn continuity_criterion(a: &BlockOperator, cfg: &ToleranceConfig) -> Result<ContinuityReport> {
    let pd = polar_pi(a, cfg)?;
    let pattern = pd.defect_pattern();
    let bad = pattern
        .blocks()
        .iter()
        .position(|d| d.left > 0 && d.right > 0);
    let Some(block) = bad else {
        return Ok(ContinuityReport {
            is_continuity_point: true,
            witness: None,
            witness_block: None,
            observed_jump: None,
            gap_trace: vec![(0.0, pd.gap)],
        });
    };
    let (p0, q0) = defect_projections_of(&pd)?;
    let xi = top_direction(p0.block(block));
    let eta = top_direction(q0.block(block));
    let rank_one = ComplexMatrix::rank_one(&xi, &eta);
    let compressed = p0.block(block).matmul(&rank_one).matmul(q0.block(block));
    let scale = crate::numerics::op_norm(&compressed);
    let mut blocks = BlockOperator::zeros(&a.shape()).into_blocks();
    blocks[block] = compressed.scale_real(1.0 / scale);
    let witness = BlockOperator::new(blocks)?;

    let mut gap_trace = Vec::with_capacity(PROBE_STEPS.len());
    let mut observed_jump = None;
    for &t in &PROBE_STEPS {
        let moved = a.add(&witness.scale_real(t))?;
        let pm = polar_pi(&moved, cfg)?;
        gap_trace.push((t, pm.gap));
        observed_jump = Some(pm.u.distance(&pd.u)?);
    }
    Ok(ContinuityReport {
        is_continuity_point: false,
        witness: Some(witness),
        witness_block: Some(block),
        observed_jump,
        gap_trace,
    })
}

/// `(t, ‖u(a + tb) − u(a)‖)` for each `t`. Requires `b ≠ 0` with
/// `b = p₀ b q₀` for the defect projections of `a`.
pub fn discontinuity_demo(
    a: &BlockOperator,
    b: &BlockOperator,
    t_values: &[f64],
    cfg: &ToleranceConfig,
) -> Result<Vec<(f64, f64)>> {
    let pd = polar_pi(a, cfg)?;
    let (p0, q0) = defect_projections_of(&pd)?;
    let bn = b.norm();
    let residual = p0.mul(b)?.mul(&q0)?.distance(b)?;
    if bn == 0.0 || residual > cfg.iso_tol * bn.max(1.0) {
        return Err(Error::BadWitness { residual });
    }
    t_values
        .iter()
        .map(|&t| {
            if t.is_nan() || t <= 0.0 {
                return Err(Error::InvalidArgument(format!("step {t} must be positive")));
            }
            let moved = polar_pi(&a.add(&b.scale_real(t))?, cfg)?;
            Ok((t, moved.u.distance(&pd.u)?))
        })
        .collect()
}

/// Empirical check of the three equivalent conditions at a sample `x₀` of
/// a one-parameter family: continuity of `u`, continuity of `u*u`, and a
/// uniform spectral gap of `|f(x)|`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FamilyReport {
    pub x0: f64,
    /// Indices of the samples forming the neighborhood of `x₀`.
    pub neighborhood: Vec<usize>,
    /// `max ‖u(x) − u(x₀)‖` over the neighborhood.
    pub u_modulus: f64,
    /// `max ‖u(x)*u(x) − u(x₀)*u(x₀)‖` over the neighborhood.
    pub support_modulus: f64,
    /// Smallest spectral gap over the neighborhood.
    pub min_gap: f64,
    /// `(x, gap)` over the whole family.
    pub gap_trace: Vec<(f64, f64)>,
    /// Indices `k` where the numerical rank changes between samples `k` and `k+1`.
    pub rank_jumps: Vec<usize>,
    pub polar_continuous: bool,
    pub support_continuous: bool,
    pub uniform_gap: bool,
    /// The three verdicts agree.
    pub consistent: bool,
}

/// Distances at or above this count as a jump of a partial isometry;
/// partial isometries of different rank are at distance at least 1.
pub const JUMP_THRESHOLD: f64 = 0.5;

pub fn prop2_experiment(
    family: &[(f64, BlockOperator)],
    x0_index: usize,
    cfg: &ToleranceConfig,
) -> Result<FamilyReport> {
    if x0_index >= family.len() {
        return Err(Error::InvalidArgument(format!(
            "x0 index {x0_index} outside a family of {}",
            family.len()
        )));
    }
    for w in family.windows(2) {
        let step = w[0].1.distance(&w[1].1)?;
        if step > cfg.path_step_max {
            return Err(Error::StepTooLarge {
                step,
                max: cfg.path_step_max,
            });
        }
    }
    let polars = family
        .iter()
        .map(|(_, f)| polar_pi(f, cfg))
        .collect::<Result<Vec<_>>>()?;
    let gap_trace: Vec<(f64, f64)> = family
        .iter()
        .zip(&polars)
        .map(|((x, _), pd)| (*x, pd.gap))
        .collect();
    let rank_jumps: Vec<usize> = polars
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[0].ranks != w[1].ranks)
        .map(|(k, _)| k)
        .collect();

    let lo = x0_index.saturating_sub(1);
    let hi = (x0_index + 1).min(family.len() - 1);
    let neighborhood: Vec<usize> = (lo..=hi).collect();
    let center = &polars[x0_index];
    let mut u_modulus: f64 = 0.0;
    let mut support_modulus: f64 = 0.0;
    let mut min_gap = f64::INFINITY;
    let mut ranks_constant = true;
    for &k in &neighborhood {
        let pd = &polars[k];
        u_modulus = u_modulus.max(pd.u.distance(&center.u)?);
        support_modulus = support_modulus.max(pd.right_support.distance(&center.right_support)?);
        min_gap = min_gap.min(pd.gap);
        ranks_constant &= pd.ranks == center.ranks;
    }
    let polar_continuous = u_modulus < JUMP_THRESHOLD;
    let support_continuous = support_modulus < JUMP_THRESHOLD;
    let nonzero = center.ranks.iter().any(|&r| r > 0);
    let uniform_gap = ranks_constant && (min_gap > 0.0 || !nonzero);
    Ok(FamilyReport {
        x0: family[x0_index].0,
        neighborhood,
        u_modulus,
        support_modulus,
        min_gap,
        gap_trace,
        rank_jumps,
        consistent: polar_continuous == support_continuous && support_continuous == uniform_gap,
        polar_continuous,
        support_continuous,
        uniform_gap,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OpennessProbe {
    /// Every tested perturbation is again a continuity point.
    pub holds: bool,
    pub tested: usize,
    /// Perturbations discarded because they changed the rank pattern.
    pub skipped: usize,
}

/// Perturbs a continuity point by random operators of norm at most
/// `radius < gap(a)/2` and checks that the criterion still holds.
pub fn continuity_openness_probe<R: Rng + ?Sized>(
    rng: &mut R,
    a: &BlockOperator,
    radius: f64,
    trials: usize,
    cfg: &ToleranceConfig,
) -> Result<OpennessProbe> {
    let base = continuity_criterion(a, cfg)?;
    if !base.is_continuity_point {
        return Err(Error::InvalidArgument("probe needs a continuity point".into()));
    }
    let sg = spectral_gap(a, cfg)?;
    if !(radius > 0.0 && radius < sg.gap / 2.0) {
        return Err(Error::InvalidArgument(format!(
            "radius {radius} must lie in (0, gap/2) = (0, {})",
            sg.gap / 2.0
        )));
    }
    let shape = a.shape();
    let mut tested = 0;
    let mut skipped = 0;
    let mut holds = true;
    for _ in 0..trials {
        let e = BlockOperator::new(
            shape
                .blocks()
                .iter()
                .map(|&(o, i)| gaussian_matrix(rng, o, i))
                .collect(),
        )?;
        let scale: f64 = radius * rng.random_range(0.0..1.0) / e.norm().max(f64::MIN_POSITIVE);
        let moved = a.add(&e.scale_real(scale))?;
        if spectral_gap(&moved, cfg)?.ranks != sg.ranks {
            skipped += 1;
            continue;
        }
        tested += 1;
        holds &= continuity_criterion(&moved, cfg)?.is_continuity_point;
    }
    Ok(OpennessProbe {
        holds,
        tested,
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::stream_rng;

    fn cfg() -> ToleranceConfig {
        ToleranceConfig::default()
    }

    fn op(rows: &[&[f64]]) -> BlockOperator {
        ComplexMatrix::from_real_rows(rows).into()
    }

    #[test]
    fn invertible_and_surjective_are_continuity_points() {
        let r = continuity_criterion(&op(&[&[2.0, 1.0], &[0.0, 1.0]]), &cfg()).unwrap();
        assert!(r.is_continuity_point && r.witness.is_none());
        let r = continuity_criterion(&op(&[&[1.0, 0.0]]), &cfg()).unwrap();
        assert!(r.is_continuity_point);
    }

    #[test]
    fn rank_one_diagonal_has_witness() {
        let a = op(&[&[1.0, 0.0], &[0.0, 0.0]]);
        let r = continuity_criterion(&a, &cfg()).unwrap();
        assert!(!r.is_continuity_point);
        assert_eq!(r.witness_block, Some(0));
        let b = r.witness.unwrap();
        assert!(b.distance(&op(&[&[0.0, 0.0], &[0.0, 1.0]])).unwrap() < 1e-15);
        assert!((r.observed_jump.unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(r.gap_trace.len(), 3);
        assert!((r.gap_trace[2].1 - 1e-3).abs() < 1e-15);
    }

    #[test]
    fn demo_distances_are_one_and_phase_invariant() {
        let a = op(&[&[1.0, 0.0], &[0.0, 0.0]]);
        let b = op(&[&[0.0, 0.0], &[0.0, 1.0]]);
        let ts = [0.1, 0.01, 0.001];
        for (_, d) in discontinuity_demo(&a, &b, &ts, &cfg()).unwrap() {
            assert!((d - 1.0).abs() < 1e-12);
        }
        let rotated = b.scale(C64::from_polar(1.0, 0.7));
        for (_, d) in discontinuity_demo(&a, &rotated, &ts, &cfg()).unwrap() {
            assert!((d - 1.0).abs() < 1e-12);
        }
        let bad = op(&[&[0.0, 1.0], &[0.0, 0.0]]);
        assert!(matches!(
            discontinuity_demo(&a, &bad, &ts, &cfg()),
            Err(Error::BadWitness { .. })
        ));
    }

    #[test]
    fn constant_family_satisfies_all_conditions() {
        let a = op(&[&[2.0, 0.0], &[0.0, 0.5]]);
        let family: Vec<_> = (0..5).map(|k| (k as f64, a.clone())).collect();
        let r = prop2_experiment(&family, 2, &cfg()).unwrap();
        assert!(r.polar_continuous && r.support_continuous && r.uniform_gap && r.consistent);
        assert!(r.gap_trace.iter().all(|&(_, g)| (g - 0.5).abs() < 1e-15));
    }

    #[test]
    fn diagonal_family_fails_all_conditions_at_zero() {
        let family: Vec<_> = (-20..=20)
            .map(|k| {
                let x = k as f64 * 0.01;
                (x, op(&[&[1.0, 0.0], &[0.0, x]]))
            })
            .collect();
        let r = prop2_experiment(&family, 20, &cfg()).unwrap();
        assert!(!r.polar_continuous && !r.support_continuous && !r.uniform_gap);
        assert!(r.consistent);
        assert_eq!(r.rank_jumps, vec![19, 20]);
        assert!((r.u_modulus - 1.0).abs() < 1e-12);
    }

    #[test]
    fn openness_probe_examples() {
        let mut rng = stream_rng(5, 0);
        let id = BlockOperator::identity(&[3]);
        let probe = continuity_openness_probe(&mut rng, &id, 0.1, 20, &cfg()).unwrap();
        assert!(probe.holds && probe.tested == 20);
        assert!(continuity_openness_probe(&mut rng, &id, 0.6, 5, &cfg()).is_err());
        let rank_deficient = op(&[&[1.0, 0.0], &[0.0, 0.0]]);
        assert!(continuity_openness_probe(&mut rng, &rank_deficient, 0.1, 5, &cfg()).is_err());
    }
}
