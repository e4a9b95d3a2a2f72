mod common;

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use common::*;
use isometrica::harness::{random_extremal_pair, random_near_pair};
use isometrica::homotopy::{
    classify_obstruction, non_homotopy_certificate, path_thm4, path_thm5, verify_path,
    HomotopyObstruction,
};
use isometrica::numerics::ComplexMatrix;
use isometrica::operators::{partial_isometry_ranks, BlockDefect};
use isometrica::projection_geometry::angle_projection;
use isometrica::random::stream_rng;
use isometrica::{BlockOperator, DefectPattern, Error, ToleranceConfig, C64};
use proptest::prelude::*;

fn cfg() -> ToleranceConfig {
    ToleranceConfig::default()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn near_pairs_give_certified_paths(seed in any::<u64>(), max_dim in 2usize..=8) {
        let c = cfg();
        let (u, v) = random_near_pair(&mut stream_rng(seed, 0), max_dim, 0.99, &c).unwrap();
        let path = path_thm4(&u, &v, 5, &c).unwrap();
        let cert = verify_path(&path, Some((&u, &v)), false, &c);
        prop_assert!(cert.passes, "{:?}", cert);
        prop_assert!(cert.rank_constant);
        prop_assert_eq!(cert.endpoint_distance, Some(0.0));
        let r0 = partial_isometry_ranks(&u);
        for s in &path.samples {
            prop_assert_eq!(partial_isometry_ranks(&s.operator), r0.clone());
        }
    }

    #[test]
    fn extremal_pairs_keep_the_segment_gap(seed in any::<u64>(), max_dim in 2usize..=8) {
        let c = cfg();
        let (u, v) = random_extremal_pair(&mut stream_rng(seed, 0), max_dim, 1.95, &c).unwrap();
        let d = oracle_block_norm(&u.sub(&v).unwrap());
        let path = path_thm5(&u, &v, 5, &c).unwrap();
        let cert = verify_path(&path, Some((&u, &v)), true, &c);
        prop_assert!(cert.passes, "{:?}", cert);
        prop_assert_eq!(cert.all_extremal, Some(true));
        prop_assert!(cert.endpoint_patterns_equal && cert.rank_constant);
        prop_assert!(cert.min_segment_gap.unwrap() >= 1.0 - d / 2.0 - 1e-9);
    }
}

#[test]
fn projection_pair_path() {
    let c = cfg();
    let u: BlockOperator = angle_projection(0.0, 2).into();
    let v: BlockOperator = angle_projection(FRAC_PI_4, 2).into();
    assert!((oracle_block_norm(&u.sub(&v).unwrap()) - FRAC_PI_4.sin()).abs() < 1e-14);
    let path = path_thm4(&u, &v, 9, &c).unwrap();
    let cert = verify_path(&path, Some((&u, &v)), false, &c);
    assert!(cert.passes && cert.endpoints_match == Some(true));
}

#[test]
fn unitary_segment_has_closed_form() {
    // u(diag(1, z)) = diag(1, z/|z|) with z = 1 − t + t e^{iα}
    let c = cfg();
    let alpha = FRAC_PI_2;
    let u = BlockOperator::identity(&[2]);
    let mut vm = ComplexMatrix::identity(2);
    vm[(1, 1)] = C64::from_polar(1.0, alpha);
    let v = BlockOperator::from(vm);
    assert!((oracle_block_norm(&u.sub(&v).unwrap()) - 2f64.sqrt()).abs() < 1e-14);
    let path = path_thm5(&u, &v, 9, &c).unwrap();
    for s in &path.samples {
        let z = C64::new(1.0 - s.t, 0.0) + C64::from_polar(s.t, alpha);
        let mut expected = ComplexMatrix::identity(2);
        expected[(1, 1)] = z / z.norm();
        assert!(max_abs_diff(s.operator.block(0), &expected) < 1e-12, "t = {}", s.t);
    }
    assert!(verify_path(&path, Some((&u, &v)), true, &c).passes);
}

#[test]
fn wide_angle_coisometries() {
    // the segment (1 − t) f + t g has norm cos(θ/2) at t = ½
    let c = cfg();
    let th = 2.0 * std::f64::consts::FRAC_PI_3;
    let u = op(&[&[1.0, 0.0]]);
    let v = op(&[&[th.cos(), th.sin()]]);
    let d = oracle_block_norm(&u.sub(&v).unwrap());
    assert!((d - 3f64.sqrt()).abs() < 1e-14);
    let path = path_thm5(&u, &v, 11, &c).unwrap();
    let cert = verify_path(&path, Some((&u, &v)), true, &c);
    assert!(cert.passes);
    let gap = cert.min_segment_gap.unwrap();
    assert!(gap >= 1.0 - 3f64.sqrt() / 2.0);
    assert!((gap - (th / 2.0).cos()).abs() < 1e-12);
}

#[test]
fn corrupted_sample_fails_certificate() {
    let c = cfg();
    let u: BlockOperator = angle_projection(0.0, 2).into();
    let v: BlockOperator = angle_projection(0.5, 2).into();
    let mut path = path_thm4(&u, &v, 5, &c).unwrap();
    let mid = path.samples.len() / 2;
    let mut blocks = path.samples[mid].operator.clone().into_blocks();
    blocks[0][(0, 1)] += C64::new(0.5, 0.0);
    path.samples[mid].operator = BlockOperator::new(blocks).unwrap();
    let cert = verify_path(&path, Some((&u, &v)), false, &c);
    assert!(!cert.all_partial_isometries && !cert.passes);
}

#[test]
fn far_pairs_are_refused() {
    let c = cfg();
    let u = op(&[&[0.0]]);
    let v = op(&[&[1.0]]);
    assert!(matches!(path_thm4(&u, &v, 5, &c), Err(Error::TooFar { .. })));
    assert_eq!(
        non_homotopy_certificate(&u, &v, &c).unwrap(),
        HomotopyObstruction::RankMismatch { block: 0, rank_u: 0, rank_v: 1 }
    );
    let w = op(&[&[-1.0]]);
    assert!(matches!(path_thm5(&v, &w, 5, &c), Err(Error::TooFar { .. })));
}

#[test]
fn pattern_mismatch_from_hand_built_patterns() {
    // isometry-type versus co-isometry-type support in one block
    let iso = DefectPattern(vec![BlockDefect { left: 1, right: 0 }]);
    let co = DefectPattern(vec![BlockDefect { left: 0, right: 1 }]);
    assert_eq!(
        classify_obstruction(&[1], &[1], Some((&iso, &co))),
        HomotopyObstruction::PatternMismatch { block: 0 }
    );
}
