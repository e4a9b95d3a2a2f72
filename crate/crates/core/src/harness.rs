//! Seeded sweeps, galleries and reports behind the command-line tool.
//!
//! Trial `k` of a sweep with seed `s` draws every random number from
//! `stream_rng(s, k)`, so trials are independent of scheduling and a run is
//! reproducible byte for byte. Trials run on a rayon pool whose size can be
//! capped with the `ISOMETRICA_THREADS` environment variable; records are
//! always reported in trial order.
//!
//! Exit codes: [`EXIT_OK`] when every check passes, [`EXIT_FAILURE`] when a
//! trial violates its inequality or a certificate fails (the report is
//! still written), [`EXIT_PRECONDITION`] for bad configuration or inputs
//! that do not meet a construction's hypotheses.

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::continuity::{
    continuity_criterion, continuity_openness_probe, discontinuity_demo, PROBE_STEPS,
};
use crate::error::{Error, Result};
use crate::homotopy::{
    non_homotopy_certificate, path_thm4, path_thm5, verify_path, HomotopyObstruction,
    IsometryPath, PathCertificate,
};
use crate::inequalities::{check_thm1, check_thm1_left, check_thm7, sharpness_thm7};
use crate::numerics::{ComplexMatrix, ToleranceConfig};
use crate::operators::{full_ranks, random_operator_with, random_partial_isometry_with, BlockOperator, BlockShape};
use crate::polar::{polar_pi, spectral_gap, truncated_polar};
use crate::projection_geometry::{angle_projection, five_part_decomposition, CornerDims};
use crate::random::{gaussian_matrix, stream_rng};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_PRECONDITION: i32 = 2;

pub const THREADS_ENV: &str = "ISOMETRICA_THREADS";

/// Inequality margins below `−MARGIN_TOL` are violations.
pub const MARGIN_TOL: f64 = 1e-10;
/// Allowed deviation of an observed polar jump from 1.
pub const JUMP_TOL: f64 = 1e-8;
/// Slack on the segment gap bound `1 − d/2`.
pub const GAP_SLACK: f64 = 1e-9;

pub const THM4_MAX_DISTANCE: f64 = 0.95;
pub const THM5_MAX_DISTANCE: f64 = 1.9;
pub const THM7_MAX_DISTANCE: f64 = std::f64::consts::SQRT_2;
/// Initial uniform grid of the path sweeps before adaptive refinement.
pub const PATH_RESOLUTION: usize = 11;
/// Random perturbations tried per continuity point in the openness probe.
pub const OPENNESS_TRIALS: usize = 4;

const MAX_BLOCKS: usize = 3;
const REJECTION_ROUNDS: usize = 60;

/// Exit code for an error raised while running a command.
pub fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::NoConvergence { .. } | Error::IllConditioned { .. } | Error::StepTooLarge { .. } => {
            EXIT_FAILURE
        }
        _ => EXIT_PRECONDITION,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            _ => Err(Error::InvalidArgument(format!("unknown format {s:?}"))),
        }
    }
}

/// Which inequality or construction a sweep exercises.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    /// `‖u*u − v*v‖ ≤ ‖u − v‖` for partial isometries.
    Thm1,
    /// The extremal bound `d(1 − d²/4)^{1/2}` for `d ≤ √2`.
    Thm7,
    /// Certified paths for `‖u − v‖ ≤ 0.95`.
    Thm4,
    /// Certified extremal paths for `‖u − v‖ ≤ 1.9`.
    Thm5,
    /// Continuity points of the polar map and their witnesses.
    Thm8,
}

impl SweepKind {
    pub const ALL: [SweepKind; 5] = [Self::Thm1, Self::Thm7, Self::Thm4, Self::Thm5, Self::Thm8];

    pub fn name(self) -> &'static str {
        match self {
            Self::Thm1 => "thm1",
            Self::Thm7 => "thm7",
            Self::Thm4 => "thm4",
            Self::Thm5 => "thm5",
            Self::Thm8 => "thm8",
        }
    }
}

impl fmt::Display for SweepKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown sweep {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub seed: u64,
    pub trials: usize,
    /// Largest block dimension drawn by the generators.
    pub max_dim: usize,
    pub tolerances: ToleranceConfig,
    pub output_path: PathBuf,
    pub format: Format,
}

impl RunConfig {
    pub const DEFAULT_TRIALS: usize = 100;
    pub const DEFAULT_MAX_DIM: usize = 8;

    pub fn new(output_path: impl Into<PathBuf>) -> Self {
        Self {
            seed: 0,
            trials: Self::DEFAULT_TRIALS,
            max_dim: Self::DEFAULT_MAX_DIM,
            tolerances: ToleranceConfig::default(),
            output_path: output_path.into(),
            format: Format::Json,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidArgument("trials must be at least 1".into()));
        }
        if !(2..=64).contains(&self.max_dim) {
            return Err(Error::InvalidArgument(format!(
                "max_dim {} must lie in 2..=64",
                self.max_dim
            )));
        }
        self.tolerances.validate()
    }
}

/// Runs `f` on a pool capped by `ISOMETRICA_THREADS` when it is set to a
/// positive integer, otherwise on the global pool.
pub fn with_thread_cap<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    let cap = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .filter(|&n| n > 0);
    match cap.and_then(|n| rayon::ThreadPoolBuilder::new().num_threads(n).build().ok()) {
        Some(pool) => pool.install(f),
        None => f(),
    }
}

// ---------------------------------------------------------------------------
// Random inputs

/// One to three blocks with dimensions in `1..=max_dim`.
pub fn random_shape<R: Rng + ?Sized>(rng: &mut R, max_dim: usize) -> BlockShape {
    let n = rng.random_range(1..=MAX_BLOCKS);
    let blocks = (0..n)
        .map(|_| (rng.random_range(1..=max_dim), rng.random_range(1..=max_dim)))
        .collect();
    BlockShape::new(blocks).expect("nonempty shape")
}

/// Like [`random_shape`] with square blocks.
pub fn random_square_shape<R: Rng + ?Sized>(rng: &mut R, max_dim: usize) -> BlockShape {
    let n = rng.random_range(1..=MAX_BLOCKS);
    let blocks = (0..n)
        .map(|_| {
            let d = rng.random_range(1..=max_dim);
            (d, d)
        })
        .collect();
    BlockShape::new(blocks).expect("nonempty shape")
}

pub fn random_ranks<R: Rng + ?Sized>(rng: &mut R, shape: &BlockShape) -> Vec<usize> {
    shape
        .blocks()
        .iter()
        .map(|&(o, i)| rng.random_range(0..=o.min(i)))
        .collect()
}

/// Gaussian block operator scaled to norm 1 (zero only for empty blocks).
pub fn random_direction<R: Rng + ?Sized>(rng: &mut R, shape: &BlockShape) -> BlockOperator {
    let e = BlockOperator::new(
        shape
            .blocks()
            .iter()
            .map(|&(o, i)| gaussian_matrix(rng, o, i))
            .collect(),
    )
    .expect("shape is valid");
    let n = e.norm();
    if n > 0.0 {
        e.scale_real(1.0 / n)
    } else {
        e
    }
}

/// How a partial-isometry pair was drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairMode {
    /// Independent partial isometries with independent ranks.
    Independent,
    /// `v` is the rank-truncated polar factor of `u + λe`.
    Perturbed,
    /// Both operators are projections.
    Projections,
}

impl PairMode {
    pub fn name(self) -> &'static str {
        match self {
            Self::Independent => "independent",
            Self::Perturbed => "perturbed",
            Self::Projections => "projections",
        }
    }
}

/// Random pair of partial isometries of a common shape, covering far
/// apart pairs, nearby pairs of different ranks and projection pairs.
pub fn random_pi_pair<R: Rng + ?Sized>(
    rng: &mut R,
    max_dim: usize,
    cfg: &ToleranceConfig,
) -> Result<(BlockOperator, BlockOperator, PairMode)> {
    let mode = match rng.random_range(0..3) {
        0 => PairMode::Independent,
        1 => PairMode::Perturbed,
        _ => PairMode::Projections,
    };
    match mode {
        PairMode::Independent => {
            let shape = random_shape(rng, max_dim);
            let ru = random_ranks(rng, &shape);
            let rv = random_ranks(rng, &shape);
            let u = random_partial_isometry_with(rng, &shape, &ru)?;
            let v = random_partial_isometry_with(rng, &shape, &rv)?;
            Ok((u, v, mode))
        }
        PairMode::Perturbed => {
            let shape = random_shape(rng, max_dim);
            let ru = random_ranks(rng, &shape);
            let rv = random_ranks(rng, &shape);
            let u = random_partial_isometry_with(rng, &shape, &ru)?;
            let lambda: f64 = rng.random_range(0.0..1.0);
            let e = random_direction(rng, &shape);
            let v = truncated_polar(&u.add(&e.scale_real(lambda))?, &rv, cfg)?;
            Ok((u, v, mode))
        }
        PairMode::Projections => {
            let shape = random_square_shape(rng, max_dim);
            let rp = random_ranks(rng, &shape);
            let rq = random_ranks(rng, &shape);
            let p = random_partial_isometry_with(rng, &shape, &rp)?.gram();
            let lambda: f64 = rng.random_range(0.0..1.0);
            let e = random_direction(rng, &shape);
            let q = truncated_polar(&p.add(&e.scale_real(lambda))?, &rq, cfg)?.gram();
            Ok((p, q, mode))
        }
    }
}

/// Random partial isometries `u`, `v` of equal ranks with `‖u − v‖ ≤ max_d`.
///
/// `v` is the rank-truncated polar factor of `u + λe` for a random unit
/// direction `e`; `λ` starts uniform in `(0, max_d)` and is halved until
/// the distance fits.
pub fn random_near_pair<R: Rng + ?Sized>(
    rng: &mut R,
    max_dim: usize,
    max_d: f64,
    cfg: &ToleranceConfig,
) -> Result<(BlockOperator, BlockOperator)> {
    let shape = random_shape(rng, max_dim);
    let ranks = random_ranks(rng, &shape);
    let u = random_partial_isometry_with(rng, &shape, &ranks)?;
    let e = random_direction(rng, &shape);
    let mut lambda = rng.random_range(0.0..max_d);
    for _ in 0..REJECTION_ROUNDS {
        let v = truncated_polar(&u.add(&e.scale_real(lambda))?, &ranks, cfg)?;
        if u.distance(&v)? <= max_d {
            return Ok((u, v));
        }
        lambda *= 0.5;
    }
    Ok((u.clone(), u))
}

/// Random extremal `u`, `v` of a common shape with `‖u − v‖ ≤ max_d`.
///
/// `v` is the full-rank polar factor of `(1 − λ)u + λw` for an independent
/// extremal `w`. Starting from uniform `λ ∈ (0, 1)` and halving on
/// rejection biases `v` toward `u`, so small distances are well covered.
pub fn random_extremal_pair<R: Rng + ?Sized>(
    rng: &mut R,
    max_dim: usize,
    max_d: f64,
    cfg: &ToleranceConfig,
) -> Result<(BlockOperator, BlockOperator)> {
    let shape = random_shape(rng, max_dim);
    let ranks = full_ranks(&shape);
    let u = random_partial_isometry_with(rng, &shape, &ranks)?;
    let w = random_partial_isometry_with(rng, &shape, &ranks)?;
    let mut lambda: f64 = rng.random_range(0.0..1.0);
    for _ in 0..REJECTION_ROUNDS {
        let v = truncated_polar(&u.lerp(&w, lambda)?, &ranks, cfg)?;
        if u.distance(&v)? <= max_d {
            return Ok((u, v));
        }
        lambda *= 0.5;
    }
    Ok((u.clone(), u))
}

/// Random operator whose polar factor has both defects in block 0: block
/// 0 has both dimensions at least 2 and rank strictly between 0 and the
/// smaller one.
pub fn random_discontinuity_point<R: Rng + ?Sized>(
    rng: &mut R,
    max_dim: usize,
) -> Result<BlockOperator> {
    let mut shape = random_shape(rng, max_dim).blocks().to_vec();
    shape[0] = (rng.random_range(2..=max_dim), rng.random_range(2..=max_dim));
    let shape = BlockShape::new(shape)?;
    let mut ranks = random_ranks(rng, &shape);
    let (o, i) = shape.blocks()[0];
    ranks[0] = rng.random_range(1..o.min(i));
    random_operator_with(rng, &shape, &ranks, (0.2, 2.0))
}

/// Random operator of full rank in every block.
pub fn random_continuity_point<R: Rng + ?Sized>(rng: &mut R, max_dim: usize) -> Result<BlockOperator> {
    let shape = random_shape(rng, max_dim);
    let ranks = full_ranks(&shape);
    random_operator_with(rng, &shape, &ranks, (0.2, 2.0))
}

// ---------------------------------------------------------------------------
// Sweeps

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialStatus {
    Pass,
    Violation,
    Skipped,
}

/// One sweep trial. Field meaning depends on the sweep:
///
/// | sweep | `d` | `lhs` | `rhs` |
/// |-------|-----|-------|-------|
/// | thm1 | `‖u − v‖` | `‖u*u − v*v‖` | `‖u − v‖` |
/// | thm7 | `‖u − v‖` | `‖u*u − v*v‖` | `d(1 − d²/4)^{1/2}` |
/// | thm4 | `‖u − v‖` | largest path step | `path_step_max` |
/// | thm5 | `‖u − v‖` | `1 − d/2` | smallest segment gap |
/// | thm8 | spectral gap of `a` | `max |jump − 1|` or probe radius | `1e−8` or none |
///
/// `margin = rhs − lhs` whenever `rhs` is present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub shape: Vec<(usize, usize)>,
    pub d: f64,
    pub lhs: f64,
    pub rhs: Option<f64>,
    pub margin: Option<f64>,
    pub status: TrialStatus,
    pub flags: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificate: Option<PathCertificate>,
}

impl TrialRecord {
    fn new(trial: usize, seed: u64, shape: &BlockShape) -> Self {
        Self {
            trial,
            seed,
            shape: shape.blocks().to_vec(),
            d: 0.0,
            lhs: 0.0,
            rhs: None,
            margin: None,
            status: TrialStatus::Pass,
            flags: Vec::new(),
            certificate: None,
        }
    }

    fn set_bound(&mut self, lhs: f64, rhs: f64) {
        self.lhs = lhs;
        self.rhs = Some(rhs);
        self.margin = Some(rhs - lhs);
    }

    fn fail(&mut self, flag: impl Into<String>) {
        self.status = TrialStatus::Violation;
        self.flags.push(flag.into());
    }

    pub fn is_equality_case(&self) -> bool {
        self.flags.iter().any(|f| f == "equality")
    }

    fn csv_flags(&self) -> String {
        let status = match self.status {
            TrialStatus::Pass => "pass",
            TrialStatus::Violation => "violation",
            TrialStatus::Skipped => "skipped",
        };
        std::iter::once(status)
            .chain(self.flags.iter().map(String::as_str))
            .collect::<Vec<_>>()
            .join(";")
    }
}

/// The trial with the smallest margin (or the first violation without
/// one), with its inputs regenerated from the seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WorstCase {
    pub trial: usize,
    pub margin: Option<f64>,
    pub operators: Vec<BlockOperator>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepReport {
    pub sweep: SweepKind,
    pub seed: u64,
    pub trials: usize,
    pub max_dim: usize,
    pub tolerances: ToleranceConfig,
    pub violations: usize,
    pub skipped: usize,
    pub equality_cases: usize,
    pub min_margin: Option<f64>,
    pub worst_case: Option<WorstCase>,
    pub records: Vec<TrialRecord>,
}

impl SweepReport {
    pub fn passes(&self) -> bool {
        self.violations == 0
    }

    pub fn summary(&self) -> String {
        let min = self
            .min_margin
            .map_or_else(|| "n/a".to_string(), |m| format!("{m:.3e}"));
        format!(
            "{}: {} trials, {} violations, {} skipped, {} equality cases, min margin {}",
            self.sweep, self.trials, self.violations, self.skipped, self.equality_cases, min
        )
    }
}

/// Inputs of one trial; regenerated on demand for the worst case.
fn trial_inputs(
    kind: SweepKind,
    seed: u64,
    trial: usize,
    max_dim: usize,
    cfg: &ToleranceConfig,
) -> Result<(Vec<BlockOperator>, Vec<String>)> {
    let mut rng = stream_rng(seed, trial as u64);
    let (ops, flags) = match kind {
        SweepKind::Thm1 => {
            let (u, v, mode) = random_pi_pair(&mut rng, max_dim, cfg)?;
            (vec![u, v], vec![mode.name().to_string()])
        }
        SweepKind::Thm7 => {
            let (u, v) = random_extremal_pair(&mut rng, max_dim, THM7_MAX_DISTANCE, cfg)?;
            (vec![u, v], vec![])
        }
        SweepKind::Thm4 => {
            let (u, v) = random_near_pair(&mut rng, max_dim, THM4_MAX_DISTANCE, cfg)?;
            (vec![u, v], vec![])
        }
        SweepKind::Thm5 => {
            let (u, v) = random_extremal_pair(&mut rng, max_dim, THM5_MAX_DISTANCE, cfg)?;
            (vec![u, v], vec![])
        }
        SweepKind::Thm8 => {
            if trial.is_multiple_of(2) {
                (vec![random_discontinuity_point(&mut rng, max_dim)?], vec!["discontinuity".into()])
            } else {
                (vec![random_continuity_point(&mut rng, max_dim)?], vec!["continuity".into()])
            }
        }
    };
    Ok((ops, flags))
}

/// Evaluates a thm1 pair.
pub fn evaluate_thm1(record: &mut TrialRecord, u: &BlockOperator, v: &BlockOperator, cfg: &ToleranceConfig) -> Result<()> {
    let m = check_thm1(u, v, cfg)?;
    record.d = m.rhs;
    record.set_bound(m.lhs, m.rhs);
    if m.is_equality_case {
        record.flags.push("equality".into());
    }
    if m.margin < -MARGIN_TOL {
        record.fail("margin");
    }
    if check_thm1_left(u, v, cfg)?.margin < -MARGIN_TOL {
        record.fail("left_support_margin");
    }
    Ok(())
}

/// Evaluates a thm7 pair; pairs with `d > √2` are skipped.
pub fn evaluate_thm7(record: &mut TrialRecord, u: &BlockOperator, v: &BlockOperator, cfg: &ToleranceConfig) -> Result<()> {
    record.d = u.distance(v)?;
    match check_thm7(u, v, cfg) {
        Ok(m) => {
            record.set_bound(m.lhs, m.rhs);
            if m.is_equality_case {
                record.flags.push("equality".into());
            }
            if m.margin < -MARGIN_TOL {
                record.fail("margin");
            }
            if m.lhs > record.d + MARGIN_TOL {
                record.fail("exceeds_linear_bound");
            }
            Ok(())
        }
        Err(Error::OutOfRange { .. }) => {
            record.lhs = u.gram().distance(&v.gram())?;
            record.status = TrialStatus::Skipped;
            record.flags.push("out_of_range".into());
            Ok(())
        }
        Err(e) => Err(e),
    }
}

fn evaluate_thm4(record: &mut TrialRecord, u: &BlockOperator, v: &BlockOperator, cfg: &ToleranceConfig) -> Result<()> {
    record.d = u.distance(v)?;
    let path = path_thm4(u, v, PATH_RESOLUTION, cfg)?;
    let cert = verify_path(&path, Some((u, v)), false, cfg);
    record.set_bound(cert.max_step, cfg.path_step_max);
    if !cert.passes {
        record.fail("certificate");
    }
    if cert.endpoint_distance != Some(0.0) {
        record.fail("endpoints_not_exact");
    }
    if !cert.rank_constant {
        record.fail("rank_jump");
    }
    record.certificate = Some(cert);
    Ok(())
}

fn evaluate_thm5(record: &mut TrialRecord, u: &BlockOperator, v: &BlockOperator, cfg: &ToleranceConfig) -> Result<()> {
    record.d = u.distance(v)?;
    let path = path_thm5(u, v, PATH_RESOLUTION, cfg)?;
    let cert = verify_path(&path, Some((u, v)), true, cfg);
    let bound = 1.0 - record.d / 2.0;
    record.set_bound(bound, cert.min_segment_gap.unwrap_or(0.0));
    if !cert.passes {
        record.fail("certificate");
    }
    if record.margin.unwrap_or(f64::NEG_INFINITY) < -GAP_SLACK {
        record.fail("segment_gap");
    }
    if !cert.endpoint_patterns_equal {
        record.fail("pattern_change");
    }
    record.certificate = Some(cert);
    Ok(())
}

fn evaluate_thm8<R: Rng + ?Sized>(
    rng: &mut R,
    record: &mut TrialRecord,
    a: &BlockOperator,
    cfg: &ToleranceConfig,
) -> Result<()> {
    let pd = polar_pi(a, cfg)?;
    record.d = pd.gap;
    let extremal = pd.defect_pattern().is_extremal();
    let report = continuity_criterion(a, cfg)?;
    if report.is_continuity_point != extremal {
        record.fail("criterion_disagrees");
    }
    if let Some(witness) = &report.witness {
        let jumps = discontinuity_demo(a, witness, &PROBE_STEPS, cfg)?;
        let dev = jumps.iter().map(|&(_, j)| (j - 1.0).abs()).fold(0.0, f64::max);
        record.set_bound(dev, JUMP_TOL);
        if dev > JUMP_TOL {
            record.fail("jump");
        }
    } else {
        let radius = spectral_gap(a, cfg)?.gap / 4.0;
        record.lhs = radius;
        let probe = continuity_openness_probe(rng, a, radius, OPENNESS_TRIALS, cfg)?;
        if !probe.holds {
            record.fail("openness");
        }
    }
    Ok(())
}

fn run_trial(kind: SweepKind, seed: u64, trial: usize, max_dim: usize, cfg: &ToleranceConfig) -> TrialRecord {
    let (ops, flags) = match trial_inputs(kind, seed, trial, max_dim, cfg) {
        Ok(x) => x,
        Err(e) => {
            let mut r = TrialRecord::new(trial, seed, &BlockShape::single(1, 1).expect("valid"));
            r.fail(format!("generator_error: {e}"));
            return r;
        }
    };
    let mut record = TrialRecord::new(trial, seed, &ops[0].shape());
    record.flags = flags;
    // The generator consumed the head of the stream; thm8 continues on a
    // fresh stream offset so the probe draws do not depend on it.
    let mut probe_rng = stream_rng(seed ^ 0x5e_ed0f_0be5, trial as u64);
    let outcome = match kind {
        SweepKind::Thm1 => evaluate_thm1(&mut record, &ops[0], &ops[1], cfg),
        SweepKind::Thm7 => evaluate_thm7(&mut record, &ops[0], &ops[1], cfg),
        SweepKind::Thm4 => evaluate_thm4(&mut record, &ops[0], &ops[1], cfg),
        SweepKind::Thm5 => evaluate_thm5(&mut record, &ops[0], &ops[1], cfg),
        SweepKind::Thm8 => evaluate_thm8(&mut probe_rng, &mut record, &ops[0], cfg),
    };
    if let Err(e) = outcome {
        record.fail(format!("error: {e}"));
    }
    record
}

/// Runs a sweep and assembles its report in trial order.
pub fn run_sweep(kind: SweepKind, cfg: &RunConfig) -> Result<SweepReport> {
    cfg.validate()?;
    let tol = cfg.tolerances;
    let records: Vec<TrialRecord> = with_thread_cap(|| {
        (0..cfg.trials)
            .into_par_iter()
            .map(|k| run_trial(kind, cfg.seed, k, cfg.max_dim, &tol))
            .collect()
    });
    let violations = records.iter().filter(|r| r.status == TrialStatus::Violation).count();
    let skipped = records.iter().filter(|r| r.status == TrialStatus::Skipped).count();
    let equality_cases = records.iter().filter(|r| r.is_equality_case()).count();
    let min_margin = records.iter().filter_map(|r| r.margin).reduce(f64::min);

    let worst = records
        .iter()
        .find(|r| r.status == TrialStatus::Violation && r.margin.is_none())
        .or_else(|| {
            records
                .iter()
                .filter(|r| r.margin.is_some())
                .min_by(|a, b| a.margin.partial_cmp(&b.margin).unwrap_or(std::cmp::Ordering::Equal))
        });
    let worst_case = worst.and_then(|r| {
        trial_inputs(kind, cfg.seed, r.trial, cfg.max_dim, &tol)
            .ok()
            .map(|(operators, _)| WorstCase {
                trial: r.trial,
                margin: r.margin,
                operators,
            })
    });
    Ok(SweepReport {
        sweep: kind,
        seed: cfg.seed,
        trials: cfg.trials,
        max_dim: cfg.max_dim,
        tolerances: tol,
        violations,
        skipped,
        equality_cases,
        min_margin,
        worst_case,
        records,
    })
}

pub const CSV_HEADER: [&str; 7] = ["trial", "seed", "d", "lhs", "rhs", "margin", "flags"];

/// JSON report or CSV records (`trial, seed, d, lhs, rhs, margin, flags`,
/// flags `;`-separated and led by the trial status).
pub fn render_sweep(report: &SweepReport, format: Format) -> Result<String> {
    match format {
        Format::Json => Ok(serde_json::to_string_pretty(report)? + "\n"),
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let io = |e: csv::Error| Error::Io(e.to_string());
            w.write_record(CSV_HEADER).map_err(io)?;
            let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
            for r in &report.records {
                w.write_record([
                    r.trial.to_string(),
                    r.seed.to_string(),
                    r.d.to_string(),
                    r.lhs.to_string(),
                    opt(r.rhs),
                    opt(r.margin),
                    r.csv_flags(),
                ])
                .map_err(io)?;
            }
            let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
            String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
        }
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, text)?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &(serde_json::to_string_pretty(value)? + "\n"))
}

/// Runs a sweep, writes the report and returns the exit code with the report.
pub fn cmd_sweep(kind: SweepKind, cfg: &RunConfig) -> Result<(i32, SweepReport)> {
    let report = run_sweep(kind, cfg)?;
    write_text(&cfg.output_path, &render_sweep(&report, cfg.format)?)?;
    let code = if report.passes() { EXIT_OK } else { EXIT_FAILURE };
    Ok((code, report))
}

// ---------------------------------------------------------------------------
// Galleries

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GalleryKind {
    /// Equality pairs for the extremal bound over a θ-grid.
    Thm7Sharpness,
    /// Projection pairs at angle θ, which attain `‖p − q‖ = ‖u*u − v*v‖`.
    Thm1Equality,
    /// `u = 0`, `v ≠ 0` at distance 1: not homotopic.
    Counterexamples,
}

impl FromStr for GalleryKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "thm7_sharpness" => Ok(Self::Thm7Sharpness),
            "thm1_equality" => Ok(Self::Thm1Equality),
            "counterexamples" => Ok(Self::Counterexamples),
            _ => Err(Error::InvalidArgument(format!("unknown gallery {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GalleryParams {
    /// Number of angles `θ_k = (k / grid)·π/2`, `k = 1..=grid`.
    pub grid: usize,
    /// Identity padding dimension.
    pub pad: usize,
}

impl Default for GalleryParams {
    fn default() -> Self {
        Self { grid: 10, pad: 0 }
    }
}

impl GalleryParams {
    pub fn validate(&self) -> Result<()> {
        if !(1..=10_000).contains(&self.grid) {
            return Err(Error::InvalidArgument(format!("grid {} must lie in 1..=10000", self.grid)));
        }
        if self.pad > 64 {
            return Err(Error::InvalidArgument(format!("pad {} must be at most 64", self.pad)));
        }
        Ok(())
    }

    pub fn thetas(&self) -> Vec<f64> {
        (1..=self.grid)
            .map(|k| k as f64 / self.grid as f64 * FRAC_PI_2)
            .collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GalleryEntry {
    pub theta: Option<f64>,
    pub u: BlockOperator,
    pub v: BlockOperator,
    pub d: f64,
    pub lhs: f64,
    pub rhs: Option<f64>,
    pub margin: Option<f64>,
    /// Closed-form `(‖u − v‖, ‖u*u − v*v‖)` where known.
    pub expected: Option<(f64, f64)>,
    pub equality: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub obstruction: Option<HomotopyObstruction>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    pub passes: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GalleryReport {
    pub kind: GalleryKind,
    pub params: GalleryParams,
    pub entries: Vec<GalleryEntry>,
    pub equality_cases: usize,
    pub passes: bool,
}

/// Tolerance on the closed-form norms of gallery pairs.
pub const GALLERY_NORM_TOL: f64 = 1e-10;

pub fn run_gallery(kind: GalleryKind, params: &GalleryParams, cfg: &ToleranceConfig) -> Result<GalleryReport> {
    params.validate()?;
    cfg.validate()?;
    let entries = match kind {
        GalleryKind::Thm7Sharpness => params
            .thetas()
            .into_iter()
            .map(|theta| {
                let (u, v) = sharpness_thm7(theta, params.pad)?;
                let m = check_thm7(&u, &v, cfg)?;
                let d = u.distance(&v)?;
                let expected = (2.0 * (theta / 2.0).sin(), theta.sin());
                let passes = m.is_equality_case
                    && (d - expected.0).abs() <= GALLERY_NORM_TOL
                    && (m.lhs - expected.1).abs() <= GALLERY_NORM_TOL;
                Ok(GalleryEntry {
                    theta: Some(theta),
                    u,
                    v,
                    d,
                    lhs: m.lhs,
                    rhs: Some(m.rhs),
                    margin: Some(m.margin),
                    expected: Some(expected),
                    equality: m.is_equality_case,
                    obstruction: None,
                    note: None,
                    passes,
                })
            })
            .collect::<Result<Vec<_>>>()?,
        GalleryKind::Thm1Equality => params
            .thetas()
            .into_iter()
            .map(|theta| {
                let n = 2 + params.pad;
                let u: BlockOperator = angle_projection(0.0, n).into();
                let v: BlockOperator = angle_projection(theta, n).into();
                let m = check_thm1(&u, &v, cfg)?;
                let expected = (theta.sin(), theta.sin());
                let passes = m.is_equality_case
                    && (m.rhs - expected.0).abs() <= GALLERY_NORM_TOL
                    && (m.lhs - expected.1).abs() <= GALLERY_NORM_TOL;
                Ok(GalleryEntry {
                    theta: Some(theta),
                    u,
                    v,
                    d: m.rhs,
                    lhs: m.lhs,
                    rhs: Some(m.rhs),
                    margin: Some(m.margin),
                    expected: Some(expected),
                    equality: m.is_equality_case,
                    obstruction: None,
                    note: None,
                    passes,
                })
            })
            .collect::<Result<Vec<_>>>()?,
        GalleryKind::Counterexamples => {
            let n = 1 + params.pad;
            let u = BlockOperator::from(ComplexMatrix::zeros(n, n));
            let mut e = ComplexMatrix::zeros(n, n);
            e[(0, 0)] = crate::numerics::ONE;
            let v = BlockOperator::from(e);
            let d = u.distance(&v)?;
            let obstruction = non_homotopy_certificate(&u, &v, cfg)?;
            let note = match path_thm4(&u, &v, PATH_RESOLUTION, cfg) {
                Ok(_) => "path construction unexpectedly succeeded".to_string(),
                Err(e) => format!("path construction refused: {e}"),
            };
            let passes = matches!(obstruction, HomotopyObstruction::RankMismatch { .. });
            vec![GalleryEntry {
                theta: None,
                lhs: u.gram().distance(&v.gram())?,
                u,
                v,
                d,
                rhs: None,
                margin: None,
                expected: Some((1.0, 1.0)),
                equality: false,
                obstruction: Some(obstruction),
                note: Some(note),
                passes,
            }]
        }
    };
    let equality_cases = entries.iter().filter(|e| e.equality).count();
    let passes = entries.iter().all(|e| e.passes);
    Ok(GalleryReport {
        kind,
        params: *params,
        entries,
        equality_cases,
        passes,
    })
}

pub fn cmd_gallery(
    kind: GalleryKind,
    params: &GalleryParams,
    cfg: &ToleranceConfig,
    out: &Path,
) -> Result<(i32, GalleryReport)> {
    let report = run_gallery(kind, params, cfg)?;
    write_json(out, &report)?;
    Ok((if report.passes { EXIT_OK } else { EXIT_FAILURE }, report))
}

// ---------------------------------------------------------------------------
// Paths and decompositions

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathMode {
    /// Support freeze then rotation, for `‖u − v‖ < 1`.
    Thm4,
    /// Polar factor of the segment, for extremal endpoints with `‖u − v‖ < 2`.
    Thm5,
}

impl FromStr for PathMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "thm4" => Ok(Self::Thm4),
            "thm5" => Ok(Self::Thm5),
            _ => Err(Error::InvalidArgument(format!("unknown path mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PathReport {
    pub mode: PathMode,
    pub distance: f64,
    pub path: IsometryPath,
    pub certificate: PathCertificate,
    /// `1 − d/2`, the guaranteed lower bound on the segment gap.
    pub gap_bound: Option<f64>,
    pub passes: bool,
}

pub fn run_path(
    u: &BlockOperator,
    v: &BlockOperator,
    mode: PathMode,
    resolution: usize,
    cfg: &ToleranceConfig,
) -> Result<PathReport> {
    cfg.validate()?;
    let (path, extremal) = match mode {
        PathMode::Thm4 => (path_thm4(u, v, resolution, cfg)?, false),
        PathMode::Thm5 => (path_thm5(u, v, resolution, cfg)?, true),
    };
    let distance = u.distance(v)?;
    let certificate = verify_path(&path, Some((u, v)), extremal, cfg);
    let gap_bound = extremal.then(|| 1.0 - distance / 2.0);
    let passes = certificate.passes
        && certificate.rank_constant
        && match gap_bound {
            Some(b) => {
                certificate.endpoint_patterns_equal
                    && certificate.min_segment_gap.is_some_and(|g| g >= b - GAP_SLACK)
            }
            None => true,
        };
    Ok(PathReport {
        mode,
        distance,
        path,
        certificate,
        gap_bound,
        passes,
    })
}

#[derive(Deserialize)]
#[serde(untagged)]
enum OperatorFile {
    Block(BlockOperator),
    Matrix(ComplexMatrix),
}

/// Reads a block operator, accepting a bare matrix as a single block.
pub fn read_operator(path: &Path) -> Result<BlockOperator> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    match serde_json::from_str::<OperatorFile>(&text) {
        Ok(OperatorFile::Block(b)) => Ok(b),
        Ok(OperatorFile::Matrix(m)) => Ok(m.into()),
        Err(e) => Err(Error::Parse(format!("{}: {e}", path.display()))),
    }
}

/// Reads a matrix, accepting a single-block operator.
pub fn read_matrix(path: &Path) -> Result<ComplexMatrix> {
    let op = read_operator(path)?;
    if op.num_blocks() != 1 {
        return Err(Error::ShapeMismatch(format!(
            "{}: expected one block, found {}",
            path.display(),
            op.num_blocks()
        )));
    }
    Ok(op.into_blocks().remove(0))
}

pub fn cmd_path(
    u_file: &Path,
    v_file: &Path,
    mode: PathMode,
    resolution: usize,
    out: &Path,
    cfg: &ToleranceConfig,
) -> Result<(i32, PathReport)> {
    let u = read_operator(u_file)?;
    let v = read_operator(v_file)?;
    let report = run_path(&u, &v, mode, resolution, cfg)?;
    write_json(out, &report)?;
    Ok((if report.passes { EXIT_OK } else { EXIT_FAILURE }, report))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecompositionReport {
    pub dims: CornerDims,
    /// Principal angles in `(0, π/2)`, ascending, rounded to 12 significant digits.
    pub angles: Vec<f64>,
    pub basis: ComplexMatrix,
    /// `max(‖p − p̂‖, ‖q − q̂‖)` for the reconstructions from the canonical form.
    pub residual: f64,
    pub distance: f64,
}

fn round_significant(x: f64) -> f64 {
    format!("{x:.11e}").parse().unwrap_or(x)
}

pub fn run_decomp(p: &ComplexMatrix, q: &ComplexMatrix, cfg: &ToleranceConfig) -> Result<DecompositionReport> {
    cfg.validate()?;
    let dec = five_part_decomposition(p, q, cfg)?;
    Ok(DecompositionReport {
        dims: dec.dims,
        angles: dec.angles.iter().copied().map(round_significant).collect(),
        residual: dec.reconstruction_residual(p, q),
        distance: dec.distance(),
        basis: dec.basis,
    })
}

pub fn cmd_decomp(p_file: &Path, q_file: &Path, out: &Path, cfg: &ToleranceConfig) -> Result<(i32, DecompositionReport)> {
    let p = read_matrix(p_file)?;
    let q = read_matrix(q_file)?;
    let report = run_decomp(&p, &q, cfg)?;
    write_json(out, &report)?;
    Ok((EXIT_OK, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> ToleranceConfig {
        ToleranceConfig::default()
    }

    fn run_cfg(trials: usize) -> RunConfig {
        let mut c = RunConfig::new("unused.json");
        c.trials = trials;
        c.seed = 7;
        c
    }

    #[test]
    fn config_validation() {
        assert!(run_cfg(1).validate().is_ok());
        assert!(run_cfg(0).validate().is_err());
        let mut c = run_cfg(1);
        c.max_dim = 1;
        assert!(c.validate().is_err());
        c.max_dim = 65;
        assert!(c.validate().is_err());
        c.max_dim = 64;
        c.tolerances.iso_tol = -1.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn names_round_trip() {
        for k in SweepKind::ALL {
            assert_eq!(k.name().parse::<SweepKind>().unwrap(), k);
        }
        assert!("thm2".parse::<SweepKind>().is_err());
        assert_eq!("csv".parse::<Format>().unwrap(), Format::Csv);
        assert!("xml".parse::<Format>().is_err());
    }

    #[test]
    fn generators_respect_distance_caps() {
        let c = cfg();
        for k in 0..40 {
            let mut rng = stream_rng(3, k);
            let (u, v) = random_near_pair(&mut rng, 6, 0.95, &c).unwrap();
            assert!(u.distance(&v).unwrap() <= 0.95);
            assert_eq!(crate::operators::partial_isometry_ranks(&u), crate::operators::partial_isometry_ranks(&v));
            let (u, v) = random_extremal_pair(&mut rng, 6, THM7_MAX_DISTANCE, &c).unwrap();
            assert!(u.distance(&v).unwrap() <= THM7_MAX_DISTANCE);
            assert!(crate::operators::is_extremal(&v, &c).unwrap());
        }
    }

    #[test]
    fn discontinuity_points_have_both_defects() {
        let c = cfg();
        for k in 0..20 {
            let a = random_discontinuity_point(&mut stream_rng(5, k), 6).unwrap();
            assert!(!continuity_criterion(&a, &c).unwrap().is_continuity_point);
            let a = random_continuity_point(&mut stream_rng(5, k), 6).unwrap();
            assert!(continuity_criterion(&a, &c).unwrap().is_continuity_point);
        }
    }

    #[test]
    fn small_sweeps_pass_and_are_ordered() {
        for kind in SweepKind::ALL {
            let r = run_sweep(kind, &run_cfg(12)).unwrap();
            assert!(r.passes(), "{kind}: {:?}", r.records.iter().find(|x| x.status == TrialStatus::Violation));
            assert!(r.records.iter().enumerate().all(|(i, x)| x.trial == i));
            assert!(r.worst_case.is_some());
        }
    }

    #[test]
    fn out_of_range_pairs_are_skipped() {
        let u: BlockOperator = ComplexMatrix::from_real_rows(&[&[1.0, 0.0]]).into();
        let v: BlockOperator = ComplexMatrix::from_real_rows(&[&[-1.0, 0.0]]).into();
        let mut r = TrialRecord::new(0, 0, &u.shape());
        evaluate_thm7(&mut r, &u, &v, &cfg()).unwrap();
        assert_eq!(r.status, TrialStatus::Skipped);
        assert!(r.flags.contains(&"out_of_range".to_string()));
    }

    #[test]
    fn csv_has_fixed_header() {
        let r = run_sweep(SweepKind::Thm1, &run_cfg(3)).unwrap();
        let text = render_sweep(&r, Format::Csv).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "trial,seed,d,lhs,rhs,margin,flags");
        assert_eq!(lines.count(), 3);
    }

    #[test]
    fn galleries() {
        let c = cfg();
        let g = run_gallery(GalleryKind::Thm7Sharpness, &GalleryParams::default(), &c).unwrap();
        assert_eq!(g.equality_cases, 10);
        assert!(g.passes);
        let g = run_gallery(GalleryKind::Thm1Equality, &GalleryParams { grid: 5, pad: 1 }, &c).unwrap();
        assert!(g.passes && g.equality_cases == 5);
        let g = run_gallery(GalleryKind::Counterexamples, &GalleryParams::default(), &c).unwrap();
        assert!(matches!(
            g.entries[0].obstruction,
            Some(HomotopyObstruction::RankMismatch { block: 0, rank_u: 0, rank_v: 1 })
        ));
        assert!(run_gallery(GalleryKind::Thm1Equality, &GalleryParams { grid: 0, pad: 0 }, &c).is_err());
    }

    #[test]
    fn rounding_keeps_twelve_digits() {
        assert_eq!(round_significant(1.0 / 3.0), 0.333333333333);
        assert_eq!(round_significant(0.0), 0.0);
    }
}
