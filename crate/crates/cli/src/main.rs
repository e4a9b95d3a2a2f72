use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use isometrica::harness::{
    self, exit_code_for, Format, GalleryKind, GalleryParams, PathMode, RunConfig, SweepKind,
};
use isometrica::{Error, ToleranceConfig};

/// Seeded experiments on partial isometries: inequality sweeps, galleries
/// of extremal cases, certified paths and two-projection decompositions.
#[derive(Parser)]
#[command(name = "isometrica", version)]
struct Cli {
    #[command(flatten)]
    tol: TolArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct TolArgs {
    /// Relative cutoff for numerical rank.
    #[arg(long, global = true, default_value_t = ToleranceConfig::default().rank_tol)]
    tol_rank: f64,
    /// Tolerance for partial-isometry and projection checks.
    #[arg(long, global = true, default_value_t = ToleranceConfig::default().iso_tol)]
    tol_iso: f64,
}

impl TolArgs {
    fn config(&self) -> ToleranceConfig {
        ToleranceConfig {
            rank_tol: self.tol_rank,
            iso_tol: self.tol_iso,
            ..ToleranceConfig::default()
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run a seeded sweep of random trials.
    Sweep {
        which: Which,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = RunConfig::DEFAULT_TRIALS)]
        trials: usize,
        #[arg(long, default_value_t = RunConfig::DEFAULT_MAX_DIM)]
        max_dim: usize,
        #[arg(long, value_enum, default_value_t = OutFormat::Json)]
        format: OutFormat,
        /// Report file; defaults to `sweep-<which>.<format>`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Emit constructed extremal pairs with their measured norms.
    Gallery {
        kind: Kind,
        /// Number of angles in the θ-grid over (0, π/2].
        #[arg(long, default_value_t = GalleryParams::default().grid)]
        grid: usize,
        /// Identity padding dimension.
        #[arg(long, default_value_t = 0)]
        pad: usize,
        #[arg(long, default_value = "gallery.json")]
        out: PathBuf,
    },
    /// Build and certify a path between two partial isometries.
    Path {
        u_file: PathBuf,
        v_file: PathBuf,
        #[arg(long, value_enum, default_value_t = Mode::Thm4)]
        mode: Mode,
        /// Initial uniform grid size before adaptive refinement.
        #[arg(long, default_value_t = harness::PATH_RESOLUTION)]
        resolution: usize,
        #[arg(long, default_value = "path.json")]
        out: PathBuf,
    },
    /// Canonical five-part decomposition of a pair of projections.
    Decomp {
        p_file: PathBuf,
        q_file: PathBuf,
        #[arg(long, default_value = "decomp.json")]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Which {
    Thm1,
    Thm7,
    Thm4,
    Thm5,
    Thm8,
}

impl From<Which> for SweepKind {
    fn from(w: Which) -> Self {
        match w {
            Which::Thm1 => SweepKind::Thm1,
            Which::Thm7 => SweepKind::Thm7,
            Which::Thm4 => SweepKind::Thm4,
            Which::Thm5 => SweepKind::Thm5,
            Which::Thm8 => SweepKind::Thm8,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum OutFormat {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    #[value(name = "thm7_sharpness")]
    Thm7Sharpness,
    #[value(name = "thm1_equality")]
    Thm1Equality,
    #[value(name = "counterexamples")]
    Counterexamples,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Thm4,
    Thm5,
}

fn run(cli: Cli) -> Result<i32, Error> {
    let tol = cli.tol.config();
    match cli.command {
        Command::Sweep {
            which,
            seed,
            trials,
            max_dim,
            format,
            out,
        } => {
            let kind = SweepKind::from(which);
            let format = match format {
                OutFormat::Json => Format::Json,
                OutFormat::Csv => Format::Csv,
            };
            let ext = match format {
                Format::Json => "json",
                Format::Csv => "csv",
            };
            let cfg = RunConfig {
                seed,
                trials,
                max_dim,
                tolerances: tol,
                output_path: out.unwrap_or_else(|| PathBuf::from(format!("sweep-{kind}.{ext}"))),
                format,
            };
            let (code, report) = harness::cmd_sweep(kind, &cfg)?;
            println!("{}", report.summary());
            println!("report written to {}", cfg.output_path.display());
            Ok(code)
        }
        Command::Gallery { kind, grid, pad, out } => {
            let kind = match kind {
                Kind::Thm7Sharpness => GalleryKind::Thm7Sharpness,
                Kind::Thm1Equality => GalleryKind::Thm1Equality,
                Kind::Counterexamples => GalleryKind::Counterexamples,
            };
            let (code, report) = harness::cmd_gallery(kind, &GalleryParams { grid, pad }, &tol, &out)?;
            println!(
                "{} entries, {} equality cases, {}",
                report.entries.len(),
                report.equality_cases,
                if report.passes { "all checks pass" } else { "CHECKS FAILED" }
            );
            Ok(code)
        }
        Command::Path {
            u_file,
            v_file,
            mode,
            resolution,
            out,
        } => {
            let mode = match mode {
                Mode::Thm4 => PathMode::Thm4,
                Mode::Thm5 => PathMode::Thm5,
            };
            let (code, report) = harness::cmd_path(&u_file, &v_file, mode, resolution, &out, &tol)?;
            let c = &report.certificate;
            println!(
                "distance {:.6}, {} samples, max step {:.4}, max residual {:.2e}: {}",
                report.distance,
                c.samples,
                c.max_step,
                c.max_residual,
                if report.passes { "certified" } else { "CERTIFICATE FAILED" }
            );
            Ok(code)
        }
        Command::Decomp { p_file, q_file, out } => {
            let (code, report) = harness::cmd_decomp(&p_file, &q_file, &out, &tol)?;
            let d = report.dims;
            println!(
                "dims (H00, H01, H10, H11) = ({}, {}, {}, {}), {} angles, residual {:.2e}",
                d.d00,
                d.d01,
                d.d10,
                d.d11,
                report.angles.len(),
                report.residual
            );
            Ok(code)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    };
    ExitCode::from(code as u8)
}
