//! Command-line front end: gallery generation, compression, reconstruction,
//! file inspection, raw ingestion and benchmarking.
//!
//! Exit codes: 0 on success, 2 for usage errors (including invalid
//! parameter combinations), 3 for malformed input files, 1 otherwise.

pub mod format;
pub mod report;

use std::ffi::OsString;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::baselines::{
    adaptive_r_sthosvd, ascending, hosvd, hosvd_with, r_gn_st_tucker, r_sthosvd, sthosvd,
    sthosvd_eps, Truncation,
};
use crate::error::{Error, Result};
use crate::gallery::{GalleryName, GallerySpec};
use crate::rtsms::{rtsms, rtsms_fixed_rank, RtsmsConfig, RunReport};
use crate::sketching::RandomStream;
use crate::tensor::{
    compression_ratio, residual_with_cap, DenseTensor, TuckerDecomposition, DEFAULT_RESIDUAL_CAP,
};

use format::{
    decode_raw, load_tensor, load_tucker, read_file_header, save_tensor, save_tucker, Endian,
    FileHeader, RawType,
};
use report::{append_lines, strip_timings, AggregateRecord, ReportRecord};

/// Oversampling used by the randomized STHOSVD baseline.
const RSTHOSVD_OVERSAMPLE: usize = 5;

#[derive(Debug, Parser)]
#[command(
    name = "rtsms",
    version,
    about = "Randomized Tucker compression of dense tensors"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic tensor to a tensor file.
    Gallery(GalleryArgs),
    /// Compress a tensor file into a Tucker file.
    Compress(CompressArgs),
    /// Expand a Tucker file back into a tensor file.
    Reconstruct(ReconstructArgs),
    /// Print the header of a tensor or Tucker file.
    Info(InfoArgs),
    /// Convert a headerless raw dump into a tensor file.
    Ingest(IngestArgs),
    /// Run algorithms over a gallery suite and append JSON-lines reports.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct GalleryArgs {
    /// runge, wagon, octant, hilbert or noisy_lowrank.
    pub name: GalleryName,
    #[arg(long, value_delimiter = ',', required = true)]
    pub dims: Vec<usize>,
    #[arg(long, env = "RTSMS_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 10)]
    pub true_rank: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Algorithm {
    Rtsms,
    Rhosvdsms,
    Sthosvd,
    Rsthosvd,
    AdaptiveRsthosvd,
    Hosvd,
    GnSt,
}

impl Algorithm {
    pub fn accepts_tol(self) -> bool {
        !matches!(self, Algorithm::Rsthosvd | Algorithm::GnSt)
    }

    pub fn accepts_rank(self) -> bool {
        self != Algorithm::AdaptiveRsthosvd
    }

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Rtsms => "rtsms",
            Algorithm::Rhosvdsms => "rhosvdsms",
            Algorithm::Sthosvd => "sthosvd",
            Algorithm::Rsthosvd => "rsthosvd",
            Algorithm::AdaptiveRsthosvd => "adaptive-rsthosvd",
            Algorithm::Hosvd => "hosvd",
            Algorithm::GnSt => "gn-st",
        }
    }
}

/// When multilinear singular values are thresholded by the sketching drivers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ThresholdMode {
    /// After the HOSVD conversion (rhosvdsms only).
    After,
    /// After each mode is processed.
    InLoop,
    /// Never.
    None,
}

/// Target of a run: a relative tolerance or a multilinear rank.
#[derive(Debug, Clone, PartialEq)]
pub enum Target {
    Tol(f64),
    Ranks(Vec<usize>),
}

/// Options shared by all algorithms.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    /// 0-based processing order; ascending when `None`.
    pub order: Option<Vec<usize>>,
    pub k: usize,
    pub refinement: bool,
    pub threshold: Option<ThresholdMode>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            order: None,
            k: 4,
            refinement: true,
            threshold: None,
        }
    }
}

fn usage(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

/// Runs one algorithm and fills the algorithm, target, rank and timing
/// fields of the report. Residual and compression ratio are left empty.
pub fn run_algorithm(
    alg: Algorithm,
    a: &DenseTensor,
    target: &Target,
    opts: &RunOptions,
    rs: &mut RandomStream,
) -> Result<(TuckerDecomposition, RunReport)> {
    match target {
        Target::Tol(_) if !alg.accepts_tol() => {
            return Err(usage(format!("{} takes --rank, not --tol", alg.name())))
        }
        Target::Ranks(_) if !alg.accepts_rank() => {
            return Err(usage(format!("{} takes --tol, not --rank", alg.name())))
        }
        _ => {}
    }
    if opts.threshold.is_some() && !matches!(alg, Algorithm::Rtsms | Algorithm::Rhosvdsms) {
        return Err(usage("--threshold applies to rtsms and rhosvdsms only"));
    }
    let d = a.order();
    let order = opts.order.clone().unwrap_or_else(|| ascending(d));

    if matches!(alg, Algorithm::Rtsms | Algorithm::Rhosvdsms) {
        let mut cfg = RtsmsConfig {
            processing_order: opts.order.clone(),
            k: opts.k,
            convert_to_hosvd: alg == Algorithm::Rhosvdsms,
            ..RtsmsConfig::default()
        };
        cfg.lsq.k = opts.k;
        cfg.lsq.refinement = opts.refinement;
        let threshold = opts.threshold.unwrap_or(ThresholdMode::After);
        if threshold == ThresholdMode::After && alg == Algorithm::Rtsms && opts.threshold.is_some()
        {
            return Err(usage("--threshold after requires rhosvdsms"));
        }
        return match target {
            Target::Tol(tol) => {
                cfg.tol = *tol;
                cfg.threshold_after = threshold == ThresholdMode::After;
                cfg.in_loop_truncation = threshold == ThresholdMode::InLoop;
                rtsms(a, &cfg, rs)
            }
            Target::Ranks(r) => {
                if opts.threshold.is_some() {
                    return Err(usage("--threshold needs --tol"));
                }
                rtsms_fixed_rank(a, r, &cfg, rs)
            }
        };
    }

    let mut report = RunReport::new(alg.name(), rs.seed());
    let start = Instant::now();
    let dec = match (alg, target) {
        (Algorithm::Sthosvd, Target::Tol(t)) => sthosvd_eps(a, *t, &order)?,
        (Algorithm::Sthosvd, Target::Ranks(r)) => sthosvd(a, r, &order)?,
        (Algorithm::Hosvd, Target::Tol(t)) => {
            hosvd_with(a, &Truncation::Tolerance(*t))?.decomposition
        }
        (Algorithm::Hosvd, Target::Ranks(r)) => hosvd(a, r)?,
        (Algorithm::Rsthosvd, Target::Ranks(r)) => {
            r_sthosvd(a, r, RSTHOSVD_OVERSAMPLE, &order, rs)?
        }
        (Algorithm::AdaptiveRsthosvd, Target::Tol(t)) => {
            adaptive_r_sthosvd(a, *t, None, &order, rs)?
        }
        (Algorithm::GnSt, Target::Ranks(r)) => r_gn_st_tucker(a, r, &order, rs)?,
        _ => unreachable!("target compatibility checked above"),
    };
    report.seconds.total = start.elapsed().as_secs_f64();
    match target {
        Target::Tol(t) => report.tol = Some(*t),
        Target::Ranks(r) => report.ranks = Some(r.clone()),
    }
    report.ranks_raw = dec.ranks();
    report.ranks_thresholded = dec.ranks();
    Ok((dec, report))
}

/// Adds residual and compression ratio to a report. Tensors above `cap`
/// elements get a sampled residual, flagged in the report.
pub fn finish_report(
    a: &DenseTensor,
    dec: &TuckerDecomposition,
    report: &mut RunReport,
    cap: usize,
) -> Result<()> {
    report.compression_ratio = Some(compression_ratio(a.dims(), dec));
    if a.frobenius_norm() > 0.0 {
        let mut rs = RandomStream::new(report.seed ^ 0x5eed_5eed_5eed_5eed);
        let (res, estimated) = residual_with_cap(a, dec, cap, &mut rs)?;
        report.relative_residual = Some(res);
        report.estimated = estimated;
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct CompressArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum)]
    pub algorithm: Algorithm,
    #[arg(long, conflicts_with = "rank", required_unless_present = "rank")]
    pub tol: Option<f64>,
    /// Multilinear rank, one entry per mode or a single entry for all modes.
    #[arg(long, value_delimiter = ',')]
    pub rank: Option<Vec<usize>>,
    /// Processing order as a permutation of 1..d.
    #[arg(long, value_delimiter = ',')]
    pub order: Option<Vec<usize>>,
    #[arg(long, env = "RTSMS_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Sketch oversampling factor.
    #[arg(long, default_value_t = 4)]
    pub k: usize,
    #[arg(long)]
    pub no_refinement: bool,
    #[arg(long, value_enum)]
    pub threshold: Option<ThresholdMode>,
    /// Append a JSON-lines report to this file.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Zero all timings in the report.
    #[arg(long)]
    pub reproducible: bool,
    /// Largest element count for which the residual is computed exactly.
    #[arg(long, default_value_t = DEFAULT_RESIDUAL_CAP)]
    pub residual_cap: usize,
}

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct InfoArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DtypeArg {
    F32,
    F64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EndianArg {
    Le,
    Be,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub raw: PathBuf,
    #[arg(long, value_enum)]
    pub dtype: DtypeArg,
    #[arg(long, value_delimiter = ',', required = true)]
    pub dims: Vec<usize>,
    #[arg(long, value_enum, default_value_t = EndianArg::Le)]
    pub endian: EndianArg,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub suite: GalleryName,
    /// Mode sizes; each gives a cubical tensor (order 4 for hilbert).
    #[arg(long, value_delimiter = ',', default_value = "50")]
    pub sizes: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    pub tols: Vec<f64>,
    /// Ranks applied to every mode, for algorithms that take a rank.
    #[arg(long, value_delimiter = ',')]
    pub ranks: Vec<usize>,
    #[arg(long, value_delimiter = ',', value_enum, required = true)]
    pub algorithms: Vec<Algorithm>,
    #[arg(long, default_value_t = 5)]
    pub repeats: usize,
    #[arg(long)]
    pub out: PathBuf,
    /// Seed of the first repeat; repeat j uses `seed + j`.
    #[arg(long, env = "RTSMS_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-6)]
    pub noise: f64,
    #[arg(long, default_value_t = 10)]
    pub true_rank: usize,
    #[arg(long)]
    pub reproducible: bool,
}

/// Parses `args` (including the program name), executes the command and
/// returns the process exit code. Diagnostics go to standard error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidArgument(_) | Error::ShapeMismatch(_) => 2,
        Error::Format(_) => 3,
        Error::Singular(_) | Error::Io(_) => 1,
    }
}

pub fn execute(command: Command) -> Result<()> {
    match command {
        Command::Gallery(a) => cmd_gallery(&a),
        Command::Compress(a) => cmd_compress(&a),
        Command::Reconstruct(a) => cmd_reconstruct(&a),
        Command::Info(a) => cmd_info(&a),
        Command::Ingest(a) => cmd_ingest(&a),
        Command::Bench(a) => cmd_bench(&a),
    }
}

fn cmd_gallery(args: &GalleryArgs) -> Result<()> {
    if !(args.noise >= 0.0) {
        return Err(usage("--noise must be nonnegative"));
    }
    let spec = GallerySpec {
        name: args.name,
        dims: args.dims.clone(),
        seed: args.seed,
        noise_level: args.noise,
        true_rank: args.true_rank,
    };
    save_tensor(&args.out, &spec.build()?)
}

/// Expands a single rank to all modes and checks the length.
fn expand_ranks(r: &[usize], d: usize) -> Result<Vec<usize>> {
    match r.len() {
        1 => Ok(vec![r[0]; d]),
        n if n == d => Ok(r.to_vec()),
        n => Err(usage(format!(
            "--rank has {n} entries for an order-{d} tensor"
        ))),
    }
}

fn zero_based_order(order: &[usize]) -> Result<Vec<usize>> {
    order
        .iter()
        .map(|&m| m.checked_sub(1).ok_or_else(|| usage("--order is 1-based")))
        .collect()
}

fn cmd_compress(args: &CompressArgs) -> Result<()> {
    let a = load_tensor(&args.input)?;
    let target = match (&args.tol, &args.rank) {
        (Some(t), None) => Target::Tol(*t),
        (None, Some(r)) => Target::Ranks(expand_ranks(r, a.order())?),
        _ => return Err(usage("exactly one of --tol and --rank is required")),
    };
    let opts = RunOptions {
        order: args.order.as_deref().map(zero_based_order).transpose()?,
        k: args.k,
        refinement: !args.no_refinement,
        threshold: args.threshold,
    };
    let mut rs = RandomStream::new(args.seed);
    let (dec, mut report) = run_algorithm(args.algorithm, &a, &target, &opts, &mut rs)?;
    save_tucker(&args.out, &dec)?;
    finish_report(&a, &dec, &mut report, args.residual_cap)?;
    if args.reproducible {
        strip_timings(&mut report);
    }
    if let Some(path) = &args.report {
        append_lines(path, &[ReportRecord::new(report.clone())])?;
    }
    println!(
        "{}: ranks {:?}, residual {}, compression {:.1}",
        report.algorithm,
        report.ranks_thresholded,
        report
            .relative_residual
            .map_or("n/a".to_string(), |r| format!(
                "{r:.3e}{}",
                if report.estimated { " (estimated)" } else { "" }
            )),
        report.compression_ratio.unwrap_or(f64::NAN)
    );
    Ok(())
}

fn cmd_reconstruct(args: &ReconstructArgs) -> Result<()> {
    let dec = load_tucker(&args.input)?;
    save_tensor(&args.out, &dec.reconstruct())
}

fn cmd_info(args: &InfoArgs) -> Result<()> {
    let join = |v: &[usize]| v.iter().map(usize::to_string).collect::<Vec<_>>().join("x");
    match read_file_header(&args.input)? {
        FileHeader::Tensor { dims } => {
            println!("kind: tensor");
            println!("order: {}", dims.len());
            println!("dims: {}", join(&dims));
            println!("elements: {}", dims.iter().product::<usize>());
        }
        h @ FileHeader::Tucker { .. } => {
            let FileHeader::Tucker { ranks, dims } = &h else {
                unreachable!()
            };
            let floats = (h.expected_len() - 6 - 16 * dims.len()) / 8;
            println!("kind: tucker");
            println!("order: {}", dims.len());
            println!("dims: {}", join(dims));
            println!("ranks: {}", join(ranks));
            println!("stored values: {floats}");
            println!(
                "compression ratio: {:.2}",
                dims.iter().product::<usize>() as f64 / floats as f64
            );
        }
    }
    Ok(())
}

fn cmd_ingest(args: &IngestArgs) -> Result<()> {
    let bytes = std::fs::read(&args.raw)?;
    let dtype = match args.dtype {
        DtypeArg::F32 => RawType::F32,
        DtypeArg::F64 => RawType::F64,
    };
    let endian = match args.endian {
        EndianArg::Le => Endian::Little,
        EndianArg::Be => Endian::Big,
    };
    save_tensor(&args.out, &decode_raw(&bytes, dtype, &args.dims, endian)?)
}

fn cmd_bench(args: &BenchArgs) -> Result<()> {
    if args.repeats == 0 {
        return Err(usage("--repeats must be positive"));
    }
    for &alg in &args.algorithms {
        let tols = alg.accepts_tol() && !args.tols.is_empty();
        let ranks = alg.accepts_rank() && !args.ranks.is_empty();
        if !tols && !ranks {
            return Err(usage(format!(
                "{} needs {}",
                alg.name(),
                if alg.accepts_tol() {
                    "--tols"
                } else {
                    "--ranks"
                }
            )));
        }
    }
    for &n in &args.sizes {
        let order = if args.suite == GalleryName::Hilbert {
            4
        } else {
            3
        };
        let spec = GallerySpec {
            name: args.suite,
            dims: vec![n; order],
            seed: args.seed,
            noise_level: args.noise,
            true_rank: args.true_rank,
        };
        let a = spec.build()?;
        let mut records = Vec::new();
        let mut aggregates = Vec::new();
        for &alg in &args.algorithms {
            let mut targets = Vec::new();
            if alg.accepts_tol() {
                targets.extend(args.tols.iter().map(|&t| Target::Tol(t)));
            }
            if alg.accepts_rank() {
                targets.extend(args.ranks.iter().map(|&r| Target::Ranks(vec![r; order])));
            }
            for target in &targets {
                let mut group = Vec::with_capacity(args.repeats);
                for rep in 0..args.repeats {
                    let mut rs = RandomStream::new(args.seed.wrapping_add(rep as u64));
                    let (dec, mut report) =
                        run_algorithm(alg, &a, target, &RunOptions::default(), &mut rs)?;
                    finish_report(&a, &dec, &mut report, DEFAULT_RESIDUAL_CAP)?;
                    if args.reproducible {
                        strip_timings(&mut report);
                    }
                    let mut rec = ReportRecord::new(report.clone());
                    rec.suite = Some(args.suite.to_string());
                    rec.dims = Some(a.dims().to_vec());
                    rec.repeat = Some(rep);
                    records.push(rec);
                    group.push(report);
                }
                let agg = AggregateRecord::from_records(args.suite.as_str(), a.dims(), &group);
                println!(
                    "{} n={} {}: time {:.3}s, residual {}, ranks {:?}",
                    agg.algorithm,
                    n,
                    match target {
                        Target::Tol(t) => format!("tol {t:e}"),
                        Target::Ranks(r) => format!("rank {}", r[0]),
                    },
                    agg.mean_seconds,
                    agg.geomean_residual
                        .map_or("n/a".into(), |r| format!("{r:.3e}")),
                    agg.mean_ranks
                );
                aggregates.push(agg);
            }
        }
        append_lines(&args.out, &records)?;
        append_lines(&args.out, &aggregates)?;
    }
    Ok(())
}
