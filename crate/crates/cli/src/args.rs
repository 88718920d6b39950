use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use f0est_core::harness::StreamSpec;
use f0est_core::io::report::ReportFormat;
use f0est_core::io::InputMode;
use f0est_core::ParamError;

/// Distinct-elements estimation by adaptive sampling.
///
/// Every flag can also be set through an environment variable named
/// F0EST_<FLAG>, e.g. F0EST_EPSILON or F0EST_STREAM_BOUND.
#[derive(Debug, Parser)]
#[command(name = "f0est", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate the number of distinct elements in a stream.
    Estimate(EstimateArgs),
    /// Count distinct elements exactly.
    Exact(ExactArgs),
    /// Run repeated estimations on a workload and check the accuracy,
    /// fail and memory guarantees.
    Validate(ValidateArgs),
    /// Write a workload with known distinct count plus a ground-truth sidecar.
    Generate(GenerateArgs),
    /// Continue an estimation from a snapshot.
    Resume(ResumeArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Tokens,
    U64le,
}

impl From<ModeArg> for InputMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Tokens => InputMode::Tokens,
            ModeArg::U64le => InputMode::U64Le,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ReportArg {
    Json,
    Csv,
}

impl From<ReportArg> for ReportFormat {
    fn from(r: ReportArg) -> Self {
        match r {
            ReportArg::Json => ReportFormat::Json,
            ReportArg::Csv => ReportFormat::Csv,
        }
    }
}

#[derive(Debug, Args)]
pub struct SketchArgs {
    /// Relative accuracy, in (0, 1).
    #[arg(long, env = "F0EST_EPSILON")]
    pub epsilon: f64,
    /// Failure probability, in (0, 1).
    #[arg(long, env = "F0EST_DELTA")]
    pub delta: f64,
    /// Upper bound on the stream length. Over-estimating only costs space.
    #[arg(long, env = "F0EST_STREAM_BOUND")]
    pub stream_bound: u64,
    /// Test only: replace the sample capacity. Voids all guarantees.
    #[arg(long, env = "F0EST_THRESH_OVERRIDE")]
    pub thresh_override: Option<u64>,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    #[arg(long, value_enum, default_value = "json", env = "F0EST_REPORT")]
    pub report: ReportArg,
    /// Report destination; standard output when absent.
    #[arg(long, env = "F0EST_OUTPUT")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub sketch: SketchArgs,
    #[arg(long, default_value_t = 0, env = "F0EST_SEED")]
    pub seed: u64,
    /// Stream file; `-` reads standard input.
    #[arg(long, default_value = "-", env = "F0EST_INPUT")]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "tokens", env = "F0EST_MODE")]
    pub mode: ModeArg,
    /// Write a checkpoint here after the input is consumed.
    #[arg(long, env = "F0EST_SNAPSHOT")]
    pub snapshot: Option<PathBuf>,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct ResumeArgs {
    /// Checkpoint to continue from.
    #[arg(long, env = "F0EST_SNAPSHOT")]
    pub snapshot: PathBuf,
    #[arg(long, default_value = "-", env = "F0EST_INPUT")]
    pub input: PathBuf,
    /// Must agree with the snapshot's element kind when given.
    #[arg(long, value_enum, env = "F0EST_MODE")]
    pub mode: Option<ModeArg>,
    /// Write the updated checkpoint here.
    #[arg(long, env = "F0EST_CHECKPOINT")]
    pub checkpoint: Option<PathBuf>,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct ExactArgs {
    #[arg(long, default_value = "-", env = "F0EST_INPUT")]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "tokens", env = "F0EST_MODE")]
    pub mode: ModeArg,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum KindArg {
    DistinctRun,
    RepeatedShuffle,
    SingleElement,
    Zipf,
    Blocks,
}

#[derive(Debug, Args)]
pub struct StreamArgs {
    #[arg(long, value_enum, default_value = "repeated-shuffle", env = "F0EST_KIND")]
    pub kind: KindArg,
    /// Distinct elements in the workload (forced to 1 for single-element).
    #[arg(long, env = "F0EST_F0")]
    pub f0: Option<u64>,
    /// Workload length; derived from f0 where the kind allows it.
    #[arg(long, env = "F0EST_LENGTH")]
    pub length: Option<u64>,
    #[arg(long, default_value_t = 2, env = "F0EST_REPEAT")]
    pub repeat: u64,
    #[arg(long, default_value_t = 1.0, env = "F0EST_ZIPF_EXPONENT")]
    pub zipf_exponent: f64,
    #[arg(long, default_value_t = 10, env = "F0EST_BLOCKS")]
    pub blocks: u64,
}

impl StreamArgs {
    pub fn to_spec(&self, seed: u64) -> Result<StreamSpec, ParamError> {
        let need_f0 = || self.f0.ok_or_else(|| ParamError::new("f0", "--f0 is required for this kind"));
        let need_length = || {
            self.length
                .ok_or_else(|| ParamError::new("length", "--length is required for this kind"))
        };
        let spec = match self.kind {
            KindArg::DistinctRun => {
                let f0 = need_f0()?;
                StreamSpec::distinct_run(f0).with_length(self.length.unwrap_or(f0))
            }
            KindArg::RepeatedShuffle => {
                let spec = StreamSpec::repeated_shuffle(need_f0()?, self.repeat, seed);
                match self.length {
                    Some(l) => spec.with_length(l),
                    None => spec,
                }
            }
            KindArg::SingleElement => {
                if self.f0.is_some_and(|f| f != 1) {
                    return Err(ParamError::new("f0", "single-element streams have f0 = 1"));
                }
                StreamSpec::single_element(need_length()?)
            }
            KindArg::Zipf => StreamSpec::zipf(need_f0()?, need_length()?, self.zipf_exponent, seed),
            KindArg::Blocks => {
                let f0 = need_f0()?;
                StreamSpec::blocks(f0, self.length.unwrap_or(f0), self.blocks, seed)
            }
        };
        spec.validate()?;
        Ok(spec.with_seed(seed))
    }
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub sketch: SketchArgs,
    #[arg(long, default_value_t = 400, value_parser = clap::value_parser!(u64).range(1..), env = "F0EST_TRIALS")]
    pub trials: u64,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..1025), env = "F0EST_PARALLELISM")]
    pub parallelism: u64,
    /// Master seed; trial i uses substream i.
    #[arg(long, default_value_t = 0, env = "F0EST_SEED")]
    pub seed: u64,
    /// Seed of the generated workload; defaults to --seed.
    #[arg(long, env = "F0EST_STREAM_SEED")]
    pub stream_seed: Option<u64>,
    /// Regenerate the workload for every trial instead of reusing one stream.
    #[arg(long)]
    pub regenerate: bool,
    /// Validate on a stream file instead of a generated workload.
    #[arg(long, env = "F0EST_INPUT", conflicts_with = "regenerate")]
    pub input: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "tokens", env = "F0EST_MODE")]
    pub mode: ModeArg,
    /// Report check results without turning failures into a nonzero exit.
    #[arg(long)]
    pub informational: bool,
    #[command(flatten)]
    pub stream: StreamArgs,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub stream: StreamArgs,
    #[arg(long, default_value_t = 0, env = "F0EST_SEED")]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "tokens", env = "F0EST_MODE")]
    pub mode: ModeArg,
    /// Stream file to write; the sidecar goes to `<output>.truth.json`.
    #[arg(long, env = "F0EST_OUTPUT")]
    pub output: PathBuf,
}
