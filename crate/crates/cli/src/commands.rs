use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use f0est_core::harness::{
    coverage_check, fail_rate_check, generate_stream, memory_check, HarnessError, StreamMode,
    TrialPlan, TrialReport,
};
use f0est_core::harness::run_trials_on_stream;
use f0est_core::io::report::{
    write_json, write_single_csv, write_validate_csv, EstimateReport, ExactReport,
    GroundTruthSidecar, ReportFormat, ValidateReport,
};
use f0est_core::io::formats::write_stream;
use f0est_core::io::{
    snapshot_element_kind, snapshot_read, snapshot_write, InputError, InputMode, SnapshotElement,
    SnapshotError, Token, TokenReader, U64LeReader,
};
use f0est_core::oracles::ExactCounter;
use f0est_core::randomness::RandomSource;
use f0est_core::{ParamError, SketchConfig, SketchError, SketchState};
use serde::Serialize;
use thiserror::Error;

use crate::args::{
    EstimateArgs, ExactArgs, GenerateArgs, OutputArgs, ResumeArgs, SketchArgs, ValidateArgs,
};

/// Non-error outcomes that still map to a nonzero exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Success,
    SketchFailed,
    ChecksFailed,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Open { path: PathBuf, source: io::Error },
    #[error("input: {0}")]
    Input(#[from] InputError),
    #[error("output: {0}")]
    Output(io::Error),
    #[error("stream exceeds --stream-bound {bound} at item {index}")]
    BoundExceeded { bound: u64, index: u64 },
    #[error("snapshot {path}: {reason}")]
    Snapshot { path: PathBuf, reason: String },
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Open { .. } | CliError::Input(_) | CliError::Output(_) => 3,
            CliError::BoundExceeded { .. } => 4,
            CliError::Snapshot { .. } => 5,
            // randomness underruns cannot happen with a live generator
            CliError::Internal(_) => 3,
        }
    }
}

impl From<ParamError> for CliError {
    fn from(e: ParamError) -> Self {
        CliError::Usage(e.to_string())
    }
}

fn snapshot_err(path: &Path, e: impl ToString) -> CliError {
    CliError::Snapshot { path: path.to_path_buf(), reason: e.to_string() }
}

fn open_input(path: &Path) -> Result<Box<dyn Read>, CliError> {
    if path.as_os_str() == "-" {
        return Ok(Box::new(io::stdin().lock()));
    }
    File::open(path)
        .map(|f| Box::new(f) as Box<dyn Read>)
        .map_err(|source| CliError::Open { path: path.to_path_buf(), source })
}

fn config_from(args: &SketchArgs) -> Result<SketchConfig, CliError> {
    let config = SketchConfig::new(args.epsilon, args.delta, args.stream_bound)?;
    match args.thresh_override {
        Some(t) => {
            let config = config.with_thresh_override(t)?;
            eprintln!(
                "f0est: warning: --thresh-override {t} is for testing only; accuracy and fail guarantees are void"
            );
            Ok(config)
        }
        None => Ok(config),
    }
}

enum Report<'a, T: Serialize> {
    Single(&'a T),
    Validate(&'a ValidateReport),
}

fn emit<T: Serialize>(out: &OutputArgs, report: Report<'_, T>) -> Result<(), CliError> {
    let sink: Box<dyn Write> = match &out.output {
        Some(path) => Box::new(
            File::create(path).map_err(|source| CliError::Open { path: path.clone(), source })?,
        ),
        None => Box::new(io::stdout().lock()),
    };
    let mut sink = BufWriter::new(sink);
    let format: ReportFormat = out.report.into();
    match (format, report) {
        (ReportFormat::Json, Report::Single(v)) => write_json(&mut sink, v),
        (ReportFormat::Json, Report::Validate(v)) => write_json(&mut sink, v),
        (ReportFormat::Csv, Report::Single(v)) => write_single_csv(&mut sink, v),
        (ReportFormat::Csv, Report::Validate(v)) => write_validate_csv(&mut sink, v),
    }
    .and_then(|()| sink.flush())
    .map_err(CliError::Output)
}

/// Feeds elements until the input ends or the sketch outputs fail.
fn feed<E, I>(state: &mut SketchState<E>, rng: &mut RandomSource, items: I) -> Result<(), CliError>
where
    E: SnapshotElement,
    I: Iterator<Item = Result<E, InputError>>,
{
    for item in items {
        let element = item?;
        match state.process(element, rng) {
            Ok(()) if state.is_failed() => return Ok(()),
            Ok(()) => {}
            Err(SketchError::BoundExceeded { bound }) => {
                return Err(CliError::BoundExceeded { bound, index: state.items_processed() + 1 })
            }
            Err(e) => return Err(CliError::Internal(e.to_string())),
        }
    }
    Ok(())
}

fn finish<E: SnapshotElement>(
    command: &'static str,
    mode: InputMode,
    state: &SketchState<E>,
    rng: &RandomSource,
    checkpoint: Option<&Path>,
    out: &OutputArgs,
) -> Result<Status, CliError> {
    if let (Some(path), false) = (checkpoint, state.is_failed()) {
        let bytes = snapshot_write(state, rng).map_err(|e| snapshot_err(path, e))?;
        fs::write(path, bytes).map_err(|e| snapshot_err(path, e))?;
    }
    let report = EstimateReport::from_state(command, mode, state, rng.seed());
    emit(out, Report::Single(&report))?;
    if state.is_failed() {
        if let Some(path) = checkpoint {
            eprintln!("f0est: no checkpoint written to {}: the sketch failed", path.display());
        }
        return Ok(Status::SketchFailed);
    }
    Ok(Status::Success)
}

pub fn estimate(args: EstimateArgs) -> Result<Status, CliError> {
    let config = config_from(&args.sketch)?;
    let input = open_input(&args.input)?;
    let mut rng = RandomSource::new(args.seed);
    let mode: InputMode = args.mode.into();
    match mode {
        InputMode::Tokens => {
            let mut state = SketchState::<Token>::new(config);
            feed(&mut state, &mut rng, TokenReader::new(BufReader::new(input)))?;
            finish("estimate", mode, &state, &rng, args.snapshot.as_deref(), &args.out)
        }
        InputMode::U64Le => {
            let mut state = SketchState::<u64>::new(config);
            feed(&mut state, &mut rng, U64LeReader::new(BufReader::new(input)))?;
            finish("estimate", mode, &state, &rng, args.snapshot.as_deref(), &args.out)
        }
    }
}

pub fn resume(args: ResumeArgs) -> Result<Status, CliError> {
    let path = &args.snapshot;
    let bytes = fs::read(path).map_err(|e| snapshot_err(path, e))?;
    let kind = snapshot_element_kind(&bytes).map_err(|e| snapshot_err(path, e))?;
    let mode = match kind.as_str() {
        <u64 as SnapshotElement>::KIND => InputMode::U64Le,
        <Token as SnapshotElement>::KIND => InputMode::Tokens,
        other => return Err(snapshot_err(path, format!("unknown element kind {other:?}"))),
    };
    if let Some(requested) = args.mode.map(InputMode::from) {
        if requested != mode {
            return Err(CliError::Usage(format!(
                "--mode {requested} does not match the snapshot, which holds {mode} elements"
            )));
        }
    }
    let input = open_input(&args.input)?;
    let checkpoint = args.checkpoint.as_deref();
    match mode {
        InputMode::Tokens => {
            let (mut state, mut rng) =
                snapshot_read::<Token>(&bytes).map_err(|e: SnapshotError| snapshot_err(path, e))?;
            feed(&mut state, &mut rng, TokenReader::new(BufReader::new(input)))?;
            finish("resume", mode, &state, &rng, checkpoint, &args.out)
        }
        InputMode::U64Le => {
            let (mut state, mut rng) =
                snapshot_read::<u64>(&bytes).map_err(|e: SnapshotError| snapshot_err(path, e))?;
            feed(&mut state, &mut rng, U64LeReader::new(BufReader::new(input)))?;
            finish("resume", mode, &state, &rng, checkpoint, &args.out)
        }
    }
}

fn count_exact<E, I>(items: I) -> Result<(u64, u64), CliError>
where
    E: SnapshotElement,
    I: Iterator<Item = Result<E, InputError>>,
{
    let mut counter = ExactCounter::new();
    let mut n = 0u64;
    for item in items {
        counter.insert(item?);
        n += 1;
    }
    Ok((counter.count(), n))
}

pub fn exact(args: ExactArgs) -> Result<Status, CliError> {
    let input = BufReader::new(open_input(&args.input)?);
    let mode: InputMode = args.mode.into();
    let (f0, items) = match mode {
        InputMode::Tokens => count_exact(TokenReader::new(input))?,
        InputMode::U64Le => count_exact(U64LeReader::new(input))?,
    };
    emit(&args.out, Report::Single(&ExactReport::new(mode, f0, items)))?;
    Ok(Status::Success)
}

fn read_all<E, I>(items: I) -> Result<Vec<E>, CliError>
where
    I: Iterator<Item = Result<E, InputError>>,
{
    items.map(|r| r.map_err(CliError::from)).collect()
}

fn harness_err(e: HarnessError) -> CliError {
    match e {
        HarnessError::Param(p) => p.into(),
        other => CliError::Internal(other.to_string()),
    }
}

pub fn validate(args: ValidateArgs) -> Result<Status, CliError> {
    let config = config_from(&args.sketch)?;
    let parallelism = args.parallelism as usize;
    let report: TrialReport = match &args.input {
        Some(path) => {
            let input = BufReader::new(open_input(path)?);
            match args.mode.into() {
                InputMode::Tokens => {
                    let stream = read_all(TokenReader::new(input))?;
                    run_trials_on_stream(config, &stream, args.trials, args.seed, parallelism)
                }
                InputMode::U64Le => {
                    let stream = read_all(U64LeReader::new(input))?;
                    run_trials_on_stream(config, &stream, args.trials, args.seed, parallelism)
                }
            }
            .map_err(harness_err)?
        }
        None => {
            let spec = args.stream.to_spec(args.stream_seed.unwrap_or(args.seed))?;
            let mode = if args.regenerate { StreamMode::RegeneratePerTrial } else { StreamMode::Fixed };
            TrialPlan::new(config, spec, args.trials, args.seed)
                .parallelism(parallelism)
                .stream_mode(mode)
                .run()
                .map_err(harness_err)?
        }
    };
    let checks = vec![
        coverage_check(&report, config.delta()),
        fail_rate_check(&report, &config),
        memory_check(&report, &config),
    ];
    for c in &checks {
        eprintln!("f0est: {}: {:?}: {}", c.name, c.status, c.detail);
    }
    let validated = ValidateReport::new(report, checks, args.informational);
    emit::<()>(&args.out, Report::Validate(&validated))?;
    if validated.passed || args.informational {
        Ok(Status::Success)
    } else {
        Ok(Status::ChecksFailed)
    }
}

pub fn generate(args: GenerateArgs) -> Result<Status, CliError> {
    let spec = args.stream.to_spec(args.seed)?;
    let stream = generate_stream(&spec)?;
    let mode: InputMode = args.mode.into();
    let open = |path: &Path| {
        File::create(path).map_err(|source| CliError::Open { path: path.to_path_buf(), source })
    };
    let mut out = BufWriter::new(open(&args.output)?);
    write_stream(&mut out, mode, &stream)
        .and_then(|()| out.flush())
        .map_err(CliError::Output)?;

    let mut counter = ExactCounter::new();
    stream.iter().for_each(|&e| counter.insert(e));
    let sidecar = GroundTruthSidecar::new(mode, counter.count(), spec);
    let mut sidecar_path = args.output.clone().into_os_string();
    sidecar_path.push(".truth.json");
    let sidecar_path = PathBuf::from(sidecar_path);
    let mut file = BufWriter::new(open(&sidecar_path)?);
    write_json(&mut file, &sidecar).and_then(|()| file.flush()).map_err(CliError::Output)?;
    write_json(&mut io::stdout().lock(), &sidecar).map_err(CliError::Output)?;
    Ok(Status::Success)
}
