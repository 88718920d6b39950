//! Monte Carlo trial runner.
//!
//! Trial `i` draws its coins from `derive_substream(master_seed, i)`, so a
//! report depends only on its inputs and never on the thread count.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use super::streams::{generate_stream, StreamSpec};
use crate::error::{ParamError, StreamError};
use crate::oracles::exact_f0;
use crate::randomness::{derive_substream, BitSource};
use crate::sketch::{Element, Estimate, SketchConfig, SketchState};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error("trial {trial}: {source}")]
    Trial {
        trial: u64,
        #[source]
        source: StreamError,
    },
    #[error("generated stream has {actual} distinct elements, spec declares {expected}")]
    GroundTruth { expected: u64, actual: u64 },
    #[error("thread pool: {0}")]
    ThreadPool(String),
}

/// Whether every trial sees one stream or its own freshly generated one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StreamMode {
    /// One stream, many coin sequences.
    #[default]
    Fixed,
    /// Trial `i` uses `spec.for_trial(i)`.
    RegeneratePerTrial,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrialRecord {
    pub trial: u64,
    pub estimate: Estimate,
    /// `(estimate - f0) / f0`; absent for fail.
    pub relative_error: Option<f64>,
    pub covered: bool,
    pub failed: bool,
    pub final_halvings: u32,
    pub peak_samples: u64,
    pub bits_consumed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorQuantiles {
    pub p50: f64,
    pub p90: f64,
    pub p99: f64,
    pub max: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct StreamSummary {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spec: Option<StreamSpec>,
    pub mode: StreamMode,
    pub f0: u64,
    pub length: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrialReport {
    pub epsilon: f64,
    pub delta: f64,
    pub stream_bound: u64,
    pub thresh: u64,
    pub thresh_overridden: bool,
    pub stream: StreamSummary,
    pub master_seed: u64,
    pub trials: u64,
    pub fail_count: u64,
    pub covered_count: u64,
    /// Fraction of trials within `(1 ± epsilon) f0`; fail counts as a miss.
    pub coverage: f64,
    /// Nearest-rank quantiles of `|relative_error|` over non-fail trials.
    pub abs_error_quantiles: Option<ErrorQuantiles>,
    /// Largest sample set held by any trial.
    pub peak_samples: u64,
    pub records: Vec<TrialRecord>,
}

impl TrialReport {
    pub fn misses(&self) -> u64 {
        self.trials - self.covered_count
    }
}

fn within_band(value: f64, f0: u64, epsilon: f64) -> bool {
    (value - f0 as f64).abs() <= epsilon * f0 as f64
}

fn run_one<E: Element>(
    config: SketchConfig,
    stream: &[E],
    f0: u64,
    trial: u64,
    master_seed: u64,
) -> Result<TrialRecord, HarnessError> {
    let mut rng = derive_substream(master_seed, trial);
    let mut state = SketchState::new(config);
    state
        .process_stream(stream.iter().cloned(), &mut rng)
        .map_err(|source| HarnessError::Trial { trial, source })?;
    let estimate = state.estimate();
    let (relative_error, covered) = match estimate.value() {
        Some(v) if f0 == 0 => (Some(0.0), v.sample_count == 0),
        Some(v) => {
            let value = v.to_f64();
            (Some((value - f0 as f64) / f0 as f64), within_band(value, f0, config.epsilon()))
        }
        None => (None, false),
    };
    Ok(TrialRecord {
        trial,
        estimate,
        relative_error,
        covered,
        failed: state.is_failed(),
        final_halvings: state.halvings(),
        peak_samples: state.peak_samples(),
        bits_consumed: rng.bits_consumed(),
    })
}

fn nearest_rank(sorted: &[f64], q: f64) -> f64 {
    let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

fn summarize(
    config: SketchConfig,
    stream: StreamSummary,
    master_seed: u64,
    records: Vec<TrialRecord>,
) -> TrialReport {
    let trials = records.len() as u64;
    let fail_count = records.iter().filter(|r| r.failed).count() as u64;
    let covered_count = records.iter().filter(|r| r.covered).count() as u64;
    let mut errors: Vec<f64> = records
        .iter()
        .filter_map(|r| r.relative_error.map(f64::abs))
        .collect();
    errors.sort_by(f64::total_cmp);
    let abs_error_quantiles = (!errors.is_empty()).then(|| ErrorQuantiles {
        p50: nearest_rank(&errors, 0.5),
        p90: nearest_rank(&errors, 0.9),
        p99: nearest_rank(&errors, 0.99),
        max: *errors.last().unwrap(),
    });
    TrialReport {
        epsilon: config.epsilon(),
        delta: config.delta(),
        stream_bound: config.stream_bound(),
        thresh: config.thresh(),
        thresh_overridden: config.thresh_overridden(),
        stream,
        master_seed,
        trials,
        fail_count,
        covered_count,
        coverage: if trials == 0 { 0.0 } else { covered_count as f64 / trials as f64 },
        abs_error_quantiles,
        peak_samples: records.iter().map(|r| r.peak_samples).max().unwrap_or(0),
        records,
    }
}

fn in_pool<T: Send>(
    parallelism: usize,
    job: impl FnOnce() -> T + Send,
) -> Result<T, HarnessError> {
    if parallelism == 0 {
        return Err(ParamError::new("parallelism", "must be positive").into());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()
        .map_err(|e| HarnessError::ThreadPool(e.to_string()))?;
    Ok(pool.install(job))
}

/// A batch of trials over a generated workload.
#[derive(Debug, Clone, Copy)]
pub struct TrialPlan {
    pub config: SketchConfig,
    pub spec: StreamSpec,
    pub trials: u64,
    pub master_seed: u64,
    pub parallelism: usize,
    pub stream_mode: StreamMode,
}

impl TrialPlan {
    pub fn new(config: SketchConfig, spec: StreamSpec, trials: u64, master_seed: u64) -> Self {
        Self {
            config,
            spec,
            trials,
            master_seed,
            parallelism: 1,
            stream_mode: StreamMode::Fixed,
        }
    }

    pub fn parallelism(mut self, parallelism: usize) -> Self {
        self.parallelism = parallelism;
        self
    }

    pub fn stream_mode(mut self, mode: StreamMode) -> Self {
        self.stream_mode = mode;
        self
    }

    pub fn run(&self) -> Result<TrialReport, HarnessError> {
        let plan = *self;
        if plan.trials == 0 {
            return Err(ParamError::new("trials", "must be positive").into());
        }
        plan.spec.validate()?;
        if plan.spec.length > plan.config.stream_bound() {
            return Err(ParamError::new("length", "stream is longer than the stream bound").into());
        }
        let checked = |spec: &StreamSpec| -> Result<Vec<u64>, HarnessError> {
            let stream = generate_stream(spec)?;
            let actual = exact_f0(stream.iter().copied());
            if actual != spec.f0 {
                return Err(HarnessError::GroundTruth { expected: spec.f0, actual });
            }
            Ok(stream)
        };
        let records = match plan.stream_mode {
            StreamMode::Fixed => {
                let stream = checked(&plan.spec)?;
                in_pool(plan.parallelism, || {
                    (0..plan.trials)
                        .into_par_iter()
                        .map(|t| run_one(plan.config, &stream, plan.spec.f0, t, plan.master_seed))
                        .collect::<Result<Vec<_>, _>>()
                })??
            }
            StreamMode::RegeneratePerTrial => in_pool(plan.parallelism, || {
                (0..plan.trials)
                    .into_par_iter()
                    .map(|t| {
                        let spec = plan.spec.for_trial(t);
                        let stream = checked(&spec)?;
                        run_one(plan.config, &stream, spec.f0, t, plan.master_seed)
                    })
                    .collect::<Result<Vec<_>, _>>()
            })??,
        };
        let summary = StreamSummary {
            spec: Some(plan.spec),
            mode: plan.stream_mode,
            f0: plan.spec.f0,
            length: plan.spec.length,
        };
        Ok(summarize(plan.config, summary, plan.master_seed, records))
    }
}

/// Fixed-stream trials over a generated workload.
pub fn run_trials(
    config: SketchConfig,
    spec: &StreamSpec,
    trials: u64,
    master_seed: u64,
    parallelism: usize,
) -> Result<TrialReport, HarnessError> {
    TrialPlan::new(config, *spec, trials, master_seed)
        .parallelism(parallelism)
        .run()
}

/// Trials over a caller-supplied stream; ground truth is computed exactly.
pub fn run_trials_on_stream<E: Element + Send + Sync>(
    config: SketchConfig,
    stream: &[E],
    trials: u64,
    master_seed: u64,
    parallelism: usize,
) -> Result<TrialReport, HarnessError> {
    if trials == 0 {
        return Err(ParamError::new("trials", "must be positive").into());
    }
    if stream.len() as u64 > config.stream_bound() {
        return Err(ParamError::new("length", "stream is longer than the stream bound").into());
    }
    let f0 = exact_f0(stream.iter());
    let records = in_pool(parallelism, || {
        (0..trials)
            .into_par_iter()
            .map(|t| run_one(config, stream, f0, t, master_seed))
            .collect::<Result<Vec<_>, _>>()
    })??;
    let summary = StreamSummary {
        spec: None,
        mode: StreamMode::Fixed,
        f0,
        length: stream.len() as u64,
    };
    Ok(summarize(config, summary, master_seed, records))
}
