//! Workload generators, the parallel trial runner and the statistical checks
//! applied to its reports.

mod checks;
mod streams;
mod trials;

pub use checks::{
    binomial_quantile, clopper_pearson_lower, coverage_check, coverage_decision, fail_rate_check,
    memory_check, CheckResult, CheckStatus, COVERAGE_CONFIDENCE,
};
pub use streams::{generate_stream, StreamKind, StreamSpec};
pub use trials::{
    run_trials, run_trials_on_stream, ErrorQuantiles, HarnessError, StreamMode, StreamSummary,
    TrialPlan, TrialRecord, TrialReport,
};
