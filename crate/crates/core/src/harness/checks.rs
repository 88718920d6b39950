//! Pass/fail decisions over trial reports, using exact binomial quantities.

use serde::Serialize;
use statrs::distribution::{Beta, Binomial, ContinuousCDF, DiscreteCDF};

use super::trials::TrialReport;
use crate::sketch::SketchConfig;

/// Confidence level of the coverage decision.
pub const COVERAGE_CONFIDENCE: f64 = 0.99;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    Fail,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub status: CheckStatus,
    pub detail: String,
}

impl CheckResult {
    fn new(name: &'static str, status: CheckStatus, detail: String) -> Self {
        Self { name, status, detail }
    }

    pub fn passed(&self) -> bool {
        self.status == CheckStatus::Pass
    }
}

/// Smallest `q` with `P[Binomial(n, p) <= q] >= level`.
pub fn binomial_quantile(n: u64, p: f64, level: f64) -> u64 {
    if p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    let dist = Binomial::new(p, n).expect("p checked to lie in (0, 1)");
    // the cdf is monotone; binary search over 0..=n
    let (mut lo, mut hi) = (0u64, n);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if dist.cdf(mid) >= level {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    lo
}

/// One-sided Clopper-Pearson lower bound at `confidence` on a success
/// probability, from `successes` out of `n`.
pub fn clopper_pearson_lower(successes: u64, n: u64, confidence: f64) -> f64 {
    assert!(successes <= n && n > 0);
    if successes == 0 {
        return 0.0;
    }
    let dist = Beta::new(successes as f64, (n - successes + 1) as f64)
        .expect("shape parameters are positive");
    dist.inverse_cdf(1.0 - confidence)
}

/// Coverage decision from counts alone.
///
/// Passes when the Clopper-Pearson lower bound on coverage reaches `1 - delta`
/// or when the misses do not exceed the 99th percentile of
/// `Binomial(trials, delta)`.
pub fn coverage_decision(trials: u64, misses: u64, delta: f64) -> CheckResult {
    const NAME: &str = "coverage";
    if trials == 0 {
        return CheckResult::new(NAME, CheckStatus::Fail, "empty report".into());
    }
    let lower = clopper_pearson_lower(trials - misses, trials, COVERAGE_CONFIDENCE);
    let quantile = binomial_quantile(trials, delta, COVERAGE_CONFIDENCE);
    let pass = lower >= 1.0 - delta || misses <= quantile;
    let detail = format!(
        "{misses}/{trials} outside the band; 99th percentile of Binomial({trials}, {delta}) = {quantile}; \
         99% lower bound on coverage = {lower:.6} vs required {:.6}",
        1.0 - delta
    );
    CheckResult::new(NAME, if pass { CheckStatus::Pass } else { CheckStatus::Fail }, detail)
}

pub fn coverage_check(report: &TrialReport, delta: f64) -> CheckResult {
    coverage_decision(report.trials, report.misses(), delta)
}

/// Passes iff no trial output fail. Skipped for overridden configs.
pub fn fail_rate_check(report: &TrialReport, config: &SketchConfig) -> CheckResult {
    const NAME: &str = "fail_rate";
    if config.thresh_overridden() {
        return CheckResult::new(
            NAME,
            CheckStatus::Skipped,
            format!("thresh overridden to {}: fail bound does not apply", config.thresh()),
        );
    }
    let detail = format!(
        "{} fails in {} trials; per-run bound m * 2^-thresh = 2^{:.1}",
        report.fail_count,
        report.trials,
        config.fail_bound_log2()
    );
    let status = if report.fail_count == 0 { CheckStatus::Pass } else { CheckStatus::Fail };
    CheckResult::new(NAME, status, detail)
}

/// Passes iff no trial ever held more than `thresh` samples.
pub fn memory_check(report: &TrialReport, config: &SketchConfig) -> CheckResult {
    const NAME: &str = "memory";
    let worst = report.records.iter().map(|r| r.peak_samples).max().unwrap_or(0);
    let status = if worst <= config.thresh() { CheckStatus::Pass } else { CheckStatus::Fail };
    CheckResult::new(
        NAME,
        status,
        format!("peak samples {worst} vs thresh {}", config.thresh()),
    )
}
