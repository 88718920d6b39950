//! Sample-set capacity: `ceil((12 / eps^2) * log2(8 m / delta))`.

use astro_float::{BigFloat, Consts, RoundingMode};

use crate::error::ParamError;

/// Working precision in bits for the capacity formula.
const PRECISION: usize = 256;

fn check_unit_interval(field: &'static str, value: f64) -> Result<(), ParamError> {
    if value.is_finite() && value > 0.0 && value < 1.0 {
        Ok(())
    } else {
        Err(ParamError::new(field, format!("must lie in (0, 1), got {value}")))
    }
}

/// Capacity of the sample set for the given accuracy, confidence and stream bound.
///
/// `log2` is evaluated at 256-bit precision on the exact binary values of
/// `epsilon` and `delta`, so the ceiling is never off by one from rounding.
pub fn compute_thresh(epsilon: f64, delta: f64, stream_bound: u64) -> Result<u64, ParamError> {
    check_unit_interval("epsilon", epsilon)?;
    check_unit_interval("delta", delta)?;
    if stream_bound == 0 {
        return Err(ParamError::new("stream_bound", "must be positive"));
    }

    let rm = RoundingMode::ToEven;
    let mut cc = Consts::new().map_err(|e| ParamError::new("thresh", format!("{e:?}")))?;
    let eps = BigFloat::from_f64(epsilon, PRECISION);
    let delta_big = BigFloat::from_f64(delta, PRECISION);
    let ratio = BigFloat::from_u64(stream_bound, PRECISION)
        .mul(&BigFloat::from_u64(8, PRECISION), PRECISION, rm)
        .div(&delta_big, PRECISION, rm);
    let scale = BigFloat::from_u64(12, PRECISION).div(&eps.mul(&eps, PRECISION, rm), PRECISION, rm);
    let value = scale.mul(&ratio.log2(PRECISION, rm, &mut cc), PRECISION, rm);

    // f64 lands within a few ulps; settle the ceiling with exact comparisons.
    let approx = 12.0 / (epsilon * epsilon) * (8.0 * stream_bound as f64 / delta).log2();
    if !approx.is_finite() || approx >= 2f64.powi(52) {
        return Err(ParamError::new(
            "thresh",
            format!("capacity {approx:e} is not representable"),
        ));
    }
    let mut candidate = approx.ceil() as u64;
    let cmp = |c: u64| value.cmp(&BigFloat::from_u64(c, PRECISION)).unwrap_or(0);
    while cmp(candidate) > 0 {
        candidate += 1;
    }
    while candidate > 0 && cmp(candidate - 1) <= 0 {
        candidate -= 1;
    }
    Ok(candidate)
}
