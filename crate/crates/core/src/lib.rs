//! Streaming distinct-elements estimation by adaptive sampling.
//!
//! [`SketchState`] keeps at most `thresh` sampled elements and a sampling
//! probability `2^-k`; its estimate `|samples| * 2^k` is within `(1 ± ε)` of
//! the true distinct count with probability at least `1 - δ`. No hash
//! function is involved: all randomness is fair coin flips drawn from a
//! [`BitSource`](randomness::BitSource).
//!
//! ```
//! use f0est_core::{randomness::RandomSource, SketchConfig, SketchState};
//!
//! let config = SketchConfig::new(0.2, 0.1, 10_000).unwrap();
//! let mut sketch = SketchState::new(config);
//! let mut rng = RandomSource::new(1);
//! sketch.process_stream((0..5_000u64).map(|i| i % 1_234), &mut rng).unwrap();
//! assert_eq!(sketch.estimate().value().unwrap().to_u128(), Some(1_234));
//! ```

pub mod error;
pub mod harness;
pub mod io;
pub mod oracles;
pub mod randomness;
mod sketch;
mod thresh;

pub use error::{ParamError, SketchError, StreamError};
pub use sketch::{Element, Estimate, ScaledCount, SketchConfig, SketchState, StreamOutcome};
pub use thresh::compute_thresh;
