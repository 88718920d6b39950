//! Reference implementations used to check the sketch: exact counting, the
//! sketch without its fail check, and the coupled multi-level subsampler.

mod coupled;
mod exact;
mod nofail;

pub use coupled::{
    level_independence_check, first_zero_index, IndependenceParams, IndependenceReport, CoupledLevels, LevelStats,
    PairFrequency, FAMILY_SIGMA,
};
pub use exact::{exact_f0, ExactCounter};
pub use nofail::{nofail_process_stream, NoFailSketch};
