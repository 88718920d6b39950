use rustc_hash::FxHashSet;

use crate::error::{SketchError, StreamError};
use crate::randomness::BitSource;
use crate::sketch::{Element, ScaledCount, SketchConfig, SketchState};

/// The sketch with its fail check removed.
///
/// A halving is triggered whenever the set holds at least `thresh` elements
/// after the insertion step, so a halving that removes nothing is simply
/// followed by another halving on the next item. The set can therefore
/// briefly hold `thresh + 1` elements.
#[derive(Debug, Clone)]
pub struct NoFailSketch<E: Element> {
    config: SketchConfig,
    samples: FxHashSet<E>,
    halvings: u32,
    items_processed: u64,
    peak_samples: u64,
}

impl<E: Element> NoFailSketch<E> {
    pub fn new(config: SketchConfig) -> Self {
        Self {
            config,
            samples: FxHashSet::default(),
            halvings: 0,
            items_processed: 0,
            peak_samples: 0,
        }
    }

    pub fn process<R: BitSource>(&mut self, element: E, rng: &mut R) -> Result<(), SketchError> {
        if self.items_processed == self.config.stream_bound() {
            return Err(SketchError::BoundExceeded {
                bound: self.config.stream_bound(),
            });
        }
        self.items_processed += 1;
        self.samples.remove(&element);
        if rng.bernoulli_pow2(self.halvings)? {
            self.samples.insert(element);
        }
        self.peak_samples = self.peak_samples.max(self.samples.len() as u64);
        if self.samples.len() as u64 >= self.config.thresh() {
            let mut order: Vec<E> = self.samples.iter().cloned().collect();
            order.sort_unstable();
            for e in order {
                if rng.fair_coin()? {
                    self.samples.remove(&e);
                }
            }
            self.halvings += 1;
        }
        Ok(())
    }

    pub fn halvings(&self) -> u32 {
        self.halvings
    }

    pub fn items_processed(&self) -> u64 {
        self.items_processed
    }

    pub fn peak_samples(&self) -> u64 {
        self.peak_samples
    }

    pub fn sample_count(&self) -> usize {
        self.samples.len()
    }

    pub fn sorted_samples(&self) -> Vec<&E> {
        let mut v: Vec<&E> = self.samples.iter().collect();
        v.sort_unstable();
        v
    }

    pub fn estimate(&self) -> ScaledCount {
        ScaledCount {
            sample_count: self.samples.len() as u64,
            halvings: self.halvings,
        }
    }

    /// Same samples, halving count and position as `state`.
    pub fn same_as(&self, state: &SketchState<E>) -> bool {
        self.halvings == state.halvings()
            && self.items_processed == state.items_processed()
            && self.samples.len() == state.sample_count()
            && self.samples.iter().all(|e| state.contains(e))
    }
}

pub fn nofail_process_stream<E, I, R>(
    config: SketchConfig,
    elements: I,
    rng: &mut R,
) -> Result<NoFailSketch<E>, StreamError>
where
    E: Element,
    I: IntoIterator<Item = E>,
    R: BitSource,
{
    let mut sketch = NoFailSketch::new(config);
    for element in elements {
        let index = sketch.items_processed + 1;
        sketch
            .process(element, rng)
            .map_err(|source| StreamError { index, source })?;
    }
    Ok(sketch)
}
