use std::hash::Hash;

use rustc_hash::FxHashSet;

/// Exact distinct counter over everything it has seen.
#[derive(Debug, Clone)]
pub struct ExactCounter<E> {
    seen: FxHashSet<E>,
}

impl<E: Eq + Hash> Default for ExactCounter<E> {
    fn default() -> Self {
        Self {
            seen: FxHashSet::default(),
        }
    }
}

impl<E: Eq + Hash> ExactCounter<E> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, element: E) {
        self.seen.insert(element);
    }

    pub fn count(&self) -> u64 {
        self.seen.len() as u64
    }

    pub fn contains(&self, element: &E) -> bool {
        self.seen.contains(element)
    }
}

impl<E: Eq + Hash> Extend<E> for ExactCounter<E> {
    fn extend<I: IntoIterator<Item = E>>(&mut self, iter: I) {
        self.seen.extend(iter);
    }
}

pub fn exact_f0<E: Eq + Hash, I: IntoIterator<Item = E>>(elements: I) -> u64 {
    let mut counter = ExactCounter::new();
    counter.extend(elements);
    counter.count()
}
