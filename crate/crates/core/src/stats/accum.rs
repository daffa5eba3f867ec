use super::runner::Merge;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

const FIXED_SCALE: f64 = (1u64 << 60) as f64;

/// Sum of reals in 2⁻⁶⁰ fixed point; addition is exact and associative.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixedSum(pub i128);

impl FixedSum {
    #[inline]
    pub fn add(&mut self, x: f64) {
        self.0 += (x * FIXED_SCALE).round() as i128;
    }

    pub fn value(&self) -> f64 {
        self.0 as f64 / FIXED_SCALE
    }
}

impl Merge for FixedSum {
    fn merge(&mut self, o: &Self) {
        self.0 += o.0;
    }
}

/// Integer histogram keyed by an ordered label.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Histogram<K: Ord> {
    pub counts: BTreeMap<K, u64>,
}

impl<K: Ord> Default for Histogram<K> {
    fn default() -> Self {
        Self { counts: BTreeMap::new() }
    }
}

impl<K: Ord + Clone> Histogram<K> {
    pub fn add(&mut self, k: K) {
        *self.counts.entry(k).or_default() += 1;
    }

    pub fn get(&self, k: &K) -> u64 {
        self.counts.get(k).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }
}

impl<K: Ord + Clone> Merge for Histogram<K> {
    fn merge(&mut self, o: &Self) {
        for (k, c) in &o.counts {
            *self.counts.entry(k.clone()).or_default() += c;
        }
    }
}

impl Merge for u64 {
    fn merge(&mut self, o: &Self) {
        *self += o;
    }
}

impl<A: Merge, B: Merge> Merge for (A, B) {
    fn merge(&mut self, o: &Self) {
        self.0.merge(&o.0);
        self.1.merge(&o.1);
    }
}

impl<A: Merge> Merge for Vec<A>
where
    A: Clone,
{
    fn merge(&mut self, o: &Self) {
        if self.is_empty() {
            *self = o.clone();
            return;
        }
        assert_eq!(self.len(), o.len(), "merging accumulators of different shapes");
        for (a, b) in self.iter_mut().zip(o) {
            a.merge(b);
        }
    }
}
