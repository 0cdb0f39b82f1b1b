use serde::{Deserialize, Serialize};

/// Sorted multiset of distances `‖χ − X_i‖`; its empirical CDF is
/// `F̂(t) = #{d_i ≤ t} / n`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SortedDistances {
    values: Vec<f64>,
}

impl SortedDistances {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_unsorted(mut values: Vec<f64>) -> Self {
        values.sort_by(f64::total_cmp);
        SortedDistances { values }
    }

    /// Binary search for the slot, then an insertion that keeps the order.
    pub fn insert(&mut self, d: f64) {
        let at = self.values.partition_point(|&x| x <= d);
        self.values.insert(at, d);
    }

    /// Number of stored distances `≤ t`.
    #[inline]
    pub fn count_le(&self, t: f64) -> usize {
        self.values.partition_point(|&x| x <= t)
    }

    #[inline]
    pub fn cdf(&self, t: f64) -> f64 {
        if self.values.is_empty() {
            return 0.0;
        }
        self.count_le(t) as f64 / self.values.len() as f64
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max(&self) -> Option<f64> {
        self.values.last().copied()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn is_sorted(&self) -> bool {
        self.values.windows(2).all(|w| w[0] <= w[1]) && self.values.iter().all(|v| v.is_finite())
    }
}
