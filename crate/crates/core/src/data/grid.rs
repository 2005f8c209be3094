use serde::{Deserialize, Serialize};

use super::SurvivalDataset;
use crate::error::{DysError, Result};
use crate::Scalar;

/// Strictly increasing positive evaluation times `t_1 < ... < t_K`, `K >= 2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct TimeGrid<T> {
    times: Vec<T>,
}

impl<T: Scalar> TimeGrid<T> {
    pub fn new(times: Vec<T>) -> Result<Self> {
        if times.len() < 2 {
            return Err(DysError::param(
                "time grid",
                format!("need K >= 2 times, got {}", times.len()),
            ));
        }
        if times.iter().any(|t| !t.is_finite() || *t <= T::zero()) {
            return Err(DysError::param("time grid", "times must be finite and > 0"));
        }
        if times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(DysError::param("time grid", "times must be strictly increasing"));
        }
        Ok(TimeGrid { times })
    }

    pub fn times(&self) -> &[T] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Number of grid times strictly below `t`.
    pub fn count_below(&self, t: T) -> usize {
        self.times.partition_point(|&g| g < t)
    }

    /// Grid times in the open interval `(lo, hi)`; may hold fewer than two times.
    pub fn restricted(&self, lo: T, hi: T) -> Vec<T> {
        self.times.iter().copied().filter(|&t| t > lo && t < hi).collect()
    }
}

/// `k` times at nearest-rank quantiles `i/(k+1)` of the uncensored training
/// event times, deduplicated. Falls back to `k` equally spaced times over
/// `(0, max uncensored time]` when fewer than `k` distinct positive values remain.
pub fn build_time_grid<T: Scalar>(train: &SurvivalDataset<T>, k: usize) -> Result<TimeGrid<T>> {
    if k < 2 {
        return Err(DysError::param(
            "K",
            format!("need at least 2 evaluation times, got {k}"),
        ));
    }
    let mut events: Vec<T> = train
        .time
        .iter()
        .zip(&train.event)
        .filter(|(_, &e)| e)
        .map(|(&t, _)| t)
        .collect();
    if events.is_empty() {
        return Err(DysError::InsufficientData(
            "no uncensored samples to place the time grid".into(),
        ));
    }
    events.sort_by(|a, b| a.partial_cmp(b).expect("finite times"));
    let m = events.len();
    let mut times: Vec<T> = (1..=k)
        .map(|i| {
            // nearest rank: ceil(i * m / (k + 1)), 1-based
            let rank = ((i * m + k) / (k + 1)).clamp(1, m);
            events[rank - 1]
        })
        .filter(|&t| t > T::zero())
        .collect();
    times.dedup();
    if times.len() < k {
        let max = events[m - 1];
        if max <= T::zero() {
            return Err(DysError::InsufficientData("all uncensored event times are zero".into()));
        }
        times = (1..=k).map(|i| max * T::of(i as f64) / T::of(k as f64)).collect();
    }
    TimeGrid::new(times)
}
