use serde::{Deserialize, Serialize};

use crate::error::{DysError, Result};
use crate::Scalar;

/// Standardized features with per-sample observed time and event indicator.
///
/// `x` is row-major `[n x p]`. `event[i]` is true when the event was observed
/// (uncensored) at `time[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SurvivalDataset<T> {
    x: Vec<T>,
    n: usize,
    p: usize,
    pub time: Vec<T>,
    pub event: Vec<bool>,
    pub feature_names: Vec<String>,
}

impl<T: Scalar> SurvivalDataset<T> {
    pub fn new(x: Vec<T>, p: usize, time: Vec<T>, event: Vec<bool>, feature_names: Vec<String>) -> Result<Self> {
        let n = time.len();
        if event.len() != n {
            return Err(DysError::shape("event indicator", n, event.len()));
        }
        if x.len() != n * p {
            return Err(DysError::shape("feature matrix", n * p, x.len()));
        }
        if feature_names.len() != p {
            return Err(DysError::shape("feature names", p, feature_names.len()));
        }
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(DysError::NonFinite {
                what: "feature value",
                detail: format!("row {}, column {}", i / p.max(1), i % p.max(1)),
            });
        }
        if let Some(i) = time.iter().position(|t| !(t.is_finite() && *t >= T::zero())) {
            return Err(DysError::Validation {
                row: i,
                column: "time".into(),
                reason: format!("time must be finite and >= 0, got {}", time[i]),
            });
        }
        Ok(SurvivalDataset {
            x,
            n,
            p,
            time,
            event,
            feature_names,
        })
    }

    /// Builds a dataset from per-row feature vectors with generated names `x1..xp`.
    pub fn from_rows(rows: &[Vec<T>], time: Vec<T>, event: Vec<bool>) -> Result<Self> {
        let p = rows.first().map_or(0, Vec::len);
        if let Some(r) = rows.iter().position(|r| r.len() != p) {
            return Err(DysError::shape("feature row", p, rows[r].len()));
        }
        let names = (1..=p).map(|j| format!("x{j}")).collect();
        Self::new(rows.concat(), p, time, event, names)
    }

    pub fn n_samples(&self) -> usize {
        self.n
    }

    pub fn n_features(&self) -> usize {
        self.p
    }

    pub fn n_events(&self) -> usize {
        self.event.iter().filter(|&&e| e).count()
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.x[i * self.p..(i + 1) * self.p]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[T]> + '_ {
        (0..self.n).map(move |i| self.row(i))
    }

    pub fn features(&self) -> &[T] {
        &self.x
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = T> + '_ {
        (0..self.n).map(move |i| self.x[i * self.p + j])
    }

    /// Observed `[min, max]` of every feature column. Empty datasets yield `(0, 0)`.
    pub fn feature_ranges(&self) -> Vec<(T, T)> {
        (0..self.p)
            .map(|j| {
                self.column(j)
                    .fold(None, |acc: Option<(T, T)>, v| match acc {
                        None => Some((v, v)),
                        Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
                    })
                    .unwrap_or((T::zero(), T::zero()))
            })
            .collect()
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        let mut x = Vec::with_capacity(indices.len() * self.p);
        for &i in indices {
            x.extend_from_slice(self.row(i));
        }
        SurvivalDataset {
            x,
            n: indices.len(),
            p: self.p,
            time: indices.iter().map(|&i| self.time[i]).collect(),
            event: indices.iter().map(|&i| self.event[i]).collect(),
            feature_names: self.feature_names.clone(),
        }
    }

    /// Keeps only the listed feature columns, in the given order.
    pub fn select_features(&self, columns: &[usize]) -> Result<Self> {
        if let Some(&bad) = columns.iter().find(|&&j| j >= self.p) {
            return Err(DysError::shape("feature index", self.p, bad));
        }
        let mut x = Vec::with_capacity(self.n * columns.len());
        for row in self.rows() {
            x.extend(columns.iter().map(|&j| row[j]));
        }
        Ok(SurvivalDataset {
            x,
            n: self.n,
            p: columns.len(),
            time: self.time.clone(),
            event: self.event.clone(),
            feature_names: columns.iter().map(|&j| self.feature_names[j].clone()).collect(),
        })
    }

    pub fn cast<U: Scalar>(&self) -> SurvivalDataset<U> {
        SurvivalDataset {
            x: self.x.iter().map(|v| U::of(v.as_f64())).collect(),
            n: self.n,
            p: self.p,
            time: self.time.iter().map(|v| U::of(v.as_f64())).collect(),
            event: self.event.clone(),
            feature_names: self.feature_names.clone(),
        }
    }
}
