use serde::{Deserialize, Serialize};

use crate::error::{DysError, Result};
use crate::Scalar;

/// Right-continuous product-limit step function. `times` holds the distinct
/// times at which at least one event occurred; `survival[i]` is the estimate
/// on `[times[i], times[i+1])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct KmCurve<T> {
    pub times: Vec<T>,
    pub survival: Vec<T>,
    pub at_risk: Vec<usize>,
    pub events: Vec<usize>,
}

impl<T: Scalar> KmCurve<T> {
    /// `S(t)`, including any step at `t` itself.
    pub fn survival_at(&self, t: T) -> T {
        let k = self.times.partition_point(|&s| s <= t);
        if k == 0 {
            T::one()
        } else {
            self.survival[k - 1]
        }
    }

    /// Left limit `S(t-)`, excluding a step at `t`.
    pub fn survival_before(&self, t: T) -> T {
        let k = self.times.partition_point(|&s| s < t);
        if k == 0 {
            T::one()
        } else {
            self.survival[k - 1]
        }
    }
}

/// Product-limit estimate `S(t) = prod_{t_i <= t} (1 - d_i / n_i)`.
///
/// `indicator[i]` marks an event; pass the complement of the event
/// indicator to estimate the censoring distribution.
pub fn kaplan_meier<T: Scalar>(times: &[T], indicator: &[bool]) -> Result<KmCurve<T>> {
    if times.is_empty() {
        return Err(DysError::InsufficientData(
            "Kaplan-Meier needs at least one observation".into(),
        ));
    }
    if times.len() != indicator.len() {
        return Err(DysError::shape("Kaplan-Meier indicator", times.len(), indicator.len()));
    }
    if times.iter().any(|t| !(t.is_finite() && *t >= T::zero())) {
        return Err(DysError::param("times", "must be finite and >= 0"));
    }
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&a, &b| times[a].partial_cmp(&times[b]).expect("finite"));

    let mut curve = KmCurve {
        times: Vec::new(),
        survival: Vec::new(),
        at_risk: Vec::new(),
        events: Vec::new(),
    };
    let mut s = T::one();
    let mut remaining = times.len();
    let mut i = 0;
    while i < order.len() {
        let t = times[order[i]];
        let mut j = i;
        let mut d = 0;
        while j < order.len() && times[order[j]] == t {
            d += usize::from(indicator[order[j]]);
            j += 1;
        }
        if d > 0 {
            s *= T::one() - T::of(d as f64) / T::of(remaining as f64);
            curve.times.push(t);
            curve.survival.push(s);
            curve.at_risk.push(remaining);
            curve.events.push(d);
        }
        remaining -= j - i;
        i = j;
    }
    Ok(curve)
}
