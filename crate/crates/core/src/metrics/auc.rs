use serde::{Deserialize, Serialize};

use super::km::{kaplan_meier, KmCurve};
use crate::data::SurvivalDataset;
use crate::error::{DysError, Result};
use crate::model::DySModel;
use crate::Scalar;

pub const MEAN_AUC_SUMMARY: &str = "unweighted arithmetic mean of AUC over valid evaluation times";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct AucReport<T> {
    pub times: Vec<T>,
    /// `None` where the time has no cases or no controls.
    pub auc: Vec<Option<T>>,
    pub valid: Vec<bool>,
    pub mean_auc: Option<T>,
    pub summary: String,
    /// Cases dropped because the censoring survival at their time was zero.
    pub excluded_cases: usize,
}

/// Arithmetic mean over valid times.
pub fn mean_auc<T: Scalar>(report: &AucReport<T>) -> Result<T> {
    let valid: Vec<T> = report.auc.iter().flatten().copied().collect();
    if valid.is_empty() {
        return Err(DysError::NoValidTimes);
    }
    Ok(valid.iter().copied().sum::<T>() / T::of(valid.len() as f64))
}

/// Indices of grid times strictly inside `(min test time, max test time)`.
pub fn evaluation_columns<T: Scalar>(grid: &[T], test_time: &[T]) -> Vec<usize> {
    let lo = test_time.iter().copied().fold(T::infinity(), T::min);
    let hi = test_time.iter().copied().fold(T::neg_infinity(), T::max);
    (0..grid.len()).filter(|&k| grid[k] > lo && grid[k] < hi).collect()
}

/// Cumulative/dynamic AUC with inverse-probability-of-censoring weights.
///
/// `risk[i][k]` is test sample `i`'s risk score at `times[k]`. At each time
/// `t`, cases are test events with `T_i <= t`, weighted by `1 / G(T_i-)`
/// where `G` is the Kaplan–Meier censoring survival of the training split;
/// controls are test samples with `T_j > t`. Ties in risk count one half.
pub fn cumulative_dynamic_auc<T: Scalar>(
    train: &SurvivalDataset<T>,
    test: &SurvivalDataset<T>,
    risk: &[Vec<T>],
    times: &[T],
) -> Result<AucReport<T>> {
    let censored: Vec<bool> = train.event.iter().map(|e| !e).collect();
    let censoring = kaplan_meier(&train.time, &censored)?;
    cumulative_dynamic_auc_parts(&censoring, &test.time, &test.event, risk, times)
}

/// Time-dependent AUC of `model` on `test` over the model grid restricted to
/// the observed test-time range, with censoring weights from `train`.
pub fn evaluate<T: Scalar>(
    model: &DySModel<T>,
    train: &SurvivalDataset<T>,
    test: &SurvivalDataset<T>,
) -> Result<AucReport<T>> {
    let columns = evaluation_columns(model.grid.times(), &test.time);
    if columns.is_empty() {
        return Err(DysError::NoValidTimes);
    }
    let times: Vec<T> = columns.iter().map(|&k| model.grid.times()[k]).collect();
    let risk = model.risk_matrix(test, &columns)?;
    cumulative_dynamic_auc(train, test, &risk, &times)
}

pub fn cumulative_dynamic_auc_parts<T: Scalar>(
    censoring: &KmCurve<T>,
    test_time: &[T],
    test_event: &[bool],
    risk: &[Vec<T>],
    times: &[T],
) -> Result<AucReport<T>> {
    let n = test_time.len();
    if test_event.len() != n {
        return Err(DysError::shape("test events", n, test_event.len()));
    }
    if risk.len() != n {
        return Err(DysError::shape("risk rows", n, risk.len()));
    }
    if let Some(r) = risk.iter().find(|r| r.len() != times.len()) {
        return Err(DysError::shape("risk columns", times.len(), r.len()));
    }

    let mut weight = vec![T::zero(); n];
    let mut excluded = 0;
    for i in 0..n {
        if test_event[i] {
            let g = censoring.survival_before(test_time[i]);
            if g > T::zero() {
                weight[i] = T::one() / g;
            } else {
                excluded += 1;
            }
        }
    }
    if excluded > 0 {
        log::warn!("{excluded} case(s) excluded from AUC: censoring survival is zero at their event time");
    }

    let half = T::of(0.5);
    let mut auc = Vec::with_capacity(times.len());
    let mut controls: Vec<T> = Vec::with_capacity(n);
    for (k, &t) in times.iter().enumerate() {
        controls.clear();
        controls.extend((0..n).filter(|&j| test_time[j] > t).map(|j| risk[j][k]));
        controls.sort_by(|a, b| a.partial_cmp(b).expect("finite risk"));
        let mut num = T::zero();
        let mut den = T::zero();
        for i in 0..n {
            if !(test_event[i] && test_time[i] <= t && weight[i] > T::zero()) {
                continue;
            }
            let r = risk[i][k];
            let below = controls.partition_point(|&c| c < r);
            let not_above = controls.partition_point(|&c| c <= r);
            let ties = not_above - below;
            num += weight[i] * (T::of(below as f64) + half * T::of(ties as f64));
            den += weight[i];
        }
        if den > T::zero() && !controls.is_empty() {
            auc.push(Some(num / (den * T::of(controls.len() as f64))));
        } else {
            auc.push(None);
        }
    }
    let valid: Vec<bool> = auc.iter().map(Option::is_some).collect();
    let mut report = AucReport {
        times: times.to_vec(),
        auc,
        valid,
        mean_auc: None,
        summary: MEAN_AUC_SUMMARY.into(),
        excluded_cases: excluded,
    };
    report.mean_auc = mean_auc(&report).ok();
    Ok(report)
}
