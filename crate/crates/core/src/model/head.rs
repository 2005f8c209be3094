//! Discrete-time survival head and data losses.

use crate::data::TimeGrid;
use crate::error::{DysError, Result};
use crate::Scalar;

/// Max-subtracted softmax.
pub fn softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    let mut out = vec![T::zero(); logits.len()];
    softmax_into(logits, &mut out);
    out
}

pub(crate) fn softmax_into<T: Scalar>(logits: &[T], out: &mut [T]) {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let mut sum = T::zero();
    for (o, &z) in out.iter_mut().zip(logits) {
        *o = (z - max).exp();
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

/// `S(t_k) = 1 - sum_{j <= k} P(T = t_j)` for the first `k_times` bins,
/// evaluated as the tail mass `sum_{j > k} P(T = t_j)` so the curve is
/// nonincreasing and ends exactly at the mass beyond the grid.
pub fn survival_from_pmf<T: Scalar>(pmf: &[T], k_times: usize) -> Vec<T> {
    let mut out = vec![T::zero(); k_times];
    survival_into(pmf, &mut out);
    out
}

pub(crate) fn survival_into<T: Scalar>(pmf: &[T], out: &mut [T]) {
    let mut tail = T::zero();
    for j in (0..pmf.len()).rev() {
        if j < out.len() {
            out[j] = tail;
        }
        tail += pmf[j];
    }
}

/// Ranked probability score of one survival curve:
/// `sum_{t_k < T} (1 - S_k)^2 + delta * sum_{t_k >= T} S_k^2`.
pub fn rps_loss<T: Scalar>(s_hat: &[T], time: T, event: bool, grid: &TimeGrid<T>) -> Result<T> {
    if s_hat.len() != grid.len() {
        return Err(DysError::shape("survival curve", grid.len(), s_hat.len()));
    }
    Ok(rps_unchecked(s_hat, time, event, grid.times()))
}

pub(crate) fn rps_unchecked<T: Scalar>(s_hat: &[T], time: T, event: bool, grid: &[T]) -> T {
    let mut loss = T::zero();
    for (&s, &t) in s_hat.iter().zip(grid) {
        if t < time {
            loss += (T::one() - s) * (T::one() - s);
        } else if event {
            loss += s * s;
        }
    }
    loss
}

/// Adds `scale * dRPS/dz` for logits `z` of one sample into `dz`, given the
/// softmax probabilities `pmf`. Returns the sample's RPS.
pub(crate) fn rps_logit_grad<T: Scalar>(
    pmf: &[T],
    time: T,
    event: bool,
    grid: &[T],
    scale: T,
    s_buf: &mut Vec<T>,
    dz: &mut [T],
) -> T {
    let d = pmf.len();
    let k = grid.len();
    s_buf.resize(k, T::zero());
    survival_into(pmf, s_buf);
    let loss = rps_unchecked(s_buf, time, event, grid);
    // dL/dp_j = sum_{k < j} dL/dS_k, built as a running prefix sum
    let two = T::of(2.0);
    let mut prefix = T::zero();
    let mut gp = vec![T::zero(); d];
    for j in 0..d {
        gp[j] = prefix;
        if j < k {
            let gs = if grid[j] < time {
                -two * (T::one() - s_buf[j])
            } else if event {
                two * s_buf[j]
            } else {
                T::zero()
            };
            prefix += gs;
        }
    }
    let mean: T = pmf.iter().zip(&gp).map(|(&p, &g)| p * g).sum();
    for j in 0..d {
        dz[j] += scale * pmf[j] * (gp[j] - mean);
    }
    loss
}

/// Negative log partial likelihood averaged over events, with risk sets
/// `{j : T_j >= T_i}` (Breslow handling of tied event times).
pub fn cox_loss<T: Scalar>(risks: &[T], times: &[T], events: &[bool]) -> Result<T> {
    let mut grad = vec![T::zero(); risks.len()];
    cox_loss_grad(risks, times, events, &mut grad)
}

/// Returns the Cox loss and writes its gradient with respect to `risks` into `grad`.
pub fn cox_loss_grad<T: Scalar>(risks: &[T], times: &[T], events: &[bool], grad: &mut [T]) -> Result<T> {
    let n = risks.len();
    if times.len() != n || events.len() != n || grad.len() != n {
        return Err(DysError::shape(
            "cox inputs",
            n,
            times.len().min(events.len()).min(grad.len()),
        ));
    }
    let n_events = events.iter().filter(|&&e| e).count();
    if n_events == 0 {
        return Err(DysError::InsufficientData("Cox loss needs at least one event".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| times[a].partial_cmp(&times[b]).expect("finite times"));
    let max = risks.iter().copied().fold(T::neg_infinity(), T::max);
    let expw: Vec<T> = order.iter().map(|&i| (risks[i] - max).exp()).collect();

    // suffix[pos] = sum of exp over sorted positions >= pos
    let mut suffix = vec![T::zero(); n + 1];
    for pos in (0..n).rev() {
        suffix[pos] = suffix[pos + 1] + expw[pos];
    }

    let inv_e = T::one() / T::of(n_events as f64);
    let mut loss = T::zero();
    let mut acc = T::zero();
    let mut start = 0;
    while start < n {
        let t = times[order[start]];
        let mut end = start;
        let mut d = 0usize;
        while end < n && times[order[end]] == t {
            if events[order[end]] {
                d += 1;
                loss -= risks[order[end]] - max - suffix[start].ln();
            }
            end += 1;
        }
        acc += T::of(d as f64) / suffix[start];
        for pos in start..end {
            let i = order[pos];
            let delta = if events[i] { T::one() } else { T::zero() };
            grad[i] = -inv_e * (delta - expw[pos] * acc);
        }
        start = end;
    }
    Ok(loss * inv_e)
}
