//! Exact-k feature selection by bisection on the sparsity weight.
//!
//! Larger λ closes more gates, so the active count is (roughly) nonincreasing
//! in λ. The search halves λ while too few features survive and no lower
//! bracket exists, doubles it while too many survive and no upper bracket
//! exists, and bisects the bracket otherwise.

use serde::{Deserialize, Serialize};

use crate::data::{SurvivalDataset, TimeGrid};
use crate::error::{DysError, Result};
use crate::model::{fit_main_effects, DySModel, HeadMode, TrainConfig, TrainLog};
use crate::Scalar;

pub const DEFAULT_LAMBDA0: f64 = 0.1;
pub const DEFAULT_MAX_ITERATIONS: usize = 30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectionConfig {
    pub k: usize,
    pub lambda0: f64,
    pub max_iterations: usize,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            k: 10,
            lambda0: DEFAULT_LAMBDA0,
            max_iterations: DEFAULT_MAX_ITERATIONS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BisectionState {
    /// Largest λ seen that left more than k features.
    pub lambda_low: Option<f64>,
    /// Smallest λ seen that left fewer than k features.
    pub lambda_high: Option<f64>,
    pub lambda: f64,
    pub iterations: usize,
    pub max_iterations: usize,
}

impl BisectionState {
    pub fn new(lambda0: f64, max_iterations: usize) -> Self {
        BisectionState {
            lambda_low: None,
            lambda_high: None,
            lambda: lambda0,
            iterations: 0,
            max_iterations,
        }
    }

    /// Records the count obtained at the current λ and moves to the next.
    fn advance(&mut self, count: usize, k: usize) {
        if count < k {
            self.lambda_high = Some(self.lambda);
            self.lambda = match self.lambda_low {
                None => self.lambda / 2.0,
                Some(lo) => 0.5 * (lo + self.lambda),
            };
        } else {
            self.lambda_low = Some(self.lambda);
            self.lambda = match self.lambda_high {
                None => self.lambda * 2.0,
                Some(hi) => 0.5 * (self.lambda + hi),
            };
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BisectionStep {
    pub iteration: usize,
    pub lambda: f64,
    pub active_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BisectionReport {
    pub k: usize,
    pub lambda: f64,
    pub trajectory: Vec<BisectionStep>,
}

/// Runs `fit(λ) -> (model, active count)` until the count equals `k`.
/// Every call is one fit; at most `max_iterations` calls are made.
pub fn bisect_to_k<M, F>(mut fit: F, k: usize, lambda0: f64, max_iterations: usize) -> Result<(M, BisectionReport)>
where
    F: FnMut(f64) -> Result<(M, usize)>,
{
    if k == 0 {
        return Err(DysError::param("k", "must be >= 1"));
    }
    if !(lambda0 > 0.0 && lambda0.is_finite()) {
        return Err(DysError::param(
            "lambda0",
            format!("must be finite and > 0, got {lambda0}"),
        ));
    }
    if max_iterations == 0 {
        return Err(DysError::param("max_iterations", "must be >= 1"));
    }
    let mut state = BisectionState::new(lambda0, max_iterations);
    let mut trajectory = Vec::new();
    let mut below: Option<(f64, usize)> = None;
    let mut above: Option<(f64, usize)> = None;
    while state.iterations < state.max_iterations {
        let lambda = state.lambda;
        let (model, count) = fit(lambda)?;
        state.iterations += 1;
        trajectory.push(BisectionStep {
            iteration: state.iterations,
            lambda,
            active_count: count,
        });
        log::info!("bisection {}: lambda {lambda:e} -> {count} active", state.iterations);
        if count == k {
            return Ok((model, BisectionReport { k, lambda, trajectory }));
        }
        if count < k {
            if below.is_none_or(|(_, c)| count > c) {
                below = Some((lambda, count));
            }
        } else if above.is_none_or(|(_, c)| count < c) {
            above = Some((lambda, count));
        }
        state.advance(count, k);
    }
    Err(DysError::BisectionExhausted {
        target: k,
        iterations: state.iterations,
        closest_below: below,
        closest_above: above,
        lambda_low: state.lambda_low,
        lambda_high: state.lambda_high,
    })
}

/// Trains sparse main effects with λ chosen by bisection so that exactly `k`
/// features remain active. Every trial uses the same seed.
pub fn select_k_features<T: Scalar>(
    train_ds: &SurvivalDataset<T>,
    val_ds: &SurvivalDataset<T>,
    grid: &TimeGrid<T>,
    head: HeadMode,
    cfg: &TrainConfig,
    sel: &SelectionConfig,
) -> Result<(DySModel<T>, TrainLog, BisectionReport)> {
    let k = sel.k;
    if k > train_ds.n_features() {
        return Err(DysError::param(
            "k",
            format!("cannot select {k} of {} features", train_ds.n_features()),
        ));
    }
    let ((model, log), report) = bisect_to_k(
        |lambda| {
            let trial = TrainConfig {
                lambda,
                sparsity_enabled: true,
                ..cfg.clone()
            };
            let (m, log) = fit_main_effects(train_ds, val_ds, grid.clone(), head, &trial)?;
            let count = m.active_features().len();
            Ok(((m, log), count))
        },
        k,
        sel.lambda0,
        sel.max_iterations,
    )?;
    Ok((model, log, report))
}
