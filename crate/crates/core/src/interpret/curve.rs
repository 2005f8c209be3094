use serde::{Deserialize, Serialize};

use crate::error::{DysError, Result};
use crate::model::{DySModel, EffectId, HeadMode};
use crate::numeric::MlpTrace;
use crate::Scalar;

pub const DEFAULT_MAIN_RESOLUTION: usize = 256;
/// Points per axis of the interaction lattice.
pub const DEFAULT_PAIR_RESOLUTION: usize = 64;

/// Gated shape function of one effect sampled on a regular grid. Pair
/// curves store the lattice row-major with the first feature outer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ImpactCurve<T> {
    pub effect: EffectId,
    pub label: String,
    /// Grid index; `None` for the time-independent Cox-mode curve.
    pub time_index: Option<usize>,
    pub time: Option<T>,
    pub x: Vec<T>,
    /// Second-axis values for interactions.
    pub x2: Option<Vec<T>>,
    pub logit: Vec<T>,
}

fn linspace<T: Scalar>(lo: T, hi: T, n: usize) -> Vec<T> {
    if n == 1 {
        return vec![lo];
    }
    let step = (hi - lo) / T::of((n - 1) as f64);
    (0..n)
        .map(|i| if i + 1 == n { hi } else { lo + step * T::of(i as f64) })
        .collect()
}

/// Evaluates `s(mu) * net(.)[time_index]` on an evenly spaced grid over the
/// observed training range of each input feature. `time_index` must be
/// `None` for Cox-mode models and a grid index otherwise.
pub fn impact_curve<T: Scalar>(
    model: &DySModel<T>,
    effect: EffectId,
    time_index: Option<usize>,
    resolution: Option<usize>,
) -> Result<ImpactCurve<T>> {
    let e = model.effect(effect)?;
    let column = match (model.head, time_index) {
        (HeadMode::Rps, Some(k)) if k < model.grid.len() => k,
        (HeadMode::Rps, Some(k)) => return Err(DysError::shape("time index", model.grid.len(), k)),
        (HeadMode::Rps, None) => return Err(DysError::param("time_index", "required for RPS models")),
        (HeadMode::Cox, None) => 0,
        (HeadMode::Cox, Some(_)) => return Err(DysError::param("time_index", "Cox models have a single curve")),
    };
    let features = effect.features();
    let res = resolution.unwrap_or(if features.len() == 1 {
        DEFAULT_MAIN_RESOLUTION
    } else {
        DEFAULT_PAIR_RESOLUTION
    });
    if res == 0 {
        return Err(DysError::param("resolution", "must be >= 1"));
    }
    let axis = |j: usize| {
        let (lo, hi) = model.feature_ranges[j];
        linspace(lo, hi, res)
    };
    let s = e.gate.value();
    let mut trace = MlpTrace::default();
    let mut eval = |input: &[T]| -> Result<T> {
        if s == T::zero() {
            return Ok(T::zero());
        }
        e.net.forward_traced(input, &mut trace)?;
        Ok(s * trace.output()[column])
    };
    let x = axis(features[0]);
    let (x2, logit) = if let Some(&l) = features.get(1) {
        let x2 = axis(l);
        let mut logit = Vec::with_capacity(res * res);
        for &a in &x {
            for &b in &x2 {
                logit.push(eval(&[a, b])?);
            }
        }
        (Some(x2), logit)
    } else {
        (None, x.iter().map(|&a| eval(&[a])).collect::<Result<Vec<T>>>()?)
    };
    Ok(ImpactCurve {
        effect,
        label: effect.label(&model.feature_names),
        time_index,
        time: time_index.map(|k| model.grid.times()[k]),
        x,
        x2,
        logit,
    })
}

/// Index `i` and weight `w` with `v ~ (1 - w) axis[i] + w axis[i + 1]`,
/// clamped to the axis ends.
fn bracket<T: Scalar>(axis: &[T], v: T) -> (usize, T) {
    if axis.len() == 1 || v <= axis[0] {
        return (0, T::zero());
    }
    let last = axis.len() - 1;
    if v >= axis[last] {
        return (last - 1, T::one());
    }
    let i = axis.partition_point(|&a| a <= v).saturating_sub(1).min(last - 1);
    let span = axis[i + 1] - axis[i];
    let w = if span > T::zero() {
        (v - axis[i]) / span
    } else {
        T::zero()
    };
    (i, w)
}

impl<T: Scalar> ImpactCurve<T> {
    /// Linear (main) or bilinear (pair) interpolation at the effect's
    /// inputs. Exact on the abscissae.
    pub fn interpolate(&self, inputs: &[T]) -> T {
        let (i, w) = bracket(&self.x, inputs[0]);
        match &self.x2 {
            None => {
                if self.x.len() == 1 || w == T::zero() {
                    return self.logit[i];
                }
                if w == T::one() {
                    return self.logit[i + 1];
                }
                self.logit[i] * (T::one() - w) + self.logit[i + 1] * w
            }
            Some(x2) => {
                let n2 = x2.len();
                let (j, u) = bracket(x2, inputs[1]);
                let at = |a: usize, b: usize| self.logit[a * n2 + b];
                let row = |a: usize| {
                    if n2 == 1 || u == T::zero() {
                        at(a, j)
                    } else if u == T::one() {
                        at(a, j + 1)
                    } else {
                        at(a, j) * (T::one() - u) + at(a, j + 1) * u
                    }
                };
                if self.x.len() == 1 || w == T::zero() {
                    row(i)
                } else if w == T::one() {
                    row(i + 1)
                } else {
                    row(i) * (T::one() - w) + row(i + 1) * w
                }
            }
        }
    }
}
