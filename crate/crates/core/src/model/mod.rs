//! The gated additive survival model: per-feature and per-pair shape
//! networks whose gated outputs are summed into logits over a discrete time
//! grid (softmax head), or into a scalar risk (Cox head).

mod engine;
mod head;
mod regularize;
mod train;

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{Preprocessor, SurvivalDataset, TimeGrid};
use crate::error::{DysError, Result};
use crate::numeric::{smooth_step_grad_unchecked, smooth_step_unchecked, Mlp, MlpTrace};
use crate::Scalar;

pub use head::{cox_loss, cox_loss_grad, rps_loss, softmax, survival_from_pmf};
pub use regularize::{binary_entropy, entropy_loss, sparsity_loss};
pub use train::{
    fit_main_effects, fit_one_stage, fit_stage_two, mean_cox_loss, mean_rps_loss, objective_gradient, train,
    two_stage_fit, EpochRecord, TrainConfig, TrainLog, TwoStageLog,
};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum HeadMode {
    /// Softmax over the time grid, trained with the ranked probability score.
    #[default]
    Rps,
    /// Scalar risk trained with the Cox partial likelihood.
    Cox,
}

impl HeadMode {
    pub fn name(self) -> &'static str {
        match self {
            HeadMode::Rps => "rps",
            HeadMode::Cox => "cox",
        }
    }
}

/// Learnable scalar `mu` passed through a smooth-step of fixed width `gamma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Gate<T> {
    pub mu: T,
    pub gamma: T,
}

impl<T: Scalar> Gate<T> {
    /// Starts inside the smooth band at `gamma / 4` (value ~0.844).
    pub fn initial(gamma: T) -> Self {
        Gate {
            mu: gamma / T::of(4.0),
            gamma,
        }
    }

    pub fn open(gamma: T) -> Self {
        Gate { mu: gamma, gamma }
    }

    pub fn closed(gamma: T) -> Self {
        Gate { mu: -gamma, gamma }
    }

    #[inline]
    pub fn value(&self) -> T {
        smooth_step_unchecked(self.mu, self.gamma)
    }

    #[inline]
    pub fn grad(&self) -> T {
        smooth_step_grad_unchecked(self.mu, self.gamma)
    }

    pub fn is_active(&self) -> bool {
        self.value() > T::zero()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EffectId {
    Main(usize),
    Pair(usize, usize),
}

impl EffectId {
    pub fn features(&self) -> Vec<usize> {
        match *self {
            EffectId::Main(j) => vec![j],
            EffectId::Pair(j, l) => vec![j, l],
        }
    }

    pub fn label(&self, names: &[String]) -> String {
        let name = |j: usize| names.get(j).cloned().unwrap_or_else(|| format!("x{}", j + 1));
        match *self {
            EffectId::Main(j) => name(j),
            EffectId::Pair(j, l) => format!("{}:{}", name(j), name(l)),
        }
    }
}

/// One gated shape function: a main effect (input dim 1) or a pairwise
/// interaction (input dim 2).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Effect<T> {
    pub id: EffectId,
    pub net: Mlp<T>,
    pub gate: Gate<T>,
}

impl<T: Scalar> Effect<T> {
    #[inline]
    pub(crate) fn gather(&self, x: &[T], buf: &mut [T; 2]) -> usize {
        match self.id {
            EffectId::Main(j) => {
                buf[0] = x[j];
                1
            }
            EffectId::Pair(j, l) => {
                buf[0] = x[j];
                buf[1] = x[l];
                2
            }
        }
    }

    /// Raw (ungated) shape-function output on a full feature row.
    pub fn raw_output(&self, x: &[T]) -> Result<Vec<T>> {
        let mut buf = [T::zero(); 2];
        let d = self.gather(x, &mut buf);
        self.net.forward(&buf[..d])
    }

    /// Gated output on the effect's own inputs (one or two values).
    pub fn gated_output(&self, inputs: &[T]) -> Result<Vec<T>> {
        let s = self.gate.value();
        let mut out = self.net.forward(inputs)?;
        out.iter_mut().for_each(|v| *v *= s);
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct DySModel<T> {
    pub format_version: u32,
    pub head: HeadMode,
    pub grid: TimeGrid<T>,
    /// Adds a bin for mass beyond the last grid time.
    pub overflow_bin: bool,
    pub n_features: usize,
    pub feature_names: Vec<String>,
    /// Observed training `[min, max]` per feature, used for impact curves.
    pub feature_ranges: Vec<(T, T)>,
    pub main_effects: Vec<Effect<T>>,
    pub interactions: Vec<Effect<T>>,
    /// Set after stage one of two-stage fitting; main effects no longer train.
    pub frozen_main: bool,
    pub train_config: Option<TrainConfig>,
    pub preprocessor: Option<Preprocessor>,
}

impl<T: Scalar> DySModel<T> {
    /// Main effects for every feature, no interactions.
    pub fn new<R: Rng + ?Sized>(
        feature_names: Vec<String>,
        grid: TimeGrid<T>,
        head: HeadMode,
        cfg: &TrainConfig,
        rng: &mut R,
    ) -> Result<Self> {
        cfg.validate()?;
        let mut model = DySModel {
            format_version: MODEL_FORMAT_VERSION,
            head,
            grid,
            overflow_bin: cfg.overflow_bin && head == HeadMode::Rps,
            n_features: feature_names.len(),
            feature_ranges: vec![(T::zero(), T::zero()); feature_names.len()],
            feature_names,
            main_effects: Vec::new(),
            interactions: Vec::new(),
            frozen_main: false,
            train_config: Some(cfg.clone()),
            preprocessor: None,
        };
        let gamma = T::of(cfg.gamma);
        for j in 0..model.n_features {
            let net = Mlp::random(&model.net_sizes(1, &cfg.hidden_sizes), rng)?;
            let gate = if cfg.sparsity_enabled {
                Gate::initial(gamma)
            } else {
                Gate::open(gamma)
            };
            model.main_effects.push(Effect {
                id: EffectId::Main(j),
                net,
                gate,
            });
        }
        Ok(model)
    }

    fn net_sizes(&self, input: usize, hidden: &[usize]) -> Vec<usize> {
        let mut sizes = vec![input];
        sizes.extend_from_slice(hidden);
        sizes.push(self.output_dim());
        sizes
    }

    /// Adds interaction effects for the given pairs (each ordered `j < l`).
    pub fn add_interactions<R: Rng + ?Sized>(
        &mut self,
        pairs: &[(usize, usize)],
        cfg: &TrainConfig,
        rng: &mut R,
    ) -> Result<()> {
        let gamma = T::of(cfg.gamma);
        for &(j, l) in pairs {
            if j >= l || l >= self.n_features {
                return Err(DysError::param("interaction", format!("invalid pair ({j}, {l})")));
            }
            if self.main_effects.iter().all(|e| e.id != EffectId::Main(j))
                || self.main_effects.iter().all(|e| e.id != EffectId::Main(l))
            {
                return Err(DysError::param(
                    "interaction",
                    format!("pair ({j}, {l}) lacks a main effect"),
                ));
            }
            if self.interactions.iter().any(|e| e.id == EffectId::Pair(j, l)) {
                return Err(DysError::param("interaction", format!("duplicate pair ({j}, {l})")));
            }
            let net = Mlp::random(&self.net_sizes(2, &cfg.hidden_sizes), rng)?;
            let gate = if cfg.sparsity_enabled {
                Gate::initial(gamma)
            } else {
                Gate::open(gamma)
            };
            self.interactions.push(Effect {
                id: EffectId::Pair(j, l),
                net,
                gate,
            });
        }
        Ok(())
    }

    /// Width of every shape-function output: the number of softmax bins in
    /// RPS mode, 1 in Cox mode.
    pub fn output_dim(&self) -> usize {
        match self.head {
            HeadMode::Rps => self.grid.len() + usize::from(self.overflow_bin),
            HeadMode::Cox => 1,
        }
    }

    pub fn effects(&self) -> impl Iterator<Item = &Effect<T>> {
        self.main_effects.iter().chain(&self.interactions)
    }

    pub fn effects_mut(&mut self) -> impl Iterator<Item = &mut Effect<T>> {
        self.main_effects.iter_mut().chain(self.interactions.iter_mut())
    }

    pub fn effect(&self, id: EffectId) -> Result<&Effect<T>> {
        self.effects()
            .find(|e| e.id == id)
            .ok_or_else(|| DysError::UnknownEffect(id.label(&self.feature_names)))
    }

    /// Sorted feature indices whose main-effect gate is nonzero.
    pub fn active_features(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self
            .main_effects
            .iter()
            .filter(|e| e.gate.is_active())
            .filter_map(|e| match e.id {
                EffectId::Main(j) => Some(j),
                EffectId::Pair(..) => None,
            })
            .collect();
        v.sort_unstable();
        v
    }

    pub fn active_interactions(&self) -> Vec<(usize, usize)> {
        self.interactions
            .iter()
            .filter(|e| e.gate.is_active())
            .filter_map(|e| match e.id {
                EffectId::Pair(j, l) => Some((j, l)),
                EffectId::Main(_) => None,
            })
            .collect()
    }

    fn check_row(&self, x: &[T]) -> Result<()> {
        if x.len() != self.n_features {
            return Err(DysError::shape("feature row", self.n_features, x.len()));
        }
        Ok(())
    }

    /// `f(x) = sum_e s(mu_e) f_e(x_e)`; effects with a closed gate are skipped
    /// entirely, so they contribute exactly nothing.
    pub fn logits(&self, x: &[T]) -> Result<Vec<T>> {
        self.check_row(x)?;
        let mut out = vec![T::zero(); self.output_dim()];
        let mut trace = MlpTrace::default();
        self.logits_into(x, &mut trace, &mut out);
        Ok(out)
    }

    pub(crate) fn logits_into(&self, x: &[T], trace: &mut MlpTrace<T>, out: &mut [T]) {
        out.iter_mut().for_each(|v| *v = T::zero());
        let mut buf = [T::zero(); 2];
        for e in self.effects() {
            let s = e.gate.value();
            if s == T::zero() {
                continue;
            }
            let d = e.gather(x, &mut buf);
            e.net.forward_traced(&buf[..d], trace).expect("effect input width");
            for (o, &v) in out.iter_mut().zip(trace.output()) {
                *o += s * v;
            }
        }
    }

    fn require(&self, head: HeadMode) -> Result<()> {
        if self.head != head {
            return Err(DysError::HeadMode {
                expected: head.name(),
                actual: self.head.name(),
            });
        }
        Ok(())
    }

    pub fn predict_pmf(&self, x: &[T]) -> Result<Vec<T>> {
        self.require(HeadMode::Rps)?;
        Ok(softmax(&self.logits(x)?))
    }

    /// `S(t_k | x)` for every grid time.
    pub fn predict_survival(&self, x: &[T]) -> Result<Vec<T>> {
        Ok(survival_from_pmf(&self.predict_pmf(x)?, self.grid.len()))
    }

    pub fn predict_risk(&self, x: &[T]) -> Result<T> {
        self.require(HeadMode::Cox)?;
        Ok(self.logits(x)?[0])
    }

    /// Per-sample risk at the selected grid columns: `1 - S(t_k | x)` in RPS
    /// mode, the time-constant Cox risk otherwise.
    pub fn risk_matrix(&self, ds: &SurvivalDataset<T>, columns: &[usize]) -> Result<Vec<Vec<T>>> {
        if let Some(&k) = columns.iter().find(|&&k| k >= self.grid.len()) {
            return Err(DysError::shape("grid column", self.grid.len(), k));
        }
        ds.rows()
            .map(|x| match self.head {
                HeadMode::Rps => {
                    let s = self.predict_survival(x)?;
                    Ok(columns.iter().map(|&k| T::one() - s[k]).collect())
                }
                HeadMode::Cox => {
                    let r = self.predict_risk(x)?;
                    Ok(vec![r; columns.len()])
                }
            })
            .collect()
    }

    /// Mean absolute gated output of one effect over `ds`, per output bin.
    pub fn effect_importance(&self, effect: &Effect<T>, ds: &SurvivalDataset<T>) -> Vec<T> {
        let d = self.output_dim();
        let mut acc = vec![T::zero(); d];
        let s = effect.gate.value();
        if s == T::zero() || ds.n_samples() == 0 {
            return acc;
        }
        let mut trace = MlpTrace::default();
        let mut buf = [T::zero(); 2];
        for x in ds.rows() {
            let k = effect.gather(x, &mut buf);
            effect
                .net
                .forward_traced(&buf[..k], &mut trace)
                .expect("effect input width");
            for (a, &v) in acc.iter_mut().zip(trace.output()) {
                *a += (s * v).abs();
            }
        }
        let n = T::of(ds.n_samples() as f64);
        acc.iter_mut().for_each(|a| *a /= n);
        acc
    }

    /// Every net parameter (mains then interactions, in effect order)
    /// followed by every gate `mu` in the same effect order.
    pub fn flat_params(&self) -> Vec<T> {
        let mut v: Vec<T> = self.effects().flat_map(|e| e.net.flat_params()).collect();
        v.extend(self.effects().map(|e| e.gate.mu));
        v
    }

    pub fn set_flat_params(&mut self, flat: &[T]) -> Result<()> {
        let expected = self.effects().map(|e| e.net.num_params() + 1).sum::<usize>();
        if flat.len() != expected {
            return Err(DysError::shape("model parameters", expected, flat.len()));
        }
        let mut offset = 0;
        for e in self.effects_mut() {
            let n = e.net.num_params();
            e.net.set_flat_params(&flat[offset..offset + n])?;
            offset += n;
        }
        for e in self.effects_mut() {
            e.gate.mu = flat[offset];
            offset += 1;
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: DySModel<T> = serde_json::from_str(s)?;
        if m.format_version != MODEL_FORMAT_VERSION {
            return Err(DysError::Schema(format!(
                "unsupported model format version {} (expected {MODEL_FORMAT_VERSION})",
                m.format_version
            )));
        }
        Ok(m)
    }

    /// Hex SHA-256 of the JSON serialization.
    pub fn content_hash(&self) -> Result<String> {
        let digest = Sha256::digest(self.to_json()?.as_bytes());
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }
}

#[cfg(test)]
mod tests;
