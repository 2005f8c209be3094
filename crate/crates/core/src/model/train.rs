use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::engine::{Engine, Objective};
use super::head::{cox_loss, rps_unchecked, softmax_into, survival_into};
use super::regularize::{entropy_loss, sparsity_loss};
use super::{DySModel, EffectId, HeadMode};
use crate::data::{SurvivalDataset, TimeGrid};
use crate::error::{DysError, Result};
use crate::numeric::{AdamConfig, AdamState, MlpTrace};
use crate::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// Learning rate for gate parameters; defaults to `learning_rate`.
    pub gate_learning_rate: Option<f64>,
    pub max_epochs: usize,
    pub patience: usize,
    pub batch_size: usize,
    /// Cox-mode batch size; by default the full training set when it has at
    /// most 4096 samples, `batch_size` otherwise.
    pub cox_batch_size: Option<usize>,
    pub lambda: f64,
    pub alpha: f64,
    pub tau: f64,
    pub sparsity_enabled: bool,
    pub seed: u64,
    pub hidden_sizes: Vec<usize>,
    /// Smooth-step width shared by all gates.
    pub gamma: f64,
    pub overflow_bin: bool,
    pub max_interactions: usize,
    /// Process effects of a batch on the rayon pool. Results are identical
    /// to sequential mode.
    pub parallel: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-4,
            gate_learning_rate: None,
            max_epochs: 200,
            patience: 5,
            batch_size: 128,
            cox_batch_size: None,
            lambda: 0.0,
            alpha: 1.0,
            tau: 1e-3,
            sparsity_enabled: false,
            seed: 0,
            hidden_sizes: vec![32],
            gamma: 1.0,
            overflow_bin: false,
            max_interactions: 1000,
            parallel: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let nonneg = |name: &'static str, v: f64| {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(DysError::param(name, format!("must be finite and >= 0, got {v}")))
            }
        };
        nonneg("lambda", self.lambda)?;
        nonneg("alpha", self.alpha)?;
        nonneg("tau", self.tau)?;
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(DysError::param("learning_rate", "must be finite and > 0"));
        }
        if let Some(g) = self.gate_learning_rate {
            if !(g > 0.0 && g.is_finite()) {
                return Err(DysError::param("gate_learning_rate", "must be finite and > 0"));
            }
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(DysError::param("gamma", "must be finite and > 0"));
        }
        if self.patience < 1 {
            return Err(DysError::param("patience", "must be >= 1"));
        }
        if self.max_epochs < 1 {
            return Err(DysError::param("max_epochs", "must be >= 1"));
        }
        if self.batch_size < 1 || self.cox_batch_size == Some(0) {
            return Err(DysError::param("batch_size", "must be >= 1"));
        }
        if self.hidden_sizes.contains(&0) {
            return Err(DysError::param("hidden_sizes", "widths must be positive"));
        }
        Ok(())
    }

    fn batch_size_for(&self, head: HeadMode, n: usize) -> usize {
        match head {
            HeadMode::Rps => self.batch_size,
            HeadMode::Cox => self
                .cox_batch_size
                .unwrap_or(if n <= 4096 { n } else { self.batch_size }),
        }
        .max(1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean minibatch objective (data loss plus regularizers).
    pub train_loss: f64,
    /// Validation data loss.
    pub val_loss: f64,
    /// Early-stopping criterion: the validation data loss plus, when
    /// sparsity is enabled, the sparsity and entropy terms.
    pub val_objective: f64,
    pub active_features: usize,
    pub active_interactions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct TrainLog {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_objective: f64,
    pub stopped_early: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoStageLog {
    pub stage1: TrainLog,
    pub stage2: TrainLog,
    pub candidate_pairs: Vec<(usize, usize)>,
    /// Number of active-feature pairs before the interaction cap applied.
    pub pairs_before_cap: usize,
}

/// Mean RPS of the model's survival curves over `ds`.
pub fn mean_rps_loss<T: Scalar>(model: &DySModel<T>, ds: &SurvivalDataset<T>) -> Result<T> {
    if model.head != HeadMode::Rps {
        return Err(DysError::HeadMode {
            expected: "rps",
            actual: model.head.name(),
        });
    }
    if ds.n_samples() == 0 {
        return Err(DysError::InsufficientData("empty dataset".into()));
    }
    let d = model.output_dim();
    let mut trace = MlpTrace::default();
    let mut logits = vec![T::zero(); d];
    let mut pmf = vec![T::zero(); d];
    let mut s = vec![T::zero(); model.grid.len()];
    let mut total = T::zero();
    for (i, x) in ds.rows().enumerate() {
        model.logits_into(x, &mut trace, &mut logits);
        softmax_into(&logits, &mut pmf);
        survival_into(&pmf, &mut s);
        total += rps_unchecked(&s, ds.time[i], ds.event[i], model.grid.times());
    }
    Ok(total / T::of(ds.n_samples() as f64))
}

/// Cox loss of the model's risks over all of `ds`.
pub fn mean_cox_loss<T: Scalar>(model: &DySModel<T>, ds: &SurvivalDataset<T>) -> Result<T> {
    let risks: Vec<T> = ds.rows().map(|x| model.predict_risk(x)).collect::<Result<_>>()?;
    cox_loss(&risks, &ds.time, &ds.event)
}

fn validation_loss<T: Scalar>(model: &DySModel<T>, ds: &SurvivalDataset<T>) -> Result<T> {
    match model.head {
        HeadMode::Rps => mean_rps_loss(model, ds),
        HeadMode::Cox => mean_cox_loss(model, ds),
    }
}

fn frozen_logits<T: Scalar>(model: &DySModel<T>, ds: &SurvivalDataset<T>) -> Vec<T> {
    let d = model.output_dim();
    let mut out = vec![T::zero(); ds.n_samples() * d];
    let mut trace = MlpTrace::default();
    let mut buf = [T::zero(); 2];
    for (i, x) in ds.rows().enumerate() {
        for e in &model.main_effects {
            let s = e.gate.value();
            if s == T::zero() {
                continue;
            }
            let k = e.gather(x, &mut buf);
            e.net.forward_traced(&buf[..k], &mut trace).expect("effect input width");
            for (o, &v) in out[i * d..(i + 1) * d].iter_mut().zip(trace.output()) {
                *o += s * v;
            }
        }
    }
    out
}

/// Full-batch training objective over `ds` (data loss plus, when
/// `cfg.sparsity_enabled`, the sparsity and entropy terms) and its gradient
/// with respect to every parameter, in [`DySModel::flat_params`] order.
pub fn objective_gradient<T: Scalar>(
    model: &DySModel<T>,
    ds: &SurvivalDataset<T>,
    cfg: &TrainConfig,
) -> Result<(T, Vec<T>)> {
    cfg.validate()?;
    if ds.n_features() != model.n_features {
        return Err(DysError::shape("dataset features", model.n_features, ds.n_features()));
    }
    let obj = Objective {
        lambda: T::of(cfg.lambda),
        alpha: T::of(cfg.alpha),
        tau: T::of(cfg.tau),
        sparsity: cfg.sparsity_enabled,
        train_gates: true,
    };
    let mut engine = Engine::new(model, true, false);
    let rows: Vec<usize> = (0..ds.n_samples()).collect();
    let loss = engine.batch_objective(model, ds, &rows, None, &obj)?;
    Ok((loss, engine.flat_gradient()))
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Minibatch Adam on the data loss plus (when sparsity is enabled) the
/// sparsity and entropy regularizers, with early stopping on the same
/// objective evaluated on `val`. The best-validation parameters are restored.
///
/// When `model.frozen_main` is set only interaction effects train.
pub fn train<T: Scalar>(
    model: &mut DySModel<T>,
    train: &SurvivalDataset<T>,
    val: &SurvivalDataset<T>,
    cfg: &TrainConfig,
) -> Result<TrainLog> {
    cfg.validate()?;
    for ds in [train, val] {
        if ds.n_features() != model.n_features {
            return Err(DysError::shape("dataset features", model.n_features, ds.n_features()));
        }
    }
    if train.n_samples() == 0 || val.n_samples() == 0 {
        return Err(DysError::InsufficientData(
            "training and validation sets must be nonempty".into(),
        ));
    }

    let train_mains = !model.frozen_main;
    if train_mains {
        model.feature_ranges = train.feature_ranges();
    }
    if !cfg.sparsity_enabled {
        let gamma = T::of(cfg.gamma);
        for e in model.interactions.iter_mut() {
            e.gate = super::Gate::open(gamma);
        }
        if train_mains {
            for e in model.main_effects.iter_mut() {
                e.gate = super::Gate::open(gamma);
            }
        }
    }
    model.train_config = Some(cfg.clone());

    let obj = Objective {
        lambda: T::of(cfg.lambda),
        alpha: T::of(cfg.alpha),
        tau: T::of(cfg.tau),
        sparsity: cfg.sparsity_enabled,
        train_gates: cfg.sparsity_enabled,
    };
    let mut engine = Engine::new(model, train_mains, cfg.parallel);
    let mut net_opt = AdamState::new(
        engine.num_net_params(),
        AdamConfig::with_learning_rate(cfg.learning_rate),
    );
    let mut gate_opt = cfg.sparsity_enabled.then(|| {
        AdamState::new(
            engine.num_gates(),
            AdamConfig::with_learning_rate(cfg.gate_learning_rate.unwrap_or(cfg.learning_rate)),
        )
    });
    let base = (!train_mains).then(|| frozen_logits(model, train));

    let mut rng = rng_for(cfg.seed, 1 + u64::from(!train_mains));
    let bs = cfg.batch_size_for(model.head, train.n_samples());
    let mut order: Vec<usize> = (0..train.n_samples()).collect();

    let mut log = TrainLog {
        best_val_objective: f64::INFINITY,
        ..TrainLog::default()
    };
    let mut best: Option<DySModel<T>> = None;
    let mut wait = 0;

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut sum = 0.0;
        for (b, rows) in order.chunks(bs).enumerate() {
            let loss = engine
                .batch_objective(model, train, rows, base.as_deref(), &obj)?
                .as_f64();
            if !loss.is_finite() {
                return Err(DysError::NonFinite {
                    what: "training loss",
                    detail: format!("epoch {epoch}, batch {b}: {loss}"),
                });
            }
            engine
                .apply(model, &mut net_opt, gate_opt.as_mut())
                .map_err(|e| match e {
                    DysError::NonFinite { what, detail } => DysError::NonFinite {
                        what,
                        detail: format!("epoch {epoch}, batch {b}: {detail}"),
                    },
                    other => other,
                })?;
            sum += loss * rows.len() as f64;
        }
        let val_loss = validation_loss(model, val)?.as_f64();
        let val_objective = if cfg.sparsity_enabled {
            val_loss + (sparsity_loss(model, obj.lambda, obj.alpha) + entropy_loss(model, obj.tau)).as_f64()
        } else {
            val_loss
        };
        if !val_objective.is_finite() {
            return Err(DysError::NonFinite {
                what: "validation loss",
                detail: format!("epoch {epoch}: loss {val_loss}, objective {val_objective}"),
            });
        }
        let record = EpochRecord {
            epoch,
            train_loss: sum / train.n_samples() as f64,
            val_loss,
            val_objective,
            active_features: model.active_features().len(),
            active_interactions: model.active_interactions().len(),
        };
        log::debug!(
            "epoch {epoch}: train {:.6} val {:.6} active {}/{}",
            record.train_loss,
            record.val_loss,
            record.active_features,
            record.active_interactions
        );
        log.epochs.push(record);
        if val_objective < log.best_val_objective {
            log.best_val_objective = val_objective;
            log.best_epoch = epoch;
            best = Some(model.clone());
            wait = 0;
        } else {
            wait += 1;
            if wait >= cfg.patience {
                log.stopped_early = true;
                break;
            }
        }
    }
    if let Some(b) = best {
        *model = b;
    }
    Ok(log)
}

/// Builds a main-effects-only model and trains it (stage one of two-stage
/// fitting, and the inner fit of exact-k selection).
pub fn fit_main_effects<T: Scalar>(
    train_ds: &SurvivalDataset<T>,
    val_ds: &SurvivalDataset<T>,
    grid: TimeGrid<T>,
    head: HeadMode,
    cfg: &TrainConfig,
) -> Result<(DySModel<T>, TrainLog)> {
    let mut rng = rng_for(cfg.seed, 0);
    let mut model = DySModel::new(train_ds.feature_names.clone(), grid, head, cfg, &mut rng)?;
    let log = train(&mut model, train_ds, val_ds, cfg)?;
    Ok((model, log))
}

/// Trains main effects and every pairwise interaction jointly. Pairs beyond
/// `cfg.max_interactions` are dropped in lexicographic order.
pub fn fit_one_stage<T: Scalar>(
    train_ds: &SurvivalDataset<T>,
    val_ds: &SurvivalDataset<T>,
    grid: TimeGrid<T>,
    head: HeadMode,
    cfg: &TrainConfig,
) -> Result<(DySModel<T>, TrainLog)> {
    let mut rng = rng_for(cfg.seed, 0);
    let mut model = DySModel::new(train_ds.feature_names.clone(), grid, head, cfg, &mut rng)?;
    let p = model.n_features;
    let mut pairs: Vec<(usize, usize)> = (0..p).flat_map(|j| (j + 1..p).map(move |l| (j, l))).collect();
    if pairs.len() > cfg.max_interactions {
        log::info!(
            "interaction cap: kept the first {} of {} pairs",
            cfg.max_interactions,
            pairs.len()
        );
        pairs.truncate(cfg.max_interactions);
    }
    model.add_interactions(&pairs, cfg, &mut rng)?;
    let log = train(&mut model, train_ds, val_ds, cfg)?;
    Ok((model, log))
}

/// Freezes the fitted main effects, adds interactions between every pair of
/// active features (capped at `cfg.max_interactions`, keeping the pairs with
/// the largest product of global main-effect importances) and trains only
/// the interactions. Returns the stage log, the pairs used and the pair
/// count before capping.
pub fn fit_stage_two<T: Scalar>(
    model: &mut DySModel<T>,
    train_ds: &SurvivalDataset<T>,
    val_ds: &SurvivalDataset<T>,
    cfg: &TrainConfig,
) -> Result<(TrainLog, Vec<(usize, usize)>, usize)> {
    let active = model.active_features();
    if active.is_empty() {
        return Err(DysError::NoActiveFeatures { lambda: cfg.lambda });
    }
    let mut pairs: Vec<(usize, usize)> = active
        .iter()
        .enumerate()
        .flat_map(|(a, &j)| active[a + 1..].iter().map(move |&l| (j, l)))
        .collect();
    let before_cap = pairs.len();
    if pairs.len() > cfg.max_interactions {
        let importance: Vec<(usize, f64)> = model
            .main_effects
            .iter()
            .filter_map(|e| match e.id {
                EffectId::Main(j) => {
                    let per_bin = model.effect_importance(e, train_ds);
                    let mean = per_bin.iter().map(|v| v.as_f64()).sum::<f64>() / per_bin.len() as f64;
                    Some((j, mean))
                }
                EffectId::Pair(..) => None,
            })
            .collect();
        let imp = |j: usize| importance.iter().find(|(f, _)| *f == j).map_or(0.0, |(_, v)| *v);
        pairs.sort_by(|a, b| {
            let pa = imp(a.0) * imp(a.1);
            let pb = imp(b.0) * imp(b.1);
            pb.total_cmp(&pa).then(a.cmp(b))
        });
        pairs.truncate(cfg.max_interactions);
        pairs.sort();
        log::info!(
            "interaction cap: kept {} of {before_cap} candidate pairs by main-effect importance product",
            pairs.len()
        );
    }
    model.frozen_main = true;
    let mut rng = rng_for(cfg.seed, 3);
    model.add_interactions(&pairs, cfg, &mut rng)?;
    let log = train(model, train_ds, val_ds, cfg)?;
    Ok((log, pairs, before_cap))
}

/// Main effects first, then interactions among the active features.
pub fn two_stage_fit<T: Scalar>(
    train_ds: &SurvivalDataset<T>,
    val_ds: &SurvivalDataset<T>,
    grid: TimeGrid<T>,
    head: HeadMode,
    cfg: &TrainConfig,
) -> Result<(DySModel<T>, TwoStageLog)> {
    let (mut model, stage1) = fit_main_effects(train_ds, val_ds, grid, head, cfg)?;
    let (stage2, candidate_pairs, pairs_before_cap) = fit_stage_two(&mut model, train_ds, val_ds, cfg)?;
    Ok((
        model,
        TwoStageLog {
            stage1,
            stage2,
            candidate_pairs,
            pairs_before_cap,
        },
    ))
}
