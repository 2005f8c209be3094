use serde::{Deserialize, Serialize};

use crate::data::SurvivalDataset;
use crate::error::{DysError, Result};
use crate::model::{DySModel, EffectId, HeadMode};
use crate::Scalar;

/// Mean absolute gated logit of every effect at every grid time, plus the
/// uniform average over times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ImportanceTable<T> {
    pub effects: Vec<EffectId>,
    pub labels: Vec<String>,
    pub times: Vec<T>,
    /// `per_time[e][k]` for effect `e` at grid time `k`.
    pub per_time: Vec<Vec<T>>,
    pub global: Vec<T>,
}

impl<T: Scalar> ImportanceTable<T> {
    pub fn get(&self, id: EffectId) -> Option<(&[T], T)> {
        let e = self.effects.iter().position(|&x| x == id)?;
        Some((&self.per_time[e], self.global[e]))
    }

    /// Effect indices sorted by descending global importance (ties by order).
    pub fn ranking(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.effects.len()).collect();
        idx.sort_by(|&a, &b| {
            self.global[b]
                .partial_cmp(&self.global[a])
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        idx
    }
}

pub fn feature_importance<T: Scalar>(model: &DySModel<T>, train: &SurvivalDataset<T>) -> Result<ImportanceTable<T>> {
    if model.head != HeadMode::Rps {
        return Err(DysError::HeadMode {
            expected: "rps",
            actual: model.head.name(),
        });
    }
    if train.n_features() != model.n_features {
        return Err(DysError::shape(
            "dataset features",
            model.n_features,
            train.n_features(),
        ));
    }
    let k = model.grid.len();
    let mut table = ImportanceTable {
        effects: Vec::new(),
        labels: Vec::new(),
        times: model.grid.times().to_vec(),
        per_time: Vec::new(),
        global: Vec::new(),
    };
    for e in model.effects() {
        let mut imp = model.effect_importance(e, train);
        imp.truncate(k);
        let global = imp.iter().copied().sum::<T>() / T::of(k as f64);
        table.effects.push(e.id);
        table.labels.push(e.id.label(&model.feature_names));
        table.per_time.push(imp);
        table.global.push(global);
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::data::TimeGrid;
    use crate::model::{Gate, TrainConfig};
    use crate::numeric::{Dense, Mlp};

    fn model(p: usize) -> DySModel<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let cfg = TrainConfig {
            hidden_sizes: vec![3],
            ..TrainConfig::default()
        };
        let names = (1..=p).map(|j| format!("x{j}")).collect();
        DySModel::new(
            names,
            TimeGrid::new(vec![1.0, 2.0]).unwrap(),
            HeadMode::Rps,
            &cfg,
            &mut rng,
        )
        .unwrap()
    }

    /// One-layer net whose output is `w * x + b` in every bin.
    fn affine(w: f64, b: f64) -> Mlp<f64> {
        Mlp::from_layers(vec![Dense::new(vec![vec![w], vec![w]], vec![b, b]).unwrap()]).unwrap()
    }

    #[test]
    fn pruned_effect_scores_zero() {
        let mut m = model(2);
        m.main_effects[0].gate = Gate::closed(1.0);
        let ds =
            SurvivalDataset::from_rows(&[vec![1.0, 2.0], vec![-1.0, 0.5]], vec![1.0, 2.0], vec![true, true]).unwrap();
        let t = feature_importance(&m, &ds).unwrap();
        assert_eq!(t.per_time[0], vec![0.0, 0.0]);
        assert_eq!(t.global[0], 0.0);
        assert!(t.global[1] > 0.0);
    }

    #[test]
    fn constant_output_gives_its_magnitude() {
        let mut m = model(1);
        m.main_effects[0].net = affine(0.0, -0.75);
        let ds = SurvivalDataset::from_rows(&[vec![3.0], vec![-2.0], vec![0.1]], vec![1.0; 3], vec![true; 3]).unwrap();
        let t = feature_importance(&m, &ds).unwrap();
        assert_eq!(t.per_time[0], vec![0.75, 0.75]);
        assert_eq!(t.global[0], 0.75);
    }

    #[test]
    fn absolute_values_are_averaged() {
        let mut m = model(1);
        m.main_effects[0].net = affine(1.0, 0.0);
        let ds = SurvivalDataset::from_rows(&[vec![1.0], vec![-1.0]], vec![1.0; 2], vec![true; 2]).unwrap();
        let t = feature_importance(&m, &ds).unwrap();
        assert_eq!(t.per_time[0], vec![1.0, 1.0]);
    }

    #[test]
    fn invariant_to_sample_order() {
        let m = model(2);
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64 * 0.1, (i as f64).sin()]).collect();
        let ds = SurvivalDataset::from_rows(&rows, vec![1.0; 20], vec![true; 20]).unwrap();
        let rev: Vec<usize> = (0..20).rev().collect();
        let a = feature_importance(&m, &ds).unwrap();
        let b = feature_importance(&m, &ds.subset(&rev)).unwrap();
        for (x, y) in a.global.iter().zip(&b.global) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn cox_model_is_rejected() {
        let mut m = model(1);
        m.head = HeadMode::Cox;
        let ds = SurvivalDataset::from_rows(&[vec![1.0]], vec![1.0], vec![true]).unwrap();
        assert!(matches!(feature_importance(&m, &ds), Err(DysError::HeadMode { .. })));
    }
}
