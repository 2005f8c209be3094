use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::SurvivalDataset;
use crate::error::{DysError, Result};
use crate::Scalar;

/// Train/validation/test partition fractions (of the whole dataset).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub seed: u64,
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec::with_seed(0)
    }
}

impl SplitSpec {
    /// 80/20 train/test with 20% of train held out for validation.
    pub fn with_seed(seed: u64) -> Self {
        SplitSpec {
            seed,
            train: 0.64,
            validation: 0.16,
            test: 0.20,
        }
    }
}

/// Seeded shuffle of `0..n` partitioned into (train, validation, test).
pub fn split_indices(n: usize, spec: &SplitSpec) -> Result<(Vec<usize>, Vec<usize>, Vec<usize>)> {
    let fr = [spec.train, spec.validation, spec.test];
    if fr.iter().any(|f| !(0.0..=1.0).contains(f)) || (fr.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(DysError::param(
            "split fractions",
            format!("must be in [0,1] and sum to 1, got {fr:?}"),
        ));
    }
    if n < 10 {
        return Err(DysError::InsufficientData(format!(
            "need at least 10 samples to split, got {n}"
        )));
    }
    let n_test = (spec.test * n as f64).round() as usize;
    let n_val = (spec.validation * n as f64).round() as usize;
    let n_train = n.saturating_sub(n_test + n_val);
    if n_train == 0 || n_val == 0 || n_test == 0 {
        return Err(DysError::InsufficientData(format!(
            "split of {n} samples leaves an empty partition ({n_train}/{n_val}/{n_test})"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
    let test = idx.split_off(n_train + n_val);
    let val = idx.split_off(n_train);
    Ok((idx, val, test))
}

pub fn split<T: Scalar>(
    ds: &SurvivalDataset<T>,
    spec: &SplitSpec,
) -> Result<(SurvivalDataset<T>, SurvivalDataset<T>, SurvivalDataset<T>)> {
    let (tr, va, te) = split_indices(ds.n_samples(), spec)?;
    Ok((ds.subset(&tr), ds.subset(&va), ds.subset(&te)))
}
