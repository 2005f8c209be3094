//! Two-group synthetic survival data that violates proportional hazards.
//!
//! A latent linear score `Y = X beta + eps` is pushed through a normal CDF
//! fitted to its own empirical moments, giving `Y*` roughly uniform on
//! `(0, 1)`. Samples below the median of `Y*` (group 1) get event times in
//! the middle window `[2T/8, 6T/8]`; the rest (group 2) get times in
//! `[0, 2T/8]`, shifted by `6T/8` with probability 1/2, so they sit at the
//! early or late extremes.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::SurvivalDataset;
use crate::error::{DysError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n: usize,
    pub p: usize,
    pub t_max: f64,
    pub seed: u64,
    pub censor_fraction: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n: 5000,
            p: 10,
            t_max: 8.0,
            seed: 0,
            censor_fraction: 0.0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(DysError::param("n", format!("need n >= 2, got {}", self.n)));
        }
        if self.p < 1 {
            return Err(DysError::param("p", "need at least one feature"));
        }
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return Err(DysError::param(
                "t_max",
                format!("must be finite and > 0, got {}", self.t_max),
            ));
        }
        if !(0.0..1.0).contains(&self.censor_fraction) {
            return Err(DysError::param(
                "censor_fraction",
                format!("must lie in [0, 1), got {}", self.censor_fraction),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthOutput {
    pub dataset: SurvivalDataset<f64>,
    pub beta: Vec<f64>,
    /// Latent linear score `X beta + eps` per sample.
    pub score: Vec<f64>,
    /// 1 for the middle-window group, 2 for the extreme-window group.
    pub group: Vec<u8>,
}

/// Standard normal CDF.
fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

fn min_max_scale(values: &[f64], lo: f64, hi: f64) -> Vec<f64> {
    let (min, max) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let span = max - min;
    values
        .iter()
        .map(|&v| {
            if span > 0.0 {
                lo + (v - min) / span * (hi - lo)
            } else {
                lo
            }
        })
        .collect()
}

pub fn generate(cfg: &SynthConfig) -> Result<SynthOutput> {
    cfg.validate()?;
    let (n, p, t_max) = (cfg.n, cfg.p, cfg.t_max);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let x: Vec<f64> = (0..n * p).map(|_| rng.sample(StandardNormal)).collect();
    let beta: Vec<f64> = (0..p).map(|_| rng.sample(StandardNormal)).collect();
    let y: Vec<f64> = (0..n)
        .map(|i| {
            let eps: f64 = rng.sample(StandardNormal);
            x[i * p..(i + 1) * p].iter().zip(&beta).map(|(a, b)| a * b).sum::<f64>() + eps
        })
        .collect();

    let mean = y.iter().sum::<f64>() / n as f64;
    let sd = (y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
    let y_star: Vec<f64> = y.iter().map(|v| normal_cdf((v - mean) / sd)).collect();

    let mut sorted = y_star.clone();
    sorted.sort_by(f64::total_cmp);
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    };
    // ties at the median go to group 1
    let group: Vec<u8> = y_star.iter().map(|&v| if v <= median { 1 } else { 2 }).collect();

    let idx1: Vec<usize> = (0..n).filter(|&i| group[i] == 1).collect();
    let idx2: Vec<usize> = (0..n).filter(|&i| group[i] == 2).collect();
    let eighth = t_max / 8.0;
    let mut time = vec![0.0; n];
    let g1 = min_max_scale(
        &idx1.iter().map(|&i| y_star[i]).collect::<Vec<_>>(),
        2.0 * eighth,
        6.0 * eighth,
    );
    for (&i, t) in idx1.iter().zip(g1) {
        time[i] = t;
    }
    let g2 = min_max_scale(&idx2.iter().map(|&i| y_star[i]).collect::<Vec<_>>(), 0.0, 2.0 * eighth);
    for (&i, t) in idx2.iter().zip(g2) {
        let late = rng.random_bool(0.5);
        time[i] = if late { t + 6.0 * eighth } else { t };
    }

    let mut event = vec![true; n];
    let n_censor = (cfg.censor_fraction * n as f64).round() as usize;
    if n_censor > 0 {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        for &i in &order[..n_censor] {
            event[i] = false;
            time[i] = rng.random_range(0.0..=time[i]);
        }
    }

    let names = (1..=p).map(|j| format!("x{j}")).collect();
    let dataset = SurvivalDataset::new(x, p, time, event, names)?;
    Ok(SynthOutput {
        dataset,
        beta,
        score: y,
        group,
    })
}

/// Writes `x1..xp,time,event` rows using shortest round-trip float formatting.
pub fn write_csv<W: Write>(ds: &SurvivalDataset<f64>, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = ds.feature_names.clone();
    header.push("time".into());
    header.push("event".into());
    w.write_record(&header)?;
    for i in 0..ds.n_samples() {
        let mut rec: Vec<String> = ds.row(i).iter().map(|v| v.to_string()).collect();
        rec.push(ds.time[i].to_string());
        rec.push(if ds.event[i] { "1" } else { "0" }.into());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSidecar {
    pub config: SynthConfig,
    pub beta: Vec<f64>,
    pub group: Vec<u8>,
}
