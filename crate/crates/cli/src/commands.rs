use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::Context;
use rayon::prelude::*;
use serde::Serialize;

use dys::data::{
    build_time_grid, fit_preprocessor, load_csv, read_features_csv, split_indices, transform, ColumnTransform,
    Preprocessor, RawTable, Schema, SplitSpec,
};
use dys::interpret::{export_report, feature_importance, impact_curve};
use dys::metrics::{evaluate, AucReport};
use dys::model::{fit_one_stage, fit_stage_two, two_stage_fit};
use dys::selection::select_k_features;
use dys::synthgen::{self, SynthSidecar};
use dys::{DySModel, DysError, EffectId, HeadMode, SurvivalDataset, TimeGrid};

use crate::config::{RunConfig, Stages};
use crate::ConfigError;

fn write_json<V: Serialize>(path: &Path, value: &V) -> anyhow::Result<()> {
    let mut json = serde_json::to_string_pretty(value)?;
    json.push('\n');
    std::fs::write(path, json).with_context(|| format!("writing {}", path.display()))
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn load_table(cfg: &RunConfig) -> anyhow::Result<RawTable> {
    let path = cfg.require_data()?;
    load_csv(path, &cfg.schema).with_context(|| format!("reading {}", path.display()))
}

fn load_model(cfg: &RunConfig) -> anyhow::Result<DySModel> {
    let path = cfg.require_model()?;
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    DySModel::from_json(&text).with_context(|| format!("parsing {}", path.display()))
}

fn model_preprocessor(model: &DySModel) -> anyhow::Result<&Preprocessor> {
    model
        .preprocessor
        .as_ref()
        .ok_or_else(|| ConfigError("model carries no preprocessor; it was not trained by this tool".into()).into())
}

struct Splits {
    train: SurvivalDataset,
    val: SurvivalDataset,
    test: SurvivalDataset,
}

fn split_table(table: &RawTable, seed: u64, pre: Option<&Preprocessor>) -> anyhow::Result<(Splits, Preprocessor)> {
    let (tr, va, te) = split_indices(table.n_rows(), &SplitSpec::with_seed(seed))?;
    let train_raw = table.subset(&tr);
    let pre = match pre {
        Some(p) => p.clone(),
        None => fit_preprocessor(&train_raw)?,
    };
    for w in &pre.warnings {
        log::warn!("{w}");
    }
    let splits = Splits {
        train: transform(&pre, &train_raw)?,
        val: transform(&pre, &table.subset(&va))?,
        test: transform(&pre, &table.subset(&te))?,
    };
    Ok((splits, pre))
}

/// Test-split AUC; a split without usable evaluation times is reported
/// rather than treated as fatal.
fn test_auc(model: &DySModel, s: &Splits, dir: &Path) -> anyhow::Result<Option<f64>> {
    match evaluate(model, &s.train, &s.test) {
        Ok(report) => {
            write_auc(&report, dir)?;
            Ok(report.mean_auc)
        }
        Err(DysError::NoValidTimes) => {
            log::warn!("no valid evaluation times on the test split; AUC not reported");
            Ok(None)
        }
        Err(e) => Err(e.into()),
    }
}

fn write_auc(report: &AucReport<f64>, dir: &Path) -> anyhow::Result<()> {
    write_json(&dir.join("auc.json"), report)?;
    let mut w = create(&dir.join("auc.csv"))?;
    writeln!(w, "time,auc")?;
    for (t, a) in report.times.iter().zip(&report.auc) {
        match a {
            Some(a) => writeln!(w, "{t},{a}")?,
            None => writeln!(w, "{t},")?,
        }
    }
    w.flush()?;
    Ok(())
}

fn save_model(model: &DySModel, dir: &Path) -> anyhow::Result<()> {
    let mut json = model.to_json()?;
    json.push('\n');
    std::fs::write(dir.join("model.json"), json)?;
    Ok(())
}

fn fmt_auc(a: Option<f64>) -> String {
    a.map_or_else(|| "n/a".into(), |v| format!("{v:.4}"))
}

pub fn synth(cfg: &RunConfig) -> anyhow::Result<()> {
    let out = synthgen::generate(&cfg.synth)?;
    std::fs::create_dir_all(&cfg.out)?;
    synthgen::write_csv(&out.dataset, create(&cfg.out.join("data.csv"))?)?;
    let sidecar = SynthSidecar {
        config: cfg.synth.clone(),
        beta: out.beta,
        group: out.group,
    };
    write_json(&cfg.out.join("data.sidecar.json"), &sidecar)?;
    cfg.snapshot(&cfg.out)?;
    println!(
        "wrote {} rows x {} features to {}",
        out.dataset.n_samples(),
        out.dataset.n_features(),
        cfg.out.join("data.csv").display()
    );
    Ok(())
}

#[derive(Serialize)]
struct TrialResult {
    seed: u64,
    mean_auc: Option<f64>,
    active_features: usize,
    active_interactions: usize,
}

fn train_once(cfg: &RunConfig, table: &RawTable, dir: &Path) -> anyhow::Result<TrialResult> {
    std::fs::create_dir_all(dir)?;
    cfg.snapshot(dir)?;
    let (s, pre) = split_table(table, cfg.seed, None)?;
    let grid = build_time_grid(&s.train, cfg.n_times)?;
    let mut model = match cfg.stages.unwrap_or(Stages::One) {
        Stages::One => {
            let (m, log) = fit_one_stage(&s.train, &s.val, grid, cfg.mode, &cfg.train)?;
            write_json(&dir.join("train_log.json"), &log)?;
            m
        }
        Stages::Two => {
            let (m, log) = two_stage_fit(&s.train, &s.val, grid, cfg.mode, &cfg.train)?;
            write_json(&dir.join("train_log.json"), &log)?;
            m
        }
    };
    model.preprocessor = Some(pre);
    save_model(&model, dir)?;
    let mean_auc = test_auc(&model, &s, dir)?;
    Ok(TrialResult {
        seed: cfg.seed,
        mean_auc,
        active_features: model.active_features().len(),
        active_interactions: model.active_interactions().len(),
    })
}

#[derive(Serialize)]
struct TrialSummary {
    trials: Vec<TrialResult>,
    mean_auc: Option<f64>,
    /// Sample standard deviation over trials with a reported AUC.
    std_auc: Option<f64>,
}

pub fn train(cfg: &RunConfig) -> anyhow::Result<()> {
    let table = load_table(cfg)?;
    if cfg.trials == 1 {
        let r = train_once(cfg, &table, &cfg.out)?;
        println!(
            "test mean AUC {} ({} active features, {} active interactions); outputs in {}",
            fmt_auc(r.mean_auc),
            r.active_features,
            r.active_interactions,
            cfg.out.display()
        );
        return Ok(());
    }
    let seeds: Vec<u64> = (0..cfg.trials as u64).map(|t| cfg.seed + t).collect();
    let run = |&seed: &u64| {
        let trial = RunConfig {
            seed,
            trials: 1,
            ..cfg.clone()
        }
        .resolve();
        train_once(&trial, &table, &cfg.out.join(format!("trial_{seed}")))
    };
    let trials: Vec<TrialResult> = if cfg.parallel_trials {
        seeds.par_iter().map(run).collect::<anyhow::Result<_>>()?
    } else {
        seeds.iter().map(run).collect::<anyhow::Result<_>>()?
    };
    let aucs: Vec<f64> = trials.iter().filter_map(|t| t.mean_auc).collect();
    let n = aucs.len() as f64;
    let mean_auc = (!aucs.is_empty()).then(|| aucs.iter().sum::<f64>() / n);
    let std_auc = mean_auc
        .filter(|_| aucs.len() > 1)
        .map(|m| (aucs.iter().map(|a| (a - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt());
    cfg.snapshot(&cfg.out)?;
    let summary = TrialSummary {
        trials,
        mean_auc,
        std_auc,
    };
    write_json(&cfg.out.join("trials.json"), &summary)?;
    println!(
        "test mean AUC over {} trials: {} +/- {}",
        cfg.trials,
        fmt_auc(mean_auc),
        fmt_auc(std_auc)
    );
    Ok(())
}

/// Reading schema for new data: categorical columns come from the fitted
/// preprocessor so that cells are typed as they were during training.
fn predict_schema(cfg: &RunConfig, pre: &Preprocessor) -> Schema {
    Schema {
        categorical: pre
            .columns
            .iter()
            .filter_map(|c| match c {
                ColumnTransform::Categorical { name, .. } => Some(name.clone()),
                _ => None,
            })
            .collect(),
        ..cfg.schema.clone()
    }
}

pub fn predict(cfg: &RunConfig) -> anyhow::Result<()> {
    let model = load_model(cfg)?;
    let pre = model_preprocessor(&model)?;
    let path = cfg.require_data()?;
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let table = read_features_csv(file, &predict_schema(cfg, pre))?;
    let ds = transform(pre, &table)?;
    std::fs::create_dir_all(&cfg.out)?;
    cfg.snapshot(&cfg.out)?;
    match model.head {
        HeadMode::Rps => {
            let mut w = create(&cfg.out.join("grid.csv"))?;
            writeln!(w, "index,time")?;
            for (k, t) in model.grid.times().iter().enumerate() {
                writeln!(w, "{},{t}", k + 1)?;
            }
            w.flush()?;
            let mut w = create(&cfg.out.join("survival.csv"))?;
            let header: Vec<String> = (1..=model.grid.len()).map(|k| format!("t_{k}")).collect();
            writeln!(w, "id,{}", header.join(","))?;
            for (i, row) in ds.rows().enumerate() {
                let s: Vec<String> = model.predict_survival(row)?.iter().map(f64::to_string).collect();
                writeln!(w, "{i},{}", s.join(","))?;
            }
            w.flush()?;
        }
        HeadMode::Cox => {
            let mut w = create(&cfg.out.join("risk.csv"))?;
            writeln!(w, "id,risk")?;
            for (i, row) in ds.rows().enumerate() {
                writeln!(w, "{i},{}", model.predict_risk(row)?)?;
            }
            w.flush()?;
        }
    }
    println!("predicted {} rows into {}", ds.n_samples(), cfg.out.display());
    Ok(())
}

/// The split seed defaults to the one the model was trained with so that
/// evaluation sees exactly the held-out rows.
fn split_seed(cfg: &RunConfig, model: &DySModel, seed_given: bool) -> u64 {
    match (&model.train_config, seed_given) {
        (Some(tc), false) => tc.seed,
        _ => cfg.seed,
    }
}

pub fn eval(cfg: RunConfig, seed_given: bool) -> anyhow::Result<()> {
    let model = load_model(&cfg)?;
    let cfg = RunConfig {
        seed: split_seed(&cfg, &model, seed_given),
        ..cfg
    }
    .resolve();
    let table = load_table(&cfg)?;
    let (s, _) = split_table(&table, cfg.seed, Some(model_preprocessor(&model)?))?;
    std::fs::create_dir_all(&cfg.out)?;
    cfg.snapshot(&cfg.out)?;
    let report = evaluate(&model, &s.train, &s.test)?;
    write_auc(&report, &cfg.out)?;
    println!("{}", report.summary);
    Ok(())
}

#[derive(Serialize)]
struct SelectLog<'a> {
    stage1: &'a dys::model::TrainLog,
    stage2: Option<&'a dys::model::TrainLog>,
    pairs: Vec<(usize, usize)>,
}

pub fn select(cfg: &RunConfig) -> anyhow::Result<()> {
    let table = load_table(cfg)?;
    std::fs::create_dir_all(&cfg.out)?;
    cfg.snapshot(&cfg.out)?;
    let (s, pre) = split_table(&table, cfg.seed, None)?;
    let grid: TimeGrid = build_time_grid(&s.train, cfg.n_times)?;
    let (mut model, stage1, report) = select_k_features(&s.train, &s.val, &grid, cfg.mode, &cfg.train, &cfg.selection)?;
    write_json(&cfg.out.join("bisection.json"), &report)?;
    let selected: Vec<String> = model
        .active_features()
        .iter()
        .map(|&j| model.feature_names[j].clone())
        .collect();
    let (stage2, pairs) = match cfg.stages.unwrap_or(Stages::Two) {
        Stages::Two => {
            let stage_cfg = dys::TrainConfig {
                lambda: report.lambda,
                sparsity_enabled: true,
                ..cfg.train.clone()
            };
            let (log, pairs, _) = fit_stage_two(&mut model, &s.train, &s.val, &stage_cfg)?;
            (Some(log), pairs)
        }
        Stages::One => (None, Vec::new()),
    };
    write_json(
        &cfg.out.join("train_log.json"),
        &SelectLog {
            stage1: &stage1,
            stage2: stage2.as_ref(),
            pairs,
        },
    )?;
    model.preprocessor = Some(pre);
    save_model(&model, &cfg.out)?;
    let auc = test_auc(&model, &s, &cfg.out)?;
    println!(
        "selected {} features at lambda {:e} after {} fits: {}; {} active interactions; test mean AUC {}",
        selected.len(),
        report.lambda,
        report.trajectory.len(),
        selected.join(", "),
        model.active_interactions().len(),
        fmt_auc(auc)
    );
    Ok(())
}

/// Up to four grid indices spread evenly from the first to the last time.
fn default_time_indices(k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..4).map(|i| (i * (k - 1) + 1) / 3).collect();
    idx.dedup();
    idx
}

pub fn explain(cfg: RunConfig, seed_given: bool) -> anyhow::Result<()> {
    let model = load_model(&cfg)?;
    let cfg = RunConfig {
        seed: split_seed(&cfg, &model, seed_given),
        ..cfg
    }
    .resolve();
    let table = match (model.head, &cfg.data) {
        (HeadMode::Rps, Some(_)) => {
            let raw = load_table(&cfg)?;
            let (s, _) = split_table(&raw, cfg.seed, Some(model_preprocessor(&model)?))?;
            Some(feature_importance(&model, &s.train)?)
        }
        (HeadMode::Rps, None) => {
            log::warn!("no data given; importances skipped");
            None
        }
        (HeadMode::Cox, _) => None,
    };
    let times: Vec<Option<usize>> = match model.head {
        HeadMode::Cox => vec![None],
        HeadMode::Rps => {
            let k = model.grid.len();
            let idx = cfg.explain.times.clone().unwrap_or_else(|| default_time_indices(k));
            if let Some(&bad) = idx.iter().find(|&&i| i >= k) {
                return Err(ConfigError(format!("time index {bad} out of range for a grid of {k} times")).into());
            }
            idx.into_iter().map(Some).collect()
        }
    };
    let effects: Vec<EffectId> = model
        .effects()
        .filter(|e| cfg.explain.all_effects || e.gate.is_active())
        .map(|e| e.id)
        .collect();
    let mut curves = Vec::with_capacity(effects.len() * times.len());
    for &id in &effects {
        let res = match id {
            EffectId::Main(_) => cfg.explain.main_resolution,
            EffectId::Pair(..) => cfg.explain.pair_resolution,
        };
        for &t in &times {
            curves.push(impact_curve(&model, id, t, Some(res))?);
        }
    }
    cfg.snapshot(&cfg.out)?;
    let manifest = export_report(&model, table.as_ref(), &curves, &cfg.out, cfg.explain.svg)?;
    if let Some(t) = &table {
        for &e in t.ranking().iter().take(10) {
            println!("{:>24}  {:.6}", t.labels[e], t.global[e]);
        }
    }
    println!(
        "wrote {} files for {} effects to {}",
        manifest.files.len() + 1,
        effects.len(),
        cfg.out.display()
    );
    Ok(())
}
