mod common;

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use dys::data::{build_time_grid, split, SplitSpec};
use dys::interpret::{export_report, feature_importance, impact_curve, ImpactCurve, Manifest};
use dys::model::fit_main_effects;
use dys::{DySModel, HeadMode, TrainConfig};

fn fitted() -> (DySModel, dys::SurvivalDataset) {
    let ds = common::additive(400, 1);
    let (tr, va, _) = split(&ds, &SplitSpec::with_seed(1)).unwrap();
    let grid = build_time_grid(&tr, 5).unwrap();
    let cfg = TrainConfig {
        max_epochs: 3,
        hidden_sizes: vec![6],
        learning_rate: 1e-3,
        ..TrainConfig::default()
    };
    let (mut m, _) = fit_main_effects(&tr, &va, grid, HeadMode::Rps, &cfg).unwrap();
    m.add_interactions(&[(0, 1)], &cfg, &mut ChaCha8Rng::seed_from_u64(2))
        .unwrap();
    (m, tr)
}

fn curves(m: &DySModel) -> Vec<ImpactCurve<f64>> {
    m.effects()
        .flat_map(|e| [0, 4].map(|k| impact_curve(m, e.id, Some(k), Some(9)).unwrap()))
        .collect()
}

fn listing(dir: &Path) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            for f in fs::read_dir(&path).unwrap() {
                let f = f.unwrap().path();
                out.insert(f.strip_prefix(dir).unwrap().to_string_lossy().into_owned());
            }
        } else {
            out.insert(path.strip_prefix(dir).unwrap().to_string_lossy().into_owned());
        }
    }
    out
}

#[test]
fn manifest_lists_every_written_file() {
    let (m, tr) = fitted();
    let table = feature_importance(&m, &tr).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let manifest = export_report(&m, Some(&table), &curves(&m), dir.path(), true).unwrap();
    let mut expected: BTreeSet<String> = manifest.files.iter().cloned().collect();
    expected.insert("manifest.json".into());
    assert_eq!(listing(dir.path()), expected);
    // 5 effects x 2 times, a CSV and an SVG each, plus the importance table
    assert_eq!(manifest.files.len(), 5 * 2 * 2 + 1);
    let on_disk: Manifest =
        serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(on_disk, manifest);
    assert_eq!(manifest.model_hash, m.content_hash().unwrap());
    assert_eq!(manifest.grid_times, m.grid.times());
}

#[test]
fn reexport_is_byte_identical() {
    let (m, tr) = fitted();
    let table = feature_importance(&m, &tr).unwrap();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    export_report(&m, Some(&table), &curves(&m), a.path(), true).unwrap();
    let reloaded = DySModel::from_json(&m.to_json().unwrap()).unwrap();
    export_report(&reloaded, Some(&table), &curves(&reloaded), b.path(), true).unwrap();
    let files = listing(a.path());
    assert_eq!(files, listing(b.path()));
    for f in files {
        assert_eq!(
            fs::read(a.path().join(&f)).unwrap(),
            fs::read(b.path().join(&f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn csv_shapes() {
    let (m, tr) = fitted();
    let table = feature_importance(&m, &tr).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let manifest = export_report(&m, Some(&table), &curves(&m), dir.path(), false).unwrap();
    let imp = fs::read_to_string(dir.path().join("importances.csv")).unwrap();
    assert_eq!(imp.lines().next().unwrap(), "effect,time,importance");
    assert_eq!(imp.lines().count(), 1 + 5 * (5 + 1));
    assert_eq!(imp.lines().filter(|l| l.contains(",global,")).count(), 5);
    for f in manifest.files.iter().filter(|f| f.starts_with("curves/")) {
        let body = fs::read_to_string(dir.path().join(f)).unwrap();
        let (header, rows) = if f.contains("x1_x2") {
            ("x,x2,logit", 81)
        } else {
            ("x,logit", 9)
        };
        assert_eq!(body.lines().next().unwrap(), header, "{f}");
        assert_eq!(body.lines().count(), rows + 1, "{f}");
    }
}
