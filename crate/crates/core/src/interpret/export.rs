use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::svg::{heatmap, line_chart};
use super::{ImpactCurve, ImportanceTable};
use crate::error::Result;
use crate::model::DySModel;
use crate::Scalar;

/// Index of everything written by [`export_report`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    /// Paths relative to the report directory, excluding the manifest.
    pub files: Vec<String>,
    pub model_hash: String,
    pub head: String,
    pub grid_times: Vec<f64>,
}

fn num<T: Scalar>(v: T) -> String {
    format!("{:.12e}", v.as_f64())
}

fn sanitize(label: &str) -> String {
    label
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '.' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

fn curve_stem<T: Scalar>(model: &DySModel<T>, c: &ImpactCurve<T>) -> String {
    let idx = model.effects().position(|e| e.id == c.effect).unwrap_or(usize::MAX);
    let when = c.time_index.map_or_else(|| "risk".to_string(), |k| format!("t{k:03}"));
    format!("curves/{idx:03}_{}_{when}", sanitize(&c.label))
}

fn write_file(dir: &Path, rel: &str, bytes: &[u8], files: &mut Vec<String>) -> Result<()> {
    let path = dir.join(rel);
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::File::create(&path)?.write_all(bytes)?;
    files.push(rel.to_string());
    Ok(())
}

/// Writes `importances.csv` (when `table` is given), one CSV per curve,
/// optional SVG charts and `manifest.json` into `dir`. Output depends only
/// on the inputs, so re-exporting an unchanged model is byte-identical.
pub fn export_report<T: Scalar>(
    model: &DySModel<T>,
    table: Option<&ImportanceTable<T>>,
    curves: &[ImpactCurve<T>],
    dir: &Path,
    svg: bool,
) -> Result<Manifest> {
    fs::create_dir_all(dir)?;
    let mut files = Vec::new();

    if let Some(t) = table {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["effect", "time", "importance"])?;
        for (e, label) in t.labels.iter().enumerate() {
            for (time, v) in t.times.iter().zip(&t.per_time[e]) {
                w.write_record([label.as_str(), &num(*time), &num(*v)])?;
            }
            w.write_record([label.as_str(), "global", &num(t.global[e])])?;
        }
        let bytes = w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
        write_file(dir, "importances.csv", &bytes, &mut files)?;
    }

    for c in curves {
        let stem = curve_stem(model, c);
        let mut w = csv::Writer::from_writer(Vec::new());
        match &c.x2 {
            None => {
                w.write_record(["x", "logit"])?;
                for (x, y) in c.x.iter().zip(&c.logit) {
                    w.write_record([num(*x), num(*y)])?;
                }
            }
            Some(x2) => {
                w.write_record(["x", "x2", "logit"])?;
                for (a, x) in c.x.iter().enumerate() {
                    for (b, z) in x2.iter().enumerate() {
                        w.write_record([num(*x), num(*z), num(c.logit[a * x2.len() + b])])?;
                    }
                }
            }
        }
        let bytes = w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
        write_file(dir, &format!("{stem}.csv"), &bytes, &mut files)?;
        if svg {
            let title = match c.time {
                Some(t) => format!("{} at t = {}", c.label, num(t)),
                None => format!("{} (risk)", c.label),
            };
            let x: Vec<f64> = c.x.iter().map(|v| v.as_f64()).collect();
            let y: Vec<f64> = c.logit.iter().map(|v| v.as_f64()).collect();
            let doc = match &c.x2 {
                None => line_chart(&title, &x, &y),
                Some(x2) => heatmap(&title, &x, &x2.iter().map(|v| v.as_f64()).collect::<Vec<_>>(), &y),
            };
            write_file(dir, &format!("{stem}.svg"), doc.as_bytes(), &mut files)?;
        }
    }

    let manifest = Manifest {
        files,
        model_hash: model.content_hash()?,
        head: model.head.name().to_string(),
        grid_times: model.grid.times().iter().map(|v| v.as_f64()).collect(),
    };
    let mut json = serde_json::to_string_pretty(&manifest)?;
    json.push('\n');
    fs::write(dir.join("manifest.json"), json)?;
    Ok(manifest)
}
