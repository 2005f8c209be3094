use serde::{Deserialize, Serialize};

use super::load::{ColumnData, RawTable};
use super::SurvivalDataset;
use crate::error::{DysError, Result};

pub const PREPROCESSOR_VERSION: u32 = 1;
pub const UNKNOWN_CATEGORY: &str = "Unknown";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ColumnTransform {
    /// `(x - mean) / std` with population standard deviation; missing maps to 0.
    Continuous {
        name: String,
        mean: f64,
        std: f64,
    },
    /// One-hot over `categories`, whose last entry is the `Unknown` bucket
    /// receiving missing and unseen values.
    Categorical {
        name: String,
        categories: Vec<String>,
    },
    Dropped {
        name: String,
        reason: String,
    },
}

impl ColumnTransform {
    pub fn name(&self) -> &str {
        match self {
            ColumnTransform::Continuous { name, .. }
            | ColumnTransform::Categorical { name, .. }
            | ColumnTransform::Dropped { name, .. } => name,
        }
    }

    fn width(&self) -> usize {
        match self {
            ColumnTransform::Continuous { .. } => 1,
            ColumnTransform::Categorical { categories, .. } => categories.len(),
            ColumnTransform::Dropped { .. } => 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preprocessor {
    pub version: u32,
    pub columns: Vec<ColumnTransform>,
    pub feature_names: Vec<String>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl Preprocessor {
    pub fn n_outputs(&self) -> usize {
        self.columns.iter().map(ColumnTransform::width).sum()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let p: Preprocessor = serde_json::from_str(s)?;
        if p.version != PREPROCESSOR_VERSION {
            return Err(DysError::Schema(format!(
                "unsupported preprocessor version {} (expected {PREPROCESSOR_VERSION})",
                p.version
            )));
        }
        Ok(p)
    }
}

pub fn fit_preprocessor(table: &RawTable) -> Result<Preprocessor> {
    if table.n_rows() == 0 {
        return Err(DysError::InsufficientData(
            "cannot fit preprocessing on an empty table".into(),
        ));
    }
    let mut columns = Vec::with_capacity(table.columns.len());
    let mut warnings = Vec::new();
    for col in &table.columns {
        let name = col.name.clone();
        let t = match &col.data {
            ColumnData::Continuous(cells) => {
                let present: Vec<f64> = cells.iter().flatten().copied().collect();
                if present.is_empty() {
                    ColumnTransform::Dropped {
                        name,
                        reason: "all values missing".into(),
                    }
                } else {
                    let n = present.len() as f64;
                    let mean = present.iter().sum::<f64>() / n;
                    let var = present.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
                    let std = var.sqrt();
                    if std > 0.0 && std.is_finite() {
                        ColumnTransform::Continuous { name, mean, std }
                    } else {
                        ColumnTransform::Dropped {
                            name,
                            reason: "zero variance".into(),
                        }
                    }
                }
            }
            ColumnData::Categorical(cells) => {
                let mut categories: Vec<String> = cells.iter().flatten().cloned().collect();
                categories.sort();
                categories.dedup();
                categories.retain(|c| c != UNKNOWN_CATEGORY);
                categories.push(UNKNOWN_CATEGORY.into());
                ColumnTransform::Categorical { name, categories }
            }
        };
        if let ColumnTransform::Dropped { name, reason } = &t {
            let msg = format!("dropped column '{name}': {reason}");
            log::warn!("{msg}");
            warnings.push(msg);
        }
        columns.push(t);
    }
    let feature_names = columns
        .iter()
        .flat_map(|c| match c {
            ColumnTransform::Continuous { name, .. } => vec![name.clone()],
            ColumnTransform::Categorical { name, categories } => {
                categories.iter().map(|cat| format!("{name}={cat}")).collect()
            }
            ColumnTransform::Dropped { .. } => vec![],
        })
        .collect();
    Ok(Preprocessor {
        version: PREPROCESSOR_VERSION,
        columns,
        feature_names,
        warnings,
    })
}

pub fn transform(pre: &Preprocessor, table: &RawTable) -> Result<SurvivalDataset<f64>> {
    let n = table.n_rows();
    let p = pre.n_outputs();
    let mut x = vec![0.0; n * p];
    let mut offset = 0;
    for t in &pre.columns {
        if let ColumnTransform::Dropped { .. } = t {
            continue;
        }
        let col = table
            .column(t.name())
            .ok_or_else(|| DysError::Schema(format!("column '{}' missing from table", t.name())))?;
        match (t, &col.data) {
            (ColumnTransform::Continuous { mean, std, .. }, ColumnData::Continuous(cells)) => {
                for (i, cell) in cells.iter().enumerate() {
                    x[i * p + offset] = cell.map_or(0.0, |v| (v - mean) / std);
                }
            }
            (ColumnTransform::Categorical { categories, .. }, ColumnData::Categorical(cells)) => {
                let unknown = categories.len() - 1;
                for (i, cell) in cells.iter().enumerate() {
                    let k = cell
                        .as_deref()
                        .and_then(|c| categories[..unknown].iter().position(|cat| cat == c))
                        .unwrap_or(unknown);
                    x[i * p + offset + k] = 1.0;
                }
            }
            _ => {
                return Err(DysError::Schema(format!(
                    "column '{}' has kind {:?}, preprocessor expects otherwise",
                    t.name(),
                    col.data.kind()
                )))
            }
        }
        offset += t.width();
    }
    SurvivalDataset::new(x, p, table.time.clone(), table.event.clone(), pre.feature_names.clone())
}
