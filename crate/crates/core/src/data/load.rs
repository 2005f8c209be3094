use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{DysError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Continuous,
    Categorical,
}

/// Column roles for CSV ingestion. Columns not listed as categorical or
/// ignored are read as continuous features.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Schema {
    pub time_column: String,
    pub event_column: String,
    pub categorical: Vec<String>,
    pub ignore: Vec<String>,
}

impl Default for Schema {
    fn default() -> Self {
        Schema {
            time_column: "time".into(),
            event_column: "event".into(),
            categorical: Vec::new(),
            ignore: Vec::new(),
        }
    }
}

impl Schema {
    pub fn kind_of(&self, column: &str) -> ColumnKind {
        if self.categorical.iter().any(|c| c == column) {
            ColumnKind::Categorical
        } else {
            ColumnKind::Continuous
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ColumnData {
    Continuous(Vec<Option<f64>>),
    Categorical(Vec<Option<String>>),
}

impl ColumnData {
    pub fn kind(&self) -> ColumnKind {
        match self {
            ColumnData::Continuous(_) => ColumnKind::Continuous,
            ColumnData::Categorical(_) => ColumnKind::Categorical,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            ColumnData::Continuous(v) => v.len(),
            ColumnData::Categorical(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawColumn {
    pub name: String,
    pub data: ColumnData,
}

/// Typed CSV contents before preprocessing. Missing cells are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    pub columns: Vec<RawColumn>,
    pub time: Vec<f64>,
    pub event: Vec<bool>,
}

impl RawTable {
    pub fn n_rows(&self) -> usize {
        self.time.len()
    }

    pub fn column(&self, name: &str) -> Option<&RawColumn> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn subset(&self, rows: &[usize]) -> RawTable {
        let columns = self
            .columns
            .iter()
            .map(|c| RawColumn {
                name: c.name.clone(),
                data: match &c.data {
                    ColumnData::Continuous(v) => ColumnData::Continuous(rows.iter().map(|&i| v[i]).collect()),
                    ColumnData::Categorical(v) => ColumnData::Categorical(rows.iter().map(|&i| v[i].clone()).collect()),
                },
            })
            .collect();
        RawTable {
            columns,
            time: rows.iter().map(|&i| self.time[i]).collect(),
            event: rows.iter().map(|&i| self.event[i]).collect(),
        }
    }
}

pub fn load_csv(path: impl AsRef<Path>, schema: &Schema) -> Result<RawTable> {
    let file = std::fs::File::open(path.as_ref())?;
    read_csv(file, schema)
}

/// Parses CSV with a header row. Unparseable or empty continuous cells
/// become missing; empty categorical cells are missing too.
pub fn read_csv<R: Read>(reader: R, schema: &Schema) -> Result<RawTable> {
    read_impl(reader, schema, true)
}

/// Like [`read_csv`] but the time and event columns are optional and never
/// parsed; the returned table has time 0 and no event on every row.
pub fn read_features_csv<R: Read>(reader: R, schema: &Schema) -> Result<RawTable> {
    read_impl(reader, schema, false)
}

fn read_impl<R: Read>(reader: R, schema: &Schema, outcomes: bool) -> Result<RawTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DysError::Schema(format!("required column '{name}' not found in header")))
    };
    let (time_idx, event_idx) = if outcomes {
        (Some(find(&schema.time_column)?), Some(find(&schema.event_column)?))
    } else {
        (find(&schema.time_column).ok(), find(&schema.event_column).ok())
    };
    for c in &schema.categorical {
        find(c)?;
    }

    let feature_idx: Vec<usize> = (0..headers.len())
        .filter(|&i| Some(i) != time_idx && Some(i) != event_idx && !schema.ignore.contains(&headers[i]))
        .collect();
    let mut columns: Vec<RawColumn> = feature_idx
        .iter()
        .map(|&i| RawColumn {
            name: headers[i].clone(),
            data: match schema.kind_of(&headers[i]) {
                ColumnKind::Continuous => ColumnData::Continuous(Vec::new()),
                ColumnKind::Categorical => ColumnData::Categorical(Vec::new()),
            },
        })
        .collect();
    let mut time = Vec::new();
    let mut event = Vec::new();

    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        for (col, &i) in columns.iter_mut().zip(&feature_idx) {
            let cell = record.get(i).unwrap_or("");
            match &mut col.data {
                ColumnData::Continuous(v) => v.push(cell.parse::<f64>().ok().filter(|x| x.is_finite())),
                ColumnData::Categorical(v) => v.push((!cell.is_empty()).then(|| cell.to_owned())),
            }
        }
        let (Some(time_idx), Some(event_idx)) = (time_idx.filter(|_| outcomes), event_idx) else {
            time.push(0.0);
            event.push(false);
            continue;
        };
        let t_raw = record.get(time_idx).unwrap_or("");
        let t: f64 = t_raw.parse().map_err(|_| DysError::Validation {
            row,
            column: schema.time_column.clone(),
            reason: format!("time '{t_raw}' is not a number"),
        })?;
        if !(t.is_finite() && t >= 0.0) {
            return Err(DysError::Validation {
                row,
                column: schema.time_column.clone(),
                reason: format!("time must be finite and >= 0, got {t}"),
            });
        }
        let e_raw = record.get(event_idx).unwrap_or("");
        let e = match e_raw.parse::<f64>() {
            Ok(0.0) => false,
            Ok(1.0) => true,
            _ => {
                return Err(DysError::Validation {
                    row,
                    column: schema.event_column.clone(),
                    reason: format!("event must be 0 or 1, got '{e_raw}'"),
                })
            }
        };
        time.push(t);
        event.push(e);
    }

    Ok(RawTable { columns, time, event })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> Schema {
        Schema {
            categorical: vec!["color".into()],
            ..Schema::default()
        }
    }

    #[test]
    fn parses_mixed_columns() {
        let csv = "age,color,time,event\n1.5,red,3,1\n2.5,blue,4,0\n,\"red\",5,1\n";
        let t = read_csv(csv.as_bytes(), &schema()).unwrap();
        assert_eq!(t.n_rows(), 3);
        assert_eq!(t.columns.len(), 2);
        assert_eq!(
            t.column("age").unwrap().data,
            ColumnData::Continuous(vec![Some(1.5), Some(2.5), None])
        );
        assert_eq!(
            t.column("color").unwrap().data,
            ColumnData::Categorical(vec![Some("red".into()), Some("blue".into()), Some("red".into())])
        );
        assert_eq!(t.event, vec![true, false, true]);
    }

    #[test]
    fn bad_event_names_row_and_column() {
        let csv = "age,time,event\n1,3,1\n2,4,2\n";
        match read_csv(csv.as_bytes(), &Schema::default()) {
            Err(DysError::Validation { row, column, .. }) => {
                assert_eq!(row, 1);
                assert_eq!(column, "event");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn negative_time_and_missing_columns() {
        assert!(read_csv("a,time,event\n1,-1,1\n".as_bytes(), &Schema::default()).is_err());
        assert!(matches!(
            read_csv("a,event\n1,1\n".as_bytes(), &Schema::default()),
            Err(DysError::Schema(_))
        ));
    }

    #[test]
    fn features_only_reader_skips_outcomes() {
        let a = read_features_csv("a,b\n1,2\n3,4\n".as_bytes(), &Schema::default()).unwrap();
        let b = read_features_csv("a,time,b,event\n1,x,2,7\n3,,4,\n".as_bytes(), &Schema::default()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.time, vec![0.0, 0.0]);
        assert_eq!(a.columns.len(), 2);
    }

    #[test]
    fn ignored_columns_are_skipped() {
        let s = Schema {
            ignore: vec!["id".into()],
            ..Schema::default()
        };
        let t = read_csv("id,a,time,event\n7,1,3,1\n".as_bytes(), &s).unwrap();
        assert_eq!(t.columns.len(), 1);
        assert_eq!(t.columns[0].name, "a");
    }
}
