//! Tabular survival data: CSV ingestion, preprocessing, splitting and the
//! discrete evaluation-time grid.

mod dataset;
mod grid;
mod load;
mod preprocess;
mod split;

pub use dataset::SurvivalDataset;
pub use grid::{build_time_grid, TimeGrid};
pub use load::{load_csv, read_csv, read_features_csv, ColumnData, ColumnKind, RawColumn, RawTable, Schema};
pub use preprocess::{fit_preprocessor, transform, ColumnTransform, Preprocessor, PREPROCESSOR_VERSION};
pub use split::{split, split_indices, SplitSpec};
