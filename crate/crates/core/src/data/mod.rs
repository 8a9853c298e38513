//! Tabular data: schema sidecar, CSV ingestion with one-hot encoding,
//! stratified splitting and the macro-F1 metric.

mod dataset;
mod metrics;
mod schema;
mod split;

pub use dataset::{load_dataset, Dataset};
pub use metrics::{confusion_matrix, macro_f1};
pub use schema::{Column, ColumnKind, FeatureSchema};
pub use split::{split_train_validation, stratified_kfold, FoldPlan};
