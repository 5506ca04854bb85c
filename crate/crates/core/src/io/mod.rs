//! On-disk formats: model and schema text files, JSONL datasets and
//! tab-separated reports.

pub mod dataset;
pub mod text;
pub mod tsv;

pub use dataset::{read_dataset, write_dataset, Dataset};
pub use text::{read_model, read_schema, write_model, write_schema, Model, MODEL_VERSION, SCHEMA_VERSION};
pub use tsv::{fmt6, write_log};
