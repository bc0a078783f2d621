//! Bundled example data.

use crate::io::{read_csv, CsvSchema};
use crate::model::Dataset;

/// International phone calls from Belgium, 1950–1973, in tens of millions.
/// Columns `year` (two-digit, 50..73) and `calls`. The 1964–1969 values
/// (and partly 1963 and 1970) were recorded in minutes instead of calls.
pub const BELGIUM_PHONE_CALLS_CSV: &str = include_str!("../data/belgium_phone_calls.csv");

/// SHA-256 of [`BELGIUM_PHONE_CALLS_CSV`].
pub const BELGIUM_PHONE_CALLS_SHA256: &str =
    "d0387ad4470c1270c783d639b2c3786f49df152bd1112d4b99d167ced623d6e5";

pub fn belgium_schema() -> CsvSchema {
    CsvSchema::new("calls", &["year"], true)
}

/// `calls ~ 1 + year`, N = 24.
pub fn belgium_phone_calls() -> Dataset {
    read_csv(BELGIUM_PHONE_CALLS_CSV.as_bytes(), &belgium_schema()).expect("bundled data parses")
}
