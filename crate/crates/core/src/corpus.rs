//! The bundled problem files.

use crate::error::Result;
use crate::problem::Problem;
use crate::report::Report;
use crate::runner::{run_checks, RunConfig};

macro_rules! corpus {
    ($($name:literal),* $(,)?) => {
        &[$(($name, include_str!(concat!("../corpus/", $name, ".json")))),*]
    };
}

/// `(name, json)` for every bundled problem, in run order.
pub const CORPUS: &[(&str, &str)] = corpus!(
    "example1_scaling",
    "example1_x1",
    "example1_n2",
    "example2",
    "example3",
    "example4",
    "example4_exact",
    "example5",
    "example6",
    "example7",
);

pub fn names() -> impl Iterator<Item = &'static str> {
    CORPUS.iter().map(|(n, _)| *n)
}

pub fn problem(name: &str) -> Option<Result<Problem>> {
    CORPUS.iter().find(|(n, _)| *n == name).map(|(n, text)| Problem::from_json(text, n))
}

pub fn problems() -> Result<Vec<Problem>> {
    CORPUS.iter().map(|(n, text)| Problem::from_json(text, n)).collect()
}

/// Runs every bundled problem under its own selection and expectations.
pub fn run_all(cfg: &RunConfig) -> Result<Vec<Report>> {
    Ok(problems()?.iter().map(|p| run_checks(p, cfg)).collect())
}

/// The JSON document `corpus --report json` prints: an array of reports.
pub fn to_json(reports: &[Report]) -> String {
    serde_json::to_string_pretty(reports).expect("reports serialize") + "\n"
}
