//! Check records and the report emitted by the runner.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Serialize, Serializer};

use crate::expr::{Expr, NamedVerdict, ZeroVerdict};

pub(crate) fn ser_expr<S: Serializer>(e: &Expr, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&e.to_string())
}

pub(crate) fn ser_opt_expr<S: Serializer>(e: &Option<Expr>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match e {
        Some(e) => s.serialize_some(&e.to_string()),
        None => s.serialize_none(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    ProvenZero,
    NumericallyZero,
    NonZero,
    Skipped,
    Error,
}

impl Verdict {
    pub fn label(self) -> &'static str {
        match self {
            Verdict::ProvenZero => "ProvenZero",
            Verdict::NumericallyZero => "NumericallyZero",
            Verdict::NonZero => "NonZero",
            Verdict::Skipped => "Skipped",
            Verdict::Error => "Error",
        }
    }

    pub fn passed(self) -> bool {
        matches!(self, Verdict::ProvenZero | Verdict::NumericallyZero)
    }
}

/// What a problem file declares about a check's outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Expectation {
    Pass,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRecord {
    pub name: String,
    pub eq: String,
    pub verdict: Verdict,
    pub max_residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<BTreeMap<String, f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expected: Option<Expectation>,
}

impl CheckRecord {
    pub fn new(name: &str, eq: &str, verdict: Verdict) -> Self {
        CheckRecord {
            name: name.into(),
            eq: eq.into(),
            verdict,
            max_residual: None,
            witness: None,
            note: None,
            expected: None,
        }
    }

    /// Folds the verdicts of several identities into one record. The note
    /// names the worst failing identity, if any.
    pub fn from_verdicts(name: &str, eq: &str, verdicts: &[NamedVerdict]) -> Self {
        let combined = ZeroVerdict::combine(verdicts.iter().map(|v| &v.verdict));
        let mut rec = Self::from_zero(name, eq, &combined);
        if !combined.holds() {
            rec.note = verdicts.iter().find(|v| v.verdict == combined).map(|v| format!("fails: {}", v.label));
        }
        rec
    }

    pub fn from_zero(name: &str, eq: &str, v: &ZeroVerdict) -> Self {
        let (verdict, witness) = match v {
            ZeroVerdict::ProvenZero => (Verdict::ProvenZero, None),
            ZeroVerdict::NumericallyZero { .. } => (Verdict::NumericallyZero, None),
            ZeroVerdict::NonZero { witness, .. } => (Verdict::NonZero, Some(witness.clone())),
        };
        CheckRecord { max_residual: Some(v.max_residual()), witness, ..Self::new(name, eq, verdict) }
    }

    /// A numeric (trajectory based) check: passes when `residual <= tol`.
    pub fn from_numeric(name: &str, eq: &str, residual: f64, tol: f64, witness: Option<BTreeMap<String, f64>>) -> Self {
        let pass = residual <= tol;
        CheckRecord {
            max_residual: Some(residual),
            witness: if pass { None } else { witness },
            ..Self::new(name, eq, if pass { Verdict::NumericallyZero } else { Verdict::NonZero })
        }
    }

    pub fn skipped(name: &str, eq: &str, reason: impl Into<String>) -> Self {
        CheckRecord { note: Some(reason.into()), ..Self::new(name, eq, Verdict::Skipped) }
    }

    pub fn error(name: &str, eq: &str, message: impl Into<String>) -> Self {
        CheckRecord { note: Some(message.into()), ..Self::new(name, eq, Verdict::Error) }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    /// Whether the outcome matches what the problem file expects (a pass
    /// unless stated otherwise). Skipped records are never unexpected.
    pub fn as_expected(&self) -> bool {
        match (self.verdict, self.expected.unwrap_or(Expectation::Pass)) {
            (Verdict::Skipped, _) => true,
            (Verdict::Error, _) => false,
            (v, Expectation::Pass) => v.passed(),
            (v, Expectation::Fail) => v == Verdict::NonZero,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Status {
    Pass,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub problem: String,
    pub seed: u64,
    pub checks: Vec<CheckRecord>,
    pub status: Status,
}

impl Report {
    pub fn new(problem: impl Into<String>, seed: u64, checks: Vec<CheckRecord>) -> Self {
        let status = if checks.iter().all(CheckRecord::as_expected) { Status::Pass } else { Status::Fail };
        Report { problem: problem.into(), seed, checks, status }
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }

    pub fn get(&self, name: &str) -> Option<&CheckRecord> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// One line per check: `NAME [EQ] VERDICT max_residual`, followed by a
    /// status line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let res = c.max_residual.map_or_else(|| "-".to_string(), |r| format!("{r:.3e}"));
            let _ = write!(out, "{} [{}] {} {}", c.name, c.eq, c.verdict.label(), res);
            if c.expected == Some(Expectation::Fail) {
                out.push_str(" (expected NonZero)");
            }
            if let Some(note) = &c.note {
                let _ = write!(out, " # {note}");
            }
            out.push('\n');
        }
        let _ = writeln!(out, "{}: {:?}", self.problem, self.status);
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }
}
