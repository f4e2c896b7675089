//! Two-tier identity testing: symbolic normalization, then seeded sampling.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{simplify, Compiled, EvalError, Expr};
use crate::error::{Error, Result};

/// Interval used for variables the box does not list explicitly.
pub const DEFAULT_INTERVAL: (f64, f64) = (0.2, 1.2);

/// Closed sampling intervals per variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainBox {
    intervals: BTreeMap<String, (f64, f64)>,
    fallback: Option<(f64, f64)>,
}

impl Default for DomainBox {
    fn default() -> Self {
        DomainBox { intervals: BTreeMap::new(), fallback: Some(DEFAULT_INTERVAL) }
    }
}

impl DomainBox {
    /// A box without fallback: every variable must be listed.
    pub fn strict() -> Self {
        DomainBox { intervals: BTreeMap::new(), fallback: None }
    }

    pub fn set(&mut self, var: &str, lo: f64, hi: f64) -> Result<()> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidInterval { var: var.into(), lo, hi });
        }
        self.intervals.insert(var.into(), (lo, hi));
        Ok(())
    }

    pub fn with(mut self, var: &str, lo: f64, hi: f64) -> Result<Self> {
        self.set(var, lo, hi)?;
        Ok(self)
    }

    pub fn interval(&self, var: &str) -> Result<(f64, f64)> {
        self.intervals
            .get(var)
            .copied()
            .or(self.fallback)
            .ok_or_else(|| Error::MissingInterval(var.into()))
    }

    pub fn intervals(&self) -> &BTreeMap<String, (f64, f64)> {
        &self.intervals
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZeroTestConfig {
    pub samples: usize,
    pub seed: u64,
    pub abs_tol: f64,
}

impl Default for ZeroTestConfig {
    fn default() -> Self {
        ZeroTestConfig { samples: 100, seed: 0, abs_tol: 1e-9 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ZeroVerdict {
    ProvenZero,
    NumericallyZero { samples: usize, max_residual: f64 },
    NonZero { witness: BTreeMap<String, f64>, residual: f64 },
}

impl ZeroVerdict {
    pub fn holds(&self) -> bool {
        !matches!(self, ZeroVerdict::NonZero { .. })
    }

    pub fn max_residual(&self) -> f64 {
        match self {
            ZeroVerdict::ProvenZero => 0.0,
            ZeroVerdict::NumericallyZero { max_residual, .. } => *max_residual,
            ZeroVerdict::NonZero { residual, .. } => *residual,
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            ZeroVerdict::ProvenZero => "ProvenZero",
            ZeroVerdict::NumericallyZero { .. } => "NumericallyZero",
            ZeroVerdict::NonZero { .. } => "NonZero",
        }
    }

    /// Folds several verdicts into one: the worst failure if any, otherwise
    /// the weakest success.
    pub fn combine<'a>(verdicts: impl IntoIterator<Item = &'a ZeroVerdict>) -> ZeroVerdict {
        let mut worst_fail: Option<&ZeroVerdict> = None;
        let mut numeric: Option<(usize, f64)> = None;
        for v in verdicts {
            match v {
                ZeroVerdict::ProvenZero => {}
                ZeroVerdict::NumericallyZero { samples, max_residual } => {
                    let (s, m) = numeric.unwrap_or((0, 0.0));
                    numeric = Some((s.max(*samples), m.max(*max_residual)));
                }
                ZeroVerdict::NonZero { residual, .. } => {
                    if worst_fail.is_none_or(|w| w.max_residual() < *residual) {
                        worst_fail = Some(v);
                    }
                }
            }
        }
        match (worst_fail, numeric) {
            (Some(v), _) => v.clone(),
            (None, Some((samples, max_residual))) => {
                ZeroVerdict::NumericallyZero { samples, max_residual }
            }
            (None, None) => ZeroVerdict::ProvenZero,
        }
    }
}

/// A verdict with the label of the identity it belongs to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedVerdict {
    pub label: String,
    pub verdict: ZeroVerdict,
}

impl NamedVerdict {
    pub fn holds(&self) -> bool {
        self.verdict.holds()
    }
}

pub fn all_hold(verdicts: &[NamedVerdict]) -> bool {
    verdicts.iter().all(NamedVerdict::holds)
}

/// Decides whether `e` vanishes identically on `domain`.
pub fn is_identically_zero(e: &Expr, domain: &DomainBox, cfg: &ZeroTestConfig) -> Result<ZeroVerdict> {
    if simplify(e).is_zero() {
        return Ok(ZeroVerdict::ProvenZero);
    }
    let vars: Vec<String> = e.free_vars().into_iter().collect();
    let intervals = vars.iter().map(|v| domain.interval(v)).collect::<Result<Vec<_>>>()?;
    let whole = Compiled::new(e, &vars)?;
    let terms = e
        .additive_terms()
        .iter()
        .map(|t| Compiled::new(t, &vars))
        .collect::<std::result::Result<Vec<_>, EvalError>>()?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut point = vec![0.0; vars.len()];
    let mut failures = 0usize;
    let mut first_failure: Option<String> = None;
    let mut evaluated = 0usize;
    let mut worst: Option<(f64, Vec<f64>)> = None;
    for _ in 0..cfg.samples {
        for (x, (lo, hi)) in point.iter_mut().zip(&intervals) {
            *x = lo + (hi - lo) * rng.random::<f64>();
        }
        let value = match whole.eval(&point) {
            Ok(v) => v,
            Err(EvalError::Domain { subexpr, .. }) => {
                failures += 1;
                first_failure.get_or_insert(subexpr);
                continue;
            }
            Err(other) => return Err(other.into()),
        };
        evaluated += 1;
        let r = scaled_residual(value, &terms, &point);
        if worst.as_ref().is_none_or(|(w, _)| r > *w) {
            worst = Some((r, point.clone()));
        }
    }
    if evaluated == 0 || failures * 10 > cfg.samples * 9 {
        return Err(Error::SamplingExhausted {
            subexpr: first_failure.unwrap_or_else(|| e.to_string()),
            failures,
            samples: cfg.samples,
        });
    }
    let (max_residual, at) = worst.expect("at least one evaluated sample");
    if max_residual > cfg.abs_tol {
        let witness = vars.iter().cloned().zip(at).collect();
        Ok(ZeroVerdict::NonZero { witness, residual: max_residual })
    } else {
        Ok(ZeroVerdict::NumericallyZero { samples: evaluated, max_residual })
    }
}

fn scaled_residual(value: f64, terms: &[Compiled], point: &[f64]) -> f64 {
    let scale = terms
        .iter()
        .filter_map(|t| t.eval(point).ok())
        .fold(0.0f64, |m, v| m.max(v.abs()));
    value.abs() / (1.0 + scale)
}

/// Recomputes the scaled residual of `e` at a witness point.
pub fn residual_at(e: &Expr, point: &BTreeMap<String, f64>) -> Result<f64> {
    let vars: Vec<&String> = point.keys().collect();
    let values: Vec<f64> = point.values().copied().collect();
    let value = Compiled::new(e, &vars)?.eval(&values)?;
    let terms = e
        .additive_terms()
        .iter()
        .map(|t| Compiled::new(t, &vars))
        .collect::<std::result::Result<Vec<_>, EvalError>>()?;
    Ok(scaled_residual(value, &terms, &values))
}

/// A domain box paired with sampling settings; every check in the engine
/// goes through one of these.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Verifier {
    pub domain: DomainBox,
    pub config: ZeroTestConfig,
}

impl Verifier {
    pub fn new(domain: DomainBox, config: ZeroTestConfig) -> Self {
        Verifier { domain, config }
    }

    pub fn zero(&self, e: &Expr) -> Result<ZeroVerdict> {
        is_identically_zero(e, &self.domain, &self.config)
    }

    pub fn named(&self, label: impl Into<String>, e: &Expr) -> Result<NamedVerdict> {
        Ok(NamedVerdict { label: label.into(), verdict: self.zero(e)? })
    }

    /// Verdict on `lhs - rhs`.
    pub fn equal(&self, label: impl Into<String>, lhs: &Expr, rhs: &Expr) -> Result<NamedVerdict> {
        self.named(label, &(lhs.clone() - rhs.clone()))
    }
}
