//! Problem files: JSON descriptions of a system, a vector field, Λ and the
//! candidate quantities to verify.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::expr::{decimal_to_rational, parse, DomainBox, Expr};
use crate::lambda::{LambdaMatrix, LambdaSide, ReductionChart};
use crate::lagrangian::LagrangianSystem;
use crate::mechanics::{dq_name, p_name, q_name, PhaseSystem, TIME};
use crate::numeric::{integrate_euler_lagrange, integrate_hamiltonian, StepConfig, Trajectory};
use crate::report::Expectation;

/// Every check the runner knows, in execution order.
pub const CHECK_NAMES: &[&str] = &[
    "xll", "legendre", "xh", "lh", "cs", "s", "ds", "g", "dg", "case", "fi", "las", "lai", "dtg", "dts", "chart",
    "wzl", "red", "sep", "cor2", "gl", "lala", "lz", "lz_alt", "num",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Hamiltonian,
    Lagrangian,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProblem {
    name: Option<String>,
    kind: Kind,
    n: usize,
    #[serde(default)]
    parameters: BTreeMap<String, f64>,
    hamiltonian: Option<String>,
    lagrangian: Option<String>,
    vector_field: Option<RawField>,
    lambda: Option<Vec<Vec<String>>>,
    #[serde(default)]
    lambda_velocity_dependent: bool,
    lambda_hamiltonian: Option<Vec<Vec<String>>>,
    #[serde(default)]
    domain: BTreeMap<String, [f64; 2]>,
    chart: Option<RawChart>,
    #[serde(default)]
    candidates: RawCandidates,
    select: Option<Vec<String>>,
    #[serde(default)]
    expect: BTreeMap<String, Expectation>,
    integration: Option<RawIntegration>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawField {
    phi: Vec<String>,
    psi: Option<Vec<String>>,
    tau: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChart {
    w: Vec<String>,
    z: String,
    inverse: BTreeMap<String, String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawReduced {
    chart: Option<RawChart>,
    equations: Vec<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawIntegration {
    t1: Option<f64>,
    step: Option<f64>,
}

#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCandidates {
    #[serde(rename = "G")]
    g: Option<String>,
    #[serde(rename = "G_dot")]
    g_dot: Option<String>,
    #[serde(rename = "S_expected")]
    s_expected: Option<String>,
    case: Option<String>,
    integrals: Option<Vec<String>>,
    gamma: Option<String>,
    #[serde(rename = "Gamma")]
    big_gamma: Option<String>,
    g_index: Option<usize>,
    separated_chart: Option<RawChart>,
    velocity_map: Option<Vec<String>>,
    #[serde(rename = "H_for_legendre")]
    h_for_legendre: Option<String>,
    theta: Option<String>,
    eta: Option<Vec<String>>,
    #[serde(rename = "reduced_L")]
    reduced_l: Option<String>,
    particular_solution: Option<BTreeMap<String, String>>,
    alternate_particular_solution: Option<BTreeMap<String, String>>,
    lambda2_candidate: Option<Vec<Vec<String>>>,
    initial_conditions: Option<Vec<Vec<f64>>>,
    reduced_expected: Option<RawReduced>,
}

/// The vector field as written in the problem file.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSpec {
    pub phi: Vec<Expr>,
    /// Phase-space `ψ` (Hamiltonian kind) or the expected extension
    /// (Lagrangian kind).
    pub psi: Option<Vec<Expr>>,
    pub tau: Expr,
}

/// Expected chart equations `(ẇ_1, .., ż)`, possibly in a chart of their own.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedExpected {
    pub chart: Option<ReductionChart>,
    pub equations: Vec<Expr>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Candidates {
    pub g: Option<Expr>,
    pub g_dot: Option<Expr>,
    pub s_expected: Option<Expr>,
    /// `"i"`, `"ii"` or `"iii"`.
    pub case: Option<String>,
    pub integrals: Vec<Expr>,
    pub gamma: Option<Expr>,
    pub big_gamma: Option<Expr>,
    pub g_index: Option<usize>,
    /// Chart in which `G` is a coordinate, when it differs from the main one.
    pub separated_chart: Option<ReductionChart>,
    pub velocity_map: Option<Vec<Expr>>,
    pub h_for_legendre: Option<Expr>,
    pub theta: Option<Expr>,
    pub eta: Vec<Expr>,
    pub reduced_l: Option<Expr>,
    pub particular_solution: Option<BTreeMap<String, Expr>>,
    pub alternate_particular_solution: Option<BTreeMap<String, Expr>>,
    pub lambda2_candidate: Option<Vec<Vec<Expr>>>,
    pub initial_conditions: Vec<Vec<f64>>,
    pub reduced_expected: Option<ReducedExpected>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub name: String,
    pub kind: Kind,
    pub n: usize,
    pub parameters: BTreeMap<String, f64>,
    pub hamiltonian: Option<Expr>,
    pub lagrangian: Option<Expr>,
    pub field: Option<FieldSpec>,
    /// Side-appropriate Λ (`2n × 2n` Hamiltonian, `n × n` Lagrangian).
    pub lambda: Option<LambdaMatrix>,
    /// For Lagrangian problems: the expected (or, when velocity dependent,
    /// the supplied) phase-space Λ.
    pub lambda_hamiltonian: Option<LambdaMatrix>,
    pub domain: DomainBox,
    pub chart: Option<ReductionChart>,
    pub candidates: Candidates,
    pub select: Option<Vec<String>>,
    pub expect: BTreeMap<String, Expectation>,
    pub t1: f64,
    pub step: f64,
}

fn schema(path: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Schema { path: path.into(), message: message.into() }
}

struct Ctx {
    params: BTreeMap<String, Expr>,
}

impl Ctx {
    fn expr(&self, path: &str, s: &str) -> Result<Expr> {
        let e = parse(s).map_err(|err| schema(path, err.to_string()))?;
        Ok(if self.params.is_empty() { e } else { e.substitute(&self.params) })
    }

    fn exprs(&self, path: &str, v: &[String]) -> Result<Vec<Expr>> {
        v.iter().enumerate().map(|(i, s)| self.expr(&format!("{path}[{i}]"), s)).collect()
    }

    fn matrix(&self, path: &str, m: &[Vec<String>]) -> Result<Vec<Vec<Expr>>> {
        m.iter().enumerate().map(|(i, row)| self.exprs(&format!("{path}[{i}]"), row)).collect()
    }

    fn map(&self, path: &str, m: &BTreeMap<String, String>) -> Result<BTreeMap<String, Expr>> {
        m.iter().map(|(k, v)| Ok((k.clone(), self.expr(&format!("{path}.{k}"), v)?))).collect()
    }

    fn chart(&self, path: &str, c: &RawChart, n: usize) -> Result<ReductionChart> {
        if c.w.len() + 1 != 2 * n {
            return Err(Error::Arity(format!("{path}.w has {} entries, expected {}", c.w.len(), 2 * n - 1)));
        }
        let inverse = self.map(&format!("{path}.inverse"), &c.inverse)?;
        if let Some(u) = (0..n).map(q_name).chain((0..n).map(p_name)).find(|u| !inverse.contains_key(u)) {
            return Err(Error::Arity(format!("{path}.inverse does not cover {u}")));
        }
        Ok(ReductionChart::new(self.exprs(&format!("{path}.w"), &c.w)?, self.expr(&format!("{path}.z"), &c.z)?, inverse))
    }
}

fn arity(what: &str, got: usize, want: usize) -> Result<()> {
    if got == want {
        Ok(())
    } else {
        Err(Error::Arity(format!("{what} has {got} entries, expected {want}")))
    }
}

impl Problem {
    pub fn load(path: impl AsRef<Path>) -> Result<Problem> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let fallback = path.file_stem().and_then(|s| s.to_str()).unwrap_or("problem");
        Self::from_json(&text, fallback)
    }

    /// Parses and validates a problem; `fallback_name` is used when the file
    /// has no `name`.
    pub fn from_json(text: &str, fallback_name: &str) -> Result<Problem> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let raw: RawProblem = serde_path_to_error::deserialize(de)
            .map_err(|e| schema(e.path().to_string(), e.inner().to_string()))?;
        Self::from_raw(raw, fallback_name)
    }

    fn from_raw(raw: RawProblem, fallback_name: &str) -> Result<Problem> {
        let n = raw.n;
        if n == 0 {
            return Err(schema("n", "n must be at least 1"));
        }
        let reserved = |name: &str| {
            name == TIME || (0..n).any(|i| [q_name(i), p_name(i), dq_name(i)].iter().any(|v| v == name))
        };
        let mut params = BTreeMap::new();
        for (k, v) in &raw.parameters {
            if reserved(k) {
                return Err(schema(format!("parameters.{k}"), "parameter shadows a system variable"));
            }
            let r = decimal_to_rational(*v).ok_or_else(|| schema(format!("parameters.{k}"), "not a finite number"))?;
            params.insert(k.clone(), Expr::num(r));
        }
        let ctx = Ctx { params };
        let opt = |path: &str, s: &Option<String>| s.as_deref().map(|s| ctx.expr(path, s)).transpose();

        let hamiltonian = opt("hamiltonian", &raw.hamiltonian)?;
        let lagrangian = opt("lagrangian", &raw.lagrangian)?;
        match raw.kind {
            Kind::Hamiltonian if hamiltonian.is_none() => return Err(schema("hamiltonian", "required for kind hamiltonian")),
            Kind::Lagrangian if lagrangian.is_none() => return Err(schema("lagrangian", "required for kind lagrangian")),
            _ => {}
        }

        let field = match &raw.vector_field {
            Some(f) => {
                let phi = ctx.exprs("vector_field.phi", &f.phi)?;
                arity("vector_field.phi", phi.len(), n)?;
                let psi = f.psi.as_ref().map(|p| ctx.exprs("vector_field.psi", p)).transpose()?;
                if let Some(p) = &psi {
                    arity("vector_field.psi", p.len(), n)?;
                }
                let tau = opt("vector_field.tau", &f.tau)?.unwrap_or_else(Expr::zero);
                Some(FieldSpec { phi, psi, tau })
            }
            None => None,
        };

        let side = match raw.kind {
            Kind::Hamiltonian => LambdaSide::Hamiltonian,
            Kind::Lagrangian => LambdaSide::Lagrangian,
        };
        let vd = raw.lambda_velocity_dependent;
        let lambda = raw
            .lambda
            .as_ref()
            .map(|m| LambdaMatrix::new(side, n, ctx.matrix("lambda", m)?, vd))
            .transpose()?;
        let lambda_hamiltonian = raw
            .lambda_hamiltonian
            .as_ref()
            .map(|m| LambdaMatrix::new(LambdaSide::Hamiltonian, n, ctx.matrix("lambda_hamiltonian", m)?, vd))
            .transpose()?;

        let mut domain = DomainBox::default();
        for (k, [lo, hi]) in &raw.domain {
            domain.set(k, *lo, *hi).map_err(|e| schema(format!("domain.{k}"), e.to_string()))?;
        }
        let chart = raw.chart.as_ref().map(|c| ctx.chart("chart", c, n)).transpose()?;

        let c = &raw.candidates;
        let velocity_map = c.velocity_map.as_ref().map(|v| ctx.exprs("candidates.velocity_map", v)).transpose()?;
        if let Some(v) = &velocity_map {
            arity("candidates.velocity_map", v.len(), n)?;
        }
        for (i, ic) in c.initial_conditions.iter().flatten().enumerate() {
            arity(&format!("candidates.initial_conditions[{i}]"), ic.len(), 2 * n)?;
        }
        if let Some(case) = &c.case {
            if !matches!(case.as_str(), "i" | "ii" | "iii") {
                return Err(schema("candidates.case", "expected \"i\", \"ii\" or \"iii\""));
            }
        }
        let lambda2_candidate = c.lambda2_candidate.as_ref().map(|m| ctx.matrix("candidates.lambda2_candidate", m)).transpose()?;
        if let Some(m) = &lambda2_candidate {
            arity("candidates.lambda2_candidate", m.len(), n)?;
            for row in m {
                arity("candidates.lambda2_candidate row", row.len(), n)?;
            }
        }
        let reduced_expected = match &c.reduced_expected {
            Some(r) => {
                let chart = r.chart.as_ref().map(|ch| ctx.chart("candidates.reduced_expected.chart", ch, n)).transpose()?;
                let equations = ctx.exprs("candidates.reduced_expected.equations", &r.equations)?;
                arity("candidates.reduced_expected.equations", equations.len(), 2 * n)?;
                Some(ReducedExpected { chart, equations })
            }
            None => None,
        };
        let candidates = Candidates {
            g: opt("candidates.G", &c.g)?,
            g_dot: opt("candidates.G_dot", &c.g_dot)?,
            s_expected: opt("candidates.S_expected", &c.s_expected)?,
            case: c.case.clone(),
            integrals: c.integrals.as_ref().map(|v| ctx.exprs("candidates.integrals", v)).transpose()?.unwrap_or_default(),
            gamma: opt("candidates.gamma", &c.gamma)?,
            big_gamma: opt("candidates.Gamma", &c.big_gamma)?,
            g_index: c.g_index,
            separated_chart: c.separated_chart.as_ref().map(|ch| ctx.chart("candidates.separated_chart", ch, n)).transpose()?,
            velocity_map,
            h_for_legendre: opt("candidates.H_for_legendre", &c.h_for_legendre)?,
            theta: opt("candidates.theta", &c.theta)?,
            eta: c.eta.as_ref().map(|v| ctx.exprs("candidates.eta", v)).transpose()?.unwrap_or_default(),
            reduced_l: opt("candidates.reduced_L", &c.reduced_l)?,
            particular_solution: c
                .particular_solution
                .as_ref()
                .map(|m| ctx.map("candidates.particular_solution", m))
                .transpose()?,
            alternate_particular_solution: c
                .alternate_particular_solution
                .as_ref()
                .map(|m| ctx.map("candidates.alternate_particular_solution", m))
                .transpose()?,
            lambda2_candidate,
            initial_conditions: c.initial_conditions.clone().unwrap_or_default(),
            reduced_expected,
        };

        for (path, names) in
            [("select", raw.select.iter().flatten().collect::<Vec<_>>()), ("expect", raw.expect.keys().collect())]
        {
            if let Some(bad) = names.into_iter().find(|s| !CHECK_NAMES.contains(&s.as_str())) {
                return Err(schema(path, format!("unknown check `{bad}`")));
            }
        }
        let (t1, step) = match &raw.integration {
            Some(i) => (i.t1.unwrap_or(1.0), i.step.unwrap_or(1e-3)),
            None => (1.0, 1e-3),
        };
        Ok(Problem {
            name: raw.name.unwrap_or_else(|| fallback_name.to_string()),
            kind: raw.kind,
            n,
            parameters: raw.parameters,
            hamiltonian,
            lagrangian,
            field,
            lambda,
            lambda_hamiltonian,
            domain,
            chart,
            candidates,
            select: raw.select,
            expect: raw.expect,
            t1,
            step,
        })
    }
}

impl Problem {
    /// Parses an expression in the context of this problem: its parameters
    /// are substituted.
    pub fn expr(&self, s: &str) -> Result<Expr> {
        let e = parse(s)?;
        let mut params = BTreeMap::new();
        for (k, v) in &self.parameters {
            params.insert(k.clone(), Expr::num(decimal_to_rational(*v).expect("validated on load")));
        }
        Ok(if params.is_empty() { e } else { e.substitute(&params) })
    }

    /// Integration state: `(q, p)` for Hamiltonian problems, `(q, dq)` for
    /// Lagrangian ones.
    pub fn state_names(&self) -> Vec<String> {
        let second: fn(usize) -> String = match self.kind {
            Kind::Hamiltonian => p_name,
            Kind::Lagrangian => dq_name,
        };
        (0..self.n).map(q_name).chain((0..self.n).map(second)).collect()
    }

    /// Integrates the equations of motion from named initial values.
    pub fn integrate(&self, initial: &BTreeMap<String, f64>, cfg: &StepConfig) -> Result<Trajectory> {
        let names = self.state_names();
        if let Some(extra) = initial.keys().find(|k| !names.contains(k)) {
            return Err(Error::Arity(format!("`{extra}` is not a state variable ({})", names.join(", "))));
        }
        let y0 = names
            .iter()
            .map(|u| initial.get(u).copied().ok_or_else(|| Error::Arity(format!("no initial value for `{u}`"))))
            .collect::<Result<Vec<f64>>>()?;
        let n = self.n;
        match self.kind {
            Kind::Hamiltonian => {
                let h = self.hamiltonian.clone().ok_or_else(|| schema("hamiltonian", "missing"))?;
                integrate_hamiltonian(&PhaseSystem::new(n, h)?, &y0, cfg)
            }
            Kind::Lagrangian => {
                let l = self.lagrangian.clone().ok_or_else(|| schema("lagrangian", "missing"))?;
                integrate_euler_lagrange(&LagrangianSystem::new(n, l)?, &y0[..n], &y0[n..], cfg)
            }
        }
    }
}
