//! Orchestration: runs the selected checks of a problem in dependency order
//! and folds the outcomes into a [`Report`].

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::expr::{simplify, Expr, NamedVerdict, Verifier, ZeroTestConfig};
use crate::lagrangian::{
    check_lagrangian_lambda_invariance, check_lala_and_corollary3, check_noether_lambda, extend_lambda,
    extend_vector_field_velocity_dependent, noether_generator, partial_reduction_check, verify_legendre,
    ConfigVectorField, LagrangianSystem, NoetherConfig, PartialInvariants,
};
use crate::lambda::{
    check_lambda_constant_g, check_lambda_constant_s, check_lambda_symmetry, check_separated_g, reduced_system,
    scalar_lambda_verdicts, verify_chart, verify_time_dependent_integral, LambdaMatrix, LambdaSide, ReductionChart,
};
use crate::mechanics::{PhaseSystem, PhaseVectorField};
use crate::numeric::{compare_with_scalar_ode, integrate_euler_lagrange, integrate_hamiltonian, monitor, StepConfig};
use crate::problem::{Kind, Problem, CHECK_NAMES};
use crate::report::{CheckRecord, Report, Verdict};
use crate::symmetry::{
    check_first_integral, check_point_symmetry, classify_symmetry_case, compute_s, dg_verdicts,
    generating_function_test,
};

/// Tolerance for trajectory-based confirmations of conservation laws.
pub const NUMERIC_TOL: f64 = 1e-6;
/// Tolerance for the stencil residual along Euler-Lagrange trajectories.
pub const NOETHER_TOL: f64 = 1e-5;

const LAGRANGIAN_ONLY: &[&str] = &["xll", "legendre", "xh", "lh", "gl", "lala", "lz", "lz_alt"];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub samples: usize,
    /// Absolute tolerance of the sampling tier.
    pub tol: f64,
    /// Overrides the problem's own selection.
    pub select: Option<Vec<String>>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let z = ZeroTestConfig::default();
        RunConfig { seed: z.seed, samples: z.samples, tol: z.abs_tol, select: None }
    }
}

/// Equation tag printed next to each check name.
pub fn eq_tag(name: &str) -> &'static str {
    match name {
        "xll" => "XLL",
        "legendre" => "Legendre",
        "xh" => "XH",
        "lh" => "LH",
        "cs" => "cs1-cs2",
        "s" => "S",
        "ds" => "DS",
        "g" => "G",
        "dg" => "DG",
        "case" => "cases",
        "fi" => "FI",
        "las" => "Las",
        "lai" => "LaI",
        "dtg" => "DtG",
        "dts" => "DtS",
        "chart" => "chart",
        "wzl" => "WZL",
        "red" => "reduced",
        "sep" => "Gsep",
        "cor2" => "Gamma",
        "gl" => "GL",
        "lala" => "LaLa",
        "lz" | "lz_alt" => "Lz",
        "num" => "numeric",
        _ => "?",
    }
}

/// Runs the checks selected by `cfg` (or the problem, or every check that
/// applies to its kind). Mathematical failures become verdicts; missing
/// inputs and unmet prerequisites become `Skipped` records.
pub fn run_checks(problem: &Problem, cfg: &RunConfig) -> Report {
    let zcfg = ZeroTestConfig { samples: cfg.samples, seed: cfg.seed, abs_tol: cfg.tol };
    let mut r = Runner::new(problem, Verifier::new(problem.domain.clone(), zcfg));
    let selected: BTreeSet<&'static str> = match cfg.select.as_ref().or(problem.select.as_ref()) {
        Some(sel) => CHECK_NAMES.iter().copied().filter(|c| sel.iter().any(|s| s == c)).collect(),
        None => CHECK_NAMES
            .iter()
            .copied()
            .filter(|c| problem.kind == Kind::Lagrangian || !LAGRANGIAN_ONLY.contains(c))
            .collect(),
    };
    let needed = r.closure(&selected);
    let mut checks = Vec::with_capacity(selected.len());
    for &name in CHECK_NAMES.iter().filter(|c| needed.contains(*c)) {
        let eq = eq_tag(name);
        let mut rec = if let Some(reason) = r.blocked(name) {
            CheckRecord::skipped(name, eq, reason)
        } else {
            match r.check(name, eq) {
                Ok(rec) => rec,
                Err(Error::Precondition(m) | Error::Unsupported(m)) => CheckRecord::skipped(name, eq, m),
                Err(e) => CheckRecord::error(name, eq, e.to_string()),
            }
        };
        rec.expected = problem.expect.get(name).copied();
        r.outcomes.insert(name, rec.verdict);
        if selected.contains(name) {
            checks.push(rec);
        }
    }
    Report::new(problem.name.clone(), cfg.seed, checks)
}

struct Lag {
    sys: LagrangianSystem,
    field: ConfigVectorField,
    lam: LambdaMatrix,
}

struct Runner<'a> {
    p: &'a Problem,
    v: Verifier,
    outcomes: BTreeMap<&'static str, Verdict>,
    /// Phase-space field derived by `xh` for Lagrangian problems.
    extended: Option<PhaseVectorField>,
    /// Phase-space Λ derived by `lh` (or supplied) for Lagrangian problems.
    extended_lambda: Option<LambdaMatrix>,
}

fn missing(what: &str) -> Error {
    Error::Precondition(format!("no {what} in the problem file"))
}

fn join(es: &[Expr]) -> String {
    es.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
}

fn witness(pairs: &[(&str, f64)]) -> Option<BTreeMap<String, f64>> {
    Some(pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect())
}

impl<'a> Runner<'a> {
    fn new(p: &'a Problem, v: Verifier) -> Self {
        Runner { p, v, outcomes: BTreeMap::new(), extended: None, extended_lambda: None }
    }

    fn prerequisites(&self, name: &str) -> Vec<&'static str> {
        let c = &self.p.candidates;
        let mut pre: Vec<&'static str> = match name {
            "ds" | "case" => vec!["cs"],
            "dg" => vec!["g"],
            "dtg" | "dts" => vec!["las"],
            "wzl" => vec!["chart", "las"],
            "red" if c.reduced_expected.as_ref().is_none_or(|r| r.chart.is_none()) => vec!["chart"],
            "sep" if c.separated_chart.is_none() => vec!["chart", "lai"],
            "sep" => vec!["lai"],
            "gl" | "lz" | "lz_alt" => vec!["xll"],
            _ => vec![],
        };
        if self.p.kind == Kind::Lagrangian && !LAGRANGIAN_ONLY.contains(&name) {
            pre.extend(["legendre", "xh", "lh"]);
        }
        if name == "lh" {
            pre.push("xh");
        }
        pre
    }

    fn closure(&self, selected: &BTreeSet<&'static str>) -> BTreeSet<&'static str> {
        let mut out = selected.clone();
        let mut stack: Vec<&'static str> = selected.iter().copied().collect();
        while let Some(name) = stack.pop() {
            for pre in self.prerequisites(name) {
                if out.insert(pre) {
                    stack.push(pre);
                }
            }
        }
        if self.p.kind == Kind::Hamiltonian {
            out.retain(|c| !LAGRANGIAN_ONLY.contains(c) || selected.contains(c));
        }
        out
    }

    /// A prerequisite that ran and did not hold blocks its dependents.
    /// Skipped prerequisites do not: the dependent reports its own missing
    /// inputs.
    fn blocked(&self, name: &str) -> Option<String> {
        self.prerequisites(name).into_iter().find_map(|pre| match self.outcomes.get(pre) {
            Some(Verdict::NonZero) if pre == "lai" => {
                Some("lambda Phi is not a scalar multiple of Phi (prerequisite `lai`)".to_string())
            }
            Some(Verdict::NonZero) => Some(format!("prerequisite `{pre}` does not hold")),
            Some(Verdict::Error) => Some(format!("prerequisite `{pre}` raised an error")),
            _ => None,
        })
    }

    fn lag(&self) -> Result<Lag> {
        let p = self.p;
        if p.kind != Kind::Lagrangian {
            return Err(Error::Precondition("only applies to lagrangian problems".into()));
        }
        let sys = LagrangianSystem::new(p.n, p.lagrangian.clone().ok_or_else(|| missing("lagrangian"))?)?;
        let field = ConfigVectorField::new(p.field.as_ref().ok_or_else(|| missing("vector_field"))?.phi.clone())?;
        let lam = p.lambda.clone().unwrap_or_else(|| LambdaMatrix::zero(LambdaSide::Lagrangian, p.n));
        Ok(Lag { sys, field, lam })
    }

    /// The phase-space system, field and Λ the Hamiltonian checks run on.
    fn ham(&self) -> Result<(PhaseSystem, PhaseVectorField, Option<LambdaMatrix>)> {
        let p = self.p;
        match p.kind {
            Kind::Hamiltonian => {
                let sys = PhaseSystem::new(p.n, p.hamiltonian.clone().ok_or_else(|| missing("hamiltonian"))?)?;
                let spec = p.field.as_ref().ok_or_else(|| missing("vector_field"))?;
                let psi = spec.psi.clone().ok_or_else(|| missing("vector_field.psi"))?;
                let field = PhaseVectorField::new(spec.phi.clone(), psi, spec.tau.clone())?;
                Ok((sys, field, p.lambda.clone()))
            }
            Kind::Lagrangian => {
                let h = p.candidates.h_for_legendre.clone().ok_or_else(|| missing("candidates.H_for_legendre"))?;
                let sys = PhaseSystem::new(p.n, h)?;
                let field = self.extended.clone().ok_or_else(|| Error::Precondition("the extended field is unavailable".into()))?;
                Ok((sys, field, self.extended_lambda.clone()))
            }
        }
    }

    fn lambda_or_zero(&self, lam: Option<LambdaMatrix>) -> LambdaMatrix {
        lam.unwrap_or_else(|| LambdaMatrix::zero(LambdaSide::Hamiltonian, self.p.n))
    }

    /// `G` from the candidates, or the generator `φ·p` of the extension.
    fn candidate_g(&self) -> Option<Expr> {
        self.p.candidates.g.clone().or_else(|| match self.p.kind {
            Kind::Lagrangian => self.lag().ok().map(|l| noether_generator(&l.field)),
            Kind::Hamiltonian => None,
        })
    }

    fn initial_conditions(&self) -> Result<&'a [Vec<f64>]> {
        let ics = &self.p.candidates.initial_conditions;
        if ics.is_empty() {
            return Err(missing("candidates.initial_conditions"));
        }
        Ok(ics)
    }

    fn step_config(&self) -> StepConfig {
        StepConfig::new(0.0, self.p.t1, self.p.step)
    }

    fn check(&mut self, name: &str, eq: &str) -> Result<CheckRecord> {
        let v = &self.v;
        let c = &self.p.candidates;
        match name {
            "xll" => {
                let l = self.lag()?;
                Ok(CheckRecord::from_zero(name, eq, &check_lagrangian_lambda_invariance(&l.sys, &l.field, &l.lam, v)?))
            }
            "legendre" => {
                let l = self.lag()?;
                let vm = c.velocity_map.as_ref().ok_or_else(|| missing("candidates.velocity_map"))?;
                let h = c.h_for_legendre.as_ref().ok_or_else(|| missing("candidates.H_for_legendre"))?;
                Ok(CheckRecord::from_verdicts(name, eq, &verify_legendre(&l.sys, vm, h, v)?.verdicts()))
            }
            "xh" => {
                let l = self.lag()?;
                let ext = extend_vector_field_velocity_dependent(&l.sys, &l.field, &l.lam, c.velocity_map.as_deref())?;
                let note = format!("psi = [{}]", join(&ext.psi));
                let rec = match self.p.field.as_ref().and_then(|f| f.psi.as_ref()) {
                    Some(expected) => {
                        let verdicts = ext
                            .psi
                            .iter()
                            .zip(expected)
                            .enumerate()
                            .map(|(a, (d, e))| v.equal(format!("psi{} - expected", a + 1), d, e))
                            .collect::<Result<Vec<_>>>()?;
                        CheckRecord::from_verdicts(name, eq, &verdicts)
                    }
                    None => CheckRecord::new(name, eq, Verdict::ProvenZero),
                };
                self.extended = Some(ext);
                Ok(if rec.note.is_some() { rec } else { rec.with_note(note) })
            }
            "lh" => {
                let l = self.lag()?;
                if self.p.lambda.is_none() {
                    self.extended_lambda = None;
                    return Err(Error::Precondition("no lambda: the extension is an exact symmetry".into()));
                }
                if l.lam.is_velocity_dependent() {
                    self.extended_lambda = self.p.lambda_hamiltonian.clone();
                    return Err(Error::Precondition(match self.extended_lambda {
                        Some(_) => "velocity-dependent lambda: the supplied lambda_hamiltonian is used".into(),
                        None => "velocity-dependent lambda and no lambda_hamiltonian".into(),
                    }));
                }
                let ext = extend_lambda(&l.field, &l.lam, c.lambda2_candidate.as_deref(), v)?;
                let mut verdicts = ext.constraint.clone();
                if let Some(expected) = &self.p.lambda_hamiltonian {
                    let d = ext.lambda.dim();
                    for i in 0..d {
                        for j in 0..d {
                            verdicts.push(v.equal(
                                format!("Lambda_H[{}][{}] - expected", i + 1, j + 1),
                                ext.lambda.entry(i, j),
                                expected.entry(i, j),
                            )?);
                        }
                    }
                }
                let note = format!("lambda2 {}", if ext.solved { "solved" } else { "from candidate" });
                self.extended_lambda = Some(ext.lambda);
                let rec = CheckRecord::from_verdicts(name, eq, &verdicts);
                Ok(if rec.note.is_some() { rec } else { rec.with_note(note) })
            }
            "cs" => {
                let (sys, x, _) = self.ham()?;
                Ok(CheckRecord::from_verdicts(name, eq, &check_point_symmetry(&sys, &x, v)?.components))
            }
            "s" => {
                let (sys, x, _) = self.ham()?;
                let s = compute_s(&sys, &x)?;
                match &c.s_expected {
                    Some(want) => {
                        let nv = v.equal("S - S_expected", &s, want)?;
                        Ok(CheckRecord::from_verdicts(name, eq, &[nv]).with_note(format!("S = {s}")))
                    }
                    None => Err(Error::Precondition(format!("S = {s}; no S_expected to compare"))),
                }
            }
            "ds" => {
                let (sys, x, _) = self.ham()?;
                let s = compute_s(&sys, &x)?;
                Ok(CheckRecord::from_zero(name, eq, &check_first_integral(&sys, &s, v)?).with_note(format!("S = {s}")))
            }
            "g" => {
                let (sys, x, _) = self.ham()?;
                let g = self.candidate_g();
                let rep = generating_function_test(&sys, &x, v, g.as_ref())?;
                let verdicts: Vec<NamedVerdict> =
                    rep.closedness.iter().chain(rep.candidate.iter().flatten()).cloned().collect();
                Ok(CheckRecord::from_verdicts(name, eq, &verdicts))
            }
            "dg" => {
                let (sys, _, _) = self.ham()?;
                let g = self.candidate_g().ok_or_else(|| missing("candidates.G"))?;
                Ok(CheckRecord::from_verdicts(name, eq, &dg_verdicts(&sys, &g, v)?))
            }
            "case" => {
                let (sys, x, _) = self.ham()?;
                let g = self.candidate_g();
                let cls = classify_symmetry_case(&sys, &x, v, g.as_ref())?;
                let note = format!("{}, S = {}", cls.case.label(), cls.s);
                if let Some(want) = &c.case {
                    let want = format!("case ({want})");
                    if want != cls.case.label() {
                        return Ok(CheckRecord::new(name, eq, Verdict::NonZero).with_note(format!("{note}; expected {want}")));
                    }
                }
                let rec = CheckRecord::from_verdicts(name, eq, &cls.evidence);
                Ok(if rec.note.is_some() { rec } else { rec.with_note(note) })
            }
            "fi" => {
                if c.integrals.is_empty() {
                    return Err(missing("candidates.integrals"));
                }
                let (sys, _, _) = self.ham()?;
                let verdicts = c
                    .integrals
                    .iter()
                    .map(|f| Ok(NamedVerdict { label: format!("D_t({f})"), verdict: check_first_integral(&sys, f, v)? }))
                    .collect::<Result<Vec<_>>>()?;
                Ok(CheckRecord::from_verdicts(name, eq, &verdicts))
            }
            "las" => {
                let (sys, x, lam) = self.ham()?;
                let lam = lam.ok_or_else(|| missing("lambda"))?;
                Ok(CheckRecord::from_verdicts(name, eq, &check_lambda_symmetry(&sys, &x, &lam, v)?.components))
            }
            "lai" => {
                let (sys, x, lam) = self.ham()?;
                let lam = lam.ok_or_else(|| missing("lambda"))?;
                let (lambda, verdicts) = scalar_lambda_verdicts(&sys, &lam, &x, v)?;
                let rec = CheckRecord::from_verdicts(name, eq, &verdicts);
                Ok(match lambda {
                    Some(l) => rec.with_note(format!("lambda = {l}")),
                    None => rec,
                })
            }
            "dtg" => {
                let (sys, x, lam) = self.ham()?;
                let lam = lam.ok_or_else(|| missing("lambda"))?;
                let g = self.candidate_g().ok_or_else(|| missing("candidates.G"))?;
                let rep = check_lambda_constant_g(&sys, &x, &lam, &g, v)?;
                let mut verdicts: Vec<NamedVerdict> =
                    rep.dtg.iter().chain(rep.scalar_law.iter().flatten()).cloned().collect();
                if let Some(want) = &c.g_dot {
                    verdicts.push(v.equal("Gdot - G_dot", &rep.g_dot, want)?);
                }
                let mut note = format!("Gdot = {}", rep.g_dot);
                if let Some(l) = &rep.lambda {
                    note.push_str(&format!(", lambda = {l}"));
                }
                let rec = CheckRecord::from_verdicts(name, eq, &verdicts);
                Ok(if rec.note.is_some() { rec } else { rec.with_note(note) })
            }
            "dts" => {
                let (sys, x, lam) = self.ham()?;
                let lam = lam.ok_or_else(|| missing("lambda"))?;
                let rep = check_lambda_constant_s(&sys, &x, &lam, v)?;
                Ok(CheckRecord::from_zero(name, eq, &rep.verdict)
                    .with_note(format!("S = {}, Sdot = {}", rep.s, simplify(&rep.s_dot))))
            }
            "chart" => {
                let (sys, x, _) = self.ham()?;
                let chart = self.p.chart.as_ref().ok_or_else(|| missing("chart"))?;
                Ok(CheckRecord::from_verdicts(name, eq, &verify_chart(&sys, &x, chart, v)?.verdicts()))
            }
            "wzl" => {
                let (sys, x, lam) = self.ham()?;
                let chart = self.p.chart.as_ref().ok_or_else(|| missing("chart"))?;
                let red = reduced_system(&sys, &x, &self.lambda_or_zero(lam), chart, v)?;
                let free: Vec<&str> =
                    red.vars.iter().zip(&red.z_free).filter(|(_, f)| **f).map(|(n, _)| n.as_str()).collect();
                let rec = CheckRecord::from_verdicts(name, eq, &red.wzl);
                Ok(if rec.note.is_some() { rec } else { rec.with_note(format!("z-free: [{}]", free.join(", "))) })
            }
            "red" => {
                let (sys, x, _) = self.ham()?;
                let want = c.reduced_expected.as_ref().ok_or_else(|| missing("candidates.reduced_expected"))?;
                let mut verdicts = Vec::new();
                let chart = match &want.chart {
                    Some(ch) => {
                        // A display chart need not be normalized (Xz = 1).
                        let rep = verify_chart(&sys, &x, ch, v)?;
                        verdicts.extend(rep.invariance.into_iter().chain(rep.round_trip));
                        ch
                    }
                    None => self.p.chart.as_ref().ok_or_else(|| missing("chart"))?,
                };
                let eqs = chart.equations(&sys)?;
                for ((var, got), e) in chart.chart_vars().iter().zip(&eqs).zip(&want.equations) {
                    verdicts.push(v.equal(format!("{var}dot - expected"), got, e)?);
                }
                Ok(CheckRecord::from_verdicts(name, eq, &verdicts))
            }
            "sep" => {
                let (sys, x, lam) = self.ham()?;
                let lam = lam.ok_or_else(|| missing("lambda"))?;
                let g_index = c.g_index.ok_or_else(|| missing("candidates.g_index"))?;
                let mut verdicts = Vec::new();
                let chart: &ReductionChart = match &c.separated_chart {
                    Some(ch) => {
                        verdicts.extend(verify_chart(&sys, &x, ch, v)?.verdicts());
                        ch
                    }
                    None => self.p.chart.as_ref().ok_or_else(|| missing("chart"))?,
                };
                let rep = check_separated_g(&sys, &x, &lam, chart, g_index, v)?;
                verdicts.extend(rep.dependence.iter().cloned());
                if let (Some(got), Some(want)) = (&rep.gamma, &c.gamma) {
                    verdicts.push(v.equal("gamma - expected", got, want)?);
                }
                let rec = CheckRecord::from_verdicts(name, eq, &verdicts);
                Ok(match (&rec.note, &rep.gamma) {
                    (None, Some(gm)) => rec.with_note(format!("lambda = {}, Gdot = {gm}", rep.lambda)),
                    _ => rec,
                })
            }
            "cor2" => {
                let (sys, _, _) = self.ham()?;
                let gamma = c.big_gamma.as_ref().ok_or_else(|| missing("candidates.Gamma"))?;
                Ok(CheckRecord::from_zero(name, eq, &verify_time_dependent_integral(&sys, gamma, v)?))
            }
            "gl" => {
                let l = self.lag()?;
                let ics = self.initial_conditions()?;
                let cfg = NoetherConfig { step: self.step_config(), tol: NOETHER_TOL };
                let rep = check_noether_lambda(&l.sys, &l.field, &l.lam, ics, &cfg)?;
                let w = rep.worst.and_then(|(i, t)| witness(&[("ic", i as f64), ("t", t)]));
                Ok(CheckRecord::from_numeric(name, eq, rep.max_residual, rep.tol, w))
            }
            "lala" => {
                let l = self.lag()?;
                let rep = check_lala_and_corollary3(&l.field, &l.lam, v)?;
                let verdicts: Vec<NamedVerdict> =
                    rep.ratio.iter().chain(rep.extended_law.iter().flatten()).cloned().collect();
                let rec = CheckRecord::from_verdicts(name, eq, &verdicts);
                let mut note = Vec::new();
                if let Some(l) = &rep.lambda {
                    note.push(format!("lambda = {l}"));
                }
                if let Some(k) = &rep.constant {
                    note.push(format!("c = {k}"));
                }
                Ok(if rec.note.is_some() || note.is_empty() { rec } else { rec.with_note(note.join(", ")) })
            }
            "lz" | "lz_alt" => {
                let l = self.lag()?;
                let particular = if name == "lz" { &c.particular_solution } else { &c.alternate_particular_solution };
                let particular = particular.as_ref().ok_or_else(|| {
                    missing(if name == "lz" { "candidates.particular_solution" } else { "candidates.alternate_particular_solution" })
                })?;
                let inv = PartialInvariants {
                    eta: c.eta.clone(),
                    theta: c.theta.clone().ok_or_else(|| missing("candidates.theta"))?,
                };
                let reduced = c.reduced_l.as_ref().ok_or_else(|| missing("candidates.reduced_L"))?;
                let ics = self.initial_conditions()?;
                let cfg = NoetherConfig { step: self.step_config(), tol: NOETHER_TOL };
                let rep = partial_reduction_check(&l.sys, &l.field, &l.lam, &inv, reduced, particular, ics, &cfg, v)?;
                let verdicts: Vec<NamedVerdict> = rep
                    .invariance
                    .iter()
                    .chain([&rep.composition, &rep.annihilation])
                    .cloned()
                    .collect();
                let branch = particular.iter().map(|(k, f)| format!("{k} = {f}")).collect::<Vec<_>>().join(", ");
                let flow = format!(
                    "{branch}: Euler-Lagrange flow {} the constraint (max deviation {:.3e})",
                    if rep.trajectories_hold() { "keeps" } else { "leaves" },
                    rep.max_deviation()
                );
                let rec = CheckRecord::from_verdicts(name, eq, &verdicts);
                if !rec.verdict.passed() {
                    let why = rec.note.clone().unwrap_or_default();
                    return Ok(rec.with_note(format!("{why}; {flow}")));
                }
                if !rep.trajectories_hold() {
                    let worst = rep
                        .trajectory_deviation
                        .iter()
                        .enumerate()
                        .fold((0, 0.0f64), |m, (i, d)| if *d > m.1 { (i, *d) } else { m });
                    let w = witness(&[("ic", worst.0 as f64)]);
                    return Ok(CheckRecord::from_numeric(name, eq, rep.max_deviation(), rep.tol, w).with_note(flow));
                }
                Ok(rec.with_note(flow))
            }
            "num" => self.numeric(name, eq),
            other => Err(Error::Unsupported(format!("unknown check `{other}`"))),
        }
    }

    /// Quantities monitored along the Hamiltonian flow, with their labels.
    fn monitored(&self, sys: &PhaseSystem, x: &PhaseVectorField) -> Result<Vec<(String, Expr)>> {
        let c = &self.p.candidates;
        let mut out = Vec::new();
        if let Some(g) = &c.big_gamma {
            out.push((format!("Gamma = {g}"), g.clone()));
        }
        for f in &c.integrals {
            out.push((format!("integral {f}"), f.clone()));
        }
        if self.outcomes.get("ds").is_some_and(|v| v.passed()) {
            let s = compute_s(sys, x)?;
            if !s.free_vars().is_empty() {
                out.push((format!("S = {s}"), s));
            }
        }
        Ok(out)
    }

    fn numeric(&self, name: &str, eq: &str) -> Result<CheckRecord> {
        let ics = self.initial_conditions()?;
        let n = self.p.n;
        let cfg = self.step_config();
        let (sys, x, _) = self.ham()?;
        let quantities = self.monitored(&sys, &x)?;
        let law = match (&self.p.candidates.gamma, self.candidate_g()) {
            (Some(gamma), Some(g)) if self.outcomes.get("sep").is_some_and(|v| v.passed()) => Some((g, gamma.clone())),
            _ => None,
        };
        let lag = match self.p.kind {
            Kind::Lagrangian => Some(self.lag()?),
            Kind::Hamiltonian => None,
        };
        if quantities.is_empty() && law.is_none() && lag.is_none() {
            return Err(Error::Precondition("nothing to monitor numerically".into()));
        }
        let mut worst = (0.0f64, String::new(), 0usize);
        let mut bump = |dev: f64, what: &str, i: usize| {
            if dev > worst.0 || worst.1.is_empty() {
                worst = (dev.max(worst.0), what.to_string(), i);
            }
        };
        for (i, ic) in ics.iter().enumerate() {
            let u0: Vec<f64> = match &lag {
                Some(l) => {
                    // (q, dq) initial data: cross-check the Euler-Lagrange flow
                    // against the Hamiltonian flow through the momenta.
                    let el = integrate_euler_lagrange(&l.sys, &ic[..n], &ic[n..], &cfg)?;
                    if let Some(d) = &el.diagnostic {
                        return Err(Error::Numeric(format!("Euler-Lagrange flow, initial condition {i}: {d}")));
                    }
                    let p_series = monitor(&el, l.sys.conjugate_momenta())?;
                    if p_series.iter().any(|s| s.truncated_at.is_some()) {
                        return Err(Error::Numeric(format!("momenta left their domain, initial condition {i}")));
                    }
                    let u0: Vec<f64> = ic[..n].iter().copied().chain(p_series.iter().map(|s| s.values[0])).collect();
                    let hf = integrate_hamiltonian(&sys, &u0, &cfg)?;
                    if let Some(d) = &hf.diagnostic {
                        return Err(Error::Numeric(format!("Hamiltonian flow, initial condition {i}: {d}")));
                    }
                    let mut dev = 0.0f64;
                    for (k, (a, b)) in el.states.iter().zip(&hf.states).enumerate() {
                        for j in 0..n {
                            dev = dev.max((a[j] - b[j]).abs()).max((p_series[j].values[k] - b[n + j]).abs());
                        }
                    }
                    bump(dev, "Euler-Lagrange vs Hamiltonian flow", i);
                    u0
                }
                None => ic.clone(),
            };
            let traj = integrate_hamiltonian(&sys, &u0, &cfg)?;
            if let Some(d) = &traj.diagnostic {
                return Err(Error::Numeric(format!("initial condition {i}: {d}")));
            }
            let exprs: Vec<Expr> = quantities.iter().map(|(_, e)| e.clone()).collect();
            for ((label, _), s) in quantities.iter().zip(monitor(&traj, &exprs)?) {
                if s.truncated_at.is_some() {
                    return Err(Error::Numeric(format!("{label} left its domain, initial condition {i}")));
                }
                bump(s.drift(), &format!("drift of {label}"), i);
            }
            if let Some((g, gamma)) = &law {
                let s = monitor(&traj, std::slice::from_ref(g))?.remove(0);
                if s.truncated_at.is_some() {
                    return Err(Error::Numeric(format!("G left its domain, initial condition {i}")));
                }
                let dev = compare_with_scalar_ode(&s, gamma, s.values[0], cfg.step)?;
                bump(dev, &format!("G vs Gdot = {gamma}"), i);
            }
        }
        let (dev, what, i) = worst;
        Ok(CheckRecord::from_numeric(name, eq, dev, NUMERIC_TOL, witness(&[("ic", i as f64)]))
            .with_note(format!("worst: {what} (t1 = {}, h = {})", cfg.t1, cfg.step)))
    }
}
