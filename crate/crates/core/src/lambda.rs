//! Λ-prolongations, the Λ-symmetry condition, Λ-constants of motion and
//! reduction in symmetry-adapted coordinates.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::{all_hold, simplify, Expr, NamedVerdict, Verifier, ZeroVerdict};
use crate::mechanics::{check_vars, dq_name, q_name, PhaseSystem, PhaseVectorField, TIME};
use crate::symmetry::{candidate_verdicts, compute_s, SymmetryVerdict};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LambdaSide {
    /// `2n × 2n`, acting on `(q, p)` components.
    Hamiltonian,
    /// `n × n`, acting on configuration components.
    Lagrangian,
}

/// A square matrix of expressions. Velocity symbols (`dq`, and `dp` on the
/// Hamiltonian side) may only appear when `velocity_dependent` is set.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaMatrix {
    side: LambdaSide,
    n: usize,
    entries: Vec<Vec<Expr>>,
    velocity_dependent: bool,
}

impl LambdaMatrix {
    pub fn new(side: LambdaSide, n: usize, entries: Vec<Vec<Expr>>, velocity_dependent: bool) -> Result<Self> {
        let dim = Self::dim_for(side, n);
        if entries.len() != dim || entries.iter().any(|row| row.len() != dim) {
            return Err(Error::Arity(format!(
                "lambda must be {dim}x{dim} for {} side with n = {n}",
                match side {
                    LambdaSide::Hamiltonian => "hamiltonian",
                    LambdaSide::Lagrangian => "lagrangian",
                }
            )));
        }
        let mut allowed: BTreeSet<String> = (0..n).map(q_name).collect();
        allowed.insert(TIME.into());
        if side == LambdaSide::Hamiltonian {
            allowed.extend((0..n).map(crate::mechanics::p_name));
        }
        if velocity_dependent {
            allowed.extend((0..n).map(dq_name));
            if side == LambdaSide::Hamiltonian {
                allowed.extend((0..n).map(crate::mechanics::dp_name));
            }
        }
        for e in entries.iter().flatten() {
            check_vars(e, &allowed, "a lambda entry")?;
        }
        Ok(LambdaMatrix { side, n, entries, velocity_dependent })
    }

    fn dim_for(side: LambdaSide, n: usize) -> usize {
        match side {
            LambdaSide::Hamiltonian => 2 * n,
            LambdaSide::Lagrangian => n,
        }
    }

    pub fn zero(side: LambdaSide, n: usize) -> Self {
        let d = Self::dim_for(side, n);
        LambdaMatrix { side, n, entries: vec![vec![Expr::zero(); d]; d], velocity_dependent: false }
    }

    /// `c` times the identity.
    pub fn scalar(side: LambdaSide, n: usize, c: Expr) -> Self {
        let mut m = Self::zero(side, n);
        for i in 0..m.dim() {
            m.entries[i][i] = c.clone();
        }
        m
    }

    pub fn diagonal(side: LambdaSide, n: usize, diag: Vec<Expr>) -> Result<Self> {
        let d = Self::dim_for(side, n);
        if diag.len() != d {
            return Err(Error::Arity(format!("diagonal needs {d} entries, got {}", diag.len())));
        }
        let entries = (0..d)
            .map(|i| (0..d).map(|j| if i == j { diag[i].clone() } else { Expr::zero() }).collect())
            .collect();
        Self::new(side, n, entries, false)
    }

    pub fn side(&self) -> LambdaSide {
        self.side
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[Vec<Expr>] {
        &self.entries
    }

    pub fn entry(&self, i: usize, j: usize) -> &Expr {
        &self.entries[i][j]
    }

    pub fn is_velocity_dependent(&self) -> bool {
        self.velocity_dependent
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().flatten().all(Expr::is_zero)
    }

    /// Matrix-vector product, simplified componentwise.
    pub fn apply(&self, v: &[Expr]) -> Result<Vec<Expr>> {
        if v.len() != self.dim() {
            return Err(Error::Dimension(format!("lambda is {0}x{0}, vector has {1} entries", self.dim(), v.len())));
        }
        Ok(self
            .entries
            .iter()
            .map(|row| simplify(&Expr::sum(row.iter().zip(v).map(|(a, b)| a.clone() * b.clone()))))
            .collect())
    }

    pub fn map(&self, f: impl Fn(&Expr) -> Expr) -> LambdaMatrix {
        LambdaMatrix {
            entries: self.entries.iter().map(|row| row.iter().map(&f).collect()).collect(),
            ..self.clone()
        }
    }

    /// The Hamiltonian-side matrix with velocity symbols replaced by the
    /// canonical equations of `sys`.
    pub fn on_shell(&self, sys: &PhaseSystem) -> Result<LambdaMatrix> {
        self.expect_hamiltonian(sys)?;
        if !self.velocity_dependent {
            return Ok(self.clone());
        }
        let mut m = self.map(|e| simplify(&sys.on_shell(e)));
        m.velocity_dependent = false;
        Ok(m)
    }

    fn expect_hamiltonian(&self, sys: &PhaseSystem) -> Result<()> {
        if self.side != LambdaSide::Hamiltonian || self.n != sys.n() {
            return Err(Error::Dimension(format!(
                "expected a {0}x{0} hamiltonian-side lambda, got {1}x{1} ({2:?})",
                2 * sys.n(),
                self.dim(),
                self.side
            )));
        }
        Ok(())
    }
}

fn require_tau_zero(x: &PhaseVectorField, what: &str) -> Result<()> {
    if x.tau.is_zero() {
        Ok(())
    } else {
        Err(Error::Precondition(format!("{what} requires tau = 0")))
    }
}

/// `ΛΦ` with velocity symbols substituted on-shell.
pub fn lambda_phi(sys: &PhaseSystem, x: &PhaseVectorField, lam: &LambdaMatrix) -> Result<Vec<Expr>> {
    sys.check_field(x)?;
    lam.on_shell(sys)?.apply(&x.components())
}

/// The `u̇` coefficients `D_t Φ_a + (ΛΦ)_a` of the first Λ-prolongation,
/// expanded on solutions.
pub fn lambda_prolongation(sys: &PhaseSystem, x: &PhaseVectorField, lam: &LambdaMatrix) -> Result<Vec<Expr>> {
    require_tau_zero(x, "the lambda prolongation")?;
    let lp = lambda_phi(sys, x, lam)?;
    Ok(x.components()
        .iter()
        .zip(lp)
        .map(|(c, l)| simplify(&(sys.total_time_derivative(c) + l)))
        .collect())
}

/// Residuals `[F, Φ]_a + ∂Φ_a/∂t + (ΛΦ)_a`.
pub fn lambda_symmetry_residuals(sys: &PhaseSystem, x: &PhaseVectorField, lam: &LambdaMatrix) -> Result<Vec<Expr>> {
    require_tau_zero(x, "the lambda-symmetry condition")?;
    let lp = lambda_phi(sys, x, lam)?;
    let vars = sys.phase_vars();
    let comps = x.components();
    let flow = sys.canonical_equations();
    Ok((0..comps.len())
        .map(|a| {
            let transport = Expr::sum(vars.iter().zip(&comps).map(|(v, c)| c.clone() * flow[a].differentiate(v)));
            simplify(&(sys.total_time_derivative(&comps[a]) - transport + lp[a].clone()))
        })
        .collect())
}

pub fn check_lambda_symmetry(
    sys: &PhaseSystem,
    x: &PhaseVectorField,
    lam: &LambdaMatrix,
    v: &Verifier,
) -> Result<SymmetryVerdict> {
    let comps = lambda_symmetry_residuals(sys, x, lam)?
        .iter()
        .zip(sys.phase_vars())
        .map(|(r, l)| v.named(l, r))
        .collect::<Result<Vec<_>>>()?;
    Ok(SymmetryVerdict::from_components(comps))
}

/// Finds a scalar `λ` with `ΛΦ = λΦ`, if there is one.
pub fn scalar_lambda_reduction(
    sys: &PhaseSystem,
    lam: &LambdaMatrix,
    x: &PhaseVectorField,
    v: &Verifier,
) -> Result<Option<Expr>> {
    Ok(scalar_lambda_verdicts(sys, lam, x, v)?.0)
}

/// As [`scalar_lambda_reduction`], also returning the cross-product verdicts
/// `(ΛΦ)_b Φ_k - (ΛΦ)_k Φ_b` against the pivot component `k`.
pub fn scalar_lambda_verdicts(
    sys: &PhaseSystem,
    lam: &LambdaMatrix,
    x: &PhaseVectorField,
    v: &Verifier,
) -> Result<(Option<Expr>, Vec<NamedVerdict>)> {
    let lp = lambda_phi(sys, x, lam)?;
    scalar_ratio(&lp, &x.components(), v)
}

/// Shared by the Hamiltonian and Lagrangian sides: `λ` with `image = λ·base`.
/// The pivot is the first component of `base` that is not identically zero.
pub(crate) fn scalar_ratio(image: &[Expr], base: &[Expr], v: &Verifier) -> Result<(Option<Expr>, Vec<NamedVerdict>)> {
    let mut pivot = None;
    for (i, b) in base.iter().enumerate() {
        if !b.is_zero() && !v.zero(b)?.holds() {
            pivot = Some(i);
            break;
        }
    }
    let Some(k) = pivot else {
        return Err(Error::Precondition("every component of the vector field vanishes".into()));
    };
    let mut verdicts = Vec::with_capacity(base.len().saturating_sub(1));
    for j in (0..base.len()).filter(|&j| j != k) {
        let cross = image[j].clone() * base[k].clone() - image[k].clone() * base[j].clone();
        verdicts.push(v.named(format!("(L Phi)_{0} Phi_{1} - (L Phi)_{1} Phi_{0}", j + 1, k + 1), &cross)?);
    }
    let lambda = all_hold(&verdicts).then(|| simplify(&(image[k].clone() / base[k].clone())));
    Ok((lambda, verdicts))
}

/// Outcome of the Λ-constant-of-motion test for a generating function.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LambdaConstantGReport {
    #[serde(serialize_with = "crate::report::ser_expr")]
    pub g_dot: Expr,
    /// `∇(Ġ) - JΛΦ`, one verdict per phase variable.
    pub dtg: Vec<NamedVerdict>,
    #[serde(serialize_with = "crate::report::ser_opt_expr")]
    pub lambda: Option<Expr>,
    /// `∇(Ġ) + λ∇G`, present when a scalar `λ` exists.
    pub scalar_law: Option<Vec<NamedVerdict>>,
}

impl LambdaConstantGReport {
    pub fn holds(&self) -> bool {
        all_hold(&self.dtg) && self.scalar_law.as_deref().is_none_or(all_hold)
    }
}

pub fn check_lambda_constant_g(
    sys: &PhaseSystem,
    x: &PhaseVectorField,
    lam: &LambdaMatrix,
    g: &Expr,
    v: &Verifier,
) -> Result<LambdaConstantGReport> {
    require_tau_zero(x, "the lambda-constant test")?;
    if !all_hold(&candidate_verdicts(sys, x, g, v)?) {
        return Err(Error::Precondition(format!("{g} does not generate the vector field")));
    }
    let n = sys.n();
    let lp = lambda_phi(sys, x, lam)?;
    // J(ΛΦ) = ((ΛΦ)_p, -(ΛΦ)_q)
    let jlp: Vec<Expr> =
        lp[n..].iter().cloned().chain(lp[..n].iter().map(|e| simplify(&Expr::neg(e.clone())))).collect();
    let g_dot = sys.total_time_derivative(g);
    let grad_dot = sys.gradient(&g_dot);
    let labels = sys.phase_vars();
    let dtg = grad_dot
        .iter()
        .zip(&jlp)
        .zip(&labels)
        .map(|((d, j), l)| v.equal(format!("d(Gdot)/d{l}"), d, j))
        .collect::<Result<Vec<_>>>()?;
    let lambda = scalar_ratio(&lp, &x.components(), v)?.0;
    let scalar_law = match &lambda {
        Some(l) => Some(
            grad_dot
                .iter()
                .zip(sys.gradient(g))
                .zip(&labels)
                .map(|((d, gg), lb)| v.named(format!("d(Gdot)/d{lb} + lambda*dG/d{lb}"), &(d.clone() + l.clone() * gg)))
                .collect::<Result<Vec<_>>>()?,
        ),
        None => None,
    };
    Ok(LambdaConstantGReport { g_dot, dtg, lambda, scalar_law })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LambdaConstantSReport {
    #[serde(serialize_with = "crate::report::ser_expr")]
    pub s: Expr,
    #[serde(serialize_with = "crate::report::ser_expr")]
    pub s_dot: Expr,
    /// `∇·(ΛΦ)` with velocities substituted before differentiating.
    #[serde(serialize_with = "crate::report::ser_expr")]
    pub divergence: Expr,
    pub verdict: ZeroVerdict,
}

pub fn check_lambda_constant_s(
    sys: &PhaseSystem,
    x: &PhaseVectorField,
    lam: &LambdaMatrix,
    v: &Verifier,
) -> Result<LambdaConstantSReport> {
    let s = compute_s(sys, x)?;
    let lp = lambda_phi(sys, &sys.evolutionary_form(x), lam)?;
    let divergence = simplify(&Expr::sum(sys.phase_vars().iter().zip(&lp).map(|(u, c)| c.differentiate(u))));
    let s_dot = sys.total_time_derivative(&s);
    let verdict = v.zero(&(s_dot.clone() + divergence.clone()))?;
    Ok(LambdaConstantSReport { s, s_dot, divergence, verdict })
}

/// Symmetry-adapted coordinates `w_1..w_{2n-1}, z` with an explicit inverse.
#[derive(Debug, Clone, PartialEq)]
pub struct ReductionChart {
    pub w: Vec<Expr>,
    pub z: Expr,
    pub inverse: BTreeMap<String, Expr>,
}

impl ReductionChart {
    pub fn new(w: Vec<Expr>, z: Expr, inverse: BTreeMap<String, Expr>) -> Self {
        ReductionChart { w, z, inverse }
    }

    /// `w1, .., w_{2n-1}, z`.
    pub fn chart_vars(&self) -> Vec<String> {
        (1..=self.w.len()).map(|j| format!("w{j}")).chain(std::iter::once("z".to_string())).collect()
    }

    /// The forward functions `(w_1, .., w_{2n-1}, z)`.
    pub fn forward(&self) -> Vec<Expr> {
        self.w.iter().cloned().chain(std::iter::once(self.z.clone())).collect()
    }

    fn validate(&self, sys: &PhaseSystem) -> Result<()> {
        if self.w.len() + 1 != 2 * sys.n() {
            return Err(Error::Dimension(format!(
                "chart has {} invariants, expected {}",
                self.w.len(),
                2 * sys.n() - 1
            )));
        }
        if let Some(u) = sys.phase_vars().into_iter().find(|u| !self.inverse.contains_key(u)) {
            return Err(Error::Dimension(format!("chart inverse does not cover {u}")));
        }
        let mut allowed: BTreeSet<String> = self.chart_vars().into_iter().collect();
        allowed.insert(TIME.into());
        for e in self.inverse.values() {
            check_vars(e, &allowed, "the chart inverse")?;
        }
        Ok(())
    }

    /// Expresses a function of `(t, q, p)` in chart variables.
    pub fn pull_back(&self, e: &Expr, context: &str) -> Result<Expr> {
        let out = simplify(&e.substitute(&self.inverse));
        let mut allowed: BTreeSet<String> = self.chart_vars().into_iter().collect();
        allowed.insert(TIME.into());
        check_vars(&out, &allowed, context)?;
        Ok(out)
    }

    /// Right-hand sides `(ẇ_1, .., ẇ_{2n-1}, ż)` in chart variables. No
    /// chart property is required, so this also serves unnormalized charts.
    pub fn equations(&self, sys: &PhaseSystem) -> Result<Vec<Expr>> {
        self.validate(sys)?;
        self.forward()
            .iter()
            .zip(self.chart_vars())
            .map(|(f, name)| self.pull_back(&sys.total_time_derivative(f), &format!("the equation for {name}")))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChartReport {
    pub invariance: Vec<NamedVerdict>,
    pub normalization: NamedVerdict,
    pub round_trip: Vec<NamedVerdict>,
}

impl ChartReport {
    pub fn holds(&self) -> bool {
        all_hold(&self.invariance) && self.normalization.holds() && all_hold(&self.round_trip)
    }

    pub fn verdicts(&self) -> Vec<NamedVerdict> {
        self.invariance.iter().chain(std::iter::once(&self.normalization)).chain(&self.round_trip).cloned().collect()
    }
}

pub fn verify_chart(sys: &PhaseSystem, x: &PhaseVectorField, chart: &ReductionChart, v: &Verifier) -> Result<ChartReport> {
    require_tau_zero(x, "chart verification")?;
    sys.check_field(x)?;
    chart.validate(sys)?;
    let invariance = chart
        .w
        .iter()
        .enumerate()
        .map(|(j, w)| v.named(format!("X w{}", j + 1), &x.apply(w)))
        .collect::<Result<Vec<_>>>()?;
    let normalization = v.named("X z - 1", &(x.apply(&chart.z) - Expr::one()))?;
    let round_trip = chart
        .forward()
        .iter()
        .zip(chart.chart_vars())
        .map(|(f, name)| v.equal(format!("{name} round trip"), &f.substitute(&chart.inverse), &Expr::var(&name)))
        .collect::<Result<Vec<_>>>()?;
    Ok(ChartReport { invariance, normalization, round_trip })
}

/// The system in chart variables together with the `z`-dependence test.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReducedSystem {
    pub vars: Vec<String>,
    /// `W_1, .., W_{2n-1}, Z`.
    #[serde(serialize_with = "ser_exprs")]
    pub rhs: Vec<Expr>,
    /// `M_1, .., M_{2n}` in chart variables.
    #[serde(serialize_with = "ser_exprs")]
    pub m: Vec<Expr>,
    /// `∂W_j/∂z - M_j` and `∂Z/∂z - M_{2n}`.
    pub wzl: Vec<NamedVerdict>,
    /// Equations whose `M` vanishes, so their right side is free of `z`.
    pub z_free: Vec<bool>,
}

fn ser_exprs<S: serde::Serializer>(v: &[Expr], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(|e| e.to_string()))
}

impl ReducedSystem {
    pub fn holds(&self) -> bool {
        all_hold(&self.wzl)
    }
}

/// Rewrites the system in the (verified) chart and checks that the
/// `z`-dependence of each equation is exactly `M_j = ∇w_j · ΛΦ`.
pub fn reduced_system(
    sys: &PhaseSystem,
    x: &PhaseVectorField,
    lam: &LambdaMatrix,
    chart: &ReductionChart,
    v: &Verifier,
) -> Result<ReducedSystem> {
    let rhs = chart.equations(sys)?;
    let lp = lambda_phi(sys, x, lam)?;
    let vars = chart.chart_vars();
    let mut m = Vec::with_capacity(rhs.len());
    let mut wzl = Vec::with_capacity(rhs.len());
    let mut z_free = Vec::with_capacity(rhs.len());
    for ((f, r), name) in chart.forward().iter().zip(&rhs).zip(&vars) {
        let mj = Expr::sum(sys.gradient(f).into_iter().zip(&lp).map(|(d, l)| d * l.clone()));
        let mj = chart.pull_back(&mj, &format!("M for {name}"))?;
        wzl.push(v.equal(format!("d({name}dot)/dz - M"), &r.differentiate("z"), &mj)?);
        z_free.push(mj.is_zero() || v.zero(&mj)?.holds());
        m.push(mj);
    }
    Ok(ReducedSystem { vars, rhs, m, wzl, z_free })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeparatedReport {
    #[serde(serialize_with = "crate::report::ser_expr")]
    pub lambda: Expr,
    /// `∂Ġ/∂w_ℓ` for `ℓ ≠ g_index` and `∂Ġ/∂z`.
    pub dependence: Vec<NamedVerdict>,
    /// `γ(t, G)` with the variable named `G`, on success.
    #[serde(serialize_with = "crate::report::ser_opt_expr")]
    pub gamma: Option<Expr>,
}

impl SeparatedReport {
    pub fn holds(&self) -> bool {
        self.gamma.is_some()
    }
}

/// Whether `Ġ` depends only on `(t, G)` when `G = w_{g_index}` (1-based).
pub fn check_separated_g(
    sys: &PhaseSystem,
    x: &PhaseVectorField,
    lam: &LambdaMatrix,
    chart: &ReductionChart,
    g_index: usize,
    v: &Verifier,
) -> Result<SeparatedReport> {
    if g_index == 0 || g_index > chart.w.len() {
        return Err(Error::Precondition(format!("G index {g_index} is not a chart invariant")));
    }
    let Some(lambda) = scalar_lambda_reduction(sys, lam, x, v)? else {
        return Err(Error::Precondition("lambda Phi is not a scalar multiple of Phi".into()));
    };
    let rhs = chart.equations(sys)?;
    let g_dot = &rhs[g_index - 1];
    let g_var = format!("w{g_index}");
    let dependence = chart
        .chart_vars()
        .into_iter()
        .filter(|u| *u != g_var)
        .map(|u| v.named(format!("d(Gdot)/d{u}"), &g_dot.differentiate(&u)))
        .collect::<Result<Vec<_>>>()?;
    let gamma = all_hold(&dependence).then(|| {
        let b = BTreeMap::from([(g_var, Expr::var("G"))]);
        simplify(&g_dot.substitute(&b))
    });
    Ok(SeparatedReport { lambda, dependence, gamma })
}

/// `D_t Γ = 0` for an integral that may depend on time explicitly.
pub fn verify_time_dependent_integral(sys: &PhaseSystem, gamma: &Expr, v: &Verifier) -> Result<ZeroVerdict> {
    crate::symmetry::check_first_integral(sys, gamma, v)
}
