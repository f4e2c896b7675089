//! First-order Lagrangians: Λ-invariance, Legendre verification, extension
//! of configuration fields and Λ-matrices to phase space, the Noether-type
//! relation along solutions and partial reduction.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::{all_hold, simplify, Compiled, Expr, NamedVerdict, Verifier, ZeroVerdict};
use crate::lambda::{scalar_ratio, LambdaMatrix, LambdaSide};
use crate::mechanics::{check_vars, dq_name, p_name, q_name, PhaseVectorField, TIME};
use crate::numeric::{integrate_euler_lagrange, monitor, StepConfig, Trajectory};

/// Smallest `|det|` of the velocity Hessian accepted as regular.
pub const REGULARITY_THRESHOLD: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct LagrangianSystem {
    n: usize,
    lagrangian: Expr,
    q: Vec<String>,
    dq: Vec<String>,
    momenta: Vec<Expr>,
}

/// Pieces of `A(t,q,dq) q̈ = b(t,q,dq)`; `hessian` is row-major.
pub(crate) struct AccelerationSystem {
    pub hessian: Vec<Expr>,
    pub force: Vec<Expr>,
}

impl LagrangianSystem {
    pub fn new(n: usize, lagrangian: Expr) -> Result<Self> {
        if n == 0 {
            return Err(Error::Dimension("a Lagrangian system needs n >= 1".into()));
        }
        let q: Vec<String> = (0..n).map(q_name).collect();
        let dq: Vec<String> = (0..n).map(dq_name).collect();
        let mut allowed: BTreeSet<String> = q.iter().chain(&dq).cloned().collect();
        allowed.insert(TIME.into());
        check_vars(&lagrangian, &allowed, "the Lagrangian")?;
        let momenta = dq.iter().map(|v| lagrangian.differentiate(v)).collect();
        Ok(LagrangianSystem { n, lagrangian, q, dq, momenta })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn lagrangian(&self) -> &Expr {
        &self.lagrangian
    }

    pub fn q(&self) -> &[String] {
        &self.q
    }

    pub fn dq(&self) -> &[String] {
        &self.dq
    }

    /// `p_α = ∂L/∂dq_α` as functions of `(t, q, dq)`.
    pub fn conjugate_momenta(&self) -> &[Expr] {
        &self.momenta
    }

    /// Indices whose momentum vanishes identically (`L` free of `dq_α`).
    pub fn degenerate_momenta(&self) -> Vec<usize> {
        self.momenta.iter().enumerate().filter(|(_, m)| m.is_zero()).map(|(i, _)| i).collect()
    }

    /// `∂²L/∂dq_α∂dq_β`.
    pub fn hessian(&self) -> Vec<Vec<Expr>> {
        self.momenta.iter().map(|m| self.dq.iter().map(|v| m.differentiate(v)).collect()).collect()
    }

    pub(crate) fn acceleration_system(&self) -> AccelerationSystem {
        let hessian = self.hessian().into_iter().flatten().collect();
        let force = (0..self.n)
            .map(|a| {
                let l_q = self.lagrangian.differentiate(&self.q[a]);
                let mixed = self.q.iter().zip(&self.dq).map(|(qc, dqc)| Expr::var(dqc) * self.momenta[a].differentiate(qc));
                simplify(&(l_q - self.momenta[a].differentiate(TIME) - Expr::sum(mixed)))
            })
            .collect();
        AccelerationSystem { hessian, force }
    }

    /// `∂f/∂t + dq·∇_q f` with free velocities.
    pub fn total_time_derivative(&self, f: &Expr) -> Expr {
        let along = self.q.iter().zip(&self.dq).map(|(q, dq)| Expr::var(dq) * f.differentiate(q));
        simplify(&Expr::sum(std::iter::once(f.differentiate(TIME)).chain(along)))
    }

    /// Samples the velocity Hessian on the verifier's box and returns the
    /// smallest `|det|` seen; fails when it drops to the threshold.
    pub fn check_regular(&self, v: &Verifier) -> Result<f64> {
        let vars: Vec<String> =
            std::iter::once(TIME.to_string()).chain(self.q.iter().cloned()).chain(self.dq.iter().cloned()).collect();
        let intervals = vars.iter().map(|x| v.domain.interval(x)).collect::<Result<Vec<_>>>()?;
        let entries =
            self.hessian().into_iter().flatten().map(|e| Ok(Compiled::new(&e, &vars)?)).collect::<Result<Vec<_>>>()?;
        let mut rng = ChaCha8Rng::seed_from_u64(v.config.seed);
        let mut point = vec![0.0; vars.len()];
        let mut min_det = f64::INFINITY;
        let samples = v.config.samples.max(1);
        for _ in 0..samples {
            for (x, (lo, hi)) in point.iter_mut().zip(&intervals) {
                *x = lo + (hi - lo) * rng.random::<f64>();
            }
            let Ok(values) = entries.iter().map(|c| c.eval(&point)).collect::<std::result::Result<Vec<_>, _>>() else {
                continue;
            };
            let det = DMatrix::from_row_slice(self.n, self.n, &values).determinant().abs();
            if det <= REGULARITY_THRESHOLD {
                let at: Vec<String> = vars.iter().zip(&point).map(|(n, x)| format!("{n}={x}")).collect();
                return Err(Error::Precondition(format!(
                    "the Lagrangian is degenerate: |det Hessian| = {det:e} at {}",
                    at.join(", ")
                )));
            }
            min_det = min_det.min(det);
        }
        if min_det.is_infinite() {
            return Err(Error::SamplingExhausted { subexpr: "velocity Hessian".into(), failures: samples, samples });
        }
        Ok(min_det)
    }
}

/// `X = φ_α(t, q) ∂/∂q_α`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigVectorField {
    pub phi: Vec<Expr>,
}

impl ConfigVectorField {
    pub fn new(phi: Vec<Expr>) -> Result<Self> {
        if phi.is_empty() {
            return Err(Error::Dimension("a configuration field needs at least one component".into()));
        }
        let n = phi.len();
        let mut allowed: BTreeSet<String> = (0..n).map(q_name).collect();
        allowed.insert(TIME.into());
        for e in &phi {
            check_vars(e, &allowed, "a configuration vector field")?;
        }
        Ok(ConfigVectorField { phi })
    }

    pub fn n(&self) -> usize {
        self.phi.len()
    }

    /// `∂φ_γ/∂q_β`, indexed `[γ][β]`.
    pub fn jacobian(&self) -> Vec<Vec<Expr>> {
        self.phi.iter().map(|f| (0..self.n()).map(|b| f.differentiate(&q_name(b))).collect()).collect()
    }
}

fn check_config(lag: &LagrangianSystem, x: &ConfigVectorField, lam: &LambdaMatrix) -> Result<()> {
    if x.n() != lag.n() || lam.side() != LambdaSide::Lagrangian || lam.n() != lag.n() {
        return Err(Error::Dimension(format!(
            "n = {} system, field with {} components, {}x{} lambda ({:?})",
            lag.n(),
            x.n(),
            lam.dim(),
            lam.dim(),
            lam.side()
        )));
    }
    Ok(())
}

/// Velocity coefficients `D_tφ_α + (Λφ)_α` of the Λ-prolonged field.
fn prolongation_coefficients(lag: &LagrangianSystem, x: &ConfigVectorField, lam: &LambdaMatrix) -> Result<Vec<Expr>> {
    let lp = lam.apply(&x.phi)?;
    Ok(x.phi.iter().zip(lp).map(|(f, l)| simplify(&(lag.total_time_derivative(f) + l))).collect())
}

/// Applies the Λ-prolonged field to a function of `(t, q, dq)`.
fn apply_prolonged(x: &ConfigVectorField, coeffs: &[Expr], f: &Expr) -> Expr {
    let n = x.n();
    let terms = (0..n)
        .map(|a| x.phi[a].clone() * f.differentiate(&q_name(a)))
        .chain((0..n).map(|a| coeffs[a].clone() * f.differentiate(&dq_name(a))));
    simplify(&Expr::sum(terms))
}

pub fn check_lagrangian_lambda_invariance(
    lag: &LagrangianSystem,
    x: &ConfigVectorField,
    lam: &LambdaMatrix,
    v: &Verifier,
) -> Result<ZeroVerdict> {
    check_config(lag, x, lam)?;
    let coeffs = prolongation_coefficients(lag, x, lam)?;
    v.zero(&apply_prolonged(x, &coeffs, lag.lagrangian()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LegendreReport {
    pub momentum: Vec<NamedVerdict>,
    pub legendre: NamedVerdict,
}

impl LegendreReport {
    pub fn holds(&self) -> bool {
        all_hold(&self.momentum) && self.legendre.holds()
    }

    pub fn verdicts(&self) -> Vec<NamedVerdict> {
        self.momentum.iter().chain(std::iter::once(&self.legendre)).cloned().collect()
    }
}

fn velocity_bindings(lag: &LagrangianSystem, velocity_map: &[Expr]) -> Result<BTreeMap<String, Expr>> {
    if velocity_map.len() != lag.n() {
        return Err(Error::Arity(format!("velocity map has {} entries, expected {}", velocity_map.len(), lag.n())));
    }
    let mut allowed: BTreeSet<String> = (0..lag.n()).map(q_name).chain((0..lag.n()).map(p_name)).collect();
    allowed.insert(TIME.into());
    for e in velocity_map {
        check_vars(e, &allowed, "the velocity map")?;
    }
    Ok(lag.dq.iter().cloned().zip(velocity_map.iter().cloned()).collect())
}

/// Checks that `dq = v(t,q,p)` inverts the momenta and that `H` is the
/// Legendre transform of `L`.
pub fn verify_legendre(lag: &LagrangianSystem, velocity_map: &[Expr], h: &Expr, v: &Verifier) -> Result<LegendreReport> {
    let vb = velocity_bindings(lag, velocity_map)?;
    lag.check_regular(v)?;
    let momentum = lag
        .momenta
        .iter()
        .enumerate()
        .map(|(a, m)| v.equal(format!("dL/d{} at dq=v - {}", lag.dq[a], p_name(a)), &m.substitute(&vb), &Expr::var(&p_name(a))))
        .collect::<Result<Vec<_>>>()?;
    let pv = Expr::sum(velocity_map.iter().enumerate().map(|(a, e)| Expr::var(&p_name(a)) * e.clone()));
    let legendre = v.equal("H - (p.v - L)", h, &(pv - lag.lagrangian.substitute(&vb)))?;
    Ok(LegendreReport { momentum, legendre })
}

/// Phase-space field and its generating function `G = φ_α p_α`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedField {
    pub field: PhaseVectorField,
    pub g: Expr,
}

pub fn noether_generator(x: &ConfigVectorField) -> Expr {
    simplify(&Expr::sum(x.phi.iter().enumerate().map(|(a, f)| f.clone() * Expr::var(&p_name(a)))))
}

/// `ψ_α = -p_β ∂φ_β/∂q_α`.
pub fn extend_vector_field(x: &ConfigVectorField) -> ExtendedField {
    let n = x.n();
    let jac = x.jacobian();
    let psi = (0..n)
        .map(|a| simplify(&Expr::neg(Expr::sum((0..n).map(|b| Expr::var(&p_name(b)) * jac[b][a].clone())))))
        .collect();
    let field = PhaseVectorField { phi: x.phi.clone(), psi, tau: Expr::zero() };
    ExtendedField { field, g: noether_generator(x) }
}

/// `ψ_α = -p_β ∂φ_β/∂q_α - p_β (∂Λ_{βγ}/∂dq_α) φ_γ`, with velocities then
/// rewritten through `velocity_map`. The map is only needed when `lam`
/// depends on velocities.
pub fn extend_vector_field_velocity_dependent(
    lag: &LagrangianSystem,
    x: &ConfigVectorField,
    lam: &LambdaMatrix,
    velocity_map: Option<&[Expr]>,
) -> Result<PhaseVectorField> {
    check_config(lag, x, lam)?;
    let base = extend_vector_field(x).field;
    if !lam.is_velocity_dependent() {
        return Ok(base);
    }
    let vm = velocity_map.ok_or_else(|| Error::Precondition("a velocity map is required for velocity-dependent lambda".into()))?;
    let vb = velocity_bindings(lag, vm)?;
    let n = x.n();
    let psi = (0..n)
        .map(|a| {
            let extra = (0..n).flat_map(|b| (0..n).map(move |c| (b, c))).map(|(b, c)| {
                Expr::var(&p_name(b)) * lam.entry(b, c).differentiate(&dq_name(a)) * x.phi[c].clone()
            });
            simplify(&(base.psi[a].clone() - Expr::sum(extra)).substitute(&vb))
        })
        .collect();
    Ok(PhaseVectorField { phi: base.phi, psi, tau: Expr::zero() })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedLambda {
    pub lambda: LambdaMatrix,
    /// `Λ2_{αβ} ∂φ_γ/∂q_β - Λ_{γβ} ∂φ_β/∂q_α` for every `(α, γ)`.
    pub constraint: Vec<NamedVerdict>,
    /// Whether `Λ2` was solved for rather than taken from the candidate.
    pub solved: bool,
}

fn triangular_kind(j: &[Vec<Expr>]) -> Option<bool> {
    let n = j.len();
    let lower = (0..n).all(|r| (r + 1..n).all(|c| j[r][c].is_zero()));
    let upper = (0..n).all(|r| (0..r).all(|c| j[r][c].is_zero()));
    if lower {
        Some(true)
    } else if upper {
        Some(false)
    } else {
        None
    }
}

/// Solves `J x = r` for triangular `J`; a zero pivot leaves its unknown at 0.
fn triangular_solve(j: &[Vec<Expr>], r: &[Expr], lower: bool) -> Vec<Expr> {
    let n = j.len();
    let mut x = vec![Expr::zero(); n];
    let order: Vec<usize> = if lower { (0..n).collect() } else { (0..n).rev().collect() };
    for &i in &order {
        if j[i][i].is_zero() {
            continue;
        }
        let known = Expr::sum((0..n).filter(|&k| k != i).map(|k| j[i][k].clone() * x[k].clone()));
        x[i] = simplify(&((r[i].clone() - known) / j[i][i].clone()));
    }
    x
}

/// Assembles the phase-space Λ from a velocity-free Lagrangian-side one.
pub fn extend_lambda(
    x: &ConfigVectorField,
    lam: &LambdaMatrix,
    candidate: Option<&[Vec<Expr>]>,
    v: &Verifier,
) -> Result<ExtendedLambda> {
    let n = x.n();
    if lam.side() != LambdaSide::Lagrangian || lam.n() != n {
        return Err(Error::Dimension(format!("expected an {n}x{n} lagrangian-side lambda")));
    }
    if lam.is_velocity_dependent() {
        return Err(Error::Precondition("extend_lambda requires a velocity-free lambda".into()));
    }
    let jac = x.jacobian();
    // R_{αγ} = Σ_β ∂φ_β/∂q_α Λ_{γβ}
    let r: Vec<Vec<Expr>> = (0..n)
        .map(|a| (0..n).map(|g| simplify(&Expr::sum((0..n).map(|b| jac[b][a].clone() * lam.entry(g, b).clone())))).collect())
        .collect();
    let (lambda2, solved) = match candidate {
        Some(c) => {
            if c.len() != n || c.iter().any(|row| row.len() != n) {
                return Err(Error::Arity(format!("lambda2 candidate must be {n}x{n}")));
            }
            (c.to_vec(), false)
        }
        None => {
            let Some(lower) = triangular_kind(&jac) else {
                return Err(Error::Precondition(
                    "the Jacobian of phi is not triangular; a lambda2 candidate is required".into(),
                ));
            };
            ((0..n).map(|a| triangular_solve(&jac, &r[a], lower)).collect(), true)
        }
    };
    let mut constraint = Vec::with_capacity(n * n);
    for a in 0..n {
        for g in 0..n {
            let lhs = Expr::sum((0..n).map(|b| lambda2[a][b].clone() * jac[g][b].clone()));
            constraint.push(v.equal(format!("lambda2 constraint ({}, {})", a + 1, g + 1), &lhs, &r[a][g])?);
        }
    }
    if let Some(bad) = constraint.iter().find(|c| !c.holds()) {
        return Err(Error::Precondition(format!("lambda2 violates the constraint: {}", bad.label)));
    }
    let mut entries = vec![vec![Expr::zero(); 2 * n]; 2 * n];
    for a in 0..n {
        for b in 0..n {
            entries[a][b] = lam.entry(a, b).clone();
            // B_{αβ} = -Σ_γ ∂Λ_{γβ}/∂q_α p_γ
            entries[n + a][b] = simplify(&Expr::neg(Expr::sum(
                (0..n).map(|g| lam.entry(g, b).differentiate(&q_name(a)) * Expr::var(&p_name(g))),
            )));
            entries[n + a][n + b] = lambda2[a][b].clone();
        }
    }
    let lambda = LambdaMatrix::new(LambdaSide::Hamiltonian, n, entries, false)?;
    Ok(ExtendedLambda { lambda, constraint, solved })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NoetherConfig {
    pub step: StepConfig,
    pub tol: f64,
}

impl Default for NoetherConfig {
    fn default() -> Self {
        NoetherConfig { step: StepConfig { t1: 0.5, ..StepConfig::default() }, tol: 1e-5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoetherReport {
    /// Largest `|d/dt(φ·p) + pᵀΛφ|` per initial condition.
    pub residuals: Vec<f64>,
    pub max_residual: f64,
    /// Time and initial-condition index of the largest residual.
    pub worst: Option<(usize, f64)>,
    pub tol: f64,
}

impl NoetherReport {
    pub fn holds(&self) -> bool {
        self.max_residual <= self.tol
    }
}

/// Central five-point derivative at interior grid points `2..len-2`.
pub(crate) fn five_point_derivative(values: &[f64], h: f64) -> Vec<(usize, f64)> {
    (2..values.len().saturating_sub(2))
        .map(|k| (k, (values[k - 2] - 8.0 * values[k - 1] + 8.0 * values[k + 1] - values[k + 2]) / (12.0 * h)))
        .collect()
}

fn integrate_from(lag: &LagrangianSystem, ic: &[f64], cfg: &StepConfig) -> Result<Trajectory> {
    let n = lag.n();
    if ic.len() != 2 * n {
        return Err(Error::Arity(format!("initial condition needs {} values (q, dq), got {}", 2 * n, ic.len())));
    }
    let tr = integrate_euler_lagrange(lag, &ic[..n], &ic[n..], cfg)?;
    if let Some(d) = &tr.diagnostic {
        return Err(Error::Numeric(format!("Euler-Lagrange integration from {ic:?}: {d}")));
    }
    Ok(tr)
}

/// Confirms `D_t(φ·p) + pᵀΛφ = 0` along integrated Euler-Lagrange solutions.
pub fn check_noether_lambda(
    lag: &LagrangianSystem,
    x: &ConfigVectorField,
    lam: &LambdaMatrix,
    initial_conditions: &[Vec<f64>],
    cfg: &NoetherConfig,
) -> Result<NoetherReport> {
    check_config(lag, x, lam)?;
    if initial_conditions.is_empty() {
        return Err(Error::Precondition("no initial conditions given".into()));
    }
    let n = lag.n();
    let g = simplify(&Expr::sum((0..n).map(|a| x.phi[a].clone() * lag.momenta[a].clone())));
    let lp = lam.apply(&x.phi)?;
    let contraction = simplify(&Expr::sum((0..n).map(|a| lag.momenta[a].clone() * lp[a].clone())));
    let mut residuals = Vec::with_capacity(initial_conditions.len());
    let mut worst: Option<(usize, f64)> = None;
    let mut max_residual = 0.0f64;
    for (i, ic) in initial_conditions.iter().enumerate() {
        let tr = integrate_from(lag, ic, &cfg.step)?;
        let series = monitor(&tr, &[g.clone(), contraction.clone()])?;
        if series.iter().any(|s| s.truncated_at.is_some()) {
            return Err(Error::Numeric(format!("G or its Lambda term left its domain along trajectory {i}")));
        }
        let mut r_i = 0.0f64;
        for (k, d) in five_point_derivative(&series[0].values, tr.step) {
            let r = (d + series[1].values[k]).abs();
            if r > r_i {
                r_i = r;
                if r > max_residual {
                    max_residual = r;
                    worst = Some((i, tr.time(k)));
                }
            }
        }
        residuals.push(r_i);
    }
    Ok(NoetherReport { residuals, max_residual, worst, tol: cfg.tol })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LalaReport {
    /// Cross-product verdicts behind the scalar `λ`.
    pub ratio: Vec<NamedVerdict>,
    #[serde(serialize_with = "crate::report::ser_opt_expr")]
    pub lambda: Option<Expr>,
    /// `λ` when it is a constant `c`.
    #[serde(serialize_with = "crate::report::ser_opt_expr")]
    pub constant: Option<Expr>,
    /// `(ΛΦ)_a - cΦ_a` on the extended pair, when `c` exists.
    pub extended_law: Option<Vec<NamedVerdict>>,
}

impl LalaReport {
    pub fn holds(&self) -> bool {
        self.lambda.is_some() && self.extended_law.as_deref().is_none_or(all_hold)
    }
}

pub fn check_lala_and_corollary3(x: &ConfigVectorField, lam: &LambdaMatrix, v: &Verifier) -> Result<LalaReport> {
    let lp = lam.apply(&x.phi)?;
    let (lambda, ratio) = scalar_ratio(&lp, &x.phi, v)?;
    let constant = lambda.clone().filter(|l| l.free_vars().is_empty());
    let extended_law = match &constant {
        Some(c) if !lam.is_velocity_dependent() => {
            let big = extend_lambda(x, lam, None, v)?;
            let field = extend_vector_field(x).field;
            let comps = field.components();
            let lphi = big.lambda.apply(&comps)?;
            Some(
                lphi.iter()
                    .zip(&comps)
                    .enumerate()
                    .map(|(a, (l, f))| v.equal(format!("(Lambda Phi)_{} - c Phi_{}", a + 1, a + 1), l, &(c.clone() * f.clone())))
                    .collect::<Result<Vec<_>>>()?,
            )
        }
        _ => None,
    };
    Ok(LalaReport { ratio, lambda, constant, extended_law })
}

/// Invariants for the partial reduction: `η_r(t, q)` and `θ(t, q, dq)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialInvariants {
    pub eta: Vec<Expr>,
    pub theta: Expr,
}

impl PartialInvariants {
    /// Variables of the reduced Lagrangian: `eta1.., deta1.., theta`.
    pub fn reduced_vars(&self) -> Vec<String> {
        let k = self.eta.len();
        (1..=k)
            .map(|r| format!("eta{r}"))
            .chain((1..=k).map(|r| format!("deta{r}")))
            .chain(std::iter::once("theta".to_string()))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartialReductionReport {
    pub invariance: Vec<NamedVerdict>,
    pub composition: NamedVerdict,
    pub annihilation: NamedVerdict,
    /// Largest `|dq_α - f_α(t, q)|` along Euler-Lagrange trajectories
    /// started on the constraint, per initial condition.
    pub trajectory_deviation: Vec<f64>,
    pub tol: f64,
}

impl PartialReductionReport {
    pub fn trajectories_hold(&self) -> bool {
        self.trajectory_deviation.iter().all(|d| *d <= self.tol)
    }

    pub fn holds(&self) -> bool {
        all_hold(&self.invariance) && self.composition.holds() && self.annihilation.holds() && self.trajectories_hold()
    }

    pub fn max_deviation(&self) -> f64 {
        self.trajectory_deviation.iter().fold(0.0, |m, d| m.max(*d))
    }
}

/// Checks a partial reduction `∂L̃/∂θ = 0` together with a particular
/// solution `dq_α = f_α(t, q)` for some of the velocities.
#[allow(clippy::too_many_arguments)]
pub fn partial_reduction_check(
    lag: &LagrangianSystem,
    x: &ConfigVectorField,
    lam: &LambdaMatrix,
    inv: &PartialInvariants,
    reduced_l: &Expr,
    particular: &BTreeMap<String, Expr>,
    initial_conditions: &[Vec<f64>],
    cfg: &NoetherConfig,
    v: &Verifier,
) -> Result<PartialReductionReport> {
    check_config(lag, x, lam)?;
    let n = lag.n();
    let reduced_vars: BTreeSet<String> = inv.reduced_vars().into_iter().chain(std::iter::once(TIME.to_string())).collect();
    check_vars(reduced_l, &reduced_vars, "the reduced Lagrangian")?;
    let mut allowed: BTreeSet<String> = (0..n).map(q_name).collect();
    allowed.insert(TIME.into());
    for (k, f) in particular {
        if !lag.dq.contains(k) {
            return Err(Error::Precondition(format!("particular solution assigns {k}, which is not a velocity")));
        }
        check_vars(f, &allowed, "the particular solution")?;
    }

    let coeffs = prolongation_coefficients(lag, x, lam)?;
    let eta_dot: Vec<Expr> = inv.eta.iter().map(|e| lag.total_time_derivative(e)).collect();
    let mut invariance = Vec::new();
    for (r, (e, ed)) in inv.eta.iter().zip(&eta_dot).enumerate() {
        invariance.push(v.named(format!("X eta{}", r + 1), &apply_prolonged(x, &coeffs, e))?);
        invariance.push(v.named(format!("X deta{}", r + 1), &apply_prolonged(x, &coeffs, ed))?);
    }
    invariance.push(v.named("X theta", &apply_prolonged(x, &coeffs, &inv.theta))?);

    let mut compose: BTreeMap<String, Expr> = BTreeMap::new();
    for (r, (e, ed)) in inv.eta.iter().zip(&eta_dot).enumerate() {
        compose.insert(format!("eta{}", r + 1), e.clone());
        compose.insert(format!("deta{}", r + 1), ed.clone());
    }
    compose.insert("theta".into(), inv.theta.clone());
    let composition = v.equal("reduced L - L", &reduced_l.substitute(&compose), lag.lagrangian())?;
    let d_theta = reduced_l.differentiate("theta").substitute(&compose).substitute(particular);
    let annihilation = v.named("dL~/dtheta on the particular solution", &d_theta)?;

    let mut trajectory_deviation = Vec::with_capacity(initial_conditions.len());
    let constrained: Vec<(usize, Expr)> =
        (0..n).filter_map(|a| particular.get(&lag.dq[a]).map(|f| (a, f.clone()))).collect();
    for ic in initial_conditions {
        if ic.len() != 2 * n {
            return Err(Error::Arity(format!("initial condition needs {} values (q, dq)", 2 * n)));
        }
        let mut start = ic.clone();
        let at: BTreeMap<String, f64> =
            std::iter::once((TIME.to_string(), cfg.step.t0)).chain((0..n).map(|a| (q_name(a), ic[a]))).collect();
        for (a, f) in &constrained {
            start[n + a] = crate::expr::evaluate(f, &at)?;
        }
        let tr = integrate_from(lag, &start, &cfg.step)?;
        let devs: Vec<Expr> = constrained.iter().map(|(a, f)| Expr::var(&dq_name(*a)) - f.clone()).collect();
        let series = monitor(&tr, &devs)?;
        let mut worst = 0.0f64;
        for s in &series {
            if s.truncated_at.is_some() {
                return Err(Error::Numeric("the particular solution left its domain along a trajectory".into()));
            }
            worst = s.values.iter().fold(worst, |m, x| m.max(x.abs()));
        }
        trajectory_deviation.push(worst);
    }
    Ok(PartialReductionReport { invariance, composition, annihilation, trajectory_deviation, tol: cfg.tol })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{bindings, parse};
    use crate::lambda::{check_lambda_constant_g, check_lambda_symmetry};
    use crate::mechanics::PhaseSystem;
    use crate::symmetry::generating_function_test;

    fn p(s: &str) -> Expr {
        parse(s).unwrap()
    }

    fn ps(v: &[&str]) -> Vec<Expr> {
        v.iter().map(|s| p(s)).collect()
    }

    fn holds(v: &Verifier, e: &Expr) -> bool {
        v.zero(e).unwrap().holds()
    }

    const L5: &str = "(dq1/q1 - q1)^2/2 + (dq1 - q1*dq2)^2*exp(-2*q2)/2 + q1*exp(-q2)";
    const H5: &str = "q1^2*p1^2/2 + q1*p1*p2 + q1^2*p1 + p2^2/2 + p2^2*exp(2*q2)/(2*q1^2) + q1*p2 - q1*exp(-q2)";
    const L6: &str = "(dq1/q1 - log(q1))^2/2 + (dq1/q1 + dq2/q2)^2/2";
    const H6: &str = "q1^2*p1^2/2 + q2^2*p2^2 + (q1*p1 - q2*p2)*log(q1) - q1*q2*p1*p2";
    const L7: &str = "(dq1/q1 + 1)^2*exp(-2*q1)/2";

    fn lagrangian_lambda(n: usize, rows: &[&[&str]], vd: bool) -> LambdaMatrix {
        LambdaMatrix::new(LambdaSide::Lagrangian, n, rows.iter().map(|r| ps(r)).collect(), vd).unwrap()
    }

    #[test]
    fn free_particle_momentum_and_legendre() {
        let lag = LagrangianSystem::new(1, p("dq1^2/2")).unwrap();
        assert_eq!(lag.conjugate_momenta(), &ps(&["dq1"])[..]);
        let r = verify_legendre(&lag, &ps(&["p1"]), &p("p1^2/2"), &Verifier::default()).unwrap();
        assert!(r.holds());
    }

    #[test]
    fn degenerate_lagrangian_is_rejected() {
        let lag = LagrangianSystem::new(2, p("dq1^2/2 + q2")).unwrap();
        assert_eq!(lag.degenerate_momenta(), vec![1]);
        assert!(matches!(lag.check_regular(&Verifier::default()), Err(Error::Precondition(_))));
    }

    #[test]
    fn example7_momentum_matches_finite_differences() {
        let lag = LagrangianSystem::new(1, p(L7)).unwrap();
        let m = &lag.conjugate_momenta()[0];
        assert!(holds(&Verifier::default(), &(m.clone() - p("(dq1/q1+1)*exp(-2*q1)/q1"))));
        let at = |dq: f64| {
            let b = BTreeMap::from([("q1".to_string(), 0.7), ("dq1".to_string(), dq)]);
            crate::expr::evaluate(lag.lagrangian(), &b).unwrap()
        };
        let fd = (at(0.3 + 1e-6) - at(0.3 - 1e-6)) / 2e-6;
        let exact = crate::expr::evaluate(m, &BTreeMap::from([("q1".into(), 0.7), ("dq1".into(), 0.3)])).unwrap();
        assert!((fd - exact).abs() < 1e-8);
    }

    #[test]
    fn example5_pipeline() {
        let v = Verifier::default();
        let lag = LagrangianSystem::new(2, p(L5)).unwrap();
        let x = ConfigVectorField::new(ps(&["q1", "1"])).unwrap();
        let lam = lagrangian_lambda(2, &[&["q1", "0"], &["0", "q1"]], false);
        assert!(check_lagrangian_lambda_invariance(&lag, &x, &lam, &v).unwrap().holds());
        let ext = extend_vector_field(&x);
        assert_eq!(ext.field.psi, ps(&["-p1", "0"]));
        assert_eq!(ext.g, simplify(&p("q1*p1 + p2")));
        let big = extend_lambda(&x, &lam, None, &v).unwrap();
        let want = [["q1", "0", "0", "0"], ["0", "q1", "0", "0"], ["-p1", "-p2", "q1", "0"], ["0", "0", "0", "0"]];
        for (row, wrow) in big.lambda.entries().iter().zip(want) {
            assert_eq!(row, &ps(&wrow));
        }
        let vmap = ps(&["q1^2*p1 + q1*p2 + q1^2", "(q1^3*p1 + q1^2*p2 + p2*exp(2*q2) + q1^3)/q1^2"]);
        assert!(verify_legendre(&lag, &vmap, &p(H5), &v).unwrap().holds());
        let sys = PhaseSystem::new(2, p(H5)).unwrap();
        assert!(check_lambda_symmetry(&sys, &ext.field, &big.lambda, &v).unwrap().holds);
        let r = check_lambda_constant_g(&sys, &ext.field, &big.lambda, &ext.g, &v).unwrap();
        assert!(r.holds());
        assert!(holds(&v, &(r.g_dot + p("q1")*ext.g.clone())));
        let lala = check_lala_and_corollary3(&x, &lam, &v).unwrap();
        assert_eq!(lala.lambda, Some(p("q1")));
        assert!(lala.constant.is_none() && lala.extended_law.is_none());
    }

    #[test]
    fn example5_noether_relation_along_solutions() {
        let lag = LagrangianSystem::new(2, p(L5)).unwrap();
        let x = ConfigVectorField::new(ps(&["q1", "1"])).unwrap();
        let lam = lagrangian_lambda(2, &[&["q1", "0"], &["0", "q1"]], false);
        let ics = vec![vec![0.6, 0.2, 0.1, -0.2], vec![0.9, 0.5, 0.3, 0.1], vec![0.5, -0.3, -0.2, 0.4]];
        let r = check_noether_lambda(&lag, &x, &lam, &ics, &NoetherConfig::default()).unwrap();
        assert!(r.holds(), "{r:?}");
        let zero = LambdaMatrix::zero(LambdaSide::Lagrangian, 2);
        let wrong = check_noether_lambda(&lag, &x, &zero, &ics, &NoetherConfig::default()).unwrap();
        assert!(!wrong.holds());
    }

    #[test]
    fn example6_pipeline() {
        let v = Verifier::default();
        let lag = LagrangianSystem::new(2, p(L6)).unwrap();
        let x = ConfigVectorField::new(ps(&["q1", "-q2"])).unwrap();
        let lam = lagrangian_lambda(2, &[&["1", "0"], &["0", "1"]], false);
        assert!(check_lagrangian_lambda_invariance(&lag, &x, &lam, &v).unwrap().holds());
        let zero = LambdaMatrix::zero(LambdaSide::Lagrangian, 2);
        assert!(!check_lagrangian_lambda_invariance(&lag, &x, &zero, &v).unwrap().holds());
        let ext = extend_vector_field(&x);
        assert_eq!(ext.field.psi, ps(&["-p1", "p2"]));
        let big = extend_lambda(&x, &lam, None, &v).unwrap();
        assert_eq!(big.lambda, LambdaMatrix::scalar(LambdaSide::Hamiltonian, 2, Expr::one()));
        let vmap = ps(&["p1*q1^2 - p2*q1*q2 + q1*log(q1)", "-p1*q1*q2 + 2*p2*q2^2 - q2*log(q1)"]);
        assert!(verify_legendre(&lag, &vmap, &p(H6), &v).unwrap().holds());
        let lala = check_lala_and_corollary3(&x, &lam, &v).unwrap();
        assert_eq!(lala.constant, Some(Expr::one()));
        assert!(lala.holds());

        let inv = PartialInvariants { eta: ps(&["q1*q2"]), theta: p("dq1/q1 - log(q1)") };
        let particular = bindings([("dq1", p("q1*log(q1)"))]);
        let ics = vec![vec![0.5, 0.7, 0.0, 0.3], vec![0.8, 0.4, 0.0, -0.2]];
        let r = partial_reduction_check(
            &lag,
            &x,
            &lam,
            &inv,
            &p("theta^2/2 + deta1^2/(2*eta1^2)"),
            &particular,
            &ics,
            &NoetherConfig { step: StepConfig::default(), tol: 1e-5 },
            &v,
        )
        .unwrap();
        assert!(r.holds(), "{r:?}");

        let shifted = PartialInvariants { theta: p("dq1/q1 - log(q1) + q1"), ..inv };
        let r = partial_reduction_check(
            &lag,
            &x,
            &lam,
            &shifted,
            &p("theta^2/2 + deta1^2/(2*eta1^2)"),
            &particular,
            &ics,
            &NoetherConfig::default(),
            &v,
        )
        .unwrap();
        assert!(!r.invariance.last().unwrap().holds());
    }

    #[test]
    fn example7_velocity_dependent_extension() {
        let v = Verifier::default();
        let lag = LagrangianSystem::new(1, p(L7)).unwrap();
        let x = ConfigVectorField::new(ps(&["q1"])).unwrap();
        let lam = lagrangian_lambda(1, &[&["q1+dq1"]], true);
        assert!(check_lagrangian_lambda_invariance(&lag, &x, &lam, &v).unwrap().holds());
        let vmap = ps(&["q1^2*p1*exp(2*q1) - q1"]);
        let f = extend_vector_field_velocity_dependent(&lag, &x, &lam, Some(&vmap)).unwrap();
        assert!(holds(&v, &(f.psi[0].clone() + p("q1*p1 + p1"))));
        assert!(extend_vector_field_velocity_dependent(&lag, &x, &lam, None).is_err());
        let sys = PhaseSystem::new(1, p("q1^2*p1^2*exp(2*q1)/2 - q1*p1")).unwrap();
        let gf = generating_function_test(&sys, &f, &v, None).unwrap();
        assert!(!gf.closed());
        assert!(matches!(extend_lambda(&x, &lam, None, &v), Err(Error::Precondition(_))));

        let ics = vec![vec![0.5, 0.0]];
        let run = |dq: &str| {
            partial_reduction_check(
                &lag,
                &x,
                &lam,
                &PartialInvariants { eta: vec![], theta: p("(dq1/q1)*exp(-q1) + exp(-q1)") },
                &p("theta^2/2"),
                &bindings([("dq1", p(dq))]),
                &ics,
                &NoetherConfig::default(),
                &v,
            )
            .unwrap()
        };
        let minus = run("-q1");
        assert!(minus.holds(), "{minus:?}");
        let plus = run("q1");
        assert!(!plus.annihilation.holds());
        assert!(plus.trajectories_hold());
    }

    #[test]
    fn dq_free_lambda_agrees_with_plain_extension() {
        let lag = LagrangianSystem::new(2, p(L5)).unwrap();
        let x = ConfigVectorField::new(ps(&["q1", "1"])).unwrap();
        let lam = lagrangian_lambda(2, &[&["q1", "0"], &["0", "q1"]], false);
        let a = extend_vector_field_velocity_dependent(&lag, &x, &lam, None).unwrap();
        assert_eq!(a, extend_vector_field(&x).field);
    }

    #[test]
    fn zero_lambda_extends_to_zero_and_c_zero() {
        let v = Verifier::default();
        let x = ConfigVectorField::new(ps(&["q1", "-q2"])).unwrap();
        let zero = LambdaMatrix::zero(LambdaSide::Lagrangian, 2);
        assert!(extend_lambda(&x, &zero, None, &v).unwrap().lambda.is_zero());
        let lala = check_lala_and_corollary3(&x, &zero, &v).unwrap();
        assert_eq!(lala.constant, Some(Expr::zero()));
        assert!(lala.holds());
    }

    #[test]
    fn stencil_is_exact_on_quartics() {
        let h = 0.1;
        let vals: Vec<f64> = (0..9).map(|k| (k as f64 * h).powi(4)).collect();
        for (k, d) in five_point_derivative(&vals, h) {
            let t = k as f64 * h;
            assert!((d - 4.0 * t.powi(3)).abs() < 1e-10);
        }
    }

    #[test]
    fn configuration_fields_reject_momenta() {
        assert!(ConfigVectorField::new(ps(&["p1"])).is_err());
    }
}
