//! Phase-space structures: canonical equations, Poisson bracket, total time
//! derivative, Hamiltonian vector fields and the Lie bracket.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::expr::{simplify, Expr};

/// Name of the time variable.
pub const TIME: &str = "t";

pub fn q_name(i: usize) -> String {
    format!("q{}", i + 1)
}

pub fn p_name(i: usize) -> String {
    format!("p{}", i + 1)
}

pub fn dq_name(i: usize) -> String {
    format!("dq{}", i + 1)
}

pub fn dp_name(i: usize) -> String {
    format!("dp{}", i + 1)
}

/// Rejects expressions with free variables outside `allowed`.
pub(crate) fn check_vars(e: &Expr, allowed: &BTreeSet<String>, context: &str) -> Result<()> {
    match e.free_vars().into_iter().find(|v| !allowed.contains(v)) {
        Some(var) => Err(Error::StrayVariable { var, context: context.into() }),
        None => Ok(()),
    }
}

/// A Hamiltonian system with `n` degrees of freedom in canonical variables
/// `q1..qn, p1..pn` and time `t`.
#[derive(Debug, Clone)]
pub struct PhaseSystem {
    n: usize,
    hamiltonian: Expr,
    q: Vec<String>,
    p: Vec<String>,
    flow: Vec<Expr>,
}

impl PhaseSystem {
    pub fn new(n: usize, hamiltonian: Expr) -> Result<Self> {
        if n == 0 {
            return Err(Error::Dimension("a phase system needs n >= 1".into()));
        }
        let q: Vec<String> = (0..n).map(q_name).collect();
        let p: Vec<String> = (0..n).map(p_name).collect();
        let mut allowed: BTreeSet<String> = q.iter().chain(&p).cloned().collect();
        allowed.insert(TIME.into());
        check_vars(&hamiltonian, &allowed, "the Hamiltonian")?;
        let flow = p
            .iter()
            .map(|v| hamiltonian.differentiate(v))
            .chain(q.iter().map(|v| simplify(&Expr::neg(hamiltonian.differentiate(v)))))
            .collect();
        Ok(PhaseSystem { n, hamiltonian, q, p, flow })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn hamiltonian(&self) -> &Expr {
        &self.hamiltonian
    }

    pub fn q(&self) -> &[String] {
        &self.q
    }

    pub fn p(&self) -> &[String] {
        &self.p
    }

    /// Phase variables `u = (q, p)` in order.
    pub fn phase_vars(&self) -> Vec<String> {
        self.q.iter().chain(&self.p).cloned().collect()
    }

    /// Velocity symbols `(dq, dp)` matching [`phase_vars`](Self::phase_vars).
    pub fn velocity_vars(&self) -> Vec<String> {
        (0..self.n).map(dq_name).chain((0..self.n).map(dp_name)).collect()
    }

    /// `t`, `q`, `p`.
    pub fn allowed_vars(&self) -> BTreeSet<String> {
        let mut s: BTreeSet<String> = self.phase_vars().into_iter().collect();
        s.insert(TIME.into());
        s
    }

    /// `F = (∂H/∂p, -∂H/∂q)`.
    pub fn canonical_equations(&self) -> &[Expr] {
        &self.flow
    }

    /// `{f, g} = Σ (∂f/∂q ∂g/∂p - ∂f/∂p ∂g/∂q)`.
    pub fn poisson_bracket(&self, f: &Expr, g: &Expr) -> Expr {
        let terms = (0..self.n).map(|i| {
            let (q, p) = (&self.q[i], &self.p[i]);
            f.differentiate(q) * g.differentiate(p) - f.differentiate(p) * g.differentiate(q)
        });
        simplify(&Expr::sum(terms))
    }

    /// `D_t f = ∂f/∂t + F·∇f`, i.e. `∂f/∂t + {f, H}` on solutions.
    pub fn total_time_derivative(&self, f: &Expr) -> Expr {
        let vars = self.phase_vars();
        let along = vars.iter().zip(&self.flow).map(|(v, fv)| fv.clone() * f.differentiate(v));
        simplify(&Expr::sum(std::iter::once(f.differentiate(TIME)).chain(along)))
    }

    /// `∇f` over the phase variables.
    pub fn gradient(&self, f: &Expr) -> Vec<Expr> {
        self.phase_vars().iter().map(|v| f.differentiate(v)).collect()
    }

    /// The field `(∇_p K)·∇_q - (∇_q K)·∇_p` generated by `K`.
    pub fn hamiltonian_vector_field(&self, k: &Expr) -> PhaseVectorField {
        PhaseVectorField {
            phi: self.p.iter().map(|v| k.differentiate(v)).collect(),
            psi: self.q.iter().map(|v| simplify(&Expr::neg(k.differentiate(v)))).collect(),
            tau: Expr::zero(),
        }
    }

    /// `[X, Y]_a = (X·∇) Y_a - (Y·∇) X_a`; both fields must have `τ = 0`.
    pub fn lie_bracket(&self, x: &PhaseVectorField, y: &PhaseVectorField) -> Result<PhaseVectorField> {
        self.check_field(x)?;
        self.check_field(y)?;
        if !x.tau.is_zero() || !y.tau.is_zero() {
            return Err(Error::Unsupported("lie_bracket requires tau = 0 on both fields".into()));
        }
        let vars = self.phase_vars();
        let xs = x.components();
        let ys = y.components();
        let apply = |field: &[Expr], target: &Expr| {
            Expr::sum(vars.iter().zip(field).map(|(v, c)| c.clone() * target.differentiate(v)))
        };
        let comps: Vec<Expr> =
            (0..2 * self.n).map(|a| simplify(&(apply(&xs, &ys[a]) - apply(&ys, &xs[a])))).collect();
        Ok(PhaseVectorField::from_components(self.n, comps, Expr::zero()))
    }

    /// `φ̃ = φ - τ ∇_p H`, `ψ̃ = ψ + τ ∇_q H`, `τ̃ = 0`.
    pub fn evolutionary_form(&self, x: &PhaseVectorField) -> PhaseVectorField {
        if x.tau.is_zero() {
            return x.clone();
        }
        let comps = x
            .components()
            .into_iter()
            .zip(&self.flow)
            .map(|(c, f)| simplify(&(c - x.tau.clone() * f.clone())))
            .collect();
        PhaseVectorField::from_components(self.n, comps, Expr::zero())
    }

    /// Replaces velocity symbols `dq, dp` with the canonical right-hand sides.
    pub fn on_shell(&self, e: &Expr) -> Expr {
        let b: BTreeMap<String, Expr> =
            self.velocity_vars().into_iter().zip(self.flow.iter().cloned()).collect();
        e.substitute(&b)
    }

    pub(crate) fn check_field(&self, x: &PhaseVectorField) -> Result<()> {
        if x.phi.len() != self.n || x.psi.len() != self.n {
            return Err(Error::Dimension(format!(
                "vector field has {} phi and {} psi components, expected {}",
                x.phi.len(),
                x.psi.len(),
                self.n
            )));
        }
        Ok(())
    }
}

/// `X = φ_α ∂/∂q_α + ψ_α ∂/∂p_α + τ ∂/∂t`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseVectorField {
    pub phi: Vec<Expr>,
    pub psi: Vec<Expr>,
    pub tau: Expr,
}

impl PhaseVectorField {
    pub fn new(phi: Vec<Expr>, psi: Vec<Expr>, tau: Expr) -> Result<Self> {
        if phi.len() != psi.len() || phi.is_empty() {
            return Err(Error::Dimension(format!(
                "phi has {} components, psi has {}",
                phi.len(),
                psi.len()
            )));
        }
        Ok(PhaseVectorField { phi, psi, tau })
    }

    pub fn zero(n: usize) -> Self {
        PhaseVectorField { phi: vec![Expr::zero(); n], psi: vec![Expr::zero(); n], tau: Expr::zero() }
    }

    pub(crate) fn from_components(n: usize, comps: Vec<Expr>, tau: Expr) -> Self {
        let mut phi = comps;
        let psi = phi.split_off(n);
        PhaseVectorField { phi, psi, tau }
    }

    pub fn n(&self) -> usize {
        self.phi.len()
    }

    /// `Φ = (φ, ψ)`.
    pub fn components(&self) -> Vec<Expr> {
        self.phi.iter().chain(&self.psi).cloned().collect()
    }

    /// `X f` for a function of the phase variables and time.
    pub fn apply(&self, f: &Expr) -> Expr {
        let n = self.n();
        let vars = (0..n).map(q_name).chain((0..n).map(p_name));
        let terms = vars.zip(self.components()).map(|(v, c)| c * f.differentiate(&v));
        simplify(&Expr::sum(terms.chain(std::iter::once(self.tau.clone() * f.differentiate(TIME)))))
    }
}

/// `X₁ = K·X`; requires `τ = 0`.
pub fn scale_field(x: &PhaseVectorField, k: &Expr) -> Result<PhaseVectorField> {
    if !x.tau.is_zero() {
        return Err(Error::Unsupported("scale_field requires tau = 0".into()));
    }
    let scale = |v: &[Expr]| v.iter().map(|c| simplify(&(k.clone() * c.clone()))).collect();
    Ok(PhaseVectorField { phi: scale(&x.phi), psi: scale(&x.psi), tau: Expr::zero() })
}

/// A quantity expected to be conserved (or to obey a stated law).
#[derive(Debug, Clone, PartialEq)]
pub struct FirstIntegralCandidate {
    pub expr: Expr,
    pub expected_derivative: Option<Expr>,
}
