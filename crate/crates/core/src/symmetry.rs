//! Exact Lie point symmetries: the symmetry condition, the quantity `S`,
//! first integrals, generating functions and the three-case classification.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::{all_hold, simplify, Expr, NamedVerdict, Verifier, ZeroVerdict};
use crate::mechanics::{PhaseSystem, PhaseVectorField, TIME};

/// Componentwise verdicts of a (Λ-)symmetry condition.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SymmetryVerdict {
    pub components: Vec<NamedVerdict>,
    pub holds: bool,
}

impl SymmetryVerdict {
    pub(crate) fn from_components(components: Vec<NamedVerdict>) -> Self {
        let holds = all_hold(&components);
        SymmetryVerdict { components, holds }
    }

    pub fn combined(&self) -> ZeroVerdict {
        ZeroVerdict::combine(self.components.iter().map(|c| &c.verdict))
    }
}

/// Residuals of the explicit symmetry conditions for the `q` and `p`
/// components, with `D_t` expanded on solutions.
pub fn point_symmetry_residuals(sys: &PhaseSystem, x: &PhaseVectorField) -> Result<Vec<Expr>> {
    sys.check_field(x)?;
    let n = sys.n();
    let h = sys.hamiltonian();
    let dt_tau = sys.total_time_derivative(&x.tau);
    let mut out = Vec::with_capacity(2 * n);
    for a in 0..n {
        let pa = &sys.p()[a];
        let h_pa = h.differentiate(pa);
        let mut terms = vec![sys.total_time_derivative(&x.phi[a]), Expr::neg(h_pa.clone() * dt_tau.clone())];
        for b in 0..n {
            terms.push(Expr::neg(x.phi[b].clone() * h_pa.differentiate(&sys.q()[b])));
            terms.push(Expr::neg(x.psi[b].clone() * h_pa.differentiate(&sys.p()[b])));
        }
        terms.push(Expr::neg(x.tau.clone() * h_pa.differentiate(TIME)));
        out.push(simplify(&Expr::sum(terms)));
    }
    for a in 0..n {
        let qa = &sys.q()[a];
        let h_qa = h.differentiate(qa);
        let mut terms = vec![sys.total_time_derivative(&x.psi[a]), h_qa.clone() * dt_tau.clone()];
        for b in 0..n {
            terms.push(x.phi[b].clone() * h_qa.differentiate(&sys.q()[b]));
            terms.push(x.psi[b].clone() * h_qa.differentiate(&sys.p()[b]));
        }
        terms.push(x.tau.clone() * h_qa.differentiate(TIME));
        out.push(simplify(&Expr::sum(terms)));
    }
    Ok(out)
}

pub fn check_point_symmetry(sys: &PhaseSystem, x: &PhaseVectorField, v: &Verifier) -> Result<SymmetryVerdict> {
    let labels = component_labels(sys);
    let comps = point_symmetry_residuals(sys, x)?
        .iter()
        .zip(labels)
        .map(|(r, l)| v.named(l, r))
        .collect::<Result<Vec<_>>>()?;
    Ok(SymmetryVerdict::from_components(comps))
}

pub(crate) fn component_labels(sys: &PhaseSystem) -> Vec<String> {
    sys.phase_vars()
}

/// `S = Σ ∂φ_α/∂q_α + Σ ∂ψ_α/∂p_α - D_t τ + ∂τ/∂t`.
pub fn compute_s(sys: &PhaseSystem, x: &PhaseVectorField) -> Result<Expr> {
    sys.check_field(x)?;
    let n = sys.n();
    let div = (0..n)
        .map(|a| x.phi[a].differentiate(&sys.q()[a]))
        .chain((0..n).map(|a| x.psi[a].differentiate(&sys.p()[a])));
    let tail = [Expr::neg(sys.total_time_derivative(&x.tau)), x.tau.differentiate(TIME)];
    Ok(simplify(&Expr::sum(div.chain(tail))))
}

/// Zero verdict on the total time derivative of `f`.
pub fn check_first_integral(sys: &PhaseSystem, f: &Expr, v: &Verifier) -> Result<ZeroVerdict> {
    v.zero(&sys.total_time_derivative(f))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeneratingFunctionReport {
    /// Evolutionary form `Φ̃` of the field.
    #[serde(skip)]
    pub evolutionary: PhaseVectorField,
    /// Closedness conditions; empty when `τ` depends on phase variables and
    /// only the candidate check is meaningful.
    pub closedness: Vec<NamedVerdict>,
    /// `∇_p G - φ̃` and `∇_q G + ψ̃`, when a candidate was given.
    pub candidate: Option<Vec<NamedVerdict>>,
    /// Components of `∇(D_t G)`, evaluated only when everything above holds.
    pub dg: Option<Vec<NamedVerdict>>,
}

impl GeneratingFunctionReport {
    pub fn closed(&self) -> bool {
        all_hold(&self.closedness)
    }

    pub fn generated(&self) -> bool {
        self.closed() && self.candidate.as_deref().is_some_and(all_hold)
    }

    pub fn conserved(&self) -> bool {
        self.dg.as_deref().is_some_and(all_hold)
    }
}

fn depends_on_phase(sys: &PhaseSystem, e: &Expr, v: &Verifier) -> Result<bool> {
    for var in sys.phase_vars() {
        let d = e.differentiate(&var);
        if !d.is_zero() && !v.zero(&d)?.holds() {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Verdicts on `∇_p G = φ̃` and `∇_q G = -ψ̃`.
pub fn candidate_verdicts(
    sys: &PhaseSystem,
    tilde: &PhaseVectorField,
    g: &Expr,
    v: &Verifier,
) -> Result<Vec<NamedVerdict>> {
    let n = sys.n();
    let mut out = Vec::with_capacity(2 * n);
    for a in 0..n {
        let pa = &sys.p()[a];
        out.push(v.equal(format!("dG/d{pa}"), &g.differentiate(pa), &tilde.phi[a])?);
    }
    for a in 0..n {
        let qa = &sys.q()[a];
        out.push(v.equal(format!("dG/d{qa}"), &g.differentiate(qa), &Expr::neg(tilde.psi[a].clone()))?);
    }
    Ok(out)
}

/// Verdicts on the components of `∇(D_t G)`.
pub fn dg_verdicts(sys: &PhaseSystem, g: &Expr, v: &Verifier) -> Result<Vec<NamedVerdict>> {
    let gdot = sys.total_time_derivative(g);
    sys.phase_vars()
        .iter()
        .map(|u| v.named(format!("d(Gdot)/d{u}"), &gdot.differentiate(u)))
        .collect()
}

pub fn generating_function_test(
    sys: &PhaseSystem,
    x: &PhaseVectorField,
    v: &Verifier,
    candidate: Option<&Expr>,
) -> Result<GeneratingFunctionReport> {
    sys.check_field(x)?;
    let tilde = sys.evolutionary_form(x);
    let n = sys.n();
    let mut closedness = Vec::new();
    if depends_on_phase(sys, &x.tau, v)? {
        if candidate.is_none() {
            return Err(Error::Unsupported(
                "tau depends on phase variables; closedness is only checked against a candidate G".into(),
            ));
        }
    } else {
        let (q, p) = (sys.q(), sys.p());
        for a in 0..n {
            for b in (a + 1)..n {
                closedness.push(v.equal(
                    format!("dphi{}/d{} = dphi{}/d{}", a + 1, p[b], b + 1, p[a]),
                    &x.phi[a].differentiate(&p[b]),
                    &x.phi[b].differentiate(&p[a]),
                )?);
                closedness.push(v.equal(
                    format!("dpsi{}/d{} = dpsi{}/d{}", a + 1, q[b], b + 1, q[a]),
                    &x.psi[a].differentiate(&q[b]),
                    &x.psi[b].differentiate(&q[a]),
                )?);
            }
        }
        for a in 0..n {
            for b in 0..n {
                closedness.push(v.equal(
                    format!("dphi{}/d{} = -dpsi{}/d{}", a + 1, q[b], b + 1, p[a]),
                    &x.phi[a].differentiate(&q[b]),
                    &Expr::neg(x.psi[b].differentiate(&p[a])),
                )?);
            }
        }
    }
    let candidate_checks = candidate.map(|g| candidate_verdicts(sys, &tilde, g, v)).transpose()?;
    let mut report = GeneratingFunctionReport {
        evolutionary: tilde,
        closedness,
        candidate: candidate_checks,
        dg: None,
    };
    if let (true, Some(g)) = (report.generated(), candidate) {
        report.dg = Some(dg_verdicts(sys, g, v)?);
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SymmetryCase {
    /// Case (i): a verified generating function `G` with `∇(D_t G) = 0`.
    GeneratingFunction,
    /// Case (ii): `S` is constant and no generating function was verified.
    ConstantS,
    /// Case (iii): `S` is a non-constant first integral.
    NonconstantS,
}

impl SymmetryCase {
    pub fn label(self) -> &'static str {
        match self {
            SymmetryCase::GeneratingFunction => "case (i)",
            SymmetryCase::ConstantS => "case (ii)",
            SymmetryCase::NonconstantS => "case (iii)",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseClassification {
    pub case: SymmetryCase,
    #[serde(serialize_with = "crate::report::ser_expr")]
    pub s: Expr,
    #[serde(serialize_with = "crate::report::ser_opt_expr")]
    pub g: Option<Expr>,
    /// The verdicts backing the classification: `∇(D_t G)` for case (i),
    /// the derivatives of `S` for case (ii), `D_t S` for case (iii).
    pub evidence: Vec<NamedVerdict>,
}

/// Verdicts on every phase derivative and the time derivative of `s`.
fn constancy(sys: &PhaseSystem, s: &Expr, v: &Verifier) -> Result<Vec<NamedVerdict>> {
    sys.phase_vars()
        .into_iter()
        .chain(std::iter::once(TIME.to_string()))
        .map(|u| v.named(format!("dS/d{u}"), &s.differentiate(&u)))
        .collect()
}

pub fn classify_symmetry_case(
    sys: &PhaseSystem,
    x: &PhaseVectorField,
    v: &Verifier,
    candidate: Option<&Expr>,
) -> Result<CaseClassification> {
    if !check_point_symmetry(sys, x, v)?.holds {
        return Err(Error::Precondition("the vector field is not a symmetry".into()));
    }
    let s = compute_s(sys, x)?;
    let gf = match generating_function_test(sys, x, v, candidate) {
        Ok(r) => Some(r),
        Err(Error::Unsupported(_)) => None,
        Err(e) => return Err(e),
    };
    if let Some(gf) = gf.filter(|r| r.generated() && r.conserved()) {
        return Ok(CaseClassification {
            case: SymmetryCase::GeneratingFunction,
            s,
            g: candidate.cloned(),
            evidence: gf.dg.unwrap_or_default(),
        });
    }
    let constant = constancy(sys, &s, v)?;
    if all_hold(&constant) {
        return Ok(CaseClassification { case: SymmetryCase::ConstantS, s, g: None, evidence: constant });
    }
    let conserved = v.named("D_t S", &sys.total_time_derivative(&s))?;
    Ok(CaseClassification { case: SymmetryCase::NonconstantS, s, g: None, evidence: vec![conserved] })
}
