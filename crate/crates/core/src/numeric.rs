//! Fixed-step classical Runge-Kutta integration, monitoring of expressions
//! along trajectories and comparison with scalar laws.
//!
//! The integrator is deliberately not symplectic: the quantities checked
//! here are mostly not conserved, and a fixed grid keeps every run exactly
//! reproducible.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::{Compiled, Expr};
use crate::lagrangian::LagrangianSystem;
use crate::mechanics::{check_vars, PhaseSystem, TIME};

/// Hessian condition estimate above which Euler-Lagrange integration stops.
pub const CONDITION_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepConfig {
    pub t0: f64,
    pub t1: f64,
    pub step: f64,
    /// Integration stops once any state magnitude exceeds this.
    pub safety_box: f64,
}

impl Default for StepConfig {
    fn default() -> Self {
        StepConfig { t0: 0.0, t1: 1.0, step: 1e-3, safety_box: 1e6 }
    }
}

impl StepConfig {
    pub fn new(t0: f64, t1: f64, step: f64) -> Self {
        StepConfig { t0, t1, step, ..Default::default() }
    }

    fn steps(&self) -> Result<usize> {
        let ok = self.step > 0.0 && self.t1 > self.t0 && self.step.is_finite() && self.t1.is_finite();
        if !ok {
            return Err(Error::Numeric(format!(
                "need step > 0 and t1 > t0, got step {} on [{}, {}]",
                self.step, self.t0, self.t1
            )));
        }
        Ok((((self.t1 - self.t0) / self.step).round() as usize).max(1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub system: String,
    pub initial: Vec<f64>,
    pub order: u32,
}

/// States on the grid `t0 + k·step`, `k = 0..len`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub t0: f64,
    pub step: f64,
    pub names: Vec<String>,
    pub states: Vec<Vec<f64>>,
    pub provenance: Provenance,
    /// Why integration stopped early, if it did.
    pub diagnostic: Option<String>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.step
    }

    pub fn last(&self) -> &[f64] {
        self.states.last().expect("trajectories have at least two points")
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.names.iter().position(|n| n == name)?;
        Some(self.states.iter().map(|s| s[i]).collect())
    }

    pub fn is_truncated(&self) -> bool {
        self.diagnostic.is_some()
    }

    /// CSV with header `t,<names>` and 17 significant digits per value.
    pub fn to_csv(&self) -> String {
        self.to_csv_with(&[], &[])
    }

    /// CSV with extra monitored columns appended.
    pub fn to_csv_with(&self, extra_names: &[String], extra: &[Series]) -> String {
        let mut out = String::from(TIME);
        for n in self.names.iter().chain(extra_names) {
            out.push(',');
            out.push_str(n);
        }
        out.push('\n');
        for (k, row) in self.states.iter().enumerate() {
            let _ = write!(out, "{:.16e}", self.time(k));
            for x in row {
                let _ = write!(out, ",{x:.16e}");
            }
            for s in extra {
                match s.values.get(k) {
                    Some(v) => {
                        let _ = write!(out, ",{v:.16e}");
                    }
                    None => out.push_str(",NaN"),
                }
            }
            out.push('\n');
        }
        out
    }
}

type Rhs<'a> = dyn FnMut(f64, &[f64]) -> std::result::Result<Vec<f64>, String> + 'a;

fn axpy(y: &[f64], h: f64, k: &[f64]) -> Vec<f64> {
    y.iter().zip(k).map(|(a, b)| a + h * b).collect()
}

/// Classical fourth-order Runge-Kutta on a uniform grid. Stops early when
/// a stage fails or the state leaves the safety box.
fn rk4(rhs: &mut Rhs<'_>, y0: &[f64], cfg: &StepConfig) -> Result<(Vec<Vec<f64>>, Option<String>)> {
    let n = cfg.steps()?;
    if y0.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numeric("initial state is not finite".into()));
    }
    let h = cfg.step;
    let mut states = Vec::with_capacity(n + 1);
    states.push(y0.to_vec());
    let mut y = y0.to_vec();
    for k in 0..n {
        let t = cfg.t0 + k as f64 * h;
        let step = (|| {
            let k1 = rhs(t, &y)?;
            let k2 = rhs(t + h / 2.0, &axpy(&y, h / 2.0, &k1))?;
            let k3 = rhs(t + h / 2.0, &axpy(&y, h / 2.0, &k2))?;
            let k4 = rhs(t + h, &axpy(&y, h, &k3))?;
            Ok::<_, String>(
                (0..y.len()).map(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])).collect::<Vec<_>>(),
            )
        })();
        let next = match step {
            Ok(v) => v,
            Err(msg) => return finish(states, format!("stopped at t = {t}: {msg}")),
        };
        if next.iter().any(|x| !x.is_finite() || x.abs() > cfg.safety_box) {
            return finish(states, format!("state left the safety box after t = {t}"));
        }
        y = next;
        states.push(y.clone());
    }
    Ok((states, None))
}

fn finish(states: Vec<Vec<f64>>, diagnostic: String) -> Result<(Vec<Vec<f64>>, Option<String>)> {
    if states.len() < 2 {
        return Err(Error::Numeric(diagnostic));
    }
    Ok((states, Some(diagnostic)))
}

fn compile_all(exprs: &[Expr], vars: &[String]) -> Result<Vec<Compiled>> {
    exprs.iter().map(|e| Ok(Compiled::new(e, vars)?)).collect()
}

fn with_time(names: &[String]) -> Vec<String> {
    std::iter::once(TIME.to_string()).chain(names.iter().cloned()).collect()
}

fn eval_all(fs: &[Compiled], t: f64, y: &[f64]) -> std::result::Result<Vec<f64>, String> {
    let mut point = Vec::with_capacity(y.len() + 1);
    point.push(t);
    point.extend_from_slice(y);
    fs.iter().map(|f| f.eval(&point).map_err(|e| e.to_string())).collect()
}

/// Integrates `ẏ = rhs(t, y)` where `rhs` are expressions in `t` and `names`.
pub fn integrate_system(
    label: &str,
    names: &[String],
    rhs: &[Expr],
    y0: &[f64],
    cfg: &StepConfig,
) -> Result<Trajectory> {
    if rhs.len() != names.len() || y0.len() != names.len() {
        return Err(Error::Dimension(format!(
            "{} state names, {} right-hand sides, {} initial values",
            names.len(),
            rhs.len(),
            y0.len()
        )));
    }
    let vars = with_time(names);
    let allowed: BTreeSet<String> = vars.iter().cloned().collect();
    for e in rhs {
        check_vars(e, &allowed, "an integrated right-hand side")?;
    }
    let fs = compile_all(rhs, &vars)?;
    let (states, diagnostic) = rk4(&mut |t, y| eval_all(&fs, t, y), y0, cfg)?;
    Ok(Trajectory {
        t0: cfg.t0,
        step: cfg.step,
        names: names.to_vec(),
        states,
        provenance: Provenance { system: label.into(), initial: y0.to_vec(), order: 4 },
        diagnostic,
    })
}

/// Integrates the canonical equations from `u0 = (q, p)`.
pub fn integrate_hamiltonian(sys: &PhaseSystem, u0: &[f64], cfg: &StepConfig) -> Result<Trajectory> {
    let label = format!("H = {}", sys.hamiltonian());
    integrate_system(&label, &sys.phase_vars(), sys.canonical_equations(), u0, cfg)
}

/// Integrates the Euler-Lagrange equations from `(q0, dq0)`; the state is
/// `(q, dq)`. Accelerations come from a dense solve with the velocity
/// Hessian at every stage.
pub fn integrate_euler_lagrange(lag: &LagrangianSystem, q0: &[f64], dq0: &[f64], cfg: &StepConfig) -> Result<Trajectory> {
    let n = lag.n();
    if q0.len() != n || dq0.len() != n {
        return Err(Error::Dimension(format!("expected {n} positions and {n} velocities")));
    }
    let names: Vec<String> = lag.q().iter().chain(lag.dq()).cloned().collect();
    let vars = with_time(&names);
    let parts = lag.acceleration_system();
    let hess = compile_all(&parts.hessian, &vars)?;
    let force = compile_all(&parts.force, &vars)?;
    let mut rhs = |t: f64, y: &[f64]| -> std::result::Result<Vec<f64>, String> {
        let a = DMatrix::from_row_slice(n, n, &eval_all(&hess, t, y)?);
        let b = DVector::from_vec(eval_all(&force, t, y)?);
        let sv = a.singular_values();
        let (hi, lo) = (sv.max(), sv.min());
        if !(lo > 0.0) || hi / lo > CONDITION_LIMIT {
            return Err(format!("velocity Hessian is ill-conditioned (estimate {:e})", hi / lo));
        }
        let acc = a.lu().solve(&b).ok_or("velocity Hessian is singular")?;
        Ok(y[n..].iter().copied().chain(acc.iter().copied()).collect())
    };
    let y0: Vec<f64> = q0.iter().chain(dq0).copied().collect();
    let (states, diagnostic) = rk4(&mut rhs, &y0, cfg)?;
    Ok(Trajectory {
        t0: cfg.t0,
        step: cfg.step,
        names,
        states,
        provenance: Provenance { system: format!("L = {}", lag.lagrangian()), initial: y0, order: 4 },
        diagnostic,
    })
}

/// Values of one expression along a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Series {
    pub t0: f64,
    pub step: f64,
    pub values: Vec<f64>,
    /// First grid index where evaluation failed; values stop there.
    pub truncated_at: Option<usize>,
}

impl Series {
    pub fn max_deviation_from(&self, other: &[f64]) -> f64 {
        self.values.iter().zip(other).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Largest distance from the initial value.
    pub fn drift(&self) -> f64 {
        let v0 = self.values.first().copied().unwrap_or(0.0);
        self.values.iter().fold(0.0, |m, v| m.max((v - v0).abs()))
    }
}

pub fn monitor(traj: &Trajectory, exprs: &[Expr]) -> Result<Vec<Series>> {
    let vars = with_time(&traj.names);
    let allowed: BTreeSet<String> = vars.iter().cloned().collect();
    exprs
        .iter()
        .map(|e| {
            check_vars(e, &allowed, "a monitored expression")?;
            let f = Compiled::new(e, &vars)?;
            let mut values = Vec::with_capacity(traj.len());
            let mut truncated_at = None;
            for (k, row) in traj.states.iter().enumerate() {
                match eval_all(std::slice::from_ref(&f), traj.time(k), row) {
                    Ok(v) => values.push(v[0]),
                    Err(_) => {
                        truncated_at = Some(k);
                        break;
                    }
                }
            }
            Ok(Series { t0: traj.t0, step: traj.step, values, truncated_at })
        })
        .collect()
}

/// Integrates `Ġ = γ(t, G)` on the grid of `series` and returns the largest
/// deviation between the two.
pub fn compare_with_scalar_ode(series: &Series, gamma: &Expr, g0: f64, step: f64) -> Result<f64> {
    if (step - series.step).abs() > 1e-12 * series.step.abs() {
        return Err(Error::Numeric(format!("grid mismatch: series step {} vs {}", series.step, step)));
    }
    if series.values.len() < 2 {
        return Err(Error::Numeric("series has fewer than two points".into()));
    }
    let cfg = StepConfig::new(series.t0, series.t0 + (series.values.len() - 1) as f64 * step, step);
    let scalar = integrate_system("scalar law", &["G".to_string()], std::slice::from_ref(gamma), &[g0], &cfg)?;
    if let Some(d) = scalar.diagnostic {
        return Err(Error::Numeric(format!("scalar law: {d}")));
    }
    let solution: Vec<f64> = scalar.states.iter().map(|s| s[0]).collect();
    Ok(series.max_deviation_from(&solution))
}
