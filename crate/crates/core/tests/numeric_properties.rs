mod common;

use std::f64::consts::PI;

use common::p;
use lamsym::numeric::{compare_with_scalar_ode, integrate_euler_lagrange, integrate_hamiltonian, monitor, StepConfig};
use lamsym::{LagrangianSystem, PhaseSystem};

fn oscillator_error(steps: usize) -> f64 {
    let sys = PhaseSystem::new(1, p("(p1^2+q1^2)/2")).unwrap();
    let cfg = StepConfig::new(0.0, 2.0 * PI, 2.0 * PI / steps as f64);
    let tr = integrate_hamiltonian(&sys, &[1.0, 0.0], &cfg).unwrap();
    assert_eq!(tr.len(), steps + 1);
    let end = tr.last();
    ((end[0] - 1.0).powi(2) + end[1].powi(2)).sqrt()
}

#[test]
fn rk4_has_fourth_order_convergence_over_one_period() {
    for n in [40, 80] {
        let order = (oscillator_error(n) / oscillator_error(2 * n)).log2();
        assert!(order >= 3.8, "order {order} at {n} steps");
    }
}

#[test]
fn euler_lagrange_and_hamiltonian_flows_agree_for_velocity_dependent_lambda_example() {
    let lag = LagrangianSystem::new(1, p("(dq1/q1 + 1)^2*exp(-2*q1)/2")).unwrap();
    let sys = PhaseSystem::new(1, p("q1^2*p1^2*exp(2*q1)/2 - q1*p1")).unwrap();
    let cfg = StepConfig::new(0.0, 1.0, 1e-3);
    for (q0, dq0) in [(0.5, 0.3), (0.8, -0.2), (1.0, 0.1)] {
        let el = integrate_euler_lagrange(&lag, &[q0], &[dq0], &cfg).unwrap();
        assert!(el.diagnostic.is_none());
        let momentum = monitor(&el, lag.conjugate_momenta()).unwrap().remove(0);
        let hf = integrate_hamiltonian(&sys, &[q0, momentum.values[0]], &cfg).unwrap();
        for (k, (a, b)) in el.states.iter().zip(&hf.states).enumerate() {
            assert!((a[0] - b[0]).abs() < 1e-8, "q at step {k}");
            assert!((momentum.values[k] - b[1]).abs() < 1e-8, "p at step {k}");
        }
    }
}

/// The G of the non-separable example obeys its true law pointwise but is
/// not described by a separated scalar law.
#[test]
fn non_separable_g_rejects_a_scalar_law() {
    let sys = PhaseSystem::new(2, p("q1^2*p1^2*log(q1)/2 + q2^2*p2^2*log(q2)/2 + log(q1/q2)*(q1*p1 + q2*p2)")).unwrap();
    let cfg = StepConfig::new(0.0, 1.0, 1e-3);
    let tr = integrate_hamiltonian(&sys, &[0.8, 1.1, 0.4, -0.2], &cfg).unwrap();
    assert!(tr.diagnostic.is_none());
    let s = monitor(&tr, &[p("q1*p1 + q2*p2"), p("-(q1^2*p1^2 + q2^2*p2^2)/2")]).unwrap();
    let (g, law) = (&s[0].values, &s[1].values);
    let h = cfg.step;
    for k in 2..g.len() - 2 {
        let d = (-g[k + 2] + 8.0 * g[k + 1] - 8.0 * g[k - 1] + g[k - 2]) / (12.0 * h);
        assert!((d - law[k]).abs() < 1e-6, "pointwise law at step {k}");
    }
    let wrong = compare_with_scalar_ode(&s[0], &p("-G^2/2"), g[0], h).unwrap();
    assert!(wrong > 1e-3, "deviation {wrong}");
}

#[test]
fn time_dependent_integral_is_constant_along_the_flow() {
    let sys = PhaseSystem::new(2, p("-(q1*p2 + q2*p1) + (p1 - p2)^2/2")).unwrap();
    let cfg = StepConfig::new(0.0, 1.0, 1e-3);
    let tr = integrate_hamiltonian(&sys, &[0.3, 0.5, 0.2, 0.1], &cfg).unwrap();
    let s = monitor(&tr, &[p("(q1 + q2)*exp(t)")]).unwrap();
    assert!(s[0].drift() < 1e-6);
    let g = monitor(&tr, &[p("-(q1 + q2)")]).unwrap().remove(0);
    let dev = compare_with_scalar_ode(&g, &p("-G"), g.values[0], cfg.step).unwrap();
    assert!(dev < 1e-9, "{dev}");
}
