//! One line per acceptance criterion. Runs without the libtest harness so
//! the lines are printed even when everything passes.

mod common;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};

use common::p;
use lamsym::expr::ZeroVerdict;
use lamsym::lagrangian::{
    check_lagrangian_lambda_invariance, check_lala_and_corollary3, check_noether_lambda, extend_lambda,
    extend_vector_field, extend_vector_field_velocity_dependent, partial_reduction_check, verify_legendre,
    NoetherConfig, PartialInvariants,
};
use lamsym::lambda::{
    check_lambda_constant_g, check_lambda_constant_s, check_lambda_symmetry, check_separated_g, lambda_phi,
    reduced_system, scalar_lambda_reduction, verify_chart, verify_time_dependent_integral,
};
use lamsym::numeric::{integrate_hamiltonian, monitor, StepConfig};
use lamsym::symmetry::{
    check_first_integral, check_point_symmetry, classify_symmetry_case, compute_s, generating_function_test,
    SymmetryCase,
};
use lamsym::{
    corpus, simplify, ConfigVectorField, Expr, LagrangianSystem, LambdaMatrix, PhaseSystem, PhaseVectorField, Problem,
    RunConfig, Verifier, ZeroTestConfig,
};

fn load(name: &str) -> Problem {
    corpus::problem(name).unwrap().unwrap()
}

fn verifier(pb: &Problem) -> Verifier {
    Verifier::new(pb.domain.clone(), ZeroTestConfig::default())
}

fn hamiltonian(pb: &Problem) -> (PhaseSystem, PhaseVectorField) {
    let sys = PhaseSystem::new(pb.n, pb.hamiltonian.clone().unwrap()).unwrap();
    let f = pb.field.as_ref().unwrap();
    let x = PhaseVectorField::new(f.phi.clone(), f.psi.clone().unwrap(), f.tau.clone()).unwrap();
    (sys, x)
}

fn lagrangian(pb: &Problem) -> (LagrangianSystem, ConfigVectorField, LambdaMatrix) {
    let lag = LagrangianSystem::new(pb.n, pb.lagrangian.clone().unwrap()).unwrap();
    let x = ConfigVectorField::new(pb.field.as_ref().unwrap().phi.clone()).unwrap();
    (lag, x, pb.lambda.clone().unwrap())
}

/// The Hamiltonian side of a Lagrangian problem, built from the supplied H
/// and the extended field given in the problem file.
fn hamiltonian_side(pb: &Problem) -> (PhaseSystem, PhaseVectorField) {
    let sys = PhaseSystem::new(pb.n, pb.candidates.h_for_legendre.clone().unwrap()).unwrap();
    let f = pb.field.as_ref().unwrap();
    (sys, PhaseVectorField::new(f.phi.clone(), f.psi.clone().unwrap(), Expr::zero()).unwrap())
}

fn equal(v: &Verifier, what: &str, a: &Expr, b: &Expr) {
    let r = v.equal(what, a, b).unwrap();
    assert!(r.holds(), "{what}: {a} vs {b} ({:?})", r.verdict);
}

fn proven_equal(v: &Verifier, what: &str, a: &Expr, b: &Expr) {
    assert_eq!(v.equal(what, a, b).unwrap().verdict, ZeroVerdict::ProvenZero, "{what}: {a} vs {b}");
}

fn equal_all(v: &Verifier, what: &str, a: &[Expr], b: &[Expr]) {
    assert_eq!(a.len(), b.len(), "{what}: length");
    for (k, (x, y)) in a.iter().zip(b).enumerate() {
        equal(v, &format!("{what}[{}]", k + 1), x, y);
    }
}

fn drift(sys: &PhaseSystem, ic: &[f64], e: &Expr, t1: f64) -> f64 {
    let tr = integrate_hamiltonian(sys, ic, &StepConfig::new(0.0, t1, 1e-3)).unwrap();
    assert!(tr.diagnostic.is_none(), "{:?}", tr.diagnostic);
    monitor(&tr, std::slice::from_ref(e)).unwrap().remove(0).drift()
}

fn example1() {
    let scaling = load("example1_scaling");
    let (sys, x) = hamiltonian(&scaling);
    let v = verifier(&scaling);
    proven_equal(&v, "S", &compute_s(&sys, &x).unwrap(), &Expr::int(2));
    assert_eq!(classify_symmetry_case(&sys, &x, &v, None).unwrap().case, SymmetryCase::ConstantS);

    let n2 = load("example1_n2");
    let (sys, x) = hamiltonian(&n2);
    assert!(check_point_symmetry(&sys, &x, &v).unwrap().holds);
    proven_equal(&v, "S", &compute_s(&sys, &x).unwrap(), &Expr::zero());
    assert!(!generating_function_test(&sys, &x, &v, None).unwrap().closed());
    assert_eq!(classify_symmetry_case(&sys, &x, &v, None).unwrap().case, SymmetryCase::ConstantS);

    let x1 = load("example1_x1");
    let (sys, x) = hamiltonian(&x1);
    let s = compute_s(&sys, &x).unwrap();
    equal(&v, "S1 - 8H", &s, &(Expr::int(8) * sys.hamiltonian().clone()));
    assert!(check_first_integral(&sys, &s, &v).unwrap().holds());
    assert_eq!(classify_symmetry_case(&sys, &x, &v, None).unwrap().case, SymmetryCase::NonconstantS);
}

fn example2() {
    let pb = load("example2");
    let (sys, x) = hamiltonian(&pb);
    let lam = pb.lambda.clone().unwrap();
    let v = verifier(&pb);
    assert!(check_lambda_symmetry(&sys, &x, &lam, &v).unwrap().holds);
    let g = p("-(q1 + q2)");
    let rep = check_lambda_constant_g(&sys, &x, &lam, &g, &v).unwrap();
    assert!(rep.holds());
    equal(&v, "Gdot + G", &rep.g_dot, &Expr::neg(g));
    assert_eq!(rep.lambda, Some(Expr::one()));
    let chart = pb.chart.clone().unwrap();
    assert!(verify_chart(&sys, &x, &chart, &v).unwrap().holds());
    let red = reduced_system(&sys, &x, &lam, &chart, &v).unwrap();
    assert!(red.holds());
    equal_all(&v, "reduced", &red.rhs, &[p("w1 + 2*w2"), p("-w2"), p("-w3"), p("z")]);
    let gamma = p("(q1 + q2)*exp(t)");
    assert!(verify_time_dependent_integral(&sys, &gamma, &v).unwrap().holds());
    for ic in &pb.candidates.initial_conditions {
        let d = drift(&sys, ic, &gamma, 1.0);
        assert!(d < 1e-6, "drift {d}");
    }
}

fn example3() {
    let pb = load("example3");
    let (sys, x) = hamiltonian(&pb);
    let lam = pb.lambda.clone().unwrap();
    let v = verifier(&pb);
    assert!(check_lambda_symmetry(&sys, &x, &lam, &v).unwrap().holds);
    assert!(scalar_lambda_reduction(&sys, &lam, &x, &v).unwrap().is_none());
    let chart = pb.chart.clone().unwrap();
    assert!(verify_chart(&sys, &x, &chart, &v).unwrap().holds());
    let g_dot = sys.total_time_derivative(&p("q1*p1 + q2*p2"));
    let in_chart = chart.pull_back(&g_dot, "Gdot").unwrap();
    let r = v.named("Gdot + (w1^2 + w2^2)/2", &(in_chart + p("(w1^2 + w2^2)/2"))).unwrap();
    assert!(r.holds(), "{r:?}");
    let red = reduced_system(&sys, &x, &lam, &chart, &v).unwrap();
    assert!(red.holds());
    assert_eq!(red.z_free[..3], [true, true, false]);
    assert!(!v.zero(&red.m[2]).unwrap().holds());
}

fn example4() {
    let pb = load("example4");
    let (sys, x) = hamiltonian(&pb);
    let lam = pb.lambda.clone().unwrap();
    let v = verifier(&pb);
    assert!(check_lambda_symmetry(&sys, &x, &lam, &v).unwrap().holds);
    let rep = check_lambda_constant_s(&sys, &x, &lam, &v).unwrap();
    assert!(rep.verdict.holds());
    equal(&v, "Sdot + 2 eps q p", &rep.s_dot, &p("-q1*p1/5"));
    let lp = lambda_phi(&sys, &x, &lam).unwrap();
    let div = Expr::sum(sys.phase_vars().iter().zip(&lp).map(|(u, e)| e.differentiate(u)));
    equal(&v, "Sdot + div(Lambda Phi)", &rep.s_dot, &Expr::neg(div));

    let exact = load("example4_exact");
    let (sys, x) = hamiltonian(&exact);
    assert!(exact.lambda.clone().unwrap().is_zero());
    assert!(check_point_symmetry(&sys, &x, &v).unwrap().holds);
    let s = compute_s(&sys, &x).unwrap();
    proven_equal(&v, "S", &s, &p("2*q1*p1"));
    assert!(check_first_integral(&sys, &s, &v).unwrap().holds());
    let d = drift(&sys, &[0.5, 0.8], &s, 1.0);
    assert!(d < 1e-8, "drift {d}");
}

fn example5() {
    let pb = load("example5");
    let (lag, x, lam) = lagrangian(&pb);
    let v = verifier(&pb);
    assert!(check_lagrangian_lambda_invariance(&lag, &x, &lam, &v).unwrap().holds());
    let ext = extend_vector_field(&x);
    equal_all(&v, "phi", &ext.field.phi, &[p("q1"), p("1")]);
    equal_all(&v, "psi", &ext.field.psi, &[p("-p1"), p("0")]);
    let big = extend_lambda(&x, &lam, None, &v).unwrap().lambda;
    let want = [["q1", "0", "0", "0"], ["0", "q1", "0", "0"], ["-p1", "-p2", "q1", "0"], ["0", "0", "0", "0"]];
    for (i, row) in want.iter().enumerate() {
        for (j, e) in row.iter().enumerate() {
            equal(&v, &format!("Lambda[{i}][{j}]"), big.entry(i, j), &p(e));
        }
    }
    let h = pb.candidates.h_for_legendre.clone().unwrap();
    let vm = pb.candidates.velocity_map.clone().unwrap();
    let leg = verify_legendre(&lag, &vm, &h, &v).unwrap();
    assert!(leg.holds(), "{leg:?}");
    let sys = PhaseSystem::new(2, h).unwrap();
    let displayed = [
        "q1^2*p1 + q1^2 + q1*p2",
        "p2/q1^2*exp(2*q2) + q1*p1 + q1 + p2",
        "-q1*p1^2 - 2*q1*p1 + p2^2/q1^3*exp(2*q2) - p1*p2 - p2 + exp(-q2)",
        "-p2^2/q1^2*exp(2*q2) - q1*exp(-q2)",
    ];
    equal_all(&v, "canonical", sys.canonical_equations(), &displayed.map(p));
    let g = p("q1*p1 + p2");
    let rep = check_lambda_constant_g(&sys, &ext.field, &big, &g, &v).unwrap();
    assert!(rep.holds());
    equal(&v, "Gdot + q1 G", &rep.g_dot, &(Expr::neg(p("q1")) * g));
    let ics = &pb.candidates.initial_conditions;
    assert_eq!(ics.len(), 3);
    let noether = check_noether_lambda(&lag, &x, &lam, ics, &NoetherConfig::default()).unwrap();
    assert!(noether.max_residual < 1e-5, "{noether:?}");
}

fn particular(pairs: &[(&str, &str)]) -> BTreeMap<String, Expr> {
    pairs.iter().map(|(k, e)| (k.to_string(), p(e))).collect()
}

fn example6() {
    let pb = load("example6");
    let (lag, x, lam) = lagrangian(&pb);
    let v = verifier(&pb);
    assert!(check_lagrangian_lambda_invariance(&lag, &x, &lam, &v).unwrap().holds());
    let lala = check_lala_and_corollary3(&x, &lam, &v).unwrap();
    assert!(lala.holds());
    assert_eq!(lala.constant, Some(Expr::one()));
    equal_all(&v, "Lambda Phi - Phi", &lam.apply(&x.phi).unwrap(), &x.phi);
    let printed_h = p("q1^2*p1^2/2 + q2^2*p2^2 + (q1*p1 - q2*p2)*log(q1) - q1*q2*p1*p2");
    let leg = verify_legendre(&lag, pb.candidates.velocity_map.as_ref().unwrap(), &printed_h, &v).unwrap();
    assert!(leg.holds(), "{leg:?}");

    let (sys, xh) = hamiltonian_side(&pb);
    let big = pb.lambda_hamiltonian.clone().unwrap();
    assert!(check_lambda_symmetry(&sys, &xh, &big, &v).unwrap().holds);
    let chart = pb.chart.clone().unwrap();
    assert!(verify_chart(&sys, &xh, &chart, &v).unwrap().holds());
    let red = reduced_system(&sys, &xh, &big, &chart, &v).unwrap();
    assert!(red.holds());
    for (k, e) in [(0, "w1*w3"), (1, "w3 - w2"), (3, "z + w2 - w3")] {
        proven_equal(&v, &format!("reduced[{}]", k + 1), &red.rhs[k], &p(e));
    }
    // G = w2 - w3 in this chart
    let g_dot = red.rhs[1].clone() - red.rhs[2].clone();
    proven_equal(&v, "Gdot + G", &simplify(&g_dot), &p("w3 - w2"));
    let sep = check_separated_g(&sys, &xh, &big, pb.candidates.separated_chart.as_ref().unwrap(), 3, &v).unwrap();
    equal(&v, "gamma", sep.gamma.as_ref().unwrap(), &p("-G"));

    let inv = PartialInvariants { eta: vec![p("q1*q2")], theta: p("dq1/q1 - log(q1)") };
    let rep = partial_reduction_check(
        &lag,
        &x,
        &lam,
        &inv,
        &p("theta^2/2 + deta1^2/(2*eta1^2)"),
        &particular(&[("dq1", "q1*log(q1)")]),
        &pb.candidates.initial_conditions,
        &NoetherConfig::default(),
        &v,
    )
    .unwrap();
    assert!(rep.holds(), "{rep:?}");
    assert!(rep.max_deviation() < 1e-5, "{}", rep.max_deviation());
}

fn example7() {
    let pb = load("example7");
    let (lag, x, lam) = lagrangian(&pb);
    let v = verifier(&pb);
    assert!(lam.is_velocity_dependent());
    assert!(check_lagrangian_lambda_invariance(&lag, &x, &lam, &v).unwrap().holds());
    let vm = pb.candidates.velocity_map.clone().unwrap();
    let xh = extend_vector_field_velocity_dependent(&lag, &x, &lam, Some(&vm)).unwrap();
    equal_all(&v, "psi", &xh.psi, &[p("-q1*p1 - p1")]);

    let sys = PhaseSystem::new(1, pb.candidates.h_for_legendre.clone().unwrap()).unwrap();
    assert!(verify_legendre(&lag, &vm, sys.hamiltonian(), &v).unwrap().holds());
    assert!(!generating_function_test(&sys, &xh, &v, None).unwrap().closed());
    let big = pb.lambda_hamiltonian.clone().unwrap();
    assert!(check_lambda_symmetry(&sys, &xh, &big, &v).unwrap().holds);
    let rep = check_lambda_constant_s(&sys, &xh, &big, &v).unwrap();
    assert!(rep.verdict.holds());
    equal(&v, "S + q1", &rep.s, &p("-q1"));

    let display = pb.candidates.reduced_expected.as_ref().unwrap().chart.clone().unwrap();
    let red = reduced_system(&sys, &xh, &big, &display, &v).unwrap();
    equal_all(&v, "reduced", &red.rhs, &[p("-z*w1"), p("-z + z*w1*exp(z)")]);

    let inv = PartialInvariants { eta: vec![], theta: p("dq1/q1*exp(-q1) + exp(-q1)") };
    let branch = |sol: &str| {
        partial_reduction_check(
            &lag,
            &x,
            &lam,
            &inv,
            &p("theta^2/2"),
            &particular(&[("dq1", sol)]),
            &pb.candidates.initial_conditions,
            &NoetherConfig::default(),
            &v,
        )
        .unwrap()
    };
    let minus = branch("-q1");
    let plus = branch("q1");
    assert!(minus.holds(), "{minus:?}");
    // qdot = c q solves the Euler-Lagrange equations for c = -1 and c = 1,
    // but only c = -1 is the theta = 0 branch of the reduced Lagrangian
    assert!(plus.trajectories_hold() && !plus.annihilation.holds() && !plus.holds(), "{plus:?}");
    println!(
        "  example 7 branches: dq1 = -q1 passes every partial-reduction check (deviation {:.1e}); \
         dq1 = q1 solves the full equations (deviation {:.1e}) but does not annihilate dL~/dtheta",
        minus.max_deviation(),
        plus.max_deviation()
    );
}

fn property_suites() {
    use std::process::Command;
    // the suites live in their own targets; rerun them here so this line
    // reflects their current state
    let cargo = std::env::var("CARGO").unwrap_or_else(|_| "cargo".into());
    let out = Command::new(cargo)
        .args(["test", "-q", "-p", "lamsym", "--test", "expr_properties", "--test", "mechanics_properties"])
        .args(["--test", "numeric_properties"])
        .current_dir(env!("CARGO_MANIFEST_DIR"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
}

fn determinism() {
    let cfg = RunConfig { seed: 7, ..RunConfig::default() };
    let a = corpus::to_json(&corpus::run_all(&cfg).unwrap());
    let b = corpus::to_json(&corpus::run_all(&cfg).unwrap());
    assert_eq!(a, b);
}

fn main() {
    let criteria: [(&str, fn()); 9] = [
        ("example 1: S values and case classification", example1),
        ("example 2: lambda-symmetry, Gdot = -G, reduced system, time-dependent integral", example2),
        ("example 3: vector lambda, Gdot law and z-dependence of the reduction", example3),
        ("example 4: Sdot = -2 eps q p and the exact limit eps = 0", example4),
        ("example 5: invariance, extension, Legendre transform, Gdot = -q1 G, Noether residual", example5),
        ("example 6: full Lagrangian pipeline and partial reduction", example6),
        ("example 7: velocity-dependent lambda and both partial-reduction branches", example7),
        ("property suites", property_suites),
        ("determinism of the seeded corpus report", determinism),
    ];
    let mut failed = 0;
    for (k, (desc, f)) in criteria.iter().enumerate() {
        let ok = catch_unwind(AssertUnwindSafe(f)).is_ok();
        println!("criterion {}: {} {desc}", k + 1, if ok { "PASS" } else { "FAIL" });
        failed += usize::from(!ok);
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
