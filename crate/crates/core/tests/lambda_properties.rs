mod common;

use common::{p, polynomial, seeded};
use lamsym::lambda::{
    check_lambda_constant_g, check_lambda_constant_s, check_lambda_symmetry, lambda_symmetry_residuals,
};
use lamsym::symmetry::{check_point_symmetry, compute_s, point_symmetry_residuals};
use lamsym::{simplify, Expr, LambdaMatrix, LambdaSide, PhaseSystem, PhaseVectorField, Verifier};
use proptest::prelude::*;

const PHASE1: &[&str] = &["q1", "p1"];

fn zero_lambda(n: usize) -> LambdaMatrix {
    LambdaMatrix::zero(LambdaSide::Hamiltonian, n)
}

proptest! {
    #![proptest_config(seeded(40, 31))]

    /// With Λ = 0 the Λ-symmetry test is the point-symmetry test.
    #[test]
    fn zero_lambda_matches_point_symmetry(
        h in polynomial(PHASE1),
        phi in polynomial(PHASE1),
        psi in polynomial(PHASE1),
        symmetric in any::<bool>(),
    ) {
        let sys = PhaseSystem::new(1, h.clone()).unwrap();
        // half the cases use the Hamiltonian field itself, which always is a symmetry
        let x = if symmetric {
            sys.hamiltonian_vector_field(&h)
        } else {
            PhaseVectorField::new(vec![phi], vec![psi], Expr::zero()).unwrap()
        };
        let v = Verifier::default();
        let a = check_point_symmetry(&sys, &x, &v).unwrap();
        let b = check_lambda_symmetry(&sys, &x, &zero_lambda(1), &v).unwrap();
        prop_assert_eq!(a.holds, b.holds);
        prop_assert!(!symmetric || a.holds);
        for (u, w) in a.components.iter().zip(&b.components) {
            prop_assert_eq!(u.verdict.holds(), w.verdict.holds());
        }
        let ra = point_symmetry_residuals(&sys, &x).unwrap();
        let rb = lambda_symmetry_residuals(&sys, &x, &zero_lambda(1)).unwrap();
        for (u, w) in ra.iter().zip(&rb) {
            prop_assert!(v.zero(&(u.clone() - w.clone())).unwrap().holds(), "{u} vs {w}");
        }
    }
}

fn example4(eps: Expr) -> (PhaseSystem, PhaseVectorField, LambdaMatrix) {
    let h = p("-q1*p1") + eps.clone() * p("q1*p1") - eps.clone() * p("q1*p1*log(p1)");
    let sys = PhaseSystem::new(1, h).unwrap();
    let x = PhaseVectorField::new(vec![p("q1^2*p1")], vec![Expr::zero()], Expr::zero()).unwrap();
    let lam = LambdaMatrix::new(LambdaSide::Hamiltonian, 1, vec![vec![eps, Expr::zero()], vec![Expr::zero(), Expr::zero()]], false)
        .unwrap();
    (sys, x, lam)
}

proptest! {
    #![proptest_config(seeded(20, 32))]

    /// The scaled family is a Λ-symmetry for every ε, with `Ṡ = -2ε q p`.
    #[test]
    fn example4_family_is_lambda_symmetric_for_every_eps(k in -20i64..=20) {
        let eps = Expr::ratio(k, 10);
        let (sys, x, lam) = example4(eps.clone());
        let v = Verifier::default();
        prop_assert!(check_lambda_symmetry(&sys, &x, &lam, &v).unwrap().holds);
        let rep = check_lambda_constant_s(&sys, &x, &lam, &v).unwrap();
        prop_assert!(rep.verdict.holds());
        let want = Expr::int(-2) * eps * p("q1*p1");
        prop_assert!(v.equal("Sdot", &rep.s_dot, &want).unwrap().holds());
        prop_assert_eq!(k == 0, check_point_symmetry(&sys, &x, &v).unwrap().holds);
    }
}

#[test]
fn at_eps_zero_the_lambda_checks_are_the_exact_checks() {
    let (sys, x, lam) = example4(Expr::zero());
    let v = Verifier::default();
    assert!(lam.is_zero());
    let a = check_point_symmetry(&sys, &x, &v).unwrap();
    let b = check_lambda_symmetry(&sys, &x, &lam, &v).unwrap();
    assert!(a.holds && b.holds);
    let rep = check_lambda_constant_s(&sys, &x, &lam, &v).unwrap();
    assert_eq!(rep.s, simplify(&p("2*q1*p1")));
    assert!(rep.s_dot.is_zero() && rep.divergence.is_zero());
    assert_eq!(compute_s(&sys, &x).unwrap(), rep.s);
}

#[test]
fn example2_field_needs_its_lambda() {
    let sys = PhaseSystem::new(2, p("-(q1*p2 + q2*p1) + (p1 - p2)^2/2")).unwrap();
    let x = PhaseVectorField::new(vec![Expr::zero(), Expr::zero()], vec![Expr::one(), Expr::one()], Expr::zero()).unwrap();
    let r = lambda_symmetry_residuals(&sys, &x, &zero_lambda(2)).unwrap();
    assert_eq!(r, vec![Expr::zero(), Expr::zero(), Expr::int(-1), Expr::int(-1)]);
    let lam = LambdaMatrix::diagonal(LambdaSide::Hamiltonian, 2, vec![Expr::zero(), Expr::zero(), Expr::one(), Expr::one()]).unwrap();
    assert!(check_lambda_symmetry(&sys, &x, &lam, &Verifier::default()).unwrap().holds);
}

#[test]
fn zero_lambda_on_an_exact_symmetry_gives_a_conserved_generator() {
    let sys = PhaseSystem::new(2, p("(p1^2+q1^2)/2 + (p2^2+q2^2)/2")).unwrap();
    let g = p("q1*p2 - q2*p1");
    let x = sys.hamiltonian_vector_field(&g);
    let rep = check_lambda_constant_g(&sys, &x, &zero_lambda(2), &g, &Verifier::default()).unwrap();
    assert!(rep.holds());
    assert!(rep.g_dot.is_zero());
}
