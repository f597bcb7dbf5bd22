mod common;

use common::*;
use fracpara_core::dnmap::BasisKind;
use fracpara_core::forward::{smallest_dirichlet_eigenvalue, EigenCondition};
use fracpara_core::{
    coercivity_margin, eigenvalue_condition_check, solve_adjoint, solve_forward, BasisSpec, Error, ExteriorBasis,
    Field, Which,
};
use num_complex::Complex64;
use std::f64::consts::PI;

fn constant_on_omega(p: &fracpara_core::PolyParabolicProblem, c: Complex64) -> Field {
    Field::from_fn(p.grid(), |_, _| c).restrict(&p.partition().omega_t())
}

#[test]
fn constant_potential_is_a_shift() {
    let g = grid(32, 64, 2);
    let p = problem(&g, &[0.3, 0.7]);
    let pv = p.with_potential(constant_on_omega(&p, Complex64::new(0.4, 0.0))).unwrap();
    let a = pv.galerkin_matrix(0.0).unwrap();
    let b = p.galerkin_matrix(0.4).unwrap();
    assert!((&a - &b).norm() <= 1e-12 * b.norm());
}

#[test]
fn coercivity_dominates_the_exponent_bound() {
    let g = grid(32, 64, 2);
    for s in [0.25, 0.75] {
        let p = problem(&g, &[s]);
        let r = coercivity_margin(&p, 0.0).unwrap();
        assert!((r.c_s - (s * PI / 2.0).cos()).abs() < 1e-15);
        assert!(r.margin >= r.lower_bound * (1.0 - 1e-9), "s={s}: {r:?}");
        assert!(r.margin > 0.0);
    }
}

#[test]
fn negative_potential_needs_a_large_enough_shift() {
    let g = grid(32, 64, 2);
    let p = problem(&g, &[0.3, 0.7]);
    let pv = p.with_potential(constant_on_omega(&p, Complex64::new(-0.2, 0.0))).unwrap();
    assert!(matches!(coercivity_margin(&pv, 0.1), Err(Error::InvalidArgument(_))));
    let shifted = coercivity_margin(&pv, 0.2).unwrap();
    let plain = coercivity_margin(&p, 0.0).unwrap();
    assert!((shifted.margin - plain.margin).abs() <= 1e-9 * plain.margin.abs());
}

#[test]
fn potential_at_an_eigenvalue_is_rejected() {
    let g = grid(32, 64, 2);
    let p = problem(&g, &[0.3, 0.7]);
    let lam = smallest_dirichlet_eigenvalue(&p).unwrap();
    let pv = p.with_potential(constant_on_omega(&p, -lam)).unwrap();
    assert!(matches!(eigenvalue_condition_check(&pv).unwrap(), EigenCondition::Violated { .. }));
    let err = solve_forward(&pv, &w1_bump(&pv), None).unwrap_err();
    assert!(err.is_solver(), "{err}");
    let ok = eigenvalue_condition_check(&p).unwrap();
    assert!(ok.is_ok() && ok.margin() > 1e-6);
}

#[test]
fn source_only_solution_lives_on_omega() {
    let g = grid(32, 64, 2);
    let p = problem(&g, &[0.3, 0.7]);
    let src = random_interior(&p, &mut rng(3));
    let sol = solve_forward(&p, &Field::zeros(&g), Some(&src)).unwrap();
    assert!(sol.u.supported_in(&p.partition().omega_t()));
    let pu = p.apply(&sol.u, false).unwrap().restrict(&p.partition().omega_t());
    assert!(field_gap(&pu, &src) < 1e-9, "{}", field_gap(&pu, &src));
}

#[test]
fn solutions_are_linear_and_deterministic() {
    let g = grid(32, 64, 2);
    let p = problem(&g, &[0.3, 0.7]);
    let basis = bumps(&p, Which::W1, 2, 2);
    let (f1, f2) = (&basis.elements()[0], &basis.elements()[3]);
    let src = random_interior(&p, &mut rng(5));
    let (a, b) = (Complex64::new(0.7, -1.2), Complex64::new(-0.3, 0.4));
    let u1 = solve_forward(&p, f1, Some(&src)).unwrap().u;
    let u2 = solve_forward(&p, f2, None).unwrap().u;
    let combo = f1.scale(a).add(&f2.scale(b)).unwrap();
    let u = solve_forward(&p, &combo, Some(&src.scale(a))).unwrap().u;
    let expected = u1.scale(a).add(&u2.scale(b)).unwrap();
    assert!(field_gap(&u, &expected) < 1e-10);
    let again = solve_forward(&p, f1, Some(&src)).unwrap().u;
    assert_eq!(u1.data(), again.data());
}

#[test]
fn forward_solution_starts_from_rest() {
    let g = grid(32, 64, 2);
    let p = problem(&g, &[0.3, 0.7]);
    let f = w1_bump(&p);
    let sol = solve_forward(&p, &f, None).unwrap();
    assert_eq!(sol.initial_residual, 0.0);
    assert_eq!(sol.exterior_residual, 0.0);
    assert!(sol.interior_residual < 1e-8);
    let adj = solve_adjoint(&p, &f, None).unwrap();
    assert_eq!(adj.initial_residual, 0.0);
    assert!(adj.interior_residual < 1e-8);
}

#[test]
fn zero_data_give_zero_solutions() {
    let g = grid(32, 64, 2);
    let p = problem(&g, &[0.3, 0.7]).with_potential(sin_cos(&problem(&g, &[0.3, 0.7]), 0.1)).unwrap();
    let z = Field::zeros(&g);
    assert_eq!(solve_forward(&p, &z, None).unwrap().u.max_abs(), 0.0);
    assert_eq!(solve_adjoint(&p, &z, None).unwrap().u.max_abs(), 0.0);
}

/// Only the class of the datum modulo `Omega_T` matters.
#[test]
fn datum_values_on_omega_are_absorbed() {
    let g = grid(32, 64, 2);
    let p = problem(&g, &[0.3, 0.7]);
    let f = w1_bump(&p);
    let shifted = f.add(&random_interior(&p, &mut rng(1))).unwrap();
    let a = solve_forward(&p, &f, None).unwrap().u;
    let b = solve_forward(&p, &shifted, None).unwrap().u;
    assert!(field_gap(&a, &b) < 1e-12);
}

/// Time reflection swaps the forward and adjoint problems when the metric and
/// potential are time independent and the grid is reflection symmetric.
#[test]
fn adjoint_is_the_reflected_conjugate_forward_problem() {
    let g = grid(32, 64, 2);
    let p = problem(&g, &[0.3, 0.7]);
    let f = w1_bump(&p);
    let u = solve_forward(&p, &f.reflect_time().conj(), None).unwrap().u;
    let w = solve_adjoint(&p, &f, None).unwrap().u;
    assert!(field_gap(&w, &u.reflect_time().conj()) < 1e-9);
}

/// A fixed pairing of the exterior response converges under joint refinement.
#[test]
fn pairing_converges_under_refinement() {
    let value = |nx: usize, nt: usize| {
        let g = grid(nx, nt, 2);
        let p = problem(&g, &[0.3, 0.7]);
        let f = w1_bump(&p);
        let spec = BasisSpec { which: Which::W2, kind: BasisKind::Bump, n_space: 1, n_time: 1, window: Some([-0.5, 0.5]) };
        let zeta = ExteriorBasis::new(p.partition(), spec).unwrap().elements()[0].clone();
        let u = solve_forward(&p, &f, None).unwrap().u;
        let pu = p.apply(&u, false).unwrap();
        p.inner(&pu, &zeta).unwrap()
    };
    let j: Vec<Complex64> = [(16, 32), (32, 64), (64, 128)].iter().map(|&(nx, nt)| value(nx, nt)).collect();
    let e1 = (j[1] - j[0]).norm();
    let e2 = (j[2] - j[1]).norm();
    assert!(e2 <= 0.5 * e1, "{e1:e} -> {e2:e}");
}
