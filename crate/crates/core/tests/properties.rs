mod common;

use common::*;
use fracpara_core::dnmap::relative_gap;
use fracpara_core::inverse::runge::nested_projection_errors;
use fracpara_core::operator::calculus::{apply_heat_semigroup, apply_power, power_symbol};
use fracpara_core::dnmap::assemble_dn_map_with;
use fracpara_core::{l2_inner_product, DNMatrix, Field, ForwardSolver, PolyParabolicProblem, Which};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use proptest::prelude::*;
use std::sync::OnceLock;

fn small() -> &'static PolyParabolicProblem {
    static P: OnceLock<PolyParabolicProblem> = OnceLock::new();
    P.get_or_init(|| problem(&grid(16, 32, 2), &[0.3, 0.7]))
}

fn solver() -> &'static ForwardSolver {
    static S: OnceLock<ForwardSolver> = OnceLock::new();
    S.get_or_init(|| ForwardSolver::new(small()).unwrap())
}

fn template() -> &'static DNMatrix {
    static D: OnceLock<DNMatrix> = OnceLock::new();
    D.get_or_init(|| {
        let b = bumps(small(), Which::W1, 2, 2);
        let t = bumps(small(), Which::W2, 2, 2);
        assemble_dn_map_with(solver(), &b, &t, false).unwrap()
    })
}

fn field_from(values: &[(f64, f64)]) -> Field {
    let g = small().grid();
    let data = (0..g.len()).map(|k| {
        let (a, b) = values[k % values.len()];
        Complex64::new(a, b * ((k * 7919) % 13) as f64 / 13.0)
    });
    Field::from_vec(g, data.collect()).unwrap()
}

fn values() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 37..64)
}

fn complex() -> impl Strategy<Value = Complex64> {
    (-2.0..2.0f64, -2.0..2.0f64).prop_map(|(a, b)| Complex64::new(a, b))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn powers_compose(a in 0.05..0.95f64, b in 0.05..0.95f64, v in values()) {
        let d = small().decomposition();
        let u = field_from(&v);
        let two = apply_power(d, &apply_power(d, &u, a, false).unwrap(), b, false).unwrap();
        let one = apply_power(d, &u, a + b, false).unwrap();
        prop_assert!(field_gap(&two, &one) < 1e-11);
    }

    #[test]
    fn adjoint_power_is_the_pairing_transpose(s in 0.05..1.95f64, v in values(), w in values()) {
        let d = small().decomposition();
        let (u, z) = (field_from(&v), field_from(&w));
        let m = small().metric();
        let lhs = l2_inner_product(&apply_power(d, &u, s, false).unwrap(), &z, None, Some(m)).unwrap();
        let rhs = l2_inner_product(&u, &apply_power(d, &z, s, true).unwrap(), None, Some(m)).unwrap();
        prop_assert!(gap(lhs, rhs) < 1e-11);
    }

    #[test]
    fn heat_semigroup_contracts(tau in 1e-3..2.0f64, v in values()) {
        let u = field_from(&v);
        let e = apply_heat_semigroup(small().decomposition(), &u, tau).unwrap();
        prop_assert!(e.norm() <= u.norm() * (1.0 + 1e-12));
    }

    #[test]
    fn power_symbol_is_multiplicative(re in 0.0..50.0f64, im in -50.0..50.0f64, a in 0.0..1.0f64, b in 0.0..1.0f64) {
        let z = Complex64::new(re, im);
        for nyquist in [false, true] {
            let lhs = power_symbol(z, a, nyquist) * power_symbol(z, b, nyquist);
            let rhs = power_symbol(z, a + b, nyquist);
            prop_assert!(gap(lhs, rhs) < 1e-12);
        }
    }

    #[test]
    fn field_bytes_round_trip(v in values()) {
        let u = field_from(&v);
        let back = Field::from_reader(&u.to_bytes()[..]).unwrap();
        prop_assert_eq!(back, u);
    }

    #[test]
    fn dn_csv_round_trip(entries in prop::collection::vec(complex(), 16)) {
        let mut dn = template().clone();
        dn.entries = DMatrix::from_vec(4, 4, entries);
        let back = DNMatrix::from_csv(&dn.to_csv(), dn.meta.clone()).unwrap();
        prop_assert_eq!(back, dn);
    }

    #[test]
    fn projection_errors_shrink(cols in prop::collection::vec(complex(), 40), rhs in prop::collection::vec(complex(), 10)) {
        let a = DMatrix::from_vec(10, 4, cols);
        let b = DVector::from_vec(rhs);
        let e = nested_projection_errors(&a, &b);
        prop_assert!(e.iter().all(|x| (0.0..=1.0 + 1e-12).contains(x)));
        prop_assert!(e.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }

    #[test]
    fn relative_gap_is_symmetric_and_bounded(a in complex(), b in complex()) {
        let g = relative_gap(a, b);
        prop_assert_eq!(g, relative_gap(b, a));
        prop_assert!((0.0..=2.0).contains(&g));
    }

    #[test]
    fn solutions_are_linear(c1 in complex(), c2 in complex()) {
        let p = small();
        let b = bumps(p, Which::W1, 1, 2);
        let (f1, f2) = (&b.elements()[0], &b.elements()[1]);
        let u1 = solver().solve(f1, None).unwrap().u;
        let u2 = solver().solve(f2, None).unwrap().u;
        let u = solver().solve(&f1.scale(c1).add(&f2.scale(c2)).unwrap(), None).unwrap().u;
        let expected = u1.scale(c1).add(&u2.scale(c2)).unwrap();
        prop_assert!(u.sub(&expected).unwrap().norm() <= 1e-10 * (1.0 + expected.norm()));
    }
}
