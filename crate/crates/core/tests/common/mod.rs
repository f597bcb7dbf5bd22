#![allow(dead_code)]

use fracpara_core::dnmap::{BasisKind, BasisSpec, ExteriorBasis};
use fracpara_core::forward::PolyParabolicProblem;
use fracpara_core::operator::assemble_laplace_beltrami;
use fracpara_core::{Field, GeometryPartition, MetricField, SpaceTimeGrid, Which};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::sync::Arc;

pub fn grid(nx: usize, nt: usize, padding: usize) -> SpaceTimeGrid {
    SpaceTimeGrid::new(1, 2.0 * PI, nx, 1.0, padding, nt).unwrap()
}

pub fn desk_grid() -> SpaceTimeGrid {
    grid(64, 256, 4)
}

pub fn partition(g: &SpaceTimeGrid) -> GeometryPartition {
    GeometryPartition::new(g, vec![[2.0, 4.0]], vec![[0.2, 1.0]], vec![[5.0, 5.8]]).unwrap()
}

pub fn problem(g: &SpaceTimeGrid, exponents: &[f64]) -> PolyParabolicProblem {
    let m = MetricField::identity(g);
    let d = Arc::new(assemble_laplace_beltrami(g, &m).unwrap());
    let w = vec![1.0; exponents.len()];
    PolyParabolicProblem::new(d, m, partition(g), exponents.to_vec(), w, Field::zeros(g)).unwrap()
}

pub fn bumps(p: &PolyParabolicProblem, which: Which, n_space: usize, n_time: usize) -> ExteriorBasis {
    let spec = BasisSpec { which, kind: BasisKind::Bump, n_space, n_time, window: None };
    ExteriorBasis::new(p.partition(), spec).unwrap()
}

/// Single `sin^2` bump in `W1 x (-T/2, T/2)`, unit norm.
pub fn w1_bump(p: &PolyParabolicProblem) -> Field {
    let spec = BasisSpec { which: Which::W1, kind: BasisKind::Bump, n_space: 1, n_time: 1, window: Some([-0.5, 0.5]) };
    ExteriorBasis::new(p.partition(), spec).unwrap().elements()[0].clone()
}

/// `a sin(x) cos(pi t / 2T)` restricted to `Omega_T`.
pub fn sin_cos(p: &PolyParabolicProblem, a: f64) -> Field {
    let t = p.grid().half_window;
    Field::from_real_fn(p.grid(), |tt, x| a * x[0].sin() * (PI * tt / (2.0 * t)).cos())
        .restrict(&p.partition().omega_t())
}

/// Uniform complex samples on `Omega_T`.
pub fn random_interior(p: &PolyParabolicProblem, rng: &mut ChaCha8Rng) -> Field {
    let mut f = Field::zeros(p.grid());
    for k in p.unknowns() {
        f.data_mut()[k] = Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5);
    }
    f
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gap(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / a.norm().max(b.norm()).max(1e-300)
}

pub fn field_gap(a: &Field, b: &Field) -> f64 {
    a.sub(b).unwrap().norm() / a.norm().max(b.norm()).max(1e-300)
}
