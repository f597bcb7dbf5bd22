//! Potential reconstruction from DN data through the integral identity:
//! a Born step with baseline solutions, then refinement with the forward
//! solutions refreshed at the current estimate.

use crate::dnmap::{assemble_dn_map_with, solution_bank, DNMatrix, ExteriorBasis};
use crate::error::{Error, Result};
use crate::field::{Field, Region};
use crate::forward::{ForwardSolver, PolyParabolicProblem};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regularizer {
    /// Discrete `H^1` energy on the sampled nodes, time differences scaled
    /// by `h / dt`, plus `1e-4` times the identity.
    #[default]
    Gradient,
    Identity,
}

#[derive(Clone, Debug)]
pub struct ReconstructionConfig {
    pub measured: DNMatrix,
    /// Baseline potential; zero when `None`.
    pub baseline: Option<Field>,
    /// Regularization weight relative to `||M||_2^2`.
    pub tikhonov: f64,
    pub max_iterations: usize,
    /// Nodes where the potential is estimated; all of `Omega_T` when `None`.
    pub sampling: Option<Region>,
    pub regularizer: Regularizer,
}

impl ReconstructionConfig {
    pub fn new(measured: DNMatrix) -> Self {
        ReconstructionConfig {
            measured,
            baseline: None,
            tikhonov: 1e-3,
            max_iterations: 3,
            sampling: None,
            regularizer: Regularizer::Gradient,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ReconstructionResult {
    pub estimate: Field,
    pub born: Field,
    /// `||Lambda_meas - Lambda_V||_F / ||Lambda_meas - Lambda_{V0}||_F`, first
    /// for the Born estimate and then after each refinement.
    pub residual_history: Vec<f64>,
    pub iterations: usize,
    pub tikhonov: f64,
}

fn flatten(m: &DMatrix<Complex64>) -> DVector<Complex64> {
    DVector::from_iterator(m.len(), m.iter().copied())
}

/// Column-major over (test, excitation), matching [`flatten`].
fn born_matrix(
    problem: &PolyParabolicProblem,
    sampled: &[usize],
    forward: &[Field],
    adjoint: &[Field],
) -> DMatrix<Complex64> {
    let unknowns = problem.unknowns();
    let mass = problem.mass();
    let (nr, nc) = (adjoint.len(), forward.len());
    DMatrix::from_fn(nr * nc, sampled.len(), |row, col| {
        let (j, i) = (row % nr, row / nr);
        let p = sampled[col];
        let k = unknowns[p];
        forward[i].data()[k] * adjoint[j].data()[k].conj() * mass[p]
    })
}

fn regularizer_matrix(problem: &PolyParabolicProblem, sampled: &[usize], kind: Regularizer) -> DMatrix<f64> {
    let n = sampled.len();
    let mut r = DMatrix::<f64>::zeros(n, n);
    match kind {
        Regularizer::Identity => r.fill_with_identity(),
        Regularizer::Gradient => {
            let grid = problem.grid();
            let ns = grid.n_space();
            let unknowns = problem.unknowns();
            let slot: std::collections::HashMap<usize, usize> =
                sampled.iter().enumerate().map(|(c, &p)| (unknowns[p], c)).collect();
            let rho2 = (grid.h() / grid.dt()).powi(2);
            let mut couple = |a: usize, b: usize, w: f64| {
                r[(a, a)] += w;
                r[(b, b)] += w;
                r[(a, b)] -= w;
                r[(b, a)] -= w;
            };
            for (&k, &a) in &slot {
                let (j, i) = (k / ns, k % ns);
                let ax = grid.axes(i);
                for d in 0..grid.spatial_dim {
                    if ax[d] + 1 < grid.nx {
                        let mut nb = ax;
                        nb[d] += 1;
                        if let Some(&b) = slot.get(&(j * ns + grid.from_axes(nb))) {
                            couple(a, b, 1.0);
                        }
                    }
                }
                if let Some(&b) = slot.get(&((j + 1) * ns + i)) {
                    couple(a, b, rho2);
                }
            }
            for a in 0..n {
                r[(a, a)] += 1e-4;
            }
        }
    }
    let top = r.clone().symmetric_eigenvalues().max();
    r / top
}

fn regularized_solve(
    m: &DMatrix<Complex64>,
    r: &DMatrix<f64>,
    d: &DVector<Complex64>,
    tikhonov: f64,
) -> Result<DVector<Complex64>> {
    let mut normal = m.ad_mul(m);
    let top = normal.clone().symmetric_eigenvalues().max();
    let alpha = tikhonov * top;
    for a in 0..normal.nrows() {
        for b in 0..normal.ncols() {
            normal[(a, b)] += r[(a, b)] * alpha;
        }
    }
    let rhs = m.ad_mul(d);
    let chol = normal
        .cholesky()
        .ok_or_else(|| Error::IllConditioned(format!("normal system singular at Tikhonov weight {tikhonov:e}")))?;
    Ok(chol.solve(&rhs))
}

struct Context<'a> {
    problem: &'a PolyParabolicProblem,
    excitations: ExteriorBasis,
    tests: ExteriorBasis,
    measured: &'a DMatrix<Complex64>,
    scale: f64,
}

impl Context<'_> {
    fn residual(&self, v: &Field) -> Result<f64> {
        let s = ForwardSolver::new(&self.problem.with_potential(v.clone())?)?;
        let dn = assemble_dn_map_with(&s, &self.excitations, &self.tests, false)?;
        Ok((self.measured - dn.entries).norm() / self.scale)
    }
}

fn place(base: &Field, problem: &PolyParabolicProblem, sampled: &[usize], q: &DVector<Complex64>) -> Field {
    let unknowns = problem.unknowns();
    let mut out = base.clone();
    for (c, &p) in sampled.iter().enumerate() {
        out.data_mut()[unknowns[p]] += q[c];
    }
    out
}

/// Runs the Born step and up to `max_iterations` refinements. `problem`
/// fixes operator and geometry; its own potential is ignored.
pub fn reconstruct_potential(config: &ReconstructionConfig, problem: &PolyParabolicProblem) -> Result<ReconstructionResult> {
    let meta = &config.measured.meta;
    if meta.geometry_fingerprint != problem.geometry_fingerprint() {
        return Err(Error::FingerprintMismatch(
            "measured DN map was assembled for a different grid, geometry or operator".into(),
        ));
    }
    if !(config.tikhonov > 0.0 && config.tikhonov.is_finite()) {
        return Err(Error::InvalidArgument("Tikhonov weight must be positive".into()));
    }
    let grid = problem.grid();
    let v0 = config.baseline.clone().unwrap_or_else(|| Field::zeros(grid));
    let p0 = problem.with_potential(v0.clone())?;
    let excitations = ExteriorBasis::new(problem.partition(), meta.excitations.clone())?;
    let tests = ExteriorBasis::new(problem.partition(), meta.tests.clone())?;
    let s0 = ForwardSolver::new(&p0)?;
    let dn0 = assemble_dn_map_with(&s0, &excitations, &tests, false)?;
    let diff = &config.measured.entries - &dn0.entries;
    let scale = diff.norm();
    let done = |v: Field| ReconstructionResult {
        born: v.clone(),
        estimate: v,
        residual_history: vec![0.0],
        iterations: 0,
        tikhonov: config.tikhonov,
    };
    if scale == 0.0 {
        return Ok(done(v0));
    }
    let unknowns = problem.unknowns();
    let sampled: Vec<usize> = match &config.sampling {
        None => (0..unknowns.len()).collect(),
        Some(region) => {
            let ns = grid.n_space();
            (0..unknowns.len())
                .filter(|&p| {
                    let k = unknowns[p];
                    region.spatial[k % ns] && region.time.contains(&(k / ns))
                })
                .collect()
        }
    };
    if sampled.is_empty() {
        return Err(Error::EmptyMask("sampling region misses Omega_T".into()));
    }
    let d = flatten(&diff);
    let reg = regularizer_matrix(problem, &sampled, config.regularizer);
    let adjoint: Vec<Field> = solution_bank(&s0, &tests, true)?.into_iter().map(|s| s.u).collect();
    let forward0: Vec<Field> = solution_bank(&s0, &excitations, false)?.into_iter().map(|s| s.u).collect();
    let m = born_matrix(problem, &sampled, &forward0, &adjoint);
    let q = regularized_solve(&m, &reg, &d, config.tikhonov)?;
    let born = place(&v0, problem, &sampled, &q);
    let ctx = Context { problem, excitations, tests, measured: &config.measured.entries, scale };
    let mut current = born.clone();
    let mut res = ctx.residual(&current)?;
    let mut history = vec![res];
    let mut iterations = 0;
    for _ in 0..config.max_iterations {
        let s = ForwardSolver::new(&problem.with_potential(current.clone())?)?;
        let forward: Vec<Field> = solution_bank(&s, &ctx.excitations, false)?.into_iter().map(|s| s.u).collect();
        let m = born_matrix(problem, &sampled, &forward, &adjoint);
        let q = regularized_solve(&m, &reg, &d, config.tikhonov)?;
        let candidate = place(&v0, problem, &sampled, &q);
        let step = candidate.sub(&current)?;
        // Halve the step until the data residual does not grow.
        let mut accepted = None;
        let mut t = 1.0;
        for _ in 0..6 {
            let trial = current.add(&step.scale(Complex64::new(t, 0.0)))?;
            let r = ctx.residual(&trial)?;
            if r <= res {
                accepted = Some((trial, r));
                break;
            }
            t *= 0.5;
        }
        iterations += 1;
        match accepted {
            Some((v, r)) => {
                let stagnant = res - r <= 1e-3 * res;
                current = v;
                res = r;
                history.push(res);
                if stagnant {
                    break;
                }
            }
            None => {
                history.push(res);
                break;
            }
        }
    }
    Ok(ReconstructionResult { estimate: current, born, residual_history: history, iterations, tikhonov: config.tikhonov })
}

/// `||a - b||_{Omega_T} / ||b||_{Omega_T}`.
pub fn relative_error_on(estimate: &Field, truth: &Field, region: &Region) -> Result<f64> {
    let n = truth.norm_on(region);
    let e = estimate.sub(truth)?.norm_on(region);
    Ok(if n > 0.0 { e / n } else { e })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::MetricField;
    use crate::operator::assemble_laplace_beltrami;
    use crate::partition::GeometryPartition;
    use crate::SpaceTimeGrid;
    use std::sync::Arc;

    fn problem() -> PolyParabolicProblem {
        let g = SpaceTimeGrid::new(1, 2.0 * std::f64::consts::PI, 16, 1.0, 2, 32).unwrap();
        let m = MetricField::identity(&g);
        let d = Arc::new(assemble_laplace_beltrami(&g, &m).unwrap());
        let part = GeometryPartition::new(&g, vec![[2.0, 4.0]], vec![[0.2, 1.0]], vec![[5.0, 5.8]]).unwrap();
        PolyParabolicProblem::new(d, m, part, vec![0.3, 0.7], vec![1.0, 1.0], Field::zeros(&g)).unwrap()
    }

    #[test]
    fn gradient_regularizer_nearly_annihilates_constants() {
        let p = problem();
        let sampled: Vec<usize> = (0..p.unknowns().len()).collect();
        let r = regularizer_matrix(&p, &sampled, Regularizer::Gradient);
        let ones = DVector::<f64>::from_element(sampled.len(), 1.0);
        let ev = r.clone().symmetric_eigenvalues();
        assert!((ev.max() - 1.0).abs() < 1e-12);
        assert!((&r * &ones).norm() <= 1e-3 * ones.norm());
        assert!(ev.min() > 0.0);
    }

    #[test]
    fn small_weight_solves_square_systems() {
        let m = DMatrix::from_fn(3, 3, |i, j| Complex64::new(if i == j { 2.0 } else { 0.1 * (i + j) as f64 }, 0.0));
        let d = DVector::from_fn(3, |i, _| Complex64::new(i as f64, 1.0));
        let q = regularized_solve(&m, &DMatrix::identity(3, 3), &d, 1e-14).unwrap();
        assert!((&m * q - d).norm() < 1e-10);
    }

    #[test]
    fn relative_error_against_zero_truth_is_absolute() {
        let p = problem();
        let omega = p.partition().omega_t();
        let g = p.grid();
        let one = Field::from_real_fn(g, |_, _| 1.0).restrict(&omega);
        let e = relative_error_on(&one, &Field::zeros(g), &omega).unwrap();
        assert!((e - one.norm_on(&omega)).abs() < 1e-15);
        assert_eq!(relative_error_on(&one, &one, &omega).unwrap(), 0.0);
    }
}
