//! Galerkin solution of the exterior value problem for
//! `P_V = sum_k b_k H^{s_k} + V` on `Omega x (-T, T)`, its adjoint, and the
//! well-posedness diagnostics.
//!
//! The interior basis is the nodal indicators of `Omega_T`. Because every
//! operator is time-translation invariant, one response per interior spatial
//! node fills the whole (block-Toeplitz) matrix.

use crate::error::{Error, Result};
use crate::field::{l2_inner_product, Field, Region};
use crate::grid::SpaceTimeGrid;
use crate::metric::MetricField;
use crate::operator::calculus::{apply_multiplier, apply_poly, apply_power, base, power_symbol};
use crate::operator::SpectralDecomposition;
use crate::partition::GeometryPartition;
use nalgebra::{DMatrix, DVector, Dyn, LU};
use num_complex::Complex64;
use rayon::prelude::*;
use sha2::{Digest, Sha256};
use std::sync::{Arc, OnceLock};

type CMatrix = DMatrix<Complex64>;
type CVector = DVector<Complex64>;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Clone)]
pub struct PolyParabolicProblem {
    exponents: Vec<f64>,
    weights: Vec<f64>,
    potential: Field,
    partition: GeometryPartition,
    metric: MetricField,
    decomp: Arc<SpectralDecomposition>,
    base: Arc<OnceLock<CMatrix>>,
}

impl std::fmt::Debug for PolyParabolicProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PolyParabolicProblem")
            .field("exponents", &self.exponents)
            .field("weights", &self.weights)
            .field("unknowns", &self.partition.omega_t().count())
            .finish()
    }
}

impl PolyParabolicProblem {
    pub fn new(
        decomp: Arc<SpectralDecomposition>,
        metric: MetricField,
        partition: GeometryPartition,
        exponents: Vec<f64>,
        weights: Vec<f64>,
        potential: Field,
    ) -> Result<Self> {
        let grid = decomp.grid();
        if partition.grid() != grid || potential.grid() != grid || metric.n_nodes() != grid.n_space() {
            return Err(Error::GridMismatch);
        }
        if exponents.is_empty() || exponents.len() != weights.len() {
            return Err(Error::InvalidArgument("need one positive weight per exponent".into()));
        }
        if exponents.iter().any(|&s| !(s > 0.0 && s < 1.0)) {
            return Err(Error::InvalidArgument("exponents must lie in (0, 1)".into()));
        }
        if exponents.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument("exponents must be strictly increasing".into()));
        }
        if weights.iter().any(|&b| !(b > 0.0 && b.is_finite())) {
            return Err(Error::InvalidArgument("weights must be positive".into()));
        }
        let mut p = PolyParabolicProblem {
            exponents,
            weights,
            potential: Field::zeros(grid),
            partition,
            metric,
            decomp,
            base: Arc::new(OnceLock::new()),
        };
        p.potential = p.check_potential(potential)?;
        Ok(p)
    }

    fn check_potential(&self, v: Field) -> Result<Field> {
        if v.grid() != self.grid() {
            return Err(Error::GridMismatch);
        }
        if !v.supported_in(&self.partition.omega_t()) {
            return Err(Error::Support("potential must vanish outside Omega_T".into()));
        }
        Ok(v)
    }

    /// Same operator and geometry with another potential; the assembled
    /// operator part is shared.
    pub fn with_potential(&self, v: Field) -> Result<Self> {
        let mut p = self.clone();
        p.potential = self.check_potential(v)?;
        Ok(p)
    }

    pub fn grid(&self) -> &SpaceTimeGrid {
        self.decomp.grid()
    }

    pub fn decomposition(&self) -> &SpectralDecomposition {
        &self.decomp
    }

    pub fn decomposition_arc(&self) -> Arc<SpectralDecomposition> {
        self.decomp.clone()
    }

    pub fn metric(&self) -> &MetricField {
        &self.metric
    }

    pub fn partition(&self) -> &GeometryPartition {
        &self.partition
    }

    pub fn exponents(&self) -> &[f64] {
        &self.exponents
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn potential(&self) -> &Field {
        &self.potential
    }

    /// `P_V u`, or `P_V^* u = sum b_k H_*^{s_k} u + conj(V) u`.
    pub fn apply(&self, u: &Field, adjoint: bool) -> Result<Field> {
        let mut out = apply_poly(&self.decomp, u, &self.exponents, &self.weights, adjoint)?;
        for (o, (v, x)) in out.data_mut().iter_mut().zip(self.potential.data().iter().zip(u.data())) {
            let v = if adjoint { v.conj() } else { *v };
            *o += v * x;
        }
        Ok(out)
    }

    /// Volume-weighted space-time inner product over the whole grid.
    pub fn inner(&self, a: &Field, b: &Field) -> Result<Complex64> {
        l2_inner_product(a, b, None, Some(&self.metric))
    }

    /// `B_V(u, w) = <P_V u, w>`.
    pub fn form(&self, u: &Field, w: &Field) -> Result<Complex64> {
        self.inner(&self.apply(u, false)?, w)
    }

    /// `B_V(u, w)` through half powers:
    /// `sum b_k <H^{s_k/2} u, H_*^{s_k/2} w> + (V u, w)_{Omega_T}`.
    pub fn form_half_power(&self, u: &Field, w: &Field) -> Result<Complex64> {
        let mut acc = ZERO;
        for (&s, &b) in self.exponents.iter().zip(&self.weights) {
            let hu = apply_power(&self.decomp, u, 0.5 * s, false)?;
            let hw = apply_power(&self.decomp, w, 0.5 * s, true)?;
            acc += self.inner(&hu, &hw)? * b;
        }
        let vu = self.potential.mul(u)?;
        acc += l2_inner_product(&vu, w, Some(&self.partition.omega_t()), Some(&self.metric))?;
        Ok(acc)
    }

    /// Full-grid indices of the unknowns, time slowest.
    pub fn unknowns(&self) -> Vec<usize> {
        self.partition.omega_t().indices(self.grid())
    }

    /// `dt h^n sqrt|g|` for each unknown.
    pub fn mass(&self) -> Vec<f64> {
        let ns = self.grid().n_space();
        let cell = self.grid().cell();
        self.unknowns().iter().map(|&k| cell * self.metric.volume(k % ns)).collect()
    }

    fn potential_on_unknowns(&self) -> Vec<Complex64> {
        self.unknowns().iter().map(|&k| self.potential.data()[k]).collect()
    }

    /// Interior Gram matrix `G[p][q] = <m(H) e_q, e_p>` of a multiplier.
    pub fn interior_gram<M>(&self, m: M) -> Result<CMatrix>
    where
        M: Fn(f64, usize) -> Complex64 + Sync,
    {
        let grid = self.grid();
        let (nt, ns) = (grid.nt, grid.n_space());
        let jc = nt / 2;
        let nodes = self.partition.omega_nodes();
        let responses: Vec<Field> = nodes
            .par_iter()
            .map(|&x| {
                let mut e = Field::zeros(grid);
                e.data_mut()[grid.index(jc, x)] = Complex64::new(1.0, 0.0);
                apply_multiplier(&self.decomp, &e, &m)
            })
            .collect::<Result<_>>()?;
        let slot: Vec<usize> = {
            let mut s = vec![usize::MAX; ns];
            for (c, &x) in nodes.iter().enumerate() {
                s[x] = c;
            }
            s
        };
        let unknowns = self.unknowns();
        let mass = self.mass();
        let n = unknowns.len();
        let mut mat = CMatrix::zeros(n, n);
        for (q, &kq) in unknowns.iter().enumerate() {
            let (jq, xq) = (kq / ns, kq % ns);
            let r = &responses[slot[xq]];
            for (p, &kp) in unknowns.iter().enumerate() {
                let (jp, xp) = (kp / ns, kp % ns);
                let jj = (jp + nt + jc - jq) % nt;
                mat[(p, q)] = r.data()[jj * ns + xp] * mass[p];
            }
        }
        Ok(mat)
    }

    /// Operator part of the Galerkin matrix (no potential), cached.
    pub fn operator_matrix(&self) -> Result<&CMatrix> {
        if let Some(m) = self.base.get() {
            return Ok(m);
        }
        let decomp = &self.decomp;
        let grid = decomp.grid().clone();
        let m = self.interior_gram(|lam, k| {
            let z = base(decomp, lam, k, false);
            let ny = grid.is_time_nyquist(k);
            self.exponents.iter().zip(&self.weights).map(|(&s, &b)| b * power_symbol(z, s, ny)).sum()
        })?;
        let _ = self.base.set(m);
        Ok(self.base.get().expect("just set"))
    }

    /// Galerkin matrix `M[p][q] = B_V(e_q, e_p)` plus `shift` times the mass.
    pub fn galerkin_matrix(&self, shift: f64) -> Result<CMatrix> {
        let mut m = self.operator_matrix()?.clone();
        let mass = self.mass();
        for (p, v) in self.potential_on_unknowns().into_iter().enumerate() {
            m[(p, p)] += (v + shift) * mass[p];
        }
        Ok(m)
    }

    fn hash_into(&self, h: &mut Sha256, with_potential: bool) {
        let g = self.grid();
        h.update(serde_json::to_vec(g).expect("grid serializes"));
        for s in &self.exponents {
            h.update(s.to_le_bytes());
        }
        for b in &self.weights {
            h.update(b.to_le_bytes());
        }
        h.update(self.metric.to_le_bytes());
        for m in [&self.partition.omega, &self.partition.w1, &self.partition.w2] {
            h.update(m.iter().map(|&b| b as u8).collect::<Vec<u8>>());
        }
        if with_potential {
            for z in self.potential.data() {
                h.update(z.re.to_le_bytes());
                h.update(z.im.to_le_bytes());
            }
        }
    }

    /// Hash of grid, exponents, weights, metric, geometry and potential.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        self.hash_into(&mut h, true);
        hex::encode(h.finalize())
    }

    /// As [`fingerprint`](Self::fingerprint) but without the potential.
    pub fn geometry_fingerprint(&self) -> String {
        let mut h = Sha256::new();
        self.hash_into(&mut h, false);
        hex::encode(h.finalize())
    }
}

/// Assembled linear system for the interior correction `v = u - f`.
#[derive(Clone, Debug)]
pub struct GalerkinSystem {
    pub matrix: CMatrix,
    pub rhs: CVector,
    pub unknowns: Vec<usize>,
    pub mass: Vec<f64>,
    pub shift: f64,
}

/// Exterior data must vanish outside `[-T, T]`. Values on `Omega_T` are
/// allowed but irrelevant: they are absorbed into the unknown, so `f` and
/// `f + phi` with `phi` supported in `Omega_T` give the same solution.
fn check_datum(problem: &PolyParabolicProblem, f: &Field) -> Result<()> {
    let grid = problem.grid();
    if f.grid() != grid {
        return Err(Error::GridMismatch);
    }
    let region = Region { spatial: vec![true; grid.n_space()], time: grid.start_index()..grid.end_index() + 1 };
    if !f.supported_in(&region) {
        return Err(Error::Support("exterior datum must vanish outside [-T, T]".into()));
    }
    Ok(())
}

fn check_source(problem: &PolyParabolicProblem, source: Option<&Field>) -> Result<()> {
    if let Some(s) = source {
        if s.grid() != problem.grid() {
            return Err(Error::GridMismatch);
        }
        if !s.supported_in(&problem.partition().omega_t()) {
            return Err(Error::Support("source must be supported in Omega_T".into()));
        }
    }
    Ok(())
}

fn rhs_vector(
    problem: &PolyParabolicProblem,
    f: &Field,
    source: Option<&Field>,
    adjoint: bool,
) -> Result<CVector> {
    let pf = problem.apply(f, adjoint)?;
    let unknowns = problem.unknowns();
    let mass = problem.mass();
    Ok(CVector::from_iterator(
        unknowns.len(),
        unknowns.iter().zip(&mass).map(|(&k, &m)| {
            let src = source.map_or(ZERO, |s| s.data()[k]);
            (src - pf.data()[k]) * m
        }),
    ))
}

pub fn assemble_system(
    problem: &PolyParabolicProblem,
    f: &Field,
    source: Option<&Field>,
) -> Result<GalerkinSystem> {
    check_datum(problem, f)?;
    check_source(problem, source)?;
    Ok(GalerkinSystem {
        matrix: problem.galerkin_matrix(0.0)?,
        rhs: rhs_vector(problem, f, source, false)?,
        unknowns: problem.unknowns(),
        mass: problem.mass(),
        shift: 0.0,
    })
}

/// Solved field with its diagnostics.
#[derive(Clone, Debug)]
pub struct Solution {
    pub u: Field,
    pub datum: Field,
    pub adjoint: bool,
    /// `||P_V u - F||_{Omega_T} / ||u||`.
    pub interior_residual: f64,
    /// Largest `|u - f|` off `Omega_T`.
    pub exterior_residual: f64,
    /// Largest `|u|` on `t <= -T` (forward) or `t >= T` (adjoint).
    pub initial_residual: f64,
    /// `||u||` before the first time slice carrying data, over `||u||`
    /// (after the last one for the adjoint).
    pub causality_leak: f64,
    /// Relative residual of the linear solve after refinement.
    pub solver_residual: f64,
}

/// Relative margin below which the matrix counts as singular.
pub const EIGENVALUE_MARGIN: f64 = 1e-10;

/// Factored Galerkin system, reusable across data.
pub struct ForwardSolver {
    problem: PolyParabolicProblem,
    matrix: CMatrix,
    lu: LU<Complex64, Dyn, Dyn>,
    lower: CMatrix,
    upper: CMatrix,
    margin: f64,
    tolerance: f64,
}

impl std::fmt::Debug for ForwardSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ForwardSolver").field("margin", &self.margin).finish()
    }
}

fn max_abs(v: &CVector) -> f64 {
    v.iter().fold(0.0, |m, z| m.max(z.norm()))
}

impl ForwardSolver {
    /// Assembles and factors; fails with a Dirichlet-eigenvalue error when the
    /// relative singular-value margin is below `1e-10`.
    pub fn new(problem: &PolyParabolicProblem) -> Result<Self> {
        let matrix = problem.galerkin_matrix(0.0)?;
        let lu = matrix.clone().lu();
        let lower = lu.l();
        let upper = lu.u();
        if (0..upper.nrows()).any(|i| upper[(i, i)] == ZERO) {
            return Err(Error::DirichletEigenvalue { margin: 0.0 });
        }
        let mut s = ForwardSolver {
            problem: problem.clone(),
            matrix,
            lu,
            lower,
            upper,
            margin: 0.0,
            tolerance: 1e-10,
        };
        s.margin = s.singular_margin()?;
        if s.margin < EIGENVALUE_MARGIN {
            return Err(Error::DirichletEigenvalue { margin: s.margin });
        }
        Ok(s)
    }

    pub fn problem(&self) -> &PolyParabolicProblem {
        &self.problem
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// `sigma_min / ||M||_2`, estimated by power and inverse iteration
    /// (within about a percent when the extreme singular values cluster).
    pub fn margin(&self) -> f64 {
        self.margin
    }

    fn raw_solve(&self, b: &CVector) -> Option<CVector> {
        self.lu.solve(b)
    }

    fn raw_solve_adjoint(&self, b: &CVector) -> Option<CVector> {
        let w = self.upper.ad_solve_upper_triangular(b)?;
        let mut v = self.lower.ad_solve_lower_triangular(&w)?;
        self.lu.p().inv_permute_rows(&mut v);
        Some(v)
    }

    fn refine(&self, b: &CVector, adjoint: bool) -> Result<(CVector, f64)> {
        let apply = |x: &CVector| if adjoint { self.matrix.ad_mul(x) } else { &self.matrix * x };
        let solve = |r: &CVector| if adjoint { self.raw_solve_adjoint(r) } else { self.raw_solve(r) };
        let bn = max_abs(b);
        if bn == 0.0 {
            return Ok((CVector::zeros(b.len()), 0.0));
        }
        let mut x = solve(b).ok_or(Error::DirichletEigenvalue { margin: 0.0 })?;
        let mut rel = f64::INFINITY;
        for _ in 0..5 {
            let r = b - apply(&x);
            rel = max_abs(&r) / bn;
            if rel <= self.tolerance * 1e-3 {
                break;
            }
            let dx = solve(&r).ok_or(Error::DirichletEigenvalue { margin: 0.0 })?;
            x += dx;
        }
        if rel > self.tolerance {
            return Err(Error::NonConvergence(format!("relative residual {rel:.3e} after refinement")));
        }
        Ok((x, rel))
    }

    fn singular_margin(&self) -> Result<f64> {
        let n = self.matrix.nrows();
        let start = CVector::from_fn(n, |i, _| {
            Complex64::new(1.0 + (i as f64 * 0.618).sin(), (i as f64 * 0.377).cos())
        });
        let mut x = start.normalize();
        let mut top = 0.0;
        for _ in 0..200 {
            let y = self.matrix.ad_mul(&(&self.matrix * &x));
            let est = y.norm().sqrt();
            x = y.normalize();
            if (est - top).abs() <= 1e-12 * est {
                top = est;
                break;
            }
            top = est;
        }
        let mut x = start.normalize();
        let mut inv = 0.0;
        for _ in 0..200 {
            let y = self.raw_solve(&x).ok_or(Error::DirichletEigenvalue { margin: 0.0 })?;
            let z = self.raw_solve_adjoint(&y).ok_or(Error::DirichletEigenvalue { margin: 0.0 })?;
            let est = z.norm().sqrt();
            if !est.is_finite() {
                return Ok(0.0);
            }
            x = z.normalize();
            if (est - inv).abs() <= 1e-12 * est {
                inv = est;
                break;
            }
            inv = est;
        }
        Ok(1.0 / (inv * top))
    }

    fn finish(&self, f: &Field, source: Option<&Field>, v: CVector, rel: f64, adjoint: bool) -> Result<Solution> {
        let grid = self.problem.grid();
        let unknowns = self.problem.unknowns();
        let mut u = f.clone();
        for (&k, z) in unknowns.iter().zip(v.iter()) {
            u.data_mut()[k] += z;
        }
        let omega_t = self.problem.partition().omega_t();
        let mut r = self.problem.apply(&u, adjoint)?;
        if let Some(s) = source {
            r = r.sub(s)?;
        }
        let un = u.norm();
        let interior_residual = if un > 0.0 { r.norm_on(&omega_t) / un } else { r.norm_on(&omega_t) };
        let ns = grid.n_space();
        let mut exterior_residual: f64 = 0.0;
        let mut initial_residual: f64 = 0.0;
        let inside: std::collections::HashSet<usize> = unknowns.iter().copied().collect();
        for k in 0..grid.len() {
            let j = k / ns;
            if !inside.contains(&k) {
                exterior_residual = exterior_residual.max((u.data()[k] - f.data()[k]).norm());
            }
            let past = if adjoint { j >= grid.end_index() } else { j <= grid.start_index() };
            if past {
                initial_residual = initial_residual.max(u.data()[k].norm());
            }
        }
        let omega = &self.problem.partition().omega;
        let occupied: Vec<usize> = (0..grid.nt)
            .filter(|&j| {
                (0..ns).any(|i| {
                    (!omega[i] && f.at(j, i) != ZERO) || source.is_some_and(|s| s.at(j, i) != ZERO)
                })
            })
            .collect();
        let causality_leak = match (occupied.first(), occupied.last()) {
            (Some(&first), Some(&last)) if un > 0.0 => {
                let range = if adjoint { last + 1..grid.nt } else { 0..first };
                u.norm_on(&Region { spatial: vec![true; ns], time: range }) / un
            }
            _ => 0.0,
        };
        Ok(Solution {
            u,
            datum: f.clone(),
            adjoint,
            interior_residual,
            exterior_residual,
            initial_residual,
            causality_leak,
            solver_residual: rel,
        })
    }

    /// `P_V u = F` in `Omega_T`, `u = f` elsewhere.
    pub fn solve(&self, f: &Field, source: Option<&Field>) -> Result<Solution> {
        check_datum(&self.problem, f)?;
        check_source(&self.problem, source)?;
        let b = rhs_vector(&self.problem, f, source, false)?;
        let (v, rel) = self.refine(&b, false)?;
        self.finish(f, source, v, rel, false)
    }

    /// `P_V^* u = F` in `Omega_T`, `u = zeta` elsewhere.
    pub fn solve_adjoint(&self, zeta: &Field, source: Option<&Field>) -> Result<Solution> {
        check_datum(&self.problem, zeta)?;
        check_source(&self.problem, source)?;
        let b = rhs_vector(&self.problem, zeta, source, true)?;
        let (v, rel) = self.refine(&b, true)?;
        self.finish(zeta, source, v, rel, true)
    }
}

pub fn solve_forward(problem: &PolyParabolicProblem, f: &Field, source: Option<&Field>) -> Result<Solution> {
    ForwardSolver::new(problem)?.solve(f, source)
}

pub fn solve_adjoint(problem: &PolyParabolicProblem, zeta: &Field, source: Option<&Field>) -> Result<Solution> {
    ForwardSolver::new(problem)?.solve_adjoint(zeta, source)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EigenCondition {
    Ok { margin: f64 },
    Violated { margin: f64 },
}

impl EigenCondition {
    pub fn is_ok(&self) -> bool {
        matches!(self, EigenCondition::Ok { .. })
    }

    pub fn margin(&self) -> f64 {
        match *self {
            EigenCondition::Ok { margin } | EigenCondition::Violated { margin } => margin,
        }
    }
}

pub fn eigenvalue_condition_check(problem: &PolyParabolicProblem) -> Result<EigenCondition> {
    match ForwardSolver::new(problem) {
        Ok(s) => Ok(EigenCondition::Ok { margin: s.margin() }),
        Err(Error::DirichletEigenvalue { margin }) => Ok(EigenCondition::Violated { margin }),
        Err(e) => Err(e),
    }
}

/// Eigenvalue `c` of `D^{-1} M` nearest zero, where `D` is the mass; the
/// potential `V - c` on `Omega_T` makes the system singular. Dense
/// non-symmetric eigensolve, intended for small grids.
pub fn smallest_dirichlet_eigenvalue(problem: &PolyParabolicProblem) -> Result<Complex64> {
    let m = problem.galerkin_matrix(0.0)?;
    let mass = problem.mass();
    let n = m.nrows();
    let a = CMatrix::from_fn(n, n, |p, q| m[(p, q)] / mass[p]);
    let eig = a
        .clone()
        .schur()
        .eigenvalues()
        .ok_or_else(|| Error::Eigensolver("Schur eigenvalues unavailable".into()))?;
    let mut c = eig
        .iter()
        .copied()
        .min_by(|x, y| x.norm().total_cmp(&y.norm()))
        .ok_or_else(|| Error::Eigensolver("empty spectrum".into()))?;
    // Rayleigh-quotient inverse iteration to polish the Schur estimate.
    let mut x = CVector::from_fn(n, |i, _| Complex64::new(1.0, 0.1 * i as f64));
    for _ in 0..3 {
        let shifted = &a - CMatrix::identity(n, n) * c;
        match shifted.lu().solve(&x) {
            Some(y) if y.norm().is_finite() && y.norm() > 0.0 => {
                x = y.normalize();
                let ax = &a * &x;
                c = x.dotc(&ax) / x.dotc(&x);
            }
            _ => break,
        }
    }
    Ok(c)
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct CoercivityReport {
    /// Smallest eigenvalue of the Hermitian part against the `H^{s_N}` Gram.
    pub margin: f64,
    /// `min_k cos(s_k pi / 2)`.
    pub c_s: f64,
    /// Smallest eigenvalue of the `sum b_k |z|^{s_k}` Gram against the same norm.
    pub kappa: f64,
    /// `c_s * kappa`, which the margin dominates when `V + mu = 0`.
    pub lower_bound: f64,
}

fn min_generalized_eigenvalue(a: &CMatrix, gram: &CMatrix) -> Result<f64> {
    let chol = gram
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Eigensolver("norm Gram matrix is not positive definite".into()))?;
    let l = chol.l();
    let x = l
        .solve_lower_triangular(a)
        .ok_or_else(|| Error::Eigensolver("triangular solve failed".into()))?;
    let c = l
        .solve_lower_triangular(&x.adjoint())
        .ok_or_else(|| Error::Eigensolver("triangular solve failed".into()))?;
    let c = (&c + c.adjoint()) * Complex64::new(0.5, 0.0);
    let ev = c.symmetric_eigenvalues();
    Ok(ev.iter().copied().fold(f64::INFINITY, f64::min))
}

/// Coercivity of `B_V + mu (., .)` on the interior space, measured in the
/// discrete `H^{s_N}` norm.
pub fn coercivity_margin(problem: &PolyParabolicProblem, mu: f64) -> Result<CoercivityReport> {
    let neg = problem.potential().data().iter().fold(0.0f64, |m, v| m.max(-v.re));
    if mu < neg * (1.0 - 1e-12) {
        return Err(Error::InvalidArgument(format!("shift {mu} below ||min(V, 0)||_inf = {neg}")));
    }
    let m = problem.galerkin_matrix(mu)?;
    let herm = (&m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let decomp = problem.decomposition();
    let grid = decomp.grid().clone();
    let top = *problem.exponents().last().expect("nonempty");
    let modulus = |lam: f64, k: usize| -> f64 {
        if grid.is_time_nyquist(k) {
            Complex64::new(lam, std::f64::consts::PI / grid.dt()).norm()
        } else {
            base(decomp, lam, k, false).norm()
        }
    };
    let gram = problem.interior_gram(|lam, k| {
        Complex64::new((1.0 + modulus(lam, k).powi(2)).powf(0.5 * top), 0.0)
    })?;
    let gram = (&gram + gram.adjoint()) * Complex64::new(0.5, 0.0);
    let sym = problem.interior_gram(|lam, k| {
        let r = modulus(lam, k);
        let v: f64 = problem.exponents().iter().zip(problem.weights()).map(|(&s, &b)| b * r.powf(s)).sum();
        Complex64::new(v, 0.0)
    })?;
    let sym = (&sym + sym.adjoint()) * Complex64::new(0.5, 0.0);
    let margin = min_generalized_eigenvalue(&herm, &gram)?;
    let kappa = min_generalized_eigenvalue(&sym, &gram)?;
    let c_s = problem
        .exponents()
        .iter()
        .map(|s| (s * std::f64::consts::PI / 2.0).cos())
        .fold(f64::INFINITY, f64::min);
    Ok(CoercivityReport { margin, c_s, kappa, lower_bound: c_s * kappa })
}
