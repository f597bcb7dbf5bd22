//! Constructive Runge approximation: exterior controls whose solutions
//! match a target on `Omega_T` in the least-squares sense.

use crate::dnmap::{solution_bank, ExteriorBasis};
use crate::error::{Error, Result};
use crate::field::Field;
use crate::forward::{ForwardSolver, PolyParabolicProblem};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// Smallest accepted Tikhonov weight, relative to `||U||_2^2`.
pub const TIKHONOV_FLOOR: f64 = 1e-20;

#[derive(Clone, Debug)]
pub struct RungeRequest {
    pub target: Field,
    pub controls: ExteriorBasis,
    /// Tikhonov weight relative to the squared norm of the control-to-trace map.
    pub epsilon: f64,
}

#[derive(Clone, Debug)]
pub struct RungeResult {
    pub coefficients: Vec<Complex64>,
    pub control: Field,
    /// `||u_f - phi||_{Omega_T} / ||phi||_{Omega_T}` for the regularized fit.
    pub achieved_error: f64,
    /// Unregularized relative error using the first `k + 1` controls.
    pub nested_errors: Vec<f64>,
}

/// Weighted interior traces `sqrt(mass) * u_{f_k}` as matrix columns.
pub fn trace_matrix(problem: &PolyParabolicProblem, traces: &[Field]) -> DMatrix<Complex64> {
    let unknowns = problem.unknowns();
    let w: Vec<f64> = problem.mass().iter().map(|m| m.sqrt()).collect();
    DMatrix::from_fn(unknowns.len(), traces.len(), |p, k| traces[k].data()[unknowns[p]] * w[p])
}

fn weighted_target(problem: &PolyParabolicProblem, target: &Field) -> DVector<Complex64> {
    let unknowns = problem.unknowns();
    let mass = problem.mass();
    DVector::from_iterator(unknowns.len(), unknowns.iter().zip(&mass).map(|(&k, m)| target.data()[k] * m.sqrt()))
}

/// Relative residuals of the orthogonal projections of `b` onto the nested
/// column spans of `a`, by twice-applied modified Gram-Schmidt. A column
/// already in the span leaves the error unchanged.
pub fn nested_projection_errors(a: &DMatrix<Complex64>, b: &DVector<Complex64>) -> Vec<f64> {
    let bn = b.norm();
    let mut q: Vec<DVector<Complex64>> = Vec::new();
    let mut r = b.clone();
    let mut out = Vec::with_capacity(a.ncols());
    for k in 0..a.ncols() {
        let col = a.column(k).into_owned();
        let mut v = col.clone();
        for _ in 0..2 {
            for qi in &q {
                let c = qi.dotc(&v);
                v -= qi * c;
            }
        }
        let vn = v.norm();
        if vn > 1e-13 * col.norm() {
            let qk = v / Complex64::new(vn, 0.0);
            let c = qk.dotc(&r);
            r -= &qk * c;
            q.push(qk);
        }
        out.push(if bn > 0.0 { r.norm() / bn } else { 0.0 });
    }
    out
}

/// Minimizes `||U c - phi||^2 + eps ||U||_2^2 ||c||^2` through a QR
/// factorization of the stacked matrix `[U; sqrt(eps) ||U|| I]`.
pub fn tikhonov_solve(a: &DMatrix<Complex64>, b: &DVector<Complex64>, eps: f64) -> Result<DVector<Complex64>> {
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::InvalidArgument("Tikhonov weight must be positive".into()));
    }
    if eps < TIKHONOV_FLOOR {
        return Err(Error::IllConditioned(format!("Tikhonov weight {eps:e} below floor {TIKHONOV_FLOOR:e}")));
    }
    let (m, n) = (a.nrows(), a.ncols());
    let scale = a.clone().singular_values().max();
    if scale == 0.0 {
        return Ok(DVector::zeros(n));
    }
    let mut stacked = DMatrix::<Complex64>::zeros(m + n, n);
    stacked.view_mut((0, 0), (m, n)).copy_from(a);
    let d = Complex64::new(eps.sqrt() * scale, 0.0);
    for k in 0..n {
        stacked[(m + k, k)] = d;
    }
    let mut rhs = DVector::<Complex64>::zeros(m + n);
    rhs.rows_mut(0, m).copy_from(b);
    let qr = stacked.qr();
    let qtb = qr.q().ad_mul(&rhs);
    qr.r()
        .solve_upper_triangular(&qtb)
        .ok_or_else(|| Error::IllConditioned("singular regularized system".into()))
}

pub fn runge_approximate(request: &RungeRequest, problem: &PolyParabolicProblem) -> Result<RungeResult> {
    let solver = ForwardSolver::new(problem)?;
    runge_approximate_with(request, &solver)
}

pub fn runge_approximate_with(request: &RungeRequest, solver: &ForwardSolver) -> Result<RungeResult> {
    let problem = solver.problem();
    if request.target.grid() != problem.grid() {
        return Err(Error::GridMismatch);
    }
    if !request.target.supported_in(&problem.partition().omega_t()) {
        return Err(Error::Support("Runge target must be supported in Omega_T".into()));
    }
    let bank = solution_bank(solver, &request.controls, false)?;
    let traces: Vec<Field> = bank.into_iter().map(|s| s.u).collect();
    let a = trace_matrix(problem, &traces);
    let b = weighted_target(problem, &request.target);
    let c = tikhonov_solve(&a, &b, request.epsilon)?;
    let bn = b.norm();
    let achieved_error = if bn > 0.0 { (&a * &c - &b).norm() / bn } else { 0.0 };
    let coefficients: Vec<Complex64> = c.iter().copied().collect();
    Ok(RungeResult {
        control: request.controls.combine(&coefficients)?,
        coefficients,
        achieved_error,
        nested_errors: nested_projection_errors(&a, &b),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nested_errors_match_direct_least_squares() {
        let a = DMatrix::from_fn(12, 5, |i, j| Complex64::new(((i * 7 + j * 3) % 11) as f64, (i as f64 - j as f64).sin()));
        let b = DVector::from_fn(12, |i, _| Complex64::new(i as f64 * 0.3, 1.0));
        let nested = nested_projection_errors(&a, &b);
        for k in 1..=5 {
            let sub = a.columns(0, k).into_owned();
            let svd = sub.clone().svd(true, true);
            let x = svd.solve(&b, 1e-14).unwrap();
            let direct = (&sub * x - &b).norm() / b.norm();
            assert!((nested[k - 1] - direct).abs() < 1e-12, "{k}: {} vs {direct}", nested[k - 1]);
        }
        assert!(nested.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn dependent_column_keeps_error() {
        let mut a = DMatrix::from_fn(6, 3, |i, j| Complex64::new((i + j) as f64, 0.0));
        a.set_column(1, &(a.column(0) * Complex64::new(2.0, 0.0)));
        let b = DVector::from_fn(6, |i, _| Complex64::new((i * i) as f64, 0.0));
        let e = nested_projection_errors(&a, &b);
        assert_eq!(e[0], e[1]);
    }

    #[test]
    fn tikhonov_floor() {
        let a = DMatrix::<Complex64>::identity(3, 3);
        let b = DVector::from_element(3, Complex64::new(1.0, 0.0));
        assert!(matches!(tikhonov_solve(&a, &b, 1e-22), Err(Error::IllConditioned(_))));
        let x = tikhonov_solve(&a, &b, 1.0).unwrap();
        assert!((x[0].re - 0.5).abs() < 1e-14);
    }
}
