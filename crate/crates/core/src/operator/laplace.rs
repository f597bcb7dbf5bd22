//! Discrete Laplace-Beltrami operators and their eigendecompositions under
//! the volume-weighted inner product.

use crate::error::{Error, Result};
use crate::grid::SpaceTimeGrid;
use crate::metric::MetricField;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use std::f64::consts::PI;
use std::sync::Arc;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LaplaceScheme {
    /// Second-order divergence-form differences on the periodic lattice.
    FiniteDifference,
    /// Exact `|k|^2` symbol; identity metric only.
    Fourier,
}

enum Kind {
    Periodic {
        symbol: Vec<f64>,
        fft: Arc<dyn Fft<f64>>,
        ifft: Arc<dyn Fft<f64>>,
    },
    Dense {
        values: Vec<f64>,
        /// Column `j` holds the eigenfunction for `values[j]`.
        vectors: DMatrix<f64>,
        weight: Vec<f64>,
        generator: DMatrix<f64>,
    },
}

/// Eigenpairs of `-Delta_g`, normalized so that `h^n sum sqrt|g| phi_j phi_k = delta_jk`.
pub struct SpectralDecomposition {
    grid: SpaceTimeGrid,
    scheme: LaplaceScheme,
    kind: Kind,
}

impl std::fmt::Debug for SpectralDecomposition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralDecomposition")
            .field("scheme", &self.scheme)
            .field("dense", &self.is_dense())
            .field("modes", &self.n_modes())
            .finish()
    }
}

/// Default assembly: finite differences, through the FFT when the metric is
/// the identity and through a dense eigensolve otherwise.
pub fn assemble_laplace_beltrami(
    grid: &SpaceTimeGrid,
    metric: &MetricField,
) -> Result<SpectralDecomposition> {
    SpectralDecomposition::assemble(grid, metric, LaplaceScheme::FiniteDifference, false)
}

fn periodic_symbol(grid: &SpaceTimeGrid, scheme: LaplaceScheme) -> Vec<f64> {
    let n = grid.nx;
    let h = grid.h();
    let one = |k: usize| -> f64 {
        match scheme {
            LaplaceScheme::FiniteDifference => (2.0 / h * (PI * k as f64 / n as f64).sin()).powi(2),
            LaplaceScheme::Fourier => {
                let ks = if 2 * k <= n { k as f64 } else { k as f64 - n as f64 };
                (2.0 * PI * ks / grid.extent).powi(2)
            }
        }
    };
    (0..grid.n_space())
        .map(|i| {
            let a = grid.axes(i);
            (0..grid.spatial_dim).map(|k| one(a[k])).sum()
        })
        .collect()
}

/// Stiffness matrix of the averaged one-sided difference energy.
fn stiffness(grid: &SpaceTimeGrid, metric: &MetricField) -> DMatrix<f64> {
    let ns = grid.n_space();
    let n = grid.nx;
    let h = grid.h();
    let dim = grid.spatial_dim;
    let mut k = DMatrix::<f64>::zeros(ns, ns);
    let combos = 1usize << dim;
    let w = 1.0 / combos as f64;
    let step = |i: usize, axis: usize, forward: bool| -> usize {
        let mut a = grid.axes(i);
        a[axis] = if forward { (a[axis] + 1) % n } else { (a[axis] + n - 1) % n };
        grid.from_axes(a)
    };
    for i in 0..ns {
        let f = metric.flux(i);
        let coef = |a: usize, b: usize| -> f64 {
            match (a, b) {
                (0, 0) => f[0],
                (1, 1) => f[2],
                _ => f[1],
            }
        };
        for combo in 0..combos {
            // Stencil of the difference along each axis: (node, weight) pairs.
            let stencils: Vec<[(usize, f64); 2]> = (0..dim)
                .map(|axis| {
                    let fwd = combo >> axis & 1 == 0;
                    if fwd {
                        [(step(i, axis, true), 1.0 / h), (i, -1.0 / h)]
                    } else {
                        [(i, 1.0 / h), (step(i, axis, false), -1.0 / h)]
                    }
                })
                .collect();
            for a in 0..dim {
                for b in 0..dim {
                    let c = w * coef(a, b);
                    if c == 0.0 {
                        continue;
                    }
                    for &(p, dp) in &stencils[a] {
                        for &(q, dq) in &stencils[b] {
                            k[(p, q)] += c * dp * dq;
                        }
                    }
                }
            }
        }
    }
    k
}

impl SpectralDecomposition {
    /// `force_dense` routes the identity metric through the dense path too,
    /// which is useful as a cross-check.
    pub fn assemble(
        grid: &SpaceTimeGrid,
        metric: &MetricField,
        scheme: LaplaceScheme,
        force_dense: bool,
    ) -> Result<Self> {
        if metric.n_nodes() != grid.n_space() || metric.dim() != grid.spatial_dim {
            return Err(Error::GridMismatch);
        }
        let (lo, hi) = metric.spectrum_bounds();
        let lam = metric.ellipticity();
        if !(lo >= lam * (1.0 - 1e-12) && hi <= (1.0 + 1e-12) / lam) {
            return Err(Error::Ellipticity(format!(
                "metric spectrum [{lo}, {hi}] violates the constant {lam}"
            )));
        }
        if scheme == LaplaceScheme::Fourier && !metric.is_identity() {
            return Err(Error::NonIdentityMetric("the Fourier scheme"));
        }
        if metric.is_identity() && !(force_dense && scheme == LaplaceScheme::FiniteDifference) {
            let mut planner = FftPlanner::new();
            return Ok(SpectralDecomposition {
                grid: grid.clone(),
                scheme,
                kind: Kind::Periodic {
                    symbol: periodic_symbol(grid, scheme),
                    fft: planner.plan_fft_forward(grid.nx),
                    ifft: planner.plan_fft_inverse(grid.nx),
                },
            });
        }
        Self::dense(grid, metric)
    }

    fn dense(grid: &SpaceTimeGrid, metric: &MetricField) -> Result<Self> {
        let ns = grid.n_space();
        let hn = grid.h().powi(grid.spatial_dim as i32);
        let k = stiffness(grid, metric);
        let weight: Vec<f64> = (0..ns).map(|i| metric.volume(i)).collect();
        let isq: Vec<f64> = weight.iter().map(|w| 1.0 / w.sqrt()).collect();
        let s = DMatrix::from_fn(ns, ns, |i, j| isq[i] * k[(i, j)] * isq[j]);
        let s = (&s + s.transpose()) * 0.5;
        let eig = s.symmetric_eigen();
        let mut order: Vec<usize> = (0..ns).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let mut values: Vec<f64> = order.iter().map(|&j| eig.eigenvalues[j]).collect();
        let mut vectors = DMatrix::from_fn(ns, ns, |i, c| {
            isq[i] * eig.eigenvectors[(i, order[c])] / hn.sqrt()
        });
        // Constants are annihilated exactly by the difference energy; pin the mass mode.
        if values[0].abs() > 1e-8 * values[ns - 1].max(1.0) {
            return Err(Error::Eigensolver(format!("lowest eigenvalue {} is not zero", values[0])));
        }
        values[0] = 0.0;
        let c0 = 1.0 / (hn * weight.iter().sum::<f64>()).sqrt();
        vectors.column_mut(0).fill(c0);
        let generator = DMatrix::from_fn(ns, ns, |i, j| k[(i, j)] / weight[i]);
        let av = &generator * &vectors;
        for j in 0..ns {
            let lam = values[j];
            let mut r = 0.0f64;
            let mut nv = 0.0f64;
            for i in 0..ns {
                r = r.max((av[(i, j)] - lam * vectors[(i, j)]).abs());
                nv = nv.max(vectors[(i, j)].abs());
            }
            if r > 1e-10 * (1.0 + lam) * nv.max(1.0) {
                return Err(Error::Eigensolver(format!("eigenpair {j} residual {r:.3e}")));
            }
            if lam < 0.0 {
                if lam < -1e-10 * values[ns - 1] {
                    return Err(Error::Eigensolver(format!("negative eigenvalue {lam}")));
                }
                values[j] = 0.0;
            }
        }
        Ok(SpectralDecomposition {
            grid: grid.clone(),
            scheme: LaplaceScheme::FiniteDifference,
            kind: Kind::Dense { values, vectors, weight, generator },
        })
    }

    pub fn grid(&self) -> &SpaceTimeGrid {
        &self.grid
    }

    pub fn scheme(&self) -> LaplaceScheme {
        self.scheme
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.kind, Kind::Dense { .. })
    }

    pub fn n_modes(&self) -> usize {
        self.grid.n_space()
    }

    /// Eigenvalue of coefficient slot `j` (FFT layout for periodic
    /// decompositions, ascending for dense ones).
    pub fn eigenvalue(&self, j: usize) -> f64 {
        match &self.kind {
            Kind::Periodic { symbol, .. } => symbol[j],
            Kind::Dense { values, .. } => values[j],
        }
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        (0..self.n_modes()).map(|j| self.eigenvalue(j)).collect()
    }

    pub fn sorted_eigenvalues(&self) -> Vec<f64> {
        let mut v = self.eigenvalues();
        v.sort_by(f64::total_cmp);
        v
    }

    /// Dense eigenvectors (columns), when available.
    pub fn eigenvectors(&self) -> Option<&DMatrix<f64>> {
        match &self.kind {
            Kind::Dense { vectors, .. } => Some(vectors),
            Kind::Periodic { .. } => None,
        }
    }

    /// Assembled `-Delta_g` as a dense matrix.
    pub fn generator(&self) -> DMatrix<f64> {
        match &self.kind {
            Kind::Dense { generator, .. } => generator.clone(),
            Kind::Periodic { .. } => {
                let ns = self.n_modes();
                let mut m = DMatrix::zeros(ns, ns);
                for q in 0..ns {
                    let mut e = vec![Complex64::new(0.0, 0.0); ns];
                    e[q] = Complex64::new(1.0, 0.0);
                    let mut c = self.to_coefficients(&e, 1);
                    for (j, z) in c.iter_mut().enumerate() {
                        *z *= self.eigenvalue(j);
                    }
                    let back = self.from_coefficients(&c, 1);
                    for p in 0..ns {
                        m[(p, q)] = back[p].re;
                    }
                }
                m
            }
        }
    }

    /// Volume weight `sqrt|g|` per node.
    pub fn weight(&self, i: usize) -> f64 {
        match &self.kind {
            Kind::Dense { weight, .. } => weight[i],
            Kind::Periodic { .. } => 1.0,
        }
    }

    fn fft_slice(&self, slice: &mut [Complex64], fft: &Arc<dyn Fft<f64>>) {
        let n = self.grid.nx;
        if self.grid.spatial_dim == 1 {
            fft.process(slice);
            return;
        }
        for row in slice.chunks_mut(n) {
            fft.process(row);
        }
        let mut col = vec![Complex64::new(0.0, 0.0); n];
        for c in 0..n {
            for r in 0..n {
                col[r] = slice[r * n + c];
            }
            fft.process(&mut col);
            for r in 0..n {
                slice[r * n + c] = col[r];
            }
        }
    }

    /// Weighted-orthonormal coefficients of `count` consecutive spatial slices.
    pub fn to_coefficients(&self, data: &[Complex64], count: usize) -> Vec<Complex64> {
        let ns = self.n_modes();
        assert_eq!(data.len(), ns * count);
        let hn = self.grid.h().powi(self.grid.spatial_dim as i32);
        match &self.kind {
            Kind::Periodic { fft, .. } => {
                let scale = (hn / ns as f64).sqrt();
                let mut out = data.to_vec();
                out.par_chunks_mut(ns).for_each(|s| {
                    self.fft_slice(s, fft);
                    s.iter_mut().for_each(|z| *z *= scale);
                });
                out
            }
            Kind::Dense { vectors, weight, .. } => {
                let (re, im) = split(data, ns, count, |i| hn * weight[i]);
                let cr = vectors.tr_mul(&re);
                let ci = vectors.tr_mul(&im);
                join(&cr, &ci, ns, count)
            }
        }
    }

    pub fn from_coefficients(&self, coeffs: &[Complex64], count: usize) -> Vec<Complex64> {
        let ns = self.n_modes();
        assert_eq!(coeffs.len(), ns * count);
        let hn = self.grid.h().powi(self.grid.spatial_dim as i32);
        match &self.kind {
            Kind::Periodic { ifft, .. } => {
                let scale = 1.0 / (hn * ns as f64).sqrt();
                let mut out = coeffs.to_vec();
                out.par_chunks_mut(ns).for_each(|s| {
                    self.fft_slice(s, ifft);
                    s.iter_mut().for_each(|z| *z *= scale);
                });
                out
            }
            Kind::Dense { vectors, .. } => {
                let (re, im) = split(coeffs, ns, count, |_| 1.0);
                join(&(vectors * re), &(vectors * im), ns, count)
            }
        }
    }
}

fn split(
    data: &[Complex64],
    ns: usize,
    count: usize,
    w: impl Fn(usize) -> f64,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let re = DMatrix::from_fn(ns, count, |i, c| w(i) * data[c * ns + i].re);
    let im = DMatrix::from_fn(ns, count, |i, c| w(i) * data[c * ns + i].im);
    (re, im)
}

fn join(re: &DMatrix<f64>, im: &DMatrix<f64>, ns: usize, count: usize) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(ns * count);
    for c in 0..count {
        for i in 0..ns {
            out.push(Complex64::new(re[(i, c)], im[(i, c)]));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid1() -> SpaceTimeGrid {
        SpaceTimeGrid::new(1, 2.0 * PI, 64, 1.0, 4, 256).unwrap()
    }

    #[test]
    fn identity_symbol_matches_closed_form() {
        let g = grid1();
        let d = assemble_laplace_beltrami(&g, &MetricField::identity(&g)).unwrap();
        let h = g.h();
        for k in 0..64 {
            let want = (2.0 / h).powi(2) * (PI * k as f64 / 64.0).sin().powi(2);
            assert!((d.eigenvalue(k) - want).abs() < 1e-12 * want.max(1.0));
        }
        assert_eq!(d.eigenvalue(0), 0.0);
    }

    #[test]
    fn dense_identity_reproduces_fft_spectrum() {
        let g = grid1();
        let m = MetricField::identity(&g);
        let fast = SpectralDecomposition::assemble(&g, &m, LaplaceScheme::FiniteDifference, false).unwrap();
        let dense = SpectralDecomposition::assemble(&g, &m, LaplaceScheme::FiniteDifference, true).unwrap();
        assert!(dense.is_dense());
        let (a, b) = (fast.sorted_eigenvalues(), dense.sorted_eigenvalues());
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-10 * (1.0 + x));
        }
    }

    #[test]
    fn mass_mode_is_constant() {
        let g = grid1();
        let m = MetricField::sinusoid(&g, 0.5, Some(0.5)).unwrap();
        let d = assemble_laplace_beltrami(&g, &m).unwrap();
        let v = d.eigenvectors().unwrap();
        let c = v[(0, 0)];
        assert!(v.column(0).iter().all(|&x| x == c));
        assert_eq!(d.eigenvalue(0), 0.0);
    }

    #[test]
    fn weighted_symmetry_and_orthonormality() {
        let g = grid1();
        let m = MetricField::sinusoid(&g, 0.5, Some(0.5)).unwrap();
        let d = assemble_laplace_beltrami(&g, &m).unwrap();
        let a = d.generator();
        let ns = 64;
        for i in 0..ns {
            for j in 0..ns {
                let l = m.volume(i) * a[(i, j)];
                let r = m.volume(j) * a[(j, i)];
                assert!((l - r).abs() < 1e-10 * (1.0 + l.abs()));
            }
        }
        let v = d.eigenvectors().unwrap();
        let h = g.h();
        for p in 0..ns {
            for q in 0..ns {
                let ip: f64 = (0..ns).map(|i| h * m.volume(i) * v[(i, p)] * v[(i, q)]).sum();
                let want = if p == q { 1.0 } else { 0.0 };
                assert!((ip - want).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn variable_spectrum_bounded_by_ellipticity() {
        let g = grid1();
        let m = MetricField::sinusoid(&g, 0.5, Some(0.5)).unwrap();
        let d = assemble_laplace_beltrami(&g, &m).unwrap();
        let top = (2.0 / g.h()).powi(2);
        for l in d.eigenvalues() {
            assert!(l >= 0.0 && l <= top / m.ellipticity());
        }
    }

    #[test]
    fn coefficient_round_trip() {
        let g = SpaceTimeGrid::new(2, 2.0 * PI, 8, 1.0, 2, 8).unwrap();
        let m = MetricField::from_fn(&g, None, |x| {
            [1.2 + 0.3 * x[0].cos(), 0.1 * x[1].sin(), 1.0 + 0.2 * x[1].sin()]
        })
        .unwrap();
        let d = assemble_laplace_beltrami(&g, &m).unwrap();
        let data: Vec<Complex64> =
            (0..128).map(|k| Complex64::new((k as f64 * 0.37).sin(), (k as f64).cos())).collect();
        let back = d.from_coefficients(&d.to_coefficients(&data, 2), 2);
        for (a, b) in data.iter().zip(&back) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn fourier_scheme_requires_identity() {
        let g = grid1();
        let m = MetricField::sinusoid(&g, 0.5, None).unwrap();
        assert!(SpectralDecomposition::assemble(&g, &m, LaplaceScheme::Fourier, false).is_err());
    }
}
