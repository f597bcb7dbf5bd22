//! Physical-space evaluation of `H^s` from the Gaussian heat kernel:
//! `(1/Gamma(-s)) int_0^inf int (u(y, t - tau) - u(x, t)) p_tau(x - y) tau^{-1-s} dy dtau`.
//!
//! Shares nothing with the spectral path: spatial smoothing is a direct
//! periodic image sum and the time shift is polynomial interpolation.

use super::quadrature::QuadratureRule;
use crate::error::{Error, Result};
use crate::field::Field;
use crate::grid::SpaceTimeGrid;
use crate::metric::MetricField;
use num_complex::Complex64;
use rayon::prelude::*;
use statrs::function::gamma::gamma;
use std::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum TimeInterpolation {
    Linear,
    #[default]
    Cubic,
}

type Samples = Vec<Complex64>;

/// Circular convolution along one axis with taps `ker[d]` applied as
/// `out[i] = sum_d ker[d] u[i - d]`.
fn convolve_axis(grid: &SpaceTimeGrid, u: &[Complex64], ker: &[(usize, f64)], axis: usize) -> Samples {
    let n = grid.nx;
    let ns = grid.n_space();
    let mut out = vec![Complex64::new(0.0, 0.0); u.len()];
    for (slice_in, slice_out) in u.chunks(ns).zip(out.chunks_mut(ns)) {
        for (i, o) in slice_out.iter_mut().enumerate() {
            let a = grid.axes(i);
            let mut acc = Complex64::new(0.0, 0.0);
            for &(d, w) in ker {
                let mut b = a;
                b[axis] = (a[axis] + n - d) % n;
                acc += slice_in[grid.from_axes(b)] * w;
            }
            *o = acc;
        }
    }
    out
}

fn gaussian_taps(grid: &SpaceTimeGrid, tau: f64) -> Vec<(usize, f64)> {
    let h = grid.h();
    let l = grid.extent;
    let reach = (4.0 * tau * 45.0).sqrt();
    let images = (reach / l).ceil() as i64 + 1;
    let norm = h / (4.0 * PI * tau).sqrt();
    let mut taps = Vec::new();
    for d in 0..grid.nx {
        let mut k = 0.0;
        for m in -images..=images {
            let r = d as f64 * h + m as f64 * l;
            if r.abs() <= reach + l {
                k += (-r * r / (4.0 * tau)).exp();
            }
        }
        if k > 0.0 {
            taps.push((d, norm * k));
        }
    }
    taps
}

/// Fourth-order periodic difference Laplacian.
fn laplacian4(grid: &SpaceTimeGrid, u: &[Complex64]) -> Samples {
    let h2 = grid.h() * grid.h();
    let taps = [(0usize, -30.0), (1, 16.0), (2, -1.0), (grid.nx - 1, 16.0), (grid.nx - 2, -1.0)];
    let taps: Vec<(usize, f64)> = taps.iter().map(|&(d, w)| (d, w / (12.0 * h2))).collect();
    let mut out = vec![Complex64::new(0.0, 0.0); u.len()];
    for axis in 0..grid.spatial_dim {
        let part = convolve_axis(grid, u, &taps, axis);
        out.iter_mut().zip(part).for_each(|(o, p)| *o += p);
    }
    out
}

/// Spatial heat flow `e^{tau Delta} u` on every time slice.
fn spatial_heat(grid: &SpaceTimeGrid, u: &[Complex64], tau: f64) -> Samples {
    if tau < grid.h() * grid.h() {
        // Third-order Taylor expansion; the Gaussian is under-resolved here.
        let l1 = laplacian4(grid, u);
        let l2 = laplacian4(grid, &l1);
        let l3 = laplacian4(grid, &l2);
        return (0..u.len())
            .map(|k| u[k] + l1[k] * tau + l2[k] * (tau * tau / 2.0) + l3[k] * (tau.powi(3) / 6.0))
            .collect();
    }
    let taps = gaussian_taps(grid, tau);
    let mut v = convolve_axis(grid, u, &taps, 0);
    if grid.spatial_dim == 2 {
        v = convolve_axis(grid, &v, &taps, 1);
    }
    v
}

/// Samples of `u(., t_j - tau)` on the periodic time axis.
fn shift_time(grid: &SpaceTimeGrid, u: &[Complex64], tau: f64, interp: TimeInterpolation) -> Samples {
    let (nt, ns) = (grid.nt as i64, grid.n_space());
    let q = tau / grid.dt();
    let j0 = q.floor();
    let f = q - j0;
    let j0 = j0 as i64;
    let at = |j: i64, i: usize| u[(j.rem_euclid(nt) as usize) * ns + i];
    let mut out = vec![Complex64::new(0.0, 0.0); u.len()];
    for j in 0..nt {
        let b = j - j0;
        for i in 0..ns {
            out[j as usize * ns + i] = match interp {
                TimeInterpolation::Linear => at(b, i) * (1.0 - f) + at(b - 1, i) * f,
                TimeInterpolation::Cubic => {
                    let w0 = -f * (f - 1.0) * (f - 2.0) / 6.0;
                    let w1 = (f + 1.0) * (f - 1.0) * (f - 2.0) / 2.0;
                    let w2 = -(f + 1.0) * f * (f - 2.0) / 2.0;
                    let w3 = (f + 1.0) * f * (f - 1.0) / 6.0;
                    at(b + 1, i) * w0 + at(b, i) * w1 + at(b - 1, i) * w2 + at(b - 2, i) * w3
                }
            };
        }
    }
    out
}

/// Kernel-quadrature evaluation of `H^s u` for `s` in `(0, 1)` on the flat torus.
pub fn frac_power_kernel_quadrature(
    metric: &MetricField,
    u: &Field,
    s: f64,
    rule: &QuadratureRule,
    interp: TimeInterpolation,
) -> Result<Field> {
    if !metric.is_identity() {
        return Err(Error::NonIdentityMetric("kernel quadrature"));
    }
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::InvalidArgument(format!("exponent {s} outside (0, 1)")));
    }
    let grid = u.grid();
    if metric.n_nodes() != grid.n_space() {
        return Err(Error::GridMismatch);
    }
    let data = u.data();
    let n = data.len();
    let nodes = rule.nodes();
    let weights = rule.weights();
    let integrand = |tau: f64| -> Samples {
        let g = shift_time(grid, &spatial_heat(grid, data, tau), tau, interp);
        g.iter().zip(data).map(|(a, b)| a - b).collect()
    };
    let chunk = 32;
    let partials: Vec<Samples> = (0..nodes.len().div_ceil(chunk))
        .into_par_iter()
        .map(|c| {
            let mut acc = vec![Complex64::new(0.0, 0.0); n];
            for q in c * chunk..((c + 1) * chunk).min(nodes.len()) {
                let w = weights[q] * nodes[q].powf(-1.0 - s);
                for (a, g) in acc.iter_mut().zip(integrand(nodes[q])) {
                    *a += g * w;
                }
            }
            acc
        })
        .collect();
    let mut acc = vec![Complex64::new(0.0, 0.0); n];
    for p in partials {
        acc.iter_mut().zip(p).for_each(|(a, b)| *a += b);
    }
    // Below tau_min the integrand is linear in tau.
    let p = rule.params();
    let t1 = nodes[0];
    let head = p.tau_min.powf(1.0 - s) / (1.0 - s) / t1;
    for (a, g) in acc.iter_mut().zip(integrand(t1)) {
        *a += g * head;
    }
    // Beyond tau_max only the spatial mean m(t - tau) survives. Split it into
    // its time average and a zero-mean part with periodic antiderivative M.
    let (nt, ns) = (grid.nt, grid.n_space());
    let mean: Vec<Complex64> =
        (0..nt).map(|j| data[j * ns..(j + 1) * ns].iter().sum::<Complex64>() / ns as f64).collect();
    let mbar = mean.iter().sum::<Complex64>() / nt as f64;
    let mut anti = vec![Complex64::new(0.0, 0.0); nt];
    for j in 1..nt {
        anti[j] = anti[j - 1] + (mean[j - 1] + mean[j] - mbar * 2.0) * (0.5 * grid.dt());
    }
    let abar = anti.iter().sum::<Complex64>() / nt as f64;
    let mut anti_full = vec![Complex64::new(0.0, 0.0); n];
    for j in 0..nt {
        for i in 0..ns {
            anti_full[j * ns + i] = anti[j] - abar;
        }
    }
    let x = p.tau_max;
    let shifted = shift_time(grid, &anti_full, x, interp);
    for k in 0..n {
        acc[k] += (mbar - data[k]) * (x.powf(-s) / s) + shifted[k] * x.powf(-1.0 - s);
    }
    let g = gamma(-s);
    Field::from_vec(grid, acc.into_iter().map(|a| a / g).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::quadrature::QuadratureParams;

    #[test]
    fn constants_map_to_zero() {
        let g = SpaceTimeGrid::new(1, 2.0 * PI, 32, 1.0, 2, 64).unwrap();
        let m = MetricField::identity(&g);
        let rule = QuadratureRule::new(QuadratureParams { n_high: 96, ..Default::default() }).unwrap();
        let u = Field::from_real_fn(&g, |_, _| 2.5);
        let out = frac_power_kernel_quadrature(&m, &u, 0.4, &rule, TimeInterpolation::Cubic).unwrap();
        assert!(out.max_abs() < 1e-12, "{}", out.max_abs());
    }

    #[test]
    fn gaussian_taps_sum_to_one() {
        let g = SpaceTimeGrid::new(1, 2.0 * PI, 64, 1.0, 2, 16).unwrap();
        for tau in [g.h() * g.h(), 0.1, 3.0, 400.0] {
            let total: f64 = gaussian_taps(&g, tau).iter().map(|t| t.1).sum();
            assert!((total - 1.0).abs() < 1e-14, "tau {tau}: {total}");
        }
    }

    #[test]
    fn cubic_shift_is_exact_on_cubics() {
        let g = SpaceTimeGrid::new(1, 1.0, 2, 8.0, 2, 64).unwrap();
        let u: Vec<Complex64> =
            (0..g.len()).map(|k| { let t = (k / 2) as f64; Complex64::new(t * t * t - 2.0 * t, 0.0) }).collect();
        let tau = 2.3 * g.dt();
        let v = shift_time(&g, &u, tau, TimeInterpolation::Cubic);
        let j = 20;
        let tj = j as f64 - 2.3;
        assert!((v[j * 2].re - (tj * tj * tj - 2.0 * tj)).abs() < 1e-9);
    }

    #[test]
    fn rejects_curved_metric() {
        let g = SpaceTimeGrid::new(1, 2.0 * PI, 32, 1.0, 2, 64).unwrap();
        let m = MetricField::sinusoid(&g, 0.3, None).unwrap();
        let rule = QuadratureRule::new(QuadratureParams::default()).unwrap();
        let u = Field::zeros(&g);
        assert!(frac_power_kernel_quadrature(&m, &u, 0.4, &rule, TimeInterpolation::Cubic).is_err());
    }
}
