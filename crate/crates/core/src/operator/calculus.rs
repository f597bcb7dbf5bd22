//! Functional calculus of `H = d/dt - Delta_g` on the periodic space-time grid.
//!
//! Every operator here is a multiplier `m(lambda_j, sigma_k)` acting on the
//! spatial eigencoefficients after a temporal DFT. At the temporal Nyquist bin
//! the frequency sign is ambiguous, so powers there use the modulus
//! `|lambda + i pi/dt|^s`; this keeps real fields real and makes adjoints,
//! compositions and half-power factorizations exact.

use super::laplace::SpectralDecomposition;
use crate::error::{Error, Result};
use crate::field::Field;
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

/// A positive non-integer exponent `s = m + frac`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FracExponent {
    value: f64,
    int_part: u32,
    frac: f64,
}

impl FracExponent {
    pub fn new(s: f64) -> Result<Self> {
        if !(s.is_finite() && s > 0.0) {
            return Err(Error::InvalidArgument(format!("exponent {s} must be positive")));
        }
        let m = s.floor();
        let frac = s - m;
        if frac == 0.0 {
            return Err(Error::InvalidArgument(format!("exponent {s} is an integer")));
        }
        Ok(FracExponent { value: s, int_part: m as u32, frac })
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn int_part(&self) -> u32 {
        self.int_part
    }

    pub fn frac(&self) -> f64 {
        self.frac
    }
}

/// `lambda + i sigma` for temporal bin `k` (the sign flips for the adjoint).
pub fn base(decomp: &SpectralDecomposition, lambda: f64, k: usize, adjoint: bool) -> Complex64 {
    let sigma = decomp.grid().sigma(k);
    Complex64::new(lambda, if adjoint { -sigma } else { sigma })
}

/// Principal power with `0^s = 0`; `nyquist` selects the modulus convention.
pub fn power_symbol(z: Complex64, s: f64, nyquist: bool) -> Complex64 {
    if z.re == 0.0 && z.im == 0.0 {
        return if s == 0.0 { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) };
    }
    if nyquist {
        return Complex64::new(z.norm().powf(s), 0.0);
    }
    z.powf(s)
}

fn int_power_symbol(z: Complex64, m: u32, nyquist: bool) -> Complex64 {
    if nyquist {
        return Complex64::new(z.norm().powi(m as i32), 0.0);
    }
    z.powi(m as i32)
}

/// Applies `m(lambda_j, k)` to every (eigenmode, temporal bin) pair.
pub fn apply_multiplier<M>(decomp: &SpectralDecomposition, u: &Field, m: M) -> Result<Field>
where
    M: Fn(f64, usize) -> Complex64 + Sync,
{
    let grid = decomp.grid();
    if u.grid() != grid {
        return Err(Error::GridMismatch);
    }
    let (nt, ns) = (grid.nt, grid.n_space());
    let coeffs = decomp.to_coefficients(u.data(), nt);
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(nt);
    let ifft = planner.plan_fft_inverse(nt);
    let mut series = vec![Complex64::new(0.0, 0.0); nt * ns];
    for j in 0..nt {
        for i in 0..ns {
            series[i * nt + j] = coeffs[j * ns + i];
        }
    }
    let inv = 1.0 / nt as f64;
    series.par_chunks_mut(nt).enumerate().for_each(|(mode, s)| {
        fft.process(s);
        let lam = decomp.eigenvalue(mode);
        for (k, z) in s.iter_mut().enumerate() {
            *z *= m(lam, k) * inv;
        }
        ifft.process(s);
    });
    let mut back = vec![Complex64::new(0.0, 0.0); nt * ns];
    for j in 0..nt {
        for i in 0..ns {
            back[j * ns + i] = series[i * nt + j];
        }
    }
    Field::from_vec(grid, decomp.from_coefficients(&back, nt))
}

/// `H^s u` (or `H_*^s u`) for any real `s >= 0`.
pub fn apply_power(decomp: &SpectralDecomposition, u: &Field, s: f64, adjoint: bool) -> Result<Field> {
    if !(s.is_finite() && s >= 0.0) {
        return Err(Error::InvalidArgument(format!("power {s} must be nonnegative")));
    }
    let grid = decomp.grid().clone();
    apply_multiplier(decomp, u, |lam, k| {
        power_symbol(base(decomp, lam, k, adjoint), s, grid.is_time_nyquist(k))
    })
}

/// Fractional power factored as `H^frac` composed with the integer part `H^m`.
pub fn apply_frac_power(
    decomp: &SpectralDecomposition,
    u: &Field,
    s: FracExponent,
    adjoint: bool,
) -> Result<Field> {
    let grid = decomp.grid().clone();
    apply_multiplier(decomp, u, |lam, k| {
        let z = base(decomp, lam, k, adjoint);
        let ny = grid.is_time_nyquist(k);
        int_power_symbol(z, s.int_part(), ny) * power_symbol(z, s.frac(), ny)
    })
}

/// The local operator `H^m`.
pub fn apply_integer_power(
    decomp: &SpectralDecomposition,
    u: &Field,
    m: u32,
    adjoint: bool,
) -> Result<Field> {
    let grid = decomp.grid().clone();
    apply_multiplier(decomp, u, |lam, k| {
        int_power_symbol(base(decomp, lam, k, adjoint), m, grid.is_time_nyquist(k))
    })
}

/// `sum_k b_k H^{s_k} u` in one pass.
pub fn apply_poly(
    decomp: &SpectralDecomposition,
    u: &Field,
    exponents: &[f64],
    weights: &[f64],
    adjoint: bool,
) -> Result<Field> {
    if exponents.len() != weights.len() {
        return Err(Error::DimensionMismatch("exponents and weights differ in length".into()));
    }
    let grid = decomp.grid().clone();
    apply_multiplier(decomp, u, |lam, k| {
        let z = base(decomp, lam, k, adjoint);
        let ny = grid.is_time_nyquist(k);
        exponents.iter().zip(weights).map(|(&s, &b)| b * power_symbol(z, s, ny)).sum()
    })
}

/// `e^{-tau H} u (x, t) = e^{tau Delta_g} u (x, t - tau)`, with the time shift
/// realized as a band-limited phase shift on the periodic window.
pub fn apply_heat_semigroup(decomp: &SpectralDecomposition, u: &Field, tau: f64) -> Result<Field> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::InvalidArgument(format!("semigroup time {tau} must be positive")));
    }
    apply_multiplier(decomp, u, |lam, k| {
        let sigma = decomp.grid().sigma(k);
        Complex64::from_polar((-lam * tau).exp(), -sigma * tau)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::SpaceTimeGrid;
    use crate::metric::MetricField;
    use crate::operator::laplace::assemble_laplace_beltrami;
    use std::f64::consts::PI;

    fn setup() -> SpectralDecomposition {
        let g = SpaceTimeGrid::new(1, 2.0 * PI, 32, 1.0, 2, 64).unwrap();
        assemble_laplace_beltrami(&g, &MetricField::identity(&g)).unwrap()
    }

    #[test]
    fn exponent_parts() {
        let s = FracExponent::new(2.25).unwrap();
        assert_eq!((s.int_part(), s.frac()), (2, 0.25));
        assert!(FracExponent::new(2.0).is_err());
        assert!(FracExponent::new(-0.5).is_err());
    }

    #[test]
    fn scalar_symbols() {
        let half = power_symbol(Complex64::new(0.0, 1.0), 0.5, false);
        assert!((half - Complex64::new(0.5f64.sqrt(), 0.5f64.sqrt())).norm() < 1e-15);
        let z = power_symbol(Complex64::new(4.0, 3.0), 0.3, false);
        let want = Complex64::from_polar(5f64.powf(0.3), 0.3 * (0.75f64).atan());
        assert!((z - want).norm() < 1e-14);
        assert!((z - Complex64::new(1.59055, 0.31093)).norm() < 1e-5);
        assert_eq!(power_symbol(Complex64::new(0.0, 0.0), 0.4, false), Complex64::new(0.0, 0.0));
        assert_eq!(power_symbol(Complex64::new(1.0, 0.0), 0.4, false), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn constants_are_annihilated_and_conserved() {
        let d = setup();
        let one = Field::from_real_fn(d.grid(), |_, _| 1.0);
        let h = apply_power(&d, &one, 0.4, false).unwrap();
        assert!(h.max_abs() < 1e-13);
        let e = apply_heat_semigroup(&d, &one, 0.7).unwrap();
        assert!(e.sub(&one).unwrap().max_abs() < 1e-13);
    }

    #[test]
    fn real_fields_stay_real() {
        let d = setup();
        let u = Field::from_real_fn(d.grid(), |t, x| (x[0]).sin() * (-t * t).exp() + 0.3 * (3.0 * t).cos());
        let h = apply_power(&d, &u, 0.3, false).unwrap();
        assert!(h.data().iter().all(|z| z.im.abs() < 1e-12));
    }

    #[test]
    fn heat_acts_on_eigenfunctions() {
        let d = setup();
        let t0 = 0.3;
        let u = Field::from_real_fn(d.grid(), |_, x| (2.0 * x[0]).cos());
        let e = apply_heat_semigroup(&d, &u, t0).unwrap();
        let lam = d.eigenvalue(2);
        let want = u.scale(Complex64::new((-lam * t0).exp(), 0.0));
        assert!(e.sub(&want).unwrap().max_abs() < 1e-13);
    }
}
