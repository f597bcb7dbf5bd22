//! Weighted moment sums `sum_k Gamma(m + 1 + alpha_k) int_0^inf f_k(tau) tau^{-m} dtau`
//! and the decay template that makes them finite.

use crate::error::{Error, Result};
use crate::operator::quadrature::gauss_legendre;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

/// `coefficient * tau^power * exp(-rate tau - inner / tau)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Profile {
    pub coefficient: Complex64,
    pub power: f64,
    pub rate: f64,
    pub inner: f64,
}

impl Profile {
    /// `tau^power exp(-tau - 1/tau)`.
    pub fn standard(power: f64) -> Self {
        Profile { coefficient: Complex64::new(1.0, 0.0), power, rate: 1.0, inner: 1.0 }
    }

    pub fn scaled(self, c: Complex64) -> Self {
        Profile { coefficient: self.coefficient * c, ..self }
    }

    pub fn eval(&self, tau: f64) -> Complex64 {
        self.coefficient * (self.power * tau.ln() - self.rate * tau - self.inner / tau).exp()
    }
}

/// Gauss-Legendre panels in `ln tau` over `[tau_min, tau_max]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MomentGrid {
    pub tau_min: f64,
    pub tau_max: f64,
    pub panels: usize,
    pub order: usize,
    /// Boundary between the near-origin and the far decay regimes.
    pub split: f64,
}

impl Default for MomentGrid {
    fn default() -> Self {
        MomentGrid { tau_min: 1e-4, tau_max: 200.0, panels: 48, order: 16, split: 1.0 }
    }
}

impl MomentGrid {
    /// Nodes and weights for `int g(tau) dtau`.
    pub fn rule(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        if !(self.tau_min > 0.0 && self.tau_max > self.tau_min && self.panels > 0 && self.order > 0) {
            return Err(Error::InvalidArgument("moment grid needs 0 < tau_min < tau_max".into()));
        }
        if !(self.split > self.tau_min && self.split < self.tau_max) {
            return Err(Error::InvalidArgument("decay split must lie inside the moment grid".into()));
        }
        let (x, w) = gauss_legendre(self.order);
        let (a, b) = (self.tau_min.ln(), self.tau_max.ln());
        let width = (b - a) / self.panels as f64;
        let mut nodes = Vec::with_capacity(self.panels * self.order);
        let mut weights = Vec::with_capacity(nodes.capacity());
        for p in 0..self.panels {
            let mid = a + (p as f64 + 0.5) * width;
            for (xi, wi) in x.iter().zip(&w) {
                let y = mid + 0.5 * width * xi;
                nodes.push(y.exp());
                weights.push(0.5 * width * wi * y.exp());
            }
        }
        Ok((nodes, weights))
    }
}

/// Fitted `|f| <= c exp(-delta / tau)` on `(0, split]` and
/// `|f| <= c exp(-delta tau)` beyond.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DecayFit {
    pub c: f64,
    pub delta_near: f64,
    pub delta_far: f64,
    pub split: f64,
}

impl DecayFit {
    pub fn holds(&self) -> bool {
        self.c == 0.0 || (self.delta_near > 0.0 && self.delta_far > 0.0)
    }
}

fn slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (mx, my) = points.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x / n, b + y / n));
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (x, y) in points {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    if sxx > 0.0 {
        sxy / sxx
    } else {
        0.0
    }
}

/// Least-squares decay rates of `-ln|f|` against `1/tau` (near) and `tau`
/// (far); `c` is then the smallest constant making both bounds hold.
pub fn fit_decay(nodes: &[f64], values: &[Complex64], split: f64) -> DecayFit {
    let pts = |near: bool| -> Vec<(f64, f64)> {
        nodes
            .iter()
            .zip(values)
            .filter(|(t, v)| (**t <= split) == near && v.norm() > 0.0)
            .map(|(t, v)| (if near { 1.0 / t } else { *t }, -v.norm().ln()))
            .collect()
    };
    let (near, far) = (pts(true), pts(false));
    if near.is_empty() && far.is_empty() {
        return DecayFit { c: 0.0, delta_near: 0.0, delta_far: 0.0, split };
    }
    let delta_near = if near.len() > 1 { slope(&near) } else { f64::INFINITY };
    let delta_far = if far.len() > 1 { slope(&far) } else { f64::INFINITY };
    let mut c: f64 = 0.0;
    for (t, v) in nodes.iter().zip(values) {
        let rate = if *t <= split { delta_near / t } else { delta_far * t };
        if v.norm() > 0.0 && rate.is_finite() {
            c = c.max((v.norm().ln() + rate).exp());
        }
    }
    DecayFit { c, delta_near, delta_far, split }
}

/// Samples of `f_1..f_N` on a moment grid with their exponents.
#[derive(Clone, Debug)]
pub struct MomentTestCase {
    pub exponents: Vec<f64>,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub samples: Vec<Vec<Complex64>>,
    /// Inclusive moment range `[l, M]`.
    pub range: (i32, i32),
    pub split: f64,
}

impl MomentTestCase {
    pub fn from_fns<F>(exponents: Vec<f64>, fns: &[F], range: (i32, i32), grid: &MomentGrid) -> Result<Self>
    where
        F: Fn(f64) -> Complex64,
    {
        if fns.len() != exponents.len() {
            return Err(Error::DimensionMismatch(format!("{} functions for {} exponents", fns.len(), exponents.len())));
        }
        if range.0 > range.1 {
            return Err(Error::InvalidArgument("empty moment range".into()));
        }
        let (nodes, weights) = grid.rule()?;
        let samples = fns.iter().map(|f| nodes.iter().map(|&t| f(t)).collect()).collect();
        Ok(MomentTestCase { exponents, nodes, weights, samples, range, split: grid.split })
    }

    /// Each `f_k` is the sum of its profiles.
    pub fn from_profiles(
        exponents: Vec<f64>,
        profiles: &[Vec<Profile>],
        range: (i32, i32),
        grid: &MomentGrid,
    ) -> Result<Self> {
        let fns: Vec<_> = profiles
            .iter()
            .map(|ps| move |t: f64| ps.iter().map(|p| p.eval(t)).sum::<Complex64>())
            .collect();
        Self::from_fns(exponents, &fns, range, grid)
    }

    pub fn decay(&self, k: usize) -> DecayFit {
        fit_decay(&self.nodes, &self.samples[k], self.split)
    }

    /// `int f_k tau^{-m} dtau`, after checking that it converges.
    pub fn moment_integral(&self, k: usize, m: i32) -> Result<Complex64> {
        let f = &self.samples[k];
        if f.iter().all(|v| v.norm() == 0.0) {
            return Ok(Complex64::new(0.0, 0.0));
        }
        if !self.decay(k).holds() {
            check_power_law(&self.nodes, f, m, k)?;
        }
        Ok(self
            .nodes
            .iter()
            .zip(&self.weights)
            .zip(f)
            .map(|((t, w), v)| v * (w * t.powi(-m)))
            .sum())
    }

    /// `max_k ||f_k||_{L^2(dtau)}`.
    pub fn max_norm(&self) -> f64 {
        self.samples
            .iter()
            .map(|f| f.iter().zip(&self.weights).map(|(v, w)| v.norm_sqr() * w).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }
}

/// Without exponential decay, integrability of `f tau^{-m}` at the ends of
/// the grid is judged from the local power law of `|f|`.
fn check_power_law(nodes: &[f64], f: &[Complex64], m: i32, k: usize) -> Result<()> {
    let nz: Vec<(f64, f64)> = nodes
        .iter()
        .zip(f)
        .filter(|(_, v)| v.norm() > 0.0)
        .map(|(t, v)| (t.ln(), v.norm().ln()))
        .collect();
    if nz.len() < 2 {
        return Ok(());
    }
    let p0 = (nz[1].1 - nz[0].1) / (nz[1].0 - nz[0].0);
    let n = nz.len();
    let p1 = (nz[n - 1].1 - nz[n - 2].1) / (nz[n - 1].0 - nz[n - 2].0);
    if p0 - m as f64 <= -1.0 + 1e-6 {
        return Err(Error::Divergent(format!(
            "f_{k} ~ tau^{p0:.3} near 0 without exponential decay; tau^-{m} moment is not integrable"
        )));
    }
    if p1 - m as f64 >= -1.0 - 1e-6 && p1 > -30.0 {
        return Err(Error::Divergent(format!("f_{k} ~ tau^{p1:.3} at large tau; moment {m} is not integrable")));
    }
    Ok(())
}

/// `sum_k Gamma(m + 1 + alpha_k) int f_k tau^{-m} dtau`.
pub fn moment_functional(case: &MomentTestCase, m: i32) -> Result<Complex64> {
    if m < case.range.0 {
        return Err(Error::InvalidArgument(format!("moment {m} below range start {}", case.range.0)));
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for (k, &alpha) in case.exponents.iter().enumerate() {
        let integral = case.moment_integral(k, m)?;
        if integral != Complex64::new(0.0, 0.0) {
            acc += integral * gamma(m as f64 + 1.0 + alpha);
        }
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `2 K_nu(2) = 2 int_0^inf exp(-2 cosh t) cosh(nu t) dt`, trapezoid in `t`.
    fn bessel_oracle(nu: f64) -> f64 {
        let (n, top) = (20000, 8.0);
        let h = top / n as f64;
        let mut s = 0.5 * (-2.0f64).exp();
        for i in 1..=n {
            let t = i as f64 * h;
            s += (-2.0 * t.cosh()).exp() * (nu * t).cosh();
        }
        2.0 * s * h
    }

    fn standard_case(alpha: f64, range: (i32, i32)) -> MomentTestCase {
        MomentTestCase::from_profiles(vec![alpha], &[vec![Profile::standard(0.0)]], range, &MomentGrid::default()).unwrap()
    }

    #[test]
    fn bessel_moments() {
        let case = standard_case(0.5, (-1, 3));
        for nu in [0.0f64, 1.0, -1.0, 2.0, -2.0] {
            let m = (1.0 - nu) as i32;
            let got = case.moment_integral(0, m).unwrap();
            let want = bessel_oracle(nu);
            assert!((got.re - want).abs() <= 1e-6 * want && got.im == 0.0, "nu {nu}: {got} vs {want}");
        }
    }

    #[test]
    fn worked_example() {
        let case = standard_case(0.5, (0, 2));
        let v = moment_functional(&case, 0).unwrap();
        assert!((v.re - 0.24789).abs() < 1e-4, "{v}");
    }

    #[test]
    fn zero_functions_give_zero() {
        let z = |_t: f64| Complex64::new(0.0, 0.0);
        let case = MomentTestCase::from_fns(vec![0.3, 0.7], &[z, z], (0, 3), &MomentGrid::default()).unwrap();
        for m in 0..=3 {
            assert_eq!(moment_functional(&case, m).unwrap(), Complex64::new(0.0, 0.0));
        }
    }

    #[test]
    fn slow_origin_decay_diverges() {
        let f = |t: f64| Complex64::new((-t).exp(), 0.0);
        let case = MomentTestCase::from_fns(vec![0.5], &[f], (0, 2), &MomentGrid::default()).unwrap();
        assert!(matches!(moment_functional(&case, 2), Err(Error::Divergent(_))));
        assert!(moment_functional(&case, 0).is_ok());
    }

    #[test]
    fn decay_fit_recovers_rates() {
        let grid = MomentGrid::default();
        let (nodes, _) = grid.rule().unwrap();
        let vals: Vec<Complex64> = nodes.iter().map(|&t| Complex64::new((-2.0 * t - 0.5 / t).exp(), 0.0)).collect();
        let fit = fit_decay(&nodes, &vals, 1.0);
        assert!(fit.holds());
        assert!(fit.delta_near > 0.3 && fit.delta_far > 1.5, "{fit:?}");
        for (t, v) in nodes.iter().zip(&vals) {
            let bound = if *t <= 1.0 { fit.c * (-fit.delta_near / t).exp() } else { fit.c * (-fit.delta_far * t).exp() };
            assert!(v.norm() <= bound * (1.0 + 1e-12));
        }
    }
}
