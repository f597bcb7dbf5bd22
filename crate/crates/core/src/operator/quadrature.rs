//! Quadrature in the semigroup time `tau` and the Balakrishnan symbol.

use crate::error::{Error, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pm) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadratureParams {
    pub tau_min: f64,
    pub split_a: f64,
    pub tau_max: f64,
    pub n_low: usize,
    pub n_high: usize,
    pub panel_order: usize,
}

impl Default for QuadratureParams {
    fn default() -> Self {
        QuadratureParams {
            tau_min: 1e-6,
            split_a: 1.0,
            tau_max: 50.0,
            n_low: 200,
            n_high: 400,
            panel_order: 8,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Panel {
    lo: f64,
    hi: f64,
    log: bool,
}

/// Composite Gauss-Legendre rule: geometric panels (integrated in `ln tau`) on
/// `[tau_min, a]`, uniform panels on `[a, tau_max]`.
#[derive(Clone, Debug)]
pub struct QuadratureRule {
    params: QuadratureParams,
    panels: Vec<Panel>,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    gl: (Vec<f64>, Vec<f64>),
}

impl QuadratureRule {
    pub fn new(params: QuadratureParams) -> Result<Self> {
        let p = params;
        if !(p.tau_min > 0.0 && p.tau_min < p.split_a && p.split_a < p.tau_max && p.tau_max.is_finite()) {
            return Err(Error::InvalidArgument(
                "quadrature needs 0 < tau_min < split_a < tau_max".into(),
            ));
        }
        if p.panel_order < 2 || p.n_low < p.panel_order || p.n_high < p.panel_order {
            return Err(Error::InvalidArgument(
                "quadrature needs at least one panel of order >= 2 on each side".into(),
            ));
        }
        let mut panels = Vec::new();
        let nl = p.n_low.div_ceil(p.panel_order);
        let (l0, l1) = (p.tau_min.ln(), p.split_a.ln());
        for i in 0..nl {
            let a = (l0 + (l1 - l0) * i as f64 / nl as f64).exp();
            let b = if i + 1 == nl { p.split_a } else { (l0 + (l1 - l0) * (i + 1) as f64 / nl as f64).exp() };
            panels.push(Panel { lo: if i == 0 { p.tau_min } else { a }, hi: b, log: true });
        }
        let nh = p.n_high.div_ceil(p.panel_order);
        for i in 0..nh {
            let a = p.split_a + (p.tau_max - p.split_a) * i as f64 / nh as f64;
            let b = if i + 1 == nh { p.tau_max } else { p.split_a + (p.tau_max - p.split_a) * (i + 1) as f64 / nh as f64 };
            panels.push(Panel { lo: a, hi: b, log: false });
        }
        let gl = gauss_legendre(p.panel_order);
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for pan in &panels {
            push_panel(*pan, &gl, &mut nodes, &mut weights);
        }
        Ok(QuadratureRule { params, panels, nodes, weights, gl })
    }

    pub fn params(&self) -> &QuadratureParams {
        &self.params
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn split(&self) -> f64 {
        self.params.split_a
    }

    /// Integrates `f` over `[tau_min, tau_max]`, splitting panels so that a
    /// phase rotating at rate `omega` turns by at most `max_turn` radians per panel.
    pub fn integrate_oscillatory<F>(&self, omega: f64, max_turn: f64, f: F) -> Complex64
    where
        F: Fn(f64) -> Complex64,
    {
        let mut acc = Complex64::new(0.0, 0.0);
        for pan in &self.panels {
            let n = ((omega.abs() * (pan.hi - pan.lo)) / max_turn).ceil().max(1.0) as usize;
            for sub in split_panel(*pan, n) {
                acc += integrate_panel(sub, &self.gl, &f);
            }
        }
        acc
    }
}

fn split_panel(p: Panel, n: usize) -> Vec<Panel> {
    (0..n)
        .map(|i| {
            let (a, b) = if p.log {
                let (l0, l1) = (p.lo.ln(), p.hi.ln());
                (
                    (l0 + (l1 - l0) * i as f64 / n as f64).exp(),
                    (l0 + (l1 - l0) * (i + 1) as f64 / n as f64).exp(),
                )
            } else {
                (
                    p.lo + (p.hi - p.lo) * i as f64 / n as f64,
                    p.lo + (p.hi - p.lo) * (i + 1) as f64 / n as f64,
                )
            };
            Panel {
                lo: if i == 0 { p.lo } else { a },
                hi: if i + 1 == n { p.hi } else { b },
                log: p.log,
            }
        })
        .collect()
}

fn push_panel(p: Panel, gl: &(Vec<f64>, Vec<f64>), nodes: &mut Vec<f64>, weights: &mut Vec<f64>) {
    let (a, b) = if p.log { (p.lo.ln(), p.hi.ln()) } else { (p.lo, p.hi) };
    let (c, r) = (0.5 * (a + b), 0.5 * (b - a));
    for (x, w) in gl.0.iter().zip(&gl.1) {
        let u = c + r * x;
        if p.log {
            let t = u.exp();
            nodes.push(t);
            weights.push(r * w * t);
        } else {
            nodes.push(u);
            weights.push(r * w);
        }
    }
}

fn integrate_panel<F: Fn(f64) -> Complex64>(p: Panel, gl: &(Vec<f64>, Vec<f64>), f: &F) -> Complex64 {
    let mut nodes = Vec::with_capacity(gl.0.len());
    let mut weights = Vec::with_capacity(gl.0.len());
    push_panel(p, gl, &mut nodes, &mut weights);
    nodes.iter().zip(&weights).map(|(&t, &w)| f(t) * w).sum()
}

/// `e^{-z tau} - 1` without cancellation for small `|z tau|`.
fn exp_m1(z: Complex64) -> Complex64 {
    let (a, b) = (z.re, z.im);
    let half = (0.5 * b).sin();
    let rot = Complex64::new(-2.0 * half * half, b.sin());
    Complex64::from_polar(1.0, b) * a.exp_m1() + rot
}

/// `(1 / Gamma(-s)) int_0^inf (e^{-(lambda + i sigma) tau} - 1) tau^{-1-s} dtau`.
///
/// `[0, tau_min]` is summed from the Taylor series, `[tau_min, tau_max]` uses
/// the rule (with panels split for oscillation), and the tail beyond
/// `tau_max` is continued numerically until an asymptotic expansion applies.
pub fn frac_power_balakrishnan_symbol(
    lambda: f64,
    sigma: f64,
    s: f64,
    rule: &QuadratureRule,
) -> Result<Complex64> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::InvalidArgument(format!("exponent {s} outside (0, 1)")));
    }
    if !(lambda >= 0.0 && lambda.is_finite() && sigma.is_finite()) {
        return Err(Error::InvalidArgument("lambda must be nonnegative and finite".into()));
    }
    if lambda == 0.0 && sigma == 0.0 {
        return Err(Error::Divergent("the tail integral diverges at (0, 0)".into()));
    }
    let z = Complex64::new(lambda, sigma);
    let p = rule.params();
    let t0 = p.tau_min;
    if z.norm() * t0 > 1.0 {
        return Err(Error::InvalidArgument(format!(
            "|lambda + i sigma| tau_min = {:.3} exceeds 1; lower tau_min",
            z.norm() * t0
        )));
    }
    // Head: sum_k (-z)^k / k! * t0^{k-s} / (k-s).
    let mut head = Complex64::new(0.0, 0.0);
    let mut pw = Complex64::new(1.0, 0.0);
    for k in 1..200 {
        pw *= -z * t0 / k as f64;
        let term = pw * t0.powf(-s) / (k as f64 - s);
        head += term;
        if term.norm() <= 1e-18 * head.norm() {
            break;
        }
    }
    let integrand = |t: f64| exp_m1(-z * t) * t.powf(-1.0 - s);
    let body = rule.integrate_oscillatory(sigma, 2.0, integrand);
    let x = p.tau_max;
    let mut tail = Complex64::new(-x.powf(-s) / s, 0.0);
    tail += exp_tail(z, x, 1.0 + s);
    Ok((head + body + tail) / gamma(-s))
}

/// `int_x^inf e^{-z tau} tau^{-a} dtau` for `Re z >= 0`, `z != 0`.
fn exp_tail(z: Complex64, x: f64, a: f64) -> Complex64 {
    if z.re * x > 745.0 || (-z.re * x).exp() * x.powf(-a) / z.norm() < 1e-20 {
        return Complex64::new(0.0, 0.0);
    }
    let reach = 30.0;
    let mut acc = Complex64::new(0.0, 0.0);
    let mut lo = x;
    let target = x.max(reach / z.norm());
    let gl = gauss_legendre(16);
    while lo < target {
        let hi = (lo * 1.5).min(target);
        let n = ((z.im.abs() + z.re) * (hi - lo) / 2.0).ceil().max(1.0) as usize;
        for i in 0..n {
            let a0 = lo + (hi - lo) * i as f64 / n as f64;
            let b0 = lo + (hi - lo) * (i + 1) as f64 / n as f64;
            let (c, r) = (0.5 * (a0 + b0), 0.5 * (b0 - a0));
            for (g, w) in gl.0.iter().zip(&gl.1) {
                let t = c + r * g;
                acc += (-z * t).exp() * t.powf(-a) * r * w;
            }
        }
        lo = hi;
    }
    let zx = z * target;
    let lead = (-z * target).exp() * target.powf(-a) / z;
    let mut sum = Complex64::new(0.0, 0.0);
    let mut term = Complex64::new(1.0, 0.0);
    let mut prev = f64::INFINITY;
    for k in 0..200 {
        if term.norm() > prev {
            break;
        }
        sum += term;
        prev = term.norm();
        if prev < 1e-18 {
            break;
        }
        term *= -(a + k as f64) / zx;
    }
    acc + lead * sum
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(8);
        for deg in 0..16 {
            let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg)).sum();
            let want = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
            assert!((q - want).abs() < 1e-14, "degree {deg}");
        }
    }

    #[test]
    fn rule_is_positive_and_increasing() {
        let r = QuadratureRule::new(QuadratureParams::default()).unwrap();
        assert_eq!(r.nodes().len(), 600);
        assert!(r.nodes().windows(2).all(|w| w[0] < w[1]));
        assert!(r.weights().iter().all(|&w| w > 0.0));
        let total: f64 = r.weights().iter().sum();
        assert!((total - (50.0 - 1e-6)).abs() < 1e-10);
    }

    #[test]
    fn rejects_bad_parameters() {
        let p = QuadratureParams { tau_min: 2.0, ..Default::default() };
        assert!(QuadratureRule::new(p).is_err());
    }

    #[test]
    fn gamma_of_minus_half() {
        let want = -2.0 * std::f64::consts::PI.sqrt();
        assert!((gamma(-0.5) - want).abs() < 1e-12);
    }

    #[test]
    fn symbol_examples() {
        let r = QuadratureRule::new(QuadratureParams::default()).unwrap();
        let one = frac_power_balakrishnan_symbol(1.0, 0.0, 0.5, &r).unwrap();
        assert!((one - Complex64::new(1.0, 0.0)).norm() < 1e-6);
        let h = 0.5f64.sqrt();
        let i_half = frac_power_balakrishnan_symbol(0.0, 1.0, 0.5, &r).unwrap();
        assert!((i_half - Complex64::new(h, h)).norm() < 1e-6);
        let v = frac_power_balakrishnan_symbol(4.0, 3.0, 0.3, &r).unwrap();
        let want = Complex64::from_polar(5f64.powf(0.3), 0.3 * 0.75f64.atan());
        assert!((v - want).norm() < 1e-6 * want.norm());
        assert!(frac_power_balakrishnan_symbol(0.0, 0.0, 0.5, &r).is_err());
        assert!(frac_power_balakrishnan_symbol(1.0, 0.0, 1.5, &r).is_err());
    }

    #[test]
    fn exp_m1_is_accurate_for_tiny_arguments() {
        let z = Complex64::new(1e-12, 3e-12);
        let e = exp_m1(z);
        assert!((e - z).norm() < 1e-22);
    }
}
