//! Invariant suite over every module on the configured grid.

use crate::commands::{bases, counterexample_seed, datum, default_candidates};
use crate::config::RunConfig;
use crate::output::{Check, Outcome, Output};
use crate::Failure;
use fracpara_core::dnmap::{assemble_dn_map_with, integral_identity_with};
use fracpara_core::forward::{coercivity_margin, ForwardSolver};
use fracpara_core::inverse::entangle::{entanglement_probe, resonant_counterexample};
use fracpara_core::inverse::moments::{MomentGrid, MomentTestCase, Profile};
use fracpara_core::inverse::reconstruct::{reconstruct_potential, ReconstructionConfig};
use fracpara_core::inverse::runge::{runge_approximate_with, RungeRequest};
use fracpara_core::operator::kernel::TimeInterpolation;
use fracpara_core::operator::{
    apply_frac_power, apply_heat_semigroup, apply_power, frac_power_balakrishnan_symbol, frac_power_kernel_quadrature,
    FracExponent, LaplaceScheme, QuadratureParams, QuadratureRule, SpectralDecomposition,
};
use fracpara_core::{l2_inner_product, Field, PolyParabolicProblem};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::time::Instant;

fn gap(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / a.norm().max(b.norm()).max(1e-300)
}

fn field_gap(a: &Field, b: &Field) -> Result<f64, Failure> {
    Ok(a.sub(b)?.norm() / a.norm().max(b.norm()).max(1e-300))
}

/// Principal power from the polar form; the modulus at the Nyquist bin.
fn polar_power(z: Complex64, s: f64, nyquist: bool) -> Complex64 {
    if z.norm() == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let phase = if nyquist { 0.0 } else { s * z.im.atan2(z.re) };
    Complex64::from_polar(z.norm().powf(s), phase)
}

fn random_interior(p: &PolyParabolicProblem, rng: &mut ChaCha8Rng) -> Field {
    let mut f = Field::zeros(p.grid());
    for k in p.unknowns() {
        f.data_mut()[k] = Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5);
    }
    f
}

/// Plane waves checked node by node against the difference symbol.
fn symbol_exactness(p: &PolyParabolicProblem, rng: &mut ChaCha8Rng) -> Result<f64, Failure> {
    let g = p.grid();
    if !p.metric().is_identity() || g.spatial_dim != 1 {
        return Ok(0.0);
    }
    let decomp = p.decomposition();
    let mut worst: f64 = 0.0;
    for s in [0.3, 0.5, 0.7, 1.5] {
        for _ in 0..16 {
            let (k, m) = (rng.gen_range(0..g.nx), rng.gen_range(0..g.nt));
            let lam = (2.0 / g.h() * (PI * k as f64 / g.nx as f64).sin()).powi(2);
            let ms = if 2 * m < g.nt { m as f64 } else { m as f64 - g.nt as f64 };
            let sigma = 2.0 * PI * ms / (g.nt as f64 * g.dt());
            let xi = 2.0 * PI * k as f64 / g.extent;
            let wave = Field::from_fn(g, |t, x| Complex64::from_polar(1.0, xi * x[0] + sigma * t));
            let got = apply_frac_power(decomp, &wave, FracExponent::new(s)?, false)?;
            let want = wave.scale(polar_power(Complex64::new(lam, sigma), s, 2 * m == g.nt));
            worst = worst.max(got.sub(&want)?.norm() / want.norm().max(wave.norm()));
        }
    }
    Ok(worst)
}

fn gamma_identity() -> Result<f64, Failure> {
    let rule = QuadratureRule::new(QuadratureParams::default())?;
    let mut worst: f64 = 0.0;
    for lam in [0.1, 1.0, 16.0] {
        for sigma in [-10.0, 0.0, 2.5] {
            for s in [0.3, 0.7] {
                let got = frac_power_balakrishnan_symbol(lam, sigma, s, &rule)?;
                worst = worst.max(gap(got, polar_power(Complex64::new(lam, sigma), s, false)));
            }
        }
    }
    Ok(worst)
}

fn kernel_quadrature(p: &PolyParabolicProblem, params: QuadratureParams) -> Result<Option<f64>, Failure> {
    if !p.metric().is_identity() {
        return Ok(None);
    }
    let g = p.grid();
    let d = SpectralDecomposition::assemble(g, p.metric(), LaplaceScheme::Fourier, false)?;
    let rule = QuadratureRule::new(params)?;
    let c = 0.5 * g.extent;
    let u = Field::from_real_fn(g, |t, x| {
        let r2: f64 = x.iter().take(g.spatial_dim).map(|v| (v - c).powi(2)).sum();
        (-r2 / 0.5 - t * t / 0.1).exp()
    });
    let spectral = apply_power(&d, &u, 0.5, false)?;
    let kernel = frac_power_kernel_quadrature(p.metric(), &u, 0.5, &rule, TimeInterpolation::Cubic)?;
    Ok(Some(field_gap(&kernel, &spectral)?))
}

pub fn run(cfg: &RunConfig, out: &mut Output) -> Result<Outcome, Failure> {
    let mut outcome = Outcome::default();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut clock = Instant::now();
    let mut lap = |outcome: &mut Outcome, name: &str| {
        outcome.timings.insert(name.into(), clock.elapsed().as_secs_f64());
        clock = Instant::now();
    };
    let p = cfg.problem()?;
    let decomp = p.decomposition();
    let metric = p.metric();
    let checks = &mut outcome.checks;

    // Operator.
    checks.push(Check::at_most("operator.symbol_exactness", symbol_exactness(&p, &mut rng)?, 1e-12));
    checks.push(Check::at_most("operator.gamma_identity", gamma_identity()?, 1e-6));
    if let Some(e) = kernel_quadrature(&p, cfg.validate.quadrature)? {
        checks.push(Check::at_most("operator.kernel_quadrature", e, 1e-3));
    }
    let ip = |a: &Field, b: &Field| l2_inner_product(a, b, None, Some(metric));
    let (mut pairing, mut half) = (0.0f64, 0.0f64);
    for _ in 0..cfg.validate.draws {
        let u = random_interior(&p, &mut rng);
        let w = random_interior(&p, &mut rng);
        for s in [0.3, 0.7] {
            let lhs = ip(&apply_power(decomp, &u, s, false)?, &w)?;
            pairing = pairing.max(gap(lhs, ip(&u, &apply_power(decomp, &w, s, true)?)?));
            let h = ip(&apply_power(decomp, &u, s / 2.0, false)?, &apply_power(decomp, &w, s / 2.0, true)?)?;
            half = half.max(gap(lhs, h));
        }
        half = half.max(gap(p.form(&u, &w)?, p.form_half_power(&u, &w)?));
    }
    checks.push(Check::at_most("operator.adjoint_pairing", pairing, 1e-10));
    checks.push(Check::at_most("operator.half_power", half, 1e-10));
    let data = (0..p.grid().len()).map(|_| Complex64::new(rng.gen(), rng.gen())).collect();
    let u = Field::from_vec(p.grid(), data)?;
    let ones = Field::from_real_fn(p.grid(), |_, _| 1.0);
    let mass = |f: &Field| l2_inner_product(f, &ones, None, Some(metric));
    let moved = apply_heat_semigroup(decomp, &u, 0.3)?;
    checks.push(Check::at_most("operator.semigroup_mass", gap(mass(&u)?, mass(&moved)?), 1e-10));
    let whole = apply_heat_semigroup(decomp, &u, 1.0)?;
    let steps = apply_heat_semigroup(decomp, &moved, 0.7)?;
    checks.push(Check::at_most("operator.semigroup_law", field_gap(&whole, &steps)?, 1e-11));
    lap(&mut outcome, "operator");

    // Forward solver.
    let checks = &mut outcome.checks;
    let shift = p.potential().data().iter().fold(0.0f64, |m, v| m.max(-v.re));
    let coercivity = coercivity_margin(&p, shift)?;
    checks.push(Check::above("forward.coercivity_margin", coercivity.margin, 0.0));
    let solver = ForwardSolver::new(&p)?;
    let f = datum(&cfg.forward.datum, &p)?;
    let sol = solver.solve(&f, None)?;
    checks.push(Check::at_most("forward.interior_residual", sol.interior_residual, cfg.solver.interior_tolerance));
    checks.push(Check::at_most("forward.causality_leak", sol.causality_leak, cfg.solver.causality_tolerance));
    let twice = solver.solve(&f.scale(Complex64::new(2.0, -1.0)), None)?;
    checks.push(Check::at_most(
        "forward.linearity",
        field_gap(&twice.u, &sol.u.scale(Complex64::new(2.0, -1.0)))?,
        1e-10,
    ));
    lap(&mut outcome, "forward");

    // DN map.
    let (exc, tests) = bases(cfg, &p)?;
    let phi = random_interior(&p, &mut rng);
    let moved = solver.solve(&f.add(&phi)?, None)?;
    let mut rep = field_gap(&sol.u, &moved.u)?;
    for z in tests.elements() {
        rep = rep.max(gap(p.form(&sol.u, z)?, p.form(&moved.u, z)?));
    }
    let checks = &mut outcome.checks;
    checks.push(Check::at_most("dnmap.representative_invariance", rep, 1e-10));
    let fwd = assemble_dn_map_with(&solver, &exc, &tests, false)?;
    let adj = assemble_dn_map_with(&solver, &exc, &tests, true)?;
    let scale = fwd.entries.iter().fold(0.0f64, |m, v| m.max(v.norm())).max(1e-300);
    let adj_gap = fwd.entries.iter().zip(adj.entries.iter()).fold(0.0f64, |m, (a, b)| m.max((a - b).norm())) / scale;
    checks.push(Check::at_most("dnmap.adjoint_consistency", adj_gap, 1e-9));
    let again = assemble_dn_map_with(&solver, &exc, &tests, false)?;
    let differ = (fwd.to_csv() != again.to_csv()) as u8 as f64;
    checks.push(Check::at_most("dnmap.byte_identical_reassembly", differ, 0.0));
    let mut identity: f64 = 0.0;
    for _ in 0..cfg.validate.draws {
        let mut v = Field::zeros(p.grid());
        for k in p.unknowns() {
            v.data_mut()[k] = Complex64::from_polar(0.2 * rng.gen::<f64>(), 2.0 * PI * rng.gen::<f64>());
        }
        let pv = p.with_potential(v)?;
        let sv = ForwardSolver::new(&pv)?;
        let c1: Vec<Complex64> = (0..exc.len()).map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen())).collect();
        let c2: Vec<Complex64> = (0..tests.len()).map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen())).collect();
        let rep = integral_identity_with(&sv, &solver, &exc.combine(&c1)?, &tests.combine(&c2)?)?;
        identity = identity.max(rep.residual);
    }
    outcome.checks.push(Check::at_most("dnmap.integral_identity", identity, 1e-8));
    lap(&mut outcome, "dnmap");

    // Inverse.
    let t = p.grid().half_window;
    let target = Field::from_real_fn(p.grid(), |tt, x| x[0].sin() * (PI * tt / (2.0 * t)).cos())
        .restrict(&p.partition().omega_t());
    let runge = runge_approximate_with(
        &RungeRequest { target, controls: exc.clone(), epsilon: cfg.solver.runge_epsilon },
        &solver,
    )?;
    let rise = runge.nested_errors.windows(2).map(|w| w[1] - w[0]).fold(0.0f64, f64::max);
    outcome.checks.push(Check::at_most("inverse.runge_nested_increase", rise, 0.0));
    outcome.measure("inverse.runge_error", runge.achieved_error);
    let base = p.with_potential(Field::zeros(p.grid()))?;
    let measured = assemble_dn_map_with(&solver, &exc, &tests, false)?;
    let mut rc = ReconstructionConfig::new(measured);
    rc.baseline = Some(p.potential().clone());
    let res = reconstruct_potential(&rc, &base)?;
    let moved = res.estimate.sub(p.potential())?.max_abs();
    outcome.checks.push(Check::at_most("inverse.zero_difference_returns_baseline", moved, 0.0));
    let u1 = counterexample_seed(&p, cfg.entangle.center);
    let ce = resonant_counterexample(decomp, 0.5, 1, &u1, &p.partition().omega_t())?;
    let checks = &mut outcome.checks;
    checks.push(Check::at_most("inverse.counterexample_residual", ce.residual_on_o, 1e-10));
    checks.push(Check::at_least("inverse.counterexample_norms", ce.norm_u1.min(ce.norm_u2) / ce.grid_scale, 0.1));
    let case = MomentTestCase::from_profiles(vec![0.5], &[vec![Profile::standard(0.0)]], (-1, 3), &MomentGrid::default())?;
    let mut bessel: f64 = 0.0;
    for nu in [0.0f64, 1.0, 2.0] {
        let got = case.moment_integral(0, (1.0 - nu) as i32)?;
        bessel = bessel.max((got.re - bessel_k2(nu)).abs() / bessel_k2(nu));
    }
    checks.push(Check::at_most("inverse.moment_bessel", bessel, 1e-6));
    let exps = &cfg.entangle.exponents;
    let probe = entanglement_probe(exps, &default_candidates(exps), cfg.entangle.range, &cfg.entangle.moment_grid)?;
    checks.push(Check::above("inverse.probe_min_residual", probe.min_residual, 0.0));
    lap(&mut outcome, "inverse");

    out.write_json("validate.json", &outcome.checks)?;
    Ok(outcome)
}

/// `2 K_nu(2) = 2 int_0^inf exp(-2 cosh t) cosh(nu t) dt`, trapezoid rule.
fn bessel_k2(nu: f64) -> f64 {
    let (n, top) = (20000, 8.0);
    let h = top / n as f64;
    let mut s = 0.5 * (-2.0f64).exp();
    for i in 1..=n {
        let t = i as f64 * h;
        s += (-2.0 * t.cosh()).exp() * (nu * t).cosh();
    }
    2.0 * s * h
}
