use crate::config::{potential_field, stem_of, DatumSpec, EntangleMode, PotentialSpec, RunConfig};
use crate::output::{csv, Check, Outcome, Output};
use crate::Failure;
use fracpara_core::dnmap::{assemble_dn_map_with, BasisKind, BasisSpec, DNMatrix, ExteriorBasis};
use fracpara_core::inverse::entangle::{entanglement_probe, resonant_counterexample, Candidate};
use fracpara_core::inverse::moments::Profile;
use fracpara_core::inverse::reconstruct::{reconstruct_potential, relative_error_on, ReconstructionConfig};
use fracpara_core::{Field, ForwardSolver, PolyParabolicProblem, Region};
use num_complex::Complex64;
use serde::Serialize;
use statrs::function::gamma::gamma;
use std::path::Path;
use std::time::Instant;

pub fn datum(spec: &DatumSpec, problem: &PolyParabolicProblem) -> Result<Field, Failure> {
    match spec {
        DatumSpec::Bump { which, window } => {
            let spec = BasisSpec { which: *which, kind: BasisKind::Bump, n_space: 1, n_time: 1, window: Some(*window) };
            Ok(ExteriorBasis::new(problem.partition(), spec)?.elements()[0].clone())
        }
        DatumSpec::File { path } => Ok(Field::read(path)?),
    }
}

pub fn bases(cfg: &RunConfig, problem: &PolyParabolicProblem) -> Result<(ExteriorBasis, ExteriorBasis), Failure> {
    let exc = ExteriorBasis::new(problem.partition(), cfg.bases.excitation.clone())?;
    let tests = ExteriorBasis::new(problem.partition(), cfg.bases.test.clone())?;
    Ok((exc, tests))
}

fn timed<T>(outcome: &mut Outcome, name: &str, f: impl FnOnce() -> T) -> T {
    let start = Instant::now();
    let v = f();
    outcome.timings.insert(name.into(), start.elapsed().as_secs_f64());
    v
}

/// Per-slice norms of `u` and of the interior residual `P_V u - F`.
fn residual_series(problem: &PolyParabolicProblem, u: &Field, source: Option<&Field>) -> Result<Vec<Vec<f64>>, Failure> {
    let grid = problem.grid();
    let omega_t = problem.partition().omega_t();
    let mut r = problem.apply(u, false)?;
    if let Some(s) = source {
        r = r.sub(s)?;
    }
    let r = r.restrict(&omega_t);
    let ns = grid.n_space();
    Ok((0..grid.nt)
        .map(|j| {
            let slice = Region { spatial: vec![true; ns], time: j..j + 1 };
            vec![grid.time(j), u.norm_on(&slice), r.norm_on(&slice)]
        })
        .collect())
}

pub fn forward(cfg: &RunConfig, out: &mut Output) -> Result<Outcome, Failure> {
    let mut outcome = Outcome::default();
    let problem = timed(&mut outcome, "assemble", || cfg.problem())?;
    let f = datum(&cfg.forward.datum, &problem)?;
    let source = cfg.forward.source.as_ref().map(Field::read).transpose()?;
    let solver = timed(&mut outcome, "factor", || ForwardSolver::new(&problem))?;
    let sol = timed(&mut outcome, "solve", || solver.solve(&f, source.as_ref()))?;
    out.write("solution.field", &sol.u.to_bytes())?;
    let rows = residual_series(&problem, &sol.u, source.as_ref())?;
    out.write("residual.csv", csv(&["t", "norm_u", "interior_residual"], rows).as_bytes())?;
    outcome.measure("coercivity_margin_estimate", solver.margin());
    outcome.measure("causality_leak", sol.causality_leak);
    outcome.measure("solver_residual", sol.solver_residual);
    outcome.checks.push(Check::at_most("interior_residual", sol.interior_residual, cfg.solver.interior_tolerance));
    outcome.checks.push(Check::at_most("exterior_residual", sol.exterior_residual, 0.0));
    outcome.checks.push(Check::at_most("initial_residual", sol.initial_residual, 0.0));
    Ok(outcome)
}

pub fn dnmap(cfg: &RunConfig, out: &mut Output) -> Result<Outcome, Failure> {
    let mut outcome = Outcome::default();
    let problem = timed(&mut outcome, "assemble", || cfg.problem())?;
    let (exc, tests) = bases(cfg, &problem)?;
    let solver = timed(&mut outcome, "factor", || ForwardSolver::new(&problem))?;
    let mut dn = timed(&mut outcome, "dn_map", || assemble_dn_map_with(&solver, &exc, &tests, cfg.solver.adjoint))?;
    if cfg.solver.noise_sigma > 0.0 {
        dn.add_noise(cfg.solver.noise_sigma, cfg.seed)?;
    }
    dn.write(out.dir(), "dn")?;
    out.record("dn.dn.csv")?;
    out.record("dn.dn.json")?;
    outcome.measure("rows", dn.rows() as f64);
    outcome.measure("cols", dn.cols() as f64);
    outcome.measure("frobenius_norm", dn.entries.norm());
    let bad = dn.entries.iter().filter(|v| !(v.re.is_finite() && v.im.is_finite())).count();
    outcome.checks.push(Check::at_most("non_finite_entries", bad as f64, 0.0));
    Ok(outcome)
}

#[derive(Serialize)]
struct ReconstructionReport {
    iterations: usize,
    tikhonov: f64,
    residual_history: Vec<f64>,
    synthetic: bool,
    born_error: Option<f64>,
    estimate_error: Option<f64>,
}

pub fn reconstruct(cfg: &RunConfig, out: &mut Output) -> Result<Outcome, Failure> {
    let mut outcome = Outcome::default();
    let truth_problem = timed(&mut outcome, "assemble", || cfg.problem())?;
    let problem = truth_problem.with_potential(Field::zeros(truth_problem.grid()))?;
    let baseline = potential_field(&cfg.reconstruct.baseline, &problem)?;
    let synthetic = cfg.reconstruct.measured.is_none();
    let measured = match &cfg.reconstruct.measured {
        Some(path) => DNMatrix::read(path.parent().unwrap_or(Path::new(".")), &stem_of(path))?,
        None => {
            let (exc, tests) = bases(cfg, &problem)?;
            let solver = ForwardSolver::new(&truth_problem)?;
            let mut dn = timed(&mut outcome, "measure", || assemble_dn_map_with(&solver, &exc, &tests, false))?;
            if cfg.solver.noise_sigma > 0.0 {
                dn.add_noise(cfg.solver.noise_sigma, cfg.seed)?;
            }
            dn
        }
    };
    let rc = ReconstructionConfig {
        measured,
        baseline: (cfg.reconstruct.baseline != PotentialSpec::Zero).then_some(baseline),
        tikhonov: cfg.solver.tikhonov,
        max_iterations: cfg.solver.max_iterations,
        sampling: None,
        regularizer: cfg.solver.regularizer,
    };
    let res = timed(&mut outcome, "reconstruct", || reconstruct_potential(&rc, &problem))?;
    out.write("estimate.field", &res.estimate.to_bytes())?;
    out.write("born.field", &res.born.to_bytes())?;
    let rows = res.residual_history.iter().enumerate().map(|(k, r)| vec![k as f64, *r]);
    out.write("history.csv", csv(&["step", "relative_residual"], rows).as_bytes())?;
    let omega_t = problem.partition().omega_t();
    let (born_error, estimate_error) = if synthetic {
        let truth = truth_problem.potential();
        (Some(relative_error_on(&res.born, truth, &omega_t)?), Some(relative_error_on(&res.estimate, truth, &omega_t)?))
    } else {
        (None, None)
    };
    let report = ReconstructionReport {
        iterations: res.iterations,
        tikhonov: res.tikhonov,
        residual_history: res.residual_history.clone(),
        synthetic,
        born_error,
        estimate_error,
    };
    out.write_json("report.json", &report)?;
    if let Some(e) = born_error {
        outcome.measure("born_error", e);
    }
    if let Some(e) = estimate_error {
        outcome.measure("estimate_error", e);
    }
    let rise = res.residual_history.windows(2).map(|w| w[1] - w[0]).fold(0.0f64, f64::max);
    outcome.checks.push(Check::at_most("residual_history_increase", rise, 0.0));
    Ok(outcome)
}

/// Gaussian around `(x, t)`, zeroed on `Omega` and for `t <= -T`.
pub fn counterexample_seed(problem: &PolyParabolicProblem, center: [f64; 2]) -> Field {
    let grid = problem.grid();
    let omega = problem.partition().omega.clone();
    let mut u = Field::from_real_fn(grid, |t, x| {
        (-(x[0] - center[0]).powi(2) / 0.3 - (t - center[1]).powi(2) / 0.1).exp()
    });
    let ns = grid.n_space();
    for (k, v) in u.data_mut().iter_mut().enumerate() {
        let (j, i) = (k / ns, k % ns);
        if omega[i] || j <= grid.start_index() {
            *v = Complex64::new(0.0, 0.0);
        }
    }
    u
}

/// Candidates for exponents `a < b`: one cancelling the zeroth moment, one
/// with shifted powers, one complex mixture.
pub fn default_candidates(exponents: &[f64]) -> Vec<Candidate> {
    let n = exponents.len();
    let one = Complex64::new(1.0, 0.0);
    let mut cancel = vec![vec![Profile::standard(0.0)]; n];
    if n >= 2 {
        let c = gamma(1.0 + exponents[0]) / gamma(1.0 + exponents[1]);
        cancel[1] = vec![Profile::standard(0.0).scaled(-one * c)];
        for f in cancel.iter_mut().skip(2) {
            *f = vec![];
        }
    }
    let shifted = (0..n).map(|k| vec![Profile::standard(1.0 - 0.5 * k as f64).scaled(if k % 2 == 0 { one } else { -one })]).collect();
    let mixed = (0..n)
        .map(|k| {
            vec![
                Profile::standard(0.3 * k as f64).scaled(Complex64::new(1.0 - 0.3 * k as f64, 0.2 * k as f64)),
                Profile { coefficient: Complex64::new(0.0, 1.0), power: 0.5, rate: 2.0, inner: 0.5 },
            ]
        })
        .collect();
    vec![
        Candidate { label: "zeroth moment cancelled".into(), functions: cancel },
        Candidate { label: "shifted powers".into(), functions: shifted },
        Candidate { label: "complex mix".into(), functions: mixed },
    ]
}

pub fn entangle(cfg: &RunConfig, out: &mut Output) -> Result<Outcome, Failure> {
    let mut outcome = Outcome::default();
    let e = &cfg.entangle;
    match e.mode {
        EntangleMode::Counterexample => {
            let problem = timed(&mut outcome, "assemble", || cfg.problem())?;
            let u1 = counterexample_seed(&problem, e.center);
            let observed = problem.partition().omega_t();
            let rep = timed(&mut outcome, "counterexample", || {
                resonant_counterexample(problem.decomposition(), e.alpha, e.shift, &u1, &observed)
            })?;
            out.write("u1.field", &u1.to_bytes())?;
            out.write("u2.field", &rep.u2.to_bytes())?;
            out.write_json("report.json", &rep)?;
            outcome.checks.push(Check::at_most("residual_on_observed", rep.residual_on_o, 1e-10));
            outcome.checks.push(Check::at_least("norm_u1_over_grid_scale", rep.norm_u1 / rep.grid_scale, 0.1));
            outcome.checks.push(Check::at_least("norm_u2_over_grid_scale", rep.norm_u2 / rep.grid_scale, 0.1));
        }
        EntangleMode::Probe => {
            let candidates = e.candidates.clone().unwrap_or_else(|| default_candidates(&e.exponents));
            let rep = timed(&mut outcome, "probe", || entanglement_probe(&e.exponents, &candidates, e.range, &e.moment_grid))?;
            out.write_json("report.json", &rep)?;
            let mut text = String::from("candidate,m,residual\n");
            for (c, cand) in rep.candidates.iter().enumerate() {
                for (k, r) in cand.residuals.iter().enumerate() {
                    text.push_str(&format!("{c},{},{r:.17e}\n", e.range.0 + k as i32));
                }
            }
            out.write("moments.csv", text.as_bytes())?;
            outcome.measure("truncation_sensitivity", rep.truncation_sensitivity);
            outcome.checks.push(Check::above("min_moment_residual", rep.min_residual, 0.0));
            outcome.checks.push(Check::at_least("certified", if rep.certified { 1.0 } else { 0.0 }, 1.0));
        }
    }
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_family_cancels_the_zeroth_moment() {
        use fracpara_core::inverse::moments::{moment_functional, MomentGrid, MomentTestCase};
        let cands = default_candidates(&[0.3, 0.7]);
        let case = MomentTestCase::from_profiles(vec![0.3, 0.7], &cands[0].functions, (0, 2), &MomentGrid::default()).unwrap();
        let m0 = moment_functional(&case, 0).unwrap().norm();
        let m1 = moment_functional(&case, 1).unwrap().norm();
        assert!(m0 < 1e-12 && m1 > 1e-3, "{m0} {m1}");
    }
}
