//! Probes of the entanglement principle: the explicit cancelling pair for
//! integer-shifted exponents, and a moment-based falsification harness for
//! nonresonant ones.

use super::moments::{moment_functional, MomentGrid, MomentTestCase, Profile};
use crate::error::{Error, Result};
use crate::field::{Field, Region};
use crate::operator::calculus::{apply_integer_power, apply_power};
use crate::operator::SpectralDecomposition;
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

#[derive(Clone, Debug, Serialize)]
pub struct CounterexampleReport {
    pub alpha: f64,
    pub shift: u32,
    /// `||H^{alpha+m} u1 + H^alpha u2||_{O_T} / (||u1|| + ||u2||)`.
    pub residual_on_o: f64,
    pub norm_u1: f64,
    pub norm_u2: f64,
    /// `||u1||_inf sqrt(dt h^n)`: the norm of a single-node spike at the
    /// peak amplitude of `u1`.
    pub grid_scale: f64,
    #[serde(skip)]
    pub u2: Field,
}

/// With `u2 = -H^m u1`, `H^{alpha+m} u1 + H^alpha u2` vanishes identically.
pub fn resonant_counterexample(
    decomp: &SpectralDecomposition,
    alpha: f64,
    m: u32,
    u1: &Field,
    observed: &Region,
) -> Result<CounterexampleReport> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument("alpha must lie in (0, 1)".into()));
    }
    if m == 0 {
        return Err(Error::InvalidArgument("integer shift must be at least 1".into()));
    }
    let grid = decomp.grid();
    if u1.grid() != grid || observed.spatial.len() != grid.n_space() {
        return Err(Error::GridMismatch);
    }
    if u1.max_abs() == 0.0 {
        return Err(Error::Degenerate("u1 must be nonzero outside the observation set".into()));
    }
    if u1.norm_on(observed) > 0.0 {
        return Err(Error::Support("u1 must vanish on the observation set".into()));
    }
    let past = Region { spatial: vec![true; grid.n_space()], time: 0..grid.start_index() + 1 };
    if u1.norm_on(&past) > 0.0 {
        return Err(Error::Support("u1 must vanish for t <= -T".into()));
    }
    let u2 = apply_integer_power(decomp, u1, m, false)?.scale(Complex64::new(-1.0, 0.0));
    let a = apply_power(decomp, u1, alpha + m as f64, false)?;
    let b = apply_power(decomp, &u2, alpha, false)?;
    let sum = a.add(&b)?;
    let (n1, n2) = (u1.norm(), u2.norm());
    Ok(CounterexampleReport {
        alpha,
        shift: m,
        residual_on_o: sum.norm_on(observed) / (n1 + n2),
        norm_u1: n1,
        norm_u2: n2,
        grid_scale: u1.max_abs() * grid.cell().sqrt(),
        u2,
    })
}

/// Rejects exponent lists with an integer pairwise difference.
pub fn check_nonresonant(exponents: &[f64]) -> Result<()> {
    for (i, a) in exponents.iter().enumerate() {
        for b in &exponents[i + 1..] {
            let d = a - b;
            if (d - d.round()).abs() < 1e-9 {
                return Err(Error::Resonant(format!("{a} and {b} differ by an integer")));
            }
        }
    }
    Ok(())
}

/// One member of the tested family: a profile sum per exponent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Candidate {
    pub label: String,
    pub functions: Vec<Vec<Profile>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CandidateReport {
    pub label: String,
    /// `|moment_functional(m)|` for `m = l..=M`, after normalizing
    /// `max_k ||f_k|| = 1`.
    pub residuals: Vec<f64>,
    pub residual_norm: f64,
    /// Why the candidate was left out, if it was.
    pub excluded: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ProbeReport {
    pub exponents: Vec<f64>,
    pub range: (i32, i32),
    pub candidates: Vec<CandidateReport>,
    /// Smallest moment-residual norm over the admitted candidates.
    pub min_residual: f64,
    /// Per candidate, `sigma_min` of the moment matrix of its normalized
    /// profiles: a lower bound over every family `f_k = c_k g_k` with
    /// `max |c_k| = 1`.
    pub family_lower_bounds: Vec<f64>,
    /// Relative change of `min_residual` under a narrower `tau` grid.
    pub truncation_sensitivity: f64,
    /// True when every admitted candidate has a positive residual.
    pub certified: bool,
}

fn evaluate(
    exponents: &[f64],
    candidates: &[Candidate],
    range: (i32, i32),
    grid: &MomentGrid,
) -> Result<(Vec<CandidateReport>, Vec<f64>)> {
    let mut reports = Vec::with_capacity(candidates.len());
    let mut bounds = Vec::with_capacity(candidates.len());
    for cand in candidates {
        if cand.functions.len() != exponents.len() {
            return Err(Error::DimensionMismatch(format!(
                "candidate {} has {} functions for {} exponents",
                cand.label,
                cand.functions.len(),
                exponents.len()
            )));
        }
        let case = MomentTestCase::from_profiles(exponents.to_vec(), &cand.functions, range, grid)?;
        let scale = case.max_norm();
        let mut report = CandidateReport { label: cand.label.clone(), residuals: vec![], residual_norm: 0.0, excluded: None };
        if scale == 0.0 {
            report.excluded = Some("all functions vanish".into());
            reports.push(report);
            bounds.push(f64::NAN);
            continue;
        }
        if let Some(k) = (0..exponents.len()).find(|&k| !case.decay(k).holds()) {
            report.excluded = Some(format!("f_{k} violates the decay template"));
            reports.push(report);
            bounds.push(f64::NAN);
            continue;
        }
        let ms: Vec<i32> = (range.0..=range.1).collect();
        for &m in &ms {
            report.residuals.push(moment_functional(&case, m)?.norm() / scale);
        }
        report.residual_norm = report.residuals.iter().map(|r| r * r).sum::<f64>().sqrt();
        reports.push(report);
        // Columns: normalized profile shapes.
        let mut a = DMatrix::<Complex64>::zeros(ms.len(), exponents.len());
        for (k, &alpha) in exponents.iter().enumerate() {
            let norm = case.samples[k].iter().zip(&case.weights).map(|(v, w)| v.norm_sqr() * w).sum::<f64>().sqrt();
            if norm == 0.0 {
                continue;
            }
            for (r, &m) in ms.iter().enumerate() {
                a[(r, k)] = case.moment_integral(k, m)? * (gamma(m as f64 + 1.0 + alpha) / norm);
            }
        }
        let sv = a.singular_values();
        bounds.push(if ms.len() >= exponents.len() { sv.min() } else { 0.0 });
    }
    Ok((reports, bounds))
}

fn min_admitted(reports: &[CandidateReport]) -> f64 {
    reports.iter().filter(|r| r.excluded.is_none()).map(|r| r.residual_norm).fold(f64::INFINITY, f64::min)
}

pub fn entanglement_probe(
    exponents: &[f64],
    candidates: &[Candidate],
    range: (i32, i32),
    grid: &MomentGrid,
) -> Result<ProbeReport> {
    if exponents.iter().any(|a| !a.is_finite() || *a <= 0.0) {
        return Err(Error::InvalidArgument("exponents must be positive".into()));
    }
    check_nonresonant(exponents)?;
    let (reports, bounds) = evaluate(exponents, candidates, range, grid)?;
    let min_residual = min_admitted(&reports);
    if !min_residual.is_finite() {
        return Err(Error::Degenerate("no admissible candidate in the family".into()));
    }
    let narrow = MomentGrid { tau_min: grid.tau_min * 10.0, tau_max: grid.tau_max * 0.5, ..*grid };
    let (narrow_reports, _) = evaluate(exponents, candidates, range, &narrow)?;
    let narrow_min = min_admitted(&narrow_reports);
    Ok(ProbeReport {
        exponents: exponents.to_vec(),
        range,
        certified: min_residual > 0.0,
        candidates: reports,
        min_residual,
        family_lower_bounds: bounds,
        truncation_sensitivity: (narrow_min - min_residual).abs() / min_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resonance_detection() {
        assert!(check_nonresonant(&[0.3, 0.7]).is_ok());
        let e = check_nonresonant(&[0.5, 1.5]).unwrap_err();
        assert!(e.to_string().contains("resonant_counterexample"));
    }

    #[test]
    fn zero_candidates_are_excluded() {
        let zero = Profile::standard(0.0).scaled(Complex64::new(0.0, 0.0));
        let one = Profile::standard(0.0);
        let cands = vec![
            Candidate { label: "zero".into(), functions: vec![vec![zero], vec![zero]] },
            Candidate { label: "one".into(), functions: vec![vec![one], vec![zero]] },
        ];
        let r = entanglement_probe(&[0.3, 0.7], &cands, (0, 2), &MomentGrid::default()).unwrap();
        assert!(r.candidates[0].excluded.is_some());
        assert!(r.certified && r.min_residual > 0.0);
    }
}
