//! Exterior bases, the Dirichlet-to-Neumann map restricted to them, and the
//! integral identity linking two potentials.

use crate::error::{Error, Result};
use crate::field::{l2_inner_product, Field};
use crate::forward::{ForwardSolver, PolyParabolicProblem, Solution};
use crate::grid::SpaceTimeGrid;
use crate::partition::{GeometryPartition, Which};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub const DN_SCHEMA: &str = "fracpara/dn-v1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisKind {
    /// Products of `sin^2` bumps. Along the first axis of `W` and along the
    /// time window, `n` bumps of width `2w/(n+1)` start at multiples of
    /// `w/(n+1)`, so neighbours overlap by half.
    Bump,
    /// Single space-time node indicators, evenly spread over `W` and the window.
    Nodal,
}

/// Recipe for an exterior basis; enough to rebuild it on the same grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisSpec {
    pub which: Which,
    pub kind: BasisKind,
    /// Elements along the first spatial axis.
    pub n_space: usize,
    pub n_time: usize,
    /// Physical time interval inside `[-T, T]`; `None` means all of it.
    #[serde(default)]
    pub window: Option<[f64; 2]>,
}

#[derive(Clone, Debug)]
pub struct ExteriorBasis {
    spec: BasisSpec,
    elements: Vec<Field>,
}

fn spread(len: usize, count: usize) -> Vec<usize> {
    (0..count).map(|k| ((2 * k + 1) * len) / (2 * count)).collect()
}

fn bump(x: f64, a: f64, b: f64) -> f64 {
    if x <= a || x >= b {
        0.0
    } else {
        (PI * (x - a) / (b - a)).sin().powi(2)
    }
}

impl ExteriorBasis {
    pub fn new(partition: &GeometryPartition, spec: BasisSpec) -> Result<Self> {
        if spec.which == Which::Omega {
            return Err(Error::InvalidArgument("exterior basis cannot live in Omega".into()));
        }
        if spec.n_space == 0 || spec.n_time == 0 {
            return Err(Error::InvalidArgument("basis needs at least one element per axis".into()));
        }
        let grid = partition.grid().clone();
        let t = grid.half_window;
        let [ta, tb] = spec.window.unwrap_or([-t, t]);
        if !(ta < tb && ta >= -t - 1e-12 && tb <= t + 1e-12) {
            return Err(Error::InvalidArgument(format!("time window [{ta}, {tb}] not inside [-T, T]")));
        }
        let mask = partition.mask(spec.which).to_vec();
        let region = partition.region(spec.which);
        let nodes: Vec<usize> = (0..mask.len()).filter(|&i| mask[i]).collect();
        let times: Vec<usize> = grid
            .window()
            .filter(|&j| {
                let tj = grid.time(j);
                tj >= ta - 1e-12 && tj <= tb + 1e-12
            })
            .collect();
        let box_spec = &partition.specs[match spec.which {
            Which::Omega => 0,
            Which::W1 => 1,
            Which::W2 => 2,
        }];
        let mut elements = Vec::with_capacity(spec.n_space * spec.n_time);
        match spec.kind {
            BasisKind::Bump => {
                let [lo, hi] = box_spec[0];
                let wx = (hi - lo) / (spec.n_space + 1) as f64;
                let wt = (tb - ta) / (spec.n_time + 1) as f64;
                for it in 0..spec.n_time {
                    for ix in 0..spec.n_space {
                        let (a, b) = (lo + ix as f64 * wx, lo + (ix + 2) as f64 * wx);
                        let (c, d) = (ta + it as f64 * wt, ta + (it + 2) as f64 * wt);
                        let f = Field::from_real_fn(&grid, |tt, x| {
                            let mut v = bump(x[0], a, b) * bump(tt, c, d);
                            if grid.spatial_dim == 2 {
                                let [l1, h1] = box_spec[1];
                                // Widen by one node so the whole box stays in play.
                                let pad = grid.h();
                                v *= bump(x[1], l1 - pad, h1 + pad);
                            }
                            v
                        })
                        .restrict(&region);
                        elements.push(f);
                    }
                }
            }
            BasisKind::Nodal => {
                if spec.n_space > nodes.len() || spec.n_time > times.len() {
                    return Err(Error::InvalidArgument(format!(
                        "{}x{} nodal elements requested from {}x{} available nodes",
                        spec.n_space,
                        spec.n_time,
                        nodes.len(),
                        times.len()
                    )));
                }
                for jt in spread(times.len(), spec.n_time) {
                    for ix in spread(nodes.len(), spec.n_space) {
                        let mut f = Field::zeros(&grid);
                        f.data_mut()[grid.index(times[jt], nodes[ix])] = Complex64::new(1.0, 0.0);
                        elements.push(f);
                    }
                }
            }
        }
        for (k, e) in elements.iter_mut().enumerate() {
            let n = e.norm();
            if n == 0.0 {
                return Err(Error::Degenerate(format!("basis element {k} has no nodes in its support")));
            }
            *e = e.scale(Complex64::new(1.0 / n, 0.0));
        }
        let basis = ExteriorBasis { spec, elements };
        basis.check_gram()?;
        Ok(basis)
    }

    fn check_gram(&self) -> Result<()> {
        let n = self.elements.len();
        let mut g = DMatrix::<Complex64>::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v = l2_inner_product(&self.elements[j], &self.elements[i], None, None)?;
                g[(i, j)] = v;
                g[(j, i)] = v.conj();
            }
        }
        let sv = g.singular_values();
        if sv.min() < 1e-10 * sv.max() {
            return Err(Error::Degenerate("exterior basis Gram matrix is singular".into()));
        }
        Ok(())
    }

    pub fn spec(&self) -> &BasisSpec {
        &self.spec
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[Field] {
        &self.elements
    }

    /// `sum_k c_k e_k`.
    pub fn combine(&self, coeffs: &[Complex64]) -> Result<Field> {
        if coeffs.len() != self.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} coefficients for a basis of {}",
                coeffs.len(),
                self.len()
            )));
        }
        let grid = self.elements[0].grid();
        let mut out = Field::zeros(grid);
        for (c, e) in coeffs.iter().zip(&self.elements) {
            for (o, v) in out.data_mut().iter_mut().zip(e.data()) {
                *o += c * v;
            }
        }
        Ok(out)
    }
}

/// Solves one exterior problem per basis element (adjoint problems when
/// `adjoint`), in parallel, in basis order.
pub fn solution_bank(solver: &ForwardSolver, basis: &ExteriorBasis, adjoint: bool) -> Result<Vec<Solution>> {
    basis
        .elements()
        .par_iter()
        .enumerate()
        .map(|(k, f)| {
            let r = if adjoint { solver.solve_adjoint(f, None) } else { solver.solve(f, None) };
            r.map_err(|e| Error::Column { column: k, source: Box::new(e) })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseRecord {
    pub sigma: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DNMetadata {
    pub schema: String,
    pub rows: usize,
    pub cols: usize,
    pub adjoint: bool,
    pub excitations: BasisSpec,
    pub tests: BasisSpec,
    pub grid: SpaceTimeGrid,
    pub exponents: Vec<f64>,
    pub weights: Vec<f64>,
    pub fingerprint: String,
    pub geometry_fingerprint: String,
    /// How exterior data classes are represented.
    pub representatives: String,
    #[serde(default)]
    pub noise: Option<NoiseRecord>,
}

/// `Lambda[j][i] = B_V(u_{f_i}, zeta_j)`: rows are tests, columns excitations.
#[derive(Clone, Debug, PartialEq)]
pub struct DNMatrix {
    pub entries: DMatrix<Complex64>,
    pub meta: DNMetadata,
}

pub fn assemble_dn_map(
    problem: &PolyParabolicProblem,
    excitations: &ExteriorBasis,
    tests: &ExteriorBasis,
    adjoint: bool,
) -> Result<DNMatrix> {
    let solver = ForwardSolver::new(problem)?;
    assemble_dn_map_with(&solver, excitations, tests, adjoint)
}

/// As [`assemble_dn_map`] with an already factored system.
pub fn assemble_dn_map_with(
    solver: &ForwardSolver,
    excitations: &ExteriorBasis,
    tests: &ExteriorBasis,
    adjoint: bool,
) -> Result<DNMatrix> {
    let problem = solver.problem();
    let (nr, nc) = (tests.len(), excitations.len());
    let mut entries = DMatrix::<Complex64>::zeros(nr, nc);
    if !adjoint {
        let cols: Vec<Vec<Complex64>> = excitations
            .elements()
            .par_iter()
            .enumerate()
            .map(|(i, f)| {
                let col = || -> Result<Vec<Complex64>> {
                    let u = solver.solve(f, None)?;
                    let pu = problem.apply(&u.u, false)?;
                    tests.elements().iter().map(|z| problem.inner(&pu, z)).collect()
                };
                col().map_err(|e| Error::Column { column: i, source: Box::new(e) })
            })
            .collect::<Result<_>>()?;
        for (i, col) in cols.iter().enumerate() {
            for (j, v) in col.iter().enumerate() {
                entries[(j, i)] = *v;
            }
        }
    } else {
        let rows: Vec<Vec<Complex64>> = tests
            .elements()
            .par_iter()
            .enumerate()
            .map(|(j, z)| {
                let row = || -> Result<Vec<Complex64>> {
                    let w = solver.solve_adjoint(z, None)?;
                    let pw = problem.apply(&w.u, true)?;
                    excitations.elements().iter().map(|f| problem.inner(f, &pw)).collect()
                };
                row().map_err(|e| Error::Column { column: j, source: Box::new(e) })
            })
            .collect::<Result<_>>()?;
        for (j, row) in rows.iter().enumerate() {
            for (i, v) in row.iter().enumerate() {
                entries[(j, i)] = *v;
            }
        }
    }
    if let Some(k) = entries.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite(k));
    }
    Ok(DNMatrix {
        entries,
        meta: DNMetadata {
            schema: DN_SCHEMA.into(),
            rows: nr,
            cols: nc,
            adjoint,
            excitations: excitations.spec().clone(),
            tests: tests.spec().clone(),
            grid: problem.grid().clone(),
            exponents: problem.exponents().to_vec(),
            weights: problem.weights().to_vec(),
            fingerprint: problem.fingerprint(),
            geometry_fingerprint: problem.geometry_fingerprint(),
            representatives: "exterior data represented by elements supported in W x [-T, T]".into(),
            noise: None,
        },
    })
}

/// `c_zeta^H Lambda c_f`.
pub fn dn_pairing(dn: &DNMatrix, coeffs_f: &[Complex64], coeffs_zeta: &[Complex64]) -> Result<Complex64> {
    if coeffs_f.len() != dn.entries.ncols() || coeffs_zeta.len() != dn.entries.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "coefficients ({}, {}) for a {}x{} DN matrix",
            coeffs_f.len(),
            coeffs_zeta.len(),
            dn.entries.nrows(),
            dn.entries.ncols()
        )));
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for (j, cz) in coeffs_zeta.iter().enumerate() {
        for (i, cf) in coeffs_f.iter().enumerate() {
            acc += cz.conj() * dn.entries[(j, i)] * cf;
        }
    }
    Ok(acc)
}

impl DNMatrix {
    pub fn rows(&self) -> usize {
        self.entries.nrows()
    }

    pub fn cols(&self) -> usize {
        self.entries.ncols()
    }

    /// Adds independent `N(0, sigma^2)` noise to the real and imaginary part
    /// of every entry.
    pub fn add_noise(&mut self, sigma: f64, seed: u64) -> Result<()> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidArgument("noise level must be finite and nonnegative".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, sigma).expect("valid sigma");
        for z in self.entries.iter_mut() {
            let (a, b) = (normal.sample(&mut rng), normal.sample(&mut rng));
            *z += Complex64::new(a, b);
        }
        self.meta.noise = Some(NoiseRecord { sigma, seed });
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!("{},{}\n", self.rows(), self.cols());
        for j in 0..self.rows() {
            let row: Vec<String> = (0..self.cols())
                .map(|i| {
                    let z = self.entries[(j, i)];
                    format!("{:.17e},{:.17e}", z.re, z.im)
                })
                .collect();
            let _ = writeln!(s, "{}", row.join(","));
        }
        s
    }

    pub fn from_csv(text: &str, meta: DNMetadata) -> Result<Self> {
        let mut lines = text.lines();
        let head = lines.next().ok_or_else(|| Error::Malformed("empty DN csv".into()))?;
        let dims: Vec<usize> = head
            .split(',')
            .map(|t| t.trim().parse().map_err(|_| Error::Malformed(format!("bad header {head:?}"))))
            .collect::<Result<_>>()?;
        let [nr, nc] = dims[..] else {
            return Err(Error::Malformed(format!("bad header {head:?}")));
        };
        if nr != meta.rows || nc != meta.cols {
            return Err(Error::SizeMismatch { expected: meta.rows * meta.cols, found: nr * nc });
        }
        let mut entries = DMatrix::<Complex64>::zeros(nr, nc);
        for j in 0..nr {
            let line = lines.next().ok_or_else(|| Error::Malformed(format!("missing row {j}")))?;
            let vals: Vec<f64> = line
                .split(',')
                .map(|t| t.trim().parse().map_err(|_| Error::Malformed(format!("bad number in row {j}"))))
                .collect::<Result<_>>()?;
            if vals.len() != 2 * nc {
                return Err(Error::SizeMismatch { expected: 2 * nc, found: vals.len() });
            }
            for i in 0..nc {
                entries[(j, i)] = Complex64::new(vals[2 * i], vals[2 * i + 1]);
            }
        }
        Ok(DNMatrix { entries, meta })
    }

    /// Writes `<stem>.dn.csv` and `<stem>.dn.json`; returns both paths.
    pub fn write(&self, dir: impl AsRef<Path>, stem: &str) -> Result<[PathBuf; 2]> {
        let csv = dir.as_ref().join(format!("{stem}.dn.csv"));
        let json = dir.as_ref().join(format!("{stem}.dn.json"));
        std::fs::write(&csv, self.to_csv())?;
        std::fs::write(&json, serde_json::to_string_pretty(&self.meta)? + "\n")?;
        Ok([csv, json])
    }

    pub fn read(dir: impl AsRef<Path>, stem: &str) -> Result<Self> {
        let json = std::fs::read_to_string(dir.as_ref().join(format!("{stem}.dn.json")))?;
        let meta: DNMetadata = serde_json::from_str(&json)?;
        if meta.schema != DN_SCHEMA {
            return Err(Error::UnsupportedSchema(meta.schema));
        }
        let csv = std::fs::read_to_string(dir.as_ref().join(format!("{stem}.dn.csv")))?;
        Self::from_csv(&csv, meta)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct IdentityReport {
    pub lhs: Complex64,
    pub rhs: Complex64,
    pub residual: f64,
}

/// Relative gap between `a` and `b`, with an absolute floor for the
/// all-zero case.
pub fn relative_gap(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / a.norm().max(b.norm()).max(1e-14)
}

/// Both sides of
/// `<(Lambda_{V1} - Lambda_{V2}) f1, f2> = ((V1 - V2) u1, u2)_{Omega_T}`,
/// with `u1` the forward solution for `V1` and `u2` the adjoint solution for
/// `V2`. The problems must differ only in their potentials.
pub fn integral_identity_residual(
    p1: &PolyParabolicProblem,
    p2: &PolyParabolicProblem,
    f1: &Field,
    f2: &Field,
) -> Result<IdentityReport> {
    let s1 = ForwardSolver::new(p1)?;
    let s2 = ForwardSolver::new(p2)?;
    integral_identity_with(&s1, &s2, f1, f2)
}

/// As [`integral_identity_residual`] with factored systems.
pub fn integral_identity_with(
    s1: &ForwardSolver,
    s2: &ForwardSolver,
    f1: &Field,
    f2: &Field,
) -> Result<IdentityReport> {
    let (p1, p2) = (s1.problem(), s2.problem());
    if p1.geometry_fingerprint() != p2.geometry_fingerprint() {
        return Err(Error::FingerprintMismatch("the two problems differ beyond the potential".into()));
    }
    let u1 = s1.solve(f1, None)?;
    let u1b = s2.solve(f1, None)?;
    let u2 = s2.solve_adjoint(f2, None)?;
    // Differencing the solutions first cancels the common exterior datum
    // exactly instead of subtracting two nearly equal pairings.
    let omega_t = p1.partition().omega_t();
    let free = p1.with_potential(Field::zeros(p1.grid()))?;
    let potential_part = p1.potential().mul(&u1.u)?.sub(&p2.potential().mul(&u1b.u)?)?;
    let lhs = free.form(&u1.u.sub(&u1b.u)?, f2)?
        + l2_inner_product(&potential_part, f2, Some(&omega_t), Some(p1.metric()))?;
    let dv = p1.potential().sub(p2.potential())?;
    let rhs = l2_inner_product(&dv.mul(&u1.u)?, &u2.u, Some(&omega_t), Some(p1.metric()))?;
    Ok(IdentityReport { lhs, rhs, residual: relative_gap(lhs, rhs) })
}
