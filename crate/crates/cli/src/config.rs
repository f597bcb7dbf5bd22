use crate::Failure;
use fracpara_core::dnmap::{BasisKind, BasisSpec};
use fracpara_core::inverse::entangle::Candidate;
use fracpara_core::inverse::moments::MomentGrid;
use fracpara_core::inverse::reconstruct::Regularizer;
use fracpara_core::operator::{assemble_laplace_beltrami, QuadratureParams};
use fracpara_core::partition::BoxSpec;
use fracpara_core::{Field, GeometryPartition, MetricField, PolyParabolicProblem, SpaceTimeGrid, Which};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::sync::Arc;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridBlock {
    pub spatial_dim: usize,
    pub extent: f64,
    pub nx: usize,
    pub half_window: f64,
    pub padding: usize,
    pub nt: usize,
}

impl Default for GridBlock {
    fn default() -> Self {
        GridBlock { spatial_dim: 1, extent: 2.0 * PI, nx: 64, half_window: 1.0, padding: 4, nt: 256 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PartitionBlock {
    pub omega: BoxSpec,
    pub w1: BoxSpec,
    pub w2: BoxSpec,
}

impl Default for PartitionBlock {
    fn default() -> Self {
        PartitionBlock { omega: vec![[2.0, 4.0]], w1: vec![[0.2, 1.0]], w2: vec![[5.0, 5.8]] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MetricSpec {
    Identity,
    /// `g = (1 + amplitude sin x_1) I`.
    Sinusoid { amplitude: f64, lambda: Option<f64> },
    /// Components stored in the first time slices of a field file.
    File { path: PathBuf, lambda: Option<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OperatorBlock {
    pub exponents: Vec<f64>,
    pub weights: Vec<f64>,
    pub metric: MetricSpec,
}

impl Default for OperatorBlock {
    fn default() -> Self {
        OperatorBlock { exponents: vec![0.3, 0.7], weights: vec![1.0, 1.0], metric: MetricSpec::Identity }
    }
}

/// A potential on `Omega_T`; analytic kinds are restricted there.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
#[derive(Default)]
pub enum PotentialSpec {
    #[default]
    Zero,
    Constant { re: f64, im: f64 },
    /// `amplitude sin(x_1) cos(pi t / 2T)`.
    SinCos { amplitude: f64 },
    File { path: PathBuf },
}


#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatumSpec {
    /// One unit-norm `sin^2` bump over the exterior set and time window.
    Bump { which: Which, window: [f64; 2] },
    File { path: PathBuf },
}

impl Default for DatumSpec {
    fn default() -> Self {
        DatumSpec::Bump { which: Which::W1, window: [-0.5, 0.5] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverBlock {
    /// Regularization weight of the reconstruction, relative to `||M||^2`.
    pub tikhonov: f64,
    pub max_iterations: usize,
    pub regularizer: Regularizer,
    /// Weight of the Runge least-squares problem.
    pub runge_epsilon: f64,
    /// Assemble the DN map through adjoint solves.
    pub adjoint: bool,
    /// Gaussian noise added to assembled DN entries.
    pub noise_sigma: f64,
    pub interior_tolerance: f64,
    pub causality_tolerance: f64,
}

impl Default for SolverBlock {
    fn default() -> Self {
        SolverBlock {
            tikhonov: 1e-3,
            max_iterations: 3,
            regularizer: Regularizer::Gradient,
            runge_epsilon: 1e-16,
            adjoint: false,
            noise_sigma: 0.0,
            interior_tolerance: 1e-8,
            causality_tolerance: 1e-6,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BasesBlock {
    pub excitation: BasisSpec,
    pub test: BasisSpec,
}

impl Default for BasesBlock {
    fn default() -> Self {
        let spec = |which| BasisSpec { which, kind: BasisKind::Bump, n_space: 2, n_time: 4, window: None };
        BasesBlock { excitation: spec(Which::W1), test: spec(Which::W2) }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForwardBlock {
    pub datum: DatumSpec,
    /// Interior source; none when absent.
    pub source: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReconstructBlock {
    /// `<dir>/<stem>` of a stored DN matrix; synthesized from `potential`
    /// when absent.
    pub measured: Option<PathBuf>,
    pub baseline: PotentialSpec,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntangleMode {
    Counterexample,
    Probe,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EntangleBlock {
    pub mode: EntangleMode,
    pub alpha: f64,
    pub shift: u32,
    /// Centre `(x, t)` of the Gaussian used as `u1`.
    pub center: [f64; 2],
    pub exponents: Vec<f64>,
    pub range: (i32, i32),
    pub moment_grid: MomentGrid,
    /// Default family when absent.
    pub candidates: Option<Vec<Candidate>>,
}

impl Default for EntangleBlock {
    fn default() -> Self {
        EntangleBlock {
            mode: EntangleMode::Counterexample,
            alpha: 0.5,
            shift: 1,
            center: [0.6, 0.2],
            exponents: vec![0.3, 0.7],
            range: (0, 3),
            moment_grid: MomentGrid::default(),
            candidates: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValidateBlock {
    pub quadrature: QuadratureParams,
    /// Randomized draws for the pairing and identity checks.
    pub draws: usize,
}

impl Default for ValidateBlock {
    fn default() -> Self {
        ValidateBlock { quadrature: QuadratureParams { tau_max: 400.0, n_high: 3200, ..QuadratureParams::default() }, draws: 3 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Optional; must match the subcommand when present.
    pub command: Option<String>,
    pub grid: GridBlock,
    pub partition: PartitionBlock,
    pub operator: OperatorBlock,
    pub potential: PotentialSpec,
    pub solver: SolverBlock,
    pub bases: BasesBlock,
    pub forward: ForwardBlock,
    pub reconstruct: ReconstructBlock,
    pub entangle: EntangleBlock,
    pub validate: ValidateBlock,
    pub output: Option<PathBuf>,
    pub seed: u64,
}

fn config_error(msg: impl std::fmt::Display) -> Failure {
    Failure::Config(msg.to_string())
}

/// Reads and validates a JSON config; relative paths are resolved against
/// the config's directory.
pub fn parse_config(path: &Path) -> Result<RunConfig, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| config_error(format!("{}: {e}", path.display())))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    let mut cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let at = e.path().to_string();
        config_error(format!("{}: at `{at}`: {}", path.display(), e.inner()))
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    cfg.resolve_paths(base);
    cfg.validate()?;
    Ok(cfg)
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl RunConfig {
    fn resolve_paths(&mut self, base: &Path) {
        if let MetricSpec::File { path, .. } = &mut self.operator.metric {
            resolve(base, path);
        }
        for spec in [&mut self.potential, &mut self.reconstruct.baseline] {
            if let PotentialSpec::File { path } = spec {
                resolve(base, path);
            }
        }
        if let DatumSpec::File { path } = &mut self.forward.datum {
            resolve(base, path);
        }
        if let Some(p) = &mut self.forward.source {
            resolve(base, p);
        }
        if let Some(p) = &mut self.reconstruct.measured {
            resolve(base, p);
        }
        if let Some(p) = &mut self.output {
            resolve(base, p);
        }
    }

    pub fn validate(&self) -> Result<(), Failure> {
        let ops = &self.operator;
        if ops.exponents.is_empty() {
            return Err(config_error("operator.exponents must not be empty"));
        }
        if ops.exponents.windows(2).any(|w| w[1] <= w[0]) {
            return Err(config_error("operator.exponents: exponents must be strictly increasing"));
        }
        if ops.exponents.iter().any(|s| !(*s > 0.0 && *s < 1.0)) {
            return Err(config_error("operator.exponents must lie in (0, 1)"));
        }
        if ops.weights.len() != ops.exponents.len() || ops.weights.iter().any(|b| b.is_nan() || *b <= 0.0) {
            return Err(config_error("operator.weights must be positive, one per exponent"));
        }
        let s = &self.solver;
        if !(s.tikhonov > 0.0 && s.runge_epsilon > 0.0 && s.noise_sigma >= 0.0) {
            return Err(config_error("solver weights must be positive and noise nonnegative"));
        }
        let grid = self.grid()?;
        self.partition(&grid)?;
        let mut inputs: Vec<&Path> = Vec::new();
        if let MetricSpec::File { path, .. } = &ops.metric {
            inputs.push(path);
        }
        for spec in [&self.potential, &self.reconstruct.baseline] {
            if let PotentialSpec::File { path } = spec {
                inputs.push(path);
            }
        }
        if let DatumSpec::File { path } = &self.forward.datum {
            inputs.push(path);
        }
        if let Some(p) = &self.forward.source {
            inputs.push(p);
        }
        for p in inputs {
            if !p.is_file() {
                return Err(config_error(format!("input {} does not exist", p.display())));
            }
        }
        if let Some(m) = &self.reconstruct.measured {
            let csv = m.with_file_name(format!("{}.dn.csv", stem_of(m)));
            if !csv.is_file() {
                return Err(config_error(format!("measured DN matrix {} does not exist", csv.display())));
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<SpaceTimeGrid, Failure> {
        let g = &self.grid;
        SpaceTimeGrid::new(g.spatial_dim, g.extent, g.nx, g.half_window, g.padding, g.nt)
            .map_err(|e| config_error(format!("grid: {e}")))
    }

    pub fn partition(&self, grid: &SpaceTimeGrid) -> Result<GeometryPartition, Failure> {
        let p = &self.partition;
        GeometryPartition::new(grid, p.omega.clone(), p.w1.clone(), p.w2.clone())
            .map_err(|e| config_error(format!("partition: {e}")))
    }

    pub fn metric(&self, grid: &SpaceTimeGrid) -> Result<MetricField, Failure> {
        let m = match &self.operator.metric {
            MetricSpec::Identity => Ok(MetricField::identity(grid)),
            MetricSpec::Sinusoid { amplitude, lambda } => MetricField::sinusoid(grid, *amplitude, *lambda),
            MetricSpec::File { path, lambda } => {
                Field::read(path).and_then(|f| MetricField::from_field(&f, *lambda))
            }
        };
        m.map_err(|e| config_error(format!("operator.metric: {e}")))
    }

    /// The problem with the configured potential.
    pub fn problem(&self) -> Result<PolyParabolicProblem, Failure> {
        let grid = self.grid()?;
        let metric = self.metric(&grid)?;
        let partition = self.partition(&grid)?;
        let decomp = assemble_laplace_beltrami(&grid, &metric).map_err(|e| config_error(format!("operator: {e}")))?;
        let base = PolyParabolicProblem::new(
            Arc::new(decomp),
            metric,
            partition,
            self.operator.exponents.clone(),
            self.operator.weights.clone(),
            Field::zeros(&grid),
        )
        .map_err(|e| config_error(format!("operator: {e}")))?;
        let v = potential_field(&self.potential, &base)?;
        base.with_potential(v).map_err(|e| config_error(format!("potential: {e}")))
    }
}

pub fn stem_of(p: &Path) -> String {
    p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

pub fn potential_field(spec: &PotentialSpec, problem: &PolyParabolicProblem) -> Result<Field, Failure> {
    let grid = problem.grid();
    let omega_t = problem.partition().omega_t();
    let t = grid.half_window;
    let field = match spec {
        PotentialSpec::Zero => Field::zeros(grid),
        PotentialSpec::Constant { re, im } => {
            Field::from_fn(grid, |_, _| Complex64::new(*re, *im)).restrict(&omega_t)
        }
        PotentialSpec::SinCos { amplitude } => {
            Field::from_real_fn(grid, |tt, x| amplitude * x[0].sin() * (PI * tt / (2.0 * t)).cos()).restrict(&omega_t)
        }
        PotentialSpec::File { path } => {
            let f = Field::read(path).map_err(|e| config_error(format!("potential {}: {e}", path.display())))?;
            if f.grid() != grid {
                return Err(config_error(format!("potential {} is on a different grid", path.display())));
            }
            f
        }
    };
    Ok(field)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RunConfig, Failure> {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, text).unwrap();
        parse_config(&path)
    }

    #[test]
    fn empty_document_is_the_desk_setup() {
        let cfg = parse("{}").unwrap();
        assert_eq!((cfg.grid.nx, cfg.grid.nt, cfg.grid.padding), (64, 256, 4));
        assert_eq!(cfg.solver.tikhonov, 1e-3);
        assert_eq!(cfg.potential, PotentialSpec::Zero);
    }

    #[test]
    fn tagged_specs_parse() {
        let cfg = parse(
            r#"{"operator": {"metric": {"kind": "sinusoid", "amplitude": 0.5, "lambda": 0.5}},
                "potential": {"kind": "sin_cos", "amplitude": 0.05},
                "forward": {"datum": {"kind": "bump", "which": "w2", "window": [-0.25, 0.25]}}}"#,
        )
        .unwrap();
        assert_eq!(cfg.operator.metric, MetricSpec::Sinusoid { amplitude: 0.5, lambda: Some(0.5) });
        assert!(matches!(cfg.forward.datum, DatumSpec::Bump { which: Which::W2, .. }));
        assert!(parse(r#"{"potential": {"kind": "sin_cos", "amplitude": 1, "extra": 2}}"#).is_err());
    }

    #[test]
    fn invalid_geometry_is_rejected() {
        let Err(Failure::Config(m)) = parse(r#"{"grid": {"nx": 30}}"#) else { panic!("accepted") };
        assert!(m.starts_with("grid"), "{m}");
        let Err(Failure::Config(m)) = parse(r#"{"partition": {"w1": [[2.5, 3.0]]}}"#) else { panic!("accepted") };
        assert!(m.starts_with("partition"), "{m}");
    }

    #[test]
    fn relative_paths_follow_the_config() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"output": "results"}"#).unwrap();
        assert_eq!(parse_config(&path).unwrap().output, Some(dir.path().join("results")));
    }
}
