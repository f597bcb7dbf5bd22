//! Node-wise Riemannian metrics on the spatial torus.

use crate::error::{Error, Result};
use crate::field::Field;
use crate::grid::SpaceTimeGrid;

/// Symmetric positive `g(x)` stored as `[g11, g12, g22]` per spatial node
/// (only `g11` is used in one dimension).
#[derive(Clone, Debug, PartialEq)]
pub struct MetricField {
    dim: usize,
    comps: Vec<[f64; 3]>,
    ellipticity: f64,
    identity: bool,
}

fn sym_eigs(dim: usize, c: [f64; 3]) -> (f64, f64) {
    if dim == 1 {
        return (c[0], c[0]);
    }
    let m = 0.5 * (c[0] + c[2]);
    let r = (0.25 * (c[0] - c[2]).powi(2) + c[1] * c[1]).sqrt();
    (m - r, m + r)
}

impl MetricField {
    pub fn identity(grid: &SpaceTimeGrid) -> Self {
        MetricField {
            dim: grid.spatial_dim,
            comps: vec![[1.0, 0.0, 1.0]; grid.n_space()],
            ellipticity: 1.0,
            identity: true,
        }
    }

    /// Builds a metric and verifies `lambda |xi|^2 <= xi^T g xi <= |xi|^2 / lambda`
    /// at every node. Passing `None` records the sharpest such constant.
    pub fn new(grid: &SpaceTimeGrid, comps: Vec<[f64; 3]>, lambda: Option<f64>) -> Result<Self> {
        if comps.len() != grid.n_space() {
            return Err(Error::SizeMismatch { expected: grid.n_space(), found: comps.len() });
        }
        let dim = grid.spatial_dim;
        let mut best = f64::INFINITY;
        for (i, c) in comps.iter().enumerate() {
            if c.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(i));
            }
            let (lo, hi) = sym_eigs(dim, *c);
            if lo <= 0.0 {
                return Err(Error::Ellipticity(format!("metric not positive at node {i}")));
            }
            best = best.min(lo).min(1.0 / hi);
        }
        let ellipticity = match lambda {
            Some(l) => {
                if !(l > 0.0 && l < 1.0) {
                    return Err(Error::Ellipticity(format!("constant {l} outside (0, 1)")));
                }
                if best < l * (1.0 - 1e-12) {
                    return Err(Error::Ellipticity(format!(
                        "scan gives {best:.6}, below the declared {l}"
                    )));
                }
                l
            }
            None => best,
        };
        let identity = comps.iter().all(|c| {
            c[0] == 1.0 && (dim == 1 || (c[1] == 0.0 && c[2] == 1.0))
        });
        Ok(MetricField { dim, comps, ellipticity, identity })
    }

    pub fn from_fn(
        grid: &SpaceTimeGrid,
        lambda: Option<f64>,
        f: impl Fn([f64; 2]) -> [f64; 3],
    ) -> Result<Self> {
        let comps = (0..grid.n_space()).map(|i| f(grid.position(i))).collect();
        Self::new(grid, comps, lambda)
    }

    /// `g = (1 + a sin x_1) I`.
    pub fn sinusoid(grid: &SpaceTimeGrid, amplitude: f64, lambda: Option<f64>) -> Result<Self> {
        Self::from_fn(grid, lambda, |x| {
            let s = 1.0 + amplitude * x[0].sin();
            [s, 0.0, s]
        })
    }

    /// Reads components from the first time slices of a field: slice 0 holds
    /// `g11`, slices 1 and 2 hold `g12` and `g22` in two dimensions.
    pub fn from_field(field: &Field, lambda: Option<f64>) -> Result<Self> {
        let grid = field.grid();
        let ns = grid.n_space();
        let need = if grid.spatial_dim == 1 { 1 } else { 3 };
        if grid.nt < need {
            return Err(Error::Malformed("metric field has too few slices".into()));
        }
        let comps = (0..ns)
            .map(|i| {
                if grid.spatial_dim == 1 {
                    [field.at(0, i).re, 0.0, 0.0]
                } else {
                    [field.at(0, i).re, field.at(1, i).re, field.at(2, i).re]
                }
            })
            .collect();
        Self::new(grid, comps, lambda)
    }

    pub fn is_identity(&self) -> bool {
        self.identity
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_nodes(&self) -> usize {
        self.comps.len()
    }

    pub fn ellipticity(&self) -> f64 {
        self.ellipticity
    }

    pub fn components(&self, i: usize) -> [f64; 3] {
        self.comps[i]
    }

    /// `sqrt(|g|)` at node `i`.
    pub fn volume(&self, i: usize) -> f64 {
        let c = self.comps[i];
        if self.dim == 1 {
            c[0].sqrt()
        } else {
            (c[0] * c[2] - c[1] * c[1]).sqrt()
        }
    }

    /// `sqrt(|g|) g^{-1}` at node `i`, the flux coefficient.
    pub fn flux(&self, i: usize) -> [f64; 3] {
        let c = self.comps[i];
        if self.dim == 1 {
            return [1.0 / c[0].sqrt(), 0.0, 0.0];
        }
        let det = c[0] * c[2] - c[1] * c[1];
        let s = det.sqrt() / det;
        [c[2] * s, -c[1] * s, c[0] * s]
    }

    /// Extreme eigenvalues over all nodes.
    pub fn spectrum_bounds(&self) -> (f64, f64) {
        self.comps.iter().fold((f64::INFINITY, 0.0), |(lo, hi), c| {
            let (a, b) = sym_eigs(self.dim, *c);
            (lo.min(a), f64::max(hi, b))
        })
    }

    pub fn to_le_bytes(&self) -> Vec<u8> {
        self.comps.iter().flat_map(|c| c.iter().flat_map(|v| v.to_le_bytes())).collect()
    }
}
