//! Periodic space-time grids: a spatial torus `[0, L)^n` times the padded
//! time window `[-P T, P T)`.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::ops::Range;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimeGrid {
    pub spatial_dim: usize,
    #[serde(rename = "L")]
    pub extent: f64,
    #[serde(rename = "N_x")]
    pub nx: usize,
    #[serde(rename = "T")]
    pub half_window: f64,
    #[serde(rename = "P")]
    pub padding: usize,
    #[serde(rename = "N_t")]
    pub nt: usize,
}

impl SpaceTimeGrid {
    pub fn new(
        spatial_dim: usize,
        extent: f64,
        nx: usize,
        half_window: f64,
        padding: usize,
        nt: usize,
    ) -> Result<Self> {
        let g = SpaceTimeGrid { spatial_dim, extent, nx, half_window, padding, nt };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.spatial_dim) {
            return Err(Error::InvalidArgument(format!(
                "spatial_dim must be 1 or 2, got {}",
                self.spatial_dim
            )));
        }
        if !(self.extent.is_finite() && self.extent > 0.0) {
            return Err(Error::InvalidArgument("spatial extent must be positive".into()));
        }
        if !(self.half_window.is_finite() && self.half_window > 0.0) {
            return Err(Error::InvalidArgument("half window T must be positive".into()));
        }
        if !self.nx.is_power_of_two() {
            return Err(Error::NonPowerOfTwo { what: "N_x", value: self.nx });
        }
        if !self.nt.is_power_of_two() {
            return Err(Error::NonPowerOfTwo { what: "N_t", value: self.nt });
        }
        if self.padding < 2 {
            return Err(Error::InvalidArgument(format!(
                "padding factor P = {} < 2 invites time wrap-around",
                self.padding
            )));
        }
        if !self.nt.is_multiple_of(2 * self.padding) || self.nt / (2 * self.padding) < 2 {
            return Err(Error::InvalidArgument(format!(
                "physical window [-T, T] does not align with N_t = {} nodes at P = {}",
                self.nt, self.padding
            )));
        }
        Ok(())
    }

    pub fn h(&self) -> f64 {
        self.extent / self.nx as f64
    }

    pub fn dt(&self) -> f64 {
        2.0 * self.padding as f64 * self.half_window / self.nt as f64
    }

    /// Volume of one space-time cell, `dt * h^n`.
    pub fn cell(&self) -> f64 {
        self.dt() * self.h().powi(self.spatial_dim as i32)
    }

    pub fn n_space(&self) -> usize {
        self.nx.pow(self.spatial_dim as u32)
    }

    pub fn len(&self) -> usize {
        self.nt * self.n_space()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, j: usize, i: usize) -> usize {
        j * self.n_space() + i
    }

    pub fn time(&self, j: usize) -> f64 {
        -(self.padding as f64) * self.half_window + j as f64 * self.dt()
    }

    /// Time nodes per physical half window.
    pub fn steps_per_half_window(&self) -> usize {
        self.nt / (2 * self.padding)
    }

    /// Node index of `t = -T`.
    pub fn start_index(&self) -> usize {
        (self.padding - 1) * self.steps_per_half_window()
    }

    /// Node index of `t = T`.
    pub fn end_index(&self) -> usize {
        (self.padding + 1) * self.steps_per_half_window()
    }

    /// Time indices with `-T < t_j < T`.
    pub fn window(&self) -> Range<usize> {
        self.start_index() + 1..self.end_index()
    }

    /// Index of `-t_j` on the periodic time axis.
    pub fn reflect_time(&self, j: usize) -> usize {
        (self.nt - j) % self.nt
    }

    /// Per-axis integer coordinates of spatial node `i` (first axis slowest).
    pub fn axes(&self, i: usize) -> [usize; 2] {
        if self.spatial_dim == 1 {
            [i, 0]
        } else {
            [i / self.nx, i % self.nx]
        }
    }

    pub fn from_axes(&self, a: [usize; 2]) -> usize {
        if self.spatial_dim == 1 {
            a[0]
        } else {
            a[0] * self.nx + a[1]
        }
    }

    /// Physical coordinates of spatial node `i`; unused axes are zero.
    pub fn position(&self, i: usize) -> [f64; 2] {
        let a = self.axes(i);
        let h = self.h();
        if self.spatial_dim == 1 {
            [a[0] as f64 * h, 0.0]
        } else {
            [a[0] as f64 * h, a[1] as f64 * h]
        }
    }

    /// Periodic distance in node units between two spatial nodes along each axis.
    pub fn node_offset(&self, a: usize, b: usize) -> [usize; 2] {
        let (pa, pb) = (self.axes(a), self.axes(b));
        let mut out = [0; 2];
        for k in 0..self.spatial_dim {
            let d = pa[k].abs_diff(pb[k]);
            out[k] = d.min(self.nx - d);
        }
        out
    }

    /// Signed temporal frequency of DFT bin `k`, in radians per unit time.
    pub fn sigma(&self, k: usize) -> f64 {
        let n = self.nt as i64;
        let ks = if (k as i64) < (n + 1) / 2 { k as i64 } else { k as i64 - n };
        2.0 * std::f64::consts::PI * ks as f64 / (self.nt as f64 * self.dt())
    }

    pub fn is_time_nyquist(&self, k: usize) -> bool {
        2 * k == self.nt
    }
}
