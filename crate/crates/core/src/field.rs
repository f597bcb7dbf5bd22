//! Complex samples on a space-time grid, weighted inner products and the
//! `fracpara/field-v1` file format.

use crate::error::{Error, Result};
use crate::grid::SpaceTimeGrid;
use crate::metric::MetricField;
use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, BufReader, Write};
use std::ops::Range;
use std::path::Path;

pub const FIELD_SCHEMA: &str = "fracpara/field-v1";

#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    grid: SpaceTimeGrid,
    data: Vec<Complex64>,
}

impl Field {
    pub fn zeros(grid: &SpaceTimeGrid) -> Self {
        Field { grid: grid.clone(), data: vec![Complex64::new(0.0, 0.0); grid.len()] }
    }

    pub fn from_vec(grid: &SpaceTimeGrid, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::SizeMismatch { expected: grid.len(), found: data.len() });
        }
        if let Some(k) = data.iter().position(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::NonFinite(k));
        }
        Ok(Field { grid: grid.clone(), data })
    }

    /// Samples `f(t, x)` at every node; `x` holds the physical coordinates.
    pub fn from_fn(grid: &SpaceTimeGrid, f: impl Fn(f64, [f64; 2]) -> Complex64) -> Self {
        let ns = grid.n_space();
        let mut data = Vec::with_capacity(grid.len());
        for j in 0..grid.nt {
            let t = grid.time(j);
            for i in 0..ns {
                data.push(f(t, grid.position(i)));
            }
        }
        Field { grid: grid.clone(), data }
    }

    pub fn from_real_fn(grid: &SpaceTimeGrid, f: impl Fn(f64, [f64; 2]) -> f64) -> Self {
        Self::from_fn(grid, |t, x| Complex64::new(f(t, x), 0.0))
    }

    pub fn grid(&self) -> &SpaceTimeGrid {
        &self.grid
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<Complex64> {
        self.data
    }

    pub fn at(&self, j: usize, i: usize) -> Complex64 {
        self.data[self.grid.index(j, i)]
    }

    pub fn check_same_grid(&self, other: &Field) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    pub fn scale(&self, c: Complex64) -> Field {
        Field { grid: self.grid.clone(), data: self.data.iter().map(|z| z * c).collect() }
    }

    pub fn add(&self, other: &Field) -> Result<Field> {
        self.check_same_grid(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Ok(Field { grid: self.grid.clone(), data })
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.check_same_grid(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(Field { grid: self.grid.clone(), data })
    }

    /// Pointwise product.
    pub fn mul(&self, other: &Field) -> Result<Field> {
        self.check_same_grid(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a * b).collect();
        Ok(Field { grid: self.grid.clone(), data })
    }

    pub fn conj(&self) -> Field {
        Field { grid: self.grid.clone(), data: self.data.iter().map(|z| z.conj()).collect() }
    }

    /// `t -> -t` on the periodic time axis.
    pub fn reflect_time(&self) -> Field {
        let ns = self.grid.n_space();
        let mut out = Field::zeros(&self.grid);
        for j in 0..self.grid.nt {
            let r = self.grid.reflect_time(j);
            out.data[r * ns..(r + 1) * ns].copy_from_slice(&self.data[j * ns..(j + 1) * ns]);
        }
        out
    }

    /// Zero outside `region`.
    pub fn restrict(&self, region: &Region) -> Field {
        let ns = self.grid.n_space();
        let mut out = Field::zeros(&self.grid);
        for j in region.time.clone() {
            for i in 0..ns {
                if region.spatial[i] {
                    let k = j * ns + i;
                    out.data[k] = self.data[k];
                }
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    /// Plain `L^2` norm over the whole grid.
    pub fn norm(&self) -> f64 {
        l2_inner_product(self, self, None, None).expect("same grid").re.sqrt()
    }

    pub fn norm_on(&self, region: &Region) -> f64 {
        l2_inner_product(self, self, Some(region), None).expect("same grid").re.sqrt()
    }

    /// True when every sample outside `region` is exactly zero.
    pub fn supported_in(&self, region: &Region) -> bool {
        let ns = self.grid.n_space();
        self.data.iter().enumerate().all(|(k, z)| {
            let (j, i) = (k / ns, k % ns);
            *z == Complex64::new(0.0, 0.0) || (region.time.contains(&j) && region.spatial[i])
        })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = std::fs::File::create(path)?;
        out.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Field> {
        let file = std::fs::File::open(path)?;
        Self::from_reader(BufReader::new(file))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = FieldHeader { schema: FIELD_SCHEMA.to_string(), grid: self.grid.clone() };
        let mut raw = Vec::with_capacity(16 * self.data.len());
        for z in &self.data {
            raw.extend_from_slice(&z.re.to_le_bytes());
            raw.extend_from_slice(&z.im.to_le_bytes());
        }
        let mut out = serde_json::to_vec(&header).expect("header serializes");
        out.push(b'\n');
        out.extend_from_slice(STANDARD.encode(raw).as_bytes());
        out.push(b'\n');
        out
    }

    pub fn from_reader(mut r: impl BufRead) -> Result<Field> {
        let mut line = String::new();
        r.read_line(&mut line)?;
        let value: serde_json::Value = serde_json::from_str(line.trim())
            .map_err(|e| Error::Malformed(format!("field header: {e}")))?;
        let schema = value.get("schema").and_then(|s| s.as_str()).unwrap_or("");
        if schema != FIELD_SCHEMA {
            return Err(Error::UnsupportedSchema(schema.to_string()));
        }
        let header: FieldHeader = serde_json::from_value(value)
            .map_err(|e| Error::Malformed(format!("field header: {e}")))?;
        header.grid.validate()?;
        let mut payload = String::new();
        r.read_line(&mut payload)?;
        let raw = STANDARD
            .decode(payload.trim())
            .map_err(|e| Error::Malformed(format!("payload: {e}")))?;
        if raw.len() % 16 != 0 {
            return Err(Error::Malformed("payload is not a whole number of complex samples".into()));
        }
        let n = raw.len() / 16;
        if n != header.grid.len() {
            return Err(Error::SizeMismatch { expected: header.grid.len(), found: n });
        }
        let data = raw
            .chunks_exact(16)
            .map(|c| {
                let re = f64::from_le_bytes(c[..8].try_into().unwrap());
                let im = f64::from_le_bytes(c[8..].try_into().unwrap());
                Complex64::new(re, im)
            })
            .collect();
        Field::from_vec(&header.grid, data)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FieldHeader {
    schema: String,
    #[serde(flatten)]
    grid: SpaceTimeGrid,
}

/// A spatial node set times a range of time indices.
#[derive(Clone, Debug, PartialEq)]
pub struct Region {
    pub spatial: Vec<bool>,
    pub time: Range<usize>,
}

impl Region {
    pub fn full(grid: &SpaceTimeGrid) -> Self {
        Region { spatial: vec![true; grid.n_space()], time: 0..grid.nt }
    }

    /// `mask x (-T, T)`.
    pub fn windowed(grid: &SpaceTimeGrid, mask: &[bool]) -> Self {
        Region { spatial: mask.to_vec(), time: grid.window() }
    }

    /// Full-grid indices in storage order.
    pub fn indices(&self, grid: &SpaceTimeGrid) -> Vec<usize> {
        let ns = grid.n_space();
        let mut out = Vec::new();
        for j in self.time.clone() {
            for (i, &m) in self.spatial.iter().enumerate() {
                if m {
                    out.push(j * ns + i);
                }
            }
        }
        out
    }

    pub fn count(&self) -> usize {
        self.time.len() * self.spatial.iter().filter(|&&m| m).count()
    }
}

/// `dt h^n sum a conj(b)` over `region` (whole grid when `None`), optionally
/// weighted by the volume density of `metric`. Summation runs in ascending
/// storage order so the result is reproducible bit for bit.
pub fn l2_inner_product(
    a: &Field,
    b: &Field,
    region: Option<&Region>,
    metric: Option<&MetricField>,
) -> Result<Complex64> {
    a.check_same_grid(b)?;
    let grid = &a.grid;
    let ns = grid.n_space();
    if let Some(m) = metric {
        if m.n_nodes() != ns {
            return Err(Error::GridMismatch);
        }
    }
    if let Some(r) = region {
        if r.spatial.len() != ns || r.time.end > grid.nt {
            return Err(Error::GridMismatch);
        }
    }
    let weight = |i: usize| metric.map_or(1.0, |m| m.volume(i));
    let mut acc = Complex64::new(0.0, 0.0);
    let times = region.map_or(0..grid.nt, |r| r.time.clone());
    for j in times {
        for i in 0..ns {
            if region.is_none_or(|r| r.spatial[i]) {
                let k = j * ns + i;
                acc += a.data[k] * b.data[k].conj() * weight(i);
            }
        }
    }
    Ok(acc * grid.cell())
}
