//! Node-set geometry: the interior set, two exterior measurement sets and
//! the physical time window.

use crate::error::{Error, Result};
use crate::field::Region;
use crate::grid::SpaceTimeGrid;
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const PARTITION_SCHEMA: &str = "fracpara/partition-v1";

/// Closed box in torus coordinates, one `[lo, hi]` interval per axis.
pub type BoxSpec = Vec<[f64; 2]>;

#[derive(Clone, Debug, PartialEq)]
pub struct GeometryPartition {
    pub omega: Vec<bool>,
    pub w1: Vec<bool>,
    pub w2: Vec<bool>,
    pub specs: [BoxSpec; 3],
    /// Smallest number of free nodes separating the interior set from
    /// `W1 u W2` along a straight periodic path (Euclidean, node units).
    pub margin_nodes: f64,
    grid: SpaceTimeGrid,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Which {
    Omega,
    W1,
    W2,
}

pub fn resolve_box(grid: &SpaceTimeGrid, spec: &[[f64; 2]]) -> Result<Vec<bool>> {
    if spec.len() != grid.spatial_dim {
        return Err(Error::InvalidArgument(format!(
            "box has {} intervals for a {}-dimensional torus",
            spec.len(),
            grid.spatial_dim
        )));
    }
    let tol = 1e-12 * grid.extent;
    Ok((0..grid.n_space())
        .map(|i| {
            let x = grid.position(i);
            spec.iter().enumerate().all(|(k, iv)| x[k] >= iv[0] - tol && x[k] <= iv[1] + tol)
        })
        .collect())
}

impl GeometryPartition {
    pub fn new(
        grid: &SpaceTimeGrid,
        omega: BoxSpec,
        w1: BoxSpec,
        w2: BoxSpec,
    ) -> Result<Self> {
        let names = ["omega", "w1", "w2"];
        let masks = [resolve_box(grid, &omega)?, resolve_box(grid, &w1)?, resolve_box(grid, &w2)?];
        for (m, name) in masks.iter().zip(names) {
            if !m.iter().any(|&b| b) {
                return Err(Error::EmptyMask(format!("{name} contains no grid nodes")));
            }
        }
        for (a, b) in [(0, 1), (0, 2), (1, 2)] {
            if masks[a].iter().zip(&masks[b]).any(|(&x, &y)| x && y) {
                return Err(Error::Overlap(format!("{} and {} share nodes", names[a], names[b])));
            }
        }
        let mut dist = f64::INFINITY;
        for p in (0..grid.n_space()).filter(|&p| masks[0][p]) {
            for q in (0..grid.n_space()).filter(|&q| masks[1][q] || masks[2][q]) {
                let o = grid.node_offset(p, q);
                dist = dist.min(((o[0] * o[0] + o[1] * o[1]) as f64).sqrt());
            }
        }
        let margin_nodes = dist - 1.0;
        if margin_nodes <= 0.0 {
            return Err(Error::Overlap("omega touches an exterior set; no separating margin".into()));
        }
        let [o, a, b] = masks;
        Ok(GeometryPartition {
            omega: o,
            w1: a,
            w2: b,
            specs: [omega, w1, w2],
            margin_nodes,
            grid: grid.clone(),
        })
    }

    pub fn grid(&self) -> &SpaceTimeGrid {
        &self.grid
    }

    pub fn mask(&self, which: Which) -> &[bool] {
        match which {
            Which::Omega => &self.omega,
            Which::W1 => &self.w1,
            Which::W2 => &self.w2,
        }
    }

    pub fn margin(&self) -> f64 {
        self.margin_nodes * self.grid.h()
    }

    /// `Omega x (-T, T)`, the unknowns of the forward problem.
    pub fn omega_t(&self) -> Region {
        Region::windowed(&self.grid, &self.omega)
    }

    pub fn region(&self, which: Which) -> Region {
        Region::windowed(&self.grid, self.mask(which))
    }

    /// Complement of the interior set times `(-T, T)`.
    pub fn exterior_t(&self) -> Region {
        Region::windowed(&self.grid, &self.omega.iter().map(|&b| !b).collect::<Vec<_>>())
    }

    pub fn omega_nodes(&self) -> Vec<usize> {
        (0..self.omega.len()).filter(|&i| self.omega[i]).collect()
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let list = |m: &[bool]| (0..m.len()).filter(|&i| m[i]).collect::<Vec<_>>();
        let file = PartitionFile {
            schema: PARTITION_SCHEMA.into(),
            omega: self.specs[0].clone(),
            w1: self.specs[1].clone(),
            w2: self.specs[2].clone(),
            resolved: Resolved {
                omega: list(&self.omega),
                w1: list(&self.w1),
                w2: list(&self.w2),
            },
            margin_nodes: self.margin_nodes,
        };
        std::fs::write(path, serde_json::to_string_pretty(&file)?)?;
        Ok(())
    }

    /// Rebuilds the partition on `grid` and checks it against the stored
    /// index lists.
    pub fn read(path: impl AsRef<Path>, grid: &SpaceTimeGrid) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let value: serde_json::Value = serde_json::from_str(&text)?;
        let schema = value.get("schema").and_then(|s| s.as_str()).unwrap_or("");
        if schema != PARTITION_SCHEMA {
            return Err(Error::UnsupportedSchema(schema.into()));
        }
        let file: PartitionFile = serde_json::from_value(value)?;
        let p = Self::new(grid, file.omega, file.w1, file.w2)?;
        let list = |m: &[bool]| (0..m.len()).filter(|&i| m[i]).collect::<Vec<_>>();
        if list(&p.omega) != file.resolved.omega
            || list(&p.w1) != file.resolved.w1
            || list(&p.w2) != file.resolved.w2
        {
            return Err(Error::Malformed("resolved masks disagree with the grid".into()));
        }
        Ok(p)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PartitionFile {
    schema: String,
    omega: BoxSpec,
    w1: BoxSpec,
    w2: BoxSpec,
    resolved: Resolved,
    margin_nodes: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Resolved {
    omega: Vec<usize>,
    w1: Vec<usize>,
    w2: Vec<usize>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid() -> SpaceTimeGrid {
        SpaceTimeGrid::new(1, 2.0 * PI, 64, 1.0, 4, 256).unwrap()
    }

    #[test]
    fn desk_partition() {
        let p = GeometryPartition::new(&grid(), vec![[2.0, 4.0]], vec![[0.2, 1.0]], vec![[5.0, 5.8]])
            .unwrap();
        assert_eq!(p.omega.iter().filter(|&&b| b).count(), 20);
        assert!(p.margin_nodes >= 1.0);
        assert!(p.margin() > 0.9);
        assert_eq!(p.omega_t().count(), 20 * 63);
    }

    #[test]
    fn overlap_and_empty() {
        let e = GeometryPartition::new(&grid(), vec![[2.0, 4.0]], vec![[3.0, 5.0]], vec![[5.0, 5.8]])
            .unwrap_err();
        assert!(e.to_string().contains("overlap"));
        let e = GeometryPartition::new(&grid(), vec![[2.0, 4.0]], vec![[1.0, 0.5]], vec![[5.0, 5.8]])
            .unwrap_err();
        assert!(e.to_string().contains("empty mask"));
    }

    #[test]
    fn touching_sets_have_no_margin() {
        let h = grid().h();
        let e = GeometryPartition::new(
            &grid(),
            vec![[2.0, 4.0]],
            vec![[4.0 + 0.1 * h, 4.5]],
            vec![[5.0, 5.8]],
        )
        .unwrap_err();
        assert!(e.to_string().contains("margin"));
    }

    #[test]
    fn file_round_trip() {
        let g = grid();
        let p = GeometryPartition::new(&g, vec![[2.0, 4.0]], vec![[0.2, 1.0]], vec![[5.0, 5.8]]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.json");
        p.write(&path).unwrap();
        assert_eq!(GeometryPartition::read(&path, &g).unwrap(), p);
    }

    #[test]
    fn periodic_distance_wraps() {
        let g = grid();
        let p = GeometryPartition::new(&g, vec![[2.0, 4.0]], vec![[0.0, 0.3]], vec![[6.0, 6.2]]).unwrap();
        // W2 near 2*pi is closer to W1 than to omega, but the margin only involves omega.
        assert!(p.margin() > 1.5);
    }
}
