//! Fractional powers of the space-time heat operator `d/dt - Delta_g` on a
//! periodic grid, exterior value problems for sums of such powers, their
//! Dirichlet-to-Neumann maps, and reconstruction of potentials from them.

pub mod dnmap;
pub mod error;
pub mod field;
pub mod forward;
pub mod grid;
pub mod inverse;
pub mod metric;
pub mod operator;
pub mod partition;

pub use dnmap::{assemble_dn_map, dn_pairing, integral_identity_residual, BasisKind, BasisSpec, DNMatrix, ExteriorBasis};
pub use error::{Error, Result};
pub use field::{l2_inner_product, Field, Region};
pub use forward::{
    coercivity_margin, eigenvalue_condition_check, solve_adjoint, solve_forward, ForwardSolver, PolyParabolicProblem,
    Solution,
};
pub use grid::SpaceTimeGrid;
pub use metric::MetricField;
pub use partition::{GeometryPartition, Which};
