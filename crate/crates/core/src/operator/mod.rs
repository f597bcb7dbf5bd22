pub mod calculus;
pub mod kernel;
pub mod laplace;
pub mod quadrature;
pub mod sobolev;

pub use calculus::{
    apply_frac_power, apply_heat_semigroup, apply_integer_power, apply_multiplier, apply_poly,
    apply_power, power_symbol, FracExponent,
};
pub use kernel::frac_power_kernel_quadrature;
pub use laplace::{assemble_laplace_beltrami, LaplaceScheme, SpectralDecomposition};
pub use quadrature::{frac_power_balakrishnan_symbol, QuadratureParams, QuadratureRule};
pub use sobolev::{sobolev_norm, SobolevForm};
