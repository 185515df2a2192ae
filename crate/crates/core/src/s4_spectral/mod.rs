//! Grids, quadrature and hyperspherical-harmonic transforms on the unit S⁴.

pub mod basis;
pub mod chart;
pub mod field;
pub mod ops;
pub mod quadrature;
pub mod transform;
pub mod zonal;

pub use basis::{coeff_count, degree_dim, degree_of, degree_offset, HarmonicLabel, VOLUME_S4};
pub use chart::{geodesic_distance, newton_critical, CriticalSearch, NewtonOptions, TangentChart};
pub use field::{GridField, SpectralField};
pub use ops::{
    apply_laplacian, apply_laplacian_with, apply_paneitz, integrate, integrate_dc, paneitz_eigenvalue,
    pointwise_exp_product, LaplacianSign,
};
pub use quadrature::{build_grid, GridSpec, QuadratureGrid};
pub use transform::{evaluate_at, evaluate_many, Evaluator, SphereTransform};
pub use zonal::{cap_fraction, cap_integrals, zonal_profile};

/// Resolution warning threshold on the spectral tail fraction.
pub const DEFAULT_TAIL_TOL: f64 = 1e-6;
/// Spectral tail fraction above which computations abort.
pub const TAIL_ABORT: f64 = 1e-2;

#[cfg(test)]
mod tests;
