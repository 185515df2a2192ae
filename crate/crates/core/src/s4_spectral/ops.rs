//! Diagonal operators and pointwise helpers.

use super::field::{GridField, SpectralField};
use crate::error::{QflowError, Result};

/// Sign convention for the Laplacian.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LaplacianSign {
    /// Laplace–Beltrami, eigenvalue `-k(k+3)` (maxima have `Δf < 0`).
    #[default]
    LaplaceBeltrami,
    /// Nonnegative operator `-Δ_LB`, eigenvalue `+k(k+3)`.
    Analyst,
}

impl LaplacianSign {
    pub fn eigenvalue(self, k: usize) -> f64 {
        let lb = -((k * (k + 3)) as f64);
        match self {
            LaplacianSign::LaplaceBeltrami => lb,
            LaplacianSign::Analyst => -lb,
        }
    }
}

/// Paneitz eigenvalue `k(k+1)(k+2)(k+3)` on the round S⁴.
pub fn paneitz_eigenvalue(k: usize) -> f64 {
    (k * (k + 1) * (k + 2) * (k + 3)) as f64
}

pub fn apply_laplacian(field: &SpectralField) -> SpectralField {
    apply_laplacian_with(field, LaplacianSign::LaplaceBeltrami)
}

pub fn apply_laplacian_with(field: &SpectralField, sign: LaplacianSign) -> SpectralField {
    field.map_degrees(|k| sign.eigenvalue(k))
}

/// `P_c = Δ² - 2Δ`.
pub fn apply_paneitz(field: &SpectralField) -> SpectralField {
    field.map_degrees(paneitz_eigenvalue)
}

/// `∫ F dv_c` by quadrature.
pub fn integrate(field: &GridField) -> f64 {
    field.grid().integrate(field.values())
}

/// `∫ F dc` by quadrature.
pub fn integrate_dc(field: &GridField) -> f64 {
    field.grid().integrate_dc(field.values())
}

/// Largest exponent accepted before reporting blow-up.
pub const EXP_LIMIT: f64 = 700.0;

/// Nodewise `e^{scale·u}`.
pub fn pointwise_exp_product(u: &GridField, scale: f64) -> Result<GridField> {
    let worst = u.values().iter().map(|&v| scale * v).fold(f64::NEG_INFINITY, f64::max);
    if !worst.is_finite() && !u.is_finite() {
        return Err(QflowError::Overflow(worst));
    }
    if worst > EXP_LIMIT {
        return Err(QflowError::Overflow(worst));
    }
    Ok(u.map(|v| (scale * v).exp()))
}
