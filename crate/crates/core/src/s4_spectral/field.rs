use std::sync::Arc;

use super::basis::{coeff_count, degree_offset};
use super::quadrature::QuadratureGrid;

/// Coefficients of a function on S⁴ in the orthonormal hyperspherical basis,
/// stored in canonical order up to degree `band_limit`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    band_limit: usize,
    coeffs: Vec<f64>,
}

impl SpectralField {
    pub fn zeros(band_limit: usize) -> Self {
        SpectralField {
            band_limit,
            coeffs: vec![0.0; coeff_count(band_limit)],
        }
    }

    pub fn from_coeffs(band_limit: usize, coeffs: Vec<f64>) -> Self {
        assert_eq!(coeffs.len(), coeff_count(band_limit), "coefficient count for band limit {band_limit}");
        SpectralField { band_limit, coeffs }
    }

    /// The constant function `c` (`Y_0 ≡ 1`).
    pub fn constant(band_limit: usize, c: f64) -> Self {
        let mut f = Self::zeros(band_limit);
        f.coeffs[0] = c;
        f
    }

    /// The coordinate function `x_{axis+1}` (`axis` in `0..5`).
    pub fn coordinate(band_limit: usize, axis: usize) -> Self {
        // degree-1 block order: [x5, x4, x2, x3, x1], each scaled by √5
        let slot = match axis {
            4 => 0,
            3 => 1,
            1 => 2,
            2 => 3,
            0 => 4,
            _ => panic!("axis {axis} out of range"),
        };
        let mut f = Self::zeros(band_limit.max(1));
        f.coeffs[1 + slot] = 1.0 / 5f64.sqrt();
        f
    }

    /// `Σ a_i x_i` as a degree-one field.
    pub fn linear(band_limit: usize, a: [f64; 5]) -> Self {
        let mut f = Self::zeros(band_limit.max(1));
        for (axis, &ai) in a.iter().enumerate() {
            f.axpy(ai, &Self::coordinate(band_limit, axis));
        }
        f
    }

    pub fn band_limit(&self) -> usize {
        self.band_limit
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    /// Coefficients of degree `k`.
    pub fn degree_block(&self, k: usize) -> &[f64] {
        &self.coeffs[degree_offset(k)..degree_offset(k + 1)]
    }

    /// Mean value `∫ u dc`.
    pub fn mean(&self) -> f64 {
        self.coeffs[0]
    }

    /// Highest degree with a nonzero coefficient (0 for constants and zero).
    pub fn effective_degree(&self) -> usize {
        (0..=self.band_limit)
            .rev()
            .find(|&k| self.degree_block(k).iter().any(|&c| c != 0.0))
            .unwrap_or(0)
    }

    /// Same function at another band limit (zero-padded or truncated).
    pub fn with_band_limit(&self, band_limit: usize) -> Self {
        let mut out = Self::zeros(band_limit);
        let n = out.coeffs.len().min(self.coeffs.len());
        out.coeffs[..n].copy_from_slice(&self.coeffs[..n]);
        out
    }

    /// `self += a · other`; `other` may have a lower band limit.
    pub fn axpy(&mut self, a: f64, other: &SpectralField) {
        assert!(other.band_limit <= self.band_limit);
        for (x, y) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *x += a * y;
        }
    }

    pub fn scaled(&self, a: f64) -> Self {
        SpectralField {
            band_limit: self.band_limit,
            coeffs: self.coeffs.iter().map(|c| a * c).collect(),
        }
    }

    /// `∫ u v dc` (Parseval).
    pub fn dot(&self, other: &SpectralField) -> f64 {
        self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a * b).sum()
    }

    /// Maximum absolute coefficient difference.
    pub fn max_abs_diff(&self, other: &SpectralField) -> f64 {
        let n = self.coeffs.len().max(other.coeffs.len());
        (0..n)
            .map(|i| {
                let a = self.coeffs.get(i).copied().unwrap_or(0.0);
                let b = other.coeffs.get(i).copied().unwrap_or(0.0);
                (a - b).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Applies `g(k)` to every degree-`k` block.
    pub fn map_degrees(&self, g: impl Fn(usize) -> f64) -> Self {
        let mut out = self.clone();
        for k in 0..=self.band_limit {
            let gk = g(k);
            for c in &mut out.coeffs[degree_offset(k)..degree_offset(k + 1)] {
                *c *= gk;
            }
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }
}

/// Nodal values on a quadrature grid.
#[derive(Debug, Clone)]
pub struct GridField {
    values: Vec<f64>,
    grid: Arc<QuadratureGrid>,
}

impl GridField {
    pub fn new(grid: Arc<QuadratureGrid>, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), grid.len(), "value count must equal node count");
        GridField { values, grid }
    }

    pub fn from_fn(grid: Arc<QuadratureGrid>, f: impl Fn(&[f64; 5]) -> f64) -> Self {
        let values = grid.nodes().iter().map(f).collect();
        GridField { values, grid }
    }

    pub fn grid(&self) -> &Arc<QuadratureGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        GridField {
            values: self.values.iter().map(|&v| f(v)).collect(),
            grid: self.grid.clone(),
        }
    }

    pub fn zip_map(&self, other: &GridField, f: impl Fn(f64, f64) -> f64) -> Self {
        assert!(Arc::ptr_eq(&self.grid, &other.grid) || self.values.len() == other.values.len());
        GridField {
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
            grid: self.grid.clone(),
        }
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}
