//! Product Gauss quadrature on S⁴.

use std::f64::consts::PI;
use std::sync::OnceLock;

use nalgebra::DMatrix;

use super::basis::{orthonormal_with_derivative, point_from_angles, recurrence_b, AXIS_EXPONENTS, VOLUME_S4};
use crate::error::{QflowError, Result};

/// Discretization resolution: harmonic band limit and the oversampling factor
/// of the grid used for nonlinear terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridSpec {
    pub band_limit: usize,
    pub oversample: usize,
}

impl GridSpec {
    pub fn new(band_limit: usize, oversample: usize) -> Result<Self> {
        let spec = GridSpec { band_limit, oversample };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.band_limit < 4 {
            return Err(QflowError::Config(format!(
                "band limit {} is below the minimum of 4",
                self.band_limit
            )));
        }
        if self.oversample < 1 {
            return Err(QflowError::Config("oversample factor must be at least 1".into()));
        }
        Ok(())
    }

    /// Highest degree the grid resolves (`band_limit · oversample`).
    pub fn resolved_degree(&self) -> usize {
        self.band_limit * self.oversample
    }
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { band_limit: 16, oversample: 2 }
    }
}

/// Gauss rule in `s = cos θ` for the normalized weight `(1 - s²)^a`.
#[derive(Debug, Clone)]
pub struct AxisRule {
    pub exponent: f64,
    pub nodes: Vec<f64>,
    /// `sqrt(1 - s²)` at each node.
    pub sines: Vec<f64>,
    /// Weights summing to one.
    pub weights: Vec<f64>,
}

impl AxisRule {
    pub fn gauss(exponent: f64, n: usize) -> Self {
        assert!(n >= 1);
        let mut jacobi = DMatrix::<f64>::zeros(n, n);
        for i in 1..n {
            let b = recurrence_b(i, exponent);
            jacobi[(i, i - 1)] = b;
            jacobi[(i - 1, i)] = b;
        }
        let mut nodes: Vec<f64> = jacobi.symmetric_eigenvalues().iter().copied().collect();
        nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());

        // Newton polish on p_n, then Christoffel weights 1 / Σ_{j<n} p_j².
        let mut weights = vec![0.0; n];
        for (x, w) in nodes.iter_mut().zip(weights.iter_mut()) {
            for _ in 0..8 {
                let (p, dp, _) = orthonormal_with_derivative(exponent, n, *x);
                let dx = p / dp;
                *x -= dx;
                if dx.abs() < 1e-17 {
                    break;
                }
            }
            let (_, _, sum_sq) = orthonormal_with_derivative(exponent, n, *x);
            *w = 1.0 / sum_sq;
        }

        // exact reflection symmetry about s = 0
        for i in 0..n / 2 {
            let j = n - 1 - i;
            let x = 0.5 * (nodes[j] - nodes[i]);
            let w = 0.5 * (weights[i] + weights[j]);
            nodes[i] = -x;
            nodes[j] = x;
            weights[i] = w;
            weights[j] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        let total: f64 = weights.iter().sum();
        for w in weights.iter_mut() {
            *w /= total;
        }
        let sines = nodes.iter().map(|&s| ((1.0 - s) * (1.0 + s)).sqrt()).collect();
        AxisRule { exponent, nodes, sines, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Tensor-product quadrature on S⁴: Gauss rules in `cos θ1`, `cos θ2`,
/// `cos θ3` and a uniform rule in `φ`.
///
/// Node `i` is laid out as `((i1·n2 + i2)·n3 + i3)·nφ + iφ`.
#[derive(Debug)]
pub struct QuadratureGrid {
    resolved_degree: usize,
    axes: [AxisRule; 3],
    phi: Vec<f64>,
    nodes: OnceLock<Vec<[f64; 5]>>,
}

/// Builds the quadrature grid for `spec`, resolving degree `L · oversample`.
pub fn build_grid(spec: &GridSpec) -> Result<QuadratureGrid> {
    spec.validate()?;
    Ok(QuadratureGrid::with_resolution(spec.resolved_degree()))
}

impl QuadratureGrid {
    /// Grid integrating every product of two harmonics of degree ≤ `degree`
    /// exactly (per-axis polynomial degree `2·degree + 1`).
    pub fn with_resolution(degree: usize) -> Self {
        let degree = degree.max(1);
        let n_theta = degree + 1;
        let n_phi = 2 * degree + 2;
        let axes = AXIS_EXPONENTS.map(|a| AxisRule::gauss(a, n_theta));
        let phi = (0..n_phi).map(|j| 2.0 * PI * j as f64 / n_phi as f64).collect();
        QuadratureGrid {
            resolved_degree: degree,
            axes,
            phi,
            nodes: OnceLock::new(),
        }
    }

    pub fn resolved_degree(&self) -> usize {
        self.resolved_degree
    }

    pub fn axis(&self, i: usize) -> &AxisRule {
        &self.axes[i]
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    pub fn n_phi(&self) -> usize {
        self.phi.len()
    }

    /// `[n1, n2, n3, nφ]`.
    pub fn shape(&self) -> [usize; 4] {
        [self.axes[0].len(), self.axes[1].len(), self.axes[2].len(), self.phi.len()]
    }

    pub fn len(&self) -> usize {
        self.shape().iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn split_index(&self, i: usize) -> [usize; 4] {
        let [_, n2, n3, np] = self.shape();
        let ip = i % np;
        let r = i / np;
        let i3 = r % n3;
        let r = r / n3;
        [r / n2, r % n2, i3, ip]
    }

    /// Node `i` as a unit vector `(x1, .., x5)`.
    pub fn node(&self, i: usize) -> [f64; 5] {
        let [i1, i2, i3, ip] = self.split_index(i);
        let s = [self.axes[0].nodes[i1], self.axes[1].nodes[i2], self.axes[2].nodes[i3]];
        let sin = [self.axes[0].sines[i1], self.axes[1].sines[i2], self.axes[2].sines[i3]];
        point_from_angles(s, sin, self.phi[ip])
    }

    /// Weight of node `i` for `dc` (weights sum to one).
    #[inline]
    pub fn weight_dc(&self, i: usize) -> f64 {
        let [i1, i2, i3, _] = self.split_index(i);
        self.axes[0].weights[i1] * self.axes[1].weights[i2] * self.axes[2].weights[i3]
            / self.phi.len() as f64
    }

    /// Weight of node `i` for `dv_c` (weights sum to 8π²/3).
    pub fn weight(&self, i: usize) -> f64 {
        VOLUME_S4 * self.weight_dc(i)
    }

    /// All nodes, materialized on first use.
    pub fn nodes(&self) -> &[[f64; 5]] {
        self.nodes.get_or_init(|| (0..self.len()).map(|i| self.node(i)).collect())
    }

    /// All `dv_c` weights.
    pub fn weights(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.weight(i)).collect()
    }

    /// Quadrature of nodal values against `dc`, summed in a fixed nested
    /// order with pairwise reduction at every level.
    pub fn integrate_dc(&self, values: &[f64]) -> f64 {
        assert_eq!(values.len(), self.len());
        self.integrate_dc_by(|i| values[i])
    }

    /// `∫ g dc` where `g(i)` is the integrand at node `i`.
    pub fn integrate_dc_by(&self, g: impl Fn(usize) -> f64) -> f64 {
        let [n1, n2, n3, np] = self.shape();
        let wp = 1.0 / np as f64;
        let mut l1 = Vec::with_capacity(n1);
        let mut l2 = Vec::with_capacity(n2);
        let mut l3 = Vec::with_capacity(n3);
        let mut row = vec![0.0; np];
        for i1 in 0..n1 {
            l2.clear();
            for i2 in 0..n2 {
                l3.clear();
                for i3 in 0..n3 {
                    let base = ((i1 * n2 + i2) * n3 + i3) * np;
                    for (j, r) in row.iter_mut().enumerate() {
                        *r = g(base + j);
                    }
                    l3.push(self.axes[2].weights[i3] * wp * pairwise_sum(&row));
                }
                l2.push(self.axes[1].weights[i2] * pairwise_sum(&l3));
            }
            l1.push(self.axes[0].weights[i1] * pairwise_sum(&l2));
        }
        pairwise_sum(&l1)
    }

    /// Quadrature against `dv_c`.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        VOLUME_S4 * self.integrate_dc(values)
    }
}

/// Pairwise (cascade) summation in a fixed order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const BLOCK: usize = 16;
    if xs.len() <= BLOCK {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_rules_integrate_moments() {
        // ∫ s^{2j} (1-s²)^a ds / ∫ (1-s²)^a ds for a = 1: moments 1, 1/5, 3/35
        let rule = AxisRule::gauss(1.0, 6);
        let m2: f64 = rule.nodes.iter().zip(&rule.weights).map(|(s, w)| w * s * s).sum();
        let m4: f64 = rule.nodes.iter().zip(&rule.weights).map(|(s, w)| w * s.powi(4)).sum();
        assert!((m2 - 0.2).abs() < 1e-15);
        assert!((m4 - 3.0 / 35.0).abs() < 1e-15);
        // a = 1/2: semicircle moments 1/4, 1/8
        let rule = AxisRule::gauss(0.5, 5);
        let m2: f64 = rule.nodes.iter().zip(&rule.weights).map(|(s, w)| w * s * s).sum();
        let m4: f64 = rule.nodes.iter().zip(&rule.weights).map(|(s, w)| w * s.powi(4)).sum();
        assert!((m2 - 0.25).abs() < 1e-15);
        assert!((m4 - 0.125).abs() < 1e-15);
    }

    #[test]
    fn odd_rules_contain_the_equator() {
        let rule = AxisRule::gauss(0.5, 7);
        assert_eq!(rule.nodes[3], 0.0);
        assert_eq!(rule.nodes[0], -rule.nodes[6]);
    }

    #[test]
    fn total_measure() {
        let grid = build_grid(&GridSpec::new(4, 1).unwrap()).unwrap();
        let total: f64 = grid.weights().iter().sum();
        assert!((total / VOLUME_S4 - 1.0).abs() < 1e-12);
        assert!((grid.integrate(&vec![1.0; grid.len()]) / VOLUME_S4 - 1.0).abs() < 1e-13);
    }

    #[test]
    fn nodes_are_unit_vectors() {
        let grid = QuadratureGrid::with_resolution(9);
        for x in grid.nodes() {
            let r2: f64 = x.iter().map(|v| v * v).sum();
            assert!((r2 - 1.0).abs() <= 1e-14);
        }
    }

    #[test]
    fn coordinate_moments() {
        let grid = build_grid(&GridSpec::new(16, 1).unwrap()).unwrap();
        for axis in 0..5 {
            let vals: Vec<f64> = grid.nodes().iter().map(|x| x[axis] * x[axis]).collect();
            assert!((grid.integrate_dc(&vals) - 0.2).abs() < 1e-12, "axis {axis}");
            let odd: Vec<f64> = grid.nodes().iter().map(|x| x[axis]).collect();
            assert!(grid.integrate(&odd).abs() < 1e-12);
        }
        let vals: Vec<f64> = grid.nodes().iter().map(|x| x[4] * x[4]).collect();
        assert!((grid.integrate(&vals) - 8.0 * PI * PI / 15.0).abs() < 1e-11);
    }

    #[test]
    fn too_small_band_limit_is_rejected() {
        assert!(GridSpec::new(3, 1).is_err());
        assert!(GridSpec::new(8, 0).is_err());
    }
}
