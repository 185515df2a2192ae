//! Separable analysis/synthesis between nodal values and harmonic coefficients.
//!
//! Both directions run as four 1-D passes (θ1, θ2, θ3, φ); only per-axis
//! tables of size O(L²·n) are stored. Work is split over the θ1 index and
//! reduced in a fixed order, so results do not depend on thread count.

use std::sync::Arc;

use rayon::prelude::*;

use super::basis::{chain_factors, coeff_count, degree_offset, pair_index, triple_count, triple_index, Angles, AXIS_EXPONENTS};
use super::field::{GridField, SpectralField};
use super::quadrature::{build_grid, GridSpec, QuadratureGrid};
use crate::error::{QflowError, Result};

/// Transform plan for band limit `L` on a fixed grid.
#[derive(Debug)]
pub struct SphereTransform {
    band_limit: usize,
    grid: Arc<QuadratureGrid>,
    /// `tables[axis][l][n * n_axis + i]` = chain factor `n` with lower index `l` at node `i`.
    tables: [Vec<Vec<f64>>; 3],
    /// `phi_table[(m + L) * nφ + j]`.
    phi_table: Vec<f64>,
}

impl SphereTransform {
    /// Plan for `spec.band_limit` on the oversampled grid of `spec`.
    pub fn new(spec: &GridSpec) -> Result<Self> {
        let grid = Arc::new(build_grid(spec)?);
        Self::on_grid(spec.band_limit, grid)
    }

    /// Plan for band limit `band_limit` on an existing grid.
    pub fn on_grid(band_limit: usize, grid: Arc<QuadratureGrid>) -> Result<Self> {
        if grid.resolved_degree() < band_limit {
            return Err(QflowError::Mismatch {
                needed: band_limit,
                available: grid.resolved_degree(),
            });
        }
        let tables = [0, 1, 2].map(|axis| {
            let rule = grid.axis(axis);
            let a = AXIS_EXPONENTS[axis];
            let n = rule.len();
            (0..=band_limit)
                .map(|l| {
                    let count = band_limit - l + 1;
                    let mut t = vec![0.0; count * n];
                    let mut buf = vec![0.0; count];
                    for i in 0..n {
                        chain_factors(a, l, rule.nodes[i], rule.sines[i], &mut buf);
                        for (j, &v) in buf.iter().enumerate() {
                            t[j * n + i] = v;
                        }
                    }
                    t
                })
                .collect()
        });
        let np = grid.n_phi();
        let mut phi_table = vec![0.0; (2 * band_limit + 1) * np];
        let root2 = 2f64.sqrt();
        for m in -(band_limit as i64)..=(band_limit as i64) {
            let row = (m + band_limit as i64) as usize * np;
            for (j, &phi) in grid.phi().iter().enumerate() {
                phi_table[row + j] = match m.signum() {
                    0 => 1.0,
                    1 => root2 * (m as f64 * phi).cos(),
                    _ => root2 * ((-m) as f64 * phi).sin(),
                };
            }
        }
        Ok(SphereTransform {
            band_limit,
            grid,
            tables,
            phi_table,
        })
    }

    pub fn band_limit(&self) -> usize {
        self.band_limit
    }

    pub fn grid(&self) -> &Arc<QuadratureGrid> {
        &self.grid
    }

    pub fn grid_field(&self, values: Vec<f64>) -> GridField {
        GridField::new(self.grid.clone(), values)
    }

    /// Nodal values of `field` on the plan grid.
    pub fn synthesize(&self, field: &SpectralField) -> Result<GridField> {
        Ok(self.grid_field(self.synthesize_values(field)?))
    }

    pub fn synthesize_values(&self, field: &SpectralField) -> Result<Vec<f64>> {
        if field.band_limit() > self.band_limit {
            return Err(QflowError::Mismatch {
                needed: field.band_limit(),
                available: self.band_limit,
            });
        }
        let lf = field.effective_degree();
        let [_, n2, n3, np] = self.grid.shape();
        let mut out = vec![0.0; self.grid.len()];
        out.par_chunks_mut(n2 * n3 * np)
            .enumerate()
            .for_each(|(i1, slab)| self.synth_slab(field.coeffs(), lf, i1, slab));
        Ok(out)
    }

    fn synth_slab(&self, c: &[f64], lf: usize, i1: usize, slab: &mut [f64]) {
        let [n1, n2, n3, np] = self.grid.shape();
        let lp = self.band_limit as i64;
        let npair = (lf + 1) * (lf + 1);
        let nm = 2 * lf + 1;

        // θ1: t1[(l2, l3, m)] = Σ_k c[k, l2, l3, m] A1[l2][k - l2](i1)
        let mut t1 = vec![0.0; triple_count(lf)];
        for l2 in 0..=lf {
            let tab = &self.tables[0][l2];
            for k in l2..=lf {
                let a = tab[(k - l2) * n1 + i1];
                let off = degree_offset(k);
                let lo = triple_index(l2, 0, 0);
                let hi = lo + (l2 + 1) * (l2 + 1);
                for t in lo..hi {
                    t1[t] += c[off + t] * a;
                }
            }
        }

        // θ2: t2[i2][(l3, m)] = Σ_{l2 ≥ l3} t1[(l2, l3, m)] A2[l3][l2 - l3](i2)
        let mut t2 = vec![0.0; n2 * npair];
        for l3 in 0..=lf {
            let tab = &self.tables[1][l3];
            for l2 in l3..=lf {
                let src = triple_index(l2, l3, -(l3 as i64));
                let dst = pair_index(l3, -(l3 as i64));
                let width = 2 * l3 + 1;
                let row = &t1[src..src + width];
                for i2 in 0..n2 {
                    let a = tab[(l2 - l3) * n2 + i2];
                    let out = &mut t2[i2 * npair + dst..i2 * npair + dst + width];
                    for (o, &v) in out.iter_mut().zip(row) {
                        *o += a * v;
                    }
                }
            }
        }

        // θ3: t3[i2, i3][m] = Σ_{l3 ≥ |m|} t2[i2][(l3, m)] A3[|m|][l3 - |m|](i3)
        let mut t3 = vec![0.0; n2 * n3 * nm];
        for i2 in 0..n2 {
            let row2 = &t2[i2 * npair..(i2 + 1) * npair];
            for m in -(lf as i64)..=(lf as i64) {
                let am = m.unsigned_abs() as usize;
                let tab = &self.tables[2][am];
                let mi = (m + lf as i64) as usize;
                for l3 in am..=lf {
                    let v = row2[pair_index(l3, m)];
                    if v == 0.0 {
                        continue;
                    }
                    let base = (l3 - am) * n3;
                    for i3 in 0..n3 {
                        t3[(i2 * n3 + i3) * nm + mi] += v * tab[base + i3];
                    }
                }
            }
        }

        // φ
        for (cell, out) in slab.chunks_mut(np).enumerate() {
            let row = &t3[cell * nm..(cell + 1) * nm];
            for (mi, &v) in row.iter().enumerate() {
                if v == 0.0 {
                    continue;
                }
                let m = mi as i64 - lf as i64;
                let ph = &self.phi_table[((m + lp) as usize) * np..((m + lp) as usize + 1) * np];
                for (o, &p) in out.iter_mut().zip(ph) {
                    *o += v * p;
                }
            }
        }
    }

    /// Coefficients `∫ F Y dc` up to the plan band limit.
    pub fn analyze(&self, field: &GridField) -> Result<SpectralField> {
        if !Arc::ptr_eq(field.grid(), &self.grid) && field.values().len() != self.grid.len() {
            return Err(QflowError::Mismatch {
                needed: self.band_limit,
                available: field.grid().resolved_degree(),
            });
        }
        Ok(self.analyze_values(field.values()))
    }

    pub fn analyze_values(&self, values: &[f64]) -> SpectralField {
        assert_eq!(values.len(), self.grid.len());
        let [_, n2, n3, np] = self.grid.shape();
        let slab = n2 * n3 * np;
        let parts: Vec<Vec<f64>> = values
            .par_chunks(slab)
            .enumerate()
            .map(|(i1, f)| self.analyze_slab(f, i1))
            .collect();
        let mut coeffs = vec![0.0; coeff_count(self.band_limit)];
        for part in &parts {
            for (c, p) in coeffs.iter_mut().zip(part) {
                *c += p;
            }
        }
        SpectralField::from_coeffs(self.band_limit, coeffs)
    }

    fn analyze_slab(&self, f: &[f64], i1: usize) -> Vec<f64> {
        let [n1, n2, n3, np] = self.grid.shape();
        let l = self.band_limit;
        let npair = (l + 1) * (l + 1);
        let nm = 2 * l + 1;
        let w2 = &self.grid.axis(1).weights;
        let w3 = &self.grid.axis(2).weights;
        let wp = 1.0 / np as f64;

        // φ
        let mut g = vec![0.0; n2 * n3 * nm];
        for (cell, row) in f.chunks(np).enumerate() {
            for mi in 0..nm {
                let ph = &self.phi_table[mi * np..(mi + 1) * np];
                let mut acc = 0.0;
                for (a, b) in row.iter().zip(ph) {
                    acc += a * b;
                }
                g[cell * nm + mi] = acc * wp;
            }
        }

        // θ3
        let mut h = vec![0.0; n2 * npair];
        for i2 in 0..n2 {
            for m in -(l as i64)..=(l as i64) {
                let am = m.unsigned_abs() as usize;
                let tab = &self.tables[2][am];
                let mi = (m + l as i64) as usize;
                for l3 in am..=l {
                    let base = (l3 - am) * n3;
                    let mut acc = 0.0;
                    for i3 in 0..n3 {
                        acc += w3[i3] * tab[base + i3] * g[(i2 * n3 + i3) * nm + mi];
                    }
                    h[i2 * npair + pair_index(l3, m)] = acc;
                }
            }
        }

        // θ2
        let mut q = vec![0.0; triple_count(l)];
        for l3 in 0..=l {
            let tab = &self.tables[1][l3];
            let width = 2 * l3 + 1;
            let src = pair_index(l3, -(l3 as i64));
            for l2 in l3..=l {
                let dst = triple_index(l2, l3, -(l3 as i64));
                for i2 in 0..n2 {
                    let a = w2[i2] * tab[(l2 - l3) * n2 + i2];
                    let row = &h[i2 * npair + src..i2 * npair + src + width];
                    for (o, &v) in q[dst..dst + width].iter_mut().zip(row) {
                        *o += a * v;
                    }
                }
            }
        }

        // θ1
        let w1 = self.grid.axis(0).weights[i1];
        let mut out = vec![0.0; coeff_count(l)];
        for l2 in 0..=l {
            let tab = &self.tables[0][l2];
            let lo = triple_index(l2, 0, 0);
            let hi = lo + (l2 + 1) * (l2 + 1);
            for k in l2..=l {
                let a = w1 * tab[(k - l2) * n1 + i1];
                let off = degree_offset(k);
                for t in lo..hi {
                    out[off + t] = a * q[t];
                }
            }
        }
        out
    }

    /// Share of `∫F² dc` carried by degrees above the band limit (Parseval:
    /// total energy by quadrature minus the resolved part), measured against
    /// `max(∫F² dc, 1)` so that nearly vanishing fields do not report noise.
    pub fn tail_fraction(&self, values: &[f64]) -> (SpectralField, f64) {
        let coeffs = self.analyze_values(values);
        let sq: Vec<f64> = values.iter().map(|v| v * v).collect();
        let total = self.grid.integrate_dc(&sq);
        let resolved: f64 = coeffs.coeffs().iter().map(|c| c * c).sum();
        let frac = ((total - resolved) / total.max(1.0)).max(0.0);
        (coeffs, frac)
    }
}

/// Pointwise value of the expansion at a unit vector.
pub fn evaluate_at(field: &SpectralField, point: &[f64; 5]) -> Result<f64> {
    let r2: f64 = point.iter().map(|v| v * v).sum();
    if (r2 - 1.0).abs() > 2e-12 {
        return Err(QflowError::NotOnSphere(r2 - 1.0));
    }
    Ok(Evaluator::new(field).eval(point))
}

/// Reusable off-grid evaluator: recurrence tables and a triple-major copy of
/// the coefficients are prepared once per field.
#[derive(Debug, Clone)]
pub struct Evaluator {
    degree: usize,
    /// `[axis][l]`: normalization of `sin^l · p_0` per unit `sin^l`.
    heads: [Vec<f64>; 3],
    /// `[axis][l * (L + 2) + n]` = `1 / b_n` for exponent `a + l`.
    inv_b: [Vec<f64>; 3],
    /// `[axis][l * (L + 2) + n]` = `b_n`.
    b: [Vec<f64>; 3],
    /// For each triple `(l2, l3, m)`, coefficients `c[k, l2, l3, m]` for `k = l2..=L`.
    by_triple: Vec<f64>,
    triple_start: Vec<usize>,
    f: [Vec<f64>; 3],
    ph: Vec<f64>,
}

impl Evaluator {
    pub fn new(field: &SpectralField) -> Self {
        let l = field.effective_degree();
        let stride = l + 2;
        let mut heads = [vec![0.0; l + 1], vec![0.0; l + 1], vec![0.0; l + 1]];
        let mut inv_b = [vec![0.0; (l + 1) * stride], vec![0.0; (l + 1) * stride], vec![0.0; (l + 1) * stride]];
        let mut b = inv_b.clone();
        for axis in 0..3 {
            let a = AXIS_EXPONENTS[axis];
            let mut h = 1.0;
            for lo in 0..=l {
                if lo > 0 {
                    let two_b = 2.0 * (a + lo as f64);
                    h *= ((two_b + 1.0) / two_b).sqrt();
                }
                heads[axis][lo] = h;
                let beta = a + lo as f64;
                for n in 1..stride {
                    let bn = super::basis::recurrence_b(n, beta);
                    b[axis][lo * stride + n] = bn;
                    inv_b[axis][lo * stride + n] = 1.0 / bn;
                }
            }
        }
        let coeffs = field.coeffs();
        let mut by_triple = Vec::with_capacity(coeff_count(l));
        let mut triple_start = Vec::with_capacity(triple_count(l) + 1);
        for l2 in 0..=l {
            for l3 in 0..=l2 {
                for m in -(l3 as i64)..=(l3 as i64) {
                    triple_start.push(by_triple.len());
                    let t = triple_index(l2, l3, m);
                    for k in l2..=l {
                        by_triple.push(coeffs[degree_offset(k) + t]);
                    }
                }
            }
        }
        triple_start.push(by_triple.len());
        let tri = (l + 1) * stride;
        Evaluator {
            degree: l,
            heads,
            inv_b,
            b,
            by_triple,
            triple_start,
            f: [vec![0.0; tri], vec![0.0; tri], vec![0.0; tri]],
            ph: vec![0.0; 2 * l + 1],
        }
    }

    fn fill_axis(&mut self, axis: usize, s: f64, sin: f64) {
        let l = self.degree;
        let stride = l + 2;
        let out = &mut self.f[axis];
        let mut sin_pow = 1.0;
        for lo in 0..=l {
            let row = &mut out[lo * stride..lo * stride + (l - lo + 1)];
            let ib = &self.inv_b[axis][lo * stride..];
            let bb = &self.b[axis][lo * stride..];
            row[0] = self.heads[axis][lo] * sin_pow;
            if row.len() > 1 {
                row[1] = s * row[0] * ib[1];
            }
            for n in 1..row.len().saturating_sub(1) {
                row[n + 1] = (s * row[n] - bb[n] * row[n - 1]) * ib[n + 1];
            }
            sin_pow *= sin;
        }
    }

    /// Highest degree carried by the evaluated field.
    pub fn degree(&self) -> usize {
        self.degree
    }

    fn prepare(&mut self, point: &[f64; 5]) {
        let l = self.degree;
        let ang = Angles::of(point);
        for axis in 0..3 {
            self.fill_axis(axis, ang.s[axis], ang.sin[axis]);
        }
        // cos(mφ), sin(mφ) by angle addition
        let root2 = std::f64::consts::SQRT_2;
        self.ph[l] = 1.0;
        let (mut c, mut s) = (1.0, 0.0);
        for m in 1..=l {
            let c_next = c * ang.cos_phi - s * ang.sin_phi;
            s = s * ang.cos_phi + c * ang.sin_phi;
            c = c_next;
            self.ph[l + m] = root2 * c;
            self.ph[l - m] = root2 * s;
        }
    }

    /// Evaluates at a point assumed to lie on the sphere.
    pub fn eval(&mut self, point: &[f64; 5]) -> f64 {
        self.prepare(point);
        let l = self.degree;
        let stride = l + 2;
        let [f1, f2, f3] = &self.f;
        let mut total = 0.0;
        let mut t = 0;
        for l2 in 0..=l {
            let radial_f = &f1[l2 * stride..l2 * stride + (l - l2 + 1)];
            for l3 in 0..=l2 {
                let a2 = f2[l3 * stride + (l2 - l3)];
                for m in -(l3 as i64)..=(l3 as i64) {
                    let am = m.unsigned_abs() as usize;
                    let ang_part = self.ph[(m + l as i64) as usize] * f3[am * stride + (l3 - am)] * a2;
                    let cs = &self.by_triple[self.triple_start[t]..self.triple_start[t + 1]];
                    let mut radial = 0.0;
                    for (cv, fv) in cs.iter().zip(radial_f) {
                        radial += cv * fv;
                    }
                    total += ang_part * radial;
                    t += 1;
                }
            }
        }
        total
    }

    /// Degree-`k` components `u_k(x)` for `k = 0..=L` (entries beyond the
    /// field's effective degree are zero).
    pub fn eval_by_degree(&mut self, point: &[f64; 5], out: &mut [f64]) {
        out.fill(0.0);
        self.prepare(point);
        let l = self.degree;
        let stride = l + 2;
        let [f1, f2, f3] = &self.f;
        let mut t = 0;
        for l2 in 0..=l {
            let radial_f = &f1[l2 * stride..l2 * stride + (l - l2 + 1)];
            for l3 in 0..=l2 {
                let a2 = f2[l3 * stride + (l2 - l3)];
                for m in -(l3 as i64)..=(l3 as i64) {
                    let am = m.unsigned_abs() as usize;
                    let ang_part = self.ph[(m + l as i64) as usize] * f3[am * stride + (l3 - am)] * a2;
                    let cs = &self.by_triple[self.triple_start[t]..self.triple_start[t + 1]];
                    for (j, (cv, fv)) in cs.iter().zip(radial_f).enumerate() {
                        out[l2 + j] += ang_part * cv * fv;
                    }
                    t += 1;
                }
            }
        }
    }
}

/// Evaluates `field` at many points (parallel, order-preserving).
pub fn evaluate_many(field: &SpectralField, points: &[[f64; 5]]) -> Vec<f64> {
    points
        .par_chunks(256)
        .map_init(|| Evaluator::new(field), |ev, chunk| chunk.iter().map(|p| ev.eval(p)).collect::<Vec<_>>())
        .flatten_iter()
        .collect()
}
