//! Hyperspherical harmonics on S⁴ ⊂ R⁵ built as Gegenbauer chains.
//!
//! Coordinates on the sphere:
//!
//! ```text
//! x5 = cos θ1
//! x4 = sin θ1 cos θ2
//! x3 = sin θ1 sin θ2 cos θ3
//! x1 = sin θ1 sin θ2 sin θ3 cos φ
//! x2 = sin θ1 sin θ2 sin θ3 sin φ
//! ```
//!
//! with `dv_c = sin³θ1 sin²θ2 sinθ3 dθ1 dθ2 dθ3 dφ`. A basis element is labelled
//! by `(k, l2, l3, m)` with `k ≥ l2 ≥ l3 ≥ |m|` and is the product
//!
//! ```text
//! Φ_m(φ) · sin^|m|θ3 p_{l3-|m|}(cos θ3) · sin^l3 θ2 p_{l2-l3}(cos θ2) · sin^l2 θ1 p_{k-l2}(cos θ1)
//! ```
//!
//! where each `p` is an orthonormal Gegenbauer polynomial for the matching
//! Jacobi weight. Every factor is normalized against the probability measure
//! of its axis, so the product is orthonormal under `dc = dv_c / (8π²/3)`.
//!
//! Canonical ordering: degree `k` ascending; inside a degree, `l2` ascending,
//! then `l3` ascending, then signed `m` ascending from `-l3` to `l3`. Negative
//! `m` selects `√2 sin(|m|φ)`, positive `m` selects `√2 cos(mφ)`. The
//! intra-degree position of `(l2, l3, m)` does not depend on `k`.

use std::f64::consts::PI;

/// Volume of the unit round S⁴, `∫ dv_c = 8π²/3`.
pub const VOLUME_S4: f64 = 8.0 * PI * PI / 3.0;

/// Jacobi exponents `a` of the three polar axes: weight `(1 - s²)^a` in `s = cos θ`.
pub const AXIS_EXPONENTS: [f64; 3] = [1.0, 0.5, 0.0];

/// Number of degree-`k` harmonics on S⁴, `(k+1)(k+2)(2k+3)/6`.
pub fn degree_dim(k: usize) -> usize {
    (k + 1) * (k + 2) * (2 * k + 3) / 6
}

/// Number of harmonics of degree `< k`.
pub fn degree_offset(k: usize) -> usize {
    k * (k + 1) * (k + 1) * (k + 2) / 12
}

/// Total number of coefficients up to and including degree `band_limit`.
pub fn coeff_count(band_limit: usize) -> usize {
    degree_offset(band_limit + 1)
}

/// Position of `(l2, l3, m)` inside any degree block with `k ≥ l2`.
#[inline]
pub fn triple_index(l2: usize, l3: usize, m: i64) -> usize {
    l2 * (l2 + 1) * (2 * l2 + 1) / 6 + l3 * l3 + (l3 as i64 + m) as usize
}

/// Position of `(l3, m)` among the S² labels with `l3 ≤ L`.
#[inline]
pub fn pair_index(l3: usize, m: i64) -> usize {
    l3 * l3 + (l3 as i64 + m) as usize
}

/// Number of `(l2, l3, m)` triples with `l2 ≤ band_limit`.
pub fn triple_count(band_limit: usize) -> usize {
    degree_dim(band_limit)
}

/// Label of one basis element.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct HarmonicLabel {
    pub k: usize,
    pub l2: usize,
    pub l3: usize,
    pub m: i64,
}

impl HarmonicLabel {
    pub fn index(&self) -> usize {
        degree_offset(self.k) + triple_index(self.l2, self.l3, self.m)
    }
}

/// Degree of the coefficient at canonical position `index`.
pub fn degree_of(index: usize) -> usize {
    let mut k = 0;
    while degree_offset(k + 1) <= index {
        k += 1;
    }
    k
}

/// All labels up to `band_limit` in canonical order.
pub fn labels(band_limit: usize) -> Vec<HarmonicLabel> {
    let mut out = Vec::with_capacity(coeff_count(band_limit));
    for k in 0..=band_limit {
        for l2 in 0..=k {
            for l3 in 0..=l2 {
                for m in -(l3 as i64)..=(l3 as i64) {
                    out.push(HarmonicLabel { k, l2, l3, m });
                }
            }
        }
    }
    out
}

/// Off-diagonal coefficient of the orthonormal three-term recurrence for the
/// weight `(1 - s²)^beta`: `s p_n = b_{n+1} p_{n+1} + b_n p_{n-1}`.
#[inline]
pub(crate) fn recurrence_b(n: usize, beta: f64) -> f64 {
    let n = n as f64;
    let d = 2.0 * n + 2.0 * beta;
    (n * (n + 2.0 * beta) / (d * d - 1.0)).sqrt()
}

/// Chain factors `sin^l · p_n(s)` for `n = 0..out.len()`, with `p_n`
/// orthonormal for the weight `(1 - s²)^(a + l)`, normalized so that the
/// factors are orthonormal against the axis probability measure
/// `(1 - s²)^a ds / ∫(1 - s²)^a ds`.
pub fn chain_factors(a: f64, l: usize, s: f64, sin: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    let mut head = 1.0;
    for j in 1..=l {
        let two_b = 2.0 * (a + j as f64);
        head *= sin * ((two_b + 1.0) / two_b).sqrt();
    }
    let beta = a + l as f64;
    out[0] = head;
    if out.len() > 1 {
        out[1] = s * head / recurrence_b(1, beta);
    }
    for n in 1..out.len().saturating_sub(1) {
        out[n + 1] = (s * out[n] - recurrence_b(n, beta) * out[n - 1]) / recurrence_b(n + 1, beta);
    }
}

/// Values and derivatives of the orthonormal polynomials `p_0..=p_n` for the
/// normalized weight `(1 - s²)^beta` (so `p_0 = 1`). Used for Gauss rules.
pub(crate) fn orthonormal_with_derivative(beta: f64, n: usize, s: f64) -> (f64, f64, f64) {
    // returns (p_n, p_n', sum_{j<n} p_j^2)
    let mut p_prev = 0.0;
    let mut dp_prev = 0.0;
    let mut p = 1.0;
    let mut dp = 0.0;
    let mut sum_sq = 0.0;
    for j in 0..n {
        sum_sq += p * p;
        let b_next = recurrence_b(j + 1, beta);
        let b_cur = if j == 0 { 0.0 } else { recurrence_b(j, beta) };
        let p_next = (s * p - b_cur * p_prev) / b_next;
        let dp_next = (p + s * dp - b_cur * dp_prev) / b_next;
        p_prev = p;
        dp_prev = dp;
        p = p_next;
        dp = dp_next;
    }
    (p, dp, sum_sq)
}

/// Angular coordinates of a unit vector, with the sines computed from the
/// Cartesian components (no `sqrt(1 - s²)` cancellation near the poles).
#[derive(Debug, Clone, Copy)]
pub struct Angles {
    pub s: [f64; 3],
    pub sin: [f64; 3],
    pub cos_phi: f64,
    pub sin_phi: f64,
}

impl Angles {
    pub fn of(x: &[f64; 5]) -> Self {
        let r2 = x[0].hypot(x[1]);
        let r3 = r2.hypot(x[2]);
        let r4 = r3.hypot(x[3]);
        let r5 = r4.hypot(x[4]);
        let (s1, sin1) = (x[4] / r5, r4 / r5);
        let (s2, sin2) = if r4 > 0.0 { (x[3] / r4, r3 / r4) } else { (1.0, 0.0) };
        let (s3, sin3) = if r3 > 0.0 { (x[2] / r3, r2 / r3) } else { (1.0, 0.0) };
        let (cos_phi, sin_phi) = if r2 > 0.0 { (x[0] / r2, x[1] / r2) } else { (1.0, 0.0) };
        Angles {
            s: [s1, s2, s3],
            sin: [sin1, sin2, sin3],
            cos_phi,
            sin_phi,
        }
    }
}

/// Point on S⁴ from the axis cosines/sines and `φ`.
pub fn point_from_angles(s: [f64; 3], sin: [f64; 3], phi: f64) -> [f64; 5] {
    let c12 = sin[0] * sin[1];
    let c123 = c12 * sin[2];
    [
        c123 * phi.cos(),
        c123 * phi.sin(),
        c12 * s[2],
        sin[0] * s[1],
        s[0],
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dimension_formula() {
        let dims: Vec<usize> = (0..5).map(degree_dim).collect();
        assert_eq!(dims, vec![1, 5, 14, 30, 55]);
        for k in 0..30 {
            let by_sum: usize = (0..=k).map(|l2| (l2 + 1) * (l2 + 1)).sum();
            assert_eq!(degree_dim(k), by_sum);
            assert_eq!(degree_offset(k + 1) - degree_offset(k), degree_dim(k));
        }
        assert_eq!(coeff_count(16), 8721);
    }

    #[test]
    fn canonical_labels_match_index() {
        for (i, lab) in labels(9).iter().enumerate() {
            assert_eq!(lab.index(), i);
            assert_eq!(degree_of(i), lab.k);
        }
    }

    #[test]
    fn chain_factors_are_orthonormal_on_legendre_axis() {
        // a = 0, l = 0: orthonormal Legendre under ds/2; check with a fine midpoint rule
        let n = 20000;
        let mut gram = [[0.0; 4]; 4];
        let mut buf = [0.0; 4];
        for i in 0..n {
            let s = -1.0 + (i as f64 + 0.5) * 2.0 / n as f64;
            chain_factors(0.0, 0, s, (1.0 - s * s).sqrt(), &mut buf);
            for a in 0..4 {
                for b in 0..4 {
                    gram[a][b] += buf[a] * buf[b] / n as f64;
                }
            }
        }
        for a in 0..4 {
            for b in 0..4 {
                let expect = if a == b { 1.0 } else { 0.0 };
                assert!((gram[a][b] - expect).abs() < 1e-6, "{a} {b} {}", gram[a][b]);
            }
        }
    }

    #[test]
    fn angles_round_trip() {
        let s = [0.3_f64, -0.6, 0.1];
        let sin = s.map(|c| (1.0 - c * c).sqrt());
        let x = point_from_angles(s, sin, 2.2);
        let a = Angles::of(&x);
        for i in 0..3 {
            assert!((a.s[i] - s[i]).abs() < 1e-15);
            assert!((a.sin[i] - sin[i]).abs() < 1e-15);
        }
        assert!((a.cos_phi - 2.2_f64.cos()).abs() < 1e-15);
    }
}
