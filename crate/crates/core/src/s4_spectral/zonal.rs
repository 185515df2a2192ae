//! Zonal functions on S⁴: normalized Gegenbauer polynomials `C_k^{3/2}` and
//! their cap integrals.
//!
//! For a function with degree components `F_k`, the average over the ring at
//! geodesic distance `θ` from `q` is `Σ_k F_k(q) P_k(cos θ)` (Funk–Hecke),
//! and the marginal of `cos θ` under `dc` is `(3/4)(1 − s²) ds`.

/// `C_k^{λ}(s)` for `k = 0..=k_max`.
fn gegenbauer(lambda: f64, k_max: usize, s: f64, out: &mut Vec<f64>) {
    out.clear();
    out.push(1.0);
    if k_max >= 1 {
        out.push(2.0 * lambda * s);
    }
    for k in 1..k_max {
        let kf = k as f64;
        let next = (2.0 * (kf + lambda) * s * out[k] - (kf + 2.0 * lambda - 1.0) * out[k - 1]) / (kf + 1.0);
        out.push(next);
    }
}

/// `C_k^{3/2}(1) = (k+1)(k+2)/2`.
fn value_at_one(k: usize) -> f64 {
    ((k + 1) * (k + 2)) as f64 / 2.0
}

/// `P_k(s) = C_k^{3/2}(s) / C_k^{3/2}(1)`, so `P_k(1) = 1`.
pub fn zonal_profile(k_max: usize, s: f64) -> Vec<f64> {
    let mut c = Vec::with_capacity(k_max + 1);
    gegenbauer(1.5, k_max, s, &mut c);
    c.iter().enumerate().map(|(k, v)| v / value_at_one(k)).collect()
}

/// `P_k'(s)`.
pub fn zonal_profile_derivative(k_max: usize, s: f64) -> Vec<f64> {
    let mut c = Vec::with_capacity(k_max + 1);
    gegenbauer(2.5, k_max.saturating_sub(1), s, &mut c);
    (0..=k_max)
        .map(|k| if k == 0 { 0.0 } else { 3.0 * c[k - 1] / value_at_one(k) })
        .collect()
}

/// `I_k(r) = ∫_{cos r}^{1} (1 − s²) P_k(s) ds`, using
/// `((1 − s²)² P_k')' = −k(k+3)(1 − s²) P_k`.
pub fn cap_integrals(k_max: usize, r: f64) -> Vec<f64> {
    let c = r.cos();
    let sin2 = r.sin().powi(2);
    let one_minus_c = 2.0 * (0.5 * r).sin().powi(2);
    let dp = zonal_profile_derivative(k_max, c);
    (0..=k_max)
        .map(|k| {
            if k == 0 {
                one_minus_c * one_minus_c * (2.0 + c) / 3.0
            } else {
                sin2 * sin2 * dp[k] / (k * (k + 3)) as f64
            }
        })
        .collect()
}

/// Fraction of the total `dc` measure inside a geodesic ball of radius `r`.
pub fn cap_fraction(r: f64) -> f64 {
    0.75 * cap_integrals(0, r)[0]
}
