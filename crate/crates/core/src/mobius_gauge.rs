//! Möbius boosts of S⁴ acting on conformal factors, center of mass, and the
//! zero-center-of-mass gauge.
//!
//! A boost with pole `p` and parameter `t` is
//!
//! ```text
//! φ(x) = [(sinh t + cosh t⟨x,p⟩) p + (x − ⟨x,p⟩p)] / (cosh t + sinh t⟨x,p⟩)
//! w(x) = ¼ log det dφ = −log(cosh t + sinh t⟨x,p⟩)
//! ```
//!
//! and acts by `u ↦ u∘φ + w`. Mass moves toward `−p` for `t > 0`.
//! Rotations are not part of the gauge group.

use nalgebra::{Matrix5, Vector5};

use crate::conformal_ops::{h1_norm_sq, liouville_energy};
use crate::error::{QflowError, Result};
use crate::s4_spectral::{evaluate_many, GridField, QuadratureGrid, SpectralField, SphereTransform, TAIL_ABORT};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MobiusBoost {
    pole: [f64; 5],
    t: f64,
}

impl MobiusBoost {
    pub fn new(pole: [f64; 5], t: f64) -> Result<Self> {
        let n2: f64 = pole.iter().map(|v| v * v).sum();
        if (n2.sqrt() - 1.0).abs() > 1e-12 {
            return Err(QflowError::NotOnSphere(n2 - 1.0));
        }
        if !t.is_finite() {
            return Err(QflowError::Config(format!("boost parameter {t} is not finite")));
        }
        Ok(MobiusBoost { pole, t })
    }

    /// Boost along `direction / |direction|`.
    pub fn along(direction: [f64; 5], t: f64) -> Result<Self> {
        let n = direction.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(n > 0.0) {
            return Err(QflowError::Config("boost direction must be nonzero".into()));
        }
        Self::new(direction.map(|v| v / n), t)
    }

    pub fn identity() -> Self {
        MobiusBoost {
            pole: [0.0, 0.0, 0.0, 0.0, 1.0],
            t: 0.0,
        }
    }

    /// Boost with `a = tanh(t) p` in the open unit ball.
    pub fn from_parameter(a: [f64; 5]) -> Self {
        let r = a.iter().map(|v| v * v).sum::<f64>().sqrt();
        if r == 0.0 {
            return Self::identity();
        }
        MobiusBoost {
            pole: a.map(|v| v / r),
            t: r.atanh(),
        }
    }

    pub fn parameter(&self) -> [f64; 5] {
        let th = self.t.tanh();
        self.pole.map(|v| th * v)
    }

    pub fn pole(&self) -> [f64; 5] {
        self.pole
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn inverse(&self) -> Self {
        MobiusBoost {
            pole: self.pole,
            t: -self.t,
        }
    }

    /// `(1 + ⟨x,p⟩, 1 − ⟨x,p⟩)` from `|x ± p|² / 2`, accurate near `±p`.
    fn one_plus_minus(&self, x: &[f64; 5]) -> (f64, f64) {
        let mut plus = 0.0;
        let mut minus = 0.0;
        for (xi, pi) in x.iter().zip(&self.pole) {
            plus += (xi + pi) * (xi + pi);
            minus += (xi - pi) * (xi - pi);
        }
        (0.5 * plus, 0.5 * minus)
    }

    /// `cosh t + sinh t ⟨x,p⟩`.
    fn denominator(&self, x: &[f64; 5]) -> f64 {
        let (op, om) = self.one_plus_minus(x);
        0.5 * (self.t.exp() * op + (-self.t).exp() * om)
    }

    pub fn map(&self, x: &[f64; 5]) -> [f64; 5] {
        let (op, om) = self.one_plus_minus(x);
        let (ep, em) = (self.t.exp(), (-self.t).exp());
        let den = 0.5 * (ep * op + em * om);
        let along = 0.5 * (ep * op - em * om);
        let s = 0.5 * (op - om);
        let mut y = [0.0; 5];
        for i in 0..5 {
            y[i] = (along * self.pole[i] + x[i] - s * self.pole[i]) / den;
        }
        let n = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        y.map(|v| v / n)
    }

    /// Conformal factor `w(x) = −log(cosh t + sinh t⟨x,p⟩)`.
    pub fn factor(&self, x: &[f64; 5]) -> f64 {
        -self.denominator(x).ln()
    }

    pub fn factor_values(&self, grid: &std::sync::Arc<QuadratureGrid>) -> GridField {
        GridField::from_fn(grid.clone(), |x| self.factor(x))
    }

    /// The conformal factor analyzed to the plan band limit.
    pub fn factor_field(&self, plan: &SphereTransform) -> Result<SpectralField> {
        let vals = self.factor_values(plan.grid());
        let (coeffs, tail) = plan.tail_fraction(vals.values());
        check_tail(tail)?;
        Ok(coeffs)
    }
}

fn check_tail(tail: f64) -> Result<()> {
    if tail > TAIL_ABORT {
        return Err(QflowError::Resolution {
            fraction: tail,
            threshold: TAIL_ABORT,
        });
    }
    Ok(())
}

/// `v = u∘φ_b + w_b` analyzed to the plan band limit, with the spectral tail
/// fraction of the composed nodal values.
pub fn boost_apply_with_tail(plan: &SphereTransform, u: &SpectralField, b: &MobiusBoost) -> Result<(SpectralField, f64)> {
    if b.t == 0.0 {
        return Ok((u.with_band_limit(plan.band_limit().max(u.band_limit())), 0.0));
    }
    let nodes = plan.grid().nodes();
    let mapped: Vec<[f64; 5]> = nodes.iter().map(|x| b.map(x)).collect();
    let mut vals = evaluate_many(u, &mapped);
    for (v, x) in vals.iter_mut().zip(nodes) {
        *v += b.factor(x);
    }
    let (coeffs, tail) = plan.tail_fraction(&vals);
    check_tail(tail)?;
    Ok((coeffs, tail))
}

pub fn boost_apply(plan: &SphereTransform, u: &SpectralField, b: &MobiusBoost) -> Result<SpectralField> {
    boost_apply_with_tail(plan, u, b).map(|(v, _)| v)
}

/// `∫ x e^{4u} dc / ∫ e^{4u} dc`.
pub fn center_of_mass(plan: &SphereTransform, u: &SpectralField) -> Result<[f64; 5]> {
    let ug = plan.synthesize(u)?;
    let density = ug.map(|v| (4.0 * v).exp());
    Ok(pushforward_com(&density, &[0.0; 5]))
}

/// `φ_{p,−t}` written in terms of `a = tanh(t) p`.
fn inverse_map(a: &[f64; 5], beta: f64, y: &[f64; 5]) -> [f64; 5] {
    let ya: f64 = y.iter().zip(a).map(|(p, q)| p * q).sum();
    let den = 1.0 - ya;
    let c = ya / (1.0 + beta);
    let mut out = [0.0; 5];
    for i in 0..5 {
        out[i] = (beta * y[i] + c * a[i] - a[i]) / den;
    }
    out
}

/// Center of mass of `v = u∘φ + w` where `φ` is the boost with parameter `a`,
/// computed from the density `e^{4u}` by change of variables:
/// `∫ x dv_h = ∫ φ⁻¹(y) dv_g(y)`.
pub fn pushforward_com(density: &GridField, a: &[f64; 5]) -> [f64; 5] {
    let grid = density.grid();
    let e = density.values();
    let nodes = grid.nodes();
    let beta = (1.0 - a.iter().map(|v| v * v).sum::<f64>()).max(0.0).sqrt();
    let mass = grid.integrate_dc(e);
    std::array::from_fn(|i| grid.integrate_dc_by(|j| inverse_map(a, beta, &nodes[j])[i] * e[j]) / mass)
}

fn norm5(v: &[f64; 5]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, Copy)]
pub struct GaugeOptions {
    pub tol: f64,
    pub max_iters: usize,
    pub fd_step: f64,
}

impl Default for GaugeOptions {
    fn default() -> Self {
        GaugeOptions {
            tol: 1e-10,
            max_iters: 60,
            fd_step: 1e-5,
        }
    }
}

/// Boost solving `∫ x dv_h = 0` for a density on a grid.
#[derive(Debug, Clone, Copy)]
pub struct GaugeSolution {
    pub boost: MobiusBoost,
    pub com_before: [f64; 5],
    pub com_after: [f64; 5],
    pub iterations: usize,
}

/// Damped Newton on `a = tanh(t) p` with a central-difference Jacobian.
pub fn solve_gauge(density: &GridField, opts: &GaugeOptions) -> Result<GaugeSolution> {
    let com_before = pushforward_com(density, &[0.0; 5]);
    let mut a = [0.0; 5];
    let mut g = com_before;
    let mut gn = norm5(&g);
    let mut iterations = 0;
    while gn > opts.tol {
        if iterations == opts.max_iters {
            return Err(QflowError::GaugeFailure {
                iterations,
                com_norm: gn,
            });
        }
        iterations += 1;
        let mut jac = Matrix5::zeros();
        for j in 0..5 {
            let mut ap = a;
            let mut am = a;
            ap[j] += opts.fd_step;
            am[j] -= opts.fd_step;
            let gp = pushforward_com(density, &ap);
            let gm = pushforward_com(density, &am);
            for i in 0..5 {
                jac[(i, j)] = (gp[i] - gm[i]) / (2.0 * opts.fd_step);
            }
        }
        let Some(delta) = jac.lu().solve(&(-Vector5::from(g))) else {
            return Err(QflowError::GaugeFailure {
                iterations,
                com_norm: gn,
            });
        };
        let mut lambda = 1.0;
        let mut improved = false;
        for _ in 0..40 {
            let trial: [f64; 5] = std::array::from_fn(|i| a[i] + lambda * delta[i]);
            if norm5(&trial) < 1.0 {
                let gt = pushforward_com(density, &trial);
                let nt = norm5(&gt);
                if nt < gn {
                    a = trial;
                    g = gt;
                    gn = nt;
                    improved = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !improved {
            return Err(QflowError::GaugeFailure {
                iterations,
                com_norm: gn,
            });
        }
    }
    Ok(GaugeSolution {
        boost: MobiusBoost::from_parameter(a),
        com_before,
        com_after: g,
        iterations,
    })
}

#[derive(Debug, Clone)]
pub struct GaugeResult {
    pub v: SpectralField,
    pub boost: MobiusBoost,
    pub com_norm_before: f64,
    pub com_norm_after: f64,
    pub iterations: usize,
    /// `|E(v) − E(u)|`.
    pub energy_residual: f64,
    /// Spectral tail fraction of the composed field.
    pub tail: f64,
}

/// Gauge `u` using the density `e^{4u}` given on any grid, composing on `compose`.
pub fn normalize_with(density: &GridField, compose: &SphereTransform, u: &SpectralField, opts: &GaugeOptions) -> Result<GaugeResult> {
    let sol = solve_gauge(density, opts)?;
    let (v, tail) = boost_apply_with_tail(compose, u, &sol.boost)?;
    Ok(GaugeResult {
        energy_residual: (liouville_energy(&v) - liouville_energy(u)).abs(),
        v,
        boost: sol.boost,
        com_norm_before: norm5(&sol.com_before),
        com_norm_after: norm5(&sol.com_after),
        iterations: sol.iterations,
        tail,
    })
}

/// Finds the boost with `∫ x dv_h = 0` for `h = e^{2v} c`, `v = u∘φ + w`.
pub fn normalize(plan: &SphereTransform, u: &SpectralField, opts: &GaugeOptions) -> Result<GaugeResult> {
    let density = plan.synthesize(u)?.map(|v| (4.0 * v).exp());
    normalize_with(&density, plan, u, opts)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaugeDiagnostics {
    pub mean_v: f64,
    pub jensen_ok: bool,
    pub h1_norm: f64,
}

/// Jensen check `2 v̄ ≤ log ∫ e^{4v} dc = 0` and the H¹ norm of a gauged factor.
pub fn gauge_diagnostics(v: &SpectralField) -> GaugeDiagnostics {
    let mean_v = v.mean();
    GaugeDiagnostics {
        mean_v,
        jensen_ok: 2.0 * mean_v <= 1e-10,
        h1_norm: h1_norm_sq(v).sqrt(),
    }
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::conformal_ops::{q_curvature, volume};
    use crate::s4_spectral::{degree_offset, evaluate_at, GridSpec, VOLUME_S4};

    fn plan(l: usize, over: usize) -> SphereTransform {
        SphereTransform::new(&GridSpec::new(l, over).unwrap()).unwrap()
    }

    fn small_u(l: usize, amp: f64, seed: u64) -> SpectralField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut u = SpectralField::zeros(l);
        for c in &mut u.coeffs_mut()[1..degree_offset(3)] {
            *c = rng.gen_range(-amp..amp);
        }
        u
    }

    // Independent 1-D oracle: (3/4) ∫ s (1 − s²) (cosh t + sinh t s)^{-4} ds by composite Simpson.
    fn com_oracle(t: f64) -> f64 {
        let n = 20_000;
        let h = 2.0 / n as f64;
        let g = |s: f64| s * (1.0 - s * s) / (t.cosh() + t.sinh() * s).powi(4);
        let mut acc = g(-1.0) + g(1.0);
        for i in 1..n {
            let s = -1.0 + i as f64 * h;
            acc += if i % 2 == 1 { 4.0 } else { 2.0 } * g(s);
        }
        0.75 * acc * h / 3.0
    }

    #[test]
    fn map_is_on_sphere_and_fixes_poles() {
        let b = MobiusBoost::new([0.0, 0.0, 0.0, 0.0, 1.0], 1.3).unwrap();
        let x = [0.3, -0.1, 0.5, 0.2, (1.0f64 - 0.39).sqrt()];
        assert!((norm5(&b.map(&x)) - 1.0).abs() < 1e-15);
        let n = b.map(&[0.0, 0.0, 0.0, 0.0, 1.0]);
        assert!((n[4] - 1.0).abs() < 1e-15);
        let s = b.map(&[0.0, 0.0, 0.0, 0.0, -1.0]);
        assert!((s[4] + 1.0).abs() < 1e-15);
    }

    #[test]
    fn factor_matches_jacobian_of_map() {
        // along a meridian: dθ'/dθ = e^{w}
        let b = MobiusBoost::new([0.0, 0.0, 0.0, 0.0, 1.0], 0.9).unwrap();
        let theta = 1.1;
        let h = 1e-6;
        let pt = |th: f64| [th.sin(), 0.0, 0.0, 0.0, th.cos()];
        let ang = |x: [f64; 5]| x[0].atan2(x[4]);
        let d = (ang(b.map(&pt(theta + h))) - ang(b.map(&pt(theta - h)))) / (2.0 * h);
        assert!((d.ln() - b.factor(&pt(theta))).abs() < 1e-8);
    }

    #[test]
    fn identity_boost_is_exact() {
        let p = plan(8, 1);
        let u = small_u(8, 0.2, 1);
        let v = boost_apply(&p, &u, &MobiusBoost::identity()).unwrap();
        assert_eq!(v, u);
    }

    #[test]
    fn boosted_round_metric() {
        let p = plan(16, 2);
        let b = MobiusBoost::along([0.2, -0.5, 0.1, 0.7, 0.3], 0.3).unwrap();
        let w = b.factor_field(&p).unwrap();
        assert!((volume(&p, &w).unwrap() / VOLUME_S4 - 1.0).abs() < 1e-8);
        let q = q_curvature(&p, &w).unwrap();
        let worst = q.values().iter().fold(0.0_f64, |m, v| m.max((v - 3.0).abs()));
        assert!(worst < 1e-7, "{worst}");
    }

    #[test]
    fn group_inverse_and_law() {
        let p = plan(12, 1);
        let u = small_u(12, 0.05, 3);
        let b = MobiusBoost::along([1.0, 0.0, 0.5, 0.0, 0.0], 0.2).unwrap();
        let back = boost_apply(&p, &boost_apply(&p, &u, &b).unwrap(), &b.inverse()).unwrap();
        assert!(back.max_abs_diff(&u) < 1e-8, "{}", back.max_abs_diff(&u));
        let b2 = MobiusBoost::new(b.pole(), 0.15).unwrap();
        let twice = boost_apply(&p, &boost_apply(&p, &u, &b).unwrap(), &b2).unwrap();
        let once = boost_apply(&p, &u, &MobiusBoost::new(b.pole(), 0.35).unwrap()).unwrap();
        assert!(twice.max_abs_diff(&once) < 1e-8);
    }

    #[test]
    fn energy_is_invariant_under_boosts() {
        let p = plan(14, 1);
        let u = small_u(14, 0.05, 9);
        let b = MobiusBoost::along([0.0, 1.0, 0.0, 0.0, 1.0], 0.25).unwrap();
        let v = boost_apply(&p, &u, &b).unwrap();
        let (eu, ev) = (liouville_energy(&u), liouville_energy(&v));
        assert!((eu - ev).abs() <= 1e-7 * (1.0 + eu.abs()), "{eu} {ev}");
    }

    #[test]
    fn center_of_mass_of_round_metric_vanishes() {
        let p = plan(8, 1);
        let c = center_of_mass(&p, &SpectralField::zeros(8)).unwrap();
        assert!(norm5(&c) < 1e-12);
    }

    #[test]
    fn center_of_mass_of_boost_factor_matches_oracle() {
        let p = plan(16, 2);
        for t in [0.01, 0.4, 1.0, 1.5] {
            let b = MobiusBoost::new([0.0, 0.0, 0.0, 0.0, 1.0], t).unwrap();
            // exact nodal density, no truncation
            let density = b.factor_values(p.grid()).map(|w| (4.0 * w).exp());
            let c = pushforward_com(&density, &[0.0; 5]);
            assert!((c[4] - com_oracle(t)).abs() < 1e-8, "t={t}: {} vs {}", c[4], com_oracle(t));
            assert!(c[..4].iter().all(|v| v.abs() < 1e-12));
            if t < 0.05 {
                assert!((c[4] + 0.8 * t).abs() < t * t);
            }
        }
    }

    #[test]
    fn pushforward_matches_composition() {
        let p = plan(12, 1);
        let u = small_u(12, 0.1, 5);
        let b = MobiusBoost::along([0.3, 0.1, -0.2, 0.5, 0.4], 0.2).unwrap();
        let density = p.synthesize(&u).unwrap().map(|v| (4.0 * v).exp());
        let via_push = pushforward_com(&density, &b.parameter());
        let v = boost_apply(&p, &u, &b).unwrap();
        let direct = center_of_mass(&p, &v).unwrap();
        for i in 0..5 {
            assert!((via_push[i] - direct[i]).abs() < 1e-8, "{i}: {} {}", via_push[i], direct[i]);
        }
    }

    #[test]
    fn normalize_zero_is_identity() {
        let p = plan(8, 1);
        let r = normalize(&p, &SpectralField::zeros(8), &GaugeOptions::default()).unwrap();
        assert_eq!(r.iterations, 0);
        assert_eq!(r.boost.t(), 0.0);
    }

    #[test]
    fn normalize_recovers_inverse_boost() {
        let p = plan(16, 1);
        let b0 = MobiusBoost::along([0.1, 0.2, 0.0, -0.3, 1.0], 0.4).unwrap();
        let u = b0.factor_field(&p).unwrap();
        let r = normalize(&p, &u, &GaugeOptions::default()).unwrap();
        assert!(r.com_norm_after <= 1e-10);
        let pa = r.boost.parameter();
        let pb = b0.inverse().parameter();
        for i in 0..5 {
            assert!((pa[i] - pb[i]).abs() < 1e-6, "{pa:?} vs {pb:?}");
        }
        // v is then the round metric
        assert!(r.v.coeffs().iter().all(|c| c.abs() < 1e-6));
    }

    #[test]
    fn normalize_random_fields() {
        let p = plan(10, 1);
        for seed in 0..3 {
            let u = small_u(10, 0.3, seed);
            let r = normalize(&p, &u, &GaugeOptions::default()).unwrap();
            assert!(r.com_norm_after <= 1e-10 && r.iterations <= 30);
        }
    }

    #[test]
    fn gauge_diagnostics_examples() {
        let d = gauge_diagnostics(&SpectralField::zeros(6));
        assert!(d.jensen_ok && d.mean_v == 0.0 && d.h1_norm == 0.0);
        let p = plan(16, 1);
        let w = MobiusBoost::along([1.0, 0.0, 0.0, 0.0, 0.0], 0.5).unwrap().factor_field(&p).unwrap();
        let d = gauge_diagnostics(&w);
        assert!(d.mean_v < 0.0 && d.jensen_ok);
    }

    #[test]
    fn factor_field_evaluates_to_factor() {
        let p = plan(16, 1);
        let b = MobiusBoost::along([0.0, 0.0, 1.0, 0.0, 0.0], 0.3).unwrap();
        let w = b.factor_field(&p).unwrap();
        let x = [0.6, 0.0, 0.0, 0.0, 0.8];
        assert!((evaluate_at(&w, &x).unwrap() - b.factor(&x)).abs() < 1e-10);
    }
}
