//! Prescribed-function and initial-data families.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::conformal_ops::{volume, PrescribedFunction};
use crate::error::{QflowError, Result};
use crate::mobius_gauge::MobiusBoost;
use crate::s4_spectral::{coeff_count, degree_offset, GridField, GridSpec, SpectralField, SphereTransform, VOLUME_S4};

use super::snapshot::Snapshot;

fn numbers(s: &str, n: usize, what: &str) -> Result<Vec<f64>> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| QflowError::Parse(format!("{what}: expected {n} comma-separated numbers, got {s:?}")))?;
    if v.len() != n || v.iter().any(|x| !x.is_finite()) {
        return Err(QflowError::Parse(format!("{what}: expected {n} finite numbers, got {s:?}")));
    }
    Ok(v)
}

fn single(s: &str, what: &str) -> Result<f64> {
    Ok(numbers(s, 1, what)?[0])
}

/// `<a1,..,a5>;<c>`.
fn vector_and_constant(body: &str, what: &str) -> Result<([f64; 5], f64)> {
    let (a, c) = body
        .split_once(';')
        .ok_or_else(|| QflowError::Parse(format!("{what}: expected <a1,...,a5>;<c>")))?;
    let a = numbers(a, 5, what)?;
    Ok(([a[0], a[1], a[2], a[3], a[4]], single(c, what)?))
}

/// `Σ aᵢxᵢ² + c`, exact at band limit 2.
pub fn quadric_field(a: [f64; 5], c: f64) -> Result<SpectralField> {
    let plan = SphereTransform::new(&GridSpec::new(4, 1)?)?;
    let g = GridField::from_fn(plan.grid().clone(), |x| c + (0..5).map(|i| a[i] * x[i] * x[i]).sum::<f64>());
    let mut f = plan.analyze(&g)?.with_band_limit(2);
    // degree 1 and the off-diagonal part of degree 2 vanish by symmetry
    for v in f.coeffs_mut().iter_mut().filter(|v| v.abs() < 1e-15) {
        *v = 0.0;
    }
    Ok(f)
}

/// Spectral field of an `f` spec at its natural band limit.
pub fn parse_f_field(spec: &str) -> Result<SpectralField> {
    let (kind, body) = spec
        .split_once(':')
        .ok_or_else(|| QflowError::Parse(format!("f spec {spec:?}: expected <family>:<parameters>")))?;
    match kind.trim() {
        "const" => Ok(SpectralField::constant(0, single(body, "const")?)),
        "linear" => {
            let (a, c) = vector_and_constant(body, "linear")?;
            let mut f = SpectralField::linear(1, a);
            f.coeffs_mut()[0] += c;
            Ok(f)
        }
        "quadric" => {
            let (a, c) = vector_and_constant(body, "quadric")?;
            quadric_field(a, c)
        }
        "coeffs" => Ok(Snapshot::read(Path::new(body.trim()))?.field),
        other => Err(QflowError::Parse(format!("unknown f family {other:?}"))),
    }
}

/// Parses an `f` spec and checks `max f > 0` on the plan grid.
pub fn parse_f_spec(spec: &str, plan: &SphereTransform) -> Result<PrescribedFunction> {
    let f = parse_f_field(spec)?;
    if f.band_limit() > plan.band_limit() && f.effective_degree() > plan.band_limit() {
        return Err(QflowError::Mismatch {
            needed: f.effective_degree(),
            available: plan.band_limit(),
        });
    }
    PrescribedFunction::new(plan, f.with_band_limit(plan.band_limit()))
}

/// `u − ¼ log(volume / |S⁴|)`.
pub fn volume_renormalized(plan: &SphereTransform, mut u: SpectralField) -> Result<SpectralField> {
    let v = volume(plan, &u)?;
    u.coeffs_mut()[0] -= 0.25 * (v / VOLUME_S4).ln();
    Ok(u)
}

/// Uniform coefficients in `[−amp, amp]` against the basis normalized in
/// `L²(dv_c)`, up to `max_degree`, drawn in canonical order from ChaCha8
/// seeded with `seed`, then volume-renormalized.
pub fn random_field(plan: &SphereTransform, amp: f64, max_degree: usize, seed: u64) -> Result<SpectralField> {
    let l = plan.band_limit();
    if max_degree > l {
        return Err(QflowError::Mismatch { needed: max_degree, available: l });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c = vec![0.0; coeff_count(l)];
    let to_dc = VOLUME_S4.sqrt().recip();
    for v in c.iter_mut().take(degree_offset(max_degree + 1)) {
        *v = if amp > 0.0 { rng.gen_range(-amp..=amp) * to_dc } else { 0.0 };
    }
    volume_renormalized(plan, SpectralField::from_coeffs(l, c))
}

/// Initial data at the plan band limit.
pub fn parse_u0_spec(spec: &str, plan: &SphereTransform, seed: u64) -> Result<SpectralField> {
    let l = plan.band_limit();
    let spec = spec.trim();
    if spec == "zero" {
        return Ok(SpectralField::zeros(l));
    }
    let (kind, body) = spec
        .split_once(':')
        .ok_or_else(|| QflowError::Parse(format!("u0 spec {spec:?}: expected zero or <family>:<parameters>")))?;
    match kind.trim() {
        "boost" => {
            let (p, t) = vector_and_constant(body, "boost")?;
            if p.iter().all(|v| *v == 0.0) {
                return Err(QflowError::Parse("boost: pole must be nonzero".into()));
            }
            MobiusBoost::along(p, t)?.factor_field(plan)
        }
        "random" => {
            let (amp, deg) = body
                .split_once(';')
                .ok_or_else(|| QflowError::Parse("random: expected <amp>;<max_degree>".into()))?;
            let amp = single(amp, "random amplitude")?;
            let deg: usize = deg
                .trim()
                .parse()
                .map_err(|_| QflowError::Parse(format!("random: invalid max degree {deg:?}")))?;
            if amp < 0.0 {
                return Err(QflowError::Parse("random: amplitude must be non-negative".into()));
            }
            random_field(plan, amp, deg, seed)
        }
        "file" => {
            let f = Snapshot::read(Path::new(body.trim()))?.field;
            if f.effective_degree() > l {
                return Err(QflowError::Mismatch {
                    needed: f.effective_degree(),
                    available: l,
                });
            }
            Ok(f.with_band_limit(l))
        }
        other => Err(QflowError::Parse(format!("unknown u0 family {other:?}"))),
    }
}
