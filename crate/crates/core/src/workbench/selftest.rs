//! Built-in operator, energy, Morse and gauge checks.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::conformal_ops::{beckner_gap, total_q, ConformalState, PrescribedFunction, GAUSS_BONNET_TOTAL};
use crate::error::Result;
use crate::mobius_gauge::{center_of_mass, normalize, GaugeOptions, MobiusBoost};
use crate::morse_gate::{check_prescribed, feasibility_bruteforce, feasible_by_recursion, MorseOptions};
use crate::s4_spectral::{
    coeff_count, paneitz_eigenvalue, zonal_profile, GridField, GridSpec, LaplacianSign, SpectralField, SphereTransform,
};

use super::specs::{parse_f_field, random_field};

#[derive(Debug, Clone, Copy, Default)]
pub struct SelftestOptions {
    pub band_limit: usize,
    /// Debug hook: operators read coefficients shifted by one slot.
    pub corrupt_ordering: bool,
}

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub suite: &'static str,
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

struct Suite<'a> {
    opts: SelftestOptions,
    plan: &'a SphereTransform,
    results: Vec<CheckResult>,
}

impl Suite<'_> {
    fn record(&mut self, suite: &'static str, name: impl Into<String>, value: Result<f64>, tol: f64) {
        let (passed, detail) = match value {
            Ok(v) => (v.is_finite() && v <= tol, format!("{v:.3e} (tol {tol:.0e})")),
            Err(e) => (false, e.to_string()),
        };
        self.results.push(CheckResult { suite, name: name.into(), passed, detail });
    }

    /// Diagonal operator as the engine would apply it, honouring the hook.
    fn diagonal(&self, u: &SpectralField, g: impl Fn(usize) -> f64) -> SpectralField {
        if !self.opts.corrupt_ordering {
            return u.map_degrees(g);
        }
        let mut c = u.coeffs().to_vec();
        c.rotate_right(1);
        SpectralField::from_coeffs(u.band_limit(), c).map_degrees(g)
    }

    fn operators(&mut self) {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let q = random_unit(&mut rng);
        for k in 0..=12 {
            let zonal = GridField::from_fn(self.plan.grid().clone(), |x| {
                let s = (0..5).map(|i| x[i] * q[i]).sum::<f64>();
                zonal_profile(k, s)[k]
            });
            let scale = zonal.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let plan = self.plan;
            let top = |g: &dyn Fn(usize) -> f64| (0..=plan.band_limit()).map(|d| g(d).abs()).fold(1.0, f64::max);
            let (p_top, l_top) = (top(&paneitz_eigenvalue), top(&|d| LaplacianSign::LaplaceBeltrami.eigenvalue(d)));
            let check = |mu: f64, norm: f64, op: &dyn Fn(&SpectralField) -> SpectralField| -> Result<f64> {
                let out = plan.synthesize(&op(&plan.analyze(&zonal)?))?;
                let err = out
                    .values()
                    .iter()
                    .zip(zonal.values())
                    .fold(0.0f64, |m, (a, b)| m.max((a - mu * b).abs()));
                Ok(err / (norm * scale))
            };
            let v = check(paneitz_eigenvalue(k), p_top, &|u| self.diagonal(u, paneitz_eigenvalue));
            self.record("operators", format!("paneitz degree {k}"), v, 1e-10);
            let lb = LaplacianSign::LaplaceBeltrami;
            let v = check(lb.eigenvalue(k), l_top, &|u| self.diagonal(u, |d| lb.eigenvalue(d)));
            self.record("operators", format!("laplacian degree {k}"), v, 1e-10);
        }
        let l = self.plan.band_limit();
        let (u, v) = (random_coeffs(&mut rng, l, 1.0), random_coeffs(&mut rng, l, 1.0));
        let lb = LaplacianSign::LaplaceBeltrami;
        let green = (|| -> Result<f64> {
            let (ug, vg) = (self.plan.synthesize(&u)?, self.plan.synthesize(&v)?);
            let lu = self.plan.synthesize(&self.diagonal(&u, |d| lb.eigenvalue(d)))?;
            let lv = self.plan.synthesize(&self.diagonal(&v, |d| lb.eigenvalue(d)))?;
            let grid = self.plan.grid();
            let (a, b) = (
                grid.integrate_dc_by(|i| ug.values()[i] * lv.values()[i]),
                grid.integrate_dc_by(|i| vg.values()[i] * lu.values()[i]),
            );
            Ok((a - b).abs() / a.abs().max(b.abs()).max(1.0))
        })();
        self.record("operators", "green identity", green, 1e-10);
    }

    fn energies(&mut self) {
        let l = self.plan.band_limit();
        let f = match PrescribedFunction::new(self.plan, SpectralField::constant(l, 3.0)) {
            Ok(f) => f,
            Err(e) => return self.record("energies", "constant prescribed function", Err(e), 0.0),
        };
        let mut fields = vec![
            ("zero".to_string(), Ok(SpectralField::zeros(l))),
            ("constant".to_string(), Ok(SpectralField::constant(l, 0.3))),
            ("0.05 x5".to_string(), Ok(SpectralField::coordinate(l, 4).scaled(0.05))),
        ];
        for t in [0.5, 1.0] {
            let b = MobiusBoost::along([0.3, -0.2, 0.1, 0.5, 0.8], t);
            fields.push((format!("boost t={t}"), b.and_then(|b| b.factor_field(self.plan))));
        }
        for seed in 0..3 {
            fields.push((format!("random seed {seed}"), random_field(self.plan, 0.1, 4.min(l), seed)));
        }
        for (name, u) in fields {
            let gb = match &u {
                Ok(u) => ConformalState::new(self.plan, u.clone(), &f).map(|s| (total_q(&s) / GAUSS_BONNET_TOTAL - 1.0).abs()),
                Err(e) => Err(crate::QflowError::Config(e.to_string())),
            };
            self.record("energies", format!("gauss-bonnet {name}"), gb, 1e-7);
            let gap = u.and_then(|u| beckner_gap(self.plan, &u));
            let (check, tol) = if name.starts_with("boost") || name == "zero" || name == "constant" {
                (gap.map(f64::abs), 1e-7)
            } else {
                (gap.map(|g| (-g).max(0.0)), 1e-9)
            };
            self.record("energies", format!("beckner {name}"), check, tol);
        }
    }

    fn morse(&mut self) {
        let opts = MorseOptions::default();
        let cases: [(&str, Option<bool>, bool); 4] = [
            ("linear:0,0,0,0,1;2", Some(false), false),
            ("quadric:1,2,3.5,4,5;0", Some(true), false),
            ("quadric:1,2,3.5,4,5;-1.5", Some(true), false),
            ("quadric:1,2,3,4,5;0", None, true),
        ];
        for (spec, satisfied, violated) in cases {
            let ok = parse_f_field(spec).and_then(|f| check_prescribed(&f, &opts)).map(|r| {
                let c = satisfied.map_or(true, |s| r.condition_satisfied == s);
                if c && r.hypothesis_violations.is_empty() != violated {
                    0.0
                } else {
                    1.0
                }
            });
            self.record("morse", spec, ok, 0.0);
        }
        let mut mismatches = 0.0;
        for a in 0..=4usize {
            for b in 0..=4 {
                for c in 0..=4 {
                    for d in 0..=4 {
                        for e in 0..=4 {
                            let m = [a, b, c, d, e];
                            if feasible_by_recursion(&m) != feasibility_bruteforce(&m) {
                                mismatches += 1.0;
                            }
                        }
                    }
                }
            }
        }
        self.record("morse", "recursion vs brute force", Ok(mismatches), 0.0);
    }

    fn gauge(&mut self) {
        let v = (|| -> Result<f64> {
            let b = MobiusBoost::along([0.0, 0.0, 0.0, 0.0, 1.0], 1.0)?;
            let u = b.factor_field(self.plan)?;
            let g = normalize(self.plan, &u, &GaugeOptions::default())?;
            let com = center_of_mass(self.plan, &g.v)?;
            Ok(com.iter().map(|c| c * c).sum::<f64>().sqrt())
        })();
        self.record("gauge", "boost t=1 normalized", v, 1e-9);
    }
}

fn random_unit(rng: &mut ChaCha8Rng) -> [f64; 5] {
    let v: [f64; 5] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.map(|x| x / n)
}

fn random_coeffs(rng: &mut ChaCha8Rng, l: usize, amp: f64) -> SpectralField {
    SpectralField::from_coeffs(l, (0..coeff_count(l)).map(|_| rng.gen_range(-amp..amp)).collect())
}

pub fn run_selftest(opts: SelftestOptions) -> Result<Vec<CheckResult>> {
    let plan = SphereTransform::new(&GridSpec::new(opts.band_limit, 2)?)?;
    let mut s = Suite { opts, plan: &plan, results: Vec::new() };
    s.operators();
    s.energies();
    s.morse();
    s.gauge();
    Ok(s.results)
}

pub fn cmd_selftest(opts: SelftestOptions, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    match run_selftest(opts) {
        Ok(results) => {
            let width = results.iter().map(|r| r.name.len()).max().unwrap_or(0);
            for r in &results {
                let _ = writeln!(
                    out,
                    "{:<10} {:<width$}  {}  {}",
                    r.suite,
                    r.name,
                    if r.passed { "PASS" } else { "FAIL" },
                    r.detail
                );
            }
            let failed = results.iter().filter(|r| !r.passed).count();
            let _ = writeln!(out, "{} checks, {} failed", results.len(), failed);
            i32::from(failed > 0)
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            1
        }
    }
}
