//! Critical points of a prescribed function, their Morse data, and
//! solvability of the `m_i = k_{i−1} + k_i` system over nonnegative integers.

use rayon::prelude::*;

use crate::error::{QflowError, Result};
use crate::s4_spectral::{
    apply_laplacian_with, build_grid, geodesic_distance, newton_critical, Evaluator, GridSpec, LaplacianSign, NewtonOptions,
    SpectralField,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MorseOptions {
    pub nondegeneracy_tol: f64,
    /// `|Δf(p)|` at or below this counts as a vanishing Laplacian.
    pub laplacian_tol: f64,
    /// `|f(p)|` at or below this puts `p` on the boundary of the positive part.
    pub boundary_tol: f64,
    pub dedup_radius: f64,
    /// More degenerate points than this is a hard error.
    pub max_degenerate: usize,
    pub sign: LaplacianSign,
    pub newton: NewtonOptions,
}

impl Default for MorseOptions {
    fn default() -> Self {
        MorseOptions {
            nondegeneracy_tol: 1e-6,
            laplacian_tol: 1e-8,
            boundary_tol: 1e-9,
            dedup_radius: 1e-6,
            max_degenerate: 8,
            sign: LaplacianSign::LaplaceBeltrami,
            newton: NewtonOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalPoint {
    pub location: [f64; 5],
    pub f_value: f64,
    pub grad_norm: f64,
    /// Covariant Hessian eigenvalues, ascending.
    pub hessian_eigenvalues: [f64; 4],
    pub morse_index: usize,
    pub laplacian_value: f64,
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MorseReport {
    pub points: Vec<CriticalPoint>,
    pub m: [usize; 5],
    /// `k_0..k_3` from the forward recursion, possibly negative.
    pub recursion: [i64; 4],
    pub k: Option<[i64; 5]>,
    pub feasible: bool,
    pub condition_satisfied: bool,
    pub degree_sum: i64,
    pub hypothesis_violations: Vec<String>,
}

fn seed_band(f: &SpectralField) -> usize {
    (2 * f.effective_degree()).max(4)
}

/// Newton searches from every node of a grid resolving twice the degree of `f`.
pub fn find_critical_points(f: &SpectralField, opts: &MorseOptions) -> Result<Vec<CriticalPoint>> {
    let grid = build_grid(&GridSpec::new(seed_band(f), 1)?)?;
    let seeds = grid.nodes();
    let lap = apply_laplacian_with(f, opts.sign);
    let searches: Vec<_> = seeds
        .par_chunks(64)
        .map_init(
            || Evaluator::new(f),
            |ev, chunk| {
                chunk
                    .iter()
                    .map(|s| newton_critical(&mut |x: &[f64; 5]| ev.eval(x), *s, &opts.newton))
                    .collect::<Vec<_>>()
            },
        )
        .flatten()
        .collect();
    let failed = searches.iter().filter(|s| !s.converged).count();
    if 2 * failed > searches.len() {
        return Err(QflowError::CriticalPoints(format!(
            "Newton did not converge from {failed} of {} seeds",
            searches.len()
        )));
    }

    let mut points: Vec<CriticalPoint> = Vec::new();
    let mut lap_eval = Evaluator::new(&lap);
    for s in searches.iter().filter(|s| s.converged) {
        if points.iter().any(|p| geodesic_distance(&p.location, &s.location) <= opts.dedup_radius) {
            continue;
        }
        let ev = s.derivatives.hessian_eigenvalues();
        let degenerate = ev.iter().any(|e| e.abs() < opts.nondegeneracy_tol);
        points.push(CriticalPoint {
            location: s.location,
            f_value: s.derivatives.value,
            grad_norm: s.derivatives.grad_norm(),
            hessian_eigenvalues: ev,
            morse_index: ev.iter().filter(|e| **e < 0.0).count(),
            laplacian_value: lap_eval.eval(&s.location),
            degenerate,
        });
        if points.iter().filter(|p| p.degenerate).count() > opts.max_degenerate {
            return Err(QflowError::Degenerate(points.iter().filter(|p| p.degenerate).count()));
        }
    }
    points.sort_by(|a, b| b.f_value.total_cmp(&a.f_value).then(a.location.partial_cmp(&b.location).unwrap()));

    if points.iter().all(|p| !p.degenerate) {
        let euler: i64 = points.iter().map(|p| sign_of_index(p.morse_index)).sum();
        if euler != 2 {
            return Err(QflowError::CriticalPoints(format!(
                "index sum {euler} over {} points differs from the Euler characteristic 2",
                points.len()
            )));
        }
    }
    Ok(points)
}

fn sign_of_index(ind: usize) -> i64 {
    if ind % 2 == 0 {
        1
    } else {
        -1
    }
}

/// Forward recursion `k_0 = m_0 − 1`, `k_i = m_i − k_{i−1}`.
pub fn k_recursion(m: &[usize; 5]) -> [i64; 4] {
    let mut k = [0i64; 4];
    k[0] = m[0] as i64 - 1;
    for i in 1..4 {
        k[i] = m[i] as i64 - k[i - 1];
    }
    k
}

pub fn feasible_by_recursion(m: &[usize; 5]) -> bool {
    let k = k_recursion(m);
    k.iter().all(|v| *v >= 0) && m[4] as i64 == k[3]
}

/// Exhaustive search over `0 ≤ k_i ≤ Σm` with `k_4 = 0`.
pub fn feasibility_bruteforce(m: &[usize; 5]) -> bool {
    let n = m.iter().sum::<usize>();
    for k0 in 0..=n {
        if m[0] != 1 + k0 {
            continue;
        }
        for k1 in 0..=n {
            if m[1] != k0 + k1 {
                continue;
            }
            for k2 in 0..=n {
                if m[2] != k1 + k2 {
                    continue;
                }
                for k3 in 0..=n {
                    if m[3] == k2 + k3 && m[4] == k3 {
                        return true;
                    }
                }
            }
        }
    }
    false
}

/// `Σ (−1)^{ind}` with `ind = 4 − i`.
pub fn degree_sum_of(m: &[usize; 5]) -> i64 {
    m.iter().enumerate().map(|(i, c)| sign_of_index(i) * *c as i64).sum()
}

pub fn build_report(points: &[CriticalPoint], opts: &MorseOptions) -> MorseReport {
    let mut m = [0usize; 5];
    let mut violations = Vec::new();
    for p in points {
        let loc = format_point(&p.location);
        if p.degenerate {
            violations.push(format!("degenerate critical point at {loc}"));
        }
        if p.f_value.abs() <= opts.boundary_tol {
            violations.push(format!("critical point at {loc} lies on the zero set of f"));
            continue;
        }
        if p.f_value < 0.0 {
            continue;
        }
        if p.laplacian_value.abs() <= opts.laplacian_tol {
            violations.push(format!("vanishing Laplacian ({:e}) at {loc}", p.laplacian_value));
            continue;
        }
        let negative = match opts.sign {
            LaplacianSign::LaplaceBeltrami => p.laplacian_value < 0.0,
            LaplacianSign::Analyst => p.laplacian_value > 0.0,
        };
        if negative && !p.degenerate {
            m[4 - p.morse_index] += 1;
        }
    }
    let recursion = k_recursion(&m);
    let feasible = feasible_by_recursion(&m);
    MorseReport {
        points: points.to_vec(),
        m,
        recursion,
        k: feasible.then(|| [recursion[0], recursion[1], recursion[2], recursion[3], 0]),
        feasible,
        condition_satisfied: !feasible,
        degree_sum: degree_sum_of(&m),
        hypothesis_violations: violations,
    }
}

pub fn check_prescribed(f: &SpectralField, opts: &MorseOptions) -> Result<MorseReport> {
    Ok(build_report(&find_critical_points(f, opts)?, opts))
}

fn format_point(x: &[f64; 5]) -> String {
    let parts: Vec<String> = x.iter().map(|v| format!("{:.9}", if v.abs() < 5e-10 { 0.0 } else { *v })).collect();
    format!("({})", parts.join(", "))
}

impl MorseReport {
    /// Structured text: one line per point, then the counts and the verdict.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for p in &self.points {
            out.push_str(&format!(
                "point {} value {:.12} index {} laplacian {:.12}{}\n",
                format_point(&p.location),
                p.f_value,
                p.morse_index,
                p.laplacian_value,
                if p.degenerate { " degenerate" } else { "" }
            ));
        }
        let m: Vec<String> = self.m.iter().map(|v| v.to_string()).collect();
        out.push_str(&format!("m {}\n", m.join(" ")));
        match &self.k {
            Some(k) => {
                let k: Vec<String> = k.iter().map(|v| v.to_string()).collect();
                out.push_str(&format!("k {}\n", k.join(" ")));
            }
            None => {
                let r: Vec<String> = self.recursion.iter().map(|v| v.to_string()).collect();
                out.push_str(&format!("k INFEASIBLE (recursion {})\n", r.join(" ")));
            }
        }
        out.push_str(&format!("degree_sum {}\n", self.degree_sum));
        for v in &self.hypothesis_violations {
            out.push_str(&format!("violation {v}\n"));
        }
        let verdict = if !self.hypothesis_violations.is_empty() {
            "HYPOTHESES_VIOLATED"
        } else if self.condition_satisfied {
            "CONDITION_SATISFIED"
        } else {
            "CONDITION_FAILS"
        };
        out.push_str(&format!("verdict {verdict}\n"));
        out
    }
}
