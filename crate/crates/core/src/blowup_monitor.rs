//! Concentration diagnostics: smallest balls carrying a fixed amount of
//! `|Q|`-mass, point-mass detection, and radial bubble profiles in a
//! stereographic chart.
//!
//! Ball masses of spectral states are exact for any center and radius: the
//! density's degree components at the center are integrated against the cap
//! integrals of the zonal harmonics. Measures given only by nodal values use
//! closed balls over grid nodes.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

use crate::conformal_ops::ConformalState;
use crate::error::{QflowError, Result};
use crate::mobius_gauge::MobiusBoost;
use crate::s4_spectral::chart::{dot, TangentChart};
use crate::s4_spectral::{
    apply_paneitz, cap_integrals, zonal_profile, Evaluator, QuadratureGrid, SpectralField, SphereTransform, VOLUME_S4,
};

/// `|Q|`-mass a ball must carry in a concentration scan.
pub const CONCENTRATION_THRESHOLD: f64 = 2.0 * PI * PI;

/// Radius resolution of scans over nodal measures.
const NODAL_RADIUS_STEP: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BallWeight {
    /// `e^{4u} dv_c`.
    Volume,
    /// `|Q| e^{4u} dv_c`.
    AbsQ,
}

/// A pair of measures on S⁴: the volume `dv_g` and `|Q| dv_g`.
#[derive(Debug, Clone)]
pub enum MassField {
    /// Densities as expansions, with a coarse grid supplying candidate centers.
    Spectral {
        volume: SpectralField,
        abs_q: SpectralField,
        evaluators: RefCell<(Evaluator, Evaluator)>,
        candidates: Arc<QuadratureGrid>,
    },
    /// Point masses at grid nodes (already multiplied by quadrature weights).
    Nodal {
        grid: Arc<QuadratureGrid>,
        volume: Vec<f64>,
        abs_q: Vec<f64>,
    },
}

/// Component values of a density at one center, ready for cap integration.
struct CenterProfile {
    volume: Vec<f64>,
    abs_q: Vec<f64>,
}

impl MassField {
    /// Densities of a cached state, analyzed to the plan band limit.
    pub fn from_state(plan: &SphereTransform, state: &ConformalState) -> Self {
        let e = state.exp4u().values();
        let abs_q: Vec<f64> = state.q_grid().values().iter().zip(e).map(|(q, e)| (q * e).abs()).collect();
        Self::spectral(plan.analyze_values(e), plan.analyze_values(&abs_q))
    }

    fn spectral(volume: SpectralField, abs_q: SpectralField) -> Self {
        MassField::Spectral {
            evaluators: RefCell::new((Evaluator::new(&volume), Evaluator::new(&abs_q))),
            volume,
            abs_q,
            candidates: Arc::new(QuadratureGrid::with_resolution(8)),
        }
    }

    /// Densities of `u` computed on the plan grid.
    pub fn from_field(plan: &SphereTransform, u: &SpectralField) -> Result<Self> {
        let ug = plan.synthesize(u)?;
        let worst = 4.0 * ug.max().max(-ug.min());
        if worst > crate::s4_spectral::ops::EXP_LIMIT {
            return Err(QflowError::Overflow(worst));
        }
        let pu = plan.synthesize(&apply_paneitz(u))?;
        let e: Vec<f64> = ug.values().iter().map(|v| (4.0 * v).exp()).collect();
        // |Q| e^{4u} = |P u + 6| / 2
        let abs_q: Vec<f64> = pu.values().iter().map(|p| 0.5 * (p + 6.0).abs()).collect();
        Ok(Self::spectral(plan.analyze_values(&e), plan.analyze_values(&abs_q)))
    }

    /// Nodal measures with densities `e^{4u}` and `|Q| e^{4u}` given at nodes,
    /// rescaled so the volume totals `target_volume` when given.
    pub fn from_nodal(grid: Arc<QuadratureGrid>, exp4u: &[f64], q: &[f64], target_volume: Option<f64>) -> Self {
        let mut volume: Vec<f64> = (0..grid.len()).map(|i| grid.weight(i) * exp4u[i]).collect();
        let mut abs_q: Vec<f64> = volume.iter().zip(q).map(|(m, q)| m * q.abs()).collect();
        if let Some(target) = target_volume {
            let total: f64 = volume.iter().sum();
            let s = target / total;
            volume.iter_mut().for_each(|m| *m *= s);
            abs_q.iter_mut().for_each(|m| *m *= s);
        }
        MassField::Nodal { grid, volume, abs_q }
    }

    /// Round metric pulled back by a boost, from exact nodal values of the
    /// conformal factor (`Q ≡ 3`), normalized to the round volume.
    pub fn boosted_round(grid: Arc<QuadratureGrid>, boost: &MobiusBoost) -> Self {
        let e: Vec<f64> = grid.nodes().iter().map(|x| (4.0 * boost.factor(x)).exp()).collect();
        let q = vec![3.0; grid.len()];
        Self::from_nodal(grid, &e, &q, Some(VOLUME_S4))
    }

    pub fn total(&self, weight: BallWeight) -> f64 {
        match self {
            MassField::Spectral { volume, abs_q, .. } => {
                VOLUME_S4
                    * match weight {
                        BallWeight::Volume => volume.mean(),
                        BallWeight::AbsQ => abs_q.mean(),
                    }
            }
            MassField::Nodal { volume, abs_q, .. } => match weight {
                BallWeight::Volume => volume.iter().sum(),
                BallWeight::AbsQ => abs_q.iter().sum(),
            },
        }
    }

    fn profile(&self, center: &[f64; 5]) -> Option<CenterProfile> {
        let MassField::Spectral { evaluators, .. } = self else {
            return None;
        };
        let comps = |ev: &mut Evaluator| {
            let mut out = vec![0.0; ev.degree() + 1];
            ev.eval_by_degree(center, &mut out);
            out
        };
        let mut evs = evaluators.borrow_mut();
        Some(CenterProfile {
            volume: comps(&mut evs.0),
            abs_q: comps(&mut evs.1),
        })
    }

    /// Mass of the closed geodesic ball `B(center, radius)`.
    pub fn ball(&self, center: &[f64; 5], radius: f64, weight: BallWeight) -> f64 {
        match self {
            MassField::Spectral { .. } => {
                let p = self.profile(center).expect("spectral field");
                spectral_ball(&p, radius, weight)
            }
            MassField::Nodal { grid, volume, abs_q } => {
                let m = match weight {
                    BallWeight::Volume => volume,
                    BallWeight::AbsQ => abs_q,
                };
                let c = radius.cos();
                let mut acc = 0.0;
                for (x, w) in grid.nodes().iter().zip(m) {
                    if radius >= PI || dot(x, center) >= c {
                        acc += w;
                    }
                }
                acc
            }
        }
    }

    /// Smallest radius with ball mass at least `threshold` around `center`.
    fn radius_reaching(&self, center: &[f64; 5], threshold: f64, weight: BallWeight) -> f64 {
        match self {
            MassField::Spectral { .. } => {
                let p = self.profile(center).expect("spectral field");
                let (mut lo, mut hi) = (0.0, PI);
                if spectral_ball(&p, hi, weight) < threshold {
                    return PI;
                }
                while hi - lo > 1e-10 {
                    let mid = 0.5 * (lo + hi);
                    if spectral_ball(&p, mid, weight) >= threshold {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                hi
            }
            MassField::Nodal { grid, volume, abs_q } => {
                let m = match weight {
                    BallWeight::Volume => volume,
                    BallWeight::AbsQ => abs_q,
                };
                // histogram in geodesic radius; report the upper edge of the crossing bin
                let nbins = (PI / NODAL_RADIUS_STEP).ceil() as usize + 1;
                let mut bins = vec![0.0; nbins];
                for (x, &w) in grid.nodes().iter().zip(m) {
                    if w > 0.0 {
                        let r = dot(x, center).clamp(-1.0, 1.0).acos();
                        bins[((r / NODAL_RADIUS_STEP) as usize).min(nbins - 1)] += w;
                    }
                }
                let mut acc = 0.0;
                for (b, w) in bins.iter().enumerate() {
                    acc += w;
                    if acc >= threshold {
                        return ((b + 1) as f64 * NODAL_RADIUS_STEP).min(PI);
                    }
                }
                PI
            }
        }
    }

    fn candidate_centers(&self) -> Vec<[f64; 5]> {
        match self {
            MassField::Spectral { candidates, .. } => candidates.nodes().to_vec(),
            MassField::Nodal { grid, abs_q, .. } => {
                // heaviest nodes plus a strided sample of the rest
                let mut order: Vec<usize> = (0..grid.len()).collect();
                order.sort_by(|&a, &b| abs_q[b].total_cmp(&abs_q[a]).then(a.cmp(&b)));
                let mut picks: Vec<usize> = order.iter().take(64).copied().collect();
                let stride = (grid.len() / 128).max(1);
                picks.extend((0..grid.len()).step_by(stride));
                picks.sort_unstable();
                picks.dedup();
                picks.into_iter().map(|i| grid.node(i)).collect()
            }
        }
    }
}

fn spectral_ball(p: &CenterProfile, radius: f64, weight: BallWeight) -> f64 {
    let comps = match weight {
        BallWeight::Volume => &p.volume,
        BallWeight::AbsQ => &p.abs_q,
    };
    let r = radius.clamp(0.0, PI);
    let ik = cap_integrals(comps.len() - 1, r);
    VOLUME_S4 * 0.75 * comps.iter().zip(&ik).map(|(a, i)| a * i).sum::<f64>()
}

/// `mass_in_ball` on a field's own densities.
pub fn mass_in_ball(field: &MassField, center: &[f64; 5], radius: f64, weight: BallWeight) -> Result<f64> {
    if !(radius > 0.0 && radius <= PI) {
        return Err(QflowError::Config(format!("ball radius {radius} outside (0, π]")));
    }
    Ok(field.ball(center, radius, weight))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConcentrationScan {
    /// Geodesic radius in radians.
    pub radius: f64,
    pub center: [f64; 5],
    /// Volume in the ball.
    pub mass_at_center: f64,
    /// `|Q|`-mass in the ball.
    pub q_mass_at_center: f64,
    /// Volume in the concentric ball of radius `5 · radius`.
    pub mass_within_5r: f64,
    /// False when the total `|Q|`-mass is below the threshold.
    pub reached: bool,
}

/// Smallest ball carrying `threshold` of `|Q|`-mass, over candidate centers
/// with local refinement of the best ones.
pub fn concentration_scan(field: &MassField, threshold: f64) -> ConcentrationScan {
    let centers = field.candidate_centers();
    let radii: Vec<f64> = centers
        .iter()
        .map(|c| field.radius_reaching(c, threshold, BallWeight::AbsQ))
        .collect();
    let mut order: Vec<usize> = (0..centers.len()).collect();
    order.sort_by(|&a, &b| radii[a].total_cmp(&radii[b]).then(a.cmp(&b)));
    let (mut best_c, mut best_r) = (centers[order[0]], radii[order[0]]);
    if best_r < PI && matches!(field, MassField::Spectral { .. }) {
        for &i in order.iter().take(3) {
            let (c, r) = refine_center(field, centers[i], radii[i], threshold);
            if r < best_r {
                best_c = c;
                best_r = r;
            }
        }
    }
    let reached = best_r < PI || field.total(BallWeight::AbsQ) >= threshold;
    ConcentrationScan {
        radius: best_r,
        center: best_c,
        mass_at_center: field.ball(&best_c, best_r, BallWeight::Volume),
        q_mass_at_center: field.ball(&best_c, best_r, BallWeight::AbsQ),
        mass_within_5r: field.ball(&best_c, (5.0 * best_r).min(PI), BallWeight::Volume),
        reached,
    }
}

/// Compass search in normal coordinates minimizing the threshold radius.
fn refine_center(field: &MassField, start: [f64; 5], r0: f64, threshold: f64) -> ([f64; 5], f64) {
    let (mut c, mut r) = (start, r0);
    let mut step = 0.1;
    while step > 1e-5 {
        let chart = TangentChart::at(c);
        let mut moved = false;
        for dir in 0..4 {
            for sgn in [1.0, -1.0] {
                let mut xi = [0.0; 4];
                xi[dir] = sgn * step;
                let trial = chart.point(&xi);
                let rt = field.radius_reaching(&trial, threshold, BallWeight::AbsQ);
                if rt < r - 1e-12 {
                    c = trial;
                    r = rt;
                    moved = true;
                }
            }
        }
        if !moved {
            step *= 0.5;
        }
    }
    (c, r)
}

#[derive(Debug, Clone, Copy)]
pub struct DetectConfig {
    pub radius_tol: f64,
    pub mass_frac: f64,
    pub window: usize,
}

impl Default for DetectConfig {
    fn default() -> Self {
        DetectConfig {
            radius_tol: 0.05,
            mass_frac: 0.9,
            window: 3,
        }
    }
}

/// Concentration point when the recent scans show a shrinking ball holding
/// almost all of the volume.
pub fn detect(scans: &[ConcentrationScan], cfg: &DetectConfig) -> Option<[f64; 5]> {
    let window = cfg.window.max(3);
    if scans.len() < window {
        return None;
    }
    let recent = &scans[scans.len() - window..];
    let last = recent[window - 1];
    let shrinking = recent.windows(2).all(|w| w[1].radius <= w[0].radius + 1e-12);
    (last.reached && last.radius <= cfg.radius_tol && last.mass_within_5r >= cfg.mass_frac * VOLUME_S4 && shrinking)
        .then_some(last.center)
}

#[derive(Debug, Clone)]
pub struct BubbleProfile {
    /// Chart radii `|z|`.
    pub radii: Vec<f64>,
    /// Spherical averages `ū(|z|)` of `û = u∘π⁻¹ + log(2/(1+|z|²))`.
    pub values: Vec<f64>,
    /// `|Δ_r² ū − 6 e^{4ū}|` at interior radii.
    pub residuals: Vec<f64>,
    pub residual: f64,
}

/// Radial profile of `u` in the stereographic chart sending `q` to the origin
/// and the residual of the flat limit equation `Δ² û = 6 e^{4û}`.
///
/// Averages over chart spheres come from the degree components of `u` at `q`
/// (Funk–Hecke), so they are exact for band-limited `u`.
pub fn bubble_profile(u: &SpectralField, q: &[f64; 5], n_samples: usize, chart_radius: f64) -> Result<BubbleProfile> {
    let reach = 2.0 * chart_radius.atan();
    if reach > PI - 0.1 {
        return Err(QflowError::Config(format!(
            "chart radius {chart_radius} reaches geodesic distance {reach:.3} > π − 0.1"
        )));
    }
    if n_samples < 3 {
        return Err(QflowError::Config("bubble profile needs at least 3 samples".into()));
    }
    let mut ev = Evaluator::new(u);
    let mut comps = vec![0.0; ev.degree() + 1];
    ev.eval_by_degree(q, &mut comps);
    let ubar = |r: f64| {
        let s = (1.0 - r * r) / (1.0 + r * r);
        let p = zonal_profile(comps.len() - 1, s);
        comps.iter().zip(&p).map(|(a, b)| a * b).sum::<f64>() + (2.0 / (1.0 + r * r)).ln()
    };
    let h = 0.004;
    let radial_laplacian = |g: &dyn Fn(f64) -> f64, r: f64| {
        let (p1, m1, p2, m2) = (g(r + h), g(r - h), g(r + 2.0 * h), g(r - 2.0 * h));
        let d1 = (8.0 * (p1 - m1) - (p2 - m2)) / (12.0 * h);
        let d2 = (16.0 * (p1 + m1) - (p2 + m2) - 30.0 * g(r)) / (12.0 * h * h);
        d2 + 3.0 * d1 / r
    };
    let lap = |r: f64| radial_laplacian(&ubar, r);
    let radii: Vec<f64> = (0..=n_samples).map(|i| chart_radius * i as f64 / n_samples as f64).collect();
    let values: Vec<f64> = radii.iter().map(|&r| ubar(r)).collect();
    let mut residuals = Vec::with_capacity(n_samples);
    for (&r, &v) in radii.iter().zip(&values).skip(1).take(n_samples - 1) {
        // the stencil of Δ_r near r = 0 uses the even extension ū(−r) = ū(r)
        if r < 4.0 * h {
            continue;
        }
        let bilap = radial_laplacian(&|x: f64| lap(x.abs()), r);
        residuals.push((bilap - 6.0 * (4.0 * v).exp()).abs());
    }
    let residual = residuals.iter().copied().fold(0.0, f64::max);
    Ok(BubbleProfile {
        radii,
        values,
        residuals,
        residual,
    })
}
