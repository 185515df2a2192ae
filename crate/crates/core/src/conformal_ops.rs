//! Conformal metrics `g = e^{2u} c` on the round S⁴: Q-curvature, volume,
//! the normalizer α and the energies driving the flow.
//!
//! Integrals are taken against `dc = dv_c / (8π²/3)` internally; values
//! reported against `dv_c` carry the single factor [`VOLUME_S4`].

use std::f64::consts::PI;

use crate::error::{QflowError, Result};
use crate::s4_spectral::ops::EXP_LIMIT;
use crate::s4_spectral::{
    apply_paneitz, newton_critical, paneitz_eigenvalue, GridField, NewtonOptions, SpectralField, SphereTransform,
    VOLUME_S4,
};

/// Chern–Gauss–Bonnet total `∫ Q_g dv_g` on S⁴.
pub const GAUSS_BONNET_TOTAL: f64 = 8.0 * PI * PI;

/// Q-curvature of the round metric.
pub const ROUND_Q: f64 = 3.0;

/// A prescribed function with its nodal values and extrema.
#[derive(Debug, Clone)]
pub struct PrescribedFunction {
    f: SpectralField,
    f_grid: GridField,
    max_f: f64,
    min_f: f64,
}

impl PrescribedFunction {
    /// Builds `f` on the plan grid. Extrema are located on the grid and then
    /// polished by Newton iteration on the exact expansion.
    pub fn new(plan: &SphereTransform, f: SpectralField) -> Result<Self> {
        if !f.is_finite() {
            return Err(QflowError::Config("prescribed function has non-finite coefficients".into()));
        }
        let f_grid = plan.synthesize(&f)?;
        let (max_f, min_f) = refined_extrema(&f, &f_grid);
        if max_f <= 0.0 {
            return Err(QflowError::NotPositiveSomewhere(max_f));
        }
        Ok(PrescribedFunction { f, f_grid, max_f, min_f })
    }

    pub fn field(&self) -> &SpectralField {
        &self.f
    }

    pub fn grid_values(&self) -> &GridField {
        &self.f_grid
    }

    pub fn max(&self) -> f64 {
        self.max_f
    }

    pub fn min(&self) -> f64 {
        self.min_f
    }

    pub fn is_constant(&self) -> bool {
        self.f.effective_degree() == 0
    }
}

fn refined_extrema(f: &SpectralField, f_grid: &GridField) -> (f64, f64) {
    let vals = f_grid.values();
    let nodes = f_grid.grid().nodes();
    let arg = |better: fn(f64, f64) -> bool| {
        let mut best = 0;
        for (i, &v) in vals.iter().enumerate() {
            if better(v, vals[best]) {
                best = i;
            }
        }
        best
    };
    let imax = arg(|a, b| a > b);
    let imin = arg(|a, b| a < b);
    if f.effective_degree() == 0 {
        return (f.mean(), f.mean());
    }
    let mut ev = crate::s4_spectral::Evaluator::new(f);
    let mut eval = |x: &[f64; 5]| ev.eval(x);
    let opts = NewtonOptions::default();
    let mut polish = |i: usize, pick: fn(f64, f64) -> f64| {
        let found = newton_critical(&mut eval, nodes[i], &opts);
        if found.converged {
            pick(vals[i], found.derivatives.value)
        } else {
            vals[i]
        }
    };
    (polish(imax, f64::max), polish(imin, f64::min))
}

/// Liouville energy `E(u) = ∫ (u P_c u + 12 u) dc`, evaluated on coefficients.
pub fn liouville_energy(u: &SpectralField) -> f64 {
    let mut quad = 0.0;
    for k in 1..=u.band_limit() {
        let block: f64 = u.degree_block(k).iter().map(|c| c * c).sum();
        quad += paneitz_eigenvalue(k) * block;
    }
    quad + 12.0 * u.mean()
}

/// `(H¹ norm)² = ∫ (|∇u|² + u²) dc` on coefficients.
pub fn h1_norm_sq(u: &SpectralField) -> f64 {
    (0..=u.band_limit())
        .map(|k| (1.0 + (k * (k + 3)) as f64) * u.degree_block(k).iter().map(|c| c * c).sum::<f64>())
        .sum()
}

/// Largest exponent appearing in `e^{±4u}`; errors past the overflow guard.
fn check_exponent(u_grid: &GridField) -> Result<()> {
    let worst = 4.0 * u_grid.max().max(-u_grid.min());
    if !worst.is_finite() || worst > EXP_LIMIT {
        return Err(QflowError::Overflow(worst));
    }
    Ok(())
}

/// Nodal Q-curvature `½ e^{-4u} (P_c u + 6)` on the plan grid.
pub fn q_curvature(plan: &SphereTransform, u: &SpectralField) -> Result<GridField> {
    let u_grid = plan.synthesize(u)?;
    check_exponent(&u_grid)?;
    let pu = plan.synthesize(&apply_paneitz(u))?;
    Ok(u_grid.zip_map(&pu, |v, p| 0.5 * (-4.0 * v).exp() * (p + 6.0)))
}

/// `∫ e^{4u} dv_c`.
pub fn volume(plan: &SphereTransform, u: &SpectralField) -> Result<f64> {
    let u_grid = plan.synthesize(u)?;
    check_exponent(&u_grid)?;
    let v = u_grid.values();
    Ok(VOLUME_S4 * plan.grid().integrate_dc_by(|i| (4.0 * v[i]).exp()))
}

/// `∫ f e^{4u} dc`.
fn weighted_exp_integral(plan: &SphereTransform, u: &SpectralField, f: &PrescribedFunction) -> Result<f64> {
    let u_grid = plan.synthesize(u)?;
    check_exponent(&u_grid)?;
    let (v, fv) = (u_grid.values(), f.grid_values().values());
    Ok(plan.grid().integrate_dc_by(|i| fv[i] * (4.0 * v[i]).exp()))
}

fn alpha_from(f_integral_dc: f64) -> Result<f64> {
    if !(f_integral_dc > 0.0) {
        return Err(QflowError::NonAdmissible(VOLUME_S4 * f_integral_dc));
    }
    Ok(3.0 / f_integral_dc)
}

/// `α = 8π² / ∫ f e^{4u} dv_c`.
pub fn compute_alpha(plan: &SphereTransform, u: &SpectralField, f: &PrescribedFunction) -> Result<f64> {
    alpha_from(weighted_exp_integral(plan, u, f)?)
}

/// `E_f(u) = E(u) − 3 log ∫ f e^{4u} dc`.
pub fn flow_energy(plan: &SphereTransform, u: &SpectralField, f: &PrescribedFunction) -> Result<f64> {
    let fi = weighted_exp_integral(plan, u, f)?;
    alpha_from(fi)?;
    Ok(liouville_energy(u) - 3.0 * fi.ln())
}

/// `E(u) − 3 log ∫ e^{4u} dc`, nonnegative by Beckner's inequality.
pub fn beckner_gap(plan: &SphereTransform, u: &SpectralField) -> Result<f64> {
    Ok(liouville_energy(u) - 3.0 * (volume(plan, u)? / VOLUME_S4).ln())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Energies {
    /// Liouville energy `E`.
    pub liouville: f64,
    /// Flow energy `E_f`.
    pub flow: f64,
    pub beckner_gap: f64,
    /// `∫ (αf − Q)² dv_g`.
    pub calabi: f64,
}

/// The conformal factor at one flow time with every derived quantity cached
/// on the plan grid.
#[derive(Debug, Clone)]
pub struct ConformalState {
    u: SpectralField,
    u_grid: GridField,
    exp4u: GridField,
    q_grid: GridField,
    q_coeffs: SpectralField,
    q_tail: f64,
    volume: f64,
    f_integral: f64,
    alpha: f64,
    energies: Energies,
}

impl ConformalState {
    pub fn new(plan: &SphereTransform, u: SpectralField, f: &PrescribedFunction) -> Result<Self> {
        if !u.is_finite() {
            return Err(QflowError::Overflow(f64::NAN));
        }
        let u_grid = plan.synthesize(&u)?;
        check_exponent(&u_grid)?;
        let pu = plan.synthesize(&apply_paneitz(&u))?;
        let exp4u = u_grid.map(|v| (4.0 * v).exp());
        let q_grid = exp4u.zip_map(&pu, |e, p| 0.5 * (p + 6.0) / e);
        let grid = plan.grid().clone();
        let (e, q, fv) = (exp4u.values(), q_grid.values(), f.grid_values().values());
        let volume_dc = grid.integrate_dc(e);
        let f_integral = grid.integrate_dc_by(|i| fv[i] * e[i]);
        let alpha = alpha_from(f_integral)?;
        let calabi = VOLUME_S4
            * grid.integrate_dc_by(|i| {
                let r = alpha * fv[i] - q[i];
                r * r * e[i]
            });
        let (q_coeffs, q_tail) = plan.tail_fraction(q);
        let liouville = liouville_energy(&u);
        let energies = Energies {
            liouville,
            flow: liouville - 3.0 * f_integral.ln(),
            beckner_gap: liouville - 3.0 * volume_dc.ln(),
            calabi,
        };
        Ok(ConformalState {
            u,
            u_grid,
            exp4u,
            q_grid,
            q_coeffs,
            q_tail,
            volume: VOLUME_S4 * volume_dc,
            f_integral,
            alpha,
            energies,
        })
    }

    pub fn u(&self) -> &SpectralField {
        &self.u
    }

    pub fn into_u(self) -> SpectralField {
        self.u
    }

    pub fn u_grid(&self) -> &GridField {
        &self.u_grid
    }

    pub fn exp4u(&self) -> &GridField {
        &self.exp4u
    }

    pub fn q_grid(&self) -> &GridField {
        &self.q_grid
    }

    /// Coefficients of Q up to the band limit.
    pub fn q_coeffs(&self) -> &SpectralField {
        &self.q_coeffs
    }

    /// Fraction of `∫ Q² dc` beyond the band limit.
    pub fn q_tail(&self) -> f64 {
        self.q_tail
    }

    /// `∫ e^{4u} dv_c`.
    pub fn volume(&self) -> f64 {
        self.volume
    }

    /// `∫ f e^{4u} dv_c`.
    pub fn admissibility(&self) -> f64 {
        VOLUME_S4 * self.f_integral
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn energies(&self) -> &Energies {
        &self.energies
    }

    /// Right-hand side of the α evolution, `4α ∫(Q − αf) f dv_g / ∫ f dv_g`.
    pub fn alpha_rate(&self, f: &PrescribedFunction) -> f64 {
        let (q, e, fv) = (self.q_grid.values(), self.exp4u.values(), f.grid_values().values());
        let a = self.alpha;
        let num = self.q_grid.grid().integrate_dc_by(|i| (q[i] - a * fv[i]) * fv[i] * e[i]);
        4.0 * a * num / self.f_integral
    }

    /// State of `u + c` for a constant `c`, using `Q(u + c) = e^{−4c} Q(u)`.
    pub fn shifted(self, c: f64) -> Result<Self> {
        let mut u = self.u;
        u.coeffs_mut()[0] += c;
        let u_grid = self.u_grid.map(|v| v + c);
        check_exponent(&u_grid)?;
        let (up, down) = ((4.0 * c).exp(), (-4.0 * c).exp());
        let f_integral = self.f_integral * up;
        let alpha = alpha_from(f_integral)?;
        let volume = self.volume * up;
        let liouville = liouville_energy(&u);
        Ok(ConformalState {
            energies: Energies {
                liouville,
                flow: liouville - 3.0 * f_integral.ln(),
                beckner_gap: liouville - 3.0 * (volume / VOLUME_S4).ln(),
                calabi: self.energies.calabi * down,
            },
            u,
            u_grid,
            exp4u: self.exp4u.map(|e| e * up),
            q_grid: self.q_grid.map(|q| q * down),
            q_coeffs: self.q_coeffs.scaled(down),
            q_tail: self.q_tail,
            volume,
            f_integral,
            alpha,
        })
    }

    /// `∫ e^{4|u|} dc`.
    pub fn exp_abs_integral(&self) -> f64 {
        let v = self.u_grid.values();
        self.u_grid.grid().integrate_dc_by(|i| (4.0 * v[i].abs()).exp())
    }
}

/// `∫ Q e^{4u} dv_c`; equals 8π² for every resolved state.
pub fn total_q(state: &ConformalState) -> f64 {
    let (q, e) = (state.q_grid.values(), state.exp4u.values());
    VOLUME_S4 * state.q_grid.grid().integrate_dc_by(|i| q[i] * e[i])
}

pub fn calabi_energy(state: &ConformalState) -> f64 {
    state.energies.calabi
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaBounds {
    pub lower: f64,
    pub upper: f64,
    pub ok: bool,
}

/// `3 / max f ≤ α ≤ 3 e^{E_f(u₀)/3}` for volume-normalized states.
pub fn alpha_bounds_check(state: &ConformalState, f: &PrescribedFunction, flow_energy_initial: f64) -> AlphaBounds {
    alpha_bounds(state.alpha, f.max(), flow_energy_initial)
}

pub fn alpha_bounds(alpha: f64, max_f: f64, flow_energy_initial: f64) -> AlphaBounds {
    let lower = 3.0 / max_f;
    let upper = 3.0 * (flow_energy_initial / 3.0).exp();
    let ok = alpha >= lower - 1e-9 * (1.0 + lower.abs()) && alpha <= upper + 1e-9 * (1.0 + upper.abs());
    AlphaBounds { lower, upper, ok }
}
