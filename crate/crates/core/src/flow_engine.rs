//! Time integration of `u_t = αf − Q` with energy-monotone step acceptance
//! and the diagnostics stream.

use std::f64::consts::PI;

use crate::blowup_monitor::{concentration_scan, detect, ConcentrationScan, DetectConfig, MassField, CONCENTRATION_THRESHOLD};
use crate::conformal_ops::{h1_norm_sq, total_q, alpha_bounds_check, ConformalState, PrescribedFunction, GAUSS_BONNET_TOTAL};
use crate::error::{QflowError, Result};
use crate::mobius_gauge::{normalize_with, pushforward_com, GaugeOptions};
use crate::s4_spectral::{
    apply_paneitz, degree_dim, degree_offset, paneitz_eigenvalue, GridSpec, SpectralField, SphereTransform, DEFAULT_TAIL_TOL, TAIL_ABORT, VOLUME_S4,
};

/// Dissipation constant in `∂_t E_f = −(3/2π²) ∫|αf − Q|² dv_g`.
pub const DISSIPATION: f64 = 3.0 / (2.0 * PI * PI);

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SigmaPolicy {
    /// `σ = ½ max e^{−4u}` at every step.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowConfig {
    pub grid: GridSpec,
    pub dt_init: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub t_max: f64,
    pub sigma_policy: SigmaPolicy,
    pub tol_calabi: f64,
    pub snapshot_every: usize,
    pub gauge_tol: f64,
    pub tail_tol: f64,
    pub conc_threshold: f64,
    pub conc_radius_tol: f64,
    pub conc_mass_frac: f64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            grid: GridSpec::default(),
            dt_init: 1e-3,
            dt_min: 1e-8,
            dt_max: 1e-1,
            t_max: 200.0,
            sigma_policy: SigmaPolicy::Auto,
            tol_calabi: 1e-8,
            snapshot_every: 20,
            gauge_tol: 1e-10,
            tail_tol: DEFAULT_TAIL_TOL,
            conc_threshold: CONCENTRATION_THRESHOLD,
            conc_radius_tol: 0.05,
            conc_mass_frac: 0.9,
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        let bad = |msg: &str| Err(QflowError::Config(msg.to_string()));
        let positive = [self.dt_init, self.dt_min, self.dt_max, self.t_max, self.tol_calabi, self.gauge_tol, self.tail_tol];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return bad("dt_init, dt_min, dt_max, t_max, tol_calabi, gauge_tol and tail_tol must be positive and finite");
        }
        if !(self.dt_min <= self.dt_init && self.dt_init <= self.dt_max) {
            return bad("need dt_min <= dt_init <= dt_max");
        }
        if self.snapshot_every == 0 {
            return bad("snapshot_every must be at least 1");
        }
        if let SigmaPolicy::Fixed(s) = self.sigma_policy {
            if !(s.is_finite() && s >= 0.0) {
                return bad("fixed sigma must be finite and non-negative");
            }
        }
        if !(self.conc_threshold > 0.0 && self.conc_radius_tol > 0.0 && self.conc_mass_frac > 0.0 && self.conc_mass_frac <= 1.0) {
            return bad("concentration thresholds must be positive (mass fraction at most 1)");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowTraceRow {
    pub t: f64,
    pub dt: f64,
    pub alpha: f64,
    pub e: f64,
    pub e_f: f64,
    pub volume: f64,
    pub calabi: f64,
    pub beckner_gap: f64,
    /// `∫Q dv_g / 8π² − 1`.
    pub gb_residual: f64,
    pub com_norm: f64,
    pub h1_v: f64,
    /// `∫ e^{4|u|} dc`.
    pub exp_integral: f64,
    pub conc_radius: f64,
    pub conc_mass: f64,
    pub q_min: f64,
    pub q_max: f64,
}

impl FlowTraceRow {
    pub const HEADER: [&'static str; 16] = [
        "t",
        "dt",
        "alpha",
        "E",
        "E_f",
        "volume",
        "calabi",
        "beckner_gap",
        "gb_residual",
        "com_norm",
        "h1_v",
        "exp_integral",
        "conc_radius",
        "conc_mass",
        "q_min",
        "q_max",
    ];

    pub fn values(&self) -> [f64; 16] {
        [
            self.t,
            self.dt,
            self.alpha,
            self.e,
            self.e_f,
            self.volume,
            self.calabi,
            self.beckner_gap,
            self.gb_residual,
            self.com_norm,
            self.h1_v,
            self.exp_integral,
            self.conc_radius,
            self.conc_mass,
            self.q_min,
            self.q_max,
        ]
    }

    pub fn from_values(v: [f64; 16]) -> Self {
        FlowTraceRow {
            t: v[0],
            dt: v[1],
            alpha: v[2],
            e: v[3],
            e_f: v[4],
            volume: v[5],
            calabi: v[6],
            beckner_gap: v[7],
            gb_residual: v[8],
            com_norm: v[9],
            h1_v: v[10],
            exp_integral: v[11],
            conc_radius: v[12],
            conc_mass: v[13],
            q_min: v[14],
            q_max: v[15],
        }
    }

    pub fn csv_header() -> String {
        Self::HEADER.join(",")
    }

    /// Shortest round-trip decimal for every column.
    pub fn to_csv(&self) -> String {
        self.values().iter().map(|v| format!("{v:e}")).collect::<Vec<_>>().join(",")
    }
}

/// Per accepted step (and the initial state).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub t: f64,
    pub dt: f64,
    pub alpha: f64,
    pub e_f: f64,
    pub calabi: f64,
    pub admissibility: f64,
    pub volume: f64,
    /// Relative volume change of the step before renormalization.
    pub volume_drift: f64,
    /// `4α ∫(Q − αf) f dv_g / ∫ f dv_g`.
    pub alpha_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerdictKind {
    Converged,
    Concentrated,
    TimeExhausted,
    Failed,
}

impl VerdictKind {
    pub fn name(self) -> &'static str {
        match self {
            VerdictKind::Converged => "Converged",
            VerdictKind::Concentrated => "Concentrated",
            VerdictKind::TimeExhausted => "TimeExhausted",
            VerdictKind::Failed => "Failed",
        }
    }
}

#[derive(Debug, Clone)]
pub struct FlowVerdict {
    pub kind: VerdictKind,
    pub final_u: SpectralField,
    pub final_alpha: f64,
    pub final_t: f64,
    pub concentration_point: Option<[f64; 5]>,
    pub trace: Vec<FlowTraceRow>,
    pub steps: Vec<StepRecord>,
    pub accepted: usize,
    pub rejected: usize,
    pub initial_flow_energy: f64,
    pub warnings: Vec<String>,
    pub failure: Option<String>,
}

/// Passed to the run observer after every trace row.
pub struct Snapshot<'a> {
    pub step: usize,
    pub t: f64,
    pub alpha: f64,
    pub u: &'a SpectralField,
    pub row: &'a FlowTraceRow,
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub state: ConformalState,
    pub accepted: bool,
    pub sigma: f64,
}

/// Owns the transform plans of one run configuration.
pub struct FlowEngine {
    config: FlowConfig,
    plan: SphereTransform,
    compose: SphereTransform,
}

impl FlowEngine {
    pub fn new(config: FlowConfig) -> Result<Self> {
        config.validate()?;
        let plan = SphereTransform::new(&config.grid)?;
        let compose = SphereTransform::new(&GridSpec::new(config.grid.band_limit, 1)?)?;
        Ok(FlowEngine { config, plan, compose })
    }

    pub fn config(&self) -> &FlowConfig {
        &self.config
    }

    pub fn plan(&self) -> &SphereTransform {
        &self.plan
    }

    pub fn compose_plan(&self) -> &SphereTransform {
        &self.compose
    }

    pub fn prescribe(&self, f: SpectralField) -> Result<PrescribedFunction> {
        PrescribedFunction::new(&self.plan, f)
    }

    pub fn state(&self, u: SpectralField, f: &PrescribedFunction) -> Result<ConformalState> {
        ConformalState::new(&self.plan, u.with_band_limit(self.plan.band_limit()), f)
    }

    pub fn sigma(&self, state: &ConformalState) -> f64 {
        match self.config.sigma_policy {
            SigmaPolicy::Auto => 0.5 / state.exp4u().min(),
            SigmaPolicy::Fixed(s) => s,
        }
    }

    /// Unaccepted IMEX update `(1 + σΔt μ_k) u⁺ = u + Δt(αf − Q) + σΔt μ_k u`.
    pub fn trial(&self, state: &ConformalState, f: &PrescribedFunction, dt: f64, sigma: f64) -> SpectralField {
        let l = self.plan.band_limit();
        let mut rhs = f.field().with_band_limit(l).scaled(state.alpha());
        rhs.axpy(-1.0, state.q_coeffs());
        let mut next = state.u().with_band_limit(l);
        for k in 0..=l {
            let s = sigma * dt * paneitz_eigenvalue(k);
            let start = degree_offset(k);
            for i in start..start + degree_dim(k) {
                let u = next.coeffs()[i];
                next.coeffs_mut()[i] = (u + dt * rhs.coeffs()[i] + s * u) / (1.0 + s);
            }
        }
        next
    }

    /// One step from `state`; `accepted` iff `E_f` does not increase.
    pub fn step(&self, state: &ConformalState, f: &PrescribedFunction, dt: f64) -> Result<StepOutcome> {
        let sigma = self.sigma(state);
        let next = self.trial(state, f, dt, sigma);
        let new = ConformalState::new(&self.plan, next, f)?;
        let e0 = state.energies().flow;
        let accepted = new.energies().flow <= e0 + 1e-12 * (1.0 + e0.abs());
        Ok(StepOutcome { state: new, accepted, sigma })
    }

    fn record(&self, state: &ConformalState, f: &PrescribedFunction, t: f64, dt: f64) -> StepRecord {
        StepRecord {
            t,
            dt,
            alpha: state.alpha(),
            e_f: state.energies().flow,
            calabi: state.energies().calabi,
            admissibility: state.admissibility(),
            volume: state.volume(),
            volume_drift: 0.0,
            alpha_rate: state.alpha_rate(f),
        }
    }

    /// Gauge normalization and concentration scan of a state.
    fn diagnose(&self, state: &ConformalState, t: f64, dt: f64, warnings: &mut Vec<String>) -> Result<(FlowTraceRow, ConcentrationScan)> {
        let u = state.u();
        let density = self.compose.synthesize(u)?.map(|v| (4.0 * v).exp());
        let opts = GaugeOptions { tol: self.config.gauge_tol, ..GaugeOptions::default() };
        let (com_norm, h1_v) = match normalize_with(&density, &self.compose, u, &opts) {
            Ok(g) => (g.com_norm_after, h1_norm_sq(&g.v).sqrt()),
            Err(e) => {
                warnings.push(format!("t={t:e}: {e}"));
                let com = pushforward_com(&density, &[0.0; 5]);
                (com.iter().map(|c| c * c).sum::<f64>().sqrt(), h1_norm_sq(u).sqrt())
            }
        };
        let scan = concentration_scan(&MassField::from_state(&self.plan, state), self.config.conc_threshold);
        let en = state.energies();
        let row = FlowTraceRow {
            t,
            dt,
            alpha: state.alpha(),
            e: en.liouville,
            e_f: en.flow,
            volume: state.volume(),
            calabi: en.calabi,
            beckner_gap: en.beckner_gap,
            gb_residual: total_q(state) / GAUSS_BONNET_TOTAL - 1.0,
            com_norm,
            h1_v,
            exp_integral: state.exp_abs_integral(),
            conc_radius: scan.radius,
            conc_mass: scan.mass_at_center,
            q_min: state.q_grid().min(),
            q_max: state.q_grid().max(),
        };
        Ok((row, scan))
    }

    /// `u ↦ u − ¼ log(volume/V)`.
    pub fn renormalize(&self, state: ConformalState) -> Result<ConformalState> {
        let shift = 0.25 * (state.volume() / VOLUME_S4).ln();
        if shift == 0.0 {
            return Ok(state);
        }
        state.shifted(-shift)
    }

    pub fn run(&self, u0: SpectralField, f: &PrescribedFunction) -> Result<FlowVerdict> {
        self.run_observed(u0, f, &mut |_| Ok(()))
    }

    /// Runs the flow, calling `observer` after every trace row.
    pub fn run_observed(
        &self,
        u0: SpectralField,
        f: &PrescribedFunction,
        observer: &mut dyn FnMut(&Snapshot) -> Result<()>,
    ) -> Result<FlowVerdict> {
        let cfg = &self.config;
        let mut state = self.state(u0, f)?;
        if state.admissibility() <= 0.0 {
            return Err(QflowError::NonAdmissible(state.admissibility()));
        }
        state = self.renormalize(state)?;
        let e_f0 = state.energies().flow;
        let detect_cfg = DetectConfig {
            radius_tol: cfg.conc_radius_tol,
            mass_frac: cfg.conc_mass_frac,
            ..DetectConfig::default()
        };
        let mut warnings = Vec::new();
        let mut trace = Vec::new();
        let mut scans = Vec::new();
        let mut steps = vec![self.record(&state, f, 0.0, 0.0)];
        let (mut t, mut dt) = (0.0, cfg.dt_init);
        let (mut n, mut rejected, mut streak) = (0usize, 0usize, 0usize);
        let mut tail_warned = false;
        let mut failure = None;
        let mut point = None;

        let kind = loop {
            let converged = state.energies().calabi <= cfg.tol_calabi;
            let snapshot = converged || n % cfg.snapshot_every == 0;
            if snapshot {
                let (row, scan) = self.diagnose(&state, t, dt, &mut warnings)?;
                trace.push(row);
                scans.push(scan);
                observer(&Snapshot { step: n, t, alpha: state.alpha(), u: state.u(), row: &row })?;
                if converged {
                    break VerdictKind::Converged;
                }
                if let Some(q) = detect(&scans, &detect_cfg) {
                    point = Some(q);
                    break VerdictKind::Concentrated;
                }
            }
            if t >= cfg.t_max * (1.0 - 1e-12) {
                break VerdictKind::TimeExhausted;
            }

            let h = dt.min(cfg.t_max - t);
            let outcome = match self.step(&state, f, h) {
                Ok(o) if o.accepted && o.state.admissibility() > 0.0 => Some(o.state),
                Ok(_) | Err(QflowError::Overflow(_)) | Err(QflowError::NonAdmissible(_)) => None,
                Err(e) => return Err(e),
            };
            let Some(next) = outcome else {
                rejected += 1;
                streak = 0;
                dt *= 0.5;
                if dt < cfg.dt_min {
                    failure = Some(QflowError::StepUnderflow(cfg.dt_min).to_string());
                    break VerdictKind::Failed;
                }
                continue;
            };
            if next.q_tail() > TAIL_ABORT {
                state = next;
                t += h;
                let e = QflowError::Resolution { fraction: state.q_tail(), threshold: TAIL_ABORT };
                failure = Some(e.to_string());
                break VerdictKind::Failed;
            }
            if next.q_tail() > cfg.tail_tol && !tail_warned {
                tail_warned = true;
                warnings.push(format!("t={:e}: Q tail fraction {:e} exceeds {:e}", t + h, next.q_tail(), cfg.tail_tol));
            }
            let drift = next.volume() / VOLUME_S4 - 1.0;
            let next = self.renormalize(next)?;
            let bounds = alpha_bounds_check(&next, f, e_f0);
            if !bounds.ok {
                warnings.push(format!("t={:e}: alpha {:e} outside [{:e}, {:e}]", t + h, next.alpha(), bounds.lower, bounds.upper));
            }
            state = next;
            t += h;
            n += 1;
            steps.push(StepRecord { volume_drift: drift, ..self.record(&state, f, t, h) });
            streak += 1;
            if streak >= 10 {
                streak = 0;
                dt = (dt * 1.2).min(cfg.dt_max);
            }
        };

        if kind == VerdictKind::Failed && trace.last().map_or(true, |r| r.t < t) {
            if let Ok((row, _)) = self.diagnose(&state, t, dt, &mut warnings) {
                trace.push(row);
            }
        }
        Ok(FlowVerdict {
            kind,
            final_alpha: state.alpha(),
            final_u: state.into_u(),
            final_t: t,
            concentration_point: point,
            trace,
            accepted: n,
            rejected,
            steps,
            initial_flow_energy: e_f0,
            warnings,
            failure,
        })
    }
}

/// Derivative at `x[i]` from three neighbouring samples on a non-uniform grid.
fn central_derivative(t: [f64; 3], y: [f64; 3]) -> f64 {
    let (h1, h2) = (t[1] - t[0], t[2] - t[1]);
    (h1 * h1 * y[2] - h2 * h2 * y[0] + (h2 * h2 - h1 * h1) * y[1]) / (h1 * h2 * (h1 + h2))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityResidual {
    pub max_abs: f64,
    pub max_rel: f64,
}

fn identity_residual(steps: &[StepRecord], lhs: impl Fn(&StepRecord) -> f64, rhs: impl Fn(&StepRecord) -> f64) -> IdentityResidual {
    let mut out = IdentityResidual { max_abs: 0.0, max_rel: 0.0 };
    for w in steps.windows(3) {
        let d = central_derivative([w[0].t, w[1].t, w[2].t], [lhs(&w[0]), lhs(&w[1]), lhs(&w[2])]);
        let r = rhs(&w[1]);
        let abs = (d - r).abs();
        out.max_abs = out.max_abs.max(abs);
        if r != 0.0 {
            out.max_rel = out.max_rel.max(abs / r.abs());
        } else if abs > 0.0 {
            out.max_rel = f64::INFINITY;
        }
    }
    out
}

/// `dE_f/dt` against `−(3/2π²)·calabi` along consecutive step records.
pub fn dissipation_identity_check(steps: &[StepRecord]) -> IdentityResidual {
    identity_residual(steps, |s| s.e_f, |s| -DISSIPATION * s.calabi)
}

/// `dα/dt` against `4α ∫(Q − αf) f dv_g / ∫ f dv_g`.
pub fn alpha_evolution_check(steps: &[StepRecord]) -> IdentityResidual {
    identity_residual(steps, |s| s.alpha, |s| s.alpha_rate)
}

/// Residuals of the Q evolution in two sign conventions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QEvolutionResidual {
    /// `Q_t = −4u_t Q + ½ e^{−4u} P u_t`.
    pub derived: f64,
    /// `Q_t = −4u_t Q − ½ e^{−4u} P u_t`.
    pub literal: f64,
    /// Norm of the finite-difference `Q_t`.
    pub scale: f64,
}

/// Forward difference `(Q(u + dt·u_t) − Q(u))/dt` with `u_t = αf − Q`
/// against both forms, as relative `L²(dc)` residuals on the plan grid.
pub fn q_evolution_check(plan: &SphereTransform, u: &SpectralField, f: &PrescribedFunction, dt: f64) -> Result<QEvolutionResidual> {
    let l = plan.band_limit();
    let s0 = ConformalState::new(plan, u.with_band_limit(l), f)?;
    let mut ut = f.field().with_band_limit(l).scaled(s0.alpha());
    ut.axpy(-1.0, s0.q_coeffs());
    let mut u1 = s0.u().clone();
    u1.axpy(dt, &ut);
    let s1 = ConformalState::new(plan, u1, f)?;
    let ut_grid = plan.synthesize(&ut)?;
    let put = plan.synthesize(&apply_paneitz(&ut))?;
    let (q0, q1, e) = (s0.q_grid().values(), s1.q_grid().values(), s0.exp4u().values());
    let (utg, pg) = (ut_grid.values(), put.values());
    let grid = plan.grid();
    let fd = |i: usize| (q1[i] - q0[i]) / dt;
    let scale = grid.integrate_dc_by(|i| fd(i) * fd(i)).sqrt();
    let resid = |sign: f64| {
        grid.integrate_dc_by(|i| {
            let r = fd(i) - (-4.0 * utg[i] * q0[i] + sign * 0.5 * pg[i] / e[i]);
            r * r
        })
        .sqrt()
    };
    let (d, lit) = (resid(1.0), resid(-1.0));
    let rel = |r: f64| if scale > 0.0 { r / scale } else { r };
    Ok(QEvolutionResidual { derived: rel(d), literal: rel(lit), scale })
}

/// `u + ¼ log α`, whose Q-curvature is `f` at a stationary point.
pub fn finalize_prescribed(u: &SpectralField, alpha: f64) -> Result<SpectralField> {
    if !(alpha > 0.0) {
        return Err(QflowError::NonAdmissible(alpha));
    }
    let mut out = u.clone();
    out.coeffs_mut()[0] += 0.25 * alpha.ln();
    Ok(out)
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::conformal_ops::q_curvature;

    fn engine(l: usize, dt: f64, t_max: f64) -> FlowEngine {
        FlowEngine::new(FlowConfig {
            grid: GridSpec::new(l, 2).unwrap(),
            dt_init: dt,
            dt_max: dt,
            t_max,
            ..FlowConfig::default()
        })
        .unwrap()
    }

    fn x5(l: usize, a: f64) -> SpectralField {
        SpectralField::coordinate(l, 4).scaled(a)
    }

    fn constant_f(e: &FlowEngine, c: f64) -> PrescribedFunction {
        e.prescribe(SpectralField::constant(e.plan().band_limit(), c)).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(FlowConfig::default().validate().is_ok());
        let bad = FlowConfig { dt_min: 1.0, ..FlowConfig::default() };
        assert!(bad.validate().is_err());
        let bad = FlowConfig { t_max: 0.0, ..FlowConfig::default() };
        assert!(bad.validate().is_err());
        let bad = FlowConfig { snapshot_every: 0, ..FlowConfig::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn round_metric_is_stationary() {
        let e = engine(8, 1e-2, 1.0);
        let f = constant_f(&e, 3.0);
        let s = e.state(SpectralField::zeros(8), &f).unwrap();
        let out = e.step(&s, &f, 1e-2).unwrap();
        assert!(out.accepted);
        assert!(out.state.u().coeffs().iter().all(|c| c.abs() <= 1e-13));
    }

    #[test]
    fn gradient_step_decreases_energy() {
        let e = engine(8, 1e-3, 1.0);
        let f = constant_f(&e, 3.0);
        let s = e.state(x5(8, 0.1), &f).unwrap();
        let out = e.step(&s, &f, 1e-3).unwrap();
        assert!(out.accepted);
        assert!(out.state.energies().flow < s.energies().flow);
    }

    #[test]
    fn step_is_first_order_consistent() {
        let e = engine(8, 1e-3, 1.0);
        let f = e.prescribe(SpectralField::constant(8, 3.0)).unwrap();
        let s = e.state(x5(8, 0.1), &f).unwrap();
        let mut rate = f.field().with_band_limit(8).scaled(s.alpha());
        rate.axpy(-1.0, s.q_coeffs());
        let err = |dt: f64| {
            let next = e.step(&s, &f, dt).unwrap().state.into_u();
            let mut d = next;
            d.axpy(-1.0, s.u());
            d.scaled(1.0 / dt).max_abs_diff(&rate)
        };
        let (e1, e2, e3) = (err(1e-3), err(5e-4), err(2.5e-4));
        for r in [e1 / e2, e2 / e3] {
            assert!((r - 2.0).abs() < 0.1, "ratio {r}");
        }
    }

    #[test]
    fn round_start_converges_immediately() {
        let e = engine(8, 1e-3, 1.0);
        let f = constant_f(&e, 3.0);
        let v = e.run(SpectralField::zeros(8), &f).unwrap();
        assert_eq!(v.kind, VerdictKind::Converged);
        assert_eq!(v.trace.len(), 1);
        assert_eq!(v.final_t, 0.0);
        assert!((v.final_alpha - 1.0).abs() < 1e-14);
    }

    #[test]
    fn non_admissible_start_is_rejected() {
        let e = engine(8, 1e-3, 1.0);
        let f = e.prescribe(SpectralField::coordinate(8, 4).scaled(2.0).with_band_limit(8)).unwrap();
        assert!(matches!(e.run(SpectralField::zeros(8), &f), Err(QflowError::NonAdmissible(_))));
    }

    fn dissipation_run(dt: f64) -> FlowVerdict {
        let e = engine(8, dt, 40.0 * dt);
        let f = constant_f(&e, 3.0);
        e.run(x5(8, 0.1), &f).unwrap()
    }

    #[test]
    fn dissipation_identity_holds_to_first_order() {
        let a = dissipation_run(1e-4);
        let b = dissipation_run(5e-5);
        let (ra, rb) = (dissipation_identity_check(&a.steps), dissipation_identity_check(&b.steps));
        assert!(ra.max_rel <= 0.05, "{ra:?}");
        let ratio = ra.max_rel / rb.max_rel;
        assert!((1.6..=2.4).contains(&ratio), "ratio {ratio}");
        let drop = a.initial_flow_energy - a.steps.last().unwrap().e_f;
        let dissipated: f64 = a.steps.iter().skip(1).map(|s| s.dt * DISSIPATION * s.calabi).sum();
        assert!(dissipated <= drop + 1e-6);
        assert!(a.steps.windows(2).all(|w| w[1].e_f <= w[0].e_f));
    }

    #[test]
    fn stationary_identity_residuals_vanish() {
        let e = engine(8, 1e-3, 5e-3);
        let f = constant_f(&e, 3.0);
        let s = e.state(SpectralField::zeros(8), &f).unwrap();
        let mut steps = vec![e.record(&s, &f, 0.0, 0.0)];
        let mut cur = s;
        for i in 1..5 {
            cur = e.step(&cur, &f, 1e-3).unwrap().state;
            steps.push(e.record(&cur, &f, i as f64 * 1e-3, 1e-3));
        }
        assert!(dissipation_identity_check(&steps).max_abs <= 1e-12);
        assert!(alpha_evolution_check(&steps).max_abs <= 1e-12);
    }

    #[test]
    fn alpha_constant_for_constant_f() {
        let e = FlowEngine::new(FlowConfig {
            grid: GridSpec::new(8, 2).unwrap(),
            dt_init: 1e-4,
            dt_max: 1e-4,
            t_max: 2e-3,
            snapshot_every: 1,
            ..FlowConfig::default()
        })
        .unwrap();
        let f = constant_f(&e, 3.0);
        let v = e.run(x5(8, 0.1), &f).unwrap();
        assert!(v.trace.iter().all(|r| (r.alpha - 1.0).abs() < 1e-9));
        let r = alpha_evolution_check(&v.steps);
        assert!(v.steps.iter().all(|s| s.alpha_rate.abs() < 1e-9));
        assert!(r.max_abs < 1e-6, "{r:?}");
    }

    #[test]
    fn alpha_evolution_matches_rate() {
        let run = |dt: f64| {
            let e = engine(8, dt, 40.0 * dt);
            let mut fc = SpectralField::coordinate(8, 4);
            fc.coeffs_mut()[0] = 3.0;
            let f = e.prescribe(fc).unwrap();
            alpha_evolution_check(&e.run(SpectralField::zeros(8), &f).unwrap().steps)
        };
        let (a, b) = (run(1e-4), run(5e-5));
        assert!(a.max_rel <= 0.05, "{a:?}");
        let ratio = a.max_rel / b.max_rel;
        assert!((1.6..=2.4).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn q_evolution_discriminates_signs() {
        let e = engine(8, 1e-3, 1.0);
        let f = constant_f(&e, 3.0);
        let st = q_evolution_check(e.plan(), &SpectralField::zeros(8), &f, 1e-4).unwrap();
        assert!(st.scale <= 1e-11 && st.derived * st.scale <= 1e-11, "{st:?}");
        let u = x5(8, 0.1);
        let a = q_evolution_check(e.plan(), &u, &f, 1e-4).unwrap();
        let b = q_evolution_check(e.plan(), &u, &f, 5e-5).unwrap();
        assert!(a.derived <= 0.02, "{a:?}");
        assert!(b.derived < 0.7 * a.derived);
        assert!(b.literal > 0.5, "{b:?}");
    }

    #[test]
    fn finalize_shifts_by_quarter_log_alpha() {
        let u = x5(8, 0.1);
        assert_eq!(finalize_prescribed(&u, 1.0).unwrap(), u);
        let plan = SphereTransform::new(&GridSpec::new(8, 2).unwrap()).unwrap();
        let v = finalize_prescribed(&u, 4f64.exp()).unwrap();
        assert!((v.coeffs()[0] - u.coeffs()[0] - 1.0).abs() < 1e-15);
        let (qu, qv) = (q_curvature(&plan, &u).unwrap(), q_curvature(&plan, &v).unwrap());
        for (a, b) in qu.values().iter().zip(qv.values()) {
            assert!((b - a * (-4f64).exp()).abs() < 1e-12);
        }
        assert!(finalize_prescribed(&u, 0.0).is_err());
    }

    #[test]
    fn uniformization_from_tilted_start() {
        let e = FlowEngine::new(FlowConfig {
            grid: GridSpec::new(8, 2).unwrap(),
            t_max: 20.0,
            ..FlowConfig::default()
        })
        .unwrap();
        let f = constant_f(&e, 3.0);
        let v = e.run(x5(8, 0.2), &f).unwrap();
        assert_eq!(v.kind, VerdictKind::Converged, "{:?}", v.warnings);
        let last = v.trace.last().unwrap();
        assert!(last.calabi <= 1e-8);
        assert!(last.beckner_gap <= 1e-8, "{last:?}");
        assert!((v.final_alpha - 1.0).abs() < 1e-6);
        assert!(v.trace.iter().all(|r| (r.volume - VOLUME_S4).abs() <= 1e-6));
        assert!(v.steps.windows(2).all(|w| w[1].e_f <= w[0].e_f + 1e-12 * (1.0 + w[0].e_f.abs())));
    }
}
