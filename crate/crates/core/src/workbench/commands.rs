//! Command implementations returning process exit codes.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use crate::error::{QflowError, Result};
use crate::flow_engine::{FlowEngine, FlowTraceRow, FlowVerdict, VerdictKind};
use crate::mobius_gauge::{normalize, GaugeOptions};
use crate::morse_gate::{check_prescribed, MorseOptions};
use crate::s4_spectral::{GridSpec, SphereTransform};
use crate::conformal_ops::liouville_energy;

use super::config::RunConfig;
use super::snapshot::Snapshot;
use super::specs::{parse_f_field, parse_f_spec, parse_u0_spec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_CONCENTRATED: i32 = 2;
pub const EXIT_TIME_EXHAUSTED: i32 = 3;
pub const EXIT_CONDITION_FAILS: i32 = 4;
pub const EXIT_HYPOTHESES_VIOLATED: i32 = 5;
pub const EXIT_GAUGE_FAILURE: i32 = 6;

pub fn verdict_exit_code(kind: VerdictKind) -> i32 {
    match kind {
        VerdictKind::Converged => EXIT_OK,
        VerdictKind::Concentrated => EXIT_CONCENTRATED,
        VerdictKind::TimeExhausted => EXIT_TIME_EXHAUSTED,
        VerdictKind::Failed => EXIT_ERROR,
    }
}

pub fn snapshot_name(step: usize) -> String {
    format!("snap_{step:08}.qf4")
}

/// Runs the flow, streaming `trace.csv` and snapshots into `out_dir`.
pub fn execute_run(config: &RunConfig) -> Result<(FlowVerdict, f64)> {
    let start = Instant::now();
    let engine = FlowEngine::new(config.flow.clone())?;
    let f = parse_f_spec(&config.f_spec, engine.plan())?;
    let u0 = parse_u0_spec(&config.u0_spec, engine.plan(), config.seed)?;
    let dir = &config.out_dir;
    std::fs::create_dir_all(dir)?;
    let mut trace = BufWriter::new(File::create(dir.join("trace.csv"))?);
    writeln!(trace, "{}", FlowTraceRow::csv_header())?;
    let verdict = engine.run_observed(u0, &f, &mut |s| {
        writeln!(trace, "{}", s.row.to_csv())?;
        Snapshot::new(s.u.clone(), s.t, s.alpha).write(&dir.join(snapshot_name(s.step)))
    })?;
    trace.flush()?;
    let wall = start.elapsed().as_secs_f64();
    std::fs::write(dir.join("summary.txt"), summary_text(config, &verdict, wall))?;
    Ok((verdict, wall))
}

pub fn summary_text(config: &RunConfig, v: &FlowVerdict, wall: f64) -> String {
    let last = v.steps.last();
    let point = v
        .concentration_point
        .map(|q| q.iter().map(|x| format!("{x:.12}")).collect::<Vec<_>>().join(","))
        .unwrap_or_else(|| "none".into());
    let mut s = String::new();
    s.push_str(&format!("verdict = {}\n", v.kind.name()));
    s.push_str(&format!("f = {}\nu0 = {}\nseed = {}\n", config.f_spec, config.u0_spec, config.seed));
    s.push_str(&format!("final_t = {:e}\n", v.final_t));
    s.push_str(&format!("final_alpha = {:e}\n", v.final_alpha));
    s.push_str(&format!("e_f_initial = {:e}\n", v.initial_flow_energy));
    s.push_str(&format!("e_f_final = {:e}\n", last.map_or(f64::NAN, |r| r.e_f)));
    s.push_str(&format!("calabi_final = {:e}\n", last.map_or(f64::NAN, |r| r.calabi)));
    s.push_str(&format!("steps_accepted = {}\nsteps_rejected = {}\n", v.accepted, v.rejected));
    s.push_str(&format!("concentration_point = {point}\n"));
    s.push_str(&format!("wall_time_s = {wall:.3}\n"));
    if let Some(e) = &v.failure {
        s.push_str(&format!("failure = {e}\n"));
    }
    for w in &v.warnings {
        s.push_str(&format!("warning = {w}\n"));
    }
    s
}

pub fn cmd_run(config: &RunConfig, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    match execute_run(config) {
        Ok((v, wall)) => {
            let _ = writeln!(
                out,
                "{} at t = {:e} after {} steps ({} rejected), alpha = {:e}, {:.1} s",
                v.kind.name(),
                v.final_t,
                v.accepted,
                v.rejected,
                v.final_alpha,
                wall
            );
            if let Some(e) = &v.failure {
                let _ = writeln!(err, "error: {e}");
            }
            verdict_exit_code(v.kind)
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_ERROR
        }
    }
}

pub fn cmd_check_f(spec: &str, opts: &MorseOptions, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let report = parse_f_field(spec).and_then(|f| {
        let plan = SphereTransform::new(&GridSpec::new(f.band_limit().max(4), 2)?)?;
        parse_f_spec(spec, &plan)?;
        check_prescribed(&f, opts)
    });
    match report {
        Ok(r) => {
            let _ = write!(out, "{}", r.to_text());
            if !r.hypothesis_violations.is_empty() {
                EXIT_HYPOTHESES_VIOLATED
            } else if r.condition_satisfied {
                EXIT_OK
            } else {
                EXIT_CONDITION_FAILS
            }
        }
        Err(QflowError::Degenerate(n)) => {
            let _ = writeln!(out, "violation critical points are not isolated ({n} degenerate points)\nverdict HYPOTHESES_VIOLATED");
            EXIT_HYPOTHESES_VIOLATED
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_ERROR
        }
    }
}

pub fn cmd_normalize(input: &Path, output: &Path, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let mut run = || -> Result<()> {
        let snap = Snapshot::read(input)?;
        let plan = SphereTransform::new(&GridSpec::new(snap.field.band_limit().max(4), 1)?)?;
        let u = snap.field.with_band_limit(plan.band_limit());
        let g = normalize(&plan, &u, &GaugeOptions::default())?;
        let fmt = |v: [f64; 5]| v.iter().map(|x| format!("{x:.12e}")).collect::<Vec<_>>().join(",");
        writeln!(out, "boost_pole = {}", fmt(g.boost.pole()))?;
        writeln!(out, "boost_t = {:.12e}", g.boost.t())?;
        writeln!(out, "boost_parameter = {}", fmt(g.boost.parameter()))?;
        writeln!(out, "com_before = {:.6e}", g.com_norm_before)?;
        writeln!(out, "com_after = {:.6e}", g.com_norm_after)?;
        writeln!(out, "energy_before = {:.15e}", liouville_energy(&u))?;
        writeln!(out, "energy_after = {:.15e}", liouville_energy(&g.v))?;
        writeln!(out, "iterations = {}", g.iterations)?;
        Snapshot::new(g.v.with_band_limit(snap.field.band_limit()), snap.t, snap.alpha).write(output)
    };
    match run() {
        Ok(()) => EXIT_OK,
        Err(e @ QflowError::GaugeFailure { .. }) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_GAUGE_FAILURE
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_ERROR
        }
    }
}
