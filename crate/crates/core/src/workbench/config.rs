//! Flat `key = value` run configuration.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{QflowError, Result};
use crate::flow_engine::{FlowConfig, SigmaPolicy};
use crate::s4_spectral::GridSpec;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub flow: FlowConfig,
    pub f_spec: String,
    pub u0_spec: String,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub format_version: u32,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            flow: FlowConfig::default(),
            f_spec: "const:3".into(),
            u0_spec: "zero".into(),
            seed: 0,
            out_dir: PathBuf::from("qflow_out"),
            format_version: FORMAT_VERSION,
        }
    }
}

const KEYS: [&str; 19] = [
    "band_limit",
    "oversample",
    "dt_init",
    "dt_min",
    "dt_max",
    "t_max",
    "sigma",
    "tol_calabi",
    "snapshot_every",
    "gauge_tol",
    "tail_tol",
    "conc_threshold",
    "conc_radius_tol",
    "conc_mass_frac",
    "f",
    "u0",
    "seed",
    "out_dir",
    "format_version",
];

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| QflowError::Parse(format!("invalid value for {key}: {v:?}")))
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut c = RunConfig::default();
        let mut seen = std::collections::HashSet::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| QflowError::Parse(format!("line {}: expected key = value", lineno + 1)))?;
            let (key, v) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(QflowError::Parse(format!("line {}: duplicate key {key}", lineno + 1)));
            }
            let fl = &mut c.flow;
            match key {
                "band_limit" => fl.grid.band_limit = parse_num(key, v)?,
                "oversample" => fl.grid.oversample = parse_num(key, v)?,
                "dt_init" => fl.dt_init = parse_num(key, v)?,
                "dt_min" => fl.dt_min = parse_num(key, v)?,
                "dt_max" => fl.dt_max = parse_num(key, v)?,
                "t_max" => fl.t_max = parse_num(key, v)?,
                "sigma" => {
                    fl.sigma_policy = if v == "auto" {
                        SigmaPolicy::Auto
                    } else {
                        SigmaPolicy::Fixed(parse_num(key, v)?)
                    }
                }
                "tol_calabi" => fl.tol_calabi = parse_num(key, v)?,
                "snapshot_every" => fl.snapshot_every = parse_num(key, v)?,
                "gauge_tol" => fl.gauge_tol = parse_num(key, v)?,
                "tail_tol" => fl.tail_tol = parse_num(key, v)?,
                "conc_threshold" => fl.conc_threshold = parse_num(key, v)?,
                "conc_radius_tol" => fl.conc_radius_tol = parse_num(key, v)?,
                "conc_mass_frac" => fl.conc_mass_frac = parse_num(key, v)?,
                "f" => c.f_spec = v.to_string(),
                "u0" => c.u0_spec = v.to_string(),
                "seed" => c.seed = parse_num(key, v)?,
                "out_dir" => c.out_dir = PathBuf::from(v),
                "format_version" => c.format_version = parse_num(key, v)?,
                _ => return Err(QflowError::Parse(format!("line {}: unknown key {key:?}", lineno + 1))),
            }
        }
        if c.format_version != FORMAT_VERSION {
            return Err(QflowError::Parse(format!("unsupported format_version {}", c.format_version)));
        }
        c.flow.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_text(&self) -> String {
        let fl = &self.flow;
        let sigma = match fl.sigma_policy {
            SigmaPolicy::Auto => "auto".to_string(),
            SigmaPolicy::Fixed(s) => format!("{s:?}"),
        };
        let values = [
            fl.grid.band_limit.to_string(),
            fl.grid.oversample.to_string(),
            format!("{:?}", fl.dt_init),
            format!("{:?}", fl.dt_min),
            format!("{:?}", fl.dt_max),
            format!("{:?}", fl.t_max),
            sigma,
            format!("{:?}", fl.tol_calabi),
            fl.snapshot_every.to_string(),
            format!("{:?}", fl.gauge_tol),
            format!("{:?}", fl.tail_tol),
            format!("{:?}", fl.conc_threshold),
            format!("{:?}", fl.conc_radius_tol),
            format!("{:?}", fl.conc_mass_frac),
            self.f_spec.clone(),
            self.u0_spec.clone(),
            self.seed.to_string(),
            self.out_dir.display().to_string(),
            self.format_version.to_string(),
        ];
        let mut out = String::new();
        for (k, v) in KEYS.iter().zip(values) {
            writeln!(out, "{k} = {v}").unwrap();
        }
        out
    }

    pub fn grid(&self) -> GridSpec {
        self.flow.grid
    }
}
