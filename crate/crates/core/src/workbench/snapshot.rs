//! Text snapshots of spectral fields.
//!
//! ```text
//! QFLOW4
//! version 1
//! band_limit 16
//! t 1.2500000000000000e-1
//! alpha 1.0000000000000000e0
//! coeffs 1785
//! <one coefficient per line, canonical order>
//! ```

use std::path::Path;

use crate::error::{QflowError, Result};
use crate::s4_spectral::{coeff_count, SpectralField};

pub const MAGIC: &str = "QFLOW4";
pub const SNAPSHOT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub alpha: f64,
    pub field: SpectralField,
}

impl Snapshot {
    pub fn new(field: SpectralField, t: f64, alpha: f64) -> Self {
        Snapshot { t, alpha, field }
    }

    pub fn to_text(&self) -> String {
        let c = self.field.coeffs();
        let mut out = String::with_capacity(32 * c.len() + 128);
        out.push_str(&format!(
            "{MAGIC}\nversion {SNAPSHOT_VERSION}\nband_limit {}\nt {:.16e}\nalpha {:.16e}\ncoeffs {}\n",
            self.field.band_limit(),
            self.t,
            self.alpha,
            c.len()
        ));
        for v in c {
            out.push_str(&format!("{v:.16e}\n"));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let lines: Vec<&str> = text.lines().map(str::trim).collect();
        let line = |i: usize, what: &str| {
            lines
                .get(i)
                .copied()
                .ok_or_else(|| QflowError::Parse(format!("snapshot truncated: missing {what}")))
        };
        if line(0, "magic")? != MAGIC {
            return Err(QflowError::Parse(format!("bad snapshot magic {:?}", lines[0])));
        }
        let header = |i: usize, key: &str| -> Result<&str> {
            line(i, key)?
                .strip_prefix(key)
                .map(str::trim)
                .ok_or_else(|| QflowError::Parse(format!("line {}: expected {key}", i + 1)))
        };
        let bad = |key: &str, v: &str| QflowError::Parse(format!("invalid {key} {v:?}"));
        let v = header(1, "version")?;
        let version: u32 = v.parse().map_err(|_| bad("version", v))?;
        if version != SNAPSHOT_VERSION {
            return Err(QflowError::Parse(format!("unsupported snapshot version {version}")));
        }
        let v = header(2, "band_limit")?;
        let band: usize = v.parse().map_err(|_| bad("band_limit", v))?;
        let v = header(3, "t")?;
        let t: f64 = v.parse().map_err(|_| bad("t", v))?;
        let v = header(4, "alpha")?;
        let alpha: f64 = v.parse().map_err(|_| bad("alpha", v))?;
        let v = header(5, "coeffs")?;
        let n: usize = v.parse().map_err(|_| bad("coefficient count", v))?;
        if n != coeff_count(band) {
            return Err(QflowError::Parse(format!(
                "coefficient count {n} does not match band limit {band}"
            )));
        }
        let body = &lines[6..];
        if body.len() < n {
            return Err(QflowError::Parse(format!(
                "snapshot truncated: {} of {n} coefficients",
                body.len()
            )));
        }
        if let Some((i, extra)) = body.iter().enumerate().skip(n).find(|(_, l)| !l.is_empty()) {
            return Err(QflowError::Parse(format!("line {}: unexpected trailing data {extra:?}", i + 7)));
        }
        let coeffs = body[..n]
            .iter()
            .enumerate()
            .map(|(i, v)| {
                v.parse::<f64>()
                    .map_err(|_| QflowError::Parse(format!("line {}: invalid coefficient {v:?}", i + 7)))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Snapshot {
            t,
            alpha,
            field: SpectralField::from_coeffs(band, coeffs),
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}
