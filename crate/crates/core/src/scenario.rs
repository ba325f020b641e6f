//! Scenario files in human units.
//!
//! Two formats are accepted: flat `key = value` text with `#` comments, and
//! TOML. Both use the field names of [`Scenario`] as keys.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bench::Scheme;
use crate::error::{Error, Result};
use crate::model::{db_to_linear, dbm_to_watts, Geometry, SystemParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepParam {
    /// Block length, in ms.
    T,
    /// Task size, in Mbits.
    L,
    /// User to helper distance, in m.
    D,
}

impl SweepParam {
    pub fn label(&self) -> &'static str {
        match self {
            SweepParam::T => "T",
            SweepParam::L => "L",
            SweepParam::D => "D",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sweep {
    pub param: SweepParam,
    pub from: f64,
    pub to: f64,
    pub steps: usize,
}

impl Sweep {
    /// Evenly spaced points from `from` to `to`, both included.
    pub fn values(&self) -> Vec<f64> {
        let n = self.steps - 1;
        (0..=n).map(|i| if i == n { self.to } else { self.from + (self.to - self.from) * i as f64 / n as f64 }).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub task_mbits: f64,
    pub block_ms: f64,
    pub bandwidth_mhz: f64,
    /// Receiver noise power at the AP and at the helper.
    pub noise_dbm: f64,
    pub gamma_db: f64,
    pub p_u_max_dbm: f64,
    pub p_h_max_dbm: f64,
    /// CPU cycles per bit.
    pub c_u: f64,
    pub c_h: f64,
    pub c_a: f64,
    pub kappa_u: f64,
    pub kappa_h: f64,
    pub f_u_max_ghz: f64,
    pub f_h_max_ghz: f64,
    pub f_a_max_ghz: f64,
    pub d_user_ap_m: f64,
    pub d_user_helper_m: f64,
    pub beta0_db: f64,
    pub d0_m: f64,
    pub zeta: f64,
    /// Channel gains given directly; all three or none.
    pub h01_db: Option<f64>,
    pub h0_db: Option<f64>,
    pub h1_db: Option<f64>,
    pub sweep_param: Option<SweepParam>,
    pub sweep_from: Option<f64>,
    pub sweep_to: Option<f64>,
    pub sweep_steps: Option<i64>,
    pub schemes: Vec<String>,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            task_mbits: 0.02,
            block_ms: 100.0,
            bandwidth_mhz: 1.0,
            noise_dbm: -70.0,
            gamma_db: 0.0,
            p_u_max_dbm: 40.0,
            p_h_max_dbm: 40.0,
            c_u: 1e3,
            c_h: 1e3,
            c_a: 1e3,
            kappa_u: 1e-27,
            kappa_h: 0.3e-27,
            f_u_max_ghz: 2.0,
            f_h_max_ghz: 3.0,
            f_a_max_ghz: 5.0,
            d_user_ap_m: 250.0,
            d_user_helper_m: 120.0,
            beta0_db: -60.0,
            d0_m: 10.0,
            zeta: 3.0,
            h01_db: None,
            h0_db: None,
            h1_db: None,
            sweep_param: None,
            sweep_from: None,
            sweep_to: None,
            sweep_steps: None,
            schemes: Scheme::ALL.iter().map(|s| s.label().to_string()).collect(),
        }
    }
}

fn field(name: &str, message: impl Into<String>) -> Error {
    Error::Field { field: name.into(), message: message.into() }
}

impl Scenario {
    pub fn geometry(&self) -> Geometry {
        Geometry {
            d_user_ap: self.d_user_ap_m,
            d_user_helper: self.d_user_helper_m,
            beta0: db_to_linear(self.beta0_db),
            d0: self.d0_m,
            zeta: self.zeta,
        }
    }

    fn gains_given(&self) -> bool {
        self.h01_db.is_some() || self.h0_db.is_some() || self.h1_db.is_some()
    }

    /// Parameters in SI units at the scenario's base point.
    pub fn params(&self) -> Result<SystemParams> {
        let g = self.geometry();
        let (h01, h0, h1) = if self.gains_given() {
            match (self.h01_db, self.h0_db, self.h1_db) {
                (Some(a), Some(b), Some(c)) => (db_to_linear(a), db_to_linear(b), db_to_linear(c)),
                _ => return Err(Error::Validation("h01_db, h0_db and h1_db must be given together".into())),
            }
        } else {
            g.validate()?;
            g.gains()?
        };
        let noise = dbm_to_watts(self.noise_dbm);
        let p = SystemParams {
            task_bits: self.task_mbits * 1e6,
            block: self.block_ms * 1e-3,
            bandwidth: self.bandwidth_mhz * 1e6,
            h01,
            h0,
            h1,
            sigma0_sq: noise,
            sigma1_sq: noise,
            gamma_gap: db_to_linear(self.gamma_db),
            p_u_max: dbm_to_watts(self.p_u_max_dbm),
            p_h_max: dbm_to_watts(self.p_h_max_dbm),
            c_u: self.c_u,
            c_h: self.c_h,
            c_a: self.c_a,
            kappa_u: self.kappa_u,
            kappa_h: self.kappa_h,
            f_u_max: self.f_u_max_ghz * 1e9,
            f_h_max: self.f_h_max_ghz * 1e9,
            f_a_max: self.f_a_max_ghz * 1e9,
        };
        p.validate()?;
        Ok(p)
    }

    /// The scenario with the swept parameter set to `value` (human units).
    pub fn at(&self, param: SweepParam, value: f64) -> Scenario {
        let mut s = self.clone();
        match param {
            SweepParam::T => s.block_ms = value,
            SweepParam::L => s.task_mbits = value,
            SweepParam::D => s.d_user_helper_m = value,
        }
        s
    }

    pub fn scheme_list(&self) -> Result<Vec<Scheme>> {
        let mut out: Vec<Scheme> = self.schemes.iter().map(|s| s.parse()).collect::<Result<_>>()?;
        if out.is_empty() {
            return Err(field("schemes", "at least one scheme is required"));
        }
        out.sort();
        out.dedup();
        Ok(out)
    }

    pub fn sweep(&self) -> Result<Option<Sweep>> {
        let parts = (self.sweep_param, self.sweep_from, self.sweep_to, self.sweep_steps);
        match parts {
            (None, None, None, None) => Ok(None),
            (Some(param), Some(from), Some(to), Some(steps)) => {
                if !(from > 0.0 && to > from && to.is_finite()) {
                    return Err(Error::Validation(format!("sweep range must satisfy 0 < sweep_from < sweep_to, got {from}..{to}")));
                }
                if steps < 2 {
                    return Err(Error::Validation(format!("sweep_steps must be at least 2, got {steps}")));
                }
                if param == SweepParam::D && self.gains_given() {
                    return Err(Error::Validation("a distance sweep needs gains derived from the geometry".into()));
                }
                Ok(Some(Sweep { param, from, to, steps: steps as usize }))
            }
            _ => Err(Error::Validation("sweep_param, sweep_from, sweep_to and sweep_steps must be given together".into())),
        }
    }

    /// Checks every invariant, including those of all sweep points.
    pub fn validate(&self) -> Result<()> {
        self.params()?;
        self.scheme_list()?;
        if let Some(sw) = self.sweep()? {
            for v in [sw.from, sw.to] {
                self.at(sw.param, v).params()?;
            }
        }
        Ok(())
    }
}

/// Parses the flat `key = value` format. `schemes` takes a comma-separated
/// list; every other value is a number or a bare word.
pub fn parse_kv(text: &str) -> Result<Scenario> {
    let mut table = toml::Table::new();
    let mut lines = std::collections::HashMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Parse { line: line_no, message: format!("expected `key = value`, got `{line}`") });
        };
        let key = key.trim();
        let value = value.trim();
        if key.is_empty() || value.is_empty() {
            return Err(Error::Parse { line: line_no, message: "empty key or value".into() });
        }
        if let Some(prev) = lines.insert(key.to_string(), line_no) {
            return Err(Error::Parse { line: line_no, message: format!("duplicate key `{key}` (first on line {prev})") });
        }
        let v = if key == "schemes" {
            toml::Value::Array(value.split(',').map(|s| toml::Value::String(s.trim().to_string())).collect())
        } else if let Ok(n) = value.parse::<i64>() {
            toml::Value::Integer(n)
        } else if let Ok(x) = value.parse::<f64>() {
            toml::Value::Float(x)
        } else {
            toml::Value::String(value.to_string())
        };
        // Deserializing each entry alone pins errors to their line.
        let mut single = toml::Table::new();
        single.insert(key.to_string(), v.clone());
        if let Err(e) = Scenario::deserialize(single) {
            return Err(Error::Parse { line: line_no, message: e.message().to_string() });
        }
        table.insert(key.to_string(), v);
    }
    Scenario::deserialize(table).map_err(|e| Error::Parse { line: 0, message: e.message().to_string() })
}

pub fn parse_toml(text: &str) -> Result<Scenario> {
    toml::from_str(text).map_err(|e| {
        let line = e.span().map_or(0, |s| text[..s.start.min(text.len())].matches('\n').count() + 1);
        Error::Parse { line, message: e.message().to_string() }
    })
}

/// Reads, parses and validates a scenario. Files ending in `.toml` are read
/// as TOML, anything else as `key = value` text.
pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io { path: path.display().to_string(), message: e.to_string() })?;
    let s = if path.extension().is_some_and(|x| x == "toml") { parse_toml(&text)? } else { parse_kv(&text)? };
    s.validate()?;
    Ok(s)
}
