//! Key-value run configuration.
//!
//! One `key = value` pair per line; `#` starts a comment. Nested physical
//! parameters use dotted keys such as `phys.kappa`. Every key must already
//! exist in [`RunConfig::default`], and its value is parsed with the type of
//! that default. Frequencies are in units of `J`.

use pwave_core::groundstate::ModelParams;
use pwave_core::validity::PhysicalParams;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use std::f64::consts::PI;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Command executed by `pwave run`.
    pub command: String,
    pub n_x: usize,
    pub n_y: usize,
    pub n_c: f64,
    /// Couplings of a single equilibrium point (`ground`, `prep`, `stability`).
    pub chi_p: f64,
    pub chi_d: f64,
    pub chi_p_i: f64,
    pub chi_p_f: f64,
    pub chi_d_i: f64,
    pub chi_d_f: f64,
    pub eps_d: f64,
    pub eps_p: f64,
    /// Evolution time in units of `2π/J`.
    pub periods: f64,
    pub dt: Option<f64>,
    pub stride: usize,
    pub loss_p: f64,
    pub loss_d: f64,
    /// `auto`, `sites`, `cells` or `levels`.
    pub ensemble: String,
    pub a_tol: f64,
    pub s_tol: f64,
    pub iii_star_std: f64,
    pub readout_g_p: f64,
    pub readout_g_d: f64,
    pub readout_delta_a: f64,
    pub readout_delta_b: f64,
    pub readout_kappa: f64,
    /// Ranges are `start:stop:count`, endpoints included.
    pub sweep_chi_i: String,
    pub sweep_chi_f: String,
    pub stab_branch: String,
    pub stab_chi_p: String,
    pub stab_chi_d: String,
    pub stab_eps: f64,
    pub stab_periods: f64,
    pub stab_steps_per_period: f64,
    pub lax_levels: usize,
    pub lax_boundary_chi_i: String,
    pub prep_t_prep: f64,
    pub prep_segments: usize,
    pub prep_budget: usize,
    pub prep_steps: usize,
    pub prep_scale: f64,
    pub prep_target_infidelity: f64,
    pub seed: u64,
    pub validity_factor: f64,
    pub phys: PhysicalParams,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            command: "quench".into(),
            n_x: 500,
            n_y: 20,
            n_c: 0.35,
            chi_p: 4.0,
            chi_d: 0.0,
            chi_p_i: 2.0,
            chi_p_f: 4.0,
            chi_d_i: 0.0,
            chi_d_f: 0.0,
            eps_d: 0.0,
            eps_p: 0.0,
            periods: 50.0,
            dt: None,
            stride: 10,
            loss_p: 0.0,
            loss_d: 0.0,
            ensemble: "auto".into(),
            a_tol: 1e-2,
            s_tol: 1e-2,
            iii_star_std: 0.2,
            readout_g_p: 0.0,
            readout_g_d: 0.0,
            readout_delta_a: 0.0,
            readout_delta_b: 0.0,
            readout_kappa: 0.0,
            sweep_chi_i: "0.5:10:40".into(),
            sweep_chi_f: "0.5:10:40".into(),
            stab_branch: "p_only".into(),
            stab_chi_p: "1:10:10".into(),
            stab_chi_d: "1:14:14".into(),
            stab_eps: 1e-2,
            stab_periods: 50.0,
            stab_steps_per_period: 400.0,
            lax_levels: 30,
            lax_boundary_chi_i: "0.2:6:30".into(),
            prep_t_prep: 2.0 * PI,
            prep_segments: 20,
            prep_budget: 400,
            prep_steps: 20_000,
            prep_scale: 400.0,
            prep_target_infidelity: 1e-2,
            seed: 7,
            validity_factor: 10.0,
            phys: PhysicalParams::default(),
        }
    }
}

pub const COMMANDS: [&str; 7] = ["ground", "quench", "sweep", "stability", "lax", "prep", "validate"];

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

fn parse_like(template: &Value, raw: &str, key: &str) -> Result<Value, ConfigError> {
    let bad = || ConfigError(format!("line for `{key}`: cannot parse `{raw}`"));
    match template {
        Value::String(_) => Ok(Value::String(raw.to_string())),
        Value::Number(n) if n.is_u64() => raw.parse::<u64>().map(Value::from).map_err(|_| bad()),
        Value::Number(_) | Value::Null => {
            if template.is_null() && raw.eq_ignore_ascii_case("none") {
                return Ok(Value::Null);
            }
            let x: f64 = raw.parse().map_err(|_| bad())?;
            if !x.is_finite() {
                return Err(bad());
            }
            Ok(Value::from(x))
        }
        Value::Bool(_) => raw.parse::<bool>().map(Value::Bool).map_err(|_| bad()),
        _ => Err(bad()),
    }
}

impl RunConfig {
    /// Parse a key-value document over the defaults.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut root = serde_json::to_value(RunConfig::default()).expect("defaults serialize");
        let mut seen = std::collections::HashSet::new();
        for (no, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, raw)) = line.split_once('=') else {
                return err(format!("line {}: expected `key = value`", no + 1));
            };
            let (key, raw) = (key.trim(), raw.trim());
            if !seen.insert(key.to_string()) {
                return err(format!("line {}: duplicate key `{key}`", no + 1));
            }
            let mut slot: &mut Value = &mut root;
            for part in key.split('.') {
                slot = match slot.as_object_mut().and_then(|m: &mut Map<String, Value>| m.get_mut(part)) {
                    Some(v) => v,
                    None => return err(format!("line {}: unknown key `{key}`", no + 1)),
                };
            }
            if slot.is_object() {
                return err(format!("line {}: `{key}` is a group, not a value", no + 1));
            }
            *slot = parse_like(slot, raw, key)?;
        }
        let cfg: RunConfig = serde_json::from_value(root).map_err(|e| ConfigError(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !COMMANDS.contains(&self.command.as_str()) {
            return err(format!("unknown command `{}`", self.command));
        }
        if self.n_x == 0 || self.n_y == 0 {
            return err("n_x and n_y must be positive");
        }
        self.model(self.chi_p, self.chi_d).validate().map_err(|e| ConfigError(e.to_string()))?;
        if !(self.periods > 0.0) || self.stride == 0 || self.dt.is_some_and(|d| !(d > 0.0)) {
            return err("periods, stride and dt must be positive");
        }
        if ![self.chi_p_i, self.chi_p_f, self.chi_d_i, self.chi_d_f, self.eps_d, self.eps_p].iter().all(|x| *x >= 0.0) {
            return err("quench couplings and seeds must be non-negative");
        }
        if !["auto", "sites", "cells", "levels"].contains(&self.ensemble.as_str()) {
            return err(format!("unknown ensemble `{}`", self.ensemble));
        }
        if !["p_only", "d_only"].contains(&self.stab_branch.as_str()) {
            return err("stab_branch must be p_only or d_only");
        }
        for r in [&self.sweep_chi_i, &self.sweep_chi_f, &self.stab_chi_p, &self.stab_chi_d, &self.lax_boundary_chi_i] {
            parse_range(r)?;
        }
        if self.lax_levels == 0 || self.prep_segments == 0 || self.prep_steps == 0 || self.prep_budget == 0 {
            return err("lax_levels and prep sizes must be positive");
        }
        if !(self.prep_t_prep > 0.0 && self.prep_scale > 0.0 && self.validity_factor > 0.0) {
            return err("prep_t_prep, prep_scale and validity_factor must be positive");
        }
        Ok(())
    }

    pub fn model(&self, chi_p: f64, chi_d: f64) -> ModelParams {
        ModelParams::new(chi_p, chi_d, self.n_c).with_loss(self.loss_p, self.loss_d)
    }
}

/// `start:stop:count` with both ends included; a bare number is one point.
pub fn parse_range(s: &str) -> Result<Vec<f64>, ConfigError> {
    let parts: Vec<&str> = s.split(':').map(str::trim).collect();
    let num = |p: &str| p.parse::<f64>().ok().filter(|x| x.is_finite());
    match parts.as_slice() {
        [x] => num(x).map(|v| vec![v]).ok_or_else(|| ConfigError(format!("bad range `{s}`"))),
        [a, b, n] => {
            let (a, b) = (num(a), num(b));
            let n = n.parse::<usize>().ok();
            match (a, b, n) {
                (Some(a), Some(b), Some(1)) if a == b => Ok(vec![a]),
                (Some(a), Some(b), Some(n)) if n >= 2 => {
                    Ok((0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect())
                }
                _ => err(format!("bad range `{s}`")),
            }
        }
        _ => err(format!("bad range `{s}`")),
    }
}
