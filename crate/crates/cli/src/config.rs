//! Flat `key = value` run configuration.
//!
//! One assignment per line, `#` starts a comment, keys are dotted. Values are
//! decimal numbers, booleans or bare identifiers depending on the key.

use std::collections::BTreeMap;
use std::path::Path;

use cbfed_core::constants::ModelParams;
use cbfed_core::forcing::Forcing;
use cbfed_core::geometry::Domain;
use cbfed_core::outer_solver::SolverOptions;
use cbfed_core::superpotential::Superpotential;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainKind {
    UnitSquare,
    Channel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeshConfig {
    pub domain: DomainKind,
    pub length: f64,
    pub height: f64,
    pub nx: usize,
    pub ny: usize,
    pub order: usize,
}

impl MeshConfig {
    pub fn domain(&self) -> Domain {
        match self.domain {
            DomainKind::UnitSquare => Domain::UnitSquare,
            DomainKind::Channel => Domain::Channel { length: self.length, height: self.height },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SuperpotentialKind {
    Quadratic,
    AbsVal,
    CosNonconvex,
    JumpDown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForcingKind {
    Constant,
    Vortex,
    Shear,
    BoundaryLayer,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    /// Numeric key whose value is varied.
    pub key: String,
    pub from: f64,
    pub to: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub mesh: MeshConfig,
    pub params: ModelParams,
    pub sp_kind: SuperpotentialKind,
    pub sp_c: f64,
    pub sp_delta: f64,
    pub sp_gap: f64,
    pub forcing_kind: ForcingKind,
    pub fx: f64,
    pub fy: f64,
    pub amplitude: f64,
    pub solver: SolverOptions,
    pub homotopy_steps: usize,
    pub gn_constant: f64,
    pub cb_samples: usize,
    pub seed: u64,
    pub sweep: Option<SweepConfig>,
    /// Line of each key that was set, for error reporting.
    lines: BTreeMap<String, usize>,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            mesh: MeshConfig { domain: DomainKind::UnitSquare, length: 1.0, height: 1.0, nx: 8, ny: 8, order: 1 },
            params: ModelParams { mu: 1.0, alpha: 1.0, beta: 1.0, kappa: 0.0, r: 3.0, q: 1.0 },
            sp_kind: SuperpotentialKind::AbsVal,
            sp_c: 0.1,
            sp_delta: 1.0,
            sp_gap: 1.0,
            forcing_kind: ForcingKind::Constant,
            fx: 0.0,
            fy: 0.0,
            amplitude: 1.0,
            solver: SolverOptions::default(),
            homotopy_steps: 10,
            gn_constant: 1.0,
            cb_samples: 50,
            seed: 1,
            sweep: None,
            lines: BTreeMap::new(),
        }
    }
}

fn bad(line: usize, msg: impl Into<String>) -> CliError {
    CliError::BadConfig { line: Some(line), msg: msg.into() }
}

fn decimal(value: &str, line: usize) -> Result<f64, CliError> {
    let body = value.strip_prefix(['-', '+']).unwrap_or(value);
    let (mantissa, exponent) = match body.find(['e', 'E']) {
        Some(i) => (&body[..i], Some(&body[i + 1..])),
        None => (body, None),
    };
    let digits_ok = !mantissa.is_empty()
        && mantissa.chars().all(|c| c.is_ascii_digit() || c == '.')
        && mantissa.chars().filter(|&c| c == '.').count() <= 1
        && mantissa.chars().any(|c| c.is_ascii_digit());
    let exp_ok = exponent.is_none_or(|e| {
        let e = e.strip_prefix(['-', '+']).unwrap_or(e);
        !e.is_empty() && e.chars().all(|c| c.is_ascii_digit())
    });
    if !(digits_ok && exp_ok) {
        return Err(bad(line, format!("expected a decimal number, found `{value}`")));
    }
    value.parse().map_err(|_| bad(line, format!("expected a decimal number, found `{value}`")))
}

fn count(value: &str, line: usize) -> Result<usize, CliError> {
    if value.is_empty() || !value.chars().all(|c| c.is_ascii_digit()) {
        return Err(bad(line, format!("expected a nonnegative integer, found `{value}`")));
    }
    value.parse().map_err(|_| bad(line, format!("integer out of range: `{value}`")))
}

fn boolean(value: &str, line: usize) -> Result<bool, CliError> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(bad(line, format!("expected true or false, found `{value}`"))),
    }
}

/// Keys that take a number and may therefore be swept.
pub const NUMERIC_KEYS: &[&str] = &[
    "mesh.length",
    "mesh.height",
    "model.mu",
    "model.alpha",
    "model.beta",
    "model.kappa",
    "model.r",
    "model.q",
    "superpotential.c",
    "superpotential.delta",
    "superpotential.gap",
    "forcing.fx",
    "forcing.fy",
    "forcing.amplitude",
    "solver.tol",
    "solver.inner_tol",
    "constants.C",
];

impl Config {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::BadConfig { line: None, msg: format!("cannot read {}: {e}", path.display()) })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut cfg = Config::default();
        let mut sweep_key = None;
        let (mut sweep_from, mut sweep_to, mut sweep_points) = (None, None, None);
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| bad(line, format!("expected `key = value`, found `{content}`")))?;
            if cfg.lines.insert(key.to_string(), line).is_some() {
                return Err(bad(line, format!("duplicate key `{key}`")));
            }
            match key {
                "sweep.key" => {
                    if !NUMERIC_KEYS.contains(&value) {
                        return Err(bad(line, format!("`{value}` cannot be swept")));
                    }
                    sweep_key = Some(value.to_string());
                }
                "sweep.from" => sweep_from = Some(decimal(value, line)?),
                "sweep.to" => sweep_to = Some(decimal(value, line)?),
                "sweep.points" => sweep_points = Some(count(value, line)?),
                _ => cfg.set(key, value, line)?,
            }
        }
        match (sweep_key, sweep_from, sweep_to, sweep_points) {
            (None, None, None, None) => {}
            (Some(key), Some(from), Some(to), Some(points)) if points >= 1 => {
                cfg.sweep = Some(SweepConfig { key, from, to, points });
            }
            _ => {
                let line = cfg.lines.iter().filter(|(k, _)| k.starts_with("sweep.")).map(|(_, &l)| l).max();
                return Err(CliError::BadConfig {
                    line,
                    msg: "sweep needs sweep.key, sweep.from, sweep.to and sweep.points >= 1".into(),
                });
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Assigns one key; `line` is used for error messages.
    pub fn set(&mut self, key: &str, value: &str, line: usize) -> Result<(), CliError> {
        let num = || decimal(value, line);
        match key {
            "mesh.domain" => {
                self.mesh.domain = match value {
                    "unit_square" => DomainKind::UnitSquare,
                    "channel" => DomainKind::Channel,
                    _ => return Err(bad(line, format!("unknown domain `{value}`"))),
                }
            }
            "mesh.length" => self.mesh.length = num()?,
            "mesh.height" => self.mesh.height = num()?,
            "mesh.nx" => self.mesh.nx = count(value, line)?,
            "mesh.ny" => self.mesh.ny = count(value, line)?,
            "mesh.order" => self.mesh.order = count(value, line)?,
            "model.mu" => self.params.mu = num()?,
            "model.alpha" => self.params.alpha = num()?,
            "model.beta" => self.params.beta = num()?,
            "model.kappa" => self.params.kappa = num()?,
            "model.r" => self.params.r = num()?,
            "model.q" => self.params.q = num()?,
            "superpotential.kind" => {
                self.sp_kind = match value {
                    "quadratic" => SuperpotentialKind::Quadratic,
                    "absval" => SuperpotentialKind::AbsVal,
                    "cos_nonconvex" => SuperpotentialKind::CosNonconvex,
                    "jump_down" => SuperpotentialKind::JumpDown,
                    _ => return Err(bad(line, format!("unknown superpotential `{value}`"))),
                }
            }
            "superpotential.c" => self.sp_c = num()?,
            "superpotential.delta" => self.sp_delta = num()?,
            "superpotential.gap" => self.sp_gap = num()?,
            "forcing.kind" => {
                self.forcing_kind = match value {
                    "constant" => ForcingKind::Constant,
                    "vortex" => ForcingKind::Vortex,
                    "shear" => ForcingKind::Shear,
                    "boundary_layer" => ForcingKind::BoundaryLayer,
                    _ => return Err(bad(line, format!("unknown forcing `{value}`"))),
                }
            }
            "forcing.fx" => self.fx = num()?,
            "forcing.fy" => self.fy = num()?,
            "forcing.amplitude" => self.amplitude = num()?,
            "solver.tol" => self.solver.tol = num()?,
            "solver.kmax" => self.solver.kmax = count(value, line)?,
            "solver.inner_tol" => self.solver.inner_tol = num()?,
            "solver.inner_max_iter" => self.solver.inner_max_iter = count(value, line)?,
            "solver.force" => self.solver.force = boolean(value, line)?,
            "homotopy.steps" => self.homotopy_steps = count(value, line)?,
            "constants.C" => self.gn_constant = num()?,
            "constants.cb_samples" => self.cb_samples = count(value, line)?,
            "seed" => self.seed = count(value, line)? as u64,
            _ => return Err(bad(line, format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    fn line_of(&self, keys: &[&str]) -> Option<usize> {
        keys.iter().filter_map(|k| self.lines.get(*k).copied()).max()
    }

    /// Cross-key checks that a single assignment cannot see.
    pub fn validate(&self) -> Result<(), CliError> {
        let fail = |keys: &[&str], msg: String| CliError::BadConfig { line: self.line_of(keys), msg };
        self.params
            .validate()
            .map_err(|e| fail(&["model.mu", "model.alpha", "model.beta", "model.kappa", "model.r", "model.q"], e.to_string()))?;
        self.superpotential()
            .validate()
            .map_err(|e| fail(&["superpotential.kind", "superpotential.c", "superpotential.delta", "superpotential.gap"], e.to_string()))?;
        if self.mesh.nx == 0 || self.mesh.ny == 0 {
            return Err(fail(&["mesh.nx", "mesh.ny"], "mesh.nx and mesh.ny must be positive".into()));
        }
        if !(1..=2).contains(&self.mesh.order) {
            return Err(fail(&["mesh.order"], "mesh.order must be 1 or 2".into()));
        }
        if !(self.mesh.length > 0.0 && self.mesh.height > 0.0) {
            return Err(fail(&["mesh.length", "mesh.height"], "mesh.length and mesh.height must be positive".into()));
        }
        if !(self.solver.tol > 0.0 && self.solver.inner_tol > 0.0) {
            return Err(fail(&["solver.tol", "solver.inner_tol"], "tolerances must be positive".into()));
        }
        if self.solver.kmax == 0 || self.homotopy_steps == 0 || self.cb_samples == 0 {
            return Err(fail(
                &["solver.kmax", "homotopy.steps", "constants.cb_samples"],
                "solver.kmax, homotopy.steps and constants.cb_samples must be positive".into(),
            ));
        }
        if !(self.gn_constant > 0.0) {
            return Err(fail(&["constants.C"], "constants.C must be positive".into()));
        }
        Ok(())
    }

    pub fn superpotential(&self) -> Superpotential {
        match self.sp_kind {
            SuperpotentialKind::Quadratic => Superpotential::Quadratic { c: self.sp_c },
            SuperpotentialKind::AbsVal => Superpotential::AbsVal { c: self.sp_c },
            SuperpotentialKind::CosNonconvex => Superpotential::CosNonconvex { delta: self.sp_delta },
            SuperpotentialKind::JumpDown => Superpotential::JumpDown { gap: self.sp_gap },
        }
    }

    pub fn forcing(&self) -> Forcing {
        match self.forcing_kind {
            ForcingKind::Constant => Forcing::Constant { fx: self.fx, fy: self.fy },
            ForcingKind::Vortex => Forcing::Vortex { amplitude: self.amplitude },
            ForcingKind::Shear => Forcing::Shear { amplitude: self.amplitude },
            ForcingKind::BoundaryLayer => Forcing::BoundaryLayer { amplitude: self.amplitude },
        }
    }

    /// Copy with `key` set to `value`, re-validated.
    pub fn with_value(&self, key: &str, value: f64) -> Result<Self, CliError> {
        let mut c = self.clone();
        let line = self.lines.get("sweep.key").copied().unwrap_or(0);
        c.set(key, &format!("{value:e}"), line)?;
        c.validate()?;
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_defaults() {
        let cfg = Config::parse("# header\nmesh.nx = 4  # trailing\n\nmodel.alpha = 2.5\nsolver.tol = 1e-9\n").unwrap();
        assert_eq!(cfg.mesh.nx, 4);
        assert_eq!(cfg.mesh.ny, 8);
        assert_eq!(cfg.params.alpha, 2.5);
        assert_eq!(cfg.solver.tol, 1e-9);
    }

    #[test]
    fn reports_offending_line() {
        let err = Config::parse("mesh.nx = 4\nmodel.zeta = 1\n").unwrap_err();
        assert!(matches!(err, CliError::BadConfig { line: Some(2), .. }), "{err:?}");
        let err = Config::parse("model.mu = 0x10\n").unwrap_err();
        assert!(matches!(err, CliError::BadConfig { line: Some(1), .. }));
        let err = Config::parse("\n\nmodel.mu = -1\n").unwrap_err();
        assert!(matches!(err, CliError::BadConfig { line: Some(3), .. }));
    }

    #[test]
    fn rejects_non_decimal_literals() {
        for v in ["inf", "nan", "1/2", "", "1.2.3", "e5", "--1"] {
            assert!(decimal(v, 1).is_err(), "{v}");
        }
        for (v, x) in [("2", 2.0), ("-0.5", -0.5), ("3.", 3.0), (".5", 0.5), ("1e-3", 1e-3), ("+2E2", 200.0)] {
            assert_eq!(decimal(v, 1).unwrap(), x);
        }
    }

    #[test]
    fn sweep_requires_all_keys() {
        assert!(Config::parse("sweep.key = model.alpha\nsweep.from = 1\n").is_err());
        let cfg = Config::parse("sweep.key = model.alpha\nsweep.from = 1\nsweep.to = 3\nsweep.points = 5\n").unwrap();
        let s = cfg.sweep.clone().unwrap();
        assert_eq!((s.key.as_str(), s.points), ("model.alpha", 5));
        assert_eq!(cfg.with_value("model.alpha", 2.0).unwrap().params.alpha, 2.0);
        assert!(Config::parse("sweep.key = mesh.nx\n").is_err());
    }

    #[test]
    fn duplicate_keys_are_rejected() {
        let err = Config::parse("model.mu = 1\nmodel.mu = 2\n").unwrap_err();
        assert!(matches!(err, CliError::BadConfig { line: Some(2), .. }));
    }
}
