//! Flat `section.key = value` run configuration.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::grid::{make_grid, CoordMode, Grid, GridConfig};
use crate::radius::{alpha_of, delta_of, RadiusState};
use crate::solver::{Amplitude, InitFamily, InitialData, SolverConfig, SolverMode};

#[derive(Clone, Debug, PartialEq)]
pub struct RadiusConfig {
    pub tau0: f64,
    pub c0: f64,
    pub c1: f64,
    /// `None` composes `C₂ = 6 C₀ C₁`.
    pub c2: Option<f64>,
    /// Replace `c0` by the measured product constant before the run.
    pub calibrate: bool,
    pub calibration_trials: usize,
}

impl Default for RadiusConfig {
    fn default() -> Self {
        Self { tau0: 1.0, c0: 1.0, c1: 1.0, c2: None, calibrate: false, calibration_trials: 200 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerifyConfig {
    pub seed: u64,
    pub trials: usize,
    /// Largest `m` in the Poincaré and diagnostic checks.
    pub m_check: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self { seed: 7, trials: 100, m_check: 4 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub grid: GridConfig,
    pub kappa: f64,
    /// `None` derives `α = (1 − δ)/2`.
    pub alpha: Option<f64>,
    pub epsilon: f64,
    pub strict_regime: bool,
    pub fit_start: f64,
    pub fit_end: f64,
    pub radius: RadiusConfig,
    pub solver: SolverConfig,
    pub init: InitialData,
    pub init_custom_path: Option<PathBuf>,
    pub m_max: usize,
    pub verify: VerifyConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            grid: GridConfig::default(),
            kappa: 1.0,
            alpha: None,
            epsilon: 0.1,
            strict_regime: false,
            fit_start: 10.0,
            fit_end: 100.0,
            radius: RadiusConfig::default(),
            solver: SolverConfig::default(),
            init: InitialData::default(),
            init_custom_path: None,
            m_max: crate::norms::M_MAX_DEFAULT,
            verify: VerifyConfig::default(),
        }
    }
}

const KEYS: &[&str] = &[
    "grid.nx",
    "grid.lx",
    "grid.nz",
    "grid.zmax",
    "grid.mode",
    "grid.stretch",
    "lift.kappa",
    "weight.alpha",
    "run.epsilon",
    "run.strict_regime",
    "run.fit_start",
    "run.fit_end",
    "radius.tau0",
    "radius.c0",
    "radius.c1",
    "radius.c2",
    "radius.calibrate",
    "radius.calibration_trials",
    "solver.mode",
    "solver.nu",
    "solver.dt",
    "solver.t_end",
    "solver.cfl",
    "solver.snapshot_every",
    "solver.picard_iters",
    "init.family",
    "init.amplitude",
    "init.x_width",
    "init.z_width",
    "init.custom_path",
    "norms.m_max",
    "verify.seed",
    "verify.trials",
    "verify.m_check",
];

fn bad(key: &str, value: &str, what: &str) -> Error {
    Error::Config(format!("{key} = '{value}': expected {what}"))
}

fn real(key: &str, v: &str) -> Result<f64> {
    v.parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(|| bad(key, v, "a finite number"))
}

fn count(key: &str, v: &str) -> Result<usize> {
    v.parse::<usize>().map_err(|_| bad(key, v, "a nonnegative integer"))
}

fn flag(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(bad(key, v, "true or false")),
    }
}

fn optional(key: &str, v: &str) -> Result<Option<f64>> {
    if v == "auto" {
        Ok(None)
    } else {
        real(key, v).map(Some)
    }
}

impl RunConfig {
    pub fn alpha(&self) -> f64 {
        self.alpha.unwrap_or_else(|| alpha_of(self.epsilon))
    }

    pub fn delta(&self) -> f64 {
        delta_of(self.epsilon)
    }

    /// `C₂`, composed as `6 C₀ C₁` unless set explicitly.
    pub fn c2_for(&self, c0: f64) -> f64 {
        self.radius.c2.unwrap_or(6.0 * c0 * self.radius.c1)
    }

    /// Parses the flat format. Missing keys keep their defaults; unknown
    /// keys and malformed values are errors.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = BTreeSet::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| Error::Config(format!("line {}: expected 'key = value'", n + 1)))?;
            if !KEYS.contains(&key) {
                return Err(Error::Config(format!("line {}: unknown key '{key}'", n + 1)));
            }
            if !seen.insert(key.to_string()) {
                return Err(Error::Config(format!("line {}: duplicate key '{key}'", n + 1)));
            }
            cfg.set(key, value)?;
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::parse(&text)?;
        if let Some(p) = &cfg.init_custom_path {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    cfg.init_custom_path = Some(dir.join(p));
                }
            }
        }
        Ok(cfg)
    }

    fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "grid.nx" => self.grid.nx = count(key, v)?,
            "grid.lx" => self.grid.lx = real(key, v)?,
            "grid.nz" => self.grid.nz = count(key, v)?,
            "grid.zmax" => self.grid.zmax = real(key, v)?,
            "grid.mode" => self.grid.mode = v.parse::<CoordMode>()?,
            "grid.stretch" => self.grid.stretch = real(key, v)?,
            "lift.kappa" => self.kappa = real(key, v)?,
            "weight.alpha" => self.alpha = optional(key, v)?,
            "run.epsilon" => self.epsilon = real(key, v)?,
            "run.strict_regime" => self.strict_regime = flag(key, v)?,
            "run.fit_start" => self.fit_start = real(key, v)?,
            "run.fit_end" => self.fit_end = real(key, v)?,
            "radius.tau0" => self.radius.tau0 = real(key, v)?,
            "radius.c0" => self.radius.c0 = real(key, v)?,
            "radius.c1" => self.radius.c1 = real(key, v)?,
            "radius.c2" => self.radius.c2 = optional(key, v)?,
            "radius.calibrate" => self.radius.calibrate = flag(key, v)?,
            "radius.calibration_trials" => self.radius.calibration_trials = count(key, v)?,
            "solver.mode" => self.solver.mode = v.parse::<SolverMode>()?,
            "solver.nu" => self.solver.nu = real(key, v)?,
            "solver.dt" => self.solver.dt_init = real(key, v)?,
            "solver.t_end" => self.solver.t_end = real(key, v)?,
            "solver.cfl" => self.solver.cfl = real(key, v)?,
            "solver.snapshot_every" => self.solver.snapshot_every = real(key, v)?,
            "solver.picard_iters" => self.solver.picard_iters = count(key, v)?,
            "init.family" => self.init.family = v.parse::<InitFamily>()?,
            "init.amplitude" => self.init.amplitude = v.parse::<Amplitude>()?,
            "init.x_width" => self.init.x_width = real(key, v)?,
            "init.z_width" => self.init.z_width = real(key, v)?,
            "init.custom_path" => self.init_custom_path = Some(PathBuf::from(v)),
            "norms.m_max" => self.m_max = count(key, v)?,
            "verify.seed" => self.verify.seed = v.parse::<u64>().map_err(|_| bad(key, v, "an unsigned integer"))?,
            "verify.trials" => self.verify.trials = count(key, v)?,
            "verify.m_check" => self.verify.m_check = count(key, v)?,
            _ => unreachable!("key list and setter disagree on {key}"),
        }
        Ok(())
    }

    /// Checks every section and returns the grid. In strict mode the
    /// parameter regime is enforced (`Error::Regime`).
    pub fn validate(&self) -> Result<Grid> {
        let grid = make_grid(self.grid.clone())?;
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::Config(format!("run.epsilon must lie in (0, 1) (got {})", self.epsilon)));
        }
        let a = self.alpha();
        if !(0.25..=0.5).contains(&a) {
            return Err(Error::Config(format!("weight.alpha = {a} outside [1/4, 1/2]")));
        }
        if !(self.fit_start >= 0.0 && self.fit_end > self.fit_start) {
            return Err(Error::Config("run.fit_start must be ≥ 0 and below run.fit_end".into()));
        }
        if self.m_max == 0 || self.m_max > crate::norms::M_MAX_HARD {
            return Err(Error::Config(format!("norms.m_max must lie in 1..={}", crate::norms::M_MAX_HARD)));
        }
        if self.radius.c1 <= 0.0 {
            return Err(Error::Config("radius.c1 must be positive".into()));
        }
        if self.radius.calibrate && self.radius.calibration_trials == 0 {
            return Err(Error::Config("radius.calibration_trials must be positive".into()));
        }
        self.solver.validate(&grid)?;
        if self.init.family != InitFamily::Custom || self.init.custom.is_some() {
            self.init.validate()?;
        } else if self.init_custom_path.is_none() {
            return Err(Error::Config("init.family = custom needs init.custom_path".into()));
        }
        let c0 = self.radius.c0;
        RadiusState::new(self.radius.tau0, c0, self.c2_for(c0), self.epsilon, self.strict_regime)?;
        Ok(grid)
    }

    /// Every key with its effective value, one per line, in a fixed order.
    pub fn echo(&self) -> String {
        let mut s = String::new();
        let o = |v: Option<f64>| v.map_or_else(|| "auto".to_string(), |x| x.to_string());
        let lines: Vec<(&str, String)> = vec![
            ("grid.nx", self.grid.nx.to_string()),
            ("grid.lx", self.grid.lx.to_string()),
            ("grid.nz", self.grid.nz.to_string()),
            ("grid.zmax", self.grid.zmax.to_string()),
            ("grid.mode", self.grid.mode.to_string()),
            ("grid.stretch", self.grid.stretch.to_string()),
            ("lift.kappa", self.kappa.to_string()),
            ("weight.alpha", o(self.alpha)),
            ("run.epsilon", self.epsilon.to_string()),
            ("run.strict_regime", self.strict_regime.to_string()),
            ("run.fit_start", self.fit_start.to_string()),
            ("run.fit_end", self.fit_end.to_string()),
            ("radius.tau0", self.radius.tau0.to_string()),
            ("radius.c0", self.radius.c0.to_string()),
            ("radius.c1", self.radius.c1.to_string()),
            ("radius.c2", o(self.radius.c2)),
            ("radius.calibrate", self.radius.calibrate.to_string()),
            ("radius.calibration_trials", self.radius.calibration_trials.to_string()),
            ("solver.mode", self.solver.mode.to_string()),
            ("solver.nu", self.solver.nu.to_string()),
            ("solver.dt", self.solver.dt_init.to_string()),
            ("solver.t_end", self.solver.t_end.to_string()),
            ("solver.cfl", self.solver.cfl.to_string()),
            ("solver.snapshot_every", self.solver.snapshot_every.to_string()),
            ("solver.picard_iters", self.solver.picard_iters.to_string()),
            ("init.family", self.init.family.to_string()),
            ("init.amplitude", self.init.amplitude.to_string()),
            ("init.x_width", self.init.x_width.to_string()),
            ("init.z_width", self.init.z_width.to_string()),
            (
                "init.custom_path",
                self.init_custom_path.as_ref().map_or_else(|| "none".to_string(), |p| p.display().to_string()),
            ),
            ("norms.m_max", self.m_max.to_string()),
            ("verify.seed", self.verify.seed.to_string()),
            ("verify.trials", self.verify.trials.to_string()),
            ("verify.m_check", self.verify.m_check.to_string()),
        ];
        debug_assert_eq!(lines.len(), KEYS.len());
        for (k, v) in lines {
            if k == "init.custom_path" && v == "none" {
                continue;
            }
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    /// First 16 hex digits of the SHA-256 of [`Self::echo`].
    pub fn run_id(&self) -> String {
        let d = Sha256::digest(self.echo().as_bytes());
        hex::encode(&d[..8])
    }
}
