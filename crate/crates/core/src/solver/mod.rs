//! Time integration of the good-unknown system, its ν-regularised and
//! Picard variants, and the velocity-form reference integrator.

mod init;
mod picard;
mod run;
mod stepper;

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::grid::Grid;

pub use init::{initial_good_unknown, initial_velocity, Amplitude, InitFamily, InitialData, PreparedInit};
pub use picard::{run_picard, PicardReport};
pub use run::{run_simulation, RunOutcome, Termination};
pub use stepper::{rhs_good_unknown, rhs_velocity_form, step_imex, Forcing, Formulation, Stepper};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolverMode {
    GoodUnknown,
    GoodUnknownNu,
    PicardTwoStep,
    VelocityForm,
}

impl fmt::Display for SolverMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::GoodUnknown => "good_unknown",
            Self::GoodUnknownNu => "good_unknown_nu",
            Self::PicardTwoStep => "picard_two_step",
            Self::VelocityForm => "velocity_form",
        })
    }
}

impl FromStr for SolverMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "good_unknown" => Ok(Self::GoodUnknown),
            "good_unknown_nu" => Ok(Self::GoodUnknownNu),
            "picard_two_step" => Ok(Self::PicardTwoStep),
            "velocity_form" => Ok(Self::VelocityForm),
            _ => Err(Error::Config(format!(
                "unknown solver mode '{s}' (good_unknown, good_unknown_nu, picard_two_step, velocity_form)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    pub mode: SolverMode,
    /// Tangential dissipation.
    pub nu: f64,
    pub dt_init: f64,
    pub t_end: f64,
    /// Advective safety factor.
    pub cfl: f64,
    pub snapshot_every: f64,
    pub picard_iters: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            mode: SolverMode::GoodUnknown,
            nu: 0.0,
            dt_init: 0.02,
            t_end: 100.0,
            cfl: 0.4,
            snapshot_every: 1.0,
            picard_iters: 8,
        }
    }
}

impl SolverConfig {
    /// Range checks plus the coupling between `ν` and the retained modes.
    pub fn validate(&self, grid: &Grid) -> Result<()> {
        let pos = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("solver.{name} must be positive (got {v})")))
            }
        };
        pos("dt", self.dt_init)?;
        pos("t_end", self.t_end)?;
        pos("cfl", self.cfl)?;
        pos("snapshot_every", self.snapshot_every)?;
        if !(self.nu >= 0.0 && self.nu.is_finite()) {
            return Err(Error::Config(format!("solver.nu must be nonnegative (got {})", self.nu)));
        }
        let dissipative = matches!(self.mode, SolverMode::GoodUnknownNu | SolverMode::PicardTwoStep);
        if dissipative != (self.nu > 0.0) {
            return Err(Error::Config(format!(
                "solver.nu = {} but mode {} {} tangential dissipation",
                self.nu,
                self.mode,
                if dissipative { "requires" } else { "forbids" }
            )));
        }
        if dissipative {
            let modes = grid.spectral().cutoff() as f64;
            if modes * self.nu < 1.0 {
                return Err(Error::Config(format!(
                    "nu = {} needs nx/3 ≥ 1/nu, but only {modes} modes are retained",
                    self.nu
                )));
            }
        }
        if self.mode == SolverMode::PicardTwoStep {
            if self.picard_iters < 3 {
                return Err(Error::Config(format!("solver.picard_iters must be ≥ 3 (got {})", self.picard_iters)));
            }
            if self.t_end > 1.0 {
                return Err(Error::Config(format!("picard horizon t_end = {} exceeds 1", self.t_end)));
            }
        }
        Ok(())
    }

    pub(crate) fn formulation(&self) -> Formulation {
        match self.mode {
            SolverMode::VelocityForm => Formulation::Velocity,
            _ => Formulation::GoodUnknown,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_grid, GridConfig};

    #[test]
    fn mode_names_roundtrip() {
        for m in [SolverMode::GoodUnknown, SolverMode::GoodUnknownNu, SolverMode::PicardTwoStep, SolverMode::VelocityForm] {
            assert_eq!(m.to_string().parse::<SolverMode>().unwrap(), m);
        }
        assert!("rk4".parse::<SolverMode>().is_err());
    }

    #[test]
    fn nu_rules() {
        let g32 = make_grid(GridConfig::default()).unwrap();
        let g64 = make_grid(GridConfig { nx: 64, ..GridConfig::default() }).unwrap();
        let mut c = SolverConfig::default();
        assert!(c.validate(&g32).is_ok());
        c.nu = 0.1;
        assert!(c.validate(&g32).is_err());
        c.mode = SolverMode::GoodUnknownNu;
        assert!(c.validate(&g32).is_ok());
        c.nu = 0.05;
        assert!(c.validate(&g32).is_err());
        assert!(c.validate(&g64).is_ok());
        c.mode = SolverMode::PicardTwoStep;
        assert!(c.validate(&g64).is_err(), "horizon 100 is too long");
        c.t_end = 1.0;
        assert!(c.validate(&g64).is_ok());
    }
}
