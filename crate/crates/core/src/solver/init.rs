//! Initial data `u₀ = ±A b(x) η(z)` with a periodised bump
//! `b(x) = exp(−((l_x/π) sin(πx/l_x))² / w²)` and `η(z) = z e^{−z²/4σ²}`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::goodunknown::{g_from_u, impose_boundary_rows};
use crate::grid::{Field, Grid};
use crate::norms::{seminorm_ladder, M_MAX_HARD};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InitFamily {
    /// Positive bump: `u₀ = A b η`.
    GaussianBump,
    /// `u₀ = −A b η`; for `A > κ/√π` the wall vorticity changes sign.
    SignChanging,
    /// A caller-supplied `u₀`.
    Custom,
}

impl fmt::Display for InitFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::GaussianBump => "gaussian_bump",
            Self::SignChanging => "sign_changing",
            Self::Custom => "custom",
        })
    }
}

impl FromStr for InitFamily {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian_bump" => Ok(Self::GaussianBump),
            "sign_changing" => Ok(Self::SignChanging),
            "custom" => Ok(Self::Custom),
            _ => Err(Error::Config(format!("unknown init family '{s}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Amplitude {
    /// Scale so that `‖g₀‖_{X_{2τ₀,1/2}} = ε`.
    Auto,
    Value(f64),
}

impl fmt::Display for Amplitude {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Auto => f.write_str("auto"),
            Self::Value(v) => write!(f, "{v}"),
        }
    }
}

impl FromStr for Amplitude {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s == "auto" {
            return Ok(Self::Auto);
        }
        s.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .map(Self::Value)
            .ok_or_else(|| Error::Config(format!("amplitude must be 'auto' or a number (got '{s}')")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct InitialData {
    pub family: InitFamily,
    pub amplitude: Amplitude,
    pub x_width: f64,
    /// `σ` in `η(z) = z e^{−z²/4σ²}`.
    pub z_width: f64,
    /// `u₀` for [`InitFamily::Custom`], sampled at `t = 0`.
    pub custom: Option<Field>,
}

impl Default for InitialData {
    fn default() -> Self {
        Self {
            family: InitFamily::GaussianBump,
            amplitude: Amplitude::Auto,
            x_width: 1.0,
            z_width: std::f64::consts::FRAC_1_SQRT_2,
            custom: None,
        }
    }
}

impl InitialData {
    pub fn sign_changing() -> Self {
        Self { family: InitFamily::SignChanging, amplitude: Amplitude::Value(1.0), ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.x_width > 0.0 && self.z_width > 0.0) {
            return Err(Error::Config("init.x_width and init.z_width must be positive".into()));
        }
        if self.z_width > 1.0 {
            // e^{z²/4} η must stay bounded
            return Err(Error::Config(format!("init.z_width = {} exceeds 1", self.z_width)));
        }
        if self.family == InitFamily::Custom && self.custom.is_none() {
            return Err(Error::Config("custom init family needs a u0 field".into()));
        }
        Ok(())
    }
}

/// Unit-amplitude shape `b(x) η(z)` with the family's sign, masked to the
/// retained modes.
fn shape(grid: &Grid, init: &InitialData) -> Result<Field> {
    let raw = match init.family {
        InitFamily::Custom => {
            let u = init.custom.clone().ok_or_else(|| Error::Config("custom init family needs a u0 field".into()))?;
            grid.check(&u)?;
            if u.time() != 0.0 {
                return Err(Error::InvalidArgument(format!("custom u0 sampled at t = {}", u.time())));
            }
            u
        }
        fam => {
            let sign = if fam == InitFamily::SignChanging { -1.0 } else { 1.0 };
            let lx = grid.lx();
            let (w2, s2) = (init.x_width * init.x_width, init.z_width * init.z_width);
            Field::from_fn_z(grid, 0.0, |x, z| {
                let p = lx / std::f64::consts::PI * (std::f64::consts::PI * x / lx).sin();
                sign * (-p * p / w2).exp() * z * (-z * z / (4.0 * s2)).exp()
            })?
        }
    };
    Ok(raw.with_values(grid.spectral().dealias(raw.values().view())))
}

/// `u₀` at amplitude `a` (ignored for custom data).
pub fn initial_velocity(grid: &Grid, init: &InitialData, a: f64) -> Result<Field> {
    init.validate()?;
    let s = shape(grid, init)?;
    if init.family == InitFamily::Custom {
        return Ok(s);
    }
    let vals = s.values().mapv(|v| a * v);
    Ok(s.with_values(vals))
}

/// Datum in both formulations.
#[derive(Clone, Debug)]
pub struct PreparedInit {
    pub u0: Field,
    pub g0: Field,
    pub amplitude: f64,
}

/// Builds `u₀` and `g₀ = g_from_u(u₀)` with the boundary rows imposed, and
/// checks that the ladder of `g₀` converges at `2τ₀`.
pub fn initial_good_unknown(grid: &Grid, init: &InitialData, tau0: f64, epsilon: f64) -> Result<PreparedInit> {
    init.validate()?;
    let unit = shape(grid, init)?;
    let g_of = |u: &Field| -> Result<Field> {
        let mut g = g_from_u(grid, u)?.into_values();
        impose_boundary_rows(&mut g);
        Field::new(grid, g, 0.0)
    };
    let g_unit = g_of(&unit)?;
    let ladder = seminorm_ladder(grid, &g_unit, 2.0 * tau0, 0.5, M_MAX_HARD)?;
    let amplitude = match (init.family, init.amplitude) {
        (InitFamily::Custom, _) => 1.0,
        (_, Amplitude::Value(a)) => a,
        (_, Amplitude::Auto) => {
            if ladder.sums.x == 0.0 {
                return Err(Error::InvalidArgument("initial shape has zero norm".into()));
            }
            epsilon / ladder.sums.x
        }
    };
    let u0 = unit.with_values(unit.values().mapv(|v| amplitude * v));
    let g0 = g_unit.with_values(g_unit.values().mapv(|v| amplitude * v));
    Ok(PreparedInit { u0, g0, amplitude })
}
