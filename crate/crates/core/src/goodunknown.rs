//! Maps between the good unknown `g` and the velocity `(u, v)`:
//!
//! * `g = ∂_y u + (y/2⟨t⟩) u`
//! * `u = U(g) = e^{-y²/4⟨t⟩} ∫₀^y g e^{ȳ²/4⟨t⟩} dȳ`
//! * `v = V(g) = -∫₀^y U(∂_x g) dȳ`

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::grid::{bracket, Field, Grid};
use crate::stencil::NEUMANN_ROW;

/// `∂_y u + (y/2⟨t⟩) u`, with the one-sided stencil at the wall.
pub fn g_from_u(grid: &Grid, u: &Field) -> Result<Field> {
    grid.check(u)?;
    let scale = u.max_abs().max(1.0);
    if let Some(bad) = u.values().column(0).iter().find(|v| v.abs() > 1e-10 * scale) {
        return Err(Error::Boundary(format!("u(x, 0) = {bad:.3e}, expected 0")));
    }
    Ok(u.with_values(g_from_u_values(grid, u.values().view(), u.time())))
}

pub(crate) fn g_from_u_values(grid: &Grid, u: ArrayView2<f64>, t: f64) -> Array2<f64> {
    let mut g = grid.d_y(u, t);
    let y = grid.y_nodes(t);
    let c = 0.5 / bracket(t);
    for (mut row, urow) in g.rows_mut().into_iter().zip(u.rows()) {
        for ((gv, uv), yj) in row.iter_mut().zip(urow).zip(&y) {
            *gv += c * yj * uv;
        }
    }
    g
}

/// `U(g)` by the trapezoid rule on the stable kernel
/// `exp((ȳ² - y²)/4⟨t⟩) ≤ 1`. Row 0 is exactly zero.
pub fn recover_u(grid: &Grid, g: &Field) -> Result<Field> {
    grid.check(g)?;
    Ok(g.with_values(recover_u_values(grid, g.values().view(), g.time())))
}

pub(crate) fn recover_u_values(grid: &Grid, g: ArrayView2<f64>, t: f64) -> Array2<f64> {
    let y = grid.y_nodes(t);
    let q = 0.25 / bracket(t);
    let nz = y.len();
    let decay = (1..nz).map(|j| (q * (y[j - 1] - y[j]) * (y[j - 1] + y[j])).exp()).collect::<Vec<_>>();
    let mut u = Array2::zeros(g.dim());
    for (mut urow, grow) in u.rows_mut().into_iter().zip(g.rows()) {
        let mut acc = 0.0;
        for j in 1..nz {
            let e = decay[j - 1];
            acc = acc * e + 0.5 * (y[j] - y[j - 1]) * (grow[j - 1] * e + grow[j]);
            urow[j] = acc;
        }
    }
    u
}

/// Cumulative trapezoid `∫₀^y f dȳ` along every x-row.
pub(crate) fn integrate_normal(grid: &Grid, f: ArrayView2<f64>, t: f64) -> Array2<f64> {
    let y = grid.y_nodes(t);
    let mut out = Array2::zeros(f.dim());
    for (mut orow, frow) in out.rows_mut().into_iter().zip(f.rows()) {
        let mut acc = 0.0;
        for j in 1..y.len() {
            acc += 0.5 * (y[j] - y[j - 1]) * (frow[j - 1] + frow[j]);
            orow[j] = acc;
        }
    }
    out
}

/// `V(g) = -∫₀^y U(∂_x g)`, with `∂_x` taken spectrally.
pub fn recover_v(grid: &Grid, g: &Field) -> Result<Field> {
    grid.check(g)?;
    let gx = grid.spectral().derivative(g.values().view(), 1, false);
    Ok(g.with_values(recover_v_from_gx(grid, gx.view(), g.time())))
}

pub(crate) fn recover_v_from_gx(grid: &Grid, gx: ArrayView2<f64>, t: f64) -> Array2<f64> {
    let ux = recover_u_values(grid, gx, t);
    let mut v = integrate_normal(grid, ux.view(), t);
    v.mapv_inplace(|a| -a);
    v
}

/// Overwrites the wall row so the one-sided derivative vanishes and zeroes
/// the top row.
pub fn impose_boundary_rows(g: &mut Array2<f64>) {
    let nz = g.ncols();
    for mut row in g.rows_mut() {
        let s: f64 = (1..5).map(|k| NEUMANN_ROW[k] * row[k]).sum();
        row[0] = -s / NEUMANN_ROW[0];
        row[nz - 1] = 0.0;
    }
}

/// `g` together with the velocity recovered from it.
#[derive(Clone, Debug)]
pub struct StateBundle {
    pub g: Field,
    pub u: Field,
    pub v: Field,
    pub t: f64,
}

impl StateBundle {
    pub fn from_g(grid: &Grid, g: Field) -> Result<Self> {
        let u = recover_u(grid, &g)?;
        let v = recover_v(grid, &g)?;
        let t = g.time();
        Ok(Self { g, u, v, t })
    }

    /// `ω = ∂_y u`, derived on demand.
    pub fn omega(&self, grid: &Grid) -> Field {
        self.u.with_values(grid.d_y(self.u.values().view(), self.t))
    }
}
