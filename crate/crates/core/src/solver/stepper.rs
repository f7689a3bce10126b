//! Time stepping in the node coordinate `ξ`, `y = s(t) ξ`.
//!
//! Each retained Fourier mode `k` is advanced by Crank–Nicolson on
//! `A_k = s⁻² ∂_ξ² + (ṡ/s) ξ ∂_ξ − c/⟨t⟩ − i k κ Φ(z)` (with `c = 1` for the
//! good unknown and `0` for the velocity), tangential dissipation `ν k²` is
//! integrated exactly, and the remaining terms `N` are explicit through a
//! Heun predictor–corrector:
//!
//! ```text
//! (I − dt/2 A⁺) Ĝ*    = E [(I + dt/2 A⁰) Ĝⁿ + dt Nⁿ]
//! (I − dt/2 A⁺) Ĝⁿ⁺¹ = E [(I + dt/2 A⁰) Ĝⁿ + dt/2 Nⁿ] + dt/2 N*
//! ```
//!
//! with `E = exp(−ν k² dt)`.

use std::sync::Arc;

use ndarray::{Array2, ArrayView2};
use rustfft::num_complex::Complex64;

use crate::banded::BandLu;
use crate::error::{Error, Result};
use crate::goodunknown::{recover_u_values, recover_v_from_gx};
use crate::grid::{bracket, Field, Grid};
use crate::lift::{lift_phi_y, phi_profile};

/// Explicit term at `(t, state)`, in spectral space.
pub(crate) type Explicit<'a> = dyn FnMut(f64, ArrayView2<f64>) -> Result<Array2<Complex64>> + 'a;

/// Forcing `f(t)` sampled on the grid nodes at time `t`.
pub type Forcing = Arc<dyn Fn(f64) -> Array2<f64> + Send + Sync>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Formulation {
    /// `g`, Neumann at the wall.
    GoodUnknown,
    /// Velocity perturbation `u = u^P − κφ`, Dirichlet at the wall.
    Velocity,
}

#[derive(Clone)]
pub struct Stepper {
    grid: Grid,
    form: Formulation,
    kappa: f64,
    nu: f64,
    forcing: Option<Forcing>,
}

impl std::fmt::Debug for Stepper {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Stepper")
            .field("form", &self.form)
            .field("kappa", &self.kappa)
            .field("nu", &self.nu)
            .field("forced", &self.forcing.is_some())
            .finish()
    }
}

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

impl Stepper {
    pub fn new(grid: &Grid, form: Formulation, kappa: f64, nu: f64) -> Self {
        Self { grid: grid.clone(), form, kappa, nu, forcing: None }
    }

    pub fn with_forcing(mut self, forcing: Forcing) -> Self {
        self.forcing = Some(forcing);
        self
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn formulation(&self) -> Formulation {
        self.form
    }

    /// One step of the full nonlinear problem.
    pub fn step(&self, state: &Field, dt: f64) -> Result<Field> {
        self.grid.check(state)?;
        let t = state.time();
        let out = self.cn_heun(state.values().view(), t, dt, &mut |tt, v| self.explicit_spectral(v, tt))?;
        Ok(Field::from_parts(&self.grid, out, t + dt))
    }

    /// One step of the linear problem driven by a caller-supplied explicit
    /// term (spectral, already dealiased).
    pub(crate) fn step_with(
        &self,
        state: ArrayView2<f64>,
        t: f64,
        dt: f64,
        explicit: &mut Explicit<'_>,
    ) -> Result<Array2<f64>> {
        self.cn_heun(state, t, dt, explicit)
    }

    /// `dt · max|u + κφ| / Δx`.
    pub fn advective_cfl(&self, state: &Field, dt: f64) -> f64 {
        let t = state.time();
        let u = match self.form {
            Formulation::GoodUnknown => recover_u_values(&self.grid, state.values().view(), t),
            Formulation::Velocity => state.values().clone(),
        };
        let z = self.grid.z_nodes(t);
        let mut vmax = 0.0f64;
        for row in u.rows() {
            for (uv, zj) in row.iter().zip(&z) {
                vmax = vmax.max((uv + self.kappa * phi_profile(*zj)).abs());
            }
        }
        dt * vmax / self.grid.dx()
    }

    /// Explicit terms handled by the predictor–corrector, spectral and masked.
    fn explicit_spectral(&self, values: ArrayView2<f64>, t: f64) -> Result<Array2<Complex64>> {
        let mut n = match self.form {
            Formulation::GoodUnknown => nonlinear_good(&self.grid, values, t),
            Formulation::Velocity => nonlinear_velocity(&self.grid, values, t, self.kappa),
        };
        if let Some(f) = &self.forcing {
            n += &f(t);
        }
        if let Some(((i, j), v)) = n.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { t, detail: format!("explicit tendency ({i},{j}) = {v}") });
        }
        let sp = self.grid.spectral();
        let mut c = sp.forward(n.view());
        sp.mask(&mut c);
        Ok(c)
    }

    fn damping(&self, t: f64) -> f64 {
        match self.form {
            Formulation::GoodUnknown => 1.0 / bracket(t),
            Formulation::Velocity => 0.0,
        }
    }

    /// `A_k(t) x` on the interior rows; boundary rows are left at zero.
    fn apply_a(&self, t: f64, k: f64, x: &[Complex64], out: &mut [Complex64]) {
        let gr = &self.grid;
        let nz = gr.nz();
        let s = gr.scale(t);
        let inv_s2 = 1.0 / (s * s);
        let rate = gr.drift_rate(t);
        let c = self.damping(t);
        let xi = gr.nodes();
        let z = gr.z_nodes(t);
        let (d1, d2) = (gr.d1(), gr.d2());
        for i in 1..nz - 1 {
            let mut acc = ZERO;
            for j in d2.row_span(i) {
                let w = inv_s2 * d2.get(i, j) + rate * xi[i] * d1.get(i, j);
                acc += x[j] * w;
            }
            let diag = Complex64::new(-c, -k * self.kappa * phi_profile(z[i]));
            out[i] = acc + diag * x[i];
        }
        out[0] = ZERO;
        out[nz - 1] = ZERO;
    }

    /// Factorisation of `I − (dt/2) A_k(t)` with the boundary rows.
    fn factor_lhs(&self, t: f64, k: f64, dt: f64) -> Result<BandLu> {
        let gr = &self.grid;
        let nz = gr.nz();
        let (d1, d2) = (gr.d1(), gr.d2());
        let kl = d1.kl().max(d2.kl());
        let ku = d1.ku().max(d2.ku());
        let mut lu = BandLu::new(nz, kl, ku);
        let s = gr.scale(t);
        let inv_s2 = 1.0 / (s * s);
        let rate = gr.drift_rate(t);
        let c = self.damping(t);
        let xi = gr.nodes();
        let z = gr.z_nodes(t);
        let h = 0.5 * dt;
        match self.form {
            Formulation::GoodUnknown => {
                for j in d1.row_span(0) {
                    lu.set(0, j, Complex64::new(d1.get(0, j), 0.0));
                }
            }
            Formulation::Velocity => lu.set(0, 0, Complex64::new(1.0, 0.0)),
        }
        for i in 1..nz - 1 {
            for j in d2.row_span(i) {
                let w = inv_s2 * d2.get(i, j) + rate * xi[i] * d1.get(i, j);
                lu.set(i, j, Complex64::new(-h * w, 0.0));
            }
            let diag = Complex64::new(-c, -k * self.kappa * phi_profile(z[i]));
            lu.add(i, i, Complex64::new(1.0, 0.0) - h * diag);
        }
        lu.set(nz - 1, nz - 1, Complex64::new(1.0, 0.0));
        lu.factor().map_err(|p| Error::NonFinite {
            t,
            detail: format!("singular implicit system at row {} (k = {k})", p.0),
        })?;
        Ok(lu)
    }

    fn cn_heun(
        &self,
        values: ArrayView2<f64>,
        t: f64,
        dt: f64,
        explicit: &mut Explicit<'_>,
    ) -> Result<Array2<f64>> {
        let gr = &self.grid;
        let sp = gr.spectral();
        let (nx, nz) = (gr.nx(), gr.nz());
        let cut = sp.cutoff();
        let mut g_hat = sp.forward(values);
        sp.mask(&mut g_hat);
        let n0 = explicit(t, values)?;

        let mut lus = Vec::with_capacity(cut + 1);
        let mut base = Array2::<Complex64>::zeros((nx, nz));
        let mut pred = Array2::<Complex64>::zeros((nx, nz));
        let mut col = vec![ZERO; nz];
        let mut acol = vec![ZERO; nz];
        for n in 0..=cut {
            let k = sp.wavenumber(n);
            let e = (-self.nu * k * k * dt).exp();
            col.iter_mut().zip(g_hat.row(n)).for_each(|(c, g)| *c = *g);
            self.apply_a(t, k, &col, &mut acol);
            for j in 1..nz - 1 {
                base[[n, j]] = e * (col[j] + 0.5 * dt * acol[j]);
            }
            let lu = self.factor_lhs(t + dt, k, dt)?;
            let mut rhs = (0..nz)
                .map(|j| if j == 0 || j == nz - 1 { ZERO } else { base[[n, j]] + e * dt * n0[[n, j]] })
                .collect::<Vec<_>>();
            lu.solve(&mut rhs);
            pred.row_mut(n).iter_mut().zip(&rhs).for_each(|(p, r)| *p = *r);
            lus.push((lu, e));
        }
        fill_conjugates(&mut pred, cut);
        let pred_phys = sp.inverse(&pred);
        let n1 = explicit(t + dt, pred_phys.view())?;

        let mut out = Array2::<Complex64>::zeros((nx, nz));
        for (n, (lu, e)) in lus.iter().enumerate() {
            let mut rhs = (0..nz)
                .map(|j| {
                    if j == 0 || j == nz - 1 {
                        ZERO
                    } else {
                        base[[n, j]] + 0.5 * dt * (*e * n0[[n, j]] + n1[[n, j]])
                    }
                })
                .collect::<Vec<_>>();
            lu.solve(&mut rhs);
            out.row_mut(n).iter_mut().zip(&rhs).for_each(|(p, r)| *p = *r);
        }
        fill_conjugates(&mut out, cut);
        let phys = sp.inverse(&out);
        if let Some(((i, j), v)) = phys.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { t: t + dt, detail: format!("state ({i},{j}) = {v}") });
        }
        Ok(phys)
    }
}

fn fill_conjugates(c: &mut Array2<Complex64>, cut: usize) {
    let nx = c.nrows();
    for j in 0..c.ncols() {
        c[[0, j]].im = 0.0;
    }
    for n in 1..=cut {
        for j in 0..c.ncols() {
            c[[nx - n, j]] = c[[n, j]].conj();
        }
    }
}

/// `−u ∂_x g − v ∂_y g + v u / (2⟨t⟩)` on the grid.
pub(crate) fn nonlinear_good(grid: &Grid, g: ArrayView2<f64>, t: f64) -> Array2<f64> {
    let sp = grid.spectral();
    let gx = sp.derivative(g, 1, true);
    let u = recover_u_values(grid, g, t);
    let v = recover_v_from_gx(grid, gx.view(), t);
    let gy = grid.d_y(g, t);
    let c = 0.5 / bracket(t);
    let mut out = Array2::zeros(g.dim());
    ndarray::Zip::from(&mut out)
        .and(&u)
        .and(&v)
        .and(&gx)
        .and(&gy)
        .for_each(|o, &u, &v, &gx, &gy| *o = -u * gx - v * gy + c * v * u);
    out
}

/// `−κ v ∂_y φ − u ∂_x u − v ∂_y u` for the velocity perturbation.
pub(crate) fn nonlinear_velocity(grid: &Grid, u: ArrayView2<f64>, t: f64, kappa: f64) -> Array2<f64> {
    let sp = grid.spectral();
    let ux = sp.derivative(u, 1, true);
    let mut v = crate::goodunknown::integrate_normal(grid, ux.view(), t);
    v.mapv_inplace(|a| -a);
    let uy = grid.d_y(u, t);
    let y = grid.y_nodes(t);
    let phi_y = y.iter().map(|y| lift_phi_y(t, *y)).collect::<Vec<_>>();
    let mut out = Array2::zeros(u.dim());
    for i in 0..u.nrows() {
        for j in 0..u.ncols() {
            out[[i, j]] = -kappa * v[[i, j]] * phi_y[j] - u[[i, j]] * ux[[i, j]] - v[[i, j]] * uy[[i, j]];
        }
    }
    out
}

/// Explicit part of the good-unknown tendency in the grid's coordinates:
/// `(ṡ/s) ξ ∂_ξ g − (u + κφ) ∂_x g − v ∂_y g − g/⟨t⟩ + v u/(2⟨t⟩)`.
/// The first term is the coordinate drift, absent in physical mode.
pub fn rhs_good_unknown(grid: &Grid, g: &Field, kappa: f64) -> Result<Field> {
    grid.check(g)?;
    let t = g.time();
    let gv = g.values().view();
    let mut out = nonlinear_good(grid, gv, t);
    let gx = grid.spectral().derivative(gv, 1, true);
    let gxi = grid.d_xi(gv);
    let rate = grid.drift_rate(t);
    let xi = grid.nodes();
    let z = grid.z_nodes(t);
    let c = 1.0 / bracket(t);
    for i in 0..grid.nx() {
        for j in 0..grid.nz() {
            out[[i, j]] += rate * xi[j] * gxi[[i, j]] - kappa * phi_profile(z[j]) * gx[[i, j]] - c * gv[[i, j]];
        }
    }
    Field::new(grid, out, t)
}

/// Explicit part of the velocity-form tendency:
/// `(ṡ/s) ξ ∂_ξ u − κφ ∂_x u − κ v ∂_y φ − u ∂_x u − v ∂_y u`.
pub fn rhs_velocity_form(grid: &Grid, u: &Field, kappa: f64) -> Result<Field> {
    grid.check(u)?;
    let t = u.time();
    let uv = u.values().view();
    if let Some(b) = uv.column(0).iter().find(|v| v.abs() > 1e-10 * u.max_abs().max(1.0)) {
        return Err(Error::Boundary(format!("u(x, 0) = {b:.3e}, expected 0")));
    }
    let mut out = nonlinear_velocity(grid, uv, t, kappa);
    let ux = grid.spectral().derivative(uv, 1, true);
    let uxi = grid.d_xi(uv);
    let rate = grid.drift_rate(t);
    let xi = grid.nodes();
    let z = grid.z_nodes(t);
    for i in 0..grid.nx() {
        for j in 0..grid.nz() {
            out[[i, j]] += rate * xi[j] * uxi[[i, j]] - kappa * phi_profile(z[j]) * ux[[i, j]];
        }
    }
    Field::new(grid, out, t)
}

/// Single IMEX step of the good-unknown equation.
pub fn step_imex(grid: &Grid, g: &Field, dt: f64, kappa: f64, nu: f64) -> Result<Field> {
    Stepper::new(grid, Formulation::GoodUnknown, kappa, nu).step(g, dt)
}
