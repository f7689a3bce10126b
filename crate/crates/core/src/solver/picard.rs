//! Two-step Picard iteration for the ν-regularised system: `gⁿ` solves the
//! linear problem forced by
//! `−U(gⁿ⁻²) ∂_x gⁿ⁻¹ − V(gⁿ⁻¹) ∂_y gⁿ⁻² + V(gⁿ⁻¹) U(gⁿ⁻²)/(2⟨t⟩)`,
//! starting from `g⁰ = g¹ = S(t) g₀`.
//!
//! The forcing `F(a, b)` is bilinear, so the increments `δⁿ = gⁿ − gⁿ⁻¹`
//! solve the linear problem from zero data forced by
//! `F(δⁿ⁻², gⁿ⁻¹) + F(gⁿ⁻³, δⁿ⁻¹)`. Marching `δⁿ` directly keeps the
//! distances free of the cancellation that subtracting iterates would cause.

use ndarray::{Array2, ArrayView2};
use rustfft::num_complex::Complex64;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::goodunknown::{recover_u_values, recover_v_from_gx};
use crate::grid::{bracket, Field, Grid};
use crate::norms::compute_ladder;

use super::{initial_good_unknown, Formulation, SolverMode, Stepper};

#[derive(Clone, Debug, PartialEq)]
pub struct PicardReport {
    pub iterations: usize,
    pub steps: usize,
    pub dt: f64,
    /// `d_n = sup_t ⟨t⟩^{5/4−δ} ‖gⁿ − gⁿ⁻¹‖_{X_{τ₀}}` for `n = 1..=iterations`
    /// (entry `n − 1`).
    pub distances: Vec<f64>,
    /// `(n, d_n / d_{n−1})` for `n ≥ 3`.
    pub ratios: Vec<(usize, f64)>,
    /// `(n, (d_n + d_{n−1}) / (d_{n−1} + d_{n−2}))` for `n ≥ 3`.
    pub paired_ratios: Vec<(usize, f64)>,
    /// Two consecutive ratios above 1.
    pub diverged: bool,
    /// Same metric between the last iterate and the IMEX solution.
    pub distance_to_imex: f64,
    /// Last entry of `distances`.
    pub tail: f64,
}

impl PicardReport {
    pub fn max_ratio(&self) -> f64 {
        self.ratios.iter().map(|r| r.1).fold(0.0, f64::max)
    }
}

fn ratio(a: f64, b: f64) -> f64 {
    if a == 0.0 {
        0.0
    } else if b > 0.0 {
        a / b
    } else {
        f64::INFINITY
    }
}

/// Explicit Picard forcing at one time level, spectral and masked.
fn forcing(grid: &Grid, older: ArrayView2<f64>, newer: ArrayView2<f64>, t: f64) -> Array2<Complex64> {
    let sp = grid.spectral();
    let u_old = recover_u_values(grid, older, t);
    let newer_x = sp.derivative(newer, 1, true);
    let v_new = recover_v_from_gx(grid, newer_x.view(), t);
    let older_y = grid.d_y(older, t);
    let c = 0.5 / bracket(t);
    let mut f = Array2::zeros(older.dim());
    ndarray::Zip::from(&mut f)
        .and(&u_old)
        .and(&newer_x)
        .and(&v_new)
        .and(&older_y)
        .for_each(|f, &u, &bx, &v, &ay| *f = -u * bx - v * ay + c * v * u);
    let mut hat = sp.forward(f.view());
    sp.mask(&mut hat);
    hat
}

struct Metric<'a> {
    grid: &'a Grid,
    tau: f64,
    alpha: f64,
    delta: f64,
    m_max: usize,
}

impl Metric<'_> {
    /// `sup_k ⟨t_k⟩^{5/4−δ} ‖a_k − b_k‖_{X}`.
    fn distance(&self, a: &[Array2<f64>], b: &[Array2<f64>], dt: f64) -> Result<f64> {
        let diff: Vec<Array2<f64>> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        self.norm(&diff, dt)
    }

    /// `sup_k ⟨t_k⟩^{5/4−δ} ‖a_k‖_{X}`.
    fn norm(&self, a: &[Array2<f64>], dt: f64) -> Result<f64> {
        let mut sup = 0.0f64;
        for (k, x) in a.iter().enumerate() {
            let t = k as f64 * dt;
            let f = Field::new(self.grid, x.clone(), t)?;
            let n = compute_ladder(self.grid, &f, self.tau, self.alpha, self.m_max)?.sums.x;
            sup = sup.max(bracket(t).powf(1.25 - self.delta) * n);
        }
        Ok(sup)
    }
}

/// Runs `picard_iters` iterations on `[0, t_end]` with the fixed step
/// `t_end / ⌈t_end/dt⌉` and compares the last iterate with the IMEX
/// solution of the same regularised problem.
pub fn run_picard(cfg: &RunConfig) -> Result<PicardReport> {
    let grid = cfg.validate()?;
    if cfg.solver.mode != SolverMode::PicardTwoStep {
        return Err(Error::Config(format!("run_picard needs solver.mode = picard_two_step (got {})", cfg.solver.mode)));
    }
    let alpha = cfg.alpha();
    let prepared = initial_good_unknown(&grid, &cfg.init, cfg.radius.tau0, cfg.epsilon)?;
    let g0 = prepared.g0;
    let steps = (cfg.solver.t_end / cfg.solver.dt_init).ceil().max(1.0) as usize;
    let dt = cfg.solver.t_end / steps as f64;
    let stepper = Stepper::new(&grid, Formulation::GoodUnknown, cfg.kappa, cfg.solver.nu);
    let cfl = stepper.advective_cfl(&g0, dt);
    if cfl > cfg.solver.cfl {
        log::warn!("picard step has advective CFL {cfl:.3} above {}", cfg.solver.cfl);
    }

    let march = |start: ArrayView2<f64>, forcing_at: &dyn Fn(usize) -> Option<Array2<Complex64>>| -> Result<Vec<Array2<f64>>> {
        let mut traj = Vec::with_capacity(steps + 1);
        traj.push(start.to_owned());
        for k in 0..steps {
            let t = k as f64 * dt;
            let mut explicit = |tt: f64, v: ArrayView2<f64>| -> Result<Array2<Complex64>> {
                let idx = (tt / dt).round() as usize;
                Ok(forcing_at(idx).unwrap_or_else(|| Array2::zeros(v.dim())))
            };
            let next = stepper.step_with(traj[k].view(), t, dt, &mut explicit)?;
            traj.push(next);
        }
        Ok(traj)
    };
    let time = |k: usize| k as f64 * dt;

    let metric = Metric { grid: &grid, tau: cfg.radius.tau0, alpha, delta: cfg.delta(), m_max: cfg.m_max };
    let zero = Array2::zeros(g0.values().dim());
    // g[n-3], g[n-2], g[n-1] and δ[n-2], δ[n-1]; starts at n = 2.
    let linear = march(g0.values().view(), &|_| None)?;
    let mut g3 = linear.clone();
    let mut g2 = linear.clone();
    let mut g1 = linear;
    let mut d2: Vec<Array2<f64>> = vec![zero.clone(); steps + 1];
    let mut d1: Vec<Array2<f64>> = d2.clone();
    let mut distances = vec![0.0];
    for n in 2..=cfg.solver.picard_iters {
        let f: Vec<Array2<Complex64>> = (0..=steps)
            .map(|k| {
                if n == 2 {
                    forcing(&grid, g2[k].view(), g1[k].view(), time(k))
                } else {
                    forcing(&grid, d2[k].view(), g1[k].view(), time(k)) + forcing(&grid, g3[k].view(), d1[k].view(), time(k))
                }
            })
            .collect();
        let delta = march(zero.view(), &|k| f.get(k).cloned())?;
        distances.push(metric.norm(&delta, dt)?);
        let next: Vec<Array2<f64>> = g1.iter().zip(&delta).map(|(g, d)| g + d).collect();
        g3 = std::mem::replace(&mut g2, std::mem::replace(&mut g1, next));
        d2 = std::mem::replace(&mut d1, delta);
    }
    let newer = g1;

    let mut imex = Vec::with_capacity(steps + 1);
    let mut state = g0.clone();
    imex.push(state.values().clone());
    for _ in 0..steps {
        state = stepper.step(&state, dt)?;
        imex.push(state.values().clone());
    }
    let distance_to_imex = metric.distance(&newer, &imex, dt)?;

    let n = distances.len();
    let ratios: Vec<(usize, f64)> = (3..=n).map(|i| (i, ratio(distances[i - 1], distances[i - 2]))).collect();
    let paired_ratios = (3..=n)
        .map(|i| (i, ratio(distances[i - 1] + distances[i - 2], distances[i - 2] + distances[i - 3])))
        .collect();
    let diverged = ratios.windows(2).any(|w| w[0].1 > 1.0 && w[1].1 > 1.0);
    if diverged {
        log::warn!("picard iteration diverging: ratios {ratios:?}");
    }
    Ok(PicardReport {
        iterations: cfg.solver.picard_iters,
        steps,
        dt,
        tail: distances[n - 1],
        distances,
        ratios,
        paired_ratios,
        diverged,
        distance_to_imex,
    })
}
