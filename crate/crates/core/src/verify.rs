//! Numerical checks of the weighted inequalities, measured constants and
//! decay fits.

use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::goodunknown::{impose_boundary_rows, recover_u_values, recover_v_from_gx};
use crate::grid::{bracket, Field, Grid};
use crate::lift::dawson_fn;
use crate::norms::{check_b_tilde_b, check_y_x_bound, compute_ladder, seminorm_ladder, M_MAX_HARD};
use crate::solver::run_simulation;
use crate::stencil::NEUMANN_ROW;

/// Slack allowed on constant-free inequalities.
pub const QUADRATURE_SLACK: f64 = 1e-10;
/// A measured constant above this is not considered stable.
pub const CONSTANT_CAP: f64 = 1e3;

#[derive(Clone, Debug, PartialEq)]
pub struct InequalityReport {
    pub name: String,
    pub samples: usize,
    /// Smallest `(RHS − LHS)/RHS` seen (constant-free checks) or
    /// `CONSTANT_CAP − C` (constant-bearing checks).
    pub worst_margin: f64,
    /// Largest `LHS/RHS` seen.
    pub measured_constant: f64,
    pub passed: bool,
    /// Samples excluded because a hypothesis did not hold.
    pub skipped: usize,
}

impl InequalityReport {
    fn new(name: &str) -> Self {
        Self {
            name: name.to_string(),
            samples: 0,
            worst_margin: f64::INFINITY,
            measured_constant: 0.0,
            passed: true,
            skipped: 0,
        }
    }

    /// Adds one constant-free sample `lhs ≤ rhs`.
    fn push_sharp(&mut self, lhs: f64, rhs: f64) {
        self.samples += 1;
        let scale = lhs.abs().max(rhs.abs());
        let margin = if scale > 0.0 { (rhs - lhs) / scale } else { 0.0 };
        self.worst_margin = self.worst_margin.min(margin);
        if rhs > 0.0 {
            self.measured_constant = self.measured_constant.max(lhs / rhs);
        }
        self.passed = self.worst_margin >= -QUADRATURE_SLACK;
    }

    /// Adds one sample of `lhs ≤ C rhs`; `0/0` counts as 0.
    fn push_ratio(&mut self, lhs: f64, rhs: f64) {
        self.samples += 1;
        let r = if lhs == 0.0 {
            0.0
        } else if rhs > 0.0 {
            lhs / rhs
        } else {
            f64::INFINITY
        };
        self.measured_constant = self.measured_constant.max(r);
        self.worst_margin = CONSTANT_CAP - self.measured_constant;
        self.passed = self.measured_constant.is_finite() && self.measured_constant < CONSTANT_CAP;
    }

    fn merge(&mut self, o: &InequalityReport) {
        self.samples += o.samples;
        self.skipped += o.skipped;
        self.worst_margin = self.worst_margin.min(o.worst_margin);
        self.measured_constant = self.measured_constant.max(o.measured_constant);
        self.passed &= o.passed;
    }

    pub const CSV_HEADER: &'static str = "name,samples,worst_margin,measured_constant,passed,skipped";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.name, self.samples, self.worst_margin, self.measured_constant, self.passed, self.skipped
        )
    }
}

/// Random admissible fields `Σ_n (a_n cos k_n x + b_n sin k_n x) P_n(z²) e^{−c z²}`
/// with the discrete Neumann row imposed.
#[derive(Clone, Debug, PartialEq)]
pub struct AdmissibleFamily {
    /// Highest Fourier index used.
    pub modes: usize,
    /// Degree of `P_n` in `z²`.
    pub degree: usize,
    /// Range of the Gaussian rate `c`.
    pub rate: (f64, f64),
    /// Range of sampling times.
    pub time: (f64, f64),
}

impl AdmissibleFamily {
    /// Up to `nx/4` modes.
    pub fn for_grid(grid: &Grid) -> Self {
        Self { modes: grid.nx() / 4, degree: 2, rate: (0.3, 0.8), time: (0.0, 10.0) }
    }

    /// Up to `nx/6` modes so that products stay inside the retained band.
    pub fn for_products(grid: &Grid) -> Self {
        Self { modes: grid.nx() / 6, ..Self::for_grid(grid) }
    }

    pub fn sample(&self, grid: &Grid, rng: &mut impl Rng) -> Result<Field> {
        let t = if self.time.1 > self.time.0 { rng.gen_range(self.time.0..self.time.1) } else { self.time.0 };
        self.sample_at(grid, t, rng)
    }

    pub fn sample_at(&self, grid: &Grid, t: f64, rng: &mut impl Rng) -> Result<Field> {
        let c = rng.gen_range(self.rate.0..self.rate.1);
        let decay = rng.gen_range(0.3..1.0f64);
        let k0 = 2.0 * std::f64::consts::PI / grid.lx();
        let terms: Vec<(f64, f64, f64, Vec<f64>)> = (0..=self.modes)
            .map(|n| {
                let amp = decay.powi(n as i32);
                let a = amp * rng.gen_range(-1.0..1.0);
                let b = if n == 0 { 0.0 } else { amp * rng.gen_range(-1.0..1.0) };
                let p = (0..self.degree).map(|_| rng.gen_range(-0.5..0.5)).collect();
                (n as f64 * k0, a, b, p)
            })
            .collect();
        let f = Field::from_fn_z(grid, t, |x, z| {
            let s = z * z;
            let env = (-c * s).exp();
            terms
                .iter()
                .map(|(k, a, b, p)| {
                    let poly = p.iter().rev().fold(0.0, |acc, q| acc * s + q) * s + 1.0;
                    (a * (k * x).cos() + b * (k * x).sin()) * poly * env
                })
                .sum()
        })?;
        let mut v = f.into_values();
        impose_boundary_rows(&mut v);
        Field::new(grid, v, t)
    }
}

/// `(dx Σ_i Σ_j W_j f_ij²)^{1/2}`.
fn weighted_l2(grid: &Grid, f: ArrayView2<f64>, w: &[f64]) -> f64 {
    let s: f64 = f.rows().into_iter().map(|r| r.iter().zip(w).map(|(v, w)| w * v * v).sum::<f64>()).sum();
    (grid.dx() * s).sqrt()
}

/// `(dx Σ_i max_j f_ij²)^{1/2}`.
fn l2x_linf_y(grid: &Grid, f: ArrayView2<f64>) -> f64 {
    let s: f64 = f.rows().into_iter().map(|r| r.iter().fold(0.0f64, |m, v| m.max(v * v))).sum();
    (grid.dx() * s).sqrt()
}

fn hypotheses_hold(g: &Field) -> bool {
    let v = g.values();
    let scale = g.max_abs();
    if scale == 0.0 {
        return true;
    }
    let nz = v.ncols();
    v.rows().into_iter().all(|r| {
        let d: f64 = (0..NEUMANN_ROW.len()).map(|k| NEUMANN_ROW[k] * r[k]).sum();
        d.abs() <= 1e-8 * scale && r[nz - 1].abs() <= 1e-12 * scale
    })
}

/// `(α/⟨t⟩) ‖θ_α ∂_x^m g‖² ≤ ‖θ_α ∂_y ∂_x^m g‖²` for `m = 0..=m_check`.
pub fn verify_poincare(grid: &Grid, g: &Field, alpha: f64, m_check: usize) -> Result<InequalityReport> {
    grid.check(g)?;
    let mut rep = InequalityReport::new("poincare");
    if !hypotheses_hold(g) {
        rep.skipped += 1;
        return Ok(rep);
    }
    let t = g.time();
    let w = grid.weighted_measure(alpha, t);
    let sp = grid.spectral();
    for m in 0..=m_check {
        let gm = if m == 0 { g.values().clone() } else { sp.derivative(g.values().view(), m as u32, false) };
        let gy = grid.d_y(gm.view(), t);
        let lhs = alpha / bracket(t) * weighted_l2(grid, gm.view(), &w).powi(2);
        let rhs = weighted_l2(grid, gy.view(), &w).powi(2);
        rep.push_sharp(lhs, rhs);
    }
    Ok(rep)
}

/// Measured constants of the four diagnostic bounds
/// `uu:2:infty`, `g:2:1`, `u:2:2`, `v:2:infty` for `m = 0..=m_check`.
pub fn verify_diagnostic_bounds(grid: &Grid, g: &Field, alpha: f64, m_check: usize) -> Result<Vec<InequalityReport>> {
    grid.check(g)?;
    let t = g.time();
    let b = bracket(t);
    let w = grid.weighted_measure(alpha, t);
    let z = grid.z_nodes(t);
    let sp = grid.spectral();
    let mut reps = ["uu:2:infty", "g:2:1", "u:2:2", "v:2:infty"].map(InequalityReport::new);
    let deriv = |m: usize| -> Array2<f64> {
        if m == 0 {
            g.values().clone()
        } else {
            sp.derivative(g.values().view(), m as u32, false)
        }
    };
    // L¹_y weights: trapezoid × s × θ_α
    let s = grid.scale(t);
    let w1: Vec<f64> = z
        .iter()
        .zip(grid.quad_weights())
        .map(|(z, q)| q * s * crate::grid::log_weight_theta_z(alpha, *z).exp())
        .collect();
    for m in 0..=m_check {
        let gm = deriv(m);
        let gm1 = deriv(m + 1);
        let u = recover_u_values(grid, gm.view(), t);
        let v = recover_v_from_gx(grid, gm1.view(), t);
        let zg = crate::norms::z_times(grid, gm.view(), t);
        let gy = grid.d_y(gm.view(), t);
        let ng = weighted_l2(grid, gm.view(), &w);
        let ng1 = weighted_l2(grid, gm1.view(), &w);
        let nzg = weighted_l2(grid, zg.view(), &w);
        let ngy = weighted_l2(grid, gy.view(), &w);

        reps[0].push_ratio(l2x_linf_y(grid, u.view()), b.powf(0.25) * ng);

        let mut worst = 0.0f64;
        let mut any = false;
        for (r, zr) in gm.rows().into_iter().zip(zg.rows()) {
            let l1: f64 = r.iter().zip(&w1).map(|(v, w)| w * v.abs()).sum();
            let l2: f64 = r.iter().zip(&w).map(|(v, w)| w * v * v).sum::<f64>().sqrt();
            let zl2: f64 = zr.iter().zip(&w).map(|(v, w)| w * v * v).sum::<f64>().sqrt();
            let den = b.powf(0.25) * (l2 * zl2).sqrt();
            if l1 > 0.0 {
                any = true;
                worst = worst.max(if den > 0.0 { l1 / den } else { f64::INFINITY });
            }
        }
        if any {
            reps[1].push_ratio(worst, 1.0);
        } else {
            reps[1].push_ratio(0.0, 0.0);
        }

        let rhs = b.powf(0.75) * (ng * ngy).sqrt() + b.sqrt() * (ng * nzg).sqrt();
        reps[2].push_ratio(weighted_l2(grid, u.view(), &w), rhs);

        reps[3].push_ratio(l2x_linf_y(grid, v.view()), b.powf(0.75) * ng1);
    }
    Ok(reps.into())
}

/// Measured constants of the three analytic product estimates.
#[derive(Clone, Debug, PartialEq)]
pub struct ProductConstants {
    /// `U(g¹)∂_x g²`, `V(g¹)∂_y g²`, `V(g¹)U(g²)/2⟨t⟩`.
    pub reports: [InequalityReport; 3],
    /// The largest of the three constants.
    pub c0: f64,
}

/// The three ratios `‖product‖_X τ^{1/2} / (‖·‖_B ‖·‖_Y)` for one pair, or
/// `None` when a ladder does not converge at `tau`.
pub fn product_ratios(grid: &Grid, g1: &Field, g2: &Field, tau: f64, alpha: f64) -> Result<Option<[f64; 3]>> {
    grid.check(g1)?;
    grid.check(g2)?;
    let t = g1.time();
    if g2.time() != t {
        return Err(Error::InvalidArgument("product pair sampled at different times".into()));
    }
    let ladder = |f: &Field| match seminorm_ladder(grid, f, tau, alpha, M_MAX_HARD) {
        Ok(p) => Ok(Some(p)),
        Err(Error::LadderTruncation { .. }) => Ok(None),
        Err(e) => Err(e),
    };
    let (Some(p1), Some(p2)) = (ladder(g1)?, ladder(g2)?) else {
        return Ok(None);
    };
    let sp = grid.spectral();
    let (a, b) = (g1.values().view(), g2.values().view());
    let a_x = sp.derivative(a, 1, false);
    let b_x = sp.derivative(b, 1, false);
    let u1 = recover_u_values(grid, a, t);
    let v1 = recover_v_from_gx(grid, a_x.view(), t);
    let u2 = recover_u_values(grid, b, t);
    let b_y = grid.d_y(b, t);
    let half = 0.5 / bracket(t);
    let products = [&u1 * &b_x, &v1 * &b_y, (&v1 * &u2).mapv(|p| half * p)];
    let denominators = [p1.sums.b * p2.sums.y, p2.sums.b * p1.sums.y, p2.sums.b * p1.sums.y];
    let mut out = [0.0; 3];
    for (k, (p, den)) in products.into_iter().zip(denominators).enumerate() {
        let f = Field::new(grid, p, t)?;
        let Some(lp) = ladder(&f)? else {
            return Ok(None);
        };
        let lhs = lp.sums.x * tau.sqrt();
        out[k] = if lhs == 0.0 {
            0.0
        } else if den > 0.0 {
            lhs / den
        } else {
            f64::INFINITY
        };
    }
    Ok(Some(out))
}

/// Maximum of the product ratios over `trials` random pairs drawn from
/// `family` with a seeded generator. Pairs whose ladder does not converge
/// are skipped and counted.
pub fn measure_product_constants(
    grid: &Grid,
    family: &AdmissibleFamily,
    trials: usize,
    seed: u64,
    tau: f64,
    alpha: f64,
) -> Result<ProductConstants> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut reports = ["product:u_gx", "product:v_gy", "product:vu"].map(InequalityReport::new);
    for _ in 0..trials {
        let t = if family.time.1 > family.time.0 { rng.gen_range(family.time.0..family.time.1) } else { family.time.0 };
        let g1 = family.sample_at(grid, t, &mut rng)?;
        let g2 = family.sample_at(grid, t, &mut rng)?;
        match product_ratios(grid, &g1, &g2, tau, alpha)? {
            Some(r) => {
                for (rep, v) in reports.iter_mut().zip(r) {
                    rep.push_ratio(v, 1.0);
                }
            }
            None => reports.iter_mut().for_each(|r| r.skipped += 1),
        }
    }
    let c0 = reports.iter().map(|r| r.measured_constant).fold(0.0, f64::max);
    Ok(ProductConstants { reports, c0 })
}

/// Poincaré and diagnostic bounds over `trials` random admissible fields.
pub fn verify_random_fields(
    grid: &Grid,
    trials: usize,
    seed: u64,
    alpha: f64,
    m_check: usize,
) -> Result<(InequalityReport, Vec<InequalityReport>)> {
    let fam = AdmissibleFamily::for_grid(grid);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut poincare = InequalityReport::new("poincare");
    let mut diag: Option<Vec<InequalityReport>> = None;
    for _ in 0..trials {
        let g = fam.sample(grid, &mut rng)?;
        poincare.merge(&verify_poincare(grid, &g, alpha, m_check)?);
        let d = verify_diagnostic_bounds(grid, &g, alpha, m_check)?;
        match diag.as_mut() {
            None => diag = Some(d),
            Some(acc) => acc.iter_mut().zip(&d).for_each(|(a, b)| a.merge(b)),
        }
    }
    Ok((poincare, diag.unwrap_or_default()))
}

/// `2/(1+y) − D(y)` over `n + 1` equispaced points of `[0, y_max]`.
pub fn dawson_report(n: usize, y_max: f64) -> InequalityReport {
    let mut rep = InequalityReport::new("dawson");
    let mut worst = f64::INFINITY;
    let mut constant = 0.0f64;
    for k in 0..=n {
        let y = y_max * k as f64 / n.max(1) as f64;
        let bound = 2.0 / (1.0 + y);
        let d = dawson_fn(y);
        worst = worst.min(bound - d);
        constant = constant.max(d / bound);
    }
    rep.samples = n + 1;
    rep.worst_margin = worst;
    rep.measured_constant = constant;
    rep.passed = worst > 0.0;
    rep
}

/// Margins of the norm inequalities on one stored state.
#[derive(Clone, Debug, PartialEq)]
pub struct SnapshotChecks {
    pub t: f64,
    pub poincare: InequalityReport,
    /// `2⟨t⟩^{1/8} √(X B̃) − B`.
    pub b_tilde_b: f64,
    /// `X_{2τ}/τ − Y_τ`, absent when the `2τ` ladder diverges.
    pub y_x: Option<f64>,
}

pub fn snapshot_checks(grid: &Grid, g: &Field, tau: f64, alpha: f64, m_max: usize, m_check: usize) -> Result<SnapshotChecks> {
    let p = compute_ladder(grid, g, tau, alpha, m_max)?;
    Ok(SnapshotChecks {
        t: g.time(),
        poincare: verify_poincare(grid, g, alpha, m_check)?,
        b_tilde_b: check_b_tilde_b(&p, g.time()),
        y_x: check_y_x_bound(grid, g, tau, alpha, m_max)?,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecayFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub samples: usize,
}

/// Least-squares slope of `ln X` against `ln⟨t⟩` over `window`.
pub fn fit_decay(t: &[f64], x: &[f64], window: (f64, f64)) -> Result<DecayFit> {
    const NEEDED: usize = 20;
    let pts: Vec<(f64, f64)> = t
        .iter()
        .zip(x)
        .filter(|(t, _)| **t >= window.0 && **t <= window.1)
        .map(|(t, x)| (bracket(*t).ln(), *x))
        .collect();
    if pts.len() < NEEDED {
        return Err(Error::InsufficientSamples { found: pts.len(), needed: NEEDED });
    }
    if let Some((_, x)) = pts.iter().find(|(_, x)| x.is_nan() || *x <= 0.0) {
        return Err(Error::InvalidArgument(format!("decay fit needs X > 0 (got {x})")));
    }
    let n = pts.len() as f64;
    let (mx, my) = pts.iter().fold((0.0, 0.0), |(a, b), (l, x)| (a + l, b + x.ln()));
    let (mx, my) = (mx / n, my / n);
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (l, x) in &pts {
        let (dx, dy) = (l - mx, x.ln() - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let slope = sxy / sxx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    Ok(DecayFit { slope, intercept: my - slope * mx, r2, samples: pts.len() })
}

/// Largest relative `X_{τ₀}` distance between two runs over their common
/// snapshot times.
pub fn two_run_consistency(a: &RunConfig, b: &RunConfig) -> Result<f64> {
    if a.grid != b.grid {
        return Err(Error::InvalidArgument("consistency runs must share the grid".into()));
    }
    let ra = run_simulation(a, None)?;
    let rb = run_simulation(b, None)?;
    let grid = a.validate()?;
    snapshot_distance(&grid, &ra.snapshots, &rb.snapshots, a.radius.tau0, a.alpha(), a.m_max)
}

/// Largest `‖f − g‖_X / ‖g‖_X` over pairs with matching times.
pub fn snapshot_distance(grid: &Grid, fa: &[Field], fb: &[Field], tau: f64, alpha: f64, m_max: usize) -> Result<f64> {
    let mut worst = 0.0f64;
    let mut common = 0;
    for f in fa {
        let Some(g) = fb.iter().find(|g| (g.time() - f.time()).abs() < 1e-9) else {
            continue;
        };
        common += 1;
        let diff = Field::new(grid, f.values() - g.values(), g.time())?;
        let num = compute_ladder(grid, &diff, tau, alpha, m_max)?.sums.x;
        let den = compute_ladder(grid, g, tau, alpha, m_max)?.sums.x;
        if num > 0.0 {
            worst = worst.max(if den > 0.0 { num / den } else { f64::INFINITY });
        }
    }
    if common == 0 {
        return Err(Error::InvalidArgument("runs share no snapshot time".into()));
    }
    Ok(worst)
}

/// Good-unknown and velocity-form twin runs from the same datum.
#[derive(Clone, Debug, PartialEq)]
pub struct CrossCheck {
    pub t: f64,
    /// `‖g_from_u(u(t)) − g(t)‖ / ‖g(t)‖` in the weighted `L²` norm.
    pub distance: f64,
}

/// Runs `cfg` in both formulations to `solver.t_end` and compares the
/// final states.
pub fn cross_formulation(cfg: &RunConfig) -> Result<CrossCheck> {
    let mut good = cfg.clone();
    good.solver.mode = crate::solver::SolverMode::GoodUnknown;
    good.solver.nu = 0.0;
    let mut vel = good.clone();
    vel.solver.mode = crate::solver::SolverMode::VelocityForm;
    let grid = good.validate()?;
    let a = run_simulation(&good, None)?;
    let b = run_simulation(&vel, None)?;
    for r in [&a, &b] {
        if r.termination != crate::solver::Termination::TEnd {
            return Err(Error::InvalidArgument(format!("twin run ended early: {}", r.message)));
        }
    }
    let w = grid.weighted_measure(good.alpha(), a.final_state.time());
    let diff = a.final_state.values() - b.final_state.values();
    let num = weighted_l2(&grid, diff.view(), &w);
    let den = weighted_l2(&grid, a.final_state.values().view(), &w);
    Ok(CrossCheck { t: a.t_final, distance: if num == 0.0 { 0.0 } else { num / den } })
}
