//! Joint evolution of the state and the analyticity radius, with CSV,
//! snapshot and report output.

use std::fmt;
use std::path::{Path, PathBuf};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::goodunknown::g_from_u_values;
use crate::grid::{bracket, Field, Grid};
use crate::io::{create_run_dir, load_snapshot, save_snapshot, snapshot_name, Report, Table};
use crate::norms::{compute_ladder, NormProfile, TAIL_LIMIT};
use crate::radius::{lifespan_t_eps, step_tau, tau_lower_bound, HolderTracker, RadiusState};
use crate::verify::{fit_decay, measure_product_constants, snapshot_checks, AdmissibleFamily, DecayFit};

use super::{initial_good_unknown, Formulation, Stepper};

const MAX_HALVINGS: u32 = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    TEnd,
    RadiusCollapse,
    NaN,
    CflAbort,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::TEnd => "t_end",
            Self::RadiusCollapse => "radius_collapse",
            Self::NaN => "nan",
            Self::CflAbort => "cfl_abort",
        })
    }
}

pub const NORMS_COLUMNS: &[&str] = &[
    "t",
    "tau",
    "X_sum",
    "Y_sum",
    "D_sum",
    "Z_sum",
    "B_sum",
    "tildeB_sum",
    "tail_ratio",
    "decay_compensated",
    "dt",
    "cfl",
];

pub const RADIUS_COLUMNS: &[&str] = &["t", "tau", "tau_lower_bound", "B_norm", "holder_modulus_running_max"];

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub run_id: String,
    pub termination: Termination,
    pub message: String,
    pub t_final: f64,
    pub steps: usize,
    pub amplitude: f64,
    pub tau0: f64,
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub alpha: f64,
    pub delta: f64,
    pub norms: Table,
    pub radius: Table,
    /// `g` at `t = 0` and every snapshot time.
    pub snapshots: Vec<Field>,
    pub decay: Option<DecayFit>,
    pub max_compensated: f64,
    /// Rows with `τ` below the closed-form floor.
    pub floor_violations: usize,
    /// Rows with `τ < τ₀/2`.
    pub half_radius_violations: usize,
    pub holder_modulus: f64,
    /// Rows whose ladder tail exceeded the truncation limit.
    pub ladder_truncations: usize,
    /// Snapshots failing the weighted Poincaré check.
    pub poincare_failures: usize,
    pub poincare_worst_margin: f64,
    pub b_tilde_b_worst: f64,
    pub y_x_worst: f64,
    pub lifespan: f64,
    pub run_dir: Option<PathBuf>,
    pub final_state: Field,
}

impl RunOutcome {
    pub fn report(&self) -> Report {
        let mut r = Report::default();
        r.add("run_id", &self.run_id);
        r.add("termination", self.termination);
        r.add("message", if self.message.is_empty() { "none" } else { &self.message });
        r.add("t_final", self.t_final);
        r.add("steps", self.steps);
        r.add("amplitude", self.amplitude);
        r.add("tau0", self.tau0);
        r.add("c0", self.c0);
        r.add("c1", self.c1);
        r.add("c2", self.c2);
        r.add("alpha", self.alpha);
        r.add("delta", self.delta);
        match &self.decay {
            Some(d) => {
                r.add("decay_slope", d.slope);
                r.add("decay_r2", d.r2);
                r.add("decay_samples", d.samples);
            }
            None => {
                r.add("decay_slope", f64::NAN);
                r.add("decay_r2", f64::NAN);
                r.add("decay_samples", 0);
            }
        }
        r.add("max_compensated_norm", self.max_compensated);
        r.add("floor_violations", self.floor_violations);
        r.add("half_radius_violations", self.half_radius_violations);
        r.add("holder_modulus", self.holder_modulus);
        r.add("ladder_truncations", self.ladder_truncations);
        r.add("poincare_failures", self.poincare_failures);
        r.add("poincare_worst_margin", self.poincare_worst_margin);
        r.add("b_tilde_b_worst_margin", self.b_tilde_b_worst);
        r.add("y_x_worst_margin", self.y_x_worst);
        r.add("lifespan_t_eps", self.lifespan);
        r.add("csv_paths", "norms.csv,radius.csv");
        let idx: Vec<String> =
            self.snapshots.iter().map(|f| format!("{}@snapshots/{}", f.time(), snapshot_name("g", f.time()))).collect();
        r.add("snapshot_index", idx.join(","));
        r
    }

    /// `τ` never fell below its floor nor below `τ₀/2`.
    pub fn radius_ok(&self) -> bool {
        self.floor_violations == 0 && self.half_radius_violations == 0
    }
}

/// Loop state shared by the step and the output code.
struct Recorder<'a> {
    grid: &'a Grid,
    cfg: &'a RunConfig,
    alpha: f64,
    delta: f64,
    norms: Table,
    radius_rows: Table,
    holder: HolderTracker,
    snapshots: Vec<Field>,
    max_compensated: f64,
    floor_violations: usize,
    half_violations: usize,
    truncations: usize,
}

impl Recorder<'_> {
    fn record(&mut self, p: &NormProfile, state: &RadiusState, dt: f64, cfl: f64) {
        let t = p.t;
        let comp = bracket(t).powf(1.25 - self.delta) * p.sums.x;
        self.max_compensated = self.max_compensated.max(comp);
        if p.tail_ratio > TAIL_LIMIT {
            self.truncations += 1;
        }
        self.norms.push(vec![
            t,
            p.tau,
            p.sums.x,
            p.sums.y,
            p.sums.d,
            p.sums.z,
            p.sums.b,
            p.sums.tilde_b,
            p.tail_ratio,
            comp,
            dt,
            cfl,
        ]);
        let lb = tau_lower_bound(t, state);
        if !lb.crossed && state.tau < lb.value * (1.0 - 1e-12) {
            self.floor_violations += 1;
        }
        if state.tau < 0.5 * state.tau0 {
            self.half_violations += 1;
        }
        let h = self.holder.push(t, state.tau);
        self.radius_rows.push(vec![t, state.tau, lb.value, p.sums.b, h]);
    }

    fn profile(&self, g: &Field, tau: f64) -> Result<NormProfile> {
        compute_ladder(self.grid, g, tau, self.alpha, self.cfg.m_max)
    }
}

/// Runs the configured simulation. With `out` set, writes
/// `out/run-<id>/{config.echo, norms.csv, radius.csv, report.txt, snapshots/}`;
/// numerical aborts still produce a complete partial output.
pub fn run_simulation(cfg: &RunConfig, out: Option<&Path>) -> Result<RunOutcome> {
    let grid = cfg.validate()?;
    if cfg.solver.mode == super::SolverMode::PicardTwoStep {
        return Err(Error::Config("picard_two_step runs through run_picard".into()));
    }
    let alpha = cfg.alpha();
    let delta = cfg.delta();
    let tau0 = cfg.radius.tau0;
    let mut init = cfg.init.clone();
    if init.family == super::InitFamily::Custom && init.custom.is_none() {
        let path = cfg.init_custom_path.as_ref().ok_or_else(|| Error::Config("init.custom_path missing".into()))?;
        init.custom = Some(load_snapshot(path, &grid)?.0);
    }
    let prepared = initial_good_unknown(&grid, &init, tau0, cfg.epsilon)?;

    let c0 = if cfg.radius.calibrate {
        let fam = AdmissibleFamily::for_products(&grid);
        let pc = measure_product_constants(&grid, &fam, cfg.radius.calibration_trials, cfg.verify.seed, tau0, alpha)?;
        log::info!("calibrated C0 = {:.6} from {} trials", pc.c0, cfg.radius.calibration_trials);
        pc.c0
    } else {
        cfg.radius.c0
    };
    let c2 = cfg.c2_for(c0);
    let mut radius = RadiusState::new(tau0, c0, c2, cfg.epsilon, cfg.strict_regime)?;
    let lifespan = lifespan_t_eps(&radius)?;

    let form = cfg.solver.formulation();
    let stepper = Stepper::new(&grid, form, cfg.kappa, cfg.solver.nu);
    let to_g = |s: &Field| -> Field {
        match form {
            Formulation::GoodUnknown => s.clone(),
            Formulation::Velocity => Field::from_parts(&grid, g_from_u_values(&grid, s.values().view(), s.time()), s.time()),
        }
    };
    let mut state = match form {
        Formulation::GoodUnknown => prepared.g0.clone(),
        Formulation::Velocity => prepared.u0.clone(),
    };

    let mut rec = Recorder {
        grid: &grid,
        cfg,
        alpha,
        delta,
        norms: Table::new(NORMS_COLUMNS),
        radius_rows: Table::new(RADIUS_COLUMNS),
        holder: HolderTracker::default(),
        snapshots: vec![prepared.g0.clone()],
        max_compensated: 0.0,
        floor_violations: 0,
        half_violations: 0,
        truncations: 0,
    };
    let mut prof = rec.profile(&prepared.g0, tau0)?;
    rec.record(&prof, &radius, 0.0, 0.0);

    let t_end = cfg.solver.t_end;
    let every = cfg.solver.snapshot_every;
    let mut next_snap = every;
    let mut t = 0.0;
    let mut steps = 0;
    let mut termination = Termination::TEnd;
    let mut message = String::new();
    let mut dump: Option<Field> = None;

    while t < t_end - 1e-12 {
        let target = next_snap.min(t_end);
        let mut h = cfg.solver.dt_init.min(target - t);
        let mut halvings = 0;
        let mut cfl = stepper.advective_cfl(&state, h);
        while cfl > cfg.solver.cfl {
            halvings += 1;
            if halvings > MAX_HALVINGS {
                break;
            }
            h *= 0.5;
            cfl = stepper.advective_cfl(&state, h);
        }
        if halvings > MAX_HALVINGS {
            termination = Termination::CflAbort;
            message = Error::CflAbort { t, dt: h, halvings: MAX_HALVINGS }.to_string();
            break;
        }
        let t_new = if (target - (t + h)).abs() < 1e-9 { target } else { t + h };
        let next = match stepper.step(&state, h) {
            Ok(f) => Field::from_parts(&grid, f.into_values(), t_new),
            Err(e @ Error::NonFinite { .. }) => {
                termination = Termination::NaN;
                message = e.to_string();
                dump = Some(state.clone());
                break;
            }
            Err(e) => return Err(e),
        };
        let g_new = to_g(&next);
        if !g_new.is_finite() {
            termination = Termination::NaN;
            message = format!("non-finite good unknown at t = {t_new}");
            dump = Some(state.clone());
            break;
        }
        // Heun in τ^{3/2}: predict with B at the old state, correct with
        // the average of the two stage values.
        let b0 = prof.sums.b;
        let advanced = step_tau(radius.clone(), b0, h).and_then(|pred| {
            let b1 = rec.profile(&g_new, pred.tau)?.sums.b;
            step_tau(radius.clone(), 0.5 * (b0 + b1), h)
        });
        match advanced {
            Ok(r) => radius = r,
            Err(e @ Error::RadiusCollapse { .. }) => {
                termination = Termination::RadiusCollapse;
                message = e.to_string();
                break;
            }
            Err(e) => return Err(e),
        }
        radius.t = t_new;
        state = next;
        t = t_new;
        steps += 1;
        prof = rec.profile(&g_new, radius.tau)?;
        rec.record(&prof, &radius, h, cfl);
        if t >= next_snap - 1e-9 {
            rec.snapshots.push(g_new);
            next_snap += every;
        }
    }

    // Inequality margins on stored states.
    let mut poincare_failures = 0;
    let mut poincare_worst = f64::INFINITY;
    let mut btb_worst = f64::INFINITY;
    let mut yx_worst = f64::INFINITY;
    let taus = rec.norms.column("tau").expect("tau column");
    let ts = rec.norms.column("t").expect("t column");
    for s in &rec.snapshots {
        let k = ts.iter().rposition(|x| (*x - s.time()).abs() < 1e-9).unwrap_or(0);
        let c = snapshot_checks(&grid, s, taus[k], alpha, cfg.m_max, cfg.verify.m_check)?;
        if !c.poincare.passed {
            poincare_failures += 1;
        }
        if c.poincare.samples > 0 {
            poincare_worst = poincare_worst.min(c.poincare.worst_margin);
        }
        btb_worst = btb_worst.min(c.b_tilde_b);
        if let Some(v) = c.y_x {
            yx_worst = yx_worst.min(v);
        }
    }

    let xs = rec.norms.column("X_sum").expect("X_sum column");
    let decay = fit_decay(&ts, &xs, (cfg.fit_start, cfg.fit_end)).ok();
    let outcome = RunOutcome {
        run_id: cfg.run_id(),
        termination,
        message,
        t_final: t,
        steps,
        amplitude: prepared.amplitude,
        tau0,
        c0,
        c1: cfg.radius.c1,
        c2,
        alpha,
        delta,
        decay,
        max_compensated: rec.max_compensated,
        floor_violations: rec.floor_violations,
        half_radius_violations: rec.half_violations,
        holder_modulus: rec.holder.running_max(),
        ladder_truncations: rec.truncations,
        poincare_failures,
        poincare_worst_margin: poincare_worst,
        b_tilde_b_worst: btb_worst,
        y_x_worst: yx_worst,
        lifespan,
        norms: rec.norms,
        radius: rec.radius_rows,
        snapshots: rec.snapshots,
        run_dir: None,
        final_state: to_g(&state),
    };
    match out {
        Some(base) => write_outputs(base, cfg, &grid, outcome, dump.as_ref()),
        None => Ok(outcome),
    }
}

fn write_outputs(base: &Path, cfg: &RunConfig, grid: &Grid, mut o: RunOutcome, dump: Option<&Field>) -> Result<RunOutcome> {
    let dir = create_run_dir(base, &o.run_id)?;
    std::fs::write(dir.join("config.echo"), cfg.echo())?;
    o.norms.write(&dir.join("norms.csv"))?;
    o.radius.write(&dir.join("radius.csv"))?;
    for s in &o.snapshots {
        save_snapshot(&dir.join("snapshots").join(snapshot_name("g", s.time())), grid, s, "g")?;
    }
    let mut report = o.report();
    if let Some(d) = dump {
        let name = "dump.fld";
        let field = if cfg.solver.formulation() == Formulation::Velocity { "u" } else { "g" };
        save_snapshot(&dir.join(name), grid, d, field)?;
        report.add("dump", name);
    }
    std::fs::write(dir.join("report.txt"), report.render())?;
    o.run_dir = Some(dir);
    Ok(o)
}
