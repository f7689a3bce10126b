//! Acceptance criteria A1–A10. Each test prints one `A<n> PASS|FAIL` line
//! before asserting. The standard small-data run is shared by A2–A5.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use prandtl_core::goodunknown::{g_from_u, recover_u};
use prandtl_core::grid::l2_weighted;
use prandtl_core::solver::{run_picard, run_simulation, RunOutcome, SolverMode, Termination};
use prandtl_core::verify::{
    cross_formulation, dawson_report, measure_product_constants, two_run_consistency, verify_random_fields,
    AdmissibleFamily, InequalityReport,
};
use prandtl_core::{make_grid, CoordMode, Field, Grid, GridConfig, RunConfig};

fn report(id: &str, pass: bool, detail: String) {
    // Written to the raw handle so the line survives the test harness's capture.
    let line = format!("{id} {}: {detail}\n", if pass { "PASS" } else { "FAIL" });
    std::io::stdout().lock().write_all(line.as_bytes()).unwrap();
    assert!(pass, "{id} failed: {detail}");
}

fn standard_config() -> RunConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/standard.cfg");
    RunConfig::from_file(&path).unwrap()
}

fn standard_run() -> &'static (RunOutcome, Duration) {
    static RUN: OnceLock<(RunOutcome, Duration)> = OnceLock::new();
    RUN.get_or_init(|| {
        let start = Instant::now();
        let out = run_simulation(&standard_config(), None).unwrap();
        (out, start.elapsed())
    })
}

/// Short uncalibrated twin of the standard run.
fn short_config(t_end: f64) -> RunConfig {
    let mut cfg = standard_config();
    cfg.radius.calibrate = false;
    cfg.solver.t_end = t_end;
    cfg.solver.snapshot_every = t_end / 2.0;
    cfg.fit_start = 0.0;
    cfg.fit_end = t_end;
    cfg
}

fn grid(nz: usize) -> Grid {
    make_grid(GridConfig { nz, mode: CoordMode::PhysicalY, ..GridConfig::default() }).unwrap()
}

#[test]
fn a1_roundtrip() {
    let start = Instant::now();
    let alpha = RunConfig::default().alpha();
    let errors = |nz: usize| {
        let gr = grid(nz);
        let rel = |a: &Field, b: &Field| {
            let d = Field::new(&gr, a.values() - b.values(), 0.0).unwrap();
            l2_weighted(&gr, &d, alpha).unwrap() / l2_weighted(&gr, b, alpha).unwrap()
        };
        // Generic profile: the trapezoid in U is only second order here.
        let g = Field::from_fn_y(&gr, 0.0, |x, y| (1.0 + 0.5 * x.cos()) * (1.0 + y * y) * (-y * y / 2.0).exp()).unwrap();
        let back = g_from_u(&gr, &recover_u(&gr, &g).unwrap()).unwrap();
        // Closed-form pair at t = 0: u = y e^{−y²/4}, g = e^{−y²/4}.
        let gc = Field::from_fn_y(&gr, 0.0, |x, y| (1.0 + 0.5 * x.cos()) * (-y * y / 4.0).exp()).unwrap();
        let uc = Field::from_fn_y(&gr, 0.0, |x, y| (1.0 + 0.5 * x.cos()) * y * (-y * y / 4.0).exp()).unwrap();
        let u_err = rel(&recover_u(&gr, &gc).unwrap(), &uc);
        let g_err = rel(&g_from_u(&gr, &uc).unwrap(), &gc);
        (rel(&back, &g), u_err, g_err)
    };
    let (rt1, u1, s1) = errors(128);
    let (rt2, _, s2) = errors(256);
    let ratio = rt1 / rt2;
    let order = (s1 / s2).log2();
    let elapsed = start.elapsed();
    // The kernel integrand of the pair is constant, so U is exact; the
    // wall-to-interior derivative stencil is fourth order.
    let pass = rt1 <= 1e-3
        && (3.2..=4.8).contains(&ratio)
        && u1 <= 1e-12
        && order >= 3.5
        && elapsed < Duration::from_secs(1);
    report(
        "A1",
        pass,
        format!(
            "roundtrip rel L2 {rt1:.3e} (ratio {ratio:.2}), pair: U error {u1:.1e}, \
             g_from_u error {s1:.3e} (order {order:.2}), {elapsed:.2?}"
        ),
    );
}

#[test]
fn a2_weighted_poincare() {
    let cfg = standard_config();
    let gr = cfg.validate().unwrap();
    let start = Instant::now();
    let (p, _) = verify_random_fields(&gr, 100, cfg.verify.seed, cfg.alpha(), cfg.verify.m_check).unwrap();
    let elapsed = start.elapsed();
    let (run, _) = standard_run();
    let pass = p.passed
        && p.samples >= 100
        && run.poincare_failures == 0
        && run.snapshots.len() == 101
        && elapsed < Duration::from_secs(30);
    report(
        "A2",
        pass,
        format!(
            "random worst margin {:.3e} over {} checks, snapshot failures {} (worst {:.3e}) over {} snapshots, {elapsed:.2?}",
            p.worst_margin,
            p.samples,
            run.poincare_failures,
            run.poincare_worst_margin,
            run.snapshots.len()
        ),
    );
}

#[test]
fn a3_decay_exponent() {
    let (run, elapsed) = standard_run();
    let fit = run.decay.expect("decay fit over [10, 100]");
    let pass = run.termination == Termination::TEnd
        && fit.slope <= -1.0
        && fit.r2 >= 0.98
        && *elapsed < Duration::from_secs(600);
    report(
        "A3",
        pass,
        format!("slope {:.4} r2 {:.4} from {} rows, run {elapsed:.1?}", fit.slope, fit.r2, fit.samples),
    );
}

#[test]
fn a4_compensated_monotone() {
    let (run, _) = standard_run();
    let t = run.norms.column("t").unwrap();
    let c = run.norms.column("decay_compensated").unwrap();
    let mut running = f64::INFINITY;
    let mut worst = 0.0f64;
    let mut at = 0.0;
    for (t, c) in t.iter().zip(&c) {
        if *t < 1.0 {
            continue;
        }
        if running.is_finite() && (c - running) / running > worst {
            worst = (c - running) / running;
            at = *t;
        }
        running = running.min(*c);
    }
    report("A4", worst <= 0.01, format!("largest relative rise {worst:.3e} (t = {at})"));
}

#[test]
fn a5_radius_floor() {
    let (run, _) = standard_run();
    let cfg = standard_config();
    let calibrated = cfg.radius.calibrate && cfg.radius.c2.is_none() && (run.c2 - 6.0 * run.c0 * run.c1).abs() <= 1e-12 * run.c2;
    let tau = run.radius.column("tau").unwrap();
    let floor = run.radius.column("tau_lower_bound").unwrap();
    let min_gap = tau.iter().zip(&floor).map(|(a, b)| a - b).fold(f64::INFINITY, f64::min);
    let min_tau = tau.iter().copied().fold(f64::INFINITY, f64::min);
    let pass = calibrated
        && run.floor_violations == 0
        && run.half_radius_violations == 0
        && min_tau >= run.tau0 / 2.0
        && run.holder_modulus.is_finite();
    report(
        "A5",
        pass,
        format!(
            "C0 {:.4e} C2 {:.4e}, min tau {min_tau:.6} min gap {min_gap:.3e}, holder modulus {:.3e}",
            run.c0, run.c2, run.holder_modulus
        ),
    );
}

#[test]
fn a6_cross_formulation() {
    let start = Instant::now();
    let coarse = short_config(0.5);
    let mut fine = coarse.clone();
    fine.grid.nz *= 2;
    fine.solver.dt_init /= 2.0;
    let a = cross_formulation(&coarse).unwrap();
    let b = cross_formulation(&fine).unwrap();
    let ratio = a.distance / b.distance;
    let elapsed = start.elapsed();
    let pass = (a.t - 0.5).abs() < 1e-12 && a.distance <= 1e-3 && ratio >= 3.2 && elapsed < Duration::from_secs(120);
    report(
        "A6",
        pass,
        format!("distance {:.3e}, refined {:.3e}, ratio {ratio:.2}, {elapsed:.1?}", a.distance, b.distance),
    );
}

#[test]
fn a7_picard_contraction() {
    let start = Instant::now();
    let mut cfg = short_config(1.0);
    // ν = 0.05 needs a cutoff of at least 1/ν = 20 modes.
    cfg.grid.nx = 64;
    cfg.solver.mode = SolverMode::PicardTwoStep;
    cfg.solver.nu = 0.05;
    cfg.solver.picard_iters = 8;
    let rep = run_picard(&cfg).unwrap();
    let elapsed = start.elapsed();
    let ratios: Vec<String> = rep.ratios.iter().map(|(n, r)| format!("{n}:{r:.3}")).collect();
    let pass = rep.ratios.len() == 6
        && rep.ratios.iter().all(|(_, r)| *r <= 0.5)
        && !rep.diverged
        && elapsed < Duration::from_secs(300);
    report("A7", pass, format!("ratios [{}], tail {:.3e}, {elapsed:.1?}", ratios.join(" "), rep.tail));
}

#[test]
fn a8_instability_sanity() {
    // Calibrated constants as in the standard run.
    let mut cfg = standard_config();
    cfg.solver.t_end = 10.0;
    cfg.init = prandtl_core::solver::InitialData::sign_changing();
    cfg.solver.snapshot_every = 0.5;
    let run = run_simulation(&cfg, None).unwrap();
    let t = run.norms.column("t").unwrap();
    let x = run.norms.column("X_sum").unwrap();
    let peak = t.iter().zip(&x).filter(|(t, _)| **t < 10.0).map(|(_, x)| *x).fold(0.0, f64::max);
    let growth = peak / x[0];
    let pass = run.termination == Termination::RadiusCollapse || growth >= 10.0;
    report(
        "A8",
        pass,
        format!("termination {} at t = {:.3}, X growth {growth:.2}x", run.termination, run.t_final),
    );
}

#[test]
fn a9_inequality_suite() {
    let start = Instant::now();
    let cfg = short_config(1.0);
    let alpha = cfg.alpha();
    let suite = |nz: usize| -> Vec<InequalityReport> {
        let mut c = cfg.clone();
        c.grid.nz = nz;
        let gr = c.validate().unwrap();
        let (p, mut d) = verify_random_fields(&gr, 100, 7, alpha, c.verify.m_check).unwrap();
        d.insert(0, p);
        let fam = AdmissibleFamily::for_products(&gr);
        d.extend(measure_product_constants(&gr, &fam, 100, 7, c.radius.tau0, alpha).unwrap().reports);
        d
    };
    let coarse = suite(128);
    let fine = suite(256);
    let dawson = dawson_report(10_000, 50.0);
    let mut lines = Vec::new();
    let mut pass = dawson.passed && dawson.worst_margin > 0.0;
    for (a, b) in coarse.iter().zip(&fine) {
        let drift = if a.measured_constant == 0.0 && b.measured_constant == 0.0 {
            0.0
        } else {
            (a.measured_constant - b.measured_constant).abs() / a.measured_constant.abs().max(b.measured_constant.abs())
        };
        let ok = a.passed && b.passed && a.measured_constant.is_finite() && drift <= 0.1;
        pass &= ok;
        lines.push(format!("{} C={:.4} drift={drift:.2e}", a.name, a.measured_constant));
    }
    let elapsed = start.elapsed();
    pass &= elapsed < Duration::from_secs(60);
    report(
        "A9",
        pass,
        format!("{}; dawson margin {:.3e}; {elapsed:.1?}", lines.join(", "), dawson.worst_margin),
    );
}

#[test]
fn a10_determinism_and_consistency() {
    let cfg = short_config(1.0);
    let dir = tempfile::tempdir().unwrap();
    let outputs: Vec<PathBuf> = ["a", "b"]
        .iter()
        .map(|sub| {
            let base = dir.path().join(sub);
            run_simulation(&cfg, Some(&base)).unwrap().run_dir.unwrap()
        })
        .collect();
    let identical = ["norms.csv", "radius.csv", "report.txt"].iter().all(|f| {
        std::fs::read(outputs[0].join(f)).unwrap() == std::fs::read(outputs[1].join(f)).unwrap()
    });

    let with_dt = |dt: f64| {
        let mut c = cfg.clone();
        c.solver.dt_init = dt;
        c
    };
    let d1 = two_run_consistency(&with_dt(0.02), &with_dt(0.01)).unwrap();
    let d2 = two_run_consistency(&with_dt(0.01), &with_dt(0.005)).unwrap();
    let ratio = d1 / d2;
    let pass = identical && (3.2..=4.8).contains(&ratio);
    report(
        "A10",
        pass,
        format!("bitwise identical outputs: {identical}, dt-halving distances {d1:.3e} -> {d2:.3e} (ratio {ratio:.2})"),
    );
}
