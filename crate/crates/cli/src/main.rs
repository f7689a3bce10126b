//! `prandtl`: simulate, picard, crosscheck and verify drivers.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical abort,
//! 4 parameter-regime violation.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use prandtl_core::config::RunConfig;
use prandtl_core::io::{create_run_dir, Report, Table};
use prandtl_core::solver::{run_picard, run_simulation, Termination};
use prandtl_core::verify::{
    cross_formulation, dawson_report, measure_product_constants, verify_random_fields, AdmissibleFamily,
    InequalityReport,
};
use prandtl_core::Error;

#[derive(Parser, Debug)]
#[command(name = "prandtl", version, about = "Good-unknown Prandtl solver and norm diagnostics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evolve g and the analyticity radius; writes run-<id>/ under --out.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "runs")]
        out: PathBuf,
    },
    /// Two-step Picard iteration of the regularised system.
    Picard {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "runs")]
        out: PathBuf,
    },
    /// Good-unknown vs velocity-form twin runs up to solver.t_end.
    Crosscheck {
        #[arg(long)]
        config: PathBuf,
    },
    /// Inequality suite on random admissible fields.
    Verify {
        #[arg(long, value_enum, default_value_t = Suite::All)]
        suite: Suite,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Grid, weight and radius settings; defaults when absent.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Also write the rows to this CSV file.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Suite {
    Poincare,
    Diagnostic,
    Products,
    Dawson,
    All,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::Regime(_)) => 4,
        Some(Error::Config(_) | Error::InvalidGrid(_) | Error::WeightTail(_)) => 2,
        Some(Error::Io(_)) if err.chain().any(|c| c.to_string().starts_with("reading config")) => 2,
        Some(_) => 3,
        None => 2,
    }
}

fn load(path: &Path) -> anyhow::Result<RunConfig> {
    let cfg = RunConfig::from_file(path).with_context(|| format!("reading config {}", path.display()))?;
    cfg.validate()?;
    Ok(cfg)
}

fn simulate(config: &Path, out: &Path) -> anyhow::Result<u8> {
    let cfg = load(config)?;
    let o = run_simulation(&cfg, Some(out))?;
    let dir = o.run_dir.as_ref().expect("output directory requested");
    print!("{}", o.report().render());
    println!("run_dir: {}", dir.display());
    if o.termination != Termination::TEnd {
        log::error!("run aborted: {}", o.message);
        return Ok(3);
    }
    if !o.radius_ok() {
        log::error!(
            "radius floor violated on {} rows, below tau0/2 on {} rows",
            o.floor_violations,
            o.half_radius_violations
        );
        return Ok(3);
    }
    Ok(0)
}

fn picard(config: &Path, out: &Path) -> anyhow::Result<u8> {
    let cfg = load(config)?;
    let rep = run_picard(&cfg)?;
    let dir = create_run_dir(out, &cfg.run_id())?;
    std::fs::write(dir.join("config.echo"), cfg.echo())?;
    let mut table = Table::new(&["n", "distance", "ratio", "paired_ratio"]);
    for (i, d) in rep.distances.iter().enumerate() {
        let n = i + 1;
        let r = rep.ratios.iter().find(|r| r.0 == n).map_or(f64::NAN, |r| r.1);
        let p = rep.paired_ratios.iter().find(|r| r.0 == n).map_or(f64::NAN, |r| r.1);
        table.push(vec![n as f64, *d, r, p]);
    }
    table.write(&dir.join("picard.csv"))?;
    let mut r = Report::default();
    r.add("run_id", cfg.run_id());
    r.add("iterations", rep.iterations);
    r.add("steps", rep.steps);
    r.add("dt", rep.dt);
    r.add("max_ratio", rep.max_ratio());
    r.add("diverged", rep.diverged);
    r.add("tail", rep.tail);
    r.add("distance_to_imex", rep.distance_to_imex);
    std::fs::write(dir.join("report.txt"), r.render())?;
    print!("{}", r.render());
    print!("{}", table.to_csv());
    println!("run_dir: {}", dir.display());
    Ok(0)
}

fn crosscheck(config: &Path) -> anyhow::Result<u8> {
    let cfg = load(config)?;
    let c = cross_formulation(&cfg)?;
    println!("t: {}", c.t);
    println!("relative_distance: {:e}", c.distance);
    Ok(0)
}

fn verify(suite: Suite, trials: usize, seed: u64, config: Option<&Path>, csv: Option<&Path>) -> anyhow::Result<u8> {
    let cfg = match config {
        Some(p) => load(p)?,
        None => RunConfig::default(),
    };
    let grid = cfg.validate()?;
    let alpha = cfg.alpha();
    let mut reports: Vec<InequalityReport> = Vec::new();
    if matches!(suite, Suite::Poincare | Suite::Diagnostic | Suite::All) {
        let (p, d) = verify_random_fields(&grid, trials, seed, alpha, cfg.verify.m_check)?;
        if suite != Suite::Diagnostic {
            reports.push(p);
        }
        if suite != Suite::Poincare {
            reports.extend(d);
        }
    }
    if matches!(suite, Suite::Products | Suite::All) {
        let fam = AdmissibleFamily::for_products(&grid);
        let pc = measure_product_constants(&grid, &fam, trials, seed, cfg.radius.tau0, alpha)?;
        reports.extend(pc.reports);
    }
    if matches!(suite, Suite::Dawson | Suite::All) {
        reports.push(dawson_report(10_000, 50.0));
    }
    let mut text = String::from(InequalityReport::CSV_HEADER);
    text.push('\n');
    for r in &reports {
        text.push_str(&r.csv_row());
        text.push('\n');
    }
    print!("{text}");
    if let Some(p) = csv {
        std::fs::write(p, &text).with_context(|| format!("writing {}", p.display()))?;
    }
    let failed = reports.iter().filter(|r| !r.passed).count();
    println!("summary: {} checks, {} failed", reports.len(), failed);
    Ok(if failed == 0 { 0 } else { 3 })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate { config, out } => simulate(config, out),
        Command::Picard { config, out } => picard(config, out),
        Command::Crosscheck { config } => crosscheck(config),
        Command::Verify { suite, trials, seed, config, csv } => {
            verify(*suite, *trials, *seed, config.as_deref(), csv.as_deref())
        }
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
