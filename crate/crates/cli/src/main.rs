//! `heatopt` command-line front end.
//!
//! Exit codes: 0 success, 1 self-check failure or I/O error, 2 usage or
//! configuration error, 3 non-convergence.

mod config;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand as ClapSub};

use config::{CliConfig, Subcommand};
use heatopt::experiments::{self, output, Axis, ExampleConfig, StudySpec};
use heatopt::optimizer::SolverOptions;
use heatopt::selfcheck;
use heatopt::ssc::{self, SscOptions};
use heatopt::{Error, Result};

/// Environment variable naming the default output root.
const OUT_ENV: &str = "HEATOPT_OUT";

#[derive(Parser, Debug)]
#[command(name = "heatopt", version, about = "Time-optimal control of the heat equation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(ClapSub, Debug)]
enum Command {
    /// Solve one discretization and write report, history, control and log.
    Solve(Common),
    /// Refinement study in time or space with EOCs, CSV and SVG.
    Study(Common),
    /// Second-order sufficient condition sweep over α and grids.
    Ssc(Common),
    /// Run the finite-difference and symmetry oracle battery.
    Selfcheck(Common),
}

#[derive(Args, Debug)]
struct Common {
    /// example1, example2 or example3
    #[arg(long)]
    example: Option<String>,
    /// config file (flat key = value with [section] headers)
    #[arg(long)]
    config: Option<PathBuf>,
    /// number of time steps
    #[arg(long = "M")]
    m: Option<usize>,
    /// spatial level ℓ (n = 4·2^ℓ cells per side)
    #[arg(long)]
    level: Option<usize>,
    /// study discretizations: a count or a comma-separated list
    #[arg(long)]
    levels: Option<String>,
    /// first level (space) or first M (time) when --levels is a count
    #[arg(long)]
    start: Option<usize>,
    /// study axis: time or space
    #[arg(long)]
    axis: Option<String>,
    /// variational, cellwise-constant, cellwise-linear or parameter
    #[arg(long)]
    control: Option<String>,
    /// cost parameter α
    #[arg(long)]
    alpha: Option<f64>,
    /// comma-separated α values for the SSC sweep
    #[arg(long)]
    alphas: Option<String>,
    /// comma-separated M:level pairs for the SSC sweep
    #[arg(long)]
    grids: Option<String>,
    /// feasibility tolerance on |g| (default 1e-9)
    #[arg(long = "tol-g")]
    tol_g: Option<f64>,
    /// stationarity tolerance (default 1e-8)
    #[arg(long = "tol-s")]
    tol_s: Option<f64>,
    /// cap on augmented-Lagrangian iterations (default 40)
    #[arg(long = "max-outer")]
    max_outer: Option<usize>,
    /// output directory (default: $HEATOPT_OUT/<subcommand>/<example>)
    #[arg(long)]
    out: Option<PathBuf>,
    /// run the finite-difference gates at computed solutions
    #[arg(long = "self-check")]
    self_check: bool,
}

fn pick<T: std::str::FromStr>(flag: Option<T>, file: &BTreeMap<String, String>, key: &str, default: T) -> Result<T> {
    match (flag, file.get(key)) {
        (Some(v), _) => Ok(v),
        (None, Some(s)) => s.parse().map_err(|_| Error::Config(format!("{key}: cannot parse '{s}'"))),
        (None, None) => Ok(default),
    }
}

fn resolve(sub: Subcommand, c: Common) -> Result<CliConfig> {
    let file = match &c.config {
        Some(p) => config::load(p)?,
        None => BTreeMap::new(),
    };
    let name = pick(c.example, &file, "problem.example", "example1".to_string())?;
    let mut example = ExampleConfig::by_name(&name)?;
    if let Some(kind) = c.control.or_else(|| file.get("problem.control").cloned()) {
        example.control = config::control_kind(&kind, &example)?;
    }
    example.alpha = pick(c.alpha, &file, "problem.alpha", example.alpha)?;
    if !(example.alpha > 0.0) {
        return Err(Error::Config(format!("alpha must be positive, got {}", example.alpha)));
    }
    let m = pick(c.m, &file, "grid.M", 160)?;
    let level = pick(c.level, &file, "grid.level", 3)?;
    let axis: Axis = pick(c.axis, &file, "study.axis", "space".to_string())?.parse()?;
    let start = match c.start {
        Some(s) => Some(s),
        None => file.get("study.start").map(|s| s.parse().map_err(|_| Error::Config(format!("study.start: cannot parse '{s}'")))).transpose()?,
    };
    let values = if sub == Subcommand::Study {
        let levels = pick(c.levels, &file, "study.levels", "3".to_string())?;
        config::study_values(axis, &levels, start)?
    } else {
        Vec::new()
    };
    let alphas = match c.alphas.or_else(|| file.get("ssc.alphas").cloned()) {
        Some(s) => config::list("ssc.alphas", &s)?,
        None => vec![example.alpha],
    };
    if alphas.is_empty() || alphas.iter().any(|a| !(*a > 0.0)) {
        return Err(Error::Config("ssc.alphas must be positive".into()));
    }
    let grids = match c.grids.or_else(|| file.get("ssc.grids").cloned()) {
        Some(s) => config::grids("ssc.grids", &s)?,
        None => vec![(m, level)],
    };
    let defaults = SolverOptions::default();
    let solver = SolverOptions {
        tol_g: pick(c.tol_g, &file, "solver.tol_g", defaults.tol_g)?,
        tol_s: pick(c.tol_s, &file, "solver.tol_s", defaults.tol_s)?,
        max_outer: pick(c.max_outer, &file, "solver.max_outer", defaults.max_outer)?,
        max_newton: pick(None, &file, "solver.max_newton", defaults.max_newton)?,
        ..defaults
    };
    if !(solver.tol_g > 0.0 && solver.tol_s > 0.0) {
        return Err(Error::Config("tolerances must be positive".into()));
    }
    let out = match c.out.or_else(|| file.get("output.dir").map(PathBuf::from)) {
        Some(p) => p,
        None => {
            let root = std::env::var_os(OUT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("heatopt-out"));
            root.join(sub.name()).join(&example.name)
        }
    };
    Ok(CliConfig { subcommand: sub, example, m, level, axis, values, alphas, grids, solver, out, self_check: c.self_check })
}

fn print_checks(checks: &[selfcheck::Check]) {
    for c in checks {
        println!("{c}");
    }
}

fn checks_csv(dir: &Path, checks: &[selfcheck::Check]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for c in checks {
        w.serialize(c)?;
    }
    output::write_atomic(&dir.join("selfcheck.csv"), &w.into_inner().map_err(|e| e.into_error())?)
}

fn run_solve(cfg: &CliConfig) -> Result<()> {
    let run = experiments::run_example(&cfg.example, cfg.m, cfg.level, &cfg.solver, None, Some(&cfg.out))?;
    let r = &run.report;
    println!(
        "{} M={} level={} N={}: nu={:.10} mu={:.6e} |g|={:.2e} outer={} newton={} cg={} ({:.2}s)",
        cfg.example.name,
        cfg.m,
        cfg.level,
        run.problem.ops.mesh.num_nodes(),
        r.nu,
        r.mu,
        r.g.abs(),
        r.outer_iterations,
        r.newton_iterations,
        r.cg_iterations,
        r.seconds
    );
    if cfg.self_check {
        let checks = selfcheck::derivative_gates(&run.problem, r.nu, &run.iterate.q, r.mu, 7)?;
        print_checks(&checks);
        checks_csv(&cfg.out, &checks)?;
        selfcheck::require_all(&checks)?;
    }
    println!("artifacts in {}", cfg.out.display());
    Ok(())
}

fn run_study(cfg: &CliConfig) -> Result<()> {
    let fixed = match cfg.axis {
        Axis::Space => cfg.m,
        Axis::Time => cfg.level,
    };
    let spec = StudySpec { axis: cfg.axis, values: cfg.values.clone(), fixed };
    let res = experiments::convergence_study(&cfg.example, &spec, &cfg.solver, None)?;
    output::write_atomic(&cfg.out.join("study.csv"), output::study_csv(&res.rows)?.as_bytes())?;
    output::write_atomic(&cfg.out.join("study.svg"), output::study_svg(&res.rows, cfg.axis).as_bytes())?;
    output::write_run_artifacts(&cfg.out.join("finest"), &cfg.example, &res.finest)?;
    let fmt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.2}"));
    println!("{:>5} {:>6} {:>7} {:>11} {:>11} {:>11} {:>6} {:>6} {:>6}", "level", "M", "N", "err_nu", "err_q", "err_u", "eoc_nu", "eoc_q", "eoc_u");
    for r in &res.rows {
        println!(
            "{:>5} {:>6} {:>7} {:>11.3e} {:>11.3e} {:>11.3e} {:>6} {:>6} {:>6}",
            r.level,
            r.m,
            r.nodes,
            r.err_nu,
            r.err_q,
            r.err_u,
            fmt(r.eoc_nu),
            fmt(r.eoc_q),
            fmt(r.eoc_u)
        );
    }
    println!("reference nu = {:.10}; artifacts in {}", res.reference_nu, cfg.out.display());
    Ok(())
}

fn run_ssc(cfg: &CliConfig) -> Result<()> {
    let ssc_opts = SscOptions { self_check: cfg.self_check, ..SscOptions::default() };
    let cells = experiments::ssc_sweep(&cfg.example, &cfg.alphas, &cfg.grids, &cfg.solver, &ssc_opts);
    output::write_atomic(&cfg.out.join("ssc.csv"), output::ssc_csv(&cells)?.as_bytes())?;
    let reports: Vec<ssc::SscReport> = cells.iter().filter_map(|c| c.outcome.as_ref().ok().cloned()).collect();
    let table = ssc::render_table(&reports);
    output::write_atomic(&cfg.out.join("ssc_table.txt"), table.as_bytes())?;
    print!("{table}");
    let failed: Vec<String> = cells
        .iter()
        .filter_map(|c| c.outcome.as_ref().err().map(|e| format!("alpha={} M={} level={}: {e}", c.alpha, c.m, c.level)))
        .collect();
    for f in &failed {
        eprintln!("failed cell {f}");
    }
    println!("artifacts in {}", cfg.out.display());
    if let Some(first) = cells.iter().find_map(|c| c.outcome.as_ref().err()) {
        if first.contains("self-check") {
            return Err(Error::SelfCheck(first.clone()));
        }
        return Err(Error::NonConvergence { stage: "sweep", iterations: failed.len(), g_abs: f64::NAN, stationarity: f64::NAN, history: failed.join("; ") });
    }
    Ok(())
}

fn run_selfcheck(cfg: &CliConfig) -> Result<()> {
    let checks = selfcheck::run_battery(&cfg.solver, 7)?;
    print_checks(&checks);
    checks_csv(&cfg.out, &checks)?;
    let passed = checks.iter().filter(|c| c.passed).count();
    println!("{passed}/{} checks passed", checks.len());
    selfcheck::require_all(&checks)
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Alignment { .. } | Error::Domain(_) => 2,
        e if e.is_non_convergence() => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let (sub, common) = match cli.command {
        Command::Solve(c) => (Subcommand::Solve, c),
        Command::Study(c) => (Subcommand::Study, c),
        Command::Ssc(c) => (Subcommand::Ssc, c),
        Command::Selfcheck(c) => (Subcommand::SelfCheck, c),
    };
    let result = resolve(sub, common).and_then(|cfg| {
        log::info!("{cfg:?}");
        match cfg.subcommand {
            Subcommand::Solve => run_solve(&cfg),
            Subcommand::Study => run_study(&cfg),
            Subcommand::Ssc => run_ssc(&cfg),
            Subcommand::SelfCheck => run_selfcheck(&cfg),
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
