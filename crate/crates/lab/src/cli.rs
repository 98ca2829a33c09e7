//! `finsler-lab` command line.
//!
//! Exit status: 0 when every check passes, 2 when a numerical check or a solver
//! certification fails, 1 on bad input.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use finsler_core::discrete::Field;
use finsler_core::norms::NormDescriptor;
use finsler_core::solve::{self, picone_check, solve_cross_section, solve_dirichlet, V_FLOOR};
use finsler_core::{Mesh, SolveResult};

use crate::config::{Config, ExperimentKind};
use crate::error::{Error, Result};
use crate::experiments::{self, Ladder};
use crate::output;

/// Axiom violations above this fail `check-norm`.
pub const AXIOM_TOLERANCE: f64 = 1e-8;
pub const PICONE_GAP_TOLERANCE: f64 = 1e-9;
pub const PICONE_SIGN_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Parser)]
#[command(name = "finsler-lab", version, about = "Finsler p-Laplace solves and ℓ-ladders on cylinders")]
pub struct Cli {
    /// Config file; defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Override a config key, e.g. `--set p=3`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Concurrent solves; defaults to the available parallelism.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Solver seed; multi-start seeds are renumbered from it.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Dirichlet problem on the cylinder of length `ell`.
    Solve,
    /// Dirichlet problem on the cross-section.
    Cross,
    /// First eigenpair on the cylinder of length `ell`.
    Eigen,
    /// The ℓ-ladder selected by `kind`.
    Rates,
    /// Sampled norm identities and equivalence constants.
    CheckNorm {
        /// Norm descriptor; the configured norm when omitted.
        descriptor: Option<String>,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
    },
    /// Picone identity on random positive pairs and on (solution, eigenfunction).
    Picone {
        #[arg(long, default_value_t = 100)]
        pairs: usize,
    },
    /// Poincaré constant on strips over `ell_list`.
    Poincare,
}

pub fn load_config(cli: &Cli) -> Result<Config> {
    let cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Input(format!("cannot read {}: {e}", path.display())))?;
            Config::parse(&text)?
        }
        None => Config::default(),
    };
    let cfg = cfg.with_overrides(&cli.overrides)?;
    Ok(match cli.seed {
        Some(s) => cfg.with_seed(s),
        None => cfg,
    })
}

fn workers(cli: &Cli) -> usize {
    cli.workers.unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)).max(1)
}

/// Runs the command; returns the process exit status.
pub fn run(cli: &Cli) -> i32 {
    match dispatch(cli) {
        Ok(true) => 0,
        Ok(false) => 2,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// `Ok(false)` means a check failed.
pub fn dispatch(cli: &Cli) -> Result<bool> {
    let cfg = load_config(cli)?;
    let out = cli.out.as_path();
    match &cli.command {
        Command::Solve => single_solve(&cfg, out, false),
        Command::Cross => single_solve(&cfg, out, true),
        Command::Eigen => eigen(&cfg, out),
        Command::Rates => ladder(&cfg, out, workers(cli)),
        Command::Poincare => {
            let cfg = Config { kind: ExperimentKind::Poincare, ..cfg };
            ladder(&cfg, out, workers(cli))
        }
        Command::CheckNorm { descriptor, samples } => check_norm(&cfg, out, descriptor.as_deref(), *samples),
        Command::Picone { pairs } => picone(&cfg, out, *pairs),
    }
}

fn report_solve(what: &str, r: &SolveResult) {
    println!("{what}: energy {:.12e}", r.energy.total);
    println!("  weak residual {:.3e} (threshold {:.3e}), {} iterations, converged: {}", r.weak_residual, r.certification_threshold, r.iterations, r.converged);
    println!("  continuation schedule {:?}, smoothing scale {:.6e}", r.eps_schedule, r.smoothing_scale);
}

fn single_solve(cfg: &Config, out: &Path, cross_only: bool) -> Result<bool> {
    let norm = cfg.norm_spec()?;
    let cross = cfg.cross_mesh()?;
    let f = cfg.load(&cross)?;
    let (name, mesh, r): (&str, Mesh, SolveResult) = if cross_only {
        let r = solve_cross_section(&cross, &norm, cfg.m, cfg.p, &f, &cfg.solve_options())?;
        ("cross_solution", cross.mesh().clone(), r)
    } else {
        let mesh = cfg.cylinder_mesh(cfg.ell)?;
        let r = solve_dirichlet(&mesh, &norm, cfg.p, &f, &cfg.solve_options())?;
        ("solution", mesh.mesh().clone(), r)
    };
    output::write_atomic(&out.join(format!("{name}.csv")), &output::field_csv(&mesh, &r.field)?)?;
    output::write_atomic(&out.join(format!("{name}_trace.csv")), &output::trace_csv(&r.energy_trace, &r.stage_starts)?)?;
    output::write_resolved(out, cfg)?;
    report_solve(name, &r);
    if !r.converged {
        eprintln!("not certified: residual {:.3e} above {:.3e}", r.weak_residual, r.certification_threshold);
    }
    Ok(r.converged)
}

fn eigen(cfg: &Config, out: &Path) -> Result<bool> {
    let norm = cfg.norm_spec()?;
    let mesh = cfg.cylinder_mesh(cfg.ell)?;
    let r = solve::solve_eigen(&mesh, &norm, cfg.p, &cfg.solve_options())?;
    output::write_atomic(&out.join("eigenfunction.csv"), &output::field_csv(&mesh, &r.field)?)?;
    output::write_atomic(&out.join("eigen_trace.csv"), &output::trace_csv(&r.rayleigh_trace, &r.stage_starts)?)?;
    output::write_resolved(out, cfg)?;
    println!("lambda {:.12e}", r.lambda);
    println!("  weak residual {:.3e}, {} iterations, converged: {}", r.weak_residual, r.iterations, r.converged);
    Ok(r.converged)
}

fn print_ladder(l: &Ladder) {
    println!("{}", l.header.join("\t"));
    for row in &l.rows {
        println!("{}", row.iter().map(|v| format!("{v:.6e}")).collect::<Vec<_>>().join("\t"));
    }
    for c in &l.checks {
        println!("[{}] {}{}", if c.passed { "pass" } else { "FAIL" }, c.name, if c.detail.is_empty() { String::new() } else { format!(": {}", c.detail) });
    }
}

fn ladder(cfg: &Config, out: &Path, workers: usize) -> Result<bool> {
    let l = experiments::run(cfg, workers)?;
    output::write_ladder(out, cfg, &l)?;
    print_ladder(&l);
    Ok(l.passed())
}

fn check_norm(cfg: &Config, out: &Path, descriptor: Option<&str>, samples: usize) -> Result<bool> {
    let norm = match descriptor {
        Some(d) => d.parse::<NormDescriptor>()?.build(cfg.m, cfg.dim())?,
        None => cfg.norm_spec()?,
    };
    let report = norm.check_axioms(samples, cfg.seed)?;
    let theta = norm.theta_bounds(1000.max(2 * norm.dimension()))?;
    let text = format!(
        "norm {} on R^{}\nsamples {} (skipped at singular points: {})\nhomogeneity {:.3e}\nsubadditivity {:.3e}\neuler {:.3e}\nholder {:.3e}\ndual_of_gradient {:.3e}\ntheta1 {:.9} theta2 {:.9} grad_bound {:.9}\n",
        descriptor.map(str::to_string).unwrap_or_else(|| cfg.norm.to_string()),
        norm.dimension(),
        report.samples,
        report.skipped,
        report.homogeneity,
        report.subadditivity,
        report.euler,
        report.holder,
        report.dual_of_gradient,
        theta.theta1,
        theta.theta2,
        theta.grad_bound_c,
    );
    output::write_atomic(&out.join("norm_check.txt"), text.as_bytes())?;
    output::write_resolved(out, cfg)?;
    print!("{text}");
    let ok = report.max_violation() <= AXIOM_TOLERANCE;
    println!("[{}] every violation ≤ {AXIOM_TOLERANCE:e}", if ok { "pass" } else { "FAIL" });
    Ok(ok)
}

/// A field with interior values drawn from `[lo, hi)` and zeros on the Dirichlet nodes.
pub fn random_positive(mesh: &Mesh, rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> Field {
    let values = (0..mesh.num_nodes()).map(|i| if mesh.is_dirichlet(i) { 0.0 } else { rng.random_range(lo..hi) }).collect();
    Field { values, constrained: true }
}

fn picone(cfg: &Config, out: &Path, pairs: usize) -> Result<bool> {
    let norm = cfg.norm_spec()?;
    let mesh = cfg.cylinder_mesh(cfg.ell)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut rows = Vec::new();
    for k in 0..pairs {
        let u = random_positive(&mesh, &mut rng, 0.0, 1.0);
        let v = random_positive(&mesh, &mut rng, 0.1, 1.0);
        let r = picone_check(&mesh, &norm, cfg.p, &u, &v)?;
        rows.push(vec![k as f64, r.max_abs_r_minus_l, r.min_l, r.skipped as f64]);
    }
    let cross = cfg.cross_mesh()?;
    let sol = solve_dirichlet(&mesh, &norm, cfg.p, &cfg.load(&cross)?, &cfg.solve_options())?;
    let eig = solve::solve_eigen(&mesh, &norm, cfg.p, &cfg.solve_options())?;
    let u = Field { values: sol.field.values.iter().map(|&x| x.max(0.0)).collect(), constrained: true };
    let v = Field { values: eig.field.values.iter().enumerate().map(|(i, &x)| if mesh.is_dirichlet(i) { 0.0 } else { x.max(V_FLOOR) }).collect(), constrained: true };
    let r = picone_check(&mesh, &norm, cfg.p, &u, &v)?;
    rows.push(vec![pairs as f64, r.max_abs_r_minus_l, r.min_l, r.skipped as f64]);

    let header = ["pair", "max_abs_r_minus_l", "min_l", "skipped"];
    output::write_atomic(&out.join("picone.csv"), &output::csv_table(&header, &rows)?)?;
    output::write_resolved(out, cfg)?;
    let worst = rows.iter().map(|r| r[1]).fold(0.0, f64::max);
    let min_l = rows.iter().map(|r| r[2]).fold(f64::INFINITY, f64::min);
    let ok = worst <= PICONE_GAP_TOLERANCE && min_l >= -PICONE_SIGN_TOLERANCE;
    println!("{} pairs (last: solution against eigenfunction)", rows.len());
    println!("max |R − L| = {worst:.3e}, min L = {min_l:.3e}");
    println!("[{}] max |R − L| ≤ {PICONE_GAP_TOLERANCE:e} and min L ≥ −{PICONE_SIGN_TOLERANCE:e}", if ok { "pass" } else { "FAIL" });
    Ok(ok)
}
