//! ℓ-ladders: one solve per cylinder length, compared against the cross-section
//! limit, with decay fits and pass/fail checks on the measured quantities.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use finsler_core::discrete::{self, Field};
use finsler_core::solve::{self, solve_cross_section, solve_dirichlet, EigenResult, SolveResult};
use finsler_core::{fit_rate, BoundaryKind, CrossSectionMesh, CylinderMesh, DecayModel, NormSpec, RateFit, Region};

use crate::config::{Config, ExperimentKind};
use crate::error::{Error, Result};

/// A named pass/fail outcome with the numbers behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Check { name: name.into(), passed, detail: detail.into() }
    }
}

/// A fit, or the reason it could not be made.
#[derive(Debug, Clone, PartialEq)]
pub struct FitSummary {
    pub label: String,
    pub model: DecayModel,
    pub fit: std::result::Result<RateFit, String>,
    /// Points left out for sitting below the solver noise floor.
    pub below_floor: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ladder {
    pub kind: ExperimentKind,
    pub header: Vec<&'static str>,
    /// One row per ℓ, in increasing ℓ.
    pub rows: Vec<Vec<f64>>,
    pub fits: Vec<FitSummary>,
    pub checks: Vec<Check>,
    /// Reference values such as `J_∞(u_∞)` or `μ_∞`.
    pub reference: Vec<(&'static str, f64)>,
}

impl Ladder {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.header.iter().position(|h| *h == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }

    pub fn fit(&self, label: &str, model: DecayModel) -> Option<&FitSummary> {
        self.fits.iter().find(|f| f.label == label && f.model == model)
    }
}

/// Runs `job` over `items` on up to `workers` threads; results keep the item order.
pub fn parallel_map<T: Sync, R: Send>(items: &[T], workers: usize, job: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let workers = workers.clamp(1, items.len().max(1));
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<R>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = job(&items[i]);
                slots.lock().unwrap()[i] = Some(r);
            });
        }
    });
    slots.into_inner().unwrap().into_iter().map(|r| r.expect("every job ran")).collect()
}

/// Runs the ladder selected by `cfg.kind`.
pub fn run(cfg: &Config, workers: usize) -> Result<Ladder> {
    match cfg.kind {
        ExperimentKind::SolutionRate => run_solution_rate(cfg, workers),
        ExperimentKind::GradientBound => run_gradient_bound(cfg, workers),
        ExperimentKind::EnergyRate => run_energy_rate(cfg, workers),
        ExperimentKind::EigenRate => run_eigen_rate(cfg, workers),
        ExperimentKind::Poincare => run_poincare(cfg, workers),
    }
}

struct Setup {
    norm: NormSpec,
    cross_norm: NormSpec,
    cross: CrossSectionMesh,
    f: Field,
}

fn setup(cfg: &Config) -> Result<Setup> {
    let norm = cfg.norm_spec()?;
    let cross_norm = norm.cross_section(cfg.m)?;
    let cross = cfg.cross_mesh()?;
    let f = cfg.load(&cross)?;
    Ok(Setup { norm, cross_norm, cross, f })
}

fn certified(what: &'static str, ell: f64, r: &SolveResult) -> Result<()> {
    if r.converged {
        Ok(())
    } else {
        Err(Error::NotConverged { what, ell, residual: r.weak_residual, threshold: r.certification_threshold })
    }
}

fn cross_solution(cfg: &Config, s: &Setup) -> Result<SolveResult> {
    let r = solve_cross_section(&s.cross, &s.cross_norm, 0, cfg.p, &s.f, &cfg.solve_options())?;
    certified("cross-section solve", f64::INFINITY, &r)?;
    Ok(r)
}

fn cylinder_solution(cfg: &Config, s: &Setup, ell: f64) -> Result<(CylinderMesh, SolveResult)> {
    let mesh = cfg.cylinder_mesh(ell)?;
    let r = solve_dirichlet(&mesh, &s.norm, cfg.p, &s.f, &cfg.solve_options())?;
    certified("Dirichlet solve", ell, &r)?;
    Ok((mesh, r))
}

/// Values below this are treated as solver noise and kept out of fits.
pub fn noise_floor(cfg: &Config) -> f64 {
    100.0 * cfg.tol_grad
}

fn fits_for(label: &str, points: &[(f64, f64)], floor: f64, models: &[DecayModel]) -> Vec<FitSummary> {
    let kept: Vec<(f64, f64)> = points.iter().copied().filter(|&(_, v)| v >= floor).collect();
    let below_floor = points.len() - kept.len();
    models
        .iter()
        .map(|&model| FitSummary {
            label: label.to_string(),
            model,
            fit: fit_rate(&kept, model).map_err(|e| format!("degenerate fit: {e}")),
            below_floor,
        })
        .collect()
}

fn spread(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    max / min
}

/// Exponent `e` of the upper bound `err(ℓ) ≤ C ℓ^e` on the half cylinder.
pub fn solution_rate_exponent(m: usize, p: f64) -> f64 {
    if p >= 2.0 {
        m as f64 - p / (p - 1.0)
    } else {
        m as f64 - p * p / (2.0 - p)
    }
}

pub fn run_solution_rate(cfg: &Config, workers: usize) -> Result<Ladder> {
    let s = setup(cfg)?;
    let u_inf = cross_solution(cfg, &s)?;
    let rows = parallel_map(&cfg.ell_list, workers, |&ell| -> Result<Vec<f64>> {
        let (mesh, r) = cylinder_solution(cfg, &s, ell)?;
        let ext = discrete::extend_constant(&u_inf.field, &s.cross, &mesh)?;
        let diff = Field { values: r.field.values.iter().zip(&ext.values).map(|(a, b)| a - b).collect(), constrained: false };
        let err = discrete::grad_lp_norm(&mesh, &diff, cfg.p, Region::InsideHalfCylinder)?;
        let grad = discrete::grad_lp_norm(&mesh, &r.field, cfg.p, Region::All)?;
        Ok(vec![ell, err, grad])
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let floor = noise_floor(cfg);
    let points: Vec<(f64, f64)> = rows.iter().map(|r| (r[0], r[1])).collect();
    let fits = fits_for("err_halfcyl", &points, floor, &[DecayModel::Power, DecayModel::Exponential]);
    let mut checks = Vec::new();
    let resolved: Vec<(f64, f64)> = points.iter().copied().filter(|&(_, v)| v >= floor).collect();

    let rising: Vec<String> = resolved.windows(2).filter(|w| w[1].1 > 1.01 * w[0].1).map(|w| format!("ℓ={} → ℓ={}", w[0].0, w[1].0)).collect();
    checks.push(Check::new(
        "error nonincreasing in ℓ (1% slack)",
        rising.is_empty(),
        if rising.is_empty() { format!("{} resolved points", resolved.len()) } else { format!("increases at {}", rising.join(", ")) },
    ));

    let e = solution_rate_exponent(cfg.m, cfg.p);
    let scaled: Vec<f64> = resolved.iter().map(|&(l, v)| v * l.powf(-e)).collect();
    let bound_ok = scaled.first().is_none_or(|&c| scaled.iter().all(|&v| v <= 1.01 * c));
    checks.push(Check::new(
        format!("err(ℓ) ≤ C·ℓ^{e:.4} with C fixed at the first rung (1% slack)"),
        bound_ok,
        format!("err·ℓ^{:.4} = [{}]", -e, scaled.iter().map(|v| format!("{v:.6e}")).collect::<Vec<_>>().join(", ")),
    ));

    Ok(Ladder {
        kind: ExperimentKind::SolutionRate,
        header: vec!["ell", "err_halfcyl", "grad_lp_norm"],
        rows,
        fits,
        checks,
        reference: vec![("rate_bound_exponent", e), ("noise_floor", floor)],
    })
}

pub fn run_gradient_bound(cfg: &Config, workers: usize) -> Result<Ladder> {
    let s = setup(cfg)?;
    let rows = parallel_map(&cfg.ell_list, workers, |&ell| -> Result<Vec<f64>> {
        let (mesh, r) = cylinder_solution(cfg, &s, ell)?;
        let g = discrete::grad_lp_norm(&mesh, &r.field, cfg.p, Region::All)?;
        Ok(vec![ell, g / ell.powf(cfg.m as f64 / cfg.p)])
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let ratios: Vec<f64> = rows.iter().map(|r| r[1]).collect();
    let check = if cfg.load_is_zero() {
        Check::new("ratios vanish for f = 0", ratios.iter().all(|&r| r == 0.0), "")
    } else {
        let sp = spread(&ratios);
        Check::new("ratio max/min ≤ 2", ratios.iter().all(|&r| r > 0.0) && sp <= 2.0, format!("max/min = {sp:.6}"))
    };
    Ok(Ladder { kind: ExperimentKind::GradientBound, header: vec!["ell", "ratio"], rows, fits: Vec::new(), checks: vec![check], reference: Vec::new() })
}

pub fn run_energy_rate(cfg: &Config, workers: usize) -> Result<Ladder> {
    let s = setup(cfg)?;
    let u_inf = cross_solution(cfg, &s)?;
    let j_inf = u_inf.energy.total;
    let results = parallel_map(&cfg.ell_list, workers, |&ell| -> Result<(Vec<f64>, f64)> {
        let (mesh, r) = cylinder_solution(cfg, &s, ell)?;
        let scaled = r.energy.total / ell.powi(cfg.m as i32);
        let gap = scaled - j_inf;
        let w = discrete::axis_average(&mesh, &r.field)?;
        let j_avg = discrete::energy(&s.cross, &s.cross_norm, cfg.p, &s.f, &w)?.total;
        Ok((vec![ell, scaled, gap, gap * ell], j_avg))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let tol = cfg.mesh_tolerance;
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    let mut jensen_bad = Vec::new();
    for (row, j_avg) in results {
        if j_avg < j_inf - tol {
            jensen_bad.push(format!("ℓ={}: J_∞(w) − J_∞(u_∞) = {:.3e}", row[0], j_avg - j_inf));
        }
        rows.push(row);
    }
    let gaps: Vec<f64> = rows.iter().map(|r| r[2]).collect();
    let worst = gaps.iter().cloned().fold(f64::INFINITY, f64::min);
    checks.push(Check::new(format!("gap ≥ −{tol:e}"), worst >= -tol, format!("smallest gap {worst:.6e}")));
    let positive: Vec<f64> = rows.iter().filter(|r| r[2] > 0.0).map(|r| r[3]).collect();
    if cfg.load_is_zero() {
        checks.push(Check::new("energies vanish for f = 0", gaps.iter().all(|&g| g == 0.0), ""));
    } else {
        let sp = spread(&positive);
        let ok = positive.len() >= 2 && sp <= 4.0;
        checks.push(Check::new("gap·ℓ max/min ≤ 4 over positive gaps", ok, format!("{} positive, max/min = {sp:.6}", positive.len())));
    }
    checks.push(Check::new("Jensen: J_∞(axis average of u_ℓ) ≥ J_∞(u_∞)", jensen_bad.is_empty(), jensen_bad.join("; ")));
    Ok(Ladder {
        kind: ExperimentKind::EnergyRate,
        header: vec!["ell", "scaled_energy", "gap", "gap_times_ell"],
        rows,
        fits: Vec::new(),
        checks,
        reference: vec![("j_inf", j_inf)],
    })
}

fn best_of(runs: Vec<Result<EigenResult>>, what: &'static str, ell: f64, tol: f64) -> Result<EigenResult> {
    let mut best: Option<EigenResult> = None;
    for r in runs {
        let r = r?;
        if best.as_ref().is_none_or(|b| r.lambda < b.lambda) {
            best = Some(r);
        }
    }
    let best = best.ok_or_else(|| Error::Input("no seeds".into()))?;
    if !best.converged {
        return Err(Error::NotConverged { what, ell, residual: best.weak_residual, threshold: 10.0 * tol });
    }
    Ok(best)
}

/// Smallest first eigenvalue over the configured seeds, on the cross-section.
pub fn cross_eigenvalue(cfg: &Config, workers: usize) -> Result<EigenResult> {
    let s = setup(cfg)?;
    let runs = parallel_map(&cfg.seeds, workers, |&seed| {
        let opts = finsler_core::SolveOptions { seed, ..cfg.solve_options() };
        solve::solve_eigen(&s.cross, &s.cross_norm, cfg.p, &opts).map_err(Error::from)
    });
    best_of(runs, "cross-section eigen solve", f64::INFINITY, cfg.tol_grad)
}

pub fn run_eigen_rate(cfg: &Config, workers: usize) -> Result<Ladder> {
    let s = setup(cfg)?;
    let mu = cross_eigenvalue(cfg, workers)?.lambda;
    let meshes = cfg.ell_list.iter().map(|&ell| cfg.cylinder_mesh(ell)).collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, u64)> = (0..meshes.len()).flat_map(|k| cfg.seeds.iter().map(move |&seed| (k, seed))).collect();
    let mut runs = parallel_map(&jobs, workers, |&(k, seed)| {
        let opts = finsler_core::SolveOptions { seed, ..cfg.solve_options() };
        solve::solve_eigen(&meshes[k], &s.norm, cfg.p, &opts).map_err(Error::from)
    })
    .into_iter();
    let p = cfg.p;
    let mut rows = Vec::new();
    for &ell in &cfg.ell_list {
        let per_seed: Vec<_> = runs.by_ref().take(cfg.seeds.len()).collect();
        let best = best_of(per_seed, "eigen solve", ell, cfg.tol_grad)?;
        let gap = best.lambda - mu;
        rows.push(vec![ell, best.lambda, gap, gap * ell, gap * ell.powf(p)]);
    }

    let tol = cfg.mesh_tolerance;
    let gaps: Vec<f64> = rows.iter().map(|r| r[2]).collect();
    let worst = gaps.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut checks = vec![Check::new(format!("λ_ℓ ≥ μ_∞ − {tol:e}"), worst >= -tol, format!("smallest gap {worst:.6e}"))];
    let points: Vec<(f64, f64)> = rows.iter().map(|r| (r[0], r[2])).collect();
    let fits = fits_for("gap", &points, noise_floor(cfg), &[DecayModel::Power]);
    if cfg.is_split() {
        let scaled: Vec<f64> = rows.iter().map(|r| r[4]).collect();
        let sp = spread(&scaled);
        checks.push(Check::new(
            "gap·ℓ^p bounded above and below (all positive, max/min ≤ 4)",
            scaled.iter().all(|&v| v > 0.0) && sp <= 4.0,
            format!("max/min = {sp:.6}"),
        ));
        let (ok, detail) = match &fits[0].fit {
            Ok(f) => ((f.exponent_or_rate + p).abs() <= 0.3, format!("exponent {:.4} vs {:.4}", f.exponent_or_rate, -p)),
            Err(e) => (false, e.clone()),
        };
        checks.push(Check::new("power fit exponent within ±0.3 of −p", ok, detail));
    }
    Ok(Ladder {
        kind: ExperimentKind::EigenRate,
        header: vec!["ell", "lambda", "gap", "gap_times_ell", "gap_times_ell_p"],
        rows,
        fits,
        checks,
        reference: vec![("mu_inf", mu)],
    })
}

pub fn run_poincare(cfg: &Config, workers: usize) -> Result<Ladder> {
    let meshes = cfg
        .ell_list
        .iter()
        .map(|&ell| Ok(CylinderMesh::build_with(ell, cfg.m, &cfg.cross, cfg.h_axis, cfg.h_cross, BoundaryKind::StripOnly)?))
        .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, u64)> = (0..meshes.len()).flat_map(|k| cfg.seeds.iter().map(move |&seed| (k, seed))).collect();
    let mut runs = parallel_map(&jobs, workers, |&(k, seed)| {
        let opts = finsler_core::SolveOptions { seed, ..cfg.solve_options() };
        solve::solve_poincare(&meshes[k], cfg.p, &opts).map_err(Error::from)
    })
    .into_iter();
    let mut rows = Vec::new();
    for &ell in &cfg.ell_list {
        let per_seed: Vec<_> = runs.by_ref().take(cfg.seeds.len()).collect();
        let best = best_of(per_seed, "Poincaré quotient", ell, cfg.tol_grad)?;
        rows.push(vec![ell, best.lambda.powf(-1.0 / cfg.p)]);
    }
    let c: Vec<f64> = rows.iter().map(|r| r[1]).collect();
    let sp = spread(&c);
    Ok(Ladder {
        kind: ExperimentKind::Poincare,
        header: vec!["ell", "c_p"],
        rows,
        fits: Vec::new(),
        checks: vec![Check::new("C_P max/min ≤ 1.05", sp <= 1.05, format!("max/min = {sp:.8}"))],
        reference: Vec::new(),
    })
}
