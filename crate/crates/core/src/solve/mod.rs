//! Minimizers of the discrete energy and of the Rayleigh quotient.
//!
//! Dirichlet problems are solved by L-BFGS on the energy under an ε-continuation of
//! the norm smoothing; a result is `converged` only when the weak residual (the
//! ∞-norm of the exact energy gradient) is below the certification threshold.

mod eigen;
mod lbfgs;
mod picone;

pub use eigen::{solve_eigen, solve_poincare, EigenResult};
pub use picone::{picone_check, PiconeReport, V_FLOOR};

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::discrete::{self, Density, EnergyBreakdown, Field};
use crate::error::{param, Error, Result};
use crate::math::{abs, inf_norm, pow, sin, sqrt};
use crate::mesh::{CrossSectionMesh, CylinderMesh, Mesh};
use crate::norms::NormSpec;

use lbfgs::{minimize, Objective, Settings};

/// Stopping rules and continuation schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    /// Threshold on the ∞-norm of the constrained gradient.
    pub tol_grad: f64,
    /// Relative energy decrease below which the iteration counts as stalled.
    pub tol_energy: f64,
    /// Iteration budget per continuation stage.
    pub max_iters: usize,
    /// Relative smoothing values, strictly decreasing. Empty selects the default.
    pub eps_schedule: Vec<f64>,
    pub seed: u64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { tol_grad: 1e-10, tol_energy: 1e-15, max_iters: 20_000, eps_schedule: Vec::new(), seed: 0 }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol_grad > 0.0) || !(self.tol_energy >= 0.0) {
            return Err(param("tolerances must be positive"));
        }
        if self.max_iters == 0 {
            return Err(param("max_iters must be positive"));
        }
        if self.eps_schedule.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(param("eps_schedule must be strictly decreasing"));
        }
        if self.eps_schedule.last().is_some_and(|&e| !(e >= 0.0)) {
            return Err(param("eps_schedule entries must be nonnegative"));
        }
        Ok(())
    }

    /// The schedule actually used for `norm` and `p`.
    pub fn schedule_for(&self, norm: &NormSpec, p: f64) -> Vec<f64> {
        if !self.eps_schedule.is_empty() {
            return self.eps_schedule.clone();
        }
        if norm.is_smooth_for(p) {
            return vec![0.0];
        }
        let last = if norm.has_unit_exponent() { 1e-8 } else { 0.0 };
        vec![1e-2, 1e-4, 1e-6, last]
    }
}

/// Minimizer of the discrete energy.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub field: Field,
    /// Energy with the exact norm.
    pub energy: EnergyBreakdown,
    pub weak_residual: f64,
    /// Accepted iterations summed over all stages.
    pub iterations: usize,
    pub converged: bool,
    /// Smoothed energy after every accepted iteration, stages concatenated.
    pub energy_trace: Vec<f64>,
    /// Index in `energy_trace` where each continuation stage starts.
    pub stage_starts: Vec<usize>,
    pub eps_schedule: Vec<f64>,
    /// Characteristic gradient scale `s` the smoothing is relative to.
    pub smoothing_scale: f64,
    pub certification_threshold: f64,
}

struct EnergyObjective<'a> {
    mesh: &'a Mesh,
    density: &'a dyn Density,
    p: f64,
    load: &'a [f64],
}

impl Objective for EnergyObjective<'_> {
    fn eval(&mut self, x: &[f64], g: &mut [f64]) -> Result<f64> {
        discrete::objective(self.mesh, self.density, self.p, self.load, x, Some(g))
    }
}

fn check_problem(mesh: &Mesh, norm: &NormSpec, p: f64) -> Result<()> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(param(format!("p must exceed 1, got {p}")));
    }
    if norm.dimension() != mesh.dim() {
        return Err(Error::DimensionMismatch { expected: mesh.dim(), found: norm.dimension() });
    }
    Ok(())
}

/// Product of sine bumps over the cross-section coordinates, times a cosine bump
/// over the axis coordinates when `axis_bump`.
pub(crate) fn bump(mesh: &Mesh, x: &[f64], axis_bump: bool) -> f64 {
    let m = mesh.axis_dim();
    let mut v = 1.0;
    for k in 0..mesh.dim() {
        let (lo, hi) = (mesh.lower()[k], mesh.upper()[k]);
        let s = sin(core::f64::consts::PI * (x[k] - lo) / (hi - lo));
        if k >= m || axis_bump {
            v *= s;
        }
    }
    v.max(0.0)
}

fn initial_guess(mesh: &Mesh, p: f64, f: &Field, seed: u64) -> Vec<f64> {
    let f_max = inf_norm(&f.values);
    if f_max == 0.0 {
        return vec![0.0; mesh.num_nodes()];
    }
    let width = (mesh.axis_dim()..mesh.dim()).map(|k| mesh.upper()[k] - mesh.lower()[k]).fold(f64::INFINITY, f64::min);
    let amplitude = 0.1 * pow(f_max * pow(width, p), 1.0 / (p - 1.0));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..mesh.num_nodes())
        .map(|i| {
            let noise: f64 = rng.random_range(-0.1..0.1);
            if mesh.is_dirichlet(i) {
                0.0
            } else {
                amplitude * bump(mesh, mesh.coords(i), true) * (1.0 + noise)
            }
        })
        .collect()
}

/// RMS euclidean gradient of the `p = 2`, `H = |·|` solution with the same load.
fn characteristic_scale(mesh: &Mesh, load: &[f64], opts: &SolveOptions) -> Result<f64> {
    let eucl = NormSpec::euclidean(mesh.dim());
    let mut x = vec![0.0; mesh.num_nodes()];
    let b = inf_norm(load);
    if b == 0.0 {
        return Ok(1.0);
    }
    let cfg = Settings { tol_grad: 1e-6 * b, tol_energy: 1e-12, max_iters: opts.max_iters };
    minimize(&mut EnergyObjective { mesh, density: &eucl, p: 2.0, load }, &mut x, &cfg)?;
    let u = Field { values: x, constrained: true };
    let rms = discrete::grad_lp_norm(mesh, &u, 2.0, discrete::Region::All)? / sqrt(mesh.total_volume());
    Ok(if rms > 0.0 { rms } else { 1.0 })
}

/// ∞-norm of the energy gradient with the exact norm, falling back to `fallback`
/// where the exact gradient is undefined.
fn certified_residual(mesh: &Mesh, norm: &NormSpec, p: f64, load: &[f64], u: &[f64], fallback: &NormSpec) -> Result<f64> {
    let mut g = vec![0.0; u.len()];
    match discrete::objective(mesh, &norm.exact(), p, load, u, Some(&mut g)) {
        Ok(_) => Ok(inf_norm(&g)),
        Err(Error::SingularPoint) => {
            discrete::objective(mesh, fallback, p, load, u, Some(&mut g))?;
            Ok(inf_norm(&g))
        }
        Err(e) => Err(e),
    }
}

fn solve_on(mesh: &Mesh, norm: &NormSpec, p: f64, f: &Field, opts: &SolveOptions) -> Result<SolveResult> {
    opts.validate()?;
    check_problem(mesh, norm, p)?;
    let load = discrete::load_vector(mesh, f)?;
    let mut load_free = load.clone();
    for (i, b) in load_free.iter_mut().enumerate() {
        if mesh.is_dirichlet(i) {
            *b = 0.0;
        }
    }
    let load_inf = inf_norm(&load_free);
    let threshold = opts.tol_grad.max(1e-8 * load_inf);
    let schedule = opts.schedule_for(norm, p);
    let scale = if schedule.iter().any(|&e| e > 0.0) { characteristic_scale(mesh, &load, opts)? } else { 1.0 };

    let mut x = initial_guess(mesh, p, f, opts.seed);
    let mut trace = Vec::new();
    let mut stage_starts = Vec::new();
    let mut iterations = 0;
    let mut smoothed = norm.exact();
    for (k, &eps) in schedule.iter().enumerate() {
        smoothed = norm.with_smoothing(eps, scale)?;
        let last = k + 1 == schedule.len();
        let tol = if last { threshold } else { threshold.max(1e-6 * load_inf) };
        let cfg = Settings { tol_grad: tol, tol_energy: opts.tol_energy, max_iters: opts.max_iters };
        let mut obj = EnergyObjective { mesh, density: &smoothed, p, load: &load };
        let out = minimize(&mut obj, &mut x, &cfg)?;
        stage_starts.push(trace.len());
        trace.extend_from_slice(&out.trace);
        iterations += out.iterations;
    }
    let weak_residual = certified_residual(mesh, norm, p, &load, &x, &smoothed)?;
    let field = Field { values: x, constrained: true };
    let energy = discrete::energy(mesh, norm, p, f, &field)?;
    Ok(SolveResult {
        field,
        energy,
        weak_residual,
        iterations,
        converged: weak_residual <= threshold,
        energy_trace: trace,
        stage_starts,
        eps_schedule: schedule,
        smoothing_scale: scale,
        certification_threshold: threshold,
    })
}

/// `u_ℓ`: minimizer of `J_ℓ` on the cylinder with zero data on `∂Ω_ℓ`.
///
/// `f` lives on the cross-section nodes (one value per node of a slice).
pub fn solve_dirichlet(mesh: &CylinderMesh, norm: &NormSpec, p: f64, f: &Field, opts: &SolveOptions) -> Result<SolveResult> {
    solve_on(mesh, norm, p, f, opts)
}

/// `u_∞`: minimizer of `J_∞` on the cross-section.
///
/// `norm` is the full norm on `ℝⁿ` and `axis_dim` the number of axis coordinates;
/// the cross-section problem uses `Z₂ ↦ H(0, Z₂)`. Pass `axis_dim = 0` when `norm`
/// already lives on the cross-section.
pub fn solve_cross_section(
    mesh: &CrossSectionMesh,
    norm: &NormSpec,
    axis_dim: usize,
    p: f64,
    f: &Field,
    opts: &SolveOptions,
) -> Result<SolveResult> {
    let restricted = norm.cross_section(axis_dim)?;
    solve_on(mesh, &restricted, p, f, opts)
}

/// The weak form tested against.
#[derive(Debug, Clone, Copy)]
pub enum WeakForm<'a> {
    /// `∫ H^{p−1}(∇u)⟨∇H(∇u), ∇φ⟩ = ∫ f φ` with `f` on the cross-section nodes.
    Dirichlet(&'a Field),
    /// `∫ H^{p−1}(∇v)⟨∇H(∇v), ∇φ⟩ = λ ∫ |v|^{p−2} v φ`.
    Eigen(f64),
}

/// ∞-norm over interior hat functions of the weak-form defect of `u`. Uses the
/// norm's own smoothing.
pub fn weak_residual(mesh: &Mesh, norm: &NormSpec, p: f64, form: WeakForm<'_>, u: &Field) -> Result<f64> {
    check_problem(mesh, norm, p)?;
    u.check(mesh)?;
    let mut g = vec![0.0; mesh.num_nodes()];
    match form {
        WeakForm::Dirichlet(f) => {
            let load = discrete::load_vector(mesh, f)?;
            discrete::objective(mesh, norm, p, &load, &u.values, Some(&mut g))?;
        }
        WeakForm::Eigen(lambda) => {
            let mass = mesh.lumped_mass();
            let load: Vec<f64> = u
                .values
                .iter()
                .zip(mass)
                .map(|(&v, m)| if v == 0.0 { 0.0 } else { lambda * m * pow(abs(v), p - 2.0) * v })
                .collect();
            discrete::objective(mesh, norm, p, &load, &u.values, Some(&mut g))?;
        }
    }
    Ok(inf_norm(&g))
}
