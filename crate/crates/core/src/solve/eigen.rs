//! First eigenpair by projected L-BFGS on the Rayleigh quotient
//! `R(v) = ∫ Ψ^p(∇v) / ∫ |v|^p`, with every iterate clamped to its nonnegative part
//! and renormalized to `‖v‖_p = 1`.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::lbfgs::{minimize, Objective, Settings, Stop};
use super::{bump, check_problem, SolveOptions};
use crate::discrete::{self, CrossGradient, Density, Field, Region};
use crate::error::{param, Error, Result};
use crate::math::{abs, inf_norm, pow, sqrt};
use crate::mesh::{BoundaryKind, CylinderMesh, Mesh};
use crate::norms::NormSpec;
use crate::sum::pairwise_sum_by;

#[derive(Debug, Clone, PartialEq)]
pub struct EigenResult {
    /// Rayleigh quotient of `field` with the exact integrand.
    pub lambda: f64,
    /// Nonnegative minimizer with `‖field‖_p = 1`.
    pub field: Field,
    /// Quotient after every accepted iteration, stages concatenated.
    pub rayleigh_trace: Vec<f64>,
    pub stage_starts: Vec<usize>,
    pub weak_residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

struct Rayleigh<'a> {
    mesh: &'a Mesh,
    density: &'a dyn Density,
    p: f64,
}

fn lp_power(mesh: &Mesh, p: f64, x: &[f64]) -> f64 {
    let m = mesh.lumped_mass();
    pairwise_sum_by(x.len(), &|i| m[i] * pow(abs(x[i]), p))
}

impl Rayleigh<'_> {
    fn quotient(&self, x: &[f64], g: Option<&mut [f64]>) -> Result<f64> {
        let n = lp_power(self.mesh, self.p, x);
        if n == 0.0 {
            return Ok(f64::INFINITY);
        }
        match g {
            None => Ok(discrete::power_integral(self.mesh, self.density, self.p, x, None)? / n),
            Some(g) => {
                let top = discrete::power_integral(self.mesh, self.density, self.p, x, Some(g))?;
                let r = top / n;
                let m = self.mesh.lumped_mass();
                for (i, gi) in g.iter_mut().enumerate() {
                    let v = x[i];
                    let dn = if v == 0.0 || self.mesh.is_dirichlet(i) { 0.0 } else { self.p * m[i] * pow(abs(v), self.p - 2.0) * v };
                    *gi = (*gi - r * dn) / n;
                }
                Ok(r)
            }
        }
    }
}

impl Objective for Rayleigh<'_> {
    fn eval(&mut self, x: &[f64], g: &mut [f64]) -> Result<f64> {
        self.quotient(x, Some(g))
    }

    fn project(&self, x: &mut [f64]) {
        for (i, v) in x.iter_mut().enumerate() {
            if *v < 0.0 || self.mesh.is_dirichlet(i) {
                *v = 0.0;
            }
        }
        let n = lp_power(self.mesh, self.p, x);
        if n > 0.0 {
            let s = pow(n, -1.0 / self.p);
            x.iter_mut().for_each(|v| *v *= s);
        }
    }
}

fn initial_field(mesh: &Mesh, axis_bump: bool, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..mesh.num_nodes())
        .map(|i| {
            let noise: f64 = rng.random_range(-0.01..0.01);
            if mesh.is_dirichlet(i) {
                0.0
            } else {
                bump(mesh, mesh.coords(i), axis_bump) * (1.0 + noise)
            }
        })
        .collect()
}

// ∞-norm of the eigen weak-form defect `Σ|T|⟨a(∇v), ∇φᵢ⟩ − λ mᵢ|vᵢ|^{p−2}vᵢ`.
fn eigen_defect(mesh: &Mesh, density: &dyn Density, p: f64, lambda: f64, x: &[f64]) -> Result<f64> {
    let m = mesh.lumped_mass();
    let load: Vec<f64> =
        x.iter().zip(m).map(|(&v, mi)| if v == 0.0 { 0.0 } else { lambda * mi * pow(abs(v), p - 2.0) * v }).collect();
    let mut g = vec![0.0; x.len()];
    discrete::objective(mesh, density, p, &load, x, Some(&mut g))?;
    Ok(inf_norm(&g))
}

fn run(
    mesh: &Mesh,
    exact: &dyn Density,
    smoothed_at: &dyn Fn(f64, f64) -> Result<NormOrDensity>,
    schedule: &[f64],
    p: f64,
    axis_bump: bool,
    opts: &SolveOptions,
) -> Result<EigenResult> {
    opts.validate()?;
    let mut x = initial_field(mesh, axis_bump, opts.seed);
    let probe = Rayleigh { mesh, density: exact, p };
    probe.project(&mut x);
    let scale = {
        let u = Field { values: x.clone(), constrained: true };
        let g = discrete::grad_lp_norm(mesh, &u, 2.0, Region::All)? / sqrt(mesh.total_volume());
        if g > 0.0 { g } else { 1.0 }
    };

    let mut trace = Vec::new();
    let mut stage_starts = Vec::new();
    let mut iterations = 0;
    let mut last_stop = Stop::MaxIters;
    let mut last_density = None;
    for &eps in schedule {
        let density = smoothed_at(eps, scale)?;
        let cfg = Settings { tol_grad: p * opts.tol_grad, tol_energy: opts.tol_energy, max_iters: opts.max_iters };
        let mut obj = Rayleigh { mesh, density: density.as_density(), p };
        let out = minimize(&mut obj, &mut x, &cfg)?;
        stage_starts.push(trace.len());
        trace.extend_from_slice(&out.trace);
        iterations += out.iterations;
        last_stop = out.stop;
        last_density = Some(density);
    }
    let last_density = last_density.ok_or_else(|| param("empty continuation schedule"))?;

    let probe = Rayleigh { mesh, density: exact, p };
    let (lambda, residual) = match probe.quotient(&x, None) {
        Ok(lambda) => match eigen_defect(mesh, exact, p, lambda, &x) {
            Ok(r) => (lambda, r),
            Err(Error::SingularPoint) => (lambda, eigen_defect(mesh, last_density.as_density(), p, lambda, &x)?),
            Err(e) => return Err(e),
        },
        Err(e) => return Err(e),
    };
    let settled = matches!(last_stop, Stop::Gradient | Stop::Stalled);
    Ok(EigenResult {
        lambda,
        field: Field { values: x, constrained: true },
        rayleigh_trace: trace,
        stage_starts,
        weak_residual: residual,
        iterations,
        converged: settled && residual <= 10.0 * opts.tol_grad,
    })
}

enum NormOrDensity {
    Norm(NormSpec),
    Cross(CrossGradient),
}

impl NormOrDensity {
    fn as_density(&self) -> &dyn Density {
        match self {
            NormOrDensity::Norm(n) => n,
            NormOrDensity::Cross(c) => c,
        }
    }
}

/// `λ¹ = min ∫H^p(∇v) / ∫|v|^p` over fields vanishing on the Dirichlet nodes.
///
/// Starts from the positive product bump `Π cos(πxₐ/ℓ) Π sin(π(y−a)/(b−a))` with a
/// seeded 1% perturbation.
pub fn solve_eigen(mesh: &Mesh, norm: &NormSpec, p: f64, opts: &SolveOptions) -> Result<EigenResult> {
    check_problem(mesh, norm, p)?;
    let schedule = opts.schedule_for(norm, p);
    let exact = norm.exact();
    let smoothed = |eps: f64, s: f64| norm.with_smoothing(eps, s).map(NormOrDensity::Norm);
    let axis_bump = mesh.boundary() == BoundaryKind::Full;
    run(mesh, &exact, &smoothed, &schedule, p, axis_bump, opts)
}

/// `min ∫|∇_{X₂}v|^p / ∫|v|^p` on a strip-boundary mesh; the Poincaré constant on
/// strips is `lambda^{-1/p}`.
pub fn solve_poincare(mesh: &CylinderMesh, p: f64, opts: &SolveOptions) -> Result<EigenResult> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(param("p must exceed 1"));
    }
    if mesh.boundary() != BoundaryKind::StripOnly {
        return Err(param("the Poincaré quotient needs a mesh constrained on the strip boundary only"));
    }
    let density = CrossGradient { skip: mesh.axis_dim() };
    let cross = |_: f64, _: f64| Ok(NormOrDensity::Cross(CrossGradient { skip: mesh.axis_dim() }));
    run(mesh, &density, &cross, &[0.0], p, false, opts)
}
