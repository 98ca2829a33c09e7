//! Piecewise-linear energies `J(u) = ∫ H^p(∇u)/p − f·u`, their gradients, and the
//! norms and averages used by the experiments.
//!
//! Assembly runs in two passes: per-simplex fluxes into a buffer, then a per-node
//! gather over each node's incident simplices in a fixed order. Totals use pairwise
//! summation. Results therefore do not depend on the thread count.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::{input, param, Error, Result};
use crate::math::{abs, dot, pow, sqrt};
use crate::mesh::Mesh;
use crate::norms::NormSpec;
use crate::sum::{pairwise_sum, pairwise_sum_by};

/// Nodal values of a piecewise-linear function.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub values: Vec<f64>,
    /// True when the field is required to vanish at the mesh's Dirichlet nodes.
    pub constrained: bool,
}

impl Field {
    pub fn zeros(mesh: &Mesh) -> Self {
        Self { values: vec![0.0; mesh.num_nodes()], constrained: true }
    }

    /// Samples `f` at the nodes; constrained fields get 0 at Dirichlet nodes.
    pub fn from_fn(mesh: &Mesh, constrained: bool, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..mesh.num_nodes())
            .map(|i| if constrained && mesh.is_dirichlet(i) { 0.0 } else { f(mesh.coords(i)) })
            .collect();
        Self { values, constrained }
    }

    /// Unconstrained constant field, e.g. a constant load on the cross-section.
    pub fn constant(mesh: &Mesh, value: f64) -> Self {
        Self { values: vec![value; mesh.num_nodes()], constrained: false }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn scaled(&self, t: f64) -> Self {
        Self { values: self.values.iter().map(|v| t * v).collect(), constrained: self.constrained }
    }

    pub(crate) fn check(&self, mesh: &Mesh) -> Result<()> {
        if self.values.len() != mesh.num_nodes() {
            return Err(input(format!("field has {} values, mesh has {} nodes", self.values.len(), mesh.num_nodes())));
        }
        Ok(())
    }
}

/// Which simplices an integral runs over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    All,
    /// Simplices whose closure lies in `(ℓ/2)ω₁ × ω₂`.
    InsideHalfCylinder,
}

impl Region {
    fn contains(self, mesh: &Mesh, t: usize) -> bool {
        match self {
            Region::All => true,
            Region::InsideHalfCylinder => mesh.inside_half_cylinder(t),
        }
    }
}

/// Parts of the discrete energy.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyBreakdown {
    /// `∫ H^p(∇u)/p`.
    pub dirichlet_part: f64,
    /// `∫ f·u`, lumped.
    pub load_part: f64,
    pub total: f64,
    /// The same three quantities restricted to the half cylinder.
    pub half_dirichlet_part: f64,
    pub half_load_part: f64,
    pub half_total: f64,
}

/// An integrand `Φ(z)` of the form `Ψ(z)^p/p` with `Ψ` 1-homogeneous.
pub(crate) trait Density: Sync {
    /// Writes `∇(Ψ^p/p)(z)` into `out` and returns `Ψ(z)`.
    fn flux_into(&self, p: f64, z: &[f64], out: &mut [f64]) -> Result<f64>;
    fn value(&self, z: &[f64]) -> Result<f64>;
}

impl Density for NormSpec {
    fn flux_into(&self, p: f64, z: &[f64], out: &mut [f64]) -> Result<f64> {
        NormSpec::flux_into(self, p, z, out)
    }

    fn value(&self, z: &[f64]) -> Result<f64> {
        self.eval(z)
    }
}

/// Euclidean length of the trailing coordinates: `|∇_{X₂}u|`.
pub(crate) struct CrossGradient {
    pub skip: usize,
}

impl Density for CrossGradient {
    fn flux_into(&self, p: f64, z: &[f64], out: &mut [f64]) -> Result<f64> {
        let r = sqrt(z[self.skip..].iter().map(|x| x * x).sum());
        out[..self.skip].fill(0.0);
        let scale = if r == 0.0 { 0.0 } else { pow(r, p - 2.0) };
        for (o, x) in out[self.skip..].iter_mut().zip(&z[self.skip..]) {
            *o = scale * x;
        }
        Ok(r)
    }

    fn value(&self, z: &[f64]) -> Result<f64> {
        Ok(sqrt(z[self.skip..].iter().map(|x| x * x).sum()))
    }
}

fn check_density_dim(mesh: &Mesh, norm: &NormSpec) -> Result<()> {
    if norm.dimension() != mesh.dim() {
        return Err(Error::DimensionMismatch { expected: mesh.dim(), found: norm.dimension() });
    }
    Ok(())
}

fn check_p(p: f64) -> Result<()> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(param(format!("p must exceed 1, got {p}")));
    }
    Ok(())
}

/// Per-simplex `Ψ(∇u)` and, if requested, fluxes scaled by the simplex volume.
fn simplex_pass(
    mesh: &Mesh,
    density: &dyn Density,
    p: f64,
    u: &[f64],
    fluxes: Option<&mut [f64]>,
) -> Result<Vec<f64>> {
    let d = mesh.dim();
    let n = mesh.num_simplices();
    let vol = mesh.simplex_volume();
    let mut values = vec![0.0; n];
    let one = |t: usize, value: &mut f64, flux: Option<&mut [f64]>| -> Result<()> {
        let mut z = [0.0f64; 8];
        let z = &mut z[..d];
        mesh.gradient_on(t, u, z);
        *value = match flux {
            Some(out) => {
                let h = density.flux_into(p, z, out)?;
                out.iter_mut().for_each(|x| *x *= vol);
                h
            }
            None => density.value(z)?,
        };
        Ok(())
    };
    #[cfg(feature = "parallel")]
    {
        const CHUNK: usize = 1024;
        match fluxes {
            Some(fl) => values.par_chunks_mut(CHUNK).zip(fl.par_chunks_mut(CHUNK * d)).enumerate().try_for_each(
                |(c, (vals, fl))| {
                    for (k, v) in vals.iter_mut().enumerate() {
                        one(c * CHUNK + k, v, Some(&mut fl[k * d..(k + 1) * d]))?;
                    }
                    Ok(())
                },
            )?,
            None => values.par_chunks_mut(CHUNK).enumerate().try_for_each(|(c, vals)| {
                for (k, v) in vals.iter_mut().enumerate() {
                    one(c * CHUNK + k, v, None)?;
                }
                Ok::<(), Error>(())
            })?,
        }
    }
    #[cfg(not(feature = "parallel"))]
    match fluxes {
        Some(fl) => {
            for (t, v) in values.iter_mut().enumerate() {
                one(t, v, Some(&mut fl[t * d..(t + 1) * d]))?;
            }
        }
        None => {
            for (t, v) in values.iter_mut().enumerate() {
                one(t, v, None)?;
            }
        }
    }
    Ok(values)
}

// out[i] = Σ_{T∋i} ⟨flux_T, ∇φᵢ|_T⟩ − load[i], zero at Dirichlet nodes.
fn gather(mesh: &Mesh, fluxes: &[f64], load: Option<&[f64]>, out: &mut [f64]) {
    let d = mesh.dim();
    let node = |i: usize| -> f64 {
        if mesh.is_dirichlet(i) {
            return 0.0;
        }
        let mut acc = 0.0;
        for &(t, loc) in mesh.incident(i) {
            let t = t as usize;
            acc += dot(&fluxes[t * d..(t + 1) * d], mesh.hat_gradient(t, loc as usize));
        }
        acc - load.map_or(0.0, |b| b[i])
    };
    #[cfg(feature = "parallel")]
    out.par_iter_mut().enumerate().for_each(|(i, o)| *o = node(i));
    #[cfg(not(feature = "parallel"))]
    out.iter_mut().enumerate().for_each(|(i, o)| *o = node(i));
}

/// Lumped load vector `bᵢ = mᵢ f(X₂ of node i)` with `f` given on the cross-section
/// nodes and extended constantly along the axis.
pub fn load_vector(mesh: &Mesh, f: &Field) -> Result<Vec<f64>> {
    if f.len() != mesh.num_cross_nodes() {
        return Err(input(format!(
            "load has {} values, the mesh cross-section has {} nodes",
            f.len(),
            mesh.num_cross_nodes()
        )));
    }
    let nc = mesh.num_cross_nodes();
    Ok(mesh.lumped_mass().iter().enumerate().map(|(i, m)| m * f.values[i % nc]).collect())
}

/// Value of `Σ_T |T|Ψ^p(∇u)/p − ⟨b, u⟩` and optionally its gradient.
pub(crate) fn objective(
    mesh: &Mesh,
    density: &dyn Density,
    p: f64,
    load: &[f64],
    u: &[f64],
    grad: Option<&mut [f64]>,
) -> Result<f64> {
    let values = match grad {
        Some(g) => {
            let mut fl = vec![0.0; mesh.num_simplices() * mesh.dim()];
            let v = simplex_pass(mesh, density, p, u, Some(&mut fl))?;
            gather(mesh, &fl, Some(load), g);
            v
        }
        None => simplex_pass(mesh, density, p, u, None)?,
    };
    let stiff = mesh.simplex_volume() / p * pairwise_sum_by(values.len(), &|t| pow(values[t], p));
    let work = pairwise_sum_by(u.len(), &|i| load[i] * u[i]);
    Ok(stiff - work)
}

/// `∫ Ψ^p(∇u)` over all simplices (no `1/p`), and optionally its gradient.
pub(crate) fn power_integral(
    mesh: &Mesh,
    density: &dyn Density,
    p: f64,
    u: &[f64],
    grad: Option<&mut [f64]>,
) -> Result<f64> {
    let values = match grad {
        Some(g) => {
            let mut fl = vec![0.0; mesh.num_simplices() * mesh.dim()];
            let v = simplex_pass(mesh, density, p, u, Some(&mut fl))?;
            gather(mesh, &fl, None, g);
            g.iter_mut().for_each(|x| *x *= p);
            v
        }
        None => simplex_pass(mesh, density, p, u, None)?,
    };
    Ok(mesh.simplex_volume() * pairwise_sum_by(values.len(), &|t| pow(values[t], p)))
}

/// The discrete energy evaluated with the exact norm.
pub fn energy(mesh: &Mesh, norm: &NormSpec, p: f64, f: &Field, u: &Field) -> Result<EnergyBreakdown> {
    check_p(p)?;
    check_density_dim(mesh, norm)?;
    u.check(mesh)?;
    let load = load_vector(mesh, f)?;
    let exact = norm.exact();
    let h = simplex_pass(mesh, &exact, p, &u.values, None)?;
    let vol = mesh.simplex_volume();
    let n = mesh.num_simplices();
    let dirichlet_part = vol / p * pairwise_sum_by(n, &|t| pow(h[t], p));
    let load_part = pairwise_sum_by(u.len(), &|i| load[i] * u.values[i]);
    let half_dirichlet_part =
        vol / p * pairwise_sum_by(n, &|t| if mesh.inside_half_cylinder(t) { pow(h[t], p) } else { 0.0 });
    let nc = mesh.num_cross_nodes();
    let share = vol / (mesh.dim() + 1) as f64;
    let half_load_part = share
        * pairwise_sum_by(n, &|t| {
            if !mesh.inside_half_cylinder(t) {
                return 0.0;
            }
            mesh.simplex(t).iter().map(|&v| f.values[v % nc] * u.values[v]).sum()
        });
    Ok(EnergyBreakdown {
        dirichlet_part,
        load_part,
        total: dirichlet_part - load_part,
        half_dirichlet_part,
        half_load_part,
        half_total: half_dirichlet_part - half_load_part,
    })
}

/// Gradient of the discrete energy with respect to the nodal values, zero at
/// Dirichlet nodes. Uses the norm's own smoothing.
pub fn energy_gradient(mesh: &Mesh, norm: &NormSpec, p: f64, f: &Field, u: &Field) -> Result<Field> {
    check_p(p)?;
    check_density_dim(mesh, norm)?;
    u.check(mesh)?;
    let load = load_vector(mesh, f)?;
    let mut g = vec![0.0; mesh.num_nodes()];
    objective(mesh, norm, p, &load, &u.values, Some(&mut g))?;
    Ok(Field { values: g, constrained: true })
}

fn region_lp(mesh: &Mesh, u: &Field, p: f64, region: Region, skip: usize) -> Result<f64> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(param(format!("p must be at least 1, got {p}")));
    }
    u.check(mesh)?;
    let n = mesh.num_simplices();
    if !(0..n).any(|t| region.contains(mesh, t)) {
        return Err(Error::EmptyRegion);
    }
    let d = mesh.dim();
    let s = pairwise_sum_by(n, &|t| {
        if !region.contains(mesh, t) {
            return 0.0;
        }
        let mut z = [0.0f64; 8];
        mesh.gradient_on(t, &u.values, &mut z[..d]);
        let r = sqrt(z[skip..d].iter().map(|x| x * x).sum());
        pow(r, p)
    });
    Ok(pow(mesh.simplex_volume() * s, 1.0 / p))
}

/// `‖∇u‖_{L^p(region)}` with the euclidean gradient length.
pub fn grad_lp_norm(mesh: &Mesh, u: &Field, p: f64, region: Region) -> Result<f64> {
    region_lp(mesh, u, p, region, 0)
}

/// `‖∇_{X₂}u‖_{L^p(region)}`: only the cross-section components of the gradient.
pub fn cross_grad_lp_norm(mesh: &Mesh, u: &Field, p: f64, region: Region) -> Result<f64> {
    region_lp(mesh, u, p, region, mesh.axis_dim())
}

/// `‖u‖_{L^p}` by lumped nodal quadrature.
pub fn lp_norm(mesh: &Mesh, u: &Field, p: f64) -> Result<f64> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(param(format!("p must be at least 1, got {p}")));
    }
    u.check(mesh)?;
    let m = mesh.lumped_mass();
    Ok(pow(pairwise_sum_by(u.len(), &|i| m[i] * pow(abs(u.values[i]), p)), 1.0 / p))
}

fn check_alignment(cross: &Mesh, target: &Mesh) -> Result<()> {
    let nc = target.num_cross_nodes();
    if cross.num_nodes() != nc || cross.dim() != target.cross_dim() {
        return Err(input("cross-section mesh does not match the cylinder's cross-section"));
    }
    let m = target.axis_dim();
    for k in 0..nc {
        let a = &target.coords(k)[m..];
        if a.iter().zip(cross.coords(k)).any(|(x, y)| x.to_bits() != y.to_bits()) {
            return Err(input(format!("cross-section node {k} is not aligned with the cylinder mesh")));
        }
    }
    Ok(())
}

/// `(X₁, X₂) ↦ w(X₂)` on `target`.
pub fn extend_constant(w: &Field, cross: &Mesh, target: &Mesh) -> Result<Field> {
    w.check(cross)?;
    check_alignment(cross, target)?;
    let nc = target.num_cross_nodes();
    let values = (0..target.num_nodes()).map(|i| w.values[i % nc]).collect();
    Ok(Field { values, constrained: false })
}

/// `w(X₂) = |ℓω₁|^{-1} ∫ u(X₁, X₂) dX₁` by the trapezoid rule along the axis grid,
/// as a field on the cross-section nodes, zero on `∂ω₂`.
pub fn axis_average(mesh: &Mesh, u: &Field) -> Result<Field> {
    u.check(mesh)?;
    let m = mesh.axis_dim();
    if m == 0 {
        return Err(input("axis average needs a cylinder mesh"));
    }
    let counts = &mesh.counts()[..m];
    let steps = &mesh.steps()[..m];
    let na = mesh.num_axis_nodes();
    let nc = mesh.num_cross_nodes();
    let mut weights = vec![1.0; na];
    let mut idx = vec![0usize; m];
    let mut length = 1.0;
    for k in 0..m {
        length *= mesh.upper()[k] - mesh.lower()[k];
    }
    for (a, w) in weights.iter_mut().enumerate() {
        let mut rem = a;
        for k in (0..m).rev() {
            idx[k] = rem % counts[k];
            rem /= counts[k];
        }
        for k in 0..m {
            let end = idx[k] == 0 || idx[k] + 1 == counts[k];
            *w *= if end { 0.5 * steps[k] } else { steps[k] };
        }
        *w /= length;
    }
    let values = (0..nc)
        .map(|c| {
            if mesh.on_cross_boundary(c) {
                0.0
            } else {
                let terms: Vec<f64> = (0..na).map(|a| weights[a] * u.values[a * nc + c]).collect();
                pairwise_sum(&terms)
            }
        })
        .collect();
    Ok(Field { values, constrained: true })
}
