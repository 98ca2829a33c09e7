//! Minkowski norm families `H` on `ℝⁿ`.
//!
//! Every family is convex, positively 1-homogeneous and symmetric. Evaluation has
//! two modes:
//!
//! - exact (`smoothing_eps = 0`): the norm itself; gradients fail with
//!   [`Error::SingularPoint`] at `z = 0` and on the kinks of `q = 1` families.
//! - smoothed (`smoothing_eps > 0`): every inner absolute value `|zᵢ|` becomes
//!   `(zᵢ² + δ²)^{1/2}` with `δ = smoothing_eps · smoothing_scale`, and the value at
//!   the origin is subtracted so that `H(0) = 0` still holds. Smoothed norms are
//!   `C¹` everywhere and are only meant for optimizer continuation.

mod checks;
mod descriptor;
mod dual;

pub use checks::{Assumption, AxiomReport, MonotonicityReport, ThetaBounds};
pub use descriptor::NormDescriptor;

use alloc::boxed::Box;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use smallvec::SmallVec;

use crate::error::{param, Error, Result};
use crate::math::{abs, pow, signum, sqrt};

pub(crate) type Scratch = SmallVec<[f64; 8]>;

/// The norm family and its parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum NormFamily {
    /// `H_q(z) = (Σ|zᵢ|^q)^{1/q}`.
    QNorm { q: f64 },
    /// `H_{A,q}(z) = H_q(Az)`, `A` row-major and invertible.
    MatrixQNorm { q: f64, matrix: Vec<f64> },
    /// `(Σᵢ λᵢ (Σ_{j∈blockᵢ} |zⱼ|^{pᵢ})^{q/pᵢ})^{1/q}`.
    BlockNorm { q: f64, sizes: Vec<usize>, exponents: Vec<f64>, weights: Vec<f64> },
    /// `(F^q(Z₁) + G^q(Z₂))^{1/q}` with `Z₁` the leading `axis.dimension()` coordinates.
    SplitNorm { q: f64, axis: Box<NormSpec>, cross: Box<NormSpec> },
    /// `t·|z|`.
    ScaledEuclidean { t: f64 },
    /// `z ↦ H(0, z)`: the parent norm with its leading `skip` coordinates zeroed.
    Restricted { parent: Box<NormSpec>, skip: usize },
}

/// An immutable Finsler norm instance.
#[derive(Debug, Clone, PartialEq)]
pub struct NormSpec {
    family: NormFamily,
    dim: usize,
    smoothing_eps: f64,
    smoothing_scale: f64,
    // A^{-T} for MatrixQNorm.
    inverse_transpose: Option<Vec<f64>>,
}

fn check_exponent(name: &str, v: f64) -> Result<()> {
    if !(v >= 1.0 && v.is_finite()) {
        return Err(param(format!("{name} must lie in [1, ∞), got {v}")));
    }
    Ok(())
}

impl NormSpec {
    fn build(family: NormFamily, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(param("dimension must be positive"));
        }
        let mut inverse_transpose = None;
        match &family {
            NormFamily::QNorm { q } => check_exponent("q", *q)?,
            NormFamily::MatrixQNorm { q, matrix } => {
                check_exponent("q", *q)?;
                if matrix.len() != dim * dim {
                    return Err(Error::DimensionMismatch { expected: dim * dim, found: matrix.len() });
                }
                if matrix.iter().any(|a| !a.is_finite()) {
                    return Err(param("matrix entries must be finite"));
                }
                let inv = crate::math::invert(dim, matrix).ok_or_else(|| param("matrix is singular"))?;
                let mut inv_t = vec![0.0; dim * dim];
                for i in 0..dim {
                    for j in 0..dim {
                        inv_t[i * dim + j] = inv[j * dim + i];
                    }
                }
                inverse_transpose = Some(inv_t);
            }
            NormFamily::BlockNorm { q, sizes, exponents, weights } => {
                check_exponent("q", *q)?;
                if sizes.is_empty() || sizes.len() != exponents.len() || sizes.len() != weights.len() {
                    return Err(param("block sizes, exponents and weights must have equal nonzero length"));
                }
                if sizes.iter().any(|&m| m == 0) {
                    return Err(param("block sizes must be positive"));
                }
                let total: usize = sizes.iter().sum();
                if total != dim {
                    return Err(Error::DimensionMismatch { expected: dim, found: total });
                }
                for &p in exponents {
                    check_exponent("block exponent", p)?;
                }
                if weights.iter().any(|&w| !(w > 0.0 && w.is_finite())) {
                    return Err(param("block weights must be positive"));
                }
            }
            NormFamily::SplitNorm { q, axis, cross } => {
                check_exponent("q", *q)?;
                if axis.dim + cross.dim != dim {
                    return Err(Error::DimensionMismatch { expected: dim, found: axis.dim + cross.dim });
                }
            }
            NormFamily::ScaledEuclidean { t } => {
                if !(*t > 0.0 && t.is_finite()) {
                    return Err(param(format!("scale t must be positive, got {t}")));
                }
            }
            NormFamily::Restricted { parent, skip } => {
                if parent.dim != skip + dim {
                    return Err(Error::DimensionMismatch { expected: parent.dim, found: skip + dim });
                }
            }
        }
        Ok(Self { family, dim, smoothing_eps: 0.0, smoothing_scale: 1.0, inverse_transpose })
    }

    pub fn qnorm(q: f64, dim: usize) -> Result<Self> {
        Self::build(NormFamily::QNorm { q }, dim)
    }

    pub fn euclidean(dim: usize) -> Self {
        Self::build(NormFamily::QNorm { q: 2.0 }, dim.max(1)).expect("euclidean norm is valid")
    }

    pub fn matrix_qnorm(q: f64, matrix: Vec<f64>, dim: usize) -> Result<Self> {
        Self::build(NormFamily::MatrixQNorm { q, matrix }, dim)
    }

    pub fn block(q: f64, sizes: Vec<usize>, exponents: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let dim = sizes.iter().sum();
        Self::build(NormFamily::BlockNorm { q, sizes, exponents, weights }, dim)
    }

    /// `(F^q(Z₁) + G^q(Z₂))^{1/q}`. Smoothing of `axis`/`cross` is ignored; the
    /// split norm's own smoothing applies to both parts.
    pub fn split(q: f64, axis: NormSpec, cross: NormSpec) -> Result<Self> {
        let dim = axis.dim + cross.dim;
        Self::build(NormFamily::SplitNorm { q, axis: Box::new(axis.exact()), cross: Box::new(cross.exact()) }, dim)
    }

    pub fn scaled_euclidean(t: f64, dim: usize) -> Result<Self> {
        Self::build(NormFamily::ScaledEuclidean { t }, dim)
    }

    pub fn family(&self) -> &NormFamily {
        &self.family
    }

    pub fn dimension(&self) -> usize {
        self.dim
    }

    pub fn smoothing_eps(&self) -> f64 {
        self.smoothing_eps
    }

    pub fn smoothing_scale(&self) -> f64 {
        self.smoothing_scale
    }

    /// Absolute smoothing length `δ = eps · scale`.
    pub fn smoothing_delta(&self) -> f64 {
        self.smoothing_eps * self.smoothing_scale
    }

    pub fn is_exact(&self) -> bool {
        self.smoothing_eps == 0.0
    }

    /// Copy with relative smoothing `eps` and characteristic gradient scale `scale`.
    pub fn with_smoothing(&self, eps: f64, scale: f64) -> Result<Self> {
        if !(eps >= 0.0 && eps.is_finite()) {
            return Err(param(format!("smoothing_eps must be nonnegative, got {eps}")));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(param(format!("smoothing scale must be positive, got {scale}")));
        }
        let mut out = self.clone();
        out.smoothing_eps = eps;
        out.smoothing_scale = scale;
        Ok(out)
    }

    pub fn exact(&self) -> Self {
        let mut out = self.clone();
        out.smoothing_eps = 0.0;
        out
    }

    /// True when `H^p/p` has a bounded Hessian without smoothing: `p ≥ 2` and every
    /// inner exponent is at least 2.
    pub fn is_smooth_for(&self, p: f64) -> bool {
        p >= 2.0 && self.family_is_c2()
    }

    fn family_is_c2(&self) -> bool {
        match &self.family {
            NormFamily::QNorm { q } | NormFamily::MatrixQNorm { q, .. } => *q >= 2.0,
            NormFamily::BlockNorm { q, exponents, .. } => *q >= 2.0 && exponents.iter().all(|&p| p >= 2.0),
            NormFamily::SplitNorm { q, axis, cross } => *q >= 2.0 && axis.family_is_c2() && cross.family_is_c2(),
            NormFamily::ScaledEuclidean { .. } => true,
            NormFamily::Restricted { parent, .. } => parent.family_is_c2(),
        }
    }

    /// True when some exponent equals 1, so the exact norm has kinks off the origin.
    pub fn has_unit_exponent(&self) -> bool {
        match &self.family {
            NormFamily::QNorm { q } | NormFamily::MatrixQNorm { q, .. } => *q == 1.0,
            NormFamily::BlockNorm { q, exponents, .. } => *q == 1.0 || exponents.iter().any(|&p| p == 1.0),
            NormFamily::SplitNorm { q, axis, cross } => *q == 1.0 || axis.has_unit_exponent() || cross.has_unit_exponent(),
            NormFamily::ScaledEuclidean { .. } => false,
            NormFamily::Restricted { parent, .. } => parent.has_unit_exponent(),
        }
    }

    /// The cross-section norm `Z₂ ↦ H(0, Z₂)` on the trailing `dim - axis_dim` coordinates.
    ///
    /// For a split norm whose axis block has exactly `axis_dim` coordinates this is `G`.
    pub fn cross_section(&self, axis_dim: usize) -> Result<Self> {
        if axis_dim >= self.dim {
            return Err(param(format!("axis dimension {axis_dim} leaves no cross-section in ℝ^{}", self.dim)));
        }
        if axis_dim == 0 {
            return Ok(self.clone());
        }
        let cross_dim = self.dim - axis_dim;
        let mut out = match &self.family {
            NormFamily::QNorm { q } => Self::qnorm(*q, cross_dim)?,
            NormFamily::ScaledEuclidean { t } => Self::scaled_euclidean(*t, cross_dim)?,
            NormFamily::SplitNorm { axis, cross, .. } if axis.dim == axis_dim => (**cross).clone(),
            _ => Self::build(NormFamily::Restricted { parent: Box::new(self.exact()), skip: axis_dim }, cross_dim)?,
        };
        out.smoothing_eps = self.smoothing_eps;
        out.smoothing_scale = self.smoothing_scale;
        Ok(out)
    }

    fn check_dim(&self, len: usize) -> Result<()> {
        if len != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: len });
        }
        Ok(())
    }

    /// `H(z)`, smoothed when `smoothing_eps > 0`.
    pub fn eval(&self, z: &[f64]) -> Result<f64> {
        self.check_dim(z.len())?;
        self.value_grad(z, self.smoothing_delta(), None)
    }

    /// `∇H(z)`.
    pub fn grad(&self, z: &[f64]) -> Result<Vec<f64>> {
        let mut g = vec![0.0; self.dim];
        self.eval_grad(z, &mut g)?;
        Ok(g)
    }

    /// Writes `∇H(z)` into `grad` and returns `H(z)`.
    pub fn eval_grad(&self, z: &[f64], grad: &mut [f64]) -> Result<f64> {
        self.check_dim(z.len())?;
        self.check_dim(grad.len())?;
        self.value_grad(z, self.smoothing_delta(), Some(grad))
    }

    /// The p-flux `H^{p-1}(z)∇H(z)`, extended by 0 at `z = 0`.
    pub fn flux(&self, p: f64, z: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim];
        self.flux_into(p, z, &mut out)?;
        Ok(out)
    }

    /// Writes the p-flux into `out` and returns `H(z)`.
    pub fn flux_into(&self, p: f64, z: &[f64], out: &mut [f64]) -> Result<f64> {
        if !(p > 1.0 && p.is_finite()) {
            return Err(param(format!("p must exceed 1, got {p}")));
        }
        self.check_dim(z.len())?;
        self.check_dim(out.len())?;
        if z.iter().all(|&x| x == 0.0) {
            out.fill(0.0);
            return Ok(0.0);
        }
        let h = self.value_grad(z, self.smoothing_delta(), Some(out))?;
        let scale = pow(h.max(0.0), p - 1.0);
        for g in out.iter_mut() {
            *g *= scale;
        }
        Ok(h)
    }

    pub(crate) fn value_grad(&self, z: &[f64], delta: f64, grad: Option<&mut [f64]>) -> Result<f64> {
        // The smoothed norm is even and C¹, so the origin is an exact critical point.
        if delta > 0.0 && z.iter().all(|&x| x == 0.0) {
            if let Some(g) = grad {
                g.fill(0.0);
            }
            return Ok(0.0);
        }
        match &self.family {
            NormFamily::QNorm { q } => qnorm_core(z, *q, delta, grad),
            NormFamily::MatrixQNorm { q, matrix } => {
                let n = self.dim;
                let y: Scratch = (0..n).map(|i| crate::math::dot(&matrix[i * n..(i + 1) * n], z)).collect();
                match grad {
                    None => qnorm_core(&y, *q, delta, None),
                    Some(g) => {
                        let mut gy: Scratch = SmallVec::from_elem(0.0, n);
                        let v = qnorm_core(&y, *q, delta, Some(&mut gy))?;
                        for (j, gj) in g.iter_mut().enumerate() {
                            *gj = (0..n).map(|i| matrix[i * n + j] * gy[i]).sum();
                        }
                        Ok(v)
                    }
                }
            }
            NormFamily::BlockNorm { q, sizes, exponents, weights } => {
                block_core(z, *q, sizes, exponents, weights, delta, grad)
            }
            NormFamily::SplitNorm { q, axis, cross } => split_core(z, *q, axis, cross, delta, grad),
            NormFamily::ScaledEuclidean { t } => {
                let r2: f64 = z.iter().map(|x| x * x).sum();
                let r = sqrt(r2 + delta * delta);
                if let Some(g) = grad {
                    if r == 0.0 {
                        return Err(Error::SingularPoint);
                    }
                    for (gi, zi) in g.iter_mut().zip(z) {
                        *gi = t * zi / r;
                    }
                }
                Ok(t * (r - delta))
            }
            NormFamily::Restricted { parent, skip } => {
                let mut full: Scratch = SmallVec::from_elem(0.0, parent.dim);
                full[*skip..].copy_from_slice(z);
                match grad {
                    None => parent.value_grad(&full, delta, None),
                    Some(g) => {
                        let mut gf: Scratch = SmallVec::from_elem(0.0, parent.dim);
                        let v = parent.value_grad(&full, delta, Some(&mut gf))?;
                        g.copy_from_slice(&gf[*skip..]);
                        Ok(v)
                    }
                }
            }
        }
    }
}

#[inline]
fn smoothed_abs(x: f64, delta: f64) -> f64 {
    if delta > 0.0 {
        sqrt(x * x + delta * delta)
    } else {
        abs(x)
    }
}

// d|x|_δ/dx; None on the kink of the exact absolute value.
#[inline]
fn smoothed_abs_slope(x: f64, a: f64, delta: f64) -> Option<f64> {
    if delta > 0.0 {
        Some(x / a)
    } else if x == 0.0 {
        None
    } else {
        Some(signum(x))
    }
}

fn lq_sum(values: impl Iterator<Item = f64>, q: f64) -> f64 {
    if q == 2.0 {
        sqrt(values.map(|a| a * a).sum())
    } else {
        pow(values.map(|a| pow(a, q)).sum(), 1.0 / q)
    }
}

fn qnorm_core(z: &[f64], q: f64, delta: f64, grad: Option<&mut [f64]>) -> Result<f64> {
    let r = lq_sum(z.iter().map(|&x| smoothed_abs(x, delta)), q);
    let offset = if delta > 0.0 { pow(z.len() as f64, 1.0 / q) * delta } else { 0.0 };
    if let Some(g) = grad {
        if r == 0.0 {
            return Err(Error::SingularPoint);
        }
        for (gi, &x) in g.iter_mut().zip(z) {
            let a = smoothed_abs(x, delta);
            *gi = match smoothed_abs_slope(x, a, delta) {
                Some(s) => pow(a / r, q - 1.0) * s,
                None if q > 1.0 => 0.0,
                None => return Err(Error::SingularPoint),
            };
        }
    }
    Ok((r - offset).max(0.0))
}

fn block_core(
    z: &[f64],
    q: f64,
    sizes: &[usize],
    exponents: &[f64],
    weights: &[f64],
    delta: f64,
    mut grad: Option<&mut [f64]>,
) -> Result<f64> {
    let mut block_norms: Scratch = SmallVec::with_capacity(sizes.len());
    let mut start = 0;
    for (&m, &pe) in sizes.iter().zip(exponents) {
        block_norms.push(lq_sum(z[start..start + m].iter().map(|&x| smoothed_abs(x, delta)), pe));
        start += m;
    }
    let total: f64 = block_norms.iter().zip(weights).map(|(&b, &w)| w * pow(b, q)).sum();
    let r = pow(total, 1.0 / q);
    let offset = if delta > 0.0 {
        let s: f64 = sizes
            .iter()
            .zip(exponents)
            .zip(weights)
            .map(|((&m, &pe), &w)| w * pow(m as f64, q / pe))
            .sum();
        delta * pow(s, 1.0 / q)
    } else {
        0.0
    };
    if let Some(g) = grad.as_deref_mut() {
        if r == 0.0 {
            return Err(Error::SingularPoint);
        }
        let mut start = 0;
        for (i, (&m, &pe)) in sizes.iter().zip(exponents).enumerate() {
            let b = block_norms[i];
            let outer = if b == 0.0 {
                if q > 1.0 {
                    0.0
                } else {
                    return Err(Error::SingularPoint);
                }
            } else {
                weights[i] * pow(b / r, q - 1.0)
            };
            for j in start..start + m {
                let a = smoothed_abs(z[j], delta);
                g[j] = if outer == 0.0 {
                    0.0
                } else {
                    match smoothed_abs_slope(z[j], a, delta) {
                        Some(s) => outer * pow(a / b, pe - 1.0) * s,
                        None if pe > 1.0 => 0.0,
                        None => return Err(Error::SingularPoint),
                    }
                };
            }
            start += m;
        }
    }
    Ok((r - offset).max(0.0))
}

fn split_core(
    z: &[f64],
    q: f64,
    axis: &NormSpec,
    cross: &NormSpec,
    delta: f64,
    grad: Option<&mut [f64]>,
) -> Result<f64> {
    let (z1, z2) = z.split_at(axis.dim);
    match grad {
        None => {
            let f = axis.value_grad(z1, delta, None)?;
            let g = cross.value_grad(z2, delta, None)?;
            Ok(lq_sum([f, g].into_iter(), q))
        }
        Some(out) => {
            let (g1, g2) = out.split_at_mut(axis.dim);
            let f = part_value_grad(axis, z1, delta, q, g1)?;
            let g = part_value_grad(cross, z2, delta, q, g2)?;
            let r = lq_sum([f, g].into_iter(), q);
            if r == 0.0 {
                if delta > 0.0 {
                    // The smoothed parts vanish quadratically at the origin.
                    out.fill(0.0);
                    return Ok(0.0);
                }
                return Err(Error::SingularPoint);
            }
            let wf = if f == 0.0 { 0.0 } else { pow(f / r, q - 1.0) };
            let wg = if g == 0.0 { 0.0 } else { pow(g / r, q - 1.0) };
            g1.iter_mut().for_each(|x| *x *= wf);
            g2.iter_mut().for_each(|x| *x *= wg);
            Ok(r)
        }
    }
}

// A part of a split norm that vanishes carries no gradient when q > 1.
fn part_value_grad(part: &NormSpec, z: &[f64], delta: f64, q: f64, g: &mut [f64]) -> Result<f64> {
    match part.value_grad(z, delta, Some(g)) {
        Ok(v) => Ok(v),
        Err(Error::SingularPoint) => {
            let v = part.value_grad(z, delta, None)?;
            if v == 0.0 && q > 1.0 {
                g.fill(0.0);
                Ok(0.0)
            } else {
                Err(Error::SingularPoint)
            }
        }
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests;
