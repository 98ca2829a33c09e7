//! Dual norms `H₀(ξ) = sup_{x≠0} ⟨ξ·x⟩ / H(x)` and sphere extremum search.

use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{NormFamily, NormSpec};
use crate::error::Result;
use crate::math::{abs, conjugate, cos, dot, norm2, pow, sin};

/// Sphere samples per dimension for the generic dual.
pub const DUAL_SAMPLES_PER_DIM: usize = 10_000;
/// Golden-section refinement steps after sampling.
pub const REFINE_STEPS: usize = 20;

const GOLDEN: f64 = 0.618_033_988_749_894_8;

fn lq(values: impl Iterator<Item = f64>, e: f64) -> f64 {
    if e.is_infinite() {
        values.fold(0.0, |m, v| m.max(abs(v)))
    } else {
        pow(values.map(|v| pow(abs(v), e)).sum(), 1.0 / e)
    }
}

impl NormSpec {
    /// `H₀(ξ)`. Closed forms for every family except restrictions, which fall back to
    /// [`NormSpec::dual_eval_sampled`].
    pub fn dual_eval(&self, xi: &[f64]) -> Result<f64> {
        self.check_dim(xi.len())?;
        Ok(self.dual_closed(xi).unwrap_or_else(|| self.sampled_dual(xi)))
    }

    fn dual_closed(&self, xi: &[f64]) -> Option<f64> {
        match &self.family {
            NormFamily::QNorm { q } => Some(lq(xi.iter().copied(), conjugate(*q))),
            NormFamily::MatrixQNorm { q, .. } => {
                let n = self.dim;
                let inv_t = self.inverse_transpose.as_ref()?;
                let y = (0..n).map(|i| dot(&inv_t[i * n..(i + 1) * n], xi));
                Some(lq(y, conjugate(*q)))
            }
            NormFamily::ScaledEuclidean { t } => Some(norm2(xi) / t),
            NormFamily::BlockNorm { q, sizes, exponents, weights } => {
                // H = ‖(λᵢ^{1/q} Bᵢ)ᵢ‖_q, so H₀ = ‖(λᵢ^{-1/q} B*ᵢ)ᵢ‖_{q'}.
                let mut start = 0;
                let mut parts = Vec::with_capacity(sizes.len());
                for ((&m, &pe), &w) in sizes.iter().zip(exponents).zip(weights) {
                    let b = lq(xi[start..start + m].iter().copied(), conjugate(pe));
                    parts.push(b * pow(w, -1.0 / q));
                    start += m;
                }
                Some(lq(parts.into_iter(), conjugate(*q)))
            }
            NormFamily::SplitNorm { q, axis, cross } => {
                let (x1, x2) = xi.split_at(axis.dim);
                let f = axis.dual_closed(x1)?;
                let g = cross.dual_closed(x2)?;
                Some(lq([f, g].into_iter(), conjugate(*q)))
            }
            NormFamily::Restricted { .. } => None,
        }
    }

    /// The dual norm as a [`NormSpec`] when it belongs to a supported family
    /// (`q = 1` duals are `∞`-norms and are not representable).
    pub fn dual_spec(&self) -> Option<NormSpec> {
        let spec = match &self.family {
            NormFamily::QNorm { q } if *q > 1.0 => NormSpec::qnorm(conjugate(*q), self.dim).ok()?,
            NormFamily::MatrixQNorm { q, .. } if *q > 1.0 => {
                NormSpec::matrix_qnorm(conjugate(*q), self.inverse_transpose.clone()?, self.dim).ok()?
            }
            NormFamily::ScaledEuclidean { t } => NormSpec::scaled_euclidean(1.0 / t, self.dim).ok()?,
            NormFamily::BlockNorm { q, sizes, exponents, weights }
                if *q > 1.0 && exponents.iter().all(|&p| p > 1.0) =>
            {
                let qd = conjugate(*q);
                NormSpec::block(
                    qd,
                    sizes.clone(),
                    exponents.iter().map(|&p| conjugate(p)).collect(),
                    weights.iter().map(|&w| pow(w, -qd / q)).collect(),
                )
                .ok()?
            }
            NormFamily::SplitNorm { q, axis, cross } if *q > 1.0 => {
                NormSpec::split(conjugate(*q), axis.dual_spec()?, cross.dual_spec()?).ok()?
            }
            _ => return None,
        };
        Some(spec)
    }

    /// Generic dual by sphere sampling (`10⁴·n` directions) followed by
    /// golden-section refinement around the best direction.
    pub fn dual_eval_sampled(&self, xi: &[f64]) -> Result<f64> {
        self.check_dim(xi.len())?;
        Ok(self.sampled_dual(xi))
    }

    fn sampled_dual(&self, xi: &[f64]) -> f64 {
        if xi.iter().all(|&v| v == 0.0) {
            return 0.0;
        }
        let exact = self.exact();
        let objective = |x: &[f64]| {
            let h = exact.value_grad(x, 0.0, None).unwrap_or(f64::INFINITY);
            dot(xi, x) / h
        };
        sphere_extremum(self.dim, DUAL_SAMPLES_PER_DIM * self.dim, true, &objective).0
    }
}

/// Extremum of `f` over the unit sphere of `ℝⁿ`: deterministic sampling (uniform angles
/// in 2D, seeded Gaussian directions otherwise) then golden-section refinement along
/// great circles through the incumbent.
pub(crate) fn sphere_extremum(
    n: usize,
    samples: usize,
    maximize: bool,
    f: &dyn Fn(&[f64]) -> f64,
) -> (f64, Vec<f64>) {
    let better = |a: f64, b: f64| if maximize { a > b } else { a < b };
    let mut best_x = vec![0.0; n];
    best_x[0] = 1.0;
    let mut best = f(&best_x);
    let consider = |x: &[f64], best: &mut f64, best_x: &mut Vec<f64>| {
        let v = f(x);
        if better(v, *best) {
            *best = v;
            best_x.copy_from_slice(x);
        }
    };
    if n == 1 {
        consider(&[-1.0], &mut best, &mut best_x);
        return (best, best_x);
    }
    let samples = samples.max(2 * n);
    let spacing;
    let mut x = vec![0.0; n];
    if n == 2 {
        let step = core::f64::consts::TAU / samples as f64;
        for k in 0..samples {
            let a = k as f64 * step;
            x[0] = cos(a);
            x[1] = sin(a);
            consider(&x, &mut best, &mut best_x);
        }
        spacing = step;
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_d1a1);
        for _ in 0..samples {
            for v in x.iter_mut() {
                *v = StandardNormal.sample(&mut rng);
            }
            let r = norm2(&x);
            if r == 0.0 {
                continue;
            }
            x.iter_mut().for_each(|v| *v /= r);
            consider(&x, &mut best, &mut best_x);
        }
        // Typical angular gap between samples on S^{n-1}.
        spacing = pow(4.0 * core::f64::consts::PI / samples as f64, 1.0 / (n as f64 - 1.0));
    }

    let mut half_width = 2.0 * spacing;
    for _ in 0..REFINE_STEPS {
        for t in tangent_basis(&best_x) {
            let along = |phi: f64| -> Vec<f64> {
                let (c, s) = (cos(phi), sin(phi));
                best_x.iter().zip(&t).map(|(a, b)| c * a + s * b).collect()
            };
            let score = |phi: f64| {
                let v = f(&along(phi));
                if maximize {
                    -v
                } else {
                    v
                }
            };
            let phi = golden_section(score, -half_width, half_width, 40);
            let candidate = along(phi);
            let v = f(&candidate);
            if better(v, best) {
                best = v;
                best_x = candidate;
            }
        }
        if n == 2 {
            break;
        }
        half_width *= 0.5;
    }
    (best, best_x)
}

// Orthonormal basis of the tangent space at unit vector x (Gram-Schmidt on e_i).
fn tangent_basis(x: &[f64]) -> Vec<Vec<f64>> {
    let n = x.len();
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(n - 1);
    for i in 0..n {
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        let c = dot(&v, x);
        v.iter_mut().zip(x).for_each(|(a, b)| *a -= c * b);
        for b in &basis {
            let c = dot(&v, b);
            v.iter_mut().zip(b).for_each(|(a, bb)| *a -= c * bb);
        }
        let r = norm2(&v);
        if r > 1e-8 {
            v.iter_mut().for_each(|a| *a /= r);
            basis.push(v);
        }
        if basis.len() == n - 1 {
            break;
        }
    }
    basis
}

/// Minimizer of a unimodal function on `[lo, hi]` by golden-section search.
pub(crate) fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, steps: usize) -> f64 {
    let mut a = hi - GOLDEN * (hi - lo);
    let mut b = lo + GOLDEN * (hi - lo);
    let mut fa = f(a);
    let mut fb = f(b);
    for _ in 0..steps {
        if fa <= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - GOLDEN * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + GOLDEN * (hi - lo);
            fb = f(b);
        }
    }
    let mid = 0.5 * (lo + hi);
    if f(mid) <= fa.min(fb) {
        mid
    } else if fa <= fb {
        a
    } else {
        b
    }
}
