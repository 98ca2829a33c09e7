//! Equivalence constants and sampled checks of the norm identities.
//!
//! Monotonicity constants are empirical extremes over a seeded sample set. They
//! bound the true constants from one side only and never certify the assumptions.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::dual::sphere_extremum;
use super::{NormFamily, NormSpec};
use crate::error::{param, Error, Result};
use crate::math::{abs, dot, norm2, pow, sqrt};

/// `θ₁|z| ≤ H(z) ≤ θ₂|z|` and `|∇H| ≤ c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaBounds {
    pub theta1: f64,
    pub theta2: f64,
    /// `(Σᵢ H(eᵢ)²)^{1/2}`.
    pub grad_bound_c: f64,
}

/// Maximum observed violation of each norm identity over a sample set.
///
/// All entries are relative to the natural scale of the identity.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AxiomReport {
    pub samples: usize,
    pub homogeneity: f64,
    pub subadditivity: f64,
    pub euler: f64,
    pub holder: f64,
    pub dual_of_gradient: f64,
    /// Samples that hit a non-differentiable point and were left out of the
    /// gradient-based checks.
    pub skipped: usize,
}

impl AxiomReport {
    pub fn max_violation(&self) -> f64 {
        [self.homogeneity, self.subadditivity, self.euler, self.holder, self.dual_of_gradient]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

impl fmt::Display for AxiomReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "samples          {}", self.samples)?;
        writeln!(f, "homogeneity      {:e}", self.homogeneity)?;
        writeln!(f, "subadditivity    {:e}", self.subadditivity)?;
        writeln!(f, "euler            {:e}", self.euler)?;
        writeln!(f, "holder           {:e}", self.holder)?;
        writeln!(f, "dual_of_gradient {:e}", self.dual_of_gradient)?;
        write!(f, "skipped          {}", self.skipped)
    }
}

/// Which structural assumption a monotonicity estimate targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Assumption {
    /// `⟨a(z₁)−a(z₂), z₁−z₂⟩ ≥ c₁|z₁−z₂|^p`, `p ≥ 2`.
    A1PGe2,
    /// `⟨a(z₁)−a(z₂), z₁−z₂⟩ ≥ c₂|z₁−z₂|²(|z₁|+|z₂|)^{p−2}`, `1 < p < 2`.
    A1PLt2,
    /// `|a(z₁)−a(z₂)| ≤ c₃|z₁−z₂|(|z₁|+|z₂|)^{p−2}`, `1 < p < 2`.
    A2,
    /// A1 (`p ≥ 2`) for both parts `F`, `G` of a split norm.
    A3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonotonicityReport {
    pub assumption: Assumption,
    pub p: f64,
    pub sample_count: usize,
    /// Minimum (A1, A3) or maximum (A2) of the defining ratio over the samples.
    pub empirical_constant: f64,
    pub worst_pair: (Vec<f64>, Vec<f64>),
}

fn gaussian(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

// Direction uniform on the sphere, radius uniform in [r_min, r_max].
fn annulus_point(rng: &mut ChaCha8Rng, n: usize, r_min: f64, r_max: f64) -> Vec<f64> {
    loop {
        let mut v = gaussian(rng, n);
        let r = norm2(&v);
        if r > 1e-12 {
            let radius = rng.random_range(r_min..=r_max);
            v.iter_mut().for_each(|x| *x *= radius / r);
            return v;
        }
    }
}

impl NormSpec {
    /// Equivalence constants with the euclidean norm.
    ///
    /// Closed forms for `q`-norms and scaled euclidean norms; otherwise the extremes of
    /// `H` over `probe_count` unit directions, refined locally.
    pub fn theta_bounds(&self, probe_count: usize) -> Result<ThetaBounds> {
        let n = self.dim;
        if probe_count < 2 * n {
            return Err(param(format!("probe_count must be at least 2·dimension = {}", 2 * n)));
        }
        let exact = self.exact();
        let mut c2 = 0.0;
        let mut e = vec![0.0; n];
        for i in 0..n {
            e[i] = 1.0;
            let h = exact.value_grad(&e, 0.0, None)?;
            c2 += h * h;
            e[i] = 0.0;
        }
        let grad_bound_c = sqrt(c2);
        let (theta1, theta2) = match &self.family {
            NormFamily::QNorm { q } => {
                // ‖x‖_q / ‖x‖_2 ranges between 1 and n^{1/q − 1/2}.
                let corner = pow(n as f64, 1.0 / q - 0.5);
                (corner.min(1.0), corner.max(1.0))
            }
            NormFamily::ScaledEuclidean { t } => (*t, *t),
            _ => {
                let h = |x: &[f64]| exact.value_grad(x, 0.0, None).unwrap_or(f64::NAN);
                let (lo, _) = sphere_extremum(n, probe_count, false, &h);
                let (hi, _) = sphere_extremum(n, probe_count, true, &h);
                (lo, hi)
            }
        };
        Ok(ThetaBounds { theta1, theta2, grad_bound_c })
    }

    /// Sampled check of homogeneity, subadditivity, the Euler identity, the
    /// H-Hölder inequality and `H₀(∇H) = 1`. Exact mode only.
    pub fn check_axioms(&self, sample_count: usize, seed: u64) -> Result<AxiomReport> {
        if !self.is_exact() {
            return Err(param("norm axioms are checked in exact mode only"));
        }
        let n = self.dim;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut report = AxiomReport { samples: sample_count, ..AxiomReport::default() };
        let mut grad = vec![0.0; n];
        for _ in 0..sample_count {
            let z = gaussian(&mut rng, n);
            let y = gaussian(&mut rng, n);
            let xi = gaussian(&mut rng, n);
            let hz = self.eval(&z)?;
            if hz == 0.0 {
                continue;
            }
            for t in [-2.0, -1.0, 0.5, 3.0] {
                let tz: Vec<f64> = z.iter().map(|v| t * v).collect();
                let dev = abs(self.eval(&tz)? - abs(t) * hz) / hz;
                report.homogeneity = report.homogeneity.max(dev);
            }
            let hy = self.eval(&y)?;
            let sum: Vec<f64> = z.iter().zip(&y).map(|(a, b)| a + b).collect();
            let excess = (self.eval(&sum)? - hz - hy).max(0.0) / (hz + hy);
            report.subadditivity = report.subadditivity.max(excess);

            let dual_xi = self.dual_eval(&xi)?;
            if dual_xi > 0.0 {
                let excess = (dot(&xi, &z) - dual_xi * hz).max(0.0) / (dual_xi * hz);
                report.holder = report.holder.max(excess);
            }

            match self.eval_grad(&z, &mut grad) {
                Ok(_) => {
                    let euler = abs(dot(&grad, &z) - hz) / hz;
                    report.euler = report.euler.max(euler);
                    let d = abs(self.dual_eval(&grad)? - 1.0);
                    report.dual_of_gradient = report.dual_of_gradient.max(d);
                }
                Err(Error::SingularPoint) => report.skipped += 1,
                Err(e) => return Err(e),
            }
        }
        Ok(report)
    }

    /// Empirical constant of a monotonicity assumption for the flux
    /// `a(z) = H^{p−1}(z)∇H(z)`, from pairs in the annulus `0.1 ≤ |z| ≤ 10`.
    pub fn estimate_monotonicity(
        &self,
        p: f64,
        assumption: Assumption,
        sample_count: usize,
        seed: u64,
    ) -> Result<MonotonicityReport> {
        let valid = match assumption {
            Assumption::A1PGe2 | Assumption::A3 => p >= 2.0,
            Assumption::A1PLt2 | Assumption::A2 => p > 1.0 && p < 2.0,
        };
        if !valid {
            return Err(param(format!("assumption {assumption:?} does not apply to p = {p}")));
        }
        let parts: Vec<(&NormSpec, usize)> = match (&self.family, assumption) {
            (NormFamily::SplitNorm { axis, cross, .. }, Assumption::A3) => {
                alloc::vec![(axis.as_ref(), 0), (cross.as_ref(), axis.dim)]
            }
            (_, Assumption::A3) => return Err(param("A3 requires a split norm")),
            _ => alloc::vec![(self, 0)],
        };
        let exact = self.exact();
        let maximize = assumption == Assumption::A2;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut best = if maximize { f64::NEG_INFINITY } else { f64::INFINITY };
        let mut worst_pair = (Vec::new(), Vec::new());
        let mut used = 0;
        for _ in 0..sample_count {
            let z1 = annulus_point(&mut rng, self.dim, 0.1, 10.0);
            let z2 = annulus_point(&mut rng, self.dim, 0.1, 10.0);
            let mut pair_ratio = if maximize { f64::NEG_INFINITY } else { f64::INFINITY };
            let mut counted = false;
            for &(part, offset) in &parts {
                let norm = if assumption == Assumption::A3 { part.exact() } else { exact.clone() };
                let d = norm.dim;
                let (w1, w2) = (&z1[offset..offset + d], &z2[offset..offset + d]);
                let diff: Vec<f64> = w1.iter().zip(w2).map(|(a, b)| a - b).collect();
                let dist = norm2(&diff);
                if dist < 1e-8 {
                    continue;
                }
                let (a1, a2) = match (norm.flux(p, w1), norm.flux(p, w2)) {
                    (Ok(a1), Ok(a2)) => (a1, a2),
                    (Err(Error::SingularPoint), _) | (_, Err(Error::SingularPoint)) => continue,
                    (Err(e), _) | (_, Err(e)) => return Err(e),
                };
                let da: Vec<f64> = a1.iter().zip(&a2).map(|(x, y)| x - y).collect();
                let scale = norm2(w1) + norm2(w2);
                let ratio = match assumption {
                    Assumption::A1PGe2 | Assumption::A3 => dot(&da, &diff) / pow(dist, p),
                    Assumption::A1PLt2 => dot(&da, &diff) / (dist * dist * pow(scale, p - 2.0)),
                    Assumption::A2 => norm2(&da) / (dist * pow(scale, p - 2.0)),
                };
                pair_ratio = if maximize { pair_ratio.max(ratio) } else { pair_ratio.min(ratio) };
                counted = true;
            }
            if !counted {
                continue;
            }
            used += 1;
            let improves = if maximize { pair_ratio > best } else { pair_ratio < best };
            if improves {
                best = pair_ratio;
                worst_pair = (z1, z2);
            }
        }
        if used == 0 {
            return Err(param("no admissible sample pairs"));
        }
        Ok(MonotonicityReport { assumption, p, sample_count: used, empirical_constant: best, worst_pair })
    }
}
