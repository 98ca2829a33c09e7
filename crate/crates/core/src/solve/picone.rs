//! Per-simplex evaluation of the Picone pair
//!
//! ```text
//! R(u,v) = H^p(∇u) − ⟨H^{p−1}(∇v)∇H(∇v), ∇(u^p/v^{p−1})⟩
//! L(u,v) = H^p(∇u) + (p−1)H^p((u/v)∇v) − p⟨H^{p−1}((u/v)∇v)∇H(∇v), ∇u⟩
//! ```
//!
//! with the piecewise-linear gradients of `u`, `v` and their simplex averages.

use alloc::format;

use crate::discrete::Field;
use crate::error::{input, Error, Result};
use crate::math::{abs, dot, pow};
use crate::mesh::Mesh;
use crate::norms::NormSpec;

/// Smallest admissible value of `v` at interior nodes.
pub const V_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PiconeReport {
    pub max_abs_r_minus_l: f64,
    pub min_l: f64,
    /// Simplices skipped because `∇H(∇v)` is undefined there.
    pub skipped: usize,
}

pub fn picone_check(mesh: &Mesh, norm: &NormSpec, p: f64, u: &Field, v: &Field) -> Result<PiconeReport> {
    super::check_problem(mesh, norm, p)?;
    u.check(mesh)?;
    v.check(mesh)?;
    for i in 0..mesh.num_nodes() {
        if u.values[i] < 0.0 {
            return Err(input(format!("u must be nonnegative, node {i} has {}", u.values[i])));
        }
        if !mesh.is_dirichlet(i) && !(v.values[i] >= V_FLOOR) {
            return Err(input(format!("v must be at least {V_FLOOR} at interior nodes, node {i} has {}", v.values[i])));
        }
    }
    let h = norm.exact();
    let d = mesh.dim();
    let mut report = PiconeReport { max_abs_r_minus_l: 0.0, min_l: f64::INFINITY, skipped: 0 };
    let mut gu = [0.0f64; 8];
    let mut gv = [0.0f64; 8];
    let mut a = [0.0f64; 8];
    let mut dh = [0.0f64; 8];
    let (gu, gv, a, dh) = (&mut gu[..d], &mut gv[..d], &mut a[..d], &mut dh[..d]);
    for t in 0..mesh.num_simplices() {
        let verts = mesh.simplex(t);
        let ub = verts.iter().map(|&k| u.values[k]).sum::<f64>() / (d + 1) as f64;
        let vb = verts.iter().map(|&k| v.values[k]).sum::<f64>() / (d + 1) as f64;
        if vb <= 0.0 {
            report.skipped += 1;
            continue;
        }
        mesh.gradient_on(t, &u.values, gu);
        mesh.gradient_on(t, &v.values, gv);
        let ratio = ub / vb;

        let hu = h.eval(gu)?;
        let hv = match h.flux_into(p, gv, a) {
            Ok(hv) => hv,
            Err(Error::SingularPoint) => {
                report.skipped += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        let hp_u = pow(hu, p);

        // ∇(u^p/v^{p−1}) = p r^{p−1}∇u − (p−1) r^p ∇v.
        let c1 = p * pow(ratio, p - 1.0);
        let c2 = (p - 1.0) * pow(ratio, p);
        let r = hp_u - (c1 * dot(a, gu) - c2 * dot(a, gv));

        let l = if hv == 0.0 {
            hp_u
        } else {
            match h.eval_grad(gv, dh) {
                Ok(_) => {
                    let scaled: alloc::vec::Vec<f64> = gv.iter().map(|x| ratio * x).collect();
                    let hs = h.eval(&scaled)?;
                    hp_u + (p - 1.0) * pow(hs, p) - p * pow(hs, p - 1.0) * dot(dh, gu)
                }
                Err(Error::SingularPoint) => {
                    report.skipped += 1;
                    continue;
                }
                Err(e) => return Err(e),
            }
        };
        report.max_abs_r_minus_l = report.max_abs_r_minus_l.max(abs(r - l));
        report.min_l = report.min_l.min(l);
    }
    if report.min_l == f64::INFINITY {
        report.min_l = 0.0;
    }
    Ok(report)
}
