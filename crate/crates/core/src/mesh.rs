//! Tensor-product Kuhn meshes of `Ω_ℓ = (−ℓ/2, ℓ/2)^m × ω₂` and of the cross-section `ω₂`.
//!
//! Nodes are numbered row-major over the grid with the last coordinate fastest, so
//! node `a·n_cross + c` sits on axis grid point `a` and cross-section node `c`. A
//! cross-section mesh built from the same box and step has bitwise identical
//! coordinates to every axis slice of the cylinder mesh.
//!
//! Each grid cell is split into `d!` simplices sharing the main diagonal. All
//! simplices of one mesh have the same volume; gradients of piecewise-linear fields
//! are constant per simplex.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::ops::Deref;

use crate::error::{input, Result};
use crate::math::{abs, round};
use crate::sum::pairwise_sum_by;

/// A closed interval `[lo, hi]` of one box side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Which boundary nodes carry a zero Dirichlet constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryKind {
    /// All of `∂Ω_ℓ`.
    Full,
    /// Only the strip boundary `ℓω₁ × ∂ω₂`; the axis ends are free.
    StripOnly,
}

/// A simplicial mesh of a box.
#[derive(Debug, Clone)]
pub struct Mesh {
    dim: usize,
    axis_dim: usize,
    ell: f64,
    lower: Vec<f64>,
    upper: Vec<f64>,
    counts: Vec<usize>,
    steps: Vec<f64>,
    n_cross: usize,
    coords: Vec<f64>,
    simplices: Vec<usize>,
    kinds: Vec<u16>,
    // Per kind: barycentric gradients, (d+1) rows of d entries.
    bary: Vec<Vec<f64>>,
    volume: f64,
    dirichlet: Vec<bool>,
    cross_boundary: Vec<bool>,
    inside_half: Vec<bool>,
    lumped: Vec<f64>,
    adj_offsets: Vec<usize>,
    adj: Vec<(u32, u8)>,
    boundary: BoundaryKind,
}

fn permutations(d: usize) -> Vec<Vec<usize>> {
    if d == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for sub in permutations(d - 1) {
        for pos in 0..=sub.len() {
            let mut p = sub.clone();
            p.insert(pos, d - 1);
            out.push(p);
        }
    }
    out.sort();
    out
}

fn is_odd(perm: &[usize]) -> bool {
    let mut inversions = 0;
    for i in 0..perm.len() {
        for j in i + 1..perm.len() {
            if perm[i] > perm[j] {
                inversions += 1;
            }
        }
    }
    inversions % 2 == 1
}

impl Mesh {
    fn build(
        axis_dim: usize,
        ell: f64,
        lower: Vec<f64>,
        upper: Vec<f64>,
        steps_wanted: &[f64],
        boundary: BoundaryKind,
    ) -> Result<Self> {
        let d = lower.len();
        if d == 0 {
            return Err(input("mesh dimension must be positive"));
        }
        let mut counts = Vec::with_capacity(d);
        let mut steps = Vec::with_capacity(d);
        for k in 0..d {
            let edge = upper[k] - lower[k];
            let h = steps_wanted[k];
            if !(edge > 0.0 && edge.is_finite()) {
                return Err(input(format!("box side {k} must have positive length, got [{}, {}]", lower[k], upper[k])));
            }
            if !(h > 0.0 && h.is_finite()) {
                return Err(input(format!("mesh step must be positive, got {h}")));
            }
            let cells = round(edge / h).max(1.0) as usize;
            counts.push(cells + 1);
            steps.push(edge / cells as f64);
        }
        let n_nodes: usize = counts.iter().product();
        let n_cross: usize = counts[axis_dim..].iter().product();

        let mut coords = vec![0.0; n_nodes * d];
        let mut dirichlet = vec![false; n_nodes];
        let mut cross_boundary = vec![false; n_nodes];
        let mut idx = vec![0usize; d];
        for node in 0..n_nodes {
            let mut rem = node;
            for k in (0..d).rev() {
                idx[k] = rem % counts[k];
                rem /= counts[k];
            }
            for k in 0..d {
                let n = (counts[k] - 1) as f64;
                coords[node * d + k] = lower[k] + idx[k] as f64 * (upper[k] - lower[k]) / n;
            }
            let on_face = |k: usize| idx[k] == 0 || idx[k] + 1 == counts[k];
            cross_boundary[node] = (axis_dim..d).any(on_face);
            dirichlet[node] = match boundary {
                BoundaryKind::Full => (0..d).any(on_face),
                BoundaryKind::StripOnly => cross_boundary[node],
            };
        }

        // Reference simplices: vertex k+1 = vertex k + e_{perm[k]}; odd permutations
        // swap their last two vertices so every stored simplex is positively oriented.
        let perms = permutations(d);
        let mut local_offsets: Vec<Vec<Vec<usize>>> = Vec::with_capacity(perms.len());
        let mut bary = Vec::with_capacity(perms.len());
        for perm in &perms {
            let mut verts = vec![vec![0usize; d]];
            for &axis in perm {
                let mut v = verts.last().unwrap().clone();
                v[axis] = 1;
                verts.push(v);
            }
            if is_odd(perm) {
                verts.swap(d - 1, d);
            }
            // Edge matrix E (rows vᵢ − v₀ in physical units); barycentric gradients of
            // vertices 1..d are the columns of E^{-1}, vertex 0 gets minus their sum.
            let mut e = vec![0.0; d * d];
            for i in 0..d {
                for k in 0..d {
                    e[i * d + k] = (verts[i + 1][k] as f64 - verts[0][k] as f64) * steps[k];
                }
            }
            let inv = crate::math::invert(d, &e).ok_or_else(|| input("degenerate reference simplex"))?;
            let mut g = vec![0.0; (d + 1) * d];
            for i in 0..d {
                for k in 0..d {
                    g[(i + 1) * d + k] = inv[k * d + i];
                    g[k] -= inv[k * d + i];
                }
            }
            bary.push(g);
            local_offsets.push(verts);
        }

        let cell_counts: Vec<usize> = counts.iter().map(|c| c - 1).collect();
        let n_cells: usize = cell_counts.iter().product();
        let n_simplices = n_cells * perms.len();
        let mut simplices = Vec::with_capacity(n_simplices * (d + 1));
        let mut kinds = Vec::with_capacity(n_simplices);
        let mut inside_half = Vec::with_capacity(n_simplices);
        let mut strides = vec![1usize; d];
        for k in (0..d.saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * counts[k + 1];
        }
        let quarter = ell / 4.0;
        let slack = 1e-12 * ell.max(1.0);
        let mut cell = vec![0usize; d];
        for c in 0..n_cells {
            let mut rem = c;
            for k in (0..d).rev() {
                cell[k] = rem % cell_counts[k];
                rem /= cell_counts[k];
            }
            for (kind, verts) in local_offsets.iter().enumerate() {
                let mut inside = true;
                for v in verts {
                    let node: usize = (0..d).map(|k| (cell[k] + v[k]) * strides[k]).sum();
                    simplices.push(node);
                    for k in 0..axis_dim {
                        if abs(coords[node * d + k]) > quarter + slack {
                            inside = false;
                        }
                    }
                }
                kinds.push(kind as u16);
                inside_half.push(inside);
            }
        }

        let mut factorial = 1.0;
        for k in 2..=d {
            factorial *= k as f64;
        }
        let volume = steps.iter().product::<f64>() / factorial;

        let mut degree = vec![0usize; n_nodes];
        for &v in &simplices {
            degree[v] += 1;
        }
        let mut adj_offsets = vec![0usize; n_nodes + 1];
        for i in 0..n_nodes {
            adj_offsets[i + 1] = adj_offsets[i] + degree[i];
        }
        let mut fill = adj_offsets.clone();
        let mut adj = vec![(0u32, 0u8); simplices.len()];
        for t in 0..n_simplices {
            for loc in 0..=d {
                let v = simplices[t * (d + 1) + loc];
                adj[fill[v]] = (t as u32, loc as u8);
                fill[v] += 1;
            }
        }
        let share = volume / (d + 1) as f64;
        let lumped = degree.iter().map(|&k| k as f64 * share).collect();

        Ok(Self {
            dim: d,
            axis_dim,
            ell,
            lower,
            upper,
            counts,
            steps,
            n_cross,
            coords,
            simplices,
            kinds,
            bary,
            volume,
            dirichlet,
            cross_boundary,
            inside_half,
            lumped,
            adj_offsets,
            adj,
            boundary,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of axis coordinates `m` (0 for a cross-section mesh).
    pub fn axis_dim(&self) -> usize {
        self.axis_dim
    }

    pub fn cross_dim(&self) -> usize {
        self.dim - self.axis_dim
    }

    /// Cylinder length `ℓ` (0 for a cross-section mesh).
    pub fn ell(&self) -> f64 {
        self.ell
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// Grid nodes per coordinate.
    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    /// Actual mesh steps per coordinate.
    pub fn steps(&self) -> &[f64] {
        &self.steps
    }

    pub fn boundary(&self) -> BoundaryKind {
        self.boundary
    }

    pub fn num_nodes(&self) -> usize {
        self.dirichlet.len()
    }

    pub fn num_simplices(&self) -> usize {
        self.kinds.len()
    }

    /// Nodes in one cross-section slice.
    pub fn num_cross_nodes(&self) -> usize {
        self.n_cross
    }

    /// Grid points along the axis block (1 for a cross-section mesh).
    pub fn num_axis_nodes(&self) -> usize {
        self.num_nodes() / self.n_cross
    }

    pub fn coords(&self, node: usize) -> &[f64] {
        &self.coords[node * self.dim..(node + 1) * self.dim]
    }

    pub fn simplex(&self, t: usize) -> &[usize] {
        &self.simplices[t * (self.dim + 1)..(t + 1) * (self.dim + 1)]
    }

    /// Gradient of the hat function of local vertex `local` on simplex `t`.
    pub fn hat_gradient(&self, t: usize, local: usize) -> &[f64] {
        let g = &self.bary[self.kinds[t] as usize];
        &g[local * self.dim..(local + 1) * self.dim]
    }

    /// Volume of every simplex.
    pub fn simplex_volume(&self) -> f64 {
        self.volume
    }

    /// Signed volume of simplex `t` from its vertex coordinates.
    pub fn signed_volume(&self, t: usize) -> f64 {
        let d = self.dim;
        let s = self.simplex(t);
        let x0 = self.coords(s[0]);
        let mut e = vec![0.0; d * d];
        for i in 0..d {
            let xi = self.coords(s[i + 1]);
            for k in 0..d {
                e[i * d + k] = xi[k] - x0[k];
            }
        }
        let mut factorial = 1.0;
        for k in 2..=d {
            factorial *= k as f64;
        }
        crate::math::determinant(d, &e) / factorial
    }

    pub fn is_dirichlet(&self, node: usize) -> bool {
        self.dirichlet[node]
    }

    pub fn dirichlet_flags(&self) -> &[bool] {
        &self.dirichlet
    }

    /// True on nodes of the strip boundary `ℓω₁ × ∂ω₂`.
    pub fn on_cross_boundary(&self, node: usize) -> bool {
        self.cross_boundary[node]
    }

    /// True when the closure of simplex `t` lies in `(ℓ/2)ω₁ × ω₂`.
    pub fn inside_half_cylinder(&self, t: usize) -> bool {
        self.inside_half[t]
    }

    /// Lumped mass of each node: `Σ_{T∋i} |T|/(d+1)`.
    pub fn lumped_mass(&self) -> &[f64] {
        &self.lumped
    }

    /// Simplices containing `node`, with the node's local index in each.
    pub fn incident(&self, node: usize) -> &[(u32, u8)] {
        &self.adj[self.adj_offsets[node]..self.adj_offsets[node + 1]]
    }

    pub fn total_volume(&self) -> f64 {
        pairwise_sum_by(self.num_simplices(), &|_| self.volume)
    }

    pub fn half_cylinder_volume(&self) -> f64 {
        pairwise_sum_by(self.num_simplices(), &|t| if self.inside_half[t] { self.volume } else { 0.0 })
    }

    /// Number of simplices inside the half cylinder.
    pub fn half_cylinder_count(&self) -> usize {
        self.inside_half.iter().filter(|&&b| b).count()
    }

    /// Writes the gradient of the piecewise-linear field `values` on simplex `t`.
    #[inline]
    pub fn gradient_on(&self, t: usize, values: &[f64], out: &mut [f64]) {
        let d = self.dim;
        let g = &self.bary[self.kinds[t] as usize];
        out.fill(0.0);
        for (loc, &v) in self.simplex(t).iter().enumerate() {
            let u = values[v];
            for k in 0..d {
                out[k] += u * g[loc * d + k];
            }
        }
    }
}

impl fmt::Display for Mesh {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "dimension        {} (axis {}, cross {})", self.dim, self.axis_dim, self.cross_dim())?;
        if self.axis_dim > 0 {
            writeln!(f, "length           {}", self.ell)?;
        }
        write!(f, "box             ")?;
        for k in 0..self.dim {
            write!(f, " [{}, {}]", self.lower[k], self.upper[k])?;
        }
        writeln!(f)?;
        write!(f, "steps           ")?;
        for h in &self.steps {
            write!(f, " {h}")?;
        }
        writeln!(f)?;
        writeln!(f, "nodes            {}", self.num_nodes())?;
        writeln!(f, "simplices        {}", self.num_simplices())?;
        writeln!(f, "dirichlet nodes  {}", self.dirichlet.iter().filter(|&&b| b).count())?;
        writeln!(f, "volume           {}", self.total_volume())?;
        write!(f, "half volume      {}", self.half_cylinder_volume())
    }
}

/// Mesh of `Ω_ℓ = (−ℓ/2, ℓ/2)^m × ω₂`.
#[derive(Debug, Clone)]
pub struct CylinderMesh(Mesh);

impl CylinderMesh {
    /// Mesh of the cylinder with zero data on all of `∂Ω_ℓ`.
    pub fn build(ell: f64, m: usize, cross_box: &[Interval], h_axis: f64, h_cross: f64) -> Result<Self> {
        Self::build_with(ell, m, cross_box, h_axis, h_cross, BoundaryKind::Full)
    }

    pub fn build_with(
        ell: f64,
        m: usize,
        cross_box: &[Interval],
        h_axis: f64,
        h_cross: f64,
        boundary: BoundaryKind,
    ) -> Result<Self> {
        if !(ell > 0.0 && ell.is_finite()) {
            return Err(input(format!("cylinder length must be positive, got {ell}")));
        }
        if m == 0 {
            return Err(input("axis dimension must be at least 1"));
        }
        if cross_box.is_empty() {
            return Err(input("cross-section box must have at least one side"));
        }
        let mut lower = vec![-ell / 2.0; m];
        let mut upper = vec![ell / 2.0; m];
        let mut steps = vec![h_axis; m];
        for iv in cross_box {
            lower.push(iv.lo);
            upper.push(iv.hi);
            steps.push(h_cross);
        }
        Mesh::build(m, ell, lower, upper, &steps, boundary).map(Self)
    }

    /// Recomputes the half-cylinder flags; they are set at construction, so this is
    /// only needed after cloning a mesh whose flags were altered.
    pub fn tag_half_cylinder(&mut self) {
        let m = &mut self.0;
        let d = m.dim;
        let quarter = m.ell / 4.0;
        let slack = 1e-12 * m.ell.max(1.0);
        for t in 0..m.kinds.len() {
            let verts = &m.simplices[t * (d + 1)..(t + 1) * (d + 1)];
            m.inside_half[t] =
                verts.iter().all(|&v| (0..m.axis_dim).all(|k| abs(m.coords[v * d + k]) <= quarter + slack));
        }
    }

    pub fn mesh(&self) -> &Mesh {
        &self.0
    }
}

impl Deref for CylinderMesh {
    type Target = Mesh;

    fn deref(&self) -> &Mesh {
        &self.0
    }
}

/// Mesh of the cross-section `ω₂`.
#[derive(Debug, Clone)]
pub struct CrossSectionMesh(Mesh);

impl CrossSectionMesh {
    pub fn build(cross_box: &[Interval], h_cross: f64) -> Result<Self> {
        if cross_box.is_empty() {
            return Err(input("cross-section box must have at least one side"));
        }
        let lower = cross_box.iter().map(|iv| iv.lo).collect();
        let upper = cross_box.iter().map(|iv| iv.hi).collect();
        let steps = vec![h_cross; cross_box.len()];
        Mesh::build(0, 0.0, lower, upper, &steps, BoundaryKind::Full).map(Self)
    }

    pub fn mesh(&self) -> &Mesh {
        &self.0
    }
}

impl Deref for CrossSectionMesh {
    type Target = Mesh;

    fn deref(&self) -> &Mesh {
        &self.0
    }
}
