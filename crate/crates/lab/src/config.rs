//! Run configuration in a small `key = value` format with four sections:
//!
//! ```text
//! [problem]
//! norm = split(3; qnorm(3); qnorm(3))
//! p = 3
//! f = 1                      # or samples(v0, v1, ...) on the cross-section nodes
//! cross = (0,1)              # boxes: (0,1) x (0,2)
//! m = 1
//! ell = 4
//!
//! [mesh]
//! h = 0.0625                 # shorthand for h_axis and h_cross
//!
//! [solver]
//! tol_grad = 1e-10
//! eps_schedule = auto        # or a decreasing list
//!
//! [ladder]
//! kind = solution_rate
//! ell_list = 4, 6, 8, 10
//! ```
//!
//! Keys are unique across sections, so a key may also appear before the first
//! header or in a `--set key=value` override. `#` starts a comment.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use finsler_core::discrete::Field;
use finsler_core::norms::NormDescriptor;
use finsler_core::{CrossSectionMesh, CylinderMesh, Interval, NormSpec, SolveOptions};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Load {
    Constant(f64),
    /// One value per cross-section node, in mesh order.
    Samples(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    SolutionRate,
    EnergyRate,
    EigenRate,
    GradientBound,
    Poincare,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 5] = [
        ExperimentKind::SolutionRate,
        ExperimentKind::EnergyRate,
        ExperimentKind::EigenRate,
        ExperimentKind::GradientBound,
        ExperimentKind::Poincare,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::SolutionRate => "solution_rate",
            ExperimentKind::EnergyRate => "energy_rate",
            ExperimentKind::EigenRate => "eigen_rate",
            ExperimentKind::GradientBound => "gradient_bound",
            ExperimentKind::Poincare => "poincare",
        }
    }
}

impl FromStr for ExperimentKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Self::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| {
            let names: Vec<_> = Self::ALL.iter().map(|k| k.name()).collect();
            format!("unknown experiment kind `{s}`, expected one of {}", names.join(", "))
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub norm: NormDescriptor,
    pub p: f64,
    pub f: Load,
    pub cross: Vec<Interval>,
    /// Number of axis coordinates.
    pub m: usize,
    /// Cylinder length for single solves.
    pub ell: f64,
    pub h_axis: f64,
    pub h_cross: f64,
    pub tol_grad: f64,
    pub tol_energy: f64,
    pub max_iters: usize,
    /// Empty selects the automatic continuation schedule.
    pub eps_schedule: Vec<f64>,
    pub seed: u64,
    pub kind: ExperimentKind,
    pub ell_list: Vec<f64>,
    /// Starting seeds for the multi-start eigenvalue runs.
    pub seeds: Vec<u64>,
    /// Allowed negative slack in the energy and eigenvalue gaps.
    pub mesh_tolerance: f64,
}

impl Default for Config {
    fn default() -> Self {
        let solver = SolveOptions::default();
        Config {
            norm: NormDescriptor::QNorm(2.0),
            p: 2.0,
            f: Load::Constant(1.0),
            cross: vec![Interval::new(0.0, 1.0)],
            m: 1,
            ell: 4.0,
            h_axis: 0.0625,
            h_cross: 0.0625,
            tol_grad: solver.tol_grad,
            tol_energy: solver.tol_energy,
            max_iters: solver.max_iters,
            eps_schedule: Vec::new(),
            seed: solver.seed,
            kind: ExperimentKind::SolutionRate,
            ell_list: vec![4.0, 6.0, 8.0, 10.0],
            seeds: vec![0, 1, 2],
            mesh_tolerance: 1e-6,
        }
    }
}

const SECTIONS: [(&str, &[&str]); 4] = [
    ("problem", &["norm", "p", "f", "cross", "m", "ell"]),
    ("mesh", &["h", "h_axis", "h_cross"]),
    ("solver", &["tol_grad", "tol_energy", "max_iters", "eps_schedule", "seed"]),
    ("ladder", &["kind", "ell_list", "seeds", "mesh_tolerance"]),
];

fn section_of(key: &str) -> Option<&'static str> {
    SECTIONS.iter().find(|(_, keys)| keys.contains(&key)).map(|(s, _)| *s)
}

fn canonical_key(key: &str) -> &str {
    match key {
        "ℓ_list" => "ell_list",
        "ℓ" => "ell",
        k => k,
    }
}

fn number(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.trim().parse().map_err(|_| format!("`{}` is not a number", s.trim()))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("`{}` is not finite", s.trim()))
    }
}

fn integer<T: FromStr>(s: &str) -> std::result::Result<T, String> {
    s.trim().parse().map_err(|_| format!("`{}` is not a nonnegative integer", s.trim()))
}

fn list<T>(s: &str, item: impl Fn(&str) -> std::result::Result<T, String>) -> std::result::Result<Vec<T>, String> {
    s.split(',').filter(|t| !t.trim().is_empty()).map(item).collect()
}

fn parse_load(s: &str) -> std::result::Result<Load, String> {
    let s = s.trim();
    if let Some(rest) = s.strip_prefix("samples(") {
        let inner = rest.strip_suffix(')').ok_or("missing `)` after samples(")?;
        let values = list(inner, number)?;
        if values.is_empty() {
            return Err("samples() needs at least one value".into());
        }
        Ok(Load::Samples(values))
    } else {
        number(s).map(Load::Constant)
    }
}

fn parse_box(s: &str) -> std::result::Result<Vec<Interval>, String> {
    let mut out = Vec::new();
    for side in s.split(['x', '×']) {
        let side = side.trim();
        let inner = side
            .strip_prefix('(')
            .and_then(|t| t.strip_suffix(')'))
            .ok_or_else(|| format!("interval `{side}` must look like (lo,hi)"))?;
        let ends = list(inner, number)?;
        match ends[..] {
            [lo, hi] if lo < hi => out.push(Interval::new(lo, hi)),
            [_, _] => return Err(format!("interval `{side}` is empty")),
            _ => return Err(format!("interval `{side}` needs two endpoints")),
        }
    }
    Ok(out)
}

fn fmt_num(v: f64) -> String {
    format!("{v:?}")
}

fn fmt_list<T>(items: &[T], f: impl Fn(&T) -> String) -> String {
    items.iter().map(f).collect::<Vec<_>>().join(", ")
}

impl Config {
    /// Parses and validates a complete config, filling defaults.
    pub fn parse(text: &str) -> Result<Config> {
        let mut cfg = Config::default();
        let mut lines: HashMap<&'static str, usize> = HashMap::new();
        let mut section: Option<String> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() || line.starts_with(';') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name.strip_suffix(']').ok_or_else(|| Error::parse(line_no, line, "section header needs a closing `]`"))?.trim();
                if !SECTIONS.iter().any(|(s, _)| *s == name) {
                    return Err(Error::parse(line_no, name, "unknown section"));
                }
                section = Some(name.to_string());
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::parse(line_no, line, "expected `key = value`"))?;
            let key = canonical_key(key.trim());
            let home = section_of(key).ok_or_else(|| Error::parse(line_no, key, "unknown key"))?;
            if let Some(current) = &section {
                if current != home {
                    return Err(Error::parse(line_no, key, format!("belongs to [{home}], found in [{current}]")));
                }
            }
            let stored = SECTIONS.iter().flat_map(|(_, k)| k.iter()).find(|k| **k == key).copied().unwrap_or("");
            if lines.insert(stored, line_no).is_some() {
                return Err(Error::parse(line_no, key, "duplicate key"));
            }
            cfg.apply(key, value.trim()).map_err(|m| Error::parse(line_no, key, m))?;
        }
        if lines.contains_key("h") && (lines.contains_key("h_axis") || lines.contains_key("h_cross")) {
            return Err(Error::parse(lines["h"], "h", "`h` cannot be combined with h_axis or h_cross"));
        }
        cfg.validate_with(&|key| lines.get(key).copied().unwrap_or(0))?;
        Ok(cfg)
    }

    /// Applies `key=value` overrides (line 0 in errors) and revalidates.
    pub fn with_overrides<S: AsRef<str>>(mut self, overrides: &[S]) -> Result<Config> {
        for item in overrides {
            let item = item.as_ref();
            let (key, value) = item.split_once('=').ok_or_else(|| Error::parse(0, item, "override must be key=value"))?;
            let key = canonical_key(key.trim());
            if section_of(key).is_none() {
                return Err(Error::parse(0, key, "unknown key"));
            }
            self.apply(key, value.trim()).map_err(|m| Error::parse(0, key, m))?;
        }
        self.validate_with(&|_| 0)?;
        Ok(self)
    }

    /// Sets the solver seed and renumbers the multi-start seeds from it.
    pub fn with_seed(mut self, seed: u64) -> Config {
        self.seed = seed;
        let n = self.seeds.len() as u64;
        self.seeds = (0..n).map(|k| seed.wrapping_add(k)).collect();
        self
    }

    fn apply(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        match key {
            "norm" => self.norm = value.parse().map_err(|e: finsler_core::Error| e.to_string())?,
            "p" => self.p = number(value)?,
            "f" => self.f = parse_load(value)?,
            "cross" => self.cross = parse_box(value)?,
            "m" => self.m = integer(value)?,
            "ell" => self.ell = number(value)?,
            "h" => {
                self.h_axis = number(value)?;
                self.h_cross = self.h_axis;
            }
            "h_axis" => self.h_axis = number(value)?,
            "h_cross" => self.h_cross = number(value)?,
            "tol_grad" => self.tol_grad = number(value)?,
            "tol_energy" => self.tol_energy = number(value)?,
            "max_iters" => self.max_iters = integer(value)?,
            "eps_schedule" => {
                self.eps_schedule = if value == "auto" { Vec::new() } else { list(value, number)? };
            }
            "seed" => self.seed = integer(value)?,
            "kind" => self.kind = value.parse()?,
            "ell_list" => self.ell_list = list(value, number)?,
            "seeds" => self.seeds = list(value, integer)?,
            "mesh_tolerance" => self.mesh_tolerance = number(value)?,
            _ => return Err("unknown key".into()),
        }
        Ok(())
    }

    fn validate_with(&self, line: &dyn Fn(&str) -> usize) -> Result<()> {
        let fail = |key: &str, msg: String| Err(Error::parse(line(key), key, msg));
        if !(self.p > 1.0) {
            return fail("p", format!("p must exceed 1, got {}", self.p));
        }
        if self.m == 0 {
            return fail("m", "the axis dimension must be at least 1".into());
        }
        if self.cross.is_empty() {
            return fail("cross", "the cross-section needs at least one interval".into());
        }
        if !(self.ell > 0.0) {
            return fail("ell", "ell must be positive".into());
        }
        for (key, h) in [("h_axis", self.h_axis), ("h_cross", self.h_cross)] {
            if !(h > 0.0) {
                let key = if line(key) == 0 && line("h") != 0 { "h" } else { key };
                return fail(key, format!("mesh size must be positive, got {h}"));
            }
        }
        if let Err(e) = self.solve_options().validate() {
            let key = if !(self.tol_grad > 0.0) || !(self.tol_energy >= 0.0) { "tol_grad" } else { "eps_schedule" };
            return fail(key, e.to_string());
        }
        if self.max_iters == 0 {
            return fail("max_iters", "max_iters must be at least 1".into());
        }
        if let Err(e) = self.norm_spec() {
            return fail("norm", e.to_string());
        }
        if self.ell_list.len() < 3 {
            return fail("ell_list", format!("ℓ_list needs at least 3 entries, got {}", self.ell_list.len()));
        }
        if self.ell_list[0] <= 0.0 {
            return fail("ell_list", "ℓ_list entries must be positive".into());
        }
        if self.ell_list.windows(2).any(|w| w[1] <= w[0]) {
            return fail("ell_list", "ℓ_list must be increasing".into());
        }
        if self.seeds.is_empty() {
            return fail("seeds", "at least one seed is required".into());
        }
        if !(self.mesh_tolerance >= 0.0) {
            return fail("mesh_tolerance", "mesh_tolerance must be nonnegative".into());
        }
        let cross = match CrossSectionMesh::build(&self.cross, self.h_cross) {
            Ok(c) => c,
            Err(e) => return fail("h_cross", e.to_string()),
        };
        if let Load::Samples(v) = &self.f {
            if v.len() != cross.num_nodes() {
                return fail("f", format!("samples() has {} values, the cross-section mesh has {} nodes", v.len(), cross.num_nodes()));
            }
        }
        Ok(())
    }

    /// Dimension of the full space `ℝ^{m + cross}`.
    pub fn dim(&self) -> usize {
        self.m + self.cross.len()
    }

    /// The norm on the full space.
    pub fn norm_spec(&self) -> finsler_core::Result<NormSpec> {
        self.norm.build(self.m, self.dim())
    }

    /// Whether the norm is a split norm with its axis part on the `m` axis coordinates.
    pub fn is_split(&self) -> bool {
        self.norm.is_split()
    }

    pub fn solve_options(&self) -> SolveOptions {
        SolveOptions {
            tol_grad: self.tol_grad,
            tol_energy: self.tol_energy,
            max_iters: self.max_iters,
            eps_schedule: self.eps_schedule.clone(),
            seed: self.seed,
        }
    }

    pub fn cross_mesh(&self) -> Result<CrossSectionMesh> {
        Ok(CrossSectionMesh::build(&self.cross, self.h_cross)?)
    }

    pub fn cylinder_mesh(&self, ell: f64) -> Result<CylinderMesh> {
        Ok(CylinderMesh::build(ell, self.m, &self.cross, self.h_axis, self.h_cross)?)
    }

    /// The load as a field on the cross-section mesh.
    pub fn load(&self, cross: &CrossSectionMesh) -> Result<Field> {
        match &self.f {
            Load::Constant(c) => Ok(Field::constant(cross, *c)),
            Load::Samples(v) if v.len() == cross.num_nodes() => Ok(Field { values: v.clone(), constrained: false }),
            Load::Samples(v) => Err(Error::Input(format!("f has {} samples for {} cross-section nodes", v.len(), cross.num_nodes()))),
        }
    }

    /// True when the load vanishes identically.
    pub fn load_is_zero(&self) -> bool {
        match &self.f {
            Load::Constant(c) => *c == 0.0,
            Load::Samples(v) => v.iter().all(|&x| x == 0.0),
        }
    }
}

impl fmt::Display for Config {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let load = match &self.f {
            Load::Constant(c) => fmt_num(*c),
            Load::Samples(v) => format!("samples({})", fmt_list(v, |x| fmt_num(*x))),
        };
        let cross = self.cross.iter().map(|i| format!("({},{})", fmt_num(i.lo), fmt_num(i.hi))).collect::<Vec<_>>().join(" x ");
        let schedule = if self.eps_schedule.is_empty() { "auto".to_string() } else { fmt_list(&self.eps_schedule, |x| fmt_num(*x)) };
        writeln!(f, "[problem]")?;
        writeln!(f, "norm = {}", self.norm)?;
        writeln!(f, "p = {}", fmt_num(self.p))?;
        writeln!(f, "f = {load}")?;
        writeln!(f, "cross = {cross}")?;
        writeln!(f, "m = {}", self.m)?;
        writeln!(f, "ell = {}", fmt_num(self.ell))?;
        writeln!(f)?;
        writeln!(f, "[mesh]")?;
        writeln!(f, "h_axis = {}", fmt_num(self.h_axis))?;
        writeln!(f, "h_cross = {}", fmt_num(self.h_cross))?;
        writeln!(f)?;
        writeln!(f, "[solver]")?;
        writeln!(f, "tol_grad = {}", fmt_num(self.tol_grad))?;
        writeln!(f, "tol_energy = {}", fmt_num(self.tol_energy))?;
        writeln!(f, "max_iters = {}", self.max_iters)?;
        writeln!(f, "eps_schedule = {schedule}")?;
        writeln!(f, "seed = {}", self.seed)?;
        writeln!(f)?;
        writeln!(f, "[ladder]")?;
        writeln!(f, "kind = {}", self.kind.name())?;
        writeln!(f, "ell_list = {}", fmt_list(&self.ell_list, |x| fmt_num(*x)))?;
        writeln!(f, "seeds = {}", fmt_list(&self.seeds, |s| s.to_string()))?;
        writeln!(f, "mesh_tolerance = {}", fmt_num(self.mesh_tolerance))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = Config::parse("norm = qnorm(2)\np = 2\ncross = (0,1)\nh = 0.25\nf = 1\n").unwrap();
        assert_eq!(cfg.norm, NormDescriptor::QNorm(2.0));
        assert_eq!(cfg.h_axis, 0.25);
        assert_eq!(cfg.h_cross, 0.25);
        assert_eq!(cfg.f, Load::Constant(1.0));
        assert_eq!(cfg.tol_grad, 1e-10);
        assert_eq!(cfg.seeds, vec![0, 1, 2]);
        assert_eq!(cfg.kind, ExperimentKind::SolutionRate);
    }

    #[test]
    fn sections_and_split_norm() {
        let text = "[problem]\nnorm = split(3; qnorm(3); qnorm(3))  # pseudo 3-Laplace\np = 3\ncross = (0,1) x (0,2)\n\n[ladder]\nkind = eigen_rate\nℓ_list = 4, 8, 16\n";
        let cfg = Config::parse(text).unwrap();
        assert!(cfg.is_split());
        assert_eq!(cfg.dim(), 3);
        assert_eq!(cfg.kind, ExperimentKind::EigenRate);
        assert_eq!(cfg.ell_list, vec![4.0, 8.0, 16.0]);
    }

    #[test]
    fn decreasing_ell_list_names_line_and_key() {
        let err = Config::parse("[problem]\np = 2\n[ladder]\nell_list = 8,4,16\n").unwrap_err();
        match err {
            Error::Parse { line, key, message } => {
                assert_eq!((line, key.as_str()), (4, "ell_list"));
                assert!(message.contains("ℓ_list must be increasing"));
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn unknown_and_misplaced_keys() {
        let err = Config::parse("[problem]\np = 2\nfoo = 3\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, ref key, .. } if key == "foo"));
        let err = Config::parse("[mesh]\np = 2\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, ref key, .. } if key == "p"));
        let err = Config::parse("[nowhere]\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        let err = Config::parse("p = 2\np = 3\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn bad_values() {
        for (text, key) in [
            ("norm = qnorm(0.5)", "norm"),
            ("norm = matq(2; 1,0)", "norm"),
            ("norm = qnrm(2)", "norm"),
            ("p = 1", "p"),
            ("h = -1", "h"),
            ("cross = (1,0)", "cross"),
            ("ell_list = 4, 8", "ell_list"),
            ("f = samples(1, 2)", "f"),
            ("eps_schedule = 1e-2, 1e-1", "eps_schedule"),
            ("kind = speed", "kind"),
            ("seeds = -1", "seeds"),
        ] {
            match Config::parse(text) {
                Err(Error::Parse { key: k, .. }) => assert_eq!(k, key, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
    }

    #[test]
    fn print_then_parse_is_identity() {
        let mut cfg = Config::default();
        cfg.norm = "block(2; 1,1; 1,2; 1,4)".parse().unwrap();
        cfg.f = Load::Samples((0..17).map(|i| 0.1 * i as f64).collect());
        cfg.eps_schedule = vec![1e-2, 1e-4, 0.0];
        cfg.p = 2.5;
        cfg.tol_grad = 3.3e-11;
        assert_eq!(Config::parse(&cfg.to_string()).unwrap(), cfg);
        assert_eq!(Config::parse(&Config::default().to_string()).unwrap(), Config::default());
    }

    #[test]
    fn overrides_and_seed() {
        let cfg = Config::default().with_overrides(&["p=3", "ell_list=2,3,4,5", "h=0.125"]).unwrap().with_seed(7);
        assert_eq!(cfg.p, 3.0);
        assert_eq!(cfg.ell_list.len(), 4);
        assert_eq!(cfg.h_cross, 0.125);
        assert_eq!(cfg.seeds, vec![7, 8, 9]);
        assert!(Config::default().with_overrides(&["bogus=1"]).is_err());
        assert!(Config::default().with_overrides(&["p"]).is_err());
    }
}
