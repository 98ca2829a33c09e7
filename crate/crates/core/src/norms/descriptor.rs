//! Textual norm descriptors used in configuration files.
//!
//! ```text
//! qnorm(q)
//! matq(q; a11,a12; a21,a22)
//! block(q; m1,m2; p1,p2; l1,l2)
//! split(q; <axis-desc>; <cross-desc>)
//! eucl(t)
//! ```
//!
//! Descriptors carry no dimension; [`NormDescriptor::build`] supplies it. The
//! parts of a `split` receive the axis and cross-section dimensions.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use super::NormSpec;
use crate::error::{param, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum NormDescriptor {
    QNorm(f64),
    MatQ { q: f64, rows: Vec<Vec<f64>> },
    Block { q: f64, sizes: Vec<usize>, exponents: Vec<f64>, weights: Vec<f64> },
    Split { q: f64, axis: Box<NormDescriptor>, cross: Box<NormDescriptor> },
    Eucl(f64),
}

fn err(position: usize, message: impl Into<String>) -> Error {
    Error::Descriptor { position, message: message.into() }
}

// Splits `s` on `sep` at parenthesis depth 0, returning (offset, piece) pairs.
fn split_top(s: &str, base: usize, sep: char) -> Result<Vec<(usize, &str)>> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, c) in s.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => {
                depth -= 1;
                if depth < 0 {
                    return Err(err(base + i, "unbalanced ')'"));
                }
            }
            c if c == sep && depth == 0 => {
                out.push((base + start, &s[start..i]));
                start = i + c.len_utf8();
            }
            _ => {}
        }
    }
    if depth != 0 {
        return Err(err(base + s.len(), "unbalanced '('"));
    }
    out.push((base + start, &s[start..]));
    Ok(out)
}

fn trimmed(offset: usize, s: &str) -> (usize, &str) {
    let lead = s.len() - s.trim_start().len();
    (offset + lead, s.trim())
}

fn number(offset: usize, s: &str) -> Result<f64> {
    let (pos, t) = trimmed(offset, s);
    t.parse::<f64>().map_err(|_| err(pos, format!("expected a number, found '{t}'")))
}

fn numbers(offset: usize, s: &str) -> Result<Vec<f64>> {
    split_top(s, offset, ',')?.into_iter().map(|(o, piece)| number(o, piece)).collect()
}

fn sizes(offset: usize, s: &str) -> Result<Vec<usize>> {
    split_top(s, offset, ',')?
        .into_iter()
        .map(|(o, piece)| {
            let (pos, t) = trimmed(o, piece);
            t.parse::<usize>().map_err(|_| err(pos, format!("expected a block size, found '{t}'")))
        })
        .collect()
}

fn parse_at(offset: usize, text: &str) -> Result<NormDescriptor> {
    let (offset, text) = trimmed(offset, text);
    let open = text.find('(').ok_or_else(|| err(offset, "expected '<family>(...)'"))?;
    if !text.ends_with(')') {
        return Err(err(offset + text.len(), "expected ')' at end of descriptor"));
    }
    let name = text[..open].trim();
    let body_offset = offset + open + 1;
    let body = &text[open + 1..text.len() - 1];
    let args = split_top(body, body_offset, ';')?;
    let arity = |n: usize| -> Result<()> {
        if args.len() != n {
            return Err(err(offset, format!("{name} takes {n} ';'-separated arguments, found {}", args.len())));
        }
        Ok(())
    };
    match name {
        "qnorm" => {
            arity(1)?;
            Ok(NormDescriptor::QNorm(number(args[0].0, args[0].1)?))
        }
        "eucl" => {
            arity(1)?;
            Ok(NormDescriptor::Eucl(number(args[0].0, args[0].1)?))
        }
        "matq" => {
            if args.len() < 2 {
                return Err(err(offset, "matq takes q followed by at least one matrix row"));
            }
            let q = number(args[0].0, args[0].1)?;
            let rows = args[1..].iter().map(|&(o, r)| numbers(o, r)).collect::<Result<Vec<_>>>()?;
            Ok(NormDescriptor::MatQ { q, rows })
        }
        "block" => {
            arity(4)?;
            Ok(NormDescriptor::Block {
                q: number(args[0].0, args[0].1)?,
                sizes: sizes(args[1].0, args[1].1)?,
                exponents: numbers(args[2].0, args[2].1)?,
                weights: numbers(args[3].0, args[3].1)?,
            })
        }
        "split" => {
            arity(3)?;
            Ok(NormDescriptor::Split {
                q: number(args[0].0, args[0].1)?,
                axis: Box::new(parse_at(args[1].0, args[1].1)?),
                cross: Box::new(parse_at(args[2].0, args[2].1)?),
            })
        }
        other => Err(err(offset, format!("unknown norm family '{other}'"))),
    }
}

impl FromStr for NormDescriptor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_at(0, s)
    }
}

fn join<T: ToString>(values: &[T]) -> String {
    values.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

impl fmt::Display for NormDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NormDescriptor::QNorm(q) => write!(f, "qnorm({q})"),
            NormDescriptor::Eucl(t) => write!(f, "eucl({t})"),
            NormDescriptor::MatQ { q, rows } => {
                write!(f, "matq({q}")?;
                for row in rows {
                    write!(f, "; {}", join(row))?;
                }
                write!(f, ")")
            }
            NormDescriptor::Block { q, sizes, exponents, weights } => {
                write!(f, "block({q}; {}; {}; {})", join(sizes), join(exponents), join(weights))
            }
            NormDescriptor::Split { q, axis, cross } => write!(f, "split({q}; {axis}; {cross})"),
        }
    }
}

impl NormDescriptor {
    /// True for `split(...)`.
    pub fn is_split(&self) -> bool {
        matches!(self, NormDescriptor::Split { .. })
    }

    /// Builds the norm on `ℝ^dim`; a split puts its axis part on the first `axis_dim`
    /// coordinates.
    pub fn build(&self, axis_dim: usize, dim: usize) -> Result<NormSpec> {
        match self {
            NormDescriptor::QNorm(q) => NormSpec::qnorm(*q, dim),
            NormDescriptor::Eucl(t) => NormSpec::scaled_euclidean(*t, dim),
            NormDescriptor::MatQ { q, rows } => {
                if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
                    return Err(param(format!("matq needs a {dim}×{dim} matrix")));
                }
                NormSpec::matrix_qnorm(*q, rows.concat(), dim)
            }
            NormDescriptor::Block { q, sizes, exponents, weights } => {
                let total: usize = sizes.iter().sum();
                if total != dim {
                    return Err(Error::DimensionMismatch { expected: dim, found: total });
                }
                NormSpec::block(*q, sizes.clone(), exponents.clone(), weights.clone())
            }
            NormDescriptor::Split { q, axis, cross } => {
                if axis.is_split() || cross.is_split() {
                    return Err(param("split parts cannot themselves be split norms"));
                }
                if axis_dim == 0 || axis_dim >= dim {
                    return Err(param(format!("split needs 0 < axis dimension < {dim}, got {axis_dim}")));
                }
                NormSpec::split(*q, axis.build(0, axis_dim)?, cross.build(0, dim - axis_dim)?)
            }
        }
    }
}
