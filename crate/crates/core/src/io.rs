//! Plain-text file formats. All indices are 0-based.
//!
//! Instance: a header `n_left n_right m`, then `m` lines `i j c`.
//! b-instance: an instance followed by one line of `n_left` left demands and
//! one line of `n_right` right demands.
//! Dual: a header `n_left n_right`, then one integer per line, left block
//! first.
//!
//! Blank lines are ignored.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::bmatching::BInstance;
use crate::error::{Error, Result};
use crate::graph::{BipartiteInstance, DualVector};

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            inner: text.lines().enumerate(),
        }
    }

    /// Next non-blank line and its 1-based number.
    fn next_line(&mut self, what: &str) -> Result<(usize, &'a str)> {
        for (k, line) in self.inner.by_ref() {
            if !line.trim().is_empty() {
                return Ok((k + 1, line));
            }
        }
        Err(Error::parse(
            0,
            format!("unexpected end of input, expected {what}"),
        ))
    }

    fn finish(mut self) -> Result<()> {
        match self.inner.find(|(_, l)| !l.trim().is_empty()) {
            Some((k, _)) => Err(Error::parse(k + 1, "trailing content")),
            None => Ok(()),
        }
    }
}

fn fields<T: FromStr>(line_no: usize, line: &str, count: Option<usize>) -> Result<Vec<T>> {
    let out = line
        .split_whitespace()
        .map(|tok| {
            tok.parse::<T>()
                .map_err(|_| Error::parse(line_no, format!("invalid number {tok:?}")))
        })
        .collect::<Result<Vec<T>>>()?;
    match count {
        Some(c) if out.len() != c => Err(Error::parse(
            line_no,
            format!("expected {c} fields, found {}", out.len()),
        )),
        _ => Ok(out),
    }
}

fn read_instance_body(lines: &mut Lines<'_>) -> Result<BipartiteInstance> {
    let (k, header) = lines.next_line("header `n_left n_right m`")?;
    let h: Vec<usize> = fields(k, header, Some(3))?;
    let mut edges = Vec::with_capacity(h[2]);
    for _ in 0..h[2] {
        let (k, line) = lines.next_line("edge line `i j c`")?;
        let f: Vec<i64> = fields(k, line, Some(3))?;
        if f[0] < 0 || f[1] < 0 {
            return Err(Error::parse(k, "negative vertex index"));
        }
        edges.push((f[0] as usize, f[1] as usize, f[2]));
    }
    BipartiteInstance::new(h[0], h[1], edges)
}

pub fn parse_instance(text: &str) -> Result<BipartiteInstance> {
    let mut lines = Lines::new(text);
    let inst = read_instance_body(&mut lines)?;
    lines.finish()?;
    Ok(inst)
}

pub fn format_instance(inst: &BipartiteInstance) -> String {
    let mut out = String::with_capacity(16 * inst.num_edges() + 32);
    let _ = writeln!(
        out,
        "{} {} {}",
        inst.n_left(),
        inst.n_right(),
        inst.num_edges()
    );
    for e in inst.edges() {
        let _ = writeln!(out, "{} {} {}", e.left, e.right, e.cost);
    }
    out
}

pub fn parse_binstance(text: &str) -> Result<BInstance> {
    let mut lines = Lines::new(text);
    let inst = read_instance_body(&mut lines)?;
    let (k, l) = lines.next_line("left demand line")?;
    let b_left = fields(k, l, Some(inst.n_left()))?;
    let (k, r) = lines.next_line("right demand line")?;
    let b_right = fields(k, r, Some(inst.n_right()))?;
    lines.finish()?;
    BInstance::new(inst, b_left, b_right)
}

fn join(values: &[i64]) -> String {
    values
        .iter()
        .map(i64::to_string)
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn format_binstance(binst: &BInstance) -> String {
    let mut out = format_instance(binst.instance());
    let _ = writeln!(out, "{}", join(binst.b_left()));
    let _ = writeln!(out, "{}", join(binst.b_right()));
    out
}

pub fn parse_dual(text: &str) -> Result<DualVector> {
    let mut lines = Lines::new(text);
    let (k, header) = lines.next_line("header `n_left n_right`")?;
    let h: Vec<usize> = fields(k, header, Some(2))?;
    let mut values = Vec::with_capacity(h[0] + h[1]);
    for _ in 0..h[0] + h[1] {
        let (k, line) = lines.next_line("dual value")?;
        values.push(fields::<i64>(k, line, Some(1))?[0]);
    }
    lines.finish()?;
    Ok(DualVector::from_flat(h[0], values))
}

pub fn format_dual(y: &DualVector) -> String {
    let mut out = format!("{} {}\n", y.left.len(), y.right.len());
    for v in y.iter() {
        let _ = writeln!(out, "{v}");
    }
    out
}

pub fn load_instance(path: &Path) -> Result<BipartiteInstance> {
    parse_instance(&fs::read_to_string(path)?)
}

pub fn save_instance(path: &Path, inst: &BipartiteInstance) -> Result<()> {
    Ok(fs::write(path, format_instance(inst))?)
}

pub fn load_binstance(path: &Path) -> Result<BInstance> {
    parse_binstance(&fs::read_to_string(path)?)
}

pub fn save_binstance(path: &Path, binst: &BInstance) -> Result<()> {
    Ok(fs::write(path, format_binstance(binst))?)
}

pub fn load_dual(path: &Path) -> Result<DualVector> {
    parse_dual(&fs::read_to_string(path)?)
}

pub fn save_dual(path: &Path, y: &DualVector) -> Result<()> {
    Ok(fs::write(path, format_dual(y))?)
}
