//! Borel sets represented by membership predicates.

use std::collections::BTreeSet;

use crate::dyadic::Dyadic;
use crate::error::{Error, Result};
use crate::grid::Square;
use crate::curve::OrderingCurve;
use crate::matrix::C64;

/// Constructive regions of the plane. Disks and half-planes are closed;
/// dyadic cells follow the top-left edge rule of [`crate::grid`].
#[derive(Clone, Debug, PartialEq)]
pub enum Region {
    Everything,
    Nothing,
    Disk { center: C64, radius: f64 },
    /// `a x + b y <= c`.
    HalfPlane { a: f64, b: f64, c: f64 },
    Cells { square: Square, level: u32, cells: BTreeSet<u64> },
    /// `psi([0, t])`: points whose minimal preimage is `<= t` (or `< t` when strict).
    CurvePrefix { curve: OrderingCurve, t: Dyadic, strict: bool },
    /// Finite set of points, each matched within `tol`.
    Points { points: Vec<C64>, tol: f64 },
    And(Box<Region>, Box<Region>),
    Or(Box<Region>, Box<Region>),
    Not(Box<Region>),
}

impl Region {
    pub fn disk(center: C64, radius: f64) -> Self {
        Region::Disk { center, radius }
    }

    pub fn cell(square: Square, level: u32, k: u64) -> Self {
        Region::Cells { square, level, cells: BTreeSet::from([k]) }
    }

    pub fn curve_prefix(curve: OrderingCurve, t: Dyadic) -> Self {
        Region::CurvePrefix { curve, t, strict: false }
    }

    pub fn and(self, other: Region) -> Self {
        Region::And(Box::new(self), Box::new(other))
    }

    pub fn or(self, other: Region) -> Self {
        Region::Or(Box::new(self), Box::new(other))
    }

    pub fn complement(self) -> Self {
        Region::Not(Box::new(self))
    }

    pub fn contains(&self, z: C64) -> bool {
        match self {
            Region::Everything => true,
            Region::Nothing => false,
            Region::Disk { center, radius } => (z - center).norm() <= *radius,
            Region::HalfPlane { a, b, c } => a * z.re + b * z.im <= *c,
            Region::Cells { square, level, cells } => square
                .cell_of(z, *level)
                .is_some_and(|cc| cells.contains(&Square::cell_index(cc, *level))),
            Region::CurvePrefix { curve, t, strict } => match curve.min_preimage(z) {
                Ok(s) if *strict => s < *t,
                Ok(s) => s <= *t,
                Err(_) => false,
            },
            Region::Points { points, tol } => points.iter().any(|p| (p - z).norm() <= *tol),
            Region::And(a, b) => a.contains(z) && b.contains(z),
            Region::Or(a, b) => a.contains(z) || b.contains(z),
            Region::Not(a) => !a.contains(z),
        }
    }

    /// Membership of a whole eigenvalue cluster; `None` when its members disagree.
    pub fn contains_cluster(&self, members: &[C64]) -> Option<bool> {
        let first = self.contains(*members.first()?);
        members.iter().all(|&m| self.contains(m) == first).then_some(first)
    }

    /// Like [`Self::contains_cluster`] but an error naming the cluster when ambiguous.
    /// Curve prefixes rank a cluster by its representative, as the ordering does.
    pub fn decide_cluster(&self, value: C64, members: &[C64]) -> Result<bool> {
        if members.is_empty() || matches!(self, Region::CurvePrefix { .. }) {
            return Ok(self.contains(value));
        }
        self.contains_cluster(members).ok_or_else(|| Error::ambiguous(value))
    }

    /// Level-`level` cells of `square` whose centres lie in the region.
    pub fn rasterize(&self, square: Square, level: u32) -> Vec<u64> {
        (1..=1u64 << (2 * level))
            .filter(|&k| self.contains(square.cell_center(Square::cell_coord(k, level), level)))
            .collect()
    }

    /// Parses a region spec: `disk:cx,cy,r`, `halfplane:a,b,c` (`ax + by <= c`),
    /// `cells:n=3,k=1,5,9`, `all`, `none`, combined with `!`, `&`, `|` and
    /// parentheses (`!` binds tightest, then `&`, then `|`). Cell indices refer to
    /// the level-`n` grid of `square`.
    pub fn parse(spec: &str, square: Square) -> Result<Region> {
        let mut p = Parser { s: spec.as_bytes(), pos: 0, square, depth: 0 };
        let r = p.expr()?;
        p.skip_ws();
        if p.pos != p.s.len() {
            return Err(p.err("trailing input"));
        }
        Ok(r)
    }
}

/// Every level-`n` cell `A_{n,k}` of the square, `k = 1..=4^n` in order.
pub fn dyadic_cells(square: Square, n: u32) -> Vec<Region> {
    (1..=1u64 << (2 * n)).map(|k| Region::cell(square, n, k)).collect()
}

const MAX_NESTING: usize = 64;
const MAX_CELL_LEVEL: u32 = 30;

struct Parser<'a> {
    s: &'a [u8],
    pos: usize,
    square: Square,
    depth: usize,
}

impl Parser<'_> {
    fn err(&self, msg: &str) -> Error {
        Error::parse("region", format!("{msg} at byte {}", self.pos))
    }

    fn skip_ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.s.get(self.pos).copied()
    }

    fn expr(&mut self) -> Result<Region> {
        let mut r = self.term()?;
        while self.peek() == Some(b'|') {
            self.pos += 1;
            r = r.or(self.term()?);
        }
        Ok(r)
    }

    fn term(&mut self) -> Result<Region> {
        let mut r = self.factor()?;
        while self.peek() == Some(b'&') {
            self.pos += 1;
            r = r.and(self.factor()?);
        }
        Ok(r)
    }

    fn factor(&mut self) -> Result<Region> {
        self.depth += 1;
        if self.depth > MAX_NESTING {
            return Err(self.err("nesting too deep"));
        }
        let r = match self.peek() {
            Some(b'!') => {
                self.pos += 1;
                self.factor()?.complement()
            }
            Some(b'(') => {
                self.pos += 1;
                let r = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.err("expected ')'"));
                }
                self.pos += 1;
                r
            }
            Some(_) => self.atom()?,
            None => return Err(self.err("unexpected end")),
        };
        self.depth -= 1;
        Ok(r)
    }

    fn atom(&mut self) -> Result<Region> {
        let start = self.pos;
        while self.pos < self.s.len() && !matches!(self.s[self.pos], b'&' | b'|' | b')' | b'(' | b'!') {
            self.pos += 1;
        }
        let text = std::str::from_utf8(&self.s[start..self.pos]).map_err(|_| self.err("invalid utf-8"))?.trim();
        let (name, args) = match text.split_once(':') {
            Some((n, a)) => (n.trim(), a),
            None => (text, ""),
        };
        match name {
            "all" if args.is_empty() => Ok(Region::Everything),
            "none" if args.is_empty() => Ok(Region::Nothing),
            "disk" => {
                let v = numbers(args, 3)?;
                if !(v[2] >= 0.0) {
                    return Err(Error::parse("region", "disk radius must be nonnegative"));
                }
                Ok(Region::Disk { center: C64::new(v[0], v[1]), radius: v[2] })
            }
            "halfplane" => {
                let v = numbers(args, 3)?;
                if v[0] == 0.0 && v[1] == 0.0 {
                    return Err(Error::parse("region", "half-plane normal must be nonzero"));
                }
                Ok(Region::HalfPlane { a: v[0], b: v[1], c: v[2] })
            }
            "cells" => self.cells(args),
            _ => Err(Error::parse("region", format!("unknown region {text:?}"))),
        }
    }

    fn cells(&self, args: &str) -> Result<Region> {
        let mut level = None;
        let mut cells = BTreeSet::new();
        let mut in_k = false;
        for part in args.split(',').map(str::trim) {
            let value = if let Some(v) = part.strip_prefix("n=") {
                level = Some(v.trim().parse::<u32>().map_err(|_| Error::parse("region", format!("bad level {v:?}")))?);
                in_k = false;
                continue;
            } else if let Some(v) = part.strip_prefix("k=") {
                in_k = true;
                v
            } else if in_k {
                part
            } else {
                return Err(Error::parse("region", format!("unexpected cell argument {part:?}")));
            };
            cells.insert(value.trim().parse::<u64>().map_err(|_| Error::parse("region", format!("bad cell index {value:?}")))?);
        }
        let level = level.ok_or_else(|| Error::parse("region", "cells need n=<level>"))?;
        if level > MAX_CELL_LEVEL {
            return Err(Error::parse("region", format!("cell level {level} exceeds {MAX_CELL_LEVEL}")));
        }
        let count = 1u64 << (2 * level);
        if let Some(bad) = cells.iter().find(|&&k| k == 0 || k > count) {
            return Err(Error::parse("region", format!("cell index {bad} outside 1..={count}")));
        }
        Ok(Region::Cells { square: self.square, level, cells })
    }
}

fn numbers(args: &str, count: usize) -> Result<Vec<f64>> {
    let v: Vec<f64> = args
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| Error::parse("region", format!("bad number {t:?}"))))
        .collect::<Result<_>>()?;
    if v.len() != count || v.iter().any(|x| !x.is_finite()) {
        return Err(Error::parse("region", format!("expected {count} finite numbers, got {args:?}")));
    }
    Ok(v)
}
