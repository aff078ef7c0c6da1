//! Orderings of the plane by minimal preimages under a curve `[0, 1] -> square`.
//!
//! A curve of depth `d` visits the `4^d` cells of side `3R / 2^d`; the
//! parameter interval `[j / 4^d, (j + 1) / 4^d)` maps onto cell `j` of the
//! visiting order. All statements about preimages are made at this
//! resolution, so the minimal preimage of a point is the dyadic left end of
//! the interval belonging to its cell.
//!
//! * Hilbert: continuous, starts at the bottom-left corner and ends at the
//!   bottom-right one.
//! * Morton: bit interleaving, `x` bits at even fractional positions of the
//!   parameter and `y` bits at odd positions. Discontinuous but Borel.
//! * Lexicographic: column sweep, `x` first, then `y` upward.
//! * Radial: modulus first (rings out to radius `1.5R`), then argument in
//!   `[0, 2pi)`.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dyadic::Dyadic;
use crate::error::{Error, Result};
use crate::grid::{CellCoord, Square};
use crate::matrix::C64;
use crate::schur::cluster_values;

pub const DEFAULT_DEPTH: u32 = 32;
pub const MAX_DEPTH: u32 = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CurveKind {
    Hilbert,
    Morton,
    Lexicographic,
    Radial,
}

/// Curve description without a square: the form used on the command line.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct CurveSpec {
    pub kind: CurveKind,
    pub depth: u32,
}

/// A curve bound to the square of side `3R`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OrderingCurve {
    pub kind: CurveKind,
    pub depth: u32,
    pub square: Square,
}

fn hilbert_rotate(s: u64, rx: u64, ry: u64, x: &mut u64, y: &mut u64) {
    if ry == 0 {
        if rx == 1 {
            *x = s - 1 - *x;
            *y = s - 1 - *y;
        }
        std::mem::swap(x, y);
    }
}

/// Hilbert index of cell `(x, y)` on a `2^order` grid.
pub fn hilbert_encode(order: u32, mut x: u64, mut y: u64) -> u64 {
    let side = 1u64 << order;
    let mut d = 0u64;
    let mut s = side >> 1;
    while s > 0 {
        let rx = u64::from(x & s > 0);
        let ry = u64::from(y & s > 0);
        d += s * s * ((3 * rx) ^ ry);
        hilbert_rotate(side, rx, ry, &mut x, &mut y);
        s >>= 1;
    }
    d
}

/// Cell `(x, y)` of Hilbert index `d` on a `2^order` grid.
pub fn hilbert_decode(order: u32, d: u64) -> (u64, u64) {
    let side = 1u64 << order;
    let (mut x, mut y) = (0u64, 0u64);
    let mut t = d;
    let mut s = 1u64;
    while s < side {
        let rx = 1 & (t >> 1);
        let ry = 1 & (t ^ rx);
        hilbert_rotate(s, rx, ry, &mut x, &mut y);
        x += s * rx;
        y += s * ry;
        t >>= 2;
        s <<= 1;
    }
    (x, y)
}

/// Interleaves `order` bits of each coordinate, `x` in the lower bit of each pair.
pub fn morton_encode(order: u32, x: u64, y: u64) -> u64 {
    let mut d = 0u64;
    for i in 0..order {
        d |= ((x >> i) & 1) << (2 * i);
        d |= ((y >> i) & 1) << (2 * i + 1);
    }
    d
}

pub fn morton_decode(order: u32, d: u64) -> (u64, u64) {
    let (mut x, mut y) = (0u64, 0u64);
    for i in 0..order {
        x |= ((d >> (2 * i)) & 1) << i;
        y |= ((d >> (2 * i + 1)) & 1) << i;
    }
    (x, y)
}

impl CurveSpec {
    pub fn new(kind: CurveKind, depth: u32) -> Result<Self> {
        if depth == 0 || depth > MAX_DEPTH {
            return Err(Error::parse("curve", format!("depth must lie in 1..={MAX_DEPTH}, got {depth}")));
        }
        Ok(CurveSpec { kind, depth })
    }

    pub fn bind(self, square: Square) -> OrderingCurve {
        OrderingCurve { kind: self.kind, depth: self.depth, square }
    }
}

impl FromStr for CurveSpec {
    type Err = Error;

    /// `hilbert:depth=32`, `morton:depth=32`, `lex`, `radial`; the depth is optional.
    fn from_str(s: &str) -> Result<Self> {
        let (name, params) = match s.split_once(':') {
            Some((n, p)) => (n, Some(p)),
            None => (s, None),
        };
        let kind = match name.trim() {
            "hilbert" => CurveKind::Hilbert,
            "morton" => CurveKind::Morton,
            "lex" | "lexicographic" => CurveKind::Lexicographic,
            "radial" => CurveKind::Radial,
            other => return Err(Error::parse("curve", format!("unknown curve {other:?}"))),
        };
        let mut depth = DEFAULT_DEPTH;
        if let Some(p) = params {
            for kv in p.split(',') {
                match kv.trim().split_once('=') {
                    Some(("depth", v)) => {
                        depth = v.trim().parse().map_err(|_| Error::parse("curve", format!("bad depth {v:?}")))?
                    }
                    _ => return Err(Error::parse("curve", format!("unknown parameter {kv:?}"))),
                }
            }
        }
        CurveSpec::new(kind, depth)
    }
}

impl fmt::Display for CurveSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self.kind {
            CurveKind::Hilbert => "hilbert",
            CurveKind::Morton => "morton",
            CurveKind::Lexicographic => "lex",
            CurveKind::Radial => "radial",
        };
        write!(f, "{name}:depth={}", self.depth)
    }
}

impl Serialize for CurveSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for CurveSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Outcome of checking a spectrum against a curve.
#[derive(Clone, Debug, Serialize)]
pub struct CurveValidation {
    pub valid: bool,
    pub clusters: usize,
    /// Cluster representatives with their minimal parameters, in curve order.
    pub order: Vec<(C64, Dyadic)>,
    pub problem: Option<String>,
}

impl OrderingCurve {
    pub fn new(kind: CurveKind, depth: u32, square: Square) -> Result<Self> {
        Ok(CurveSpec::new(kind, depth)?.bind(square))
    }

    pub fn spec(&self) -> CurveSpec {
        CurveSpec { kind: self.kind, depth: self.depth }
    }

    fn side_cells(&self) -> u64 {
        1u64 << self.depth
    }

    fn decode(&self, d: u64) -> (u64, u64) {
        match self.kind {
            CurveKind::Hilbert => hilbert_decode(self.depth, d),
            CurveKind::Morton => morton_decode(self.depth, d),
            CurveKind::Lexicographic | CurveKind::Radial => (d >> self.depth, d & (self.side_cells() - 1)),
        }
    }

    fn encode(&self, x: u64, y: u64) -> u64 {
        match self.kind {
            CurveKind::Hilbert => hilbert_encode(self.depth, x, y),
            CurveKind::Morton => morton_encode(self.depth, x, y),
            CurveKind::Lexicographic | CurveKind::Radial => (x << self.depth) | y,
        }
    }

    /// Index of the depth-level cell visited at parameter `t` (`t = 1` maps to the last cell).
    pub fn cell_at(&self, t: Dyadic) -> u64 {
        let last = ((1u128 << (2 * self.depth)) - 1) as u64;
        (t.floor_at(2 * self.depth) as u64).min(last)
    }

    /// The curve at `t`: the lower-left corner of the visited cell (for the
    /// radial curve, the inner, lower-angle corner of the polar cell).
    pub fn eval(&self, t: Dyadic) -> C64 {
        let (a, b) = self.decode(self.cell_at(t));
        let m = self.side_cells() as f64;
        match self.kind {
            CurveKind::Radial => {
                let r = self.square.half_side() * a as f64 / m;
                let theta = std::f64::consts::TAU * b as f64 / m;
                C64::from_polar(r, theta)
            }
            _ => self.square.from_unit(a as f64 / m, b as f64 / m),
        }
    }

    /// Same as [`Self::eval`] for a float parameter, rejected outside `[0, 1]`.
    pub fn eval_f64(&self, t: f64) -> Result<C64> {
        Ok(self.eval(Dyadic::from_f64_floor(t, 52)?))
    }

    fn check_inside(&self, z: C64) -> Result<()> {
        if self.square.contains(z) {
            Ok(())
        } else {
            Err(Error::PointOutsideSquare { re: z.re, im: z.im, half_side: self.square.half_side() })
        }
    }

    /// Curve-order index of the cell containing `z`.
    pub fn cell_index_of(&self, z: C64) -> Result<u64> {
        self.check_inside(z)?;
        let m = self.side_cells();
        let (a, b) = match self.kind {
            CurveKind::Radial => {
                let r = z.norm() / self.square.half_side();
                let mut theta = z.im.atan2(z.re);
                if theta < 0.0 {
                    theta += std::f64::consts::TAU;
                }
                let ring = ((r * m as f64).floor() as u64).min(m - 1);
                let sector = ((theta / std::f64::consts::TAU * m as f64).floor() as u64).min(m - 1);
                (ring, sector)
            }
            _ => {
                let CellCoord { ix, iy } = self.square.cell_of(z, self.depth).expect("checked inside");
                (ix, iy)
            }
        };
        Ok(self.encode(a, b))
    }

    /// Smallest parameter at resolution `depth` whose cell contains `z`.
    pub fn min_preimage(&self, z: C64) -> Result<Dyadic> {
        let d = self.cell_index_of(z)?;
        Dyadic::new(d as u128, 2 * self.depth)
    }

    /// Total preorder by minimal preimage; `Equal` exactly when both points
    /// share a depth-level cell.
    pub fn compare(&self, z1: C64, z2: C64) -> Result<Ordering> {
        Ok(self.cell_index_of(z1)?.cmp(&self.cell_index_of(z2)?))
    }

    /// Checks that every spectral point lies in the square and that distinct
    /// clusters (at threshold `delta`) receive distinct parameters.
    pub fn validate(&self, spectrum: &[C64], delta: f64) -> Result<CurveValidation> {
        for &z in spectrum {
            self.check_inside(z)?;
        }
        let (clusters, _) = cluster_values(spectrum, delta);
        let mut order: Vec<(C64, Dyadic)> =
            clusters.iter().map(|c| Ok((c.value, self.min_preimage(c.value)?))).collect::<Result<_>>()?;
        order.sort_by_key(|a| a.1);
        let problem = order.windows(2).find(|w| w[0].1 == w[1].1).map(|w| {
            format!("clusters {} and {} share the parameter {}", w[0].0, w[1].0, w[0].1)
        });
        Ok(CurveValidation { valid: problem.is_none(), clusters: clusters.len(), order, problem })
    }
}
