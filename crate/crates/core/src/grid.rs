//! The square of side `3R` centred at the origin and its dyadic cells.
//!
//! A level-`n` cell is `[x0, x1) x (y0, y1]`: it owns its left and top edges,
//! but neither its bottom-left nor its top-right corner. Cells are numbered
//! `k = 1..=4^n` left to right, then top to bottom. Points on the outer bottom
//! or right edge of the square are clamped into the adjacent cell so that the
//! closed square is partitioned.

use serde::{Deserialize, Serialize};

use crate::matrix::C64;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Square {
    /// `R`; the square has side `3R`.
    pub radius: f64,
}

/// Column (from the left) and row (from the bottom) of a cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellCoord {
    pub ix: u64,
    pub iy: u64,
}

impl Square {
    pub fn new(radius: f64) -> Self {
        assert!(radius > 0.0 && radius.is_finite(), "square radius must be positive");
        Square { radius }
    }

    /// Square for an operator of norm `norm`; a zero operator gets `R = 1`.
    pub fn for_norm(norm: f64) -> Self {
        Square::new(if norm > 0.0 { norm } else { 1.0 })
    }

    pub fn side(&self) -> f64 {
        3.0 * self.radius
    }

    pub fn half_side(&self) -> f64 {
        1.5 * self.radius
    }

    pub fn contains(&self, z: C64) -> bool {
        let h = self.half_side();
        z.re.abs() <= h && z.im.abs() <= h
    }

    /// Position in the unit square, `(0, 0)` at the bottom-left corner.
    pub fn unit_coords(&self, z: C64) -> (f64, f64) {
        let h = self.half_side();
        ((z.re + h) / self.side(), (z.im + h) / self.side())
    }

    pub fn from_unit(&self, u: f64, v: f64) -> C64 {
        let h = self.half_side();
        C64::new(u * self.side() - h, v * self.side() - h)
    }

    /// Cell containing `z` at `level`, or `None` outside the closed square.
    /// Scaling by `2^level` is exact, so cells at successive levels nest.
    pub fn cell_of(&self, z: C64, level: u32) -> Option<CellCoord> {
        if !self.contains(z) {
            return None;
        }
        let (u, v) = self.unit_coords(z);
        let m = (1u64 << level) as f64;
        let last = (1u64 << level) - 1;
        let ix = ((u * m).floor().max(0.0) as u64).min(last);
        let iy = (((v * m).ceil() - 1.0).max(0.0) as u64).min(last);
        Some(CellCoord { ix, iy })
    }

    /// 1-based index, increasing to the right then down.
    pub fn cell_index(c: CellCoord, level: u32) -> u64 {
        let side = 1u64 << level;
        let row_from_top = side - 1 - c.iy;
        row_from_top * side + c.ix + 1
    }

    pub fn cell_coord(k: u64, level: u32) -> CellCoord {
        let side = 1u64 << level;
        let row_from_top = (k - 1) / side;
        CellCoord { ix: (k - 1) % side, iy: side - 1 - row_from_top }
    }

    /// `(x0, x1, y0, y1)` of a cell.
    pub fn cell_bounds(&self, c: CellCoord, level: u32) -> (f64, f64, f64, f64) {
        let m = (1u64 << level) as f64;
        let lo = self.from_unit(c.ix as f64 / m, c.iy as f64 / m);
        let hi = self.from_unit((c.ix + 1) as f64 / m, (c.iy + 1) as f64 / m);
        (lo.re, hi.re, lo.im, hi.im)
    }

    pub fn cell_center(&self, c: CellCoord, level: u32) -> C64 {
        let m = (1u64 << level) as f64;
        self.from_unit((c.ix as f64 + 0.5) / m, (c.iy as f64 + 0.5) / m)
    }
}
