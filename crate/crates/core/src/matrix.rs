//! Dense complex matrices with the normalized trace as state.

use std::ops::{Add, Mul, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);

/// A square complex matrix of dimension `n >= 1` with finite entries.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix(DMatrix<C64>);

/// On-disk form: `{"n": int, "entries": [[re, im], ...]}` in row-major order.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MatrixFile {
    pub n: usize,
    pub entries: Vec<[f64; 2]>,
}

impl ComplexMatrix {
    /// Builds from row-major entries, rejecting empty, ragged, or non-finite input.
    pub fn new(n: usize, entries: Vec<C64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidMatrix("dimension must be at least 1".into()));
        }
        if entries.len() != n * n {
            return Err(Error::InvalidMatrix(format!(
                "expected {} entries for n = {n}, got {}",
                n * n,
                entries.len()
            )));
        }
        if let Some(pos) = entries.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidMatrix(format!(
                "non-finite entry at row {}, column {}",
                pos / n,
                pos % n
            )));
        }
        Ok(Self(DMatrix::from_row_slice(n, n, &entries)))
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let n = rows.len();
        let mut entries = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(Error::InvalidMatrix("rows must have length n".into()));
            }
            entries.extend(row.iter().map(|&x| C64::new(x, 0.0)));
        }
        Self::new(n, entries)
    }

    pub fn from_dmatrix(m: DMatrix<C64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::InvalidMatrix(format!("not square: {}x{}", m.nrows(), m.ncols())));
        }
        let n = m.nrows();
        let entries: Vec<C64> = (0..n * n).map(|k| m[(k / n, k % n)]).collect();
        Self::new(n, entries)
    }

    /// Wraps without validation; callers guarantee square and finite.
    pub(crate) fn wrap(m: DMatrix<C64>) -> Self {
        debug_assert_eq!(m.nrows(), m.ncols());
        Self(m)
    }

    pub fn zeros(n: usize) -> Self {
        Self(DMatrix::zeros(n, n))
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    pub fn from_diagonal(d: &[C64]) -> Self {
        let n = d.len();
        Self(DMatrix::from_fn(n, n, |i, j| if i == j { d[i] } else { ZERO }))
    }

    pub fn from_fn(n: usize, f: impl FnMut(usize, usize) -> C64) -> Self {
        Self(DMatrix::from_fn(n, n, f))
    }

    /// Jordan block of size `n` at `lambda` (ones on the superdiagonal).
    pub fn jordan(lambda: C64, n: usize) -> Self {
        Self::from_fn(n, |i, j| {
            if i == j {
                lambda
            } else if j == i + 1 {
                ONE
            } else {
                ZERO
            }
        })
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.0[(i, j)]
    }

    pub fn as_dmatrix(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub(crate) fn as_dmatrix_mut(&mut self) -> &mut DMatrix<C64> {
        &mut self.0
    }

    pub fn into_dmatrix(self) -> DMatrix<C64> {
        self.0
    }

    pub fn row_major(&self) -> Vec<C64> {
        let n = self.n();
        (0..n * n).map(|k| self.0[(k / n, k % n)]).collect()
    }

    pub fn diagonal(&self) -> Vec<C64> {
        (0..self.n()).map(|i| self.0[(i, i)]).collect()
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    pub fn scale(&self, s: C64) -> Self {
        Self(&self.0 * s)
    }

    pub fn shift(&self, lambda: C64) -> Self {
        let mut m = self.0.clone();
        for i in 0..self.n() {
            m[(i, i)] -= lambda;
        }
        Self(m)
    }

    pub fn pow(&self, m: usize) -> Self {
        let mut acc = Self::identity(self.n());
        for _ in 0..m {
            acc = &acc * self;
        }
        acc
    }

    pub fn commutator(&self, other: &Self) -> Self {
        &(self * other) - &(other * self)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Frobenius norm of the strictly lower triangle.
    pub fn strictly_lower_norm(&self) -> f64 {
        let n = self.n();
        let mut s = 0.0;
        for j in 0..n {
            for i in j + 1..n {
                s += self.0[(i, j)].norm_sqr();
            }
        }
        s.sqrt()
    }

    pub fn singular_values(&self) -> Vec<f64> {
        let mut sv: Vec<f64> = self.0.clone().svd(false, false).singular_values.iter().copied().collect();
        sv.sort_by(|a, b| b.total_cmp(a));
        sv
    }

    /// Largest singular value.
    pub fn operator_norm(&self) -> f64 {
        if self.0.iter().all(|z| *z == ZERO) {
            return 0.0;
        }
        self.singular_values()[0]
    }

    /// `tr(A) / n`, the normalized trace; equals 1 on the identity.
    pub fn normalized_trace(&self) -> C64 {
        self.0.trace() / self.n() as f64
    }

    /// Natural log of the Fuglede–Kadison determinant, `log|det T| / n`.
    /// Returns `-inf` for exactly singular input.
    pub fn log_fk_determinant(&self) -> f64 {
        let lu = self.0.clone().lu();
        let u = lu.u();
        let mut acc = 0.0;
        for i in 0..self.n() {
            let d = u[(i, i)].norm();
            if d == 0.0 {
                return f64::NEG_INFINITY;
            }
            acc += d.ln();
        }
        acc / self.n() as f64
    }

    /// Fuglede–Kadison determinant `(prod sigma_i)^(1/n) = |det T|^(1/n)`; zero when singular.
    pub fn fk_determinant(&self) -> f64 {
        self.log_fk_determinant().exp()
    }

    /// Entry `m - 1` holds `|T^m|^(1/m)` for `m = 1..=m_max`.
    ///
    /// Powers are formed from `T / |T|` and renormalized every step, so neither
    /// overflow nor underflow can occur before the final rescale.
    pub fn power_growth(&self, m_max: usize) -> Vec<f64> {
        let norm = self.operator_norm();
        if norm == 0.0 {
            return vec![0.0; m_max];
        }
        let s = &self.0 / C64::new(norm, 0.0);
        let mut p = DMatrix::<C64>::identity(self.n(), self.n());
        let mut log_scale = 0.0;
        let mut out = Vec::with_capacity(m_max);
        let mut dead = false;
        for m in 1..=m_max {
            if dead {
                out.push(0.0);
                continue;
            }
            p = &p * &s;
            let f = p.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if f == 0.0 {
                dead = true;
                out.push(0.0);
                continue;
            }
            p /= C64::new(f, 0.0);
            log_scale += f.ln();
            let op = ComplexMatrix::wrap(p.clone()).operator_norm();
            let g = ((op.ln() + log_scale) / m as f64).exp() * norm;
            out.push(g.min(norm));
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Conjugates by `u`: returns `u * self * u^*`.
    pub fn conjugate_by(&self, u: &ComplexMatrix) -> Self {
        Self(&u.0 * &self.0 * u.0.adjoint())
    }

    /// SHA-256 over `n` and the row-major entries as little-endian `f64` pairs.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.n() as u64).to_le_bytes());
        for z in self.row_major() {
            h.update(z.re.to_le_bytes());
            h.update(z.im.to_le_bytes());
        }
        hex::encode(h.finalize())
    }

    pub fn to_file(&self) -> MatrixFile {
        MatrixFile { n: self.n(), entries: self.row_major().into_iter().map(|z| [z.re, z.im]).collect() }
    }

    pub fn from_file(f: &MatrixFile) -> Result<Self> {
        Self::new(f.n, f.entries.iter().map(|&[re, im]| C64::new(re, im)).collect())
    }

    pub fn to_json(&self) -> Result<String> {
        crate::json::to_string(&self.to_file())
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let f: MatrixFile = serde_json::from_str(s)?;
        Self::from_file(&f)
    }
}

impl Serialize for ComplexMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_file().serialize(s)
    }
}

impl<'de> Deserialize<'de> for ComplexMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        Self::from_file(&MatrixFile::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: Self) -> ComplexMatrix {
        ComplexMatrix(&self.0 * &rhs.0)
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: Self) -> ComplexMatrix {
        ComplexMatrix(&self.0 + &rhs.0)
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: Self) -> ComplexMatrix {
        ComplexMatrix(&self.0 - &rhs.0)
    }
}
