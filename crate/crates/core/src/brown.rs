//! Brown measures at matrix scale.
//!
//! For an `n x n` matrix the Brown measure is the eigenvalue counting measure
//! `(1/n) sum delta_{lambda_i}`. It is also `(1 / 2pi)` times the Laplacian of the
//! potential `lambda -> tau(log|T - lambda|)`; [`brown_density_grid`] evaluates
//! a regularized version of that potential on a grid and differentiates it
//! numerically, giving an independent route to the same measure.

use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::Serialize;

use crate::error::Result;
use crate::grid::Square;
use crate::json::format_f64;
use crate::matrix::{ComplexMatrix, C64};
use crate::region::Region;
use crate::schur::Spectrum;

/// One atom: a cluster location carrying `count / total` of the mass.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Atom {
    pub location: C64,
    pub weight: f64,
    pub count: usize,
}

/// Finite atomic probability measure whose weights are multiples of `1 / total`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PointMeasure {
    pub atoms: Vec<Atom>,
    pub total: usize,
}

impl PointMeasure {
    /// Atoms from `(location, count)` pairs.
    pub fn from_counts(counts: impl IntoIterator<Item = (C64, usize)>) -> Self {
        let pairs: Vec<(C64, usize)> = counts.into_iter().filter(|&(_, c)| c > 0).collect();
        let total: usize = pairs.iter().map(|p| p.1).sum();
        let atoms = pairs
            .into_iter()
            .map(|(location, count)| Atom { location, weight: count as f64 / total as f64, count })
            .collect();
        PointMeasure { atoms, total }
    }

    pub fn dirac(z: C64) -> Self {
        Self::from_counts([(z, 1)])
    }

    pub fn from_spectrum(spec: &Spectrum) -> Self {
        Self::from_counts(spec.clusters.iter().map(|c| (c.value, c.multiplicity)))
    }

    pub fn total_weight(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight).sum()
    }

    pub fn shifted(&self, alpha: C64) -> Self {
        Self::from_counts(self.atoms.iter().map(|a| (a.location + alpha, a.count)))
    }

    /// `re,im,weight` rows after a header line, 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("re,im,weight\n");
        for a in &self.atoms {
            let _ = writeln!(s, "{},{},{}", format_f64(a.location.re), format_f64(a.location.im), format_f64(a.weight));
        }
        s
    }
}

/// Eigenvalue counting measure: one atom per eigenvalue cluster, weight
/// multiplicity / n.
pub fn empirical_brown(t: &ComplexMatrix) -> Result<PointMeasure> {
    Ok(PointMeasure::from_spectrum(&Spectrum::of(t)?))
}

/// Mass of the atoms lying in `region`.
pub fn region_mass(m: &PointMeasure, region: &Region) -> f64 {
    region_count(m, region) as f64 / m.total.max(1) as f64
}

/// Number of eigenvalues (with multiplicity) in `region`.
pub fn region_count(m: &PointMeasure, region: &Region) -> usize {
    m.atoms.iter().filter(|a| region.contains(a.location)).map(|a| a.count).sum()
}

/// Bottleneck distance between two equally sized point lists: the least `r`
/// such that some bijection moves no point by more than `r`.
pub fn multiset_distance(a: &[C64], b: &[C64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    bottleneck(a.len(), |i, j| Some((a[i] - b[j]).norm()))
}

/// Optimal-matching distance between atom sets: the least `r` such that a
/// bijection between atoms pairs equal weights at distance at most `r`.
/// Infinite when the weight profiles differ.
pub fn measure_distance(m1: &PointMeasure, m2: &PointMeasure) -> f64 {
    if m1.atoms.len() != m2.atoms.len() {
        return f64::INFINITY;
    }
    let same_weight = |w1: f64, w2: f64| (w1 - w2).abs() <= 1e-12;
    bottleneck(m1.atoms.len(), |i, j| {
        let (x, y) = (&m1.atoms[i], &m2.atoms[j]);
        same_weight(x.weight, y.weight).then(|| (x.location - y.location).norm())
    })
}

fn bottleneck(n: usize, cost: impl Fn(usize, usize) -> Option<f64>) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let costs: Vec<Vec<Option<f64>>> = (0..n).map(|i| (0..n).map(|j| cost(i, j)).collect()).collect();
    let mut candidates: Vec<f64> = costs.iter().flatten().flatten().copied().collect();
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();
    let feasible = |r: f64| perfect_matching(n, |i, j| costs[i][j].is_some_and(|c| c <= r));
    let (mut lo, mut hi) = (0usize, candidates.len());
    if hi == 0 || !feasible(candidates[hi - 1]) {
        return f64::INFINITY;
    }
    hi -= 1;
    while lo < hi {
        let mid = (lo + hi) / 2;
        if feasible(candidates[mid]) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    candidates[lo]
}

/// Kuhn's augmenting-path bipartite matching.
fn perfect_matching(n: usize, edge: impl Fn(usize, usize) -> bool) -> bool {
    fn augment(i: usize, n: usize, edge: &dyn Fn(usize, usize) -> bool, seen: &mut [bool], owner: &mut [usize]) -> bool {
        for j in 0..n {
            if edge(i, j) && !seen[j] {
                seen[j] = true;
                if owner[j] == usize::MAX || augment(owner[j], n, edge, seen, owner) {
                    owner[j] = i;
                    return true;
                }
            }
        }
        false
    }
    let mut owner = vec![usize::MAX; n];
    (0..n).all(|i| augment(i, n, &edge, &mut vec![false; n], &mut owner))
}

/// `(1/2) tau(log((T - lambda)^*(T - lambda) + eps^2))` from the singular values
/// of `T - lambda`. At `eps = 0` this is the log of the Fuglede–Kadison
/// determinant of `T - lambda`, and `-inf` when a singular value vanishes.
pub fn log_potential(t: &ComplexMatrix, lambda: C64, eps: f64) -> f64 {
    let sv = t.shift(lambda).singular_values();
    let n = sv.len() as f64;
    if eps == 0.0 && sv.contains(&0.0) {
        return f64::NEG_INFINITY;
    }
    sv.iter().map(|s| (s * s + eps * eps).ln()).sum::<f64>() / (2.0 * n)
}

/// Same quantity as [`log_potential`] computed from an upper triangular `R`
/// unitarily similar to `T`, by a Cholesky factorization of
/// `(R - lambda)^*(R - lambda) + eps^2`. Buffers are caller-owned.
struct TriangularPotential {
    n: usize,
    re: Vec<f64>,
    im: Vec<f64>,
    m_re: Vec<f64>,
    m_im: Vec<f64>,
}

impl TriangularPotential {
    fn new(r: &ComplexMatrix) -> Self {
        let n = r.n();
        let mut re = vec![0.0; n * n];
        let mut im = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let z = r.get(i, j);
                re[i * n + j] = z.re;
                im[i * n + j] = z.im;
            }
        }
        TriangularPotential { n, re, im, m_re: vec![0.0; n * n], m_im: vec![0.0; n * n] }
    }

    fn eval(&mut self, lambda: C64, eps: f64) -> f64 {
        let n = self.n;
        let (a_re, a_im) = (&mut self.re, &mut self.im);
        for i in 0..n {
            a_re[i * n + i] -= lambda.re;
            a_im[i * n + i] -= lambda.im;
        }
        // Upper triangle of M = A^* A + eps^2 I, row-major: M_ij = sum_{k <= i} conj(A_ki) A_kj.
        let (m_re, m_im) = (&mut self.m_re, &mut self.m_im);
        m_re.iter_mut().for_each(|x| *x = 0.0);
        m_im.iter_mut().for_each(|x| *x = 0.0);
        for k in 0..n {
            let row = k * n;
            for i in k..n {
                let (xr, xi) = (a_re[row + i], -a_im[row + i]);
                let out = i * n;
                for j in i..n {
                    let (yr, yi) = (a_re[row + j], a_im[row + j]);
                    m_re[out + j] += xr * yr - xi * yi;
                    m_im[out + j] += xr * yi + xi * yr;
                }
            }
        }
        for i in 0..n {
            m_re[i * n + i] += eps * eps;
            a_re[i * n + i] += lambda.re;
            a_im[i * n + i] += lambda.im;
        }
        // In-place upper Cholesky M = U^* U.
        let mut logdet = 0.0;
        for i in 0..n {
            let d = m_re[i * n + i];
            if d <= 0.0 {
                return f64::NEG_INFINITY;
            }
            let piv = d.sqrt();
            logdet += d.ln();
            let inv = 1.0 / piv;
            for j in i + 1..n {
                m_re[i * n + j] *= inv;
                m_im[i * n + j] *= inv;
            }
            for k in i + 1..n {
                let (ur, ui) = (m_re[i * n + k], -m_im[i * n + k]);
                for j in k..n {
                    let (vr, vi) = (m_re[i * n + j], m_im[i * n + j]);
                    m_re[k * n + j] -= ur * vr - ui * vi;
                    m_im[k * n + j] -= ur * vi + ui * vr;
                }
            }
        }
        logdet / (2.0 * n as f64)
    }
}

/// Cell masses of the numerical Brown density on a `g x g` grid over the square.
#[derive(Clone, Debug, Serialize)]
pub struct DensityGrid {
    pub square: Square,
    pub resolution: usize,
    pub eps: f64,
    /// Row-major, row 0 at the top, clamped at zero.
    pub masses: Vec<f64>,
    /// The same cells before clamping.
    pub raw: Vec<f64>,
    pub min_before_clamp: f64,
    pub negative_mass: f64,
}

pub const DEFAULT_GRID: usize = 256;

/// Default regularization `1e-3 * max(1, |T|)`.
pub fn default_eps(norm: f64) -> f64 {
    1e-3 * norm.max(1.0)
}

/// Five-point Laplacian of the regularized potential at cell centres of the
/// square of side `3|T|`, divided by `2 pi`. Each cell mass is reported after
/// clamping at zero; the most negative pre-clamp value and the clamped mass
/// are kept on the grid.
pub fn brown_density_grid(t: &ComplexMatrix, g: usize, eps: f64) -> Result<DensityGrid> {
    let spec = Spectrum::of(t)?;
    Ok(density_grid_from(&spec, Square::for_norm(spec.norm), g, eps))
}

pub(crate) fn density_grid_from(spec: &Spectrum, square: Square, g: usize, eps: f64) -> DensityGrid {
    assert!(g >= 1 && eps > 0.0);
    let h = square.side() / g as f64;
    let lo = -square.half_side();
    let mut pot = TriangularPotential::new(&spec.schur.triangular);
    // Potential at centres of a (g + 2) x (g + 2) grid padded by one cell;
    // index (a, b) has x = lo + (a - 0.5) h, y = lo + (b - 0.5) h.
    let w = g + 2;
    let mut phi = vec![0.0; w * w];
    for b in 0..w {
        for a in 0..w {
            let z = C64::new(lo + (a as f64 - 0.5) * h, lo + (b as f64 - 0.5) * h);
            phi[b * w + a] = pot.eval(z, eps);
        }
    }
    let mut masses = vec![0.0; g * g];
    let mut raw = vec![0.0; g * g];
    let mut min_before_clamp = f64::INFINITY;
    let mut negative_mass = 0.0;
    for iy in 0..g {
        for ix in 0..g {
            let (a, b) = (ix + 1, iy + 1);
            let lap = phi[b * w + a + 1] + phi[b * w + a - 1] + phi[(b + 1) * w + a] + phi[(b - 1) * w + a]
                - 4.0 * phi[b * w + a];
            let m = lap / (2.0 * PI);
            min_before_clamp = min_before_clamp.min(m);
            if m < 0.0 {
                negative_mass += m;
            }
            masses[(g - 1 - iy) * g + ix] = m.max(0.0);
            raw[(g - 1 - iy) * g + ix] = m;
        }
    }
    DensityGrid { square, resolution: g, eps, masses, raw, min_before_clamp, negative_mass }
}

impl DensityGrid {
    /// Sum of the pre-clamp masses: the discrete flux of the potential
    /// gradient through the boundary of the square.
    pub fn total_mass(&self) -> f64 {
        self.raw.iter().sum()
    }

    /// Sum after clamping; exceeds [`Self::total_mass`] by `-negative_mass`.
    pub fn clamped_total(&self) -> f64 {
        self.masses.iter().sum()
    }

    /// Pre-clamp masses aggregated onto the level-`level` dyadic cells,
    /// indexed `k - 1`. Negative lobes next to an eigenvalue cancel inside
    /// the block holding it.
    pub fn cell_masses(&self, level: u32) -> Vec<f64> {
        let side = 1usize << level;
        assert!(self.resolution.is_multiple_of(side), "grid resolution must be a multiple of 2^level");
        let block = self.resolution / side;
        let mut out = vec![0.0; side * side];
        for row in 0..self.resolution {
            for col in 0..self.resolution {
                out[(row / block) * side + col / block] += self.raw[row * self.resolution + col];
            }
        }
        out
    }

    /// One CSV line per grid row, top row first.
    pub fn to_csv(&self) -> String {
        let g = self.resolution;
        let mut s = String::with_capacity(g * g * 24);
        for row in 0..g {
            let line: Vec<String> = self.masses[row * g..(row + 1) * g].iter().map(|&m| format_f64(m)).collect();
            s.push_str(&line.join(","));
            s.push('\n');
        }
        s
    }

    /// Binary 8-bit PGM, intensities normalized to the largest mass.
    pub fn to_pgm(&self) -> Vec<u8> {
        let g = self.resolution;
        let max = self.masses.iter().copied().fold(0.0, f64::max);
        let mut out = format!("P5\n{g} {g}\n255\n").into_bytes();
        out.extend(self.masses.iter().map(|&m| if max > 0.0 { (m / max * 255.0).round() as u8 } else { 0 }));
        out
    }
}

/// Level-`level` cell masses of a point measure, indexed `k - 1`.
pub fn counting_cell_masses(m: &PointMeasure, square: Square, level: u32) -> Vec<f64> {
    let mut out = vec![0.0; 1 << (2 * level)];
    for a in &m.atoms {
        if let Some(c) = square.cell_of(a.location, level) {
            out[(Square::cell_index(c, level) - 1) as usize] += a.weight;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{ONE, ZERO};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn counting_measure_examples() {
        let i = c(0.0, 1.0);
        let m = empirical_brown(&ComplexMatrix::from_diagonal(&[ONE, i, -ONE, -i])).unwrap();
        assert_eq!(m.atoms.len(), 4);
        assert!(m.atoms.iter().all(|a| a.weight == 0.25));

        let m = empirical_brown(&ComplexMatrix::jordan(ZERO, 3)).unwrap();
        assert_eq!(m, PointMeasure::from_counts([(ZERO, 3)]));

        let t = ComplexMatrix::from_real_rows(&[&[1.0, 1.0], &[0.0, 2.0]]).unwrap();
        let m = empirical_brown(&t).unwrap();
        assert_eq!(m, PointMeasure::from_counts([(c(1.0, 0.0), 1), (c(2.0, 0.0), 1)]));
    }

    #[test]
    fn potential_examples() {
        let one = ComplexMatrix::identity(1);
        assert_eq!(log_potential(&one, ZERO, 0.0), 0.0);
        assert!((log_potential(&one, ZERO, 1.0) - 0.5 * 2f64.ln()).abs() < 1e-15);
        let d = ComplexMatrix::from_diagonal(&[c(1.0, 0.0), c(2.0, 0.0)]);
        assert!((log_potential(&d, ZERO, 0.0) - d.fk_determinant().ln()).abs() < 1e-15);
        assert_eq!(log_potential(&ComplexMatrix::jordan(ZERO, 2), ZERO, 0.0), f64::NEG_INFINITY);
    }

    #[test]
    fn triangular_route_matches_svd_route() {
        let t = ComplexMatrix::from_fn(5, |i, j| c(((i * 7 + j * 3) % 5) as f64 - 2.0, ((i + 2 * j) % 3) as f64 * 0.5));
        let spec = Spectrum::of(&t).unwrap();
        let mut pot = TriangularPotential::new(&spec.schur.triangular);
        for (lam, eps) in [(c(0.3, -0.2), 1e-3), (c(2.0, 1.0), 0.5), (c(-1.0, 0.0), 1e-6)] {
            let a = pot.eval(lam, eps);
            let b = log_potential(&t, lam, eps);
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn region_mass_examples() {
        let m = PointMeasure::from_counts([(c(1.0, 0.0), 1), (c(2.0, 0.0), 1)]);
        assert_eq!(region_mass(&m, &Region::disk(c(1.0, 0.0), 0.1)), 0.5);
        assert_eq!(region_mass(&m, &Region::Everything), 1.0);
        assert_eq!(region_mass(&m, &Region::Nothing), 0.0);
    }

    #[test]
    fn distance_examples() {
        let a = PointMeasure::from_counts([(c(1.0, 0.0), 1), (c(2.0, 0.0), 1)]);
        let b = PointMeasure::from_counts([(c(2.0, 0.0), 1), (c(1.0, 0.0), 1)]);
        assert_eq!(measure_distance(&a, &a), 0.0);
        assert_eq!(measure_distance(&a, &b), 0.0);
        assert_eq!(measure_distance(&a, &PointMeasure::dirac(c(1.0, 0.0))), f64::INFINITY);
        let shifted = a.shifted(c(0.0, 0.1));
        assert!((measure_distance(&a, &shifted) - 0.1).abs() < 1e-15);
        assert_eq!(multiset_distance(&[ONE, ZERO], &[ZERO, ONE]), 0.0);
    }

    #[test]
    fn zero_matrix_density_sits_at_origin() {
        let grid = brown_density_grid(&ComplexMatrix::zeros(4), 64, 1e-3).unwrap();
        let g = grid.resolution;
        let centre: f64 = [(g / 2 - 1, g / 2 - 1), (g / 2 - 1, g / 2), (g / 2, g / 2 - 1), (g / 2, g / 2)]
            .iter()
            .map(|&(r, col)| grid.masses[r * g + col])
            .sum();
        assert!(centre >= 0.9, "{centre}");
        assert!(grid.total_mass() <= 1.02);
        assert!(grid.negative_mass <= 0.0 && grid.clamped_total() >= grid.total_mass());
    }

    #[test]
    fn roots_of_unity_density_on_circle() {
        let d: Vec<C64> = (0..8).map(|k| C64::from_polar(1.0, std::f64::consts::TAU * k as f64 / 8.0)).collect();
        let t = ComplexMatrix::from_diagonal(&d);
        let grid = brown_density_grid(&t, 64, 1e-3).unwrap();
        let g = grid.resolution;
        let h = grid.square.side() / g as f64;
        let mut near = 0.0;
        for row in 0..g {
            for col in 0..g {
                let z = grid.square.from_unit((col as f64 + 0.5) / g as f64, 1.0 - (row as f64 + 0.5) / g as f64);
                if (z.norm() - 1.0).abs() <= 1.5 * h {
                    near += grid.masses[row * g + col];
                }
            }
        }
        assert!(near >= 0.8, "{near}");
        let total = grid.total_mass();
        assert!((0.9..=1.02).contains(&total), "{total}");
    }

    #[test]
    fn csv_and_pgm_shapes() {
        let m = PointMeasure::dirac(c(0.5, -0.25));
        assert_eq!(m.to_csv().lines().count(), 2);
        let grid = brown_density_grid(&ComplexMatrix::identity(2), 16, 1e-3).unwrap();
        assert_eq!(grid.to_csv().lines().count(), 16);
        let pgm = grid.to_pgm();
        assert!(pgm.starts_with(b"P5\n16 16\n255\n"));
        assert_eq!(pgm.len(), b"P5\n16 16\n255\n".len() + 256);
    }
}
