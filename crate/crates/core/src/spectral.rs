//! The spectral measure of an ordering and the decomposition `T = N + Q`.
//!
//! Clusters are sorted by the minimal preimage of their representative under
//! the curve, and the Schur form is reordered to match. The leading Schur
//! projections then form the flag `P_T(psi([0, t]))`, flag differences give
//! `E({z})`, and every other projection in this module is a sum of flag
//! differences.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::brown::{measure_distance, PointMeasure};
use crate::curve::{CurveSpec, OrderingCurve};
use crate::dyadic::Dyadic;
use crate::error::{Error, Result};
use crate::grid::Square;
use crate::matrix::{ComplexMatrix, C64};
use crate::projection::Projection;
use crate::region::Region;
use crate::schur::{Cluster, SchurForm, Spectrum};

/// Clusters in curve order with their flag.
#[derive(Clone, Debug)]
pub struct SpectralTable {
    pub curve: OrderingCurve,
    pub spectrum: Spectrum,
    /// Clusters sorted by parameter.
    pub clusters: Vec<Cluster>,
    /// Minimal preimage of each cluster representative, strictly increasing.
    pub params: Vec<Dyadic>,
    /// Schur form with the clusters in table order.
    pub schur: SchurForm,
    /// `offsets[i]..offsets[i + 1]` are the Schur columns of cluster `i`.
    pub offsets: Vec<usize>,
    /// `flags[i]` is the projection onto the first `i + 1` clusters.
    pub flags: Vec<Projection>,
    /// `E({z_i}) = flags[i] - flags[i - 1]`.
    pub cluster_projs: Vec<Projection>,
    /// Level of the dyadic grid used by [`Self::dyadic_expectation`] when no level is given.
    pub grid_level: u32,
}

/// A subinterval of `[0, 1]` with dyadic ends.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ParamInterval {
    pub lo: Dyadic,
    pub hi: Dyadic,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl ParamInterval {
    /// `(lo, hi)` as an open subset of `[0, 1]`: it contains `0` when `lo = 0`
    /// and `1` when `hi = 1`.
    pub fn open(lo: Dyadic, hi: Dyadic) -> Result<Self> {
        if lo >= hi {
            return Err(Error::ParameterOutOfRange(format!("empty interval ({lo}, {hi})")));
        }
        Ok(ParamInterval { lo, hi, lo_closed: lo == Dyadic::ZERO, hi_closed: hi == Dyadic::ONE })
    }

    pub fn closed(lo: Dyadic, hi: Dyadic) -> Result<Self> {
        if lo > hi {
            return Err(Error::ParameterOutOfRange(format!("empty interval [{lo}, {hi}]")));
        }
        Ok(ParamInterval { lo, hi, lo_closed: true, hi_closed: true })
    }

    pub fn contains(&self, p: Dyadic) -> bool {
        let above = if self.lo_closed { p >= self.lo } else { p > self.lo };
        let below = if self.hi_closed { p <= self.hi } else { p < self.hi };
        above && below
    }

    /// Open relative to `[0, 1]`.
    pub fn is_open(&self) -> bool {
        self.lo < self.hi && self.lo_closed == (self.lo == Dyadic::ZERO) && self.hi_closed == (self.hi == Dyadic::ONE)
    }
}

impl SpectralTable {
    /// Table for `T` with the curve bound to the square of side `3|T|`.
    pub fn build(t: &ComplexMatrix, curve: CurveSpec) -> Result<Self> {
        let spectrum = Spectrum::of(t)?;
        let curve = curve.bind(Square::for_norm(spectrum.norm));
        Self::from_spectrum(spectrum, curve)
    }

    pub fn from_spectrum(spectrum: Spectrum, curve: OrderingCurve) -> Result<Self> {
        let raw: Vec<Dyadic> =
            spectrum.clusters.iter().map(|c| curve.min_preimage(c.value)).collect::<Result<_>>()?;
        let mut order: Vec<usize> = (0..raw.len()).collect();
        order.sort_by_key(|&i| raw[i]);
        if let Some(w) = order.windows(2).find(|w| raw[w[0]] == raw[w[1]]) {
            let (a, b) = (spectrum.clusters[w[0]].value, spectrum.clusters[w[1]].value);
            return Err(Error::CurveCollision(format!("clusters {a} and {b} share the parameter {}", raw[w[0]])));
        }
        let (schur, _) = spectrum.reorder_clusters(&raw);
        let clusters: Vec<Cluster> = order.iter().map(|&i| spectrum.clusters[i].clone()).collect();
        let params: Vec<Dyadic> = order.iter().map(|&i| raw[i]).collect();
        let mut offsets = vec![0];
        for c in &clusters {
            offsets.push(offsets.last().unwrap() + c.multiplicity);
        }
        let flags: Vec<Projection> = offsets[1..]
            .iter()
            .map(|&k| Projection { matrix: schur.leading_projection(k), rank: k })
            .collect();
        let n = spectrum.n();
        let cluster_projs = (0..flags.len())
            .map(|i| {
                let prev = if i == 0 { ComplexMatrix::zeros(n) } else { flags[i - 1].matrix.clone() };
                Projection { matrix: &flags[i].matrix - &prev, rank: clusters[i].multiplicity }
            })
            .collect();
        Ok(SpectralTable { curve, spectrum, clusters, params, schur, offsets, flags, cluster_projs, grid_level: 0 })
    }

    pub fn n(&self) -> usize {
        self.spectrum.n()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.spectrum.matrix
    }

    pub fn with_grid_level(mut self, level: u32) -> Self {
        self.grid_level = level;
        self
    }

    /// Flag projection `P_j` onto the first `j` clusters (`P_0 = 0`).
    fn flag(&self, j: usize) -> ComplexMatrix {
        if j == 0 {
            ComplexMatrix::zeros(self.n())
        } else {
            self.flags[j - 1].matrix.clone()
        }
    }

    /// `sum (P_hi - P_lo)` over cluster-count pairs.
    fn flag_sum(&self, pairs: &[(usize, usize)]) -> Projection {
        let n = self.n();
        let mut m = ComplexMatrix::zeros(n);
        let mut rank = 0;
        for &(lo, hi) in pairs {
            m = &m + &(&self.flag(hi) - &self.flag(lo));
            rank += self.offsets[hi] - self.offsets[lo];
        }
        Projection { matrix: m, rank }
    }

    /// Number of clusters with parameter `<= t` (`< t` when `strict`).
    fn count_below(&self, t: Dyadic, strict: bool) -> usize {
        self.params.partition_point(|&p| if strict { p < t } else { p <= t })
    }

    /// Cluster-count pair of `F(interval)`: `P(params < hi) - P(params <= lo)`,
    /// with the closed ends handled by inclusion.
    fn interval_pair(&self, iv: &ParamInterval) -> (usize, usize) {
        let lo = self.count_below(iv.lo, iv.lo_closed);
        let hi = self.count_below(iv.hi, !iv.hi_closed);
        (lo, hi.max(lo))
    }

    /// Which clusters lie in `region`.
    pub fn clusters_in(&self, region: &Region) -> Result<Vec<bool>> {
        self.clusters.iter().map(|c| region.decide_cluster(c.value, &c.members)).collect()
    }

    /// `mu(intervals)`: the mass of clusters whose parameter lies in the union.
    pub fn pullback_mass(&self, intervals: &[ParamInterval]) -> f64 {
        let count: usize = self
            .clusters
            .iter()
            .zip(&self.params)
            .filter(|(_, &p)| intervals.iter().any(|iv| iv.contains(p)))
            .map(|(c, _)| c.multiplicity)
            .sum();
        count as f64 / self.n() as f64
    }

    /// `P_T(psi([0, t]))`: the flag projection onto the clusters with parameter `<= t`.
    pub fn flag_projection(&self, t: Dyadic) -> Projection {
        self.flag_sum(&[(0, self.count_below(t, false))])
    }

    /// `F(v)` for an open subset `v` of `[0, 1]` given by disjoint open components.
    pub fn open_set_projection(&self, v: &[ParamInterval]) -> Result<Projection> {
        let mut comps = v.to_vec();
        if let Some(bad) = comps.iter().find(|c| !c.is_open()) {
            return Err(Error::ParameterOutOfRange(format!("({}, {}) is not an open interval of [0, 1]", bad.lo, bad.hi)));
        }
        comps.sort_by_key(|c| c.lo);
        if let Some(w) = comps.windows(2).find(|w| w[0].hi > w[1].lo) {
            return Err(Error::OverlappingComponents(format!(
                "({}, {}) and ({}, {})",
                w[0].lo, w[0].hi, w[1].lo, w[1].hi
            )));
        }
        let pairs: Vec<(usize, usize)> = comps.iter().map(|c| self.interval_pair(c)).collect();
        Ok(self.flag_sum(&pairs))
    }

    /// Open cover of the given cluster parameters by intervals of radius
    /// `2^-level`, merged into disjoint components, as cluster-count pairs with
    /// empty pieces dropped and touching pieces joined.
    fn cover_pairs(&self, selected: &[usize], level: u32) -> Vec<(usize, usize)> {
        let bits = 2 * self.curve.depth;
        let w = bits.max(level);
        let one = 1u128 << w;
        let half_width = 1u128 << (w - level);
        // Components as [lo, hi] in units of 2^-w with open ends except at 0 and 1.
        let mut comps: Vec<(u128, u128)> = Vec::new();
        for &i in selected {
            let s = self.params[i].scaled_to(bits) << (w - bits);
            let lo = s.saturating_sub(half_width);
            let hi = (s + half_width).min(one);
            match comps.last_mut() {
                Some(last) if last.1 > lo => last.1 = last.1.max(hi),
                _ => comps.push((lo, hi)),
            }
        }
        let scaled: Vec<u128> = self.params.iter().map(|p| p.scaled_to(bits) << (w - bits)).collect();
        let mut pairs: Vec<(usize, usize)> = Vec::new();
        for (lo, hi) in comps {
            let a = if lo == 0 { 0 } else { scaled.partition_point(|&p| p <= lo) };
            let b = if hi == one { scaled.len() } else { scaled.partition_point(|&p| p < hi) };
            if a >= b {
                continue;
            }
            match pairs.last_mut() {
                Some(last) if last.1 == a => last.1 = b,
                _ => pairs.push((a, b)),
            }
        }
        pairs
    }

    /// `E(B)`: the value of `F` on open dyadic covers of the parameters of the
    /// clusters in `B`, refined until three successive levels agree and the
    /// cover radius is below the smallest parameter gap. Also returns that level.
    pub fn spectral_projection_with_level(&self, region: &Region) -> Result<(Projection, u32)> {
        let inside = self.clusters_in(region)?;
        let selected: Vec<usize> = (0..inside.len()).filter(|&i| inside[i]).collect();
        if selected.is_empty() {
            return Ok((Projection::zero(self.n()), 0));
        }
        let bits = 2 * self.curve.depth;
        let gap = self
            .params
            .windows(2)
            .map(|w| w[1].scaled_to(bits) - w[0].scaled_to(bits))
            .min()
            .unwrap_or(u128::MAX);
        let mut history: Vec<Vec<(usize, usize)>> = Vec::new();
        for level in 1..=bits + 1 {
            history.push(self.cover_pairs(&selected, level));
            let stable = history.len() >= 3 && history[history.len() - 3..].windows(2).all(|w| w[0] == w[1]);
            let fine = level >= bits || (1u128 << (bits - level)) <= gap;
            if stable && fine {
                return Ok((self.flag_sum(history.last().unwrap()), level));
            }
        }
        unreachable!("covers separate parameters at resolution 2^-(2 depth + 1)")
    }

    pub fn spectral_projection(&self, region: &Region) -> Result<Projection> {
        Ok(self.spectral_projection_with_level(region)?.0)
    }

    /// `sum_{z in B} E({z})`, the direct form of `E(B)`.
    pub fn atom_sum(&self, selected: &[bool]) -> Projection {
        let n = self.n();
        let mut m = ComplexMatrix::zeros(n);
        let mut rank = 0;
        for (e, _) in self.cluster_projs.iter().zip(selected).filter(|p| *p.1) {
            m = &m + &e.matrix;
            rank += e.rank;
        }
        Projection { matrix: m, rank }
    }

    /// Cluster indices grouped by the level-`n` cell of their representative, in cell order.
    pub fn cell_groups(&self, level: u32) -> Vec<(u64, Vec<usize>)> {
        let mut groups: std::collections::BTreeMap<u64, Vec<usize>> = Default::default();
        for (i, c) in self.clusters.iter().enumerate() {
            let cell = self.curve.square.cell_of(c.value, level).expect("spectrum lies in the square");
            groups.entry(Square::cell_index(cell, level)).or_default().push(i);
        }
        groups.into_iter().collect()
    }

    /// `E_{D_n}(A) = sum_k tau(E_k A E_k) / tau(E_k) E_k` over the level-`n` cells
    /// `A_{n,k}` with `E_k = E(A_{n,k}) != 0`.
    pub fn dyadic_expectation_of(&self, a: &ComplexMatrix, level: u32) -> ComplexMatrix {
        let n = self.n();
        let mut out = ComplexMatrix::zeros(n);
        for (_, members) in self.cell_groups(level) {
            let mut sel = vec![false; self.clusters.len()];
            members.iter().for_each(|&i| sel[i] = true);
            let e = self.atom_sum(&sel);
            // tau(E A E) = tau(E A) for a projection E.
            let mut tr = C64::new(0.0, 0.0);
            for i in 0..n {
                for j in 0..n {
                    tr += e.matrix.get(i, j) * a.get(j, i);
                }
            }
            out = &out + &e.matrix.scale(tr / e.rank as f64);
        }
        out
    }

    pub fn dyadic_expectation(&self, level: u32) -> ComplexMatrix {
        self.dyadic_expectation_of(self.matrix(), level)
    }

    /// `sum_z z E({z})`: the limit of [`Self::dyadic_expectation`] once every cell
    /// holds at most one cluster.
    pub fn normal_part(&self) -> ComplexMatrix {
        let mut n = ComplexMatrix::zeros(self.n());
        for (c, e) in self.clusters.iter().zip(&self.cluster_projs) {
            n = &n + &e.matrix.scale(c.value);
        }
        n
    }

    /// `E_{D'}(T) = sum_z E({z}) T E({z})`.
    pub fn block_diagonal(&self) -> ComplexMatrix {
        block_diagonal_expectation(self.matrix(), &self.cluster_projs)
    }

    /// Level at which every cell holds at most one cluster (capped at 30).
    pub fn separating_level(&self) -> u32 {
        (0..=30).find(|&l| self.cell_groups(l).len() == self.clusters.len()).unwrap_or(30)
    }

    pub fn to_file(&self) -> TableFile {
        TableFile {
            curve: self.curve.spec(),
            radius: self.curve.square.radius,
            grid_level: self.grid_level,
            clusters: self
                .clusters
                .iter()
                .zip(&self.params)
                .zip(&self.offsets[1..])
                .map(|((c, &param), &flag_rank)| ClusterEntry {
                    value: [c.value.re, c.value.im],
                    multiplicity: c.multiplicity,
                    param,
                    flag_rank,
                })
                .collect(),
        }
    }
}

/// `sum_i P_i T P_i`.
pub fn block_diagonal_expectation(t: &ComplexMatrix, projections: &[Projection]) -> ComplexMatrix {
    let mut out = ComplexMatrix::zeros(t.n());
    for p in projections {
        out = &out + &(&(&p.matrix * t) * &p.matrix);
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterEntry {
    pub value: [f64; 2],
    pub multiplicity: usize,
    pub param: Dyadic,
    pub flag_rank: usize,
}

/// `table.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableFile {
    pub curve: CurveSpec,
    pub radius: f64,
    pub grid_level: u32,
    pub clusters: Vec<ClusterEntry>,
}

/// Headline numbers of a decomposition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecompositionSummary {
    /// `|N N^* - N^* N|_F / |N|_F^2` (0 for `N = 0`).
    pub normality: f64,
    /// Matching distance between the counting measures of `N` and `T`.
    pub measure_distance: f64,
    /// Largest modulus on the diagonal of `U^* Q U` in the table's Schur basis.
    pub q_radius: f64,
    /// Frobenius norm of the strictly lower part of `U^* Q U`.
    pub q_lower: f64,
}

#[derive(Clone, Debug)]
pub struct Decomposition {
    pub t: ComplexMatrix,
    pub n: ComplexMatrix,
    pub q: ComplexMatrix,
    pub table: SpectralTable,
    pub summary: DecompositionSummary,
}

/// `N = sum_z z E({z})` and `Q = T - N` for the ordering given by `curve`.
pub fn decompose(t: &ComplexMatrix, curve: CurveSpec) -> Result<Decomposition> {
    decompose_table(SpectralTable::build(t, curve)?)
}

pub fn decompose_table(table: SpectralTable) -> Result<Decomposition> {
    let t = table.matrix().clone();
    let n = table.normal_part();
    let q = &t - &n;
    let nf = n.frobenius_norm();
    let normality = if nf == 0.0 { 0.0 } else { n.commutator(&n.adjoint()).frobenius_norm() / (nf * nf) };
    let mn = PointMeasure::from_spectrum(&Spectrum::of(&n)?);
    let mt = PointMeasure::from_spectrum(&table.spectrum);
    let u = &table.schur.unitary;
    let qs = &(&u.adjoint() * &q) * u;
    let q_radius = qs.diagonal().iter().map(|z| z.norm()).fold(0.0, f64::max);
    let summary = DecompositionSummary {
        normality,
        measure_distance: measure_distance(&mn, &mt),
        q_radius,
        q_lower: qs.strictly_lower_norm(),
    };
    Ok(Decomposition { t, n, q, table, summary })
}

impl Decomposition {
    /// Eigenvalues of `Q` read off the diagonal of `U^* Q U`, which is upper
    /// triangular up to rounding in the table's Schur basis.
    pub fn q_eigenvalues(&self) -> Vec<C64> {
        let u = &self.table.schur.unitary;
        (&(&u.adjoint() * &self.q) * u).diagonal()
    }

    /// Writes `T.json`, `N.json`, `Q.json` and `table.json` into `dir`.
    pub fn write_bundle(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("T.json"), self.t.to_json()?)?;
        fs::write(dir.join("N.json"), self.n.to_json()?)?;
        fs::write(dir.join("Q.json"), self.q.to_json()?)?;
        fs::write(dir.join("table.json"), crate::json::to_string(&self.table.to_file())?)?;
        Ok(())
    }
}
