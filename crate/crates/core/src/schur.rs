//! Complex Schur forms, eigenvalue clustering and reordering by adjacent swaps.

use std::cmp::Ordering;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::matrix::{ComplexMatrix, C64, ONE, ZERO};

/// Shifted-QR sweeps allowed per unit of dimension.
pub const SWEEPS_PER_DIM: usize = 100;

/// `T = U R U^*` with `U` unitary and `R` upper triangular.
#[derive(Clone, Debug)]
pub struct SchurForm {
    pub unitary: ComplexMatrix,
    pub triangular: ComplexMatrix,
    /// Eigenvalues in the order they appear on the diagonal of `R`.
    pub diag_order: Vec<C64>,
}

/// Swaps performed by a reordering, plus the swaps refused because the two
/// eigenvalues were within the clustering threshold.
#[derive(Clone, Debug, Default)]
pub struct ReorderReport {
    pub swaps: usize,
    pub skipped: Vec<(usize, C64, C64)>,
}

/// Diagonal entries within `1e-8 * max(1, |T|)` are one spectral point.
pub fn clustering_threshold(norm: f64) -> f64 {
    1e-8 * norm.max(1.0)
}

/// Plane rotation `[[c, s], [-conj(s), c]]` with `c` real.
#[derive(Clone, Copy, Debug)]
struct Rotation {
    c: f64,
    s: C64,
}

impl Rotation {
    /// Rotation mapping `(x, y)` to `(r, 0)`.
    fn zeroing(x: C64, y: C64) -> Self {
        let ax = x.norm();
        if y == ZERO {
            return Rotation { c: 1.0, s: ZERO };
        }
        if ax == 0.0 {
            return Rotation { c: 0.0, s: y.conj() / y.norm() };
        }
        let r = ax.hypot(y.norm());
        Rotation { c: ax / r, s: (x / ax) * y.conj() / r }
    }

    /// Rows `k`, `k + 1` of `m`, columns `cols`: `m <- G m`.
    fn apply_left(&self, m: &mut DMatrix<C64>, k: usize, cols: std::ops::Range<usize>) {
        for j in cols {
            let a = m[(k, j)];
            let b = m[(k + 1, j)];
            m[(k, j)] = a * self.c + self.s * b;
            m[(k + 1, j)] = -self.s.conj() * a + b * self.c;
        }
    }

    /// Columns `k`, `k + 1` of `m`, rows `rows`: `m <- m G^*`.
    fn apply_right(&self, m: &mut DMatrix<C64>, k: usize, rows: std::ops::Range<usize>) {
        for i in rows {
            let a = m[(i, k)];
            let b = m[(i, k + 1)];
            m[(i, k)] = a * self.c + b * self.s.conj();
            m[(i, k + 1)] = -a * self.s + b * self.c;
        }
    }
}

/// Householder reduction to upper Hessenberg form, accumulating into `z`.
/// Columns that are already reduced are left untouched, so triangular input
/// passes through exactly.
fn hessenberg(h: &mut DMatrix<C64>, z: &mut DMatrix<C64>) {
    let n = h.nrows();
    if n < 3 {
        return;
    }
    for k in 0..n - 2 {
        let tail: f64 = (k + 2..n).map(|i| h[(i, k)].norm_sqr()).sum();
        if tail == 0.0 {
            continue;
        }
        let x0 = h[(k + 1, k)];
        let xnorm = (tail + x0.norm_sqr()).sqrt();
        let phase = if x0 == ZERO { ONE } else { x0 / x0.norm() };
        let alpha = -phase * xnorm;
        let mut v: Vec<C64> = (k + 1..n).map(|i| h[(i, k)]).collect();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|c| c.norm_sqr()).sum();
        let beta = 2.0 / vnorm2;

        // h <- (I - beta v v^*) h
        for j in 0..n {
            let mut dot = ZERO;
            for (idx, vi) in v.iter().enumerate() {
                dot += vi.conj() * h[(k + 1 + idx, j)];
            }
            let f = dot * beta;
            for (idx, vi) in v.iter().enumerate() {
                h[(k + 1 + idx, j)] -= vi * f;
            }
        }
        // h <- h (I - beta v v^*), z likewise
        for m in [&mut *h, &mut *z] {
            for i in 0..n {
                let mut dot = ZERO;
                for (idx, vi) in v.iter().enumerate() {
                    dot += m[(i, k + 1 + idx)] * vi;
                }
                let f = dot * beta;
                for (idx, vi) in v.iter().enumerate() {
                    m[(i, k + 1 + idx)] -= f * vi.conj();
                }
            }
        }
        h[(k + 1, k)] = alpha;
        for i in k + 2..n {
            h[(i, k)] = ZERO;
        }
    }
}

/// Eigenvalue of the trailing 2x2 block `[[a, b], [c, d]]` closest to `d`.
fn wilkinson_shift(a: C64, b: C64, c: C64, d: C64) -> C64 {
    let half = (a - d) * 0.5;
    let disc = (half * half + b * c).sqrt();
    let mean = (a + d) * 0.5;
    let l1 = mean + disc;
    let l2 = mean - disc;
    if (l1 - d).norm() <= (l2 - d).norm() {
        l1
    } else {
        l2
    }
}

/// Complex Schur form by Hessenberg reduction and single-shift QR with
/// Wilkinson shifts. Every tenth iteration without deflation uses an
/// exceptional shift; both rules are deterministic.
pub fn schur_form(t: &ComplexMatrix) -> Result<SchurForm> {
    let n = t.n();
    let mut h = t.as_dmatrix().clone();
    let mut z = DMatrix::<C64>::identity(n, n);
    hessenberg(&mut h, &mut z);

    let cap = SWEEPS_PER_DIM * n;
    let mut total = 0usize;
    let mut since_deflation = 0usize;
    let eps = f64::EPSILON;
    let tiny = f64::MIN_POSITIVE / eps;
    let mut hi = n.saturating_sub(1);

    while hi > 0 {
        let mut lo = hi;
        while lo > 0 {
            let sub = h[(lo, lo - 1)].norm();
            let mut scale = h[(lo, lo)].norm() + h[(lo - 1, lo - 1)].norm();
            if scale == 0.0 {
                scale = (lo.saturating_sub(1)..=(lo + 1).min(hi)).map(|j| h[(j, lo - 1)].norm()).sum();
            }
            if sub <= eps * scale || sub <= tiny {
                h[(lo, lo - 1)] = ZERO;
                break;
            }
            lo -= 1;
        }
        if lo == hi {
            hi -= 1;
            since_deflation = 0;
            continue;
        }
        if total >= cap {
            return Err(Error::SchurNoConvergence { iterations: total, lo, hi });
        }
        total += 1;
        since_deflation += 1;

        let shift = if since_deflation.is_multiple_of(10) {
            h[(hi, hi)] + C64::new(0.75 * h[(hi, hi - 1)].norm(), 0.0)
        } else {
            wilkinson_shift(h[(hi - 1, hi - 1)], h[(hi - 1, hi)], h[(hi, hi - 1)], h[(hi, hi)])
        };

        let mut x = h[(lo, lo)] - shift;
        let mut y = h[(lo + 1, lo)];
        for k in lo..hi {
            if k > lo {
                x = h[(k, k - 1)];
                y = h[(k + 1, k - 1)];
            }
            let g = Rotation::zeroing(x, y);
            let first_col = if k > lo { k - 1 } else { k };
            g.apply_left(&mut h, k, first_col..n);
            g.apply_right(&mut h, k, 0..(k + 3).min(hi + 1));
            g.apply_right(&mut z, k, 0..n);
            if k > lo {
                h[(k + 1, k - 1)] = ZERO;
            }
        }
    }

    for j in 0..n {
        for i in j + 1..n {
            h[(i, j)] = ZERO;
        }
    }
    let triangular = ComplexMatrix::wrap(h);
    Ok(SchurForm { diag_order: triangular.diagonal(), unitary: ComplexMatrix::wrap(z), triangular })
}

impl SchurForm {
    pub fn n(&self) -> usize {
        self.triangular.n()
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        self.triangular.conjugate_by(&self.unitary)
    }

    /// `|U^* U - I|_F`.
    pub fn unitarity_error(&self) -> f64 {
        let n = self.n();
        (&(&self.unitary.adjoint() * &self.unitary) - &ComplexMatrix::identity(n)).frobenius_norm()
    }

    /// Orthogonal projection onto the span of the given Schur vectors.
    pub fn column_projection(&self, cols: &[usize]) -> ComplexMatrix {
        let n = self.n();
        let u = self.unitary.as_dmatrix();
        let mut p = DMatrix::<C64>::zeros(n, n);
        for &c in cols {
            let col = u.column(c);
            p += col * col.adjoint();
        }
        ComplexMatrix::wrap(p)
    }

    /// Projection onto the first `k` Schur vectors.
    pub fn leading_projection(&self, k: usize) -> ComplexMatrix {
        let n = self.n();
        let u = self.unitary.as_dmatrix();
        let lead = u.columns(0, k);
        if k == 0 {
            return ComplexMatrix::zeros(n);
        }
        ComplexMatrix::wrap(lead * lead.adjoint())
    }

    /// Exchanges diagonal positions `k` and `k + 1` by a unitary rotation whose
    /// first column is the eigenvector of the 2x2 block for the lower eigenvalue.
    fn swap_adjacent(&mut self, k: usize) {
        let n = self.n();
        let r = self.triangular.as_dmatrix_mut();
        let a = r[(k, k)];
        let b = r[(k, k + 1)];
        let c = r[(k + 1, k + 1)];
        // (R - cI) x = 0 on the block gives x = (b, c - a).
        let g = Rotation::zeroing(b, c - a);
        g.apply_left(r, k, k..n);
        g.apply_right(r, k, 0..k + 2);
        r[(k, k)] = c;
        r[(k + 1, k + 1)] = a;
        r[(k + 1, k)] = ZERO;
        g.apply_right(self.unitary.as_dmatrix_mut(), k, 0..n);
        self.diag_order.swap(k, k + 1);
    }

    /// Stable insertion sort of the diagonal by `keys` through adjacent swaps.
    /// Equal keys are never exchanged.
    /// The returned permutation maps new diagonal positions to old ones.
    pub fn reorder_by_keys<K: Ord + Clone>(&self, keys: &[K]) -> (SchurForm, ReorderReport, Vec<usize>) {
        assert_eq!(keys.len(), self.n());
        let mut out = self.clone();
        let mut keys = keys.to_vec();
        let mut perm: Vec<usize> = (0..keys.len()).collect();
        let mut report = ReorderReport::default();
        for i in 1..keys.len() {
            let mut j = i;
            while j > 0 && keys[j - 1] > keys[j] {
                out.swap_adjacent(j - 1);
                keys.swap(j - 1, j);
                perm.swap(j - 1, j);
                report.swaps += 1;
                j -= 1;
            }
        }
        (out, report, perm)
    }
}

/// Sorts the diagonal nondecreasingly under `cmp`. Pairs within `delta` of each
/// other are treated as one spectral point: such swaps are refused and listed in
/// the report instead.
pub fn reorder_schur(
    s: &SchurForm,
    cmp: impl Fn(C64, C64) -> Ordering,
    delta: f64,
) -> (SchurForm, ReorderReport) {
    let mut out = s.clone();
    let mut report = ReorderReport::default();
    for i in 1..out.n() {
        let mut j = i;
        while j > 0 && cmp(out.diag_order[j - 1], out.diag_order[j]) == Ordering::Greater {
            let (a, c) = (out.diag_order[j - 1], out.diag_order[j]);
            if (a - c).norm() <= delta {
                report.skipped.push((j - 1, a, c));
                break;
            }
            out.swap_adjacent(j - 1);
            report.swaps += 1;
            j -= 1;
        }
    }
    (out, report)
}

/// A group of diagonal entries within the clustering threshold of each other
/// (single linkage), represented by their mean.
#[derive(Clone, Debug, PartialEq)]
pub struct Cluster {
    pub value: C64,
    pub multiplicity: usize,
    pub members: Vec<C64>,
}

/// Single-linkage clustering. Clusters are numbered by first appearance and the
/// returned vector maps each input position to its cluster.
pub fn cluster_values(values: &[C64], delta: f64) -> (Vec<Cluster>, Vec<usize>) {
    let n = values.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for i in 0..n {
        for j in i + 1..n {
            if (values[i] - values[j]).norm() <= delta {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut root_to_cluster = vec![usize::MAX; n];
    let mut clusters: Vec<Cluster> = Vec::new();
    let mut assignment = vec![0; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        if root_to_cluster[r] == usize::MAX {
            root_to_cluster[r] = clusters.len();
            clusters.push(Cluster { value: ZERO, multiplicity: 0, members: Vec::new() });
        }
        let c = root_to_cluster[r];
        clusters[c].members.push(values[i]);
        clusters[c].multiplicity += 1;
        assignment[i] = c;
    }
    for c in &mut clusters {
        let sum: C64 = c.members.iter().sum();
        c.value = sum / c.multiplicity as f64;
    }
    (clusters, assignment)
}

/// Schur form of `T` together with its eigenvalue clusters.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub matrix: ComplexMatrix,
    pub norm: f64,
    pub delta: f64,
    pub schur: SchurForm,
    pub clusters: Vec<Cluster>,
    /// Cluster index of each diagonal position of `schur`.
    pub assignment: Vec<usize>,
}

impl Spectrum {
    pub fn of(t: &ComplexMatrix) -> Result<Self> {
        let schur = schur_form(t)?;
        let norm = t.operator_norm();
        let delta = clustering_threshold(norm);
        let (clusters, assignment) = cluster_values(&schur.diag_order, delta);
        Ok(Spectrum { matrix: t.clone(), norm, delta, schur, clusters, assignment })
    }

    pub fn n(&self) -> usize {
        self.matrix.n()
    }

    /// Reorders the Schur form so that clusters appear in nondecreasing
    /// `cluster_keys` order; returns the new form and its position-to-cluster map.
    pub fn reorder_clusters<K: Ord + Clone>(&self, cluster_keys: &[K]) -> (SchurForm, Vec<usize>) {
        let keys: Vec<K> = self.assignment.iter().map(|&c| cluster_keys[c].clone()).collect();
        let (s, _, perm) = self.schur.reorder_by_keys(&keys);
        let assignment = perm.iter().map(|&old| self.assignment[old]).collect();
        (s, assignment)
    }

    /// Orthogonal projection onto the invariant subspace belonging to the
    /// selected clusters, computed by moving them to the front of the Schur form.
    pub fn invariant_projection(&self, selected: &[bool]) -> ComplexMatrix {
        let keys: Vec<u8> = selected.iter().map(|&s| u8::from(!s)).collect();
        let (s, assignment) = self.reorder_clusters(&keys);
        let k = assignment.iter().filter(|&&c| selected[c]).count();
        s.leading_projection(k)
    }
}
