//! Invariant projections selected by a region of the plane.
//!
//! For a matrix, the projection attached to a Borel set `B` is the orthogonal
//! projection onto the sum of the generalized eigenspaces whose eigenvalues lie
//! in `B`. It is computed from a Schur form reordered so that those eigenvalues
//! come first, never from explicit eigenvectors.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::brown::PointMeasure;
use crate::ensemble::Stream;
use crate::error::{Error, Result};
use crate::matrix::{ComplexMatrix, C64, ONE};
use crate::region::Region;
use crate::schur::Spectrum;
use crate::verify::{inputs_digest, CheckReport};

/// An orthogonal projection together with its rank.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Projection {
    pub matrix: ComplexMatrix,
    pub rank: usize,
}

impl Projection {
    pub fn zero(n: usize) -> Self {
        Projection { matrix: ComplexMatrix::zeros(n), rank: 0 }
    }

    pub fn identity(n: usize) -> Self {
        Projection { matrix: ComplexMatrix::identity(n), rank: n }
    }

    pub fn n(&self) -> usize {
        self.matrix.n()
    }

    /// `tau(P) = rank / n`.
    pub fn trace(&self) -> f64 {
        self.rank as f64 / self.n() as f64
    }

    /// `|P^2 - P|_F`.
    pub fn idempotence_error(&self) -> f64 {
        (&(&self.matrix * &self.matrix) - &self.matrix).frobenius_norm()
    }

    /// `|P^* - P|_F`.
    pub fn selfadjointness_error(&self) -> f64 {
        (&self.matrix.adjoint() - &self.matrix).frobenius_norm()
    }

    /// `I - P`.
    pub fn complement(&self) -> Self {
        Projection { matrix: &ComplexMatrix::identity(self.n()) - &self.matrix, rank: self.n() - self.rank }
    }

    /// `|(I - P) T P|_F`, zero exactly when the range of `P` is `T`-invariant.
    pub fn invariance_residual(&self, t: &ComplexMatrix) -> f64 {
        (&(&self.complement().matrix * t) * &self.matrix).frobenius_norm()
    }

    /// `|P - P Q|_F`: zero when `P <= Q`.
    pub fn below_error(&self, q: &Projection) -> f64 {
        (&self.matrix - &(&self.matrix * &q.matrix)).frobenius_norm()
    }

    /// Orthonormal basis of the range as an `n x rank` matrix, by Gram–Schmidt on
    /// the columns of `P` with largest-residual pivoting and reorthogonalization.
    pub fn range_basis(&self) -> DMatrix<C64> {
        let n = self.n();
        let mut cols: Vec<Vec<C64>> =
            (0..n).map(|j| (0..n).map(|i| self.matrix.get(i, j)).collect()).collect();
        let mut basis: Vec<Vec<C64>> = Vec::with_capacity(self.rank);
        let norm = |v: &[C64]| v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        while basis.len() < self.rank {
            let (best, _) = cols
                .iter()
                .enumerate()
                .map(|(j, c)| (j, norm(c)))
                .max_by(|a, b| a.1.total_cmp(&b.1))
                .expect("rank does not exceed n");
            let mut q = cols.swap_remove(best);
            for _ in 0..2 {
                for b in &basis {
                    let dot: C64 = b.iter().zip(&q).map(|(x, y)| x.conj() * y).sum();
                    q.iter_mut().zip(b).for_each(|(y, x)| *y -= dot * x);
                }
            }
            let nq = norm(&q);
            q.iter_mut().for_each(|y| *y /= nq);
            for c in &mut cols {
                let dot: C64 = q.iter().zip(c.iter()).map(|(x, y)| x.conj() * y).sum();
                c.iter_mut().zip(&q).for_each(|(y, x)| *y -= dot * x);
            }
            basis.push(q);
        }
        DMatrix::from_fn(n, self.rank, |i, j| basis[j][i])
    }
}

/// The invariant projection of `T` for `region`.
pub fn hs_projection(t: &ComplexMatrix, region: &Region) -> Result<Projection> {
    hs_projection_in(&Spectrum::of(t)?, region)
}

/// Same as [`hs_projection`] reusing a computed spectrum. Every cluster must be
/// entirely inside or entirely outside the region.
pub fn hs_projection_in(spec: &Spectrum, region: &Region) -> Result<Projection> {
    let selected: Vec<bool> =
        spec.clusters.iter().map(|c| region.decide_cluster(c.value, &c.members)).collect::<Result<_>>()?;
    Ok(projection_of_clusters(spec, &selected))
}

pub(crate) fn projection_of_clusters(spec: &Spectrum, selected: &[bool]) -> Projection {
    let n = spec.n();
    let rank: usize = spec.clusters.iter().zip(selected).filter(|p| *p.1).map(|p| p.0.multiplicity).sum();
    if rank == 0 {
        return Projection::zero(n);
    }
    if rank == n {
        return Projection::identity(n);
    }
    Projection { matrix: spec.invariant_projection(selected), rank }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Inside,
    Outside,
}

/// `V^* T V` for an orthonormal basis `V` of the range of `P` (inside) or of
/// `I - P` (outside).
pub fn compression(t: &ComplexMatrix, p: &Projection, side: Side) -> Result<ComplexMatrix> {
    let corner = match side {
        Side::Inside => p.clone(),
        Side::Outside => p.complement(),
    };
    if corner.rank == 0 {
        return Err(Error::EmptyCorner);
    }
    let v = corner.range_basis();
    Ok(ComplexMatrix::wrap(v.adjoint() * t.as_dmatrix() * &v))
}

/// Eigenvalue counting measure of the compression of `T` to one corner of `P`.
pub fn compression_brown(t: &ComplexMatrix, p: &Projection, side: Side) -> Result<PointMeasure> {
    crate::brown::empirical_brown(&compression(t, p, side)?)
}

fn growth(t: &DMatrix<C64>, xi: &[C64], m: usize) -> f64 {
    let mut v = DMatrix::from_column_slice(xi.len(), 1, xi);
    let mut log = 0.0;
    for _ in 0..m {
        v = t * v;
        let nv = v.norm();
        if nv == 0.0 {
            return 0.0;
        }
        log += nv.ln();
        v /= C64::new(nv, 0.0);
    }
    (log / m as f64).exp()
}

/// Growth rates `|T^m xi|^(1/m)` at `m = m_max` for random unit vectors in the
/// range of the projection onto the closed disk of radius `r` (bounded by
/// `r + 0.1`) and in its complement (bounded below by `r + gap / 2`, where `gap`
/// separates the outer eigenvalues from the circle).
pub fn ball_growth_check(t: &ComplexMatrix, r: f64, trials: usize, m_max: usize, seed: u64) -> Result<CheckReport> {
    let spec = Spectrum::of(t)?;
    let digest = inputs_digest(&[&t.digest(), &format!("r={r:e}"), &format!("m={m_max}"), &format!("seed={seed}")]);
    let report = CheckReport::new(
        "hs.ball-growth",
        "vectors in the invariant subspace of the closed r-disk grow at rate <= r; vectors with an outside component grow faster",
        &digest,
        0.1,
    );
    if !(r >= 0.0) {
        return Ok(report.skip("radius must be nonnegative"));
    }
    let tol = 1e-6 * spec.norm.max(1.0);
    if spec.clusters.iter().any(|c| c.value.norm() > r && c.value.norm() <= r + tol) {
        return Ok(report.skip("an eigenvalue lies on the circle |z| = r"));
    }
    let p = projection_of_clusters(&spec, &spec.clusters.iter().map(|c| c.value.norm() <= r).collect::<Vec<_>>());
    let mut report = report;
    let mut rng = Stream::new(seed);
    let n = t.n();
    let td = t.as_dmatrix();
    let project = |q: &Projection, g: Vec<C64>| -> Vec<C64> {
        let v = q.matrix.as_dmatrix() * DMatrix::from_column_slice(n, 1, &g);
        let nv = v.norm();
        v.iter().map(|z| z / nv).collect()
    };
    if p.rank > 0 {
        let worst = (0..trials).map(|_| growth(td, &project(&p, rng.unit_vector(n)), m_max)).fold(0.0, f64::max);
        report.at_most("inside growth", worst, r + 0.1);
    }
    if p.rank < n {
        let gap = spec.clusters.iter().map(|c| c.value.norm()).filter(|&a| a > r).fold(f64::INFINITY, f64::min) - r;
        let q = p.complement();
        let least =
            (0..trials).map(|_| growth(td, &project(&q, rng.unit_vector(n)), m_max)).fold(f64::INFINITY, f64::min);
        report.at_least("outside growth", least, r + gap / 2.0);
    }
    Ok(report)
}

/// Riesz idempotents of every cluster (projections onto the generalized
/// eigenspace along the others), from the triangular Sylvester equation
/// `R11 Y - Y R22 = -R12` in a Schur form with the cluster moved first.
/// Also reports whether some cluster block fails to be scalar (defective `T`).
pub fn riesz_idempotents(spec: &Spectrum) -> (Vec<ComplexMatrix>, bool) {
    let n = spec.n();
    let mut out = Vec::with_capacity(spec.clusters.len());
    let mut defective = false;
    let tol = 1e-8 * spec.norm.max(1.0);
    for (ci, cl) in spec.clusters.iter().enumerate() {
        let keys: Vec<u8> = (0..spec.clusters.len()).map(|c| u8::from(c != ci)).collect();
        let (s, _) = spec.reorder_clusters(&keys);
        let k = cl.multiplicity;
        let r = s.triangular.as_dmatrix();
        for i in 0..k {
            for j in i + 1..k {
                defective |= r[(i, j)].norm() > tol;
            }
        }
        let m = n - k;
        let mut y = DMatrix::<C64>::zeros(k, m);
        for j in 0..m {
            let mu = r[(k + j, k + j)];
            let mut rhs: Vec<C64> = (0..k).map(|i| -r[(i, k + j)]).collect();
            for l in 0..j {
                let c = r[(k + l, k + j)];
                for i in 0..k {
                    rhs[i] += y[(i, l)] * c;
                }
            }
            for i in (0..k).rev() {
                let mut acc = rhs[i];
                for l in i + 1..k {
                    acc -= r[(i, l)] * y[(l, j)];
                }
                y[(i, j)] = acc / (r[(i, i)] - mu);
            }
        }
        let mut block = DMatrix::<C64>::zeros(n, n);
        for i in 0..k {
            block[(i, i)] = ONE;
            for j in 0..m {
                block[(i, k + j)] = -y[(i, j)];
            }
        }
        let u = s.unitary.as_dmatrix();
        out.push(ComplexMatrix::wrap(u * block * u.adjoint()));
    }
    (out, defective)
}

/// Samples operators commuting with `T` and checks that `P` is invariant
/// under each: `|(I - P) S P|_F <= 1e-8 |S|`. Samples alternate between random
/// degree-5 polynomials in `T / |T|` and random combinations of the Riesz
/// idempotents; for defective `T` only polynomials are used.
pub fn hyperinvariance_check(t: &ComplexMatrix, p: &Projection, samples: usize, seed: u64) -> Result<CheckReport> {
    let spec = Spectrum::of(t)?;
    let digest = inputs_digest(&[&t.digest(), &p.matrix.digest(), &format!("samples={samples}"), &format!("seed={seed}")]);
    let mut report = CheckReport::new(
        "hs.hyperinvariance",
        "the projection is invariant under operators commuting with T",
        &digest,
        1e-8,
    );
    let (idempotents, defective) = riesz_idempotents(&spec);
    let use_idempotents = !defective && idempotents.len() > 1;
    let n = t.n();
    let unit = if spec.norm > 0.0 { t.scale(C64::new(1.0 / spec.norm, 0.0)) } else { t.clone() };
    let powers: Vec<ComplexMatrix> =
        std::iter::successors(Some(ComplexMatrix::identity(n)), |m| Some(m * &unit)).take(6).collect();
    let mut rng = Stream::new(seed);
    let complement = p.complement();
    let (mut worst_inv, mut worst_comm) = (0.0f64, 0.0f64);
    for k in 0..samples {
        let terms: &[ComplexMatrix] = if use_idempotents && k % 2 == 1 { &idempotents } else { &powers };
        let mut s = ComplexMatrix::zeros(n);
        for m in terms {
            s = &s + &m.scale(rng.complex_gaussian());
        }
        let s_norm = s.operator_norm();
        if s_norm == 0.0 {
            continue;
        }
        let comm = s.commutator(t).frobenius_norm() / (s_norm * spec.norm.max(1.0));
        let inv = (&(&complement.matrix * &s) * &p.matrix).frobenius_norm() / s_norm;
        worst_comm = worst_comm.max(comm);
        worst_inv = worst_inv.max(inv);
    }
    report.at_most("relative commutator |ST - TS| / (|S| max(1, |T|))", worst_comm, 1e-9);
    report.at_most("|(I - P) S P|_F / |S|", worst_inv, 1e-8);
    Ok(if defective {
        report.with_note("T is defective: commutant sampled by polynomials in T only")
    } else if spec.clusters.iter().any(|c| c.multiplicity > 1) {
        report.with_note("repeated eigenvalues: polynomials and idempotents span only part of the commutant")
    } else {
        report
    })
}
