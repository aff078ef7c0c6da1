//! Machine-readable checks of the identities behind the decomposition.
//!
//! Every check produces a [`CheckReport`]. A check whose hypotheses do not
//! hold for the given input is `skipped`, never `failed`.

use std::f64::consts::SQRT_2;

use nalgebra::DMatrix;
use serde::{Deserialize, Deserializer, Serialize};
use sha2::{Digest, Sha256};

use crate::brown::{region_count, PointMeasure};
use crate::curve::CurveSpec;
use crate::dyadic::Dyadic;
use crate::ensemble::Stream;
use crate::error::{Error, Result};
use crate::grid::Square;
use crate::matrix::{ComplexMatrix, C64};
use crate::projection::{compression, hs_projection_in, hyperinvariance_check, Projection, Side};
use crate::region::Region;
use crate::schur::{Cluster, Spectrum};
use crate::spectral::{decompose_table, SpectralTable};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Skipped,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
}

/// One measured quantity and the bound it must respect.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub label: String,
    #[serde(deserialize_with = "nullable_f64")]
    pub value: f64,
    pub relation: Relation,
    #[serde(deserialize_with = "nullable_f64")]
    pub bound: f64,
}

impl Measurement {
    pub fn holds(&self) -> bool {
        match self.relation {
            Relation::AtMost => self.value <= self.bound,
            Relation::AtLeast => self.value >= self.bound,
        }
    }
}

/// Non-finite floats are written as `null`; read them back as NaN.
fn nullable_f64<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub id: String,
    /// The identity or bound being checked, in words.
    pub statement: String,
    pub inputs_digest: String,
    pub measurements: Vec<Measurement>,
    #[serde(deserialize_with = "nullable_f64")]
    pub tolerance: f64,
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl CheckReport {
    pub fn new(id: &str, statement: &str, inputs_digest: &str, tolerance: f64) -> Self {
        CheckReport {
            id: id.to_string(),
            statement: statement.to_string(),
            inputs_digest: inputs_digest.to_string(),
            measurements: Vec::new(),
            tolerance,
            verdict: Verdict::Pass,
            note: None,
        }
    }

    pub fn at_most(&mut self, label: impl Into<String>, value: f64, bound: f64) -> &mut Self {
        self.push(label.into(), value, Relation::AtMost, bound)
    }

    pub fn at_least(&mut self, label: impl Into<String>, value: f64, bound: f64) -> &mut Self {
        self.push(label.into(), value, Relation::AtLeast, bound)
    }

    fn push(&mut self, label: String, value: f64, relation: Relation, bound: f64) -> &mut Self {
        let m = Measurement { label, value, relation, bound };
        if self.verdict == Verdict::Pass && !m.holds() {
            self.verdict = Verdict::Fail;
        }
        self.measurements.push(m);
        self
    }

    pub fn skip(mut self, why: impl Into<String>) -> Self {
        self.verdict = Verdict::Skipped;
        self.note = Some(why.into());
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    /// Recomputes the verdict from the measurements; skipped reports stay skipped.
    pub fn consistent(&self) -> bool {
        match self.verdict {
            Verdict::Skipped => true,
            Verdict::Pass => self.measurements.iter().all(Measurement::holds),
            Verdict::Fail => !self.measurements.iter().all(Measurement::holds),
        }
    }
}

/// SHA-256 of the parts joined by newlines.
pub fn inputs_digest(parts: &[&str]) -> String {
    let mut h = Sha256::new();
    for (i, p) in parts.iter().enumerate() {
        if i > 0 {
            h.update(b"\n");
        }
        h.update(p.as_bytes());
    }
    hex::encode(h.finalize())
}

/// Trial counts and seeds for the randomized checks.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Random parameters per flag-identity check.
    pub flag_trials: usize,
    /// Random regions per measure-law check.
    pub regions: usize,
    /// Random nested region pairs per monotonicity check.
    pub nested_pairs: usize,
    /// Largest grid level for the convergence checks.
    pub n_max: u32,
    /// Largest grid level for the binomial power bound.
    pub binomial_levels: u32,
    /// Largest power `m` in the binomial power bound.
    pub binomial_m: usize,
    /// Random unit vectors in the binomial power bound.
    pub vectors: usize,
    /// Random shifts in the determinant agreement check.
    pub shifts: usize,
    #[serde(default)]
    pub tol: Tolerances,
}

/// Bounds of the decomposition checks, overridable from the command line.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Bound on `|N N^* - N^* N|_F / |N|_F^2`.
    pub normality: f64,
    /// Bound on the matching distance between the spectra of `N` and `T`.
    pub measure: f64,
    /// Bound on the eigenvalues of `Q`, relative to `max(1, |T|)`.
    pub quasinilpotent: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { normality: 1e-9, measure: 1e-8, quasinilpotent: 1e-8 }
    }
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            seed: 0,
            flag_trials: 50,
            regions: 100,
            nested_pairs: 200,
            n_max: 8,
            binomial_levels: 6,
            binomial_m: 20,
            vectors: 20,
            shifts: 20,
            tol: Tolerances::default(),
        }
    }
}

impl VerifyOptions {
    fn tag(&self) -> String {
        serde_json::to_string(self).expect("options serialize")
    }
}

const STRUCTURAL_TOL: f64 = 1e-9;
const DETERMINANT_TOL: f64 = 1e-10;
const SHIFTED_DETERMINANT_TOL: f64 = 1e-8;

fn table_digest(table: &SpectralTable, opts: &VerifyOptions, what: &str) -> String {
    inputs_digest(&[what, &table.matrix().digest(), &table.curve.spec().to_string(), &opts.tag()])
}

fn random_point(rng: &mut Stream, square: Square) -> C64 {
    square.from_unit(rng.uniform(), rng.uniform())
}

fn simple_region(rng: &mut Stream, square: Square, spectrum: &[Cluster]) -> Region {
    let r = square.radius;
    match rng.below(5) {
        0 => Region::disk(random_point(rng, square), rng.uniform() * r),
        1 => {
            let z = spectrum[rng.below(spectrum.len())].value;
            Region::disk(z + C64::new(0.1, 0.0) * r * rng.complex_gaussian(), rng.uniform() * r)
        }
        2 => {
            let theta = std::f64::consts::TAU * rng.uniform();
            let p = random_point(rng, square);
            let (a, b) = (theta.cos(), theta.sin());
            Region::HalfPlane { a, b, c: a * p.re + b * p.im }
        }
        _ => {
            let level = 1 + rng.below(4) as u32;
            let cells = (1..=1u64 << (2 * level)).filter(|_| rng.uniform() < 0.5).collect();
            Region::Cells { square, level, cells }
        }
    }
}

/// A random region whose boundary separates every cluster cleanly: disks,
/// half-planes, unions of dyadic cells and their boolean combinations.
pub fn random_region(rng: &mut Stream, square: Square, spectrum: &Spectrum) -> Region {
    for _ in 0..50 {
        let a = simple_region(rng, square, &spectrum.clusters);
        let region = match rng.below(4) {
            0 => a.and(simple_region(rng, square, &spectrum.clusters)),
            1 => a.or(simple_region(rng, square, &spectrum.clusters)),
            2 => a.complement(),
            _ => a,
        };
        if spectrum.clusters.iter().all(|c| region.decide_cluster(c.value, &c.members).is_ok()) {
            return region;
        }
    }
    Region::Everything
}

/// Assigns each value to the nearest cluster and returns per-cluster counts and
/// the largest distance to the assigned cluster.
fn assign_to_clusters(values: &[C64], clusters: &[Cluster]) -> (Vec<usize>, f64) {
    let mut counts = vec![0; clusters.len()];
    let mut worst = 0.0f64;
    for &v in values {
        let (best, d) = clusters
            .iter()
            .enumerate()
            .map(|(i, c)| (i, (c.value - v).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("nonempty spectrum");
        counts[best] += 1;
        worst = worst.max(d);
    }
    (counts, worst)
}

/// Smallest distance between cluster values; `f64::MAX` with fewer than two
/// clusters so that bounds built from it stay finite in JSON.
fn min_cluster_separation(clusters: &[Cluster]) -> f64 {
    let mut sep = f64::MAX;
    for i in 0..clusters.len() {
        for j in i + 1..clusters.len() {
            sep = sep.min((clusters[i].value - clusters[j].value).norm());
        }
    }
    sep
}

fn operator_norm_diff(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    (a - b).operator_norm()
}

/// Trace identity, products and additivity of `E` over random regions, plus
/// agreement of the cover construction with the sum of cluster projections.
pub fn verify_measure_laws(table: &SpectralTable, opts: &VerifyOptions) -> Vec<CheckReport> {
    let digest = table_digest(table, opts, "measure-laws");
    let mut rng = Stream::new(opts.seed ^ 0x6d65_6173);
    let square = table.curve.square;
    let n = table.n();
    // one atom per computed eigenvalue, so that clusters are counted member by member
    let nu = PointMeasure::from_counts(table.spectrum.schur.diag_order.iter().map(|&z| (z, 1)));
    let mut trace = CheckReport::new("measure.trace", "tau(E(B)) equals nu_T(B)", &digest, STRUCTURAL_TOL);
    let mut product =
        CheckReport::new("measure.product", "E(B1) E(B2) equals E(B1 & B2)", &digest, STRUCTURAL_TOL);
    let mut additivity = CheckReport::new(
        "measure.additivity",
        "E is additive on disjoint sets and the level-2 cells sum to I",
        &digest,
        STRUCTURAL_TOL,
    );
    let mut oracle =
        CheckReport::new("measure.cover", "the stabilized cover value equals sum of E({z}) over z in B", &digest, STRUCTURAL_TOL);
    let (mut rank_gap, mut trace_gap, mut prod_err, mut add_err, mut cover_err) = (0usize, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut failures = Vec::new();
    for _ in 0..opts.regions {
        let b1 = random_region(&mut rng, square, &table.spectrum);
        let b2 = random_region(&mut rng, square, &table.spectrum);
        let mut run = || -> Result<()> {
            let e1 = table.spectral_projection(&b1)?;
            let e2 = table.spectral_projection(&b2)?;
            let both = b1.clone().and(b2.clone());
            let e12 = table.spectral_projection(&both)?;
            let minus = b1.clone().and(b2.clone().complement());
            let e1m2 = table.spectral_projection(&minus)?;
            rank_gap = rank_gap.max(e1.rank.abs_diff(region_count(&nu, &b1)));
            trace_gap = trace_gap.max((e1.matrix.normalized_trace().re - region_count(&nu, &b1) as f64 / n as f64).abs());
            prod_err = prod_err.max((&(&e1.matrix * &e2.matrix) - &e12.matrix).frobenius_norm());
            add_err = add_err.max((&e1.matrix - &(&e12.matrix + &e1m2.matrix)).frobenius_norm());
            let direct = table.atom_sum(&table.clusters_in(&b1)?);
            cover_err = cover_err.max((&e1.matrix - &direct.matrix).frobenius_norm());
            Ok(())
        };
        if let Err(e) = run() {
            failures.push(e.to_string());
        }
    }
    // A random partition B_1 = R_1, B_2 = !R_1 & R_2, ..., B_k = rest.
    for _ in 0..opts.regions / 10 + 1 {
        let mut rest = Region::Everything;
        let mut total = ComplexMatrix::zeros(n);
        let mut ok = true;
        for k in 0..5 {
            let piece = if k == 4 {
                rest.clone()
            } else {
                let r = random_region(&mut rng, square, &table.spectrum);
                let piece = rest.clone().and(r.clone());
                rest = rest.and(r.complement());
                piece
            };
            match table.spectral_projection(&piece) {
                Ok(e) => total = &total + &e.matrix,
                Err(e) => {
                    failures.push(e.to_string());
                    ok = false;
                }
            }
        }
        if ok {
            add_err = add_err.max((&total - &ComplexMatrix::identity(n)).frobenius_norm());
        }
    }
    let cells: Vec<Region> = crate::region::dyadic_cells(square, 2);
    let cell_projs: Result<Vec<Projection>> = cells.iter().map(|c| table.spectral_projection(c)).collect();
    let cell_note = match cell_projs {
        Ok(ps) => {
            let total = ps.iter().fold(ComplexMatrix::zeros(n), |acc, e| &acc + &e.matrix);
            add_err = add_err.max((&total - &ComplexMatrix::identity(n)).frobenius_norm());
            None
        }
        Err(e) => Some(format!("level-2 cell partition not decidable ({e}); random partitions only")),
    };
    trace.at_most("max |rank E(B) - n nu_T(B)|", rank_gap as f64, 0.0);
    trace.at_most("max |tau(E(B)) - nu_T(B)|", trace_gap, STRUCTURAL_TOL);
    product.at_most("max |E(B1)E(B2) - E(B1 & B2)|_F", prod_err, STRUCTURAL_TOL);
    additivity.at_most("max additivity defect (Frobenius)", add_err, STRUCTURAL_TOL);
    oracle.at_most("max |E(B) - sum E({z})|_F", cover_err, STRUCTURAL_TOL);
    let additivity = match cell_note {
        Some(note) => additivity.with_note(note),
        None => additivity,
    };
    let mut out = vec![trace, product, additivity, oracle];
    if !failures.is_empty() {
        let mut r = CheckReport::new("measure.regions", "every sampled region is decidable", &digest, 0.0);
        r.at_most("undecidable regions", failures.len() as f64, 0.0);
        out.push(r.with_note(failures[0].clone()));
    }
    out
}

/// `E(psi([0, t])) = P_T(psi([0, t]))` at every cluster parameter and at random
/// parameters; the right side is computed independently from the unordered
/// Schur form.
pub fn verify_flag_identity(table: &SpectralTable, opts: &VerifyOptions) -> CheckReport {
    let digest = table_digest(table, opts, "flag-identity");
    let mut report = CheckReport::new(
        "flag.identity",
        "E(psi([0,t])) equals the invariant projection P_T(psi([0,t]))",
        &digest,
        STRUCTURAL_TOL,
    );
    let mut rng = Stream::new(opts.seed ^ 0x666c_6167);
    let bits = 2 * table.curve.depth;
    let mut ts: Vec<Dyadic> = table.params.clone();
    for _ in 0..opts.flag_trials {
        let t = if rng.uniform() < 0.5 && !table.params.is_empty() {
            // near a cluster parameter, on either side
            let p = table.params[rng.below(table.params.len())];
            if rng.uniform() < 0.5 { p.sub_units(1, bits) } else { p.add_units(1, bits) }
        } else {
            Dyadic::from_f64_floor(rng.uniform(), 52).expect("uniform lies in [0, 1)")
        };
        ts.push(t);
    }
    let (mut worst, mut rank_gap) = (0.0f64, 0usize);
    for t in ts {
        let region = Region::curve_prefix(table.curve, t);
        let e = match table.spectral_projection(&region) {
            Ok(e) => e,
            Err(e) => return report.skip(e.to_string()),
        };
        let p = match hs_projection_in(&table.spectrum, &region) {
            Ok(p) => p,
            Err(e) => return report.skip(e.to_string()),
        };
        let flag = table.flag_projection(t);
        worst = worst.max((&e.matrix - &p.matrix).frobenius_norm());
        worst = worst.max((&flag.matrix - &p.matrix).frobenius_norm());
        rank_gap = rank_gap.max(e.rank.abs_diff(p.rank));
    }
    report.at_most("max |E(psi([0,t])) - P_T(psi([0,t]))|_F", worst, STRUCTURAL_TOL);
    report.at_most("max rank difference", rank_gap as f64, 0.0);
    report
}

/// For every flag projection `P` of the table: trace equals the Brown mass of
/// the curve prefix, `(I - P) T P = 0`, and the compressions of `T` to the two
/// corners carry exactly the clusters inside and outside the prefix.
pub fn verify_flag_projections(table: &SpectralTable, opts: &VerifyOptions) -> Vec<CheckReport> {
    let digest = table_digest(table, opts, "flag-projections");
    let t = table.matrix();
    let norm = table.spectrum.norm;
    let mut trace = CheckReport::new("hs.trace", "tau(P_T(B)) equals nu_T(B) for every flag projection", &digest, 0.0);
    let mut invariance =
        CheckReport::new("hs.invariance", "(I - P) T P vanishes for every flag projection", &digest, STRUCTURAL_TOL);
    let mut corners = CheckReport::new(
        "hs.corners",
        "the compressions to P and I - P carry exactly the eigenvalues inside and outside B",
        &digest,
        0.0,
    );
    let nu = PointMeasure::from_spectrum(&table.spectrum);
    let (mut rank_gap, mut resid, mut misplaced, mut worst_dist) = (0usize, 0.0f64, 0usize, 0.0f64);
    for (i, p) in table.flags.iter().enumerate() {
        let region = Region::curve_prefix(table.curve, table.params[i]);
        rank_gap = rank_gap.max(p.rank.abs_diff(region_count(&nu, &region)));
        resid = resid.max(p.invariance_residual(t));
        let inside: Vec<bool> = (0..table.clusters.len()).map(|j| j <= i).collect();
        for (side, want) in [(Side::Inside, true), (Side::Outside, false)] {
            let corner_rank = if want { p.rank } else { p.n() - p.rank };
            if corner_rank == 0 {
                continue;
            }
            let c = compression(t, p, side).expect("corner has positive rank");
            let eig = Spectrum::of(&c).map(|s| s.schur.diag_order).unwrap_or_default();
            let (counts, dist) = assign_to_clusters(&eig, &table.clusters);
            worst_dist = worst_dist.max(dist);
            for (j, &k) in counts.iter().enumerate() {
                let expected = if inside[j] == want { table.clusters[j].multiplicity } else { 0 };
                misplaced += k.abs_diff(expected);
            }
        }
    }
    trace.at_most("max |rank P - n nu_T(B)|", rank_gap as f64, 0.0);
    invariance.at_most("max |(I - P) T P|_F", resid, STRUCTURAL_TOL * norm.max(f64::MIN_POSITIVE));
    corners.at_most("misplaced eigenvalues", misplaced as f64, 0.0);
    let sep = min_cluster_separation(&table.clusters);
    corners.at_most("max distance to assigned cluster", worst_dist, sep / 2.0);
    vec![trace, invariance, corners]
}

/// Nested regions give ordered projections: `B1 <= B2` implies `P1 <= P2`.
pub fn verify_monotonicity(spectrum: &Spectrum, square: Square, opts: &VerifyOptions) -> CheckReport {
    let digest = inputs_digest(&["monotonicity", &spectrum.matrix.digest(), &opts.tag()]);
    let mut report =
        CheckReport::new("hs.monotone", "B1 inside B2 implies P_T(B1) <= P_T(B2)", &digest, STRUCTURAL_TOL);
    let mut rng = Stream::new(opts.seed ^ 0x6d6f_6e6f);
    let mut worst = 0.0f64;
    let mut done = 0;
    for _ in 0..opts.nested_pairs {
        let outer = random_region(&mut rng, square, spectrum);
        let inner = outer.clone().and(random_region(&mut rng, square, spectrum));
        let (Ok(p2), Ok(p1)) = (hs_projection_in(spectrum, &outer), hs_projection_in(spectrum, &inner)) else {
            continue;
        };
        worst = worst.max(p1.below_error(&p2));
        done += 1;
    }
    report.at_most("max |P1 - P1 P2|_F", worst, STRUCTURAL_TOL);
    report.at_least("decidable pairs", done as f64, (opts.nested_pairs / 2) as f64);
    report
}

fn commutes_with_cells(table: &SpectralTable, a: &ComplexMatrix, levels: u32) -> f64 {
    let mut worst = 0.0f64;
    for level in 1..=levels {
        for (_, members) in table.cell_groups(level) {
            let mut sel = vec![false; table.clusters.len()];
            members.iter().for_each(|&i| sel[i] = true);
            let e = table.atom_sum(&sel);
            worst = worst.max(e.matrix.commutator(a).frobenius_norm());
        }
    }
    worst
}

/// Grid-expectation convergence rate for `T`, and, when `T` commutes with the
/// cell projections, the eigenvalue radius of `T - E_{D_n}(T)`, the binomial
/// power bound after scaling to norm 1/2, and the radius of `(T - N)^2`.
pub fn verify_convergence(table: &SpectralTable, opts: &VerifyOptions) -> Vec<CheckReport> {
    let digest = table_digest(table, opts, "convergence");
    let t = table.matrix();
    let norm = table.spectrum.norm;
    let limit = table.normal_part();
    let mut rate = CheckReport::new(
        "convergence.rate",
        "|E_D(T) - E_{D_n}(T)| <= 3 sqrt(2) |T| / 2^n",
        &digest,
        0.0,
    );
    for level in 1..=opts.n_max {
        let e = table.dyadic_expectation(level);
        let bound = 3.0 * SQRT_2 * norm / f64::from(1u32 << level);
        rate.at_most(format!("n={level}"), operator_norm_diff(&limit, &e), bound * (1.0 + 1e-12));
    }
    let mut radius = CheckReport::new(
        "convergence.eigen-radius",
        "for T in D', the spectrum of T - E_{D_n}(T) lies in the disk of radius 6 sqrt(2) |T| / 2^n",
        &digest,
        0.0,
    );
    let mut binomial = CheckReport::new(
        "convergence.binomial",
        "for T in D' with |T| <= 1/2: |(T - E_D(T))^{2m} eta| <= 4^m max((3 sqrt(2) |T| / 2^n)^m, |(T - E_{D_n}(T))^m eta|)",
        &digest,
        1e-9,
    );
    let mut final_radius = CheckReport::new(
        "convergence.final-radius",
        "the spectrum of (T - E_D(T))^2 lies in the disk of radius 28 sqrt(2) |T| / 2^n",
        &digest,
        0.0,
    );
    let comm = commutes_with_cells(table, t, opts.n_max);
    if comm > STRUCTURAL_TOL * norm.max(1.0) {
        let why = format!("T does not commute with the cell projections (defect {comm:.3e})");
        return vec![rate, radius.skip(why.clone()), binomial.skip(why.clone()), final_radius.skip(why)];
    }
    for level in 1..=opts.n_max {
        let diff = t - &table.dyadic_expectation(level);
        let r = Spectrum::of(&diff).map(|s| s.schur.diag_order.iter().map(|z| z.norm()).fold(0.0, f64::max));
        let bound = 6.0 * SQRT_2 * norm / f64::from(1u32 << level);
        match r {
            Ok(r) => radius.at_most(format!("n={level}"), r, bound),
            Err(e) => return vec![rate, radius.skip(e.to_string()), binomial, final_radius],
        };
    }
    let q = t - &limit;
    let q2 = &q * &q;
    let bound = 28.0 * SQRT_2 * norm / f64::from(1u32 << opts.n_max);
    match Spectrum::of(&q2) {
        Ok(s) => {
            final_radius.at_most("spectral radius", s.schur.diag_order.iter().map(|z| z.norm()).fold(0.0, f64::max), bound);
        }
        Err(e) => final_radius = final_radius.skip(e.to_string()),
    }
    binomial = binomial_bound(table, opts, binomial);
    vec![rate, radius, binomial, final_radius]
}

fn binomial_bound(table: &SpectralTable, opts: &VerifyOptions, mut report: CheckReport) -> CheckReport {
    let norm = table.spectrum.norm;
    let scaled = if norm > 0.5 {
        let s = table.matrix().scale(C64::new(0.5 / norm, 0.0));
        match SpectralTable::build(&s, table.curve.spec()) {
            Ok(t) => t,
            Err(e) => return report.skip(e.to_string()),
        }
    } else {
        table.clone()
    };
    let t = scaled.matrix();
    let tn = scaled.spectrum.norm;
    let n = t.n();
    let a = (t - &scaled.normal_part()).into_dmatrix();
    let mut rng = Stream::new(opts.seed ^ 0x6269_6e6f);
    let etas: Vec<DMatrix<C64>> =
        (0..opts.vectors).map(|_| DMatrix::from_column_slice(n, 1, &rng.unit_vector(n))).collect();
    let mut worst = 0.0f64;
    for level in 1..=opts.binomial_levels {
        let b = (t - &scaled.dyadic_expectation(level)).into_dmatrix();
        let c = 3.0 * SQRT_2 * tn / f64::from(1u32 << level);
        for eta in &etas {
            let (mut va, mut vb) = (eta.clone(), eta.clone());
            for m in 1..=opts.binomial_m {
                va = &a * (&a * va);
                vb = &b * vb;
                let lhs = va.norm();
                let rhs = 4f64.powi(m as i32) * c.powi(m as i32).max(vb.norm());
                let ratio = if rhs > 0.0 { lhs / rhs } else if lhs == 0.0 { 0.0 } else { f64::INFINITY };
                worst = worst.max(ratio);
            }
        }
    }
    report.at_most("max lhs / rhs", worst, 1.0 + 1e-9);
    report
}

/// Block split along a `T`-invariant projection `p`: the Fuglede–Kadison
/// determinant factorizes and the eigenvalues split between the corners.
pub fn verify_block_split(t: &ComplexMatrix, p: &Projection) -> Result<CheckReport> {
    let norm = t.operator_norm();
    let residual = p.invariance_residual(t);
    let allowed = STRUCTURAL_TOL * norm;
    if residual > allowed {
        return Err(Error::NotInvariant { residual, bound: allowed });
    }
    let digest = inputs_digest(&["block-split", &t.digest(), &p.matrix.digest()]);
    let mut report = CheckReport::new(
        "block-split",
        "Delta(T) = Delta(A)^tau(p) Delta(C)^tau(1-p) and nu_T = tau(p) nu_A + tau(1-p) nu_C",
        &digest,
        DETERMINANT_TOL,
    );
    let n = t.n();
    let tau = p.trace();
    let log_a = if p.rank > 0 { compression(t, p, Side::Inside)?.log_fk_determinant() } else { 0.0 };
    let log_c = if p.rank < n { compression(t, p, Side::Outside)?.log_fk_determinant() } else { 0.0 };
    let lhs = t.log_fk_determinant();
    let rhs = tau * log_a + (1.0 - tau) * log_c;
    report.at_most("relative determinant error", relative_log_gap(lhs, rhs), DETERMINANT_TOL);
    let spec = Spectrum::of(t)?;
    let mut eig = Vec::with_capacity(n);
    for (side, rank) in [(Side::Inside, p.rank), (Side::Outside, n - p.rank)] {
        if rank > 0 {
            eig.extend(Spectrum::of(&compression(t, p, side)?)?.schur.diag_order);
        }
    }
    let (counts, dist) = assign_to_clusters(&eig, &spec.clusters);
    let misplaced: usize = counts.iter().zip(&spec.clusters).map(|(&k, c)| k.abs_diff(c.multiplicity)).sum();
    report.at_most("atom count mismatch", misplaced as f64, 0.0);
    report.at_most("max distance to assigned cluster", dist, min_cluster_separation(&spec.clusters) / 2.0);
    Ok(report)
}

/// [`verify_block_split`] over random `T`-invariant projections: `P_T(B)` for
/// random regions alternating with flag projections.
pub fn verify_block_splits(table: &SpectralTable, opts: &VerifyOptions) -> CheckReport {
    let digest = table_digest(table, opts, "block-split");
    let mut report = CheckReport::new(
        "block-split",
        "Delta(T) = Delta(A)^tau(p) Delta(C)^tau(1-p) and nu_T = tau(p) nu_A + tau(1-p) nu_C for invariant p",
        &digest,
        DETERMINANT_TOL,
    );
    let t = table.matrix();
    let square = table.curve.square;
    let mut rng = Stream::new(opts.seed ^ 0x7370_6c69);
    let mut worst: Vec<Measurement> = Vec::new();
    let mut errors = Vec::new();
    for k in 0..opts.regions {
        let p = if k % 2 == 0 {
            match hs_projection_in(&table.spectrum, &random_region(&mut rng, square, &table.spectrum)) {
                Ok(p) => p,
                Err(e) => {
                    errors.push(e.to_string());
                    continue;
                }
            }
        } else {
            table.flag_projection(Dyadic::from_f64_floor(rng.uniform(), 52).expect("uniform lies in [0, 1)"))
        };
        match verify_block_split(t, &p) {
            Ok(r) => {
                for m in r.measurements {
                    match worst.iter_mut().find(|w| w.label == m.label) {
                        Some(w) if !(w.value >= m.value) => w.value = m.value,
                        Some(_) => {}
                        None => worst.push(m),
                    }
                }
            }
            Err(e) => errors.push(e.to_string()),
        }
    }
    for m in worst {
        report.at_most(m.label, m.value, m.bound);
    }
    report.at_most("projections rejected", errors.len() as f64, 0.0);
    match errors.first() {
        Some(e) => report.with_note(format!("first rejection: {e}")),
        None => report,
    }
}

/// [`hyperinvariance_check`] for `P_T(B)` over a few random regions.
pub fn verify_hyperinvariance(table: &SpectralTable, opts: &VerifyOptions) -> Result<CheckReport> {
    let digest = table_digest(table, opts, "hyperinvariance");
    let mut report =
        CheckReport::new("hs.hyperinvariance", "P_T(B) is invariant under operators commuting with T", &digest, 1e-8);
    let mut rng = Stream::new(opts.seed ^ 0x6879_7065);
    let mut worst: Vec<Measurement> = Vec::new();
    let mut note = None;
    for _ in 0..4 {
        let p = hs_projection_in(&table.spectrum, &random_region(&mut rng, table.curve.square, &table.spectrum))?;
        let r = hyperinvariance_check(table.matrix(), &p, 6, rng.below(1 << 30) as u64)?;
        note = note.or(r.note);
        for m in r.measurements {
            match worst.iter_mut().find(|w| w.label == m.label) {
                Some(w) if !(w.value >= m.value) => w.value = m.value,
                Some(_) => {}
                None => worst.push(m),
            }
        }
    }
    for m in worst {
        report.at_most(m.label, m.value, m.bound);
    }
    Ok(match note {
        Some(n) => report.with_note(n),
        None => report,
    })
}

/// `|exp(a - b) - 1|`, the relative gap between `exp(a)` and `exp(b)`; zero when
/// both are `-inf` (both determinants vanish).
fn relative_log_gap(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY && b == f64::NEG_INFINITY {
        0.0
    } else if a.is_finite() && b.is_finite() {
        (a - b).exp_m1().abs()
    } else {
        f64::INFINITY
    }
}

/// `Delta(T - lambda) = Delta(E_{D'}(T) - lambda)` at random shifts when the flag
/// is `T`-invariant.
pub fn verify_block_diagonal(table: &SpectralTable, opts: &VerifyOptions) -> CheckReport {
    let digest = table_digest(table, opts, "block-diagonal");
    let mut report = CheckReport::new(
        "block-diagonal.determinant",
        "T and its block-diagonal expectation E_{D'}(T) have equal Fuglede-Kadison determinants at every shift",
        &digest,
        SHIFTED_DETERMINANT_TOL,
    );
    let t = table.matrix();
    let d = table.block_diagonal();
    let mut rng = Stream::new(opts.seed ^ 0x6465_7465);
    let mut worst = 0.0f64;
    for _ in 0..opts.shifts {
        let lambda = random_point(&mut rng, table.curve.square);
        worst = worst.max(relative_log_gap(t.shift(lambda).log_fk_determinant(), d.shift(lambda).log_fk_determinant()));
    }
    report.at_most("max relative determinant error", worst, SHIFTED_DETERMINANT_TOL);
    report
}

/// For `T` commuting with its spectral projections, the compression of `T` to
/// `E(B)` has all its eigenvalues in `B`.
pub fn verify_concentration(table: &SpectralTable, opts: &VerifyOptions) -> CheckReport {
    let digest = table_digest(table, opts, "concentration");
    let report = CheckReport::new(
        "compression.concentration",
        "for T in D', the Brown measure of E(B) T E(B) on E(B)H is concentrated in B",
        &digest,
        0.0,
    );
    let t = table.matrix();
    let comm = commutes_with_cells(table, t, 1).max(
        table.cluster_projs.iter().map(|e| e.matrix.commutator(t).frobenius_norm()).fold(0.0, f64::max),
    );
    if comm > STRUCTURAL_TOL * table.spectrum.norm.max(1.0) {
        return report.skip(format!("T does not commute with its spectral projections (defect {comm:.3e})"));
    }
    let mut report = report;
    let mut rng = Stream::new(opts.seed ^ 0x636f_6e63);
    let square = table.curve.square;
    let mut regions: Vec<Region> = crate::region::dyadic_cells(square, 2);
    regions.extend((0..opts.regions / 4).map(|_| random_region(&mut rng, square, &table.spectrum)));
    let (mut outside, mut worst_dist, mut tested) = (0usize, 0.0f64, 0usize);
    for region in &regions {
        let Ok(e) = table.spectral_projection(region) else { continue };
        let Ok(inside) = table.clusters_in(region) else { continue };
        if e.rank == 0 {
            continue;
        }
        let c = compression(t, &e, Side::Inside).expect("positive rank");
        let Ok(s) = Spectrum::of(&c) else { continue };
        let (counts, dist) = assign_to_clusters(&s.schur.diag_order, &table.clusters);
        outside += counts.iter().zip(&inside).filter(|(_, &inb)| !inb).map(|(&k, _)| k).sum::<usize>();
        worst_dist = worst_dist.max(dist);
        tested += 1;
    }
    report.at_most("eigenvalues outside B", outside as f64, 0.0);
    report.at_most("max distance to assigned cluster", worst_dist, min_cluster_separation(&table.clusters) / 2.0);
    report.with_note(format!("{tested} regions"))
}

/// Normality of `N`, equality of Brown measures, and the spectrum of `Q` for one ordering.
pub fn verify_decomposition_core(table: &SpectralTable, opts: &VerifyOptions) -> Result<Vec<CheckReport>> {
    let digest = table_digest(table, opts, "decomposition");
    let d = decompose_table(table.clone())?;
    let scale = table.spectrum.norm.max(1.0);
    let tol = opts.tol;
    let mut normal = CheckReport::new("decomposition.normality", "N = sum z E({z}) is normal", &digest, tol.normality);
    normal.at_most("|N N* - N* N|_F / |N|_F^2", d.summary.normality, tol.normality);
    let mut measure =
        CheckReport::new("decomposition.measure", "the Brown measure of N equals that of T", &digest, tol.measure);
    measure.at_most("matching distance", d.summary.measure_distance, tol.measure);
    let mut q = CheckReport::new(
        "decomposition.quasinilpotent",
        "every eigenvalue of Q = T - N is 0",
        &digest,
        tol.quasinilpotent,
    );
    q.at_most("max |eigenvalue of Q|", d.summary.q_radius, tol.quasinilpotent * scale);
    q.at_most("|strictly lower part of U* Q U|_F", d.summary.q_lower, STRUCTURAL_TOL * scale);
    let mut split = CheckReport::new("decomposition.sum", "T = N + Q", &digest, 0.0);
    split.at_most("|T - (N + Q)|_F / max(1, |T|)", (&d.t - &(&d.n + &d.q)).frobenius_norm() / scale, 1e-15);
    Ok(vec![normal, measure, q, split])
}

/// Ids of the checks run by [`verify_decomposition`].
pub const CHECK_IDS: &[&str] = &[
    "decomposition.normality",
    "decomposition.measure",
    "decomposition.quasinilpotent",
    "decomposition.sum",
    "flag.identity",
    "hs.trace",
    "hs.invariance",
    "hs.corners",
    "hs.monotone",
    "hs.hyperinvariance",
    "measure.trace",
    "measure.product",
    "measure.additivity",
    "measure.cover",
    "measure.regions",
    "convergence.rate",
    "convergence.eigen-radius",
    "convergence.binomial",
    "convergence.final-radius",
    "block-split",
    "block-diagonal.determinant",
    "block-diagonal.table",
    "block-diagonal.convergence.rate",
    "block-diagonal.convergence.eigen-radius",
    "block-diagonal.convergence.binomial",
    "block-diagonal.convergence.final-radius",
    "block-diagonal.compression.concentration",
];

/// Every check for one matrix and curve: the decomposition itself, the flag
/// identity, invariant-projection properties, the measure laws, convergence
/// rates for `T` and for its block-diagonal expectation, concentration, block
/// splitting and determinant agreement.
pub fn verify_decomposition(t: &ComplexMatrix, curve: CurveSpec, opts: &VerifyOptions) -> Result<Vec<CheckReport>> {
    verify_selected(t, curve, opts, |_| true)
}

/// [`verify_decomposition`] restricted to the ids accepted by `wanted`; groups
/// of checks with no wanted id are not run.
pub fn verify_selected(
    t: &ComplexMatrix,
    curve: CurveSpec,
    opts: &VerifyOptions,
    wanted: impl Fn(&str) -> bool,
) -> Result<Vec<CheckReport>> {
    let any = |prefix: &str| CHECK_IDS.iter().any(|id| id.starts_with(prefix) && wanted(id));
    let table = SpectralTable::build(t, curve)?;
    let mut out = Vec::new();
    if any("decomposition.") {
        out.extend(verify_decomposition_core(&table, opts)?);
    }
    if any("flag.") {
        out.push(verify_flag_identity(&table, opts));
    }
    if any("hs.trace") || any("hs.invariance") || any("hs.corners") {
        out.extend(verify_flag_projections(&table, opts));
    }
    if any("hs.monotone") {
        out.push(verify_monotonicity(&table.spectrum, table.curve.square, opts));
    }
    if any("hs.hyperinvariance") {
        out.push(verify_hyperinvariance(&table, opts)?);
    }
    if any("measure.") {
        out.extend(verify_measure_laws(&table, opts));
    }
    if any("convergence.") {
        // The commuting-case checks run on E_{D'}(T) below; on T itself they are
        // kept only when T satisfies their hypothesis.
        out.extend(verify_convergence(&table, opts).into_iter().filter(|r| r.verdict != Verdict::Skipped));
    }
    if any("block-split") {
        out.push(verify_block_splits(&table, opts));
    }
    if any("block-diagonal.determinant") {
        out.push(verify_block_diagonal(&table, opts));
    }
    if any("block-diagonal.table") || any("block-diagonal.co") {
        let d = table.block_diagonal();
        match SpectralTable::build(&d, curve) {
            Ok(dt) => {
                for mut r in verify_convergence(&dt, opts).into_iter().chain([verify_concentration(&dt, opts)]) {
                    r.id = format!("block-diagonal.{}", r.id);
                    out.push(r);
                }
            }
            Err(e) => {
                let digest = table_digest(&table, opts, "block-diagonal");
                out.push(
                    CheckReport::new("block-diagonal.table", "E_{D'}(T) admits a table", &digest, 0.0).skip(e.to_string()),
                );
            }
        }
    }
    out.retain(|r| wanted(&r.id));
    Ok(out)
}
