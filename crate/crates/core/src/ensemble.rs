//! Seeded random test matrices.
//!
//! Every random draw comes from a ChaCha8 stream seeded with the spec's seed.
//! Uniforms are `(next_u64 >> 11) * 2^-53`; a standard complex Gaussian
//! (`E|z|^2 = 1`) is produced by Box–Muller from two uniforms `u1, u2` as
//! `sqrt(-ln(1 - u1)) * exp(2 pi i u2)`. Entries are drawn in row-major order.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{ComplexMatrix, C64, ZERO};

/// Deterministic source of uniforms and complex Gaussians.
pub struct Stream(ChaCha8Rng);

impl Stream {
    pub fn new(seed: u64) -> Self {
        Stream(ChaCha8Rng::seed_from_u64(seed))
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn below(&mut self, k: usize) -> usize {
        ((self.uniform() * k as f64) as usize).min(k - 1)
    }

    pub fn complex_gaussian(&mut self) -> C64 {
        let u1 = self.uniform();
        let u2 = self.uniform();
        C64::from_polar((-(1.0 - u1).ln()).sqrt(), TAU * u2)
    }

    /// Uniformly distributed unit vector in `C^n`.
    pub fn unit_vector(&mut self, n: usize) -> Vec<C64> {
        loop {
            let v: Vec<C64> = (0..n).map(|_| self.complex_gaussian()).collect();
            let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if norm > 0.0 {
                return v.into_iter().map(|z| z / norm).collect();
            }
        }
    }

    /// `n x n` matrix of independent standard complex Gaussians, row-major.
    pub fn gaussian_matrix(&mut self, n: usize) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = self.complex_gaussian();
            }
        }
        m
    }

    /// Haar unitary: QR of a Gaussian matrix with the phases of `diag(R)` divided out.
    pub fn haar_unitary(&mut self, n: usize) -> DMatrix<C64> {
        let qr = self.gaussian_matrix(n).qr();
        let (mut q, r) = qr.unpack();
        for j in 0..n {
            let d = r[(j, j)];
            let phase = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
            for i in 0..n {
                q[(i, j)] *= phase;
            }
        }
        q
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnsembleKind {
    /// i.i.d. standard complex Gaussians divided by `sqrt(n)`.
    Ginibre,
    /// `sqrt((1 + rho) / 2) H + i sqrt((1 - rho) / 2) K` with `H`, `K` independent
    /// Hermitian Gaussian matrices, so that `E[T_ij T_ji] = rho / n`.
    Elliptic { rho: f64 },
    /// One Jordan block; no randomness.
    Jordan { lambda: C64 },
    /// Gaussians divided by `sqrt(n)` strictly above the diagonal, zero elsewhere.
    StrictUpper,
    /// `U (D + s S) U^*`: `D` Gaussian diagonal, `S` strictly upper Gaussian / `sqrt(n)`,
    /// `U` Haar.
    NormalPlusNilpotent { s: f64 },
    /// Diagonal drawn from a lattice lying on the dyadic grid lines of the unit-norm
    /// square, with `1` always present, plus `eps` times a Ginibre matrix.
    DiagPerturb { eps: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    #[serde(flatten)]
    pub kind: EnsembleKind,
    pub n: usize,
    pub seed: u64,
}

/// Points with both coordinates in `{0, +-0.375, +-0.75}` and modulus at most 1.
/// For a matrix of norm 1 these sit on grid lines of levels 1 to 3.
fn boundary_lattice() -> Vec<C64> {
    let coords = [-0.75, -0.375, 0.0, 0.375, 0.75];
    let mut out = Vec::new();
    for &y in &coords {
        for &x in &coords {
            let z = C64::new(x, y);
            if z.norm() <= 1.0 {
                out.push(z);
            }
        }
    }
    out
}

impl EnsembleSpec {
    pub fn new(kind: EnsembleKind, n: usize, seed: u64) -> Result<Self> {
        let spec = EnsembleSpec { kind, n, seed };
        spec.check()?;
        Ok(spec)
    }

    fn check(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidEnsemble(m));
        if self.n == 0 {
            return bad("n must be at least 1".into());
        }
        if self.n > 4096 {
            return bad(format!("n = {} is larger than 4096", self.n));
        }
        match self.kind {
            EnsembleKind::Elliptic { rho } if !(-1.0..=1.0).contains(&rho) => bad(format!("|rho| > 1: {rho}")),
            EnsembleKind::Jordan { lambda } if !(lambda.re.is_finite() && lambda.im.is_finite()) => {
                bad("lambda must be finite".into())
            }
            EnsembleKind::NormalPlusNilpotent { s } if !(s >= 0.0 && s.is_finite()) => {
                bad(format!("s must be finite and nonnegative: {s}"))
            }
            EnsembleKind::DiagPerturb { eps } if !(eps >= 0.0 && eps.is_finite()) => {
                bad(format!("eps must be finite and nonnegative: {eps}"))
            }
            _ => Ok(()),
        }
    }

    pub fn sample(&self) -> Result<ComplexMatrix> {
        self.check()?;
        let n = self.n;
        let scale = C64::new(1.0 / (n as f64).sqrt(), 0.0);
        let mut rng = Stream::new(self.seed);
        let m = match self.kind {
            EnsembleKind::Ginibre => rng.gaussian_matrix(n) * scale,
            EnsembleKind::Elliptic { rho } => {
                let herm = |g: DMatrix<C64>| (&g + g.adjoint()) * C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
                let h = herm(rng.gaussian_matrix(n));
                let k = herm(rng.gaussian_matrix(n));
                let a = ((1.0 + rho) / 2.0).sqrt();
                let b = ((1.0 - rho) / 2.0).sqrt();
                (h * C64::new(a, 0.0) + k * C64::new(0.0, b)) * scale
            }
            EnsembleKind::Jordan { lambda } => return Ok(ComplexMatrix::jordan(lambda, n)),
            EnsembleKind::StrictUpper => {
                let g = rng.gaussian_matrix(n);
                DMatrix::from_fn(n, n, |i, j| if j > i { g[(i, j)] * scale } else { ZERO })
            }
            EnsembleKind::NormalPlusNilpotent { s } => {
                let d: Vec<C64> = (0..n).map(|_| rng.complex_gaussian()).collect();
                let g = rng.gaussian_matrix(n);
                let u = rng.haar_unitary(n);
                let inner = DMatrix::from_fn(n, n, |i, j| match i.cmp(&j) {
                    std::cmp::Ordering::Equal => d[i],
                    std::cmp::Ordering::Less => g[(i, j)] * scale * s,
                    std::cmp::Ordering::Greater => ZERO,
                });
                &u * inner * u.adjoint()
            }
            EnsembleKind::DiagPerturb { eps } => {
                let lattice = boundary_lattice();
                let d: Vec<C64> =
                    (0..n).map(|i| if i == 0 { C64::new(1.0, 0.0) } else { lattice[rng.below(lattice.len())] }).collect();
                let g = rng.gaussian_matrix(n);
                DMatrix::from_fn(n, n, |i, j| {
                    let base = if i == j { d[i] } else { ZERO };
                    if eps == 0.0 {
                        base
                    } else {
                        base + g[(i, j)] * scale * eps
                    }
                })
            }
        };
        ComplexMatrix::from_dmatrix(m)
    }

    fn name(&self) -> &'static str {
        match self.kind {
            EnsembleKind::Ginibre => "ginibre",
            EnsembleKind::Elliptic { .. } => "elliptic",
            EnsembleKind::Jordan { .. } => "jordan",
            EnsembleKind::StrictUpper => "strict_upper",
            EnsembleKind::NormalPlusNilpotent { .. } => "normal_plus_nilpotent",
            EnsembleKind::DiagPerturb { .. } => "diag_perturb",
        }
    }
}

/// Canonical spec string, e.g. `ginibre:n=32,seed=7` or `jordan:n=4,lambda=2`.
impl fmt::Display for EnsembleSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:n={}", self.name(), self.n)?;
        match self.kind {
            EnsembleKind::Elliptic { rho } => write!(f, ",rho={rho}")?,
            EnsembleKind::Jordan { lambda } => {
                if lambda.im == 0.0 {
                    write!(f, ",lambda={}", lambda.re)?
                } else {
                    write!(f, ",lambda={}", lambda)?
                }
            }
            EnsembleKind::NormalPlusNilpotent { s } => write!(f, ",s={s}")?,
            EnsembleKind::DiagPerturb { eps } => write!(f, ",eps={eps:e}")?,
            _ => {}
        }
        if !matches!(self.kind, EnsembleKind::Jordan { .. }) {
            write!(f, ",seed={}", self.seed)?;
        }
        Ok(())
    }
}

impl FromStr for EnsembleSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let perr = |m: String| Error::parse("ensemble", m);
        let (name, params) = s.split_once(':').ok_or_else(|| perr(format!("expected kind:params, got {s:?}")))?;
        let mut n = None;
        let mut seed = 0u64;
        let mut extra: Option<(&str, &str)> = None;
        for kv in params.split(',') {
            let (k, v) = kv.split_once('=').ok_or_else(|| perr(format!("expected key=value, got {kv:?}")))?;
            let (k, v) = (k.trim(), v.trim());
            match k {
                "n" => n = Some(v.parse::<usize>().map_err(|_| perr(format!("bad n {v:?}")))?),
                "seed" => seed = v.parse().map_err(|_| perr(format!("bad seed {v:?}")))?,
                _ if extra.is_none() => extra = Some((k, v)),
                _ => return Err(perr(format!("unexpected parameter {k:?}"))),
            }
        }
        let n = n.ok_or_else(|| perr("missing n".into()))?;
        let real = |key: &str| -> Result<f64> {
            match extra {
                Some((k, v)) if k == key => v.parse().map_err(|_| perr(format!("bad {key} {v:?}"))),
                Some((k, _)) => Err(perr(format!("unexpected parameter {k:?}"))),
                None => Err(perr(format!("missing {key}"))),
            }
        };
        let none = || match extra {
            Some((k, _)) => Err(perr(format!("unexpected parameter {k:?}"))),
            None => Ok(()),
        };
        let kind = match name.trim() {
            "ginibre" => none().map(|_| EnsembleKind::Ginibre)?,
            "strict_upper" => none().map(|_| EnsembleKind::StrictUpper)?,
            "elliptic" => EnsembleKind::Elliptic { rho: real("rho")? },
            "normal_plus_nilpotent" => EnsembleKind::NormalPlusNilpotent { s: real("s")? },
            "diag_perturb" => EnsembleKind::DiagPerturb { eps: real("eps")? },
            "jordan" => {
                let lambda = match extra {
                    Some(("lambda", v)) => v.parse::<C64>().map_err(|_| perr(format!("bad lambda {v:?}")))?,
                    Some((k, _)) => return Err(perr(format!("unexpected parameter {k:?}"))),
                    None => return Err(perr("missing lambda".into())),
                };
                EnsembleKind::Jordan { lambda }
            }
            other => return Err(perr(format!("unknown ensemble {other:?}"))),
        };
        EnsembleSpec::new(kind, n, seed)
    }
}

/// The fixed corpus used by the acceptance suite: 40 specs, sizes 2 to 64.
pub fn corpus() -> Vec<EnsembleSpec> {
    const SPECS: &[&str] = &[
        "ginibre:n=2,seed=1",
        "ginibre:n=3,seed=2",
        "ginibre:n=4,seed=3",
        "ginibre:n=6,seed=7",
        "ginibre:n=8,seed=5",
        "ginibre:n=12,seed=6",
        "ginibre:n=16,seed=7",
        "ginibre:n=24,seed=8",
        "ginibre:n=32,seed=7",
        "ginibre:n=48,seed=10",
        "ginibre:n=64,seed=7",
        "elliptic:n=8,rho=0.5,seed=11",
        "elliptic:n=10,rho=-1,seed=12",
        "elliptic:n=12,rho=1,seed=13",
        "elliptic:n=16,rho=-0.5,seed=14",
        "elliptic:n=24,rho=0.9,seed=15",
        "elliptic:n=32,rho=0,seed=16",
        "jordan:n=2,lambda=0",
        "jordan:n=3,lambda=0.5+0.5i",
        "jordan:n=4,lambda=2",
        "jordan:n=6,lambda=-1",
        "jordan:n=8,lambda=0",
        "strict_upper:n=2,seed=21",
        "strict_upper:n=5,seed=22",
        "strict_upper:n=8,seed=23",
        "strict_upper:n=16,seed=24",
        "strict_upper:n=32,seed=25",
        "normal_plus_nilpotent:n=4,s=1,seed=31",
        "normal_plus_nilpotent:n=8,s=0.5,seed=32",
        "normal_plus_nilpotent:n=16,s=0.25,seed=33",
        "normal_plus_nilpotent:n=32,s=0.1,seed=34",
        "normal_plus_nilpotent:n=48,s=0.3,seed=35",
        "normal_plus_nilpotent:n=64,s=0.2,seed=36",
        "diag_perturb:n=4,eps=0,seed=41",
        "diag_perturb:n=8,eps=0,seed=42",
        "diag_perturb:n=8,eps=1e-12,seed=43",
        "diag_perturb:n=12,eps=1e-2,seed=44",
        "diag_perturb:n=16,eps=1e-6,seed=45",
        "diag_perturb:n=24,eps=1e-3,seed=46",
        "diag_perturb:n=32,eps=1e-9,seed=47",
    ];
    SPECS.iter().map(|s| s.parse().expect("corpus specs are valid")).collect()
}
