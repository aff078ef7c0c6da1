use brownflag::ensemble::{corpus, EnsembleKind, EnsembleSpec, Stream};
use brownflag::{ComplexMatrix, C64};
use proptest::prelude::*;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sample(spec: &str) -> ComplexMatrix {
    spec.parse::<EnsembleSpec>().unwrap().sample().unwrap()
}

/// Box-Muller from the raw ChaCha8 words.
fn gaussian_oracle(rng: &mut ChaCha8Rng) -> C64 {
    let mut u = || (rng.next_u64() >> 11) as f64 / 9007199254740992.0;
    let (u1, u2) = (u(), u());
    let r = (-(1.0 - u1).ln()).sqrt();
    let a = 2.0 * std::f64::consts::PI * u2;
    C64::new(r * a.cos(), r * a.sin())
}

/// First 16 hex digits of the matrix digest of every corpus entry.
const FROZEN: &[(&str, &str)] = &[
        ("ginibre:n=2,seed=1", "3c1828acc1bd21f4"),
        ("ginibre:n=3,seed=2", "4858aaf540146aec"),
        ("ginibre:n=4,seed=3", "35ceaf68243cdd7f"),
        ("ginibre:n=6,seed=7", "abfb054107925dc0"),
        ("ginibre:n=8,seed=5", "a568c9e148df8a93"),
        ("ginibre:n=12,seed=6", "f5fe90d7284968d6"),
        ("ginibre:n=16,seed=7", "53e0ea9a034753b7"),
        ("ginibre:n=24,seed=8", "0058ce02c2cdc0f0"),
        ("ginibre:n=32,seed=7", "687741f4c8a6c8b1"),
        ("ginibre:n=48,seed=10", "295221a46bd9f667"),
        ("ginibre:n=64,seed=7", "7118562d7ff8ce44"),
        ("elliptic:n=8,rho=0.5,seed=11", "b0af72425025fea0"),
        ("elliptic:n=10,rho=-1,seed=12", "463f622719ac9e34"),
        ("elliptic:n=12,rho=1,seed=13", "15d89315bf2f5ff2"),
        ("elliptic:n=16,rho=-0.5,seed=14", "331fa3dc1bc1814b"),
        ("elliptic:n=24,rho=0.9,seed=15", "89315bcbf644e005"),
        ("elliptic:n=32,rho=0,seed=16", "3ce2b9b3c3fa0f0f"),
        ("jordan:n=2,lambda=0", "9b5a45b2cac5fa9b"),
        ("jordan:n=3,lambda=0.5+0.5i", "2928329e0ab5bdad"),
        ("jordan:n=4,lambda=2", "fba6b70efedc3d32"),
        ("jordan:n=6,lambda=-1", "ad65913ee0940a56"),
        ("jordan:n=8,lambda=0", "435949dd59c7eede"),
        ("strict_upper:n=2,seed=21", "845fabef13f359ee"),
        ("strict_upper:n=5,seed=22", "6d5645f2f78e5807"),
        ("strict_upper:n=8,seed=23", "6ca97483acb2a70c"),
        ("strict_upper:n=16,seed=24", "d66afc86357be8e1"),
        ("strict_upper:n=32,seed=25", "9f63ef2a9fdc64ce"),
        ("normal_plus_nilpotent:n=4,s=1,seed=31", "a3a220f2ca66fca8"),
        ("normal_plus_nilpotent:n=8,s=0.5,seed=32", "535a8e68b1cd86b5"),
        ("normal_plus_nilpotent:n=16,s=0.25,seed=33", "96f9baa58f4ab90e"),
        ("normal_plus_nilpotent:n=32,s=0.1,seed=34", "4440785967ee3c1e"),
        ("normal_plus_nilpotent:n=48,s=0.3,seed=35", "152ab8967f821d1f"),
        ("normal_plus_nilpotent:n=64,s=0.2,seed=36", "c1c8b2b9c98b428c"),
        ("diag_perturb:n=4,eps=0e0,seed=41", "8a958bbb23b28683"),
        ("diag_perturb:n=8,eps=0e0,seed=42", "f9b6b3493f9103d3"),
        ("diag_perturb:n=8,eps=1e-12,seed=43", "6dd0398d48fa6d0c"),
        ("diag_perturb:n=12,eps=1e-2,seed=44", "1253ee951fd9c4d6"),
        ("diag_perturb:n=16,eps=1e-6,seed=45", "19ed5ce4284c7f21"),
        ("diag_perturb:n=24,eps=1e-3,seed=46", "92ca5fc0d1bb5fb8"),
        ("diag_perturb:n=32,eps=1e-9,seed=47", "1e1440d7945de18a"),
];

#[test]
fn corpus_samples_are_frozen() {
    let specs = corpus();
    assert_eq!(specs.len(), FROZEN.len());
    for (spec, (name, digest)) in specs.iter().zip(FROZEN) {
        assert_eq!(&spec.to_string(), name);
        assert_eq!(&spec.sample().unwrap().digest()[..16], *digest, "{name}");
    }
}

#[test]
fn corpus_covers_the_required_families() {
    let names: Vec<String> = corpus().iter().map(|s| s.to_string()).collect();
    assert!(names.len() >= 40);
    assert!(names.iter().any(|s| s == "jordan:n=4,lambda=2"));
    assert!(names.iter().any(|s| s == "ginibre:n=64,seed=7"));
    for family in ["ginibre", "elliptic", "jordan", "strict_upper", "normal_plus_nilpotent", "diag_perturb"] {
        assert!(names.iter().any(|s| s.starts_with(family)), "{family}");
    }
    // boundary stress: exact lattice diagonals and tiny perturbations of them
    assert!(names.iter().any(|s| s.starts_with("diag_perturb") && s.contains("eps=0e0")));
    assert!(names.iter().any(|s| s.starts_with("diag_perturb") && s.contains("eps=1e-12")));
}

#[test]
fn ginibre_entries_follow_the_stream() {
    let t = sample("ginibre:n=3,seed=9");
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let s = 1.0 / 3f64.sqrt();
    for z in t.row_major() {
        let g = gaussian_oracle(&mut rng) * s;
        assert!((z - g).norm() <= 1e-15);
    }
    let mut a = Stream::new(9);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..100 {
        assert!((a.complex_gaussian() - gaussian_oracle(&mut rng)).norm() <= 1e-15);
    }
}

#[test]
fn deterministic_examples() {
    assert_eq!(sample("jordan:n=4,lambda=2"), ComplexMatrix::jordan(C64::new(2.0, 0.0), 4));
    assert_eq!(sample("strict_upper:n=1,seed=3"), ComplexMatrix::zeros(1));
    let norm = sample("ginibre:n=32,seed=7").operator_norm();
    assert!((1.5..=3.0).contains(&norm), "{norm}");
    assert_eq!(sample("ginibre:n=8,seed=1"), sample("ginibre:n=8,seed=1"));
    assert_ne!(sample("ginibre:n=8,seed=1"), sample("ginibre:n=8,seed=2"));
}

#[test]
fn elliptic_extremes_are_hermitian_and_skew() {
    let h = sample("elliptic:n=12,rho=1,seed=2");
    assert!((&h - &h.adjoint()).max_abs() <= 1e-15);
    let k = sample("elliptic:n=12,rho=-1,seed=2");
    assert!((&k + &k.adjoint()).max_abs() <= 1e-15);
}

#[test]
fn elliptic_correlation_matches_rho() {
    // E[T_ij T_ji] = rho / n off the diagonal
    let n = 64;
    let t = sample("elliptic:n=64,rho=0.5,seed=3");
    let mut sum = C64::new(0.0, 0.0);
    let mut count = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                sum += t.get(i, j) * t.get(j, i);
                count += 1.0;
            }
        }
    }
    let mean = sum / count * n as f64;
    assert!((mean - C64::new(0.5, 0.0)).norm() <= 0.05, "{mean}");
}

#[test]
fn normal_plus_nilpotent_without_nilpotent_is_normal() {
    let t = sample("normal_plus_nilpotent:n=10,s=0,seed=4");
    assert!(t.commutator(&t.adjoint()).max_abs() <= 1e-12);
    let t = sample("normal_plus_nilpotent:n=10,s=1,seed=4");
    assert!(t.commutator(&t.adjoint()).max_abs() > 1e-3);
}

#[test]
fn diag_perturb_without_noise_sits_on_the_lattice() {
    let t = sample("diag_perturb:n=12,eps=0,seed=44");
    assert_eq!(t.get(0, 0), C64::new(1.0, 0.0));
    for i in 0..12 {
        let z = t.get(i, i);
        let on = |x: f64| [-0.75, -0.375, 0.0, 0.375, 0.75, 1.0].contains(&x);
        assert!(on(z.re) && on(z.im) && z.norm() <= 1.0, "{z}");
        for j in 0..12 {
            if i != j {
                assert_eq!(t.get(i, j), C64::new(0.0, 0.0));
            }
        }
    }
}

#[test]
fn invalid_specs_are_rejected() {
    for bad in [
        "ginibre:n=0,seed=1",
        "ginibre:n=5000,seed=1",
        "elliptic:n=4,rho=2,seed=1",
        "elliptic:n=4,seed=1",
        "jordan:n=3",
        "jordan:n=3,lambda=inf",
        "normal_plus_nilpotent:n=4,s=-1,seed=1",
        "diag_perturb:n=4,eps=nan,seed=1",
        "ginibre:n=4,rho=0.5,seed=1",
        "wigner:n=4,seed=1",
        "ginibre",
    ] {
        let parsed = bad.parse::<EnsembleSpec>();
        assert!(parsed.is_err() || parsed.unwrap().sample().is_err(), "{bad}");
    }
    assert!(EnsembleSpec::new(EnsembleKind::Ginibre, 0, 1).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn strict_upper_is_exactly_nilpotent(n in 1usize..=12, seed in any::<u64>()) {
        let t = EnsembleSpec::new(EnsembleKind::StrictUpper, n, seed).unwrap().sample().unwrap();
        prop_assert_eq!(t.pow(n), ComplexMatrix::zeros(n));
        prop_assert_eq!(t.strictly_lower_norm(), 0.0);
        prop_assert!(t.diagonal().iter().all(|z| *z == C64::new(0.0, 0.0)));
    }

    #[test]
    fn specs_round_trip_through_strings_and_json(n in 1usize..=64, seed in any::<u64>(), rho in -1.0f64..=1.0) {
        let spec = EnsembleSpec::new(EnsembleKind::Elliptic { rho }, n, seed).unwrap();
        prop_assert_eq!(spec.to_string().parse::<EnsembleSpec>().unwrap(), spec);
        let json = serde_json::to_string(&spec).unwrap();
        prop_assert_eq!(serde_json::from_str::<EnsembleSpec>(&json).unwrap(), spec);
    }

    #[test]
    fn uniforms_lie_in_the_unit_interval(seed in any::<u64>()) {
        let mut s = Stream::new(seed);
        for _ in 0..64 {
            let u = s.uniform();
            prop_assert!((0.0..1.0).contains(&u));
        }
    }
}
