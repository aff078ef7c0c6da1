//! Replays the checked-in fuzz corpus through the fuzz target bodies.

use std::fs;
use std::path::PathBuf;

use brownflag::curve::CurveSpec;
use brownflag::dyadic::Dyadic;
use brownflag::ensemble::EnsembleSpec;
use brownflag::grid::Square;
use brownflag::region::Region;
use brownflag::{ComplexMatrix, C64};

/// `(file name, contents)` for every seed of `target`, sorted by name.
fn seeds(target: &str) -> Vec<(String, String)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<(String, String)> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read_to_string(&p).unwrap())
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

/// Seeds named `bad*`, `null*`, `short*` or `above*` must be rejected; the rest accepted.
fn expect_valid(name: &str) -> bool {
    !["bad", "null", "short", "above"].iter().any(|p| name.starts_with(p))
}

#[test]
fn matrix_json_seeds() {
    for (name, s) in seeds("matrix_json") {
        let parsed = ComplexMatrix::from_json(&s);
        assert_eq!(parsed.is_ok(), expect_valid(&name), "{name}");
        if let Ok(m) = parsed {
            assert!(m.is_finite());
            assert_eq!(ComplexMatrix::from_json(&m.to_json().unwrap()).unwrap(), m);
        }
    }
}

#[test]
fn curve_spec_seeds() {
    for (name, s) in seeds("curve_spec") {
        let parsed = s.parse::<CurveSpec>();
        assert_eq!(parsed.is_ok(), expect_valid(&name), "{name}");
        if let Ok(spec) = parsed {
            assert_eq!(spec.to_string().parse::<CurveSpec>().unwrap(), spec);
            let curve = spec.bind(Square::new(1.0));
            let t = curve.min_preimage(C64::new(0.25, -0.5)).unwrap();
            let _ = curve.eval(t);
        }
    }
}

#[test]
fn region_spec_seeds() {
    for (name, s) in seeds("region_spec") {
        let parsed = Region::parse(&s, Square::new(1.0));
        assert_eq!(parsed.is_ok(), expect_valid(&name), "{name}");
        if let Ok(r) = parsed {
            let z = C64::new(0.1, 0.2);
            assert_eq!(r.clone().complement().contains(z), !r.contains(z));
        }
    }
}

#[test]
fn ensemble_spec_seeds() {
    for (name, s) in seeds("ensemble_spec") {
        let parsed = s.parse::<EnsembleSpec>().and_then(|spec| spec.sample().map(|_| spec));
        assert_eq!(parsed.is_ok(), expect_valid(&name), "{name}");
        if let Ok(spec) = parsed {
            assert_eq!(spec.to_string().parse::<EnsembleSpec>().unwrap(), spec);
            assert!(spec.sample().unwrap().is_finite());
        }
    }
}

#[test]
fn dyadic_seeds() {
    for (name, s) in seeds("dyadic") {
        let parsed = s.parse::<Dyadic>();
        assert_eq!(parsed.is_ok(), expect_valid(&name), "{name}");
        if let Ok(d) = parsed {
            assert!(d <= Dyadic::ONE);
            assert_eq!(d.to_string().parse::<Dyadic>().unwrap(), d);
        }
    }
}
