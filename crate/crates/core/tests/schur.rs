use brownflag::ensemble::EnsembleSpec;
use brownflag::schur::{clustering_threshold, reorder_schur, schur_form, Spectrum};
use brownflag::{ComplexMatrix, C64};
use nalgebra::DMatrix;
use proptest::prelude::*;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Characteristic polynomial coefficients, highest degree first, by Faddeev-LeVerrier.
fn char_poly(t: &ComplexMatrix) -> Vec<C64> {
    let n = t.n();
    let a = t.as_dmatrix();
    let mut coeffs = vec![ONE];
    let mut m = DMatrix::<C64>::zeros(n, n);
    for k in 1..=n {
        let c_prev = *coeffs.last().unwrap();
        m = a * &m + DMatrix::<C64>::identity(n, n) * c_prev;
        let am = a * &m;
        coeffs.push(-am.trace() / C64::new(k as f64, 0.0));
    }
    coeffs
}

fn horner(p: &[C64], z: C64) -> C64 {
    p.iter().fold(ZERO, |acc, &c| acc * z + c)
}

/// Durand-Kerner iteration for a monic polynomial.
fn roots(p: &[C64]) -> Vec<C64> {
    let deg = p.len() - 1;
    let seed = C64::new(0.4, 0.9);
    let mut z: Vec<C64> = (0..deg).map(|k| seed.powu(k as u32)).collect();
    for _ in 0..2000 {
        let mut moved = 0.0f64;
        for i in 0..deg {
            let mut denom = ONE;
            for j in 0..deg {
                if i != j {
                    denom *= z[i] - z[j];
                }
            }
            let step = horner(p, z[i]) / denom;
            z[i] -= step;
            moved = moved.max(step.norm());
        }
        if moved < 1e-15 {
            break;
        }
    }
    z
}

/// Greedy nearest matching; returns the largest matched distance.
fn match_distance(a: &[C64], b: &[C64]) -> f64 {
    let mut left: Vec<C64> = b.to_vec();
    let mut worst = 0.0f64;
    for &x in a {
        let (i, d) = left.iter().enumerate().map(|(i, &y)| (i, (x - y).norm())).min_by(|p, q| p.1.total_cmp(&q.1)).unwrap();
        worst = worst.max(d);
        left.swap_remove(i);
    }
    worst
}

fn smallest_singular_value(t: &ComplexMatrix, lambda: C64) -> f64 {
    t.shift(lambda).singular_values().into_iter().fold(f64::INFINITY, f64::min)
}

#[test]
fn ginibre_6_matches_characteristic_polynomial_roots() {
    let t = "ginibre:n=6,seed=7".parse::<EnsembleSpec>().unwrap().sample().unwrap();
    let s = schur_form(&t).unwrap();
    assert!((&s.reconstruct() - &t).frobenius_norm() <= 1e-10);
    assert!(s.triangular.strictly_lower_norm() == 0.0);
    let oracle = roots(&char_poly(&t));
    assert!(match_distance(&s.diag_order, &oracle) <= 1e-8);
}

#[test]
fn reordering_two_first_gives_eigenvector_oracle() {
    let t = ComplexMatrix::from_real_rows(&[&[1.0, 1.0], &[0.0, 2.0]]).unwrap();
    let s = schur_form(&t).unwrap();
    let (r, report) = reorder_schur(&s, |a, b| b.re.total_cmp(&a.re), clustering_threshold(2.0));
    assert_eq!(report.swaps, 1);
    assert!((r.diag_order[0] - C64::new(2.0, 0.0)).norm() <= 1e-12);
    // eigenvector of 2 is (1, 1)/sqrt(2), up to a phase
    let u = r.unitary.as_dmatrix();
    let v = (u[(0, 0)], u[(1, 0)]);
    let phase = v.0 / v.0.norm();
    let h = std::f64::consts::FRAC_1_SQRT_2;
    assert!((v.0 / phase - C64::new(h, 0.0)).norm() <= 1e-12);
    assert!((v.1 / phase - C64::new(h, 0.0)).norm() <= 1e-12);
    assert!((&r.reconstruct() - &t).frobenius_norm() <= 1e-12);
}

#[test]
fn unitary_similarity_preserves_spectrum() {
    let d: Vec<C64> = [1.0, -2.0, 0.5].iter().map(|&x| C64::new(x, 0.3 * x)).collect();
    let u = brownflag::ensemble::Stream::new(11).haar_unitary(3);
    let u = ComplexMatrix::from_dmatrix(u).unwrap();
    let t = ComplexMatrix::from_diagonal(&d).conjugate_by(&u);
    let spec = Spectrum::of(&t).unwrap();
    assert_eq!(spec.clusters.len(), 3);
    assert!(match_distance(&spec.schur.diag_order, &d) <= 1e-12);
}

fn matrix_strategy(max_n: usize) -> impl Strategy<Value = ComplexMatrix> {
    (1..=max_n).prop_flat_map(|n| {
        prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0), n * n).prop_map(move |e| {
            ComplexMatrix::new(n, e.into_iter().map(|(re, im)| C64::new(re, im)).collect()).unwrap()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn schur_form_is_a_unitary_triangularization(t in matrix_strategy(8)) {
        let s = schur_form(&t).unwrap();
        let scale = t.operator_norm().max(1.0);
        prop_assert!((&s.reconstruct() - &t).frobenius_norm() <= 1e-10 * scale);
        prop_assert!(s.unitarity_error() <= 1e-12);
        prop_assert_eq!(s.triangular.strictly_lower_norm(), 0.0);
        let trace: C64 = s.diag_order.iter().sum();
        prop_assert!((trace - t.as_dmatrix().trace()).norm() <= 1e-10 * scale * t.n() as f64);
        for &lambda in &s.diag_order {
            prop_assert!(smallest_singular_value(&t, lambda) <= 1e-8 * scale);
        }
    }

    #[test]
    fn reordering_sorts_and_keeps_the_similarity_class(t in matrix_strategy(7)) {
        let s = schur_form(&t).unwrap();
        let scale = t.operator_norm().max(1.0);
        let cmp = |a: C64, b: C64| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im));
        let (r, report) = reorder_schur(&s, cmp, clustering_threshold(scale));
        if report.skipped.is_empty() {
            prop_assert!(r.diag_order.windows(2).all(|w| cmp(w[0], w[1]).is_le()));
        }
        prop_assert!(match_distance(&r.diag_order, &s.diag_order) <= 1e-10 * scale);
        prop_assert!((&r.reconstruct() - &t).frobenius_norm() <= 1e-10 * scale);
        prop_assert!(r.unitarity_error() <= 1e-12);
        // Reordering a sorted form is the identity.
        let (again, rep2) = reorder_schur(&r, cmp, clustering_threshold(scale));
        if report.skipped.is_empty() {
            prop_assert_eq!(rep2.swaps, 0);
            prop_assert_eq!(again.triangular, r.triangular);
        }
    }

    #[test]
    fn clusters_partition_the_diagonal(t in matrix_strategy(6)) {
        let spec = Spectrum::of(&t).unwrap();
        let total: usize = spec.clusters.iter().map(|c| c.multiplicity).sum();
        prop_assert_eq!(total, t.n());
        for (i, &c) in spec.assignment.iter().enumerate() {
            prop_assert!(spec.clusters[c].members.contains(&spec.schur.diag_order[i]));
        }
    }
}
