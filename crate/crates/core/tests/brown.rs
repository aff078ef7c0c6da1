use brownflag::brown::{
    brown_density_grid, counting_cell_masses, default_eps, empirical_brown, log_potential, measure_distance,
    multiset_distance, region_mass, PointMeasure,
};
use brownflag::ensemble::EnsembleSpec;
use brownflag::region::Region;
use brownflag::schur::Spectrum;
use brownflag::{ComplexMatrix, C64};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// `(1 / 2n) log det((T - lambda)^* (T - lambda) + eps^2)` by LU.
fn potential_oracle(t: &ComplexMatrix, lambda: C64, eps: f64) -> f64 {
    let n = t.n();
    let a = t.shift(lambda).as_dmatrix().clone();
    let m = a.adjoint() * &a + DMatrix::<C64>::identity(n, n) * c(eps * eps, 0.0);
    m.lu().determinant().re.ln() / (2.0 * n as f64)
}

#[test]
fn potential_at_zero_eps_is_the_log_determinant() {
    let t = "ginibre:n=6,seed=2".parse::<EnsembleSpec>().unwrap().sample().unwrap();
    for lambda in [c(0.0, 0.0), c(0.3, -0.2), c(2.0, 1.0)] {
        let det = t.shift(lambda).as_dmatrix().clone().lu().determinant();
        let want = det.norm().ln() / 6.0;
        assert!((log_potential(&t, lambda, 0.0) - want).abs() <= 1e-12);
    }
    let j = ComplexMatrix::jordan(c(0.0, 0.0), 3);
    assert_eq!(log_potential(&j, c(0.0, 0.0), 0.0), f64::NEG_INFINITY);
}

#[test]
fn triangular_brown_measure_reads_the_diagonal() {
    let t = ComplexMatrix::from_fn(4, |i, j| if i <= j { c((i + 1) as f64, (j as f64) * 0.1) } else { c(0.0, 0.0) });
    let m = empirical_brown(&t).unwrap();
    let diag = PointMeasure::from_counts(t.diagonal().into_iter().map(|z| (z, 1)));
    assert!(measure_distance(&m, &diag) <= 1e-12);
    assert_eq!(m.total, 4);
    assert!((m.total_weight() - 1.0).abs() <= 1e-15);
    assert_eq!(region_mass(&m, &Region::disk(c(1.5, 0.0), 1.0)), 0.5);
}

#[test]
fn jordan_block_is_one_atom() {
    let m = empirical_brown(&ComplexMatrix::jordan(c(2.0, -1.0), 5)).unwrap();
    assert_eq!(m, PointMeasure::from_counts([(c(2.0, -1.0), 5)]));
    assert_eq!(m.atoms[0].weight, 1.0);
}

#[test]
fn density_grid_recovers_ginibre_cell_masses() {
    let t = "ginibre:n=16,seed=7".parse::<EnsembleSpec>().unwrap().sample().unwrap();
    let spec = Spectrum::of(&t).unwrap();
    let grid = brown_density_grid(&t, 128, default_eps(spec.norm)).unwrap();
    assert!((grid.total_mass() - 1.0).abs() <= 0.02, "{}", grid.total_mass());
    let counting = counting_cell_masses(&PointMeasure::from_spectrum(&spec), grid.square, 2);
    let gap = grid.cell_masses(2).iter().zip(&counting).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(gap <= 0.05, "{gap}");
    assert!(grid.clamped_total() >= grid.total_mass());
    assert!((grid.clamped_total() - grid.total_mass() + grid.negative_mass).abs() <= 1e-9);
}

#[test]
fn distances_between_point_sets() {
    let a = [c(0.0, 0.0), c(1.0, 0.0)];
    let b = [c(1.1, 0.0), c(0.0, 0.2)];
    assert!((multiset_distance(&a, &b) - 0.2).abs() <= 1e-15);
    assert_eq!(multiset_distance(&a, &a[..1]), f64::INFINITY);
    let m1 = PointMeasure::from_counts([(c(0.0, 0.0), 2), (c(1.0, 0.0), 1)]);
    let m2 = PointMeasure::from_counts([(c(1.0, 0.5), 1), (c(0.0, 0.1), 2)]);
    assert!((measure_distance(&m1, &m2) - 0.5).abs() <= 1e-15);
    let m3 = PointMeasure::from_counts([(c(0.0, 0.0), 1), (c(1.0, 0.0), 2)]);
    // weights must match: the mass 2/3 moves from 0 to 1
    assert_eq!(measure_distance(&m1, &m3), 1.0);
    let m4 = PointMeasure::from_counts([(c(0.0, 0.0), 1), (c(1.0, 0.0), 1)]);
    assert_eq!(measure_distance(&m1, &m4), f64::INFINITY);
}

fn matrix_strategy(max_n: usize) -> impl Strategy<Value = ComplexMatrix> {
    (1..=max_n).prop_flat_map(|n| {
        prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n * n)
            .prop_map(move |e| ComplexMatrix::new(n, e.into_iter().map(|(re, im)| c(re, im)).collect()).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn regularized_potential_matches_determinant_oracle(
        t in matrix_strategy(6), x in -2.0f64..2.0, y in -2.0f64..2.0, eps in 1e-3f64..1.0,
    ) {
        let lambda = c(x, y);
        let got = log_potential(&t, lambda, eps);
        prop_assert!((got - potential_oracle(&t, lambda, eps)).abs() <= 1e-9);
        // regularization only raises the potential
        prop_assert!(got >= log_potential(&t, lambda, 0.0) - 1e-12);
    }

    #[test]
    fn bottleneck_distance_ignores_order(pts in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 1..8), shift in 0.0f64..1.0) {
        let a: Vec<C64> = pts.iter().map(|&(x, y)| c(x, y)).collect();
        let mut b: Vec<C64> = a.iter().map(|z| z + c(shift, 0.0)).collect();
        b.reverse();
        prop_assert_eq!(multiset_distance(&a, &a.iter().rev().copied().collect::<Vec<_>>()), 0.0);
        prop_assert!(multiset_distance(&a, &b) <= shift + 1e-12);
        prop_assert_eq!(multiset_distance(&a, &b), multiset_distance(&b, &a));
    }

    #[test]
    fn unitary_similarity_keeps_the_brown_measure(t in matrix_strategy(5), seed in any::<u64>()) {
        let u = ComplexMatrix::from_dmatrix(brownflag::ensemble::Stream::new(seed).haar_unitary(t.n())).unwrap();
        let a = empirical_brown(&t).unwrap();
        let b = empirical_brown(&t.conjugate_by(&u)).unwrap();
        prop_assume!(a.atoms.len() == t.n() && b.atoms.len() == t.n());
        prop_assert!(measure_distance(&a, &b) <= 1e-9);
    }
}
