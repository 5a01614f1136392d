use std::f64::consts::{E, PI};

use linstab::grid::{interpolation_check, sobolev_norm, Grid, GridFunction};
use linstab::seq::{counterexample, hs_norm, instability_ratio, seq_linearization_at, seq_map, SequenceVec};
use num_complex::Complex64;
use proptest::prelude::*;

fn modes(grid: Grid, terms: &[([f64; 2], f64)]) -> GridFunction {
    GridFunction::from_fn(grid, |x| {
        terms
            .iter()
            .map(|(k, c)| Complex64::from_polar(*c, k[0] * x[0] + k[1] * x[1]))
            .sum()
    })
}

#[test]
fn sobolev_norms_of_modes_on_the_standard_torus() {
    let g = Grid::new(2.0 * PI, 16).unwrap();
    let f = modes(g, &[([1.0, 0.0], 1.0), ([0.0, 2.0], 1.0)]);
    let expected = 2.0 * PI * (4.0f64 + 25.0).sqrt();
    assert!((sobolev_norm(&f, 2.0).unwrap() - expected).abs() < 1e-10 * expected);
}

#[test]
fn counterexamples_are_zeros_but_not_small_in_weak_norms() {
    for k in [1, 7, 20, 50] {
        let x = counterexample(k, 50).unwrap();
        assert!(seq_map(&x).l2_norm() <= 1e-15 * x.l2_norm());
        // h^{-1} norm is e^{-k}, far smaller than the h^1 norm k² e^{-k}
        let kf = k as f64;
        assert!((hs_norm(&x, -1.0) - (-kf).exp()).abs() <= 1e-12 * (-kf).exp());
    }
}

#[test]
fn linearization_at_origin_is_the_diagonal() {
    let h = SequenceVec::new(vec![1.0, -2.0, 0.5, 0.0]).unwrap();
    let d = seq_linearization_at(&SequenceVec::zeros(4).unwrap(), &h).unwrap();
    for k in 0..4 {
        assert!((d.get(k + 1) - h.get(k + 1) * E.powi(-(k as i32 + 1))).abs() < 1e-15);
    }
}

#[test]
fn instability_ratio_closed_form() {
    let r = instability_ratio(10, 0.0, 3.0).unwrap();
    assert!((r.value - 1e-3 * 10f64.exp()).abs() < 1e-9 * r.value);
    assert!(instability_ratio(2000, 0.0, 0.0).unwrap().saturated);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn interpolation_never_exceeds_one(
        values in prop::collection::vec(-1.0f64..1.0, 64),
        s1 in -2.0f64..5.0,
        s2 in -2.0f64..5.0,
        alpha in 0.0f64..=1.0,
    ) {
        let g = Grid::new(4.0, 8).unwrap();
        let f = GridFunction::from_real(g, &values).unwrap();
        prop_assert!(interpolation_check(&f, s1, s2, alpha).unwrap() <= 1.0 + 1e-12);
    }

    #[test]
    fn sobolev_norm_is_monotone_in_the_order(values in prop::collection::vec(-1.0f64..1.0, 64), s in -2.0f64..3.0) {
        let g = Grid::new(4.0, 8).unwrap();
        let f = GridFunction::from_real(g, &values).unwrap();
        prop_assert!(sobolev_norm(&f, s).unwrap() <= sobolev_norm(&f, s + 0.5).unwrap() * (1.0 + 1e-12));
    }

    #[test]
    fn seq_map_is_cubic_free(x in prop::collection::vec(-1.0f64..1.0, 10), t in -2.0f64..2.0) {
        // 𝒜(t x) = t E x − t² (x, a) x
        let x = SequenceVec::new(x).unwrap();
        let tx = SequenceVec::zeros(10).unwrap().add_scaled(t, &x).unwrap();
        let lhs = seq_map(&tx);
        let ex = x.apply_e();
        let pa = x.pair_with_a();
        for k in 1..=10 {
            let rhs = t * ex.get(k) - t * t * pa * x.get(k);
            prop_assert!((lhs.get(k) - rhs).abs() <= 1e-12);
        }
    }
}
