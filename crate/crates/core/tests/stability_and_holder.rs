use linstab::grid::Grid;
use linstab::holder::{holder_fit, remainder_bound_estimate, HolderSettings, TestMap};
use linstab::samples::bump;
use linstab::stability::{perturbation_scan, stability_sweep, OperatorMatrix};
use linstab::xray::{RaySet, WeightSpec};

fn settings() -> HolderSettings {
    HolderSettings { k: 10.0, scales: vec![1e-1, 1e-2, 1e-3, 1e-4], samples: 8, seed: 7, include_least_stable: true }
}

fn test_map(w: &WeightSpec, n: usize) -> TestMap {
    let g = Grid::new(4.0, n).unwrap();
    let m = OperatorMatrix::assemble(w, g, RaySet::default()).unwrap();
    TestMap::new(m, &bump(g, [0.1, -0.1], 0.7, 3)).unwrap()
}

#[test]
fn unit_weight_sweep_is_frozen() {
    let rep = stability_sweep(&WeightSpec::one(), 4.0, &[16, 24, 32], RaySet::default()).unwrap();
    let frozen = [1.1066213756765113, 0.9699561585574672, 0.9290841352783851];
    for (s, f) in rep.sigma_min().iter().zip(frozen) {
        assert!((s - f).abs() < 1e-9 * f, "{s} vs {f}");
    }
    assert!(rep.spread() >= 0.5);
}

#[test]
fn perturbation_scan_is_frozen_and_starts_at_the_base() {
    let g = Grid::new(4.0, 16).unwrap();
    let delta = WeightSpec::bump([0.2, 0.1], 0.8, 2);
    let scan = perturbation_scan(&WeightSpec::one(), &delta, &[0.0, 0.01, 0.05, 0.1], g, RaySet::default()).unwrap();
    assert_eq!(scan.sigma_min[0], scan.base_sigma);
    let frozen = [0.0, 0.009096582963043609, 0.044227298533230375, 0.085271300598736];
    for (d, f) in scan.deviation.iter().zip(frozen) {
        assert!((d - f).abs() < 1e-9, "{d} vs {f}");
    }
    assert!(scan.monotone());
    assert!((scan.slope - 0.8594810171559962).abs() < 1e-9);

    let zero = WeightSpec::constant(0.0);
    let flat = perturbation_scan(&WeightSpec::one(), &zero, &[0.01, 0.1], g, RaySet::default()).unwrap();
    assert!(flat.deviation.iter().all(|&d| d == 0.0));
}

#[test]
fn remainder_constant_is_bounded_by_the_operator_norm() {
    let map = test_map(&WeightSpec::one(), 16);
    let zero = map.profile() * 0.0;
    let rep = remainder_bound_estimate(&map, &zero, &[1e-1, 5e-2, 2.5e-2], 6, 3).unwrap();
    assert!(rep.max() <= rep.operator_norm * (1.0 + 1e-12));
    assert!(rep.stable(0.2));
}

#[test]
fn holder_fit_for_the_unit_weight_is_frozen() {
    let map = test_map(&WeightSpec::one(), 32);
    let rep = holder_fit(&map, &(map.profile() * 0.0), &settings()).unwrap();
    assert!(rep.passed);
    assert!((rep.c_hat - 0.6116240258024054).abs() < 1e-8);
    assert!((rep.slope - 0.9981736127622024).abs() < 1e-8);
    assert!(rep.slope >= 0.70);
}

#[test]
fn holder_constant_degenerates_without_ellipticity() {
    let w = WeightSpec::vertical_gap();
    let c: Vec<f64> = [16, 24, 32]
        .iter()
        .map(|&n| {
            let map = test_map(&w, n);
            holder_fit(&map, &(map.profile() * 0.0), &settings()).unwrap().c_hat
        })
        .collect();
    assert!(c[2] / c[0] >= 5.0, "{c:?}");
    assert!((c[0] - 7.650648051035054).abs() < 1e-6 && (c[2] - 114.59137740402835).abs() < 1e-6);
}
