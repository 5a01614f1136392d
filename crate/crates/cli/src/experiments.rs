use linstab::grid::{interpolation_check, Grid, GridFunction};
use linstab::holder::{findim_lipschitz_check, holder_fit, sample_directions, FinDimMap, HolderSettings, TestMap};
use linstab::samples::{bump, bump_value, random_bump_params, random_bumps, random_omega_field, seeded_rng};
use linstab::Point;
use linstab::seq::{counterexample, hs_norm, instability_ratio, seq_map};
use linstab::stability::{
    injectivity_identity_check, perturbation_scan, stability_sweep, symbol_probe, ContinuumNormal, OperatorMatrix,
};
use linstab::xray::{
    calibrate_kernel_constant, ellipticity_margin, Projector, Sinogram, WeightSpec, WeightTable,
};
use rand::Rng;
use serde_json::{json, Value};

use crate::config::{default_delta, Experiment, ExperimentConfig, ProbeBackend};
use crate::output::{Cell, Table};
use crate::{Recorder, RunError};

/// Interpolation ratios may exceed one only by rounding.
pub const INTERP_TOLERANCE: f64 = 1e-12;
/// Bound on `‖𝒜(x^(k))‖/‖x^(k)‖` for the spurious zeros.
pub const SEQ_RESIDUAL_TOLERANCE: f64 = 1e-15;
/// Relative agreement of `‖x^(k)‖_{h^s}` with `k^{s+1} e^{-k}`.
pub const SEQ_NORM_TOLERANCE: f64 = 1e-12;
/// Required growth of the instability ratio from `k = 10` to `k = 30`.
pub const SEQ_GROWTH: f64 = 1e3;
/// Relative deviation allowed in the pairing and normal-operator identities.
pub const IDENTITY_TOLERANCE: f64 = 1e-12;
/// Calibrated kernel discrepancy allowed at the finest resolution (constant weights).
pub const KERNEL_TOLERANCE: f64 = 5e-2;
/// Allowed `min σ / max σ` spread of an elliptic sweep.
pub const ELLIPTIC_SPREAD: f64 = 0.5;
/// Required `σ_min` drop between the coarsest and finest resolution of a non-elliptic sweep.
pub const NONELLIPTIC_DROP: f64 = 10.0;
/// Agreement of the dense SVD with the eigen route.
pub const SVD_TOLERANCE: f64 = 1e-8;
/// Slack over the least-squares slope allowed for any single deviation.
pub const PERTURBATION_SLACK: f64 = 0.25;
/// Probe error allowed at the largest `λ`.
pub const PROBE_TOLERANCE: f64 = 0.10;
/// Allowed relative difference between a probe and its 90° rotation when the symbol agrees.
pub const ISOTROPY_TOLERANCE: f64 = 0.02;

pub(crate) fn dispatch(c: &ExperimentConfig, rec: &mut Recorder) -> Result<Value, RunError> {
    match c.experiment {
        Experiment::InterpCheck => interp_check(c, rec),
        Experiment::SeqCounterexample => seq_counterexample(c, rec),
        Experiment::XraySelftest => xray_selftest(c, rec),
        Experiment::Ellipticity => ellipticity(c, rec),
        Experiment::StabilitySweep => stability(c, rec),
        Experiment::PerturbationScan => perturbation(c, rec),
        Experiment::CoherentProbe => probe(c, rec),
        Experiment::HolderFit => holder(c, rec),
        Experiment::FindimCheck => findim(c, rec),
    }
}

fn grid_of(c: &ExperimentConfig, rec: &mut Recorder) -> Result<Grid, RunError> {
    rec.stage("grid", || Grid::new(c.grid.side, c.grid.points))
}

fn interp_check(c: &ExperimentConfig, rec: &mut Recorder) -> Result<Value, RunError> {
    let grid = grid_of(c, rec)?;
    let mut table = Table::new("interp.csv", &["trial", "s1", "s2", "alpha1", "ratio"]);
    let ratios = rec.stage("interpolation", || {
        let mut rng = seeded_rng(c.seed);
        let mut out = Vec::with_capacity(c.interp.trials);
        for _ in 0..c.interp.trials {
            // a few smooth bumps plus noise of random amplitude, so the spectra vary from flat to decaying
            let bumps: Vec<(Point, f64, i32)> = (0..rng.gen_range(1..=4))
                .map(|_| {
                    let (c, r) = random_bump_params(&mut rng, (0.2, 0.8), 0.95);
                    (c, r, rng.gen_range(1..=5))
                })
                .collect();
            let amp = 10f64.powf(rng.gen_range(-4.0..0.0));
            let values: Vec<f64> = (0..grid.len())
                .map(|n| {
                    let x = grid.node(n);
                    let smooth: f64 = bumps.iter().map(|&(c, r, p)| bump_value(x, c, r, p)).sum();
                    smooth + amp * rng.gen_range(-1.0..1.0)
                })
                .collect();
            let f = GridFunction::from_real(grid, &values)?;
            let s1 = rng.gen_range(-1.0..4.0);
            let s2 = rng.gen_range(-1.0..4.0);
            let alpha1 = rng.gen_range(0.0..=1.0);
            out.push((s1, s2, alpha1, interpolation_check(&f, s1, s2, alpha1)?));
        }
        Ok(out)
    })?;
    let mut max_ratio: f64 = 0.0;
    for (i, &(s1, s2, a, r)) in ratios.iter().enumerate() {
        table.push(vec![i.into(), s1.into(), s2.into(), a.into(), r.into()]);
        max_ratio = max_ratio.max(r);
    }
    rec.table(table);
    rec.check(
        "interpolation constant ≤ 1 + 1e-12",
        max_ratio <= 1.0 + INTERP_TOLERANCE,
        format!("max_ratio = {max_ratio:?} over {} trials", ratios.len()),
    );
    Ok(json!({ "trials": ratios.len(), "max_ratio": max_ratio }))
}

fn s_label(s: f64) -> String {
    if s.fract() == 0.0 && s.abs() < 1e15 {
        format!("{}", s as i64)
    } else {
        format!("{s}")
    }
}

fn seq_counterexample(c: &ExperimentConfig, rec: &mut Recorder) -> Result<Value, RunError> {
    let m = c.seq.truncation;
    let mut header = vec!["k".to_string()];
    header.extend(c.sobolev.iter().map(|&s| format!("hs_norm_s{}", s_label(s))));
    header.push("map_residual".into());
    let mut table = Table::with_header("seq.csv", header);
    let rows = rec.stage("counterexample", || {
        (1..=m)
            .map(|k| {
                let x = counterexample(k, m)?;
                let norms: Vec<f64> = c.sobolev.iter().map(|&s| hs_norm(&x, s)).collect();
                let residual = seq_map(&x).l2_norm() / x.l2_norm();
                Ok((k, norms, residual))
            })
            .collect::<linstab::Result<Vec<_>>>()
    })?;
    let mut worst_residual: f64 = 0.0;
    let mut worst_norm: f64 = 0.0;
    for (k, norms, residual) in &rows {
        let mut row: Vec<Cell> = vec![(*k).into()];
        for (&s, &n) in c.sobolev.iter().zip(norms) {
            let kf = *k as f64;
            let closed = kf.powf(s + 1.0) * (-kf).exp();
            worst_norm = worst_norm.max((n - closed).abs() / closed);
            row.push(n.into());
        }
        row.push((*residual).into());
        worst_residual = worst_residual.max(*residual);
        table.push(row);
    }
    rec.table(table);

    let mut growth = Vec::new();
    if m >= 30 {
        for &s1 in &c.sobolev {
            for &s2 in &c.sobolev {
                if s1 == s2 {
                    continue;
                }
                let g = rec.stage("instability", || {
                    Ok(instability_ratio(30, s1, s2)?.log10 - instability_ratio(10, s1, s2)?.log10)
                })?;
                growth.push(json!({ "s1": s1, "s2": s2, "log10_growth_10_to_30": g }));
                rec.check(
                    &format!("instability ratio (s1={s1}, s2={s2}) grows > 1e3 from k=10 to k=30"),
                    g > SEQ_GROWTH.log10(),
                    format!("log10 growth = {g:?}"),
                );
            }
        }
    }
    rec.check(
        "map residual ≤ 1e-15",
        worst_residual <= SEQ_RESIDUAL_TOLERANCE,
        format!("max residual = {worst_residual:?}"),
    );
    rec.check(
        "h^s norms match k^(s+1) e^(-k)",
        worst_norm <= SEQ_NORM_TOLERANCE,
        format!("max relative error = {worst_norm:?}"),
    );
    Ok(json!({
        "truncation": m,
        "max_map_residual": worst_residual,
        "max_norm_error": worst_norm,
        "instability_growth": growth,
    }))
}

/// One weight of every kind, plus the configured weight when it differs.
pub fn weight_catalog(c: &ExperimentConfig) -> linstab::Result<Vec<(String, WeightSpec)>> {
    let table = WeightTable::from_fn(c.grid.side, 32, 180, |x, th| 1.0 + 0.3 * x[0] + 0.2 * th[0])?;
    let mut out = vec![
        ("constant".to_string(), WeightSpec::one()),
        ("limited_angle".to_string(), WeightSpec::vertical_gap()),
        ("tabulated".to_string(), WeightSpec::Tabulated(table)),
        ("bump".to_string(), default_delta()),
        ("perturbed".to_string(), WeightSpec::perturbed(&WeightSpec::one(), &default_delta(), 0.1)),
    ];
    if !out.iter().any(|(_, w)| *w == c.weight) {
        out.push(("configured".to_string(), c.weight.clone()));
    }
    Ok(out)
}

fn pairing_deviation(proj: &Projector, trials: usize, seed: u64) -> linstab::Result<f64> {
    let grid = *proj.grid();
    let rays = *proj.rays();
    let mut rng = seeded_rng(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let f = random_omega_field(grid, &mut rng);
        let g = Sinogram::new(grid, rays, (0..rays.len()).map(|_| rng.gen_range(-1.0..1.0)).collect())?;
        let lhs = proj.forward(&f)?.inner(&g)?;
        let adj = proj.adjoint(&g)?;
        let rhs = f.inner(&adj)?.re;
        let scale = (proj.forward(&f)?.norm() * g.norm()).max(f.l2_norm() * adj.l2_norm());
        let dev = (lhs - rhs).abs();
        worst = worst.max(if scale > 0.0 { dev / scale } else { dev });
    }
    Ok(worst)
}

fn xray_selftest(c: &ExperimentConfig, rec: &mut Recorder) -> Result<Value, RunError> {
    let grid = grid_of(c, rec)?;
    let rays = c.rays.ray_set();
    let catalog = rec.stage("weights", || weight_catalog(c))?;
    let mut ident = Table::new("identities.csv", &["weight", "pairing_deviation", "identity_deviation"]);
    let mut per_weight = Vec::new();
    for (name, w) in &catalog {
        let proj = rec.stage(&format!("projector {name}"), || Projector::new(w, grid, rays))?;
        let pairing = rec.stage(&format!("pairing {name}"), || pairing_deviation(&proj, c.xray.trials, c.seed))?;
        let identity = rec.stage(&format!("identity {name}"), || {
            injectivity_identity_check(&OperatorMatrix::assemble(w, grid, rays)?, c.xray.trials, c.seed)
        })?;
        ident.push(vec![name.as_str().into(), pairing.into(), identity.into()]);
        rec.check(&format!("pairing identity ({name})"), pairing <= IDENTITY_TOLERANCE, format!("{pairing:?}"));
        rec.check(&format!("normal-operator identity ({name})"), identity <= IDENTITY_TOLERANCE, format!("{identity:?}"));
        per_weight.push(json!({ "weight": name, "pairing_deviation": pairing, "identity_deviation": identity }));
    }
    rec.table(ident);

    // sinogram of a reference bump under the configured weight
    let sino = rec.stage("sinogram", || {
        Projector::new(&c.weight, grid, rays)?.forward(&bump(grid, [0.1, -0.2], 0.5, 4))
    })?;
    let mut st = Table::new("sinogram.csv", &["angle_index", "offset_index", "value"]);
    for (r, &v) in sino.values().iter().enumerate() {
        let ray = rays.ray(r);
        st.push(vec![ray.angle_index.into(), ray.offset_index.into(), v.into()]);
    }
    rec.table(st);

    let mut kt = Table::new("kernel.csv", &["resolution", "sample_id", "c_cal", "discrepancy"]);
    let mut worst = Vec::new();
    let mut fits = Vec::new();
    for &n in &c.xray.kernel_resolutions {
        let fit = rec.stage(&format!("kernel N={n}"), || {
            let g = Grid::new(c.grid.side, n)?;
            calibrate_kernel_constant(&c.weight, g, rays, &random_bumps(g, c.xray.kernel_samples, c.seed))
        })?;
        for (i, &d) in fit.discrepancies.iter().enumerate() {
            kt.push(vec![n.into(), i.into(), fit.c_cal.into(), d.into()]);
        }
        worst.push(fit.discrepancies.iter().copied().fold(0.0, f64::max));
        fits.push(json!({ "resolution": n, "c_cal": fit.c_cal, "discrepancies": fit.discrepancies }));
    }
    rec.table(kt);
    if worst.len() >= 2 {
        rec.check(
            "kernel discrepancy decreases with resolution",
            worst.windows(2).all(|w| w[1] < w[0]),
            format!("max discrepancy per resolution = {worst:?}"),
        );
    }
    if matches!(c.weight, WeightSpec::Constant { .. }) {
        let last = *worst.last().expect("at least one resolution");
        rec.check(
            "kernel discrepancy < 5e-2 at the finest resolution",
            last < KERNEL_TOLERANCE,
            format!("{last:?}"),
        );
    }
    Ok(json!({ "identities": per_weight, "kernel": fits }))
}

fn ellipticity(c: &ExperimentConfig, rec: &mut Recorder) -> Result<Value, RunError> {
    let m = rec.stage("ellipticity", || ellipticity_margin(&c.weight, c.ellipticity.density))?;
    let mut t = Table::new("ellipticity.csv", &["margin", "x1", "x2", "zeta1", "zeta2"]);
    t.push(vec![m.margin.into(), m.x[0].into(), m.x[1].into(), m.zeta[0].into(), m.zeta[1].into()]);
    rec.table(t);
    rec.check("margin is finite and nonnegative", m.margin.is_finite() && m.margin >= 0.0, format!("{:?}", m.margin));
    Ok(json!({ "margin": m, "elliptic": m.margin > 0.0 }))
}

fn stability(c: &ExperimentConfig, rec: &mut Recorder) -> Result<Value, RunError> {
    let rays = c.rays.ray_set();
    let margin = rec.stage("ellipticity", || ellipticity_margin(&c.weight, c.ellipticity.density))?;
    let report = rec.stage("sweep", || stability_sweep(&c.weight, c.grid.side, &c.stability.resolutions, rays))?;
    let mut t = Table::new("stability.csv", &["resolution", "sigma_min", "C_estimate"]);
    for e in &report.entries {
        t.push(vec![e.resolution.into(), e.sigma_min.into(), e.c_estimate.into()]);
    }
    rec.table(t);

    // dense SVD of the whitened factor at the coarsest resolution
    let coarse = report.entries[0];
    let svd_sigma = rec.stage("svd oracle", || {
        let m = OperatorMatrix::assemble(&c.weight, Grid::new(c.grid.side, coarse.resolution)?, rays)?;
        let rm = m.h1_factor() * m.data();
        Ok(rm.singular_values().min() / m.grid().spacing())
    })?;
    let svd_dev = (svd_sigma - coarse.sigma_min).abs() / svd_sigma.max(f64::MIN_POSITIVE);
    rec.check(
        "eigen route matches the dense SVD at the coarsest resolution",
        svd_dev <= SVD_TOLERANCE,
        format!("eigen {:?}, svd {svd_sigma:?}, relative deviation {svd_dev:?}", coarse.sigma_min),
    );
    let sig = report.sigma_min();
    let drop = sig[0] / sig[sig.len() - 1];
    if margin.margin > 0.0 {
        rec.check(
            "elliptic weight: sigma_min varies by less than a factor 2",
            report.spread() > ELLIPTIC_SPREAD,
            format!("spread = {:?}", report.spread()),
        );
    } else if sig.len() >= 2 {
        rec.check(
            "non-elliptic weight: sigma_min drops by a factor ≥ 10",
            drop >= NONELLIPTIC_DROP,
            format!("drop = {drop:?}, witness ζ = {:?}", margin.zeta),
        );
    }
    Ok(json!({ "ellipticity": margin, "sweep": report, "svd_sigma": svd_sigma, "drop": drop }))
}

fn perturbation(c: &ExperimentConfig, rec: &mut Recorder) -> Result<Value, RunError> {
    let grid = grid_of(c, rec)?;
    let scan = rec.stage("scan", || {
        perturbation_scan(&c.weight, &c.perturbation.delta, &c.perturbation.eps, grid, c.rays.ray_set())
    })?;
    let mut t = Table::new("perturbation.csv", &["eps", "sigma_min", "deviation"]);
    for i in 0..scan.eps.len() {
        t.push(vec![scan.eps[i].into(), scan.sigma_min[i].into(), scan.deviation[i].into()]);
    }
    rec.table(t);
    let bound = (1.0 + PERTURBATION_SLACK) * scan.slope;
    let worst = scan
        .eps
        .iter()
        .zip(&scan.deviation)
        .filter(|(e, _)| **e > 0.0)
        .map(|(e, d)| d / e)
        .fold(0.0, f64::max);
    rec.check(
        "deviation bounded by the fitted linear slope",
        worst <= bound,
        format!("max deviation/eps = {worst:?}, slope = {:?}, bound = {bound:?}", scan.slope),
    );
    let (first, last) = (scan.deviation[0], scan.deviation[scan.deviation.len() - 1]);
    if scan.deviation.len() >= 2 {
        rec.check("smallest-eps deviation below largest-eps deviation", first < last, format!("{first:?} vs {last:?}"));
    }
    Ok(json!({ "scan": scan, "slope_slack": PERTURBATION_SLACK }))
}

fn probe(c: &ExperimentConfig, rec: &mut Recorder) -> Result<Value, RunError> {
    let (x0, xi0) = (c.probe.x0, c.probe.xi0);
    let rot = [-xi0[1], xi0[0]];
    let (main, rotated) = match c.probe.backend {
        ProbeBackend::Continuum => {
            let p = rec.stage("probe setup", || ContinuumNormal::new(&c.weight))?;
            (
                rec.stage("probe", || symbol_probe(&p, x0, xi0, &c.lambdas))?,
                rec.stage("probe rotated", || symbol_probe(&p, x0, rot, &c.lambdas))?,
            )
        }
        ProbeBackend::Matrix => {
            let grid = grid_of(c, rec)?;
            let m = rec.stage("assemble", || OperatorMatrix::assemble(&c.weight, grid, c.rays.ray_set()))?;
            (
                rec.stage("probe", || symbol_probe(&m, x0, xi0, &c.lambdas))?,
                rec.stage("probe rotated", || symbol_probe(&m, x0, rot, &c.lambdas))?,
            )
        }
    };
    let mut t = Table::new("probe.csv", &["lambda", "measured", "analytic", "rel_err"]);
    for i in 0..main.lambdas.len() {
        t.push(vec![main.lambdas[i].into(), main.measured[i].into(), main.analytic.into(), main.rel_err[i].into()]);
    }
    rec.table(t);
    let last = *main.rel_err.last().expect("nonempty sweep");
    let last_rot = *rotated.rel_err.last().expect("nonempty sweep");
    rec.check("error at the largest lambda ≤ 10%", last <= PROBE_TOLERANCE, format!("{last:?}"));
    rec.check("rotated probe error at the largest lambda ≤ 10%", last_rot <= PROBE_TOLERANCE, format!("{last_rot:?}"));
    rec.check(
        "error nonincreasing over the upper half of the sweep",
        main.improves_over_upper_half(),
        format!("{:?}", main.rel_err),
    );
    let iso = if (main.analytic - rotated.analytic).abs() <= 1e-12 * main.analytic.abs() {
        let (a, b) = (*main.measured.last().unwrap(), *rotated.measured.last().unwrap());
        let d = (a - b).abs() / a.abs();
        rec.check("90° rotation isotropy within 2%", d <= ISOTROPY_TOLERANCE, format!("{d:?}"));
        Some(d)
    } else {
        None
    };
    Ok(json!({ "probe": main, "rotated": rotated, "isotropy_deviation": iso }))
}

/// Smooth profile `a` of the test map.
pub fn holder_profile(grid: Grid) -> GridFunction {
    bump(grid, [0.1, -0.1], 0.7, 3)
}

fn holder(c: &ExperimentConfig, rec: &mut Recorder) -> Result<Value, RunError> {
    let grid = grid_of(c, rec)?;
    let m = rec.stage("assemble", || OperatorMatrix::assemble(&c.weight, grid, c.rays.ray_set()))?;
    let map = rec.stage("test map", || TestMap::new(m, &holder_profile(grid)))?;
    let f0 = if c.holder.center_scale > 0.0 {
        sample_directions(&map, 1, c.seed.wrapping_add(1)).remove(0) * c.holder.center_scale
    } else {
        map.profile() * 0.0
    };
    let settings = HolderSettings {
        k: c.holder.k,
        scales: c.holder.scales.clone(),
        samples: c.holder.samples,
        seed: c.seed,
        include_least_stable: c.holder.include_least_stable,
    };
    let report = rec.stage("holder fit", || holder_fit(&map, &f0, &settings))?;
    let mut t = Table::new("holder.csv", &["sample_id", "scale", "lhs_norm", "rhs_norm", "ratio"]);
    for s in &report.samples {
        t.push(vec![s.sample_id.into(), s.scale.into(), s.lhs_norm.into(), s.rhs_norm.into(), s.ratio.into()]);
    }
    rec.table(t);
    rec.check("linearisation is stable", report.hypothesis_holds, format!("σ_min = {:?}", report.linearization_sigma));
    rec.check(
        "remainder is quadratic",
        report.remainder_quadratic,
        format!("Ĉ per scale = {:?}, variation = {:?}", report.remainder.c_hat, report.remainder.variation),
    );
    rec.check("single finite Ĉ across all samples", report.inequality_holds, format!("Ĉ = {:?}", report.c_hat));
    rec.check("log-log slope ≥ μ₁μ₂ − tolerance", report.slope_ok, format!("slope = {:?}", report.slope));
    Ok(serde_json::to_value(&report).expect("report serialises"))
}

fn findim(c: &ExperimentConfig, rec: &mut Recorder) -> Result<Value, RunError> {
    let f = &c.findim;
    let mut t = Table::new("findim.csv", &["map_id", "sigma_min", "c0", "radius", "max_ratio", "bound", "passed"]);
    let mut reports = Vec::new();
    for i in 0..f.maps {
        let seed = c.seed.wrapping_add(i as u64);
        let (sigma, report) = rec.stage(&format!("map {i}"), || {
            let map = FinDimMap::random_cubic(f.dim_in, f.dim_out, f.min_sigma, seed)?;
            let radius = map.admissible_radius(f.max_radius);
            Ok((map.sigma_min(), findim_lipschitz_check(&map, radius, f.samples, seed)?))
        })?;
        t.push(vec![
            i.into(),
            sigma.into(),
            report.c0.into(),
            report.radius.into(),
            report.max_ratio.into(),
            report.bound.into(),
            report.passed.into(),
        ]);
        rec.check(
            &format!("map {i}: |x − x₀| ≤ 2C₀|𝒜(x) − 𝒜(x₀)|"),
            report.passed,
            format!("max ratio {:?} vs bound {:?}", report.max_ratio, report.bound),
        );
        reports.push(report);
    }
    rec.table(t);
    Ok(json!({ "maps": reports }))
}
