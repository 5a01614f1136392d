use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction};
use crate::samples::seeded_rng;
use crate::xray::{principal_symbol, Projector, WeightSpec};
use crate::{Point, OMEGA_RADIUS};

use super::matrix::OperatorMatrix;

fn check_packet(x0: Point, xi0: Point, lambda: f64) -> Result<()> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::InvalidParameter(format!("λ must be positive, got {lambda}")));
    }
    if ((xi0[0].hypot(xi0[1])) - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidInput("ξ₀ must be a unit covector".into()));
    }
    let reach = x0[0].hypot(x0[1]) + 3.0 / lambda.sqrt();
    if reach > OMEGA_RADIUS {
        return Err(Error::InvalidInput(format!(
            "packet at x₀ = ({}, {}) with λ = {lambda} reaches {reach:.4} > 1; move x₀ inward or raise λ",
            x0[0], x0[1]
        )));
    }
    Ok(())
}

fn packet_value(x: Point, x0: Point, xi0: Point, lambda: f64) -> Complex64 {
    let d = [x[0] - x0[0], x[1] - x0[1]];
    let phase = lambda * (x[0] * xi0[0] + x[1] * xi0[1]);
    let amp = (lambda / PI).sqrt() * (-0.5 * lambda * (d[0] * d[0] + d[1] * d[1])).exp();
    Complex64::from_polar(amp, phase)
}

/// `f_λ(x) = (λ/π)^{1/2} exp(iλ x·ξ₀ − λ|x − x₀|²/2)` on the grid nodes.
pub fn coherent_state(grid: Grid, x0: Point, xi0: Point, lambda: f64) -> Result<GridFunction> {
    check_packet(x0, xi0, lambda)?;
    let h = grid.spacing();
    if lambda * h * h > 1.0 {
        let min_points = (grid.side() * lambda.sqrt()).ceil() as usize;
        return Err(Error::Resolution {
            reason: format!("λ h² = {:.3} exceeds 1", lambda * h * h),
            min_points: min_points + min_points % 2,
        });
    }
    Ok(GridFunction::from_fn(grid, |x| packet_value(x, x0, xi0, lambda)))
}

/// Something that can report `λ‖N f_λ‖/‖f_λ‖` for a coherent state.
pub trait CoherentProbe {
    fn weight(&self) -> &WeightSpec;
    fn measure(&self, x0: Point, xi0: Point, lambda: f64) -> Result<f64>;
}

impl CoherentProbe for OperatorMatrix {
    fn weight(&self) -> &WeightSpec {
        OperatorMatrix::weight(self)
    }

    fn measure(&self, x0: Point, xi0: Point, lambda: f64) -> Result<f64> {
        let f = coherent_state(*self.grid(), x0, xi0, lambda)?;
        let nf = self.apply(&f)?;
        let den = f.masked(OMEGA_RADIUS).l2_norm();
        Ok(lambda * nf.l2_norm() / den)
    }
}

/// Matrix-free `N_w = I_w^* I_w` applied to the analytic coherent state.
///
/// For each evaluation point `x` on a lattice around `x₀` the value
/// `∫ w(x, θ) ∫ w(x + tθ, θ) f_λ(x + tθ) dt dθ` is computed by the midpoint
/// rule, with the line integral restricted to where the packet lives
/// (`|t − t*| ≤ 8/√λ`) and steps small enough to resolve the phase.
#[derive(Debug, Clone)]
pub struct ContinuumNormal {
    weight: WeightSpec,
}

impl ContinuumNormal {
    pub fn new(weight: &WeightSpec) -> Result<Self> {
        weight.validate()?;
        Ok(Self { weight: weight.clone() })
    }
}

impl CoherentProbe for ContinuumNormal {
    fn weight(&self) -> &WeightSpec {
        &self.weight
    }

    fn measure(&self, x0: Point, xi0: Point, lambda: f64) -> Result<f64> {
        check_packet(x0, xi0, lambda)?;
        let s = 1.0 / lambda.sqrt();
        let dx = s / 3.0;
        let half = (7.0 * s / dx).round() as i64;
        let lattice: Vec<Point> = (-half..=half)
            .flat_map(|i| (-half..=half).map(move |j| [x0[0] + i as f64 * dx, x0[1] + j as f64 * dx]))
            .collect();
        let n_theta = 256usize.max((64.0 * lambda.sqrt()).ceil() as usize);
        let thetas: Vec<Point> = (0..n_theta)
            .map(|k| {
                let a = TAU * k as f64 / n_theta as f64;
                [a.cos(), a.sin()]
            })
            .collect();
        let dt = (s / 4.0).min(PI / (2.0 * lambda));
        let nt = (16.0 * s / dt).ceil() as usize;
        let w = &self.weight;
        let num: f64 = lattice
            .par_iter()
            .map(|&x| {
                let d = [x[0] - x0[0], x[1] - x0[1]];
                let mut acc = Complex64::new(0.0, 0.0);
                for &th in &thetas {
                    let wx = w.eval(x, th);
                    if wx == 0.0 {
                        continue;
                    }
                    let t_star = -(th[0] * d[0] + th[1] * d[1]);
                    let t0 = t_star + (0.5 - 0.5 * nt as f64) * dt;
                    // the packet along the line is exp(quadratic in t): step it
                    // by a ratio that itself changes by the real factor q
                    let mut g = packet_value([x[0] + t0 * th[0], x[1] + t0 * th[1]], x0, xi0, lambda);
                    let slope = d[0] * th[0] + d[1] * th[1] + t0;
                    let mut ratio = Complex64::from_polar(
                        (-lambda * dt * (slope + 0.5 * dt)).exp(),
                        lambda * dt * (th[0] * xi0[0] + th[1] * xi0[1]),
                    );
                    let q = (-lambda * dt * dt).exp();
                    let mut line = Complex64::new(0.0, 0.0);
                    for k in 0..nt {
                        let t = t0 + k as f64 * dt;
                        let wy = w.eval([x[0] + t * th[0], x[1] + t * th[1]], th);
                        line += g * wy;
                        g *= ratio;
                        ratio *= q;
                    }
                    acc += line * (wx * dt);
                }
                (acc * (TAU / n_theta as f64)).norm_sqr()
            })
            .sum();
        let den: f64 = lattice.iter().map(|&x| packet_value(x, x0, xi0, lambda).norm_sqr()).sum();
        Ok(lambda * (num / den).sqrt())
    }
}

/// Measured against analytic symbol values along a `λ` sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeReport {
    pub x0: Point,
    pub xi0: Point,
    pub lambdas: Vec<f64>,
    pub measured: Vec<f64>,
    pub analytic: f64,
    /// `|measured − analytic| / analytic` (absolute error when `analytic = 0`).
    pub rel_err: Vec<f64>,
}

impl ProbeReport {
    /// Whether the error is nonincreasing over the upper half of the sweep.
    pub fn improves_over_upper_half(&self) -> bool {
        self.rel_err[self.rel_err.len() / 2..].windows(2).all(|e| e[1] <= e[0])
    }
}

pub fn symbol_probe<P: CoherentProbe + Sync>(probe: &P, x0: Point, xi0: Point, lambdas: &[f64]) -> Result<ProbeReport> {
    if lambdas.is_empty() {
        return Err(Error::InvalidInput("λ list is empty".into()));
    }
    if lambdas.windows(2).any(|l| l[0] >= l[1]) {
        return Err(Error::InvalidInput("λ list must be strictly increasing".into()));
    }
    let analytic = principal_symbol(probe.weight(), x0, xi0)?;
    let measured = lambdas
        .iter()
        .map(|&l| probe.measure(x0, xi0, l))
        .collect::<Result<Vec<_>>>()?;
    let rel_err = measured
        .iter()
        .map(|m| if analytic == 0.0 { m.abs() } else { (m - analytic).abs() / analytic })
        .collect();
    Ok(ProbeReport { x0, xi0, lambdas: lambdas.to_vec(), measured, analytic, rel_err })
}

/// `max |⟨M f, f⟩ − ‖I_w f‖²| / (‖M f‖‖f‖)` over seeded random `f` on `Ω`,
/// with `I_w` taken from the matrix's own projector.
pub fn injectivity_identity_check(m: &OperatorMatrix, trials: usize, seed: u64) -> Result<f64> {
    injectivity_identity_check_against(m, m.projector(), trials, seed)
}

/// As [`injectivity_identity_check`] with an explicit projector, which must
/// match the matrix's grid, rays and weight.
pub fn injectivity_identity_check_against(m: &OperatorMatrix, proj: &Projector, trials: usize, seed: u64) -> Result<f64> {
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be at least 1".into()));
    }
    if proj.rays() != m.rays() || proj.grid() != m.grid() {
        return Err(Error::InvalidInput("projector uses a different ray set or grid than the matrix".into()));
    }
    if proj.weight() != m.weight() {
        return Err(Error::InvalidInput("projector uses a different weight than the matrix".into()));
    }
    let grid = *m.grid();
    let h2 = grid.spacing().powi(2);
    let mut rng = seeded_rng(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let mut f = vec![0.0; grid.len()];
        for &n in m.col_nodes() {
            f[n] = rng.gen_range(-1.0..1.0);
        }
        let fv = m.restrict_columns(&f);
        let mf = m.data() * &fv;
        let mut pairing = 0.0;
        for (k, &n) in m.row_nodes().iter().enumerate() {
            pairing += h2 * mf[k] * f[n];
        }
        let sino = proj.forward_values(&f);
        let data: f64 = sino.iter().map(|v| v * v).sum::<f64>() * proj.rays().measure();
        let scale = (h2 * mf.norm_squared()).sqrt() * (h2 * fv.norm_squared()).sqrt();
        let dev = (pairing - data).abs();
        worst = worst.max(if scale > 0.0 { dev / scale } else { dev });
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::xray::RaySet;

    #[test]
    fn coherent_state_normalisation() {
        let grid = Grid::new(4.0, 64).unwrap();
        let f = coherent_state(grid, [0.0, 0.0], [1.0, 0.0], 100.0).unwrap();
        let centre = f.values()[grid.index(32, 32)];
        assert!((centre.norm() - 5.641895835477563).abs() < 1e-12);
        assert!((f.l2_norm() - 1.0).abs() < 1e-6);
        let err = coherent_state(Grid::new(4.0, 16).unwrap(), [0.0, 0.0], [1.0, 0.0], 100.0).unwrap_err();
        assert!(matches!(err, Error::Resolution { min_points: 40, .. }));
        assert!(coherent_state(grid, [0.9, 0.0], [1.0, 0.0], 100.0).is_err());
        assert!(coherent_state(grid, [0.0, 0.0], [1.0, 1.0], 100.0).is_err());
    }

    #[test]
    fn zero_weight_probes_zero() {
        let grid = Grid::new(4.0, 32).unwrap();
        let m = OperatorMatrix::assemble(&WeightSpec::constant(0.0), grid, RaySet::new(24, 24, 0.02).unwrap()).unwrap();
        let r = symbol_probe(&m, [0.1, 0.0], [1.0, 0.0], &[16.0, 25.0]).unwrap();
        assert!(r.measured.iter().all(|&v| v == 0.0));
        let c = ContinuumNormal::new(&WeightSpec::constant(0.0)).unwrap();
        assert_eq!(c.measure([0.1, 0.0], [0.0, 1.0], 16.0).unwrap(), 0.0);
    }

    #[test]
    fn continuum_probe_approaches_symbol() {
        let c = ContinuumNormal::new(&WeightSpec::one()).unwrap();
        let r = symbol_probe(&c, [0.2, 0.0], [1.0, 0.0], &[25.0, 50.0]).unwrap();
        assert!((r.analytic - 4.0 * PI).abs() < 1e-12);
        assert!(r.rel_err[1] < r.rel_err[0]);
        assert!(r.rel_err[1] < 0.03, "{:?}", r.rel_err);
    }

    #[test]
    fn identity_check_and_mismatch() {
        let grid = Grid::new(4.0, 16).unwrap();
        let rays = RaySet::new(24, 24, 0.02).unwrap();
        let m = OperatorMatrix::assemble(&WeightSpec::vertical_gap(), grid, rays).unwrap();
        assert!(injectivity_identity_check(&m, 20, 3).unwrap() <= 1e-12);
        let other = Projector::new(&WeightSpec::vertical_gap(), grid, RaySet::new(12, 24, 0.02).unwrap()).unwrap();
        assert!(matches!(
            injectivity_identity_check_against(&m, &other, 1, 0),
            Err(Error::InvalidInput(_))
        ));
    }
}
