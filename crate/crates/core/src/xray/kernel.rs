use std::f64::consts::TAU;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction};
use crate::{Point, OMEGA1_RADIUS, OMEGA_RADIUS};

use super::rays::RaySet;
use super::transform::Projector;
use super::weight::WeightSpec;

/// Angular samples for the singular cell (a multiple of 8 so every octant
/// gets the same midpoint rule).
const DIAGONAL_ANGLES: usize = 256;

/// `W(x, y) = w(x, -u) w(y, -u) + w(x, u) w(y, u)` with `u = (x - y)/|x - y|`.
pub fn weight_w(w: &WeightSpec, x: Point, y: Point) -> Result<f64> {
    let d = [x[0] - y[0], x[1] - y[1]];
    let r = d[0].hypot(d[1]);
    if r == 0.0 {
        return Err(Error::SingularPoint(x[0], x[1]));
    }
    let u = [d[0] / r, d[1] / r];
    let m = [-u[0], -u[1]];
    Ok(w.eval(x, m) * w.eval(y, m) + w.eval(x, u) * w.eval(y, u))
}

/// `∫_cell W(x, y)/|x - y| dy` over the grid cell centred at `x`, in polar
/// coordinates: `∫ W(x, x; α) R(α) dα` with `R(α)` the distance from the
/// centre to the cell boundary.
fn diagonal_cell(w: &WeightSpec, x: Point, h: f64) -> f64 {
    let da = TAU / DIAGONAL_ANGLES as f64;
    (0..DIAGONAL_ANGLES)
        .map(|k| {
            let a = (k as f64 + 0.5) * da;
            let u = [a.cos(), a.sin()];
            let m = [-u[0], -u[1]];
            let wu = w.eval(x, u);
            let wm = w.eval(x, m);
            let reach = 0.5 * h / u[0].abs().max(u[1].abs());
            (wu * wu + wm * wm) * reach * da
        })
        .sum()
}

/// `c ∫ W(x, y) f(y)/|x - y| dy` at the nodes of `Ω₁` (zero elsewhere).
///
/// `f` is masked to `Ω`. Off-diagonal cells use the midpoint rule; the
/// cell containing `x` is integrated in polar coordinates around `x`.
pub fn normal_kernel(w: &WeightSpec, f: &GridFunction, c_cal: f64) -> Result<GridFunction> {
    w.validate()?;
    let grid = *f.grid();
    let h = grid.spacing();
    let h2 = h * h;
    let sources: Vec<(Point, Complex64)> = grid
        .nodes_in_disk(OMEGA_RADIUS)
        .into_iter()
        .map(|n| (grid.node(n), f.values()[n]))
        .filter(|(_, v)| *v != Complex64::new(0.0, 0.0))
        .collect();
    let targets = grid.nodes_in_disk(OMEGA1_RADIUS);
    let out: Vec<Complex64> = targets
        .par_iter()
        .map(|&n| {
            let x = grid.node(n);
            let mut acc = Complex64::new(0.0, 0.0);
            for &(y, fy) in &sources {
                let r = (x[0] - y[0]).hypot(x[1] - y[1]);
                if r == 0.0 {
                    acc += fy * diagonal_cell(w, x, h);
                } else {
                    let kern = weight_w(w, x, y).expect("distinct points");
                    acc += fy * (kern * h2 / r);
                }
            }
            acc * c_cal
        })
        .collect();
    let mut values = vec![Complex64::new(0.0, 0.0); grid.len()];
    for (n, v) in targets.into_iter().zip(out) {
        values[n] = v;
    }
    GridFunction::from_values(grid, values)
}

/// Least-squares fit of the kernel constant against the composition.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelFit {
    pub c_cal: f64,
    /// Relative `L²(Ω₁)` discrepancy of each sample after calibration.
    pub discrepancies: Vec<f64>,
}

fn restrict(grid: &Grid, f: &GridFunction) -> Vec<Complex64> {
    grid.nodes_in_disk(OMEGA1_RADIUS).into_iter().map(|n| f.values()[n]).collect()
}

fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Fits `c` minimising `Σ ‖c K f − N f‖²` over `samples` on `Ω₁`, where `K`
/// is [`normal_kernel`] with unit constant and `N` the composition.
pub fn calibrate_kernel_constant(w: &WeightSpec, grid: Grid, rays: RaySet, samples: &[GridFunction]) -> Result<KernelFit> {
    if samples.is_empty() {
        return Err(Error::InvalidInput("calibration needs at least one sample".into()));
    }
    let proj = Projector::new(w, grid, rays)?;
    let pairs = samples
        .iter()
        .map(|f| {
            let comp = restrict(&grid, &proj.normal(f)?);
            let kern = restrict(&grid, &normal_kernel(w, f, 1.0)?);
            Ok((comp, kern))
        })
        .collect::<Result<Vec<_>>>()?;
    let num: f64 = pairs
        .iter()
        .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x * y.conj()).re))
        .sum();
    let den: f64 = pairs.iter().map(|(_, b)| norm(b).powi(2)).sum();
    if den == 0.0 {
        return Err(Error::InvalidInput("kernel vanishes on every calibration sample".into()));
    }
    let c_cal = num / den;
    let discrepancies = pairs
        .iter()
        .map(|(a, b)| {
            let diff: Vec<Complex64> = a.iter().zip(b).map(|(x, y)| c_cal * y - x).collect();
            norm(&diff) / norm(a)
        })
        .collect();
    Ok(KernelFit { c_cal, discrepancies })
}

/// `‖c K f − N f‖ / ‖N f‖` on the nodes of `Ω₁`.
pub fn kernel_discrepancy(proj: &Projector, f: &GridFunction, c_cal: f64) -> Result<f64> {
    let grid = *proj.grid();
    let comp = restrict(&grid, &proj.normal(f)?);
    let kern = restrict(&grid, &normal_kernel(proj.weight(), f, c_cal)?);
    let diff: Vec<Complex64> = comp.iter().zip(&kern).map(|(a, b)| b - a).collect();
    let scale = norm(&comp);
    if scale == 0.0 {
        return Ok(if norm(&diff) == 0.0 { 0.0 } else { f64::INFINITY });
    }
    Ok(norm(&diff) / scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samples::bump;

    #[test]
    fn w_examples() {
        assert_eq!(weight_w(&WeightSpec::one(), [0.3, 0.1], [-0.7, 0.2]).unwrap(), 2.0);
        // w(x, θ) = θ₁ via a table that is linear in the angle samples' cosine
        let t = super::super::WeightTable::from_fn(4.0, 4, 360, |_, th| th[0]).unwrap();
        let w = WeightSpec::Tabulated(t);
        let v = weight_w(&w, [1.0, 0.0], [0.0, 0.0]).unwrap();
        assert!((v - 2.0).abs() < 1e-12);
        assert!(matches!(
            weight_w(&WeightSpec::one(), [0.5, 0.5], [0.5, 0.5]),
            Err(Error::SingularPoint(_, _))
        ));
    }

    #[test]
    fn singular_cell_for_unit_weight() {
        let h = 0.125;
        let expected = 8.0 * h * (1.0 + 2f64.sqrt()).ln();
        assert!((diagonal_cell(&WeightSpec::one(), [0.0, 0.0], h) - expected).abs() < 1e-4 * expected);
    }

    #[test]
    fn zero_maps_to_zero() {
        let grid = Grid::new(4.0, 16).unwrap();
        assert!(normal_kernel(&WeightSpec::one(), &GridFunction::zeros(grid), 1.0).unwrap().is_zero());
    }

    #[test]
    fn kernel_tracks_composition() {
        let grid = Grid::new(4.0, 24).unwrap();
        let rays = RaySet::new(60, 60, 0.01).unwrap();
        let fs = vec![bump(grid, [0.1, -0.2], 0.5, 4), bump(grid, [-0.3, 0.2], 0.45, 4)];
        let fit = calibrate_kernel_constant(&WeightSpec::one(), grid, rays, &fs).unwrap();
        assert!((fit.c_cal - 1.0).abs() < 0.05, "c_cal = {}", fit.c_cal);
        assert!(fit.discrepancies.iter().all(|&d| d < 0.15), "{:?}", fit.discrepancies);
    }
}
