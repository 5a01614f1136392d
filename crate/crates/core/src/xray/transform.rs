use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction};
use crate::{OMEGA1_RADIUS, OMEGA_RADIUS};

use super::rays::{RaySet, Sinogram};
use super::weight::WeightSpec;

/// The discretised weighted X-ray transform for one `(weight, grid, rays)`.
///
/// Each ray is sampled by the composite midpoint rule over its full chord
/// through the disk of radius `ρ₁`, with the step shrunk so it divides the
/// chord. At a sample `y = x + tθ` the integrand is `w(y, θ) · f(y)`, with
/// `f(y)` the bilinear interpolant of the nodal values. The resulting
/// linear map is stored as one sparse row per ray.
///
/// The forward map acts on functions on `Ω`: nodal values at distance
/// `>= ρ` are dropped. The adjoint is the transpose with respect to the
/// discrete `L²` product `h² Σ` and the ray product `Δp Δφ Σ`; it
/// back-projects along the whole chord and therefore lives on `Ω₁`.
#[derive(Debug, Clone)]
pub struct Projector {
    grid: Grid,
    rays: RaySet,
    weight: WeightSpec,
    rows: Vec<Vec<(u32, f64)>>,
    inside: Vec<bool>,
}

impl Projector {
    pub fn new(weight: &WeightSpec, grid: Grid, rays: RaySet) -> Result<Self> {
        weight.validate()?;
        let h = grid.spacing();
        if 0.5 * grid.side() - h <= OMEGA1_RADIUS {
            return Err(Error::InvalidParameter(format!(
                "box side {} does not cover the disk of radius {OMEGA1_RADIUS} with a one-cell margin",
                grid.side()
            )));
        }
        let rows = (0..rays.len())
            .into_par_iter()
            .map(|r| ray_row(weight, &grid, &rays, r))
            .collect();
        let r2 = OMEGA_RADIUS * OMEGA_RADIUS;
        let inside = (0..grid.len())
            .map(|n| {
                let [x, y] = grid.node(n);
                x * x + y * y < r2
            })
            .collect();
        Ok(Self {
            grid,
            rays,
            weight: weight.clone(),
            rows,
            inside,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn rays(&self) -> &RaySet {
        &self.rays
    }

    pub fn weight(&self) -> &WeightSpec {
        &self.weight
    }

    /// Sparse coefficients `(node, a_{r,node})` of ray `r`, sorted by node.
    pub fn row(&self, r: usize) -> &[(u32, f64)] {
        &self.rows[r]
    }

    /// Whether node `n` belongs to `Ω`.
    pub fn in_omega(&self, n: usize) -> bool {
        self.inside[n]
    }

    /// Applies the transform to real nodal values (masked to `Ω`).
    pub fn forward_values(&self, values: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|row| {
                row.iter()
                    .filter(|(n, _)| self.inside[*n as usize])
                    .map(|&(n, a)| a * values[n as usize])
                    .sum()
            })
            .collect()
    }

    pub fn adjoint_values(&self, sinogram: &[f64]) -> Vec<f64> {
        let scale = self.rays.measure() / self.grid.spacing().powi(2);
        let mut out = vec![0.0; self.grid.len()];
        for (row, &g) in self.rows.iter().zip(sinogram) {
            if g == 0.0 {
                continue;
            }
            for &(n, a) in row {
                out[n as usize] += scale * a * g;
            }
        }
        out
    }

    pub fn forward(&self, f: &GridFunction) -> Result<Sinogram> {
        self.check_grid(f.grid())?;
        if !f.is_real() {
            return Err(Error::InvalidInput(
                "the transform acts on real functions; apply it to real and imaginary parts separately".into(),
            ));
        }
        Sinogram::new(self.grid, self.rays, self.forward_values(&f.real_part()))
    }

    pub fn adjoint(&self, g: &Sinogram) -> Result<GridFunction> {
        self.check_grid(g.grid())?;
        if *g.rays() != self.rays {
            return Err(Error::InvalidInput("sinogram was produced on a different ray set".into()));
        }
        GridFunction::from_real(self.grid, &self.adjoint_values(g.values()))
    }

    /// `N_w f = I_w^* I_w f`, applied to real and imaginary parts separately.
    pub fn normal(&self, f: &GridFunction) -> Result<GridFunction> {
        self.check_grid(f.grid())?;
        let re = self.adjoint_values(&self.forward_values(&f.real_part()));
        if f.is_real() {
            return GridFunction::from_real(self.grid, &re);
        }
        let im = self.adjoint_values(&self.forward_values(&f.imag_part()));
        GridFunction::from_values(
            self.grid,
            re.into_iter().zip(im).map(|(a, b)| Complex64::new(a, b)).collect(),
        )
    }

    fn check_grid(&self, grid: &Grid) -> Result<()> {
        if *grid != self.grid {
            return Err(Error::InvalidInput("function lives on a different grid than the projector".into()));
        }
        Ok(())
    }
}

fn ray_row(weight: &WeightSpec, grid: &Grid, rays: &RaySet, r: usize) -> Vec<(u32, f64)> {
    let ray = rays.ray(r);
    let chord = 2.0 * ray.half_chord;
    if chord <= 0.0 {
        return Vec::new();
    }
    let steps = (chord / rays.t_step()).ceil().max(1.0) as usize;
    let dt = chord / steps as f64;
    let h = grid.spacing();
    let n = grid.points();
    let origin = -0.5 * grid.side();
    let mut entries: Vec<(u32, f64)> = Vec::with_capacity(4 * steps);
    for k in 0..steps {
        let t = (k as f64 + 0.5) * dt;
        let y = [ray.entry[0] + t * ray.direction[0], ray.entry[1] + t * ray.direction[1]];
        let w = weight.eval(y, ray.direction) * dt;
        if w == 0.0 {
            continue;
        }
        let u = (y[0] - origin) / h;
        let v = (y[1] - origin) / h;
        let (i0, j0) = (u.floor() as usize, v.floor() as usize);
        let (fu, fv) = (u - i0 as f64, v - j0 as f64);
        let corners = [
            (i0, j0, (1.0 - fu) * (1.0 - fv)),
            (i0 + 1, j0, fu * (1.0 - fv)),
            (i0, j0 + 1, (1.0 - fu) * fv),
            (i0 + 1, j0 + 1, fu * fv),
        ];
        for (i, j, c) in corners {
            if c != 0.0 {
                entries.push(((i * n + j) as u32, w * c));
            }
        }
    }
    entries.sort_by_key(|e| e.0);
    let mut merged: Vec<(u32, f64)> = Vec::with_capacity(entries.len() / 4 + 4);
    for (node, c) in entries {
        match merged.last_mut() {
            Some(last) if last.0 == node => last.1 += c,
            _ => merged.push((node, c)),
        }
    }
    merged
}

/// `I_w f` on the given rays (values of `f` outside `Ω` are masked).
pub fn forward(w: &WeightSpec, f: &GridFunction, rays: &RaySet) -> Result<Sinogram> {
    Projector::new(w, *f.grid(), *rays)?.forward(f)
}

/// `I_w^* g`, the exact discrete transpose of [`forward`].
pub fn adjoint(w: &WeightSpec, g: &Sinogram) -> Result<GridFunction> {
    Projector::new(w, *g.grid(), *g.rays())?.adjoint(g)
}

/// `N_w f = I_w^* I_w f`.
pub fn normal_compose(w: &WeightSpec, f: &GridFunction, rays: &RaySet) -> Result<GridFunction> {
    Projector::new(w, *f.grid(), *rays)?.normal(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samples::{random_omega_field, seeded_rng};

    fn setup(points: usize) -> (Grid, RaySet) {
        (Grid::new(4.0, points).unwrap(), RaySet::new(24, 30, 0.02).unwrap())
    }

    #[test]
    fn chord_of_a_disk_indicator() {
        // one horizontal ray with offset 0.3: θ = (1, 0) at angle index 0,
        // θ^⊥ = (0, 1), so the line is x₂ = 0.3.
        let grid = Grid::new(4.0, 256).unwrap();
        let n_offsets = 150; // Δp = 0.02, offsets at -1.49, ..., 0.29, 0.31, ...
        let rays = RaySet::new(4, n_offsets, 0.002).unwrap();
        let f = GridFunction::from_real_fn(grid, |x| if x[0] * x[0] + x[1] * x[1] < 0.25 { 1.0 } else { 0.0 });
        let proj = Projector::new(&WeightSpec::one(), grid, rays).unwrap();
        let g = proj.forward(&f).unwrap();
        let (o, r) = (0..n_offsets)
            .map(|o| (o, rays.ray(o)))
            .min_by(|a, b| (a.1.offset - 0.3).abs().total_cmp(&(b.1.offset - 0.3).abs()))
            .unwrap();
        let p = r.offset;
        let chord = 2.0 * (0.25 - p * p).sqrt();
        assert!((g.values()[o] - chord).abs() < 2e-2, "{} vs {}", g.values()[o], chord);
        assert!((chord - 0.8).abs() < 0.03);
    }

    #[test]
    fn gaussian_line_integral() {
        let grid = Grid::new(4.0, 128).unwrap();
        let rays = RaySet::new(4, 31, 0.005).unwrap(); // offset index 15 is p = 0
        assert!(rays.ray(15).offset.abs() < 1e-12);
        // exp(-t²) is cut at |t| = 1 by the mask: √π·erf(1), up to the
        // one-cell bilinear ramp at the boundary
        let f = GridFunction::from_real_fn(grid, |x| (-(x[0] * x[0] + x[1] * x[1])).exp());
        let g = forward(&WeightSpec::one(), &f, &rays).unwrap();
        let truncated = 1.493648265624854;
        assert!((g.values()[15] - truncated).abs() < 2e-2, "{}", g.values()[15]);
        // a narrow Gaussian has a negligible tail outside Ω: √π/3
        let f = GridFunction::from_real_fn(grid, |x| (-9.0 * (x[0] * x[0] + x[1] * x[1])).exp());
        let g = forward(&WeightSpec::one(), &f, &rays).unwrap();
        assert!((g.values()[15] - std::f64::consts::PI.sqrt() / 3.0).abs() < 1e-3, "{}", g.values()[15]);
    }

    #[test]
    fn zero_in_zero_out() {
        let (grid, rays) = setup(16);
        let w = WeightSpec::vertical_gap();
        let g = forward(&w, &GridFunction::zeros(grid), &rays).unwrap();
        assert!(g.values().iter().all(|&v| v == 0.0));
        let b = adjoint(&w, &Sinogram::zeros(grid, rays)).unwrap();
        assert!(b.is_zero());
        assert!(normal_compose(&w, &GridFunction::zeros(grid), &rays).unwrap().is_zero());
    }

    #[test]
    fn pairing_identity() {
        let (grid, rays) = setup(16);
        let proj = Projector::new(&WeightSpec::vertical_gap(), grid, rays).unwrap();
        let mut rng = seeded_rng(7);
        for _ in 0..5 {
            let f = random_omega_field(grid, &mut rng);
            let gv: Vec<f64> = (0..rays.len()).map(|i| ((i * 37 % 11) as f64 - 5.0) / 3.0).collect();
            let g = Sinogram::new(grid, rays, gv).unwrap();
            let lhs = proj.forward(&f).unwrap().inner(&g).unwrap();
            let rhs = f.inner(&proj.adjoint(&g).unwrap()).unwrap().re;
            assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
        }
    }

    #[test]
    fn complex_input_rejected_by_forward_but_not_normal() {
        let (grid, rays) = setup(16);
        let proj = Projector::new(&WeightSpec::one(), grid, rays).unwrap();
        let f = GridFunction::from_fn(grid, |x| Complex64::new(0.0, (-(x[0] * x[0] + x[1] * x[1]) * 4.0).exp()));
        assert!(proj.forward(&f).is_err());
        let nf = proj.normal(&f).unwrap();
        assert!(nf.values().iter().all(|v| v.re == 0.0));
        assert!(nf.l2_norm() > 0.0);
    }

    #[test]
    fn mismatched_inputs() {
        let (grid, rays) = setup(16);
        let proj = Projector::new(&WeightSpec::one(), grid, rays).unwrap();
        let other_rays = RaySet::new(12, 30, 0.02).unwrap();
        assert!(proj.adjoint(&Sinogram::zeros(grid, other_rays)).is_err());
        let other_grid = Grid::new(4.0, 24).unwrap();
        assert!(proj.forward(&GridFunction::zeros(other_grid)).is_err());
        assert!(Projector::new(&WeightSpec::one(), Grid::new(3.0, 16).unwrap(), rays).is_err());
    }
}
