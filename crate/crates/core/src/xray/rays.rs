use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::{Point, OMEGA1_RADIUS};

/// Default number of directions.
pub const DEFAULT_ANGLES: usize = 90;
/// Default number of parallel offsets per direction.
pub const DEFAULT_OFFSETS: usize = 90;
/// Default quadrature step along each line.
pub const DEFAULT_T_STEP: f64 = 0.01;

/// Parallel-beam family of lines entering the disk of radius `ρ₁`.
///
/// Ray `(a, o)` has direction `θ = (cos φ_a, sin φ_a)` with
/// `φ_a = 2π a / n_angles` over the full circle, and offset
/// `p_o = -ρ₁ + (o + ½) Δp` along `θ^⊥ = (-sin φ, cos φ)`. Its index is
/// `a · n_offsets + o`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RaySet {
    n_angles: usize,
    n_offsets: usize,
    t_step: f64,
}

/// One line, recorded by its entry point on the circle of radius `ρ₁` and
/// its inward direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub angle_index: usize,
    pub offset_index: usize,
    pub direction: Point,
    pub normal: Point,
    pub offset: f64,
    pub entry: Point,
    /// `|θ · ν(entry)| = √(1 - (p/ρ₁)²)`.
    pub obliquity: f64,
    /// Half the chord length inside the circle.
    pub half_chord: f64,
}

impl Default for RaySet {
    fn default() -> Self {
        Self {
            n_angles: DEFAULT_ANGLES,
            n_offsets: DEFAULT_OFFSETS,
            t_step: DEFAULT_T_STEP,
        }
    }
}

impl RaySet {
    pub fn new(n_angles: usize, n_offsets: usize, t_step: f64) -> Result<Self> {
        if n_angles == 0 || n_offsets == 0 {
            return Err(Error::InvalidParameter(
                "ray set needs at least one angle and one offset".into(),
            ));
        }
        if !(t_step.is_finite() && t_step > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "quadrature step must be positive, got {t_step}"
            )));
        }
        Ok(Self { n_angles, n_offsets, t_step })
    }

    pub fn n_angles(&self) -> usize {
        self.n_angles
    }

    pub fn n_offsets(&self) -> usize {
        self.n_offsets
    }

    pub fn t_step(&self) -> f64 {
        self.t_step
    }

    pub fn radius(&self) -> f64 {
        OMEGA1_RADIUS
    }

    pub fn len(&self) -> usize {
        self.n_angles * self.n_offsets
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn offset_step(&self) -> f64 {
        2.0 * self.radius() / self.n_offsets as f64
    }

    pub fn angle_step(&self) -> f64 {
        TAU / self.n_angles as f64
    }

    /// Quadrature weight of one ray for `dΣ`.
    ///
    /// On the circle `dS_x = dp / |θ·ν|`, so `dΣ = |θ·ν| dS_x dθ = dp dθ`
    /// and every ray carries `Δp · Δφ`.
    pub fn measure(&self) -> f64 {
        self.offset_step() * self.angle_step()
    }

    pub fn ray(&self, index: usize) -> Ray {
        let angle_index = index / self.n_offsets;
        let offset_index = index % self.n_offsets;
        let phi = self.angle_step() * angle_index as f64;
        let direction = [phi.cos(), phi.sin()];
        let normal = [-phi.sin(), phi.cos()];
        let rho = self.radius();
        let offset = -rho + (offset_index as f64 + 0.5) * self.offset_step();
        let half_chord = (rho * rho - offset * offset).max(0.0).sqrt();
        let entry = [
            offset * normal[0] - half_chord * direction[0],
            offset * normal[1] - half_chord * direction[1],
        ];
        Ray {
            angle_index,
            offset_index,
            direction,
            normal,
            offset,
            entry,
            obliquity: half_chord / rho,
            half_chord,
        }
    }

    pub fn rays(&self) -> impl Iterator<Item = Ray> + '_ {
        (0..self.len()).map(|i| self.ray(i))
    }
}

/// Values of the transform on a [`RaySet`], produced from functions on `grid`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sinogram {
    grid: Grid,
    rays: RaySet,
    values: Vec<f64>,
}

impl Sinogram {
    pub fn new(grid: Grid, rays: RaySet, values: Vec<f64>) -> Result<Self> {
        if values.len() != rays.len() {
            return Err(Error::InvalidInput(format!(
                "sinogram needs {} values, got {}",
                rays.len(),
                values.len()
            )));
        }
        Ok(Self { grid, rays, values })
    }

    pub fn zeros(grid: Grid, rays: RaySet) -> Self {
        Self { grid, rays, values: vec![0.0; rays.len()] }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn rays(&self) -> &RaySet {
        &self.rays
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `⟨g, k⟩_{dΣ}`.
    pub fn inner(&self, other: &Sinogram) -> Result<f64> {
        if self.rays != other.rays || self.grid != other.grid {
            return Err(Error::InvalidInput("sinograms live on different ray sets".into()));
        }
        let s: f64 = self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum();
        Ok(s * self.rays.measure())
    }

    /// Discrete `L²(∂₋SΩ₁, dΣ)` norm.
    pub fn norm(&self) -> f64 {
        (self.values.iter().map(|v| v * v).sum::<f64>() * self.rays.measure()).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometry_of_rays() {
        let rays = RaySet::new(8, 10, 0.05).unwrap();
        assert_eq!(rays.len(), 80);
        for r in rays.rays() {
            let e = r.entry;
            assert!(((e[0] * e[0] + e[1] * e[1]).sqrt() - 1.5).abs() < 1e-12);
            // inward: θ · ν < 0 with ν = entry / ρ₁
            let cos = (r.direction[0] * e[0] + r.direction[1] * e[1]) / 1.5;
            assert!(cos < 0.0);
            assert!((cos.abs() - r.obliquity).abs() < 1e-12);
            assert!((r.obliquity - (1.0 - (r.offset / 1.5).powi(2)).sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn invalid_ray_sets() {
        assert!(RaySet::new(0, 4, 0.1).is_err());
        assert!(RaySet::new(4, 4, 0.0).is_err());
        assert!(RaySet::new(4, 4, -1.0).is_err());
    }

    #[test]
    fn sinogram_norm_uses_measure() {
        let grid = Grid::new(4.0, 16).unwrap();
        let rays = RaySet::new(4, 6, 0.1).unwrap();
        let g = Sinogram::new(grid, rays, vec![1.0; 24]).unwrap();
        assert!((g.norm().powi(2) - 24.0 * rays.measure()).abs() < 1e-12);
        assert!(Sinogram::new(grid, rays, vec![1.0; 3]).is_err());
    }
}
