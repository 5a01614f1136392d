use std::f64::consts::{PI, TAU};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::{Point, OMEGA1_RADIUS};

use super::weight::WeightSpec;

/// `κ` in `σ(x, ξ) = κ (|w(x, θ_⊥)|² + |w(x, -θ_⊥)|²)/|ξ|`.
///
/// The kernel of `N_1` is `2/|x - y|` and the planar Fourier transform of
/// `1/|x|` is `2π/|ξ|`, so the unit weight has symbol `4π/|ξ|`.
pub const SYMBOL_CONSTANT: f64 = 2.0 * PI;

/// Principal symbol of the normal operator at `(x, ξ)`.
pub fn principal_symbol(w: &WeightSpec, x: Point, xi: Point) -> Result<f64> {
    let r = xi[0].hypot(xi[1]);
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::InvalidInput(format!(
            "covector must be finite and nonzero, got ({}, {})",
            xi[0], xi[1]
        )));
    }
    Ok(SYMBOL_CONSTANT * perpendicular_mass(w, x, [xi[0] / r, xi[1] / r]) / r)
}

/// `|w(x, θ_⊥)|² + |w(x, -θ_⊥)|²` for the unit covector `zeta`.
fn perpendicular_mass(w: &WeightSpec, x: Point, zeta: Point) -> f64 {
    let perp = [-zeta[1], zeta[0]];
    let a = w.eval(x, perp);
    let b = w.eval(x, [-perp[0], -perp[1]]);
    a * a + b * b
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EllipticityMargin {
    pub margin: f64,
    pub x: Point,
    pub zeta: Point,
}

/// Minimum of `|w(x, θ_⊥)|² + |w(x, -θ_⊥)|²` over `ζ` at `4·density`
/// equispaced angles (starting at `(1, 0)`) and `x` on a `density ×
/// density` lattice of `[-ρ₁, ρ₁]²` restricted to the closed disk `Ω̄₁`.
/// The witness is the first minimiser in that order.
pub fn ellipticity_margin(w: &WeightSpec, sample_density: usize) -> Result<EllipticityMargin> {
    if sample_density < 8 {
        return Err(Error::InvalidParameter(format!(
            "sample density must be at least 8, got {sample_density}"
        )));
    }
    w.validate()?;
    let step = 2.0 * OMEGA1_RADIUS / (sample_density - 1) as f64;
    let points: Vec<Point> = (0..sample_density)
        .flat_map(|i| (0..sample_density).map(move |j| (i, j)))
        .map(|(i, j)| [-OMEGA1_RADIUS + i as f64 * step, -OMEGA1_RADIUS + j as f64 * step])
        .filter(|p| p[0].hypot(p[1]) <= OMEGA1_RADIUS * (1.0 + 1e-12))
        .collect();
    let n_angles = 4 * sample_density;
    let mut best = EllipticityMargin { margin: f64::INFINITY, x: [0.0, 0.0], zeta: [1.0, 0.0] };
    for k in 0..n_angles {
        let a = TAU * k as f64 / n_angles as f64;
        let zeta = [a.cos(), a.sin()];
        for &x in &points {
            let m = perpendicular_mass(w, x, zeta);
            if m < best.margin {
                best = EllipticityMargin { margin: m, x, zeta };
            }
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `J₀(z) = (1/π) ∫₀^π cos(z sin τ) dτ`.
    fn bessel_j0(z: f64) -> f64 {
        let n = 400;
        let d = PI / n as f64;
        (0..n).map(|k| (z * ((k as f64 + 0.5) * d).sin()).cos()).sum::<f64>() * d / PI
    }

    #[test]
    fn fourier_transform_of_inverse_distance() {
        // F[1/|x|](ξ) = 2π ∫₀^∞ J₀(|ξ| r) dr; Abel-regularised with e^{-εr}
        // the integral is 1/√(|ξ|² + ε²).
        let (eps, xi) = (0.05, 1.0);
        let dr = 0.01;
        let integral: f64 = (0..20000)
            .map(|k| {
                let r = (k as f64 + 0.5) * dr;
                bessel_j0(xi * r) * (-eps * r).exp() * dr
            })
            .sum();
        let transform = TAU * integral;
        let limit = TAU / (xi * xi + eps * eps).sqrt();
        assert!((transform - limit).abs() < 1e-3 * limit);
        // W ≡ 2 for the unit weight
        let s = principal_symbol(&WeightSpec::one(), [0.2, 0.0], [xi, 0.0]).unwrap();
        assert!((s - 2.0 * TAU / xi).abs() < 1e-12);
    }

    #[test]
    fn homogeneity_and_errors() {
        let w = WeightSpec::perturbed(&WeightSpec::one(), &WeightSpec::vertical_gap(), 0.3);
        let x = [0.1, 0.4];
        let xi = [0.3, -1.7];
        let a = principal_symbol(&w, x, xi).unwrap();
        let b = principal_symbol(&w, x, [2.0 * xi[0], 2.0 * xi[1]]).unwrap();
        assert_eq!(b, a / 2.0);
        assert!(principal_symbol(&w, x, [0.0, 0.0]).is_err());
        assert_eq!(principal_symbol(&WeightSpec::vertical_gap(), x, [1.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn margins() {
        let m = ellipticity_margin(&WeightSpec::one(), 8).unwrap();
        assert_eq!(m.margin, 2.0);
        let m = ellipticity_margin(&WeightSpec::constant(0.5), 10).unwrap();
        assert_eq!(m.margin, 0.5);
        let m = ellipticity_margin(&WeightSpec::vertical_gap(), 12).unwrap();
        assert_eq!(m.margin, 0.0);
        assert_eq!(m.zeta, [1.0, 0.0]);
        assert!(ellipticity_margin(&WeightSpec::one(), 7).is_err());
    }
}
