//! Uniform periodic grid on the square box `[-L/2, L/2)²`, discrete Fourier
//! analysis, Sobolev and `C^k` norms, and the interpolation-inequality check.
//!
//! Node `(i, j)` sits at `(-L/2 + i·h, -L/2 + j·h)` and is stored at the
//! row-major index `i·N + j`; `i` runs along `x₁`, `j` along `x₂`.
//!
//! Fourier coefficients are normalised so that Parseval holds with the box
//! measure: `Σ_ξ |f̂(ξ)|² = h² Σ_n |f_n|²`. With the Sobolev weight
//! `(1 + |ξ|²)^s` the `s = 0` norm is exactly the discrete `L²` norm.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Point;

/// Highest finite-difference order accepted by [`ck_norm`].
pub const MAX_CK_ORDER: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    side: f64,
    points: usize,
}

impl Grid {
    /// Builds a grid with `points` nodes per side on a box of side `side`.
    ///
    /// `points` must be even and at least 8; `side` must be positive.
    pub fn new(side: f64, points: usize) -> Result<Self> {
        if !(side.is_finite() && side > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "box side must be positive, got {side}"
            )));
        }
        if points < 8 || points % 2 != 0 {
            return Err(Error::InvalidParameter(format!(
                "points per side must be even and at least 8, got {points}"
            )));
        }
        Ok(Self { side, points })
    }

    pub fn side(&self) -> f64 {
        self.side
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn spacing(&self) -> f64 {
        self.side / self.points as f64
    }

    /// Total number of nodes, `N²`.
    pub fn len(&self) -> usize {
        self.points * self.points
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn coordinate(&self, i: usize) -> f64 {
        -0.5 * self.side + i as f64 * self.spacing()
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.points + j
    }

    pub fn node(&self, index: usize) -> Point {
        let (i, j) = (index / self.points, index % self.points);
        [self.coordinate(i), self.coordinate(j)]
    }

    /// Node indices strictly inside the disk of the given radius, in
    /// increasing index order.
    pub fn nodes_in_disk(&self, radius: f64) -> Vec<usize> {
        let r2 = radius * radius;
        (0..self.len())
            .filter(|&n| {
                let [x, y] = self.node(n);
                x * x + y * y < r2
            })
            .collect()
    }

    /// Integer frequency `m ∈ {-N/2, …, N/2 - 1}` stored at DFT slot `k`.
    pub fn wavenumber(&self, k: usize) -> i64 {
        let n = self.points as i64;
        let k = k as i64;
        if k < n / 2 {
            k
        } else {
            k - n
        }
    }

    /// Angular frequency `ξ = (2π/L)·m` stored at DFT slot `(k1, k2)`.
    pub fn frequency(&self, k1: usize, k2: usize) -> Point {
        let scale = 2.0 * PI / self.side;
        [
            scale * self.wavenumber(k1) as f64,
            scale * self.wavenumber(k2) as f64,
        ]
    }

    /// The full frequency lattice, in DFT slot order.
    pub fn frequencies(&self) -> Vec<Point> {
        (0..self.len())
            .map(|n| self.frequency(n / self.points, n % self.points))
            .collect()
    }
}

/// Convenience constructor mirroring [`Grid::new`].
pub fn make_grid(side: f64, points: usize) -> Result<Grid> {
    Grid::new(side, points)
}

/// Complex scalar field sampled on the nodes of a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Grid,
    values: Vec<Complex64>,
}

impl GridFunction {
    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            values: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    pub fn from_values(grid: Grid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidInput(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn from_real(grid: Grid, values: &[f64]) -> Result<Self> {
        Self::from_values(grid, values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    pub fn from_fn(grid: Grid, f: impl Fn(Point) -> Complex64) -> Self {
        let values = (0..grid.len()).map(|n| f(grid.node(n))).collect();
        Self { grid, values }
    }

    pub fn from_real_fn(grid: Grid, f: impl Fn(Point) -> f64) -> Self {
        Self::from_fn(grid, |x| Complex64::new(f(x), 0.0))
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn real_part(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.re).collect()
    }

    pub fn imag_part(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.im).collect()
    }

    pub fn is_real(&self) -> bool {
        self.values.iter().all(|v| v.im == 0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| v.re == 0.0 && v.im == 0.0)
    }

    /// Discrete `L²` norm over the box, `(h² Σ |f_n|²)^{1/2}`.
    pub fn l2_norm(&self) -> f64 {
        let h = self.grid.spacing();
        h * self.values.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `⟨f, g⟩ = h² Σ f_n · conj(g_n)`.
    pub fn inner(&self, other: &Self) -> Result<Complex64> {
        self.check_same_grid(other)?;
        let h2 = self.grid.spacing().powi(2);
        let s: Complex64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b.conj())
            .sum();
        Ok(s * h2)
    }

    /// `self + alpha · other`.
    pub fn add_scaled(&self, alpha: Complex64, other: &Self) -> Result<Self> {
        self.check_same_grid(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + alpha * b)
            .collect();
        Ok(Self { grid: self.grid, values })
    }

    pub fn scaled(&self, alpha: Complex64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|v| v * alpha).collect(),
        }
    }

    /// Copy with every node at distance `>= radius` from the origin set to zero.
    pub fn masked(&self, radius: f64) -> Self {
        let r2 = radius * radius;
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(n, &v)| {
                let [x, y] = self.grid.node(n);
                if x * x + y * y < r2 {
                    v
                } else {
                    Complex64::new(0.0, 0.0)
                }
            })
            .collect();
        Self { grid: self.grid, values }
    }

    pub fn spectrum(&self) -> SpectralField {
        let mut data = self.values.clone();
        fft_2d(&mut data, self.grid.points, FftDirection::Forward);
        let scale = self.grid.side / self.grid.len() as f64;
        for c in &mut data {
            *c *= scale;
        }
        SpectralField {
            grid: self.grid,
            coefficients: data,
        }
    }

    fn check_same_grid(&self, other: &Self) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::InvalidInput("grid functions live on different grids".into()));
        }
        Ok(())
    }
}

/// Fourier coefficients of a [`GridFunction`], stored in DFT slot order.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    grid: Grid,
    coefficients: Vec<Complex64>,
}

impl SpectralField {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coefficients
    }

    /// Sum `Σ_ξ (1 + |ξ|²)^s |f̂(ξ)|²`.
    pub fn weighted_energy(&self, s: f64) -> f64 {
        let n = self.grid.points;
        self.coefficients
            .iter()
            .enumerate()
            .map(|(slot, c)| {
                let [a, b] = self.grid.frequency(slot / n, slot % n);
                (1.0 + a * a + b * b).powf(s) * c.norm_sqr()
            })
            .sum()
    }

    pub fn to_grid_function(&self) -> GridFunction {
        let mut data = self.coefficients.clone();
        fft_2d(&mut data, self.grid.points, FftDirection::Inverse);
        let scale = 1.0 / self.grid.side;
        for v in &mut data {
            *v *= scale;
        }
        GridFunction {
            grid: self.grid,
            values: data,
        }
    }
}

fn fft_2d(data: &mut [Complex64], n: usize, direction: FftDirection) {
    let mut planner = FftPlanner::new();
    let fft: std::sync::Arc<dyn Fft<f64>> = planner.plan_fft(n, direction);
    // rows (contiguous in j)
    fft.process(data);
    let mut column = vec![Complex64::new(0.0, 0.0); n];
    for j in 0..n {
        for i in 0..n {
            column[i] = data[i * n + j];
        }
        fft.process(&mut column);
        for i in 0..n {
            data[i * n + j] = column[i];
        }
    }
}

fn check_finite(f: &GridFunction) -> Result<()> {
    if !f.is_finite() {
        return Err(Error::InvalidInput("grid function has non-finite values".into()));
    }
    Ok(())
}

/// `H^s` norm `(Σ_ξ (1 + |ξ|²)^s |f̂(ξ)|²)^{1/2}`.
pub fn sobolev_norm(f: &GridFunction, s: f64) -> Result<f64> {
    check_finite(f)?;
    if !s.is_finite() {
        return Err(Error::InvalidParameter(format!("Sobolev order must be finite, got {s}")));
    }
    Ok(f.spectrum().weighted_energy(s).sqrt())
}

/// Discrete `C^k` norm: the maximum over nodes of `|f|` and of every
/// periodic central difference quotient `∂^α f` with `|α| ≤ k`.
///
/// Per-axis difference operators of order 1 and 2 are the standard
/// second-order central stencils; orders 3 and 4 are their compositions.
pub fn ck_norm(f: &GridFunction, k: usize) -> Result<f64> {
    if k > MAX_CK_ORDER {
        return Err(Error::UnsupportedOrder(k));
    }
    check_finite(f)?;
    let n = f.grid.points;
    let h = f.grid.spacing();
    let mut best = 0.0_f64;
    for a in 0..=k {
        let along_x1 = difference(&f.values, n, h, 0, a);
        for b in 0..=(k - a) {
            let d = difference(&along_x1, n, h, 1, b);
            best = d.iter().map(|v| v.norm()).fold(best, f64::max);
        }
    }
    Ok(best)
}

fn difference(values: &[Complex64], n: usize, h: f64, axis: usize, order: usize) -> Vec<Complex64> {
    match order {
        0 => values.to_vec(),
        1 => first_difference(values, n, h, axis),
        2 => second_difference(values, n, h, axis),
        3 => first_difference(&second_difference(values, n, h, axis), n, h, axis),
        _ => {
            let d2 = second_difference(values, n, h, axis);
            second_difference(&d2, n, h, axis)
        }
    }
}

fn shifted(n: usize, index: usize, axis: usize, step: isize) -> usize {
    let (i, j) = (index / n, index % n);
    let wrap = |v: usize| ((v as isize + step).rem_euclid(n as isize)) as usize;
    if axis == 0 {
        wrap(i) * n + j
    } else {
        i * n + wrap(j)
    }
}

fn first_difference(values: &[Complex64], n: usize, h: f64, axis: usize) -> Vec<Complex64> {
    (0..values.len())
        .map(|idx| (values[shifted(n, idx, axis, 1)] - values[shifted(n, idx, axis, -1)]) / (2.0 * h))
        .collect()
}

fn second_difference(values: &[Complex64], n: usize, h: f64, axis: usize) -> Vec<Complex64> {
    (0..values.len())
        .map(|idx| {
            (values[shifted(n, idx, axis, 1)] - 2.0 * values[idx] + values[shifted(n, idx, axis, -1)])
                / (h * h)
        })
        .collect()
}

/// Ratio `‖f‖_{H^s} / (‖f‖_{H^{s1}}^{α1} ‖f‖_{H^{s2}}^{α2})` with
/// `α2 = 1 - α1` and `s = α1·s1 + α2·s2`.
///
/// Hölder's inequality on the spectral sum bounds the ratio by one. The zero
/// function returns exactly 1.
pub fn interpolation_check(f: &GridFunction, s1: f64, s2: f64, alpha1: f64) -> Result<f64> {
    check_finite(f)?;
    if !(0.0..=1.0).contains(&alpha1) {
        return Err(Error::InvalidParameter(format!("alpha1 must lie in [0, 1], got {alpha1}")));
    }
    if !(s1.is_finite() && s2.is_finite()) {
        return Err(Error::InvalidParameter("Sobolev orders must be finite".into()));
    }
    if f.is_zero() {
        return Ok(1.0);
    }
    let alpha2 = 1.0 - alpha1;
    let s = alpha1 * s1 + alpha2 * s2;
    let spectrum = f.spectrum();
    let middle = spectrum.weighted_energy(s).sqrt();
    let low = spectrum.weighted_energy(s1).sqrt();
    let high = spectrum.weighted_energy(s2).sqrt();
    Ok(middle / (low.powf(alpha1) * high.powf(alpha2)))
}
