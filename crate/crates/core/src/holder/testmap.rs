use nalgebra::DVector;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{sobolev_norm, Grid, GridFunction};
use crate::samples::{bump, seeded_rng};
use crate::stability::{least_stable_direction, OperatorMatrix};

/// `μ₁`: stability exponent of the linearisation from `L²` into `L²`.
pub const MU1: f64 = 1.0;
/// `μ₂`: interpolation exponent of `H¹` between `L²` and `H⁴`.
pub const MU2: f64 = 0.75;

/// Checks the exponent hypothesis `μ₁ μ₂ > 1/2`.
pub fn check_exponents(mu1: f64, mu2: f64) -> Result<()> {
    if !(mu1 > 0.0 && mu1 <= 1.0 && mu2 > 0.0 && mu2 <= 1.0) {
        return Err(Error::InvalidParameter(format!("exponents must lie in (0, 1], got ({mu1}, {mu2})")));
    }
    if mu1 * mu2 <= 0.5 {
        return Err(Error::InvalidParameter(format!("μ₁μ₂ = {} must exceed 1/2", mu1 * mu2)));
    }
    Ok(())
}

/// `𝒜(f) = N f + (f, a) N f` for the assembled normal operator `N` and a
/// fixed profile `a` of unit `L²` norm. Inputs are nodal vectors on `Ω`,
/// outputs on `Ω₁`, both with the `h²`-weighted product.
#[derive(Debug, Clone)]
pub struct TestMap {
    normal: OperatorMatrix,
    profile: DVector<f64>,
}

impl TestMap {
    /// `profile` is normalised to unit `L²` norm.
    pub fn new(normal: OperatorMatrix, profile: &GridFunction) -> Result<Self> {
        if profile.grid() != normal.grid() || !profile.is_real() {
            return Err(Error::InvalidInput("profile must be real and live on the matrix grid".into()));
        }
        let a = normal.restrict_columns(&profile.real_part());
        let h = normal.grid().spacing();
        let norm = h * a.norm();
        if norm == 0.0 {
            return Err(Error::InvalidInput("profile vanishes on Ω".into()));
        }
        Ok(Self { normal, profile: a / norm })
    }

    pub fn normal(&self) -> &OperatorMatrix {
        &self.normal
    }

    pub fn grid(&self) -> &Grid {
        self.normal.grid()
    }

    pub fn profile(&self) -> &DVector<f64> {
        &self.profile
    }

    /// `(u, v) = h² Σ u v` on `Ω`.
    pub fn pair(&self, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
        self.grid().spacing().powi(2) * u.dot(v)
    }

    /// `L²` norm of nodal values (either side).
    pub fn norm(&self, u: &DVector<f64>) -> f64 {
        self.grid().spacing() * u.norm()
    }

    pub fn apply(&self, f: &DVector<f64>) -> DVector<f64> {
        self.normal.data() * f * (1.0 + self.pair(f, &self.profile))
    }

    /// `A_{f₀} h = N h + (h, a) N f₀ + (f₀, a) N h`.
    pub fn differential(&self, f0: &DVector<f64>, h: &DVector<f64>) -> DVector<f64> {
        let m = self.normal.data();
        m * h * (1.0 + self.pair(f0, &self.profile)) + m * f0 * self.pair(h, &self.profile)
    }

    /// The matrix of `A_{f₀}`: `(1 + (f₀, a)) N + (N f₀) aᵀ h²`.
    pub fn linearization(&self, f0: &DVector<f64>) -> Result<OperatorMatrix> {
        let m = self.normal.data();
        let h2 = self.grid().spacing().powi(2);
        let data = m * (1.0 + self.pair(f0, &self.profile)) + (m * f0) * self.profile.transpose() * h2;
        self.normal.with_data(data)
    }

    /// `‖N‖` from `L²(Ω)` to `L²(Ω₁)`.
    pub fn normal_operator_norm(&self) -> f64 {
        self.normal.data().singular_values().max()
    }

    pub fn to_columns(&self, f: &GridFunction) -> DVector<f64> {
        self.normal.restrict_columns(&f.real_part())
    }

    pub fn to_grid(&self, f: &DVector<f64>) -> GridFunction {
        let mut values = vec![0.0; self.grid().len()];
        for (k, &n) in self.normal.col_nodes().iter().enumerate() {
            values[n] = f[k];
        }
        GridFunction::from_real(*self.grid(), &values).expect("length matches the grid")
    }
}

/// Unit-`L²` smooth bumps used as perturbation directions: centre within
/// 0.15 of the origin, radius in `[0.75, 0.85)`, power 5.
pub fn sample_directions(map: &TestMap, count: usize, seed: u64) -> Vec<DVector<f64>> {
    let mut rng = seeded_rng(seed);
    (0..count)
        .map(|_| {
            let dist = rng.gen_range(0.0..0.15);
            let angle = rng.gen_range(0.0..std::f64::consts::TAU);
            let radius = rng.gen_range(0.75..0.85);
            let b = bump(*map.grid(), [dist * angle.cos(), dist * angle.sin()], radius, 5);
            let v = map.to_columns(&b);
            let n = map.norm(&v);
            v / n
        })
        .collect()
}

fn check_scales(scales: &[f64]) -> Result<()> {
    if scales.is_empty() || scales.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
        return Err(Error::InvalidInput("scales must be a nonempty list of positive numbers".into()));
    }
    if scales.windows(2).any(|s| s[0] <= s[1]) {
        return Err(Error::InvalidInput("scales must be strictly decreasing".into()));
    }
    Ok(())
}

/// Empirical constant of the quadratic remainder estimate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RemainderReport {
    pub scales: Vec<f64>,
    /// `max ‖R_{f₀}(f)‖ / ‖f − f₀‖²` over the samples at each scale.
    pub c_hat: Vec<f64>,
    /// Relative change of `c_hat` between the two smallest scales.
    pub variation: f64,
    /// `‖N‖_{L²→L²}`, which bounds `c_hat` when `f₀ = 0`.
    pub operator_norm: f64,
}

impl RemainderReport {
    pub fn max(&self) -> f64 {
        self.c_hat.iter().copied().fold(0.0, f64::max)
    }

    pub fn stable(&self, tolerance: f64) -> bool {
        self.variation < tolerance
    }
}

fn remainder_over(map: &TestMap, f0: &DVector<f64>, scales: &[f64], dirs: &[DVector<f64>]) -> RemainderReport {
    let base = map.apply(f0);
    let c_hat: Vec<f64> = scales
        .iter()
        .map(|&s| {
            dirs.iter()
                .map(|u| {
                    let d = u * s;
                    let f = f0 + &d;
                    let rem = map.apply(&f) - &base - map.differential(f0, &d);
                    map.norm(&rem) / map.norm(&d).powi(2)
                })
                .fold(0.0, f64::max)
        })
        .collect();
    let variation = match c_hat.len() {
        0 | 1 => 0.0,
        n => {
            let (a, b) = (c_hat[n - 2], c_hat[n - 1]);
            if a == 0.0 && b == 0.0 {
                0.0
            } else {
                (a - b).abs() / a.abs().max(b.abs())
            }
        }
    };
    RemainderReport { scales: scales.to_vec(), c_hat, variation, operator_norm: map.normal_operator_norm() }
}

/// Estimates `C_{f₀}` in `‖R_{f₀}(f)‖ ≤ C_{f₀} ‖f − f₀‖²` along seeded
/// bump directions at each scale.
pub fn remainder_bound_estimate(map: &TestMap, f0: &DVector<f64>, scales: &[f64], samples: usize, seed: u64) -> Result<RemainderReport> {
    check_scales(scales)?;
    if samples == 0 {
        return Err(Error::InvalidParameter("samples must be at least 1".into()));
    }
    Ok(remainder_over(map, f0, scales, &sample_directions(map, samples, seed)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HolderSettings {
    /// A priori bound `K` on `‖f‖_{H³}`.
    pub k: f64,
    /// Values of `‖f − f₀‖_{L²}`, strictly decreasing.
    pub scales: Vec<f64>,
    /// Number of bump directions.
    pub samples: usize,
    pub seed: u64,
    /// Also test along the least stable direction of the linearisation.
    pub include_least_stable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HolderSample {
    pub sample_id: usize,
    pub scale: f64,
    /// `‖f − f₀‖_{L²(Ω)}`.
    pub lhs_norm: f64,
    /// `‖𝒜(f) − 𝒜(f₀)‖_{L²(Ω₁)}`.
    pub rhs_norm: f64,
    /// `lhs / (K^{2−μ₁−μ₂} rhs^{μ₁μ₂})`.
    pub ratio: f64,
}

/// Spaces of the instantiated conditional stability estimate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HolderSpaces {
    pub b1: &'static str,
    pub b1_prime: &'static str,
    pub b1_second: &'static str,
    pub b2: &'static str,
    pub b2_prime: &'static str,
    pub b2_second: &'static str,
}

pub const HOLDER_SPACES: HolderSpaces = HolderSpaces {
    b1: "L2(Omega)",
    b1_prime: "L2(Omega)",
    b1_second: "H3",
    b2: "L2(Omega1)",
    b2_prime: "H1(Omega1)",
    b2_second: "H4(Omega1)",
};

/// Tolerance on the fitted log-log slope below `μ₁μ₂`.
pub const SLOPE_TOLERANCE: f64 = 0.05;
/// Tolerance on the relative variation of the remainder constant.
pub const REMAINDER_TOLERANCE: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HolderReport {
    pub spaces: HolderSpaces,
    pub mu1: f64,
    pub mu2: f64,
    pub k: f64,
    pub seed: u64,
    pub scales: Vec<f64>,
    /// `‖f₀‖_{L²}` of the centre.
    pub center_norm: f64,
    /// `σ_min` of the linearisation at `f₀` (into `H¹(Ω₁)`).
    pub linearization_sigma: f64,
    /// Whether the linearisation is stable (`σ_min > 0`); without it no
    /// assertion below is made.
    pub hypothesis_holds: bool,
    pub samples: Vec<HolderSample>,
    /// Samples dropped for violating `‖f‖_{H³} ≤ K`.
    pub excluded: usize,
    /// Smallest `Ĉ` with `‖f − f₀‖ ≤ Ĉ K^{2−μ₁−μ₂} ‖𝒜(f) − 𝒜(f₀)‖^{μ₁μ₂}` on every sample.
    pub c_hat: f64,
    /// Least-squares slope of `log ‖f − f₀‖` against `log ‖𝒜(f) − 𝒜(f₀)‖`,
    /// with one intercept per direction.
    pub slope: f64,
    /// Smallest `C` with `‖f − f₀‖ ≤ C K^{2−μ₁−μ₂}(‖Δ𝒜‖^{μ₁μ₂} + ‖f − f₀‖^{2μ₁μ₂})`.
    pub chain_constant: f64,
    pub remainder: RemainderReport,
    pub slope_tolerance: f64,
    pub remainder_tolerance: f64,
    pub inequality_holds: bool,
    pub slope_ok: bool,
    pub chain_holds: bool,
    pub remainder_quadratic: bool,
    pub passed: bool,
}

/// Empirical conditional Hölder estimate of `map` around `f0`.
///
/// Perturbations `f = f₀ + s u` run over the bump directions (and, if
/// requested, the least stable direction of the linearisation) at every
/// scale `s`; those with `‖f‖_{H³} > K` are excluded and counted.
pub fn holder_fit(map: &TestMap, f0: &DVector<f64>, settings: &HolderSettings) -> Result<HolderReport> {
    check_exponents(MU1, MU2)?;
    check_scales(&settings.scales)?;
    if !(settings.k.is_finite() && settings.k > 0.0) || settings.samples == 0 {
        return Err(Error::InvalidParameter("K must be positive and samples at least 1".into()));
    }
    let (entry, weakest) = least_stable_direction(&map.linearization(f0)?)?;
    let mut dirs = sample_directions(map, settings.samples, settings.seed);
    if settings.include_least_stable {
        let n = map.norm(&weakest);
        dirs.push(weakest / n);
    }
    let remainder = remainder_over(map, f0, &settings.scales, &dirs);
    let exponent = MU1 * MU2;
    let k_factor = settings.k.powf(2.0 - MU1 - MU2);

    let base = map.apply(f0);
    let mut samples = Vec::new();
    let mut excluded = 0;
    let mut chain_constant: f64 = 0.0;
    for (id, u) in dirs.iter().enumerate() {
        for &s in &settings.scales {
            let d = u * s;
            let f = f0 + &d;
            if sobolev_norm(&map.to_grid(&f), 3.0)? > settings.k {
                excluded += 1;
                continue;
            }
            let lhs = map.norm(&d);
            let rhs = map.norm(&(map.apply(&f) - &base));
            let ratio = lhs / (k_factor * rhs.powf(exponent));
            chain_constant = chain_constant.max(lhs / (k_factor * (rhs.powf(exponent) + lhs.powf(2.0 * exponent))));
            samples.push(HolderSample { sample_id: id, scale: s, lhs_norm: lhs, rhs_norm: rhs, ratio });
        }
    }
    let c_hat = samples.iter().map(|s| s.ratio).fold(0.0, f64::max);
    let slope = log_slope(&samples);
    let hypothesis_holds = entry.sigma_min > 0.0;
    let inequality_holds = !samples.is_empty()
        && c_hat.is_finite()
        && samples.iter().all(|s| s.lhs_norm <= c_hat * k_factor * s.rhs_norm.powf(exponent) * (1.0 + 1e-12));
    let slope_ok = slope >= exponent - SLOPE_TOLERANCE;
    let chain_holds = chain_constant.is_finite() && chain_constant <= c_hat;
    let remainder_quadratic = remainder.stable(REMAINDER_TOLERANCE);
    let passed = hypothesis_holds && inequality_holds && slope_ok && chain_holds && remainder_quadratic;
    Ok(HolderReport {
        spaces: HOLDER_SPACES,
        mu1: MU1,
        mu2: MU2,
        k: settings.k,
        seed: settings.seed,
        scales: settings.scales.clone(),
        center_norm: map.norm(f0),
        linearization_sigma: entry.sigma_min,
        hypothesis_holds,
        samples,
        excluded,
        c_hat,
        slope,
        chain_constant,
        remainder,
        slope_tolerance: SLOPE_TOLERANCE,
        remainder_tolerance: REMAINDER_TOLERANCE,
        inequality_holds,
        slope_ok,
        chain_holds,
        remainder_quadratic,
        passed,
    })
}

/// Common slope of `log ‖f − f₀‖` against `log ‖Δ𝒜‖` with a separate
/// intercept per direction (each direction is one ray through `f₀`).
fn log_slope(samples: &[HolderSample]) -> f64 {
    let mut groups: std::collections::BTreeMap<usize, Vec<(f64, f64)>> = std::collections::BTreeMap::new();
    for s in samples.iter().filter(|s| s.lhs_norm > 0.0 && s.rhs_norm > 0.0) {
        groups.entry(s.sample_id).or_default().push((s.rhs_norm.ln(), s.lhs_norm.ln()));
    }
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for pts in groups.values().filter(|p| p.len() >= 2) {
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        sxy += pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>();
        sxx += pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    }
    if sxx == 0.0 {
        f64::NAN
    } else {
        sxy / sxx
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::xray::{RaySet, WeightSpec};

    fn test_map(points: usize) -> TestMap {
        let grid = Grid::new(4.0, points).unwrap();
        let m = OperatorMatrix::assemble(&WeightSpec::one(), grid, RaySet::new(36, 36, 0.02).unwrap()).unwrap();
        TestMap::new(m, &bump(grid, [0.1, -0.1], 0.7, 3)).unwrap()
    }

    #[test]
    fn zero_and_differential() {
        let map = test_map(16);
        let zero = DVector::zeros(map.normal().col_nodes().len());
        assert_eq!(map.apply(&zero).norm(), 0.0);
        assert!((map.norm(map.profile()) - 1.0).abs() < 1e-12);

        let f0 = sample_directions(&map, 1, 4).pop().unwrap() * 0.05;
        let h = sample_directions(&map, 1, 5).pop().unwrap();
        let lin = map.differential(&f0, &h);
        let via_matrix = map.linearization(&f0).unwrap().data() * &h;
        assert!((&lin - &via_matrix).norm() <= 1e-12 * lin.norm());
        let errs: Vec<f64> = [1e-2, 1e-3, 1e-4]
            .iter()
            .map(|&t| {
                let fd = (map.apply(&(&f0 + &h * t)) - map.apply(&f0)) / t;
                map.norm(&(fd - &lin))
            })
            .collect();
        for w in errs.windows(2) {
            assert!((w[0] / w[1]).log10() >= 0.9);
        }
    }

    #[test]
    fn remainder_is_quadratic() {
        let map = test_map(16);
        let zero = DVector::zeros(map.normal().col_nodes().len());
        let rep = remainder_bound_estimate(&map, &zero, &[1e-1, 5e-2, 1e-2], 4, 1).unwrap();
        assert!(rep.stable(1e-6));
        assert!(rep.max() <= rep.operator_norm * (1.0 + 1e-12));
        // doubling the perturbation quadruples the remainder
        let u = &sample_directions(&map, 1, 2)[0];
        let r = |s: f64| {
            let d = u * s;
            map.norm(&(map.apply(&d) - map.differential(&zero, &d)))
        };
        assert!((r(2e-2) / r(1e-2) - 4.0).abs() < 0.6);
        assert!(remainder_bound_estimate(&map, &zero, &[1e-2, 1e-1], 2, 1).is_err());
    }

    #[test]
    fn exponent_hypothesis() {
        assert!(check_exponents(MU1, MU2).is_ok());
        assert!(check_exponents(0.7, 0.7).is_err());
    }
}
