use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::samples::seeded_rng;

/// Exponent vector of a monomial `x₁^{p₁} ⋯ x_n^{p_n}`.
pub type Powers = Vec<u32>;

/// Polynomial map `ℝⁿ → ℝᵐ` of total degree at most 3, stored as one
/// coefficient table per output component, with a base point `x₀`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FinDimMap {
    n: usize,
    components: Vec<BTreeMap<Powers, f64>>,
    base: Vec<f64>,
}

impl FinDimMap {
    /// `terms[i]` lists `(powers, coefficient)` for component `i`.
    pub fn new(n: usize, terms: Vec<Vec<(Powers, f64)>>, base: Vec<f64>) -> Result<Self> {
        if n == 0 || terms.is_empty() {
            return Err(Error::InvalidParameter("dimensions must be positive".into()));
        }
        if base.len() != n {
            return Err(Error::InvalidInput(format!("base point has {} entries, expected {n}", base.len())));
        }
        let mut components = Vec::with_capacity(terms.len());
        for comp in terms {
            let mut table = BTreeMap::new();
            for (p, c) in comp {
                if p.len() != n {
                    return Err(Error::InvalidInput(format!("monomial {p:?} has wrong arity")));
                }
                if p.iter().sum::<u32>() > 3 {
                    return Err(Error::InvalidParameter(format!("monomial {p:?} has degree above 3")));
                }
                if !c.is_finite() {
                    return Err(Error::InvalidParameter("coefficients must be finite".into()));
                }
                *table.entry(p).or_insert(0.0) += c;
            }
            components.push(table);
        }
        Ok(Self { n, components, base })
    }

    /// Random polynomial with every monomial of degree ≤ 3 drawn from
    /// `[-1, 1)` and a base point in `[-½, ½)ⁿ`, redrawn until
    /// `σ_min(A_{x₀}) ≥ min_sigma`.
    pub fn random_cubic(n: usize, m: usize, min_sigma: f64, seed: u64) -> Result<Self> {
        if m < n {
            return Err(Error::InvalidParameter("an injective differential needs m ≥ n".into()));
        }
        let monomials = monomials_up_to(n, 3);
        let mut rng = seeded_rng(seed);
        for _ in 0..10_000 {
            let terms = (0..m)
                .map(|_| monomials.iter().map(|p| (p.clone(), rng.gen_range(-1.0..1.0))).collect())
                .collect();
            let base = (0..n).map(|_| rng.gen_range(-0.5..0.5)).collect();
            let map = Self::new(n, terms, base)?;
            if map.sigma_min() >= min_sigma {
                return Ok(map);
            }
        }
        Err(Error::InvalidParameter(format!("no cubic map with σ_min ≥ {min_sigma} found")))
    }

    pub fn input_dim(&self) -> usize {
        self.n
    }

    pub fn output_dim(&self) -> usize {
        self.components.len()
    }

    pub fn base(&self) -> &[f64] {
        &self.base
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        self.components
            .iter()
            .map(|t| t.iter().map(|(p, c)| c * monomial(p, x)).sum())
            .collect()
    }

    /// Jacobian at `x`, from the coefficient table.
    pub fn differential(&self, x: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(self.output_dim(), self.n, |i, j| {
            self.components[i]
                .iter()
                .filter(|(p, _)| p[j] > 0)
                .map(|(p, c)| {
                    let mut q = p.clone();
                    q[j] -= 1;
                    c * p[j] as f64 * monomial(&q, x)
                })
                .sum()
        })
    }

    /// `σ_min(A_{x₀})`.
    pub fn sigma_min(&self) -> f64 {
        self.differential(&self.base)
            .singular_values()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// Per component, the coefficient mass of the degree-2 and degree-3
    /// parts of the expansion in `d = x − x₀`.
    fn taylor_mass(&self) -> Vec<(f64, f64)> {
        self.components
            .iter()
            .map(|table| {
                let mut shifted: BTreeMap<Powers, f64> = BTreeMap::new();
                for (p, c) in table {
                    expand_shifted(p, *c, &self.base, &mut shifted);
                }
                let mass = |deg: u32| shifted.iter().filter(|(q, _)| q.iter().sum::<u32>() == deg).map(|(_, c)| c.abs()).sum();
                (mass(2), mass(3))
            })
            .collect()
    }

    /// `C_{x₀}(r)` with `|R_{x₀}(x)| ≤ C_{x₀}(r)|x − x₀|²` on the ball of radius `r`.
    pub fn remainder_constant(&self, r: f64) -> f64 {
        self.taylor_mass().iter().map(|(q, t)| (q + t * r).powi(2)).sum::<f64>().sqrt()
    }

    /// Largest `r ≤ cap` with `r ≤ 1/(2 C₀ C_{x₀}(r))`.
    pub fn admissible_radius(&self, cap: f64) -> f64 {
        let c0 = 1.0 / self.sigma_min();
        let ok = |r: f64| 2.0 * c0 * self.remainder_constant(r) * r <= 1.0;
        if ok(cap) {
            return cap;
        }
        let (mut lo, mut hi) = (0.0, cap);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if ok(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }
}

fn monomial(p: &[u32], x: &[f64]) -> f64 {
    p.iter().zip(x).map(|(&k, v)| v.powi(k as i32)).product()
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Adds `c ∏ (x₀_j + d_j)^{p_j}` to `out`, expanded in powers of `d`.
fn expand_shifted(p: &[u32], c: f64, x0: &[f64], out: &mut BTreeMap<Powers, f64>) {
    let mut partial: Vec<(Powers, f64)> = vec![(Vec::new(), c)];
    for (j, &pj) in p.iter().enumerate() {
        let mut next = Vec::with_capacity(partial.len() * (pj as usize + 1));
        for (q, v) in &partial {
            for k in 0..=pj {
                let mut q = q.clone();
                q.push(k);
                next.push((q, v * binomial(pj, k) * x0[j].powi((pj - k) as i32)));
            }
        }
        partial = next;
    }
    for (q, v) in partial {
        *out.entry(q).or_insert(0.0) += v;
    }
}

fn monomials_up_to(n: usize, degree: u32) -> Vec<Powers> {
    let mut out = vec![Vec::new()];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|p: Powers| {
                let used: u32 = p.iter().sum();
                (0..=degree - used).map(move |k| {
                    let mut q = p.clone();
                    q.push(k);
                    q
                })
            })
            .collect();
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Hypothesis {
    Holds,
    /// The differential at the base point is not injective.
    SingularDifferential { sigma_min: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FinDimReport {
    pub hypothesis: Hypothesis,
    /// `C₀ = 1/σ_min(A_{x₀})`.
    pub c0: f64,
    /// `C_{x₀}` at the tested radius.
    pub c_x0: f64,
    pub radius: f64,
    pub admissible_radius: f64,
    pub samples: usize,
    /// `max |x − x₀| / |𝒜(x) − 𝒜(x₀)|` over the samples.
    pub max_ratio: f64,
    /// `2 C₀`.
    pub bound: f64,
    pub passed: bool,
}

/// Samples the ball of the given radius around `x₀` (uniformly in volume,
/// plus its boundary) and checks `|x − x₀| ≤ 2C₀|𝒜(x) − 𝒜(x₀)|`.
pub fn findim_lipschitz_check(map: &FinDimMap, radius: f64, samples: usize, seed: u64) -> Result<FinDimReport> {
    if !(radius.is_finite() && radius > 0.0) || samples == 0 {
        return Err(Error::InvalidParameter("radius must be positive and samples at least 1".into()));
    }
    let sigma = map.sigma_min();
    if !(sigma > 1e-14) {
        return Ok(FinDimReport {
            hypothesis: Hypothesis::SingularDifferential { sigma_min: sigma },
            c0: f64::INFINITY,
            c_x0: map.remainder_constant(radius),
            radius,
            admissible_radius: 0.0,
            samples: 0,
            max_ratio: f64::NAN,
            bound: f64::INFINITY,
            passed: false,
        });
    }
    let c0 = 1.0 / sigma;
    let admissible = map.admissible_radius(radius);
    if radius > admissible * (1.0 + 1e-12) {
        return Err(Error::InvalidParameter(format!(
            "radius {radius} exceeds the admissible radius {admissible}"
        )));
    }
    let n = map.input_dim();
    let x0 = map.base();
    let y0 = DVector::from_vec(map.eval(x0));
    let mut rng = seeded_rng(seed);
    let mut max_ratio: f64 = 0.0;
    for s in 0..samples {
        let dir = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0f64));
        let norm = dir.norm();
        if norm == 0.0 {
            continue;
        }
        let r = if s % 4 == 0 { radius } else { radius * rng.gen_range(0.0..1.0f64).powf(1.0 / n as f64) };
        let d = dir * (r / norm);
        if d.norm() == 0.0 {
            continue;
        }
        let x: Vec<f64> = x0.iter().zip(d.iter()).map(|(a, b)| a + b).collect();
        let diff = (DVector::from_vec(map.eval(&x)) - &y0).norm();
        max_ratio = max_ratio.max(d.norm() / diff);
    }
    Ok(FinDimReport {
        hypothesis: Hypothesis::Holds,
        c0,
        c_x0: map.remainder_constant(radius),
        radius,
        admissible_radius: admissible,
        samples,
        max_ratio,
        bound: 2.0 * c0,
        passed: max_ratio <= 2.0 * c0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parabola() -> FinDimMap {
        // (x₁ + x₂², x₂)
        FinDimMap::new(
            2,
            vec![vec![(vec![1, 0], 1.0), (vec![0, 2], 1.0)], vec![(vec![0, 1], 1.0)]],
            vec![0.0, 0.0],
        )
        .unwrap()
    }

    #[test]
    fn parabola_example() {
        let m = parabola();
        assert!((m.sigma_min() - 1.0).abs() < 1e-14);
        let y = m.eval(&[0.0, 0.1]);
        let norm = (y[0] * y[0] + y[1] * y[1]).sqrt();
        assert!((norm - 0.100499).abs() < 1e-6);
        assert!((0.1 / norm - 0.995037).abs() < 1e-6);
        assert_eq!(m.remainder_constant(0.3), 1.0);
        assert_eq!(m.admissible_radius(10.0), 0.5);
        let rep = findim_lipschitz_check(&m, 0.5, 500, 1).unwrap();
        assert!(rep.passed && rep.max_ratio <= 2.0);
        assert!(findim_lipschitz_check(&m, 0.6, 10, 1).is_err());
    }

    #[test]
    fn linear_map_ratio_is_one() {
        let m = FinDimMap::new(2, vec![vec![(vec![1, 0], 1.0)], vec![(vec![0, 1], 1.0)]], vec![0.3, -0.2]).unwrap();
        let rep = findim_lipschitz_check(&m, 5.0, 100, 2).unwrap();
        assert!((rep.max_ratio - 1.0).abs() < 1e-12);
    }

    #[test]
    fn singular_differential_is_reported() {
        let m = FinDimMap::new(1, vec![vec![(vec![2], 1.0)]], vec![0.0]).unwrap();
        let rep = findim_lipschitz_check(&m, 0.1, 10, 0).unwrap();
        assert!(matches!(rep.hypothesis, Hypothesis::SingularDifferential { .. }));
        assert!(!rep.passed);
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let m = FinDimMap::random_cubic(3, 4, 0.5, 11).unwrap();
        let x = m.base().to_vec();
        let jac = m.differential(&x);
        let eps = 1e-6;
        for j in 0..3 {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[j] += eps;
            xm[j] -= eps;
            let (fp, fm) = (m.eval(&xp), m.eval(&xm));
            for i in 0..4 {
                assert!(((fp[i] - fm[i]) / (2.0 * eps) - jac[(i, j)]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn remainder_bound_holds_pointwise() {
        let m = FinDimMap::random_cubic(2, 3, 0.5, 5).unwrap();
        let x0 = m.base().to_vec();
        let a = m.differential(&x0);
        let y0 = DVector::from_vec(m.eval(&x0));
        let r = 0.4;
        let c = m.remainder_constant(r);
        let mut rng = seeded_rng(9);
        for _ in 0..200 {
            let d = DVector::from_fn(2, |_, _| rng.gen_range(-r..r) / 2f64.sqrt());
            let x: Vec<f64> = x0.iter().zip(d.iter()).map(|(a, b)| a + b).collect();
            let rem = DVector::from_vec(m.eval(&x)) - &y0 - &a * &d;
            assert!(rem.norm() <= c * d.norm_squared() * (1.0 + 1e-12) + 1e-15);
        }
    }
}
