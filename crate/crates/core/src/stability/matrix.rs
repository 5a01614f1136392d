use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction};
use crate::xray::{Projector, RaySet, WeightSpec};
use crate::{OMEGA1_RADIUS, OMEGA_RADIUS};

/// Largest node count allowed on either side of an assembled matrix.
pub const MAX_MATRIX_NODES: usize = 4000;

/// Relative residual accepted from the symmetric eigensolver.
pub const EIGEN_TOLERANCE: f64 = 1e-8;

/// The discrete normal operator as a dense matrix from nodal values on `Ω`
/// (columns) to nodal values on `Ω₁` (rows). Node lists are in row-major
/// grid order.
#[derive(Debug, Clone)]
pub struct OperatorMatrix {
    projector: Arc<Projector>,
    row_nodes: Vec<usize>,
    col_nodes: Vec<usize>,
    data: DMatrix<f64>,
}

impl OperatorMatrix {
    /// Assembles `N_w` column by column from the sparse ray matrix.
    pub fn assemble(w: &WeightSpec, grid: Grid, rays: RaySet) -> Result<Self> {
        let row_nodes = grid.nodes_in_disk(OMEGA1_RADIUS);
        let col_nodes = grid.nodes_in_disk(OMEGA_RADIUS);
        let nodes = row_nodes.len().max(col_nodes.len());
        if nodes > MAX_MATRIX_NODES {
            return Err(Error::TooLarge { nodes, limit: MAX_MATRIX_NODES });
        }
        let projector = Projector::new(w, grid, rays)?;

        let mut row_of = vec![usize::MAX; grid.len()];
        for (k, &n) in row_nodes.iter().enumerate() {
            row_of[n] = k;
        }
        let mut rays_at: Vec<Vec<(usize, f64)>> = vec![Vec::new(); grid.len()];
        for r in 0..rays.len() {
            for &(n, a) in projector.row(r) {
                rays_at[n as usize].push((r, a));
            }
        }
        let scale = rays.measure() / grid.spacing().powi(2);
        let columns: Vec<Vec<f64>> = col_nodes
            .par_iter()
            .map(|&c| {
                let mut col = vec![0.0; row_nodes.len()];
                for &(r, ac) in &rays_at[c] {
                    for &(n, an) in projector.row(r) {
                        let k = row_of[n as usize];
                        if k != usize::MAX {
                            col[k] += scale * ac * an;
                        }
                    }
                }
                col
            })
            .collect();
        let data = DMatrix::from_iterator(row_nodes.len(), col_nodes.len(), columns.into_iter().flatten());
        Ok(Self { projector: Arc::new(projector), row_nodes, col_nodes, data })
    }

    /// A matrix on the same index sets with different entries (used for
    /// linearisations of nonlinear maps built from `N_w`).
    pub fn with_data(&self, data: DMatrix<f64>) -> Result<Self> {
        if data.shape() != self.data.shape() {
            return Err(Error::InvalidInput(format!(
                "matrix shape {:?} does not match {:?}",
                data.shape(),
                self.data.shape()
            )));
        }
        Ok(Self { data, ..self.clone() })
    }

    pub fn grid(&self) -> &Grid {
        self.projector.grid()
    }

    pub fn rays(&self) -> &RaySet {
        self.projector.rays()
    }

    pub fn weight(&self) -> &WeightSpec {
        self.projector.weight()
    }

    pub fn weight_fingerprint(&self) -> String {
        self.weight().fingerprint()
    }

    pub fn projector(&self) -> &Projector {
        &self.projector
    }

    pub fn row_nodes(&self) -> &[usize] {
        &self.row_nodes
    }

    pub fn col_nodes(&self) -> &[usize] {
        &self.col_nodes
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    /// Nodal values of `f` on `Ω` as a column vector.
    pub fn restrict_columns(&self, f: &[f64]) -> DVector<f64> {
        DVector::from_iterator(self.col_nodes.len(), self.col_nodes.iter().map(|&n| f[n]))
    }

    /// `M f` on `Ω₁` rows, extended by zero to the whole grid.
    pub fn apply(&self, f: &GridFunction) -> Result<GridFunction> {
        if f.grid() != self.grid() {
            return Err(Error::InvalidInput("function lives on a different grid than the matrix".into()));
        }
        let re = &self.data * self.restrict_columns(&f.real_part());
        let im = &self.data * self.restrict_columns(&f.imag_part());
        let mut values = vec![num_complex::Complex64::new(0.0, 0.0); self.grid().len()];
        for (k, &n) in self.row_nodes.iter().enumerate() {
            values[n] = num_complex::Complex64::new(re[k], im[k]);
        }
        GridFunction::from_values(*self.grid(), values)
    }

    /// `R` with `‖u‖²_{H¹(Ω₁)} = |R u|²` for nodal values `u` on `Ω₁`:
    /// `h·[I; D₁; D₂]` with forward differences kept where both nodes lie
    /// in `Ω₁`.
    pub fn h1_factor(&self) -> DMatrix<f64> {
        let grid = self.grid();
        let n = grid.points();
        let h = grid.spacing();
        let mut row_of = vec![usize::MAX; grid.len()];
        for (k, &node) in self.row_nodes.iter().enumerate() {
            row_of[node] = k;
        }
        let m = self.row_nodes.len();
        let mut diffs: Vec<(usize, usize)> = Vec::new();
        for (di, dj) in [(1usize, 0usize), (0, 1)] {
            for (k, &node) in self.row_nodes.iter().enumerate() {
                let (i, j) = (node / n, node % n);
                let next = ((i + di) % n) * n + (j + dj) % n;
                if row_of[next] != usize::MAX {
                    diffs.push((k, row_of[next]));
                }
            }
        }
        let mut r = DMatrix::zeros(m + diffs.len(), m);
        for k in 0..m {
            r[(k, k)] = h;
        }
        for (d, &(a, b)) in diffs.iter().enumerate() {
            r[(m + d, a)] = -1.0;
            r[(m + d, b)] = 1.0;
        }
        r
    }
}

/// Stability constant of one assembled matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StabilityEntry {
    pub resolution: usize,
    /// `min_f ‖M f‖_{H¹(Ω₁)} / ‖f‖_{L²(Ω)}`.
    pub sigma_min: f64,
    /// `1/sigma_min`, absent when `sigma_min = 0`.
    pub c_estimate: Option<f64>,
    /// Relative eigen-residual of the computed minimiser.
    pub residual: f64,
}

/// Smallest generalised singular value of `M` from `L²(Ω)` to `H¹(Ω₁)`,
/// via the smallest eigenvalue of `Mᵀ G M` against `h² I`.
pub fn stability_constant(m: &OperatorMatrix) -> Result<StabilityEntry> {
    least_stable_direction(m).map(|(entry, _)| entry)
}

/// [`stability_constant`] together with a unit minimiser (nodal values on
/// the column nodes, Euclidean norm one).
pub fn least_stable_direction(m: &OperatorMatrix) -> Result<(StabilityEntry, DVector<f64>)> {
    let h2 = m.grid().spacing().powi(2);
    let rm = m.h1_factor() * m.data();
    let normal = rm.transpose() * &rm / h2;
    let eig = SymmetricEigen::new(normal.clone());
    let (k, mu) = eig
        .eigenvalues
        .iter()
        .copied()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or_else(|| Error::InvalidInput("matrix has no columns".into()))?;
    let v = eig.eigenvectors.column(k);
    let scale = normal.norm().max(f64::MIN_POSITIVE);
    let residual = (&normal * v - v * mu).norm() / scale;
    if !(residual <= EIGEN_TOLERANCE) {
        return Err(Error::NumericFailure { residual, tolerance: EIGEN_TOLERANCE });
    }
    let sigma_min = mu.max(0.0).sqrt();
    let entry = StabilityEntry {
        resolution: m.grid().points(),
        sigma_min,
        c_estimate: (sigma_min > 0.0).then(|| 1.0 / sigma_min),
        residual,
    };
    Ok((entry, v.into_owned()))
}

/// Stability constants of one weight over a list of resolutions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub weight_fingerprint: String,
    pub side: f64,
    pub rays: RaySet,
    pub entries: Vec<StabilityEntry>,
}

impl StabilityReport {
    pub fn resolutions(&self) -> Vec<usize> {
        self.entries.iter().map(|e| e.resolution).collect()
    }

    pub fn sigma_min(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.sigma_min).collect()
    }

    /// `min σ / max σ` over the sweep.
    pub fn spread(&self) -> f64 {
        let s = self.sigma_min();
        let max = s.iter().copied().fold(0.0, f64::max);
        let min = s.iter().copied().fold(f64::INFINITY, f64::min);
        if max == 0.0 {
            0.0
        } else {
            min / max
        }
    }
}

pub fn stability_sweep(w: &WeightSpec, side: f64, resolutions: &[usize], rays: RaySet) -> Result<StabilityReport> {
    if resolutions.is_empty() {
        return Err(Error::InvalidInput("resolution list is empty".into()));
    }
    let entries = resolutions
        .iter()
        .map(|&n| stability_constant(&OperatorMatrix::assemble(w, Grid::new(side, n)?, rays)?))
        .collect::<Result<Vec<_>>>()?;
    Ok(StabilityReport { weight_fingerprint: w.fingerprint(), side, rays, entries })
}

/// `σ_min` of `w₀ + ε δ` along a list of `ε`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerturbationScan {
    pub base_sigma: f64,
    pub eps: Vec<f64>,
    pub sigma_min: Vec<f64>,
    /// `|σ(ε) − σ(0)|`.
    pub deviation: Vec<f64>,
    /// Least-squares slope of the deviation against `ε` through the origin.
    pub slope: f64,
    /// `max deviation/ε`; every deviation is at most `lipschitz · ε`.
    pub lipschitz: f64,
}

impl PerturbationScan {
    /// Whether the deviation is nondecreasing in `ε`.
    pub fn monotone(&self) -> bool {
        self.deviation.windows(2).all(|d| d[0] <= d[1])
    }
}

pub fn perturbation_scan(w0: &WeightSpec, delta: &WeightSpec, eps_list: &[f64], grid: Grid, rays: RaySet) -> Result<PerturbationScan> {
    if eps_list.is_empty() || eps_list.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
        return Err(Error::InvalidInput("eps list must be nonempty and nonnegative".into()));
    }
    if eps_list.windows(2).any(|e| e[0] >= e[1]) {
        return Err(Error::InvalidInput("eps list must be strictly increasing".into()));
    }
    let base_sigma = stability_constant(&OperatorMatrix::assemble(w0, grid, rays)?)?.sigma_min;
    let sigma_min = eps_list
        .iter()
        .map(|&e| {
            let w = WeightSpec::perturbed(w0, delta, e);
            Ok(stability_constant(&OperatorMatrix::assemble(&w, grid, rays)?)?.sigma_min)
        })
        .collect::<Result<Vec<_>>>()?;
    let deviation: Vec<f64> = sigma_min.iter().map(|s| (s - base_sigma).abs()).collect();
    let ee: f64 = eps_list.iter().map(|e| e * e).sum();
    let slope = if ee > 0.0 {
        eps_list.iter().zip(&deviation).map(|(e, d)| e * d).sum::<f64>() / ee
    } else {
        0.0
    };
    let lipschitz = eps_list
        .iter()
        .zip(&deviation)
        .filter(|(e, _)| **e > 0.0)
        .map(|(e, d)| d / e)
        .fold(0.0, f64::max);
    Ok(PerturbationScan { base_sigma, eps: eps_list.to_vec(), sigma_min, deviation, slope, lipschitz })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::xray::normal_compose;

    fn rays() -> RaySet {
        RaySet::new(36, 36, 0.02).unwrap()
    }

    #[test]
    fn columns_match_composition() {
        let grid = Grid::new(4.0, 16).unwrap();
        let w = WeightSpec::perturbed(&WeightSpec::one(), &WeightSpec::vertical_gap(), -0.4);
        let m = OperatorMatrix::assemble(&w, grid, rays()).unwrap();
        for j in [0, 7, 19, m.col_nodes().len() / 2, m.col_nodes().len() - 1] {
            let mut e = vec![0.0; grid.len()];
            e[m.col_nodes()[j]] = 1.0;
            let col = normal_compose(&w, &GridFunction::from_real(grid, &e).unwrap(), &rays()).unwrap();
            for (k, &n) in m.row_nodes().iter().enumerate() {
                let want = col.values()[n].re;
                assert!((m.data()[(k, j)] - want).abs() <= 1e-12 * want.abs().max(1.0));
            }
        }
    }

    #[test]
    fn symmetric_on_omega_and_zero_weight() {
        let grid = Grid::new(4.0, 16).unwrap();
        let m = OperatorMatrix::assemble(&WeightSpec::one(), grid, rays()).unwrap();
        let pos: Vec<usize> = m
            .col_nodes()
            .iter()
            .map(|c| m.row_nodes().iter().position(|r| r == c).unwrap())
            .collect();
        for a in 0..m.col_nodes().len() {
            for b in 0..a {
                let x = m.data()[(pos[a], b)];
                let y = m.data()[(pos[b], a)];
                assert!((x - y).abs() <= 1e-10);
            }
        }
        let z = OperatorMatrix::assemble(&WeightSpec::constant(0.0), grid, rays()).unwrap();
        assert!(z.data().iter().all(|&v| v == 0.0));
        let s = stability_constant(&z).unwrap();
        assert_eq!(s.sigma_min, 0.0);
        assert_eq!(s.c_estimate, None);
    }

    #[test]
    fn eigen_route_agrees_with_svd_of_whitened_matrix() {
        let grid = Grid::new(4.0, 16).unwrap();
        let m = OperatorMatrix::assemble(&WeightSpec::one(), grid, rays()).unwrap();
        let s = stability_constant(&m).unwrap();
        let svd = (m.h1_factor() * m.data()).singular_values();
        let oracle = svd.iter().copied().fold(f64::INFINITY, f64::min) / grid.spacing();
        assert!((s.sigma_min - oracle).abs() <= 1e-8 * oracle);
        assert!((s.c_estimate.unwrap() * s.sigma_min - 1.0).abs() < 1e-12);
    }

    #[test]
    fn h1_factor_reproduces_discrete_norm() {
        let grid = Grid::new(4.0, 16).unwrap();
        let m = OperatorMatrix::assemble(&WeightSpec::one(), grid, rays()).unwrap();
        let r = m.h1_factor();
        let u = DVector::from_fn(m.row_nodes().len(), |k, _| (k as f64 * 0.37).sin());
        let h = grid.spacing();
        let n = grid.points();
        let mut expected: f64 = u.iter().map(|v| h * h * v * v).sum();
        for (k, &node) in m.row_nodes().iter().enumerate() {
            for next in [node + n, node + 1] {
                if let Some(l) = m.row_nodes().iter().position(|&x| x == next) {
                    expected += (u[l] - u[k]).powi(2);
                }
            }
        }
        assert!(((r * &u).norm_squared() - expected).abs() < 1e-12 * expected);
    }

    #[test]
    fn guard_and_scan_edges() {
        let big = Grid::new(4.0, 128).unwrap();
        assert!(matches!(
            OperatorMatrix::assemble(&WeightSpec::one(), big, rays()),
            Err(Error::TooLarge { .. })
        ));
        let grid = Grid::new(4.0, 16).unwrap();
        let scan = perturbation_scan(&WeightSpec::one(), &WeightSpec::constant(0.0), &[0.0, 0.1], grid, rays()).unwrap();
        assert_eq!(scan.sigma_min[0], scan.base_sigma);
        assert_eq!(scan.sigma_min[1], scan.base_sigma);
        assert!(perturbation_scan(&WeightSpec::one(), &WeightSpec::one(), &[0.1, 0.05], grid, rays()).is_err());
    }
}
