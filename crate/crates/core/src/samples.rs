//! Seeded test fields shared by the experiments: compactly supported
//! polynomial bumps and random nodal vectors.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::grid::{Grid, GridFunction};
use crate::{Point, OMEGA_RADIUS};

/// Deterministic generator used by every seeded experiment.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `(1 - |x - c|²/r²)^power` inside the disk of radius `r` around `c`, zero outside.
pub fn bump(grid: Grid, center: Point, radius: f64, power: i32) -> GridFunction {
    GridFunction::from_real_fn(grid, |x| bump_value(x, center, radius, power))
}

pub fn bump_value(x: Point, center: Point, radius: f64, power: i32) -> f64 {
    let d2 = ((x[0] - center[0]).powi(2) + (x[1] - center[1]).powi(2)) / (radius * radius);
    if d2 < 1.0 {
        (1.0 - d2).powi(power)
    } else {
        0.0
    }
}

/// Random bump parameters `(center, radius)` with the support inside the
/// disk of radius `reach < 1`.
pub fn random_bump_params(rng: &mut impl Rng, radius_range: (f64, f64), reach: f64) -> (Point, f64) {
    let radius = rng.gen_range(radius_range.0..radius_range.1);
    let angle = rng.gen_range(0.0..std::f64::consts::TAU);
    let dist = rng.gen_range(0.0..(reach - radius).max(0.0) + f64::EPSILON);
    ([dist * angle.cos(), dist * angle.sin()], radius)
}

/// `count` smooth bumps of power 4 supported in `Ω` (radii 0.3–0.5).
pub fn random_bumps(grid: Grid, count: usize, seed: u64) -> Vec<GridFunction> {
    let mut rng = seeded_rng(seed);
    (0..count)
        .map(|_| {
            let (c, r) = random_bump_params(&mut rng, (0.3, 0.5), 0.9 * OMEGA_RADIUS);
            bump(grid, c, r, 4)
        })
        .collect()
}

/// Uniform random values in `[-1, 1)` on the nodes of `Ω`, zero elsewhere.
pub fn random_omega_field(grid: Grid, rng: &mut impl Rng) -> GridFunction {
    let r2 = OMEGA_RADIUS * OMEGA_RADIUS;
    let values: Vec<f64> = (0..grid.len())
        .map(|n| {
            let v: f64 = rng.gen_range(-1.0..1.0);
            let [x, y] = grid.node(n);
            if x * x + y * y < r2 {
                v
            } else {
                0.0
            }
        })
        .collect();
    GridFunction::from_real(grid, &values).expect("length matches the grid")
}
