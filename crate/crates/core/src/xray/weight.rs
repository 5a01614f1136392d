use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::Point;

/// The weight `w(x, θ)` of the transform.
///
/// `θ` is always passed as a unit vector. All kinds are real-valued and
/// continuous in both arguments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WeightSpec {
    Constant {
        value: f64,
    },
    /// Zero on the cone of lines within `half_width` (radians) of the axis at
    /// angle `center`, rising to one across a `C¹` smoothstep of width
    /// `taper`. The mask depends on the line, so `θ` and `-θ` agree.
    LimitedAngle {
        center: f64,
        half_width: f64,
        taper: f64,
    },
    Tabulated(WeightTable),
    /// Direction-independent `(1 - |x - center|²/radius²)^power` inside the
    /// disk, zero outside.
    Bump {
        center: Point,
        radius: f64,
        power: u32,
    },
    /// `base + eps · delta`.
    Perturbed {
        base: Box<WeightSpec>,
        delta: Box<WeightSpec>,
        eps: f64,
    },
}

impl WeightSpec {
    pub fn constant(value: f64) -> Self {
        WeightSpec::Constant { value }
    }

    pub fn one() -> Self {
        Self::constant(1.0)
    }

    pub fn limited_angle(center: f64, half_width: f64, taper: f64) -> Result<Self> {
        let w = WeightSpec::LimitedAngle { center, half_width, taper };
        w.validate()?;
        Ok(w)
    }

    /// Hard-zero cone of half-width 30° around the vertical axis with a
    /// 0.1 rad taper.
    pub fn vertical_gap() -> Self {
        WeightSpec::LimitedAngle {
            center: PI / 2.0,
            half_width: PI / 6.0,
            taper: 0.1,
        }
    }

    pub fn bump(center: Point, radius: f64, power: u32) -> Self {
        WeightSpec::Bump { center, radius, power }
    }

    pub fn perturbed(base: &WeightSpec, delta: &WeightSpec, eps: f64) -> Self {
        WeightSpec::Perturbed {
            base: Box::new(base.clone()),
            delta: Box::new(delta.clone()),
            eps,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            WeightSpec::Constant { value } => finite("constant value", *value),
            WeightSpec::LimitedAngle { center, half_width, taper } => {
                finite("center", *center)?;
                finite("half_width", *half_width)?;
                finite("taper", *taper)?;
                if *taper <= 0.0 {
                    return Err(Error::InvalidParameter(
                        "limited-angle taper must be positive to keep the weight continuous".into(),
                    ));
                }
                if *half_width < 0.0 || *half_width >= PI / 2.0 {
                    return Err(Error::InvalidParameter(format!(
                        "limited-angle half width must lie in [0, π/2), got {half_width}"
                    )));
                }
                Ok(())
            }
            WeightSpec::Tabulated(table) => table.validate(),
            WeightSpec::Bump { center, radius, power } => {
                finite("center", center[0])?;
                finite("center", center[1])?;
                if !(radius.is_finite() && *radius > 0.0) {
                    return Err(Error::InvalidParameter(format!("bump radius must be positive, got {radius}")));
                }
                if *power < 1 {
                    return Err(Error::InvalidParameter("bump power must be at least 1 for continuity".into()));
                }
                Ok(())
            }
            WeightSpec::Perturbed { base, delta, eps } => {
                finite("eps", *eps)?;
                base.validate()?;
                delta.validate()
            }
        }
    }

    pub fn eval(&self, x: Point, theta: Point) -> f64 {
        match self {
            WeightSpec::Constant { value } => *value,
            WeightSpec::LimitedAngle { center, half_width, taper } => {
                let angle = theta[1].atan2(theta[0]);
                let d = (angle - center).rem_euclid(PI);
                let d = d.min(PI - d);
                let s = ((d - half_width) / taper).clamp(0.0, 1.0);
                s * s * (3.0 - 2.0 * s)
            }
            WeightSpec::Tabulated(table) => table.eval(x, theta),
            WeightSpec::Bump { center, radius, power } => {
                crate::samples::bump_value(x, *center, *radius, *power as i32)
            }
            WeightSpec::Perturbed { base, delta, eps } => {
                base.eval(x, theta) + eps * delta.eval(x, theta)
            }
        }
    }

    pub fn is_identically_zero(&self) -> bool {
        match self {
            WeightSpec::Constant { value } => *value == 0.0,
            WeightSpec::Tabulated(t) => t.values.iter().all(|&v| v == 0.0),
            WeightSpec::Perturbed { base, delta, eps } => {
                base.is_identically_zero() && (*eps == 0.0 || delta.is_identically_zero())
            }
            WeightSpec::LimitedAngle { .. } | WeightSpec::Bump { .. } => false,
        }
    }

    /// Short stable hash of the serialized specification.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_vec(self).expect("weight specs always serialize");
        let digest = Sha256::digest(&json);
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn finite(name: &str, v: f64) -> Result<()> {
    if !v.is_finite() {
        return Err(Error::InvalidParameter(format!("{name} must be finite, got {v}")));
    }
    Ok(())
}

/// Weight sampled on a uniform node lattice of the box `[-side/2, side/2)²`
/// times `n_angles` equispaced directions; bilinear in `x` (clamped at the
/// box edge) and periodic-linear in the direction angle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightTable {
    pub side: f64,
    pub points: usize,
    pub n_angles: usize,
    /// `values[node * n_angles + a]`, node index `i * points + j`.
    pub values: Vec<f64>,
}

impl WeightTable {
    pub fn from_fn(side: f64, points: usize, n_angles: usize, w: impl Fn(Point, Point) -> f64) -> Result<Self> {
        let h = side / points as f64;
        let mut values = Vec::with_capacity(points * points * n_angles);
        for i in 0..points {
            for j in 0..points {
                let x = [-0.5 * side + i as f64 * h, -0.5 * side + j as f64 * h];
                for a in 0..n_angles {
                    let phi = TAU * a as f64 / n_angles as f64;
                    values.push(w(x, [phi.cos(), phi.sin()]));
                }
            }
        }
        let t = Self { side, points, n_angles, values };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.side.is_finite() && self.side > 0.0) {
            return Err(Error::InvalidParameter("table side must be positive".into()));
        }
        if self.points < 2 || self.n_angles < 2 {
            return Err(Error::InvalidParameter(
                "table needs at least 2 points per side and 2 angles".into(),
            ));
        }
        if self.values.len() != self.points * self.points * self.n_angles {
            return Err(Error::InvalidParameter(format!(
                "table holds {} values, expected {}",
                self.values.len(),
                self.points * self.points * self.n_angles
            )));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("table values must be finite".into()));
        }
        Ok(())
    }

    pub fn eval(&self, x: Point, theta: Point) -> f64 {
        let h = self.side / self.points as f64;
        let max = (self.points - 1) as f64;
        let ux = ((x[0] + 0.5 * self.side) / h).clamp(0.0, max);
        let uy = ((x[1] + 0.5 * self.side) / h).clamp(0.0, max);
        let i0 = (ux.floor() as usize).min(self.points - 2);
        let j0 = (uy.floor() as usize).min(self.points - 2);
        let (fx, fy) = (ux - i0 as f64, uy - j0 as f64);

        let phi = theta[1].atan2(theta[0]).rem_euclid(TAU);
        let ua = phi / TAU * self.n_angles as f64;
        let a0 = (ua.floor() as usize) % self.n_angles;
        let a1 = (a0 + 1) % self.n_angles;
        let fa = ua - ua.floor();

        let at = |i: usize, j: usize| {
            let base = (i * self.points + j) * self.n_angles;
            (1.0 - fa) * self.values[base + a0] + fa * self.values[base + a1]
        };
        (1.0 - fx) * (1.0 - fy) * at(i0, j0)
            + fx * (1.0 - fy) * at(i0 + 1, j0)
            + (1.0 - fx) * fy * at(i0, j0 + 1)
            + fx * fy * at(i0 + 1, j0 + 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dir(phi: f64) -> Point {
        [phi.cos(), phi.sin()]
    }

    #[test]
    fn constant_is_constant() {
        let w = WeightSpec::constant(0.7);
        for k in 0..16 {
            let phi = k as f64 * 0.4;
            assert_eq!(w.eval([phi.sin(), -0.3 * phi], dir(phi)), 0.7);
        }
    }

    #[test]
    fn limited_angle_mask_shape() {
        let w = WeightSpec::vertical_gap();
        assert_eq!(w.eval([0.0, 0.0], [0.0, 1.0]), 0.0);
        assert_eq!(w.eval([0.0, 0.0], [0.0, -1.0]), 0.0);
        assert_eq!(w.eval([0.0, 0.0], [1.0, 0.0]), 1.0);
        // inside the zero cone up to 30°, full weight from 30° + 0.1 rad
        assert_eq!(w.eval([0.0, 0.0], dir(PI / 2.0 + 0.5)), 0.0);
        assert_eq!(w.eval([0.0, 0.0], dir(PI / 2.0 + PI / 6.0 + 0.1)), 1.0);
        let mid = w.eval([0.0, 0.0], dir(PI / 2.0 + PI / 6.0 + 0.05));
        assert!((mid - 0.5).abs() < 1e-12);
        // continuity across the taper
        let mut prev = 0.0;
        for k in 0..=200 {
            let phi = PI / 2.0 + PI / 6.0 + 0.1 * k as f64 / 200.0;
            let v = w.eval([0.0, 0.0], dir(phi));
            assert!((v - prev).abs() < 0.02);
            prev = v;
        }
        assert!(WeightSpec::limited_angle(0.0, 0.3, 0.0).is_err());
    }

    #[test]
    fn tabulated_reproduces_bilinear_data() {
        let t = WeightTable::from_fn(4.0, 8, 16, |x, th| 1.0 + 0.25 * x[0] - 0.5 * x[1] + 0.1 * th[0]).unwrap();
        let w = WeightSpec::Tabulated(t);
        // exact for functions linear in x at table angles
        let v = w.eval([0.3, -0.2], dir(0.0));
        assert!((v - (1.0 + 0.075 + 0.1 + 0.1)).abs() < 1e-12);
        assert!(w.validate().is_ok());
    }

    #[test]
    fn perturbation_and_fingerprint() {
        let w = WeightSpec::perturbed(&WeightSpec::one(), &WeightSpec::constant(2.0), 0.25);
        assert_eq!(w.eval([0.0, 0.0], [1.0, 0.0]), 1.5);
        assert_ne!(w.fingerprint(), WeightSpec::one().fingerprint());
        assert_eq!(WeightSpec::one().fingerprint(), WeightSpec::constant(1.0).fingerprint());
        assert_eq!(WeightSpec::one().fingerprint().len(), 16);
    }

    #[test]
    fn serde_round_trip() {
        let w = WeightSpec::vertical_gap();
        let s = serde_json::to_string(&w).unwrap();
        assert!(s.contains("\"kind\":\"limited_angle\""));
        let back: WeightSpec = serde_json::from_str(&s).unwrap();
        assert_eq!(back, w);
        assert!(serde_json::from_str::<WeightSpec>(r#"{"kind":"foo"}"#).is_err());
        let b: WeightSpec = serde_json::from_str(r#"{"kind":"bump","center":[0.2,0.1],"radius":0.8,"power":2}"#).unwrap();
        assert_eq!(b.eval([0.2, 0.1], [1.0, 0.0]), 1.0);
        assert_eq!(b.eval([1.5, 0.1], [0.0, 1.0]), 0.0);
        assert!(WeightSpec::bump([0.0, 0.0], 0.0, 2).validate().is_err());
    }
}
