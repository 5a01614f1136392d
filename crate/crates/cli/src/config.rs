use std::fmt;
use std::path::PathBuf;

use linstab::holder::{check_exponents, MU1, MU2};
use linstab::xray::{RaySet, WeightSpec, DEFAULT_ANGLES, DEFAULT_OFFSETS, DEFAULT_T_STEP};
use linstab::DEFAULT_BOX_SIDE;
use serde::Serialize;
use serde_json::{Map, Value};

/// Experiments the runner can dispatch to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    InterpCheck,
    SeqCounterexample,
    XraySelftest,
    Ellipticity,
    StabilitySweep,
    PerturbationScan,
    CoherentProbe,
    HolderFit,
    FindimCheck,
}

impl Experiment {
    pub const ALL: [Experiment; 9] = [
        Experiment::InterpCheck,
        Experiment::SeqCounterexample,
        Experiment::XraySelftest,
        Experiment::Ellipticity,
        Experiment::StabilitySweep,
        Experiment::PerturbationScan,
        Experiment::CoherentProbe,
        Experiment::HolderFit,
        Experiment::FindimCheck,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::InterpCheck => "interp-check",
            Experiment::SeqCounterexample => "seq-counterexample",
            Experiment::XraySelftest => "xray-selftest",
            Experiment::Ellipticity => "ellipticity",
            Experiment::StabilitySweep => "stability-sweep",
            Experiment::PerturbationScan => "perturbation-scan",
            Experiment::CoherentProbe => "coherent-probe",
            Experiment::HolderFit => "holder-fit",
            Experiment::FindimCheck => "findim-check",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.name() == s)
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridConfig {
    #[serde(rename = "L")]
    pub side: f64,
    #[serde(rename = "N")]
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RayConfig {
    pub n_angles: usize,
    pub n_offsets: usize,
    pub t_step: f64,
}

impl RayConfig {
    pub fn ray_set(&self) -> RaySet {
        RaySet::new(self.n_angles, self.n_offsets, self.t_step).expect("validated at load")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HolderConfig {
    #[serde(rename = "K")]
    pub k: f64,
    pub scales: Vec<f64>,
    pub samples: usize,
    /// `‖f₁‖_{L²}` of the centre; zero centres the estimate at the origin.
    pub center_scale: f64,
    pub include_least_stable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InterpConfig {
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeqConfig {
    pub truncation: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct XrayConfig {
    pub trials: usize,
    pub kernel_resolutions: Vec<usize>,
    pub kernel_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityConfig {
    pub resolutions: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerturbationConfig {
    pub eps: Vec<f64>,
    pub delta: WeightSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeBackend {
    /// Matrix-free quadrature of the analytic packet.
    Continuum,
    /// The assembled matrix on the configured grid.
    Matrix,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeConfig {
    pub x0: [f64; 2],
    pub xi0: [f64; 2],
    pub backend: ProbeBackend,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FindimConfig {
    pub maps: usize,
    pub dim_in: usize,
    pub dim_out: usize,
    pub min_sigma: f64,
    pub samples: usize,
    /// Upper cap on the tested radius; the admissible radius is used when smaller.
    pub max_radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EllipticityConfig {
    pub density: usize,
}

/// A fully validated experiment description.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub grid: GridConfig,
    pub weight: WeightSpec,
    pub rays: RayConfig,
    pub sobolev: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub holder: HolderConfig,
    pub interp: InterpConfig,
    pub seq: SeqConfig,
    pub xray: XrayConfig,
    pub stability: StabilityConfig,
    pub perturbation: PerturbationConfig,
    pub probe: ProbeConfig,
    pub findim: FindimConfig,
    pub ellipticity: EllipticityConfig,
}

/// Every problem found in a configuration document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigErrors(pub Vec<String>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "invalid configuration ({} problem{}):", self.0.len(), if self.0.len() == 1 { "" } else { "s" })?;
        for e in &self.0 {
            writeln!(f, "  - {e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

struct Section<'a> {
    path: String,
    map: Option<&'a Map<String, Value>>,
}

struct Validator {
    errors: Vec<String>,
}

impl Validator {
    fn error(&mut self, msg: impl Into<String>) {
        self.errors.push(msg.into());
    }

    fn section<'a>(&mut self, root: &'a Map<String, Value>, key: &str, allowed: &[&str]) -> Section<'a> {
        match root.get(key) {
            None => Section { path: key.into(), map: None },
            Some(Value::Object(m)) => {
                for k in m.keys() {
                    if !allowed.contains(&k.as_str()) {
                        self.error(format!("{key}.{k}: unknown key"));
                    }
                }
                Section { path: key.into(), map: Some(m) }
            }
            Some(_) => {
                self.error(format!("{key}: must be an object"));
                Section { path: key.into(), map: None }
            }
        }
    }

    fn float(&mut self, s: &Section, key: &str, default: f64, check: impl Fn(f64) -> Option<String>) -> f64 {
        let Some(v) = s.map.and_then(|m| m.get(key)) else { return default };
        match v.as_f64() {
            Some(x) if x.is_finite() => {
                if let Some(msg) = check(x) {
                    self.error(format!("{}.{key}: {msg}", s.path));
                }
                x
            }
            _ => {
                self.error(format!("{}.{key}: must be a finite number", s.path));
                default
            }
        }
    }

    fn uint(&mut self, s: &Section, key: &str, default: usize, check: impl Fn(usize) -> Option<String>) -> usize {
        let Some(v) = s.map.and_then(|m| m.get(key)) else { return default };
        match v.as_u64() {
            Some(x) => {
                let x = x as usize;
                if let Some(msg) = check(x) {
                    self.error(format!("{}.{key}: {msg}", s.path));
                }
                x
            }
            None => {
                self.error(format!("{}.{key}: must be a nonnegative integer", s.path));
                default
            }
        }
    }

    fn boolean(&mut self, s: &Section, key: &str, default: bool) -> bool {
        let Some(v) = s.map.and_then(|m| m.get(key)) else { return default };
        v.as_bool().unwrap_or_else(|| {
            self.error(format!("{}.{key}: must be true or false", s.path));
            default
        })
    }

    fn floats(&mut self, path: &str, v: Option<&Value>, default: &[f64]) -> Vec<f64> {
        let Some(v) = v else { return default.to_vec() };
        match v.as_array() {
            Some(a) if !a.is_empty() => {
                let out: Vec<f64> = a.iter().filter_map(|x| x.as_f64().filter(|x| x.is_finite())).collect();
                if out.len() != a.len() {
                    self.error(format!("{path}: every entry must be a finite number"));
                    return default.to_vec();
                }
                out
            }
            _ => {
                self.error(format!("{path}: must be a nonempty list of numbers"));
                default.to_vec()
            }
        }
    }

    fn uints(&mut self, path: &str, v: Option<&Value>, default: &[usize]) -> Vec<usize> {
        let Some(v) = v else { return default.to_vec() };
        match v.as_array() {
            Some(a) if !a.is_empty() => {
                let out: Vec<usize> = a.iter().filter_map(|x| x.as_u64().map(|x| x as usize)).collect();
                if out.len() != a.len() {
                    self.error(format!("{path}: every entry must be a nonnegative integer"));
                    return default.to_vec();
                }
                out
            }
            _ => {
                self.error(format!("{path}: must be a nonempty list of integers"));
                default.to_vec()
            }
        }
    }

    fn point(&mut self, s: &Section, key: &str, default: [f64; 2]) -> [f64; 2] {
        let path = format!("{}.{key}", s.path);
        let v = s.map.and_then(|m| m.get(key));
        if v.is_none() {
            return default;
        }
        let p = self.floats(&path, v, &default);
        if p.len() != 2 {
            self.error(format!("{path}: must have exactly two entries"));
            return default;
        }
        [p[0], p[1]]
    }

    fn weight(&mut self, path: &str, v: Option<&Value>, default: WeightSpec) -> WeightSpec {
        let Some(v) = v else { return default };
        if let Some(kind) = v.get("kind").and_then(Value::as_str) {
            const KINDS: [&str; 5] = ["constant", "limited_angle", "tabulated", "bump", "perturbed"];
            if !KINDS.contains(&kind) {
                self.error(format!("{path}.kind: unknown weight kind \"{kind}\" (expected one of {})", KINDS.join(", ")));
                return default;
            }
        } else {
            self.error(format!("{path}.kind: missing weight kind"));
            return default;
        }
        match serde_json::from_value::<WeightSpec>(v.clone()) {
            Ok(w) => match w.validate() {
                Ok(()) => w,
                Err(e) => {
                    self.error(format!("{path}: {e}"));
                    default
                }
            },
            Err(e) => {
                self.error(format!("{path}: {e}"));
                default
            }
        }
    }
}

fn positive(x: f64) -> Option<String> {
    (x <= 0.0).then(|| "must be positive".into())
}

fn at_least(min: usize) -> impl Fn(usize) -> Option<String> {
    move |x| (x < min).then(|| format!("must be at least {min}"))
}

fn strictly_increasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[0] < w[1])
}

const TOP_LEVEL: [&str; 17] = [
    "experiment", "seed", "output_dir", "grid", "weight", "rays", "sobolev", "lambdas", "holder", "interp", "seq",
    "xray", "stability", "perturbation", "probe", "findim", "ellipticity",
];

/// Parses and validates a JSON configuration document, collecting every
/// violated field instead of stopping at the first.
pub fn validate(config_text: &str) -> Result<ExperimentConfig, ConfigErrors> {
    let doc: Value = serde_json::from_str(config_text).map_err(|e| ConfigErrors(vec![format!("not valid JSON: {e}")]))?;
    validate_value(&doc)
}

/// [`validate`] on an already parsed document.
pub fn validate_value(doc: &Value) -> Result<ExperimentConfig, ConfigErrors> {
    let Some(root) = doc.as_object() else {
        return Err(ConfigErrors(vec!["top level must be an object".into()]));
    };
    let mut v = Validator { errors: Vec::new() };
    for k in root.keys() {
        if !TOP_LEVEL.contains(&k.as_str()) {
            v.error(format!("{k}: unknown key"));
        }
    }

    let experiment = match root.get("experiment") {
        None => {
            v.error("experiment: required");
            None
        }
        Some(Value::String(s)) => {
            let e = Experiment::parse(s);
            if e.is_none() {
                let names: Vec<&str> = Experiment::ALL.iter().map(|e| e.name()).collect();
                v.error(format!("experiment: unknown experiment \"{s}\" (expected one of {})", names.join(", ")));
            }
            e
        }
        Some(_) => {
            v.error("experiment: must be a string");
            None
        }
    };

    let seed = match root.get("seed") {
        None => {
            v.error("seed required for reproducibility");
            0
        }
        Some(s) => s.as_u64().unwrap_or_else(|| {
            v.error("seed: must be an unsigned 64-bit integer");
            0
        }),
    };

    let output_dir = match root.get("output_dir") {
        None => PathBuf::from("out"),
        Some(Value::String(s)) if !s.is_empty() => PathBuf::from(s),
        Some(_) => {
            v.error("output_dir: must be a nonempty string");
            PathBuf::from("out")
        }
    };

    let g = v.section(root, "grid", &["L", "N"]);
    let side = v.float(&g, "L", DEFAULT_BOX_SIDE, |x| (x <= 3.0 + 1e-12).then(|| "must exceed 3 so the box covers Ω₁ with a margin".into()));
    let points = v.uint(&g, "N", 32, |n| (n < 8 || n % 2 != 0).then(|| "grid.N must be even ≥ 8".into()));
    if let Some(pos) = v.errors.iter().position(|e| e == "grid.N: grid.N must be even ≥ 8") {
        v.errors[pos] = "grid.N must be even ≥ 8".into();
    }
    let grid = GridConfig { side, points };

    let weight = v.weight("weight", root.get("weight"), WeightSpec::one());

    let r = v.section(root, "rays", &["n_angles", "n_offsets", "t_step"]);
    let rays = RayConfig {
        n_angles: v.uint(&r, "n_angles", DEFAULT_ANGLES, at_least(1)),
        n_offsets: v.uint(&r, "n_offsets", DEFAULT_OFFSETS, at_least(1)),
        t_step: v.float(&r, "t_step", DEFAULT_T_STEP, positive),
    };

    let sobolev = v.floats("sobolev", root.get("sobolev"), &[0.0, 1.0, 2.0]);
    let lambdas = v.floats("lambdas", root.get("lambdas"), &[25.0, 50.0, 100.0, 200.0]);
    if lambdas.iter().any(|&l| l <= 0.0) || !strictly_increasing(&lambdas) {
        v.error("lambdas: must be positive and strictly increasing");
    }

    let h = v.section(root, "holder", &["K", "scales", "samples", "center_scale", "include_least_stable"]);
    let holder_scales = v.floats("holder.scales", h.map.and_then(|m| m.get("scales")), &[1e-1, 1e-2, 1e-3, 1e-4]);
    if holder_scales.iter().any(|&s| s <= 0.0) || holder_scales.windows(2).any(|w| w[0] <= w[1]) {
        v.error("holder.scales: must be positive and strictly decreasing");
    }
    let holder = HolderConfig {
        k: v.float(&h, "K", 10.0, positive),
        scales: holder_scales,
        samples: v.uint(&h, "samples", 8, at_least(1)),
        center_scale: v.float(&h, "center_scale", 0.0, |x| (x < 0.0).then(|| "must be nonnegative".into())),
        include_least_stable: v.boolean(&h, "include_least_stable", true),
    };
    if let Err(e) = check_exponents(MU1, MU2) {
        v.error(format!("holder: {e}"));
    }

    let s = v.section(root, "interp", &["trials"]);
    let interp = InterpConfig { trials: v.uint(&s, "trials", 1000, at_least(1)) };

    let s = v.section(root, "seq", &["truncation"]);
    let seq = SeqConfig { truncation: v.uint(&s, "truncation", 50, at_least(1)) };

    let s = v.section(root, "xray", &["trials", "kernel_resolutions", "kernel_samples"]);
    let kernel_resolutions = v.uints("xray.kernel_resolutions", s.map.and_then(|m| m.get("kernel_resolutions")), &[32, 48]);
    if kernel_resolutions.iter().any(|&n| n < 8 || n % 2 != 0) {
        v.error("xray.kernel_resolutions: every entry must be even ≥ 8");
    }
    let xray = XrayConfig {
        trials: v.uint(&s, "trials", 100, at_least(1)),
        kernel_resolutions,
        kernel_samples: v.uint(&s, "kernel_samples", 5, at_least(1)),
    };

    let s = v.section(root, "stability", &["resolutions"]);
    let resolutions = v.uints("stability.resolutions", s.map.and_then(|m| m.get("resolutions")), &[16, 24, 32]);
    if resolutions.iter().any(|&n| n < 8 || n % 2 != 0) {
        v.error("stability.resolutions: every entry must be even ≥ 8");
    }
    let stability = StabilityConfig { resolutions };

    let s = v.section(root, "perturbation", &["eps", "delta"]);
    let eps = v.floats("perturbation.eps", s.map.and_then(|m| m.get("eps")), &[0.01, 0.05, 0.1]);
    if eps.iter().any(|&e| e < 0.0) || !strictly_increasing(&eps) {
        v.error("perturbation.eps: must be nonnegative and strictly increasing");
    }
    let delta = v.weight("perturbation.delta", s.map.and_then(|m| m.get("delta")), default_delta());
    let perturbation = PerturbationConfig { eps, delta };

    let s = v.section(root, "probe", &["x0", "xi0", "backend"]);
    let x0 = v.point(&s, "x0", [0.2, 0.0]);
    let xi0 = v.point(&s, "xi0", [1.0, 0.0]);
    if (xi0[0].hypot(xi0[1]) - 1.0).abs() > 1e-12 {
        v.error("probe.xi0: must be a unit vector");
    }
    let backend = match s.map.and_then(|m| m.get("backend")) {
        None => ProbeBackend::Continuum,
        Some(Value::String(b)) if b == "continuum" => ProbeBackend::Continuum,
        Some(Value::String(b)) if b == "matrix" => ProbeBackend::Matrix,
        Some(_) => {
            v.error("probe.backend: must be \"continuum\" or \"matrix\"");
            ProbeBackend::Continuum
        }
    };
    let probe = ProbeConfig { x0, xi0, backend };

    let s = v.section(root, "findim", &["maps", "dim_in", "dim_out", "min_sigma", "samples", "max_radius"]);
    let findim = FindimConfig {
        maps: v.uint(&s, "maps", 10, at_least(1)),
        dim_in: v.uint(&s, "dim_in", 3, at_least(1)),
        dim_out: v.uint(&s, "dim_out", 4, at_least(1)),
        min_sigma: v.float(&s, "min_sigma", 0.5, positive),
        samples: v.uint(&s, "samples", 1000, at_least(1)),
        max_radius: v.float(&s, "max_radius", 1.0, positive),
    };
    if findim.dim_out < findim.dim_in {
        v.error("findim.dim_out: must be at least findim.dim_in for an injective differential");
    }

    let s = v.section(root, "ellipticity", &["density"]);
    let ellipticity = EllipticityConfig { density: v.uint(&s, "density", 16, at_least(8)) };

    if !v.errors.is_empty() {
        return Err(ConfigErrors(v.errors));
    }
    Ok(ExperimentConfig {
        experiment: experiment.expect("checked above"),
        seed,
        output_dir,
        grid,
        weight,
        rays,
        sobolev,
        lambdas,
        holder,
        interp,
        seq,
        xray,
        stability,
        perturbation,
        probe,
        findim,
        ellipticity,
    })
}

/// Default perturbation direction: a direction-independent bump.
pub fn default_delta() -> WeightSpec {
    WeightSpec::bump([0.2, 0.1], 0.8, 2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_document_gets_defaults() {
        let c = validate(r#"{"experiment": "stability-sweep", "seed": 1}"#).unwrap();
        assert_eq!(c.grid, GridConfig { side: 4.0, points: 32 });
        assert_eq!((c.rays.n_angles, c.rays.n_offsets), (90, 90));
        assert_eq!(c.rays.t_step, 0.01);
        assert_eq!(c.weight, WeightSpec::one());
    }

    #[test]
    fn every_error_is_reported() {
        let errs = validate(r#"{"experiment": "holder-fit", "grid": {"N": 7}, "weight": {"kind": "foo"}, "bogus": 1}"#)
            .unwrap_err()
            .0;
        assert!(errs.contains(&"grid.N must be even ≥ 8".to_string()), "{errs:?}");
        assert!(errs.contains(&"seed required for reproducibility".to_string()));
        assert!(errs.iter().any(|e| e.starts_with("weight.kind: unknown weight kind \"foo\"")));
        assert!(errs.contains(&"bogus: unknown key".to_string()));
        assert_eq!(errs.len(), 4);
    }

    #[test]
    fn nested_unknown_keys_and_types() {
        let errs = validate(r#"{"experiment": "nope", "seed": -3, "rays": {"t_step": 0, "extra": true}}"#).unwrap_err().0;
        assert!(errs.iter().any(|e| e.starts_with("experiment: unknown experiment")));
        assert!(errs.iter().any(|e| e.starts_with("seed:")));
        assert!(errs.contains(&"rays.extra: unknown key".to_string()));
        assert!(errs.contains(&"rays.t_step: must be positive".to_string()));
        assert!(validate("not json").is_err());
    }
}
