//! Run configuration: crack, potential, mesh and analysis parameters, all
//! serialized as one JSON object. The configuration hash is FNV-1a over the
//! canonicalized (key-sorted, whitespace-free) JSON bytes.

use std::path::PathBuf;

use cracklab::crack::CrackSpec;
use cracklab::geo::fnv1a64;
use cracklab::potential::PotentialSpec;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub crack: CrackSpec,
    pub potential: PotentialSpec,
    pub mesh: MeshConfig,
    pub boundary: BoundaryData,
    pub radii: RadiiSpec,
    pub lambdas: Vec<f64>,
    pub spectrum: SpectrumConfig,
    #[serde(default)]
    pub fourier: FourierConfig,
    #[serde(default)]
    pub approx: ApproxConfig,
    #[serde(default)]
    pub audits: Vec<String>,
    #[serde(default)]
    pub seed: u64,
    pub output_dir: PathBuf,
    #[serde(default = "default_tolerance_scale")]
    pub tolerance_scale: f64,
}

fn default_tolerance_scale() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeshConfig {
    pub r: f64,
    pub h: f64,
    /// Size contraction per dyadic shell toward the crack edge; 0.5 is the
    /// standard grading, 1.0 disables grading.
    #[serde(default = "default_grading")]
    pub grading: f64,
}

fn default_grading() -> f64 {
    0.5
}

impl MeshConfig {
    /// Dyadic refinement depth encoded by the grading factor.
    pub fn grading_levels(&self) -> usize {
        if self.grading >= 0.999 {
            0
        } else {
            let per_shell = (1.0 / self.grading).log2().round().max(1.0);
            (3.0 * per_shell).round().clamp(1.0, 8.0) as usize
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumConfig {
    pub h_sphere: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FourierConfig {
    /// Upper radii R of the beta formula; beta is checked for R-independence.
    pub r_values: Vec<f64>,
}

impl Default for FourierConfig {
    fn default() -> Self {
        FourierConfig { r_values: vec![0.2, 0.3, 0.4] }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ApproxConfig {
    pub ns: Vec<u32>,
    pub alpha: f64,
    /// Radius of the small excised ball in the Pohozaev identity mode.
    pub delta: f64,
}

impl Default for ApproxConfig {
    fn default() -> Self {
        ApproxConfig { ns: vec![64, 256, 1024], alpha: 2.0, delta: 0.1 }
    }
}

/// Boundary data selection for the Dirichlet solves.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BoundaryData {
    /// Trace of x3 (the degree-1 slit-compatible harmonic).
    X3,
    /// Trace of the leading slit harmonic sqrt(rho) sin(phi/2).
    Half,
    /// The slit harmonic composed with the straightening map: u_half(F(x)).
    HalfStraightened,
    /// Slit harmonic plus a degree-1 admixture of relative size `amplitude`.
    HalfPlusX3 { amplitude: f64 },
}

impl BoundaryData {
    pub fn evaluator<'a>(
        &self,
        bundle: &'a cracklab::CoefficientBundle,
    ) -> Box<dyn Fn([f64; 3]) -> f64 + Sync + 'a> {
        match self {
            BoundaryData::X3 => Box::new(|x| x[2]),
            BoundaryData::Half => Box::new(cracklab::fem::slit_harmonic),
            BoundaryData::HalfStraightened => {
                Box::new(move |x| cracklab::fem::slit_harmonic(bundle.f_map(x)))
            }
            BoundaryData::HalfPlusX3 { amplitude } => {
                let a = *amplitude;
                Box::new(move |x| cracklab::fem::slit_harmonic(x) + a * x[2])
            }
        }
    }
}

/// Radius grid: explicit list or a geometric range.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RadiiSpec {
    List(Vec<f64>),
    Geometric { r_min: f64, r_max: f64, count: usize },
}

impl RadiiSpec {
    pub fn resolve(&self) -> Vec<f64> {
        match self {
            RadiiSpec::List(v) => {
                let mut out = v.clone();
                out.sort_by(|a, b| a.partial_cmp(b).unwrap());
                out
            }
            RadiiSpec::Geometric { r_min, r_max, count } => {
                let count = (*count).max(2);
                (0..count)
                    .map(|i| r_min * (r_max / r_min).powf(i as f64 / (count - 1) as f64))
                    .collect()
            }
        }
    }
}

#[derive(Debug)]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "config field `{}`: {}", self.field, self.message)
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = serde_json::from_str(text)
            .map_err(|e| ConfigError { field: "<root>".into(), message: e.to_string() })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let err = |field: &str, message: String| Err(ConfigError { field: field.into(), message });
        if !(self.mesh.r > 0.0) {
            return err("mesh.r", "radius must be positive".into());
        }
        if !(self.mesh.h > 0.0 && self.mesh.h <= self.mesh.r / 4.0) {
            return err(
                "mesh.h",
                format!(
                    "violated precondition h <= r/4: h = {}, r/4 = {}",
                    self.mesh.h,
                    self.mesh.r / 4.0
                ),
            );
        }
        if !(self.mesh.grading > 0.0 && self.mesh.grading <= 1.0) {
            return err("mesh.grading", "grading factor must lie in (0, 1]".into());
        }
        let radii = self.radii.resolve();
        if radii.is_empty() {
            return err("radii", "empty radius grid".into());
        }
        for &r in &radii {
            if !(r > 0.0 && r <= self.mesh.r * (1.0 + 1e-12)) {
                return err("radii", format!("radius {r} outside (0, mesh.r]"));
            }
        }
        for &l in &self.lambdas {
            if !(l > 0.0 && l <= self.mesh.r * (1.0 + 1e-12)) {
                return err("lambdas", format!("lambda {l} outside (0, mesh.r]"));
            }
        }
        if !(self.spectrum.h_sphere >= 0.005 && self.spectrum.h_sphere <= 0.5) {
            return err("spectrum.h_sphere", "sphere mesh size outside [0.005, 0.5]".into());
        }
        if self.spectrum.count == 0 {
            return err("spectrum.count", "eigenpair count must be positive".into());
        }
        for &rv in &self.fourier.r_values {
            if !(rv > 0.0 && rv <= self.mesh.r * (1.0 + 1e-12)) {
                return err("fourier.r_values", format!("R value {rv} outside (0, mesh.r]"));
            }
        }
        if !(self.approx.alpha > 1.0) {
            return err("approx.alpha", "profile exponent alpha must exceed 1".into());
        }
        if !(self.tolerance_scale > 0.0) {
            return err("tolerance_scale", "tolerance scale must be positive".into());
        }
        Ok(())
    }

    /// FNV-1a over the canonical (key-sorted, compact) JSON encoding.
    pub fn canonical_hash(&self) -> String {
        let value = serde_json::to_value(self).expect("config serializes");
        let canonical = serde_json::to_string(&value).expect("canonical encoding");
        format!("{:016x}", fnv1a64(canonical.into_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_json() -> String {
        r#"{
            "crack": {"family": "radial_quadratic", "c": 0.1, "dim_n": 2, "domain_radius": 0.5},
            "potential": {"mode": "a1", "delta": 3.0, "amplitude": 1.0},
            "mesh": {"r": 0.5, "h": 0.05, "grading": 0.5},
            "boundary": {"kind": "half_straightened"},
            "radii": {"r_min": 0.1, "r_max": 0.4, "count": 7},
            "lambdas": [0.4, 0.2, 0.1],
            "spectrum": {"h_sphere": 0.05, "count": 6},
            "seed": 7,
            "output_dir": "out"
        }"#
        .to_string()
    }

    #[test]
    fn parses_and_validates() {
        let cfg = RunConfig::from_json(&sample_json()).unwrap();
        assert_eq!(cfg.radii.resolve().len(), 7);
        assert_eq!(cfg.mesh.grading_levels(), 3);
        assert_eq!(cfg.tolerance_scale, 1.0);
    }

    #[test]
    fn rejects_coarse_mesh() {
        let bad = sample_json().replace(r#""h": 0.05"#, r#""h": 0.2"#);
        let err = RunConfig::from_json(&bad).unwrap_err();
        assert_eq!(err.field, "mesh.h");
        assert!(err.message.contains("h <= r/4"), "{}", err.message);
    }

    #[test]
    fn canonical_hash_ignores_whitespace_and_key_order() {
        let a = RunConfig::from_json(&sample_json()).unwrap();
        let reordered = r#"{
            "output_dir": "out",
            "seed": 7,
            "spectrum": {"count": 6, "h_sphere": 0.05},
            "lambdas": [0.4, 0.2, 0.1],
            "radii": {"count": 7, "r_max": 0.4, "r_min": 0.1},
            "boundary": {"kind": "half_straightened"},
            "mesh": {"grading": 0.5, "h": 0.05, "r": 0.5},
            "potential": {"amplitude": 1.0, "delta": 3.0, "mode": "a1"},
            "crack": {"c": 0.1, "dim_n": 2, "domain_radius": 0.5, "family": "radial_quadratic"}
        }"#;
        let b = RunConfig::from_json(reordered).unwrap();
        assert_eq!(a.canonical_hash(), b.canonical_hash());
    }

    #[test]
    fn geometric_radii_resolve() {
        let spec = RadiiSpec::Geometric { r_min: 0.1, r_max: 0.4, count: 3 };
        let radii = spec.resolve();
        assert_eq!(radii.len(), 3);
        assert!((radii[0] - 0.1).abs() < 1e-15);
        assert!((radii[1] - 0.2).abs() < 1e-12);
        assert!((radii[2] - 0.4).abs() < 1e-15);
    }
}
