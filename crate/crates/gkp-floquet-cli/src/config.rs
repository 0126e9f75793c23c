//! Experiment configuration: loading, overrides, physical units, hashing.

use std::path::{Path, PathBuf};

use gkp_floquet::floquet::IntegratorConfig;
use gkp_floquet::model::{circuit_map, CircuitParams, ModelParams};
use gkp_floquet::noise::NoiseConfig;
use gkp_floquet::prep::{PrepConfig, RampSchedule};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::Failure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    FloquetScan,
    NSweep,
    PrepSweep,
    RobustnessSweep,
    WignerDump,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::FloquetScan => "floquet-scan",
            Kind::NSweep => "n-sweep",
            Kind::PrepSweep => "prep-sweep",
            Kind::RobustnessSweep => "robustness-sweep",
            Kind::WignerDump => "wigner-dump",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NSweep {
    pub n_values: Vec<usize>,
}

impl Default for NSweep {
    fn default() -> Self {
        Self { n_values: (1..=6).collect() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Initial {
    Vacuum,
}

/// Grid of the preparation sweep. A quality factor of `inf` means no loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PrepSweep {
    pub t_f: Vec<f64>,
    pub quality_factors: Vec<f64>,
    pub flux_noise: Vec<bool>,
    pub initial: Initial,
}

impl Default for PrepSweep {
    fn default() -> Self {
        Self {
            t_f: vec![1000.0, 1500.0, 2000.0, 3000.0],
            quality_factors: vec![f64::INFINITY],
            flux_noise: vec![false],
            initial: Initial::Vacuum,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Robustness {
    pub impedance_ratio: Vec<f64>,
    pub ej_asymmetry: Vec<f64>,
}

impl Default for Robustness {
    fn default() -> Self {
        Self { impedance_ratio: vec![0.95, 1.05], ej_asymmetry: vec![-0.05, 0.05] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WhichState {
    Plus,
    Minus,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WignerDump {
    pub state: WhichState,
    /// Half-width of the square phase-space window.
    pub extent: f64,
    pub points: usize,
}

impl Default for WignerDump {
    fn default() -> Self {
        Self { state: WhichState::Plus, extent: 6.0, points: 81 }
    }
}

/// Optional laboratory units, converted into the dimensionless fields on load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Physical {
    pub omega0_over_2pi_ghz: f64,
    /// Overrides `ramp.t_f` and `prep_sweep.t_f`.
    #[serde(default)]
    pub t_f_us: Option<f64>,
    /// Loss rate κ/2π; overrides `noise.quality_factor` and `prep_sweep.quality_factors`.
    #[serde(default)]
    pub kappa_over_2pi_khz: Option<f64>,
    /// Overrides `model` with the circuit mapping.
    #[serde(default)]
    pub circuit: Option<CircuitParams>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Kind,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default)]
    pub model: ModelParams,
    /// Defaults to 128 steps per harmonic.
    #[serde(default)]
    pub integrator: Option<IntegratorConfig>,
    #[serde(default)]
    pub ramp: RampSchedule,
    #[serde(default)]
    pub prep: PrepConfig,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub physical: Option<Physical>,
    #[serde(default)]
    pub n_sweep: NSweep,
    #[serde(default)]
    pub prep_sweep: PrepSweep,
    #[serde(default)]
    pub robustness: Robustness,
    #[serde(default)]
    pub wigner: WignerDump,
}

fn default_dim() -> usize {
    250
}

/// Dimensionless values derived from the `physical` block.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Conversions {
    pub t_f_periods: Option<f64>,
    pub quality_factor: Option<f64>,
    pub model: Option<ModelParams>,
    pub max_modulation_ghz: Option<f64>,
    pub impedance_ohm: Option<f64>,
}

impl ExperimentConfig {
    pub fn integrator(&self) -> IntegratorConfig {
        self.integrator.unwrap_or_else(|| IntegratorConfig::for_harmonics(self.model.n_harmonics))
    }

    /// Apply the physical block, then check every section.
    pub fn resolve(&mut self) -> Result<Option<Conversions>, Failure> {
        let conversions = match &self.physical {
            None => None,
            Some(ph) => {
                let f0 = ph.omega0_over_2pi_ghz;
                if !(f0.is_finite() && f0 > 0.0) {
                    return Err(Failure::Config(format!("physical.omega0_over_2pi_ghz must be positive, got {f0}")));
                }
                // One period is 1/f0 ns.
                let t_f_periods = ph.t_f_us.map(|t| t * 1e3 * f0);
                let quality_factor = ph.kappa_over_2pi_khz.map(|k| f0 * 1e6 / k);
                let mapping = ph.circuit.as_ref().map(circuit_map).transpose().map_err(Failure::from)?;
                // The preparation grid is replaced too, so the converted values are the ones run.
                if let Some(t) = t_f_periods {
                    self.ramp.t_f = t;
                    self.prep_sweep.t_f = vec![t];
                }
                if let Some(q) = quality_factor {
                    self.noise.quality_factor = Some(q);
                    self.prep_sweep.quality_factors = vec![q];
                }
                if let Some(m) = &mapping {
                    self.model = m.params;
                }
                Some(Conversions {
                    t_f_periods,
                    quality_factor,
                    model: mapping.as_ref().map(|m| m.params),
                    max_modulation_ghz: mapping.as_ref().map(|m| m.max_modulation_ghz),
                    impedance_ohm: mapping.and_then(|m| m.impedance_ohm),
                })
            }
        };
        self.noise.master_seed = self.master_seed;
        self.validate()?;
        Ok(conversions)
    }

    fn validate(&self) -> Result<(), Failure> {
        let cfg = |e: gkp_floquet::Error| Failure::Config(e.to_string());
        if self.dim < 16 {
            return Err(Failure::Config(format!("dim must be at least 16, got {}", self.dim)));
        }
        self.model.validate().map_err(cfg)?;
        self.integrator().validate(self.model.n_harmonics).map_err(cfg)?;
        self.ramp.validate().map_err(cfg)?;
        self.prep.validate(self.model.n_harmonics).map_err(cfg)?;
        self.noise.validate().map_err(cfg)?;
        match self.kind {
            Kind::NSweep if self.n_sweep.n_values.contains(&0) => {
                Err(Failure::Config("n_sweep.n_values must be positive".into()))
            }
            Kind::PrepSweep => {
                let s = &self.prep_sweep;
                if s.t_f.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
                    return Err(Failure::Config("prep_sweep.t_f must be positive".into()));
                }
                if s.quality_factors.iter().any(|q| !(*q > 0.0)) {
                    return Err(Failure::Config("prep_sweep.quality_factors must be positive or inf".into()));
                }
                Ok(())
            }
            Kind::WignerDump if !(self.wigner.extent > 0.0 && self.wigner.points >= 2) => {
                Err(Failure::Config("wigner needs extent > 0 and at least 2 points".into()))
            }
            _ => Ok(()),
        }
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(&self.canonical()).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// The config with the output directory removed, so moving a run does not change its identity.
    fn canonical(&self) -> ExperimentConfig {
        ExperimentConfig { out: None, ..self.clone() }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(&self.canonical()).expect("config serializes to TOML")
    }
}

/// Read a config as a TOML value tree; `.json` files are accepted too.
pub fn read_tree(path: &Path) -> Result<toml::Value, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if is_json {
        let v: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
        toml::Value::try_from(v).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
    } else {
        text.parse::<toml::Table>()
            .map(toml::Value::Table)
            .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
    }
}

/// Set `key.path = value`, parsing the value as a TOML literal when possible.
pub fn apply_override(tree: &mut toml::Value, assignment: &str) -> Result<(), Failure> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Failure::Config(format!("override {assignment:?} is not key=value")))?;
    let value = parse_literal(raw.trim());
    let mut node = tree;
    let parts: Vec<&str> = key.trim().split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let table = node
            .as_table_mut()
            .ok_or_else(|| Failure::Config(format!("override {key}: {} is not a table", parts[..i].join("."))))?;
        if i + 1 == parts.len() {
            table.insert(part.to_string(), value);
            return Ok(());
        }
        node = table.entry(part.to_string()).or_insert_with(|| toml::Value::Table(Default::default()));
    }
    unreachable!("split yields at least one part")
}

fn parse_literal(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

pub fn from_tree(tree: toml::Value) -> Result<ExperimentConfig, Failure> {
    ExperimentConfig::deserialize(tree).map_err(|e| Failure::Config(e.to_string()))
}
