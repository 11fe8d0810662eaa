//! Experiment configuration files.
//!
//! A single TOML schema covers every pipeline; each pipeline pulls the
//! sections it needs and rejects configs that are missing them. Unknown
//! keys anywhere are rejected before any computation. `key=value`
//! overrides edit the parsed TOML document, so an override typo surfaces
//! as an unknown-key error, not a silent no-op.
//!
//! ```toml
//! seed = 42
//!
//! [model]
//! geometry = "chain"      # chain | ring
//! n = 5                   # bus size
//! attach = [1, 5]         # 1-based bus sites for qubits A and B
//! lambda = 0.1            # sets both qubit couplings (in units of J0)
//! # qubit_couplings = [0.1, 0.1]   # explicit alternative to lambda
//! # bus_couplings = [1.0, 1.0, 1.0, 1.0]   # one entry per bond
//!
//! [state]
//! theta = 1.5707963267948966
//! phi = 0.0
//!
//! [grid]
//! dt_factor = 8.0         # dt = pi / (dt_factor * occupied spectral width)
//! # window = [0.0, 2000.0]  # explicit search window; default 4pi/J_second
//!
//! [scan]
//! lambdas = [0.02, 0.04, 0.06, 0.08, 0.1]
//! thetas = [0.3, 1.5707963267948966, 2.8]
//! phis = [0.0, 1.5707963267948966]
//! positions = []          # empty = all bus sites
//! sigmas = [0.005, 0.01, 0.02, 0.05]
//! ensemble_size = 100
//! disorder_qubit_couplings = false
//! control_attach = [1, 5] # same-parity control for check-mixed
//! ```

use serde::{Deserialize, Serialize};

use super::{
    DisorderScanConfig, LambdaScanConfig, MixedNodeConfig, PositionScanConfig, ThetaScanConfig,
    DEFAULT_DT_FACTOR,
};
use crate::dynamics::BlochAngles;
use crate::model::{Geometry, ModelSpec, J0};
use crate::observables::Window;
use crate::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentFile {
    /// Master seed; mandatory so every run is reproducible, even ones
    /// that draw no randomness.
    pub seed: u64,
    pub model: ModelSection,
    #[serde(default)]
    pub state: StateSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub scan: ScanSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub geometry: Geometry,
    pub n: usize,
    pub attach: [usize; 2],
    pub lambda: Option<f64>,
    pub qubit_couplings: Option<[f64; 2]>,
    pub bus_couplings: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StateSection {
    pub theta: f64,
    pub phi: f64,
}

impl Default for StateSection {
    fn default() -> Self {
        StateSection {
            theta: std::f64::consts::FRAC_PI_2,
            phi: 0.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub dt_factor: f64,
    pub window: Option<[f64; 2]>,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection {
            dt_factor: DEFAULT_DT_FACTOR,
            window: None,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScanSection {
    pub lambdas: Option<Vec<f64>>,
    pub thetas: Option<Vec<f64>>,
    pub phis: Option<Vec<f64>>,
    pub positions: Option<Vec<usize>>,
    pub sigmas: Option<Vec<f64>>,
    pub ensemble_size: Option<usize>,
    pub disorder_qubit_couplings: Option<bool>,
    pub control_attach: Option<[usize; 2]>,
}

impl ModelSection {
    pub fn to_spec(&self) -> Result<ModelSpec> {
        let qubit_couplings = match (self.lambda, self.qubit_couplings) {
            (Some(_), Some(_)) => {
                return Err(Error::InvalidConfig(
                    "model.lambda and model.qubit_couplings are mutually exclusive".into(),
                ))
            }
            (Some(l), None) => (l * J0, l * J0),
            (None, Some([a, b])) => (a, b),
            (None, None) => {
                return Err(Error::InvalidConfig(
                    "model needs either lambda or qubit_couplings".into(),
                ))
            }
        };
        let mut spec = ModelSpec::uniform(
            self.geometry,
            self.n,
            0.0,
            (self.attach[0], self.attach[1]),
        )
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
        spec.qubit_couplings = qubit_couplings;
        if let Some(bus) = &self.bus_couplings {
            spec.bus_couplings = bus.clone();
        }
        spec.validate().map_err(|e| Error::InvalidConfig(e.to_string()))?;
        Ok(spec)
    }
}

impl ExperimentFile {
    pub fn angles(&self) -> Result<BlochAngles> {
        BlochAngles::new(self.state.theta, self.state.phi)
            .map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn window(&self) -> Option<Window> {
        self.grid.window.map(|[lo, hi]| Window::new(lo, hi))
    }

    pub fn lambda_scan(&self) -> Result<LambdaScanConfig> {
        Ok(LambdaScanConfig {
            base: self.model.to_spec()?,
            lambdas: self
                .scan
                .lambdas
                .clone()
                .ok_or_else(|| Error::InvalidConfig("scan.lambdas is required".into()))?,
            angles: self.angles()?,
            dt_factor: self.grid.dt_factor,
        })
    }

    pub fn theta_scan(&self) -> Result<ThetaScanConfig> {
        Ok(ThetaScanConfig {
            spec: self.model.to_spec()?,
            thetas: self
                .scan
                .thetas
                .clone()
                .ok_or_else(|| Error::InvalidConfig("scan.thetas is required".into()))?,
            phis: self.scan.phis.clone().unwrap_or_else(|| vec![0.0]),
            dt_factor: self.grid.dt_factor,
        })
    }

    pub fn position_scan(&self) -> Result<PositionScanConfig> {
        Ok(PositionScanConfig {
            base: self.model.to_spec()?,
            positions: self.scan.positions.clone().unwrap_or_default(),
        })
    }

    pub fn disorder_scan(&self) -> Result<DisorderScanConfig> {
        Ok(DisorderScanConfig {
            base: self.model.to_spec()?,
            sigmas: self
                .scan
                .sigmas
                .clone()
                .ok_or_else(|| Error::InvalidConfig("scan.sigmas is required".into()))?,
            ensemble_size: self.scan.ensemble_size.unwrap_or(100),
            master_seed: self.seed,
            angles: self.angles()?,
            disorder_qubit_couplings: self.scan.disorder_qubit_couplings.unwrap_or(false),
            dt_factor: self.grid.dt_factor,
        })
    }

    pub fn mixed_node(&self) -> Result<MixedNodeConfig> {
        let control = self.scan.control_attach.ok_or_else(|| {
            Error::InvalidConfig("scan.control_attach is required for check-mixed".into())
        })?;
        Ok(MixedNodeConfig {
            spec: self.model.to_spec()?,
            control_attach: (control[0], control[1]),
            angles: self.angles()?,
            dt_factor: self.grid.dt_factor,
        })
    }

    /// Canonical serialization used for the config hash in manifests.
    pub fn canonical_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

/// Parse a TOML config after applying `key=value` overrides.
///
/// Override keys are dotted paths (`model.lambda=0.05`,
/// `scan.lambdas=[0.02,0.1]`); values parse as TOML scalars or arrays,
/// falling back to a bare string.
pub fn parse_with_overrides(text: &str, overrides: &[String]) -> Result<ExperimentFile> {
    let mut table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::InvalidConfig(e.to_string()))?;
    for entry in overrides {
        let (path, raw) = entry
            .split_once('=')
            .ok_or_else(|| Error::InvalidConfig(format!("override '{entry}' is not KEY=VALUE")))?;
        apply_override(&mut table, path.trim(), raw.trim())?;
    }
    let value = toml::Value::Table(table);
    value
        .try_into()
        .map_err(|e: toml::de::Error| Error::InvalidConfig(e.to_string()))
}

fn apply_override(table: &mut toml::Table, path: &str, raw: &str) -> Result<()> {
    let value = parse_toml_value(raw);
    let mut segments: Vec<&str> = path.split('.').collect();
    let last = segments
        .pop()
        .filter(|s| !s.is_empty())
        .ok_or_else(|| Error::InvalidConfig(format!("empty override path '{path}'")))?;
    let mut current = table;
    for seg in segments {
        let entry = current
            .entry(seg.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        current = entry.as_table_mut().ok_or_else(|| {
            Error::InvalidConfig(format!("override path '{path}' crosses a non-table key"))
        })?;
    }
    current.insert(last.to_string(), value);
    Ok(())
}

fn parse_toml_value(raw: &str) -> toml::Value {
    let wrapped = format!("value = {raw}");
    match wrapped.parse::<toml::Table>() {
        Ok(mut t) => t.remove("value").expect("key exists"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
seed = 7

[model]
geometry = "chain"
n = 5
attach = [1, 5]
lambda = 0.1

[scan]
lambdas = [0.02, 0.1]
"#;

    #[test]
    fn parses_minimal_config() {
        let cfg = parse_with_overrides(BASE, &[]).unwrap();
        assert_eq!(cfg.seed, 7);
        let spec = cfg.model.to_spec().unwrap();
        assert_eq!(spec.n_bus, 5);
        assert_eq!(spec.qubit_couplings, (0.1, 0.1));
        assert_eq!(cfg.state.theta, std::f64::consts::FRAC_PI_2);
        let scan = cfg.lambda_scan().unwrap();
        assert_eq!(scan.lambdas, vec![0.02, 0.1]);
    }

    #[test]
    fn seed_is_mandatory() {
        let text = BASE.replace("seed = 7\n", "");
        let err = parse_with_overrides(&text, &[]).unwrap_err();
        assert!(err.to_string().contains("seed"), "{err}");
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = format!("{BASE}\nbogus = 1\n");
        assert!(parse_with_overrides(&text, &[]).is_err());
        let text = BASE.replace("[scan]", "[scan]\ntypo_key = 2");
        assert!(parse_with_overrides(&text, &[]).is_err());
    }

    #[test]
    fn overrides_apply_and_validate() {
        let cfg =
            parse_with_overrides(BASE, &["model.lambda=0.05".into(), "seed=9".into()]).unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.model.lambda, Some(0.05));
        let cfg = parse_with_overrides(BASE, &["scan.lambdas=[0.04]".into()]).unwrap();
        assert_eq!(cfg.scan.lambdas, Some(vec![0.04]));
        // Overriding an unknown key is an error, not a no-op.
        assert!(parse_with_overrides(BASE, &["model.bogus=1".into()]).is_err());
        assert!(parse_with_overrides(BASE, &["not-an-assignment".into()]).is_err());
    }

    #[test]
    fn geometry_strings() {
        let text = BASE.replace("\"chain\"", "\"ring\"").replace("n = 5", "n = 6");
        let cfg = parse_with_overrides(&text, &[]).unwrap();
        assert_eq!(cfg.model.geometry, Geometry::Ring);
    }

    #[test]
    fn lambda_and_explicit_couplings_conflict() {
        let text = BASE.replace(
            "lambda = 0.1",
            "lambda = 0.1\nqubit_couplings = [0.1, 0.2]",
        );
        let cfg = parse_with_overrides(&text, &[]).unwrap();
        assert!(cfg.model.to_spec().is_err());
    }

    #[test]
    fn missing_scan_section_reported() {
        let cfg = parse_with_overrides(BASE, &[]).unwrap();
        assert!(matches!(cfg.theta_scan(), Err(Error::InvalidConfig(_))));
        assert!(matches!(cfg.mixed_node(), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn canonical_json_is_stable() {
        let a = parse_with_overrides(BASE, &[]).unwrap();
        let b = parse_with_overrides(BASE, &[]).unwrap();
        assert_eq!(a.canonical_json().unwrap(), b.canonical_json().unwrap());
    }
}
