//! JSON run configuration. Every physical quantity carries its unit in the key
//! name; site labels are 1-based waveguide numbers.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analysis::linear_grid;
use crate::decoherence::{Spectrum, DEFAULT_NODES};
use crate::lattice::{Coupling, DetuningLaw, DispersionModel, NetworkSpec, SinkSpec, SiteDetuning};
use crate::propagate::{DephasingScope, LindbladModel};

/// Configuration problem, reported with the offending key path. Exit code 2.
#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("{path}: {message}")]
    Schema { path: String, message: String },
    #[error("invalid `{key}`: {reason}")]
    Invalid { key: String, reason: String },
}

fn invalid(key: impl Into<String>, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { key: key.into(), reason: reason.into() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub network: NetworkConfig,
    #[serde(default)]
    pub spectrum: SpectrumConfig,
    #[serde(default)]
    pub experiment: ExperimentConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub numerics: NumericsConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    pub n_sites: usize,
    #[serde(default)]
    pub site_detunings: Vec<SiteDetuningConfig>,
    pub couplings: Vec<CouplingConfig>,
    pub input_site: usize,
    pub target_site: usize,
    pub dispersion: DispersionConfig,
    #[serde(default)]
    pub sink: Option<SinkConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SiteDetuningConfig {
    pub site: usize,
    pub detuning_per_cm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingConfig {
    pub a: usize,
    pub b: usize,
    pub coupling_per_cm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DispersionConfig {
    pub center_wavelength_nm: f64,
    #[serde(default)]
    pub beta0_per_cm: f64,
    #[serde(default = "default_law")]
    pub detuning_law: DetuningLaw,
    #[serde(default = "default_slope")]
    pub coupling_slope_per_nm: f64,
}

fn default_law() -> DetuningLaw {
    DetuningLaw::InverseLambda
}

fn default_slope() -> f64 {
    DispersionModel::DEFAULT_COUPLING_SLOPE_PER_NM
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SinkConfig {
    pub n_sink_guides: usize,
    pub c_trap_per_cm: f64,
    pub c_sink_per_cm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumShape {
    Tophat,
    Gaussian,
    Delta,
}

/// Source spectrum, centred on the network's centre wavelength.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumConfig {
    pub shape: SpectrumShape,
    pub fwhm_nm: f64,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        SpectrumConfig { shape: SpectrumShape::Tophat, fwhm_nm: 95.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl GridConfig {
    const fn new(start: f64, stop: f64, step: f64) -> Self {
        GridConfig { start, stop, step }
    }

    pub fn values(&self, key: &str) -> Result<Vec<f64>, ConfigError> {
        linear_grid(self.start, self.stop, self.step).map_err(|e| invalid(key, e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Propagation distance for wavelength and bandwidth sweeps.
    pub z_cm: f64,
    pub wavelength_grid_nm: GridConfig,
    pub bandwidth_grid_nm: GridConfig,
    pub z_grid_cm: GridConfig,
    pub gamma_grid_per_cm: GridConfig,
    /// Grids used by `map --extended`.
    pub extended_z_grid_cm: GridConfig,
    pub extended_gamma_grid_per_cm: GridConfig,
    /// Dephased site (1-based); `null` picks the most detuned site.
    pub dephasing_site: Option<usize>,
    /// Dephase every coherence instead of one site's.
    pub dephasing_uniform: bool,
    /// Report the envelope over detuning scaled by 0.9 and 1.1.
    pub sensitivity_band: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            z_cm: 15.0,
            wavelength_grid_nm: GridConfig::new(745.0, 835.0, 1.0),
            bandwidth_grid_nm: GridConfig::new(0.0, 95.0, 5.0),
            z_grid_cm: GridConfig::new(0.0, 15.0, 0.1),
            gamma_grid_per_cm: GridConfig::new(0.0, 0.02, 0.001),
            extended_z_grid_cm: GridConfig::new(0.0, 500.0, 5.0),
            extended_gamma_grid_per_cm: GridConfig::new(0.0, 0.5, 0.025),
            dephasing_site: None,
            dephasing_uniform: false,
            sensitivity_band: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    /// Overridden by the `ENAQT_OUTPUT_DIR` environment variable.
    pub directory: String,
    pub formats: Vec<OutputFormat>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { directory: "output".into(), formats: vec![OutputFormat::Csv] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NumericsConfig {
    pub quadrature_nodes: usize,
    /// Node count compared against `quadrature_nodes` by `check`.
    pub convergence_nodes: usize,
    pub lindblad_tolerance: f64,
}

impl Default for NumericsConfig {
    fn default() -> Self {
        NumericsConfig {
            quadrature_nodes: DEFAULT_NODES,
            convergence_nodes: 2 * DEFAULT_NODES - 1,
            lindblad_tolerance: LindbladModel::DEFAULT_TOLERANCE,
        }
    }
}

impl Default for RunConfig {
    /// The fabricated four-guide design.
    fn default() -> Self {
        RunConfig {
            network: NetworkConfig {
                n_sites: 4,
                site_detunings: vec![SiteDetuningConfig { site: 4, detuning_per_cm: 1.0 }],
                couplings: (1..4).map(|a| CouplingConfig { a, b: a + 1, coupling_per_cm: 1.0 }).collect(),
                input_site: 1,
                target_site: 3,
                dispersion: DispersionConfig {
                    center_wavelength_nm: 792.5,
                    beta0_per_cm: 0.0,
                    detuning_law: default_law(),
                    coupling_slope_per_nm: default_slope(),
                },
                sink: Some(SinkConfig {
                    n_sink_guides: SinkSpec::DEFAULT_LENGTH,
                    c_trap_per_cm: 1.5,
                    c_sink_per_cm: 1.75,
                }),
            },
            spectrum: SpectrumConfig::default(),
            experiment: ExperimentConfig::default(),
            output: OutputConfig::default(),
            numerics: NumericsConfig::default(),
        }
    }
}

/// Parses and validates a config document. An empty document is treated as `{}`.
pub fn parse_config_str(text: &str) -> Result<RunConfig, ConfigError> {
    let text = if text.trim().is_empty() { "{}" } else { text };
    let de = &mut serde_json::Deserializer::from_str(text);
    let config: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        ConfigError::Schema { path, message: e.into_inner().to_string() }
    })?;
    config.validate()?;
    Ok(config)
}

pub fn parse_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| ConfigError::Read { path: path.display().to_string(), source })?;
    parse_config_str(&text)
}

fn positive(key: &str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(key, format!("must be positive and finite, got {v}")))
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let n = &self.network;
        if n.n_sites == 0 {
            return Err(invalid("network.n_sites", "need at least one site"));
        }
        let site = |key: String, s: usize| -> Result<usize, ConfigError> {
            if (1..=n.n_sites).contains(&s) {
                Ok(s - 1)
            } else {
                Err(invalid(key, format!("site {s} is outside 1..={}", n.n_sites)))
            }
        };
        site("network.input_site".into(), n.input_site)?;
        site("network.target_site".into(), n.target_site)?;
        for (i, d) in n.site_detunings.iter().enumerate() {
            site(format!("network.site_detunings[{i}].site"), d.site)?;
            if !d.detuning_per_cm.is_finite() {
                return Err(invalid(format!("network.site_detunings[{i}].detuning_per_cm"), "must be finite"));
            }
        }
        for (i, c) in n.couplings.iter().enumerate() {
            site(format!("network.couplings[{i}].a"), c.a)?;
            site(format!("network.couplings[{i}].b"), c.b)?;
            positive(&format!("network.couplings[{i}].coupling_per_cm"), c.coupling_per_cm)?;
        }
        positive("network.dispersion.center_wavelength_nm", n.dispersion.center_wavelength_nm)?;
        if !n.dispersion.beta0_per_cm.is_finite() {
            return Err(invalid("network.dispersion.beta0_per_cm", "must be finite"));
        }
        if !n.dispersion.coupling_slope_per_nm.is_finite() {
            return Err(invalid("network.dispersion.coupling_slope_per_nm", "must be finite"));
        }
        if let Some(s) = &n.sink {
            if s.n_sink_guides == 0 {
                return Err(invalid("network.sink.n_sink_guides", "need at least one guide"));
            }
            positive("network.sink.c_trap_per_cm", s.c_trap_per_cm)?;
            positive("network.sink.c_sink_per_cm", s.c_sink_per_cm)?;
            if s.c_trap_per_cm >= s.c_sink_per_cm {
                return Err(invalid("network.sink.c_trap_per_cm", "must be below c_sink_per_cm"));
            }
        }
        self.network_spec().map_err(|e| invalid("network", e.to_string()))?;

        if self.spectrum.shape != SpectrumShape::Delta {
            positive("spectrum.fwhm_nm", self.spectrum.fwhm_nm)?;
        }
        self.spectrum().map_err(|e| invalid("spectrum", e.to_string()))?;

        let e = &self.experiment;
        if !(e.z_cm >= 0.0 && e.z_cm.is_finite()) {
            return Err(invalid("experiment.z_cm", "must be finite and non-negative"));
        }
        let grids = [
            ("experiment.wavelength_grid_nm", e.wavelength_grid_nm),
            ("experiment.bandwidth_grid_nm", e.bandwidth_grid_nm),
            ("experiment.z_grid_cm", e.z_grid_cm),
            ("experiment.gamma_grid_per_cm", e.gamma_grid_per_cm),
            ("experiment.extended_z_grid_cm", e.extended_z_grid_cm),
            ("experiment.extended_gamma_grid_per_cm", e.extended_gamma_grid_per_cm),
        ];
        for (key, g) in grids {
            g.values(key)?;
            if key != "experiment.wavelength_grid_nm" && g.start < 0.0 {
                return Err(invalid(format!("{key}.start"), "must be non-negative"));
            }
        }
        if let Some(s) = e.dephasing_site {
            site("experiment.dephasing_site".into(), s)?;
        }
        let nm = &self.numerics;
        if nm.quadrature_nodes == 0 {
            return Err(invalid("numerics.quadrature_nodes", "must be at least 1"));
        }
        if nm.convergence_nodes == 0 {
            return Err(invalid("numerics.convergence_nodes", "must be at least 1"));
        }
        positive("numerics.lindblad_tolerance", nm.lindblad_tolerance)?;
        if self.output.formats.is_empty() {
            return Err(invalid("output.formats", "need at least one format"));
        }
        Ok(())
    }

    /// Zero-based network for the simulation API.
    pub fn network_spec(&self) -> crate::Result<NetworkSpec> {
        let n = &self.network;
        let d = &n.dispersion;
        let net = NetworkSpec {
            n_sites: n.n_sites,
            site_detunings: n
                .site_detunings
                .iter()
                .map(|s| SiteDetuning { site: s.site - 1, detuning: s.detuning_per_cm })
                .collect(),
            couplings: n
                .couplings
                .iter()
                .map(|c| Coupling { a: c.a - 1, b: c.b - 1, strength: c.coupling_per_cm })
                .collect(),
            dispersion: DispersionModel {
                center_wavelength_nm: d.center_wavelength_nm,
                beta0: d.beta0_per_cm,
                detuning_law: d.detuning_law,
                coupling_slope_per_nm: d.coupling_slope_per_nm,
            },
            sink: n.sink.map(|s| SinkSpec {
                n_sink: s.n_sink_guides,
                c_trap: s.c_trap_per_cm,
                c_sink: s.c_sink_per_cm,
            }),
            input_site: n.input_site - 1,
            target_site: n.target_site - 1,
        };
        net.validate()?;
        Ok(net)
    }

    pub fn spectrum(&self) -> crate::Result<Spectrum> {
        let center = self.network.dispersion.center_wavelength_nm;
        match self.spectrum.shape {
            SpectrumShape::Tophat => Spectrum::tophat(center, self.spectrum.fwhm_nm),
            SpectrumShape::Gaussian => Spectrum::gaussian(center, self.spectrum.fwhm_nm),
            SpectrumShape::Delta => Spectrum::delta(center),
        }
    }

    pub fn dephasing(&self) -> Option<DephasingScope> {
        if self.experiment.dephasing_uniform {
            Some(DephasingScope::Uniform)
        } else {
            self.experiment.dephasing_site.map(|s| DephasingScope::Site(s - 1))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::design_network;

    fn bundled() -> String {
        std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/paper_network.json")).unwrap()
    }

    #[test]
    fn bundled_config_is_the_design_network() {
        let cfg = parse_config_str(&bundled()).unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.network_spec().unwrap(), design_network());
    }

    #[test]
    fn empty_file_names_first_missing_key() {
        let err = parse_config_str("").unwrap_err().to_string();
        assert!(err.contains("missing field `network`"), "{err}");
    }

    #[test]
    fn negative_coupling_names_the_key() {
        let text = bundled().replacen("\"coupling_per_cm\": 1.0", "\"coupling_per_cm\": -1.0", 1);
        let err = parse_config_str(&text).unwrap_err().to_string();
        assert!(err.contains("network.couplings[0].coupling_per_cm"), "{err}");
    }

    #[test]
    fn unknown_keys_are_rejected_with_path() {
        let mut v: serde_json::Value = serde_json::from_str(&bundled()).unwrap();
        v["network"]["dispersion"]["coupling_slope"] = 0.1.into();
        let err = parse_config_str(&v.to_string()).unwrap_err().to_string();
        assert!(err.starts_with("network.dispersion"), "{err}");
        assert!(err.contains("unknown field `coupling_slope`"), "{err}");
    }

    #[test]
    fn type_errors_carry_path() {
        let mut v: serde_json::Value = serde_json::from_str(&bundled()).unwrap();
        v["experiment"]["z_cm"] = "fifteen".into();
        let err = parse_config_str(&v.to_string()).unwrap_err().to_string();
        assert!(err.starts_with("experiment.z_cm"), "{err}");
    }

    #[test]
    fn zero_based_conversion_and_site_range() {
        let mut cfg = RunConfig::default();
        cfg.network.target_site = 5;
        let err = cfg.validate().unwrap_err().to_string();
        assert!(err.contains("network.target_site"), "{err}");
    }

    #[test]
    fn defaults_round_trip() {
        let text = serde_json::to_string_pretty(&RunConfig::default()).unwrap();
        assert_eq!(parse_config_str(&text).unwrap(), RunConfig::default());
    }
}
