//! Run manifests: every parameter that affects output, artifact hashes, and
//! per-stage timings, as a TOML document. A run rebuilt from a manifest's
//! parameters reproduces byte-identical raw artifacts.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SunnError};
use crate::leaky::{LeakConfig, SinkSpec, Symmetrization};
use crate::pipeline::{AnalysisConfig, PopoutConfig, Stage};
use crate::topology::{BorderPolicy, TopologyConfig};
use crate::weights::{GaussianParams, SignalDistance};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputRecord {
    pub path: String,
    pub sha256: String,
    pub width: u32,
    pub height: u32,
}

/// Flat, serializable view of the effective parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestParams {
    pub channels: usize,
    pub radius: u32,
    pub connections_per_neuron: usize,
    pub seed: u64,
    pub border_policy: BorderPolicy,
    pub sigma: f64,
    pub leak_rate: f64,
    pub ground_conductance: f64,
    pub sink: String,
    pub max_iterations: usize,
    pub tolerance: f64,
    pub symmetrization: Symmetrization,
    pub bins: usize,
    pub max_levels: usize,
    pub filter_components: bool,
    pub min_component_area_frac: f64,
    pub center_strength: f64,
    pub threads: usize,
}

impl ManifestParams {
    pub fn from_config(config: &AnalysisConfig) -> Self {
        ManifestParams {
            channels: config.channels,
            radius: config.topology.radius,
            connections_per_neuron: config.topology.connections_per_neuron,
            seed: config.topology.seed,
            border_policy: config.topology.border_policy,
            sigma: config.gaussian.sigma,
            leak_rate: config.leak.leak_rate,
            ground_conductance: config.leak.ground_conductance,
            sink: config.leak.sink.label().to_string(),
            max_iterations: config.leak.max_iterations,
            tolerance: config.leak.tolerance,
            symmetrization: config.leak.symmetrization,
            bins: config.popout.bins,
            max_levels: config.popout.max_levels,
            filter_components: config.popout.filter_components,
            min_component_area_frac: config.popout.min_component_area_frac,
            center_strength: config.center_strength,
            threads: config.threads,
        }
    }

    /// Rebuilds the analysis config. Custom sink masks are not representable
    /// in a manifest.
    pub fn to_config(&self) -> Result<AnalysisConfig> {
        let sink = match self.sink.as_str() {
            "border" => SinkSpec::Border,
            "none" => SinkSpec::None,
            other => {
                return Err(SunnError::InvalidConfig(format!(
                    "sink '{other}' cannot be reconstructed from a manifest"
                )))
            }
        };
        Ok(AnalysisConfig {
            channels: self.channels,
            topology: TopologyConfig {
                radius: self.radius,
                connections_per_neuron: self.connections_per_neuron,
                seed: self.seed,
                border_policy: self.border_policy,
            },
            gaussian: GaussianParams {
                sigma: self.sigma,
                distance: SignalDistance::Euclidean,
            },
            leak: LeakConfig {
                leak_rate: self.leak_rate,
                ground_conductance: self.ground_conductance,
                sink,
                max_iterations: self.max_iterations,
                tolerance: self.tolerance,
                symmetrization: self.symmetrization,
            },
            popout: PopoutConfig {
                bins: self.bins,
                max_levels: self.max_levels,
                filter_components: self.filter_components,
                min_component_area_frac: self.min_component_area_frac,
            },
            center_strength: self.center_strength,
            threads: self.threads,
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub iterations_run: Option<usize>,
    pub converged: Option<bool>,
    pub thresholds: Vec<f64>,
    pub duplicate_links: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactRecord {
    pub name: String,
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub input: InputRecord,
    pub stages: Vec<String>,
    pub params: ManifestParams,
    pub result: RunResult,
    pub artifacts: Vec<ArtifactRecord>,
    pub timings: Vec<StageTiming>,
}

impl RunManifest {
    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self)
            .map_err(|e| SunnError::InvalidInput(format!("manifest serialization: {e}")))
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| SunnError::InvalidInput(format!("manifest parse: {e}")))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_toml_string()?).map_err(|e| SunnError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = fs::read_to_string(path).map_err(|e| SunnError::io(path, e))?;
        Self::from_toml_str(&s)
    }

    pub fn artifact(&self, name: &str) -> Option<&ArtifactRecord> {
        self.artifacts.iter().find(|a| a.name == name)
    }

    pub fn stage_list(&self) -> Result<Vec<Stage>> {
        self.stages.iter().map(|s| s.parse()).collect()
    }
}
