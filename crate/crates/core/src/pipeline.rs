//! End-to-end pipeline: wiring, weighting, leaky iteration, and the popout
//! family of outputs, with artifact writing and a run manifest.

use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::error::{Result, SunnError};
use crate::field::SignalField;
use crate::io;
use crate::leaky::{run_leaky, LeakConfig, PrMap};
use crate::manifest::{
    ArtifactRecord, InputRecord, ManifestParams, RunManifest, RunResult, StageTiming,
};
use crate::popout::{
    bilayer_segment, center_fusion, filter_small_components, find_thresholds, popout_components,
    pr_histogram, BilayerSegmentation, PopoutMasks, ThresholdSet,
};
use crate::topology::{build_random_topology, RandomTopology, TopologyConfig};
use crate::weights::{
    compute_weights, connectivity_map, edge_map, CMap, GaussianParams, WeightField,
};

/// Popout stage settings.
#[derive(Debug, Clone, PartialEq)]
pub struct PopoutConfig {
    pub bins: usize,
    pub max_levels: usize,
    /// Drop small connected components from the masks (benchmark path).
    pub filter_components: bool,
    /// Minimum component area as a fraction of the pixel count.
    pub min_component_area_frac: f64,
}

impl Default for PopoutConfig {
    fn default() -> Self {
        PopoutConfig {
            bins: 64,
            max_levels: 3,
            filter_components: false,
            min_component_area_frac: 0.001,
        }
    }
}

/// Full parameter set of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisConfig {
    /// 1 for grayscale, 3 for color.
    pub channels: usize,
    pub topology: TopologyConfig,
    pub gaussian: GaussianParams,
    pub leak: LeakConfig,
    pub popout: PopoutConfig,
    pub center_strength: f64,
    /// Worker threads; 0 uses the default pool, 1 forces serial execution.
    pub threads: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            channels: 1,
            topology: TopologyConfig::default(),
            gaussian: GaussianParams::default(),
            leak: LeakConfig::default(),
            popout: PopoutConfig::default(),
            center_strength: 1.0,
            threads: 0,
        }
    }
}

impl AnalysisConfig {
    pub fn validate(&self) -> Result<()> {
        if self.channels != 1 && self.channels != 3 {
            return Err(SunnError::InvalidConfig(format!(
                "channels must be 1 or 3, got {}",
                self.channels
            )));
        }
        self.topology.validate()?;
        self.gaussian.validate()?;
        self.leak.validate()?;
        if self.popout.bins < 2 {
            return Err(SunnError::InvalidConfig("bins must be >= 2".into()));
        }
        if self.popout.max_levels < 1 {
            return Err(SunnError::InvalidConfig("max_levels must be >= 1".into()));
        }
        if !self.center_strength.is_finite() || self.center_strength < 0.0 {
            return Err(SunnError::InvalidConfig(
                "center_strength must be >= 0".into(),
            ));
        }
        Ok(())
    }
}

/// Pipeline stages; artifacts are only written for requested stages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Edges,
    PrMap,
    Popout,
    Saliency,
    Bilayer,
}

impl Stage {
    pub fn label(&self) -> &'static str {
        match self {
            Stage::Edges => "edges",
            Stage::PrMap => "prmap",
            Stage::Popout => "popout",
            Stage::Saliency => "saliency",
            Stage::Bilayer => "bilayer",
        }
    }
}

impl std::str::FromStr for Stage {
    type Err = SunnError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "edges" => Ok(Stage::Edges),
            "prmap" => Ok(Stage::PrMap),
            "popout" => Ok(Stage::Popout),
            "saliency" => Ok(Stage::Saliency),
            "bilayer" => Ok(Stage::Bilayer),
            other => Err(SunnError::InvalidConfig(format!("unknown stage '{other}'"))),
        }
    }
}

/// In-memory results of a run.
#[derive(Debug, Clone, Default)]
pub struct AnalysisOutputs {
    pub duplicate_links: u64,
    pub cmap: Option<CMap>,
    pub edges: Option<crate::field::ScalarField>,
    pub prmap: Option<PrMap>,
    pub thresholds: Option<ThresholdSet>,
    pub popout: Option<PopoutMasks>,
    pub saliency: Option<crate::field::ScalarField>,
    pub bilayer: Option<BilayerSegmentation>,
    pub timings: Vec<(String, f64)>,
}

fn needs_prmap(stages: &[Stage]) -> bool {
    stages.iter().any(|s| {
        matches!(
            s,
            Stage::PrMap | Stage::Popout | Stage::Saliency | Stage::Bilayer
        )
    })
}

/// Runs the requested stages on a prebuilt wiring and weight field.
pub fn run_analysis_with_weights(
    signals: &SignalField,
    config: &AnalysisConfig,
    stages: &[Stage],
    topology: &RandomTopology,
    weights: &WeightField,
) -> Result<AnalysisOutputs> {
    config.validate()?;
    if signals.dims() != topology.dims() {
        return Err(SunnError::ShapeMismatch(
            "signal dims differ from the topology".into(),
        ));
    }
    let mut out = AnalysisOutputs {
        duplicate_links: topology.duplicate_links(),
        ..Default::default()
    };

    if stages.contains(&Stage::Edges) {
        let t = Instant::now();
        let cmap = connectivity_map(weights);
        out.edges = Some(edge_map(&cmap));
        out.cmap = Some(cmap);
        out.timings
            .push(("edges".into(), t.elapsed().as_secs_f64()));
    }

    if needs_prmap(stages) {
        let t = Instant::now();
        let prmap = run_leaky(weights, topology, &config.leak)?;
        out.timings
            .push(("prmap".into(), t.elapsed().as_secs_f64()));

        if stages.contains(&Stage::Popout) {
            let t = Instant::now();
            let hist = pr_histogram(&prmap.field, config.popout.bins)?;
            let thresholds = find_thresholds(&hist, config.popout.max_levels)?;
            let mut masks = popout_components(&prmap.field, &thresholds);
            if config.popout.filter_components {
                let min_area = ((signals.dims().len() as f64
                    * config.popout.min_component_area_frac)
                    .ceil() as usize)
                    .max(1);
                for mask in &mut masks.masks {
                    *mask = filter_small_components(mask, min_area);
                }
            }
            out.thresholds = Some(thresholds);
            out.popout = Some(masks);
            out.timings
                .push(("popout".into(), t.elapsed().as_secs_f64()));
        }
        if stages.contains(&Stage::Saliency) {
            let t = Instant::now();
            out.saliency = Some(center_fusion(&prmap.field, config.center_strength)?);
            out.timings
                .push(("saliency".into(), t.elapsed().as_secs_f64()));
        }
        if stages.contains(&Stage::Bilayer) {
            let t = Instant::now();
            out.bilayer = Some(bilayer_segment(&prmap.field, config.popout.bins)?);
            out.timings
                .push(("bilayer".into(), t.elapsed().as_secs_f64()));
        }
        out.prmap = Some(prmap);
    }

    Ok(out)
}

/// Builds the wiring and weights, then runs the requested stages. All
/// parallelism is bounded by `config.threads` (0 = default pool).
pub fn run_analysis(
    signals: &SignalField,
    config: &AnalysisConfig,
    stages: &[Stage],
) -> Result<AnalysisOutputs> {
    config.validate()?;
    let body = || -> Result<AnalysisOutputs> {
        let t = Instant::now();
        let topology = build_random_topology(signals.dims(), &config.topology)?;
        let topo_seconds = t.elapsed().as_secs_f64();

        let t = Instant::now();
        let weights = compute_weights(signals, &topology, &config.gaussian)?;
        let weight_seconds = t.elapsed().as_secs_f64();

        let mut out = run_analysis_with_weights(signals, config, stages, &topology, &weights)?;
        out.timings.insert(0, ("weights".into(), weight_seconds));
        out.timings.insert(0, ("topology".into(), topo_seconds));
        Ok(out)
    };

    if config.threads > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.threads)
            .build()
            .map_err(|e| SunnError::InvalidConfig(format!("thread pool: {e}")))?;
        pool.install(body)
    } else {
        body()
    }
}

/// A full run: analysis plus artifact files and the manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub analysis: AnalysisConfig,
    pub stages: Vec<Stage>,
    pub out_dir: PathBuf,
    pub dump_topology: bool,
}

fn record_artifact(artifacts: &mut Vec<ArtifactRecord>, name: &str, path: &Path) -> Result<()> {
    artifacts.push(ArtifactRecord {
        name: name.to_string(),
        path: path.to_string_lossy().into_owned(),
        sha256: io::sha256_file(path)?,
    });
    Ok(())
}

/// Executes the pipeline on an image file, writes artifacts and the manifest
/// into `out_dir`, and returns the manifest. The manifest is also written as
/// `manifest.toml`.
pub fn run_pipeline(input_path: &Path, config: &PipelineConfig) -> Result<RunManifest> {
    config.analysis.validate()?;
    std::fs::create_dir_all(&config.out_dir).map_err(|e| SunnError::io(&config.out_dir, e))?;

    let input_bytes = std::fs::read(input_path).map_err(|e| SunnError::io(input_path, e))?;
    let signals = io::load_image(input_path, config.analysis.channels)?;
    let outputs = run_analysis(&signals, &config.analysis, &config.stages)?;

    let dir = &config.out_dir;
    let mut artifacts = Vec::new();

    if config.dump_topology {
        // The dump is reproducible from the seed; rebuild for writing.
        let topology = build_random_topology(signals.dims(), &config.analysis.topology)?;
        let path = dir.join("topology.txt");
        io::write_topology_dump(&topology, &path)?;
        record_artifact(&mut artifacts, "topology.txt", &path)?;
    }

    if let (Some(cmap), Some(edges)) = (&outputs.cmap, &outputs.edges) {
        let path = dir.join("cmap.raw");
        io::save_raw(&cmap.field, &path)?;
        record_artifact(&mut artifacts, "cmap.raw", &path)?;
        let path = dir.join("cmap.png");
        io::save_gray_image(&cmap.field, &path, io::GrayDepth::Eight)?;
        record_artifact(&mut artifacts, "cmap.png", &path)?;
        let path = dir.join("edges.raw");
        io::save_raw(edges, &path)?;
        record_artifact(&mut artifacts, "edges.raw", &path)?;
        let path = dir.join("edges.png");
        io::save_gray_image(edges, &path, io::GrayDepth::Eight)?;
        record_artifact(&mut artifacts, "edges.png", &path)?;
    }

    if let Some(prmap) = &outputs.prmap {
        if config.stages.contains(&Stage::PrMap) {
            let path = dir.join("prmap.raw");
            io::save_raw(&prmap.field, &path)?;
            record_artifact(&mut artifacts, "prmap.raw", &path)?;
            let path = dir.join("prmap.png");
            io::save_gray_image(&prmap.field, &path, io::GrayDepth::Sixteen)?;
            record_artifact(&mut artifacts, "prmap.png", &path)?;
            let path = dir.join("trace.txt");
            io::write_trace(&prmap.trace, &path)?;
            record_artifact(&mut artifacts, "trace.txt", &path)?;
        }
    }

    if let Some(popout) = &outputs.popout {
        for (i, mask) in popout.masks.iter().enumerate() {
            let name = format!("popout_{:02}.png", i + 1);
            let path = dir.join(&name);
            io::save_mask(mask, &path)?;
            record_artifact(&mut artifacts, &name, &path)?;
        }
    }

    if let Some(saliency) = &outputs.saliency {
        let path = dir.join("saliency.raw");
        io::save_raw(saliency, &path)?;
        record_artifact(&mut artifacts, "saliency.raw", &path)?;
        let path = dir.join("saliency.png");
        io::save_gray_image(saliency, &path, io::GrayDepth::Eight)?;
        record_artifact(&mut artifacts, "saliency.png", &path)?;
    }

    if let Some(bilayer) = &outputs.bilayer {
        let path = dir.join("bilayer_fg.png");
        io::save_mask(&bilayer.foreground, &path)?;
        record_artifact(&mut artifacts, "bilayer_fg.png", &path)?;
        let path = dir.join("bilayer_bg.png");
        io::save_mask(&bilayer.background, &path)?;
        record_artifact(&mut artifacts, "bilayer_bg.png", &path)?;
    }

    let manifest = RunManifest {
        input: InputRecord {
            path: input_path.to_string_lossy().into_owned(),
            sha256: io::sha256_bytes(&input_bytes),
            width: signals.dims().width,
            height: signals.dims().height,
        },
        stages: config
            .stages
            .iter()
            .map(|s| s.label().to_string())
            .collect(),
        params: ManifestParams::from_config(&config.analysis),
        result: RunResult {
            iterations_run: outputs.prmap.as_ref().map(|p| p.iterations_run),
            converged: outputs.prmap.as_ref().map(|p| p.converged),
            thresholds: outputs
                .thresholds
                .as_ref()
                .map(|t| t.values().to_vec())
                .unwrap_or_default(),
            duplicate_links: outputs.duplicate_links,
        },
        artifacts,
        timings: outputs
            .timings
            .iter()
            .map(|(stage, seconds)| StageTiming {
                stage: stage.clone(),
                seconds: *seconds,
            })
            .collect(),
    };
    manifest.write(&dir.join("manifest.toml"))?;
    Ok(manifest)
}
