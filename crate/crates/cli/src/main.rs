//! `sunn`: edges, residue maps, object popout, saliency, bilayer splits,
//! evaluation, and benchmarking over the unorganized-net pipeline.
//!
//! Exit codes: 0 success, 2 usage error, 3 input error, 4 numerical failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use sunn_core::eval::{binary_pr, robustness_experiment, GroundTruth, GroundTruthKind};
use sunn_core::{baseline, io, AnalysisConfig, PipelineConfig, SinkSpec, Stage, SunnError};

#[derive(Parser)]
#[command(
    name = "sunn",
    about = "Unorganized-net image analysis: edge maps, potential-residue maps, object popout",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Edge map from the connectivity of the random net (or a gradient baseline)
    Edges {
        #[command(flatten)]
        common: CommonOpts,
        /// cmap, sobel, or prewitt
        #[arg(long, default_value = "cmap")]
        method: String,
    },
    /// Potential-residue map from the iterative leaky process
    Prmap {
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Successive thresholding of the residue map into nested object masks
    Popout {
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Center-weighted saliency map from the residue map
    Saliency {
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Foreground/background split of the residue map
    Bilayer {
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Precision-recall sweep of a score map against labeled ground truth
    Eval {
        /// Score map: raw dump (.raw) or grayscale image
        #[arg(long)]
        scores: PathBuf,
        /// Ground-truth mask image (nonzero = positive)
        #[arg(long)]
        truth: PathBuf,
        /// mask (exact overlap) or edge (tolerant matching)
        #[arg(long, default_value = "mask")]
        kind: String,
        /// Chebyshev matching tolerance in pixels for edge ground truth
        #[arg(long, default_value_t = 2)]
        tolerance_px: u32,
        /// Number of thresholds in the sweep
        #[arg(long, default_value_t = 50)]
        thresholds: usize,
        /// Output CSV path
        #[arg(long, default_value = "pr_curve.csv")]
        out: PathBuf,
    },
    /// Clean-versus-noisy popout comparison under weight noise
    Robustness {
        #[command(flatten)]
        common: CommonOpts,
        /// Noise fraction on the weights, in [0, 1]
        #[arg(long, default_value_t = 0.1)]
        noise: f64,
        /// Seed of the noise draw
        #[arg(long, default_value_t = 1)]
        noise_seed: u64,
    },
    /// Per-stage throughput of edges plus the leaky iteration
    Bench {
        #[command(flatten)]
        common: CommonOpts,
        /// Timed repetitions
        #[arg(long, default_value_t = 3)]
        repeats: usize,
        /// Untimed warm-up runs
        #[arg(long, default_value_t = 1)]
        warmup: usize,
    },
}

#[derive(Args)]
struct CommonOpts {
    /// Input image (PNG or portable graymap/pixmap)
    input: PathBuf,
    /// Output directory for artifacts and the manifest
    #[arg(long, short = 'o', default_value = "sunn-out")]
    out_dir: PathBuf,
    /// Key-value defaults file; flags override its entries
    #[arg(long)]
    config: Option<PathBuf>,
    /// Treat the input as RGB instead of grayscale
    #[arg(long)]
    color: bool,
    /// Also write the wiring dump and its sidecar manifest
    #[arg(long)]
    dump_topology: bool,
    #[arg(long)]
    radius: Option<u32>,
    /// Connections per neuron (default 8 x radius)
    #[arg(long)]
    degree: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// resample, clamp, or drop
    #[arg(long)]
    border_policy: Option<String>,
    /// Gaussian kernel bandwidth
    #[arg(long)]
    sigma: Option<f64>,
    /// Fraction of potential released per step, in (0, 1]
    #[arg(long)]
    lambda: Option<f64>,
    /// Ground conductance on sink neurons
    #[arg(long)]
    gamma: Option<f64>,
    /// border or none
    #[arg(long)]
    sink: Option<String>,
    /// Convergence tolerance on the max per-neuron change
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    max_iterations: Option<usize>,
    /// average, max, or directed
    #[arg(long)]
    symmetrization: Option<String>,
    /// Residue histogram bins
    #[arg(long)]
    bins: Option<usize>,
    /// Maximum popout levels
    #[arg(long)]
    max_levels: Option<usize>,
    /// Radial center prior strength for saliency
    #[arg(long)]
    center_strength: Option<f64>,
    /// Drop small connected components from popout masks
    #[arg(long)]
    filter_components: bool,
    /// Minimum component area as a fraction of the pixel count
    #[arg(long)]
    min_component_frac: Option<f64>,
    /// Worker threads; 1 forces serial execution, 0 uses the default pool
    #[arg(long)]
    threads: Option<usize>,
}

/// Parameter overrides collected from a config file or flags; later sources
/// win field by field.
#[derive(Default, Clone)]
struct Overrides {
    radius: Option<u32>,
    degree: Option<usize>,
    seed: Option<u64>,
    border_policy: Option<String>,
    sigma: Option<f64>,
    lambda: Option<f64>,
    gamma: Option<f64>,
    sink: Option<String>,
    eps: Option<f64>,
    max_iterations: Option<usize>,
    symmetrization: Option<String>,
    bins: Option<usize>,
    max_levels: Option<usize>,
    center_strength: Option<f64>,
    min_component_frac: Option<f64>,
    threads: Option<usize>,
    channels: Option<usize>,
    filter_components: Option<bool>,
}

impl Overrides {
    fn merge(mut self, higher: Overrides) -> Overrides {
        macro_rules! take {
            ($field:ident) => {
                if higher.$field.is_some() {
                    self.$field = higher.$field;
                }
            };
        }
        take!(radius);
        take!(degree);
        take!(seed);
        take!(border_policy);
        take!(sigma);
        take!(lambda);
        take!(gamma);
        take!(sink);
        take!(eps);
        take!(max_iterations);
        take!(symmetrization);
        take!(bins);
        take!(max_levels);
        take!(center_strength);
        take!(min_component_frac);
        take!(threads);
        take!(channels);
        take!(filter_components);
        self
    }

    fn from_file(path: &Path) -> Result<Overrides, SunnError> {
        let text = std::fs::read_to_string(path).map_err(|e| SunnError::io(path, e))?;
        let mut o = Overrides::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                SunnError::InvalidConfig(format!(
                    "{}:{}: expected `key = value`",
                    path.display(),
                    lineno + 1
                ))
            })?;
            let key = key.trim();
            let value = value.trim();
            let bad = |e: String| {
                SunnError::InvalidConfig(format!("{}:{}: {key}: {e}", path.display(), lineno + 1))
            };
            match key {
                "radius" => o.radius = Some(value.parse().map_err(|e| bad(format!("{e}")))?),
                "degree" => o.degree = Some(value.parse().map_err(|e| bad(format!("{e}")))?),
                "seed" => o.seed = Some(value.parse().map_err(|e| bad(format!("{e}")))?),
                "border_policy" => o.border_policy = Some(value.to_string()),
                "sigma" => o.sigma = Some(value.parse().map_err(|e| bad(format!("{e}")))?),
                "lambda" => o.lambda = Some(value.parse().map_err(|e| bad(format!("{e}")))?),
                "gamma" => o.gamma = Some(value.parse().map_err(|e| bad(format!("{e}")))?),
                "sink" => o.sink = Some(value.to_string()),
                "eps" => o.eps = Some(value.parse().map_err(|e| bad(format!("{e}")))?),
                "max_iterations" => {
                    o.max_iterations = Some(value.parse().map_err(|e| bad(format!("{e}")))?)
                }
                "symmetrization" => o.symmetrization = Some(value.to_string()),
                "bins" => o.bins = Some(value.parse().map_err(|e| bad(format!("{e}")))?),
                "max_levels" => {
                    o.max_levels = Some(value.parse().map_err(|e| bad(format!("{e}")))?)
                }
                "center_strength" => {
                    o.center_strength = Some(value.parse().map_err(|e| bad(format!("{e}")))?)
                }
                "min_component_frac" => {
                    o.min_component_frac = Some(value.parse().map_err(|e| bad(format!("{e}")))?)
                }
                "threads" => o.threads = Some(value.parse().map_err(|e| bad(format!("{e}")))?),
                "channels" => o.channels = Some(value.parse().map_err(|e| bad(format!("{e}")))?),
                "filter_components" => {
                    o.filter_components = Some(value.parse().map_err(|e| bad(format!("{e}")))?)
                }
                other => {
                    return Err(SunnError::InvalidConfig(format!(
                        "{}:{}: unknown key '{other}'",
                        path.display(),
                        lineno + 1
                    )))
                }
            }
        }
        Ok(o)
    }

    fn apply(self, mut config: AnalysisConfig) -> Result<AnalysisConfig, SunnError> {
        if let Some(v) = self.radius {
            config.topology.radius = v;
            // Degree follows the radius unless set explicitly.
            if self.degree.is_none() {
                config.topology.connections_per_neuron = 8 * v as usize;
            }
        }
        if let Some(v) = self.degree {
            config.topology.connections_per_neuron = v;
        }
        if let Some(v) = self.seed {
            config.topology.seed = v;
        }
        if let Some(v) = &self.border_policy {
            config.topology.border_policy = v.parse()?;
        }
        if let Some(v) = self.sigma {
            config.gaussian.sigma = v;
        }
        if let Some(v) = self.lambda {
            config.leak.leak_rate = v;
        }
        if let Some(v) = self.gamma {
            config.leak.ground_conductance = v;
        }
        if let Some(v) = &self.sink {
            config.leak.sink = match v.as_str() {
                "border" => SinkSpec::Border,
                "none" => SinkSpec::None,
                other => {
                    return Err(SunnError::InvalidConfig(format!(
                        "sink must be border or none, got '{other}'"
                    )))
                }
            };
        }
        if let Some(v) = self.eps {
            config.leak.tolerance = v;
        }
        if let Some(v) = self.max_iterations {
            config.leak.max_iterations = v;
        }
        if let Some(v) = &self.symmetrization {
            config.leak.symmetrization = v.parse()?;
        }
        if let Some(v) = self.bins {
            config.popout.bins = v;
        }
        if let Some(v) = self.max_levels {
            config.popout.max_levels = v;
        }
        if let Some(v) = self.center_strength {
            config.center_strength = v;
        }
        if let Some(v) = self.min_component_frac {
            config.popout.min_component_area_frac = v;
        }
        if let Some(v) = self.threads {
            config.threads = v;
        }
        if let Some(v) = self.channels {
            config.channels = v;
        }
        if let Some(v) = self.filter_components {
            config.popout.filter_components = v;
        }
        config.validate()?;
        Ok(config)
    }
}

impl CommonOpts {
    fn overrides(&self) -> Overrides {
        Overrides {
            radius: self.radius,
            degree: self.degree,
            seed: self.seed,
            border_policy: self.border_policy.clone(),
            sigma: self.sigma,
            lambda: self.lambda,
            gamma: self.gamma,
            sink: self.sink.clone(),
            eps: self.eps,
            max_iterations: self.max_iterations,
            symmetrization: self.symmetrization.clone(),
            bins: self.bins,
            max_levels: self.max_levels,
            center_strength: self.center_strength,
            min_component_frac: self.min_component_frac,
            threads: self.threads,
            channels: self.color.then_some(3),
            filter_components: self.filter_components.then_some(true),
        }
    }

    fn resolve(&self) -> Result<AnalysisConfig, SunnError> {
        let mut overrides = Overrides::default();
        if let Some(path) = &self.config {
            overrides = overrides.merge(Overrides::from_file(path)?);
        }
        overrides = overrides.merge(self.overrides());
        overrides.apply(AnalysisConfig::default())
    }

    fn pipeline_config(&self, stages: Vec<Stage>) -> Result<PipelineConfig, SunnError> {
        Ok(PipelineConfig {
            analysis: self.resolve()?,
            stages,
            out_dir: self.out_dir.clone(),
            dump_topology: self.dump_topology,
        })
    }
}

fn exit_code(err: &SunnError) -> u8 {
    match err {
        SunnError::InvalidConfig(_) | SunnError::InfeasibleConfig(_) => 2,
        SunnError::NumericalFailure(_) => 4,
        _ => 3,
    }
}

fn run_stages(common: &CommonOpts, stages: Vec<Stage>) -> Result<(), SunnError> {
    let config = common.pipeline_config(stages)?;
    let manifest = sunn_core::run_pipeline(&common.input, &config)?;
    if let (Some(iterations), Some(converged)) =
        (manifest.result.iterations_run, manifest.result.converged)
    {
        println!("leaky iteration: {iterations} iterations, converged = {converged}");
    }
    if !manifest.result.thresholds.is_empty() {
        println!(
            "thresholds: {}",
            manifest
                .result
                .thresholds
                .iter()
                .map(|t| format!("{t:.6}"))
                .collect::<Vec<_>>()
                .join(", ")
        );
    }
    for artifact in &manifest.artifacts {
        println!("wrote {}", artifact.path);
    }
    println!("wrote {}", config.out_dir.join("manifest.toml").display());
    Ok(())
}

fn run_edges(common: &CommonOpts, method: &str) -> Result<(), SunnError> {
    match method {
        "cmap" => run_stages(common, vec![Stage::Edges]),
        "sobel" | "prewitt" => {
            let config = common.resolve()?;
            let signals = io::load_image(&common.input, config.channels)?;
            let gray = signals.channel(0)?;
            let edges = if method == "sobel" {
                baseline::sobel_magnitude(&gray)?
            } else {
                baseline::prewitt_magnitude(&gray)?
            };
            std::fs::create_dir_all(&common.out_dir)
                .map_err(|e| SunnError::io(&common.out_dir, e))?;
            let raw = common.out_dir.join(format!("edges_{method}.raw"));
            io::save_raw(&edges, &raw)?;
            let png = common.out_dir.join(format!("edges_{method}.png"));
            io::save_gray_image(&edges, &png, io::GrayDepth::Eight)?;
            println!("wrote {}", raw.display());
            println!("wrote {}", png.display());
            Ok(())
        }
        other => Err(SunnError::InvalidConfig(format!(
            "method must be cmap, sobel, or prewitt, got '{other}'"
        ))),
    }
}

fn run_eval(
    scores: &Path,
    truth: &Path,
    kind: &str,
    tolerance_px: u32,
    thresholds: usize,
    out: &Path,
) -> Result<(), SunnError> {
    let score_field = if scores.extension().and_then(|e| e.to_str()) == Some("raw") {
        io::load_raw(scores)?
    } else {
        io::load_image(scores, 1)?.channel(0)?
    };
    let kind = match kind {
        "mask" => GroundTruthKind::ObjectMask,
        "edge" => GroundTruthKind::EdgePixels,
        other => {
            return Err(SunnError::InvalidConfig(format!(
                "kind must be mask or edge, got '{other}'"
            )))
        }
    };
    let gt = GroundTruth {
        kind,
        mask: io::load_mask(truth)?,
    };
    let curve = binary_pr(&score_field, &gt, thresholds, tolerance_px)?;
    io::ensure_parent(out)?;
    io::write_pr_curve(&curve, out)?;

    let best = curve
        .points
        .iter()
        .map(|p| {
            let f1 = if p.precision + p.recall > 0.0 {
                2.0 * p.precision * p.recall / (p.precision + p.recall)
            } else {
                0.0
            };
            (f1, p)
        })
        .max_by(|a, b| a.0.partial_cmp(&b.0).unwrap())
        .expect("curve has at least two points");
    println!(
        "wrote {} ({} points); best F1 {:.4} at threshold {:.6} (precision {:.4}, recall {:.4})",
        out.display(),
        curve.points.len(),
        best.0,
        best.1.threshold,
        best.1.precision,
        best.1.recall
    );
    Ok(())
}

fn run_robustness(common: &CommonOpts, noise: f64, noise_seed: u64) -> Result<(), SunnError> {
    let config = common.resolve()?;
    let signals = io::load_image(&common.input, config.channels)?;
    let outcome = robustness_experiment(&signals, &config, noise, noise_seed)?;
    std::fs::create_dir_all(&common.out_dir).map_err(|e| SunnError::io(&common.out_dir, e))?;
    let clean = common.out_dir.join("popout_clean.png");
    io::save_mask(&outcome.clean_mask, &clean)?;
    let noisy = common.out_dir.join("popout_noisy.png");
    io::save_mask(&outcome.noisy_mask, &noisy)?;

    let summary_path = common.out_dir.join("robustness.toml");
    let summary = format!(
        "noise_fraction = {noise}\nnoise_seed = {noise_seed}\niou = {}\n\
         clean_mask = \"{}\"\nnoisy_mask = \"{}\"\n",
        outcome.iou,
        clean.display(),
        noisy.display()
    );
    std::fs::write(&summary_path, summary).map_err(|e| SunnError::io(&summary_path, e))?;

    println!("wrote {}", clean.display());
    println!("wrote {}", noisy.display());
    println!("wrote {}", summary_path.display());
    println!(
        "noise {noise} (seed {noise_seed}): clean-vs-noisy popout IoU = {:.4}",
        outcome.iou
    );
    Ok(())
}

fn run_bench(common: &CommonOpts, repeats: usize, warmup: usize) -> Result<(), SunnError> {
    if repeats == 0 {
        return Err(SunnError::InvalidConfig("repeats must be >= 1".into()));
    }
    let config = common.resolve()?;
    let signals = io::load_image(&common.input, config.channels)?;
    let pixels = signals.dims().len() as f64;
    let stages = [Stage::Edges, Stage::PrMap];

    for _ in 0..warmup {
        sunn_core::run_analysis(&signals, &config, &stages)?;
    }

    let mut totals: Vec<(String, f64)> = Vec::new();
    let mut wall = 0.0f64;
    let mut iterations_run = 0usize;
    for _ in 0..repeats {
        let t = Instant::now();
        let out = sunn_core::run_analysis(&signals, &config, &stages)?;
        wall += t.elapsed().as_secs_f64();
        iterations_run = out.prmap.as_ref().map(|p| p.iterations_run).unwrap_or(0);
        for (stage, seconds) in &out.timings {
            match totals.iter_mut().find(|(name, _)| name == stage) {
                Some((_, acc)) => *acc += seconds,
                None => totals.push((stage.clone(), *seconds)),
            }
        }
    }

    println!(
        "bench: {}x{} pixels, {} repeats (+{} warmup), {} leaky iterations, threads = {}",
        signals.dims().width,
        signals.dims().height,
        repeats,
        warmup,
        iterations_run,
        if config.threads == 0 {
            "default".to_string()
        } else {
            config.threads.to_string()
        }
    );
    println!("{:<12} {:>12} {:>16}", "stage", "seconds", "pixels/second");
    for (stage, total) in &totals {
        let per_run = total / repeats as f64;
        println!("{:<12} {:>12.4} {:>16.0}", stage, per_run, pixels / per_run);
    }
    let per_run = wall / repeats as f64;
    println!(
        "{:<12} {:>12.4} {:>16.0}",
        "total",
        per_run,
        pixels / per_run
    );
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), SunnError> {
    match &cli.command {
        Command::Edges { common, method } => run_edges(common, method),
        Command::Prmap { common } => run_stages(common, vec![Stage::PrMap]),
        Command::Popout { common } => run_stages(common, vec![Stage::PrMap, Stage::Popout]),
        Command::Saliency { common } => run_stages(common, vec![Stage::PrMap, Stage::Saliency]),
        Command::Bilayer { common } => run_stages(common, vec![Stage::PrMap, Stage::Bilayer]),
        Command::Eval {
            scores,
            truth,
            kind,
            tolerance_px,
            thresholds,
            out,
        } => run_eval(scores, truth, kind, *tolerance_px, *thresholds, out),
        Command::Robustness {
            common,
            noise,
            noise_seed,
        } => run_robustness(common, *noise, *noise_seed),
        Command::Bench {
            common,
            repeats,
            warmup,
        } => run_bench(common, *repeats, *warmup),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
