//! Dual-layer unorganized neural network for early-vision tasks.
//!
//! A pair of neuron layers sits over an image grid: the input layer holds the
//! pixel signals and the processing layer is wired to random local neighbors.
//! Each processing neuron weights its connections by Gaussian signal
//! similarity, which yields a connectivity map (and its complement, an edge
//! map) in a single pass. Iterating a leaky redistribution of neuron
//! potentials over the weighted net with a grounded border drains the
//! well-connected background and leaves residue on regions insulated by
//! low-similarity boundaries; successive thresholding of that residue map
//! pops out nested object masks.
//!
//! The crate is organized by stage:
//!
//! - [`topology`]: seeded random local wiring
//! - [`weights`]: Gaussian connection weights, connectivity and edge maps
//! - [`leaky`]: the redistribution kernel and the iterative residue process
//! - [`popout`]: histograms, thresholds, masks, bilayer split, saliency
//! - [`eval`]: precision-recall sweeps, IoU, weight-noise robustness
//! - [`baseline`]: Sobel and Prewitt gradient baselines
//! - [`io`] / [`manifest`] / [`pipeline`]: files, run records, orchestration

pub mod baseline;
pub mod error;
pub mod eval;
pub mod field;
pub mod grid;
pub mod io;
pub mod leaky;
pub mod manifest;
pub mod pipeline;
pub mod popout;
pub mod topology;
pub mod weights;

pub use error::{Result, SunnError};
pub use field::{Mask, ScalarField, SignalField};
pub use grid::GridDims;
pub use leaky::{
    border_mask, leaky_step, normalize_weights, run_leaky, LeakConfig, PrMap, RedistributionKernel,
    SinkSpec, Symmetrization, TracePoint,
};
pub use pipeline::{
    run_analysis, run_pipeline, AnalysisConfig, AnalysisOutputs, PipelineConfig, PopoutConfig,
    Stage,
};
pub use topology::{build_random_topology, BorderPolicy, RandomTopology, TopologyConfig};
pub use weights::{
    compute_weights, connectivity_map, edge_map, propagate_intensity, CMap, GaussianParams,
    WeightField,
};
