//! Random local interconnections of the processing layer.
//!
//! Each neuron draws a fixed number of connections to uniformly random
//! positions inside the square window of radius `R` around it, excluding
//! itself. Draws are derived per neuron from the run seed, so construction
//! is deterministic and order-independent.

use std::io::Write;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SunnError};
use crate::grid::GridDims;

/// How draws that land outside the grid are handled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BorderPolicy {
    /// Redraw until the target is in-grid; keeps the degree uniform.
    Resample,
    /// Clamp the target coordinates onto the grid.
    Clamp,
    /// Discard the connection; border neurons end up with fewer links.
    Drop,
}

impl std::fmt::Display for BorderPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BorderPolicy::Resample => write!(f, "resample"),
            BorderPolicy::Clamp => write!(f, "clamp"),
            BorderPolicy::Drop => write!(f, "drop"),
        }
    }
}

impl std::str::FromStr for BorderPolicy {
    type Err = SunnError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "resample" => Ok(BorderPolicy::Resample),
            "clamp" => Ok(BorderPolicy::Clamp),
            "drop" => Ok(BorderPolicy::Drop),
            other => Err(SunnError::InvalidConfig(format!(
                "unknown border policy '{other}'"
            ))),
        }
    }
}

/// Parameters of the random wiring.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TopologyConfig {
    /// Window radius in pixels; connections reach at most `R` in each axis.
    pub radius: u32,
    /// Connections drawn per neuron. Defaults to `8 * radius`.
    pub connections_per_neuron: usize,
    pub seed: u64,
    pub border_policy: BorderPolicy,
}

impl TopologyConfig {
    /// Config with the conventional degree of eight connections per unit of radius.
    pub fn with_radius(radius: u32) -> Self {
        TopologyConfig {
            radius,
            connections_per_neuron: 8 * radius as usize,
            seed: 0,
            border_policy: BorderPolicy::Resample,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.radius < 1 {
            return Err(SunnError::InvalidConfig("radius must be >= 1".into()));
        }
        if self.connections_per_neuron < 1 {
            return Err(SunnError::InvalidConfig(
                "connections_per_neuron must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

impl Default for TopologyConfig {
    fn default() -> Self {
        TopologyConfig::with_radius(5)
    }
}

/// The immutable wiring: per-neuron ordered out-neighbor lists in CSR form.
#[derive(Debug, Clone)]
pub struct RandomTopology {
    dims: GridDims,
    offsets: Vec<usize>,
    targets: Vec<u32>,
    config: TopologyConfig,
    duplicate_links: u64,
}

const DISTINCT_RETRY_LIMIT: u32 = 64;

impl RandomTopology {
    #[inline]
    pub fn dims(&self) -> GridDims {
        self.dims
    }

    pub fn config(&self) -> &TopologyConfig {
        &self.config
    }

    #[inline]
    pub fn neuron_count(&self) -> usize {
        self.dims.len()
    }

    pub fn edge_count(&self) -> usize {
        self.targets.len()
    }

    /// Connections that were accepted as duplicates after the distinct-draw
    /// retry budget ran out (border neurons with few candidates).
    pub fn duplicate_links(&self) -> u64 {
        self.duplicate_links
    }

    /// Ordered out-neighbors of neuron `k`.
    pub fn neighbors(&self, k: usize) -> Result<&[u32]> {
        self.dims.check_index(k)?;
        Ok(self.out_edges(k))
    }

    #[inline]
    pub(crate) fn out_edges(&self, k: usize) -> &[u32] {
        &self.targets[self.offsets[k]..self.offsets[k + 1]]
    }

    pub(crate) fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    /// Builds a topology from explicit neighbor lists, validating the wiring
    /// invariants. Intended for tests and small hand-constructed nets.
    pub fn from_neighbor_lists(
        dims: GridDims,
        lists: &[Vec<u32>],
        config: TopologyConfig,
    ) -> Result<Self> {
        if lists.len() != dims.len() {
            return Err(SunnError::ShapeMismatch(format!(
                "{} neighbor lists for {} neurons",
                lists.len(),
                dims.len()
            )));
        }
        let mut offsets = Vec::with_capacity(lists.len() + 1);
        let mut targets = Vec::new();
        offsets.push(0);
        for (k, list) in lists.iter().enumerate() {
            for &j in list {
                let j_us = j as usize;
                dims.check_index(j_us)?;
                if j_us == k {
                    return Err(SunnError::InvalidInput(format!("self edge on neuron {k}")));
                }
                if dims.chebyshev(k, j_us) > config.radius {
                    return Err(SunnError::InvalidInput(format!(
                        "edge {k} -> {j} exceeds radius {}",
                        config.radius
                    )));
                }
                targets.push(j);
            }
            offsets.push(targets.len());
        }
        Ok(RandomTopology {
            dims,
            offsets,
            targets,
            config,
            duplicate_links: 0,
        })
    }

    /// Writes the line-oriented dump: `k: j1 j2 ... jn` per neuron.
    pub fn write_dump(&self, mut w: impl Write) -> std::io::Result<()> {
        for k in 0..self.neuron_count() {
            write!(w, "{k}:")?;
            for &j in self.out_edges(k) {
                write!(w, " {j}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Per-neuron RNG stream: the run seed and the neuron index are mixed through
/// SplitMix64 into a ChaCha8 seed, so any construction order yields the same
/// wiring.
fn neuron_rng(seed: u64, k: usize) -> ChaCha8Rng {
    let mut state = seed ^ (k as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    let mut out = [0u8; 32];
    for chunk in out.chunks_exact_mut(8) {
        state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
        chunk.copy_from_slice(&z.to_le_bytes());
    }
    ChaCha8Rng::from_seed(out)
}

/// Largest number of distinct in-grid, non-self candidates any neuron can
/// have inside its window.
fn max_candidates(dims: GridDims, radius: u32) -> usize {
    let span = 2 * radius as usize + 1;
    span.min(dims.width as usize) * span.min(dims.height as usize) - 1
}

/// Draws the random wiring for every neuron.
///
/// Self-draws are always redrawn: the paired input neuron already carries the
/// neuron's own signal. Duplicate targets are redrawn up to a fixed retry
/// budget, then accepted and counted.
pub fn build_random_topology(dims: GridDims, config: &TopologyConfig) -> Result<RandomTopology> {
    config.validate()?;
    GridDims::new(dims.width, dims.height)?;

    let candidates = max_candidates(dims, config.radius);
    if candidates == 0 {
        return Err(SunnError::InfeasibleConfig(format!(
            "a {}x{} grid has no non-self candidates within radius {}",
            dims.width, dims.height, config.radius
        )));
    }
    if config.border_policy == BorderPolicy::Resample && config.connections_per_neuron > candidates
    {
        return Err(SunnError::InfeasibleConfig(format!(
            "{} connections per neuron exceed the {} distinct candidates in a radius-{} window",
            config.connections_per_neuron, candidates, config.radius
        )));
    }

    let n = dims.len();
    let r = config.radius as i64;
    let degree = config.connections_per_neuron;

    let per_neuron: Vec<(Vec<u32>, u64)> = (0..n)
        .into_par_iter()
        .map(|k| {
            let mut rng = neuron_rng(config.seed, k);
            let (x, y) = dims.coords_of(k);
            let mut picked: Vec<u32> = Vec::with_capacity(degree);
            let mut duplicates = 0u64;
            for _ in 0..degree {
                let mut retries = 0u32;
                loop {
                    let dx = rng.gen_range(-r..=r);
                    let dy = rng.gen_range(-r..=r);
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let (tx, ty) = (x as i64 + dx, y as i64 + dy);
                    let target = match config.border_policy {
                        BorderPolicy::Resample => {
                            if !dims.contains(tx, ty) {
                                continue;
                            }
                            dims.index_of(tx as u32, ty as u32)
                        }
                        BorderPolicy::Clamp => {
                            let cx = tx.clamp(0, dims.width as i64 - 1) as u32;
                            let cy = ty.clamp(0, dims.height as i64 - 1) as u32;
                            if (cx, cy) == (x, y) {
                                continue;
                            }
                            dims.index_of(cx, cy)
                        }
                        BorderPolicy::Drop => {
                            if !dims.contains(tx, ty) {
                                break;
                            }
                            dims.index_of(tx as u32, ty as u32)
                        }
                    } as u32;
                    if picked.contains(&target) {
                        if retries < DISTINCT_RETRY_LIMIT {
                            retries += 1;
                            continue;
                        }
                        duplicates += 1;
                    }
                    picked.push(target);
                    break;
                }
            }
            (picked, duplicates)
        })
        .collect();

    let mut offsets = Vec::with_capacity(n + 1);
    offsets.push(0usize);
    let mut total_edges = 0;
    let mut duplicate_links = 0u64;
    for (list, dups) in &per_neuron {
        total_edges += list.len();
        duplicate_links += dups;
        offsets.push(total_edges);
    }
    let mut targets = Vec::with_capacity(total_edges);
    for (list, _) in per_neuron {
        targets.extend_from_slice(&list);
    }

    Ok(RandomTopology {
        dims,
        offsets,
        targets,
        config: *config,
        duplicate_links,
    })
}
