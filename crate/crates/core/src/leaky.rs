//! Iterative leaky-potential process over the weighted net.
//!
//! The raw weight sums of the net are turned into a substochastic
//! redistribution kernel: each neuron's outflow is split among its neighbors
//! in proportion to the symmetrized weights, and sink neurons route an extra
//! ground fraction out of the system. Every neuron starts at potential 1.0
//! and each synchronous step releases a `leak_rate` fraction of its potential
//! through the kernel. What remains when the iteration settles is the
//! potential-residue map: regions insulated from the sink by low-weight
//! boundaries keep their potential while well-connected background drains.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SunnError};
use crate::field::{Mask, ScalarField};
use crate::grid::GridDims;
use crate::topology::RandomTopology;
use crate::weights::WeightField;

/// Where the ground attaches.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SinkSpec {
    /// The one-pixel ring of border neurons (the net's surroundings).
    Border,
    /// No ground anywhere; total potential is conserved.
    None,
    /// Explicit sink mask.
    Custom(Mask),
}

impl SinkSpec {
    pub fn label(&self) -> &'static str {
        match self {
            SinkSpec::Border => "border",
            SinkSpec::None => "none",
            SinkSpec::Custom(_) => "custom",
        }
    }
}

/// How the directed weight sums are symmetrized before normalization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Symmetrization {
    /// `w(k,i) = (w_out(k,i) + w_out(i,k)) / 2`, missing reverse edges count as 0.
    Average,
    /// `w(k,i) = max(w_out(k,i), w_out(i,k))`.
    Max,
    /// Keep the directed weights as drawn.
    Directed,
}

impl std::fmt::Display for Symmetrization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Symmetrization::Average => write!(f, "average"),
            Symmetrization::Max => write!(f, "max"),
            Symmetrization::Directed => write!(f, "directed"),
        }
    }
}

impl std::str::FromStr for Symmetrization {
    type Err = SunnError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "average" => Ok(Symmetrization::Average),
            "max" => Ok(Symmetrization::Max),
            "directed" => Ok(Symmetrization::Directed),
            other => Err(SunnError::InvalidConfig(format!(
                "unknown symmetrization '{other}'"
            ))),
        }
    }
}

/// Parameters of the leaky process.
#[derive(Debug, Clone, PartialEq)]
pub struct LeakConfig {
    /// Fraction of each neuron's potential released per step, in (0, 1].
    pub leak_rate: f64,
    /// Ground conductance on sink neurons.
    pub ground_conductance: f64,
    pub sink: SinkSpec,
    pub max_iterations: usize,
    /// Convergence tolerance on the max per-neuron change.
    pub tolerance: f64,
    pub symmetrization: Symmetrization,
}

impl Default for LeakConfig {
    fn default() -> Self {
        LeakConfig {
            leak_rate: 0.5,
            ground_conductance: 1.0,
            sink: SinkSpec::Border,
            max_iterations: 50,
            tolerance: 1e-6,
            symmetrization: Symmetrization::Average,
        }
    }
}

impl LeakConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.leak_rate.is_finite() || self.leak_rate <= 0.0 || self.leak_rate > 1.0 {
            return Err(SunnError::InvalidConfig(format!(
                "leak_rate must be in (0, 1], got {}",
                self.leak_rate
            )));
        }
        if !self.ground_conductance.is_finite() || self.ground_conductance < 0.0 {
            return Err(SunnError::InvalidConfig(format!(
                "ground_conductance must be >= 0, got {}",
                self.ground_conductance
            )));
        }
        if self.max_iterations < 1 {
            return Err(SunnError::InvalidConfig(
                "max_iterations must be >= 1".into(),
            ));
        }
        if !self.tolerance.is_finite() || self.tolerance <= 0.0 {
            return Err(SunnError::InvalidConfig(format!(
                "tolerance must be > 0, got {}",
                self.tolerance
            )));
        }
        Ok(())
    }
}

/// Mask of the one-pixel border ring.
pub fn border_mask(dims: GridDims) -> Mask {
    let mut values = vec![false; dims.len()];
    for (k, slot) in values.iter_mut().enumerate() {
        let (x, y) = dims.coords_of(k);
        *slot = x == 0 || y == 0 || x == dims.width - 1 || y == dims.height - 1;
    }
    Mask::new(dims, values).expect("count matches dims")
}

/// Row-normalized redistribution kernel.
///
/// For neuron `k` with combined weights `w(k, i)` and ground conductance
/// `g_k`, the denominator is `D_k = sum_i w(k, i) + g_k`; the outflow
/// fraction to neighbor `i` is `w(k, i) / D_k` and the ground fraction is
/// `g_k / D_k`. A neuron with `D_k = 0` is isolated: it has no outflow and
/// keeps its own potential.
#[derive(Debug, Clone)]
pub struct RedistributionKernel {
    dims: GridDims,
    // Inflow rows: for neuron k, the (source, weight) pairs with w(source, k).
    in_offsets: Vec<usize>,
    in_nodes: Vec<u32>,
    in_weights: Vec<f64>,
    // Outflow rows; `None` when the kernel is symmetric and the inflow rows
    // double as outflow rows.
    out: Option<(Vec<usize>, Vec<u32>, Vec<f64>)>,
    inv_denom: Vec<f64>, // 0.0 marks an isolated neuron
    gamma: Vec<f64>,
}

impl RedistributionKernel {
    #[inline]
    pub fn dims(&self) -> GridDims {
        self.dims
    }

    #[inline]
    pub fn neuron_count(&self) -> usize {
        self.inv_denom.len()
    }

    pub fn is_isolated(&self, k: usize) -> bool {
        self.inv_denom[k] == 0.0
    }

    /// Outflow fractions of neuron `k` as (target, fraction) pairs. Empty for
    /// isolated neurons.
    pub fn outflow_fractions(&self, k: usize) -> Vec<(u32, f64)> {
        let inv = self.inv_denom[k];
        if inv == 0.0 {
            return Vec::new();
        }
        let (offsets, nodes, weights) = match &self.out {
            Some((o, t, w)) => (o.as_slice(), t.as_slice(), w.as_slice()),
            None => (
                self.in_offsets.as_slice(),
                self.in_nodes.as_slice(),
                self.in_weights.as_slice(),
            ),
        };
        nodes[offsets[k]..offsets[k + 1]]
            .iter()
            .zip(&weights[offsets[k]..offsets[k + 1]])
            .map(|(&j, &w)| (j, w * inv))
            .collect()
    }

    /// Fraction of neuron `k`'s released potential that leaves to ground.
    pub fn ground_fraction(&self, k: usize) -> f64 {
        self.gamma[k] * self.inv_denom[k]
    }

    /// Potential lost to ground in one step from state `v`.
    pub fn ground_outflow(&self, v: &[f64], leak_rate: f64) -> f64 {
        let mut acc = 0.0;
        for (k, &x) in v.iter().enumerate() {
            acc += self.ground_fraction(k) * x;
        }
        leak_rate * acc
    }

    #[inline]
    fn in_row(&self, k: usize) -> (&[u32], &[f64]) {
        let range = self.in_offsets[k]..self.in_offsets[k + 1];
        (&self.in_nodes[range.clone()], &self.in_weights[range])
    }
}

/// Splits a flat buffer into per-row mutable slices along CSR offsets.
fn row_slices<'a, T>(mut rest: &'a mut [T], offsets: &[usize]) -> Vec<&'a mut [T]> {
    let n = offsets.len() - 1;
    let mut rows = Vec::with_capacity(n);
    for k in 0..n {
        let (head, tail) = rest.split_at_mut(offsets[k + 1] - offsets[k]);
        rows.push(head);
        rest = tail;
    }
    rows
}

/// Directed rows as flat (target, weight) pairs, each row sorted by target.
/// Parallel links stay as repeated entries; the union merge accumulates them.
fn sorted_directed(
    weights: &WeightField,
    topology: &RandomTopology,
) -> (Vec<usize>, Vec<(u32, f64)>) {
    let offsets = topology.offsets().to_vec();
    let mut pairs: Vec<(u32, f64)> = Vec::with_capacity(topology.edge_count());
    for k in 0..topology.neuron_count() {
        pairs.extend(
            topology
                .out_edges(k)
                .iter()
                .copied()
                .zip(weights.weights(k).iter().copied()),
        );
    }
    row_slices(&mut pairs, &offsets)
        .into_par_iter()
        .for_each(|row| row.sort_unstable_by_key(|&(j, _)| j));
    (offsets, pairs)
}

/// Counting-sort transpose; rows come out sorted by source index.
fn transpose(n: usize, offsets: &[usize], pairs: &[(u32, f64)]) -> (Vec<usize>, Vec<(u32, f64)>) {
    let mut counts = vec![0usize; n];
    for &(j, _) in pairs {
        counts[j as usize] += 1;
    }
    let mut t_offsets = Vec::with_capacity(n + 1);
    t_offsets.push(0usize);
    let mut acc = 0;
    for &c in &counts {
        acc += c;
        t_offsets.push(acc);
    }
    let mut cursor = t_offsets[..n].to_vec();
    let mut t_pairs = vec![(0u32, 0.0f64); pairs.len()];
    for k in 0..n {
        for &(j, w) in &pairs[offsets[k]..offsets[k + 1]] {
            t_pairs[cursor[j as usize]] = (k as u32, w);
            cursor[j as usize] += 1;
        }
    }
    (t_offsets, t_pairs)
}

/// Walks one neuron's forward and reverse rows in target order, accumulating
/// same-target runs on each side, and emits one combined entry per distinct
/// neighbor.
fn merge_rows(
    fwd: &[(u32, f64)],
    rev: &[(u32, f64)],
    mode: Symmetrization,
    mut emit: impl FnMut(u32, f64),
) {
    let combine = |a: f64, b: f64| match mode {
        Symmetrization::Average => 0.5 * (a + b),
        Symmetrization::Max => a.max(b),
        Symmetrization::Directed => unreachable!("directed mode is not symmetrized"),
    };
    let take_run = |pairs: &[(u32, f64)], mut i: usize| -> (usize, f64) {
        let node = pairs[i].0;
        let mut acc = 0.0;
        while i < pairs.len() && pairs[i].0 == node {
            acc += pairs[i].1;
            i += 1;
        }
        (i, acc)
    };
    let (mut i, mut j) = (0usize, 0usize);
    while i < fwd.len() || j < rev.len() {
        if j >= rev.len() || (i < fwd.len() && fwd[i].0 < rev[j].0) {
            let node = fwd[i].0;
            let (next, acc) = take_run(fwd, i);
            i = next;
            emit(node, combine(acc, 0.0));
        } else if i >= fwd.len() || rev[j].0 < fwd[i].0 {
            let node = rev[j].0;
            let (next, acc) = take_run(rev, j);
            j = next;
            emit(node, combine(0.0, acc));
        } else {
            let node = fwd[i].0;
            let (next_i, acc_f) = take_run(fwd, i);
            let (next_j, acc_r) = take_run(rev, j);
            i = next_i;
            j = next_j;
            emit(node, combine(acc_f, acc_r));
        }
    }
}

/// Merges forward and reverse rows into the symmetric union graph with one
/// count pass and one parallel fill pass over flat arrays.
fn symmetrize(
    n: usize,
    fwd: &(Vec<usize>, Vec<(u32, f64)>),
    rev: &(Vec<usize>, Vec<(u32, f64)>),
    mode: Symmetrization,
) -> (Vec<usize>, Vec<u32>, Vec<f64>) {
    let fwd_row = |k: usize| &fwd.1[fwd.0[k]..fwd.0[k + 1]];
    let rev_row = |k: usize| &rev.1[rev.0[k]..rev.0[k + 1]];

    let counts: Vec<usize> = (0..n)
        .into_par_iter()
        .map(|k| {
            let mut count = 0usize;
            merge_rows(fwd_row(k), rev_row(k), mode, |_, _| count += 1);
            count
        })
        .collect();
    let mut offsets = Vec::with_capacity(n + 1);
    offsets.push(0usize);
    let mut total = 0;
    for &c in &counts {
        total += c;
        offsets.push(total);
    }

    let mut nodes = vec![0u32; total];
    let mut values = vec![0.0f64; total];
    let node_rows = row_slices(&mut nodes, &offsets);
    let value_rows = row_slices(&mut values, &offsets);
    node_rows
        .into_par_iter()
        .zip(value_rows)
        .enumerate()
        .for_each(|(k, (node_row, value_row))| {
            let mut cursor = 0usize;
            merge_rows(fwd_row(k), rev_row(k), mode, |node, w| {
                node_row[cursor] = node;
                value_row[cursor] = w;
                cursor += 1;
            });
        });
    (offsets, nodes, values)
}

/// Unzips flat pairs into separate node and weight arrays.
fn unzip_pairs(offsets: Vec<usize>, pairs: Vec<(u32, f64)>) -> (Vec<usize>, Vec<u32>, Vec<f64>) {
    let mut nodes = Vec::with_capacity(pairs.len());
    let mut values = Vec::with_capacity(pairs.len());
    for (j, w) in pairs {
        nodes.push(j);
        values.push(w);
    }
    (offsets, nodes, values)
}

fn sink_gamma(dims: GridDims, config: &LeakConfig) -> Result<Vec<f64>> {
    let g = config.ground_conductance;
    Ok(match &config.sink {
        SinkSpec::None => vec![0.0; dims.len()],
        SinkSpec::Border => border_mask(dims)
            .values()
            .iter()
            .map(|&b| if b { g } else { 0.0 })
            .collect(),
        SinkSpec::Custom(mask) => {
            if mask.dims() != dims {
                return Err(SunnError::ShapeMismatch(
                    "sink mask dims differ from the grid".into(),
                ));
            }
            mask.values()
                .iter()
                .map(|&b| if b { g } else { 0.0 })
                .collect()
        }
    })
}

/// Builds the redistribution kernel for the given weights and sink setup.
pub fn normalize_weights(
    weights: &WeightField,
    topology: &RandomTopology,
    config: &LeakConfig,
) -> Result<RedistributionKernel> {
    config.validate()?;
    weights.check_alignment(topology)?;
    let dims = topology.dims();
    let n = dims.len();
    let gamma = sink_gamma(dims, config)?;

    let fwd = sorted_directed(weights, topology);
    let rev = transpose(n, &fwd.0, &fwd.1);

    let (rows, out) = match config.symmetrization {
        Symmetrization::Directed => {
            // Inflow rows are the transpose; the directed rows keep the
            // outflow view. Parallel links stay as separate entries.
            (unzip_pairs(rev.0, rev.1), Some(unzip_pairs(fwd.0, fwd.1)))
        }
        mode => {
            let sym = symmetrize(n, &fwd, &rev, mode);
            (sym, None)
        }
    };

    // Denominators come from the outflow rows.
    let denom_rows: (&[usize], &[f64]) = match &out {
        Some((o, _, w)) => (o, w),
        None => (&rows.0, &rows.2),
    };
    let mut inv_denom = vec![0.0f64; n];
    for k in 0..n {
        let sum: f64 = denom_rows.1[denom_rows.0[k]..denom_rows.0[k + 1]]
            .iter()
            .sum::<f64>()
            + gamma[k];
        if sum > 0.0 {
            inv_denom[k] = 1.0 / sum;
        }
    }

    Ok(RedistributionKernel {
        dims,
        in_offsets: rows.0,
        in_nodes: rows.1,
        in_weights: rows.2,
        out,
        inv_denom,
        gamma,
    })
}

const PAR_CHUNK: usize = 2048;

/// One synchronous step into a fresh buffer:
/// `v'_k = (1 - lam) v_k + lam * sum_i P_{i,k} v_i`, where isolated neurons
/// implicitly redistribute to themselves.
fn step_into(
    kernel: &RedistributionKernel,
    lam: f64,
    v: &[f64],
    released: &mut [f64],
    out: &mut [f64],
) {
    // Prefold the per-source released share so the gather is a plain dot.
    for (r, (&inv, &x)) in released
        .iter_mut()
        .zip(kernel.inv_denom.iter().zip(v.iter()))
    {
        *r = inv * x;
    }
    let released = &released[..];
    out.par_chunks_mut(PAR_CHUNK)
        .enumerate()
        .for_each(|(chunk, slots)| {
            let base = chunk * PAR_CHUNK;
            for (i, slot) in slots.iter_mut().enumerate() {
                let k = base + i;
                let (sources, weights) = kernel.in_row(k);
                let mut inflow = 0.0;
                for (&src, &w) in sources.iter().zip(weights) {
                    inflow += w * released[src as usize];
                }
                *slot = if kernel.inv_denom[k] == 0.0 {
                    // Isolated: keeps its own mass in full.
                    v[k] + lam * inflow
                } else {
                    (1.0 - lam) * v[k] + lam * inflow
                };
            }
        });
}

/// One leaky step as a standalone operation.
pub fn leaky_step(
    kernel: &RedistributionKernel,
    v: &ScalarField,
    leak_rate: f64,
) -> Result<ScalarField> {
    if v.dims() != kernel.dims() {
        return Err(SunnError::ShapeMismatch(
            "potential field dims differ from the kernel".into(),
        ));
    }
    if !(0.0..=1.0).contains(&leak_rate) || leak_rate <= 0.0 {
        return Err(SunnError::InvalidConfig(format!(
            "leak_rate must be in (0, 1], got {leak_rate}"
        )));
    }
    let n = kernel.neuron_count();
    let mut released = vec![0.0f64; n];
    let mut out = vec![0.0f64; n];
    step_into(kernel, leak_rate, v.values(), &mut released, &mut out);
    for &x in &out {
        if !x.is_finite() {
            return Err(SunnError::NumericalFailure(
                "non-finite potential after step".into(),
            ));
        }
    }
    ScalarField::new(v.dims(), out)
}

/// Per-iteration record of the run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub iteration: usize,
    pub total: f64,
    pub max_delta: f64,
}

/// Result of the iterative leaky process.
#[derive(Debug, Clone)]
pub struct PrMap {
    pub field: ScalarField,
    pub iterations_run: usize,
    pub converged: bool,
    pub initial_total: f64,
    pub trace: Vec<TracePoint>,
}

/// Runs the leaky process from a uniform unit potential until the max
/// per-neuron change falls below the tolerance or the iteration budget is
/// spent.
pub fn run_leaky(
    weights: &WeightField,
    topology: &RandomTopology,
    config: &LeakConfig,
) -> Result<PrMap> {
    let kernel = normalize_weights(weights, topology, config)?;
    run_leaky_with_kernel(&kernel, config)
}

/// Same as [`run_leaky`] but reusing a prebuilt kernel.
pub fn run_leaky_with_kernel(kernel: &RedistributionKernel, config: &LeakConfig) -> Result<PrMap> {
    config.validate()?;
    let n = kernel.neuron_count();
    let mut v = vec![1.0f64; n];
    let mut next = vec![0.0f64; n];
    let mut released = vec![0.0f64; n];
    let initial_total = n as f64;

    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations_run = 0;
    for iteration in 1..=config.max_iterations {
        step_into(kernel, config.leak_rate, &v, &mut released, &mut next);
        // Serial reductions keep the trace identical across thread counts.
        let mut max_delta = 0.0f64;
        let mut total = 0.0f64;
        for (a, b) in v.iter().zip(next.iter()) {
            max_delta = max_delta.max((a - b).abs());
            total += b;
        }
        if !max_delta.is_finite() || !total.is_finite() {
            return Err(SunnError::NumericalFailure(format!(
                "non-finite state at iteration {iteration}"
            )));
        }
        trace.push(TracePoint {
            iteration,
            total,
            max_delta,
        });
        std::mem::swap(&mut v, &mut next);
        iterations_run = iteration;
        if max_delta < config.tolerance {
            converged = true;
            break;
        }
    }

    Ok(PrMap {
        field: ScalarField::new(kernel.dims(), v)?,
        iterations_run,
        converged,
        initial_total,
        trace,
    })
}
