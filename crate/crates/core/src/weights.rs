//! Adaptive synaptic weights of the processing layer.
//!
//! A neuron weights each random connection by the Gaussian similarity between
//! its own signal and the neighbor's signal, so the weight train is a function
//! of the current input rather than a trained constant. The per-neuron mean of
//! those weights is the connectivity map; its complement reads as an edge map.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SunnError};
use crate::field::{ScalarField, SignalField};
use crate::grid::GridDims;
use crate::topology::RandomTopology;

/// Signal-space distance used inside the kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignalDistance {
    /// Euclidean distance over channels.
    #[default]
    Euclidean,
}

/// Gaussian kernel parameters. The kernel is unnormalized, so identical
/// signals get weight 1 and weights stay within [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianParams {
    /// Bandwidth in signal units; signals are normalized to [0, 1], so 0.1
    /// separates within-region noise from cross-edge contrast.
    pub sigma: f64,
    pub distance: SignalDistance,
}

impl GaussianParams {
    pub fn with_sigma(sigma: f64) -> Self {
        GaussianParams {
            sigma,
            distance: SignalDistance::Euclidean,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.sigma.is_finite() || self.sigma <= 0.0 {
            return Err(SunnError::InvalidConfig(format!(
                "sigma must be positive, got {}",
                self.sigma
            )));
        }
        Ok(())
    }
}

impl Default for GaussianParams {
    fn default() -> Self {
        GaussianParams::with_sigma(0.1)
    }
}

/// Per-connection weights, aligned index-for-index with the topology's
/// neighbor lists.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightField {
    dims: GridDims,
    offsets: Vec<usize>,
    values: Vec<f64>,
}

impl WeightField {
    /// Builds a weight field from per-neuron weight lists. Lists must align
    /// with the topology's neighbor lists.
    pub fn from_lists(topology: &RandomTopology, lists: &[Vec<f64>]) -> Result<Self> {
        if lists.len() != topology.neuron_count() {
            return Err(SunnError::ShapeMismatch(format!(
                "{} weight lists for {} neurons",
                lists.len(),
                topology.neuron_count()
            )));
        }
        let mut values = Vec::with_capacity(topology.edge_count());
        for (k, list) in lists.iter().enumerate() {
            if list.len() != topology.out_edges(k).len() {
                return Err(SunnError::ShapeMismatch(format!(
                    "neuron {k} has {} weights for {} neighbors",
                    list.len(),
                    topology.out_edges(k).len()
                )));
            }
            values.extend_from_slice(list);
        }
        Ok(WeightField {
            dims: topology.dims(),
            offsets: topology.offsets().to_vec(),
            values,
        })
    }

    #[inline]
    pub fn dims(&self) -> GridDims {
        self.dims
    }

    #[inline]
    pub fn neuron_count(&self) -> usize {
        self.offsets.len() - 1
    }

    #[inline]
    pub fn weights(&self, k: usize) -> &[f64] {
        &self.values[self.offsets[k]..self.offsets[k + 1]]
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Checks index-for-index alignment with a topology.
    pub fn check_alignment(&self, topology: &RandomTopology) -> Result<()> {
        if self.dims != topology.dims() || self.offsets != topology.offsets() {
            return Err(SunnError::ShapeMismatch(
                "weight field is not aligned with the topology".into(),
            ));
        }
        Ok(())
    }
}

/// Connectivity map: per-neuron mean weight, in [0, 1]. Neurons without any
/// connections (possible under the drop border policy) get 0 and are counted.
#[derive(Debug, Clone, PartialEq)]
pub struct CMap {
    pub field: ScalarField,
    pub empty_neurons: usize,
}

/// Evaluates the Gaussian weight of every connection:
/// `phi = exp(-d^2 / (2 sigma^2))` with `d` the channel-wise Euclidean
/// distance between the two paired signals.
pub fn compute_weights(
    signals: &SignalField,
    topology: &RandomTopology,
    params: &GaussianParams,
) -> Result<WeightField> {
    params.validate()?;
    if signals.dims() != topology.dims() {
        return Err(SunnError::ShapeMismatch(format!(
            "signals are {}x{} but topology is {}x{}",
            signals.dims().width,
            signals.dims().height,
            topology.dims().width,
            topology.dims().height
        )));
    }

    let inv_two_sigma_sq = 1.0 / (2.0 * params.sigma * params.sigma);
    let n = topology.neuron_count();
    let offsets = topology.offsets().to_vec();
    let mut values = vec![0.0f64; topology.edge_count()];

    // Each neuron owns a disjoint slice of the value array.
    let mut slices: Vec<&mut [f64]> = Vec::with_capacity(n);
    let mut rest = values.as_mut_slice();
    for k in 0..n {
        let (head, tail) = rest.split_at_mut(offsets[k + 1] - offsets[k]);
        slices.push(head);
        rest = tail;
    }

    slices.par_iter_mut().enumerate().for_each(|(k, out)| {
        let neighbors = topology.out_edges(k);
        for (slot, &j) in out.iter_mut().zip(neighbors) {
            let d_sq = signals.distance_sq(k, j as usize);
            *slot = (-d_sq * inv_two_sigma_sq).exp();
        }
    });

    Ok(WeightField {
        dims: topology.dims(),
        offsets,
        values,
    })
}

/// Mean weight per neuron.
pub fn connectivity_map(weights: &WeightField) -> CMap {
    let n = weights.neuron_count();
    let mut values = vec![0.0f64; n];
    let mut empty_neurons = 0usize;
    for (k, slot) in values.iter_mut().enumerate() {
        let w = weights.weights(k);
        if w.is_empty() {
            empty_neurons += 1;
        } else {
            *slot = w.iter().sum::<f64>() / w.len() as f64;
        }
    }
    CMap {
        field: ScalarField::new(weights.dims(), values).expect("count matches dims"),
        empty_neurons,
    }
}

/// Edge strength as the complement of connectivity: `E = 1 - mean weight`.
pub fn edge_map(cmap: &CMap) -> ScalarField {
    let values = cmap.field.values().iter().map(|&c| 1.0 - c).collect();
    ScalarField::new(cmap.field.dims(), values).expect("same length as input")
}

/// One unnormalized propagation step: `out_k = sum_i phi_{k,i} * in_i` over
/// neuron k's connections.
pub fn propagate_intensity(
    weights: &WeightField,
    topology: &RandomTopology,
    input: &ScalarField,
) -> Result<ScalarField> {
    weights.check_alignment(topology)?;
    if input.dims() != weights.dims() {
        return Err(SunnError::ShapeMismatch(
            "input field dims differ from the weight field".into(),
        ));
    }
    for &v in input.values() {
        if !v.is_finite() {
            return Err(SunnError::InvalidInput("non-finite input value".into()));
        }
    }
    let src = input.values();
    let values = (0..weights.neuron_count())
        .map(|k| {
            weights
                .weights(k)
                .iter()
                .zip(topology.out_edges(k))
                .map(|(&w, &j)| w * src[j as usize])
                .sum()
        })
        .collect();
    ScalarField::new(input.dims(), values)
}
