//! Dense-matrix reference for the leaky process.
//!
//! Builds the full N x N transition matrix directly from the neighbor and
//! weight lists and iterates it with plain dense arithmetic:
//! `v' = ((1 - lam) I + lam P^T) v`, minus the ground outflow.

use sunn_core::{LeakConfig, RandomTopology, SinkSpec, Symmetrization, WeightField};

/// Dense row-stochastic redistribution matrix (plus ground fractions).
pub struct DenseKernel {
    pub n: usize,
    /// Row-major `p[k * n + i]` is the outflow fraction from k to i.
    pub p: Vec<f64>,
    pub ground: Vec<f64>,
}

pub fn dense_kernel(
    weights: &WeightField,
    topology: &RandomTopology,
    config: &LeakConfig,
) -> DenseKernel {
    let dims = topology.dims();
    let n = dims.len();

    // Directed weight matrix; parallel links accumulate.
    let mut w = vec![0.0f64; n * n];
    for k in 0..n {
        let neighbors = topology.neighbors(k).unwrap();
        let phis = weights.weights(k);
        for (&j, &phi) in neighbors.iter().zip(phis) {
            w[k * n + j as usize] += phi;
        }
    }

    let mut sym = vec![0.0f64; n * n];
    for k in 0..n {
        for i in 0..n {
            sym[k * n + i] = match config.symmetrization {
                Symmetrization::Average => 0.5 * (w[k * n + i] + w[i * n + k]),
                Symmetrization::Max => w[k * n + i].max(w[i * n + k]),
                Symmetrization::Directed => w[k * n + i],
            };
        }
    }

    let gamma: Vec<f64> = (0..n)
        .map(|k| {
            let (x, y) = dims.coords_of(k);
            let is_sink = match &config.sink {
                SinkSpec::None => false,
                SinkSpec::Border => x == 0 || y == 0 || x == dims.width - 1 || y == dims.height - 1,
                SinkSpec::Custom(mask) => mask.get(x, y),
            };
            if is_sink {
                config.ground_conductance
            } else {
                0.0
            }
        })
        .collect();

    let mut p = vec![0.0f64; n * n];
    let mut ground = vec![0.0f64; n];
    for k in 0..n {
        let denom: f64 = sym[k * n..(k + 1) * n].iter().sum::<f64>() + gamma[k];
        if denom > 0.0 {
            for i in 0..n {
                p[k * n + i] = sym[k * n + i] / denom;
            }
            ground[k] = gamma[k] / denom;
        } else {
            // Isolated neuron keeps its mass.
            p[k * n + k] = 1.0;
        }
    }

    DenseKernel { n, p, ground }
}

/// One dense step.
pub fn dense_step(kernel: &DenseKernel, lam: f64, v: &[f64]) -> Vec<f64> {
    let n = kernel.n;
    let mut out = vec![0.0f64; n];
    for k in 0..n {
        let mut inflow = 0.0;
        for (i, &vi) in v.iter().enumerate() {
            inflow += kernel.p[i * n + k] * vi;
        }
        out[k] = (1.0 - lam) * v[k] + lam * inflow;
    }
    out
}

/// Iterates the dense step from a uniform unit potential.
pub fn dense_run(kernel: &DenseKernel, lam: f64, steps: usize) -> Vec<f64> {
    let mut v = vec![1.0f64; kernel.n];
    for _ in 0..steps {
        v = dense_step(kernel, lam, &v);
    }
    v
}

/// Iterates from an explicit starting state.
pub fn dense_run_from(kernel: &DenseKernel, lam: f64, steps: usize, v0: &[f64]) -> Vec<f64> {
    let mut v = v0.to_vec();
    for _ in 0..steps {
        v = dense_step(kernel, lam, &v);
    }
    v
}
