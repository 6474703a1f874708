//! Quantitative harness: precision-recall sweeps, mask overlap, and the
//! weight-noise robustness experiment.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SunnError};
use crate::field::{Mask, ScalarField, SignalField};
use crate::pipeline::{run_analysis, AnalysisConfig, Stage};
use crate::weights::{compute_weights, WeightField};

/// What the ground-truth pixels mean for matching.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroundTruthKind {
    /// Thin labeled edges; predictions match within a pixel tolerance.
    EdgePixels,
    /// Filled object masks; exact pixel overlap.
    ObjectMask,
}

#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub kind: GroundTruthKind,
    pub mask: Mask,
}

/// One point of a threshold sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
    /// The prediction was empty at this threshold; precision is 1 by the
    /// no-false-positives convention.
    pub empty_prediction: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrCurve {
    pub points: Vec<PrPoint>,
}

impl PrCurve {
    pub fn write_csv(&self, mut w: impl std::io::Write) -> std::io::Result<()> {
        writeln!(w, "threshold,precision,recall")?;
        for p in &self.points {
            writeln!(w, "{},{},{}", p.threshold, p.precision, p.recall)?;
        }
        Ok(())
    }
}

/// Offsets of the (2t+1)^2 window ordered by Chebyshev ring, nearest first;
/// row-major within a ring. Fixed order keeps greedy matching deterministic.
fn ring_offsets(tolerance: u32) -> Vec<(i64, i64)> {
    let t = tolerance as i64;
    let mut offsets = Vec::new();
    for ring in 0..=t {
        for dy in -ring..=ring {
            for dx in -ring..=ring {
                if dx.abs().max(dy.abs()) == ring {
                    offsets.push((dx, dy));
                }
            }
        }
    }
    offsets
}

fn counts_exact(pred: &[bool], gt: &[bool]) -> (usize, usize, usize) {
    let mut tp = 0;
    let mut fp = 0;
    let mut fne = 0;
    for (&p, &g) in pred.iter().zip(gt) {
        match (p, g) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fne += 1,
            _ => {}
        }
    }
    (tp, fp, fne)
}

/// Greedy one-to-one matching of predicted pixels to ground-truth pixels
/// within a Chebyshev tolerance. Predictions are visited in row-major order
/// and claim the nearest unclaimed truth pixel.
fn counts_tolerant(
    dims: crate::grid::GridDims,
    pred: &[bool],
    gt: &[bool],
    offsets: &[(i64, i64)],
) -> (usize, usize, usize) {
    let mut claimed = vec![false; gt.len()];
    let mut tp = 0;
    let mut fp = 0;
    for (k, &predicted) in pred.iter().enumerate() {
        if !predicted {
            continue;
        }
        let (x, y) = dims.coords_of(k);
        let mut matched = false;
        for &(dx, dy) in offsets {
            let (nx, ny) = (x as i64 + dx, y as i64 + dy);
            if !dims.contains(nx, ny) {
                continue;
            }
            let j = dims.index_of(nx as u32, ny as u32);
            if gt[j] && !claimed[j] {
                claimed[j] = true;
                matched = true;
                break;
            }
        }
        if matched {
            tp += 1;
        } else {
            fp += 1;
        }
    }
    let fne = gt.iter().zip(&claimed).filter(|(&g, &c)| g && !c).count();
    (tp, fp, fne)
}

/// Threshold sweep over the score range producing one precision/recall point
/// per threshold.
pub fn binary_pr(
    scores: &ScalarField,
    gt: &GroundTruth,
    n_thresholds: usize,
    match_tolerance_px: u32,
) -> Result<PrCurve> {
    if scores.dims() != gt.mask.dims() {
        return Err(SunnError::ShapeMismatch(
            "score map dims differ from the ground truth".into(),
        ));
    }
    if n_thresholds < 2 {
        return Err(SunnError::InvalidInput("n_thresholds must be >= 2".into()));
    }
    let gt_count = gt.mask.count_true();
    if gt_count == 0 {
        return Err(SunnError::EmptyGroundTruth);
    }

    let (lo, hi) = scores.min_max();
    let (lo, hi) = if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, lo + 0.5)
    };
    let offsets = match gt.kind {
        GroundTruthKind::EdgePixels => ring_offsets(match_tolerance_px),
        GroundTruthKind::ObjectMask => Vec::new(),
    };

    let dims = scores.dims();
    let gt_values = gt.mask.values();
    let mut points = Vec::with_capacity(n_thresholds);
    for i in 0..n_thresholds {
        let t = lo + (hi - lo) * i as f64 / (n_thresholds - 1) as f64;
        let pred: Vec<bool> = scores.values().iter().map(|&v| v >= t).collect();
        let (tp, fp, _) = match gt.kind {
            GroundTruthKind::ObjectMask => counts_exact(&pred, gt_values),
            GroundTruthKind::EdgePixels => counts_tolerant(dims, &pred, gt_values, &offsets),
        };
        let predicted = tp + fp;
        let empty_prediction = predicted == 0;
        let precision = if empty_prediction {
            1.0
        } else {
            tp as f64 / predicted as f64
        };
        let recall = tp as f64 / gt_count as f64;
        points.push(PrPoint {
            threshold: t,
            precision,
            recall,
            empty_prediction,
        });
    }
    Ok(PrCurve { points })
}

/// Intersection over union of two masks; 1 when both are empty.
pub fn iou(a: &Mask, b: &Mask) -> Result<f64> {
    if a.dims() != b.dims() {
        return Err(SunnError::ShapeMismatch("mask dims differ".into()));
    }
    let mut inter = 0usize;
    let mut union = 0usize;
    for (&x, &y) in a.values().iter().zip(b.values()) {
        if x && y {
            inter += 1;
        }
        if x || y {
            union += 1;
        }
    }
    if union == 0 {
        Ok(1.0)
    } else {
        Ok(inter as f64 / union as f64)
    }
}

/// Noise applied to the weight field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseModel {
    /// `phi' = clamp(phi * (1 + u), 0, 1)` with `u ~ U[-f, +f]`.
    Multiplicative,
    /// `phi' = clamp(phi + u, 0, 1)` with `u ~ U[-f, +f]`.
    Additive,
}

/// Multiplicative uniform noise on every connection weight, seeded.
pub fn perturb_weights(
    weights: &WeightField,
    noise_fraction: f64,
    seed: u64,
) -> Result<WeightField> {
    perturb_weights_model(weights, noise_fraction, seed, NoiseModel::Multiplicative)
}

pub fn perturb_weights_model(
    weights: &WeightField,
    noise_fraction: f64,
    seed: u64,
    model: NoiseModel,
) -> Result<WeightField> {
    if !(0.0..=1.0).contains(&noise_fraction) {
        return Err(SunnError::InvalidConfig(format!(
            "noise_fraction must be in [0, 1], got {noise_fraction}"
        )));
    }
    let mut out = weights.clone();
    if noise_fraction == 0.0 {
        return Ok(out);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for w in out.values_mut() {
        let u: f64 = rng.gen::<f64>() * 2.0 * noise_fraction - noise_fraction;
        let perturbed = match model {
            NoiseModel::Multiplicative => *w * (1.0 + u),
            NoiseModel::Additive => *w + u,
        };
        *w = perturbed.clamp(0.0, 1.0);
    }
    Ok(out)
}

/// Clean-versus-noisy popout comparison.
#[derive(Debug, Clone)]
pub struct RobustnessOutcome {
    pub clean_mask: Mask,
    pub noisy_mask: Mask,
    pub iou: f64,
}

/// Runs the full pipeline twice, once with clean weights and once with
/// perturbed weights, and compares the top-level popout masks.
pub fn robustness_experiment(
    signals: &SignalField,
    config: &AnalysisConfig,
    noise_fraction: f64,
    seed: u64,
) -> Result<RobustnessOutcome> {
    let clean = run_analysis(signals, config, &[Stage::Popout])?;
    let clean_mask = top_level_mask(&clean)?;

    let topology = crate::topology::build_random_topology(signals.dims(), &config.topology)?;
    let weights = compute_weights(signals, &topology, &config.gaussian)?;
    let noisy_weights = perturb_weights(&weights, noise_fraction, seed)?;
    let noisy = crate::pipeline::run_analysis_with_weights(
        signals,
        config,
        &[Stage::Popout],
        &topology,
        &noisy_weights,
    )?;
    let noisy_mask = top_level_mask(&noisy)?;

    let overlap = iou(&clean_mask, &noisy_mask)?;
    Ok(RobustnessOutcome {
        clean_mask,
        noisy_mask,
        iou: overlap,
    })
}

fn top_level_mask(outputs: &crate::pipeline::AnalysisOutputs) -> Result<Mask> {
    outputs
        .popout
        .as_ref()
        .and_then(|p| p.masks.first().cloned())
        .ok_or_else(|| SunnError::InvalidInput("pipeline produced no popout mask".into()))
}
