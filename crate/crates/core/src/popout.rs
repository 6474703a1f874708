//! Object popout from the potential-residue map.
//!
//! The residue histogram is scanned for valleys between smoothed peaks; each
//! valley becomes a threshold and successive thresholding yields nested masks
//! from the loosest component to the innermost one. When no valley exists the
//! thresholds fall back to multi-level between-class-variance splitting.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SunnError};
use crate::field::{Mask, ScalarField};

/// Uniform-bin histogram over the observed residue range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub min: f64,
    pub max: f64,
    pub counts: Vec<u64>,
    /// Set when the source field was constant and the range is artificial.
    pub degenerate: bool,
}

impl Histogram {
    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn bin_width(&self) -> f64 {
        (self.max - self.min) / self.bins() as f64
    }

    pub fn bin_center(&self, i: usize) -> f64 {
        self.min + (i as f64 + 0.5) * self.bin_width()
    }

    /// Bin edges, strictly increasing, length `bins + 1`.
    pub fn edges(&self) -> Vec<f64> {
        let w = self.bin_width();
        (0..=self.bins()).map(|i| self.min + i as f64 * w).collect()
    }

    /// Counts after a width-3 moving average (window clipped at the ends).
    pub fn smoothed(&self) -> Vec<f64> {
        let n = self.bins();
        (0..n)
            .map(|i| {
                let lo = i.saturating_sub(1);
                let hi = (i + 1).min(n - 1);
                let sum: u64 = self.counts[lo..=hi].iter().sum();
                sum as f64 / (hi - lo + 1) as f64
            })
            .collect()
    }
}

/// Histogram of a residue field with `bins` uniform bins.
pub fn pr_histogram(residues: &ScalarField, bins: usize) -> Result<Histogram> {
    if bins < 2 {
        return Err(SunnError::InvalidInput("bins must be >= 2".into()));
    }
    let (lo, hi) = residues.min_max();
    if !lo.is_finite() || !hi.is_finite() {
        return Err(SunnError::InvalidInput("non-finite residue".into()));
    }
    // Degenerate when the range is zero or too small for distinct bin edges.
    let degenerate = hi <= lo || lo + (hi - lo) / bins as f64 == lo;
    // A constant field still gets a valid, strictly increasing bin grid.
    let (min, max) = if degenerate { (lo, lo + 1.0) } else { (lo, hi) };
    let span = max - min;
    let mut counts = vec![0u64; bins];
    for &v in residues.values() {
        let idx = (((v - min) / span) * bins as f64) as usize;
        counts[idx.min(bins - 1)] += 1;
    }
    Ok(Histogram {
        min,
        max,
        counts,
        degenerate,
    })
}

/// Strictly increasing residue thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSet {
    values: Vec<f64>,
}

impl ThresholdSet {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        for pair in values.windows(2) {
            if pair[1] <= pair[0] {
                return Err(SunnError::InvalidInput(
                    "thresholds must be strictly increasing".into(),
                ));
            }
        }
        Ok(ThresholdSet { values })
    }

    pub fn empty() -> Self {
        ThresholdSet { values: Vec::new() }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }
}

/// Index ranges of local maxima of a smoothed histogram; plateaus count once
/// at their center.
fn peak_indices(smoothed: &[f64]) -> Vec<usize> {
    let n = smoothed.len();
    let mut peaks = Vec::new();
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && smoothed[j + 1] == smoothed[i] {
            j += 1;
        }
        let rises = i == 0 || smoothed[i - 1] < smoothed[i];
        let falls = j == n - 1 || smoothed[j + 1] < smoothed[i];
        if rises && falls && smoothed[i] > 0.0 {
            peaks.push((i + j) / 2);
        }
        i = j + 1;
    }
    peaks
}

/// Deepest valley (bin index and depth) strictly between two adjacent peaks.
/// Depth is measured against the highest peak on each side of the valley, so
/// a thinly spread cluster does not shadow the separation from a dominant
/// mode. A flat run of minimal bins resolves to its median index, centering
/// the threshold between the modes.
fn valley_between(
    smoothed: &[f64],
    left: usize,
    right: usize,
    left_max: f64,
    right_max: f64,
) -> Option<(usize, f64)> {
    if right <= left + 1 {
        return None;
    }
    let min = smoothed[left + 1..right]
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let minimal: Vec<usize> = (left + 1..right).filter(|&i| smoothed[i] == min).collect();
    let best = minimal[minimal.len() / 2];
    let depth = left_max.min(right_max) - min;
    (depth > 0.0).then_some((best, depth))
}

/// Multi-level between-class-variance split: picks `levels` bin boundaries
/// maximizing the weighted variance between the resulting classes.
fn multi_otsu(hist: &Histogram, levels: usize) -> Vec<f64> {
    let bins = hist.bins();
    let total: u64 = hist.counts.iter().sum();
    if total == 0 || levels == 0 {
        return Vec::new();
    }
    let levels = levels.min(bins - 1);

    // Prefix sums of probability mass and mass-weighted bin centers.
    let mut p = vec![0.0f64; bins + 1];
    let mut pc = vec![0.0f64; bins + 1];
    for i in 0..bins {
        let prob = hist.counts[i] as f64 / total as f64;
        p[i + 1] = p[i] + prob;
        pc[i + 1] = pc[i] + prob * hist.bin_center(i);
    }
    // Between-class contribution of bins [a, b).
    let class_score = |a: usize, b: usize| -> f64 {
        let w = p[b] - p[a];
        if w <= 0.0 {
            return 0.0;
        }
        let mean = (pc[b] - pc[a]) / w;
        w * mean * mean
    };

    // Enumerate strictly increasing cut positions 1..bins.
    struct Search<'a> {
        bins: usize,
        class_score: &'a dyn Fn(usize, usize) -> f64,
        cuts: Vec<usize>,
        best_score: f64,
        best_cuts: Vec<usize>,
    }
    impl Search<'_> {
        fn recurse(&mut self, depth: usize, start: usize, score_prefix: f64) {
            let levels = self.cuts.len();
            if depth == levels {
                let last = if levels == 0 {
                    0
                } else {
                    self.cuts[levels - 1]
                };
                let score = score_prefix + (self.class_score)(last, self.bins);
                if score > self.best_score {
                    self.best_score = score;
                    self.best_cuts = self.cuts.clone();
                }
                return;
            }
            let remaining = levels - depth - 1;
            for c in start..self.bins - remaining {
                self.cuts[depth] = c;
                let prev = if depth == 0 { 0 } else { self.cuts[depth - 1] };
                let score = score_prefix + (self.class_score)(prev, c);
                self.recurse(depth + 1, c + 1, score);
            }
        }
    }
    let mut search = Search {
        bins,
        class_score: &class_score,
        cuts: vec![0usize; levels],
        best_score: f64::NEG_INFINITY,
        best_cuts: Vec::new(),
    };
    search.recurse(0, 1, 0.0);

    search
        .best_cuts
        .into_iter()
        .map(|c| hist.min + c as f64 * hist.bin_width())
        .collect()
}

/// Finds up to `max_levels` thresholds at the deepest histogram valleys,
/// falling back to between-class-variance splitting when no valley exists.
/// A degenerate histogram yields an empty set.
pub fn find_thresholds(hist: &Histogram, max_levels: usize) -> Result<ThresholdSet> {
    if max_levels < 1 {
        return Err(SunnError::InvalidInput("max_levels must be >= 1".into()));
    }
    if hist.degenerate {
        return Ok(ThresholdSet::empty());
    }

    let smoothed = hist.smoothed();
    let peaks = peak_indices(&smoothed);
    // Running maxima of peak heights from each side.
    let mut left_max = Vec::with_capacity(peaks.len());
    let mut acc = f64::NEG_INFINITY;
    for &p in &peaks {
        acc = acc.max(smoothed[p]);
        left_max.push(acc);
    }
    let mut right_max = vec![f64::NEG_INFINITY; peaks.len()];
    acc = f64::NEG_INFINITY;
    for (i, &p) in peaks.iter().enumerate().rev() {
        acc = acc.max(smoothed[p]);
        right_max[i] = acc;
    }
    let mut valleys: Vec<(usize, f64)> = peaks
        .windows(2)
        .enumerate()
        .filter_map(|(i, pair)| {
            valley_between(&smoothed, pair[0], pair[1], left_max[i], right_max[i + 1])
        })
        .collect();

    if valleys.is_empty() {
        return ThresholdSet::new(multi_otsu(hist, max_levels));
    }

    valleys.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    valleys.truncate(max_levels);
    let mut values: Vec<f64> = valleys
        .into_iter()
        .map(|(i, _)| hist.bin_center(i))
        .collect();
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    values.dedup();
    ThresholdSet::new(values)
}

/// Nested popout masks, loosest first.
#[derive(Debug, Clone)]
pub struct PopoutMasks {
    pub masks: Vec<Mask>,
    /// Set when the threshold set was empty and a single above-the-mean mask
    /// was substituted.
    pub mean_fallback: bool,
}

/// Thresholds a residue field at each level: `mask_j = { residue >= t_j }`.
/// With an empty threshold set the single fallback mask keeps pixels strictly
/// above the field mean.
pub fn popout_components(residues: &ScalarField, thresholds: &ThresholdSet) -> PopoutMasks {
    if thresholds.is_empty() {
        let mean = residues.total() / residues.values().len() as f64;
        let values = residues.values().iter().map(|&v| v > mean).collect();
        return PopoutMasks {
            masks: vec![Mask::new(residues.dims(), values).expect("same length")],
            mean_fallback: true,
        };
    }
    let masks = thresholds
        .values()
        .iter()
        .map(|&t| Mask::from_threshold(residues, t))
        .collect();
    PopoutMasks {
        masks,
        mean_fallback: false,
    }
}

/// Foreground/background split of a residue field.
#[derive(Debug, Clone)]
pub struct BilayerSegmentation {
    pub foreground: Mask,
    pub background: Mask,
    /// `None` when the field was degenerate and everything is background.
    pub threshold: Option<f64>,
}

/// Splits the field at a single histogram-derived threshold; foreground is
/// the high-residue side.
pub fn bilayer_segment(residues: &ScalarField, bins: usize) -> Result<BilayerSegmentation> {
    let hist = pr_histogram(residues, bins)?;
    let thresholds = find_thresholds(&hist, 1)?;
    match thresholds.values().first() {
        Some(&t) => {
            let foreground = Mask::from_threshold(residues, t);
            let background = foreground.complement();
            Ok(BilayerSegmentation {
                foreground,
                background,
                threshold: Some(t),
            })
        }
        None => Ok(BilayerSegmentation {
            foreground: Mask::filled(residues.dims(), false),
            background: Mask::filled(residues.dims(), true),
            threshold: None,
        }),
    }
}

/// Saliency map: min-max normalized residue attenuated by a radial center
/// prior, `S = PR_norm * exp(-strength * r^2)` with `r` the distance to the
/// image center over the half-diagonal.
pub fn center_fusion(residues: &ScalarField, strength: f64) -> Result<ScalarField> {
    if !strength.is_finite() || strength < 0.0 {
        return Err(SunnError::InvalidConfig(format!(
            "center strength must be >= 0, got {strength}"
        )));
    }
    let dims = residues.dims();
    let normalized = residues.normalized();
    let cx = (dims.width as f64 - 1.0) / 2.0;
    let cy = (dims.height as f64 - 1.0) / 2.0;
    let half_diag = (cx * cx + cy * cy).sqrt();
    let values = normalized
        .values()
        .iter()
        .enumerate()
        .map(|(k, &v)| {
            let (x, y) = dims.coords_of(k);
            let r = if half_diag > 0.0 {
                let dx = x as f64 - cx;
                let dy = y as f64 - cy;
                (dx * dx + dy * dy).sqrt() / half_diag
            } else {
                0.0
            };
            v * (-strength * r * r).exp()
        })
        .collect();
    ScalarField::new(dims, values)
}

/// Removes 8-connected components smaller than `min_area` pixels.
pub fn filter_small_components(mask: &Mask, min_area: usize) -> Mask {
    let dims = mask.dims();
    let n = dims.len();
    let mut keep = vec![false; n];
    let mut visited = vec![false; n];
    let mut stack = Vec::new();
    let mut component = Vec::new();

    for start in 0..n {
        if visited[start] || !mask.values()[start] {
            continue;
        }
        component.clear();
        stack.push(start);
        visited[start] = true;
        while let Some(k) = stack.pop() {
            component.push(k);
            let (x, y) = dims.coords_of(k);
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                    if !dims.contains(nx, ny) {
                        continue;
                    }
                    let j = dims.index_of(nx as u32, ny as u32);
                    if !visited[j] && mask.values()[j] {
                        visited[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        if component.len() >= min_area {
            for &k in &component {
                keep[k] = true;
            }
        }
    }
    Mask::new(dims, keep).expect("same length")
}
