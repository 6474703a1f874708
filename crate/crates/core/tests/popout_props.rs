//! Popout invariants: nesting, threshold monotonicity, bilayer partition,
//! and the two-level histogram shape.

use proptest::prelude::*;
use sunn_core::popout::{
    bilayer_segment, center_fusion, find_thresholds, popout_components, pr_histogram, ThresholdSet,
};
use sunn_core::{GridDims, Mask, ScalarField};
use sunn_testkit::fixtures;

fn field_from(values: Vec<f64>, width: u32) -> ScalarField {
    let dims = GridDims::new(width, values.len() as u32 / width).unwrap();
    ScalarField::new(dims, values).unwrap()
}

/// Brute-force peak count of a smoothed histogram: maxima of plateau runs.
fn count_peaks(smoothed: &[f64]) -> usize {
    let mut peaks = 0;
    let mut i = 0;
    while i < smoothed.len() {
        let mut j = i;
        while j + 1 < smoothed.len() && smoothed[j + 1] == smoothed[i] {
            j += 1;
        }
        let rises = i == 0 || smoothed[i - 1] < smoothed[i];
        let falls = j == smoothed.len() - 1 || smoothed[j + 1] < smoothed[i];
        if rises && falls && smoothed[i] > 0.0 {
            peaks += 1;
        }
        i = j + 1;
    }
    peaks
}

#[test]
fn two_level_residue_field_has_a_bimodal_histogram() {
    // Square-popout style field: low background cluster, high object cluster,
    // each with a little spread.
    let dims = 32u32;
    let mut values = Vec::with_capacity((dims * dims) as usize);
    for k in 0..(dims * dims) as usize {
        let (x, y) = (k as u32 % dims, k as u32 / dims);
        let inside = (10..22).contains(&x) && (10..22).contains(&y);
        let jitter = 0.02 * ((k % 7) as f64 / 7.0 - 0.5);
        values.push(if inside { 0.95 + jitter } else { 0.05 + jitter });
    }
    let field = field_from(values, dims);
    let hist = pr_histogram(&field, 64).unwrap();
    assert_eq!(count_peaks(&hist.smoothed()), 2);

    let thresholds = find_thresholds(&hist, 1).unwrap();
    assert_eq!(thresholds.len(), 1);
    let t = thresholds.values()[0];
    assert!(t > 0.1 && t < 0.9);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn masks_nest_for_any_field_and_levels(
        seed in any::<u64>(),
        max_levels in 1usize..5,
    ) {
        let field = fixtures::random_signal(12, 12, seed);
        let residues = field.channel(0).unwrap();
        let hist = pr_histogram(&residues, 32).unwrap();
        let thresholds = find_thresholds(&hist, max_levels).unwrap();
        let out = popout_components(&residues, &thresholds);
        for pair in out.masks.windows(2) {
            prop_assert!(pair[1].is_subset_of(&pair[0]));
        }
    }

    #[test]
    fn raising_a_threshold_never_adds_pixels(
        seed in any::<u64>(),
        t in 0.1f64..0.8,
        bump in 0.01f64..0.2,
    ) {
        let field = fixtures::random_signal(10, 10, seed);
        let residues = field.channel(0).unwrap();
        let loose = popout_components(&residues, &ThresholdSet::new(vec![t]).unwrap());
        let tight = popout_components(&residues, &ThresholdSet::new(vec![t + bump]).unwrap());
        prop_assert!(tight.masks[0].is_subset_of(&loose.masks[0]));
    }

    #[test]
    fn bilayer_is_a_partition(seed in any::<u64>()) {
        let field = fixtures::random_signal(9, 9, seed);
        let residues = field.channel(0).unwrap();
        let seg = bilayer_segment(&residues, 32).unwrap();
        for k in 0..residues.values().len() {
            prop_assert!(seg.foreground.values()[k] != seg.background.values()[k]);
        }
    }

    #[test]
    fn center_fusion_is_bounded_and_keeps_the_argmax_at_zero_strength(
        seed in any::<u64>(),
    ) {
        let field = fixtures::random_signal(11, 7, seed);
        let residues = field.channel(0).unwrap();
        let fused = center_fusion(&residues, 0.0).unwrap();
        prop_assert!(fused.values().iter().all(|&v| (0.0..=1.0).contains(&v)));

        let argmax = |values: &[f64]| {
            values
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .map(|(i, _)| i)
                .unwrap()
        };
        prop_assert_eq!(
            argmax(fused.values()),
            argmax(residues.normalized().values())
        );

        let attenuated = center_fusion(&residues, 2.5).unwrap();
        prop_assert!(attenuated.values().iter().all(|&v| (0.0..=1.0).contains(&v)));
    }
}

#[test]
fn nested_masks_on_one_hundred_random_fields() {
    let mut violations = 0usize;
    for seed in 0..100u64 {
        let field = fixtures::random_signal(16, 16, 4000 + seed);
        let residues = field.channel(0).unwrap();
        let hist = pr_histogram(&residues, 64).unwrap();
        let thresholds = find_thresholds(&hist, 3).unwrap();
        let out = popout_components(&residues, &thresholds);
        for pair in out.masks.windows(2) {
            if !pair[1].is_subset_of(&pair[0]) {
                violations += 1;
            }
        }
    }
    assert_eq!(violations, 0);
}

#[test]
fn bilayer_recovers_ink_strokes_from_parchment() {
    let (signals, strokes) = fixtures::parchment_scene(64, 5);
    let mut config = sunn_core::AnalysisConfig::default();
    config.topology.seed = 9;
    config.leak.ground_conductance = 40.0;
    config.leak.max_iterations = 400;
    let out = sunn_core::run_analysis(&signals, &config, &[sunn_core::Stage::Bilayer]).unwrap();
    let seg = out.bilayer.unwrap();

    let stroke_count = strokes.count_true();
    let recovered = seg
        .foreground
        .values()
        .iter()
        .zip(strokes.values())
        .filter(|(&f, &s)| f && s)
        .count();
    let recall = recovered as f64 / stroke_count as f64;
    assert!(recall >= 0.9, "stroke recall {recall:.3}");
}

#[test]
fn mean_fallback_mask_partitions_around_the_mean() {
    let dims = GridDims::new(4, 1).unwrap();
    let residues = ScalarField::new(dims, vec![0.2, 0.2, 0.2, 1.0]).unwrap();
    let out = popout_components(&residues, &ThresholdSet::empty());
    assert!(out.mean_fallback);
    assert_eq!(out.masks[0].values(), &[false, false, false, true]);
    let empty = Mask::filled(dims, false);
    assert!(empty.is_subset_of(&out.masks[0]));
}
