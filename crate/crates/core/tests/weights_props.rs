//! Kernel properties and window-level oracles for the connectivity and edge
//! maps.

use proptest::prelude::*;
use sunn_core::{
    build_random_topology, compute_weights, connectivity_map, edge_map, GaussianParams, GridDims,
    RandomTopology, SignalField, TopologyConfig,
};
use sunn_testkit::fixtures;

/// Weight between two scalar signals through a minimal two-neuron net.
fn pair_weight(a: f64, b: f64, sigma: f64) -> f64 {
    let dims = GridDims::new(2, 1).unwrap();
    let topo = RandomTopology::from_neighbor_lists(
        dims,
        &[vec![1], vec![0]],
        TopologyConfig::with_radius(1),
    )
    .unwrap();
    let signals = SignalField::new(dims, 1, vec![a, b]).unwrap();
    let w = compute_weights(&signals, &topo, &GaussianParams::with_sigma(sigma)).unwrap();
    w.weights(0)[0]
}

proptest! {
    #[test]
    fn weights_are_bounded_and_symmetric(
        a in 0.0f64..=1.0,
        b in 0.0f64..=1.0,
        sigma in 0.01f64..1.0,
    ) {
        let w_ab = pair_weight(a, b, sigma);
        let w_ba = pair_weight(b, a, sigma);
        prop_assert!((0.0..=1.0).contains(&w_ab));
        prop_assert_eq!(w_ab, w_ba);
    }

    #[test]
    fn weight_decreases_with_distance_and_grows_with_sigma(
        a in 0.0f64..=0.4,
        d1 in 0.01f64..0.3,
        extra in 0.05f64..0.3,
        sigma in 0.02f64..0.5,
    ) {
        let near = pair_weight(a, a + d1, sigma);
        let far = pair_weight(a, a + d1 + extra, sigma);
        prop_assert!(far < near, "far {far} >= near {near}");

        let wide = pair_weight(a, a + d1, 2.0 * sigma);
        prop_assert!(wide >= near, "doubling sigma lowered the weight");
    }

    #[test]
    fn random_fields_stay_in_unit_interval(seed in any::<u64>()) {
        let signals = fixtures::random_signal(8, 8, seed);
        let cfg = TopologyConfig { seed, ..TopologyConfig::with_radius(2) };
        let topo = build_random_topology(signals.dims(), &cfg).unwrap();
        let w = compute_weights(&signals, &topo, &GaussianParams::default()).unwrap();
        prop_assert!(w.values().iter().all(|&v| (0.0..=1.0).contains(&v)));
    }
}

#[test]
fn checkerboard_connectivity_matches_window_count() {
    // Brute-force oracle: on a unit checkerboard, the same-color fraction of
    // the full (2R+1)^2 - 1 window.
    let radius = 5i64;
    let mut same = 0usize;
    let mut total = 0usize;
    for dy in -radius..=radius {
        for dx in -radius..=radius {
            if dx == 0 && dy == 0 {
                continue;
            }
            total += 1;
            if (dx + dy).rem_euclid(2) == 0 {
                same += 1;
            }
        }
    }
    let window_fraction = same as f64 / total as f64;

    let signals = fixtures::checkerboard(40, 0.2, 0.8);
    let cfg = TopologyConfig {
        seed: 8,
        ..TopologyConfig::with_radius(5)
    };
    let topo = build_random_topology(signals.dims(), &cfg).unwrap();
    // Small sigma: different-color weights vanish, same-color weights are 1.
    let w = compute_weights(&signals, &topo, &GaussianParams::with_sigma(0.05)).unwrap();
    let cmap = connectivity_map(&w);

    let dims = signals.dims();
    let mut acc = 0.0;
    let mut count = 0usize;
    for k in 0..dims.len() {
        let (x, y) = dims.coords_of(k);
        if x < 5 || y < 5 || x >= dims.width - 5 || y >= dims.height - 5 {
            continue;
        }
        let phi = cmap.field.values()[k];
        assert!(
            (phi - window_fraction).abs() < 0.25,
            "neuron ({x},{y}) connectivity {phi} far from {window_fraction}"
        );
        acc += phi;
        count += 1;
    }
    let mean = acc / count as f64;
    assert!(
        (mean - window_fraction).abs() < 0.02,
        "interior mean {mean} vs window fraction {window_fraction}"
    );
}

#[test]
fn edge_response_is_confined_to_the_boundary_band() {
    let (signals, square) = fixtures::square_scene(48, 0.1, 0.9, 14, 34);
    let boundary = fixtures::region_boundary(&square);
    let radius = 5u32;
    let cfg = TopologyConfig {
        seed: 15,
        ..TopologyConfig::with_radius(radius)
    };
    let topo = build_random_topology(signals.dims(), &cfg).unwrap();
    let w = compute_weights(&signals, &topo, &GaussianParams::default()).unwrap();
    let edges = edge_map(&connectivity_map(&w));

    let dims = signals.dims();
    let boundary_indices: Vec<usize> = (0..dims.len()).filter(|&k| boundary.values()[k]).collect();
    let mut peak_near_boundary: f64 = 0.0;
    for k in 0..dims.len() {
        let distance = boundary_indices
            .iter()
            .map(|&b| dims.chebyshev(k, b))
            .min()
            .unwrap();
        let e = edges.values()[k];
        if distance > radius {
            // Interior pixels see only same-region neighbors.
            assert!(e < 1e-9, "pixel {k} at distance {distance} has edge {e}");
        } else {
            peak_near_boundary = peak_near_boundary.max(e);
        }
    }
    assert!(peak_near_boundary > 0.2);
}
