//! Synthetic scenes with known structure.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sunn_core::{GridDims, Mask, SignalField};

/// A bright axis-aligned square on a uniform dark ground. Returns the scene
/// and the true square mask. The default desk-scale instance is
/// `square_scene(64, 0.1, 0.9, 20, 44)`: contrast 0.8 on a 64x64 grid.
pub fn square_scene(
    side: u32,
    background: f64,
    foreground: f64,
    lo: u32,
    hi: u32,
) -> (SignalField, Mask) {
    let dims = GridDims::new(side, side).unwrap();
    let mut values = vec![background; dims.len()];
    let mut mask = vec![false; dims.len()];
    for y in lo..hi {
        for x in lo..hi {
            let k = dims.index_of(x, y);
            values[k] = foreground;
            mask[k] = true;
        }
    }
    (
        SignalField::new(dims, 1, values).unwrap(),
        Mask::new(dims, mask).unwrap(),
    )
}

/// Pixels adjacent (4-connectivity) to the other region, marked on both
/// sides of the interface.
pub fn region_boundary(mask: &Mask) -> Mask {
    let dims = mask.dims();
    let mut boundary = vec![false; dims.len()];
    for (k, slot) in boundary.iter_mut().enumerate() {
        let (x, y) = dims.coords_of(k);
        for (dx, dy) in [(1i64, 0i64), (-1, 0), (0, 1), (0, -1)] {
            let (nx, ny) = (x as i64 + dx, y as i64 + dy);
            if dims.contains(nx, ny) && mask.get(nx as u32, ny as u32) != mask.values()[k] {
                *slot = true;
                break;
            }
        }
    }
    Mask::new(dims, boundary).unwrap()
}

/// Unit checkerboard of two gray levels.
pub fn checkerboard(side: u32, low: f64, high: f64) -> SignalField {
    let dims = GridDims::new(side, side).unwrap();
    let values = (0..dims.len())
        .map(|k| {
            let (x, y) = dims.coords_of(k);
            if (x + y) % 2 == 0 {
                low
            } else {
                high
            }
        })
        .collect();
    SignalField::new(dims, 1, values).unwrap()
}

/// Constant scene.
pub fn constant(side: u32, value: f64) -> SignalField {
    let dims = GridDims::new(side, side).unwrap();
    SignalField::new(dims, 1, vec![value; dims.len()]).unwrap()
}

/// Uniform random grayscale signals in [0, 1].
pub fn random_signal(width: u32, height: u32, seed: u64) -> SignalField {
    let dims = GridDims::new(width, height).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..dims.len()).map(|_| rng.gen::<f64>()).collect();
    SignalField::new(dims, 1, values).unwrap()
}

/// Dark ink strokes on a mottled bright parchment. Strokes are three pixels
/// wide so every stroke pixel keeps similar neighbors in its window. Returns
/// the scene and the true stroke mask.
pub fn parchment_scene(side: u32, seed: u64) -> (SignalField, Mask) {
    let dims = GridDims::new(side, side).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Low-amplitude mottle keeps the parchment well connected.
    let mut values: Vec<f64> = (0..dims.len())
        .map(|_| 0.78 + 0.04 * (rng.gen::<f64>() - 0.5))
        .collect();
    let mut stroke = vec![false; dims.len()];

    let mut draw = |x: u32, y: u32| {
        if x < side && y < side {
            let k = dims.index_of(x, y);
            values[k] = 0.15;
            stroke[k] = true;
        }
    };
    let q = side / 4;
    // Two horizontal bars, one vertical bar, one diagonal, all 3 px thick.
    for t in 0..3u32 {
        for x in q..(3 * q) {
            draw(x, q + t);
            draw(x, 2 * q + t);
        }
        for y in q..(3 * q + 3) {
            draw(q + t, y);
        }
        for d in 0..(q + q / 2) {
            draw(2 * q + d, q + 4 + d + t);
        }
    }

    (
        SignalField::new(dims, 1, values).unwrap(),
        Mask::new(dims, stroke).unwrap(),
    )
}
