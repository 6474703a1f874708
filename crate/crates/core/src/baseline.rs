//! Classic gradient-magnitude edge baselines for the CLI comparison mode.

use crate::error::Result;
use crate::field::ScalarField;

fn gradient_magnitude(input: &ScalarField, kx: &[[f64; 3]; 3], ky: &[[f64; 3]; 3]) -> ScalarField {
    let dims = input.dims();
    let (w, h) = (dims.width as i64, dims.height as i64);
    let sample = |x: i64, y: i64| -> f64 {
        let cx = x.clamp(0, w - 1) as u32;
        let cy = y.clamp(0, h - 1) as u32;
        input.get(cx, cy)
    };
    let mut values = vec![0.0f64; dims.len()];
    for y in 0..h {
        for x in 0..w {
            let mut gx = 0.0;
            let mut gy = 0.0;
            for (j, row) in kx.iter().enumerate() {
                for (i, &cx) in row.iter().enumerate() {
                    let v = sample(x + i as i64 - 1, y + j as i64 - 1);
                    gx += cx * v;
                    gy += ky[j][i] * v;
                }
            }
            values[dims.index_of(x as u32, y as u32)] = (gx * gx + gy * gy).sqrt();
        }
    }
    ScalarField::new(dims, values).expect("same length")
}

/// Sobel gradient magnitude with replicated borders.
pub fn sobel_magnitude(input: &ScalarField) -> Result<ScalarField> {
    let kx = [[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]];
    let ky = [[-1.0, -2.0, -1.0], [0.0, 0.0, 0.0], [1.0, 2.0, 1.0]];
    Ok(gradient_magnitude(input, &kx, &ky))
}

/// Prewitt gradient magnitude with replicated borders.
pub fn prewitt_magnitude(input: &ScalarField) -> Result<ScalarField> {
    let kx = [[-1.0, 0.0, 1.0], [-1.0, 0.0, 1.0], [-1.0, 0.0, 1.0]];
    let ky = [[-1.0, -1.0, -1.0], [0.0, 0.0, 0.0], [1.0, 1.0, 1.0]];
    Ok(gradient_magnitude(input, &kx, &ky))
}
