use std::f64::consts::{PI, SQRT_2};

use crate::curves::{Curve, Grid};

/// `{1, √2 cos 2πt, √2 sin 2πt, √2 cos 4πt, ...}` truncated to `b` elements.
pub fn fourier_basis(grid: Grid, b: usize) -> Vec<Curve> {
    (0..b)
        .map(|j| {
            let freq = j.div_ceil(2);
            let omega = 2.0 * PI * freq as f64;
            let values = grid
                .points()
                .into_iter()
                .map(|t| match (j, j % 2) {
                    (0, _) => 1.0,
                    (_, 1) => SQRT_2 * (omega * t).cos(),
                    _ => SQRT_2 * (omega * t).sin(),
                })
                .collect();
            Curve::new(grid, values).expect("basis values are finite")
        })
        .collect()
}
