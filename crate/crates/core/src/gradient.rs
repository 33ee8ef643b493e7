//! Central-difference derivatives along 0°, 45°, 90° and 135°.
//!
//! The kernels are applied as a true convolution (kernel flipped). With rows
//! counted downwards this gives, at `(x, row)`:
//!
//! ```text
//! ∇0   = I(x,   row+1) - I(x,   row-1)
//! ∇45  = I(x+1, row+1) - I(x-1, row-1)
//! ∇90  = I(x+1, row)   - I(x-1, row)
//! ∇135 = I(x+1, row-1) - I(x-1, row+1)
//! ```
//!
//! The outer one-pixel ring has no value (NaN).

use crate::direction::Quadrant;
use crate::image::GrayImage;

#[derive(Debug, Clone)]
pub struct GradientStack {
    width: usize,
    height: usize,
    planes: [Vec<f64>; 4],
}

impl GradientStack {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn plane(&self, q: Quadrant) -> &[f64] {
        &self.planes[q.index()]
    }

    pub fn plane_mut(&mut self, q: Quadrant) -> &mut [f64] {
        &mut self.planes[q.index()]
    }

    /// Response at `(x, row)`; `None` on the border ring.
    pub fn get(&self, q: Quadrant, x: usize, row: usize) -> Option<f64> {
        let v = self.planes[q.index()][row * self.width + x];
        (!v.is_nan()).then_some(v)
    }
}

/// 3×3 kernels as displayed (top row first).
pub const KERNELS: [[[f64; 3]; 3]; 4] = [
    [[0.0, 1.0, 0.0], [0.0, 0.0, 0.0], [0.0, -1.0, 0.0]],
    [[1.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, -1.0]],
    [[0.0, 0.0, 0.0], [1.0, 0.0, -1.0], [0.0, 0.0, 0.0]],
    [[0.0, 0.0, -1.0], [0.0, 0.0, 0.0], [1.0, 0.0, 0.0]],
];

pub fn directional_derivatives(image: &GrayImage) -> GradientStack {
    let (w, h) = (image.width(), image.height());
    let n = w * h;
    let mut planes = [
        vec![f64::NAN; n],
        vec![f64::NAN; n],
        vec![f64::NAN; n],
        vec![f64::NAN; n],
    ];
    if w >= 3 && h >= 3 {
        let d = image.data();
        for row in 1..h - 1 {
            for x in 1..w - 1 {
                let i = row * w + x;
                let (up, down) = (i - w, i + w);
                planes[0][i] = d[down] - d[up];
                planes[1][i] = d[down + 1] - d[up - 1];
                planes[2][i] = d[i + 1] - d[i - 1];
                planes[3][i] = d[up + 1] - d[down - 1];
            }
        }
    }
    GradientStack {
        width: w,
        height: h,
        planes,
    }
}
