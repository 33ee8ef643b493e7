//! Scan directions, line addressing and running window statistics.
//!
//! Directions are measured counter-clockwise from the +x axis in an upward
//! frame: `y = height - 1 - row`. Every direction partitions the image into
//! parallel digital lines. Directions closer to horizontal (`Half::H`) index
//! their lines by the y-intercept and advance along x; the others (`Half::V`)
//! index by the x-intercept and advance along y.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::stats::NormalParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Half {
    H,
    V,
}

/// Which of the four derivative kernels serves a direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Quadrant {
    Q0,
    Q45,
    Q90,
    Q135,
}

impl Quadrant {
    pub fn degrees(self) -> u32 {
        match self {
            Quadrant::Q0 => 0,
            Quadrant::Q45 => 45,
            Quadrant::Q90 => 90,
            Quadrant::Q135 => 135,
        }
    }

    pub fn index(self) -> usize {
        self.degrees() as usize / 45
    }

    /// Direction of increasing kernel response, in the upward frame.
    pub fn gradient_axis(self) -> (f64, f64) {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        match self {
            Quadrant::Q0 => (0.0, -1.0),
            Quadrant::Q45 => (h, -h),
            Quadrant::Q90 => (1.0, 0.0),
            Quadrant::Q135 => (h, h),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Direction {
    /// 1-based index.
    pub index: usize,
    pub count: usize,
    pub theta_deg: f64,
    pub half: Half,
    pub quadrant: Quadrant,
}

/// Direction `n` of `count` evenly spaced over `[0°, 180°)`.
pub fn classify(n: usize, count: usize) -> Result<Direction> {
    if count == 0 || n == 0 || n > count {
        return Err(Error::DirectionOutOfRange { index: n, count });
    }
    let theta = 180.0 * (n - 1) as f64 / count as f64;
    let half = if (45.0..135.0).contains(&theta) {
        Half::V
    } else {
        Half::H
    };
    let quadrant = if !(22.5..157.5).contains(&theta) {
        Quadrant::Q0
    } else if theta < 67.5 {
        Quadrant::Q45
    } else if theta < 112.5 {
        Quadrant::Q90
    } else {
        Quadrant::Q135
    };
    Ok(Direction {
        index: n,
        count,
        theta_deg: theta,
        half,
        quadrant,
    })
}

impl Direction {
    pub fn all(count: usize) -> Result<Vec<Direction>> {
        (1..=count).map(|n| classify(n, count)).collect()
    }

    /// Half-width of the angular bin owned by this direction, in degrees.
    pub fn bin_half_width(&self) -> f64 {
        90.0 / self.count as f64
    }

    /// Pixel step per unit along the scan axis: `tan θ` for `H`, `cot θ` for `V`.
    ///
    /// Evaluated on the reduced angle so that directions 90° apart get slopes
    /// of exactly opposite sign.
    pub fn slope(&self) -> f64 {
        let t = self.theta_deg;
        match self.half {
            Half::H if t < 90.0 => t.to_radians().tan(),
            Half::H => -(180.0 - t).to_radians().tan(),
            Half::V => (90.0 - t).to_radians().tan(),
        }
    }

    /// Unit normal `(sin θ, -cos θ)` of the scan lines in the upward frame.
    /// The "top" sample window sits on this side of a pixel.
    pub fn normal(&self) -> (f64, f64) {
        let (s, c) = self.theta_deg.to_radians().sin_cos();
        (s, -c)
    }

    /// Integer offset `([sin θ], -[cos θ])` from a pixel to its top
    /// neighbour, as `(dx, dy)` in the upward frame.
    pub fn top_offset(&self) -> (i64, i64) {
        let (nx, ny) = self.normal();
        (round_half_away(nx), round_half_away(ny))
    }

    /// Sign applied to the quadrant kernel response so that positive values
    /// mean "brighter on the top side".
    pub fn kernel_sign(&self) -> f64 {
        let (nx, ny) = self.normal();
        let (gx, gy) = self.quadrant.gradient_axis();
        if nx * gx + ny * gy < 0.0 {
            -1.0
        } else {
            1.0
        }
    }
}

/// Rounding with ties away from zero. Values within 1e-9 of a tie are treated
/// as ties so that trigonometric round-off cannot change the result.
pub fn round_half_away(v: f64) -> i64 {
    let a = v.abs();
    let f = a.fract();
    let r = if (f - 0.5).abs() < 1e-9 {
        a.trunc() + 1.0
    } else {
        a.round()
    };
    (r as i64) * if v < 0.0 { -1 } else { 1 }
}

/// Address of the pixel at scan position `(x, y)` for `direction`, shifted by
/// `gamma` image heights (`H`) or widths (`V`), in the upward frame.
///
/// Returns `None` if the address falls outside a `width`×`height` image.
pub fn address(
    x: i64,
    y: i64,
    direction: &Direction,
    gamma: i64,
    width: usize,
    height: usize,
) -> Option<(usize, usize)> {
    let s = direction.slope();
    let (ax, ay) = match direction.half {
        Half::H => (x, y + round_half_away(x as f64 * s) + gamma * height as i64),
        Half::V => (x + round_half_away(y as f64 * s) + gamma * width as i64, y),
    };
    ((0..width as i64).contains(&ax) && (0..height as i64).contains(&ay))
        .then_some((ax as usize, ay as usize))
}

/// One digital line: the in-image positions `start..start + len` along the
/// scan axis for a fixed intercept.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScanLine {
    pub intercept: i64,
    pub start: usize,
    pub len: usize,
}

/// All scan lines of one direction over an image of a given size.
#[derive(Debug, Clone)]
pub struct ScanGeometry {
    direction: Direction,
    width: usize,
    height: usize,
    offsets: Vec<i64>,
    lines: Vec<ScanLine>,
}

impl ScanGeometry {
    pub fn new(direction: Direction, width: usize, height: usize) -> Self {
        let (along_len, cross_len) = match direction.half {
            Half::H => (width, height as i64),
            Half::V => (height, width as i64),
        };
        let slope = direction.slope();
        let offsets: Vec<i64> = (0..along_len)
            .map(|a| round_half_away(a as f64 * slope))
            .collect();
        let lo = offsets.iter().copied().min().unwrap_or(0);
        let hi = offsets.iter().copied().max().unwrap_or(0);
        let mut lines = Vec::new();
        for intercept in -hi..cross_len - lo {
            // Offsets are monotone, so the in-image positions are contiguous.
            let inside = |a: &usize| (0..cross_len).contains(&(intercept + offsets[*a]));
            if let Some(start) = (0..along_len).find(inside) {
                let len = (start..along_len).take_while(inside).count();
                lines.push(ScanLine {
                    intercept,
                    start,
                    len,
                });
            }
        }
        Self {
            direction,
            width,
            height,
            offsets,
            lines,
        }
    }

    pub fn direction(&self) -> &Direction {
        &self.direction
    }

    pub fn lines(&self) -> &[ScanLine] {
        &self.lines
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// `(x, row)` of the `k`-th pixel of `line`.
    #[inline]
    pub fn pixel(&self, line: &ScanLine, k: usize) -> (usize, usize) {
        let a = line.start + k;
        let cross = (line.intercept + self.offsets[a]) as usize;
        match self.direction.half {
            Half::H => (a, self.height - 1 - cross),
            Half::V => (cross, self.height - 1 - a),
        }
    }

    /// Flat row-major index of the `k`-th pixel of `line`.
    #[inline]
    pub fn index(&self, line: &ScanLine, k: usize) -> usize {
        let (x, row) = self.pixel(line, k);
        row * self.width + x
    }

    /// Flat index of `(x, row)` shifted by `(dx, dy)` in the upward frame.
    #[inline]
    pub fn shifted(&self, x: usize, row: usize, (dx, dy): (i64, i64)) -> Option<usize> {
        let nx = x as i64 + dx;
        let nrow = row as i64 - dy;
        ((0..self.width as i64).contains(&nx) && (0..self.height as i64).contains(&nrow))
            .then(|| nrow as usize * self.width + nx as usize)
    }
}

/// Per-pixel Normal parameters of the `window` samples that start at each pixel
/// and run forward along the direction's scan line.
#[derive(Debug, Clone)]
pub struct ParamField {
    pub direction: Direction,
    pub window: usize,
    width: usize,
    height: usize,
    /// NaN where the window leaves the image.
    mu: Vec<f64>,
    sigma2: Vec<f64>,
}

impl ParamField {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// `(mean, variance)` at a flat index, if computed.
    #[inline]
    pub fn at(&self, idx: usize) -> Option<(f64, f64)> {
        let mu = self.mu[idx];
        (!mu.is_nan()).then(|| (mu, self.sigma2[idx]))
    }

    pub fn get(&self, x: usize, row: usize) -> Option<(f64, f64)> {
        self.at(row * self.width + x)
    }

    #[inline]
    pub fn params(&self, idx: usize) -> Option<NormalParams> {
        self.at(idx)
            .map(|(mu, s2)| NormalParams::from_variance(mu, s2))
    }

    pub fn mu_plane(&self) -> &[f64] {
        &self.mu
    }

    pub fn sigma2_plane(&self) -> &[f64] {
        &self.sigma2
    }

    pub fn computed_count(&self) -> usize {
        self.mu.iter().filter(|v| !v.is_nan()).count()
    }
}

/// Running mean and variance of `window` consecutive pixels along every scan
/// line of `geometry`.
pub fn scan_params(image: &GrayImage, geometry: &ScanGeometry, window: usize) -> Result<ParamField> {
    if window < 2 {
        return Err(Error::InvalidConfig(format!("window must be >= 2, got {window}")));
    }
    if image.width() != geometry.width() || image.height() != geometry.height() {
        return Err(Error::InvalidConfig("geometry does not match image size".into()));
    }
    let n = image.pixel_count();
    let mut mu = vec![f64::NAN; n];
    let mut sigma2 = vec![f64::NAN; n];
    let data = image.data();
    let m = window as f64;
    let mut idx = Vec::new();
    for line in geometry.lines() {
        if line.len < window {
            continue;
        }
        idx.clear();
        idx.extend((0..line.len).map(|k| geometry.index(line, k)));
        let (mut sum, mut sum2) = (0.0, 0.0);
        for &i in &idx[..window] {
            sum += data[i];
            sum2 += data[i] * data[i];
        }
        for k in 0..=line.len - window {
            if k > 0 {
                let (out, inc) = (data[idx[k - 1]], data[idx[k + window - 1]]);
                sum += inc - out;
                sum2 += inc * inc - out * out;
            }
            let p = idx[k];
            mu[p] = sum / m;
            sigma2[p] = (sum2 / (m - 1.0) - sum * sum / (m * (m - 1.0))).max(0.0);
        }
    }
    Ok(ParamField {
        direction: *geometry.direction(),
        window,
        width: image.width(),
        height: image.height(),
        mu,
        sigma2,
    })
}
