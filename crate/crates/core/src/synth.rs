//! Synthetic test images with known geometry.
//!
//! A scene is a constant background, optional axis-aligned textured
//! rectangles (Gaussian samples with a given mean and deviation), straight
//! bars added on top, and optional additive noise. Pixel values are rounded
//! to 8 bits, so a generated image and its saved PNG are identical.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{quantize, GrayImage};
use crate::rect::{angle_diff, Rectangle};

/// A straight bar between two pixel centres. `contrast` is added to whatever
/// lies underneath, so crossing bars keep both sets of edges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bar {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
    pub width: f64,
    pub contrast: f64,
}

impl Bar {
    pub fn length(&self) -> f64 {
        (self.x1 - self.x0).hypot(self.y1 - self.y0)
    }

    /// Orientation in degrees, counter-clockwise with the y axis pointing up.
    pub fn theta_deg(&self) -> f64 {
        crate::rect::wrap180((-(self.y1 - self.y0)).atan2(self.x1 - self.x0).to_degrees())
    }

    /// Whether the pixel centre `(x, row)` is covered: half-open in both the
    /// along (`[-0.5, L + 0.5)`) and across (`[-w/2, w/2)`) coordinates.
    pub fn covers(&self, x: f64, row: f64) -> bool {
        let len = self.length();
        let (ux, uy) = ((self.x1 - self.x0) / len, (self.y1 - self.y0) / len);
        let (dx, dy) = (x - self.x0, row - self.y0);
        let along = dx * ux + dy * uy;
        let across = -dx * uy + dy * ux;
        (-0.5..len + 0.5).contains(&along) && (-self.width / 2.0..self.width / 2.0).contains(&across)
    }
}

/// Gaussian texture filling pixel columns `x0..x1` and rows `y0..y1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Texture {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
    pub mean: f64,
    pub std: f64,
}

impl Texture {
    fn overlaps(&self, o: &Texture) -> bool {
        self.x0 < o.x1 && o.x0 < self.x1 && self.y0 < o.y1 && o.y0 < self.y1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Noise {
    Gaussian { std: f64 },
    /// Uniform on `[-amplitude, amplitude]`.
    Uniform { amplitude: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    #[serde(default)]
    pub background: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub bars: Vec<Bar>,
    #[serde(default)]
    pub textures: Vec<Texture>,
    #[serde(default)]
    pub noise: Option<Noise>,
}

/// A straight boundary segment in image coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Segment {
    pub fn length(&self) -> f64 {
        (self.x1 - self.x0).hypot(self.y1 - self.y0)
    }

    pub fn theta_deg(&self) -> f64 {
        crate::rect::wrap180((-(self.y1 - self.y0)).atan2(self.x1 - self.x0).to_degrees())
    }

    fn point(&self, s: f64) -> (f64, f64) {
        (self.x0 + s * (self.x1 - self.x0), self.y0 + s * (self.y1 - self.y0))
    }
}

impl From<&Bar> for Segment {
    fn from(b: &Bar) -> Self {
        Segment {
            x0: b.x0,
            y0: b.y0,
            x1: b.x1,
            y1: b.y1,
        }
    }
}

/// Ground truth for a generated scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub width: usize,
    pub height: usize,
    pub bars: Vec<Bar>,
    /// Texture sides not on the image border, on the pixel-boundary grid
    /// (half-integer coordinates).
    pub boundaries: Vec<Segment>,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSpec(m));
        if self.width == 0 || self.height == 0 {
            return bad(format!("empty image {}x{}", self.width, self.height));
        }
        for (i, b) in self.bars.iter().enumerate() {
            let finite = [b.x0, b.y0, b.x1, b.y1, b.width, b.contrast].iter().all(|v| v.is_finite());
            if !finite || !(b.width > 0.0) || b.length() == 0.0 {
                return bad(format!("bar {i} needs finite values, positive width and distinct endpoints"));
            }
        }
        for (i, t) in self.textures.iter().enumerate() {
            if t.x0 >= t.x1 || t.y0 >= t.y1 || t.x1 > self.width || t.y1 > self.height {
                return bad(format!("texture {i} is empty or outside the image"));
            }
            if !(t.std >= 0.0) || !t.mean.is_finite() {
                return bad(format!("texture {i} needs a finite mean and non-negative std"));
            }
            if let Some(j) = self.textures[..i].iter().position(|o| o.overlaps(t)) {
                return bad(format!("textures {j} and {i} overlap"));
            }
        }
        match self.noise {
            Some(Noise::Gaussian { std }) if !(std >= 0.0) => bad(format!("noise std {std}")),
            Some(Noise::Uniform { amplitude }) if !(amplitude >= 0.0) => bad(format!("noise amplitude {amplitude}")),
            _ => Ok(()),
        }
    }

    pub fn generate(&self) -> Result<(GrayImage, GroundTruth)> {
        self.validate()?;
        let (w, h) = (self.width, self.height);
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut img = GrayImage::filled(w, h, self.background);
        for t in &self.textures {
            let dist = Normal::new(t.mean, t.std).map_err(|e| Error::InvalidSpec(e.to_string()))?;
            for row in t.y0..t.y1 {
                for x in t.x0..t.x1 {
                    img.set(x, row, dist.sample(&mut rng));
                }
            }
        }
        for b in &self.bars {
            // Only the bounding box can be covered.
            let pad = b.width + 1.0;
            let clip = |v: f64, n: usize| v.max(0.0).min((n - 1) as f64) as usize;
            let (xa, xb) = (clip(b.x0.min(b.x1) - pad, w), clip(b.x0.max(b.x1) + pad, w));
            let (ya, yb) = (clip(b.y0.min(b.y1) - pad, h), clip(b.y0.max(b.y1) + pad, h));
            for row in ya..=yb {
                for x in xa..=xb {
                    if b.covers(x as f64, row as f64) {
                        img.set(x, row, img.get(x, row) + b.contrast);
                    }
                }
            }
        }
        if let Some(noise) = self.noise {
            for row in 0..h {
                for x in 0..w {
                    let n = match noise {
                        Noise::Gaussian { std } => std * rng.sample::<f64, _>(rand_distr::StandardNormal),
                        Noise::Uniform { amplitude } => rng.random_range(-1.0..=1.0) * amplitude,
                    };
                    img.set(x, row, img.get(x, row) + n);
                }
            }
        }
        let img = GrayImage::from_fn(w, h, |x, row| quantize(img.get(x, row)) as f64);
        Ok((img, self.truth()))
    }

    pub fn truth(&self) -> GroundTruth {
        let (w, h) = (self.width, self.height);
        let mut boundaries = Vec::new();
        for t in &self.textures {
            let (x0, x1) = (t.x0 as f64 - 0.5, t.x1 as f64 - 0.5);
            let (y0, y1) = (t.y0 as f64 - 0.5, t.y1 as f64 - 0.5);
            if t.y0 > 0 {
                boundaries.push(Segment { x0, y0, x1, y1: y0 });
            }
            if t.y1 < h {
                boundaries.push(Segment { x0, y0: y1, x1, y1 });
            }
            if t.x0 > 0 {
                boundaries.push(Segment { x0, y0, x1: x0, y1 });
            }
            if t.x1 < w {
                boundaries.push(Segment { x0: x1, y0, x1, y1 });
            }
        }
        GroundTruth {
            width: w,
            height: h,
            bars: self.bars.clone(),
            boundaries,
        }
    }
}

/// Tolerances for matching detections against ground truth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchTolerance {
    /// Largest orientation difference, degrees.
    pub angle_deg: f64,
    /// Largest distance from the truth segment, pixels.
    pub distance: f64,
}

/// Spacing of the sample points placed along truth segments.
const SAMPLE_STEP: f64 = 0.5;

fn samples(seg: &Segment) -> impl Iterator<Item = (f64, f64)> + '_ {
    let n = (seg.length() / SAMPLE_STEP).ceil().max(1.0) as usize;
    (0..=n).map(move |i| seg.point(i as f64 / n as f64))
}

/// Whether `rect` covers the point `p` on a segment of orientation `theta`.
fn covers(rect: &Rectangle, p: (f64, f64), theta: f64, tol: MatchTolerance) -> bool {
    if angle_diff(rect.theta_deg, theta).abs() > tol.angle_deg {
        return false;
    }
    let len = rect.length();
    let (ux, uy) = if len > 0.0 {
        ((rect.x1 - rect.x0) / len, (rect.y1 - rect.y0) / len)
    } else {
        (1.0, 0.0)
    };
    let (dx, dy) = (p.0 - rect.x0, p.1 - rect.y0);
    let along = dx * ux + dy * uy;
    let across = (-dx * uy + dy * ux).abs();
    (-0.5..=len + 0.5).contains(&along) && across <= tol.distance
}

/// Fraction of `seg` covered by the union of `rects`.
pub fn coverage(seg: &Segment, rects: &[Rectangle], tol: MatchTolerance) -> f64 {
    let theta = seg.theta_deg();
    let pts: Vec<_> = samples(seg).collect();
    let hit = pts.iter().filter(|&&p| rects.iter().any(|r| covers(r, p, theta, tol))).count();
    hit as f64 / pts.len() as f64
}

/// Largest fraction of `seg` covered by any single rectangle of `sign`, with
/// the index of that rectangle.
pub fn best_single_coverage(seg: &Segment, rects: &[Rectangle], sign: i8, tol: MatchTolerance) -> Option<(usize, f64)> {
    let theta = seg.theta_deg();
    let pts: Vec<_> = samples(seg).collect();
    rects
        .iter()
        .enumerate()
        .filter(|(_, r)| r.sign == sign)
        .map(|(i, r)| {
            let hit = pts.iter().filter(|&&p| covers(r, p, theta, tol)).count();
            (i, hit as f64 / pts.len() as f64)
        })
        .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)))
}

/// Signed perpendicular offset of `p` from the line through `seg`, positive
/// on the left when walking from start to end in the upward frame.
pub fn side_of(seg: &Segment, p: (f64, f64)) -> f64 {
    let (ux, uy) = (seg.x1 - seg.x0, seg.y1 - seg.y0);
    let (dx, dy) = (p.0 - seg.x0, p.1 - seg.y0);
    // Image rows grow downwards, so the cross product flips.
    -(ux * dy - uy * dx) / seg.length()
}

/// A cluttered scene loosely resembling a photograph: shaded regions,
/// textures, bars of many orientations and sensor noise.
pub fn natural_like(width: usize, height: usize, seed: u64) -> GrayImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut textures: Vec<Texture> = Vec::new();
    for _ in 0..200 {
        if textures.len() >= 12 {
            break;
        }
        let tw = rng.random_range(width / 10..width / 3);
        let th = rng.random_range(height / 10..height / 3);
        let t = Texture {
            x0: rng.random_range(0..width - tw),
            y0: rng.random_range(0..height - th),
            x1: 0,
            y1: 0,
            mean: rng.random_range(40.0..200.0),
            std: rng.random_range(2.0..20.0),
        };
        let t = Texture { x1: t.x0 + tw, y1: t.y0 + th, ..t };
        if !textures.iter().any(|o| o.overlaps(&t)) {
            textures.push(t);
        }
    }
    let scale = (width.min(height) as f64) / 512.0;
    let bars = (0..40)
        .map(|_| {
            let (x0, y0) = (rng.random_range(0.0..width as f64), rng.random_range(0.0..height as f64));
            let angle: f64 = rng.random_range(0.0..std::f64::consts::PI);
            let len = rng.random_range(20.0..200.0) * scale.max(0.25);
            Bar {
                x0,
                y0,
                x1: x0 + len * angle.cos(),
                y1: y0 + len * angle.sin(),
                width: rng.random_range(1.0..6.0),
                contrast: rng.random_range(-60.0..60.0),
            }
        })
        .collect();
    let spec = SceneSpec {
        width,
        height,
        background: 110.0,
        seed,
        bars,
        textures,
        noise: Some(Noise::Gaussian { std: 3.0 }),
    };
    let (mut img, _) = spec.generate().expect("generated spec is valid");
    // Smooth illumination gradient.
    let (wf, hf) = (width as f64, height as f64);
    img = GrayImage::from_fn(width, height, |x, row| {
        let shade = 30.0 * (x as f64 / wf - 0.5) + 20.0 * (row as f64 / hf - 0.5);
        quantize(img.get(x, row) + shade) as f64
    });
    img
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bar_spec() -> SceneSpec {
        SceneSpec {
            width: 40,
            height: 20,
            background: 50.0,
            seed: 7,
            bars: vec![Bar {
                x0: 5.0,
                y0: 10.0,
                x1: 30.0,
                y1: 10.0,
                width: 3.0,
                contrast: 100.0,
            }],
            textures: vec![],
            noise: None,
        }
    }

    #[test]
    fn single_bar_is_exactly_drawn() {
        let (img, truth) = bar_spec().generate().unwrap();
        for row in 0..20 {
            for x in 0..40 {
                let inside = (9..=11).contains(&row) && (5..=30).contains(&x);
                assert_eq!(img.get(x, row), if inside { 150.0 } else { 50.0 }, "({x},{row})");
            }
        }
        assert_eq!(truth.bars.len(), 1);
        assert!(truth.boundaries.is_empty());
    }

    #[test]
    fn even_width_is_half_open() {
        let mut spec = bar_spec();
        spec.bars[0].width = 2.0;
        let (img, _) = spec.generate().unwrap();
        let rows: Vec<usize> = (0..20).filter(|&r| img.get(10, r) > 50.0).collect();
        assert_eq!(rows, vec![9, 10]);
    }

    #[test]
    fn same_seed_same_image() {
        let mut spec = bar_spec();
        spec.noise = Some(Noise::Gaussian { std: 5.0 });
        assert_eq!(spec.generate().unwrap().0, spec.generate().unwrap().0);
        let mut other = spec.clone();
        other.seed = 8;
        assert_ne!(spec.generate().unwrap().0, other.generate().unwrap().0);
    }

    #[test]
    fn texture_statistics_match_spec() {
        let spec = SceneSpec {
            width: 400,
            height: 200,
            background: 0.0,
            seed: 3,
            bars: vec![],
            textures: vec![
                Texture { x0: 0, y0: 0, x1: 200, y1: 200, mean: 128.0, std: 5.0 },
                Texture { x0: 200, y0: 0, x1: 400, y1: 200, mean: 128.0, std: 25.0 },
            ],
            noise: None,
        };
        let (img, truth) = spec.generate().unwrap();
        for (xs, std) in [(0..200, 5.0), (200..400, 25.0)] {
            let vals: Vec<f64> = (0..200).flat_map(|r| xs.clone().map(move |x| (x, r))).map(|(x, r)| img.get(x, r)).collect();
            let n = vals.len() as f64;
            let mean = vals.iter().sum::<f64>() / n;
            let sd = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
            assert!((mean - 128.0).abs() / 128.0 < 0.02, "{mean}");
            assert!((sd - std).abs() / std < 0.02, "{sd}");
        }
        assert_eq!(truth.boundaries.len(), 2);
        assert_eq!(truth.boundaries[0], Segment { x0: 199.5, y0: -0.5, x1: 199.5, y1: 199.5 });
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let mut s = bar_spec();
        s.bars[0].width = 0.0;
        assert!(matches!(s.generate(), Err(Error::InvalidSpec(_))));
        let mut s = bar_spec();
        s.textures = vec![
            Texture { x0: 0, y0: 0, x1: 10, y1: 10, mean: 1.0, std: 1.0 },
            Texture { x0: 5, y0: 5, x1: 15, y1: 15, mean: 1.0, std: 1.0 },
        ];
        assert!(matches!(s.generate(), Err(Error::InvalidSpec(_))));
        let json = r#"{"width": 10, "height": 10, "bars": [{"x0":0,"y0":0,"x1":5,"y1":0,"width":1,"contrast":1,"extra":2}]}"#;
        assert!(serde_json::from_str::<SceneSpec>(json).is_err());
    }

    #[test]
    fn coverage_of_a_matching_rectangle() {
        let seg = Segment { x0: 0.0, y0: 10.0, x1: 100.0, y1: 10.0 };
        let r = Rectangle {
            theta_deg: 0.0,
            x0: 0.0,
            y0: 11.0,
            x1: 49.0,
            y1: 11.0,
            width_px: 2.0,
            sign: 1,
            bin: 1,
            score: 1.0,
        };
        let tol = MatchTolerance { angle_deg: 3.0, distance: 2.0 };
        let c = coverage(&seg, &[r], tol);
        assert!((c - 0.5).abs() < 0.02, "{c}");
        assert_eq!(coverage(&seg, &[Rectangle { theta_deg: 90.0, ..r }], tol), 0.0);
        assert_eq!(best_single_coverage(&seg, &[r], -1, tol), None);
        assert!(side_of(&seg, (50.0, 5.0)) > 0.0);
    }

    #[test]
    fn bar_orientation_uses_upward_angles() {
        let b = Bar { x0: 0.0, y0: 10.0, x1: 10.0, y1: 0.0, width: 1.0, contrast: 1.0 };
        assert!((b.theta_deg() - 45.0).abs() < 1e-12);
    }
}
