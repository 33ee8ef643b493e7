//! Throughput measurement.

use std::io::Write;

use crate::error::Result;
use crate::image::GrayImage;
use crate::pipeline::{Detector, DetectorConfig};

/// Median timings of repeated detections on one image. Times exclude the
/// one-off table build, reported separately as `lut_s`.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub image: String,
    pub width: usize,
    pub height: usize,
    pub directions: usize,
    pub reps: usize,
    pub rectangles: usize,
    pub lut_s: f64,
    pub gradients_s: f64,
    pub directions_s: f64,
    pub merge_s: f64,
    pub total_s: f64,
}

impl BenchRow {
    pub fn pixels(&self) -> usize {
        self.width * self.height
    }

    pub fn pixels_per_second(&self) -> f64 {
        self.pixels() as f64 / self.total_s
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Median of `reps` timed detections (at least one) per image.
pub fn benchmark_with(detector: &Detector, images: &[(String, GrayImage)], reps: usize) -> Result<Vec<BenchRow>> {
    let reps = reps.max(1);
    let mut rows = Vec::with_capacity(images.len());
    for (name, image) in images {
        let mut stages: [Vec<f64>; 4] = Default::default();
        let mut rectangles = 0;
        for _ in 0..reps {
            let r = detector.detect(image)?;
            let t = r.timing;
            rectangles = r.rectangles.len();
            for (s, v) in stages.iter_mut().zip([t.gradients_s, t.directions_s, t.merge_s, t.total_s - t.lut_s]) {
                s.push(v);
            }
        }
        let [g, d, m, total] = stages.map(median);
        rows.push(BenchRow {
            image: name.clone(),
            width: image.width(),
            height: image.height(),
            directions: detector.config().directions,
            reps,
            rectangles,
            lut_s: detector.lut_seconds(),
            gradients_s: g,
            directions_s: d,
            merge_s: m,
            total_s: total,
        });
    }
    Ok(rows)
}

pub fn benchmark(images: &[(String, GrayImage)], config: &DetectorConfig, reps: usize) -> Result<Vec<BenchRow>> {
    benchmark_with(&Detector::new(*config)?, images, reps)
}

pub fn write_csv<W: Write>(rows: &[BenchRow], mut out: W) -> std::io::Result<()> {
    writeln!(
        out,
        "image,width,height,pixels,directions,reps,rectangles,lut_s,gradients_s,directions_s,merge_s,total_s,\
         gradients_px_per_s,directions_px_per_s,total_px_per_s"
    )?;
    for r in rows {
        let px = r.pixels() as f64;
        writeln!(
            out,
            "{},{},{},{},{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.0},{:.0},{:.0}",
            r.image.replace(',', "_"),
            r.width,
            r.height,
            r.pixels(),
            r.directions,
            r.reps,
            r.rectangles,
            r.lut_s,
            r.gradients_s,
            r.directions_s,
            r.merge_s,
            r.total_s,
            px / r.gradients_s,
            px / r.directions_s,
            px / r.total_s,
        )?;
    }
    Ok(())
}
