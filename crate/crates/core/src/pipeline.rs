//! End-to-end detection: all directions, rectangles, deduplication.

use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::direction::{scan_params, Direction, ParamField, ScanGeometry};
use crate::error::{Error, Result};
use crate::gradient::{directional_derivatives, GradientStack};
use crate::image::GrayImage;
use crate::linker::{link_direction, ContextTest, LinkerConfig, SignedEdgeMap, TTest, TvTest};
use crate::rect::{label_regions, merge_duplicates, rectangles_for, sort_canonical, Rectangle};
use crate::stats::{LutConfig, TvLut};

/// Smallest image side accepted by [`Detector::detect`], in windows.
pub const MIN_SIDE_WINDOWS: usize = 3;

/// Two-sample statistic used for contextual edges.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    /// Total variation distance between the fitted Normals.
    #[default]
    Tv,
    /// Two-sample t, thresholded at the value an equal-variance step reaches
    /// when its TV distance equals the contextual threshold. Misses
    /// variance-only boundaries; useful only for comparison.
    TStatistic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorConfig {
    /// Samples per window.
    pub window: usize,
    /// Number of scan directions.
    pub directions: usize,
    pub contextual_threshold: f64,
    pub local_threshold: f64,
    pub max_gap: usize,
    /// Largest accepted angle between the two limit lines, degrees.
    /// Defaults to `180 / directions`.
    pub validation_tolerance: Option<f64>,
    pub dedup: bool,
    /// Rectangles with a shorter midline are dropped from the
    /// output. Midlines shorter than `window` never become rectangles.
    pub min_length: f64,
    pub lut: LutConfig,
    /// Worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
    pub statistic: Statistic,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        let l = LinkerConfig::default();
        Self {
            window: l.window,
            directions: l.directions,
            contextual_threshold: l.contextual_threshold,
            local_threshold: l.local_threshold,
            max_gap: l.max_gap,
            validation_tolerance: None,
            dedup: true,
            min_length: 0.0,
            lut: LutConfig::default(),
            threads: None,
            statistic: Statistic::Tv,
        }
    }
}

impl DetectorConfig {
    pub fn linker(&self) -> LinkerConfig {
        LinkerConfig {
            contextual_threshold: self.contextual_threshold,
            local_threshold: self.local_threshold,
            max_gap: self.max_gap,
            window: self.window,
            directions: self.directions,
        }
    }

    pub fn tolerance(&self) -> f64 {
        self.validation_tolerance
            .unwrap_or(180.0 / self.directions as f64)
    }

    pub fn validate(&self) -> Result<()> {
        self.linker().validate()?;
        let tol = self.tolerance();
        if !(tol > 0.0 && tol <= 90.0) {
            return Err(Error::InvalidConfig(format!("validation tolerance must be in (0, 90], got {tol}")));
        }
        if !(self.min_length >= 0.0 && self.min_length.is_finite()) {
            return Err(Error::InvalidConfig(format!("min length must be >= 0, got {}", self.min_length)));
        }
        if self.threads == Some(0) {
            return Err(Error::InvalidConfig("thread count must be positive".into()));
        }
        Ok(())
    }
}

/// Wall-clock seconds per stage, plus CPU seconds summed over directions.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub lut_s: f64,
    pub gradients_s: f64,
    pub directions_s: f64,
    pub merge_s: f64,
    pub total_s: f64,
    pub scan_cpu_s: f64,
    pub link_cpu_s: f64,
    pub fit_cpu_s: f64,
}

impl Timing {
    /// Sum of the wall-clock stages.
    pub fn stage_sum(&self) -> f64 {
        self.lut_s + self.gradients_s + self.directions_s + self.merge_s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionResult {
    pub width: usize,
    pub height: usize,
    pub directions: usize,
    /// Canonically ordered.
    pub rectangles: Vec<Rectangle>,
    pub timing: Timing,
}

/// Intermediate products of one direction, kept on request.
#[derive(Debug, Clone)]
pub struct DirectionOutput {
    pub direction: Direction,
    pub params: ParamField,
    pub edges: SignedEdgeMap,
    pub rectangles: Vec<Rectangle>,
}

struct DirectionRun {
    output: Option<DirectionOutput>,
    rectangles: Vec<Rectangle>,
    scan: Duration,
    link: Duration,
    fit: Duration,
}

/// A configured detector holding the TV table and an optional thread pool.
pub struct Detector {
    config: DetectorConfig,
    lut: TvLut,
    lut_time: Duration,
    pool: Option<rayon::ThreadPool>,
}

impl std::fmt::Debug for Detector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Detector").field("config", &self.config).finish_non_exhaustive()
    }
}

impl Detector {
    pub fn new(config: DetectorConfig) -> Result<Self> {
        config.validate()?;
        let start = Instant::now();
        let lut = TvLut::build(config.lut)?;
        let lut_time = start.elapsed();
        let pool = match config.threads {
            Some(n) => Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build()
                    .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?,
            ),
            None => None,
        };
        Ok(Self {
            config,
            lut,
            lut_time,
            pool,
        })
    }

    pub fn config(&self) -> &DetectorConfig {
        &self.config
    }

    pub fn lut(&self) -> &TvLut {
        &self.lut
    }

    /// Seconds spent building the table in [`Detector::new`].
    pub fn lut_seconds(&self) -> f64 {
        self.lut_time.as_secs_f64()
    }

    pub fn detect(&self, image: &GrayImage) -> Result<DetectionResult> {
        self.run(image, false).map(|(r, _)| r)
    }

    /// Like [`Detector::detect`], also returning per-direction parameters,
    /// edge maps and rectangles (before deduplication).
    pub fn detect_detailed(&self, image: &GrayImage) -> Result<(DetectionResult, Vec<DirectionOutput>)> {
        self.run(image, true)
    }

    fn run(&self, image: &GrayImage, keep: bool) -> Result<(DetectionResult, Vec<DirectionOutput>)> {
        match &self.pool {
            Some(pool) => pool.install(|| self.run_inner(image, keep)),
            None => self.run_inner(image, keep),
        }
    }

    fn run_inner(&self, image: &GrayImage, keep: bool) -> Result<(DetectionResult, Vec<DirectionOutput>)> {
        let (w, h) = (image.width(), image.height());
        let min = MIN_SIDE_WINDOWS * self.config.window;
        if w < min || h < min {
            return Err(Error::ImageTooSmall {
                width: w,
                height: h,
                min,
            });
        }
        let cfg = &self.config;
        let start = Instant::now();
        let gradients = directional_derivatives(image);
        let gradients_s = start.elapsed().as_secs_f64();

        let dir_start = Instant::now();
        let directions = Direction::all(cfg.directions)?;
        let tv = TvTest {
            lut: &self.lut,
            threshold: cfg.contextual_threshold,
        };
        let t = TTest::matching_tv(cfg.contextual_threshold, cfg.window);
        let test: &dyn ContextTest = match cfg.statistic {
            Statistic::Tv => &tv,
            Statistic::TStatistic => &t,
        };
        let runs: Vec<DirectionRun> = directions
            .par_iter()
            .map(|&d| self.run_direction(image, &gradients, d, test, keep))
            .collect::<Result<_>>()?;
        let directions_s = dir_start.elapsed().as_secs_f64();

        let merge_start = Instant::now();
        let mut timing = Timing {
            lut_s: self.lut_time.as_secs_f64(),
            gradients_s,
            directions_s,
            ..Timing::default()
        };
        let mut all = Vec::new();
        let mut outputs = Vec::new();
        for run in runs {
            timing.scan_cpu_s += run.scan.as_secs_f64();
            timing.link_cpu_s += run.link.as_secs_f64();
            timing.fit_cpu_s += run.fit.as_secs_f64();
            all.extend(run.rectangles);
            outputs.extend(run.output);
        }
        let mut rectangles = if cfg.dedup {
            merge_duplicates(all, 180.0 / cfg.directions as f64)
        } else {
            sort_canonical(&mut all);
            all
        };
        if cfg.min_length > 0.0 {
            rectangles.retain(|r| r.length() >= cfg.min_length);
        }
        timing.merge_s = merge_start.elapsed().as_secs_f64();
        timing.total_s = timing.lut_s + start.elapsed().as_secs_f64();
        Ok((
            DetectionResult {
                width: w,
                height: h,
                directions: cfg.directions,
                rectangles,
                timing,
            },
            outputs,
        ))
    }

    fn run_direction(
        &self,
        image: &GrayImage,
        gradients: &GradientStack,
        direction: Direction,
        test: &dyn ContextTest,
        keep: bool,
    ) -> Result<DirectionRun> {
        let cfg = &self.config;
        let (w, h) = (image.width(), image.height());
        let t0 = Instant::now();
        let geometry = ScanGeometry::new(direction, w, h);
        let params = scan_params(image, &geometry, cfg.window)?;
        let t1 = Instant::now();
        let edges = link_direction(&params, gradients, &geometry, &cfg.linker(), test);
        let t2 = Instant::now();
        let regions = label_regions(&edges, cfg.window);
        let rectangles = rectangles_for(&regions, h, cfg.tolerance(), cfg.window as f64);
        let t3 = Instant::now();
        let output = keep.then(|| DirectionOutput {
            direction,
            params,
            edges,
            rectangles: rectangles.clone(),
        });
        Ok(DirectionRun {
            output,
            rectangles,
            scan: t1 - t0,
            link: t2 - t1,
            fit: t3 - t2,
        })
    }
}

/// One-shot detection with a freshly built detector.
pub fn detect(image: &GrayImage, config: &DetectorConfig) -> Result<DetectionResult> {
    Detector::new(*config)?.detect(image)
}
