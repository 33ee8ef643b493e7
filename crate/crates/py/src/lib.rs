//! Python bindings.
//!
//! Images cross the boundary as a sequence of rows (nested lists or a 2-D
//! NumPy array) or as raw 8-bit bytes with explicit dimensions.

use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use seglink::output::to_jsonl;
use seglink::pipeline::Statistic;
use seglink::stats::{self, LutConfig, NormalParams};
use seglink::synth::SceneSpec;
use seglink::{Error, GrayImage};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyOSError::new_err(e.to_string()),
        Error::ZeroVariance | Error::Image(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn image_from_rows(rows: Vec<Vec<f64>>) -> PyResult<GrayImage> {
    let height = rows.len();
    let width = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != width) {
        return Err(PyValueError::new_err("rows must all have the same length"));
    }
    GrayImage::new(width, height, rows.concat()).map_err(to_py)
}

fn image_from_bytes(data: &[u8], width: usize, height: usize) -> PyResult<GrayImage> {
    if data.len() != width * height {
        return Err(PyValueError::new_err(format!(
            "expected {} bytes for a {width}x{height} image, got {}",
            width * height,
            data.len()
        )));
    }
    Ok(GrayImage::from_fn(width, height, |x, row| data[row * width + x] as f64))
}

/// Total variation distance between N(mu_a, sigma_a²) and N(mu_b, sigma_b²).
#[pyfunction]
fn tv_distance(mu_a: f64, sigma_a: f64, mu_b: f64, sigma_b: f64) -> PyResult<f64> {
    if !(sigma_a > 0.0 && sigma_b > 0.0) {
        return Err(PyValueError::new_err("deviations must be positive"));
    }
    Ok(stats::tv_distance(NormalParams::new(mu_a, sigma_a), NormalParams::new(mu_b, sigma_b)))
}

/// `(|Δμ| / min σ, max σ / min σ)` for a pair of Normals.
#[pyfunction]
fn normalize(mu_a: f64, sigma_a: f64, mu_b: f64, sigma_b: f64) -> PyResult<(f64, f64)> {
    if !(sigma_a > 0.0 && sigma_b > 0.0) {
        return Err(PyValueError::new_err("deviations must be positive"));
    }
    let p = stats::normalize(NormalParams::new(mu_a, sigma_a), NormalParams::new(mu_b, sigma_b));
    Ok((p.mu_prime, p.sigma_prime))
}

/// Two-sample t statistic for windows of `m` samples each.
#[pyfunction]
fn t_statistic(mu_a: f64, sigma_a: f64, mu_b: f64, sigma_b: f64, m: usize) -> PyResult<f64> {
    stats::t_statistic(NormalParams::new(mu_a, sigma_a), NormalParams::new(mu_b, sigma_b), m).map_err(to_py)
}

/// Precomputed distance table over normalized pairs.
#[pyclass(module = "seglink_py", frozen)]
struct TvLut {
    inner: stats::TvLut,
}

#[pymethods]
impl TvLut {
    #[new]
    #[pyo3(signature = (mu_max = 8.0, sigma_max = 8.0, step = 1.0 / 64.0))]
    fn new(mu_max: f64, sigma_max: f64, step: f64) -> PyResult<Self> {
        let inner = stats::TvLut::build(LutConfig { mu_max, sigma_max, step }).map_err(to_py)?;
        Ok(Self { inner })
    }

    /// `(mean nodes, deviation-ratio nodes)`.
    #[getter]
    fn shape(&self) -> (usize, usize) {
        self.inner.shape()
    }

    fn lookup(&self, mu_prime: f64, sigma_prime: f64) -> f64 {
        self.inner.lookup(stats::NormalizedPair { mu_prime, sigma_prime })
    }

    fn distance(&self, mu_a: f64, sigma_a: f64, mu_b: f64, sigma_b: f64) -> f64 {
        self.inner.distance(NormalParams::new(mu_a, sigma_a), NormalParams::new(mu_b, sigma_b))
    }
}

/// Detector settings. Unset attributes keep their defaults.
#[pyclass(module = "seglink_py", name = "DetectorConfig", from_py_object)]
#[derive(Clone)]
struct Config {
    inner: seglink::DetectorConfig,
}

#[pymethods]
impl Config {
    #[new]
    #[pyo3(signature = (**kwargs))]
    fn new(kwargs: Option<&Bound<'_, pyo3::types::PyDict>>) -> PyResult<Self> {
        let mut cfg = Self { inner: seglink::DetectorConfig::default() };
        if let Some(kwargs) = kwargs {
            let this = Bound::new(kwargs.py(), cfg.clone())?;
            for (k, v) in kwargs.iter() {
                this.setattr(k.cast::<pyo3::types::PyString>()?, v)?;
            }
            cfg = this.borrow().clone();
        }
        Ok(cfg)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner: seglink::DetectorConfig = serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
        inner.validate().map_err(to_py)?;
        Ok(Self { inner })
    }

    fn to_json(&self) -> String {
        serde_json::to_string(&self.inner).expect("config serializes")
    }

    fn __repr__(&self) -> String {
        format!("DetectorConfig({})", self.to_json())
    }

    #[getter]
    fn window(&self) -> usize {
        self.inner.window
    }
    #[setter]
    fn set_window(&mut self, v: usize) {
        self.inner.window = v;
    }
    #[getter]
    fn directions(&self) -> usize {
        self.inner.directions
    }
    #[setter]
    fn set_directions(&mut self, v: usize) {
        self.inner.directions = v;
    }
    #[getter]
    fn contextual_threshold(&self) -> f64 {
        self.inner.contextual_threshold
    }
    #[setter]
    fn set_contextual_threshold(&mut self, v: f64) {
        self.inner.contextual_threshold = v;
    }
    #[getter]
    fn local_threshold(&self) -> f64 {
        self.inner.local_threshold
    }
    #[setter]
    fn set_local_threshold(&mut self, v: f64) {
        self.inner.local_threshold = v;
    }
    #[getter]
    fn max_gap(&self) -> usize {
        self.inner.max_gap
    }
    #[setter]
    fn set_max_gap(&mut self, v: usize) {
        self.inner.max_gap = v;
    }
    #[getter]
    fn min_length(&self) -> f64 {
        self.inner.min_length
    }
    #[setter]
    fn set_min_length(&mut self, v: f64) {
        self.inner.min_length = v;
    }
    #[getter]
    fn dedup(&self) -> bool {
        self.inner.dedup
    }
    #[setter]
    fn set_dedup(&mut self, v: bool) {
        self.inner.dedup = v;
    }
    #[getter]
    fn threads(&self) -> Option<usize> {
        self.inner.threads
    }
    #[setter]
    fn set_threads(&mut self, v: Option<usize>) {
        self.inner.threads = v;
    }
    #[getter]
    fn validation_tolerance(&self) -> f64 {
        self.inner.tolerance()
    }
    #[setter]
    fn set_validation_tolerance(&mut self, v: Option<f64>) {
        self.inner.validation_tolerance = v;
    }
    /// `"tv"` or `"t"`.
    #[getter]
    fn statistic(&self) -> &'static str {
        match self.inner.statistic {
            Statistic::Tv => "tv",
            Statistic::TStatistic => "t",
        }
    }
    #[setter]
    fn set_statistic(&mut self, v: &str) -> PyResult<()> {
        self.inner.statistic = match v {
            "tv" => Statistic::Tv,
            "t" => Statistic::TStatistic,
            _ => return Err(PyValueError::new_err(format!("unknown statistic {v:?}; use 'tv' or 't'"))),
        };
        Ok(())
    }
}

/// One detected segment: midline endpoints in pixel coordinates, orientation
/// in degrees (counter-clockwise, y up), width, edge sign and direction bin.
#[pyclass(module = "seglink_py", frozen, get_all, from_py_object)]
#[derive(Clone)]
struct Rectangle {
    theta_deg: f64,
    x0: f64,
    y0: f64,
    x1: f64,
    y1: f64,
    width_px: f64,
    sign: i8,
    bin: usize,
    score: f64,
}

impl From<&seglink::Rectangle> for Rectangle {
    fn from(r: &seglink::Rectangle) -> Self {
        Self {
            theta_deg: r.theta_deg,
            x0: r.x0,
            y0: r.y0,
            x1: r.x1,
            y1: r.y1,
            width_px: r.width_px,
            sign: r.sign,
            bin: r.bin,
            score: r.score,
        }
    }
}

#[pymethods]
impl Rectangle {
    fn length(&self) -> f64 {
        (self.x1 - self.x0).hypot(self.y1 - self.y0)
    }

    fn __repr__(&self) -> String {
        format!(
            "Rectangle(({:.2}, {:.2})-({:.2}, {:.2}), theta={:.2}, width={:.2}, sign={})",
            self.x0, self.y0, self.x1, self.y1, self.theta_deg, self.width_px, self.sign
        )
    }
}

#[pyclass(module = "seglink_py", frozen)]
struct DetectionResult {
    inner: seglink::DetectionResult,
    #[pyo3(get)]
    rectangles: Vec<Rectangle>,
}

impl From<seglink::DetectionResult> for DetectionResult {
    fn from(inner: seglink::DetectionResult) -> Self {
        let rectangles = inner.rectangles.iter().map(Rectangle::from).collect();
        Self { inner, rectangles }
    }
}

#[pymethods]
impl DetectionResult {
    #[getter]
    fn width(&self) -> usize {
        self.inner.width
    }

    #[getter]
    fn height(&self) -> usize {
        self.inner.height
    }

    /// Wall-clock seconds per stage.
    #[getter]
    fn timing(&self) -> Vec<(&'static str, f64)> {
        let t = self.inner.timing;
        vec![
            ("lut", t.lut_s),
            ("gradients", t.gradients_s),
            ("directions", t.directions_s),
            ("merge", t.merge_s),
            ("total", t.total_s),
        ]
    }

    fn to_jsonl(&self) -> String {
        to_jsonl(&self.inner)
    }

    fn __len__(&self) -> usize {
        self.rectangles.len()
    }
}

/// Reusable detector; building one precomputes the distance table.
#[pyclass(module = "seglink_py", frozen)]
struct Detector {
    inner: seglink::Detector,
}

#[pymethods]
impl Detector {
    #[new]
    #[pyo3(signature = (config = None))]
    fn new(config: Option<Config>) -> PyResult<Self> {
        let cfg = config.map_or_else(seglink::DetectorConfig::default, |c| c.inner);
        Ok(Self { inner: seglink::Detector::new(cfg).map_err(to_py)? })
    }

    #[getter]
    fn config(&self) -> Config {
        Config { inner: *self.inner.config() }
    }

    /// Detect segments in an image given as rows of gray values.
    fn detect(&self, py: Python<'_>, rows: Vec<Vec<f64>>) -> PyResult<DetectionResult> {
        let img = image_from_rows(rows)?;
        self.run(py, &img)
    }

    /// Detect segments in a row-major 8-bit buffer.
    fn detect_bytes(&self, py: Python<'_>, data: &[u8], width: usize, height: usize) -> PyResult<DetectionResult> {
        let img = image_from_bytes(data, width, height)?;
        self.run(py, &img)
    }

    /// Detect segments in an image file (PNG or PGM).
    fn detect_file(&self, py: Python<'_>, path: std::path::PathBuf) -> PyResult<DetectionResult> {
        let img = GrayImage::load(path).map_err(to_py)?;
        self.run(py, &img)
    }
}

impl Detector {
    fn run(&self, py: Python<'_>, img: &GrayImage) -> PyResult<DetectionResult> {
        py.detach(|| self.inner.detect(img)).map(Into::into).map_err(to_py)
    }
}

/// One-shot detection with an optional configuration.
#[pyfunction]
#[pyo3(signature = (rows, config = None))]
fn detect(py: Python<'_>, rows: Vec<Vec<f64>>, config: Option<Config>) -> PyResult<DetectionResult> {
    Detector::new(config)?.detect(py, rows)
}

/// Render a scene from its JSON description.
///
/// Returns `(width, height, pixels, truth_json)` where `pixels` is a
/// row-major 8-bit buffer.
#[pyfunction]
fn generate_synthetic(spec_json: &str) -> PyResult<(usize, usize, Vec<u8>, String)> {
    let spec: SceneSpec = serde_json::from_str(spec_json).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let (img, truth) = spec.generate().map_err(to_py)?;
    let pixels = img.to_luma8().into_raw();
    let truth = serde_json::to_string(&truth).expect("truth serializes");
    Ok((img.width(), img.height(), pixels, truth))
}

#[pymodule]
fn seglink_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(tv_distance, m)?)?;
    m.add_function(wrap_pyfunction!(normalize, m)?)?;
    m.add_function(wrap_pyfunction!(t_statistic, m)?)?;
    m.add_function(wrap_pyfunction!(detect, m)?)?;
    m.add_function(wrap_pyfunction!(generate_synthetic, m)?)?;
    m.add_class::<TvLut>()?;
    m.add_class::<Config>()?;
    m.add_class::<Rectangle>()?;
    m.add_class::<DetectionResult>()?;
    m.add_class::<Detector>()?;
    Ok(())
}
