//! Connected edge linking along one scan direction.
//!
//! A *contextual* edge compares the Normal fits of the two sample windows on
//! either side of a pixel (the "top" window on the side of
//! [`Direction::normal`] and the "bottom" window opposite it). A *local* edge
//! is the quadrant derivative at the pixel itself, signed so that positive
//! means brighter on the top side. A local edge is *valid* when its sign
//! matches the contextual edge and its magnitude reaches `L_C`.
//!
//! Each scan line is walked by a three-state machine:
//!
//! 1. search for a pixel with a contextual edge and a valid local edge;
//! 2. from there, require that the next `M` pixels hold valid local edges no
//!    more than `d` pixels apart, and mark them;
//! 3. slide forward one pixel at a time, re-testing the contextual edge at the
//!    head and the local edge `M - 1` pixels ahead, marking while the gap
//!    counter stays within `d`.
//!
//! When a run ends, its trailing non-edges are unmarked.

use serde::{Deserialize, Serialize};

use crate::direction::{Direction, ScanGeometry, ScanLine};
use crate::error::{Error, Result};
use crate::gradient::GradientStack;
use crate::stats::{t_statistic, NormalParams, TvLut};
use crate::direction::ParamField;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkerConfig {
    /// Minimum |δ| for a contextual edge (`C`).
    pub contextual_threshold: f64,
    /// Floor of the local threshold, gray units (`L`).
    pub local_threshold: f64,
    /// Longest tolerated run of pixels without a valid local edge (`d`).
    pub max_gap: usize,
    /// Samples per window (`M`).
    pub window: usize,
    /// Number of scan directions (`N`).
    pub directions: usize,
}

impl Default for LinkerConfig {
    fn default() -> Self {
        Self {
            contextual_threshold: 0.7,
            local_threshold: 3.0,
            max_gap: 5,
            window: 15,
            directions: 32,
        }
    }
}

impl LinkerConfig {
    pub fn validate(&self) -> Result<()> {
        let c = self.contextual_threshold;
        if !(c > 0.0 && c <= 1.0) {
            return Err(Error::InvalidConfig(format!("contextual threshold must be in (0, 1], got {c}")));
        }
        if !(self.local_threshold >= 0.0 && self.local_threshold.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "local threshold must be >= 0, got {}",
                self.local_threshold
            )));
        }
        if self.window < 2 {
            return Err(Error::InvalidConfig(format!("window must be >= 2, got {}", self.window)));
        }
        if self.directions == 0 {
            return Err(Error::InvalidConfig("need at least one direction".into()));
        }
        Ok(())
    }
}

/// `L_C = max(L, |μ_T - μ_B| / 2)`.
pub fn local_threshold(l: f64, mu_top: f64, mu_bottom: f64) -> f64 {
    l.max((mu_top - mu_bottom).abs() / 2.0)
}

/// Signed contextual edge strength with its validity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContextualEdge {
    pub delta: f64,
    pub valid: bool,
}

/// `δ = Δ(μ′, σ′) · sgn(μ_T - μ_B)`, valid iff `|δ| >= C`.
pub fn contextual_edge(top: NormalParams, bottom: NormalParams, lut: &TvLut, c: f64) -> ContextualEdge {
    let delta = lut.distance(top, bottom) * sign(top.mu - bottom.mu);
    ContextualEdge {
        delta,
        valid: delta.abs() >= c,
    }
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Two-sample statistic that turns a pair of window fits into a signed
/// contextual edge strength.
pub trait ContextTest: Sync {
    /// Signed strength; positive when the top window is brighter.
    fn score(&self, top: NormalParams, bottom: NormalParams) -> f64;

    /// Minimum |score| for a contextual edge.
    fn threshold(&self) -> f64;
}

/// Total variation distance through a precomputed table.
#[derive(Debug, Clone, Copy)]
pub struct TvTest<'a> {
    pub lut: &'a TvLut,
    pub threshold: f64,
}

impl ContextTest for TvTest<'_> {
    fn score(&self, top: NormalParams, bottom: NormalParams) -> f64 {
        contextual_edge(top, bottom, self.lut, self.threshold).delta
    }

    fn threshold(&self) -> f64 {
        self.threshold
    }
}

/// Two-sample t statistic. Blind to variance-only differences; kept for
/// comparison with [`TvTest`].
#[derive(Debug, Clone, Copy)]
pub struct TTest {
    pub window: usize,
    pub threshold: f64,
}

impl TTest {
    /// The |t| that an equal-variance step reaches exactly when its TV
    /// distance equals `tv_threshold`: `μ′ = 2 Φ⁻¹((1 + C) / 2)` and
    /// `t = μ′ √(M / 2)`.
    pub fn matching_tv(tv_threshold: f64, window: usize) -> Self {
        let target = (1.0 + tv_threshold) / 2.0;
        // Bisection on the standard Normal CDF.
        let (mut lo, mut hi) = (0.0_f64, 40.0_f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if crate::stats::std_normal_cdf(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mu_prime = 2.0 * 0.5 * (lo + hi);
        Self {
            window,
            threshold: mu_prime * (window as f64 / 2.0).sqrt(),
        }
    }
}

impl ContextTest for TTest {
    fn score(&self, top: NormalParams, bottom: NormalParams) -> f64 {
        let (top, bottom) = (top.clamped(), bottom.clamped());
        t_statistic(top, bottom, self.window).unwrap_or(0.0)
    }

    fn threshold(&self) -> f64 {
        self.threshold
    }
}

/// Contextual edge data at one scan position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contextual {
    /// Signed strength from the [`ContextTest`].
    pub delta: f64,
    /// `L_C` for the local edges tested against this contextual edge.
    pub local_threshold: f64,
}

/// Everything the state machine needs along one scan line.
#[derive(Debug, Clone, Default)]
pub struct LineSamples {
    /// `None` where either sample window is unavailable.
    pub contextual: Vec<Option<Contextual>>,
    /// Signed local derivative; NaN where undefined.
    pub local: Vec<f64>,
}

impl LineSamples {
    pub fn len(&self) -> usize {
        self.local.len()
    }

    pub fn is_empty(&self) -> bool {
        self.local.is_empty()
    }

    fn clear(&mut self) {
        self.contextual.clear();
        self.local.clear();
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScanState {
    Search,
    Mark {
        sign: i8,
        start: usize,
        last: usize,
        /// Pixels since the last valid local edge.
        gap: usize,
    },
}

/// Linking state for one scan line.
#[derive(Debug)]
pub struct LineLinker<'a> {
    samples: &'a LineSamples,
    window: usize,
    max_gap: usize,
    threshold: f64,
    state: ScanState,
    resume: usize,
    /// Per-position sign, `-1`, `0` or `+1`.
    pub marks: Vec<i8>,
    /// |δ| recorded when each position was marked.
    pub strength: Vec<f32>,
}

impl<'a> LineLinker<'a> {
    pub fn new(samples: &'a LineSamples, config: &LinkerConfig, threshold: f64) -> Self {
        let n = samples.len();
        Self {
            samples,
            window: config.window,
            max_gap: config.max_gap,
            threshold,
            state: ScanState::Search,
            resume: 0,
            marks: vec![0; n],
            strength: vec![0.0; n],
        }
    }

    pub fn state(&self) -> ScanState {
        self.state
    }

    /// `sign · local >= L_C`; undefined derivatives never qualify.
    fn valid_local(&self, k: usize, sign: f64, lc: f64) -> bool {
        let g = self.samples.local[k];
        !g.is_nan() && sign * g >= lc
    }

    /// Try to open a run at position `x`. On success the `M` positions from
    /// `x` are marked and the state becomes [`ScanState::Mark`].
    pub fn find_initial(&mut self, x: usize) -> bool {
        debug_assert_eq!(self.state, ScanState::Search);
        let m = self.window;
        if x < self.resume || x + m > self.samples.len() {
            return false;
        }
        let Some(ctx) = self.samples.contextual[x] else {
            return false;
        };
        let g = self.samples.local[x];
        let lc = ctx.local_threshold;
        if !(ctx.delta.abs() >= self.threshold && g.abs() >= lc && ctx.delta * g > 0.0) {
            return false;
        }
        let s = sign(ctx.delta);
        let mut gap = 0;
        for k in x..x + m {
            if gap > self.max_gap {
                break;
            }
            if self.valid_local(k, s, lc) {
                gap = 0;
            } else {
                gap += 1;
            }
        }
        if gap > self.max_gap {
            return false;
        }
        let sign_i = s as i8;
        for k in x..x + m {
            self.marks[k] = sign_i;
            self.strength[k] = ctx.delta.abs() as f32;
        }
        self.state = ScanState::Mark {
            sign: sign_i,
            start: x,
            last: x + m - 1,
            gap,
        };
        true
    }

    /// Advance an open run with its head at `x`. Returns `false` when the
    /// run ended (after cleanup) and the state is back to searching.
    pub fn extend_run(&mut self, x: usize) -> bool {
        let ScanState::Mark {
            sign: run_sign,
            start,
            last,
            gap,
        } = self.state
        else {
            panic!("extend_run called while searching");
        };
        let s = run_sign as f64;
        let head = x + self.window - 1;
        let ctx = match self.samples.contextual[x] {
            Some(c) if c.delta.abs() >= self.threshold && sign(c.delta) == s => c,
            _ => {
                self.terminate(x, start, last, gap);
                return false;
            }
        };
        if head >= self.samples.len() {
            self.terminate(x, start, last, gap);
            return false;
        }
        let gap = if self.valid_local(head, s, ctx.local_threshold) {
            0
        } else {
            gap + 1
        };
        if gap > self.max_gap {
            // `head` is not marked; the `gap - 1` before it are.
            self.terminate(x, start, last, gap - 1);
            return false;
        }
        self.marks[head] = run_sign;
        self.strength[head] = ctx.delta.abs() as f32;
        self.state = ScanState::Mark {
            sign: run_sign,
            start,
            last: head,
            gap,
        };
        true
    }

    /// Unmark the `trailing` non-edges ending at `last`; drop the run if what
    /// remains is shorter than `M`.
    fn terminate(&mut self, x: usize, start: usize, last: usize, trailing: usize) {
        let end = last - trailing;
        for k in end + 1..=last {
            self.marks[k] = 0;
            self.strength[k] = 0.0;
        }
        if end + 1 - start < self.window {
            for k in start..=end {
                self.marks[k] = 0;
                self.strength[k] = 0.0;
            }
        }
        self.resume = (x + 1).max(end + 1);
        self.state = ScanState::Search;
    }

    /// Position `x` of the line walk.
    pub fn step(&mut self, x: usize) {
        match self.state {
            ScanState::Search => {
                self.find_initial(x);
            }
            ScanState::Mark { .. } => {
                self.extend_run(x);
            }
        }
    }

    /// Walk the whole line and return the marks and strengths.
    pub fn run(mut self) -> (Vec<i8>, Vec<f32>) {
        for x in 0..self.samples.len() {
            self.step(x);
        }
        if let ScanState::Mark { start, last, gap, .. } = self.state {
            self.terminate(self.samples.len(), start, last, gap);
        }
        (self.marks, self.strength)
    }
}

/// Per-direction map of marked connected edge points.
#[derive(Debug, Clone)]
pub struct SignedEdgeMap {
    pub direction: Direction,
    width: usize,
    height: usize,
    values: Vec<i8>,
    strength: Vec<f32>,
}

/// A maximal same-sign stretch of marks on one scan line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Run {
    pub line: usize,
    pub start: usize,
    pub len: usize,
    pub sign: i8,
}

impl SignedEdgeMap {
    pub fn empty(direction: Direction, width: usize, height: usize) -> Self {
        Self {
            direction,
            width,
            height,
            values: vec![0; width * height],
            strength: vec![0.0; width * height],
        }
    }

    /// Map with the given signs and unit strength on marked pixels.
    pub fn from_values(direction: Direction, width: usize, height: usize, values: Vec<i8>) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::InvalidConfig(format!(
                "{} values for a {width}x{height} map",
                values.len()
            )));
        }
        let strength = values.iter().map(|&v| (v != 0) as u8 as f32).collect();
        Ok(Self {
            direction,
            width,
            height,
            values,
            strength,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[i8] {
        &self.values
    }

    pub fn get(&self, x: usize, row: usize) -> i8 {
        self.values[row * self.width + x]
    }

    pub fn strength(&self, idx: usize) -> f32 {
        self.strength[idx]
    }

    pub fn marked_count(&self) -> usize {
        self.values.iter().filter(|&&v| v != 0).count()
    }

    /// Maximal same-sign runs along the scan lines of `geometry`.
    pub fn runs(&self, geometry: &ScanGeometry) -> Vec<Run> {
        let mut out = Vec::new();
        for (li, line) in geometry.lines().iter().enumerate() {
            let mut k = 0;
            while k < line.len {
                let v = self.values[geometry.index(line, k)];
                if v == 0 {
                    k += 1;
                    continue;
                }
                let start = k;
                while k < line.len && self.values[geometry.index(line, k)] == v {
                    k += 1;
                }
                out.push(Run {
                    line: li,
                    start,
                    len: k - start,
                    sign: v,
                });
            }
        }
        out
    }
}

/// Gather contextual and local samples along `line`.
pub fn line_samples<T: ContextTest + ?Sized>(
    params: &ParamField,
    gradients: &GradientStack,
    geometry: &ScanGeometry,
    line: &ScanLine,
    local_floor: f64,
    test: &T,
    out: &mut LineSamples,
) {
    out.clear();
    let dir = geometry.direction();
    let top = dir.top_offset();
    let bottom = (-top.0, -top.1);
    let kernel_sign = dir.kernel_sign();
    let plane = gradients.plane(dir.quadrant);
    for k in 0..line.len {
        let (x, row) = geometry.pixel(line, k);
        let idx = row * geometry.width() + x;
        out.local.push(kernel_sign * plane[idx]);
        let ctx = match (geometry.shifted(x, row, top), geometry.shifted(x, row, bottom)) {
            (Some(ti), Some(bi)) => match (params.params(ti), params.params(bi)) {
                (Some(t), Some(b)) => Some(Contextual {
                    delta: test.score(t, b),
                    local_threshold: local_threshold(local_floor, t.mu, b.mu),
                }),
                _ => None,
            },
            _ => None,
        };
        out.contextual.push(ctx);
    }
}

/// Link one direction into a signed edge map.
pub fn link_direction<T: ContextTest + ?Sized>(
    params: &ParamField,
    gradients: &GradientStack,
    geometry: &ScanGeometry,
    config: &LinkerConfig,
    test: &T,
) -> SignedEdgeMap {
    let mut map = SignedEdgeMap::empty(*geometry.direction(), geometry.width(), geometry.height());
    let mut samples = LineSamples::default();
    for line in geometry.lines() {
        if line.len < config.window {
            continue;
        }
        line_samples(params, gradients, geometry, line, config.local_threshold, test, &mut samples);
        let (marks, strength) = LineLinker::new(&samples, config, test.threshold()).run();
        for (k, (&m, &s)) in marks.iter().zip(&strength).enumerate() {
            if m != 0 {
                let idx = geometry.index(line, k);
                map.values[idx] = m;
                map.strength[idx] = s;
            }
        }
    }
    map
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::LutConfig;

    fn cfg() -> LinkerConfig {
        LinkerConfig::default()
    }

    /// A line with a uniform positive contextual edge and the given local
    /// values.
    fn line(local: Vec<f64>) -> LineSamples {
        LineSamples {
            contextual: vec![Some(Contextual { delta: 0.9, local_threshold: 3.0 }); local.len()],
            local,
        }
    }

    #[test]
    fn local_threshold_examples() {
        assert_eq!(local_threshold(3.0, 5.0, 5.0), 3.0);
        assert_eq!(local_threshold(3.0, 10.0, 0.0), 5.0);
        assert_eq!(local_threshold(3.0, 0.0, 4.0), 3.0);
    }

    #[test]
    fn contextual_edge_examples() {
        let lut = TvLut::build(LutConfig::default()).unwrap();
        let p = NormalParams::new(40.0, 3.0);
        assert_eq!(contextual_edge(p, p, &lut, 0.7), ContextualEdge { delta: 0.0, valid: false });
        let e = contextual_edge(NormalParams::new(100.0, 1.0), NormalParams::new(0.0, 1.0), &lut, 0.7);
        // The table saturates at μ′ = 8, where the distance is 2Φ(4) - 1.
        let edge = 0.999_936_657_516_334;
        assert!(e.valid && (e.delta - edge).abs() < 1e-9, "{e:?}");
        let e = contextual_edge(NormalParams::new(0.0, 1.0), NormalParams::new(100.0, 1.0), &lut, 0.7);
        assert!(e.valid && (e.delta + edge).abs() < 1e-9);
        assert_eq!(cfg().contextual_threshold, 0.7);
    }

    #[test]
    fn matching_t_threshold() {
        let t = TTest::matching_tv(0.7, 15);
        // Φ⁻¹(0.85) = 1.0364333894937898
        let expected = 2.0 * 1.036_433_389_493_789_8 * 7.5_f64.sqrt();
        assert!((t.threshold - expected).abs() < 1e-9, "{}", t.threshold);
    }

    #[test]
    fn ideal_segment_is_marked_end_to_end() {
        let mut local = vec![0.0; 200];
        local[50..150].iter_mut().for_each(|v| *v = 100.0);
        let s = line(local);
        let (marks, _) = LineLinker::new(&s, &cfg(), 0.7).run();
        let marked: Vec<usize> = (0..200).filter(|&k| marks[k] != 0).collect();
        assert_eq!(marked.first(), Some(&50));
        assert_eq!(marked.last(), Some(&149));
        assert_eq!(marked.len(), 100);
    }

    #[test]
    fn initial_window_tolerates_gap_of_d() {
        for (gap, ok) in [(5, true), (6, false)] {
            let mut local = vec![0.0; 60];
            local[10..40].iter_mut().for_each(|v| *v = 50.0);
            local[12..12 + gap].iter_mut().for_each(|v| *v = 0.0);
            let s = line(local);
            let mut linker = LineLinker::new(&s, &cfg(), 0.7);
            assert_eq!(linker.find_initial(10), ok, "gap {gap}");
            if ok {
                assert!(!matches!(linker.state(), ScanState::Search));
                assert!(linker.marks[10..25].iter().all(|&m| m == 1));
            } else {
                assert_eq!(linker.state(), ScanState::Search);
                assert!(linker.marks.iter().all(|&m| m == 0));
            }
        }
    }

    #[test]
    fn opposite_sign_local_edges_count_as_gaps() {
        let mut local = vec![0.0; 80];
        local[10..70].iter_mut().for_each(|v| *v = 50.0);
        local[30..36].iter_mut().for_each(|v| *v = -80.0);
        let (marks, _) = LineLinker::new(&line(local), &cfg(), 0.7).run();
        assert!(marks[10..30].iter().all(|&m| m == 1));
        assert!(marks[30..36].iter().all(|&m| m == 0));
    }

    #[test]
    fn contextual_sign_flip_ends_run() {
        let n = 120;
        let mut local = vec![0.0; n];
        let mut contextual = vec![None; n];
        for k in 0..n {
            let positive = k < 60;
            local[k] = if positive { 40.0 } else { -40.0 };
            contextual[k] = Some(Contextual {
                delta: if positive { 0.95 } else { -0.95 },
                local_threshold: 3.0,
            });
        }
        let (marks, _) = LineLinker::new(&LineSamples { contextual, local }, &cfg(), 0.7).run();
        assert!(marks[..60].iter().all(|&m| m == 1));
        assert!(marks[60..].iter().all(|&m| m == -1));
    }

    #[test]
    fn short_leftover_after_cleanup_is_dropped() {
        // Valid edges only at the first 8 positions; the initial window
        // passes with 7 trailing non-edges... which exceed d = 5, so use d = 7.
        let mut local = vec![0.0; 40];
        local[0..8].iter_mut().for_each(|v| *v = 50.0);
        let config = LinkerConfig { max_gap: 7, ..cfg() };
        let (marks, _) = LineLinker::new(&line(local), &config, 0.7).run();
        assert!(marks.iter().all(|&m| m == 0));
    }

    #[test]
    fn undefined_context_blocks_start() {
        let mut s = line(vec![50.0; 40]);
        s.contextual[0] = None;
        s.contextual[1] = Some(Contextual { delta: 0.5, local_threshold: 3.0 });
        let (marks, _) = LineLinker::new(&s, &cfg(), 0.7).run();
        assert_eq!(&marks[..2], &[0, 0]);
        assert!(marks[2..].iter().all(|&m| m == 1));
    }
}
