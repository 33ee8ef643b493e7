//! From signed edge maps to oriented rectangles.
//!
//! Angles are degrees in `[0, 180)`, measured counter-clockwise from the +x
//! axis in a frame whose y axis points up the image. Rectangle endpoints are
//! reported in image coordinates (`x` right, `y` = row, down).

use serde::{Deserialize, Serialize};

use crate::direction::Direction;
use crate::linker::SignedEdgeMap;

/// A same-sign 8-connected component of marked pixels.
#[derive(Debug, Clone)]
pub struct Region {
    pub label: usize,
    pub sign: i8,
    /// `(x, row)` in discovery order.
    pub pixels: Vec<(usize, usize)>,
    pub direction: Direction,
    /// Mean marked strength over the pixels.
    pub score: f64,
}

/// Label maximal same-sign 8-connected components, dropping those with fewer
/// than `min_size` pixels. Labels follow raster order of each component's
/// first pixel.
pub fn label_regions(map: &SignedEdgeMap, min_size: usize) -> Vec<Region> {
    let (w, h) = (map.width(), map.height());
    let values = map.values();
    let mut seen = vec![false; w * h];
    let mut regions = Vec::new();
    let mut stack = Vec::new();
    for start in 0..w * h {
        let sign = values[start];
        if sign == 0 || seen[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let mut pixels = Vec::new();
        let mut strength = 0.0;
        while let Some(i) = stack.pop() {
            let (x, row) = (i % w, i / w);
            pixels.push((x, row));
            strength += map.strength(i) as f64;
            for dr in -1i64..=1 {
                for dx in -1i64..=1 {
                    let (nx, nr) = (x as i64 + dx, row as i64 + dr);
                    if nx < 0 || nr < 0 || nx >= w as i64 || nr >= h as i64 {
                        continue;
                    }
                    let j = nr as usize * w + nx as usize;
                    if !seen[j] && values[j] == sign {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        if pixels.len() >= min_size {
            let score = strength / pixels.len() as f64;
            regions.push(Region {
                label: regions.len(),
                sign,
                pixels,
                direction: map.direction,
                score,
            });
        }
    }
    regions
}

/// A fitted line: orientation plus a point it passes through (upward frame).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Line {
    pub angle_deg: f64,
    pub point: (f64, f64),
}

impl Line {
    /// Coordinate along `normal` where this line meets the transversal at
    /// position `t` along `axis`.
    fn offset_at(&self, axis: (f64, f64), normal: (f64, f64), t: f64) -> f64 {
        let r = self.angle_deg.to_radians();
        let e = (r.cos(), r.sin());
        let along = axis.0 * e.0 + axis.1 * e.1;
        let c_t = axis.0 * self.point.0 + axis.1 * self.point.1;
        let c_s = normal.0 * self.point.0 + normal.1 * self.point.1;
        let lambda = (t - c_t) / along;
        c_s + lambda * (normal.0 * e.0 + normal.1 * e.1)
    }
}

/// Total least squares line through `points`. `None` for fewer than two
/// distinct points.
pub fn fit_tls(points: &[(f64, f64)]) -> Option<Line> {
    let n = points.len() as f64;
    if points.len() < 2 {
        return None;
    }
    let (sx, sy) = points.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
    let (cx, cy) = (sx / n, sy / n);
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for &(x, y) in points {
        let (dx, dy) = (x - cx, y - cy);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx + syy == 0.0 {
        return None;
    }
    let angle = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    Some(Line {
        angle_deg: wrap180(angle.to_degrees()),
        point: (cx, cy),
    })
}

/// `v` reduced to `[0, 180)`.
pub fn wrap180(v: f64) -> f64 {
    let r = v.rem_euclid(180.0);
    if r >= 180.0 {
        0.0
    } else {
        r
    }
}

/// Signed difference `a - b` of two orientations, in `[-90, 90)`.
pub fn angle_diff(a: f64, b: f64) -> f64 {
    (a - b + 90.0).rem_euclid(180.0) - 90.0
}

fn upward(p: (usize, usize), height: usize) -> (f64, f64) {
    (p.0 as f64, (height - 1 - p.1) as f64)
}

/// Upper and lower limit lines of a region.
///
/// Pixels are grouped by their position along the scan axis (`x` for
/// near-horizontal directions, height for near-vertical ones); the extreme
/// pixels of each group across the axis form the two limit sets, each fitted
/// by total least squares. Needs at least two groups.
pub fn fit_limit_lines(region: &Region, height: usize) -> Option<(Line, Line)> {
    use std::collections::BTreeMap;
    let horizontal = region.direction.half == crate::direction::Half::H;
    let mut groups: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for &(x, row) in &region.pixels {
        let y = height - 1 - row;
        let (along, across) = if horizontal { (x, y) } else { (y, x) };
        groups
            .entry(along)
            .and_modify(|(lo, hi)| {
                *lo = (*lo).min(across);
                *hi = (*hi).max(across);
            })
            .or_insert((across, across));
    }
    if groups.len() < 2 {
        return None;
    }
    let point = |along: usize, across: usize| -> (f64, f64) {
        if horizontal {
            (along as f64, across as f64)
        } else {
            (across as f64, along as f64)
        }
    };
    // "Upper" is the side to the left of the direction, i.e. up the image
    // for near-horizontal directions.
    let r = region.direction.theta_deg.to_radians();
    let n = (-r.sin(), r.cos());
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for (&along, &(lo, hi)) in &groups {
        a.push(point(along, lo));
        b.push(point(along, hi));
    }
    let (la, lb) = (fit_tls(&a)?, fit_tls(&b)?);
    let proj = |l: &Line| n.0 * l.point.0 + n.1 * l.point.1;
    Some(if proj(&la) >= proj(&lb) { (la, lb) } else { (lb, la) })
}

/// Accept a pair of limit lines for `direction`: their orientations must
/// agree within `tolerance` degrees and their circular mean must fall in the
/// direction's bin. Returns that mean.
pub fn validate(upper: &Line, lower: &Line, direction: &Direction, tolerance: f64) -> Option<f64> {
    let d = angle_diff(upper.angle_deg, lower.angle_deg);
    if d.abs() > tolerance {
        return None;
    }
    let theta = wrap180(lower.angle_deg + d / 2.0);
    let off = angle_diff(theta, direction.theta_deg).abs();
    (off <= direction.bin_half_width() + 1e-9).then_some(theta)
}

/// A validated segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rectangle {
    pub theta_deg: f64,
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
    pub width_px: f64,
    pub sign: i8,
    pub bin: usize,
    pub score: f64,
}

impl Rectangle {
    /// Distance between the midline endpoints, which sit on the centres of
    /// the extreme pixels.
    pub fn length(&self) -> f64 {
        (self.x1 - self.x0).hypot(self.y1 - self.y0)
    }

    /// Unit vector along the midline, in image coordinates.
    fn axis(&self) -> (f64, f64) {
        let r = self.theta_deg.to_radians();
        (r.cos(), -r.sin())
    }
}

/// Build the rectangle for a validated region.
///
/// The end limits are perpendicular to `theta` through the extreme pixel
/// projections; the midline is the average of the two limit lines between
/// them; the width is the distance between the limit lines plus one pixel.
pub fn build_rectangle(region: &Region, upper: &Line, lower: &Line, theta: f64, height: usize) -> Rectangle {
    let r = theta.to_radians();
    let axis = (r.cos(), r.sin());
    let normal = (-r.sin(), r.cos());
    let (mut tmin, mut tmax) = (f64::INFINITY, f64::NEG_INFINITY);
    for &p in &region.pixels {
        let (x, y) = upward(p, height);
        let t = axis.0 * x + axis.1 * y;
        tmin = tmin.min(t);
        tmax = tmax.max(t);
    }
    let su = |t| upper.offset_at(axis, normal, t);
    let sl = |t| lower.offset_at(axis, normal, t);
    let mid = |t: f64| 0.5 * (su(t) + sl(t));
    // Width from the mean gap over the span; the gap is linear in t.
    let gap = |t: f64| (su(t) - sl(t)).abs();
    let width = 0.5 * (gap(tmin) + gap(tmax)) + 1.0;
    let end = |t: f64| {
        let s = mid(t);
        let (x, y) = (t * axis.0 + s * normal.0, t * axis.1 + s * normal.1);
        (x, (height - 1) as f64 - y)
    };
    let (p0, p1) = (end(tmin), end(tmax));
    Rectangle {
        theta_deg: theta,
        x0: p0.0,
        y0: p0.1,
        x1: p1.0,
        y1: p1.1,
        width_px: width,
        sign: region.sign,
        bin: region.direction.index,
        score: region.score,
    }
}

/// Fit, validate and build one rectangle per region, dropping those whose
/// midline is shorter than `min_length`.
pub fn rectangles_for(regions: &[Region], height: usize, tolerance: f64, min_length: f64) -> Vec<Rectangle> {
    regions
        .iter()
        .filter_map(|region| {
            let (upper, lower) = fit_limit_lines(region, height)?;
            let theta = validate(&upper, &lower, &region.direction, tolerance)?;
            let rect = build_rectangle(region, &upper, &lower, theta, height);
            (rect.length() >= min_length).then_some(rect)
        })
        .collect()
}

/// True when `a` and `b` describe the same segment: same sign, orientations
/// within `angle_tol`, overlapping by at least half the longer midline, and
/// no further apart across the midline than the wider of the two.
pub fn is_duplicate(a: &Rectangle, b: &Rectangle, angle_tol: f64) -> bool {
    if a.sign != b.sign || angle_diff(a.theta_deg, b.theta_deg).abs() > angle_tol {
        return false;
    }
    let (long, short) = if a.length() >= b.length() { (a, b) } else { (b, a) };
    let u = long.axis();
    let proj = |x: f64, y: f64| (x - long.x0) * u.0 + (y - long.y0) * u.1;
    let (l0, l1) = (0.0_f64, long.length());
    let (s0, s1) = {
        let (p, q) = (proj(short.x0, short.y0), proj(short.x1, short.y1));
        (p.min(q), p.max(q))
    };
    // Pixel extents on both ends.
    let overlap = ((l1 + 0.5).min(s1 + 0.5) - (l0 - 0.5).max(s0 - 0.5)).max(0.0);
    if overlap < 0.5 * (long.length() + 1.0) {
        return false;
    }
    let (mx, my) = (0.5 * (short.x0 + short.x1), 0.5 * (short.y0 + short.y1));
    let across = ((mx - long.x0) * -u.1 + (my - long.y0) * u.0).abs();
    across <= long.width_px.max(short.width_px)
}

/// Canonical output order: bin, then midline start, then the rest.
pub fn sort_canonical(rects: &mut [Rectangle]) {
    rects.sort_by(|a, b| {
        a.bin
            .cmp(&b.bin)
            .then(a.x0.total_cmp(&b.x0))
            .then(a.y0.total_cmp(&b.y0))
            .then(a.x1.total_cmp(&b.x1))
            .then(a.y1.total_cmp(&b.y1))
            .then(a.sign.cmp(&b.sign))
    });
}

/// Drop duplicates across directions, keeping the longer of each pair, and
/// return the survivors in canonical order.
pub fn merge_duplicates(mut rects: Vec<Rectangle>, angle_tol: f64) -> Vec<Rectangle> {
    sort_canonical(&mut rects);
    // Longest first; the stable sort keeps canonical order among ties.
    let mut order: Vec<usize> = (0..rects.len()).collect();
    order.sort_by(|&i, &j| rects[j].length().total_cmp(&rects[i].length()));
    let mut kept: Vec<Rectangle> = Vec::new();
    for i in order {
        let r = rects[i];
        if !kept.iter().any(|k| is_duplicate(k, &r, angle_tol)) {
            kept.push(r);
        }
    }
    sort_canonical(&mut kept);
    kept
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::direction::classify;
    use crate::linker::SignedEdgeMap;

    fn region(pixels: Vec<(usize, usize)>, n: usize) -> Region {
        Region {
            label: 0,
            sign: 1,
            pixels,
            direction: classify(n, 32).unwrap(),
            score: 0.9,
        }
    }

    fn bar() -> Region {
        let mut px = Vec::new();
        for row in 10..=12 {
            for x in 5..=104 {
                px.push((x, row));
            }
        }
        region(px, 1)
    }

    fn map(w: usize, h: usize, marks: &[(usize, usize, i8)]) -> SignedEdgeMap {
        let mut v = vec![0; w * h];
        for &(x, row, s) in marks {
            v[row * w + x] = s;
        }
        SignedEdgeMap::from_values(classify(1, 32).unwrap(), w, h, v).unwrap()
    }

    #[test]
    fn single_run_is_one_region() {
        let marks: Vec<_> = (0..100).map(|x| (x + 2, 5, 1)).collect();
        let regions = label_regions(&map(110, 10, &marks), 15);
        assert_eq!(regions.len(), 1);
        assert_eq!(regions[0].pixels.len(), 100);
    }

    #[test]
    fn diagonal_neighbours_merge_but_signs_do_not() {
        // Two staggered runs touching diagonally, plus an opposite-sign run
        // directly below.
        let mut marks: Vec<_> = (0..20).map(|x| (x, 3, 1)).collect();
        marks.extend((20..40).map(|x| (x, 4, 1)));
        marks.extend((0..20).map(|x| (x, 4, -1)));
        let regions = label_regions(&map(50, 10, &marks), 15);
        assert_eq!(regions.len(), 2);
        let pos = regions.iter().find(|r| r.sign == 1).unwrap();
        assert_eq!(pos.pixels.len(), 40);
        assert_eq!(regions.iter().find(|r| r.sign == -1).unwrap().pixels.len(), 20);
    }

    #[test]
    fn small_components_are_dropped() {
        let marks: Vec<_> = (0..14).map(|x| (x, 3, 1)).collect();
        assert!(label_regions(&map(20, 6, &marks), 15).is_empty());
    }

    #[test]
    fn perfect_bar_limits_are_its_rows() {
        let h = 40;
        let (upper, lower) = fit_limit_lines(&bar(), h).unwrap();
        assert!(angle_diff(upper.angle_deg, 0.0).abs() < 1e-12);
        assert!(angle_diff(lower.angle_deg, 0.0).abs() < 1e-12);
        // Row 10 is the upper limit.
        assert!((upper.point.1 - (h - 1 - 10) as f64).abs() < 1e-12);
        assert!((lower.point.1 - (h - 1 - 12) as f64).abs() < 1e-12);
    }

    #[test]
    fn perfect_bar_rectangle() {
        let h = 40;
        let reg = bar();
        let (u, l) = fit_limit_lines(&reg, h).unwrap();
        let theta = validate(&u, &l, &reg.direction, 180.0 / 32.0).unwrap();
        assert!(angle_diff(theta, 0.0).abs() < 1e-12);
        let r = build_rectangle(&reg, &u, &l, theta, h);
        for (got, want) in [(r.x0, 5.0), (r.y0, 11.0), (r.x1, 104.0), (r.y1, 11.0), (r.width_px, 3.0)] {
            assert!((got - want).abs() < 1e-9, "{r:?}");
        }
        assert_eq!(r.length(), 99.0);
    }

    #[test]
    fn thin_run_has_unit_width() {
        let reg = region((20..35).map(|x| (x, 7)).collect(), 1);
        let (u, l) = fit_limit_lines(&reg, 20).unwrap();
        assert_eq!(u, l);
        let r = build_rectangle(&reg, &u, &l, 0.0, 20);
        assert!((r.width_px - 1.0).abs() < 1e-12);
        assert_eq!(r.length(), 14.0);
    }

    #[test]
    fn rotated_bar_fits_its_angle() {
        // Rasterized 3° bar, 3 px wide, in the upward frame.
        let h = 60;
        let t = 3.0_f64.to_radians();
        let mut px = Vec::new();
        for row in 0..h {
            for x in 0..200 {
                let y = (h - 1 - row) as f64;
                let (dx, dy) = (x as f64 - 10.0, y - 20.0);
                let along = dx * t.cos() + dy * t.sin();
                let across = -dx * t.sin() + dy * t.cos();
                if (0.0..180.0).contains(&along) && (-1.5..1.5).contains(&across) {
                    px.push((x, row));
                }
            }
        }
        let reg = region(px, 2);
        let (u, l) = fit_limit_lines(&reg, h).unwrap();
        assert!((u.angle_deg - 3.0).abs() < 0.5, "{u:?}");
        assert!((l.angle_deg - 3.0).abs() < 0.5, "{l:?}");
        let theta = validate(&u, &l, &reg.direction, 180.0 / 32.0).unwrap();
        let r = build_rectangle(&reg, &u, &l, theta, h);
        let start = (10.0, (h - 1) as f64 - 20.0);
        let end = (10.0 + 179.0 * t.cos(), (h - 1) as f64 - 20.0 - 179.0 * t.sin());
        assert!((r.x0 - start.0).hypot(r.y0 - start.1) <= 1.0, "{r:?}");
        assert!((r.x1 - end.0).hypot(r.y1 - end.1) <= 1.0, "{r:?}");
    }

    fn line(angle: f64) -> Line {
        Line {
            angle_deg: angle,
            point: (0.0, 0.0),
        }
    }

    #[test]
    fn validation_window() {
        let d = classify(4, 32).unwrap();
        let th = d.theta_deg;
        assert_eq!(validate(&line(th), &line(th), &d, 5.625), Some(th));
        assert_eq!(validate(&line(th + 7.5), &line(th - 7.5), &d, 11.25), None);
        // The bin is ±90/N = ±2.8125° wide.
        assert!(validate(&line(th + 2.9), &line(th + 2.9), &d, 11.25).is_none());
        assert!(validate(&line(th + 2.8), &line(th + 2.8), &d, 11.25).is_some());
        // Circular averaging across the 0/180 seam.
        let d0 = classify(1, 32).unwrap();
        let theta = validate(&line(178.0), &line(2.0), &d0, 11.25).unwrap();
        assert!(angle_diff(theta, 0.0).abs() < 1e-9);
    }

    fn rect(theta: f64, p0: (f64, f64), p1: (f64, f64), bin: usize) -> Rectangle {
        Rectangle {
            theta_deg: theta,
            x0: p0.0,
            y0: p0.1,
            x1: p1.0,
            y1: p1.1,
            width_px: 3.0,
            sign: 1,
            bin,
            score: 0.9,
        }
    }

    #[test]
    fn duplicates_across_bins_collapse() {
        let tol = 180.0 / 32.0;
        let a = rect(0.0, (0.0, 10.0), (99.0, 10.0), 0);
        let b = rect(5.0, (2.0, 11.0), (90.0, 10.5), 1);
        let out = merge_duplicates(vec![b, a], tol);
        assert_eq!(out, vec![a]);
    }

    #[test]
    fn crossing_and_disjoint_segments_survive() {
        let tol = 180.0 / 32.0;
        let a = rect(0.0, (0.0, 50.0), (99.0, 50.0), 0);
        let cross = rect(90.0, (50.0, 99.0), (50.0, 0.0), 16);
        let far = rect(0.0, (200.0, 50.0), (299.0, 50.0), 0);
        let mut opposite = a;
        opposite.sign = -1;
        let out = merge_duplicates(vec![a, cross, far, opposite], tol);
        assert_eq!(out.len(), 4);
        assert!(out.windows(2).all(|w| w[0].bin <= w[1].bin));
    }

    #[test]
    fn angle_helpers() {
        assert_eq!(wrap180(-1.0), 179.0);
        assert_eq!(wrap180(180.0), 0.0);
        assert_eq!(angle_diff(179.0, 1.0), -2.0);
        assert_eq!(angle_diff(1.0, 179.0), 2.0);
    }
}
