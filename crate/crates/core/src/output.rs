//! Serialization: JSONL results, SVG overlays and debug dumps.

use std::io::{BufRead, Write};

use base64::Engine;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::linker::SignedEdgeMap;
use crate::pipeline::DetectionResult;
use crate::rect::Rectangle;

pub const SCHEMA: &str = "seglink.rectangles";
pub const SCHEMA_VERSION: u32 = 1;

/// First line of a result file. Timing is deliberately absent so that output
/// depends only on the input and configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Header {
    pub schema: String,
    pub version: u32,
    pub width: usize,
    pub height: usize,
    pub directions: usize,
    pub count: usize,
}

pub fn write_jsonl<W: Write>(result: &DetectionResult, mut out: W) -> Result<()> {
    let header = Header {
        schema: SCHEMA.into(),
        version: SCHEMA_VERSION,
        width: result.width,
        height: result.height,
        directions: result.directions,
        count: result.rectangles.len(),
    };
    let io = |e| Error::io("<output>", e);
    serde_json::to_writer(&mut out, &header)?;
    out.write_all(b"\n").map_err(io)?;
    for r in &result.rectangles {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n").map_err(io)?;
    }
    Ok(())
}

pub fn to_jsonl(result: &DetectionResult) -> String {
    let mut buf = Vec::new();
    write_jsonl(result, &mut buf).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("JSON is UTF-8")
}

pub fn read_jsonl<R: BufRead>(input: R) -> Result<(Header, Vec<Rectangle>)> {
    let mut lines = input.lines().enumerate().filter(|(_, l)| !matches!(l, Ok(s) if s.trim().is_empty()));
    let (_, first) = lines.next().ok_or_else(|| Error::Format("empty file".into()))?;
    let header: Header = serde_json::from_str(&first.map_err(|e| Error::io("<input>", e))?)?;
    if header.schema != SCHEMA || header.version != SCHEMA_VERSION {
        return Err(Error::Format(format!(
            "unsupported schema {} v{}",
            header.schema, header.version
        )));
    }
    let mut rects = Vec::with_capacity(header.count);
    for (i, line) in lines {
        let line = line.map_err(|e| Error::io("<input>", e))?;
        let r = serde_json::from_str(&line).map_err(|e| Error::Format(format!("line {}: {e}", i + 1)))?;
        rects.push(r);
    }
    if rects.len() != header.count {
        return Err(Error::Format(format!(
            "header announces {} rectangles, found {}",
            header.count,
            rects.len()
        )));
    }
    Ok((header, rects))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverlayStyle {
    /// Skip rectangles with a shorter midline.
    pub min_length: f64,
    /// Draw midlines only instead of filled rectangles.
    pub midline_only: bool,
    pub positive_color: &'static str,
    pub negative_color: &'static str,
}

impl Default for OverlayStyle {
    fn default() -> Self {
        Self {
            min_length: 0.0,
            midline_only: false,
            positive_color: "#e4572e",
            negative_color: "#2e86de",
        }
    }
}

/// SVG document with the image embedded as a PNG backdrop and one primitive
/// per rectangle, in image pixel coordinates.
pub fn render_svg(image: &GrayImage, rects: &[Rectangle], style: &OverlayStyle) -> Result<String> {
    use std::fmt::Write as _;
    let (w, h) = (image.width(), image.height());
    let mut png = Vec::new();
    image
        .to_luma8()
        .write_to(&mut std::io::Cursor::new(&mut png), ::image::ImageFormat::Png)?;
    let data = base64::engine::general_purpose::STANDARD.encode(&png);
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" xmlns:xlink="http://www.w3.org/1999/xlink" width="{w}" height="{h}" viewBox="-0.5 -0.5 {w} {h}">"#
    );
    let _ = writeln!(
        svg,
        r#"<image x="-0.5" y="-0.5" width="{w}" height="{h}" style="image-rendering:pixelated" xlink:href="data:image/png;base64,{data}"/>"#
    );
    for r in rects.iter().filter(|r| r.length() >= style.min_length) {
        let color = if r.sign > 0 { style.positive_color } else { style.negative_color };
        if style.midline_only {
            let _ = writeln!(
                svg,
                r#"<line x1="{:.3}" y1="{:.3}" x2="{:.3}" y2="{:.3}" stroke="{color}" stroke-width="{:.3}" stroke-linecap="square"/>"#,
                r.x0, r.y0, r.x1, r.y1, r.width_px
            );
        } else {
            let len = r.length().max(f64::EPSILON);
            let (ux, uy) = ((r.x1 - r.x0) / len, (r.y1 - r.y0) / len);
            let (nx, ny) = (-uy * r.width_px / 2.0, ux * r.width_px / 2.0);
            // Extend half a pixel past the end pixel centres.
            let (ex, ey) = (ux * 0.5, uy * 0.5);
            let pts = [
                (r.x0 - ex + nx, r.y0 - ey + ny),
                (r.x1 + ex + nx, r.y1 + ey + ny),
                (r.x1 + ex - nx, r.y1 + ey - ny),
                (r.x0 - ex - nx, r.y0 - ey - ny),
            ];
            let pts: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.3},{y:.3}")).collect();
            let _ = writeln!(
                svg,
                r#"<polygon points="{}" fill="{color}" fill-opacity="0.45" stroke="{color}" stroke-width="0.3"/>"#,
                pts.join(" ")
            );
        }
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Little-endian grayscale PFM; rows are stored bottom to top. NaN is kept.
pub fn write_pfm<W: Write>(mut out: W, width: usize, height: usize, data: &[f64]) -> std::io::Result<()> {
    write!(out, "Pf\n{width} {height}\n-1.0\n")?;
    for row in (0..height).rev() {
        for &v in &data[row * width..(row + 1) * width] {
            out.write_all(&(v as f32).to_le_bytes())?;
        }
    }
    Ok(())
}

/// Edge map as RGB: positive edges red, negative blue, background black.
pub fn edge_map_rgb(map: &SignedEdgeMap) -> ::image::RgbImage {
    let w = map.width();
    ::image::RgbImage::from_fn(w as u32, map.height() as u32, |x, y| {
        match map.values()[y as usize * w + x as usize] {
            1 => ::image::Rgb([255, 64, 32]),
            -1 => ::image::Rgb([32, 128, 255]),
            _ => ::image::Rgb([0, 0, 0]),
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::Timing;

    fn result() -> DetectionResult {
        DetectionResult {
            width: 100,
            height: 50,
            directions: 32,
            rectangles: vec![
                Rectangle {
                    theta_deg: 0.1 + 0.2,
                    x0: 1.0 / 3.0,
                    y0: 2.5,
                    x1: 99.0,
                    y1: 2.5e-7,
                    width_px: 3.0,
                    sign: -1,
                    bin: 1,
                    score: 0.987_654_321_012_345_6,
                },
                Rectangle {
                    theta_deg: 90.0,
                    x0: 10.0,
                    y0: 40.0,
                    x1: 10.0,
                    y1: 20.0,
                    width_px: 1.0,
                    sign: 1,
                    bin: 17,
                    score: 0.75,
                },
            ],
            timing: Timing::default(),
        }
    }

    #[test]
    fn jsonl_round_trips_exactly() {
        let r = result();
        let text = to_jsonl(&r);
        assert_eq!(text.lines().count(), 3);
        let (header, rects) = read_jsonl(text.as_bytes()).unwrap();
        assert_eq!(header.count, 2);
        assert_eq!((header.width, header.height), (100, 50));
        assert_eq!(rects, r.rectangles);
    }

    #[test]
    fn jsonl_count_mismatch_is_an_error() {
        let text = to_jsonl(&result());
        let truncated: String = text.lines().take(2).map(|l| format!("{l}\n")).collect();
        assert!(matches!(read_jsonl(truncated.as_bytes()), Err(Error::Format(_))));
        assert!(read_jsonl("".as_bytes()).is_err());
    }

    #[test]
    fn svg_has_one_primitive_per_rectangle() {
        let img = GrayImage::filled(100, 50, 100.0);
        let r = result();
        let svg = render_svg(&img, &r.rectangles, &OverlayStyle::default()).unwrap();
        assert_eq!(svg.matches("<polygon").count(), 2);
        let bare = render_svg(&img, &[], &OverlayStyle::default()).unwrap();
        assert!(bare.contains("<image") && !bare.contains("<polygon"));
        let long = OverlayStyle { min_length: 50.0, midline_only: true, ..Default::default() };
        let svg = render_svg(&img, &r.rectangles, &long).unwrap();
        assert_eq!(svg.matches("<line").count(), 1);
        assert!(svg.contains(r#"x2="99.000""#));
    }

    #[test]
    fn pfm_layout() {
        let mut buf = Vec::new();
        write_pfm(&mut buf, 2, 2, &[1.0, 2.0, 3.0, 4.0]).unwrap();
        let header = b"Pf\n2 2\n-1.0\n";
        assert_eq!(&buf[..header.len()], header);
        let body: Vec<f32> = buf[header.len()..]
            .chunks(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        assert_eq!(body, vec![3.0, 4.0, 1.0, 2.0]);
    }
}
