//! Grayscale raster input.

use std::path::Path;

use image::{DynamicImage, ImageBuffer, Luma};

use crate::error::{Error, Result};

/// Row-major scalar image, row 0 at the top.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::InvalidConfig(format!(
                "{} samples for a {width}x{height} image",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for row in 0..height {
            for x in 0..width {
                data.push(f(x, row));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixel_count(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, row: usize) -> f64 {
        self.data[row * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, row: usize, value: f64) {
        self.data[row * self.width + x] = value;
    }

    /// Rotate 90° counter-clockwise as displayed: pixel `(x, row)` moves to
    /// `(row, width - 1 - x)`.
    pub fn rot90(&self) -> GrayImage {
        let (w, h) = (self.width, self.height);
        GrayImage::from_fn(h, w, |nx, nrow| self.get(w - 1 - nrow, nx))
    }

    /// `255 - v` for every pixel.
    pub fn inverted(&self) -> GrayImage {
        GrayImage {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|v| 255.0 - v).collect(),
        }
    }

    pub fn from_dynamic(img: &DynamicImage) -> Self {
        let (w, h) = (img.width() as usize, img.height() as usize);
        let data = match img {
            DynamicImage::ImageLuma8(g) => g.as_raw().iter().map(|&v| v as f64).collect(),
            DynamicImage::ImageLuma16(g) => {
                g.as_raw().iter().map(|&v| v as f64 * (255.0 / 65535.0)).collect()
            }
            DynamicImage::ImageLumaA8(g) => g.pixels().map(|p| p.0[0] as f64).collect(),
            other => other
                .to_rgb8()
                .pixels()
                .map(|p| luma601(p.0[0], p.0[1], p.0[2]))
                .collect(),
        };
        Self {
            width: w,
            height: h,
            data,
        }
    }

    /// Load an 8-bit PNG or PGM; colour inputs are converted with Rec. 601 luma.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let reader = image::ImageReader::open(path)
            .map_err(|e| Error::io(path, e))?
            .with_guessed_format()
            .map_err(|e| Error::io(path, e))?;
        Ok(Self::from_dynamic(&reader.decode()?))
    }

    /// Quantize to 8 bits (round, clamp to `[0, 255]`).
    pub fn to_luma8(&self) -> ImageBuffer<Luma<u8>, Vec<u8>> {
        let raw = self.data.iter().map(|&v| quantize(v)).collect();
        ImageBuffer::from_raw(self.width as u32, self.height as u32, raw)
            .expect("buffer length matches dimensions")
    }

    /// Save as 8-bit grayscale; the format follows the extension.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_luma8().save(path.as_ref())?;
        Ok(())
    }
}

pub fn luma601(r: u8, g: u8, b: u8) -> f64 {
    0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64
}

pub fn quantize(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}
