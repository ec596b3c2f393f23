//! Grayscale rasters and their on-disk formats (binary PGM and PNG).

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// Row-major 8-bit grayscale raster.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Shape(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        if data.len() != width * height {
            return Err(Error::Shape(format!(
                "{width}x{height} image needs {} pixels, got {}",
                width * height,
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Image filled with a single intensity.
    ///
    /// Panics if either dimension is zero.
    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self::filled(width, height, 0)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, value: u8) {
        self.data[y * self.width + x] = value;
    }

    pub fn same_dims(&self, other: &GrayImage) -> bool {
        self.dims() == other.dims()
    }

    /// Interleaved 8-bit RGB to gray with 0.299/0.587/0.114 luma weights.
    pub fn from_rgb(width: usize, height: usize, rgb: &[u8]) -> Result<Self> {
        if rgb.len() != width * height * 3 {
            return Err(Error::Shape(format!(
                "{width}x{height} RGB image needs {} bytes, got {}",
                width * height * 3,
                rgb.len()
            )));
        }
        let data = rgb
            .chunks_exact(3)
            .map(|p| luma(p[0], p[1], p[2]))
            .collect();
        Self::new(width, height, data)
    }

    /// Intensities scaled to [0, 1].
    pub fn to_unit(&self) -> Vec<f32> {
        self.data.iter().map(|&v| v as f32 / 255.0).collect()
    }

    /// Inverse of [`GrayImage::to_unit`]; values are clamped to [0, 1] and rounded.
    pub fn from_unit(width: usize, height: usize, values: &[f32]) -> Result<Self> {
        let data = values
            .iter()
            .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect();
        Self::new(width, height, data)
    }

    /// Mean absolute difference in the unit domain.
    pub fn mean_abs_diff(&self, other: &GrayImage) -> Result<f32> {
        if !self.same_dims(other) {
            return Err(Error::Shape(format!(
                "{}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )));
        }
        let total: f64 = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| (a as f64 - b as f64).abs() / 255.0)
            .sum();
        Ok((total / self.data.len() as f64) as f32)
    }

    /// Places images side by side in one row; all tiles must share dimensions.
    pub fn hstack(tiles: &[GrayImage]) -> Result<GrayImage> {
        let first = tiles
            .first()
            .ok_or_else(|| Error::InsufficientInput("no tiles to stack".into()))?;
        let (tw, th) = first.dims();
        if let Some(bad) = tiles.iter().find(|t| t.dims() != (tw, th)) {
            return Err(Error::Shape(format!(
                "tile {}x{} differs from {tw}x{th}",
                bad.width, bad.height
            )));
        }
        let width = tw * tiles.len();
        let mut data = vec![0u8; width * th];
        for (i, tile) in tiles.iter().enumerate() {
            for y in 0..th {
                let dst = y * width + i * tw;
                data[dst..dst + tw].copy_from_slice(&tile.data[y * tw..(y + 1) * tw]);
            }
        }
        GrayImage::new(width, th, data)
    }

    /// Binary PGM (P5, maxval 255).
    pub fn to_pgm_bytes(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.data);
        out
    }

    pub fn from_pgm_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let mut cursor = 0usize;
        let mut fields = Vec::with_capacity(4);
        while fields.len() < 4 {
            // skip whitespace and comments
            while cursor < bytes.len() {
                match bytes[cursor] {
                    b'#' => {
                        while cursor < bytes.len() && bytes[cursor] != b'\n' {
                            cursor += 1;
                        }
                    }
                    c if c.is_ascii_whitespace() => cursor += 1,
                    _ => break,
                }
            }
            let start = cursor;
            while cursor < bytes.len() && !bytes[cursor].is_ascii_whitespace() {
                cursor += 1;
            }
            if start == cursor {
                return Err(Error::format(path, "truncated PGM header"));
            }
            fields.push(String::from_utf8_lossy(&bytes[start..cursor]).into_owned());
        }
        // exactly one whitespace byte separates the header from the raster
        cursor += 1;
        if fields[0] != "P5" {
            return Err(Error::format(
                path,
                format!("expected P5 magic, found {:?}", fields[0]),
            ));
        }
        let parse = |s: &str, what: &str| {
            s.parse::<usize>()
                .map_err(|_| Error::format(path, format!("bad {what} {s:?}")))
        };
        let width = parse(&fields[1], "width")?;
        let height = parse(&fields[2], "height")?;
        let maxval = parse(&fields[3], "maxval")?;
        if maxval != 255 {
            return Err(Error::format(path, format!("unsupported maxval {maxval}")));
        }
        let end = cursor + width * height;
        if bytes.len() < end {
            return Err(Error::format(path, "raster shorter than header claims"));
        }
        GrayImage::new(width, height, bytes[cursor..end].to_vec())
    }

    pub fn write_pgm(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        file.write_all(&self.to_pgm_bytes())
            .map_err(|e| Error::io(path, e))
    }

    pub fn read_pgm(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_pgm_bytes(&bytes, path)
    }

    pub fn write_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let buf =
            image::GrayImage::from_raw(self.width as u32, self.height as u32, self.data.clone())
                .expect("dimensions checked at construction");
        buf.save_with_format(path, image::ImageFormat::Png)
            .map_err(|e| match e {
                image::ImageError::IoError(io) => Error::io(path, io),
                other => Error::format(path, other.to_string()),
            })
    }

    /// Reads a PNG; color images are reduced with the luma weights of [`GrayImage::from_rgb`].
    pub fn read_png(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let img = image::open(path).map_err(|e| match e {
            image::ImageError::IoError(io) => Error::io(path, io),
            other => Error::format(path, other.to_string()),
        })?;
        match img {
            image::DynamicImage::ImageLuma8(g) => {
                let (w, h) = g.dimensions();
                GrayImage::new(w as usize, h as usize, g.into_raw())
            }
            other => {
                let rgb = other.to_rgb8();
                let (w, h) = rgb.dimensions();
                GrayImage::from_rgb(w as usize, h as usize, rgb.as_raw())
            }
        }
    }

    /// Dispatches on extension: `.pgm` or `.png`.
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        match extension(path).as_deref() {
            Some("pgm") => Self::read_pgm(path),
            Some("png") => Self::read_png(path),
            _ => Err(Error::format(path, "expected a .pgm or .png file")),
        }
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        match extension(path).as_deref() {
            Some("pgm") => self.write_pgm(path),
            Some("png") => self.write_png(path),
            _ => Err(Error::format(path, "expected a .pgm or .png file")),
        }
    }
}

fn extension(path: &Path) -> Option<String> {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
}

pub fn is_image_path(path: &Path) -> bool {
    matches!(extension(path).as_deref(), Some("pgm") | Some("png"))
}

/// 0.299 R + 0.587 G + 0.114 B, rounded.
pub fn luma(r: u8, g: u8, b: u8) -> u8 {
    (0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64)
        .round()
        .clamp(0.0, 255.0) as u8
}
