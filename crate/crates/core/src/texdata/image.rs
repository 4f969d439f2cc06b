use std::io::Write;
use std::path::Path;

use image::{DynamicImage, ImageReader};
use serde::{Deserialize, Serialize};

use super::IngestError;

/// 8-bit grayscale surface photograph, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
    mm_per_pixel: f64,
}

impl SurfaceImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>, mm_per_pixel: f64) -> Result<Self, IngestError> {
        if width < 3 || height < 3 {
            return Err(IngestError::ImageTooSmall { width, height });
        }
        if pixels.len() != width * height {
            return Err(IngestError::ImageSize { expected: width * height, found: pixels.len() });
        }
        if !(mm_per_pixel > 0.0 && mm_per_pixel.is_finite()) {
            return Err(IngestError::InvalidScale(mm_per_pixel));
        }
        Ok(Self { width, height, pixels, mm_per_pixel })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn mm_per_pixel(&self) -> f64 {
        self.mm_per_pixel
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    /// Reads an 8-bit PNG or PGM. Color images are reduced to luminance
    /// (Rec. 709 weights, as applied by the `image` crate); anything wider
    /// than 8 bits per channel is rejected.
    pub fn load(path: &Path, mm_per_pixel: f64) -> Result<Self, IngestError> {
        if !path.exists() {
            return Err(IngestError::MissingFile(path.to_path_buf()));
        }
        let decoded = ImageReader::open(path)
            .map_err(|e| IngestError::io(path, e))?
            .with_guessed_format()
            .map_err(|e| IngestError::io(path, e))?
            .decode()
            .map_err(|e| IngestError::ImageDecode { path: path.to_path_buf(), reason: e.to_string() })?;
        let bits = decoded.color().bits_per_pixel() / u16::from(decoded.color().channel_count());
        if bits != 8 {
            return Err(IngestError::BitDepth { path: path.to_path_buf(), bits });
        }
        let gray = match decoded {
            DynamicImage::ImageLuma8(g) => g,
            other => other.to_luma8(),
        };
        let (w, h) = gray.dimensions();
        Self::new(w as usize, h as usize, gray.into_raw(), mm_per_pixel)
    }

    /// Binary PGM (P5) bytes, maxval 255.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }

    pub fn save_pgm(&self, path: &Path) -> Result<(), IngestError> {
        let mut f = std::fs::File::create(path).map_err(|e| IngestError::io(path, e))?;
        f.write_all(&self.to_pgm()).map_err(|e| IngestError::io(path, e))
    }
}
