use serde::{Deserialize, Serialize};

use crate::render::Mask;

use super::ComposeError;

/// 8-bit RGB image, row-major, 3 bytes per pixel.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Image {
    pub width: u32,
    pub height: u32,
    pub data: Vec<u8>,
}

impl Image {
    pub fn filled(width: u32, height: u32, color: [u8; 3]) -> Self {
        let n = width as usize * height as usize;
        Image { width, height, data: color.iter().copied().cycle().take(3 * n).collect() }
    }

    pub fn from_raw(width: u32, height: u32, data: Vec<u8>) -> Result<Self, ComposeError> {
        let expected = 3 * width as usize * height as usize;
        if data.len() != expected {
            return Err(ComposeError::BufferSize { expected, got: data.len() });
        }
        Ok(Image { width, height, data })
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn get(&self, x: u32, y: u32) -> [u8; 3] {
        let i = 3 * (y as usize * self.width as usize + x as usize);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set(&mut self, x: u32, y: u32, c: [u8; 3]) {
        let i = 3 * (y as usize * self.width as usize + x as usize);
        self.data[i..i + 3].copy_from_slice(&c);
    }

    pub fn pixels(&self) -> impl Iterator<Item = [u8; 3]> + '_ {
        self.data.chunks_exact(3).map(|p| [p[0], p[1], p[2]])
    }

    /// Sets every pixel under `mask` to `c`. Dimensions must match.
    pub fn fill_mask(&mut self, mask: &Mask, c: [u8; 3]) {
        debug_assert_eq!((mask.width, mask.height), self.dims());
        for (px, &m) in self.data.chunks_exact_mut(3).zip(&mask.bits) {
            if m {
                px.copy_from_slice(&c);
            }
        }
    }

    /// ITU-R 601 luma in `[0, 1]`.
    pub fn to_gray(&self) -> Vec<f32> {
        self.pixels().map(|[r, g, b]| (0.299 * f32::from(r) + 0.587 * f32::from(g) + 0.114 * f32::from(b)) / 255.0).collect()
    }

    /// Number of pixels that differ from `other`.
    pub fn diff_count(&self, other: &Image) -> usize {
        self.pixels().zip(other.pixels()).filter(|(a, b)| a != b).count()
    }
}
