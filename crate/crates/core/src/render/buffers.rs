use serde::{Deserialize, Serialize};

use super::RenderError;

/// Binary image, row-major, `true` where set.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mask {
    pub width: u32,
    pub height: u32,
    pub bits: Vec<bool>,
}

impl Mask {
    pub fn empty(width: u32, height: u32) -> Self {
        Mask { width, height, bits: vec![false; width as usize * height as usize] }
    }

    pub fn from_fn(width: u32, height: u32, f: impl Fn(u32, u32) -> bool) -> Self {
        let bits = (0..height).flat_map(|y| (0..width).map(move |x| (x, y))).map(|(x, y)| f(x, y)).collect();
        Mask { width, height, bits }
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        self.bits[y as usize * self.width as usize + x as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, v: bool) {
        self.bits[y as usize * self.width as usize + x as usize] = v;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    fn check(&self, other: &Mask) -> Result<(), RenderError> {
        if (self.width, self.height) != (other.width, other.height) {
            return Err(RenderError::DimensionMismatch {
                expected: (self.width, self.height),
                got: (other.width, other.height),
            });
        }
        Ok(())
    }

    fn zip(&self, other: &Mask, f: impl Fn(bool, bool) -> bool) -> Result<Mask, RenderError> {
        self.check(other)?;
        let bits = self.bits.iter().zip(&other.bits).map(|(&a, &b)| f(a, b)).collect();
        Ok(Mask { width: self.width, height: self.height, bits })
    }

    pub fn union(&self, other: &Mask) -> Result<Mask, RenderError> {
        self.zip(other, |a, b| a || b)
    }

    pub fn intersection(&self, other: &Mask) -> Result<Mask, RenderError> {
        self.zip(other, |a, b| a && b)
    }

    /// Pixels set in `self` but not in `other`.
    pub fn difference(&self, other: &Mask) -> Result<Mask, RenderError> {
        self.zip(other, |a, b| a && !b)
    }

    pub fn is_subset_of(&self, other: &Mask) -> bool {
        self.check(other).is_ok() && self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b)
    }

    /// Halves the resolution; an output pixel is set when any of its 2x2 inputs is.
    pub fn downsample_any(&self) -> Mask {
        Mask::from_fn(self.width / 2, self.height / 2, |x, y| {
            self.get(2 * x, 2 * y) || self.get(2 * x + 1, 2 * y) || self.get(2 * x, 2 * y + 1) || self.get(2 * x + 1, 2 * y + 1)
        })
    }
}

/// Per-pixel depth along the optical axis in meters; `+inf` where nothing was drawn.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DepthBuffer {
    pub width: u32,
    pub height: u32,
    pub values: Vec<f64>,
}

impl DepthBuffer {
    pub fn empty(width: u32, height: u32) -> Self {
        Self::filled(width, height, f64::INFINITY)
    }

    pub fn filled(width: u32, height: u32, value: f64) -> Self {
        DepthBuffer { width, height, values: vec![value; width as usize * height as usize] }
    }

    pub fn get(&self, x: u32, y: u32) -> f64 {
        self.values[y as usize * self.width as usize + x as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, v: f64) {
        self.values[y as usize * self.width as usize + x as usize] = v;
    }
}
