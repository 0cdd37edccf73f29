//! Plain row-major image buffers and pixel rectangles.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Rgb = [f64; 3];

/// Row-major `width × height` buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct Image<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Clone> Image<T> {
    pub fn filled(width: usize, height: usize, value: T) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }
}

impl<T> Image<T> {
    pub fn from_vec(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: width * height,
                got: data.len(),
            });
        }
        Ok(Self { width, height, data })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> &T {
        &self.data[y * self.width + x]
    }

    #[inline]
    pub fn get_mut(&mut self, x: usize, y: usize) -> &mut T {
        &mut self.data[y * self.width + x]
    }

    pub fn same_shape<U>(&self, other: &Image<U>) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn check_shape<U>(&self, other: &Image<U>) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::ShapeMismatch {
                left_w: self.width,
                left_h: self.height,
                right_w: other.width,
                right_h: other.height,
            })
        }
    }
}

/// Half-open pixel rectangle `[x0, x1) × [y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PixelRect {
    pub x0: i64,
    pub y0: i64,
    pub x1: i64,
    pub y1: i64,
}

impl PixelRect {
    pub fn new(x0: i64, y0: i64, x1: i64, y1: i64) -> Self {
        Self { x0, y0, x1, y1 }
    }

    pub fn width(&self) -> i64 {
        (self.x1 - self.x0).max(0)
    }

    pub fn height(&self) -> i64 {
        (self.y1 - self.y0).max(0)
    }

    pub fn area(&self) -> i64 {
        self.width() * self.height()
    }

    pub fn is_empty(&self) -> bool {
        self.area() == 0
    }

    pub fn center(&self) -> (f64, f64) {
        ((self.x0 + self.x1) as f64 * 0.5, (self.y0 + self.y1) as f64 * 0.5)
    }

    pub fn translated(&self, dx: i64, dy: i64) -> PixelRect {
        PixelRect::new(self.x0 + dx, self.y0 + dy, self.x1 + dx, self.y1 + dy)
    }

    /// Whether the rectangle lies inside `[0, w) × [0, h)`.
    pub fn inside(&self, w: usize, h: usize) -> bool {
        self.x0 >= 0 && self.y0 >= 0 && self.x1 <= w as i64 && self.y1 <= h as i64
    }

    pub fn intersection_area(&self, w: usize, h: usize) -> i64 {
        let x0 = self.x0.max(0);
        let y0 = self.y0.max(0);
        let x1 = self.x1.min(w as i64);
        let y1 = self.y1.min(h as i64);
        (x1 - x0).max(0) * (y1 - y0).max(0)
    }
}

/// Tight bounding rectangle of the `true` pixels, `None` for an empty mask.
pub fn mask_bbox(mask: &Image<bool>) -> Option<PixelRect> {
    let mut rect: Option<PixelRect> = None;
    for y in 0..mask.height() {
        for x in 0..mask.width() {
            if *mask.get(x, y) {
                let (xi, yi) = (x as i64, y as i64);
                rect = Some(match rect {
                    None => PixelRect::new(xi, yi, xi + 1, yi + 1),
                    Some(r) => PixelRect::new(r.x0.min(xi), r.y0.min(yi), r.x1.max(xi + 1), r.y1.max(yi + 1)),
                });
            }
        }
    }
    rect
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bbox_of_mask() {
        let mut m = Image::filled(5, 4, false);
        *m.get_mut(1, 2) = true;
        *m.get_mut(3, 1) = true;
        assert_eq!(mask_bbox(&m), Some(PixelRect::new(1, 1, 4, 3)));
        assert_eq!(mask_bbox(&Image::filled(3, 3, false)), None);
    }

    #[test]
    fn from_vec_checks_length() {
        assert!(Image::from_vec(2, 2, alloc::vec![0u8; 3]).is_err());
    }
}
