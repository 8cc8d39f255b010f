//! Dense binary masks on the image pixel grid.

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
#[error("mask dimensions differ: {a:?} vs {b:?} (width, height)")]
pub struct DimensionMismatch {
    pub a: (u32, u32),
    pub b: (u32, u32),
}

/// Row-major `width × height` grid of set/unset pixels.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: u32,
    height: u32,
    data: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: u32, height: u32) -> Self {
        Self { width, height, data: vec![false; width as usize * height as usize] }
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> bool) -> Self {
        let mut data = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self { width, height, data }
    }

    /// Builds a mask from row-major data. Panics if the length is wrong.
    pub fn from_rows(width: u32, height: u32, data: Vec<bool>) -> Self {
        assert_eq!(data.len(), width as usize * height as usize, "mask data length");
        Self { width, height, data }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> bool {
        self.data[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, value: bool) {
        let w = self.width as usize;
        self.data[y as usize * w + x as usize] = value;
    }

    pub fn area(&self) -> u64 {
        self.data.iter().filter(|&&b| b).count() as u64
    }

    /// Tight `[x, y, w, h]` box of the set pixels, or `None` when empty.
    pub fn bbox(&self) -> Option<[u32; 4]> {
        let (mut x0, mut y0, mut x1, mut y1) = (u32::MAX, u32::MAX, 0, 0);
        let mut any = false;
        for y in 0..self.height {
            for x in 0..self.width {
                if self.get(x, y) {
                    any = true;
                    x0 = x0.min(x);
                    y0 = y0.min(y);
                    x1 = x1.max(x);
                    y1 = y1.max(y);
                }
            }
        }
        any.then(|| [x0, y0, x1 - x0 + 1, y1 - y0 + 1])
    }

    fn check_dims(&self, other: &BinaryMask) -> Result<(), DimensionMismatch> {
        if (self.width, self.height) != (other.width, other.height) {
            return Err(DimensionMismatch {
                a: (self.width, self.height),
                b: (other.width, other.height),
            });
        }
        Ok(())
    }

    pub fn intersection_area(&self, other: &BinaryMask) -> Result<u64, DimensionMismatch> {
        self.check_dims(other)?;
        Ok(self.data.iter().zip(&other.data).filter(|(a, b)| **a && **b).count() as u64)
    }

    /// Intersection over union; 0 when both are empty.
    pub fn iou(&self, other: &BinaryMask) -> Result<f64, DimensionMismatch> {
        let inter = self.intersection_area(other)?;
        let union = self.area() + other.area() - inter;
        Ok(if union == 0 { 0.0 } else { inter as f64 / union as f64 })
    }
}
