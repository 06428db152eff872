use crate::error::{Error, Result};

/// Row-major RGB image with channel intensities in `[0, 1]`.
///
/// Pixel `(y, x)` occupies `data[3 * (y * width + x)..][..3]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageRGB {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl ImageRGB {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::ZeroDimension { height, width });
        }
        if data.len() != height * width * 3 {
            return Err(Error::dims(height * width * 3, data.len()));
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidArgument(format!(
                "intensity {v} outside [0, 1]"
            )));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    /// Builds an image without range checks; values are clamped into `[0, 1]`.
    pub fn from_clamped(height: usize, width: usize, mut data: Vec<f64>) -> Self {
        assert!(height > 0 && width > 0, "zero-sized image");
        assert_eq!(data.len(), height * width * 3);
        for v in &mut data {
            *v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
        }
        Self {
            height,
            width,
            data,
        }
    }

    pub fn filled(height: usize, width: usize, rgb: [f64; 3]) -> Self {
        let data = (0..height * width).flat_map(|_| rgb).collect();
        Self::from_clamped(height, width, data)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn pixel(&self, y: usize, x: usize) -> [f64; 3] {
        let i = 3 * (y * self.width + x);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    #[inline]
    pub fn set_pixel(&mut self, y: usize, x: usize, rgb: [f64; 3]) {
        let i = 3 * (y * self.width + x);
        for c in 0..3 {
            self.data[i + c] = rgb[c].clamp(0.0, 1.0);
        }
    }

    /// Applies `f` to every pixel, clamping the result.
    pub fn map_pixels(&self, mut f: impl FnMut([f64; 3]) -> [f64; 3]) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for px in self.data.chunks_exact(3) {
            data.extend_from_slice(&f([px[0], px[1], px[2]]));
        }
        Self::from_clamped(self.height, self.width, data)
    }

    /// Copies the rectangle `rect` out of the image.
    pub fn crop(&self, rect: Rect) -> Result<Self> {
        rect.check_inside(self.height, self.width)?;
        let mut data = Vec::with_capacity(rect.height * rect.width * 3);
        for y in rect.y..rect.y + rect.height {
            let start = 3 * (y * self.width + rect.x);
            data.extend_from_slice(&self.data[start..start + 3 * rect.width]);
        }
        Ok(Self {
            height: rect.height,
            width: rect.width,
            data,
        })
    }

    /// Writes `patch` into the image with its top-left corner at `(y, x)`.
    pub fn paste(&mut self, patch: &ImageRGB, y: usize, x: usize) -> Result<()> {
        let rect = Rect::new(y, x, patch.height, patch.width);
        rect.check_inside(self.height, self.width)?;
        for py in 0..patch.height {
            let dst = 3 * ((y + py) * self.width + x);
            let src = 3 * py * patch.width;
            self.data[dst..dst + 3 * patch.width]
                .copy_from_slice(&patch.data[src..src + 3 * patch.width]);
        }
        Ok(())
    }

    /// Mean of the three channels per pixel.
    pub fn to_gray(&self) -> ScalarField {
        let data = self
            .data
            .chunks_exact(3)
            .map(|p| (p[0] + p[1] + p[2]) / 3.0)
            .collect();
        ScalarField {
            height: self.height,
            width: self.width,
            data,
        }
    }
}

/// Axis-aligned rectangle in pixel coordinates (top-left corner plus size).
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Rect {
    pub y: usize,
    pub x: usize,
    pub height: usize,
    pub width: usize,
}

impl Rect {
    pub fn new(y: usize, x: usize, height: usize, width: usize) -> Self {
        Self {
            y,
            x,
            height,
            width,
        }
    }

    pub fn contains(&self, y: usize, x: usize) -> bool {
        y >= self.y && y < self.y + self.height && x >= self.x && x < self.x + self.width
    }

    pub(crate) fn check_inside(&self, height: usize, width: usize) -> Result<()> {
        if self.height == 0
            || self.width == 0
            || self.y + self.height > height
            || self.x + self.width > width
        {
            return Err(Error::CropTooLarge {
                crop_h: self.y + self.height,
                crop_w: self.x + self.width,
                height,
                width,
            });
        }
        Ok(())
    }
}

/// Binary annotation with values in `{0, 1}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    height: usize,
    width: usize,
    data: Vec<u8>,
}

impl BinaryMask {
    pub fn new(height: usize, width: usize, data: Vec<u8>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::ZeroDimension { height, width });
        }
        if data.len() != height * width {
            return Err(Error::dims(height * width, data.len()));
        }
        if data.iter().any(|&v| v > 1) {
            return Err(Error::InvalidArgument("mask value outside {0, 1}".into()));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self::filled(height, width, false)
    }

    pub fn ones(height: usize, width: usize) -> Self {
        Self::filled(height, width, true)
    }

    fn filled(height: usize, width: usize, on: bool) -> Self {
        assert!(height > 0 && width > 0, "zero-sized mask");
        Self {
            height,
            width,
            data: vec![on as u8; height * width],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> bool {
        self.data[y * self.width + x] != 0
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, on: bool) {
        self.data[y * self.width + x] = on as u8;
    }

    pub fn count_ones(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0).count()
    }

    pub fn foreground_fraction(&self) -> f64 {
        self.count_ones() as f64 / self.data.len() as f64
    }

    pub fn any(&self) -> bool {
        self.data.iter().any(|&v| v != 0)
    }

    /// Writes `patch` into the mask with its top-left corner at `(y, x)`.
    pub fn paste(&mut self, patch: &BinaryMask, y: usize, x: usize) -> Result<()> {
        Rect::new(y, x, patch.height, patch.width).check_inside(self.height, self.width)?;
        for py in 0..patch.height {
            let dst = (y + py) * self.width + x;
            let src = py * patch.width;
            self.data[dst..dst + patch.width]
                .copy_from_slice(&patch.data[src..src + patch.width]);
        }
        Ok(())
    }

    /// Nearest-neighbour resampling, used to bring annotations to a model's resolution.
    pub fn resize_nearest(&self, height: usize, width: usize) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::ZeroDimension { height, width });
        }
        let mut data = Vec::with_capacity(height * width);
        for y in 0..height {
            let sy = (y * self.height) / height;
            for x in 0..width {
                let sx = (x * self.width) / width;
                data.push(self.data[sy * self.width + sx]);
            }
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn to_field(&self) -> ScalarField {
        ScalarField {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|&v| v as f64).collect(),
        }
    }
}

/// Real-valued per-pixel map (noise fields, distances, weights, anomaly probabilities).
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl ScalarField {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::ZeroDimension { height, width });
        }
        if data.len() != height * width {
            return Err(Error::dims(height * width, data.len()));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite field value".into()));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Self {
        assert!(height > 0 && width > 0, "zero-sized field");
        assert!(value.is_finite());
        Self {
            height,
            width,
            data: vec![value; height * width],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.height, self.width, self.data.iter().map(|&v| f(v)).collect())
    }
}
