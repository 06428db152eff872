use super::Scalar;
use crate::error::{Error, Result};
use crate::imaging::ImageRGB;

/// Channel-major activation volume: element `(c, y, x)` sits at
/// `data[(c * height + y) * width + x]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap<T = f32> {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<T>,
}

impl<T: Scalar> FeatureMap<T> {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != channels * height * width {
            return Err(Error::dims(channels * height * width, data.len()));
        }
        Ok(Self {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
            data: vec![T::zero(); channels * height * width],
        }
    }

    pub fn from_image(img: &ImageRGB) -> Self {
        let (h, w) = img.dims();
        let mut data = vec![T::zero(); 3 * h * w];
        for (i, px) in img.data().chunks_exact(3).enumerate() {
            for c in 0..3 {
                data[c * h * w + i] = T::of(px[c]);
            }
        }
        Self {
            channels: 3,
            height: h,
            width: w,
            data,
        }
    }

    /// Interprets three channels as RGB; values are clamped into `[0, 1]`.
    pub fn to_image(&self) -> Result<ImageRGB> {
        if self.channels != 3 {
            return Err(Error::dims("3 channels", self.channels));
        }
        let hw = self.height * self.width;
        let data = (0..hw)
            .flat_map(|i| (0..3).map(move |c| (c, i)))
            .map(|(c, i)| self.data[c * hw + i].f64())
            .collect();
        Ok(ImageRGB::from_clamped(self.height, self.width, data))
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// `(channels, height, width)`.
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    pub fn plane(&self) -> usize {
        self.height * self.width
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn get(&self, c: usize, y: usize, x: usize) -> T {
        self.data[(c * self.height + y) * self.width + x]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn cast<U: Scalar>(&self) -> FeatureMap<U> {
        FeatureMap {
            channels: self.channels,
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|v| U::of(v.f64())).collect(),
        }
    }

    /// Channel-wise concatenation `[self; other]`.
    pub fn concat(&self, other: &FeatureMap<T>) -> Result<Self> {
        if (self.height, self.width) != (other.height, other.width) {
            return Err(Error::dims(
                format!("{}x{}", self.height, self.width),
                format!("{}x{}", other.height, other.width),
            ));
        }
        let mut data = Vec::with_capacity(self.data.len() + other.data.len());
        data.extend_from_slice(&self.data);
        data.extend_from_slice(&other.data);
        Ok(Self {
            channels: self.channels + other.channels,
            height: self.height,
            width: self.width,
            data,
        })
    }

    /// Splits off the first `channels` channels: `(head, tail)`.
    pub(crate) fn split(self, channels: usize) -> (Self, Self) {
        assert!(channels <= self.channels);
        let mut head = self.data;
        let tail = head.split_off(channels * self.height * self.width);
        (
            Self {
                channels,
                height: self.height,
                width: self.width,
                data: head,
            },
            Self {
                channels: self.channels - channels,
                height: self.height,
                width: self.width,
                data: tail,
            },
        )
    }

    pub(crate) fn add_assign(&mut self, other: &FeatureMap<T>) {
        assert_eq!(self.shape(), other.shape());
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a = *a + b;
        }
    }
}
