//! PNG/JPEG reading and PNG writing. Intensities are quantized only here.

use std::path::Path;

use image::{DynamicImage, ImageBuffer, ImageError, ImageReader, Luma, Rgb};

use super::{BinaryMask, ImageRGB, ScalarField};
use crate::error::{Error, Result};

fn decode(path: &Path) -> Result<DynamicImage> {
    let reader = ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?;
    if reader.format().is_none() {
        return Err(Error::UnsupportedFormat(path.display().to_string()));
    }
    let img = reader.decode().map_err(|e| match e {
        ImageError::Unsupported(u) => Error::UnsupportedFormat(u.to_string()),
        ImageError::IoError(io) => Error::io(path, io),
        other => Error::Decode {
            path: path.to_path_buf(),
            reason: other.to_string(),
        },
    })?;
    if img.width() == 0 || img.height() == 0 {
        return Err(Error::ZeroDimension {
            height: img.height() as usize,
            width: img.width() as usize,
        });
    }
    Ok(img)
}

fn is_16bit(img: &DynamicImage) -> bool {
    matches!(
        img,
        DynamicImage::ImageLuma16(_)
            | DynamicImage::ImageLumaA16(_)
            | DynamicImage::ImageRgb16(_)
            | DynamicImage::ImageRgba16(_)
    )
}

/// Loads an 8- or 16-bit PNG/JPEG, mapping intensities affinely onto `[0, 1]`.
pub fn load_image(path: impl AsRef<Path>) -> Result<ImageRGB> {
    let img = decode(path.as_ref())?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data: Vec<f64> = if is_16bit(&img) {
        img.into_rgb16()
            .into_raw()
            .into_iter()
            .map(|v| v as f64 / 65535.0)
            .collect()
    } else {
        img.into_rgb8()
            .into_raw()
            .into_iter()
            .map(|v| v as f64 / 255.0)
            .collect()
    };
    ImageRGB::new(h, w, data)
}

/// Loads a single-channel annotation; any nonzero pixel is foreground.
pub fn load_mask(path: impl AsRef<Path>) -> Result<BinaryMask> {
    let img = decode(path.as_ref())?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data = img
        .into_luma16()
        .into_raw()
        .into_iter()
        .map(|v| (v != 0) as u8)
        .collect();
    BinaryMask::new(h, w, data)
}

/// Loads a 16-bit grayscale heatmap as probabilities `v / 65535`.
pub fn load_heatmap(path: impl AsRef<Path>) -> Result<ScalarField> {
    let img = decode(path.as_ref())?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data = img
        .into_luma16()
        .into_raw()
        .into_iter()
        .map(|v| v as f64 / 65535.0)
        .collect();
    ScalarField::new(h, w, data)
}

#[inline]
fn quantize8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

#[inline]
pub fn quantize16(v: f64) -> u16 {
    (v.clamp(0.0, 1.0) * 65535.0).round() as u16
}

fn save(img: DynamicImage, path: &Path) -> Result<()> {
    img.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| match e {
            ImageError::IoError(io) => Error::io(path, io),
            other => Error::InvalidArgument(other.to_string()),
        })
}

/// Writes an 8-bit RGB PNG.
pub fn save_png(img: &ImageRGB, path: impl AsRef<Path>) -> Result<()> {
    let raw: Vec<u8> = img.data().iter().map(|&v| quantize8(v)).collect();
    let buf = ImageBuffer::<Rgb<u8>, _>::from_raw(img.width() as u32, img.height() as u32, raw)
        .expect("buffer length matches dimensions");
    save(DynamicImage::ImageRgb8(buf), path.as_ref())
}

/// Writes a mask as an 8-bit grayscale PNG with values `{0, 255}`.
pub fn save_mask(mask: &BinaryMask, path: impl AsRef<Path>) -> Result<()> {
    let raw: Vec<u8> = mask.data().iter().map(|&v| v * 255).collect();
    let buf =
        ImageBuffer::<Luma<u8>, _>::from_raw(mask.width() as u32, mask.height() as u32, raw)
            .expect("buffer length matches dimensions");
    save(DynamicImage::ImageLuma8(buf), path.as_ref())
}

/// Writes a probability map as a 16-bit grayscale PNG (`round(p * 65535)`).
pub fn save_heatmap(field: &ScalarField, path: impl AsRef<Path>) -> Result<()> {
    let raw: Vec<u16> = field.data().iter().map(|&v| quantize16(v)).collect();
    let buf =
        ImageBuffer::<Luma<u16>, _>::from_raw(field.width() as u32, field.height() as u32, raw)
            .expect("buffer length matches dimensions");
    save(DynamicImage::ImageLuma16(buf), path.as_ref())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_rgb8(path: &Path, h: u32, w: u32, v: u8) {
        let buf = ImageBuffer::<Rgb<u8>, _>::from_pixel(w, h, Rgb([v, v, v]));
        buf.save(path).unwrap();
    }

    #[test]
    fn black_and_white_png_map_to_unit_range_endpoints() {
        let dir = tempfile::tempdir().unwrap();
        let black = dir.path().join("black.png");
        let white = dir.path().join("white.png");
        write_rgb8(&black, 2, 2, 0);
        write_rgb8(&white, 2, 2, 255);
        assert!(load_image(&black).unwrap().data().iter().all(|&v| v == 0.0));
        assert!(load_image(&white).unwrap().data().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn loading_twice_is_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.png");
        let img = ImageRGB::from_clamped(3, 5, (0..45).map(|i| i as f64 / 44.0).collect());
        save_png(&img, &path).unwrap();
        assert_eq!(load_image(&path).unwrap(), load_image(&path).unwrap());
    }

    #[test]
    fn sixteen_bit_png_uses_full_range() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x16.png");
        let buf = ImageBuffer::<Luma<u16>, _>::from_raw(2, 1, vec![0u16, 65535]).unwrap();
        buf.save(&path).unwrap();
        let img = load_image(&path).unwrap();
        assert_eq!(img.pixel(0, 0), [0.0; 3]);
        assert_eq!(img.pixel(0, 1), [1.0; 3]);
    }

    #[test]
    fn missing_unsupported_and_corrupt_files_are_distinct_errors() {
        let dir = tempfile::tempdir().unwrap();
        let missing = dir.path().join("nope.png");
        assert!(matches!(load_image(&missing), Err(Error::Io { .. })));

        let text = dir.path().join("notes.txt");
        std::fs::write(&text, b"hello, not an image").unwrap();
        assert!(matches!(load_image(&text), Err(Error::UnsupportedFormat(_))));

        let corrupt = dir.path().join("corrupt.png");
        let mut bytes = b"\x89PNG\r\n\x1a\n".to_vec();
        bytes.extend_from_slice(&[0u8; 16]);
        std::fs::write(&corrupt, bytes).unwrap();
        assert!(matches!(load_image(&corrupt), Err(Error::Decode { .. })));
    }

    #[test]
    fn heatmap_round_trip_is_quantized_to_16_bits() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.png");
        let field = ScalarField::new(1, 4, vec![0.0, 0.123456, 0.5, 1.0]).unwrap();
        save_heatmap(&field, &path).unwrap();
        let back = load_heatmap(&path).unwrap();
        for (a, b) in field.data().iter().zip(back.data()) {
            assert_eq!(*b, quantize16(*a) as f64 / 65535.0);
            assert!((a - b).abs() <= 0.5 / 65535.0 + 1e-12);
        }
    }

    #[test]
    fn mask_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.png");
        let mask = BinaryMask::new(2, 3, vec![0, 1, 1, 0, 0, 1]).unwrap();
        save_mask(&mask, &path).unwrap();
        assert_eq!(load_mask(&path).unwrap(), mask);
    }
}
