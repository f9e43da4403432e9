use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{DynamicImage, ExtendedColorType, ImageEncoder, ImageFormat, ImageReader};

use super::GrayImage;
use crate::error::{Error, Result};

/// ITU-R 601 luma with integer half-up rounding.
#[inline]
pub fn luminance(r: u8, g: u8, b: u8) -> u8 {
    let acc = 299 * u32::from(r) + 587 * u32::from(g) + 114 * u32::from(b);
    ((acc + 500) / 1000) as u8
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn unsupported(path: &Path, reason: impl Into<String>) -> Error {
    Error::UnsupportedImage {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

/// Loads an 8-bit PGM (P5) or PNG. Color PNGs are reduced to luma.
pub fn load_image(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let reader = ImageReader::new(BufReader::new(file))
        .with_guessed_format()
        .map_err(|e| io_err(path, e))?;
    let format = reader.format();
    if !matches!(format, Some(ImageFormat::Pnm) | Some(ImageFormat::Png)) {
        return Err(unsupported(path, "expected PGM or PNG"));
    }
    let decoded = reader.decode().map_err(|e| unsupported(path, e.to_string()))?;
    let (w, h) = (decoded.width() as usize, decoded.height() as usize);
    if w == 0 || h == 0 {
        return Err(Error::InvalidDimensions { width: w, height: h });
    }
    let data = match (&decoded, format) {
        (DynamicImage::ImageLuma8(buf), _) => buf.as_raw().clone(),
        (DynamicImage::ImageLumaA8(buf), Some(ImageFormat::Png)) => buf.pixels().map(|p| p.0[0]).collect(),
        (DynamicImage::ImageRgb8(buf), Some(ImageFormat::Png)) => {
            buf.pixels().map(|p| luminance(p.0[0], p.0[1], p.0[2])).collect()
        }
        (DynamicImage::ImageRgba8(buf), Some(ImageFormat::Png)) => {
            buf.pixels().map(|p| luminance(p.0[0], p.0[1], p.0[2])).collect()
        }
        _ => return Err(unsupported(path, format!("unsupported pixel layout {:?}", decoded.color()))),
    };
    GrayImage::new(w, h, data)
}

/// Writes a binary PGM (P5, maxval 255).
pub fn save_pgm(img: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let encoder = PnmEncoder::new(BufWriter::new(file)).with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary));
    encoder
        .write_image(img.data(), img.width() as u32, img.height() as u32, ExtendedColorType::L8)
        .map_err(|e| unsupported(path, e.to_string()))
}

pub fn save_png(img: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let buf = image::GrayImage::from_raw(img.width() as u32, img.height() as u32, img.data().to_vec())
        .ok_or_else(|| Error::invalid("buffer size"))?;
    buf.save_with_format(path, ImageFormat::Png)
        .map_err(|e| unsupported(path, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn pgm_bytes_pass_through() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tiny.pgm");
        let mut f = File::create(&path).unwrap();
        f.write_all(b"P5\n2 2\n255\n").unwrap();
        f.write_all(&[0, 255, 128, 64]).unwrap();
        drop(f);
        let img = load_image(&path).unwrap();
        assert_eq!((img.width(), img.height()), (2, 2));
        assert_eq!(img.data(), &[0, 255, 128, 64]);
    }

    #[test]
    fn luma_weights() {
        assert_eq!(luminance(255, 255, 255), 255);
        assert_eq!(luminance(0, 0, 0), 0);
        // 0.299*100 + 0.587*150 + 0.114*200 = 140.75
        assert_eq!(luminance(100, 150, 200), 141);
    }

    #[test]
    fn rgb_png_converted() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rgb.png");
        let buf = image::RgbImage::from_raw(2, 1, vec![255, 255, 255, 100, 150, 200]).unwrap();
        buf.save(&path).unwrap();
        let img = load_image(&path).unwrap();
        assert_eq!(img.data(), &[255, 141]);
    }

    #[test]
    fn pgm_and_png_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let img = GrayImage::from_fn(9, 4, |x, y| (x * 29 + y * 3) as u8).unwrap();
        save_pgm(&img, dir.path().join("a.pgm")).unwrap();
        save_png(&img, dir.path().join("a.png")).unwrap();
        assert_eq!(load_image(dir.path().join("a.pgm")).unwrap(), img);
        assert_eq!(load_image(dir.path().join("a.png")).unwrap(), img);
    }

    #[test]
    fn load_errors() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(load_image(dir.path().join("missing.pgm")), Err(Error::Io { .. })));
        let junk = dir.path().join("junk.bin");
        std::fs::write(&junk, b"definitely not an image").unwrap();
        assert!(load_image(&junk).is_err());
        let zero = dir.path().join("zero.pgm");
        std::fs::write(&zero, b"P5\n0 2\n255\n").unwrap();
        assert!(load_image(&zero).is_err());
    }
}
