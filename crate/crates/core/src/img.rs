//! Float image buffers and PNG / raw-float file io.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use std::io::{Read, Write};
use std::path::Path;

/// Row-major `[h][w][c]` image with values nominally in [0,1].
#[derive(Debug, Clone, PartialEq)]
pub struct ImageBuf<T> {
    pub w: usize,
    pub h: usize,
    pub c: usize,
    pub data: Vec<T>,
}

impl<T: Scalar> ImageBuf<T> {
    pub fn new(w: usize, h: usize, c: usize) -> Self {
        Self {
            w,
            h,
            c,
            data: vec![T::zero(); w * h * c],
        }
    }

    pub fn from_data(w: usize, h: usize, c: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), w * h * c);
        Self { w, h, c, data }
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> &[T] {
        let base = (y * self.w + x) * self.c;
        &self.data[base..base + self.c]
    }

    #[inline]
    pub fn pixel_mut(&mut self, x: usize, y: usize) -> &mut [T] {
        let base = (y * self.w + x) * self.c;
        &mut self.data[base..base + self.c]
    }

    pub fn cast<U: Scalar>(&self) -> ImageBuf<U> {
        ImageBuf {
            w: self.w,
            h: self.h,
            c: self.c,
            data: self.data.iter().map(|&v| U::c(v.to_f64_lossy())).collect(),
        }
    }

    /// Quantize to 8 bits and back; the identity for data already written
    /// through [`save_png`].
    pub fn quantized(&self) -> ImageBuf<T> {
        ImageBuf {
            w: self.w,
            h: self.h,
            c: self.c,
            data: self.data.iter().map(|&v| dequant(quant(v))).collect(),
        }
    }
}

#[inline]
pub fn quant<T: Scalar>(v: T) -> u8 {
    let x = (v.to_f64_lossy().clamp(0.0, 1.0) * 255.0).round();
    x as u8
}

#[inline]
pub fn dequant<T: Scalar>(b: u8) -> T {
    T::c(b as f64 / 255.0)
}

/// Write an image as 8-bit PNG (1 channel -> grayscale, 3 -> RGB).
pub fn save_png<T: Scalar>(img: &ImageBuf<T>, path: &Path) -> Result<()> {
    let bytes: Vec<u8> = img.data.iter().map(|&v| quant(v)).collect();
    match img.c {
        1 => {
            let im = image::GrayImage::from_raw(img.w as u32, img.h as u32, bytes)
                .ok_or_else(|| Error::Format("png buffer size".into()))?;
            im.save(path).map_err(|e| Error::Format(e.to_string()))
        }
        3 => {
            let im = image::RgbImage::from_raw(img.w as u32, img.h as u32, bytes)
                .ok_or_else(|| Error::Format("png buffer size".into()))?;
            im.save(path).map_err(|e| Error::Format(e.to_string()))
        }
        c => Err(Error::BadImageSize(format!("cannot write {c}-channel png"))),
    }
}

pub fn load_png<T: Scalar>(path: &Path) -> Result<ImageBuf<T>> {
    let im = image::open(path).map_err(|e| Error::Format(e.to_string()))?;
    match im {
        image::DynamicImage::ImageLuma8(g) => {
            let (w, h) = (g.width() as usize, g.height() as usize);
            Ok(ImageBuf::from_data(
                w,
                h,
                1,
                g.into_raw().into_iter().map(dequant).collect(),
            ))
        }
        other => {
            let rgb = other.to_rgb8();
            let (w, h) = (rgb.width() as usize, rgb.height() as usize);
            Ok(ImageBuf::from_data(
                w,
                h,
                3,
                rgb.into_raw().into_iter().map(dequant).collect(),
            ))
        }
    }
}

const RAWF_MAGIC: &[u8; 4] = b"RAWF";

/// Raw float dump: magic, w/h/c as u32 LE, then f32 LE data. Lossless for
/// f32 pipelines, used by tests and debugging.
pub fn save_rawf<T: Scalar>(img: &ImageBuf<T>, path: &Path) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    f.write_all(RAWF_MAGIC)?;
    for v in [img.w as u32, img.h as u32, img.c as u32] {
        f.write_all(&v.to_le_bytes())?;
    }
    for &v in &img.data {
        f.write_all(&(v.to_f64_lossy() as f32).to_le_bytes())?;
    }
    Ok(())
}

pub fn load_rawf<T: Scalar>(path: &Path) -> Result<ImageBuf<T>> {
    let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 4];
    f.read_exact(&mut magic)?;
    if &magic != RAWF_MAGIC {
        return Err(Error::Format("bad rawf magic".into()));
    }
    let mut u = [0u8; 4];
    let mut dims = [0usize; 3];
    for d in &mut dims {
        f.read_exact(&mut u)?;
        *d = u32::from_le_bytes(u) as usize;
    }
    let n = dims[0] * dims[1] * dims[2];
    let mut data = Vec::with_capacity(n);
    for _ in 0..n {
        f.read_exact(&mut u)?;
        data.push(T::c(f32::from_le_bytes(u) as f64));
    }
    Ok(ImageBuf::from_data(dims[0], dims[1], dims[2], data))
}
