//! Image containers, the `MRT1` tensor file format and PNG import/export.
//!
//! Tensor files are little-endian and row-major:
//!
//! ```text
//! magic   4 bytes   "MRT1"
//! dtype   u8        1 = f64, 2 = complex f64 (re, im), 3 = f32
//! ndim    u8
//! dims    ndim x u32
//! payload product(dims) elements
//! ```

use std::fs;
use std::path::Path;

use image::{DynamicImage, GrayImage, ImageFormat, ImageReader};
pub use num_complex::Complex64;

use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"MRT1";

fn check_len(height: usize, width: usize, len: usize) -> Result<()> {
    if height.checked_mul(width) != Some(len) {
        return Err(Error::mismatch(format!(
            "{height}x{width} image needs {} values, got {len}",
            height.saturating_mul(width)
        )));
    }
    Ok(())
}

/// Row-major real image.
#[derive(Clone, Debug, PartialEq)]
pub struct RealImage {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl RealImage {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        check_len(height, width, data.len())?;
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            data: vec![0.0; height * width],
        }
    }

    /// Builds an image by evaluating `f(row, col)` at every pixel.
    ///
    /// Panics if `f` returns a non-finite value.
    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(height * width);
        for i in 0..height {
            for j in 0..width {
                let v = f(i, j);
                assert!(v.is_finite(), "non-finite pixel at ({i}, {j})");
                data.push(v);
            }
        }
        Self {
            height,
            width,
            data,
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

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.width, self.height, |i, j| self.get(j, i))
    }

    /// Multiplies every pixel by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|v| v * factor).collect(),
        }
    }

    pub fn to_complex(&self) -> ComplexImage {
        ComplexImage {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        }
    }
}

/// Row-major complex image; used for both image space and k-space grids.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexImage {
    height: usize,
    width: usize,
    data: Vec<Complex64>,
}

impl ComplexImage {
    pub fn new(height: usize, width: usize, data: Vec<Complex64>) -> Result<Self> {
        check_len(height, width, data.len())?;
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            data: vec![Complex64::new(0.0, 0.0); height * width],
        }
    }

    pub fn from_fn(
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize) -> Complex64,
    ) -> Self {
        let mut data = Vec::with_capacity(height * width);
        for i in 0..height {
            for j in 0..width {
                data.push(f(i, j));
            }
        }
        Self {
            height,
            width,
            data,
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

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<Complex64> {
        self.data
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.data[row * self.width + col]
    }

    pub fn magnitude(&self) -> RealImage {
        RealImage {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|z| z.norm()).collect(),
        }
    }

    /// Euclidean norm over all pixels.
    pub fn norm(&self) -> f64 {
        norm(&self.data)
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.width, self.height, |i, j| self.get(j, i))
    }
}

pub(crate) fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Element type stored in a tensor file.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum DType {
    Real64 = 1,
    Complex128 = 2,
    Real32 = 3,
}

impl DType {
    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            1 => Ok(DType::Real64),
            2 => Ok(DType::Complex128),
            3 => Ok(DType::Real32),
            other => Err(Error::UnknownDtype(other)),
        }
    }

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn element_size(self) -> usize {
        match self {
            DType::Real64 => 8,
            DType::Complex128 => 16,
            DType::Real32 => 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum TensorData {
    Real64(Vec<f64>),
    Complex128(Vec<Complex64>),
    Real32(Vec<f32>),
}

impl TensorData {
    pub fn len(&self) -> usize {
        match self {
            TensorData::Real64(v) => v.len(),
            TensorData::Complex128(v) => v.len(),
            TensorData::Real32(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dtype(&self) -> DType {
        match self {
            TensorData::Real64(_) => DType::Real64,
            TensorData::Complex128(_) => DType::Complex128,
            TensorData::Real32(_) => DType::Real32,
        }
    }

    fn first_non_finite(&self) -> Option<usize> {
        match self {
            TensorData::Real64(v) => v.iter().position(|x| !x.is_finite()),
            TensorData::Complex128(v) => v.iter().position(|x| !x.is_finite()),
            TensorData::Real32(v) => v.iter().position(|x| !x.is_finite()),
        }
    }
}

/// An n-dimensional row-major tensor of rank 1 to 255.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    dims: Vec<usize>,
    data: TensorData,
}

impl Tensor {
    pub fn new(dims: Vec<usize>, data: TensorData) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::EmptyShape);
        }
        if dims.len() > u8::MAX as usize {
            return Err(Error::invalid(format!("rank {} exceeds 255", dims.len())));
        }
        if let Some(d) = dims.iter().find(|&&d| d > u32::MAX as usize) {
            return Err(Error::invalid(format!("dimension {d} exceeds u32 range")));
        }
        let count = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::invalid("element count overflows"))?;
        if count != data.len() {
            return Err(Error::mismatch(format!(
                "dims {dims:?} need {count} elements, got {}",
                data.len()
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn data(&self) -> &TensorData {
        &self.data
    }

    pub fn into_parts(self) -> (Vec<usize>, TensorData) {
        (self.dims, self.data)
    }

    pub fn dtype(&self) -> DType {
        self.data.dtype()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Serializes to the `MRT1` byte layout.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        if let Some(i) = self.data.first_non_finite() {
            return Err(Error::NonFinite(i));
        }
        let mut out =
            Vec::with_capacity(6 + 4 * self.dims.len() + self.dtype().element_size() * self.len());
        out.extend_from_slice(&MAGIC);
        out.push(self.dtype().code());
        out.push(self.dims.len() as u8);
        for &d in &self.dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        match &self.data {
            TensorData::Real64(v) => v
                .iter()
                .for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            TensorData::Complex128(v) => v.iter().for_each(|z| {
                out.extend_from_slice(&z.re.to_le_bytes());
                out.extend_from_slice(&z.im.to_le_bytes());
            }),
            TensorData::Real32(v) => v
                .iter()
                .for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        }
        Ok(out)
    }

    /// Parses the `MRT1` byte layout.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 6 {
            if bytes.len() >= 4 && bytes[..4] != MAGIC {
                return Err(Error::BadMagic(bytes[..4].try_into().unwrap()));
            }
            return Err(Error::Truncated {
                expected: 6,
                found: bytes.len(),
            });
        }
        let magic: [u8; 4] = bytes[..4].try_into().unwrap();
        if magic != MAGIC {
            return Err(Error::BadMagic(magic));
        }
        let dtype = DType::from_code(bytes[4])?;
        let ndim = bytes[5] as usize;
        if ndim == 0 {
            return Err(Error::EmptyShape);
        }
        let header = 6 + 4 * ndim;
        if bytes.len() < header {
            return Err(Error::Truncated {
                expected: header,
                found: bytes.len(),
            });
        }
        let dims: Vec<usize> = bytes[6..header]
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().unwrap()) as usize)
            .collect();
        let count = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::invalid("element count overflows"))?;
        let expected = count
            .checked_mul(dtype.element_size())
            .and_then(|n| n.checked_add(header))
            .ok_or_else(|| Error::invalid("payload size overflows"))?;
        if bytes.len() < expected {
            return Err(Error::Truncated {
                expected,
                found: bytes.len(),
            });
        }
        if bytes.len() > expected {
            return Err(Error::TrailingBytes(bytes.len() - expected));
        }
        let payload = &bytes[header..];
        let data = match dtype {
            DType::Real64 => TensorData::Real64(
                payload
                    .chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                    .collect(),
            ),
            DType::Complex128 => TensorData::Complex128(
                payload
                    .chunks_exact(16)
                    .map(|c| {
                        Complex64::new(
                            f64::from_le_bytes(c[..8].try_into().unwrap()),
                            f64::from_le_bytes(c[8..].try_into().unwrap()),
                        )
                    })
                    .collect(),
            ),
            DType::Real32 => TensorData::Real32(
                payload
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                    .collect(),
            ),
        };
        if let Some(i) = data.first_non_finite() {
            return Err(Error::NonFinite(i));
        }
        Ok(Self { dims, data })
    }
}

impl From<&RealImage> for Tensor {
    fn from(img: &RealImage) -> Self {
        Tensor {
            dims: vec![img.height, img.width],
            data: TensorData::Real64(img.data.clone()),
        }
    }
}

impl From<&ComplexImage> for Tensor {
    fn from(img: &ComplexImage) -> Self {
        Tensor {
            dims: vec![img.height, img.width],
            data: TensorData::Complex128(img.data.clone()),
        }
    }
}

fn rank2(dims: &[usize]) -> Result<(usize, usize)> {
    match *dims {
        [h, w] => Ok((h, w)),
        _ => Err(Error::mismatch(format!(
            "expected a rank-2 image tensor, got dims {dims:?}"
        ))),
    }
}

impl TryFrom<Tensor> for RealImage {
    type Error = Error;

    /// Accepts rank-2 `f64` or `f32` tensors.
    fn try_from(t: Tensor) -> Result<Self> {
        let (h, w) = rank2(&t.dims)?;
        let data = match t.data {
            TensorData::Real64(v) => v,
            TensorData::Real32(v) => v.into_iter().map(f64::from).collect(),
            TensorData::Complex128(_) => {
                return Err(Error::invalid(
                    "complex tensor where a real image was expected",
                ))
            }
        };
        RealImage::new(h, w, data)
    }
}

impl TryFrom<Tensor> for ComplexImage {
    type Error = Error;

    /// Accepts any rank-2 tensor; real data gets a zero imaginary part.
    fn try_from(t: Tensor) -> Result<Self> {
        let (h, w) = rank2(&t.dims)?;
        let data = match t.data {
            TensorData::Complex128(v) => v,
            TensorData::Real64(v) => v.into_iter().map(|x| Complex64::new(x, 0.0)).collect(),
            TensorData::Real32(v) => v
                .into_iter()
                .map(|x| Complex64::new(f64::from(x), 0.0))
                .collect(),
        };
        ComplexImage::new(h, w, data)
    }
}

pub fn save_tensor(path: impl AsRef<Path>, tensor: &Tensor) -> Result<()> {
    let path = path.as_ref();
    let bytes = tensor.to_bytes()?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_tensor(path: impl AsRef<Path>) -> Result<Tensor> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Tensor::from_bytes(&bytes)
}

/// Images that can be written as a grayscale magnitude PNG.
pub trait Magnitudes {
    fn shape(&self) -> (usize, usize);
    fn magnitudes(&self) -> Vec<f64>;
}

impl Magnitudes for RealImage {
    fn shape(&self) -> (usize, usize) {
        self.dims()
    }

    fn magnitudes(&self) -> Vec<f64> {
        self.data.iter().map(|v| v.abs()).collect()
    }
}

impl Magnitudes for ComplexImage {
    fn shape(&self) -> (usize, usize) {
        self.dims()
    }

    fn magnitudes(&self) -> Vec<f64> {
        self.data.iter().map(|z| z.norm()).collect()
    }
}

/// Min-max normalizes magnitudes to 8 bits. A constant image maps to all zeros.
pub fn to_gray8(image: &impl Magnitudes) -> Vec<u8> {
    let mags = image.magnitudes();
    let (lo, hi) = mags
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    if hi.is_nan() || hi <= lo {
        return vec![0; mags.len()];
    }
    let span = hi - lo;
    mags.iter()
        .map(|&v| ((v - lo) / span * 255.0).round().clamp(0.0, 255.0) as u8)
        .collect()
}

fn image_error(path: &Path, err: image::ImageError) -> Error {
    match err {
        image::ImageError::IoError(e) => Error::io(path, e),
        other => Error::Image {
            path: path.to_path_buf(),
            message: other.to_string(),
        },
    }
}

/// Writes the magnitude of `image` as an 8-bit grayscale PNG.
pub fn export_png(image: &impl Magnitudes, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let (h, w) = image.shape();
    let pixels = to_gray8(image);
    let buf = GrayImage::from_raw(w as u32, h as u32, pixels)
        .ok_or_else(|| Error::mismatch("pixel buffer does not match image size"))?;
    buf.save_with_format(path, ImageFormat::Png)
        .map_err(|e| image_error(path, e))
}

/// Reads an 8- or 16-bit grayscale PNG, scaling intensities to [0, 1].
pub fn ingest_png(path: impl AsRef<Path>) -> Result<RealImage> {
    let path = path.as_ref();
    let reader = ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?;
    if reader.format() != Some(ImageFormat::Png) {
        return Err(Error::UnsupportedFormat(format!(
            "{} is not a PNG file",
            path.display()
        )));
    }
    let decoded = reader.decode().map_err(|e| image_error(path, e))?;
    let (w, h) = (decoded.width() as usize, decoded.height() as usize);
    let data: Vec<f64> = match decoded {
        DynamicImage::ImageLuma8(buf) => buf
            .into_raw()
            .into_iter()
            .map(|v| f64::from(v) / 255.0)
            .collect(),
        DynamicImage::ImageLuma16(buf) => buf
            .into_raw()
            .into_iter()
            .map(|v| f64::from(v) / 65535.0)
            .collect(),
        other => {
            return Err(Error::UnsupportedFormat(format!(
                "{:?} pixels; only 8/16-bit grayscale is supported",
                other.color()
            )))
        }
    };
    RealImage::new(h, w, data)
}
