//! Synthetic receive-coil sensitivity maps.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tensor::{Complex64, ComplexImage, Tensor, TensorData};

/// Tolerance on the pixelwise sum of squares when loading stored maps.
pub const SOS_TOLERANCE: f64 = 1e-9;

/// `C` complex coil maps over an `H x W` grid whose squared magnitudes sum to
/// one at every pixel.
#[derive(Clone, Debug, PartialEq)]
pub struct SensitivityMaps {
    num_coils: usize,
    height: usize,
    width: usize,
    /// Coil-major: `data[(c * H + i) * W + j]`.
    data: Vec<Complex64>,
}

impl SensitivityMaps {
    /// Normalizes raw coil profiles so that `sum_c |map_c|^2 = 1` everywhere.
    pub fn normalized(
        num_coils: usize,
        height: usize,
        width: usize,
        mut data: Vec<Complex64>,
    ) -> Result<Self> {
        if num_coils == 0 {
            return Err(Error::invalid("at least one coil is required"));
        }
        let n = height * width;
        if data.len() != num_coils * n {
            return Err(Error::mismatch(format!(
                "{num_coils} coils of {height}x{width} need {} values, got {}",
                num_coils * n,
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|z| !z.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        for p in 0..n {
            let sos: f64 = (0..num_coils).map(|c| data[c * n + p].norm_sqr()).sum();
            if sos <= 0.0 {
                return Err(Error::invalid(format!("all coils vanish at pixel {p}")));
            }
            let inv = 1.0 / sos.sqrt();
            for c in 0..num_coils {
                data[c * n + p] *= inv;
            }
        }
        Ok(Self {
            num_coils,
            height,
            width,
            data,
        })
    }

    pub fn num_coils(&self) -> usize {
        self.num_coils
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

    pub fn coil(&self, c: usize) -> &[Complex64] {
        let n = self.height * self.width;
        &self.data[c * n..(c + 1) * n]
    }

    pub fn coil_image(&self, c: usize) -> ComplexImage {
        ComplexImage::new(self.height, self.width, self.coil(c).to_vec()).expect("valid map")
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    /// Largest deviation of the pixelwise sum of squares from one.
    pub fn sos_deviation(&self) -> f64 {
        let n = self.height * self.width;
        (0..n)
            .map(|p| {
                let sos: f64 = (0..self.num_coils)
                    .map(|c| self.data[c * n + p].norm_sqr())
                    .sum();
                (sos - 1.0).abs()
            })
            .fold(0.0, f64::max)
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor::new(
            vec![self.num_coils, self.height, self.width],
            TensorData::Complex128(self.data.clone()),
        )
        .expect("consistent dims")
    }

    /// Accepts rank-3 complex tensors that are already SOS-normalized.
    pub fn from_tensor(tensor: Tensor) -> Result<Self> {
        let (dims, data) = tensor.into_parts();
        let [c, h, w] = dims[..] else {
            return Err(Error::mismatch(format!(
                "coil maps must be rank 3, got dims {dims:?}"
            )));
        };
        let TensorData::Complex128(data) = data else {
            return Err(Error::invalid("coil maps must be complex"));
        };
        if c == 0 {
            return Err(Error::invalid("at least one coil is required"));
        }
        let maps = Self {
            num_coils: c,
            height: h,
            width: w,
            data,
        };
        let dev = maps.sos_deviation();
        if dev > SOS_TOLERANCE {
            return Err(Error::invalid(format!(
                "coil maps are not sum-of-squares normalized (deviation {dev:e})"
            )));
        }
        Ok(maps)
    }
}

/// Point where the ray from the grid centre at `angle` leaves the image rectangle,
/// as (row, col).
fn boundary_point(height: usize, width: usize, angle: f64) -> (f64, f64) {
    let (cy, cx) = ((height / 2) as f64, (width / 2) as f64);
    let (half_h, half_w) = (height as f64 / 2.0, width as f64 / 2.0);
    let (s, c) = angle.sin_cos();
    let tx = if c.abs() > 1e-12 {
        half_w / c.abs()
    } else {
        f64::INFINITY
    };
    let ty = if s.abs() > 1e-12 {
        half_h / s.abs()
    } else {
        f64::INFINITY
    };
    let t = tx.min(ty);
    (cy - t * s, cx + t * c)
}

/// Gaussian coil profiles placed around the image boundary.
///
/// Coil `c` peaks at the boundary point at angle `2 pi c / C` with standard
/// deviation `sigma_fraction * min(H, W)` and carries a seeded linear phase
/// ramp. The stack is then sum-of-squares normalized.
pub fn gen_gaussian_maps(
    num_coils: usize,
    height: usize,
    width: usize,
    sigma_fraction: f64,
    seed: u64,
) -> Result<SensitivityMaps> {
    if num_coils == 0 {
        return Err(Error::invalid("at least one coil is required"));
    }
    if !(sigma_fraction > 0.0 && sigma_fraction <= 2.0) {
        return Err(Error::invalid(format!(
            "sigma_fraction must lie in (0, 2], got {sigma_fraction}"
        )));
    }
    if height == 0 || width == 0 {
        return Err(Error::invalid("coil maps need a non-empty grid"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sigma = sigma_fraction * height.min(width) as f64;
    let (cy, cx) = ((height / 2) as f64, (width / 2) as f64);
    let n = height * width;

    struct Coil {
        row: f64,
        col: f64,
        ky: f64,
        kx: f64,
        offset: f64,
    }
    let coils: Vec<Coil> = (0..num_coils)
        .map(|c| {
            let (row, col) = boundary_point(height, width, 2.0 * PI * c as f64 / num_coils as f64);
            Coil {
                row,
                col,
                ky: rng.random_range(-0.5..0.5),
                kx: rng.random_range(-0.5..0.5),
                offset: rng.random_range(0.0..2.0 * PI),
            }
        })
        .collect();

    let mut data = vec![Complex64::new(0.0, 0.0); num_coils * n];
    let mut log_amp = vec![0.0; num_coils];
    for i in 0..height {
        for j in 0..width {
            for (c, coil) in coils.iter().enumerate() {
                let d2 = (i as f64 - coil.row).powi(2) + (j as f64 - coil.col).powi(2);
                log_amp[c] = -d2 / (2.0 * sigma * sigma);
            }
            // Shift by the per-pixel maximum so distant pixels cannot underflow;
            // the common factor cancels in the normalization.
            let peak = log_amp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            for (c, coil) in coils.iter().enumerate() {
                let phase = coil.offset
                    + 2.0
                        * PI
                        * (coil.kx * (j as f64 - cx) / width as f64
                            + coil.ky * (i as f64 - cy) / height as f64);
                data[c * n + i * width + j] =
                    Complex64::from_polar((log_amp[c] - peak).exp(), phase);
            }
        }
    }
    SensitivityMaps::normalized(num_coils, height, width, data)
}
