//! Shepp–Logan phantoms.
//!
//! Ellipses live in canonical coordinates where the grid spans [-1, 1] along
//! each axis, x pointing right and y pointing up, with (0, 0) on the pixel at
//! `(height / 2, width / 2)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tensor::RealImage;

/// One additive ellipse of a phantom.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ellipse {
    pub intensity: f64,
    pub semi_x: f64,
    pub semi_y: f64,
    pub center_x: f64,
    pub center_y: f64,
    /// Counter-clockwise rotation of the x semi-axis, degrees.
    pub angle_deg: f64,
}

impl Ellipse {
    const fn new(
        intensity: f64,
        semi_x: f64,
        semi_y: f64,
        center_x: f64,
        center_y: f64,
        angle_deg: f64,
    ) -> Self {
        Self {
            intensity,
            semi_x,
            semi_y,
            center_x,
            center_y,
            angle_deg,
        }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (s, c) = self.angle_deg.to_radians().sin_cos();
        let dx = x - self.center_x;
        let dy = y - self.center_y;
        let u = dx * c + dy * s;
        let v = -dx * s + dy * c;
        (u / self.semi_x).powi(2) + (v / self.semi_y).powi(2) <= 1.0
    }
}

/// The original ten-ellipse Shepp–Logan table.
pub const SHEPP_LOGAN: [Ellipse; 10] = [
    Ellipse::new(2.0, 0.69, 0.92, 0.0, 0.0, 0.0),
    Ellipse::new(-0.98, 0.6624, 0.874, 0.0, -0.0184, 0.0),
    Ellipse::new(-0.02, 0.11, 0.31, 0.22, 0.0, -18.0),
    Ellipse::new(-0.02, 0.16, 0.41, -0.22, 0.0, 18.0),
    Ellipse::new(0.01, 0.21, 0.25, 0.0, 0.35, 0.0),
    Ellipse::new(0.01, 0.046, 0.046, 0.0, 0.1, 0.0),
    Ellipse::new(0.01, 0.046, 0.046, 0.0, -0.1, 0.0),
    Ellipse::new(0.01, 0.046, 0.023, -0.08, -0.605, 0.0),
    Ellipse::new(0.01, 0.023, 0.023, 0.0, -0.606, 0.0),
    Ellipse::new(0.01, 0.023, 0.046, 0.06, -0.605, 0.0),
];

/// Sub-pixel samples per axis used to anti-alias ellipse edges.
pub const SUPERSAMPLE: usize = 4;

pub const MIN_SIZE: usize = 8;

/// Summed intensity of all ellipses covering canonical point `(x, y)`.
pub fn intensity_at(ellipses: &[Ellipse], x: f64, y: f64) -> f64 {
    ellipses
        .iter()
        .filter(|e| e.contains(x, y))
        .map(|e| e.intensity)
        .sum()
}

/// Rasterizes `ellipses`, clamping each point sample to [0, 1] and averaging
/// a `SUPERSAMPLE` x `SUPERSAMPLE` grid of samples per pixel.
pub fn render(height: usize, width: usize, ellipses: &[Ellipse]) -> Result<RealImage> {
    if height < MIN_SIZE || width < MIN_SIZE {
        return Err(Error::invalid(format!(
            "phantom must be at least {MIN_SIZE}x{MIN_SIZE}, got {height}x{width}"
        )));
    }
    let (cy, cx) = ((height / 2) as f64, (width / 2) as f64);
    let (half_h, half_w) = (height as f64 / 2.0, width as f64 / 2.0);
    let offsets: Vec<f64> = (0..SUPERSAMPLE)
        .map(|k| (k as f64 + 0.5) / SUPERSAMPLE as f64 - 0.5)
        .collect();
    let norm = (SUPERSAMPLE * SUPERSAMPLE) as f64;
    Ok(RealImage::from_fn(height, width, |i, j| {
        let mut acc = 0.0;
        for &oy in &offsets {
            let y = (cy - (i as f64 + oy)) / half_h;
            for &ox in &offsets {
                let x = (j as f64 + ox - cx) / half_w;
                acc += intensity_at(ellipses, x, y).clamp(0.0, 1.0);
            }
        }
        acc / norm
    }))
}

/// Canonical Shepp–Logan phantom with intensities clamped to [0, 1].
pub fn shepp_logan(height: usize, width: usize) -> Result<RealImage> {
    render(height, width, &SHEPP_LOGAN)
}

/// A seeded perturbation of the Shepp–Logan geometry with randomized
/// internal contrast, for building multi-image test sets.
pub fn shepp_logan_variant(height: usize, width: usize, seed: u64) -> Result<RealImage> {
    render(height, width, &variant_ellipses(seed))
}

pub fn variant_ellipses(seed: u64) -> Vec<Ellipse> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let head_angle = rng.random_range(-6.0..6.0);
    let head_scale = rng.random_range(0.92..1.0);
    SHEPP_LOGAN
        .iter()
        .enumerate()
        .map(|(k, e)| {
            let intensity = match k {
                0 => 1.0,
                1 => -rng.random_range(0.55..0.8),
                2 | 3 => -rng.random_range(0.05..0.2),
                _ => rng.random_range(0.1..0.45),
            };
            let (s, c) = f64::to_radians(head_angle).sin_cos();
            let jitter = if k < 2 { 0.0 } else { 0.02 };
            let cx = e.center_x + rng.random_range(-1.0..=1.0) * jitter;
            let cy = e.center_y + rng.random_range(-1.0..=1.0) * jitter;
            let axis_scale = if k < 2 {
                1.0
            } else {
                rng.random_range(0.85..1.15)
            };
            Ellipse {
                intensity,
                semi_x: e.semi_x * head_scale * axis_scale,
                semi_y: e.semi_y * head_scale * axis_scale,
                center_x: head_scale * (cx * c - cy * s),
                center_y: head_scale * (cx * s + cy * c),
                angle_deg: e.angle_deg + head_angle + rng.random_range(-5.0..5.0),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_sum_at_origin() {
        // Outer head (2.0) plus brain (-0.98); every other ellipse misses the origin.
        let v = intensity_at(&SHEPP_LOGAN, 0.0, 0.0);
        assert!((v - 1.02).abs() < 1e-12);
        let covering: Vec<usize> = (0..10)
            .filter(|&k| SHEPP_LOGAN[k].contains(0.0, 0.0))
            .collect();
        assert_eq!(covering, vec![0, 1]);
    }

    #[test]
    fn center_and_corner() {
        let img = shepp_logan(64, 64).unwrap();
        assert_eq!(img.get(32, 32), 1.02f64.clamp(0.0, 1.0));
        assert_eq!(img.get(0, 0), 0.0);
        assert_eq!(img.get(63, 63), 0.0);
        assert_eq!(img.get(0, 63), 0.0);
    }

    #[test]
    fn values_in_unit_interval() {
        for (h, w) in [(8, 8), (17, 31), (64, 48)] {
            let img = shepp_logan(h, w).unwrap();
            assert!(img.data().iter().all(|v| (0.0..=1.0).contains(v)));
        }
        let img = shepp_logan_variant(40, 40, 7).unwrap();
        assert!(img.data().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn too_small_rejected() {
        assert!(shepp_logan(7, 64).is_err());
        assert!(shepp_logan(64, 4).is_err());
    }

    #[test]
    fn deterministic() {
        assert_eq!(shepp_logan(32, 32).unwrap(), shepp_logan(32, 32).unwrap());
        assert_eq!(
            shepp_logan_variant(32, 32, 3).unwrap(),
            shepp_logan_variant(32, 32, 3).unwrap()
        );
        assert_ne!(
            shepp_logan_variant(32, 32, 3).unwrap(),
            shepp_logan_variant(32, 32, 4).unwrap()
        );
    }

    #[test]
    fn variants_have_internal_contrast() {
        let img = shepp_logan_variant(64, 64, 1).unwrap();
        let mut levels: Vec<u64> = img.data().iter().map(|v| (v * 20.0) as u64).collect();
        levels.sort_unstable();
        levels.dedup();
        assert!(levels.len() >= 4, "{levels:?}");
    }
}
