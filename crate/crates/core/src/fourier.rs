//! Centered, orthonormal 2D DFT. The DC sample sits at `(H / 2, W / 2)`
//! (integer division) in both image space and k-space.

use std::sync::Arc;

use rustfft::{Fft, FftPlanner};

use crate::tensor::{Complex64, ComplexImage};

/// Planned centered 2D transform for one grid size. Cheap to share across threads.
#[derive(Clone)]
pub struct Fft2 {
    height: usize,
    width: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Fft2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft2")
            .field("height", &self.height)
            .field("width", &self.width)
            .finish()
    }
}

impl Fft2 {
    pub fn new(height: usize, width: usize) -> Self {
        assert!(height > 0 && width > 0, "empty FFT grid");
        let mut planner = FftPlanner::new();
        Self {
            height,
            width,
            row_fwd: planner.plan_fft_forward(width),
            row_inv: planner.plan_fft_inverse(width),
            col_fwd: planner.plan_fft_forward(height),
            col_inv: planner.plan_fft_inverse(height),
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn forward_in_place(&self, data: &mut [Complex64]) {
        self.transform(data, &*self.row_fwd, &*self.col_fwd);
    }

    pub fn inverse_in_place(&self, data: &mut [Complex64]) {
        self.transform(data, &*self.row_inv, &*self.col_inv);
    }

    pub fn forward(&self, image: &ComplexImage) -> ComplexImage {
        let mut data = image.data().to_vec();
        self.forward_in_place(&mut data);
        ComplexImage::new(self.height, self.width, data).expect("finite transform")
    }

    pub fn inverse(&self, kspace: &ComplexImage) -> ComplexImage {
        let mut data = kspace.data().to_vec();
        self.inverse_in_place(&mut data);
        ComplexImage::new(self.height, self.width, data).expect("finite transform")
    }

    fn transform(&self, data: &mut [Complex64], rows: &dyn Fft<f64>, cols: &dyn Fft<f64>) {
        let (h, w) = (self.height, self.width);
        assert_eq!(data.len(), h * w, "grid size does not match the plan");
        let (sh, sw) = (h / 2, w / 2);

        // ifftshift: the centre sample moves to index 0.
        let mut buf = vec![Complex64::new(0.0, 0.0); h * w];
        for i in 0..h {
            let src = ((i + sh) % h) * w;
            for j in 0..w {
                buf[i * w + j] = data[src + (j + sw) % w];
            }
        }
        rows.process(&mut buf);

        let mut cols_buf = vec![Complex64::new(0.0, 0.0); h * w];
        for i in 0..h {
            for j in 0..w {
                cols_buf[j * h + i] = buf[i * w + j];
            }
        }
        cols.process(&mut cols_buf);

        // fftshift on the way out, with orthonormal scaling.
        let scale = 1.0 / ((h * w) as f64).sqrt();
        for i in 0..h {
            let si = (i + h - sh) % h;
            for j in 0..w {
                let sj = (j + w - sw) % w;
                data[i * w + j] = cols_buf[sj * h + si] * scale;
            }
        }
    }
}

/// Image space to centered k-space.
pub fn fft2c(image: &ComplexImage) -> ComplexImage {
    Fft2::new(image.height(), image.width()).forward(image)
}

/// Centered k-space to image space.
pub fn ifft2c(kspace: &ComplexImage) -> ComplexImage {
    Fft2::new(kspace.height(), kspace.width()).inverse(kspace)
}

/// Rotates a centered grid by `theta_deg` about `(H / 2, W / 2)` with three
/// FFT shears, i.e. periodic band-limited interpolation. Same sense as
/// [`crate::encoding::rotate_image`]. Unitary, and exactly undone by `-theta_deg`.
pub fn rotate_kspace(kspace: &ComplexImage, theta_deg: f64) -> ComplexImage {
    let (h, w) = kspace.dims();
    let theta = theta_deg.to_radians();
    let (t, s) = ((theta / 2.0).tan(), theta.sin());
    let (cy, cx) = ((h / 2) as f64, (w / 2) as f64);
    let mut data = kspace.data().to_vec();
    let mut planner = FftPlanner::new();
    let (col_fwd, col_inv) = (planner.plan_fft_forward(h), planner.plan_fft_inverse(h));
    let (row_fwd, row_inv) = (planner.plan_fft_forward(w), planner.plan_fft_inverse(w));

    let mut column = vec![Complex64::new(0.0, 0.0); h];
    let mut shear_columns = |data: &mut [Complex64]| {
        for j in 0..w {
            for i in 0..h {
                column[i] = data[i * w + j];
            }
            shift_line(&mut column, t * (j as f64 - cx), &*col_fwd, &*col_inv);
            for i in 0..h {
                data[i * w + j] = column[i];
            }
        }
    };
    shear_columns(&mut data);
    for (i, row) in data.chunks_exact_mut(w).enumerate() {
        shift_line(row, -s * (i as f64 - cy), &*row_fwd, &*row_inv);
    }
    shear_columns(&mut data);
    ComplexImage::new(h, w, data).expect("finite rotation")
}

/// `line[n] <- line[n - d]` with periodic sinc interpolation.
fn shift_line(line: &mut [Complex64], d: f64, fwd: &dyn Fft<f64>, inv: &dyn Fft<f64>) {
    let n = line.len();
    if d == 0.0 || n == 1 {
        return;
    }
    fwd.process(line);
    for (m, v) in line.iter_mut().enumerate() {
        let bin = if 2 * m < n {
            m as f64
        } else {
            m as f64 - n as f64
        };
        let f = bin / n as f64;
        *v *= Complex64::from_polar(1.0 / n as f64, -2.0 * std::f64::consts::PI * f * d);
    }
    inv.process(line);
}
