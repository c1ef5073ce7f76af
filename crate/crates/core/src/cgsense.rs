//! CG SENSE: conjugate gradients on the SENSE normal equations
//! `(E^H E + lambda I) x = E^H y`, where `E` assumes a static object.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::coils::SensitivityMaps;
use crate::encoding::{CoilKSpace, SamplingPattern};
use crate::error::{Error, Result};
use crate::fourier::Fft2;
use crate::tensor::{norm, Complex64, ComplexImage};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CgConfig {
    pub max_iters: usize,
    /// Stop once `||r_k|| / ||r_0||` drops to this value.
    pub tol: f64,
    /// Tikhonov weight.
    pub lambda: f64,
}

impl Default for CgConfig {
    fn default() -> Self {
        Self {
            max_iters: 20,
            tol: 1e-8,
            lambda: 0.0,
        }
    }
}

impl CgConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters must be at least 1"));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::invalid(format!(
                "tol must be positive, got {}",
                self.tol
            )));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::invalid(format!(
                "lambda must be non-negative, got {}",
                self.lambda
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CgReport {
    pub iterations: usize,
    /// `||r_k|| / ||r_0||` for `k = 0..=iterations`; empty when the right-hand side is zero.
    pub residuals: Vec<f64>,
    pub wall_time_seconds: f64,
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Solves `A x = b` for Hermitian positive (semi-)definite `A`, starting from zero.
pub fn conjugate_gradient(
    apply: impl Fn(&[Complex64], &mut [Complex64]),
    rhs: &[Complex64],
    config: &CgConfig,
) -> (Vec<Complex64>, CgReport) {
    let start = Instant::now();
    let n = rhs.len();
    let mut x = vec![ZERO; n];
    let r0 = norm(rhs);
    if r0 == 0.0 {
        return (
            x,
            CgReport {
                iterations: 0,
                residuals: Vec::new(),
                wall_time_seconds: start.elapsed().as_secs_f64(),
            },
        );
    }
    let mut r = rhs.to_vec();
    let mut p = r.clone();
    let mut ap = vec![ZERO; n];
    let mut rs = r0 * r0;
    let mut residuals = vec![1.0];
    let mut iterations = 0;
    while iterations < config.max_iters {
        apply(&p, &mut ap);
        let curvature = dot(&p, &ap).re;
        if curvature.is_nan() || curvature <= 0.0 {
            break;
        }
        let alpha = rs / curvature;
        x.iter_mut().zip(&p).for_each(|(xi, pi)| *xi += pi * alpha);
        r.iter_mut()
            .zip(&ap)
            .for_each(|(ri, api)| *ri -= api * alpha);
        iterations += 1;
        let rs_new = r.iter().map(|z| z.norm_sqr()).sum::<f64>();
        let rel = rs_new.sqrt() / r0;
        residuals.push(rel);
        if rel <= config.tol {
            break;
        }
        let beta = rs_new / rs;
        p.iter_mut()
            .zip(&r)
            .for_each(|(pi, ri)| *pi = ri + *pi * beta);
        rs = rs_new;
    }
    (
        x,
        CgReport {
            iterations,
            residuals,
            wall_time_seconds: start.elapsed().as_secs_f64(),
        },
    )
}

/// `E^H E + lambda I` for a static object sampled on the rows where `row_mask` is set.
pub struct SenseNormalOperator<'a> {
    maps: &'a SensitivityMaps,
    row_mask: Vec<bool>,
    lambda: f64,
    fft: Fft2,
}

impl<'a> SenseNormalOperator<'a> {
    pub fn new(maps: &'a SensitivityMaps, row_mask: Vec<bool>, lambda: f64) -> Result<Self> {
        if row_mask.len() != maps.height() {
            return Err(Error::mismatch(format!(
                "row mask has {} rows but maps have {}",
                row_mask.len(),
                maps.height()
            )));
        }
        Ok(Self {
            maps,
            row_mask,
            lambda,
            fft: Fft2::new(maps.height(), maps.width()),
        })
    }

    fn mask_rows(&self, buf: &mut [Complex64]) {
        let w = self.maps.width();
        for (line, &keep) in buf.chunks_exact_mut(w).zip(&self.row_mask) {
            if !keep {
                line.fill(ZERO);
            }
        }
    }

    pub fn apply(&self, x: &[Complex64], out: &mut [Complex64]) {
        let mut buf = vec![ZERO; x.len()];
        out.iter_mut()
            .zip(x)
            .for_each(|(o, v)| *o = v * self.lambda);
        for c in 0..self.maps.num_coils() {
            let coil = self.maps.coil(c);
            buf.iter_mut()
                .zip(x.iter().zip(coil))
                .for_each(|(b, (v, m))| *b = v * m);
            self.fft.forward_in_place(&mut buf);
            self.mask_rows(&mut buf);
            self.fft.inverse_in_place(&mut buf);
            out.iter_mut()
                .zip(buf.iter().zip(coil))
                .for_each(|(o, (v, m))| *o += m.conj() * v);
        }
    }

    /// `E^H y`.
    pub fn adjoint(&self, y: &CoilKSpace) -> Vec<Complex64> {
        let n = self.maps.height() * self.maps.width();
        let mut out = vec![ZERO; n];
        let mut buf = vec![ZERO; n];
        for c in 0..self.maps.num_coils() {
            buf.copy_from_slice(y.coil(c));
            self.mask_rows(&mut buf);
            self.fft.inverse_in_place(&mut buf);
            out.iter_mut()
                .zip(buf.iter().zip(self.maps.coil(c)))
                .for_each(|(o, (v, m))| *o += m.conj() * v);
        }
        out
    }
}

fn check_inputs(y: &CoilKSpace, maps: &SensitivityMaps, config: &CgConfig) -> Result<()> {
    config.validate()?;
    let (c, h, w) = y.dims();
    if (c, h, w) != (maps.num_coils(), maps.height(), maps.width()) {
        return Err(Error::mismatch(format!(
            "k-space is {c}x{h}x{w} but coil maps are {}x{}x{}",
            maps.num_coils(),
            maps.height(),
            maps.width()
        )));
    }
    if let Some(i) = y.data().iter().position(|z| !z.is_finite()) {
        return Err(Error::NonFinite(i));
    }
    Ok(())
}

/// Reconstructs combined k-space `y` as if the object never moved. Rows
/// acquired by any shot of `pattern` enter the model.
pub fn cg_sense(
    y: &CoilKSpace,
    maps: &SensitivityMaps,
    pattern: &SamplingPattern,
    config: &CgConfig,
) -> Result<(ComplexImage, CgReport)> {
    if pattern.height() != maps.height() {
        return Err(Error::mismatch(format!(
            "pattern covers {} rows but maps have {}",
            pattern.height(),
            maps.height()
        )));
    }
    let mask = (0..pattern.height())
        .map(|row| pattern.shot_of_line(row) < pattern.num_shots())
        .collect();
    cg_sense_masked(y, maps, mask, config)
}

/// CG SENSE restricted to the rows set in `row_mask`; undersampled masks give
/// accelerated SENSE.
pub fn cg_sense_masked(
    y: &CoilKSpace,
    maps: &SensitivityMaps,
    row_mask: Vec<bool>,
    config: &CgConfig,
) -> Result<(ComplexImage, CgReport)> {
    check_inputs(y, maps, config)?;
    let op = SenseNormalOperator::new(maps, row_mask, config.lambda)?;
    let rhs = op.adjoint(y);
    let (x, report) = conjugate_gradient(|v, out| op.apply(v, out), &rhs, config);
    let image = ComplexImage::new(maps.height(), maps.width(), x)?;
    Ok((image, report))
}
