//! PSNR and SSIM.
//!
//! Both metrics take their peak (dynamic range) from the reference image.
//! SSIM uses an 11x11 Gaussian window with sigma 1.5, K1 = 0.01, K2 = 0.03,
//! and averages the local index over window positions that lie fully inside
//! the image.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::tensor::RealImage;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

fn check_pair(reference: &RealImage, test: &RealImage) -> Result<f64> {
    if reference.dims() != test.dims() {
        return Err(Error::mismatch(format!(
            "reference is {:?} but test is {:?}",
            reference.dims(),
            test.dims()
        )));
    }
    let peak = reference.max_abs();
    if peak == 0.0 {
        return Err(Error::invalid(
            "reference image is all zero; peak undefined",
        ));
    }
    Ok(peak)
}

/// `10 log10(peak^2 / MSE)` in dB; `f64::INFINITY` for identical images.
pub fn psnr(reference: &RealImage, test: &RealImage) -> Result<f64> {
    let peak = check_pair(reference, test)?;
    let n = reference.data().len() as f64;
    let mse = reference
        .data()
        .iter()
        .zip(test.data())
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        / n;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / mse).log10())
}

fn gaussian_taps() -> [f64; SSIM_WINDOW] {
    let r = (SSIM_WINDOW / 2) as f64;
    let mut taps = [0.0; SSIM_WINDOW];
    for (k, t) in taps.iter_mut().enumerate() {
        let d = k as f64 - r;
        *t = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let sum: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= sum);
    taps
}

/// Separable Gaussian filter keeping only fully-covered positions.
fn filter_valid(data: &[f64], h: usize, w: usize, taps: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let (oh, ow) = (h + 1 - SSIM_WINDOW, w + 1 - SSIM_WINDOW);
    let mut rows = vec![0.0; h * ow];
    for i in 0..h {
        let line = &data[i * w..(i + 1) * w];
        for j in 0..ow {
            rows[i * ow + j] = taps.iter().zip(&line[j..]).map(|(t, v)| t * v).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for i in 0..oh {
        for j in 0..ow {
            out[i * ow + j] = taps
                .iter()
                .enumerate()
                .map(|(k, t)| t * rows[(i + k) * ow + j])
                .sum();
        }
    }
    out
}

/// Mean structural similarity, in [-1, 1].
pub fn ssim(reference: &RealImage, test: &RealImage) -> Result<f64> {
    let peak = check_pair(reference, test)?;
    let (h, w) = reference.dims();
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::invalid(format!(
            "SSIM needs at least {SSIM_WINDOW}x{SSIM_WINDOW} pixels, got {h}x{w}"
        )));
    }
    let taps = gaussian_taps();
    let x = reference.data();
    let y = test.data();
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(y).map(|(a, b)| a * b).collect();

    let mu_x = filter_valid(x, h, w, &taps);
    let mu_y = filter_valid(y, h, w, &taps);
    let m_xx = filter_valid(&xx, h, w, &taps);
    let m_yy = filter_valid(&yy, h, w, &taps);
    let m_xy = filter_valid(&xy, h, w, &taps);

    let c1 = (SSIM_K1 * peak).powi(2);
    let c2 = (SSIM_K2 * peak).powi(2);
    let n = mu_x.len();
    let total: f64 = (0..n)
        .map(|k| {
            let (mx, my) = (mu_x[k], mu_y[k]);
            let vx = m_xx[k] - mx * mx;
            let vy = m_yy[k] - my * my;
            let cov = m_xy[k] - mx * my;
            ((2.0 * mx * my + c1) * (2.0 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2))
        })
        .sum();
    Ok(total / n as f64)
}

/// Summary line for a set of (reference, test) pairs, optionally for one
/// degree of motion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub degree: Option<f64>,
    #[serde(serialize_with = "ser_db", deserialize_with = "de_db")]
    pub psnr_db: f64,
    pub ssim: f64,
    pub n_images: usize,
}

impl MetricReport {
    /// Averages PSNR and SSIM over `pairs`. An identical pair makes the mean PSNR infinite.
    pub fn over_pairs<'a>(
        degree: Option<f64>,
        pairs: impl IntoIterator<Item = (&'a RealImage, &'a RealImage)>,
    ) -> Result<Self> {
        let (mut p_sum, mut s_sum, mut n) = (0.0, 0.0, 0usize);
        for (reference, test) in pairs {
            p_sum += psnr(reference, test)?;
            s_sum += ssim(reference, test)?;
            n += 1;
        }
        if n == 0 {
            return Err(Error::invalid("no image pairs to evaluate"));
        }
        Ok(Self {
            degree,
            psnr_db: p_sum / n as f64,
            ssim: s_sum / n as f64,
            n_images: n,
        })
    }
}

/// JSON has no infinity; identical images report `"inf"`.
fn ser_db<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else if *v > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_str("-inf")
    }
}

fn de_db<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Db {
        Num(f64),
        Text(String),
    }
    match Db::deserialize(d)? {
        Db::Num(v) => Ok(v),
        Db::Text(t) if t == "inf" => Ok(f64::INFINITY),
        Db::Text(t) if t == "-inf" => Ok(f64::NEG_INFINITY),
        Db::Text(t) => Err(serde::de::Error::custom(format!("bad PSNR value {t:?}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn img(h: usize, w: usize, data: &[f64]) -> RealImage {
        RealImage::new(h, w, data.to_vec()).unwrap()
    }

    #[test]
    fn psnr_hand_example() {
        let reference = img(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let test = img(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        // MSE = 1/4, peak = 1.
        let expected = 10.0 * 4f64.log10();
        assert!((psnr(&reference, &test).unwrap() - expected).abs() < 1e-12);
        assert!((expected - 6.0206).abs() < 1e-4);
    }

    #[test]
    fn psnr_identical_is_infinite() {
        let a = img(2, 2, &[0.1, 0.2, 0.3, 0.4]);
        assert_eq!(psnr(&a, &a).unwrap(), f64::INFINITY);
    }

    #[test]
    fn psnr_errors() {
        let a = img(2, 2, &[0.0; 4]);
        assert!(psnr(&a, &a).is_err());
        let b = img(1, 4, &[1.0; 4]);
        let c = img(2, 2, &[1.0; 4]);
        assert!(psnr(&b, &c).is_err());
    }

    #[test]
    fn ssim_identity_and_size_checks() {
        let a = RealImage::from_fn(16, 13, |i, j| ((i * 7 + j * 3) % 11) as f64 / 10.0);
        assert!((ssim(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        let small = RealImage::from_fn(10, 20, |i, j| (i + j) as f64);
        assert!(ssim(&small, &small).is_err());
        let other = RealImage::from_fn(13, 16, |i, j| (i + j) as f64);
        assert!(ssim(&a, &other).is_err());
    }

    #[test]
    fn taps_are_normalized_and_symmetric() {
        let t = gaussian_taps();
        assert!((t.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        for k in 0..SSIM_WINDOW {
            assert_eq!(t[k], t[SSIM_WINDOW - 1 - k]);
        }
    }

    #[test]
    fn report_json_handles_infinity() {
        let r = MetricReport {
            degree: Some(5.0),
            psnr_db: f64::INFINITY,
            ssim: 1.0,
            n_images: 3,
        };
        let text = serde_json::to_string(&r).unwrap();
        assert_eq!(
            text,
            r#"{"degree":5.0,"psnr_db":"inf","ssim":1.0,"n_images":3}"#
        );
        let back: MetricReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back, r);
        let finite: MetricReport =
            serde_json::from_str(r#"{"degree":null,"psnr_db":31.82,"ssim":0.95,"n_images":1}"#)
                .unwrap();
        assert_eq!(finite.psnr_db, 31.82);
    }
}
