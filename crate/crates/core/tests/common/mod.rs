#![allow(dead_code)]

use moco_core::{Complex64, ComplexImage, MultishotKSpace};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_image(rng: &mut ChaCha8Rng, h: usize, w: usize) -> ComplexImage {
    ComplexImage::from_fn(h, w, |_, _| {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    })
}

pub fn random_kspace(
    rng: &mut ChaCha8Rng,
    shots: usize,
    coils: usize,
    h: usize,
    w: usize,
) -> MultishotKSpace {
    let data = (0..shots * coils * h * w)
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    MultishotKSpace::new(shots, coils, h, w, data).unwrap()
}

pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn l2(a: &[Complex64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn rel_l2(a: &[Complex64], reference: &[Complex64]) -> f64 {
    let diff: f64 = a
        .iter()
        .zip(reference)
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt();
    diff / l2(reference)
}
