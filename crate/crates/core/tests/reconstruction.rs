mod common;

use common::{random_image, rel_l2, rng};
use moco_core::cgsense::SenseNormalOperator;
use moco_core::coils::SensitivityMaps;
use moco_core::{
    cg_sense, cg_sense_masked, corrupt, gen_gaussian_maps, make_trajectory, psnr, shepp_logan,
    CgConfig, CoilKSpace, Complex64, SamplingPattern,
};
use nalgebra::{DMatrix, DVector};
use std::f64::consts::PI;

/// Dense encoding matrix built from the DFT definition, rows ordered
/// (coil, sampled row, column).
fn dense_encoding(maps: &SensitivityMaps, row_mask: &[bool]) -> DMatrix<Complex64> {
    let (h, w) = maps.dims();
    let (ch, cw) = ((h / 2) as f64, (w / 2) as f64);
    let rows: Vec<usize> = (0..h).filter(|&u| row_mask[u]).collect();
    let n = h * w;
    let scale = 1.0 / (n as f64).sqrt();
    let mut e = DMatrix::zeros(maps.num_coils() * rows.len() * w, n);
    for c in 0..maps.num_coils() {
        for (ri, &u) in rows.iter().enumerate() {
            for v in 0..w {
                let row = (c * rows.len() + ri) * w + v;
                for i in 0..h {
                    for j in 0..w {
                        let phase = -2.0
                            * PI
                            * ((u as f64 - ch) * (i as f64 - ch) / h as f64
                                + (v as f64 - cw) * (j as f64 - cw) / w as f64);
                        e[(row, i * w + j)] =
                            maps.coil(c)[i * w + j] * Complex64::from_polar(scale, phase);
                    }
                }
            }
        }
    }
    e
}

fn dense_solution(
    maps: &SensitivityMaps,
    row_mask: &[bool],
    y: &CoilKSpace,
    lambda: f64,
) -> Vec<Complex64> {
    let (h, w) = maps.dims();
    let e = dense_encoding(maps, row_mask);
    let mut data = Vec::new();
    for c in 0..maps.num_coils() {
        for u in (0..h).filter(|&u| row_mask[u]) {
            data.extend_from_slice(&y.coil(c)[u * w..(u + 1) * w]);
        }
    }
    let yv = DVector::from_vec(data);
    let eh = e.adjoint();
    let a = &eh * &e + DMatrix::identity(h * w, h * w) * Complex64::new(lambda, 0.0);
    let b = &eh * yv;
    a.lu()
        .solve(&b)
        .expect("normal matrix is invertible")
        .iter()
        .copied()
        .collect()
}

fn random_coil_kspace(seed: u64, c: usize, h: usize, w: usize) -> CoilKSpace {
    let mut r = rng(seed);
    let mut data = Vec::new();
    for _ in 0..c {
        data.extend_from_slice(random_image(&mut r, h, w).data());
    }
    CoilKSpace::new(c, h, w, data).unwrap()
}

#[test]
fn cg_matches_dense_solve_full_sampling() {
    let maps = gen_gaussian_maps(2, 8, 8, 0.4, 3).unwrap();
    let pattern = SamplingPattern::interleaved(2, 8).unwrap();
    let y = random_coil_kspace(1, 2, 8, 8);
    for lambda in [0.0, 1e-3] {
        let cfg = CgConfig {
            lambda,
            ..CgConfig::default()
        };
        let (x, _) = cg_sense(&y, &maps, &pattern, &cfg).unwrap();
        let reference = dense_solution(&maps, &[true; 8], &y, lambda);
        assert!(rel_l2(x.data(), &reference) < 1e-6, "lambda {lambda}");
    }
}

#[test]
fn cg_matches_dense_solve_undersampled() {
    // Only the first of two interleaved shots: twofold accelerated SENSE.
    let maps = gen_gaussian_maps(2, 8, 8, 0.4, 3).unwrap();
    let mask: Vec<bool> = (0..8).map(|l| l % 2 == 0).collect();
    let y = random_coil_kspace(2, 2, 8, 8);
    for lambda in [0.0, 1e-3] {
        let cfg = CgConfig {
            max_iters: 200,
            tol: 1e-13,
            lambda,
        };
        let (x, report) = cg_sense_masked(&y, &maps, mask.clone(), &cfg).unwrap();
        let reference = dense_solution(&maps, &mask, &y, lambda);
        let err = rel_l2(x.data(), &reference);
        assert!(
            err < 1e-6,
            "lambda {lambda}: {err} after {} iterations",
            report.iterations
        );
    }
}

#[test]
fn terminal_iterate_satisfies_normal_equations() {
    let truth = shepp_logan(32, 32).unwrap();
    let maps = gen_gaussian_maps(4, 32, 32, 0.3, 8).unwrap();
    let mask: Vec<bool> = (0..32)
        .map(|l| l % 2 == 0 || (12..20).contains(&l))
        .collect();
    let pattern = SamplingPattern::interleaved(2, 32).unwrap();
    let y = corrupt(&truth, &maps, &pattern, &make_trajectory(2, 0.0).unwrap()).unwrap();
    for lambda in [0.0, 1e-2] {
        let cfg = CgConfig {
            max_iters: 100,
            tol: 1e-8,
            lambda,
        };
        let (x, report) = cg_sense_masked(&y, &maps, mask.clone(), &cfg).unwrap();
        assert!(*report.residuals.last().unwrap() <= cfg.tol);
        let op = SenseNormalOperator::new(&maps, mask.clone(), lambda).unwrap();
        let rhs = op.adjoint(&y);
        let mut ax = vec![Complex64::new(0.0, 0.0); rhs.len()];
        op.apply(x.data(), &mut ax);
        assert!(rel_l2(&ax, &rhs) <= 10.0 * cfg.tol);
    }
}

#[test]
fn residual_history_is_non_increasing_for_full_sampling() {
    let truth = shepp_logan(32, 32).unwrap();
    for (seed, degree, lambda) in [
        (0, 0.0, 0.0),
        (1, 5.0, 1e-3),
        (2, 14.0, 0.0),
        (3, 10.0, 0.1),
    ] {
        let maps = gen_gaussian_maps(4, 32, 32, 0.5, seed).unwrap();
        let pattern = SamplingPattern::interleaved(2, 32).unwrap();
        let y = corrupt(
            &truth,
            &maps,
            &pattern,
            &make_trajectory(2, degree).unwrap(),
        )
        .unwrap();
        let cfg = CgConfig {
            lambda,
            ..CgConfig::default()
        };
        let (_, report) = cg_sense(&y, &maps, &pattern, &cfg).unwrap();
        assert_eq!(report.residuals.len(), report.iterations + 1);
        assert!(report.iterations <= 2);
        for pair in report.residuals.windows(2) {
            assert!(
                pair[1] <= pair[0] + 1e-12,
                "seed {seed}: {:?}",
                report.residuals
            );
        }
    }
}

#[test]
fn undersampled_residual_reaches_tolerance() {
    // Plain CG does not minimize the residual norm, so only convergence is checked here.
    for (seed, sigma, lambda) in [(0, 0.3, 0.0), (1, 0.5, 1e-3), (2, 0.2, 0.0), (3, 1.0, 0.1)] {
        let maps = gen_gaussian_maps(4, 24, 24, sigma, seed).unwrap();
        let mask: Vec<bool> = (0..24).map(|l| l % 3 != 1).collect();
        let y = random_coil_kspace(seed + 10, 4, 24, 24);
        let cfg = CgConfig {
            max_iters: 200,
            tol: 1e-10,
            lambda,
        };
        let (_, report) = cg_sense_masked(&y, &maps, mask, &cfg).unwrap();
        assert_eq!(report.residuals[0], 1.0);
        assert!(
            *report.residuals.last().unwrap() <= cfg.tol,
            "seed {seed}: {:?}",
            report
        );
    }
}

#[test]
fn motion_lowers_reconstruction_psnr() {
    let truth = shepp_logan(64, 64).unwrap();
    let maps = gen_gaussian_maps(4, 64, 64, 0.5, 0).unwrap();
    let pattern = SamplingPattern::interleaved(2, 64).unwrap();
    let recon = |degree: f64| {
        let y = corrupt(
            &truth,
            &maps,
            &pattern,
            &make_trajectory(2, degree).unwrap(),
        )
        .unwrap();
        cg_sense(&y, &maps, &pattern, &CgConfig::default())
            .unwrap()
            .0
            .magnitude()
    };
    let still = psnr(&truth, &recon(0.0)).unwrap();
    let moved = psnr(&truth, &recon(10.0)).unwrap();
    assert!(still > 60.0, "{still}");
    assert!(moved < still);
    assert!(moved < 40.0, "{moved}");
}
