//! Motion corruption of a static image into combined multishot k-space.
//!
//! Each shot sees the object in its own rigid pose; only that shot's rows are
//! kept, and the segments are summed into one coil k-space.

use crate::coils::SensitivityMaps;
use crate::encoding::{apply_motion, CoilKSpace, MotionState, MotionTrajectory, SamplingPattern};
use crate::error::{Error, Result};
use crate::fourier::Fft2;
use crate::tensor::{Complex64, RealImage};

/// Shot 0 is the reference pose; every later shot is rotated by `degree`.
pub fn make_trajectory(num_shots: usize, degree: f64) -> Result<MotionTrajectory> {
    if num_shots == 0 {
        return Err(Error::invalid("trajectory needs at least one shot"));
    }
    let states = (0..num_shots)
        .map(|s| MotionState::rotation(if s == 0 { 0.0 } else { degree }))
        .collect();
    MotionTrajectory::new(states)
}

/// Simulates the corrupted acquisition of `x`:
/// `y_c = sum_s M_s . fft2c(C_c . move_s(x))`.
pub fn corrupt(
    x: &RealImage,
    maps: &SensitivityMaps,
    pattern: &SamplingPattern,
    trajectory: &MotionTrajectory,
) -> Result<CoilKSpace> {
    if x.dims() != maps.dims() {
        return Err(Error::mismatch(format!(
            "image is {:?} but coil maps are {:?}",
            x.dims(),
            maps.dims()
        )));
    }
    if pattern.height() != maps.height() {
        return Err(Error::mismatch(format!(
            "pattern covers {} rows but image has {}",
            pattern.height(),
            maps.height()
        )));
    }
    if trajectory.num_shots() != pattern.num_shots() {
        return Err(Error::mismatch(format!(
            "trajectory has {} shots but pattern has {}",
            trajectory.num_shots(),
            pattern.num_shots()
        )));
    }
    let (h, w) = x.dims();
    let fft = Fft2::new(h, w);
    let object = x.to_complex();
    let mut out = CoilKSpace::zeros(maps.num_coils(), h, w);
    let mut buf = vec![Complex64::new(0.0, 0.0); h * w];
    for (s, state) in trajectory.states().iter().enumerate() {
        // Phase 1: the object in this shot's pose, seen through every coil.
        let moved = apply_motion(&object, state);
        for c in 0..maps.num_coils() {
            buf.iter_mut()
                .zip(moved.data().iter().zip(maps.coil(c)))
                .for_each(|(b, (v, m))| *b = v * m);
            fft.forward_in_place(&mut buf);
            // Phases 2 and 3: keep this shot's rows and merge them.
            let dst = out.coil_mut(c);
            for row in pattern.rows_of(s) {
                let line = row * w..(row + 1) * w;
                dst[line.clone()]
                    .iter_mut()
                    .zip(&buf[line])
                    .for_each(|(d, v)| *d += v);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coils::gen_gaussian_maps;
    use crate::encoding::forward;
    use crate::fourier::fft2c;
    use crate::phantom::shepp_logan;
    use crate::tensor::ComplexImage;

    #[test]
    fn trajectory_convention() {
        let t = make_trajectory(2, 10.0).unwrap();
        let angles: Vec<f64> = t.states().iter().map(|s| s.rotation_deg).collect();
        assert_eq!(angles, vec![0.0, 10.0]);
        let t = make_trajectory(4, 5.0).unwrap();
        let angles: Vec<f64> = t.states().iter().map(|s| s.rotation_deg).collect();
        assert_eq!(angles, vec![0.0, 5.0, 5.0, 5.0]);
        assert!(make_trajectory(3, 0.0).unwrap().is_static());
        assert!(make_trajectory(2, 95.0).is_err());
        assert!(make_trajectory(0, 5.0).is_err());
    }

    #[test]
    fn static_corruption_is_clean_kspace() {
        let x = shepp_logan(32, 32).unwrap();
        let maps = gen_gaussian_maps(3, 32, 32, 0.5, 9).unwrap();
        let pattern = SamplingPattern::interleaved(2, 32).unwrap();
        let y = corrupt(&x, &maps, &pattern, &make_trajectory(2, 0.0).unwrap()).unwrap();
        for c in 0..3 {
            let weighted =
                ComplexImage::from_fn(32, 32, |i, j| maps.coil(c)[i * 32 + j] * x.get(i, j));
            let clean = fft2c(&weighted);
            for (a, b) in y.coil(c).iter().zip(clean.data()) {
                assert!((a - b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn equals_shot_sum_of_forward() {
        let x = shepp_logan(24, 24).unwrap();
        let maps = gen_gaussian_maps(2, 24, 24, 0.5, 1).unwrap();
        let pattern = SamplingPattern::interleaved(3, 24).unwrap();
        let traj = make_trajectory(3, 8.0).unwrap();
        let y = corrupt(&x, &maps, &pattern, &traj).unwrap();
        let multi = forward(&x.to_complex(), &maps, &pattern, &traj).unwrap();
        assert_eq!(y, multi.combine());
    }

    #[test]
    fn reference_shot_rows_untouched() {
        let x = shepp_logan(32, 32).unwrap();
        let maps = gen_gaussian_maps(2, 32, 32, 0.5, 4).unwrap();
        let pattern = SamplingPattern::interleaved(2, 32).unwrap();
        let clean = corrupt(&x, &maps, &pattern, &make_trajectory(2, 0.0).unwrap()).unwrap();
        let moved = corrupt(&x, &maps, &pattern, &make_trajectory(2, 10.0).unwrap()).unwrap();
        for c in 0..2 {
            for row in 0..32 {
                let a = &clean.coil(c)[row * 32..(row + 1) * 32];
                let b = &moved.coil(c)[row * 32..(row + 1) * 32];
                if row % 2 == 0 {
                    assert_eq!(a, b, "shot-0 row {row}");
                } else {
                    assert_ne!(a, b, "shot-1 row {row}");
                }
            }
        }
    }

    #[test]
    fn mismatched_inputs_rejected() {
        let x = shepp_logan(16, 16).unwrap();
        let maps = gen_gaussian_maps(2, 16, 16, 0.5, 0).unwrap();
        let p = SamplingPattern::interleaved(2, 16).unwrap();
        assert!(corrupt(&x, &maps, &p, &make_trajectory(3, 5.0).unwrap()).is_err());
        let small = gen_gaussian_maps(2, 8, 8, 0.5, 0).unwrap();
        assert!(corrupt(&x, &small, &p, &make_trajectory(2, 5.0).unwrap()).is_err());
    }
}
