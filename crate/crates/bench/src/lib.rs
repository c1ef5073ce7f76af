//! Fixtures shared by the pipeline benchmarks.

use moco_core::{
    corrupt, gen_gaussian_maps, make_trajectory, shepp_logan_variant, CoilKSpace, ComplexImage,
    MotionTrajectory, RealImage, SamplingPattern, SensitivityMaps,
};

/// One acquisition setup: phantom, maps, sampling, trajectory and the
/// corrupted k-space they produce.
pub struct Fixture {
    pub image: RealImage,
    pub maps: SensitivityMaps,
    pub pattern: SamplingPattern,
    pub trajectory: MotionTrajectory,
    pub kspace: CoilKSpace,
}

impl Fixture {
    pub fn new(size: usize, coils: usize, shots: usize, degree: f64) -> Self {
        let image = shepp_logan_variant(size, size, 0).expect("valid phantom size");
        let maps = gen_gaussian_maps(coils, size, size, 0.5, 0).expect("valid map parameters");
        let pattern = SamplingPattern::interleaved(shots, size).expect("shots fit the grid");
        let trajectory = make_trajectory(shots, degree).expect("valid degree");
        let kspace = corrupt(&image, &maps, &pattern, &trajectory).expect("consistent inputs");
        Self {
            image,
            maps,
            pattern,
            trajectory,
            kspace,
        }
    }

    pub fn complex_image(&self) -> ComplexImage {
        self.image.to_complex()
    }
}
