//! Multishot MRI motion simulation and CG SENSE reconstruction.
//!
//! The pipeline runs a motion-free image through per-shot rigid motion,
//! coil sensitivity weighting and interleaved Cartesian sampling, reconstructs
//! the combined k-space with conjugate gradients under a static-object model,
//! and scores the result with PSNR and SSIM. [`dataset`] packages the output as
//! paired tensors for training a correction network.

pub mod cgsense;
pub mod coils;
pub mod dataset;
pub mod encoding;
pub mod error;
pub mod fourier;
pub mod metrics;
pub mod motion;
pub mod phantom;
pub mod tensor;

pub use cgsense::{cg_sense, cg_sense_masked, CgConfig, CgReport};
pub use coils::{gen_gaussian_maps, SensitivityMaps};
pub use dataset::{
    generate_pairs, DatasetConfig, DatasetManifest, ManifestRecord, SourceImage, Split,
};
pub use encoding::{
    adjoint, forward, rotate_image, CoilKSpace, Encoder, MotionState, MotionTrajectory,
    MultishotKSpace, SamplingPattern,
};
pub use error::{Error, Result};
pub use fourier::{fft2c, ifft2c, rotate_kspace, Fft2};
pub use metrics::{psnr, ssim, MetricReport};
pub use motion::{corrupt, make_trajectory};
pub use phantom::{shepp_logan, shepp_logan_variant};
pub use tensor::{
    export_png, ingest_png, load_tensor, save_tensor, Complex64, ComplexImage, RealImage, Tensor,
    TensorData,
};
