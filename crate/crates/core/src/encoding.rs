//! Multishot SENSE encoding: rigid motion per shot, coil weighting, centered
//! FFT and per-shot row sampling, together with the adjoint.

use crate::coils::SensitivityMaps;
use crate::error::{Error, Result};
use crate::fourier::Fft2;
use crate::tensor::{Complex64, ComplexImage, Tensor, TensorData};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Assignment of k-space rows (phase-encode lines) to shots.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SamplingPattern {
    num_shots: usize,
    shot_of_line: Vec<usize>,
}

impl SamplingPattern {
    /// Row `l` is acquired by shot `l mod S`.
    pub fn interleaved(num_shots: usize, height: usize) -> Result<Self> {
        if num_shots == 0 || num_shots > height {
            return Err(Error::invalid(format!(
                "shot count must be in 1..={height}, got {num_shots}"
            )));
        }
        Ok(Self {
            num_shots,
            shot_of_line: (0..height).map(|l| l % num_shots).collect(),
        })
    }

    pub fn num_shots(&self) -> usize {
        self.num_shots
    }

    pub fn height(&self) -> usize {
        self.shot_of_line.len()
    }

    pub fn shot_of_line(&self, row: usize) -> usize {
        self.shot_of_line[row]
    }

    pub fn rows_of(&self, shot: usize) -> impl Iterator<Item = usize> + '_ {
        self.shot_of_line
            .iter()
            .enumerate()
            .filter(move |(_, &s)| s == shot)
            .map(|(l, _)| l)
    }

    pub fn row_mask(&self, shot: usize) -> Vec<bool> {
        self.shot_of_line.iter().map(|&s| s == shot).collect()
    }
}

/// Rigid pose of the object during one shot.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MotionState {
    pub rotation_deg: f64,
    /// Shift along columns, pixels.
    pub shift_x: f64,
    /// Shift along rows, pixels.
    pub shift_y: f64,
}

impl MotionState {
    pub fn rotation(rotation_deg: f64) -> Self {
        Self {
            rotation_deg,
            ..Self::default()
        }
    }

    pub fn is_identity(&self) -> bool {
        self.rotation_deg == 0.0 && self.shift_x == 0.0 && self.shift_y == 0.0
    }
}

/// One rigid motion state per shot.
#[derive(Clone, Debug, PartialEq)]
pub struct MotionTrajectory {
    states: Vec<MotionState>,
}

impl MotionTrajectory {
    pub fn new(states: Vec<MotionState>) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::invalid("trajectory needs at least one shot"));
        }
        for (s, st) in states.iter().enumerate() {
            if !(st.rotation_deg.is_finite() && st.shift_x.is_finite() && st.shift_y.is_finite()) {
                return Err(Error::invalid(format!("shot {s}: non-finite motion state")));
            }
            if st.rotation_deg.abs() >= 90.0 {
                return Err(Error::invalid(format!(
                    "shot {s}: rotation {} must be below 90 degrees in magnitude",
                    st.rotation_deg
                )));
            }
        }
        Ok(Self { states })
    }

    pub fn zero(num_shots: usize) -> Self {
        Self {
            states: vec![MotionState::default(); num_shots.max(1)],
        }
    }

    pub fn num_shots(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[MotionState] {
        &self.states
    }

    pub fn is_static(&self) -> bool {
        self.states.iter().all(MotionState::is_identity)
    }
}

/// Per-shot, per-coil k-space, `S x C x H x W`. Entries off a shot's rows are zero.
#[derive(Clone, Debug, PartialEq)]
pub struct MultishotKSpace {
    shots: usize,
    coils: usize,
    height: usize,
    width: usize,
    data: Vec<Complex64>,
}

impl MultishotKSpace {
    pub fn zeros(shots: usize, coils: usize, height: usize, width: usize) -> Self {
        Self {
            shots,
            coils,
            height,
            width,
            data: vec![ZERO; shots * coils * height * width],
        }
    }

    pub fn new(
        shots: usize,
        coils: usize,
        height: usize,
        width: usize,
        data: Vec<Complex64>,
    ) -> Result<Self> {
        if data.len() != shots * coils * height * width {
            return Err(Error::mismatch(format!(
                "{shots}x{coils}x{height}x{width} k-space needs {} values, got {}",
                shots * coils * height * width,
                data.len()
            )));
        }
        Ok(Self {
            shots,
            coils,
            height,
            width,
            data,
        })
    }

    pub fn dims(&self) -> (usize, usize, usize, usize) {
        (self.shots, self.coils, self.height, self.width)
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    fn offset(&self, shot: usize, coil: usize) -> usize {
        (shot * self.coils + coil) * self.height * self.width
    }

    pub fn slice(&self, shot: usize, coil: usize) -> &[Complex64] {
        let o = self.offset(shot, coil);
        &self.data[o..o + self.height * self.width]
    }

    pub fn slice_mut(&mut self, shot: usize, coil: usize) -> &mut [Complex64] {
        let o = self.offset(shot, coil);
        let n = self.height * self.width;
        &mut self.data[o..o + n]
    }

    /// Sums over the shot axis.
    pub fn combine(&self) -> CoilKSpace {
        let n = self.height * self.width;
        let mut out = CoilKSpace::zeros(self.coils, self.height, self.width);
        for s in 0..self.shots {
            for c in 0..self.coils {
                let src = self.slice(s, c);
                let dst = &mut out.data[c * n..(c + 1) * n];
                dst.iter_mut().zip(src).for_each(|(d, v)| *d += v);
            }
        }
        out
    }

    /// Checks that nothing was recorded outside each shot's rows.
    pub fn respects(&self, pattern: &SamplingPattern) -> bool {
        pattern.height() == self.height
            && pattern.num_shots() == self.shots
            && (0..self.shots).all(|s| {
                (0..self.coils).all(|c| {
                    self.slice(s, c)
                        .chunks_exact(self.width)
                        .enumerate()
                        .all(|(row, line)| {
                            pattern.shot_of_line(row) == s || line.iter().all(|z| *z == ZERO)
                        })
                })
            })
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor::new(
            vec![self.shots, self.coils, self.height, self.width],
            TensorData::Complex128(self.data.clone()),
        )
        .expect("consistent dims")
    }

    pub fn from_tensor(tensor: Tensor) -> Result<Self> {
        let (dims, data) = tensor.into_parts();
        let [s, c, h, w] = dims[..] else {
            return Err(Error::mismatch(format!(
                "multishot k-space must be rank 4, got dims {dims:?}"
            )));
        };
        let TensorData::Complex128(data) = data else {
            return Err(Error::invalid("k-space must be complex"));
        };
        Self::new(s, c, h, w, data)
    }
}

/// Shot-combined k-space, `C x H x W`.
#[derive(Clone, Debug, PartialEq)]
pub struct CoilKSpace {
    coils: usize,
    height: usize,
    width: usize,
    data: Vec<Complex64>,
}

impl CoilKSpace {
    pub fn zeros(coils: usize, height: usize, width: usize) -> Self {
        Self {
            coils,
            height,
            width,
            data: vec![ZERO; coils * height * width],
        }
    }

    pub fn new(coils: usize, height: usize, width: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != coils * height * width {
            return Err(Error::mismatch(format!(
                "{coils}x{height}x{width} k-space needs {} values, got {}",
                coils * height * width,
                data.len()
            )));
        }
        Ok(Self {
            coils,
            height,
            width,
            data,
        })
    }

    pub fn num_coils(&self) -> usize {
        self.coils
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.coils, self.height, self.width)
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn coil(&self, c: usize) -> &[Complex64] {
        let n = self.height * self.width;
        &self.data[c * n..(c + 1) * n]
    }

    pub fn coil_mut(&mut self, c: usize) -> &mut [Complex64] {
        let n = self.height * self.width;
        &mut self.data[c * n..(c + 1) * n]
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor::new(
            vec![self.coils, self.height, self.width],
            TensorData::Complex128(self.data.clone()),
        )
        .expect("consistent dims")
    }

    pub fn from_tensor(tensor: Tensor) -> Result<Self> {
        let (dims, data) = tensor.into_parts();
        let [c, h, w] = dims[..] else {
            return Err(Error::mismatch(format!(
                "coil k-space must be rank 3, got dims {dims:?}"
            )));
        };
        let TensorData::Complex128(data) = data else {
            return Err(Error::invalid("k-space must be complex"));
        };
        Self::new(c, h, w, data)
    }
}

fn snap(p: f64) -> f64 {
    let r = p.round();
    if (p - r).abs() < 1e-9 {
        r
    } else {
        p
    }
}

fn bilinear(x: &ComplexImage, row: f64, col: f64) -> Complex64 {
    let (h, w) = (x.height() as isize, x.width() as isize);
    let (row, col) = (snap(row), snap(col));
    let (r0, c0) = (row.floor(), col.floor());
    let (fr, fc) = (row - r0, col - c0);
    let (r0, c0) = (r0 as isize, c0 as isize);
    let fetch = |r: isize, c: isize| {
        if r < 0 || c < 0 || r >= h || c >= w {
            ZERO
        } else {
            x.data()[(r * w + c) as usize]
        }
    };
    let mut acc = ZERO;
    for (dr, wr) in [(0, 1.0 - fr), (1, fr)] {
        if wr == 0.0 {
            continue;
        }
        for (dc, wc) in [(0, 1.0 - fc), (1, fc)] {
            if wc == 0.0 {
                continue;
            }
            acc += fetch(r0 + dr, c0 + dc) * (wr * wc);
        }
    }
    acc
}

/// Rotates `x` by `theta_deg` about pixel `(H / 2, W / 2)`, then shifts it by
/// `(shift_x, shift_y)` pixels, resampling bilinearly. Samples that fall
/// outside the grid read as zero.
///
/// A positive angle maps pixel `(i, j)` towards `(j, H - 1 - i)` on odd square
/// grids at 90 degrees.
pub fn rotate_image(x: &ComplexImage, theta_deg: f64, shift: (f64, f64)) -> ComplexImage {
    let (shift_x, shift_y) = shift;
    if theta_deg == 0.0 && shift_x == 0.0 && shift_y == 0.0 {
        return x.clone();
    }
    let (h, w) = x.dims();
    let (cy, cx) = ((h / 2) as f64, (w / 2) as f64);
    let (s, c) = theta_deg.to_radians().sin_cos();
    ComplexImage::from_fn(h, w, |i, j| {
        let qr = i as f64 - cy - shift_y;
        let qc = j as f64 - cx - shift_x;
        bilinear(x, c * qr - s * qc + cy, s * qr + c * qc + cx)
    })
}

/// Applies the motion state of one shot to the object.
pub fn apply_motion(x: &ComplexImage, state: &MotionState) -> ComplexImage {
    rotate_image(x, state.rotation_deg, (state.shift_x, state.shift_y))
}

/// Inverse rigid transform of `apply_motion`: undo the shift, then the rotation.
pub fn undo_motion(x: &ComplexImage, state: &MotionState) -> ComplexImage {
    if state.is_identity() {
        return x.clone();
    }
    let shifted = rotate_image(x, 0.0, (-state.shift_x, -state.shift_y));
    rotate_image(&shifted, -state.rotation_deg, (0.0, 0.0))
}

/// The encoding operator for one set of maps, sampling pattern and trajectory.
#[derive(Clone, Debug)]
pub struct Encoder<'a> {
    maps: &'a SensitivityMaps,
    pattern: &'a SamplingPattern,
    trajectory: &'a MotionTrajectory,
    fft: Fft2,
}

impl<'a> Encoder<'a> {
    pub fn new(
        maps: &'a SensitivityMaps,
        pattern: &'a SamplingPattern,
        trajectory: &'a MotionTrajectory,
    ) -> Result<Self> {
        if pattern.height() != maps.height() {
            return Err(Error::mismatch(format!(
                "pattern covers {} rows but maps have {}",
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
        Ok(Self {
            maps,
            pattern,
            trajectory,
            fft: Fft2::new(maps.height(), maps.width()),
        })
    }

    fn check_image(&self, x: &ComplexImage) -> Result<()> {
        if x.dims() != self.maps.dims() {
            return Err(Error::mismatch(format!(
                "image is {:?} but coil maps are {:?}",
                x.dims(),
                self.maps.dims()
            )));
        }
        Ok(())
    }

    /// Shot `s`, coil `c`: `M_s . fft2c(C_c . move_s(x))`.
    pub fn forward(&self, x: &ComplexImage) -> Result<MultishotKSpace> {
        self.check_image(x)?;
        let (h, w) = x.dims();
        let (shots, coils) = (self.pattern.num_shots(), self.maps.num_coils());
        let mut out = MultishotKSpace::zeros(shots, coils, h, w);
        for (s, state) in self.trajectory.states().iter().enumerate() {
            let moved = apply_motion(x, state);
            let mask = self.pattern.row_mask(s);
            for c in 0..coils {
                let dst = out.slice_mut(s, c);
                dst.iter_mut()
                    .zip(moved.data().iter().zip(self.maps.coil(c)))
                    .for_each(|(d, (v, m))| *d = v * m);
                self.fft.forward_in_place(dst);
                for (row, line) in dst.chunks_exact_mut(w).enumerate() {
                    if !mask[row] {
                        line.fill(ZERO);
                    }
                }
            }
        }
        Ok(out)
    }

    /// `sum_s undo_s(sum_c conj(C_c) . ifft2c(M_s . y_{s,c}))`, coils inner and
    /// shots outer. Exact adjoint of `forward` for a static trajectory.
    pub fn adjoint(&self, y: &MultishotKSpace) -> Result<ComplexImage> {
        let (shots, coils, h, w) = y.dims();
        if shots != self.pattern.num_shots()
            || coils != self.maps.num_coils()
            || (h, w) != self.maps.dims()
        {
            return Err(Error::mismatch(format!(
                "k-space is {shots}x{coils}x{h}x{w}, operator expects {}x{}x{}x{}",
                self.pattern.num_shots(),
                self.maps.num_coils(),
                self.maps.height(),
                self.maps.width()
            )));
        }
        let mut out = ComplexImage::zeros(h, w);
        let mut buf = vec![ZERO; h * w];
        for (s, state) in self.trajectory.states().iter().enumerate() {
            let mask = self.pattern.row_mask(s);
            let mut per_shot = ComplexImage::zeros(h, w);
            for c in 0..coils {
                buf.copy_from_slice(y.slice(s, c));
                for (row, line) in buf.chunks_exact_mut(w).enumerate() {
                    if !mask[row] {
                        line.fill(ZERO);
                    }
                }
                self.fft.inverse_in_place(&mut buf);
                per_shot
                    .data_mut()
                    .iter_mut()
                    .zip(buf.iter().zip(self.maps.coil(c)))
                    .for_each(|(acc, (v, m))| *acc += m.conj() * v);
            }
            let restored = undo_motion(&per_shot, state);
            out.data_mut()
                .iter_mut()
                .zip(restored.data())
                .for_each(|(acc, v)| *acc += v);
        }
        Ok(out)
    }
}

pub fn forward(
    x: &ComplexImage,
    maps: &SensitivityMaps,
    pattern: &SamplingPattern,
    trajectory: &MotionTrajectory,
) -> Result<MultishotKSpace> {
    Encoder::new(maps, pattern, trajectory)?.forward(x)
}

pub fn adjoint(
    y: &MultishotKSpace,
    maps: &SensitivityMaps,
    pattern: &SamplingPattern,
    trajectory: &MotionTrajectory,
) -> Result<ComplexImage> {
    Encoder::new(maps, pattern, trajectory)?.adjoint(y)
}
