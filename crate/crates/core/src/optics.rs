//! Black-box transmissivity and the bucket detector.
//!
//! The mask frame and the object together form a black box with
//! transmissivity `T = Σ_p A[p]·X[p] / n²`. The bucket detector reads
//! `B = I · (T − ΔT)`, floored at zero, where `ΔT` is a transmissivity
//! perturbation drawn from a [`NoiseModel`].

use alloc::vec::Vec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::grid::Grid;
use crate::mask::{MaskFrame, MaskSequence};
use crate::scene::Scene;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OpticsError {
    #[error("frame side {frame} does not match scene side {scene}")]
    DimensionMismatch { frame: usize, scene: usize },
    #[error("noise amplitude {0} outside [0, 0.5)")]
    InvalidAmplitude(f64),
}

/// Normalization constant mapping raw overlap sums to transmissivity.
pub fn normalization(n: usize) -> f64 {
    (n * n) as f64
}

/// Transmissivity of a frame (given as a 0/1 grid) over a scene.
pub fn transmissivity(frame: &Grid, scene: &Scene) -> Result<f64, OpticsError> {
    if frame.side() != scene.side() {
        return Err(OpticsError::DimensionMismatch {
            frame: frame.side(),
            scene: scene.side(),
        });
    }
    let overlap: f64 = frame
        .as_slice()
        .iter()
        .zip(scene.grid().as_slice())
        .filter(|(&a, _)| a != 0.0)
        .map(|(&a, &x)| a * x)
        .sum();
    Ok(overlap / normalization(scene.side()))
}

/// Transmissivity of a mask frame over a scene of the mask's side.
///
/// Sums in ascending pixel order, so the result is bit-identical to
/// [`transmissivity`] on the rendered frame.
pub fn frame_transmissivity(frame: &MaskFrame, scene: &Scene) -> f64 {
    let grid = scene.grid();
    let overlap: f64 = frame.lit_pixels().iter().map(|&p| grid[p as usize]).sum();
    overlap / normalization(scene.side())
}

/// `T_i` for every frame of the sequence.
pub fn measure_transmissivities(
    mask: &MaskSequence,
    scene: &Scene,
) -> Result<Vec<f64>, OpticsError> {
    if mask.side() != scene.side() {
        return Err(OpticsError::DimensionMismatch {
            frame: mask.side(),
            scene: scene.side(),
        });
    }
    Ok(mask
        .frames()
        .iter()
        .map(|f| frame_transmissivity(f, scene))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseKind {
    #[default]
    None,
    /// `ΔT = T · a · u` with `u` uniform on `[-1, 1]`.
    Uniform,
    /// `ΔT = T · a · z / 2` with `z` standard normal truncated to `|z| <= 2`.
    GaussianTruncated,
}

/// Transmissivity perturbation model; `amplitude` is a fraction of `T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub kind: NoiseKind,
    pub amplitude: f64,
    pub seed: u64,
}

impl NoiseModel {
    pub const NONE: NoiseModel = NoiseModel {
        kind: NoiseKind::None,
        amplitude: 0.0,
        seed: 0,
    };

    pub fn new(kind: NoiseKind, amplitude: f64, seed: u64) -> Result<Self, OpticsError> {
        let model = NoiseModel {
            kind,
            amplitude,
            seed,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<(), OpticsError> {
        if !(0.0..0.5).contains(&self.amplitude) {
            return Err(OpticsError::InvalidAmplitude(self.amplitude));
        }
        Ok(())
    }

    pub fn is_none(&self) -> bool {
        self.kind == NoiseKind::None || self.amplitude == 0.0
    }

    /// Independent draw stream `stream_id` under this model's seed.
    ///
    /// Streams are ChaCha8 streams keyed by `(seed, stream_id)`, so any
    /// stream can be regenerated without replaying the others.
    pub fn stream(&self, stream_id: u64) -> NoiseStream {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream_id);
        NoiseStream { model: *self, rng }
    }
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel::NONE
    }
}

/// Stateful draw sequence for one [`NoiseModel`] stream.
#[derive(Debug, Clone)]
pub struct NoiseStream {
    model: NoiseModel,
    rng: ChaCha8Rng,
}

impl NoiseStream {
    /// Draws `ΔT` for transmissivity `t`.
    pub fn draw(&mut self, t: f64) -> f64 {
        let scale = t * self.model.amplitude;
        match self.model.kind {
            NoiseKind::None => 0.0,
            NoiseKind::Uniform => scale * self.rng.random_range(-1.0..=1.0),
            NoiseKind::GaussianTruncated => loop {
                let z: f64 = self.rng.sample(StandardNormal);
                if z.abs() <= 2.0 {
                    break scale * z / 2.0;
                }
            },
        }
    }
}

/// One bucket detector reading.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BucketSample {
    pub transmissivity: f64,
    pub noise: f64,
    pub intensity: f64,
    pub bucket: f64,
}

/// `B = max(0, I · (T − ΔT))` with `ΔT` drawn from `noise`.
pub fn bucket_signal(intensity: f64, transmissivity: f64, noise: &mut NoiseStream) -> BucketSample {
    let delta = noise.draw(transmissivity);
    bucket_with_noise(intensity, transmissivity, delta)
}

/// Bucket reading for an explicit perturbation `delta`.
pub fn bucket_with_noise(intensity: f64, transmissivity: f64, delta: f64) -> BucketSample {
    BucketSample {
        transmissivity,
        noise: delta,
        intensity,
        bucket: (intensity * (transmissivity - delta)).max(0.0),
    }
}
