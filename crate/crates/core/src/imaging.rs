//! Image formation and analysis.
//!
//! The naked-eye image is the persistence integral `Ĝ = Σ A_i · I_i` of the
//! displayed patterns. Reference reconstructions computed directly from the
//! transmissivities (correlation baseline and the closed-form feedback
//! images) sit next to it, together with exact segment recovery, the
//! first-order noise analysis and the metrics used to compare them.

use alloc::vec;
use alloc::vec::Vec;
use thiserror::Error;

use crate::feedback::Clamp;
use crate::grid::Grid;
use crate::mask::{MaskFrame, MaskSequence, SMatrix};
use crate::optics::{measure_transmissivities, OpticsError};
use crate::scene::Scene;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ImagingError {
    #[error("expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("image side {got} does not match expected side {expected}")]
    SideMismatch { expected: usize, got: usize },
    #[error("frame {index} is opaque (T = 0) and no clamp substitution is configured")]
    OpaqueFrame { index: usize },
    #[error("bucket value {value} at segment position {index} is not on the integer lattice")]
    OffLattice { index: usize, value: f64 },
    #[error("noise perturbation {delta} at frame {index} exceeds 0.2 T (T = {transmissivity})")]
    NoiseOutOfRange {
        index: usize,
        delta: f64,
        transmissivity: f64,
    },
    #[error("region is empty")]
    EmptyRegion,
    #[error("exposure window holds no frames")]
    EmptyWindow,
    #[error("stride must be at least one frame")]
    ZeroStride,
    #[error(transparent)]
    Optics(#[from] OpticsError),
}

/// A mask frame displayed at a given source intensity (`P_i = A_i · I_i`).
#[derive(Debug, Clone, Copy)]
pub struct DisplayedPattern<'a> {
    pub frame: &'a MaskFrame,
    pub intensity: f64,
}

/// Unwindowed sum of displayed patterns, in stream order.
pub fn accumulate<'a>(n: usize, patterns: impl IntoIterator<Item = DisplayedPattern<'a>>) -> Grid {
    let mut acc = Grid::zeros(n);
    for p in patterns {
        for &pixel in p.frame.lit_pixels() {
            acc[pixel as usize] += p.intensity;
        }
    }
    acc
}

/// Frames inside a persistence window, `floor(τ · rate)`.
///
/// A relative slack of 1e-9 keeps products such as `0.29 · 100` from
/// rounding down a whole frame.
pub fn window_frames(window_seconds: f64, frame_rate: f64) -> usize {
    let x = window_seconds * frame_rate;
    if !(x.is_finite() && x > 0.0) {
        return 0;
    }
    libm::floor(x * (1.0 + 1e-9)) as usize
}

/// Persistence-window accumulation of displayed patterns.
#[derive(Debug, Clone, PartialEq)]
pub struct ExposureImage {
    pub accumulator: Grid,
    pub frames_integrated: usize,
    pub window_seconds: f64,
    pub frame_rate: f64,
    /// The stream ran out before the window was full.
    pub partial: bool,
}

/// Integrates the first `floor(τ · rate)` patterns of the stream.
pub fn integrate_exposure<'a>(
    n: usize,
    stream: impl IntoIterator<Item = DisplayedPattern<'a>>,
    window_seconds: f64,
    frame_rate: f64,
) -> Result<ExposureImage, ImagingError> {
    let window = window_frames(window_seconds, frame_rate);
    if window == 0 {
        return Err(ImagingError::EmptyWindow);
    }
    let mut count = 0usize;
    let accumulator = accumulate(n, stream.into_iter().take(window).inspect(|_| count += 1));
    Ok(ExposureImage {
        accumulator,
        frames_integrated: count,
        window_seconds,
        frame_rate,
        partial: count < window,
    })
}

/// Overlapping persistence windows advancing by `stride` frames.
///
/// Only full windows are returned; a stream shorter than one window yields a
/// single partial exposure.
pub fn sliding_persistence(
    n: usize,
    stream: &[DisplayedPattern<'_>],
    window_seconds: f64,
    frame_rate: f64,
    stride: usize,
) -> Result<Vec<ExposureImage>, ImagingError> {
    if stride == 0 {
        return Err(ImagingError::ZeroStride);
    }
    let window = window_frames(window_seconds, frame_rate);
    if window == 0 {
        return Err(ImagingError::EmptyWindow);
    }
    if stream.len() < window {
        return Ok(vec![integrate_exposure(
            n,
            stream.iter().copied(),
            window_seconds,
            frame_rate,
        )?]);
    }
    (0..=stream.len() - window)
        .step_by(stride)
        .map(|start| {
            integrate_exposure(
                n,
                stream[start..start + window].iter().copied(),
                window_seconds,
                frame_rate,
            )
        })
        .collect()
}

/// `Aᵀ w`: every frame's lit pixels receive that frame's weight.
pub fn back_project(mask: &MaskSequence, weights: &[f64]) -> Result<Grid, ImagingError> {
    if weights.len() != mask.len() {
        return Err(ImagingError::LengthMismatch {
            expected: mask.len(),
            got: weights.len(),
        });
    }
    Ok(accumulate(
        mask.side(),
        mask.frames()
            .iter()
            .zip(weights)
            .map(|(frame, &intensity)| DisplayedPattern { frame, intensity }),
    ))
}

/// Correlation baseline at constant source intensity, `G = Aᵀ T`.
pub fn traditional_g2(mask: &MaskSequence, transmissivities: &[f64]) -> Result<Grid, ImagingError> {
    back_project(mask, transmissivities)
}

/// Steady-state law used by the closed-form reconstruction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FeedbackLaw {
    /// `I = b / T`; opaque frames take `clamp.max` when a clamp is given.
    Digital {
        reference: f64,
        clamp: Option<Clamp>,
    },
    /// `I = U / (1 + T)`.
    Analog {
        source_level: f64,
        clamp: Option<Clamp>,
    },
}

impl FeedbackLaw {
    fn intensity(&self, index: usize, t: f64) -> Result<f64, ImagingError> {
        match *self {
            FeedbackLaw::Digital { reference, clamp } => match (t > 0.0, clamp) {
                (true, Some(c)) => Ok(c.apply(reference / t)),
                (true, None) => Ok(reference / t),
                (false, Some(c)) => Ok(c.max),
                (false, None) => Err(ImagingError::OpaqueFrame { index }),
            },
            FeedbackLaw::Analog {
                source_level,
                clamp,
            } => {
                let i = source_level / (1.0 + t);
                Ok(clamp.map_or(i, |c| c.apply(i)))
            }
        }
    }
}

/// Per-frame steady-state intensities computed from the exact `T_i`.
pub fn closed_form_intensities(
    mask: &MaskSequence,
    scene: &Scene,
    law: FeedbackLaw,
) -> Result<Vec<f64>, ImagingError> {
    measure_transmissivities(mask, scene)?
        .iter()
        .enumerate()
        .map(|(index, &t)| law.intensity(index, t))
        .collect()
}

/// Analytic feedback image `Aᵀ I(T)` with no loop simulation.
pub fn closed_form_feedback_g2(
    mask: &MaskSequence,
    scene: &Scene,
    law: FeedbackLaw,
) -> Result<Grid, ImagingError> {
    let intensities = closed_form_intensities(mask, scene, law)?;
    back_project(mask, &intensities)
}

/// Exact inversion of one row-segment: solves `S x = normalization · T`.
///
/// `normalization` must map the noise-free transmissivities onto integers
/// (`n²` for binary scenes, `255 n²` for 8-bit scenes, which then recovers
/// `255 x`); values off that lattice by more than 1e-6 are rejected.
pub fn segment_recover_exact(
    s: &SMatrix,
    t_segment: &[f64],
    normalization: f64,
) -> Result<Vec<f64>, ImagingError> {
    if t_segment.len() != s.order() {
        return Err(ImagingError::LengthMismatch {
            expected: s.order(),
            got: t_segment.len(),
        });
    }
    let mut counts = Vec::with_capacity(t_segment.len());
    for (index, &t) in t_segment.iter().enumerate() {
        let value = t * normalization;
        let nearest = libm::round(value);
        let on_lattice = (value - nearest).abs() <= 1e-6 * nearest.abs().max(1.0);
        if !on_lattice {
            return Err(ImagingError::OffLattice { index, value });
        }
        counts.push(nearest as i64);
    }
    Ok(s.solve(&counts)
        .iter()
        .map(|r| *r.numer() as f64 / *r.denom() as f64)
        .collect())
}

/// Result of [`noise_sensitivity`].
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSensitivity {
    pub clean: Grid,
    /// `Aᵀ (b / (T − ΔT))`.
    pub exact: Grid,
    /// `Aᵀ (b/T · (1 + ΔT/T))`.
    pub first_order: Grid,
    /// `‖exact − first_order‖ / ‖exact − clean‖`, 0 when noise-free.
    pub residual_norm: f64,
}

impl NoiseSensitivity {
    /// First-order error image `first_order − clean`.
    pub fn first_order_error(&self) -> Grid {
        self.first_order.sub(&self.clean)
    }

    /// Full noise error image `exact − clean`.
    pub fn exact_error(&self) -> Grid {
        self.exact.sub(&self.clean)
    }
}

/// Compares the exact noisy digital image against its first-order expansion.
///
/// Opaque frames (`T = 0`, which requires `ΔT = 0`) contribute
/// `saturation` to all three images.
pub fn noise_sensitivity(
    mask: &MaskSequence,
    scene: &Scene,
    reference: f64,
    saturation: f64,
    deltas: &[f64],
) -> Result<NoiseSensitivity, ImagingError> {
    let ts = measure_transmissivities(mask, scene)?;
    if deltas.len() != ts.len() {
        return Err(ImagingError::LengthMismatch {
            expected: ts.len(),
            got: deltas.len(),
        });
    }
    let mut clean = Vec::with_capacity(ts.len());
    let mut exact = Vec::with_capacity(ts.len());
    let mut first = Vec::with_capacity(ts.len());
    for (index, (&t, &d)) in ts.iter().zip(deltas).enumerate() {
        let in_range = d.abs() <= 0.2 * t;
        if !in_range {
            return Err(ImagingError::NoiseOutOfRange {
                index,
                delta: d,
                transmissivity: t,
            });
        }
        if t == 0.0 {
            clean.push(saturation);
            exact.push(saturation);
            first.push(saturation);
            continue;
        }
        let base = reference / t;
        clean.push(base);
        exact.push(reference / (t - d));
        first.push(base * (1.0 + d / t));
    }
    let clean = back_project(mask, &clean)?;
    let exact = back_project(mask, &exact)?;
    let first_order = back_project(mask, &first)?;
    let denom = exact.l2_distance(&clean);
    let residual_norm = if denom == 0.0 {
        0.0
    } else {
        exact.l2_distance(&first_order) / denom
    };
    Ok(NoiseSensitivity {
        clean,
        exact,
        first_order,
        residual_norm,
    })
}

/// `(max − min) / (max + min)` over the region's flat pixel indices.
pub fn visibility(image: &Grid, region: &[usize]) -> Result<f64, ImagingError> {
    if region.is_empty() {
        return Err(ImagingError::EmptyRegion);
    }
    let (lo, hi) = region
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &p| {
            (lo.min(image[p]), hi.max(image[p]))
        });
    if hi + lo == 0.0 {
        return Ok(0.0);
    }
    Ok((hi - lo) / (hi + lo))
}

/// Visibility of every row-segment, in mask segment order.
pub fn segment_visibilities(image: &Grid, mask: &MaskSequence) -> Vec<f64> {
    mask.segments()
        .map(|(block, row)| visibility(image, &mask.segment_pixels(block, row)).unwrap_or(0.0))
        .collect()
}

/// Pearson correlation; `None` if either input is constant or lengths differ.
pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() != b.len() || a.is_empty() {
        return None;
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return None;
    }
    Some((sab / libm::sqrt(saa * sbb)).clamp(-1.0, 1.0))
}

fn ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // ties share the mean rank
        let mean = (start + end - 1) as f64 / 2.0;
        for &idx in &order[start..end] {
            ranks[idx] = mean;
        }
        start = end;
    }
    ranks
}

/// Spearman rank correlation (Pearson on tie-averaged ranks).
pub fn spearman(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() != b.len() {
        return None;
    }
    pearson(&ranks(a), &ranks(b))
}

/// Mean squared difference; panics on a side mismatch.
pub fn mse(a: &Grid, b: &Grid) -> f64 {
    let d = a.l2_distance(b);
    d * d / a.as_slice().len().max(1) as f64
}

/// Result of [`negative_image_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct NegativeImageCheck {
    /// Pearson correlation of image and scene (0 when degenerate).
    pub pearson: f64,
    /// Image or scene was constant, so no correlation exists.
    pub degenerate: bool,
    /// Every mixed segment has object mean strictly below background mean.
    pub per_segment_ordering_ok: bool,
    /// Segments containing both object and background pixels.
    pub mixed_segments: usize,
    pub failed_segments: usize,
}

/// Tests whether `image` is a negative of a binary `scene`.
///
/// Pixels with transmissivity ≥ 0.5 count as object. Segments that are all
/// object or all background are skipped by the ordering test.
pub fn negative_image_check(
    image: &Grid,
    scene: &Scene,
    mask: &MaskSequence,
) -> Result<NegativeImageCheck, ImagingError> {
    for side in [image.side(), scene.side()] {
        if side != mask.side() {
            return Err(ImagingError::SideMismatch {
                expected: mask.side(),
                got: side,
            });
        }
    }
    let corr = pearson(image.as_slice(), scene.grid().as_slice());
    let x = scene.grid();
    let mut mixed = 0;
    let mut failed = 0;
    for (block, row) in mask.segments() {
        let (mut obj_sum, mut obj_n, mut bg_sum, mut bg_n) = (0.0, 0usize, 0.0, 0usize);
        for p in mask.segment_pixels(block, row) {
            if x[p] >= 0.5 {
                obj_sum += image[p];
                obj_n += 1;
            } else {
                bg_sum += image[p];
                bg_n += 1;
            }
        }
        if obj_n == 0 || bg_n == 0 {
            continue;
        }
        mixed += 1;
        let object_mean = obj_sum / obj_n as f64;
        let background_mean = bg_sum / bg_n as f64;
        let ordered = object_mean < background_mean;
        if !ordered {
            failed += 1;
        }
    }
    Ok(NegativeImageCheck {
        pearson: corr.unwrap_or(0.0),
        degenerate: corr.is_none(),
        per_segment_ordering_ok: failed == 0,
        mixed_segments: mixed,
        failed_segments: failed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ReconstructionMode {
    NakedEyeDigital,
    NakedEyeAnalog,
    Traditional,
    ClosedFormOracle,
}

impl ReconstructionMode {
    pub const ALL: [ReconstructionMode; 4] = [
        ReconstructionMode::Traditional,
        ReconstructionMode::NakedEyeDigital,
        ReconstructionMode::NakedEyeAnalog,
        ReconstructionMode::ClosedFormOracle,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ReconstructionMode::NakedEyeDigital => "naked_eye_digital",
            ReconstructionMode::NakedEyeAnalog => "naked_eye_analog",
            ReconstructionMode::Traditional => "traditional",
            ReconstructionMode::ClosedFormOracle => "closed_form_oracle",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReconstructionMetrics {
    /// Mean row-segment visibility.
    pub visibility: f64,
    pub pearson_vs_object: f64,
    pub mse_vs_oracle: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructionReport {
    pub image: Grid,
    pub mode: ReconstructionMode,
    pub metrics: ReconstructionMetrics,
}

impl ReconstructionReport {
    /// Scores `image` against the object and a reference image of the same mode.
    pub fn evaluate(
        image: Grid,
        mode: ReconstructionMode,
        scene: &Scene,
        mask: &MaskSequence,
        oracle: &Grid,
    ) -> Result<Self, ImagingError> {
        if oracle.side() != image.side() {
            return Err(ImagingError::SideMismatch {
                expected: image.side(),
                got: oracle.side(),
            });
        }
        let check = negative_image_check(&image, scene, mask)?;
        let vis = segment_visibilities(&image, mask);
        let visibility = if vis.is_empty() {
            0.0
        } else {
            vis.iter().sum::<f64>() / vis.len() as f64
        };
        let metrics = ReconstructionMetrics {
            visibility,
            pearson_vs_object: check.pearson,
            mse_vs_oracle: mse(&image, oracle),
        };
        Ok(ReconstructionReport {
            image,
            mode,
            metrics,
        })
    }
}
