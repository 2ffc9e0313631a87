//! Closed-loop measurement of a scene through a mask sequence.
//!
//! Each displayed frame gets its own settle, started from the configured
//! initial intensity, so a frame's settled intensity depends only on its
//! transmissivity (and its own noise stream). Frames are processed in
//! stream order and the results are consumed in that order.

use alloc::vec::Vec;

use crate::feedback::{settle, Controller, ControllerState, SettleOptions, SettleStatus};
use crate::imaging::DisplayedPattern;
use crate::mask::MaskSequence;
use crate::optics::{bucket_signal, frame_transmissivity, NoiseModel};
use crate::scene::{MotionDescriptor, Scene};

/// Noise stream namespace for bucket readings of the constant-intensity
/// baseline; loop settles use the bare frame index.
const BASELINE_STREAM: u64 = 1 << 32;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopSettings {
    pub controller: Controller,
    pub settle: SettleOptions,
    /// Intensity each frame's settle starts from; the controller default if unset.
    pub initial_intensity: Option<f64>,
    pub noise: NoiseModel,
    /// Apply `noise` to the bucket readings inside the loop.
    pub noise_in_loop: bool,
}

impl LoopSettings {
    pub fn noiseless(controller: Controller, settle: SettleOptions) -> Self {
        LoopSettings {
            controller,
            settle,
            initial_intensity: None,
            noise: NoiseModel::NONE,
            noise_in_loop: false,
        }
    }

    fn start(&self) -> ControllerState {
        let i = self
            .initial_intensity
            .unwrap_or_else(|| self.controller.default_initial());
        ControllerState::new(self.controller.clamp().apply(i))
    }
}

/// How many frames to display and how the scene moves between exposures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StreamPlan {
    pub total_frames: usize,
    /// The scene advances one motion step every this many frames.
    pub frames_per_exposure: usize,
    pub motion: Option<MotionDescriptor>,
}

impl StreamPlan {
    /// One pass over the complete mask with a still scene.
    pub fn single(mask: &MaskSequence) -> Self {
        StreamPlan {
            total_frames: mask.len(),
            frames_per_exposure: mask.len(),
            motion: None,
        }
    }
}

/// Outcome of one displayed frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameRecord {
    /// Position in the displayed stream.
    pub frame_index: usize,
    /// Mask frame shown (`frame_index mod M`).
    pub mask_index: usize,
    pub transmissivity: f64,
    pub intensity: f64,
    pub steps: u64,
    pub status: SettleStatus,
    pub clamped: bool,
}

struct SceneTrack<'a> {
    base: &'a Scene,
    motion: Option<MotionDescriptor>,
    per_exposure: usize,
    current_step: i64,
    current: Scene,
}

impl<'a> SceneTrack<'a> {
    fn new(base: &'a Scene, plan: &StreamPlan) -> Self {
        SceneTrack {
            base,
            motion: plan.motion,
            per_exposure: plan.frames_per_exposure.max(1),
            current_step: 0,
            current: base.clone(),
        }
    }

    fn at(&mut self, frame_index: usize) -> &Scene {
        let step = (frame_index / self.per_exposure) as i64;
        if let Some(m) = self.motion {
            if step != self.current_step {
                self.current = self.base.shifted(&m, step);
                self.current_step = step;
            }
        }
        &self.current
    }
}

/// Runs the feedback loop over the planned stream.
pub fn simulate_stream(
    mask: &MaskSequence,
    scene: &Scene,
    settings: &LoopSettings,
    plan: &StreamPlan,
) -> Vec<FrameRecord> {
    let start = settings.start();
    let mut track = SceneTrack::new(scene, plan);
    let mut records = Vec::with_capacity(plan.total_frames);
    for frame_index in 0..plan.total_frames {
        let mask_index = frame_index % mask.len();
        let t = frame_transmissivity(mask.frame(mask_index), track.at(frame_index));
        let model = if settings.noise_in_loop {
            settings.noise
        } else {
            NoiseModel::NONE
        };
        let mut noise = model.stream(frame_index as u64);
        let out = settle(&settings.controller, start, t, &settings.settle, &mut noise);
        records.push(FrameRecord {
            frame_index,
            mask_index,
            transmissivity: t,
            intensity: out.intensity,
            steps: out.steps,
            status: out.status,
            clamped: out.clamped,
        });
    }
    records
}

/// One pass of the complete mask over a still scene.
pub fn simulate_sequence(
    mask: &MaskSequence,
    scene: &Scene,
    settings: &LoopSettings,
) -> Vec<FrameRecord> {
    simulate_stream(mask, scene, settings, &StreamPlan::single(mask))
}

/// The displayed pattern stream of a simulation.
pub fn displayed<'a>(mask: &'a MaskSequence, records: &[FrameRecord]) -> Vec<DisplayedPattern<'a>> {
    records
        .iter()
        .map(|r| DisplayedPattern {
            frame: mask.frame(r.mask_index),
            intensity: r.intensity,
        })
        .collect()
}

/// Bucket readings at unit source intensity, the input of the correlation
/// baseline. `noise` perturbs each reading independently.
pub fn baseline_buckets(
    mask: &MaskSequence,
    scene: &Scene,
    noise: &NoiseModel,
    plan: &StreamPlan,
) -> Vec<f64> {
    let mut track = SceneTrack::new(scene, plan);
    (0..plan.total_frames)
        .map(|frame_index| {
            let t =
                frame_transmissivity(mask.frame(frame_index % mask.len()), track.at(frame_index));
            let mut stream = noise.stream(BASELINE_STREAM | frame_index as u64);
            bucket_signal(1.0, t, &mut stream).bucket
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feedback::{AnalogConfig, Clamp};
    use crate::imaging::{accumulate, closed_form_feedback_g2, FeedbackLaw};

    fn analog() -> Controller {
        Controller::Analog(AnalogConfig {
            source_level: 1.0,
            relaxation: 0.5,
            clamp: Clamp::new(1e-3, 10.0).unwrap(),
        })
    }

    #[test]
    fn analog_loop_matches_closed_form() {
        let mask = MaskSequence::new(6, 2).unwrap();
        let mut g = crate::grid::Grid::zeros(6);
        g[0] = 1.0;
        g[7] = 1.0;
        let scene = Scene::new(g, "two").unwrap();
        let settings = LoopSettings::noiseless(
            analog(),
            SettleOptions {
                max_steps: 1000,
                tol: 1e-12,
            },
        );
        let records = simulate_sequence(&mask, &scene, &settings);
        assert!(records.iter().all(|r| r.status == SettleStatus::Settled));
        let image = accumulate(6, displayed(&mask, &records));
        let oracle = closed_form_feedback_g2(
            &mask,
            &scene,
            FeedbackLaw::Analog {
                source_level: 1.0,
                clamp: None,
            },
        )
        .unwrap();
        assert!(image.l2_distance(&oracle) < 1e-10);
    }

    #[test]
    fn motion_shifts_per_exposure() {
        let mask = MaskSequence::new(7, 1).unwrap();
        let scene = Scene::letter('T', 7).unwrap();
        let plan = StreamPlan {
            total_frames: 2 * mask.len(),
            frames_per_exposure: mask.len(),
            motion: Some(MotionDescriptor {
                dx: 1,
                dy: 0,
                wrap: false,
            }),
        };
        let buckets = baseline_buckets(&mask, &scene, &NoiseModel::NONE, &plan);
        let shifted = scene.shifted(&plan.motion.unwrap(), 1);
        let expect: Vec<f64> = mask
            .frames()
            .iter()
            .map(|f| frame_transmissivity(f, &shifted))
            .collect();
        assert_eq!(&buckets[mask.len()..], expect.as_slice());
    }
}
