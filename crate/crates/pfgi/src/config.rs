//! Experiment configuration: the JSON schema and its validation.
//!
//! Unknown keys are rejected. Every check that a module would make at run
//! time is made here first, so a bad config fails before any computation.

use std::fs;
use std::path::{Path, PathBuf};

use pfgi_core::feedback::{AnalogConfig, Clamp, Controller, DigitalConfig, SettleOptions};
use pfgi_core::imaging::window_frames;
use pfgi_core::optics::{NoiseKind, NoiseModel};
use pfgi_core::scene::{MotionDescriptor, Scene};
use pfgi_core::MaskSequence;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pgm;

/// Environment variable that replaces `outputs.directory`.
pub const OUTPUT_DIR_ENV: &str = "PFGI_OUTPUT_DIR";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid config JSON: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("{field}: {message}")]
    Field { field: String, message: String },
}

fn field_err(field: &str, message: impl ToString) -> ConfigError {
    ConfigError::Field {
        field: field.to_string(),
        message: message.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n: usize,
    pub k: usize,
    pub scene: SceneSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub motion: Option<MotionSpec>,
    pub controller: ControllerSpec,
    #[serde(default)]
    pub noise: NoiseSpec,
    #[serde(default)]
    pub exposure: ExposureSpec,
    pub outputs: OutputSpec,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum SceneSpec {
    Letter(char),
    File(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MotionSpec {
    pub dx: i64,
    pub dy: i64,
    #[serde(default = "yes")]
    pub wrap: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControllerMode {
    Digital,
    Analog,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerSpec {
    /// Which loop `run` uses; `compare` runs both.
    pub mode: ControllerMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub digital: Option<DigitalSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analog: Option<AnalogSpec>,
    pub clamp: ClampSpec,
    /// Intensity every frame's settle starts from; defaults to `U` (analog)
    /// or `clamp.max` (digital).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_intensity: Option<f64>,
    /// Defaults to `10 n`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_steps: Option<u64>,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub noise_in_loop: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DigitalSpec {
    pub reference: f64,
    /// Defaults to `reference / 200`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalogSpec {
    pub source_level: f64,
    #[serde(default = "default_relaxation")]
    pub relaxation: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClampSpec {
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKindSpec {
    #[default]
    None,
    Uniform,
    GaussianTruncated,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    #[serde(default)]
    pub kind: NoiseKindSpec,
    #[serde(default)]
    pub amplitude: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExposureSpec {
    #[serde(default = "default_tau")]
    pub tau: f64,
    /// Defaults to `n² / tau`: one full mask pass per window.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame_rate: Option<f64>,
    /// Defaults to the window length (non-overlapping video frames).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stride_frames: Option<usize>,
    #[serde(default = "one")]
    pub windows: usize,
}

impl Default for ExposureSpec {
    fn default() -> Self {
        ExposureSpec {
            tau: default_tau(),
            frame_rate: None,
            stride_frames: None,
            windows: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub directory: PathBuf,
    #[serde(default = "yes")]
    pub emit_images: bool,
    #[serde(default = "yes")]
    pub emit_traces: bool,
    #[serde(default = "yes")]
    pub emit_metrics: bool,
}

fn yes() -> bool {
    true
}
fn one() -> usize {
    1
}
fn default_tol() -> f64 {
    1e-8
}
fn default_relaxation() -> f64 {
    0.5
}
fn default_tau() -> f64 {
    0.2
}

/// Everything a run needs, checked and converted to core types.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub mask: MaskSequence,
    pub scene: Scene,
    pub motion: Option<MotionDescriptor>,
    pub digital: Option<Controller>,
    pub analog: Option<Controller>,
    pub mode: ControllerMode,
    pub initial_intensity: Option<f64>,
    pub settle: SettleOptions,
    pub noise: NoiseModel,
    pub noise_in_loop: bool,
    pub tau: f64,
    pub frame_rate: f64,
    pub window: usize,
    pub stride: usize,
    pub windows: usize,
    pub output_dir: PathBuf,
}

impl Experiment {
    /// Total frames simulated so that `windows` windows fit.
    pub fn total_frames(&self) -> usize {
        self.window + (self.windows - 1) * self.stride
    }

    /// The controller selected by `controller.mode`.
    pub fn selected(&self) -> Controller {
        match self.mode {
            ControllerMode::Digital => self.digital,
            ControllerMode::Analog => self.analog,
        }
        .expect("validated")
    }

    /// Fails unless both controllers are configured.
    pub fn require_both(&self) -> Result<(Controller, Controller), ConfigError> {
        let d = self.digital.ok_or_else(|| {
            field_err(
                "controller.digital",
                "compare needs both controllers configured",
            )
        })?;
        let a = self.analog.ok_or_else(|| {
            field_err(
                "controller.analog",
                "compare needs both controllers configured",
            )
        })?;
        Ok((d, a))
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::from_json(&text)?;
        // scene files are relative to the config file
        if let SceneSpec::File(p) = &mut cfg.scene {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    /// Validates every field and builds the run description. `output_override`
    /// replaces `outputs.directory` when given.
    pub fn validate(&self, output_override: Option<PathBuf>) -> Result<Experiment, ConfigError> {
        let n = self.n;
        if n == 0 {
            return Err(field_err("n", "n must be at least 1"));
        }
        let mask = MaskSequence::new(n, self.k).map_err(|e| field_err("k", e))?;

        let scene = match &self.scene {
            SceneSpec::Letter(c) => {
                Scene::letter(*c, n).map_err(|e| field_err("scene.letter", e))?
            }
            SceneSpec::File(path) => load_scene_file(path, n)?,
        };

        let motion = match self.motion {
            None => None,
            Some(m) => {
                let d = MotionDescriptor {
                    dx: m.dx,
                    dy: m.dy,
                    wrap: m.wrap,
                };
                d.validate(n).map_err(|e| field_err("motion", e))?;
                Some(d)
            }
        };

        let c = &self.controller;
        let clamp =
            Clamp::new(c.clamp.min, c.clamp.max).map_err(|e| field_err("controller.clamp", e))?;
        let digital = match c.digital {
            None => None,
            Some(d) => {
                let cfg = DigitalConfig {
                    reference: d.reference,
                    step: d.step.unwrap_or(d.reference / 200.0),
                    clamp,
                };
                cfg.validate()
                    .map_err(|e| field_err("controller.digital", e))?;
                Some(Controller::Digital(cfg))
            }
        };
        let analog = match c.analog {
            None => None,
            Some(a) => {
                let cfg = AnalogConfig {
                    source_level: a.source_level,
                    relaxation: a.relaxation,
                    clamp,
                };
                cfg.validate()
                    .map_err(|e| field_err("controller.analog", e))?;
                Some(Controller::Analog(cfg))
            }
        };
        match c.mode {
            ControllerMode::Digital if digital.is_none() => {
                return Err(field_err(
                    "controller.digital",
                    "mode is digital but no digital section given",
                ))
            }
            ControllerMode::Analog if analog.is_none() => {
                return Err(field_err(
                    "controller.analog",
                    "mode is analog but no analog section given",
                ))
            }
            _ => {}
        }
        if let Some(i0) = c.initial_intensity {
            if !clamp.contains(i0) {
                return Err(field_err(
                    "controller.initial_intensity",
                    format!("must lie in the clamp range [{}, {}]", clamp.min, clamp.max),
                ));
            }
        }
        let max_steps = c.max_steps.unwrap_or(10 * n as u64);
        if max_steps == 0 {
            return Err(field_err(
                "controller.max_steps",
                "max_steps must be at least 1",
            ));
        }
        if !(c.tol >= 0.0 && c.tol.is_finite()) {
            return Err(field_err(
                "controller.tol",
                "tol must be finite and non-negative",
            ));
        }

        let kind = match self.noise.kind {
            NoiseKindSpec::None => NoiseKind::None,
            NoiseKindSpec::Uniform => NoiseKind::Uniform,
            NoiseKindSpec::GaussianTruncated => NoiseKind::GaussianTruncated,
        };
        let noise = NoiseModel::new(kind, self.noise.amplitude, self.seed)
            .map_err(|e| field_err("noise.amplitude", e))?;

        let e = &self.exposure;
        if !(e.tau > 0.0 && e.tau.is_finite()) {
            return Err(field_err(
                "exposure.tau",
                "tau must be a positive number of seconds",
            ));
        }
        let frame_rate = e.frame_rate.unwrap_or(mask.len() as f64 / e.tau);
        if !(frame_rate > 0.0 && frame_rate.is_finite()) {
            return Err(field_err(
                "exposure.frame_rate",
                "frame_rate must be positive",
            ));
        }
        let window = window_frames(e.tau, frame_rate);
        if window == 0 {
            return Err(field_err(
                "exposure",
                "tau * frame_rate must cover at least one frame",
            ));
        }
        let stride = e.stride_frames.unwrap_or(window);
        if stride == 0 {
            return Err(field_err(
                "exposure.stride_frames",
                "stride_frames must be at least 1",
            ));
        }
        if e.windows == 0 {
            return Err(field_err("exposure.windows", "windows must be at least 1"));
        }
        if motion.is_some() && stride != window {
            return Err(field_err(
                "exposure.stride_frames",
                "motion steps once per window, so stride_frames must equal the window length",
            ));
        }

        let output_dir = output_override.unwrap_or_else(|| self.outputs.directory.clone());
        if output_dir.as_os_str().is_empty() {
            return Err(field_err(
                "outputs.directory",
                "directory must not be empty",
            ));
        }

        Ok(Experiment {
            config: self.clone(),
            mask,
            scene,
            motion,
            digital,
            analog,
            mode: c.mode,
            initial_intensity: c.initial_intensity,
            settle: SettleOptions {
                max_steps,
                tol: c.tol,
            },
            noise,
            noise_in_loop: c.noise_in_loop,
            tau: e.tau,
            frame_rate,
            window,
            stride,
            windows: e.windows,
            output_dir,
        })
    }
}

fn load_scene_file(path: &Path, n: usize) -> Result<Scene, ConfigError> {
    let bytes =
        fs::read(path).map_err(|e| field_err("scene.file", format!("{}: {e}", path.display())))?;
    let image = pgm::read_pgm(&bytes[..]).map_err(|e| field_err("scene.file", e))?;
    let grid = pgm::grid_from_pgm(&image).map_err(|e| field_err("scene.file", e))?;
    if grid.side() != n {
        return Err(field_err(
            "scene.file",
            format!("image is {0}x{0} but n = {n}", grid.side()),
        ));
    }
    let label = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "file".into());
    Scene::new(grid, &label).map_err(|e| field_err("scene.file", e))
}
