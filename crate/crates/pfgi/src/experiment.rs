//! Experiment pipelines: the single-mode run, the four-way comparison and
//! mask export.

use std::collections::BTreeMap;
use std::io;
use std::path::Path;
use std::time::Instant;

use pfgi_core::imaging::{sliding_persistence, DisplayedPattern, ImagingError};
use pfgi_core::mask::FRAME_ORDER;
use pfgi_core::simulate::{
    baseline_buckets, displayed, simulate_stream, FrameRecord, LoopSettings, StreamPlan,
};
use pfgi_core::{
    Controller, Grid, MaskSequence, NoiseModel, ReconstructionMode, ReconstructionReport,
    SettleStatus,
};
use serde::Serialize;
use thiserror::Error;

use crate::config::{ConfigError, ControllerMode, Experiment, ExperimentConfig};
use crate::output::{FileRecord, OutputDir};
use crate::pgm;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("imaging failed: {0}")]
    Imaging(#[from] ImagingError),
    #[error("output failed: {0}")]
    Io(#[from] io::Error),
    #[error("csv output failed: {0}")]
    Csv(#[from] csv::Error),
}

impl RunError {
    /// Process exit status: 2 for configuration problems, 3 otherwise.
    pub fn exit_code(&self) -> u8 {
        match self {
            RunError::Config(_) => 2,
            _ => 3,
        }
    }
}

/// One image pipeline evaluated over every persistence window.
#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub mode: ReconstructionMode,
    /// One accumulated image per window.
    pub windows: Vec<Grid>,
    /// Closed-form counterpart of each window, used for `mse_vs_oracle`.
    pub oracle_windows: Vec<Grid>,
    /// Per-frame loop records (loop modes only).
    pub records: Option<Vec<FrameRecord>>,
    pub frames_per_window: usize,
}

/// A row of the metrics table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricRow {
    pub mode: String,
    pub scene: String,
    pub pearson: f64,
    pub visibility_mean: f64,
    pub mse_vs_oracle: f64,
    pub frames: usize,
    pub seed: u64,
}

#[derive(Debug, Serialize)]
struct TraceRow {
    frame_index: usize,
    #[serde(rename = "T")]
    transmissivity: f64,
    #[serde(rename = "I_settled")]
    intensity: f64,
    steps: u64,
    flag: &'static str,
}

/// Metadata written to `manifest.json` at the end of every run.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: ExperimentConfig,
    pub output_directory: String,
    pub versions: BTreeMap<String, String>,
    pub metrics: Vec<MetricRow>,
    pub files: Vec<FileRecord>,
    pub warnings: Vec<String>,
    pub wall_clock_seconds: f64,
}

fn plan(exp: &Experiment) -> StreamPlan {
    StreamPlan {
        total_frames: exp.total_frames(),
        frames_per_exposure: exp.window,
        motion: exp.motion,
    }
}

fn loop_settings(exp: &Experiment, controller: Controller) -> LoopSettings {
    LoopSettings {
        controller,
        settle: exp.settle,
        initial_intensity: exp.initial_intensity,
        noise: exp.noise,
        noise_in_loop: exp.noise_in_loop,
    }
}

fn windows_of(
    exp: &Experiment,
    stream: &[DisplayedPattern<'_>],
) -> Result<Vec<Grid>, ImagingError> {
    Ok(
        sliding_persistence(exp.mask.side(), stream, exp.tau, exp.frame_rate, exp.stride)?
            .into_iter()
            .take(exp.windows)
            .map(|e| e.accumulator)
            .collect(),
    )
}

fn loop_mode(controller: &Controller) -> ReconstructionMode {
    match controller {
        Controller::Digital(_) => ReconstructionMode::NakedEyeDigital,
        Controller::Analog(_) => ReconstructionMode::NakedEyeAnalog,
    }
}

/// Runs the feedback loop and integrates the displayed patterns.
pub fn naked_eye(exp: &Experiment, controller: Controller) -> Result<PipelineOutput, RunError> {
    let records = simulate_stream(
        &exp.mask,
        &exp.scene,
        &loop_settings(exp, controller),
        &plan(exp),
    );
    let windows = windows_of(exp, &displayed(&exp.mask, &records))?;
    // same frames at the analytic steady state
    let ideal: Vec<DisplayedPattern> = records
        .iter()
        .map(|r| DisplayedPattern {
            frame: exp.mask.frame(r.mask_index),
            intensity: controller.steady_state(r.transmissivity),
        })
        .collect();
    let oracle_windows = windows_of(exp, &ideal)?;
    Ok(PipelineOutput {
        mode: loop_mode(&controller),
        windows,
        oracle_windows,
        records: Some(records),
        frames_per_window: exp.window,
    })
}

/// Correlation baseline: patterns weighted by the (noisy) bucket signal at
/// unit intensity.
pub fn traditional(exp: &Experiment) -> Result<PipelineOutput, RunError> {
    let weighted = |noise: &NoiseModel| -> Result<Vec<Grid>, ImagingError> {
        let buckets = baseline_buckets(&exp.mask, &exp.scene, noise, &plan(exp));
        let stream: Vec<DisplayedPattern> = buckets
            .iter()
            .enumerate()
            .map(|(i, &b)| DisplayedPattern {
                frame: exp.mask.frame(i % exp.mask.len()),
                intensity: b,
            })
            .collect();
        windows_of(exp, &stream)
    };
    Ok(PipelineOutput {
        mode: ReconstructionMode::Traditional,
        windows: weighted(&exp.noise)?,
        oracle_windows: weighted(&NoiseModel::NONE)?,
        records: None,
        frames_per_window: exp.window,
    })
}

/// The closed-form image of `source`'s controller, as its own pipeline.
fn oracle_of(source: &PipelineOutput) -> PipelineOutput {
    PipelineOutput {
        mode: ReconstructionMode::ClosedFormOracle,
        windows: source.oracle_windows.clone(),
        oracle_windows: source.oracle_windows.clone(),
        records: None,
        frames_per_window: source.frames_per_window,
    }
}

impl PipelineOutput {
    /// Scores the first window against the (unshifted) object.
    pub fn report(&self, exp: &Experiment) -> Result<ReconstructionReport, RunError> {
        Ok(ReconstructionReport::evaluate(
            self.windows[0].clone(),
            self.mode,
            &exp.scene,
            &exp.mask,
            &self.oracle_windows[0],
        )?)
    }

    pub fn metric_row(&self, exp: &Experiment) -> Result<MetricRow, RunError> {
        let r = self.report(exp)?;
        Ok(MetricRow {
            mode: self.mode.as_str().to_string(),
            scene: exp.scene.label().to_string(),
            pearson: r.metrics.pearson_vs_object,
            visibility_mean: r.metrics.visibility,
            mse_vs_oracle: r.metrics.mse_vs_oracle,
            frames: self.frames_per_window,
            seed: exp.config.seed,
        })
    }
}

fn trace_flag(r: &FrameRecord) -> &'static str {
    match (r.status, r.clamped) {
        (SettleStatus::Settled, false) => "settled",
        (SettleStatus::Settled, true) => "settled_clamped",
        (SettleStatus::HitMaxSteps, false) => "hit_max_steps",
        (SettleStatus::HitMaxSteps, true) => "hit_max_steps_clamped",
    }
}

fn trace_csv(records: &[FrameRecord]) -> Result<Vec<u8>, RunError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.serialize(TraceRow {
            frame_index: r.frame_index,
            transmissivity: r.transmissivity,
            intensity: r.intensity,
            steps: r.steps,
            flag: trace_flag(r),
        })?;
    }
    w.into_inner().map_err(|e| RunError::Io(e.into_error()))
}

fn metrics_csv(rows: &[MetricRow]) -> Result<Vec<u8>, RunError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row)?;
    }
    w.into_inner().map_err(|e| RunError::Io(e.into_error()))
}

fn warnings_for(exp: &Experiment, outputs: &[PipelineOutput]) -> Vec<String> {
    let mut warnings = Vec::new();
    let m = exp.mask.len();
    if exp.window < m {
        warnings.push(format!(
            "partial exposure: the window holds {} frames but one mask pass needs {m}",
            exp.window
        ));
    } else if !exp.window.is_multiple_of(m) {
        warnings.push(format!(
            "the window of {} frames is not a whole number of {m}-frame mask passes",
            exp.window
        ));
    }
    for out in outputs {
        if let Some(records) = &out.records {
            let unsettled = records
                .iter()
                .filter(|r| r.status == SettleStatus::HitMaxSteps)
                .count();
            if unsettled > 0 {
                warnings.push(format!(
                    "{}: {unsettled} of {} frames reached max_steps without settling",
                    out.mode.as_str(),
                    records.len()
                ));
            }
        }
    }
    warnings
}

fn emit(
    exp: &Experiment,
    command: &str,
    outputs: &[PipelineOutput],
    started: Instant,
) -> Result<RunManifest, RunError> {
    let mut dir = OutputDir::create(&exp.output_dir)?;
    let opts = &exp.config.outputs;
    let mut metrics = Vec::with_capacity(outputs.len());
    for out in outputs {
        metrics.push(out.metric_row(exp)?);
        let mode = out.mode.as_str();
        if opts.emit_images {
            dir.write_image(&format!("image_{mode}.pgm"), &out.windows[0])?;
            if out.windows.len() > 1 {
                for (i, w) in out.windows.iter().enumerate() {
                    dir.write_image(&format!("video_{mode}/window_{i:04}.pgm"), w)?;
                }
            }
        }
        if opts.emit_traces {
            if let Some(records) = &out.records {
                dir.write(&format!("trace_{mode}.csv"), &trace_csv(records)?)?;
            }
        }
    }
    if opts.emit_metrics {
        dir.write("metrics.csv", &metrics_csv(&metrics)?)?;
    }
    let manifest = RunManifest {
        command: command.to_string(),
        config: exp.config.clone(),
        output_directory: exp.output_dir.display().to_string(),
        versions: BTreeMap::from([
            ("pfgi".to_string(), env!("CARGO_PKG_VERSION").to_string()),
            ("pfgi-core".to_string(), pfgi_core::VERSION.to_string()),
        ]),
        metrics,
        files: dir.files().to_vec(),
        warnings: warnings_for(exp, outputs),
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    };
    let json = serde_json::to_vec_pretty(&manifest).map_err(io::Error::other)?;
    dir.write_unrecorded("manifest.json", &json)?;
    Ok(manifest)
}

/// Runs the configured controller and writes its image, trace and metrics.
pub fn run_experiment(exp: &Experiment) -> Result<RunManifest, RunError> {
    let started = Instant::now();
    let out = naked_eye(exp, exp.selected())?;
    emit(exp, "run", &[out], started)
}

/// Runs the baseline, both loops and the closed-form oracle of the selected
/// controller on the same scene, mask and seed.
pub fn compare_modes(exp: &Experiment) -> Result<RunManifest, RunError> {
    let started = Instant::now();
    let (digital, analog) = exp.require_both()?;
    let (trad, dig, ana) = std::thread::scope(|s| {
        let t = s.spawn(|| traditional(exp));
        let d = s.spawn(|| naked_eye(exp, digital));
        let a = s.spawn(|| naked_eye(exp, analog));
        (
            t.join().expect("traditional pipeline panicked"),
            d.join().expect("digital pipeline panicked"),
            a.join().expect("analog pipeline panicked"),
        )
    });
    let (trad, dig, ana) = (trad?, dig?, ana?);
    let oracle = match exp.mode {
        ControllerMode::Digital => oracle_of(&dig),
        ControllerMode::Analog => oracle_of(&ana),
    };
    emit(exp, "compare", &[trad, dig, ana, oracle], started)
}

#[derive(Debug, Clone, Serialize)]
pub struct MaskFrameEntry {
    pub file: String,
    pub block: usize,
    pub row: usize,
    pub pattern: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct MaskManifest {
    pub n: usize,
    pub k: usize,
    #[serde(rename = "N_Block")]
    pub n_block: usize,
    #[serde(rename = "M")]
    pub m: usize,
    pub frame_order: String,
    pub frames: Vec<MaskFrameEntry>,
}

/// Writes every mask frame as a 0/255 PGM plus `manifest.json`.
pub fn export_mask(n: usize, k: usize, dir: &Path) -> Result<MaskManifest, RunError> {
    let mask = MaskSequence::new(n, k).map_err(|e| ConfigError::Field {
        field: "k".into(),
        message: e.to_string(),
    })?;
    let digits = (mask.len().saturating_sub(1)).to_string().len().max(4);
    let mut out = OutputDir::create(dir)?;
    let mut frames = Vec::with_capacity(mask.len());
    for (i, frame) in mask.frames().iter().enumerate() {
        let mut pixels = vec![0u8; n * n];
        for &p in frame.lit_pixels() {
            pixels[p as usize] = 255;
        }
        let file = format!("frame_{i:0digits$}.pgm");
        out.write(&file, &pgm::encode_pgm(n, n, &pixels))?;
        frames.push(MaskFrameEntry {
            file,
            block: frame.block,
            row: frame.row,
            pattern: frame.pattern,
        });
    }
    let manifest = MaskManifest {
        n,
        k,
        n_block: mask.block_width(),
        m: mask.len(),
        frame_order: FRAME_ORDER.to_string(),
        frames,
    };
    let json = serde_json::to_vec_pretty(&manifest).map_err(io::Error::other)?;
    out.write_unrecorded("manifest.json", &json)?;
    Ok(manifest)
}
