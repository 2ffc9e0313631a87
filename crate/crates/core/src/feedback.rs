//! Photoelectric feedback controllers.
//!
//! Both controllers map the bucket reading `B` of the current pattern to the
//! next source intensity, with `I` confined to a clamp range:
//!
//! * digital comparator: `B > b` lowers `I` by a fixed step, `B < b` raises
//!   it, so the loop ends up oscillating within one step of `b / T`;
//! * analog difference: `I ← I + λ·((U − B) − I)`, whose fixed point is
//!   `U / (1 + T)` and which contracts for every `T ∈ [0, 1]`, `λ ∈ (0, 1]`.

use alloc::vec::Vec;
use thiserror::Error;

use crate::optics::{bucket_signal, NoiseModel, NoiseStream};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ControllerError {
    #[error("clamp range [{min}, {max}] must satisfy 0 < min < max")]
    InvalidClamp { min: f64, max: f64 },
    #[error("reference level must be positive, got {0}")]
    InvalidReference(f64),
    #[error("comparator step {step} must be positive and below the clamp width {width}")]
    InvalidStep { step: f64, width: f64 },
    #[error("source level must be positive, got {0}")]
    InvalidSourceLevel(f64),
    #[error("relaxation {0} outside (0, 1]")]
    InvalidRelaxation(f64),
    #[error("initial intensity {0} outside the clamp range")]
    InvalidInitial(f64),
}

/// Laser power limits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Clamp {
    pub min: f64,
    pub max: f64,
}

impl Clamp {
    pub fn new(min: f64, max: f64) -> Result<Self, ControllerError> {
        let c = Clamp { min, max };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), ControllerError> {
        if !(self.min > 0.0 && self.min < self.max && self.max.is_finite()) {
            return Err(ControllerError::InvalidClamp {
                min: self.min,
                max: self.max,
            });
        }
        Ok(())
    }

    pub fn apply(&self, intensity: f64) -> f64 {
        intensity.clamp(self.min, self.max)
    }

    /// True if `intensity` sits on either bound.
    pub fn is_saturated(&self, intensity: f64) -> bool {
        intensity <= self.min || intensity >= self.max
    }

    pub fn contains(&self, intensity: f64) -> bool {
        (self.min..=self.max).contains(&intensity)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DigitalConfig {
    /// Comparator reference `b`.
    pub reference: f64,
    /// Fixed intensity step `Δ`.
    pub step: f64,
    pub clamp: Clamp,
}

impl DigitalConfig {
    pub fn validate(&self) -> Result<(), ControllerError> {
        self.clamp.validate()?;
        if !(self.reference > 0.0 && self.reference.is_finite()) {
            return Err(ControllerError::InvalidReference(self.reference));
        }
        let width = self.clamp.max - self.clamp.min;
        if !(self.step > 0.0 && self.step < width) {
            return Err(ControllerError::InvalidStep {
                step: self.step,
                width,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalogConfig {
    /// Loss-free source level `U`.
    pub source_level: f64,
    /// Relaxation gain `λ`.
    pub relaxation: f64,
    pub clamp: Clamp,
}

impl AnalogConfig {
    pub fn validate(&self) -> Result<(), ControllerError> {
        self.clamp.validate()?;
        if !(self.source_level > 0.0 && self.source_level.is_finite()) {
            return Err(ControllerError::InvalidSourceLevel(self.source_level));
        }
        if !(self.relaxation > 0.0 && self.relaxation <= 1.0) {
            return Err(ControllerError::InvalidRelaxation(self.relaxation));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerState {
    pub intensity: f64,
    pub step_count: u64,
}

impl ControllerState {
    pub fn new(intensity: f64) -> Self {
        ControllerState {
            intensity,
            step_count: 0,
        }
    }
}

/// Comparator output of the digital loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Increase,
    Decrease,
    Hold,
}

pub fn comparator(bucket: f64, reference: f64) -> Decision {
    if bucket > reference {
        Decision::Decrease
    } else if bucket < reference {
        Decision::Increase
    } else {
        Decision::Hold
    }
}

pub fn digital_step(state: ControllerState, bucket: f64, cfg: &DigitalConfig) -> ControllerState {
    let i = state.intensity;
    let intensity = match comparator(bucket, cfg.reference) {
        Decision::Decrease => (i - cfg.step).max(cfg.clamp.min),
        Decision::Increase => (i + cfg.step).min(cfg.clamp.max),
        Decision::Hold => i,
    };
    ControllerState {
        intensity,
        step_count: state.step_count + 1,
    }
}

pub fn analog_step(state: ControllerState, bucket: f64, cfg: &AnalogConfig) -> ControllerState {
    let i = state.intensity;
    let target = cfg.source_level - bucket;
    ControllerState {
        intensity: cfg.clamp.apply(i + cfg.relaxation * (target - i)),
        step_count: state.step_count + 1,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Controller {
    Digital(DigitalConfig),
    Analog(AnalogConfig),
}

impl Controller {
    pub fn validate(&self) -> Result<(), ControllerError> {
        match self {
            Controller::Digital(c) => c.validate(),
            Controller::Analog(c) => c.validate(),
        }
    }

    pub fn clamp(&self) -> Clamp {
        match self {
            Controller::Digital(c) => c.clamp,
            Controller::Analog(c) => c.clamp,
        }
    }

    pub fn step(&self, state: ControllerState, bucket: f64) -> ControllerState {
        match self {
            Controller::Digital(c) => digital_step(state, bucket, c),
            Controller::Analog(c) => analog_step(state, bucket, c),
        }
    }

    /// Intensity a settle starts from when none is configured: the source
    /// level for the analog loop, the upper clamp for the digital one.
    pub fn default_initial(&self) -> f64 {
        match self {
            Controller::Digital(c) => c.clamp.max,
            Controller::Analog(c) => c.clamp.apply(c.source_level),
        }
    }

    /// Closed-form steady state for transmissivity `t`, clamped.
    /// An opaque frame (`t = 0`) saturates the digital loop at the upper clamp.
    pub fn steady_state(&self, t: f64) -> f64 {
        match self {
            Controller::Digital(c) => {
                if t > 0.0 {
                    c.clamp.apply(c.reference / t)
                } else {
                    c.clamp.max
                }
            }
            Controller::Analog(c) => c.clamp.apply(c.source_level / (1.0 + t)),
        }
    }
}

/// Stopping rule for [`settle`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SettleOptions {
    pub max_steps: u64,
    /// Analog loop stops once `|ΔI| <= tol`.
    pub tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SettleStatus {
    Settled,
    HitMaxSteps,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SettleOutcome {
    pub intensity: f64,
    pub steps: u64,
    pub status: SettleStatus,
    /// Final intensity sits on a clamp bound.
    pub clamped: bool,
}

impl SettleOutcome {
    pub fn settled(&self) -> bool {
        self.status == SettleStatus::Settled
    }
}

/// Iterates the loop against a fixed transmissivity until it settles.
///
/// Analog: stops when one step moves `I` by at most `tol`. Digital: stops
/// after two comparator direction reversals (the limit cycle around `b/T`)
/// or an exact `B = b` hold. Either way at most `max_steps` steps are taken;
/// running out is reported through [`SettleStatus::HitMaxSteps`].
pub fn settle(
    controller: &Controller,
    start: ControllerState,
    transmissivity: f64,
    opts: &SettleOptions,
    noise: &mut NoiseStream,
) -> SettleOutcome {
    let clamp = controller.clamp();
    let mut state = ControllerState {
        intensity: clamp.apply(start.intensity),
        step_count: start.step_count,
    };
    let mut last_decision: Option<Decision> = None;
    let mut reversals = 0u32;

    for taken in 1..=opts.max_steps {
        let sample = bucket_signal(state.intensity, transmissivity, noise);
        let next = controller.step(state, sample.bucket);
        let done = match controller {
            Controller::Analog(_) => (next.intensity - state.intensity).abs() <= opts.tol,
            Controller::Digital(c) => match comparator(sample.bucket, c.reference) {
                Decision::Hold => true,
                d => {
                    if last_decision.is_some_and(|prev| prev != d) {
                        reversals += 1;
                    }
                    last_decision = Some(d);
                    reversals >= 2
                }
            },
        };
        state = next;
        if done {
            return SettleOutcome {
                intensity: state.intensity,
                steps: taken,
                status: SettleStatus::Settled,
                clamped: clamp.is_saturated(state.intensity),
            };
        }
    }
    SettleOutcome {
        intensity: state.intensity,
        steps: opts.max_steps,
        status: SettleStatus::HitMaxSteps,
        clamped: clamp.is_saturated(state.intensity),
    }
}

/// [`settle`] with the noise disabled.
pub fn settle_noiseless(
    controller: &Controller,
    start: ControllerState,
    transmissivity: f64,
    opts: &SettleOptions,
) -> SettleOutcome {
    settle(
        controller,
        start,
        transmissivity,
        opts,
        &mut NoiseModel::NONE.stream(0),
    )
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MonotonicityError {
    #[error("transmissivity grid is empty")]
    EmptyGrid,
    #[error("transmissivity grid not strictly increasing at index {index}")]
    GridNotIncreasing { index: usize },
    #[error("clamp saturation at index {index} (T = {transmissivity}, I = {intensity})")]
    ClampSaturated {
        index: usize,
        transmissivity: f64,
        intensity: f64,
    },
    #[error("loop did not settle at index {index} (T = {transmissivity})")]
    NotSettled { index: usize, transmissivity: f64 },
    #[error("settled intensity not strictly decreasing at index {index}")]
    NotDecreasing { index: usize },
}

/// Settles the loop at every transmissivity of an increasing grid and
/// checks that the settled intensities strictly decrease.
pub fn monotonicity_check(
    controller: &Controller,
    transmissivities: &[f64],
    opts: &SettleOptions,
) -> Result<Vec<f64>, MonotonicityError> {
    if transmissivities.is_empty() {
        return Err(MonotonicityError::EmptyGrid);
    }
    if let Some(index) = transmissivities.windows(2).position(|w| w[0] >= w[1]) {
        return Err(MonotonicityError::GridNotIncreasing { index: index + 1 });
    }
    let clamp = controller.clamp();
    let start = ControllerState::new(controller.default_initial());
    let mut settled = Vec::with_capacity(transmissivities.len());
    for (index, &t) in transmissivities.iter().enumerate() {
        let outcome = settle_noiseless(controller, start, t, opts);
        let target = match controller {
            Controller::Digital(c) if t > 0.0 => c.reference / t,
            Controller::Digital(_) => f64::INFINITY,
            Controller::Analog(c) => c.source_level / (1.0 + t),
        };
        if outcome.clamped || !clamp.contains(target) {
            return Err(MonotonicityError::ClampSaturated {
                index,
                transmissivity: t,
                intensity: outcome.intensity,
            });
        }
        if !outcome.settled() {
            return Err(MonotonicityError::NotSettled {
                index,
                transmissivity: t,
            });
        }
        settled.push(outcome.intensity);
    }
    if let Some(index) = settled.windows(2).position(|w| w[0] <= w[1]) {
        return Err(MonotonicityError::NotDecreasing { index: index + 1 });
    }
    Ok(settled)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clamp() -> Clamp {
        Clamp::new(1e-3, 10.0).unwrap()
    }

    fn digital(b: f64, step: f64) -> DigitalConfig {
        DigitalConfig {
            reference: b,
            step,
            clamp: clamp(),
        }
    }

    fn analog(u: f64, lambda: f64) -> AnalogConfig {
        AnalogConfig {
            source_level: u,
            relaxation: lambda,
            clamp: clamp(),
        }
    }

    #[test]
    fn digital_step_branches() {
        let cfg = digital(0.5, 0.01);
        let hold = digital_step(ControllerState::new(1.0), 1.0 * 0.5, &cfg);
        assert_eq!(hold.intensity, 1.0);
        assert_eq!(hold.step_count, 1);
        let down = digital_step(ControllerState::new(2.0), 2.0 * 0.5, &cfg);
        assert_eq!(down.intensity, 1.99);
        let up = digital_step(ControllerState::new(cfg.clamp.max), 0.0, &cfg);
        assert_eq!(up.intensity, cfg.clamp.max);
    }

    #[test]
    fn analog_step_fixed_points() {
        let cfg = analog(1.0, 1.0);
        assert_eq!(
            analog_step(ControllerState::new(0.5), 0.5, &cfg).intensity,
            0.5
        );
        for lambda in [0.1, 0.5, 1.0] {
            let cfg = analog(1.0, lambda);
            assert_eq!(
                analog_step(ControllerState::new(1.0), 0.0, &cfg).intensity,
                1.0
            );
        }
    }

    #[test]
    fn analog_iterates_to_closed_form() {
        let ctl = Controller::Analog(analog(1.0, 0.5));
        let mut s = ControllerState::new(1.0);
        for _ in 0..50 {
            s = ctl.step(s, s.intensity * 0.25);
        }
        assert!((s.intensity - 0.8).abs() <= 1e-6);
    }

    #[test]
    fn settle_analog() {
        let ctl = Controller::Analog(analog(1.0, 0.5));
        let opts = SettleOptions {
            max_steps: 100,
            tol: 1e-9,
        };
        let out = settle_noiseless(&ctl, ControllerState::new(1.0), 0.5, &opts);
        assert!(out.settled());
        assert!((out.intensity - 2.0 / 3.0).abs() <= 1e-6);
        assert!(out.steps < 100);
    }

    #[test]
    fn settle_digital_brackets_target() {
        let ctl = Controller::Digital(digital(0.5, 0.005));
        let opts = SettleOptions {
            max_steps: 10_000,
            tol: 0.0,
        };
        let out = settle_noiseless(&ctl, ControllerState::new(2.0), 0.5, &opts);
        assert!(out.settled());
        assert!((out.intensity - 1.0).abs() <= 0.005, "{}", out.intensity);
    }

    #[test]
    fn settle_digital_opaque_saturates() {
        let ctl = Controller::Digital(digital(0.5, 0.05));
        let opts = SettleOptions {
            max_steps: 500,
            tol: 0.0,
        };
        let out = settle_noiseless(&ctl, ControllerState::new(1.0), 0.0, &opts);
        assert_eq!(out.status, SettleStatus::HitMaxSteps);
        assert_eq!(out.intensity, 10.0);
        assert!(out.clamped);
    }

    #[test]
    fn monotonicity_examples() {
        let opts = SettleOptions {
            max_steps: 100_000,
            tol: 1e-10,
        };
        let a = monotonicity_check(
            &Controller::Analog(analog(1.0, 0.5)),
            &[0.0, 0.5, 1.0],
            &opts,
        )
        .unwrap();
        for (got, want) in a.iter().zip([1.0, 2.0 / 3.0, 0.5]) {
            assert!((got - want).abs() < 1e-8);
        }
        let d = monotonicity_check(
            &Controller::Digital(digital(0.5, 0.0025)),
            &[0.25, 0.5, 1.0],
            &opts,
        )
        .unwrap();
        for (got, want) in d.iter().zip([2.0, 1.0, 0.5]) {
            assert!((got - want).abs() <= 0.0025);
        }
        let single = monotonicity_check(&Controller::Analog(analog(1.0, 0.5)), &[0.3], &opts);
        assert_eq!(single.map(|v| v.len()), Ok(1));
    }

    #[test]
    fn monotonicity_diagnostics() {
        let opts = SettleOptions {
            max_steps: 100_000,
            tol: 1e-10,
        };
        let ctl = Controller::Digital(digital(0.5, 0.0025));
        assert!(matches!(
            monotonicity_check(&ctl, &[0.01, 0.5], &opts),
            Err(MonotonicityError::ClampSaturated { index: 0, .. })
        ));
        assert_eq!(
            monotonicity_check(&ctl, &[0.5, 0.5], &opts),
            Err(MonotonicityError::GridNotIncreasing { index: 1 })
        );
        assert_eq!(
            monotonicity_check(&ctl, &[], &opts),
            Err(MonotonicityError::EmptyGrid)
        );
    }

    #[test]
    fn config_validation() {
        assert!(Clamp::new(0.0, 1.0).is_err());
        assert!(Clamp::new(2.0, 1.0).is_err());
        assert!(digital(0.5, 20.0).validate().is_err());
        assert!(digital(-0.5, 0.1).validate().is_err());
        assert!(analog(1.0, 0.0).validate().is_err());
        assert!(analog(1.0, 1.5).validate().is_err());
        assert!(analog(0.0, 0.5).validate().is_err());
        assert!(analog(1.0, 1.0).validate().is_ok());
    }
}
