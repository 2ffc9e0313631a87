//! Simulation core for photoelectric-feedback ("naked-eye") ghost imaging.
//!
//! The crate models the whole measurement chain without any IO:
//!
//! * [`mask`]: Sylvester Hadamard and S-matrices, and the block-scanning
//!   illumination sequence built from them.
//! * [`scene`]: transmissive objects (built-in letter glyphs) and integer
//!   translation for moving-object runs.
//! * [`optics`]: black-box transmissivity, bucket detector signal and the
//!   transmissivity noise model.
//! * [`feedback`]: the digital comparator and analog difference controllers
//!   and their settling procedure.
//! * [`imaging`]: persistence integration, the correlation baseline,
//!   closed-form reconstructions, exact per-segment recovery, noise
//!   sensitivity and image metrics.
//! * [`simulate`]: drives a mask sequence through the optics and a
//!   controller, producing the displayed pattern stream.
//!
//! Everything here is `no_std` with `alloc`; file formats and the experiment
//! runner live in the `pfgi` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod feedback;
pub mod grid;
pub mod imaging;
pub mod mask;
pub mod optics;
pub mod scene;
pub mod simulate;

pub use feedback::{
    AnalogConfig, Clamp, Controller, ControllerState, DigitalConfig, SettleOptions, SettleOutcome,
    SettleStatus,
};
pub use grid::Grid;
pub use imaging::{ExposureImage, ReconstructionMode, ReconstructionReport};
pub use mask::{HadamardMatrix, MaskFrame, MaskSequence, SMatrix};
pub use optics::{BucketSample, NoiseKind, NoiseModel, NoiseStream};
pub use scene::{MotionDescriptor, Scene};

/// Version of this crate, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
