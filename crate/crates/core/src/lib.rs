//! Simulation, calibration, and reconstruction for separable coded-aperture
//! lensless cameras.
//!
//! A binary mask sits a fraction of a millimeter above a bare sensor; every
//! pixel records a multiplexed combination of scene radiance and a linear
//! solver demultiplexes the measurements back into an image. Keeping the mask
//! separable (an outer product of two 1-D patterns) reduces the imaging
//! operator to a pair of small transfer matrices, Y = Phi_L X Phi_R^T, which
//! makes both calibration and reconstruction tractable.
//!
//! The crate is organized along the pipeline:
//!
//! - [`seq`]: mask patterns (maximum-length sequences, Hadamard matrices,
//!   random and pinhole baselines) and the signed/optical conversion.
//! - [`optics`]: transfer matrices from physical geometry, with the
//!   diffraction/geometric blur model and the dense fallback for
//!   non-separable masks.
//! - [`sim`]: sensor captures, noise, and the row/column mean correction.
//! - [`calib`]: Hadamard-pattern calibration via truncated SVDs.
//! - [`recon`]: least-squares, Tikhonov, and total-variation reconstruction.
//! - [`analysis`]: singular-spectrum comparisons across mask designs.
//! - [`io`], [`config`]: file formats and experiment configuration.

pub mod analysis;
pub mod calib;
pub mod config;
pub mod error;
pub mod io;
pub mod linalg;
pub mod optics;
pub mod recon;
pub mod seq;
pub mod sim;

pub use analysis::{DesignMetrics, MaskFamilySpectra, SpectrumReport};
pub use calib::{CalibrationAxis, CalibrationOutcome, CalibrationPattern, CaptureModel};
pub use config::{ExperimentConfig, MaskKind, Preset, ReconMethod};
pub use error::{Error, Result};
pub use optics::{BlurSizes, BuildOptions, DenseSystem, OpticsConfig, TransferMatrix};
pub use recon::{Metrics, ReconOptions, SeparableSystem, TvReport};
pub use seq::{HadamardMatrix, MaskForm, MaskPattern, SignSequence};
pub use sim::{SceneImage, SensorImage};

/// Version string embedded in provenance metadata.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
