//! Offline robot programming from a single-shot tool demonstration.
//!
//! The pipeline:
//!
//! 1. [`demo`]: read the tracker stream, remove outliers, estimate speed.
//! 2. [`cad`]: read the nominal positional path.
//! 3. [`fusion`]: take positions from CAD, orientations and speeds from the
//!    demonstration, and move the result into the robot frame.
//! 4. [`pathml`]: wrap the robot path and process parameters in a
//!    CAEX-style PathML document.
//! 5. [`program`]: check the path against generic limits, emit neutral
//!    robot program text, and score executed paths against the nominal one.
//!
//! [`geometry`] holds the rotation and frame-chain math shared by all of it.

pub mod cad;
pub mod demo;
pub mod fusion;
pub mod geometry;
pub mod pathml;
pub mod program;
mod quat;

pub use cad::{CadError, CadPath};
pub use demo::{DemoError, PoseSample, PoseSeries, TrackerErrorModel};
pub use fusion::{FusedPath, FusedPoint, FusionError};
pub use geometry::{CalibrationSet, EulerZyx, FixedXyz, FrameId, GeometryError, Transform4};
pub use pathml::{PathMLDocument, PathmlError};
pub use program::{DeviationReport, PathLimits, ProgramError, RobotProgram, ValidationReport};
