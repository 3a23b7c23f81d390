//! Arm pose estimation from a smartwatch and smartphone, fusing
//! phone-to-watch UWB ranging with two-device IMU data.
//!
//! The crate covers the full pipeline at desk scale: a synthetic
//! kinematic simulator (standing in for motion-capture ground truth),
//! device calibration, feature assembly, two from-scratch bidirectional
//! LSTMs (UWB correction and pose estimation), end-to-end training with
//! backpropagation through time, and the evaluation machinery
//! (cross-validation, error statistics, heatmaps, ablation).

pub mod calib;
pub mod error;
pub mod eval;
pub mod kinematics;
pub mod math;
pub mod nn;
pub mod pipeline;
pub mod sim;
pub mod train;

pub use error::{Error, Result};
