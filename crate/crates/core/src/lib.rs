//! Match communication addresses to vehicles in a sensor's field of view
//! with dynamic watermarking.
//!
//! Each cooperating vehicle superposes a private Gaussian excitation on its
//! velocity commands and reports both the policy input and the excitation to
//! the roadside unit. The roadside unit correlates those reports with the
//! velocities its sensor observes; only the correctly paired stream leaves a
//! residual at the process-noise floor.

pub mod app;
pub mod detector;
pub mod error;
pub mod matcher;
pub mod net;
pub mod sim;
pub mod watermark;

pub use error::{Error, Result};
