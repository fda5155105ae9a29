//! Vanishing point detection as grid-cell classification.
//!
//! The image is divided into an `n x n` grid and the vanishing point is
//! localized by picking one of the `p = n*n` cells. The crate provides:
//!
//! - [`geometry`]: the grid model, label linearization, and top-k hit logic;
//! - [`scenegen`]: a deterministic synthetic scene generator with ground
//!   truth, augmentations, and a dataset manifest;
//! - [`classical`]: Sobel + Hough line voting and the center-prior baselines;
//! - [`nn`]: a small from-scratch CNN with softmax heads for VP existence
//!   and VP localization, trained by SGD with momentum;
//! - [`eval`]: top-1/top-5 error tables, existence accuracy, and prediction
//!   overlays;
//! - [`cli`]: the `vpgrid` command-line surface.

pub mod classical;
pub mod cli;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod nn;
pub mod raster;
pub mod scenegen;

pub use error::{Error, Result};
