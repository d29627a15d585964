//! Anomaly detection with a skip-connected autoencoder trained to remove
//! synthetic Stain noise.
//!
//! A typical pipeline corrupts clean training images ([`corruption`]),
//! trains a [`model::Network`] to restore them ([`training`]), turns test
//! reconstructions into anomaly maps ([`detection`]) and scores those maps
//! with ROC AUC ([`evaluation`]).

// Validation compares as `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
pub mod cli;
pub mod config;
pub mod corruption;
pub mod dataset;
pub mod detection;
pub mod error;
pub mod evaluation;
pub mod image;
pub mod model;
pub mod nn;
pub mod rng;
pub mod training;

pub use error::{Error, Result};
pub use image::{GrayImage, Mask};
