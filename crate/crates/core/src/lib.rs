//! Energy-signature diagnostics for factory electricity data.
//!
//! Synthesizes labeled load series from a process-electricity map,
//! decomposes them into weekly (7 day-mean) and daily (4 block-mean)
//! feature vectors, and trains and evaluates three classifier families:
//! a multilayer perceptron, a 1-D convolutional network, and PCA followed by
//! multinomial logistic regression.

pub mod decompose;
pub mod domain;
pub mod error;
pub mod eval;
pub mod linalg;
pub mod models;
pub mod pcalr;
pub mod repro;
pub mod synthgen;

pub use error::{Error, Result};
