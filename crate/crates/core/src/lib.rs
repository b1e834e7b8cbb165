//! One-pass summaries of turnstile data streams for logistic regression.
//!
//! Rows of the signed design matrix `a_i = -y_i x_i` arrive as additive
//! `(row, col, value)` updates. [`SketchState`] folds them into a small
//! weighted summary whose logistic loss approximates the loss on the full
//! data, and [`solver`] minimizes either the plain weighted loss or a
//! clipped variant that keeps only the largest buckets per level.
//!
//! ```
//! use logsketch::{datagen, sketch::SketchConfig, signed_design_matrix, sketch_matrix};
//!
//! let data = datagen::gen_synthetic(1000, 0).unwrap();
//! let a = signed_design_matrix(&data);
//! let config = SketchConfig::builder(a.n(), a.d()).buckets(64).sample_size(32).build().unwrap();
//! let summary = sketch_matrix(&a, &config).unwrap().finalize();
//! assert_eq!(summary.len(), 3 * 64 + 32);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod data;
pub mod datagen;
pub mod error;
pub mod experiment;
pub mod hash;
pub mod io;
pub mod objectives;
pub mod sketch;
pub mod solver;

pub use data::{signed_design_matrix, LabeledDataset, SignedMatrix, TurnstileUpdate, WeightedDataset};
pub use error::{Error, Result};
pub use sketch::{sketch_matrix, SketchConfig, SketchState, SketchedDataset};
