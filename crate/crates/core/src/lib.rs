//! Numerical components for an enhanced YOLOv8 traffic sign detector.
//!
//! Every piece is a standalone, deterministic function of its inputs so it can be
//! checked in isolation: IoU-family regression losses with analytic gradients,
//! the Coordinate Attention / BiFPN / ODConv / LSKA blocks with hand-written
//! backward passes, the Mosaic/MixUp augmentation pipeline, K-means anchor
//! recalibration and PASCAL-style detection evaluation.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod anchors;
pub mod augment;
pub mod blocks;
pub mod boxes;
mod error;
pub mod eval;
pub mod gradcheck;
pub mod labels;
pub mod rng;
pub mod synth;
pub mod tensor;

pub use error::{Error, Result};
