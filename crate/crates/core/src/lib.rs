// SPDX-License-Identifier: Apache-2.0

// Negated comparisons are deliberate: they reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod decoder;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod geom;
pub mod loss;
pub mod raster;
pub mod scalar;
pub mod synth;

pub use decoder::{DecodeResolution, DecoderConfig, DetectionResult, ScoredBox, SubitizingOutput};
pub use encoder::EncoderConfig;
pub use error::{Error, Result};
pub use geom::{BoundingBox, Cell, CellRect};
pub use loss::{CountCategory, CountDistribution, LossConfig};
pub use raster::{BinaryMask, Component, Orientation, SaliencyMap};
pub use scalar::Scalar;

pub type Map32 = SaliencyMap<f32>;
pub type Map64 = SaliencyMap<f64>;
pub type Box32 = BoundingBox<f32>;
pub type Box64 = BoundingBox<f64>;
pub type Decoder32 = DecoderConfig<f32>;
pub type Decoder64 = DecoderConfig<f64>;
