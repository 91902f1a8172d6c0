//! Workbench for the rate-1/2, memory-2 convolutional code: encoder and
//! soft-decision Viterbi baseline, window data sets, a from-scratch MLP
//! classifier, the direct and sliding-window voting neural decoders, and a
//! Monte-Carlo BER harness with CSV/SVG outputs.
//!
//! The numeric parts are generic over the scalar type through [`Real`];
//! the aliases below pin the two supported instantiations.

pub mod bench;
pub mod channel;
pub mod codec;
pub mod dataset;
pub mod decoder;
pub mod error;
pub mod mlp;
pub mod real;
pub mod seed;

pub use error::{Error, Result};
pub use real::Real;

/// Double-precision instantiations: the default throughout the CLI, with
/// headroom for the near-zero error rates the decoders are measured at.
pub type SoftFrame64 = channel::SoftFrame<f64>;
pub type ChannelConfig64 = channel::ChannelConfig<f64>;
pub type WindowSample64 = dataset::WindowSample<f64>;
pub type MlpModel64 = mlp::MlpModel<f64>;
pub type PadPolicy64 = decoder::PadPolicy<f64>;

/// Single-precision instantiations.
pub type SoftFrame32 = channel::SoftFrame<f32>;
pub type ChannelConfig32 = channel::ChannelConfig<f32>;
pub type WindowSample32 = dataset::WindowSample<f32>;
pub type MlpModel32 = mlp::MlpModel<f32>;
pub type PadPolicy32 = decoder::PadPolicy<f32>;
