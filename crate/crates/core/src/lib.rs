pub mod classic;
pub mod error;
pub mod formats;
pub mod metrics;
pub mod nnet;
pub mod par;
pub mod pipeline;
mod rng;
pub mod signal;
pub mod stmap;
pub mod synth;

pub use error::{Error, Result};
