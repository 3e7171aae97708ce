//! Key-frame video style transfer.
//!
//! Only key frames go through the stylization network; every other frame is
//! produced by warping the stylized key that precedes it along an optical
//! flow field. The crate also carries the training loop for the stylizer and
//! a federated edge/cloud retraining simulator.

pub mod checkpoint;
pub mod error;
pub mod fedsim;
pub mod flow;
pub mod frames;
pub mod interp;
pub mod latency;
pub mod metrics;
pub mod pipeline;
pub mod stylizer;
pub mod synth;
pub mod tensor;
pub mod trainer;

pub use error::{Error, Result};
