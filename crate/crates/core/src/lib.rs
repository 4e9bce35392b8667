//! Speech activity detection with an LSTM encoder, two generators (frame
//! classification and next-window audio) and static/temporal discriminators.

pub mod checkpoint;
pub mod config;
pub mod corpus;
pub mod error;
pub mod features;
pub mod metrics;
pub mod mfcc;
pub mod network;
pub mod pipeline;
pub mod training;

pub use error::{Error, Result};
