pub mod baseline_vq;
pub mod classifier;
pub mod corpus;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod hmm;
pub mod math;
pub mod store;
pub mod suprasegmental;
pub mod systems;
pub mod utterance;

pub use error::{Error, Result};
