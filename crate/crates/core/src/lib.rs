//! Multi-annotator consensus learning for continuous emotion recognition.
//!
//! A per-frame predictor maps acoustic features to arousal/valence traces.
//! In the consensus mode it is trained jointly with an Annotators Consensus
//! Network (ACN) that turns the raw annotator streams into a consensus trace,
//! under the weighted dual objective
//!
//! ```text
//! L = alpha * L_ccc(gold, consensus) + beta * L_ccc(consensus, prediction)
//! ```
//!
//! The baseline mode trains the predictor against the gold standard alone.

pub mod annotations;
pub mod ccc;
pub mod checkpoint;
pub mod consensus;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod nn;
pub mod predictor;
pub mod seed;
pub mod synth;
pub mod trainer;

pub use error::{Error, Result};
