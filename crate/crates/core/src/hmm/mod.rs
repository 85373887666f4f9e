//! First- and second-order HMMs over linear or circular state graphs.

mod gmm;
mod lattice;
mod model;
mod sample;
mod topology;
mod train;

pub use gmm::{EmissionScorer, Gmm, GmmEmission, VARIANCE_FLOOR};
pub use lattice::{backward, forward, log_likelihood, viterbi_align, Lattice};
pub use model::{init_model, Hmm2Model, TrainingMeta, Transitions};
pub use sample::{sample_sequence, sample_with};
pub use topology::{Order, Shape, Topology};
pub use train::{corpus_log_likelihood, train, TrainConfig};

pub(crate) use model::init_any;
