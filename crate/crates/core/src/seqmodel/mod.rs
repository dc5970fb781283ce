//! Gaussian-mixture HMMs: emissions, left-to-right symbol models, network
//! composition, Viterbi and forward-backward decoding, and embedded
//! Baum-Welch training.

mod decode;
mod emission;
mod gmm;
mod hmm;
mod network;
mod train;

pub use decode::{
    backward, forward, forward_log_likelihood, span_log_likelihood, viterbi, viterbi_range, Alignment, GraphState, Segment,
    StateGraph, Transition,
};
pub use emission::EmissionTable;
pub use gmm::GmmState;
pub use hmm::{CharHmm, ModelSet, SPACE};
pub use network::{
    build_chain, build_filler, build_keyword_network, build_optional_chain, Link, NetNode, NetworkRole, SpottingNetwork,
};
pub use train::{
    embedded_baum_welch, em_iteration, flat_start, global_statistics, mixup, train_models, IterationStats, TrainConfig,
    TrainLine, TrainingLog,
};

use crate::error::Result;
use crate::features::FeatureSequence;
use crate::scalar::Scalar;

/// Compiles `net` and decodes all of `seq` with it.
pub fn align<T: Scalar>(net: &SpottingNetwork, models: &ModelSet<T>, seq: &FeatureSequence<T>) -> Result<Alignment<T>> {
    let graph = StateGraph::compile(net, models)?;
    let em = EmissionTable::compute(models, seq, None)?;
    viterbi(&graph, &em)
}
