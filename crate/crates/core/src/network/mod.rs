//! Tree-structured multi-modal network: K modality paths, a block-structured
//! shared hidden layer gated by γ, and a softmax output.

mod forward;
mod fusion;
mod params;
mod topology;

pub use forward::{
    argmax, forward, forward_batch, forward_single_batch, forward_single_modality, Batch,
    ForwardOptions, ForwardTrace, ModalitySample, Mode, PathTrace, SingleTrace,
};
pub use fusion::{geometric_mean_fusion, init_shared_from_pretrained};
pub use params::{is_off_diagonal, Dense, Gradients, ParameterGroups, Params, PathParams, SharedParams};
pub use topology::{PathSpec, SharedActivation, Topology};

/// Topology and parameters travelling together.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub topology: Topology,
    pub params: Params,
}

impl Model {
    pub fn new(topology: Topology, params: Params) -> crate::Result<Self> {
        params.validate(&topology)?;
        Ok(Self { topology, params })
    }

    pub fn forward_batch(&self, batch: &Batch, opts: &ForwardOptions) -> crate::Result<ForwardTrace> {
        forward_batch(batch, &self.params, &self.topology, opts, None)
    }
}
