//! Unrolled proximal-gradient decoder: architecture, parameters, forward pass.

pub mod arch;
pub mod forward;
pub mod ista;
pub mod params;

pub use arch::{
    circulant, Architecture, BlockShape, MapKind, NormTag, Pooling, SharingSchedule, WeightBlock,
};
pub use forward::{decode, forward, layer_forward, materialize_all, materialize_b, ForwardTrace};
pub use ista::{ista_reference, l1_objective};
pub use params::{param_class_norm, HypothesisClassSpec, Params};
