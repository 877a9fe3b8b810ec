//! repalign: cross-model representational alignment at desk scale.
//!
//! The crate trains small structured (PGNN) and unstructured (MLP) networks
//! on controlled tasks, extracts per-layer activation matrices, and
//! quantifies how well the learned representations line up across models:
//!
//! - **CKA** between activation matrices,
//! - **subspace overlap** via principal angles between top-k singular
//!   subspaces,
//! - **linear alignment maps** (Procrustes, least squares, CCA) with fit
//!   residuals,
//! - **probe transfer accuracy**: a frozen linear probe trained on one
//!   model's representation and evaluated on another's.
//!
//! Everything is deterministic given its seeds; repeated runs produce
//! byte-identical artifacts. Start with the runnable examples
//! (`cargo run --example ...`) or the `repalign` binary.

pub mod activations;
pub mod cli;
pub mod error;
pub mod metrics;
pub mod models;
pub mod numerics;
pub mod probe;
pub mod protocol;
pub mod trainer;

pub use activations::{ActivationMeta, ActivationSet, NormalizationRecord};
pub use error::{Error, Result};
pub use metrics::{AlignmentMap, MapKind, SubspaceComparison};
pub use models::{ArchId, ModelDims, NetworkModel};
pub use numerics::{Matrix, SvdResult};
pub use probe::{LinearProbe, TransferOutcome};
pub use protocol::{AlignmentReport, ProtocolConfig, SuiteName};
pub use trainer::{Dataset, SyntheticSpec, TrainConfig, TrainHistory};
