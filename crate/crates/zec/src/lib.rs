//! Zero-error capacities of finite-state additive noise channels.
//!
//! A finite-state additive noise channel (FSANC) adds a correlated noise
//! symbol to each input symbol modulo the alphabet size `q`. The noise is
//! emitted along the edges of a strongly connected finite-state machine, so
//! the set of admissible noise sequences is a constrained (sofic) language.
//!
//! The crate computes:
//!
//! * the topological entropy `h_ch` of the noise process (Perron value of the
//!   state transition matrix), see [`spectral`];
//! * whether the zero-error capacities (with and without feedback) are zero,
//!   via a subset-construction walk test on the coupled graph, see
//!   [`coupled`];
//! * the zero-error feedback capacity `C0f = log2(q) - h_ch` when nonzero,
//!   plus the `log2(q) - 2 h_ch` lower bound on `C0`, see [`capacity`];
//! * zero-error block codes (independent sets of the confusability graph) and
//!   staged parity-index zero-error feedback codes, with exhaustive
//!   verification, see [`codes`];
//! * quantized state estimation and stabilization of scalar/diagonal linear
//!   plants over such channels, see [`control`].
//!
//! Everything is worst-case (topological): no transition probabilities are
//! involved anywhere.

pub mod capacity;
pub mod codes;
pub mod configs;
pub mod control;
pub mod coupled;
pub mod fsm;
pub mod report;
pub mod spectral;

pub use capacity::CapacityReport;
pub use fsm::{ChannelState, NoiseFsm, NoisePolicy};

/// Crate-wide error type. Variants map onto the CLI exit-code contract:
/// input/validation problems exit 2, guard overruns exit 3, theorem-side
/// refusals exit 4, oracle mismatches exit 5.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid channel: {0}")]
    Invalid(String),
    #[error("guard exceeded: {0}")]
    Guard(String),
    #[error("refused: {0}")]
    Refusal(String),
    #[error("oracle mismatch: {0}")]
    OracleMismatch(String),
    #[error("contract violation: {0}")]
    Contract(String),
}

pub type Result<T> = std::result::Result<T, Error>;
