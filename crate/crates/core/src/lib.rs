//! Rule-based compliance knowledge bases: a small DSL, three-valued
//! interviews with short-circuit question selection, additive risk scoring,
//! breach-notification assessment and explanation rendering.

pub mod breach;
pub mod disclosure;
pub mod dsl;
pub mod engine;
pub mod eval;
pub mod explain;
pub mod journal;
pub mod model;
pub mod plan;
pub mod risk;
pub mod seed;
pub mod textio;
pub mod validate;

pub use dsl::{parse_kb, serialize_kb};
pub use model::KnowledgeBase;

/// Appended to every report and document.
pub const DISCLAIMER: &str =
    "Decision support only: this output is not legal advice and does not replace review by a qualified adviser.";
