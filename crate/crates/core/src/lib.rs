//! Analyses of service protocols modelled as labelled transition systems:
//! composition and deadlock detection, behavioural equivalences,
//! compatibility checking and flooding, adaptor synthesis, and
//! choreography realizability.

pub mod adaptation;
pub mod choreography;
pub mod compatibility;
pub mod composition;
pub mod corpus;
pub mod equivalences;
pub mod matching;
pub mod model;
pub mod verdict;

pub use adaptation::{parse_contract, synthesize_adaptor, verify_adaptation, AdaptorLts, Contract};
pub use choreography::{conformance, parse_diagram, project, realizable, CollaborationDiagram};
pub use compatibility::{check_compat, compat_degree, CompatMatrix, FloodParams, Notion};
pub use composition::{async_product, sync_product, CompositeLts, Mode};
pub use equivalences::{bisimilar, trace_equivalent, Relation};
pub use model::{mirror, parse_lts, tau_reduce, validate, Label, Lts, Transition};
pub use verdict::{Evidence, Verdict};
