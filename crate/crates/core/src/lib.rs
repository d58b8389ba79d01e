//! Popular assignments in bipartite graphs where agents hold strict partial
//! orders over their neighbouring objects.
//!
//! An assignment (perfect matching) `M` is popular when no other assignment
//! wins a head-to-head vote among the agents. [`solve_popular_assignment`]
//! decides existence with a level-raising search and returns an LP dual
//! certificate with every assignment it finds; [`oracle`] re-checks results
//! independently.

pub mod error;
pub mod gen;
pub mod instance;
pub mod matching;
pub mod oracle;
pub mod popular;
pub mod reductions;
pub mod variants;

pub use error::{Error, Result};
pub use instance::{
    augment_to_perfect, parse_instance, validate, AugmentationMap, Instance, InstanceBuilder, InstanceDoc, Matching,
    PrefComparison,
};
pub use popular::{
    certificate_from_levels, induced_subgraph, solve_popular_assignment, solve_truncated, DualCertificate,
    LevelFunction, NotFoundReason, SolveOutcome,
};
pub use variants::{
    forced_to_forbidden, lambda_feasible, solve_k_margin, solve_penalty_assignment, solve_with_constraints,
    EdgeConstraints, KMarginOutcome, LoadCapacity,
};
