use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed document: {0}")]
    Malformed(String),

    #[error("invalid instance: {}", .0.join("; "))]
    Invalid(Vec<String>),

    #[error("unknown agent `{0}`")]
    UnknownAgent(String),

    #[error("unknown object `{0}`")]
    UnknownObject(String),

    #[error("({agent}, {object}) is not an edge of the instance")]
    NotAnEdge { agent: String, object: String },

    #[error("{0} is matched twice")]
    DoubleMatched(String),

    #[error("no perfect matching exists")]
    NoPerfectMatching,

    #[error("matching is not perfect")]
    NotPerfect,

    #[error("agent `{0}` is unmatched")]
    Unmatched(String),

    #[error("matching is not contained in the level-induced subgraph")]
    NotInInducedSubgraph,

    #[error("agent `{0}` has no neighbors")]
    EmptyNeighborhood(String),

    #[error("preferences of agent `{0}` are not a weak ranking")]
    NotWeakRanking(String),

    #[error("enumeration refused: size {size} exceeds cap {cap}")]
    CapExceeded { size: usize, cap: usize },

    #[error("invalid constraints: {0}")]
    InvalidConstraints(String),

    #[error("invalid parameters: {0}")]
    InvalidParameters(String),

    #[error("identifier `{0}` collides with a generated node name")]
    NameCollision(String),

    #[error("allocation is not a set of disjoint cycles: {0}")]
    NotCycles(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
