use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the counterfactual engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid json")]
    Json(#[from] serde_json::Error),

    #[error("invalid sequence: {0}")]
    InvalidSequence(String),

    #[error("item {item} out of range for catalog of {num_items} items")]
    ItemOutOfRange { item: u32, num_items: usize },

    #[error("catalog must hold at least 2 items, got {0}")]
    CatalogTooSmall(usize),

    #[error("zero valid rows in {0}")]
    ZeroValidRows(PathBuf),

    #[error("k-core filter with k={0} left no interactions")]
    EmptyAfterFilter(usize),

    #[error("user {user} has {count} interactions, need at least 3")]
    TooFewInteractions { user: u64, count: usize },

    #[error("empty sequence")]
    EmptySequence,

    #[error("empty training split")]
    EmptySplit,

    #[error("k={k} out of range 1..={max}")]
    KOutOfRange { k: usize, max: usize },

    #[error("model file version mismatch: {0}")]
    VersionMismatch(String),

    #[error("catalog exhausted: every item is already in the sequence")]
    CatalogExhausted,

    #[error("cannot delete from a sequence of length 1")]
    DeleteFromSingleton,

    #[error("invalid setting: {0}")]
    InvalidSetting(String),

    #[error("categorized setting requires a category map")]
    MissingCategories,

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("enumeration budget exceeded: {needed} candidates > {budget}")]
    BudgetExceeded { needed: u128, budget: u128 },

    #[error("graph too large: {n} vertices > {max}")]
    GraphTooLarge { n: usize, max: usize },

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("no records with a counterfactual")]
    NoCounterfactuals,

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
