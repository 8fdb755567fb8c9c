//! Counterfactual explanations for sequential recommenders.
//!
//! Given a black-box next-item scorer and a user's interaction history, the
//! engine searches for small edits to the history that change what the
//! scorer recommends. The main entry point is [`gece::explain`], a genetic
//! search over replace/add/delete edits; [`baselines`] provides random and
//! target-aware substitution baselines and [`oracle`] an exhaustive optimum
//! for small instances. [`vcreduce`] checks the vertex-cover hardness
//! construction by enumeration.

pub mod baselines;
pub mod dataset;
pub mod error;
pub mod gece;
pub mod metrics;
pub mod model;
pub mod objective;
pub mod oracle;
pub mod rng;
pub mod synth;
pub mod types;
pub mod vcreduce;

pub use error::{Error, Result};
pub use gece::{explain, ExplanationRecord, GaConfig, Method};
pub use model::{BlackBoxScorer, ScoreVector};
pub use objective::{SettingKind, SettingSpec};
pub use rng::SeedSpec;
pub use types::{Catalog, CategoryMap, ItemId, UserSequence};
