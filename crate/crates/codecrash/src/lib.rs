//! Perturbation engine and robustness-evaluation harness for Python
//! code-reasoning tasks.
//!
//! The crate applies structural perturbations (entity renaming, conditional
//! reformatting, garbage-code insertion, and their aggregate) and textual
//! perturbations (misleading comments, misleading prints, incorrect hint
//! comments) to small Python programs, validates behavioral equivalence by
//! executing both versions in a sandboxed reference interpreter, runs
//! direct/CoT evaluation against language models, and aggregates Pass@1
//! degradation and robustness metrics.

pub mod analytics;
pub mod corpus;
pub mod gateway;
pub mod oracle;
pub mod pipeline;
pub mod protocol;
pub mod pyast;
pub mod rng;
pub mod structural;
pub mod textual;

pub use corpus::{Corpus, Dataset, TaskInstance, TaskKind};
pub use oracle::{ExecutionLimits, ExecutionOutcome, ExecutionStatus, OraclePool};
pub use structural::{PerturbationKind, PerturbationResult};
