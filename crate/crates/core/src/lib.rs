//! Streaming engagement modelling for fragmented educational videos.
//!
//! Ingests PEEKC-format interaction logs, maintains online Bayesian
//! per-learner skill states, predicts engagement with the TrueLearn
//! model family and six baselines, evaluates sequentially and renders
//! learner-state reports.

pub mod annotate;
pub mod config;
pub mod data_model;
pub mod evaluate;
pub mod fetch;
pub mod learners;
pub mod report;
pub mod simulate;
pub mod skills;

pub use config::ModelConfig;
pub use data_model::{Dataset, EngagementEvent, FragmentId, KcAnnotationSlot, Session};
pub use evaluate::{EvalReport, Metrics, ModelFactory};
pub use learners::{EngagementModel, ModelKind};
pub use skills::{GaussianSkill, LearnerState, StateSnapshot};
