//! Prediction algorithms behind a uniform fit/predict/predict_proba
//! contract. `fit` consumes one labeled event; `predict_proba` must be
//! callable before the label is revealed.

pub mod baselines;
pub mod gaussian;
pub mod kt;
pub mod truelearn;

use crate::data_model::EngagementEvent;

pub use baselines::{
    concept_jaccard, coverage_cosine, CosineBaseline, JaccardConceptBaseline,
    JaccardUserBaseline, TfBaseline, TfMode, UserSimilarityTable,
};
pub use gaussian::{draw_margin, truncated_gaussian_update, Outcome, TruncatedUpdate};
pub use kt::{KtModel, KtParams};
pub use truelearn::{InkModel, InkParams, InterestModel, NoveltyModel, TrueSkillParams};

/// A per-learner online engagement predictor.
pub trait EngagementModel: Send + Sync {
    /// Probability that the learner engages with this event's fragment,
    /// given only the history seen through `fit`.
    fn predict_proba(&self, event: &EngagementEvent) -> f64;

    /// Thresholded prediction. Probabilistic models use 1[p >= 0.5];
    /// similarity baselines threshold on their own tuned cut-off.
    fn predict(&self, event: &EngagementEvent) -> u8 {
        u8::from(self.predict_proba(event) >= 0.5)
    }

    /// Consumes one labeled event, updating the learner state.
    fn fit(&mut self, event: &EngagementEvent);
}

/// The model families the evaluation harness knows how to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Interest,
    Novelty,
    Ink,
    Kt,
    Cosine,
    JaccardConcept,
    JaccardUser,
    TfBinary,
    TfCosine,
}

impl ModelKind {
    pub const ALL: [ModelKind; 9] = [
        ModelKind::Interest,
        ModelKind::Novelty,
        ModelKind::Ink,
        ModelKind::Kt,
        ModelKind::Cosine,
        ModelKind::JaccardConcept,
        ModelKind::JaccardUser,
        ModelKind::TfBinary,
        ModelKind::TfCosine,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::Interest => "interest",
            ModelKind::Novelty => "novelty",
            ModelKind::Ink => "ink",
            ModelKind::Kt => "kt",
            ModelKind::Cosine => "cosine",
            ModelKind::JaccardConcept => "jaccard-c",
            ModelKind::JaccardUser => "jaccard-u",
            ModelKind::TfBinary => "tf-binary",
            ModelKind::TfCosine => "tf-cosine",
        }
    }

    pub fn parse(name: &str) -> Option<ModelKind> {
        Self::ALL.iter().copied().find(|k| k.name() == name)
    }
}
