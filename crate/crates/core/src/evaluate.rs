//! Sequential evaluation: each event is scored before its label is used
//! for fitting, classification metrics are pooled (micro) and averaged
//! per learner (macro), with per-timestep curves, grid sweeps and paired
//! t-tests on top.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::config::ModelConfig;
use crate::data_model::{Dataset, Session};
use crate::learners::{
    CosineBaseline, EngagementModel, InkModel, InterestModel, JaccardConceptBaseline,
    JaccardUserBaseline, KtModel, ModelKind, NoveltyModel, TfBaseline, TfMode,
    UserSimilarityTable,
};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no predictions to score")]
    NoPredictions,
    #[error("empty parameter grid")]
    EmptyGrid,
    #[error("paired t-test needs two samples of equal length >= 2")]
    BadPairs,
    #[error("model `{0}` needs a training dataset")]
    MissingTrain(&'static str),
}

/// Builds a fresh per-learner model instance for a configuration.
/// The user-Jaccard table is the only cross-learner shared state.
#[derive(Clone)]
pub struct ModelFactory {
    pub config: ModelConfig,
    user_table: Option<Arc<UserSimilarityTable>>,
}

impl ModelFactory {
    pub fn new(config: ModelConfig, train: Option<&Dataset>) -> Result<Self, EvalError> {
        let user_table = match config.model {
            ModelKind::JaccardUser => {
                let train = train.ok_or(EvalError::MissingTrain("jaccard-u"))?;
                Some(Arc::new(UserSimilarityTable::from_train(train)))
            }
            _ => None,
        };
        Ok(Self { config, user_table })
    }

    pub fn build(&self, user_id: u64) -> Box<dyn EngagementModel> {
        let c = &self.config;
        match c.model {
            ModelKind::Interest => Box::new(InterestModel::new(user_id, c.interest)),
            ModelKind::Novelty => Box::new(NoveltyModel::new(user_id, c.novelty)),
            ModelKind::Ink => Box::new(InkModel::new(user_id, c.interest, c.novelty, c.ink)),
            ModelKind::Kt => Box::new(KtModel::new(c.kt)),
            ModelKind::Cosine => Box::new(CosineBaseline::new(c.threshold)),
            ModelKind::JaccardConcept => Box::new(JaccardConceptBaseline::new(c.threshold)),
            ModelKind::JaccardUser => Box::new(JaccardUserBaseline::new(
                self.user_table.clone().unwrap_or_default(),
                c.threshold,
            )),
            ModelKind::TfBinary => Box::new(TfBaseline::new(TfMode::Binary, c.threshold)),
            ModelKind::TfCosine => Box::new(TfBaseline::new(TfMode::Cosine, c.threshold)),
        }
    }
}

/// One scored event: probability and prediction recorded before the
/// label was shown to the model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredPrediction {
    pub proba: f64,
    pub predicted: u8,
    pub label: u8,
}

/// Replays one session in time order. Every event is scored before
/// `fit` sees its label; with `skip_first` the first event is fitted but
/// not scored.
pub fn replay_session(
    model: &mut dyn EngagementModel,
    session: &Session,
    skip_first: bool,
) -> Vec<ScoredPrediction> {
    let mut scored = Vec::with_capacity(session.events.len());
    for (i, event) in session.events.iter().enumerate() {
        if !(skip_first && i == 0) {
            scored.push(ScoredPrediction {
                proba: model.predict_proba(event),
                predicted: model.predict(event),
                label: event.label,
            });
        }
        model.fit(event);
    }
    scored
}

/// Replays every session with a fresh model per learner, in parallel.
/// Output is sorted by user id, so results are deterministic.
pub fn replay_dataset(
    factory: &ModelFactory,
    dataset: &Dataset,
    skip_first: bool,
) -> Vec<(u64, Vec<ScoredPrediction>)> {
    let sessions: Vec<&Session> = dataset.sessions.values().collect();
    sessions
        .par_iter()
        .map(|session| {
            let mut model = factory.build(session.user_id);
            (
                session.user_id,
                replay_session(model.as_mut(), session, skip_first),
            )
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn add(&mut self, predicted: u8, label: u8) {
        match (predicted, label) {
            (1, 1) => self.tp += 1,
            (1, 0) => self.fp += 1,
            (0, 0) => self.tn += 1,
            _ => self.fn_ += 1,
        }
    }

    pub fn merge(&mut self, other: &ConfusionCounts) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.tn += other.tn;
        self.fn_ += other.fn_;
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    /// Metrics with the zero-division convention: precision/recall are 0
    /// when their denominator is 0, f1 is 0 when prec + rec is 0.
    pub fn metrics(&self) -> Metrics {
        let total = self.total();
        let accuracy = if total == 0 {
            0.0
        } else {
            (self.tp + self.tn) as f64 / total as f64
        };
        let precision = if self.tp + self.fp == 0 {
            0.0
        } else {
            self.tp as f64 / (self.tp + self.fp) as f64
        };
        let recall = if self.tp + self.fn_ == 0 {
            0.0
        } else {
            self.tp as f64 / (self.tp + self.fn_) as f64
        };
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Metrics {
            accuracy,
            precision,
            recall,
            f1,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Metrics {
    fn mean(all: &[Metrics]) -> Metrics {
        let n = all.len() as f64;
        Metrics {
            accuracy: all.iter().map(|m| m.accuracy).sum::<f64>() / n,
            precision: all.iter().map(|m| m.precision).sum::<f64>() / n,
            recall: all.iter().map(|m| m.recall).sum::<f64>() / n,
            f1: all.iter().map(|m| m.f1).sum::<f64>() / n,
        }
    }
}

/// Versioned evaluation report; serialized as the `--report` JSON.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub version: u32,
    pub model: String,
    pub micro: Metrics,
    #[serde(rename = "macro")]
    pub macro_: Metrics,
    pub per_timestep: Vec<Metrics>,
    pub n_learners: u64,
    pub n_events: u64,
}

pub const REPORT_VERSION: u32 = 1;

/// Per-learner metrics, paired by user id; input for the t-test.
pub fn per_learner_metrics(
    scored: &[(u64, Vec<ScoredPrediction>)],
) -> Vec<(u64, Metrics)> {
    scored
        .iter()
        .map(|(user_id, triples)| {
            let mut counts = ConfusionCounts::default();
            for t in triples {
                counts.add(t.predicted, t.label);
            }
            (*user_id, counts.metrics())
        })
        .collect()
}

/// Pools the scored predictions into the full report.
pub fn compute_metrics(
    model_name: &str,
    scored: &[(u64, Vec<ScoredPrediction>)],
) -> Result<EvalReport, EvalError> {
    let n_events: u64 = scored.iter().map(|(_, t)| t.len() as u64).sum();
    if n_events == 0 {
        return Err(EvalError::NoPredictions);
    }
    let mut pooled = ConfusionCounts::default();
    for (_, triples) in scored {
        for t in triples {
            pooled.add(t.predicted, t.label);
        }
    }
    let per_learner: Vec<Metrics> = per_learner_metrics(scored)
        .into_iter()
        .map(|(_, m)| m)
        .collect();
    let max_len = scored.iter().map(|(_, t)| t.len()).max().unwrap_or(0);
    let mut per_timestep = Vec::with_capacity(max_len);
    for t in 0..max_len {
        let mut counts = ConfusionCounts::default();
        for (_, triples) in scored {
            if let Some(s) = triples.get(t) {
                counts.add(s.predicted, s.label);
            }
        }
        per_timestep.push(counts.metrics());
    }
    Ok(EvalReport {
        version: REPORT_VERSION,
        model: model_name.to_string(),
        micro: pooled.metrics(),
        macro_: Metrics::mean(&per_learner),
        per_timestep,
        n_learners: scored.len() as u64,
        n_events,
    })
}

/// End-to-end evaluation of one configuration on a dataset.
pub fn evaluate(
    config: &ModelConfig,
    data: &Dataset,
    train: Option<&Dataset>,
    skip_first: bool,
) -> Result<EvalReport, EvalError> {
    let factory = ModelFactory::new(config.clone(), train)?;
    let scored = replay_dataset(&factory, data, skip_first);
    compute_metrics(config.model.name(), &scored)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    Accuracy,
    Precision,
    Recall,
    F1,
}

impl Objective {
    pub fn of(&self, m: &Metrics) -> f64 {
        match self {
            Objective::Accuracy => m.accuracy,
            Objective::Precision => m.precision,
            Objective::Recall => m.recall,
            Objective::F1 => m.f1,
        }
    }
}

/// One evaluated grid point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    pub params: Vec<(String, f64)>,
    pub objective: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepResult {
    pub best: SweepRow,
    pub table: Vec<SweepRow>,
}

/// Exhaustive Cartesian sweep over the grid, maximizing the objective on
/// `train`. Candidates are visited in lexicographic order of their
/// parameter values and ties keep the first, so selection is
/// deterministic.
pub fn grid_sweep(
    base: &ModelConfig,
    grid: &[(String, Vec<f64>)],
    train: &Dataset,
    objective: Objective,
) -> Result<(ModelConfig, SweepResult), EvalError> {
    if grid.is_empty() || grid.iter().any(|(_, vs)| vs.is_empty()) {
        return Err(EvalError::EmptyGrid);
    }
    let mut candidates: Vec<Vec<f64>> = vec![vec![]];
    for (_, values) in grid {
        let mut sorted = values.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        candidates = candidates
            .into_iter()
            .flat_map(|prefix| {
                sorted.iter().map(move |&v| {
                    let mut next = prefix.clone();
                    next.push(v);
                    next
                })
            })
            .collect();
    }
    let rows: Vec<(Vec<f64>, ModelConfig, f64)> = candidates
        .par_iter()
        .map(|values| {
            let mut config = base.clone();
            for ((key, _), &value) in grid.iter().zip(values) {
                config
                    .set(key, &format!("{value}"))
                    .unwrap_or_else(|e| panic!("grid key rejected: {e}"));
            }
            let score = evaluate(&config, train, Some(train), false)
                .map(|report| objective.of(&report.micro))
                .unwrap_or(f64::NEG_INFINITY);
            (values.clone(), config, score)
        })
        .collect();
    let table: Vec<SweepRow> = rows
        .iter()
        .map(|(values, _, score)| SweepRow {
            params: grid
                .iter()
                .map(|(k, _)| k.clone())
                .zip(values.iter().copied())
                .collect(),
            objective: *score,
        })
        .collect();
    let (best_idx, _) = rows
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bs), (i, (_, _, s))| {
            if *s > bs {
                (i, *s)
            } else {
                (bi, bs)
            }
        });
    Ok((
        rows[best_idx].1.clone(),
        SweepResult {
            best: table[best_idx].clone(),
            table,
        },
    ))
}

/// One-tailed paired t-test for mean(a) > mean(b).
///
/// All-equal differences are degenerate: p collapses to 0 or 1 by the
/// sign of the shift, 0.5 when the samples are identical.
pub fn paired_ttest(a: &[f64], b: &[f64]) -> Result<(f64, f64), EvalError> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(EvalError::BadPairs);
    }
    let n = a.len() as f64;
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = diffs.iter().sum::<f64>() / n;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0);
    if var == 0.0 {
        let (t, p) = if mean > 0.0 {
            (f64::INFINITY, 0.0)
        } else if mean < 0.0 {
            (f64::NEG_INFINITY, 1.0)
        } else {
            (0.0, 0.5)
        };
        return Ok((t, p));
    }
    let t = mean / (var / n).sqrt();
    let dist = StudentsT::new(0.0, 1.0, n - 1.0).expect("valid dof");
    Ok((t, 1.0 - dist.cdf(t)))
}
