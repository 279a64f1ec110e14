//! Per-learner state containers: Gaussian skill maps for the TrueLearn
//! models, Bernoulli mastery for knowledge tracing and scalar
//! accumulators for the TF baselines.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Variances never drop below this after an update.
pub const VARIANCE_FLOOR: f64 = 1e-9;

/// Gaussian belief over one skill: mean is the estimate, variance the
/// uncertainty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianSkill {
    pub mean: f64,
    pub variance: f64,
}

impl GaussianSkill {
    pub fn new(mean: f64, variance: f64) -> Self {
        Self {
            mean,
            variance: variance.max(VARIANCE_FLOOR),
        }
    }
}

/// The open learner model: one learner's skill map plus event counters.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct LearnerState {
    pub user_id: u64,
    pub skills: BTreeMap<u64, GaussianSkill>,
    pub event_count: u64,
    pub engagement_count: u64,
    pub per_kc_event_count: BTreeMap<u64, u64>,
}

impl LearnerState {
    pub fn new(user_id: u64) -> Self {
        Self {
            user_id,
            ..Default::default()
        }
    }

    /// Returns the skill for `kc_id`, inserting the prior when absent.
    pub fn get_or_init_skill(
        &mut self,
        kc_id: u64,
        init_mean: f64,
        init_variance: f64,
    ) -> GaussianSkill {
        assert!(init_variance > 0.0);
        *self
            .skills
            .entry(kc_id)
            .or_insert_with(|| GaussianSkill::new(init_mean, init_variance))
    }

    pub fn set_skill(&mut self, kc_id: u64, skill: GaussianSkill) {
        self.skills.insert(
            kc_id,
            GaussianSkill {
                mean: skill.mean,
                variance: skill.variance.max(VARIANCE_FLOOR),
            },
        );
    }

    /// Bumps event/engagement counters and the per-KC counts for the
    /// annotated KCs.
    pub fn record_event(&mut self, kc_ids: impl IntoIterator<Item = u64>, engaged: bool) {
        self.event_count += 1;
        if engaged {
            self.engagement_count += 1;
        }
        for kc in kc_ids {
            *self.per_kc_event_count.entry(kc).or_insert(0) += 1;
        }
    }

    /// Top skills by mean, ties broken by lower variance then lower kc id.
    pub fn export_state(&self, top_k: usize) -> Vec<SkillExport> {
        let mut rows: Vec<SkillExport> = self
            .skills
            .iter()
            .map(|(&kc_id, skill)| SkillExport {
                kc_id,
                mean: skill.mean,
                variance: skill.variance,
                count: self.per_kc_event_count.get(&kc_id).copied().unwrap_or(0),
            })
            .collect();
        rows.sort_by(|a, b| {
            b.mean
                .partial_cmp(&a.mean)
                .unwrap()
                .then(a.variance.partial_cmp(&b.variance).unwrap())
                .then(a.kc_id.cmp(&b.kc_id))
        });
        rows.truncate(top_k);
        rows
    }
}

/// One row of an exported learner state snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkillExport {
    pub kc_id: u64,
    pub mean: f64,
    pub variance: f64,
    pub count: u64,
}

/// JSON snapshot of a learner state: `{user_id, skills: [...], ...}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StateSnapshot {
    pub user_id: u64,
    pub skills: Vec<SkillExport>,
    pub event_count: u64,
    pub engagement_count: u64,
}

impl StateSnapshot {
    pub fn from_state(state: &LearnerState) -> Self {
        Self {
            user_id: state.user_id,
            skills: state.export_state(usize::MAX),
            event_count: state.event_count,
            engagement_count: state.engagement_count,
        }
    }
}

/// Bernoulli mastery belief for the knowledge-tracing baseline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BernoulliSkill {
    pub mastery: f64,
}

impl BernoulliSkill {
    pub fn new(mastery: f64) -> Self {
        assert!((0.0..=1.0).contains(&mastery));
        Self { mastery }
    }
}

/// Non-negative per-KC accumulators for the TF baselines. Values only
/// ever grow over a session.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ScalarSkillMap {
    pub values: BTreeMap<u64, f64>,
}

impl ScalarSkillMap {
    pub fn get(&self, kc_id: u64) -> f64 {
        self.values.get(&kc_id).copied().unwrap_or(0.0)
    }

    pub fn add(&mut self, kc_id: u64, amount: f64) {
        assert!(amount >= 0.0);
        *self.values.entry(kc_id).or_insert(0.0) += amount;
    }
}
