//! Content-based and collaborative baselines: cosine and Jaccard
//! threshold rules over consecutive fragments, the train-set user
//! Jaccard table and the TF accumulator models.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use crate::data_model::{Dataset, EngagementEvent, FragmentId};

use super::EngagementModel;

/// First event of a session has no previous fragment to compare with;
/// the pairwise baselines fall back to the training majority class
/// (engaged).
const MAJORITY_CLASS: u8 = 1;

pub fn coverage_cosine(prev: &EngagementEvent, cur: &EngagementEvent) -> f64 {
    let vector = |e: &EngagementEvent| -> BTreeMap<u64, f64> {
        e.kcs.iter().map(|s| (s.kc_id, s.coverage)).collect()
    };
    let a = vector(prev);
    let b = vector(cur);
    let norm = |v: &BTreeMap<u64, f64>| v.values().map(|x| x * x).sum::<f64>().sqrt();
    let (na, nb) = (norm(&a), norm(&b));
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    let dot: f64 = a
        .iter()
        .filter_map(|(kc, &x)| b.get(kc).map(|&y| x * y))
        .sum();
    (dot / (na * nb)).clamp(0.0, 1.0)
}

pub fn concept_jaccard(prev: &EngagementEvent, cur: &EngagementEvent) -> f64 {
    let a: BTreeSet<u64> = prev.kc_ids().collect();
    let b: BTreeSet<u64> = cur.kc_ids().collect();
    let union = a.union(&b).count();
    if union == 0 {
        return 0.0;
    }
    a.intersection(&b).count() as f64 / union as f64
}

/// Threshold rule over the coverage-vector cosine of consecutive events.
#[derive(Debug, Clone)]
pub struct CosineBaseline {
    pub threshold: f64,
    prev: Option<EngagementEvent>,
}

impl CosineBaseline {
    pub fn new(threshold: f64) -> Self {
        Self {
            threshold,
            prev: None,
        }
    }
}

impl EngagementModel for CosineBaseline {
    fn predict_proba(&self, event: &EngagementEvent) -> f64 {
        match &self.prev {
            Some(prev) => coverage_cosine(prev, event),
            None => f64::from(MAJORITY_CLASS),
        }
    }

    fn predict(&self, event: &EngagementEvent) -> u8 {
        match &self.prev {
            Some(prev) => u8::from(coverage_cosine(prev, event) >= self.threshold),
            None => MAJORITY_CLASS,
        }
    }

    fn fit(&mut self, event: &EngagementEvent) {
        self.prev = Some(event.clone());
    }
}

/// Threshold rule over the KC-set Jaccard of consecutive events.
#[derive(Debug, Clone)]
pub struct JaccardConceptBaseline {
    pub threshold: f64,
    prev: Option<EngagementEvent>,
}

impl JaccardConceptBaseline {
    pub fn new(threshold: f64) -> Self {
        Self {
            threshold,
            prev: None,
        }
    }
}

impl EngagementModel for JaccardConceptBaseline {
    fn predict_proba(&self, event: &EngagementEvent) -> f64 {
        match &self.prev {
            Some(prev) => concept_jaccard(prev, event),
            None => f64::from(MAJORITY_CLASS),
        }
    }

    fn predict(&self, event: &EngagementEvent) -> u8 {
        match &self.prev {
            Some(prev) => u8::from(concept_jaccard(prev, event) >= self.threshold),
            None => MAJORITY_CLASS,
        }
    }

    fn fit(&mut self, event: &EngagementEvent) {
        self.prev = Some(event.clone());
    }
}

/// Fragment-to-watchers index built from training interactions only.
/// Pair similarities are computed on demand from the user sets, which is
/// equivalent to materialising the full fragment-pair table.
#[derive(Debug, Clone, Default)]
pub struct UserSimilarityTable {
    watchers: BTreeMap<FragmentId, BTreeSet<u64>>,
}

impl UserSimilarityTable {
    pub fn from_train(train: &Dataset) -> Self {
        let mut watchers: BTreeMap<FragmentId, BTreeSet<u64>> = BTreeMap::new();
        for event in train.events() {
            watchers
                .entry(event.fragment)
                .or_default()
                .insert(event.user_id);
        }
        Self { watchers }
    }

    /// User-wise Jaccard between two fragments; 0 for unseen fragments.
    pub fn similarity(&self, a: FragmentId, b: FragmentId) -> f64 {
        let (Some(ua), Some(ub)) = (self.watchers.get(&a), self.watchers.get(&b)) else {
            return 0.0;
        };
        let union = ua.union(ub).count();
        if union == 0 {
            return 0.0;
        }
        ua.intersection(ub).count() as f64 / union as f64
    }

    /// Materialises every fragment pair; intended for small inputs and
    /// oracle checks.
    pub fn full_table(&self) -> BTreeMap<(FragmentId, FragmentId), f64> {
        let fragments: Vec<FragmentId> = self.watchers.keys().copied().collect();
        let mut table = BTreeMap::new();
        for &a in &fragments {
            for &b in &fragments {
                table.insert((a, b), self.similarity(a, b));
            }
        }
        table
    }
}

/// Threshold rule over the train-set user Jaccard of consecutive
/// fragments.
#[derive(Debug, Clone)]
pub struct JaccardUserBaseline {
    pub threshold: f64,
    table: Arc<UserSimilarityTable>,
    prev: Option<FragmentId>,
}

impl JaccardUserBaseline {
    pub fn new(table: Arc<UserSimilarityTable>, threshold: f64) -> Self {
        Self {
            threshold,
            table,
            prev: None,
        }
    }
}

impl EngagementModel for JaccardUserBaseline {
    fn predict_proba(&self, event: &EngagementEvent) -> f64 {
        match self.prev {
            Some(prev) => self.table.similarity(prev, event.fragment),
            None => f64::from(MAJORITY_CLASS),
        }
    }

    fn predict(&self, event: &EngagementEvent) -> u8 {
        match self.prev {
            Some(prev) => {
                u8::from(self.table.similarity(prev, event.fragment) >= self.threshold)
            }
            None => MAJORITY_CLASS,
        }
    }

    fn fit(&mut self, event: &EngagementEvent) {
        self.prev = Some(event.fragment);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TfMode {
    /// Accumulates encounter counts per KC.
    Binary,
    /// Accumulates cosine coverage scores per KC.
    Cosine,
}

/// Concept-frequency baseline: per-KC accumulators grown only on engaged
/// events, scored as the mean accumulated value over the event's KCs.
#[derive(Debug, Clone)]
pub struct TfBaseline {
    pub mode: TfMode,
    pub threshold: f64,
    pub accumulators: crate::skills::ScalarSkillMap,
}

impl TfBaseline {
    pub fn new(mode: TfMode, threshold: f64) -> Self {
        Self {
            mode,
            threshold,
            accumulators: Default::default(),
        }
    }

    fn score(&self, event: &EngagementEvent) -> f64 {
        let sum: f64 = event.kc_ids().map(|kc| self.accumulators.get(kc)).sum();
        sum / event.kcs.len() as f64
    }
}

impl EngagementModel for TfBaseline {
    fn predict_proba(&self, event: &EngagementEvent) -> f64 {
        self.score(event)
    }

    fn predict(&self, event: &EngagementEvent) -> u8 {
        u8::from(self.score(event) >= self.threshold)
    }

    fn fit(&mut self, event: &EngagementEvent) {
        if !event.engaged() {
            return;
        }
        for slot in &event.kcs {
            let amount = match self.mode {
                TfMode::Binary => 1.0,
                TfMode::Cosine => slot.coverage,
            };
            self.accumulators.add(slot.kc_id, amount);
        }
    }
}
