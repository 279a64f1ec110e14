//! Seeded synthetic trace generator: static ground-truth Gaussian skills
//! per learner, random KC-annotated fragments and labels sampled from
//! the draw likelihood, so model recovery can be scored against a known
//! truth.

use std::collections::BTreeMap;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data_model::{
    group_sessions, Dataset, EngagementEvent, FragmentId, KcAnnotationSlot,
};
use crate::learners::draw_margin;

/// Ground-truth skills are drawn from this prior, matching the Novelty
/// model's initial variance.
pub const TRUE_SKILL_VARIANCE: f64 = 0.25;

/// Coverage values stay away from zero so content carries signal.
pub const COVERAGE_RANGE: (f64, f64) = (0.2, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub n_learners: usize,
    pub n_kcs: usize,
    pub n_fragments: usize,
    pub events_per_learner: usize,
    pub kcs_per_fragment: usize,
    /// Mean of the ground-truth skill prior. Defaults to the coverage
    /// midpoint so the learner/content gap is centred and draws occur
    /// at a rate governed by `true_draw_probability`.
    pub skill_mean: f64,
    pub true_beta: f64,
    pub true_draw_probability: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n_learners: 1000,
            n_kcs: 10,
            n_fragments: 60,
            events_per_learner: 50,
            kcs_per_fragment: 1,
            skill_mean: (COVERAGE_RANGE.0 + COVERAGE_RANGE.1) / 2.0,
            true_beta: 0.3,
            true_draw_probability: 0.8,
            seed: 7,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> bool {
        self.n_learners >= 1
            && self.n_kcs >= 1
            && self.n_fragments >= 1
            && self.events_per_learner >= 1
            && (1..=5).contains(&self.kcs_per_fragment)
            && self.true_beta > 0.0
            && self.true_draw_probability > 0.0
            && self.true_draw_probability < 1.0
    }

    /// Novelty model configuration matching the generative process.
    pub fn true_model_config(&self) -> crate::config::ModelConfig {
        let mut config = crate::config::ModelConfig::default();
        config.model = crate::learners::ModelKind::Novelty;
        config.novelty.beta = self.true_beta;
        config.novelty.draw_probability = self.true_draw_probability;
        config.novelty.init_mean = self.skill_mean;
        config.novelty.init_variance = TRUE_SKILL_VARIANCE;
        config
    }
}

/// Generated dataset plus the hidden skills it was sampled from.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SyntheticData {
    pub dataset: Dataset,
    /// user id -> kc id -> true skill mean.
    pub ground_truth: BTreeMap<u64, BTreeMap<u64, f64>>,
}

impl SyntheticData {
    /// Splits learners 70/30 by user id into train and test datasets.
    pub fn split(&self) -> (Dataset, Dataset) {
        let cut = (self.dataset.sessions.len() * 7) / 10;
        let mut train_events = Vec::new();
        let mut test_events = Vec::new();
        for (i, session) in self.dataset.sessions.values().enumerate() {
            let sink = if i < cut {
                &mut train_events
            } else {
                &mut test_events
            };
            sink.extend(session.events.iter().cloned());
        }
        (group_sessions(train_events), group_sessions(test_events))
    }
}

fn learner_rng(seed: u64, user_id: u64) -> ChaCha8Rng {
    // splitmix-style sub-seed so learners are independent and stable
    let mut z = seed ^ user_id.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    ChaCha8Rng::seed_from_u64(z ^ (z >> 31))
}

/// Samples a full dataset from the draw generative process. Fully
/// deterministic for a fixed config.
pub fn generate(config: &SyntheticConfig) -> SyntheticData {
    assert!(config.validate());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let coverage = |rng: &mut ChaCha8Rng| {
        rng.random_range(COVERAGE_RANGE.0..COVERAGE_RANGE.1)
    };
    // fragment catalogue: random distinct KC subsets with coverages
    let fragments: Vec<(FragmentId, Vec<KcAnnotationSlot>)> = (0..config.n_fragments)
        .map(|i| {
            let mut kc_ids: Vec<u64> = (0..config.n_kcs as u64).collect();
            kc_ids.shuffle(&mut rng);
            kc_ids.truncate(config.kcs_per_fragment);
            kc_ids.sort_unstable();
            let kcs = kc_ids
                .into_iter()
                .map(|kc_id| KcAnnotationSlot {
                    kc_id,
                    coverage: coverage(&mut rng),
                })
                .collect();
            (
                FragmentId {
                    lecture_id: i as u64,
                    video_id: 1,
                    part_id: 1,
                },
                kcs,
            )
        })
        .collect();
    let skill_prior = Normal::new(config.skill_mean, TRUE_SKILL_VARIANCE.sqrt()).unwrap();
    let mut events = Vec::new();
    let mut ground_truth = BTreeMap::new();
    for user_id in 0..config.n_learners as u64 {
        let mut rng = learner_rng(config.seed, user_id);
        let mut skills: BTreeMap<u64, f64> = BTreeMap::new();
        for step in 0..config.events_per_learner {
            let (fragment, kcs) = &fragments[rng.random_range(0..fragments.len())];
            let n_perf = 2 * kcs.len();
            let margin =
                draw_margin(config.true_draw_probability, config.true_beta, n_perf);
            let mut delta = 0.0;
            for slot in kcs {
                let skill = *skills
                    .entry(slot.kc_id)
                    .or_insert_with(|| skill_prior.sample(&mut rng));
                delta += skill - slot.coverage;
            }
            let perf_sd = (n_perf as f64).sqrt() * config.true_beta;
            let t = delta + Normal::new(0.0, perf_sd).unwrap().sample(&mut rng);
            events.push(EngagementEvent {
                fragment: *fragment,
                timestamp: step as u64,
                user_id,
                kcs: kcs.clone(),
                label: u8::from(t.abs() <= margin),
            });
        }
        ground_truth.insert(user_id, skills);
    }
    SyntheticData {
        dataset: group_sessions(events),
        ground_truth,
    }
}

/// Analytic engagement probability of one generated event given the
/// ground truth; used as the Monte-Carlo oracle.
pub fn analytic_draw_probability(
    data: &SyntheticData,
    event: &EngagementEvent,
    beta: f64,
    draw_probability: f64,
) -> f64 {
    use crate::learners::gaussian::cdf;
    let truth = &data.ground_truth[&event.user_id];
    let delta: f64 = event
        .kcs
        .iter()
        .map(|s| truth[&s.kc_id] - s.coverage)
        .sum();
    let n_perf = 2 * event.kcs.len();
    let margin = draw_margin(draw_probability, beta, n_perf);
    let c = (n_perf as f64).sqrt() * beta;
    cdf((margin - delta) / c) - cdf((-margin - delta) / c)
}
