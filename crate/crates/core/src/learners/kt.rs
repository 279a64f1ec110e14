//! Online knowledge-tracing baseline with Bernoulli mastery skills and
//! learn/slip/guess dynamics.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data_model::EngagementEvent;
use crate::skills::BernoulliSkill;

use super::EngagementModel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KtParams {
    pub p_learn: f64,
    pub p_slip: f64,
    pub p_guess: f64,
    /// Prior mastery for unseen KCs.
    pub prior_mastery: f64,
}

impl Default for KtParams {
    fn default() -> Self {
        Self {
            p_learn: 0.1,
            p_slip: 0.1,
            p_guess: 0.2,
            prior_mastery: 0.0,
        }
    }
}

impl KtParams {
    pub fn validate(&self) -> bool {
        (0.0..=1.0).contains(&self.p_learn)
            && (0.0..1.0).contains(&self.p_slip)
            && (0.0..1.0).contains(&self.p_guess)
            && self.p_slip + self.p_guess < 1.0
            && (0.0..=1.0).contains(&self.prior_mastery)
    }
}

#[derive(Debug, Clone)]
pub struct KtModel {
    pub params: KtParams,
    pub mastery: BTreeMap<u64, BernoulliSkill>,
}

impl KtModel {
    pub fn new(params: KtParams) -> Self {
        assert!(params.validate());
        Self {
            params,
            mastery: BTreeMap::new(),
        }
    }

    fn pi(&self, kc_id: u64) -> f64 {
        self.mastery
            .get(&kc_id)
            .map_or(self.params.prior_mastery, |s| s.mastery)
    }

    /// P(engage) for one KC under the slip/guess observation model.
    fn p_correct(&self, kc_id: u64) -> f64 {
        let pi = self.pi(kc_id);
        pi * (1.0 - self.params.p_slip) + (1.0 - pi) * self.params.p_guess
    }
}

impl EngagementModel for KtModel {
    fn predict_proba(&self, event: &EngagementEvent) -> f64 {
        let sum: f64 = event.kc_ids().map(|kc| self.p_correct(kc)).sum();
        sum / event.kcs.len() as f64
    }

    fn fit(&mut self, event: &EngagementEvent) {
        let KtParams {
            p_learn,
            p_slip,
            p_guess,
            ..
        } = self.params;
        for kc in event.kc_ids() {
            let pi = self.pi(kc);
            // Bayes posterior given the observed label, then the
            // learning transition.
            let posterior = if event.engaged() {
                let num = pi * (1.0 - p_slip);
                let denom = num + (1.0 - pi) * p_guess;
                if denom > 0.0 {
                    num / denom
                } else {
                    pi
                }
            } else {
                let num = pi * p_slip;
                let denom = num + (1.0 - pi) * (1.0 - p_guess);
                if denom > 0.0 {
                    num / denom
                } else {
                    pi
                }
            };
            let next = (posterior + (1.0 - posterior) * p_learn).clamp(0.0, 1.0);
            self.mastery.insert(kc, BernoulliSkill::new(next));
        }
    }
}
