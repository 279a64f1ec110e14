//! The TrueLearn family: Interest (win/loss), Novelty (draw semantics)
//! and the INK ensemble combining the two.
//!
//! Each event is treated as a game between the learner's skill team over
//! the event's KCs and a content team whose performance is the summed
//! topic coverage. The team correction from the truncated-Gaussian
//! update is distributed over the member skills by variance share.

use serde::{Deserialize, Serialize};

use crate::data_model::EngagementEvent;
use crate::skills::{GaussianSkill, LearnerState, VARIANCE_FLOOR};

use super::gaussian::{cdf, draw_margin, outcome_corrections, Outcome};
use super::EngagementModel;

/// Hyperparameters shared by the Interest and Novelty models.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrueSkillParams {
    /// Performance noise per performance (beta).
    pub beta: f64,
    /// Dynamics noise added to each skill variance before an update (tau).
    pub tau: f64,
    pub draw_probability: f64,
    pub init_variance: f64,
    pub init_mean: f64,
    /// Multiplier on coverage when forming the content team performance.
    pub content_scale: f64,
}

impl TrueSkillParams {
    /// Published Interest hyperparameters.
    pub fn interest_default() -> Self {
        Self {
            beta: 8.83,
            tau: 0.0,
            draw_probability: 0.52,
            init_variance: 300.0,
            init_mean: 0.0,
            content_scale: 1.0,
        }
    }

    /// Published Novelty hyperparameters.
    pub fn novelty_default() -> Self {
        Self {
            beta: 0.42,
            tau: 0.0,
            draw_probability: 0.52,
            init_variance: 0.25,
            init_mean: 0.0,
            content_scale: 1.0,
        }
    }
}

/// Team view of one event: summed skill means/variances vs the content
/// performance, with one noisy performance per player on each side.
struct TeamView {
    mean: f64,
    variance: f64,
    content: f64,
    /// Total performance variance n * beta^2 with n = 2 |KCs|.
    perf_var: f64,
    n_performances: usize,
}

fn team_view(state: &LearnerState, params: &TrueSkillParams, event: &EngagementEvent) -> TeamView {
    let mut mean = 0.0;
    let mut variance = 0.0;
    let mut content = 0.0;
    for slot in &event.kcs {
        let skill = state
            .skills
            .get(&slot.kc_id)
            .copied()
            .unwrap_or(GaussianSkill {
                mean: params.init_mean,
                variance: params.init_variance,
            });
        mean += skill.mean;
        variance += skill.variance + params.tau * params.tau;
        content += slot.coverage * params.content_scale;
    }
    let n_performances = 2 * event.kcs.len();
    TeamView {
        mean,
        variance,
        content,
        perf_var: n_performances as f64 * params.beta * params.beta,
        n_performances,
    }
}

/// Applies the team-level (v, w) correction to each member skill by its
/// variance share. `c` is the total standard deviation of the
/// performance difference.
fn apply_team_update(
    state: &mut LearnerState,
    params: &TrueSkillParams,
    event: &EngagementEvent,
    v: f64,
    w: f64,
    c: f64,
) {
    let c2 = c * c;
    for slot in &event.kcs {
        let prior = state.get_or_init_skill(slot.kc_id, params.init_mean, params.init_variance);
        let var = prior.variance + params.tau * params.tau;
        let mean = prior.mean + var / c * v;
        let variance = (var * (1.0 - var / c2 * w)).max(VARIANCE_FLOOR);
        state.set_skill(slot.kc_id, GaussianSkill { mean, variance });
    }
}

/// TrueLearn Interest: engagement is a win for the learner's interest
/// team over the content team, non-engagement a loss.
#[derive(Debug, Clone)]
pub struct InterestModel {
    pub state: LearnerState,
    pub params: TrueSkillParams,
}

impl InterestModel {
    pub fn new(user_id: u64, params: TrueSkillParams) -> Self {
        Self {
            state: LearnerState::new(user_id),
            params,
        }
    }
}

impl EngagementModel for InterestModel {
    fn predict_proba(&self, event: &EngagementEvent) -> f64 {
        let team = team_view(&self.state, &self.params, event);
        let c = (team.variance + team.perf_var).sqrt();
        cdf((team.mean - team.content) / c)
    }

    fn fit(&mut self, event: &EngagementEvent) {
        let team = team_view(&self.state, &self.params, event);
        let c = (team.variance + team.perf_var).sqrt();
        let margin = draw_margin(
            self.params.draw_probability,
            self.params.beta,
            team.n_performances,
        );
        let outcome = if event.engaged() {
            Outcome::Win
        } else {
            Outcome::Loss
        };
        let (v, w, underflow) =
            outcome_corrections((team.mean - team.content) / c, margin / c, outcome);
        if !underflow {
            apply_team_update(&mut self.state, &self.params, event, v, w, c);
        }
        self.state.record_event(event.kc_ids(), event.engaged());
    }
}

/// TrueLearn Novelty: engagement is a draw between learner knowledge and
/// content depth; non-engagement is a decisive win for whichever side
/// currently looks stronger (content on a tie).
#[derive(Debug, Clone)]
pub struct NoveltyModel {
    pub state: LearnerState,
    pub params: TrueSkillParams,
}

impl NoveltyModel {
    pub fn new(user_id: u64, params: TrueSkillParams) -> Self {
        Self {
            state: LearnerState::new(user_id),
            params,
        }
    }
}

impl EngagementModel for NoveltyModel {
    fn predict_proba(&self, event: &EngagementEvent) -> f64 {
        let team = team_view(&self.state, &self.params, event);
        let c = (team.variance + team.perf_var).sqrt();
        let margin = draw_margin(
            self.params.draw_probability,
            self.params.beta,
            team.n_performances,
        );
        let delta = team.mean - team.content;
        let p = cdf((margin - delta) / c) - cdf((-margin - delta) / c);
        p.clamp(f64::MIN_POSITIVE, 1.0 - 1e-15)
    }

    fn fit(&mut self, event: &EngagementEvent) {
        let team = team_view(&self.state, &self.params, event);
        let c = (team.variance + team.perf_var).sqrt();
        let margin = draw_margin(
            self.params.draw_probability,
            self.params.beta,
            team.n_performances,
        );
        let delta = team.mean - team.content;
        let outcome = if event.engaged() {
            Outcome::Draw
        } else if delta > 0.0 {
            Outcome::Win
        } else {
            Outcome::Loss
        };
        let (v, w, underflow) = outcome_corrections(delta / c, margin / c, outcome);
        if !underflow {
            apply_team_update(&mut self.state, &self.params, event, v, w, c);
        }
        self.state.record_event(event.kc_ids(), event.engaged());
    }
}

/// INK ensemble knobs: exponentiated-gradient rate and greedy gating.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InkParams {
    pub greedy: bool,
    /// Weight-update rate in [0, 1]; zero freezes the weights.
    pub tau: f64,
    pub initial_weights: (f64, f64),
}

impl Default for InkParams {
    fn default() -> Self {
        Self {
            greedy: true,
            tau: 0.5,
            initial_weights: (1.0, 1.0),
        }
    }
}

/// TrueLearn INK: a weighted opinion pool over the Interest and Novelty
/// probabilities with multiplicative weight updates.
#[derive(Debug, Clone)]
pub struct InkModel {
    pub interest: InterestModel,
    pub novelty: NoveltyModel,
    pub params: InkParams,
    pub weight_interest: f64,
    pub weight_novelty: f64,
}

impl InkModel {
    pub fn new(
        user_id: u64,
        interest_params: TrueSkillParams,
        novelty_params: TrueSkillParams,
        params: InkParams,
    ) -> Self {
        Self {
            interest: InterestModel::new(user_id, interest_params),
            novelty: NoveltyModel::new(user_id, novelty_params),
            weight_interest: params.initial_weights.0,
            weight_novelty: params.initial_weights.1,
            params,
        }
    }

    fn pool(&self, p_interest: f64, p_novelty: f64) -> f64 {
        (self.weight_interest * p_interest + self.weight_novelty * p_novelty)
            / (self.weight_interest + self.weight_novelty)
    }
}

impl EngagementModel for InkModel {
    fn predict_proba(&self, event: &EngagementEvent) -> f64 {
        self.pool(
            self.interest.predict_proba(event),
            self.novelty.predict_proba(event),
        )
    }

    fn fit(&mut self, event: &EngagementEvent) {
        let p_interest = self.interest.predict_proba(event);
        let p_novelty = self.novelty.predict_proba(event);
        let ensemble = self.pool(p_interest, p_novelty);
        let label = f64::from(event.label);
        let wrong = u8::from(ensemble >= 0.5) != event.label;
        if !self.params.greedy || wrong {
            self.weight_interest *= (-self.params.tau * (p_interest - label).abs()).exp();
            self.weight_novelty *= (-self.params.tau * (p_novelty - label).abs()).exp();
        }
        self.interest.fit(event);
        self.novelty.fit(event);
    }
}
