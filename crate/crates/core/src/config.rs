//! Flat `key = value` model configuration.
//!
//! Grammar: one `key = value` pair per line; `#` starts a comment; blank
//! lines ignored. Keys are dotted paths (`novelty.beta`); the bare keys
//! `beta`, `tau`, `draw_probability`, `init_variance`, `init_mean` and
//! `content_scale` apply to whichever single model is selected. Unknown
//! keys are errors.

use thiserror::Error;

use crate::learners::{InkParams, KtParams, ModelKind, TrueSkillParams};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {0}: expected `key = value`")]
    Syntax(usize),
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("key `{key}`: invalid value `{value}`")]
    InvalidValue { key: String, value: String },
    #[error("unknown model `{0}` (valid: {1})")]
    UnknownModel(String, String),
    #[error("bare key `{0}` is ambiguous for model `{1}`")]
    AmbiguousBareKey(String, String),
}

/// Full model configuration for one evaluation run.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub model: ModelKind,
    pub interest: TrueSkillParams,
    pub novelty: TrueSkillParams,
    pub ink: InkParams,
    pub kt: KtParams,
    /// Decision threshold for the similarity and TF baselines.
    pub threshold: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            model: ModelKind::Novelty,
            interest: TrueSkillParams::interest_default(),
            novelty: TrueSkillParams::novelty_default(),
            ink: InkParams::default(),
            kt: KtParams::default(),
            threshold: 0.5,
        }
    }
}

fn parse_f64(key: &str, value: &str) -> Result<f64, ConfigError> {
    value.parse().map_err(|_| ConfigError::InvalidValue {
        key: key.to_string(),
        value: value.to_string(),
    })
}

fn parse_bool(key: &str, value: &str) -> Result<bool, ConfigError> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "1" => Ok(true),
        "false" | "0" => Ok(false),
        _ => Err(ConfigError::InvalidValue {
            key: key.to_string(),
            value: value.to_string(),
        }),
    }
}

fn set_trueskill(
    params: &mut TrueSkillParams,
    field: &str,
    key: &str,
    value: &str,
) -> Result<(), ConfigError> {
    let v = parse_f64(key, value)?;
    match field {
        "beta" => params.beta = v,
        "tau" => params.tau = v,
        "draw_probability" => params.draw_probability = v,
        "init_variance" => params.init_variance = v,
        "init_mean" => params.init_mean = v,
        "content_scale" => params.content_scale = v,
        _ => return Err(ConfigError::UnknownKey(key.to_string())),
    }
    Ok(())
}

const TRUESKILL_FIELDS: [&str; 6] = [
    "beta",
    "tau",
    "draw_probability",
    "init_variance",
    "init_mean",
    "content_scale",
];

impl ModelConfig {
    /// Applies one key/value pair.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let value = value.trim().trim_matches('"');
        match key {
            "model" => {
                self.model = ModelKind::parse(value).ok_or_else(|| {
                    ConfigError::UnknownModel(value.to_string(), Self::valid_models())
                })?;
            }
            "threshold" => self.threshold = parse_f64(key, value)?,
            "ink.greedy" => self.ink.greedy = parse_bool(key, value)?,
            "ink.tau" => self.ink.tau = parse_f64(key, value)?,
            "kt.p_learn" => self.kt.p_learn = parse_f64(key, value)?,
            "kt.p_slip" => self.kt.p_slip = parse_f64(key, value)?,
            "kt.p_guess" => self.kt.p_guess = parse_f64(key, value)?,
            "kt.prior_mastery" => self.kt.prior_mastery = parse_f64(key, value)?,
            _ if TRUESKILL_FIELDS.contains(&key) => match self.model {
                ModelKind::Interest => set_trueskill(&mut self.interest, key, key, value)?,
                ModelKind::Novelty => set_trueskill(&mut self.novelty, key, key, value)?,
                other => {
                    return Err(ConfigError::AmbiguousBareKey(
                        key.to_string(),
                        other.name().to_string(),
                    ))
                }
            },
            _ => match key.split_once('.') {
                Some(("interest", field)) => {
                    set_trueskill(&mut self.interest, field, key, value)?
                }
                Some(("novelty", field)) => {
                    set_trueskill(&mut self.novelty, field, key, value)?
                }
                _ => return Err(ConfigError::UnknownKey(key.to_string())),
            },
        }
        Ok(())
    }

    /// Parses a whole config file. `model` lines are applied first so
    /// that bare TrueSkill keys resolve against the selected model.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut config = Self::default();
        let mut pairs = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(ConfigError::Syntax(i + 1))?;
            pairs.push((key.trim().to_string(), value.trim().to_string()));
        }
        pairs.sort_by_key(|(k, _)| k != "model");
        for (key, value) in &pairs {
            config.set(key, value)?;
        }
        Ok(config)
    }

    /// Renders the configuration back to the flat format.
    pub fn render(&self) -> String {
        let ts = |prefix: &str, p: &TrueSkillParams| {
            format!(
                "{prefix}.beta = {}\n{prefix}.tau = {}\n{prefix}.draw_probability = {}\n\
                 {prefix}.init_variance = {}\n{prefix}.init_mean = {}\n{prefix}.content_scale = {}\n",
                p.beta, p.tau, p.draw_probability, p.init_variance, p.init_mean, p.content_scale
            )
        };
        format!(
            "model = {}\nthreshold = {}\n{}{}ink.greedy = {}\nink.tau = {}\n\
             kt.p_learn = {}\nkt.p_slip = {}\nkt.p_guess = {}\nkt.prior_mastery = {}\n",
            self.model.name(),
            self.threshold,
            ts("interest", &self.interest),
            ts("novelty", &self.novelty),
            self.ink.greedy,
            self.ink.tau,
            self.kt.p_learn,
            self.kt.p_slip,
            self.kt.p_guess,
            self.kt.prior_mastery,
        )
    }

    pub fn valid_models() -> String {
        ModelKind::ALL
            .iter()
            .map(|k| k.name())
            .collect::<Vec<_>>()
            .join(", ")
    }
}
