//! Domain types and experiment configuration.
//!
//! Configuration files are flat `key = value` text, one pair per line, with
//! `#` starting a comment. Keys are the [`SimulationConfig`] field names;
//! incentive parameters use dotted keys (`incentive_params.fairness_bonus`).
//! Unset keys keep their defaults.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::interventions::{IncentiveParams, InterventionKind};

/// Value of the sensitive attribute an agent or observation belongs to.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GroupLabel(String);

impl GroupLabel {
    pub fn new(label: impl Into<String>) -> Self {
        Self(label.into())
    }

    pub fn a() -> Self {
        Self::new("A")
    }

    pub fn b() -> Self {
        Self::new("B")
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for GroupLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for GroupLabel {
    fn from(s: &str) -> Self {
        Self::new(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Strategy {
    Honest,
    /// Misreports its bias to the penalty check.
    Adversarial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub id: usize,
    pub group: GroupLabel,
    /// Behavioural bias in `[0, 1]`; higher means more likely to compete.
    pub bias: f64,
    /// Influence weight in the system-bias aggregate.
    pub weight: f64,
    pub strategy: Strategy,
    pub cumulative_reward: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentState {
    /// Number of completed rounds.
    pub round: usize,
    /// Shared resource level in `[0, 1]`.
    pub resource: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub n_agents: usize,
    pub n_rounds: usize,
    pub seed: u64,
    pub fairness_enabled: bool,
    /// Gates the bias penalty.
    pub propagation_enabled: bool,
    pub reward_cooperate: f64,
    pub reward_compete: f64,
    pub bias_penalty: f64,
    pub bias_penalty_threshold: f64,
    pub bias_init_max: f64,
    pub resource_threshold: f64,
    pub coop_base_high: f64,
    pub coop_base_low: f64,
    pub adversarial_ids: BTreeSet<usize>,
    pub incentive_params: Option<IncentiveParams>,
    /// Fairness pipeline applied when `fairness_enabled`, in order.
    pub interventions: Vec<InterventionKind>,
    /// Rate of the synchronous bias contraction applied after every round.
    /// Zero disables the dynamics.
    pub propagation_rate: f64,
    /// Demographic-parity threshold on cooperation rates that triggers
    /// corrective redistribution.
    pub redistribution_threshold: f64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            n_agents: 10,
            n_rounds: 50,
            seed: 42,
            fairness_enabled: true,
            propagation_enabled: true,
            reward_cooperate: 10.0,
            reward_compete: 5.0,
            bias_penalty: 3.0,
            bias_penalty_threshold: 0.2,
            bias_init_max: 0.3,
            resource_threshold: 0.5,
            coop_base_high: 0.8,
            coop_base_low: 0.3,
            adversarial_ids: BTreeSet::new(),
            incentive_params: None,
            interventions: vec![InterventionKind::Median],
            propagation_rate: 0.0,
            redistribution_threshold: 0.1,
        }
    }
}

/// One violated configuration constraint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub field: &'static str,
    pub actual: String,
    /// Human-readable constraint, e.g. `n_agents ≥ 2`.
    pub constraint: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: got {}, requires {}",
            self.field, self.actual, self.constraint
        )
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("invalid configuration: {}", join_violations(.0))]
    Invalid(Vec<Violation>),
    #[error("line {line}: unknown config key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

fn join_violations(v: &[Violation]) -> String {
    v.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

impl ConfigError {
    pub fn violations(&self) -> &[Violation] {
        match self {
            ConfigError::Invalid(v) => v,
            _ => &[],
        }
    }
}

struct Checker {
    violations: Vec<Violation>,
}

impl Checker {
    fn check(
        &mut self,
        ok: bool,
        field: &'static str,
        actual: impl fmt::Display,
        constraint: String,
    ) {
        if !ok {
            self.violations.push(Violation {
                field,
                actual: actual.to_string(),
                constraint,
            });
        }
    }

    fn non_negative(&mut self, field: &'static str, v: f64) {
        self.check(v.is_finite() && v >= 0.0, field, v, format!("{field} ≥ 0"));
    }

    fn unit(&mut self, field: &'static str, v: f64) {
        self.check(
            (0.0..=1.0).contains(&v),
            field,
            v,
            format!("{field} ∈ [0,1]"),
        );
    }
}

impl SimulationConfig {
    /// Returns the config unchanged when every constraint holds, otherwise
    /// every violated constraint.
    pub fn validate(self) -> Result<Self, ConfigError> {
        let mut c = Checker {
            violations: Vec::new(),
        };
        c.check(
            self.n_agents >= 2,
            "n_agents",
            self.n_agents,
            "n_agents ≥ 2".into(),
        );
        c.check(
            self.n_rounds >= 1,
            "n_rounds",
            self.n_rounds,
            "n_rounds ≥ 1".into(),
        );
        c.non_negative("reward_cooperate", self.reward_cooperate);
        c.non_negative("reward_compete", self.reward_compete);
        c.non_negative("bias_penalty", self.bias_penalty);
        c.unit("bias_penalty_threshold", self.bias_penalty_threshold);
        c.unit("bias_init_max", self.bias_init_max);
        c.unit("resource_threshold", self.resource_threshold);
        c.unit("coop_base_high", self.coop_base_high);
        c.unit("coop_base_low", self.coop_base_low);
        c.unit("propagation_rate", self.propagation_rate);
        c.unit("redistribution_threshold", self.redistribution_threshold);
        c.check(
            self.coop_base_high >= self.coop_base_low,
            "coop_base_high",
            format!("{} < {}", self.coop_base_high, self.coop_base_low),
            "coop_base_high ≥ coop_base_low".into(),
        );
        if let Some(out_of_range) = self.adversarial_ids.iter().find(|&&id| id >= self.n_agents) {
            c.check(
                false,
                "adversarial_ids",
                out_of_range,
                format!("every id < n_agents ({})", self.n_agents),
            );
        }
        if let Some(p) = &self.incentive_params {
            c.non_negative("incentive_params.fairness_bonus", p.fairness_bonus);
            c.non_negative("incentive_params.efficiency_penalty", p.efficiency_penalty);
            c.non_negative("incentive_params.efficiency_floor", p.efficiency_floor);
        }
        if c.violations.is_empty() {
            Ok(self)
        } else {
            Err(ConfigError::Invalid(c.violations))
        }
    }

    /// Parses config text on top of the defaults. Does not validate.
    pub fn from_config_str(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| ConfigError::Parse {
                line,
                message: format!("expected `key = value`, got `{content}`"),
            })?;
            cfg.set(key.trim(), value.trim()).map_err(|e| match e {
                SetError::UnknownKey => ConfigError::UnknownKey {
                    line,
                    key: key.trim().to_string(),
                },
                SetError::BadValue(message) => ConfigError::Parse { line, message },
            })?;
        }
        Ok(cfg)
    }

    /// Assigns one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), SetError> {
        match key {
            "n_agents" => self.n_agents = parse(key, value)?,
            "n_rounds" => self.n_rounds = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "fairness_enabled" => self.fairness_enabled = parse_bool(key, value)?,
            "propagation_enabled" => self.propagation_enabled = parse_bool(key, value)?,
            "reward_cooperate" => self.reward_cooperate = parse(key, value)?,
            "reward_compete" => self.reward_compete = parse(key, value)?,
            "bias_penalty" => self.bias_penalty = parse(key, value)?,
            "bias_penalty_threshold" => self.bias_penalty_threshold = parse(key, value)?,
            "bias_init_max" => self.bias_init_max = parse(key, value)?,
            "resource_threshold" => self.resource_threshold = parse(key, value)?,
            "coop_base_high" => self.coop_base_high = parse(key, value)?,
            "coop_base_low" => self.coop_base_low = parse(key, value)?,
            "propagation_rate" => self.propagation_rate = parse(key, value)?,
            "redistribution_threshold" => self.redistribution_threshold = parse(key, value)?,
            "adversarial_ids" => {
                self.adversarial_ids = split_list(value)
                    .map(|v| parse(key, v))
                    .collect::<Result<_, _>>()?;
            }
            "interventions" => {
                self.interventions = split_list(value)
                    .map(|v| {
                        v.parse::<InterventionKind>()
                            .map_err(|e| SetError::BadValue(format!("interventions: {e}")))
                    })
                    .collect::<Result<_, _>>()?;
            }
            "incentive_params.fairness_bonus" => {
                self.incentive_params_mut().fairness_bonus = parse(key, value)?
            }
            "incentive_params.efficiency_penalty" => {
                self.incentive_params_mut().efficiency_penalty = parse(key, value)?
            }
            "incentive_params.efficiency_floor" => {
                self.incentive_params_mut().efficiency_floor = parse(key, value)?
            }
            _ => return Err(SetError::UnknownKey),
        }
        Ok(())
    }

    fn incentive_params_mut(&mut self) -> &mut IncentiveParams {
        self.incentive_params
            .get_or_insert_with(IncentiveParams::default)
    }

    /// Serializes every key in the config-file format. Parsing the output
    /// yields an equal config.
    pub fn to_config_string(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        };
        put("n_agents", self.n_agents.to_string());
        put("n_rounds", self.n_rounds.to_string());
        put("seed", self.seed.to_string());
        put("fairness_enabled", self.fairness_enabled.to_string());
        put("propagation_enabled", self.propagation_enabled.to_string());
        put("reward_cooperate", self.reward_cooperate.to_string());
        put("reward_compete", self.reward_compete.to_string());
        put("bias_penalty", self.bias_penalty.to_string());
        put(
            "bias_penalty_threshold",
            self.bias_penalty_threshold.to_string(),
        );
        put("bias_init_max", self.bias_init_max.to_string());
        put("resource_threshold", self.resource_threshold.to_string());
        put("coop_base_high", self.coop_base_high.to_string());
        put("coop_base_low", self.coop_base_low.to_string());
        put(
            "adversarial_ids",
            self.adversarial_ids
                .iter()
                .map(ToString::to_string)
                .collect::<Vec<_>>()
                .join(","),
        );
        put(
            "interventions",
            self.interventions
                .iter()
                .map(ToString::to_string)
                .collect::<Vec<_>>()
                .join(","),
        );
        put("propagation_rate", self.propagation_rate.to_string());
        put(
            "redistribution_threshold",
            self.redistribution_threshold.to_string(),
        );
        if let Some(p) = &self.incentive_params {
            put(
                "incentive_params.fairness_bonus",
                p.fairness_bonus.to_string(),
            );
            put(
                "incentive_params.efficiency_penalty",
                p.efficiency_penalty.to_string(),
            );
            put(
                "incentive_params.efficiency_floor",
                p.efficiency_floor.to_string(),
            );
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SetError {
    UnknownKey,
    BadValue(String),
}

impl fmt::Display for SetError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SetError::UnknownKey => f.write_str("unknown key"),
            SetError::BadValue(m) => f.write_str(m),
        }
    }
}

fn split_list(value: &str) -> impl Iterator<Item = &str> {
    value.split(',').map(str::trim).filter(|s| !s.is_empty())
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, SetError>
where
    T::Err: fmt::Display,
{
    value
        .parse()
        .map_err(|e| SetError::BadValue(format!("{key}: cannot parse `{value}`: {e}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool, SetError> {
    match value {
        "true" | "on" | "yes" | "1" => Ok(true),
        "false" | "off" | "no" | "0" => Ok(false),
        _ => Err(SetError::BadValue(format!(
            "{key}: expected true/false or on/off, got `{value}`"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        let cfg = SimulationConfig::default();
        assert_eq!(cfg.n_agents, 10);
        assert_eq!(cfg.n_rounds, 50);
        assert_eq!(cfg.reward_cooperate, 10.0);
        assert_eq!(cfg.reward_compete, 5.0);
        assert_eq!(cfg.bias_penalty, 3.0);
        assert_eq!(cfg.bias_penalty_threshold, 0.2);
        assert_eq!(cfg.bias_init_max, 0.3);
        assert_eq!(cfg.resource_threshold, 0.5);
        assert_eq!(cfg.clone().validate(), Ok(cfg));
    }

    #[test]
    fn single_agent_is_rejected() {
        let cfg = SimulationConfig {
            n_agents: 1,
            ..Default::default()
        };
        let err = cfg.validate().unwrap_err();
        let v = err.violations();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].field, "n_agents");
        assert_eq!(v[0].constraint, "n_agents ≥ 2");
        assert_eq!(v[0].actual, "1");
    }

    #[test]
    fn inverted_cooperation_bases_are_rejected() {
        let cfg = SimulationConfig {
            coop_base_high: 0.3,
            coop_base_low: 0.8,
            ..Default::default()
        };
        let err = cfg.validate().unwrap_err();
        assert!(err
            .violations()
            .iter()
            .any(|v| v.constraint == "coop_base_high ≥ coop_base_low"));
    }

    #[test]
    fn every_violation_is_reported() {
        let cfg = SimulationConfig {
            n_agents: 0,
            n_rounds: 0,
            reward_compete: -1.0,
            resource_threshold: 1.5,
            ..Default::default()
        };
        let fields: Vec<_> = cfg
            .validate()
            .unwrap_err()
            .violations()
            .iter()
            .map(|v| v.field)
            .collect();
        assert_eq!(
            fields,
            [
                "n_agents",
                "n_rounds",
                "reward_compete",
                "resource_threshold"
            ]
        );
    }

    #[test]
    fn adversarial_id_out_of_range() {
        let cfg = SimulationConfig {
            adversarial_ids: [3, 12].into_iter().collect(),
            ..Default::default()
        };
        let err = cfg.validate().unwrap_err();
        assert_eq!(err.violations()[0].field, "adversarial_ids");
        assert_eq!(err.violations()[0].actual, "12");
    }

    #[test]
    fn parses_config_text() {
        let text = "\
# defaults with two adversaries
n_agents = 12
fairness_enabled = off   # trailing comment
adversarial_ids = 1, 4
interventions = median,incentive
incentive_params.fairness_bonus = 2.5
";
        let cfg = SimulationConfig::from_config_str(text).unwrap();
        assert_eq!(cfg.n_agents, 12);
        assert!(!cfg.fairness_enabled);
        assert_eq!(cfg.adversarial_ids, [1, 4].into_iter().collect());
        assert_eq!(
            cfg.interventions,
            vec![InterventionKind::Median, InterventionKind::Incentive]
        );
        let p = cfg.incentive_params.unwrap();
        assert_eq!(p.fairness_bonus, 2.5);
        assert_eq!(
            p.efficiency_penalty,
            IncentiveParams::default().efficiency_penalty
        );
    }

    #[test]
    fn unknown_key_names_key_and_line() {
        let err = SimulationConfig::from_config_str("n_agents = 3\nfoo = 1\n").unwrap_err();
        assert_eq!(
            err,
            ConfigError::UnknownKey {
                line: 2,
                key: "foo".into()
            }
        );
        assert!(err.to_string().contains("foo"));
    }

    #[test]
    fn malformed_values_are_parse_errors() {
        assert!(matches!(
            SimulationConfig::from_config_str("n_agents = ten"),
            Err(ConfigError::Parse { line: 1, .. })
        ));
        assert!(matches!(
            SimulationConfig::from_config_str("\n\njust text"),
            Err(ConfigError::Parse { line: 3, .. })
        ));
        assert!(matches!(
            SimulationConfig::from_config_str("interventions = median,bogus"),
            Err(ConfigError::Parse { .. })
        ));
    }

    #[test]
    fn config_text_round_trips() {
        let cfg = SimulationConfig {
            seed: u64::MAX,
            bias_init_max: 0.1 + 0.2,
            adversarial_ids: [0, 7].into_iter().collect(),
            incentive_params: Some(IncentiveParams {
                fairness_bonus: 1.0 / 3.0,
                efficiency_penalty: 2.0,
                efficiency_floor: 40.0,
            }),
            interventions: vec![InterventionKind::Median, InterventionKind::Redistribute],
            ..Default::default()
        };
        let text = cfg.to_config_string();
        assert_eq!(SimulationConfig::from_config_str(&text).unwrap(), cfg);
    }
}
