//! Per-round reward interventions.
//!
//! An [`Intervention`] maps the round's post-penalty rewards to new rewards
//! over the same agent ids. Interventions only see the current round; prior
//! rounds are available read-only through [`RoundContext::history`].

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{AgentState, GroupLabel, SimulationConfig, Strategy};
use crate::engine::{Action, RoundRecord};
use crate::metrics::{self, BiasReport, FairnessMetric, OutcomeTable};

pub type RewardMap = BTreeMap<usize, f64>;

/// Smallest reward an efficiency penalty can leave behind.
pub const EFFICIENCY_PENALTY_FLOOR: f64 = 0.01;

/// Margin below the penalty threshold that an adversarial agent reports.
pub const MISREPORT_MARGIN: f64 = 0.01;

#[derive(Debug, Error, PartialEq)]
pub enum InterventionError {
    #[error("agent {0} has a reward but no group (or vice versa)")]
    MissingId(usize),
    #[error("no compliance entry for agent {0}")]
    MissingCompliance(usize),
    #[error("group `{0}` is empty")]
    EmptyGroup(GroupLabel),
    #[error("expected exactly two groups, found {0}")]
    GroupCount(usize),
    #[error("agent {0} is honest; only adversarial agents misreport")]
    NotAdversarial(usize),
    #[error(transparent)]
    Metrics(#[from] metrics::MetricsError),
}

pub type Result<T> = std::result::Result<T, InterventionError>;

/// Inputs to one intervention step.
#[derive(Debug, Clone)]
pub struct RoundContext<'a> {
    /// Post-penalty rewards.
    pub rewards: RewardMap,
    pub groups: BTreeMap<usize, GroupLabel>,
    pub round: usize,
    pub history: &'a [RoundRecord],
    /// Actions taken this round. May be empty for contexts built by hand.
    pub actions: BTreeMap<usize, Action>,
    /// Whether the bias penalty was applied this round.
    pub penalized: BTreeMap<usize, bool>,
}

impl<'a> RoundContext<'a> {
    /// Context with only rewards and groups; the key sets must match.
    pub fn new(
        rewards: RewardMap,
        groups: BTreeMap<usize, GroupLabel>,
        round: usize,
    ) -> Result<Self> {
        if let Some(id) = rewards
            .keys()
            .find(|id| !groups.contains_key(id))
            .or_else(|| groups.keys().find(|id| !rewards.contains_key(id)))
        {
            return Err(InterventionError::MissingId(*id));
        }
        Ok(Self {
            rewards,
            groups,
            round,
            history: &[],
            actions: BTreeMap::new(),
            penalized: BTreeMap::new(),
        })
    }

    pub fn with_rewards(&self, rewards: RewardMap) -> Self {
        Self {
            rewards,
            ..self.clone()
        }
    }

    /// Agent ids per group, ascending.
    pub fn members(&self) -> BTreeMap<&GroupLabel, Vec<usize>> {
        let mut m: BTreeMap<&GroupLabel, Vec<usize>> = BTreeMap::new();
        for (id, g) in &self.groups {
            m.entry(g).or_default().push(*id);
        }
        m
    }

    fn reward(&self, id: usize) -> Result<f64> {
        self.rewards
            .get(&id)
            .copied()
            .ok_or(InterventionError::MissingId(id))
    }
}

pub trait Intervention {
    fn name(&self) -> &str;
    fn apply(&self, ctx: &RoundContext<'_>) -> Result<RewardMap>;
}

/// Median with the even-count convention of averaging the two middle values.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[mid]
    } else {
        (v[mid - 1] + v[mid]) / 2.0
    })
}

/// Replaces every agent's reward with its group's median reward.
pub fn demographic_parity_median(ctx: &RoundContext<'_>) -> Result<RewardMap> {
    let mut out = RewardMap::new();
    for (group, ids) in ctx.members() {
        let values = ids
            .iter()
            .map(|&id| ctx.reward(id))
            .collect::<Result<Vec<_>>>()?;
        let m = median(&values).ok_or_else(|| InterventionError::EmptyGroup(group.clone()))?;
        out.extend(ids.iter().map(|&id| (id, m)));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IncentiveParams {
    /// Added to the reward of every compliant agent.
    pub fairness_bonus: f64,
    /// Subtracted from every agent when the round total falls short.
    pub efficiency_penalty: f64,
    /// Round-total reward below which the efficiency penalty triggers.
    pub efficiency_floor: f64,
}

impl Default for IncentiveParams {
    fn default() -> Self {
        Self {
            fairness_bonus: 1.0,
            efficiency_penalty: 2.0,
            efficiency_floor: 0.0,
        }
    }
}

/// Fairness bonus for compliant agents, then a collective efficiency penalty
/// if the pre-adjustment round total is below `efficiency_floor`.
pub fn incentive_adjustment(
    ctx: &RoundContext<'_>,
    params: &IncentiveParams,
    compliance: &BTreeMap<usize, bool>,
) -> Result<RewardMap> {
    let total: f64 = ctx.rewards.values().sum();
    let short = total < params.efficiency_floor;
    ctx.rewards
        .iter()
        .map(|(&id, &r)| {
            let compliant = *compliance
                .get(&id)
                .ok_or(InterventionError::MissingCompliance(id))?;
            let mut v = r;
            if compliant {
                v += params.fairness_bonus;
            }
            if short {
                v = (v - params.efficiency_penalty).max(EFFICIENCY_PENALTY_FLOOR);
            }
            Ok((id, v))
        })
        .collect()
}

/// Zero-sum transfer that equalizes the two group totals when `report`
/// flags a violation: the advantaged group pays half the difference, split
/// evenly among its members, and the other group receives it, split evenly.
pub fn corrective_redistribution(ctx: &RoundContext<'_>, report: &BiasReport) -> Result<RewardMap> {
    let members = ctx.members();
    if members.len() != 2 {
        return Err(InterventionError::GroupCount(members.len()));
    }
    if !report.violated {
        return Ok(ctx.rewards.clone());
    }
    let mut groups = members
        .into_values()
        .map(|ids| {
            let total = ids.iter().map(|&id| ctx.reward(id)).sum::<Result<f64>>()?;
            Ok((total, ids))
        })
        .collect::<Result<Vec<_>>>()?;
    groups.sort_by(|a, b| b.0.total_cmp(&a.0));
    let (rich_total, rich) = &groups[0];
    let (poor_total, poor) = &groups[1];
    let transfer = (rich_total - poor_total) / 2.0;
    let mut out = ctx.rewards.clone();
    let pay = transfer / rich.len() as f64;
    let receive = transfer / poor.len() as f64;
    for id in rich {
        *out.get_mut(id).expect("member ids come from ctx") -= pay;
    }
    for id in poor {
        *out.get_mut(id).expect("member ids come from ctx") += receive;
    }
    Ok(out)
}

/// Bias an adversarial agent reports to the penalty check: just under the
/// threshold if its true bias would trigger the penalty, truthful otherwise.
pub fn adversarial_report(agent: &AgentState, threshold: f64) -> Result<f64> {
    if agent.strategy != Strategy::Adversarial {
        return Err(InterventionError::NotAdversarial(agent.id));
    }
    Ok(agent.bias.min(threshold - MISREPORT_MARGIN).max(0.0))
}

pub struct Identity;

impl Intervention for Identity {
    fn name(&self) -> &str {
        "identity"
    }

    fn apply(&self, ctx: &RoundContext<'_>) -> Result<RewardMap> {
        Ok(ctx.rewards.clone())
    }
}

pub struct MedianAdjustment;

impl Intervention for MedianAdjustment {
    fn name(&self) -> &str {
        "median"
    }

    fn apply(&self, ctx: &RoundContext<'_>) -> Result<RewardMap> {
        demographic_parity_median(ctx)
    }
}

/// [`incentive_adjustment`] with compliance meaning "did not trigger the
/// bias penalty this round". Agents with no penalty record count as compliant.
pub struct IncentiveAdjustment {
    pub params: IncentiveParams,
}

impl Intervention for IncentiveAdjustment {
    fn name(&self) -> &str {
        "incentive"
    }

    fn apply(&self, ctx: &RoundContext<'_>) -> Result<RewardMap> {
        let compliance = ctx
            .rewards
            .keys()
            .map(|id| (*id, !ctx.penalized.get(id).copied().unwrap_or(false)))
            .collect();
        incentive_adjustment(ctx, &self.params, &compliance)
    }
}

/// Detects a demographic-parity gap in cooperation rates and, if it exceeds
/// `threshold`, applies [`corrective_redistribution`].
pub struct Redistribution {
    pub threshold: f64,
}

impl Redistribution {
    pub fn cooperation_table(ctx: &RoundContext<'_>) -> Result<OutcomeTable> {
        let rows = ctx
            .groups
            .iter()
            .map(|(id, g)| {
                let coop = ctx.actions.get(id) == Some(&Action::Cooperate);
                (coop, true, g.as_str())
            })
            .collect::<Vec<_>>();
        Ok(OutcomeTable::from_triples(rows)?)
    }
}

impl Intervention for Redistribution {
    fn name(&self) -> &str {
        "redistribute"
    }

    fn apply(&self, ctx: &RoundContext<'_>) -> Result<RewardMap> {
        let table = Self::cooperation_table(ctx)?;
        let report =
            metrics::detect_bias(&table, FairnessMetric::DemographicParity, self.threshold)?;
        corrective_redistribution(ctx, &report)
    }
}

/// Interventions applied left to right.
pub struct Pipeline {
    stages: Vec<Box<dyn Intervention + Send + Sync>>,
}

impl Pipeline {
    pub fn stage_names(&self) -> Vec<&str> {
        self.stages.iter().map(|s| s.name()).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.stages.is_empty()
    }
}

pub fn compose(stages: Vec<Box<dyn Intervention + Send + Sync>>) -> Pipeline {
    Pipeline { stages }
}

impl Intervention for Pipeline {
    fn name(&self) -> &str {
        "pipeline"
    }

    fn apply(&self, ctx: &RoundContext<'_>) -> Result<RewardMap> {
        let mut rewards = ctx.rewards.clone();
        for stage in &self.stages {
            rewards = stage.apply(&ctx.with_rewards(rewards))?;
        }
        Ok(rewards)
    }
}

/// Names accepted by the `interventions` config key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InterventionKind {
    Median,
    Incentive,
    Redistribute,
}

impl InterventionKind {
    pub fn build(self, config: &SimulationConfig) -> Box<dyn Intervention + Send + Sync> {
        match self {
            InterventionKind::Median => Box::new(MedianAdjustment),
            InterventionKind::Incentive => Box::new(IncentiveAdjustment {
                params: config.incentive_params.unwrap_or_default(),
            }),
            InterventionKind::Redistribute => Box::new(Redistribution {
                threshold: config.redistribution_threshold,
            }),
        }
    }
}

impl fmt::Display for InterventionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InterventionKind::Median => "median",
            InterventionKind::Incentive => "incentive",
            InterventionKind::Redistribute => "redistribute",
        })
    }
}

impl FromStr for InterventionKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "median" => Ok(Self::Median),
            "incentive" => Ok(Self::Incentive),
            "redistribute" | "redistribution" => Ok(Self::Redistribute),
            _ => Err(format!("unknown intervention `{s}`")),
        }
    }
}

/// The configured fairness pipeline.
pub fn pipeline_for(config: &SimulationConfig) -> Pipeline {
    compose(
        config
            .interventions
            .iter()
            .map(|k| k.build(config))
            .collect(),
    )
}
