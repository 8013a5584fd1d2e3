//! Discrete-round simulation loop.
//!
//! Each round: one shared resource draw; then, in ascending id order, every
//! agent draws its action and receives a reward (less the bias penalty when
//! it applies); then, with fairness enabled, the configured intervention
//! pipeline rewrites the round's rewards; finally rewards are accumulated.
//! All randomness comes from one [`RandomStream`], so a run is a pure
//! function of its config (seed included).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{
    AgentState, ConfigError, EnvironmentState, GroupLabel, SimulationConfig, Strategy,
};
use crate::interventions::{
    self, Intervention, InterventionError, Pipeline, RewardMap, RoundContext,
};
use crate::metrics::{self, MetricsError};
use crate::population::init_population;
use crate::rng::RandomStream;

#[derive(Debug, Error, PartialEq)]
pub enum EngineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("intervention failed: {0}")]
    Intervention(#[from] InterventionError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("all {0} rounds already run")]
    Finished(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    Cooperate,
    Compete,
}

impl Action {
    pub fn as_str(self) -> &'static str {
        match self {
            Action::Cooperate => "cooperate",
            Action::Compete => "compete",
        }
    }
}

impl std::str::FromStr for Action {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cooperate" => Ok(Action::Cooperate),
            "compete" => Ok(Action::Compete),
            _ => Err(format!("unknown action `{s}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentRound {
    pub id: usize,
    pub group: GroupLabel,
    pub action: Action,
    /// Base reward for the action, less the bias penalty if applied.
    pub raw_reward: f64,
    pub penalty_applied: bool,
    /// Reward after the intervention pipeline.
    pub adjusted_reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    /// 1-based round number.
    pub round: usize,
    pub resource: f64,
    pub per_agent: Vec<AgentRound>,
    /// Median post-penalty reward per group; present iff fairness is enabled.
    pub group_medians: Option<BTreeMap<GroupLabel, f64>>,
    /// Group cumulative totals after this round.
    pub cumulative_by_group: BTreeMap<GroupLabel, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    pub config: SimulationConfig,
    pub rounds: Vec<RoundRecord>,
    pub final_agents: Vec<AgentState>,
    /// Per group, the cumulative reward total after each round.
    pub cumulative_by_group_per_round: BTreeMap<GroupLabel, Vec<f64>>,
}

impl SimulationResult {
    /// Final cumulative total per group. Groups A and B are always present.
    pub fn final_totals(&self) -> BTreeMap<GroupLabel, f64> {
        self.cumulative_by_group_per_round
            .iter()
            .map(|(g, s)| (g.clone(), s.last().copied().unwrap_or(0.0)))
            .collect()
    }

    /// `|total_A - total_B|` at the end of the run. Matches
    /// [`metrics::group_reward_gap`] whenever both groups are populated, and
    /// stays defined when one group is empty.
    pub fn final_gap(&self) -> f64 {
        let t = self.final_totals();
        let a = t.get(&GroupLabel::a()).copied().unwrap_or(0.0);
        let b = t.get(&GroupLabel::b()).copied().unwrap_or(0.0);
        (a - b).abs()
    }
}

/// Uniform resource level on `[0, 1)`.
pub fn update_resource(rng: &mut RandomStream) -> f64 {
    rng.next_f64()
}

/// `clamp(base - bias, 0, 1)`, with `base = coop_base_high` when the
/// resource is strictly above `resource_threshold` and `coop_base_low`
/// otherwise.
pub fn cooperate_probability(bias: f64, resource: f64, config: &SimulationConfig) -> f64 {
    let base = if resource > config.resource_threshold {
        config.coop_base_high
    } else {
        config.coop_base_low
    };
    (base - bias).clamp(0.0, 1.0)
}

/// Consumes exactly one draw.
pub fn decide_action(
    agent: &AgentState,
    env: &EnvironmentState,
    rng: &mut RandomStream,
    config: &SimulationConfig,
) -> Action {
    let p = cooperate_probability(agent.bias, env.resource, config);
    if rng.bernoulli(p) {
        Action::Cooperate
    } else {
        Action::Compete
    }
}

/// Base reward for `action`, less `bias_penalty` when propagation is
/// enabled and `bias` exceeds the threshold. Cooperators are penalized too.
pub fn assign_reward(action: Action, bias: f64, config: &SimulationConfig) -> (f64, bool) {
    let base = match action {
        Action::Cooperate => config.reward_cooperate,
        Action::Compete => config.reward_compete,
    };
    if config.propagation_enabled && bias > config.bias_penalty_threshold {
        (base - config.bias_penalty, true)
    } else {
        (base, false)
    }
}

/// One synchronous contraction step toward the system bias:
/// `bᵢ ← clamp(bᵢ + rate·(B_System − bᵢ), 0, 1)`, with `B_System` taken
/// before any agent is updated.
pub fn propagate_bias(agents: &mut [AgentState], rate: f64) -> Result<(), MetricsError> {
    let system = metrics::system_bias(agents)?.total;
    for a in agents.iter_mut() {
        a.bias = (a.bias + rate * (system - a.bias)).clamp(0.0, 1.0);
    }
    Ok(())
}

/// Mutable state of a run in progress.
pub struct Simulation {
    config: SimulationConfig,
    pipeline: Pipeline,
    rng: RandomStream,
    agents: Vec<AgentState>,
    env: EnvironmentState,
    rounds: Vec<RoundRecord>,
    series: BTreeMap<GroupLabel, Vec<f64>>,
}

impl Simulation {
    /// Validates the config and initializes the population from its seed.
    pub fn new(config: SimulationConfig) -> Result<Self, EngineError> {
        let config = config.validate()?;
        let mut rng = RandomStream::new(config.seed);
        let agents = init_population(&config, &mut rng);
        Ok(Self::with_agents(config, agents, rng))
    }

    /// Starts from a given population. The caller is responsible for the
    /// config being valid and the agents matching it.
    pub fn with_agents(
        config: SimulationConfig,
        agents: Vec<AgentState>,
        rng: RandomStream,
    ) -> Self {
        let mut series: BTreeMap<GroupLabel, Vec<f64>> =
            [(GroupLabel::a(), Vec::new()), (GroupLabel::b(), Vec::new())].into();
        for a in &agents {
            series.entry(a.group.clone()).or_default();
        }
        Self {
            pipeline: interventions::pipeline_for(&config),
            config,
            rng,
            agents,
            env: EnvironmentState {
                round: 0,
                resource: 0.0,
            },
            rounds: Vec::new(),
            series,
        }
    }

    pub fn agents(&self) -> &[AgentState] {
        &self.agents
    }

    pub fn environment(&self) -> &EnvironmentState {
        &self.env
    }

    pub fn rounds(&self) -> &[RoundRecord] {
        &self.rounds
    }

    pub fn is_finished(&self) -> bool {
        self.env.round >= self.config.n_rounds
    }

    pub fn step_round(&mut self) -> Result<&RoundRecord, EngineError> {
        if self.is_finished() {
            return Err(EngineError::Finished(self.config.n_rounds));
        }
        let cfg = &self.config;
        self.env.resource = update_resource(&mut self.rng);

        let mut per_agent = Vec::with_capacity(self.agents.len());
        for agent in &self.agents {
            let action = decide_action(agent, &self.env, &mut self.rng, cfg);
            let reported = match agent.strategy {
                Strategy::Honest => agent.bias,
                Strategy::Adversarial => {
                    interventions::adversarial_report(agent, cfg.bias_penalty_threshold)?
                }
            };
            let (raw_reward, penalty_applied) = assign_reward(action, reported, cfg);
            per_agent.push(AgentRound {
                id: agent.id,
                group: agent.group.clone(),
                action,
                raw_reward,
                penalty_applied,
                adjusted_reward: raw_reward,
            });
        }

        let raw: RewardMap = per_agent.iter().map(|r| (r.id, r.raw_reward)).collect();
        let group_medians = cfg.fairness_enabled.then(|| group_medians(&per_agent));
        if cfg.fairness_enabled {
            let ctx = RoundContext {
                rewards: raw,
                groups: per_agent.iter().map(|r| (r.id, r.group.clone())).collect(),
                round: self.env.round + 1,
                history: &self.rounds,
                actions: per_agent.iter().map(|r| (r.id, r.action)).collect(),
                penalized: per_agent
                    .iter()
                    .map(|r| (r.id, r.penalty_applied))
                    .collect(),
            };
            let adjusted = self.pipeline.apply(&ctx)?;
            for r in &mut per_agent {
                r.adjusted_reward = adjusted[&r.id];
            }
        }

        for (agent, r) in self.agents.iter_mut().zip(&per_agent) {
            agent.cumulative_reward += r.adjusted_reward;
        }
        let totals = metrics::group_totals(&self.agents);
        let mut cumulative_by_group = BTreeMap::new();
        for (g, s) in self.series.iter_mut() {
            let t = totals.get(g).copied().unwrap_or(0.0);
            s.push(t);
            cumulative_by_group.insert(g.clone(), t);
        }

        if self.config.propagation_rate > 0.0 {
            propagate_bias(&mut self.agents, self.config.propagation_rate)?;
        }

        self.env.round += 1;
        self.rounds.push(RoundRecord {
            round: self.env.round,
            resource: self.env.resource,
            per_agent,
            group_medians,
            cumulative_by_group,
        });
        Ok(self.rounds.last().expect("just pushed"))
    }

    pub fn finish(self) -> SimulationResult {
        SimulationResult {
            config: self.config,
            rounds: self.rounds,
            final_agents: self.agents,
            cumulative_by_group_per_round: self.series,
        }
    }
}

fn group_medians(per_agent: &[AgentRound]) -> BTreeMap<GroupLabel, f64> {
    let mut by_group: BTreeMap<GroupLabel, Vec<f64>> = BTreeMap::new();
    for r in per_agent {
        by_group
            .entry(r.group.clone())
            .or_default()
            .push(r.raw_reward);
    }
    by_group
        .into_iter()
        .filter_map(|(g, v)| interventions::median(&v).map(|m| (g, m)))
        .collect()
}

/// Runs all `n_rounds` rounds of a validated config.
pub fn run_simulation(config: SimulationConfig) -> Result<SimulationResult, EngineError> {
    let mut sim = Simulation::new(config)?;
    while !sim.is_finished() {
        sim.step_round()?;
    }
    Ok(sim.finish())
}
