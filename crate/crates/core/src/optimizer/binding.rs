//! Canonical optimization view of one simulation round.
//!
//! Every agent chooses `cooperate` (index 0) or `compete` (index 1). Its
//! terms under a joint profile are:
//!
//! * efficiency: the reward [`assign_reward`] pays for its action;
//! * bias: the agent's bias;
//! * fairness: its influence weight times the demographic-parity gap of
//!   cooperation across groups in that profile.
//!
//! The gap itself is exposed as a `demographic_parity` constraint.

use std::sync::Arc;

use crate::config::{AgentState, SimulationConfig};
use crate::engine::{assign_reward, Action, RoundRecord};
use crate::metrics::{demographic_parity_gap, OutcomeTable};

use super::{Constraint, OptimizationProblem, OptimizerError, Profile, Terms, UtilityWeights};

pub const ACTIONS: [Action; 2] = [Action::Cooperate, Action::Compete];

/// Demographic-parity gap of cooperation rates under `profile`.
pub fn cooperation_gap(agents: &[AgentState], profile: &[usize]) -> f64 {
    let rows = agents
        .iter()
        .zip(profile)
        .map(|(a, &p)| (ACTIONS[p] == Action::Cooperate, true, a.group.as_str()));
    OutcomeTable::from_triples(rows)
        .map(|t| demographic_parity_gap(&t))
        .unwrap_or(0.0)
}

pub fn engine_problem(
    agents: &[AgentState],
    config: &SimulationConfig,
    weights: UtilityWeights,
    delta: f64,
) -> Result<OptimizationProblem, OptimizerError> {
    let agents: Arc<Vec<AgentState>> = Arc::new(agents.to_vec());
    let config = config.clone();
    let eval_agents = Arc::clone(&agents);
    let action_sets = vec![ACTIONS.iter().map(|a| a.as_str().to_string()).collect(); agents.len()];
    let problem = OptimizationProblem::new(
        action_sets,
        vec![weights; agents.len()],
        move |p: &[usize], i: usize| {
            let a = &eval_agents[i];
            let (reward, _) = assign_reward(ACTIONS[p[i]], a.bias, &config);
            Terms::new(reward, a.bias, a.weight * cooperation_gap(&eval_agents, p))
        },
    )?
    .with_loss_weights(agents.iter().map(|a| a.weight).collect())?;
    Ok(
        problem.with_constraint(Constraint::new("demographic_parity", delta, move |p| {
            cooperation_gap(&agents, p)
        })),
    )
}

/// Joint action of a recorded round as a profile over [`ACTIONS`].
pub fn realized_profile(record: &RoundRecord) -> Profile {
    record
        .per_agent
        .iter()
        .map(|r| {
            ACTIONS
                .iter()
                .position(|a| *a == r.action)
                .expect("two actions")
        })
        .collect()
}
