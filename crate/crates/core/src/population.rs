use crate::config::{AgentState, GroupLabel, SimulationConfig, Strategy};
use crate::rng::RandomStream;

/// Creates `n_agents` agents with ids `0..n_agents`.
///
/// Per agent, in id order, two draws are consumed: a fair coin for the group
/// (A or B, independently, so group sizes vary) and a uniform initial bias on
/// `[0, bias_init_max]`. Influence weights are uniform.
pub fn init_population(config: &SimulationConfig, rng: &mut RandomStream) -> Vec<AgentState> {
    let n = config.n_agents;
    let weight = 1.0 / n as f64;
    (0..n)
        .map(|id| {
            let group = if rng.bernoulli(0.5) {
                GroupLabel::a()
            } else {
                GroupLabel::b()
            };
            let bias = rng.uniform_upto(config.bias_init_max);
            let strategy = if config.adversarial_ids.contains(&id) {
                Strategy::Adversarial
            } else {
                Strategy::Honest
            };
            AgentState {
                id,
                group,
                bias,
                weight,
                strategy,
                cumulative_reward: 0.0,
            }
        })
        .collect()
}
