//! Pure-strategy Nash equilibria of finite normal-form games.

use std::fmt;
use std::sync::Arc;

use super::{OptimizerError, Profile, ProfileSpace, Result, DEFAULT_PROFILE_CAP};

type PayoffFn = Arc<dyn Fn(&[usize]) -> Vec<f64> + Send + Sync>;

#[derive(Clone)]
pub struct NormalFormGame {
    strategy_sets: Vec<Vec<String>>,
    payoff: PayoffFn,
}

impl fmt::Debug for NormalFormGame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NormalFormGame")
            .field("strategy_sets", &self.strategy_sets)
            .finish_non_exhaustive()
    }
}

impl NormalFormGame {
    /// `payoff` maps a profile to one utility per player.
    pub fn new<F>(strategy_sets: Vec<Vec<String>>, payoff: F) -> Result<Self>
    where
        F: Fn(&[usize]) -> Vec<f64> + Send + Sync + 'static,
    {
        if let Some(i) = strategy_sets.iter().position(Vec::is_empty) {
            return Err(OptimizerError::EmptyActionSet(i));
        }
        Ok(Self {
            strategy_sets,
            payoff: Arc::new(payoff),
        })
    }

    /// Game from an explicit payoff table indexed by profile rank
    /// (lexicographic order, first player most significant).
    pub fn from_table(strategy_sets: Vec<Vec<String>>, table: Vec<Vec<f64>>) -> Result<Self> {
        let space = ProfileSpace::new(strategy_sets.iter().map(Vec::len).collect());
        let n_players = strategy_sets.len();
        let size = space.size();
        if size != table.len() as u128 {
            return Err(OptimizerError::Arity {
                what: "payoff rows",
                expected: size as usize,
                got: table.len(),
            });
        }
        if let Some(row) = table.iter().find(|r| r.len() != n_players) {
            return Err(OptimizerError::Arity {
                what: "payoffs per row",
                expected: n_players,
                got: row.len(),
            });
        }
        Self::new(strategy_sets, move |p| table[space.rank(p)].clone())
    }

    /// Two-player dilemma with temptation `t`, reward `r`, punishment `p`
    /// and sucker's payoff `s`. Strategy 0 is Cooperate, 1 is Defect.
    pub fn prisoners_dilemma(t: f64, r: f64, p: f64, s: f64) -> Self {
        let sets = vec![vec!["Cooperate".to_string(), "Defect".to_string()]; 2];
        Self::from_table(sets, vec![vec![r, r], vec![s, t], vec![t, s], vec![p, p]])
            .expect("2x2 table")
    }

    /// Zero-sum matching pennies; strategies Heads and Tails.
    pub fn matching_pennies() -> Self {
        let sets = vec![vec!["Heads".to_string(), "Tails".to_string()]; 2];
        Self::from_table(
            sets,
            vec![
                vec![1.0, -1.0],
                vec![-1.0, 1.0],
                vec![-1.0, 1.0],
                vec![1.0, -1.0],
            ],
        )
        .expect("2x2 table")
    }

    pub fn n_players(&self) -> usize {
        self.strategy_sets.len()
    }

    pub fn strategy_sets(&self) -> &[Vec<String>] {
        &self.strategy_sets
    }

    pub fn space(&self) -> ProfileSpace {
        ProfileSpace::new(self.strategy_sets.iter().map(Vec::len).collect())
    }

    pub fn payoffs(&self, profile: &[usize]) -> Vec<f64> {
        (self.payoff)(profile)
    }

    pub fn labels(&self, profile: &[usize]) -> Vec<&str> {
        profile
            .iter()
            .zip(&self.strategy_sets)
            .map(|(&s, set)| set[s].as_str())
            .collect()
    }

    /// First unilateral deviation that strictly improves the deviating
    /// player's payoff, scanning players then strategies in index order.
    pub fn improving_deviation(&self, profile: &[usize]) -> Option<(usize, usize)> {
        let here = self.payoffs(profile);
        let mut alt = profile.to_vec();
        for (player, set) in self.strategy_sets.iter().enumerate() {
            for s in 0..set.len() {
                if s == profile[player] {
                    continue;
                }
                alt[player] = s;
                if self.payoffs(&alt)[player] > here[player] {
                    return Some((player, s));
                }
            }
            alt[player] = profile[player];
        }
        None
    }
}

/// No player can strictly gain by deviating alone.
pub fn is_nash_equilibrium(game: &NormalFormGame, profile: &[usize]) -> bool {
    game.improving_deviation(profile).is_none()
}

/// Every pure equilibrium, in lexicographic order.
pub fn find_pure_nash(game: &NormalFormGame) -> Result<Vec<Profile>> {
    find_pure_nash_capped(game, DEFAULT_PROFILE_CAP)
}

pub fn find_pure_nash_capped(game: &NormalFormGame, cap: u128) -> Result<Vec<Profile>> {
    let space = game.space();
    space.ensure_within(cap)?;
    Ok(space
        .iter()
        .filter(|p| is_nash_equilibrium(game, p))
        .collect())
}
