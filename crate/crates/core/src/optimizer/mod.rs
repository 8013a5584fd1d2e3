//! Utility-based fairness optimization over discrete joint actions.
//!
//! Each agent `i` scores a joint action profile with
//! `Uᵢ = αᵢ·Eᵢ − βᵢ·Bᵢ − γᵢ·Cᵢ` (efficiency, bias, fairness violation).
//! Solvers maximize `Σ Uᵢ` over the profiles whose constraint measures all
//! stay within their thresholds.
//!
//! Profiles are vectors of action indices, one per agent. Profile order is
//! lexicographic on those indices; ties between equally good profiles are
//! always resolved toward the lexicographically smallest.

pub mod binding;
pub mod nash;
pub mod problem_file;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::RandomStream;

pub use nash::{find_pure_nash, is_nash_equilibrium, NormalFormGame};
pub use problem_file::ProblemTable;

/// Largest profile space enumerated exhaustively by default.
pub const DEFAULT_PROFILE_CAP: u128 = 1 << 20;

/// Random profiles drawn per restart while looking for a feasible start.
pub const FEASIBLE_SAMPLE_ATTEMPTS: usize = 256;

pub type Profile = Vec<usize>;

#[derive(Debug, Error, PartialEq)]
pub enum OptimizerError {
    #[error("agent {0} has an empty action set")]
    EmptyActionSet(usize),
    #[error("expected {expected} {what}, got {got}")]
    Arity {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("weights for agent {agent} must be finite and non-negative: {weights:?}")]
    BadWeights {
        agent: usize,
        weights: UtilityWeights,
    },
    #[error("loss weight for agent {agent} must be finite and non-negative, got {value}")]
    BadLossWeight { agent: usize, value: f64 },
    #[error("profile {profile:?} is invalid: {reason}")]
    InvalidProfile { profile: Profile, reason: String },
    #[error("profile space has {size} profiles, above the exhaustive cap of {cap}; use solve_localsearch")]
    SpaceTooLarge { size: u128, cap: u128 },
}

pub type Result<T> = std::result::Result<T, OptimizerError>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UtilityWeights {
    /// Efficiency weight.
    pub alpha: f64,
    /// Bias weight.
    pub beta: f64,
    /// Fairness-violation weight.
    pub gamma: f64,
}

impl UtilityWeights {
    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Self {
        Self { alpha, beta, gamma }
    }

    pub fn is_valid(&self) -> bool {
        [self.alpha, self.beta, self.gamma]
            .iter()
            .all(|w| w.is_finite() && *w >= 0.0)
    }

    pub fn scaled(self, k: f64) -> Self {
        Self::new(self.alpha * k, self.beta * k, self.gamma * k)
    }
}

impl Default for UtilityWeights {
    fn default() -> Self {
        Self::new(1.0, 1.0, 1.0)
    }
}

/// Efficiency, bias and fairness-violation terms for one agent.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Terms {
    pub efficiency: f64,
    pub bias: f64,
    pub fairness: f64,
}

impl Terms {
    pub fn new(efficiency: f64, bias: f64, fairness: f64) -> Self {
        Self {
            efficiency,
            bias,
            fairness,
        }
    }
}

/// Evaluates the terms for agent `agent` under a joint profile.
pub trait Evaluator: Send + Sync {
    fn terms(&self, profile: &[usize], agent: usize) -> Terms;
}

impl<F> Evaluator for F
where
    F: Fn(&[usize], usize) -> Terms + Send + Sync,
{
    fn terms(&self, profile: &[usize], agent: usize) -> Terms {
        self(profile, agent)
    }
}

type Measure = Arc<dyn Fn(&[usize]) -> f64 + Send + Sync>;
type LossFn = Arc<dyn Fn(&[usize], usize) -> f64 + Send + Sync>;

/// A constraint `measure(profile) ≤ threshold`.
#[derive(Clone)]
pub struct Constraint {
    pub name: String,
    pub threshold: f64,
    measure: Measure,
}

impl Constraint {
    pub fn new<F>(name: impl Into<String>, threshold: f64, measure: F) -> Self
    where
        F: Fn(&[usize]) -> f64 + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            threshold,
            measure: Arc::new(measure),
        }
    }

    pub fn value(&self, profile: &[usize]) -> f64 {
        (self.measure)(profile)
    }

    /// Inclusive: a measure equal to the threshold is satisfied.
    pub fn satisfied(&self, profile: &[usize]) -> bool {
        self.value(profile) <= self.threshold
    }
}

impl fmt::Debug for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Constraint")
            .field("name", &self.name)
            .field("threshold", &self.threshold)
            .finish_non_exhaustive()
    }
}

#[derive(Clone)]
pub struct OptimizationProblem {
    action_sets: Vec<Vec<String>>,
    weights: Vec<UtilityWeights>,
    loss_weights: Vec<f64>,
    evaluator: Arc<dyn Evaluator>,
    loss: Option<LossFn>,
    constraints: Vec<Constraint>,
}

impl fmt::Debug for OptimizationProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OptimizationProblem")
            .field("action_sets", &self.action_sets)
            .field("weights", &self.weights)
            .field("loss_weights", &self.loss_weights)
            .field("constraints", &self.constraints)
            .finish_non_exhaustive()
    }
}

impl OptimizationProblem {
    /// Loss weights default to uniform `1/n` and the loss to `−Uᵢ`.
    pub fn new<E>(
        action_sets: Vec<Vec<String>>,
        weights: Vec<UtilityWeights>,
        evaluator: E,
    ) -> Result<Self>
    where
        E: Evaluator + 'static,
    {
        let n = action_sets.len();
        if let Some(i) = action_sets.iter().position(Vec::is_empty) {
            return Err(OptimizerError::EmptyActionSet(i));
        }
        if weights.len() != n {
            return Err(OptimizerError::Arity {
                what: "utility weights",
                expected: n,
                got: weights.len(),
            });
        }
        if let Some((agent, w)) = weights.iter().enumerate().find(|(_, w)| !w.is_valid()) {
            return Err(OptimizerError::BadWeights { agent, weights: *w });
        }
        Ok(Self {
            action_sets,
            weights,
            loss_weights: vec![1.0 / n.max(1) as f64; n],
            evaluator: Arc::new(evaluator),
            loss: None,
            constraints: Vec::new(),
        })
    }

    pub fn with_loss_weights(mut self, loss_weights: Vec<f64>) -> Result<Self> {
        if loss_weights.len() != self.n_agents() {
            return Err(OptimizerError::Arity {
                what: "loss weights",
                expected: self.n_agents(),
                got: loss_weights.len(),
            });
        }
        if let Some((agent, &value)) = loss_weights
            .iter()
            .enumerate()
            .find(|(_, w)| !(w.is_finite() && **w >= 0.0))
        {
            return Err(OptimizerError::BadLossWeight { agent, value });
        }
        self.loss_weights = loss_weights;
        Ok(self)
    }

    /// Replaces the default loss `Lᵢ = −Uᵢ`.
    pub fn with_loss<F>(mut self, loss: F) -> Self
    where
        F: Fn(&[usize], usize) -> f64 + Send + Sync + 'static,
    {
        self.loss = Some(Arc::new(loss));
        self
    }

    pub fn with_constraint(mut self, constraint: Constraint) -> Self {
        self.constraints.push(constraint);
        self
    }

    pub fn n_agents(&self) -> usize {
        self.action_sets.len()
    }

    pub fn action_sets(&self) -> &[Vec<String>] {
        &self.action_sets
    }

    pub fn weights(&self) -> &[UtilityWeights] {
        &self.weights
    }

    pub fn loss_weights(&self) -> &[f64] {
        &self.loss_weights
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn space(&self) -> ProfileSpace {
        ProfileSpace::new(self.action_sets.iter().map(Vec::len).collect())
    }

    pub fn check_profile(&self, profile: &[usize]) -> Result<()> {
        self.space().check(profile)
    }

    pub fn terms(&self, profile: &[usize], agent: usize) -> Terms {
        self.evaluator.terms(profile, agent)
    }

    /// `αᵢ·Eᵢ − βᵢ·Bᵢ − γᵢ·Cᵢ`.
    pub fn utility(&self, profile: &[usize], agent: usize) -> f64 {
        let t = self.terms(profile, agent);
        let w = &self.weights[agent];
        w.alpha * t.efficiency - w.beta * t.bias - w.gamma * t.fairness
    }

    pub fn aggregate_utility(&self, profile: &[usize]) -> f64 {
        (0..self.n_agents()).map(|i| self.utility(profile, i)).sum()
    }

    pub fn loss(&self, profile: &[usize], agent: usize) -> f64 {
        match &self.loss {
            Some(l) => l(profile, agent),
            None => -self.utility(profile, agent),
        }
    }

    /// `Σ wᵢ·Lᵢ`.
    pub fn weighted_loss(&self, profile: &[usize]) -> f64 {
        self.loss_weights
            .iter()
            .enumerate()
            .map(|(i, w)| w * self.loss(profile, i))
            .sum()
    }

    /// Every constraint measure is at most its threshold.
    pub fn feasible(&self, profile: &[usize]) -> bool {
        self.constraints.iter().all(|c| c.satisfied(profile))
    }

    /// Action labels of a profile.
    pub fn labels(&self, profile: &[usize]) -> Vec<&str> {
        profile
            .iter()
            .zip(&self.action_sets)
            .map(|(&a, set)| set[a].as_str())
            .collect()
    }
}

/// Mixed-radix space of profiles; the first agent is the most significant
/// digit, so rank order equals lexicographic order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProfileSpace {
    sizes: Vec<usize>,
}

impl ProfileSpace {
    pub fn new(sizes: Vec<usize>) -> Self {
        Self { sizes }
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// Number of profiles, saturating at `u128::MAX`.
    pub fn size(&self) -> u128 {
        self.sizes
            .iter()
            .fold(1u128, |acc, &s| acc.saturating_mul(s as u128))
    }

    pub fn ensure_within(&self, cap: u128) -> Result<()> {
        let size = self.size();
        if size > cap {
            Err(OptimizerError::SpaceTooLarge { size, cap })
        } else {
            Ok(())
        }
    }

    pub fn check(&self, profile: &[usize]) -> Result<()> {
        let bad = |reason: String| OptimizerError::InvalidProfile {
            profile: profile.to_vec(),
            reason,
        };
        if profile.len() != self.sizes.len() {
            return Err(bad(format!("expected {} actions", self.sizes.len())));
        }
        for (i, (&a, &n)) in profile.iter().zip(&self.sizes).enumerate() {
            if a >= n {
                return Err(bad(format!("agent {i} has {n} actions, got index {a}")));
            }
        }
        Ok(())
    }

    pub fn rank(&self, profile: &[usize]) -> usize {
        profile
            .iter()
            .zip(&self.sizes)
            .fold(0usize, |acc, (&a, &n)| acc * n + a)
    }

    pub fn unrank(&self, mut rank: usize) -> Profile {
        let mut p = vec![0; self.sizes.len()];
        for (slot, &n) in p.iter_mut().zip(&self.sizes).rev() {
            *slot = rank % n;
            rank /= n;
        }
        p
    }

    /// All profiles in lexicographic order.
    pub fn iter(&self) -> ProfileIter {
        ProfileIter {
            sizes: self.sizes.clone(),
            next: (!self.sizes.contains(&0)).then(|| vec![0; self.sizes.len()]),
        }
    }

    pub fn random(&self, rng: &mut RandomStream) -> Profile {
        self.sizes.iter().map(|&n| rng.index_below(n)).collect()
    }
}

pub struct ProfileIter {
    sizes: Vec<usize>,
    next: Option<Profile>,
}

impl Iterator for ProfileIter {
    type Item = Profile;

    fn next(&mut self) -> Option<Profile> {
        let current = self.next.take()?;
        let mut succ = current.clone();
        for i in (0..succ.len()).rev() {
            succ[i] += 1;
            if succ[i] < self.sizes[i] {
                self.next = Some(succ);
                return Some(current);
            }
            succ[i] = 0;
        }
        Some(current)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Solution {
    Optimal { profile: Profile, value: f64 },
    Infeasible,
}

impl Solution {
    pub fn value(&self) -> Option<f64> {
        match self {
            Solution::Optimal { value, .. } => Some(*value),
            Solution::Infeasible => None,
        }
    }

    pub fn profile(&self) -> Option<&[usize]> {
        match self {
            Solution::Optimal { profile, .. } => Some(profile),
            Solution::Infeasible => None,
        }
    }
}

/// Exhaustive constrained maximization of aggregate utility, capped at
/// [`DEFAULT_PROFILE_CAP`] profiles.
pub fn solve_bruteforce(problem: &OptimizationProblem) -> Result<Solution> {
    solve_bruteforce_capped(problem, DEFAULT_PROFILE_CAP)
}

pub fn solve_bruteforce_capped(problem: &OptimizationProblem, cap: u128) -> Result<Solution> {
    let space = problem.space();
    space.ensure_within(cap)?;
    let mut best: Option<(Profile, f64)> = None;
    for p in space.iter().filter(|p| problem.feasible(p)) {
        let v = problem.aggregate_utility(&p);
        // strict: earlier (lexicographically smaller) profiles win ties
        if best.as_ref().is_none_or(|(_, b)| v > *b) {
            best = Some((p, v));
        }
    }
    Ok(match best {
        Some((profile, value)) => Solution::Optimal { profile, value },
        None => Solution::Infeasible,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalSearchResult {
    pub profile: Profile,
    pub value: f64,
    /// Whether `profile` satisfies every constraint. When false, no feasible
    /// profile was found and `profile` is the last one sampled.
    pub feasible: bool,
    pub restarts: usize,
}

fn better(value: f64, profile: &[usize], best_value: f64, best: &[usize]) -> bool {
    value > best_value || (value == best_value && profile < best)
}

/// Random-restart steepest-ascent hill climbing over single-agent action
/// changes. Only feasible profiles are ever accepted.
///
/// Every accepted move and every restart costs one iteration; the search
/// stops after `max_iters` of them. With `max_iters = 0` the result is the
/// first feasible random profile.
pub fn solve_localsearch(
    problem: &OptimizationProblem,
    seed: u64,
    max_iters: usize,
) -> LocalSearchResult {
    let space = problem.space();
    let mut rng = RandomStream::new(seed);
    let mut last_sample = space.random(&mut rng);

    let sample_feasible = |rng: &mut RandomStream, last: &mut Profile| -> Option<Profile> {
        for _ in 0..FEASIBLE_SAMPLE_ATTEMPTS {
            if problem.feasible(last) {
                let found = last.clone();
                *last = space.random(rng);
                return Some(found);
            }
            *last = space.random(rng);
        }
        None
    };

    let Some(start) = sample_feasible(&mut rng, &mut last_sample) else {
        let value = problem.aggregate_utility(&last_sample);
        return LocalSearchResult {
            profile: last_sample,
            value,
            feasible: false,
            restarts: 0,
        };
    };

    let mut current_value = problem.aggregate_utility(&start);
    let mut current = start;
    let mut best = current.clone();
    let mut best_value = current_value;
    let mut restarts = 0;
    let mut iters = 0;

    while iters < max_iters {
        iters += 1;
        let mut step: Option<(Profile, f64)> = None;
        for agent in 0..current.len() {
            for action in 0..space.sizes()[agent] {
                if action == current[agent] {
                    continue;
                }
                let mut cand = current.clone();
                cand[agent] = action;
                if !problem.feasible(&cand) {
                    continue;
                }
                let v = problem.aggregate_utility(&cand);
                let improves = v > current_value;
                if improves && step.as_ref().is_none_or(|(_, sv)| v > *sv) {
                    step = Some((cand, v));
                }
            }
        }
        match step {
            Some((p, v)) => {
                current = p;
                current_value = v;
            }
            None => {
                restarts += 1;
                match sample_feasible(&mut rng, &mut last_sample) {
                    Some(p) => {
                        current_value = problem.aggregate_utility(&p);
                        current = p;
                    }
                    None => continue,
                }
            }
        }
        if better(current_value, &current, best_value, &best) {
            best = current.clone();
            best_value = current_value;
        }
    }

    LocalSearchResult {
        profile: best,
        value: best_value,
        feasible: true,
        restarts,
    }
}

/// Empirical expectation of the weighted loss over observed profiles, e.g.
/// the joint actions realized in each simulation round. `None` when no
/// profile is observed.
pub fn empirical_expected_loss<'a, I>(problem: &OptimizationProblem, profiles: I) -> Option<f64>
where
    I: IntoIterator<Item = &'a Profile>,
{
    let (sum, n) = profiles.into_iter().fold((0.0, 0usize), |(s, n), p| {
        (s + problem.weighted_loss(p), n + 1)
    });
    (n > 0).then(|| sum / n as f64)
}
