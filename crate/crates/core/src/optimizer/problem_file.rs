//! Text format for explicitly enumerated optimization problems.
//!
//! ```text
//! # comments run to end of line
//! agent <name> : <action> <action> ...
//! weights <name> : <alpha> <beta> <gamma>      # optional, default 1 1 1
//! loss_weight <name> : <w>                     # optional, default 1/n
//! constraint <name> <= <delta>
//! profile <action> ... : <E> <B> <C> | <E> <B> <C> ... ; <c1> <c2> ...
//! ```
//!
//! `agent` and `constraint` lines must precede every `profile` line. Each
//! profile lists one action label per agent, in agent order, then one
//! `E B C` triple per agent separated by `|`, then (only when constraints
//! exist) one measure per constraint after `;`. Every profile of the action
//! space must appear exactly once. Names and labels may not contain
//! whitespace or any of `# : | ;`.
//!
//! [`ProblemTable::to_text`] writes numbers in shortest round-trip form, so
//! parsing its output reproduces the table exactly.

use std::collections::HashMap;
use std::sync::Arc;

use thiserror::Error;

use super::{Constraint, OptimizationProblem, OptimizerError, ProfileSpace, Terms, UtilityWeights};

#[derive(Debug, Error, PartialEq)]
#[error("line {line}: {message}")]
pub struct ProblemFileError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemTable {
    pub agents: Vec<String>,
    pub actions: Vec<Vec<String>>,
    pub weights: Vec<UtilityWeights>,
    pub loss_weights: Vec<f64>,
    /// `(name, threshold)` pairs.
    pub constraints: Vec<(String, f64)>,
    /// Per profile rank, the terms of every agent.
    pub terms: Vec<Vec<Terms>>,
    /// Per profile rank, the measure of every constraint.
    pub constraint_values: Vec<Vec<f64>>,
}

fn valid_name(s: &str) -> bool {
    !s.is_empty() && !s.chars().any(|c| c.is_whitespace() || "#:|;".contains(c))
}

fn number(tok: &str, line: usize) -> Result<f64, ProblemFileError> {
    let v: f64 = tok.parse().map_err(|_| ProblemFileError {
        line,
        message: format!("expected a number, got `{tok}`"),
    })?;
    if !v.is_finite() {
        return Err(ProblemFileError {
            line,
            message: format!("`{tok}` is not finite"),
        });
    }
    Ok(v)
}

fn numbers(s: &str, line: usize) -> Result<Vec<f64>, ProblemFileError> {
    s.split_whitespace().map(|t| number(t, line)).collect()
}

impl ProblemTable {
    pub fn space(&self) -> ProfileSpace {
        ProfileSpace::new(self.actions.iter().map(Vec::len).collect())
    }

    pub fn parse(text: &str) -> Result<Self, ProblemFileError> {
        let mut agents: Vec<String> = Vec::new();
        let mut actions: Vec<Vec<String>> = Vec::new();
        let mut weights: HashMap<usize, UtilityWeights> = HashMap::new();
        let mut loss_weights: HashMap<usize, f64> = HashMap::new();
        let mut constraints: Vec<(String, f64)> = Vec::new();
        let mut rows: Vec<Option<(Vec<Terms>, Vec<f64>)>> = Vec::new();
        let mut space: Option<ProfileSpace> = None;

        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let err = |message: String| ProblemFileError { line, message };
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (keyword, rest) = content
                .split_once(char::is_whitespace)
                .map(|(k, r)| (k, r.trim()))
                .unwrap_or((content, ""));
            let agent_index = |name: &str| {
                agents
                    .iter()
                    .position(|a| a == name)
                    .ok_or_else(|| err(format!("unknown agent `{name}`")))
            };
            match keyword {
                "agent" | "weights" | "loss_weight" => {
                    let (name, tail) = rest
                        .split_once(':')
                        .ok_or_else(|| err(format!("expected `{keyword} <name> : ...`")))?;
                    let name = name.trim();
                    if keyword == "agent" {
                        if space.is_some() {
                            return Err(err("agent declared after the first profile".into()));
                        }
                        if !valid_name(name) || agents.iter().any(|a| a == name) {
                            return Err(err(format!("invalid or duplicate agent name `{name}`")));
                        }
                        let acts: Vec<String> = tail.split_whitespace().map(String::from).collect();
                        if acts.is_empty() {
                            return Err(err(format!("agent `{name}` has no actions")));
                        }
                        let mut seen = acts.clone();
                        seen.sort();
                        seen.dedup();
                        if seen.len() != acts.len() || !acts.iter().all(|a| valid_name(a)) {
                            return Err(err(format!(
                                "invalid or duplicate action labels for `{name}`"
                            )));
                        }
                        agents.push(name.to_string());
                        actions.push(acts);
                    } else if keyword == "weights" {
                        let i = agent_index(name)?;
                        match numbers(tail, line)?.as_slice() {
                            &[a, b, g] => {
                                weights.insert(i, UtilityWeights::new(a, b, g));
                            }
                            other => {
                                return Err(err(format!("expected 3 weights, got {}", other.len())))
                            }
                        }
                    } else {
                        let i = agent_index(name)?;
                        match numbers(tail, line)?.as_slice() {
                            &[w] => {
                                loss_weights.insert(i, w);
                            }
                            other => {
                                return Err(err(format!(
                                    "expected 1 loss weight, got {}",
                                    other.len()
                                )))
                            }
                        }
                    }
                }
                "constraint" => {
                    if space.is_some() {
                        return Err(err("constraint declared after the first profile".into()));
                    }
                    let (name, delta) = rest
                        .split_once("<=")
                        .ok_or_else(|| err("expected `constraint <name> <= <delta>`".into()))?;
                    let name = name.trim();
                    if !valid_name(name) || constraints.iter().any(|(c, _)| c == name) {
                        return Err(err(format!(
                            "invalid or duplicate constraint name `{name}`"
                        )));
                    }
                    constraints.push((name.to_string(), number(delta.trim(), line)?));
                }
                "profile" => {
                    if agents.is_empty() {
                        return Err(err("profile before any agent".into()));
                    }
                    let sp = space.get_or_insert_with(|| {
                        ProfileSpace::new(actions.iter().map(Vec::len).collect())
                    });
                    if rows.is_empty() {
                        let size = sp.size();
                        if size > super::DEFAULT_PROFILE_CAP {
                            return Err(err(format!(
                                "profile space of {size} exceeds the enumeration cap"
                            )));
                        }
                        rows = vec![None; size as usize];
                    }
                    let (labels, values) = rest
                        .split_once(':')
                        .ok_or_else(|| err("expected `profile <actions> : <terms>`".into()))?;
                    let labels: Vec<&str> = labels.split_whitespace().collect();
                    if labels.len() != agents.len() {
                        return Err(err(format!(
                            "expected {} action labels, got {}",
                            agents.len(),
                            labels.len()
                        )));
                    }
                    let profile = labels
                        .iter()
                        .zip(&actions)
                        .enumerate()
                        .map(|(i, (l, set))| {
                            set.iter().position(|a| a == l).ok_or_else(|| {
                                err(format!("`{l}` is not an action of agent `{}`", agents[i]))
                            })
                        })
                        .collect::<Result<Vec<_>, _>>()?;
                    let (terms_part, cons_part) = match values.split_once(';') {
                        Some((t, c)) => (t, Some(c)),
                        None => (values, None),
                    };
                    let terms = terms_part
                        .split('|')
                        .map(|chunk| match numbers(chunk, line)?.as_slice() {
                            &[e, b, c] => Ok(Terms::new(e, b, c)),
                            other => Err(err(format!(
                                "expected `E B C`, got {} numbers",
                                other.len()
                            ))),
                        })
                        .collect::<Result<Vec<_>, _>>()?;
                    if terms.len() != agents.len() {
                        return Err(err(format!(
                            "expected {} term triples, got {}",
                            agents.len(),
                            terms.len()
                        )));
                    }
                    let cons = match cons_part {
                        Some(c) => numbers(c, line)?,
                        None => Vec::new(),
                    };
                    if cons.len() != constraints.len() {
                        return Err(err(format!(
                            "expected {} constraint values, got {}",
                            constraints.len(),
                            cons.len()
                        )));
                    }
                    let slot = &mut rows[sp.rank(&profile)];
                    if slot.is_some() {
                        return Err(err(format!("duplicate profile `{}`", labels.join(" "))));
                    }
                    *slot = Some((terms, cons));
                }
                other => return Err(err(format!("unknown keyword `{other}`"))),
            }
        }

        let end = text.lines().count().max(1);
        if agents.is_empty() {
            return Err(ProblemFileError {
                line: end,
                message: "no agents declared".into(),
            });
        }
        let space = ProfileSpace::new(actions.iter().map(Vec::len).collect());
        if rows.is_empty() {
            rows = vec![None; space.size() as usize];
        }
        let mut terms = Vec::with_capacity(rows.len());
        let mut constraint_values = Vec::with_capacity(rows.len());
        for (rank, row) in rows.into_iter().enumerate() {
            let (t, c) = row.ok_or_else(|| ProblemFileError {
                line: end,
                message: format!(
                    "missing profile `{}`",
                    space
                        .unrank(rank)
                        .iter()
                        .zip(&actions)
                        .map(|(&a, s)| s[a].as_str())
                        .collect::<Vec<_>>()
                        .join(" ")
                ),
            })?;
            terms.push(t);
            constraint_values.push(c);
        }
        let n = agents.len();
        Ok(Self {
            weights: (0..n)
                .map(|i| weights.get(&i).copied().unwrap_or_default())
                .collect(),
            loss_weights: (0..n)
                .map(|i| loss_weights.get(&i).copied().unwrap_or(1.0 / n as f64))
                .collect(),
            agents,
            actions,
            constraints,
            terms,
            constraint_values,
        })
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (name, acts) in self.agents.iter().zip(&self.actions) {
            out.push_str(&format!("agent {name} : {}\n", acts.join(" ")));
        }
        for (name, w) in self.agents.iter().zip(&self.weights) {
            out.push_str(&format!(
                "weights {name} : {} {} {}\n",
                w.alpha, w.beta, w.gamma
            ));
        }
        for (name, w) in self.agents.iter().zip(&self.loss_weights) {
            out.push_str(&format!("loss_weight {name} : {w}\n"));
        }
        for (name, delta) in &self.constraints {
            out.push_str(&format!("constraint {name} <= {delta}\n"));
        }
        let space = self.space();
        for (rank, (terms, cons)) in self.terms.iter().zip(&self.constraint_values).enumerate() {
            let profile = space.unrank(rank);
            let labels: Vec<&str> = profile
                .iter()
                .zip(&self.actions)
                .map(|(&a, s)| s[a].as_str())
                .collect();
            let triples: Vec<String> = terms
                .iter()
                .map(|t| format!("{} {} {}", t.efficiency, t.bias, t.fairness))
                .collect();
            out.push_str(&format!(
                "profile {} : {}",
                labels.join(" "),
                triples.join(" | ")
            ));
            if !cons.is_empty() {
                let c: Vec<String> = cons.iter().map(f64::to_string).collect();
                out.push_str(&format!(" ; {}", c.join(" ")));
            }
            out.push('\n');
        }
        out
    }

    /// Problem backed by this table.
    pub fn to_problem(&self) -> Result<OptimizationProblem, OptimizerError> {
        let space = self.space();
        let terms = Arc::new(self.terms.clone());
        let eval_space = space.clone();
        let mut problem = OptimizationProblem::new(
            self.actions.clone(),
            self.weights.clone(),
            move |p: &[usize], i: usize| terms[eval_space.rank(p)][i],
        )?
        .with_loss_weights(self.loss_weights.clone())?;
        let values = Arc::new(self.constraint_values.clone());
        for (k, (name, delta)) in self.constraints.iter().enumerate() {
            let values = Arc::clone(&values);
            let space = space.clone();
            problem = problem.with_constraint(Constraint::new(name.clone(), *delta, move |p| {
                values[space.rank(p)][k]
            }));
        }
        Ok(problem)
    }

    /// Tabulates an arbitrary problem over its full action space.
    pub fn from_problem(problem: &OptimizationProblem, agent_names: Vec<String>) -> Self {
        let space = problem.space();
        let n = problem.n_agents();
        let (terms, constraint_values) = space
            .iter()
            .map(|p| {
                (
                    (0..n).map(|i| problem.terms(&p, i)).collect(),
                    problem.constraints().iter().map(|c| c.value(&p)).collect(),
                )
            })
            .unzip();
        Self {
            agents: agent_names,
            actions: problem.action_sets().to_vec(),
            weights: problem.weights().to_vec(),
            loss_weights: problem.loss_weights().to_vec(),
            constraints: problem
                .constraints()
                .iter()
                .map(|c| (c.name.clone(), c.threshold))
                .collect(),
            terms,
            constraint_values,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimizer::{solve_bruteforce, Solution};

    const SAMPLE: &str = "\
# two agents sharing a resource
agent alice : share hoard
agent bob : share hoard
weights alice : 1 0.5 2
loss_weight bob : 0.75
loss_weight alice : 0.25
constraint parity <= 0.2

profile share share : 5 0.1 0 | 5 0.2 0 ; 0
profile share hoard : 2 0.1 0.5 | 8 0.2 0.5 ; 0.6
profile hoard share : 8 0.1 0.5 | 2 0.2 0.5 ; 0.6
profile hoard hoard : 3 0.1 0 | 3 0.2 0 ; 0.2
";

    #[test]
    fn parses_sample() {
        let t = ProblemTable::parse(SAMPLE).unwrap();
        assert_eq!(t.agents, ["alice", "bob"]);
        assert_eq!(t.weights[0], UtilityWeights::new(1.0, 0.5, 2.0));
        assert_eq!(t.weights[1], UtilityWeights::default());
        assert_eq!(t.loss_weights, [0.25, 0.75]);
        assert_eq!(t.constraints, [("parity".to_string(), 0.2)]);
        assert_eq!(t.terms[1][1], Terms::new(8.0, 0.2, 0.5));
        assert_eq!(t.constraint_values[3], [0.2]);
    }

    #[test]
    fn solves_sample() {
        let p = ProblemTable::parse(SAMPLE).unwrap().to_problem().unwrap();
        // share/share: (5 - 0.05) + (5 - 0.2) = 9.75; hoard/hoard: (3 - 0.05) + (3 - 0.2) = 5.75
        match solve_bruteforce(&p).unwrap() {
            Solution::Optimal { profile, value } => {
                assert_eq!(p.labels(&profile), ["share", "share"]);
                assert!((value - 9.75).abs() < 1e-12);
            }
            Solution::Infeasible => panic!("feasible profiles exist"),
        }
        assert!(!p.feasible(&[0, 1]));
        assert!(p.feasible(&[1, 1]));
    }

    #[test]
    fn text_round_trip_is_lossless() {
        let mut t = ProblemTable::parse(SAMPLE).unwrap();
        t.terms[0][0] = Terms::new(0.1 + 0.2, -1e-300, 1.0 / 3.0);
        let text = t.to_text();
        let back = ProblemTable::parse(&text).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.to_text(), text);
    }

    #[test]
    fn from_problem_round_trip() {
        let p = ProblemTable::parse(SAMPLE).unwrap().to_problem().unwrap();
        let t = ProblemTable::from_problem(&p, vec!["alice".into(), "bob".into()]);
        assert_eq!(t, ProblemTable::parse(SAMPLE).unwrap());
    }

    #[test]
    fn error_lines() {
        let cases = [
            ("agent a : x y\nprofile x : 1 2 3\nprofile z : 1 2 3\n", 3),
            ("agent a : x y\nprofile x : 1 2\n", 2),
            ("agent a : x y\nbogus\n", 2),
            ("agent a : x y\nprofile x : 1 2 3\nprofile x : 1 2 3\n", 3),
            ("agent a : x y\nweights b : 1 1 1\n", 2),
            ("agent a : x x\n", 1),
            ("agent a : x y\nconstraint c <= 0.1\nprofile x : 1 2 3\n", 3),
            ("agent a : x y\nprofile x : 1 2 nan\n", 2),
        ];
        for (text, line) in cases {
            let e = ProblemTable::parse(text).unwrap_err();
            assert_eq!(e.line, line, "{text:?}: {e}");
        }
        let missing = ProblemTable::parse("agent a : x y\nprofile x : 1 2 3\n").unwrap_err();
        assert!(missing.message.contains("missing profile `y`"));
        assert!(ProblemTable::parse("# nothing\n").is_err());
    }
}
