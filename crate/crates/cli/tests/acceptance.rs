//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.
//!
//! Run alone with `cargo test -p fairmas-cli --test acceptance`.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;
use std::time::{Duration, Instant};

use fairmas::config::{GroupLabel, Strategy};
use fairmas::engine::{assign_reward, Action, Simulation, SimulationResult};
use fairmas::interventions::{
    corrective_redistribution, InterventionKind, RewardMap, RoundContext,
};
use fairmas::metrics::{demographic_parity_gap, equalized_odds_gap, BiasReport, OutcomeTable};
use fairmas::optimizer::nash::{find_pure_nash, NormalFormGame};
use fairmas::optimizer::{
    solve_bruteforce, solve_localsearch, Constraint, OptimizationProblem, Solution, Terms,
    UtilityWeights,
};
use fairmas::population::init_population;
use fairmas::rng::{mix_seed, RandomStream};
use fairmas::SimulationConfig;
use fairmas_cli::commands::{
    cmd_batch, cmd_run, run_condition, BatchOptions, CommonOptions, Conditions,
};
use fairmas_cli::output::Condition;

struct Verdict {
    pass: bool,
    detail: String,
    notes: Vec<String>,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
            notes: Vec::new(),
        }
    }

    fn note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }
}

fn gaps(results: &[SimulationResult]) -> Vec<f64> {
    results.iter().map(SimulationResult::final_gap).collect()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn group_sizes(result: &SimulationResult) -> BTreeMap<GroupLabel, usize> {
    let mut sizes = BTreeMap::new();
    for a in &result.final_agents {
        *sizes.entry(a.group.clone()).or_insert(0) += 1;
    }
    sizes
}

/// Totals divided by group size; used only for the diagnostic notes.
fn per_capita(result: &SimulationResult) -> (f64, f64) {
    let totals = result.final_totals();
    let sizes = group_sizes(result);
    let pc = |g: GroupLabel| {
        let n = sizes.get(&g).copied().unwrap_or(0);
        if n == 0 {
            0.0
        } else {
            totals[&g] / n as f64
        }
    };
    (pc(GroupLabel::a()), pc(GroupLabel::b()))
}

const N_SEEDS: usize = 200;

fn ac1() -> Verdict {
    let base = SimulationConfig::default();
    let on = run_condition(&base, Condition::FairnessOn, N_SEEDS).unwrap();
    let off = run_condition(&base, Condition::FairnessOff, N_SEEDS).unwrap();
    let (m_on, m_off) = (mean(&gaps(&on)), mean(&gaps(&off)));
    let ratio = m_on / m_off;
    let pc_gap = |rs: &[SimulationResult]| {
        mean(
            &rs.iter()
                .map(|r| {
                    let (a, b) = per_capita(r);
                    (a - b).abs()
                })
                .collect::<Vec<_>>(),
        )
    };
    let redistribute = SimulationConfig {
        interventions: vec![InterventionKind::Median, InterventionKind::Redistribute],
        ..base.clone()
    };
    let r_on = run_condition(&redistribute, Condition::FairnessOn, N_SEEDS).unwrap();
    Verdict::new(
        m_on < m_off && ratio <= 0.5,
        format!("mean gap ON {m_on:.3}, OFF {m_off:.3}, ratio {ratio:.4} (need ON < OFF and ratio <= 0.5)"),
    )
    .note(format!(
        "per-capita gap: ON {:.3}, OFF {:.3}, ratio {:.4}",
        pc_gap(&on),
        pc_gap(&off),
        pc_gap(&on) / pc_gap(&off)
    ))
    .note(format!(
        "with interventions = median,redistribute: mean gap ON {:.3}, ratio {:.4}",
        mean(&gaps(&r_on)),
        mean(&gaps(&r_on)) / m_off
    ))
}

fn ac2() -> Verdict {
    let on = run_condition(&SimulationConfig::default(), Condition::FairnessOn, N_SEEDS).unwrap();
    let band = 250.0..=500.0;
    let inside = on
        .iter()
        .filter(|r| {
            let t = r.final_totals();
            band.contains(&t[&GroupLabel::a()]) && band.contains(&t[&GroupLabel::b()])
        })
        .count();
    let frac = inside as f64 / on.len() as f64;
    let pc_inside = on
        .iter()
        .filter(|r| {
            let (a, b) = per_capita(r);
            band.contains(&a) && band.contains(&b)
        })
        .count();
    let totals: Vec<f64> = on
        .iter()
        .flat_map(|r| r.final_totals().into_values())
        .collect();
    Verdict::new(
        frac >= 0.95,
        format!(
            "{inside}/{} runs with both group totals in [250, 500] ({:.1}%, need >= 95%)",
            on.len(),
            100.0 * frac
        ),
    )
    .note(format!(
        "group totals range {:.0}..{:.0}, mean {:.1}",
        totals.iter().copied().fold(f64::INFINITY, f64::min),
        totals.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        mean(&totals)
    ))
    .note(format!(
        "mean per-agent total within each group: {pc_inside}/{} runs with both in band",
        on.len()
    ))
}

fn ac3() -> Verdict {
    let mut checked = 0usize;
    let mut bad = Vec::new();
    for seed in 0..50u64 {
        let r = fairmas::run_simulation(SimulationConfig {
            seed,
            ..Default::default()
        })
        .unwrap();
        for rec in &r.rounds {
            let mut by_group: BTreeMap<&GroupLabel, Vec<f64>> = BTreeMap::new();
            for a in &rec.per_agent {
                by_group
                    .entry(&a.group)
                    .or_default()
                    .push(a.adjusted_reward);
            }
            for (g, v) in by_group {
                let m = mean(&v);
                let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64;
                checked += 1;
                if var != 0.0 || v.iter().any(|&x| x != v[0]) {
                    bad.push(format!("seed {seed} round {} group {g}", rec.round));
                }
            }
        }
    }
    Verdict::new(
        bad.is_empty() && checked > 0,
        format!(
            "{checked} (round, group) cells checked, {} with non-zero variance",
            bad.len()
        ),
    )
}

fn ac4() -> Verdict {
    let cfg = SimulationConfig::default();
    let support = [10.0, 7.0, 5.0, 2.0];
    let cases = [
        (Action::Cooperate, 0.1, 10.0),
        (Action::Cooperate, 0.3, 7.0),
        (Action::Compete, 0.1, 5.0),
        (Action::Compete, 0.3, 2.0),
    ];
    let exhaustive_ok = cases
        .iter()
        .all(|&(a, b, want)| assign_reward(a, b, &cfg).0 == want);

    let mut rng = RandomStream::new(4);
    let mut rounds = 0usize;
    let mut seen = BTreeMap::new();
    let mut outside = 0usize;
    let mut run = 0u64;
    while rounds < 100_000 {
        let config = SimulationConfig {
            seed: mix_seed(4, run),
            bias_init_max: rng.next_f64(),
            propagation_enabled: rng.bernoulli(0.5),
            fairness_enabled: rng.bernoulli(0.5),
            propagation_rate: if rng.bernoulli(0.5) {
                rng.next_f64()
            } else {
                0.0
            },
            ..Default::default()
        };
        run += 1;
        let r = fairmas::run_simulation(config).unwrap();
        for rec in &r.rounds {
            for a in &rec.per_agent {
                if support.contains(&a.raw_reward) {
                    *seen.entry(a.raw_reward as i64).or_insert(0usize) += 1;
                } else {
                    outside += 1;
                }
            }
        }
        rounds += r.rounds.len();
    }
    Verdict::new(
        exhaustive_ok && outside == 0,
        format!(
            "4 exhaustive cases {}, {rounds} fuzzed rounds, {outside} rewards outside {{10, 7, 5, 2}}, seen {:?}",
            if exhaustive_ok { "ok" } else { "WRONG" },
            seen
        ),
    )
}

/// Frequency-counting oracle: per group (n, positives, y1, y1 and positive).
fn count(rows: &[(bool, bool, usize)]) -> HashMap<usize, [u32; 4]> {
    let mut c: HashMap<usize, [u32; 4]> = HashMap::new();
    for &(yh, y, g) in rows {
        let e = c.entry(g).or_default();
        e[0] += 1;
        e[1] += yh as u32;
        e[2] += y as u32;
        e[3] += (y && yh) as u32;
    }
    c
}

fn spread(rates: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = rates.collect();
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    hi - lo
}

fn ac5() -> Verdict {
    let mut rng = RandomStream::new(5);
    let labels = ["g0", "g1", "g2"];
    let mut mismatches = Vec::new();
    let mut eo_undefined = 0;
    for t in 0..1000 {
        let n_rows = 1 + rng.index_below(50);
        let n_groups = 1 + rng.index_below(3);
        let rows: Vec<(bool, bool, usize)> = (0..n_rows)
            .map(|_| {
                (
                    rng.bernoulli(0.5),
                    rng.bernoulli(0.5),
                    rng.index_below(n_groups),
                )
            })
            .collect();
        let table =
            OutcomeTable::from_triples(rows.iter().map(|&(a, b, g)| (a, b, labels[g]))).unwrap();
        let c = count(&rows);
        let dp_oracle = spread(c.values().map(|k| k[1] as f64 / k[0] as f64));
        let dp = demographic_parity_gap(&table);
        if (dp - dp_oracle).abs() > 1e-12 {
            mismatches.push(format!("table {t}: dp {dp} vs {dp_oracle}"));
        }
        let eo = equalized_odds_gap(&table);
        if c.values().any(|k| k[2] == 0) {
            eo_undefined += 1;
            if eo.is_ok() {
                mismatches.push(format!("table {t}: eo defined without y=1 rows"));
            }
        } else {
            let eo_oracle = spread(c.values().map(|k| k[3] as f64 / k[2] as f64));
            match eo {
                Ok(v) if (v - eo_oracle).abs() <= 1e-12 => {}
                other => mismatches.push(format!("table {t}: eo {other:?} vs {eo_oracle}")),
            }
        }
    }
    Verdict::new(
        mismatches.is_empty(),
        format!(
            "1000 tables, {} mismatches ({eo_undefined} with equalized odds undefined){}",
            mismatches.len(),
            mismatches
                .first()
                .map(|m| format!(", first: {m}"))
                .unwrap_or_default()
        ),
    )
}

type TermTable = HashMap<Vec<usize>, Vec<(f64, f64, f64)>>;

fn all_profiles(sizes: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for &s in sizes {
        out = out
            .into_iter()
            .flat_map(|p| {
                (0..s).map(move |a| {
                    let mut q = p.clone();
                    q.push(a);
                    q
                })
            })
            .collect();
    }
    out
}

fn ac6() -> Verdict {
    let mut rng = RandomStream::new(6);
    let mut mismatches = Vec::new();
    let mut ls_hits = 0;
    let mut ls_exceed = 0;
    let mut infeasible = 0;
    let n_problems = 200;
    for k in 0..n_problems {
        let n = 1 + rng.index_below(3);
        let sizes: Vec<usize> = (0..n).map(|_| 1 + rng.index_below(4)).collect();
        let weights: Vec<(f64, f64, f64)> = (0..n)
            .map(|_| {
                (
                    2.0 * rng.next_f64(),
                    2.0 * rng.next_f64(),
                    2.0 * rng.next_f64(),
                )
            })
            .collect();
        let profiles = all_profiles(&sizes);
        // coarse values so ties occur
        let mut draw = |scale: f64| (rng.next_f64() * scale * 4.0).round() / 4.0;
        let table: TermTable = profiles
            .iter()
            .map(|p| {
                (
                    p.clone(),
                    (0..n).map(|_| (draw(10.0), draw(1.0), draw(1.0))).collect(),
                )
            })
            .collect();
        let constrained = rng.bernoulli(0.5);
        let measure: HashMap<Vec<usize>, f64> = profiles
            .iter()
            .map(|p| (p.clone(), rng.next_f64()))
            .collect();
        let delta = rng.next_f64();

        let table = Arc::new(table);
        let measure = Arc::new(measure);
        let t2 = Arc::clone(&table);
        let mut problem = OptimizationProblem::new(
            sizes
                .iter()
                .map(|&s| (0..s).map(|a| format!("a{a}")).collect())
                .collect(),
            weights
                .iter()
                .map(|&(a, b, g)| UtilityWeights::new(a, b, g))
                .collect(),
            move |p: &[usize], i: usize| {
                let (e, b, c) = t2[p][i];
                Terms::new(e, b, c)
            },
        )
        .unwrap();
        if constrained {
            let m2 = Arc::clone(&measure);
            problem =
                problem.with_constraint(Constraint::new("m", delta, move |p: &[usize]| m2[p]));
        }

        // independent enumerator
        let mut best: Option<(Vec<usize>, f64)> = None;
        for p in &profiles {
            if constrained && measure[p] > delta {
                continue;
            }
            let v: f64 = (0..n)
                .map(|i| {
                    let (e, b, c) = table[p][i];
                    let (wa, wb, wg) = weights[i];
                    wa * e - wb * b - wg * c
                })
                .sum();
            if best.as_ref().is_none_or(|(_, bv)| v > *bv) {
                best = Some((p.clone(), v));
            }
        }

        let bf = solve_bruteforce(&problem).unwrap();
        let ls = solve_localsearch(&problem, mix_seed(6, k), 200);
        match (&best, &bf) {
            (None, Solution::Infeasible) => {
                infeasible += 1;
                if ls.feasible {
                    mismatches.push(format!(
                        "problem {k}: local search feasible on infeasible problem"
                    ));
                }
                ls_hits += 1;
            }
            (Some((op, ov)), Solution::Optimal { profile, value }) => {
                if op != profile || ov != value {
                    mismatches.push(format!(
                        "problem {k}: {profile:?}={value} vs oracle {op:?}={ov}"
                    ));
                }
                if ls.feasible && ls.value == *value {
                    ls_hits += 1;
                }
                if ls.value > *value {
                    ls_exceed += 1;
                }
            }
            _ => mismatches.push(format!("problem {k}: feasibility disagrees")),
        }
    }
    let hit_rate = ls_hits as f64 / n_problems as f64;
    Verdict::new(
        mismatches.is_empty() && hit_rate >= 0.95 && ls_exceed == 0,
        format!(
            "{n_problems} problems ({infeasible} infeasible), brute-force mismatches {}, local search optimal {:.1}% (need >= 95%), exceeded {ls_exceed}",
            mismatches.len(),
            100.0 * hit_rate
        ),
    )
}

/// Exhaustive deviation search on an explicit table keyed by profile.
fn oracle_nash(sizes: &[usize], pay: &HashMap<Vec<usize>, Vec<f64>>) -> Vec<Vec<usize>> {
    all_profiles(sizes)
        .into_iter()
        .filter(|p| {
            (0..sizes.len()).all(|i| {
                (0..sizes[i]).all(|s| {
                    let mut q = p.clone();
                    q[i] = s;
                    pay[&q][i] <= pay[p][i]
                })
            })
        })
        .collect()
}

fn ac7() -> Verdict {
    let pd = find_pure_nash(&NormalFormGame::prisoners_dilemma(5.0, 3.0, 1.0, 0.0)).unwrap();
    let mp = find_pure_nash(&NormalFormGame::matching_pennies()).unwrap();
    let pd_ok = pd == vec![vec![1, 1]];
    let mp_ok = mp.is_empty();

    let mut rng = RandomStream::new(7);
    let mut mismatches = 0;
    let mut with_eq = 0;
    for k in 0..500 {
        let s = if k % 2 == 0 { 2 } else { 3 };
        let sizes = [s, s];
        // small integer payoffs so ties (weak best responses) are common
        let pay: HashMap<Vec<usize>, Vec<f64>> = all_profiles(&sizes)
            .into_iter()
            .map(|p| {
                (
                    p,
                    vec![rng.index_below(4) as f64, rng.index_below(4) as f64],
                )
            })
            .collect();
        let pay = Arc::new(pay);
        let p2 = Arc::clone(&pay);
        let game = NormalFormGame::new(
            sizes
                .iter()
                .map(|&n| (0..n).map(|a| format!("s{a}")).collect())
                .collect(),
            move |p: &[usize]| p2[p].clone(),
        )
        .unwrap();
        let got = find_pure_nash(&game).unwrap();
        let want = oracle_nash(&sizes, &pay);
        if !want.is_empty() {
            with_eq += 1;
        }
        if got != want {
            mismatches += 1;
        }
    }
    Verdict::new(
        pd_ok && mp_ok && mismatches == 0,
        format!(
            "prisoner's dilemma {pd:?}, matching pennies {mp:?}, 500 random games ({with_eq} with an equilibrium), {mismatches} mismatches"
        ),
    )
}

fn ac8() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let run_in = |sub: &str| {
        let out = dir.path().join(sub);
        cmd_run(&CommonOptions {
            seed: Some(2024),
            out: Some(out.clone()),
            ..Default::default()
        })
        .unwrap();
        let batch = BatchOptions {
            common: CommonOptions {
                seed: Some(2024),
                out: Some(out.clone()),
                ..Default::default()
            },
            seeds: 50,
            conditions: Conditions::Both,
        };
        cmd_batch(&batch).unwrap();
        ["rounds.csv", "summary.json", "batch.json"].map(|f| std::fs::read(out.join(f)).unwrap())
    };
    let first = run_in("first");
    let second = run_in("second");
    let same: Vec<bool> = first.iter().zip(&second).map(|(a, b)| a == b).collect();
    Verdict::new(
        same.iter().all(|&s| s),
        format!(
            "rounds.csv identical {}, summary.json identical {}, batch.json identical {}",
            same[0], same[1], same[2]
        ),
    )
}

/// Paired run: same seed and population, agent 0 has true bias 0.25.
fn agent0_mean(adversarial: bool, seed: u64) -> (f64, f64) {
    let config = SimulationConfig {
        n_rounds: 1000,
        seed,
        propagation_enabled: true,
        adversarial_ids: if adversarial {
            [0].into_iter().collect()
        } else {
            Default::default()
        },
        ..Default::default()
    };
    let mut rng = RandomStream::new(seed);
    let mut agents = init_population(&config, &mut rng);
    agents[0].bias = 0.25;
    agents[0].strategy = if adversarial {
        Strategy::Adversarial
    } else {
        Strategy::Honest
    };
    let mut sim = Simulation::with_agents(config, agents, rng);
    while !sim.is_finished() {
        sim.step_round().unwrap();
    }
    let r = sim.finish();
    let n = r.rounds.len() as f64;
    let raw = r
        .rounds
        .iter()
        .map(|x| x.per_agent[0].raw_reward)
        .sum::<f64>()
        / n;
    let adjusted = r
        .rounds
        .iter()
        .map(|x| x.per_agent[0].adjusted_reward)
        .sum::<f64>()
        / n;
    (raw, adjusted)
}

fn ac9() -> Verdict {
    let seed = 42;
    let honest = agent0_mean(false, seed);
    let adversarial = agent0_mean(true, seed);
    let diff = adversarial.0 - honest.0;
    Verdict::new(
        diff >= 1.0,
        format!(
            "mean reward after penalty: adversarial {:.3}, honest {:.3}, difference {diff:.3} (need >= 1.0)",
            adversarial.0, honest.0
        ),
    )
    .note(format!(
        "after the within-group median adjustment the difference is {:.3}",
        adversarial.1 - honest.1
    ))
}

fn ac10() -> Verdict {
    let mut rng = RandomStream::new(10);
    let mut worst_total = 0.0f64;
    let mut worst_equal = 0.0f64;
    for round in 0..1000 {
        let n = 2 + rng.index_below(19);
        let mut groups: BTreeMap<usize, GroupLabel> = (0..n)
            .map(|id| {
                (
                    id,
                    if rng.bernoulli(0.5) {
                        GroupLabel::a()
                    } else {
                        GroupLabel::b()
                    },
                )
            })
            .collect();
        // both groups present
        groups.insert(0, GroupLabel::a());
        groups.insert(1, GroupLabel::b());
        let rewards: RewardMap = (0..n).map(|id| (id, 20.0 * rng.next_f64())).collect();
        let ctx = RoundContext::new(rewards.clone(), groups.clone(), round + 1).unwrap();
        let report = BiasReport {
            metric_name: "demographic_parity".into(),
            gap: 1.0,
            threshold: 0.1,
            violated: true,
            per_group: BTreeMap::new(),
        };
        let out = corrective_redistribution(&ctx, &report).unwrap();
        let before: f64 = rewards.values().sum();
        let after: f64 = out.values().sum();
        let group_total = |g: GroupLabel| -> f64 {
            groups
                .iter()
                .filter(|(_, x)| **x == g)
                .map(|(id, _)| out[id])
                .sum()
        };
        worst_total = worst_total.max((before - after).abs());
        worst_equal =
            worst_equal.max((group_total(GroupLabel::a()) - group_total(GroupLabel::b())).abs());
    }
    Verdict::new(
        worst_total <= 1e-9 && worst_equal <= 1e-9,
        format!("1000 contexts, max total drift {worst_total:.2e}, max group-total difference {worst_equal:.2e} (tolerance 1e-9)"),
    )
}

/// Name, check and runtime limit in seconds.
type Criterion = (&'static str, fn() -> Verdict, u64);

fn main() {
    let criteria: [Criterion; 10] = [
        ("fairness-gap reduction", ac1, 10),
        ("final cumulative magnitudes", ac2, 10),
        ("within-group equalization", ac3, 5),
        ("reward support", ac4, 5),
        ("metric correctness", ac5, 5),
        ("optimizer oracle equivalence", ac6, 30),
        ("nash checker", ac7, 5),
        ("determinism", ac8, 5),
        ("adversarial exploit", ac9, 5),
        ("conservation", ac10, 5),
    ];
    let mut failed = 0;
    println!();
    for (i, (name, f, limit)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let v = f();
        let elapsed = start.elapsed();
        let in_time = elapsed < Duration::from_secs(*limit);
        let pass = v.pass && in_time;
        if !pass {
            failed += 1;
        }
        println!(
            "AC{:<2} {} {name}: {} [{:.2} s, limit {limit} s{}]",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            v.detail,
            elapsed.as_secs_f64(),
            if in_time { "" } else { ", EXCEEDED" }
        );
        for note in v.notes {
            println!("       note: {note}");
        }
    }
    println!(
        "\nacceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
