//! File formats written by the commands.
//!
//! CSV files have a header row, comma separators, `.` decimals and LF line
//! endings. Floats are written in shortest round-trip form, so reading a
//! file back reproduces the values exactly.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use fairmas::config::GroupLabel;
use fairmas::engine::{Action, SimulationResult};
use fairmas::SimulationConfig;
use serde::{Deserialize, Serialize};

/// One row of `rounds.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRow {
    pub round: usize,
    pub resource: f64,
    pub agent_id: usize,
    pub group: String,
    pub action: String,
    pub raw_reward: f64,
    pub penalty_applied: bool,
    pub adjusted_reward: f64,
    #[serde(rename = "cum_A")]
    pub cum_a: f64,
    #[serde(rename = "cum_B")]
    pub cum_b: f64,
}

pub fn round_rows(result: &SimulationResult) -> Vec<RoundRow> {
    let (a, b) = (GroupLabel::a(), GroupLabel::b());
    result
        .rounds
        .iter()
        .flat_map(|rec| {
            let cum_a = rec.cumulative_by_group.get(&a).copied().unwrap_or(0.0);
            let cum_b = rec.cumulative_by_group.get(&b).copied().unwrap_or(0.0);
            rec.per_agent.iter().map(move |r| RoundRow {
                round: rec.round,
                resource: rec.resource,
                agent_id: r.id,
                group: r.group.to_string(),
                action: r.action.as_str().to_string(),
                raw_reward: r.raw_reward,
                penalty_applied: r.penalty_applied,
                adjusted_reward: r.adjusted_reward,
                cum_a,
                cum_b,
            })
        })
        .collect()
}

fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w)
}

pub fn write_csv<W: Write, T: Serialize>(w: W, rows: &[T]) -> csv::Result<()> {
    let mut wtr = csv_writer(w);
    for r in rows {
        wtr.serialize(r)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_csv<R: Read, T: for<'de> Deserialize<'de>>(r: R) -> csv::Result<Vec<T>> {
    csv::Reader::from_reader(r).deserialize().collect()
}

/// Checks that every action string in `rows` names an [`Action`].
pub fn actions_valid(rows: &[RoundRow]) -> bool {
    rows.iter().all(|r| r.action.parse::<Action>().is_ok())
}

/// Contents of `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub fairness_enabled: bool,
    pub n_rounds: usize,
    pub final_totals: BTreeMap<GroupLabel, f64>,
    pub final_gap: f64,
    pub config: SimulationConfig,
}

impl RunSummary {
    pub fn from_result(result: &SimulationResult) -> Self {
        Self {
            seed: result.config.seed,
            fairness_enabled: result.config.fairness_enabled,
            n_rounds: result.rounds.len(),
            final_totals: result.final_totals(),
            final_gap: result.final_gap(),
            config: result.config.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Condition {
    FairnessOn,
    FairnessOff,
}

impl Condition {
    pub fn enabled(self) -> bool {
        self == Condition::FairnessOn
    }

    pub fn label(self) -> &'static str {
        match self {
            Condition::FairnessOn => "on",
            Condition::FairnessOff => "off",
        }
    }
}

/// Final-gap statistics of one condition over a batch of seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub n_seeds: usize,
    pub condition: Condition,
    pub per_seed_final_gaps: Vec<f64>,
    pub mean_gap: f64,
    pub median_gap: f64,
    /// Mean gap with fairness on divided by mean gap with fairness off;
    /// present when both conditions ran.
    pub gap_reduction_ratio: Option<f64>,
}

impl BatchSummary {
    pub fn new(condition: Condition, gaps: Vec<f64>) -> Self {
        let n = gaps.len();
        let mean_gap = gaps.iter().sum::<f64>() / n as f64;
        let median_gap = fairmas::interventions::median(&gaps).unwrap_or(f64::NAN);
        Self {
            n_seeds: n,
            condition,
            per_seed_final_gaps: gaps,
            mean_gap,
            median_gap,
            gap_reduction_ratio: None,
        }
    }
}

/// Sets the on/off ratio on both summaries when both conditions are present.
pub fn attach_ratio(summaries: &mut [BatchSummary]) {
    let mean = |c| {
        summaries
            .iter()
            .find(|s| s.condition == c)
            .map(|s| s.mean_gap)
    };
    if let (Some(on), Some(off)) = (mean(Condition::FairnessOn), mean(Condition::FairnessOff)) {
        let ratio = on / off;
        for s in summaries.iter_mut() {
            s.gap_reduction_ratio = Some(ratio);
        }
    }
}

/// Contents of `batch.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchReport {
    pub base_seed: u64,
    /// How run seeds are derived from the base seed.
    pub seed_derivation: String,
    pub summaries: Vec<BatchSummary>,
}

pub const SEED_DERIVATION: &str = "seed_i = splitmix64(base + i * 0x9E3779B97F4A7C15)";

/// One row of `comparison.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub seed_index: usize,
    pub seed: u64,
    pub condition: String,
    pub total_a: f64,
    pub total_b: f64,
    pub gap: f64,
}

impl ComparisonRow {
    pub fn new(seed_index: usize, condition: Condition, result: &SimulationResult) -> Self {
        let t = result.final_totals();
        Self {
            seed_index,
            seed: result.config.seed,
            condition: condition.label().to_string(),
            total_a: t.get(&GroupLabel::a()).copied().unwrap_or(0.0),
            total_b: t.get(&GroupLabel::b()).copied().unwrap_or(0.0),
            gap: result.final_gap(),
        }
    }
}
