//! Group fairness metrics and bias detection.
//!
//! Rates are plain empirical frequencies. With more than two groups every
//! gap is the largest pairwise difference, which equals `max rate - min rate`.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Read;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{AgentState, GroupLabel};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("outcome table is empty")]
    EmptyTable,
    #[error("group `{0}` has no rows")]
    MissingGroup(GroupLabel),
    #[error("equalized odds undefined for group `{0}`: no rows with y = 1")]
    UndefinedForGroup(GroupLabel),
    #[error("weights sum to {sum}, deviating from 1 by {deviation:e}")]
    NotNormalized { sum: f64, deviation: f64 },
    #[error("expected exactly two groups, found {0}")]
    GroupCount(usize),
    #[error("line {line}: {message}")]
    Csv { line: u64, message: String },
}

pub type Result<T> = std::result::Result<T, MetricsError>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Outcome {
    /// Predicted outcome.
    pub y_hat: bool,
    /// True outcome.
    pub y: bool,
    pub attribute: GroupLabel,
}

/// Observations of predicted outcome, true outcome and sensitive attribute.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutcomeTable {
    rows: Vec<Outcome>,
}

impl OutcomeTable {
    pub fn new(rows: Vec<Outcome>) -> Result<Self> {
        if rows.is_empty() {
            return Err(MetricsError::EmptyTable);
        }
        Ok(Self { rows })
    }

    /// Builds a table from `(y_hat, y, attribute)` triples.
    pub fn from_triples<'a, I>(triples: I) -> Result<Self>
    where
        I: IntoIterator<Item = (bool, bool, &'a str)>,
    {
        Self::new(
            triples
                .into_iter()
                .map(|(y_hat, y, a)| Outcome {
                    y_hat,
                    y,
                    attribute: GroupLabel::new(a),
                })
                .collect(),
        )
    }

    pub fn rows(&self) -> &[Outcome] {
        &self.rows
    }

    pub fn groups(&self) -> Vec<GroupLabel> {
        let mut g: Vec<_> = self.rows.iter().map(|r| r.attribute.clone()).collect();
        g.sort();
        g.dedup();
        g
    }

    /// Reads CSV with header `y_hat,y,attribute`. Errors cite the 1-based
    /// line of the offending record.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(reader);
        let header = rdr.headers().map_err(|e| MetricsError::Csv {
            line: 1,
            message: e.to_string(),
        })?;
        let expected = ["y_hat", "y", "attribute"];
        if header.iter().map(str::trim).ne(expected) {
            return Err(MetricsError::Csv {
                line: 1,
                message: format!(
                    "expected header `y_hat,y,attribute`, got `{}`",
                    header.iter().collect::<Vec<_>>().join(",")
                ),
            });
        }
        let mut rows = Vec::new();
        for record in rdr.records() {
            let record = record.map_err(|e| MetricsError::Csv {
                line: e.position().map_or(0, |p| p.line()),
                message: e.to_string(),
            })?;
            let line = record.position().map_or(0, |p| p.line());
            let bad = |message: String| MetricsError::Csv { line, message };
            if record.len() != 3 {
                return Err(bad(format!("expected 3 fields, got {}", record.len())));
            }
            let bit = |field: &str, name: &str| match field.trim() {
                "0" => Ok(false),
                "1" => Ok(true),
                other => Err(bad(format!("{name} must be 0 or 1, got `{other}`"))),
            };
            let attribute = record[2].trim();
            if attribute.is_empty() {
                return Err(bad("attribute is empty".into()));
            }
            rows.push(Outcome {
                y_hat: bit(&record[0], "y_hat")?,
                y: bit(&record[1], "y")?,
                attribute: GroupLabel::new(attribute),
            });
        }
        Self::new(rows)
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("y_hat,y,attribute\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{}\n",
                r.y_hat as u8, r.y as u8, r.attribute
            ));
        }
        out
    }
}

fn rates_by_group(rows: impl Iterator<Item = (GroupLabel, bool)>) -> BTreeMap<GroupLabel, f64> {
    let mut counts: BTreeMap<GroupLabel, (usize, usize)> = BTreeMap::new();
    for (g, positive) in rows {
        let e = counts.entry(g).or_default();
        e.0 += positive as usize;
        e.1 += 1;
    }
    counts
        .into_iter()
        .map(|(g, (pos, n))| (g, pos as f64 / n as f64))
        .collect()
}

/// `P(Ŷ = 1 | A = a)` for every group in the table.
pub fn positive_rates(table: &OutcomeTable) -> BTreeMap<GroupLabel, f64> {
    rates_by_group(table.rows.iter().map(|r| (r.attribute.clone(), r.y_hat)))
}

/// `P(Ŷ = 1 | Y = 1, A = a)` for every group in the table.
pub fn true_positive_rates(table: &OutcomeTable) -> Result<BTreeMap<GroupLabel, f64>> {
    for g in table.groups() {
        if !table.rows.iter().any(|r| r.attribute == g && r.y) {
            return Err(MetricsError::UndefinedForGroup(g));
        }
    }
    Ok(rates_by_group(
        table
            .rows
            .iter()
            .filter(|r| r.y)
            .map(|r| (r.attribute.clone(), r.y_hat)),
    ))
}

fn spread(rates: &BTreeMap<GroupLabel, f64>) -> f64 {
    let (lo, hi) = rates
        .values()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &r| {
            (lo.min(r), hi.max(r))
        });
    if rates.is_empty() {
        0.0
    } else {
        hi - lo
    }
}

/// Largest pairwise difference in positive-prediction rate between groups.
pub fn demographic_parity_gap(table: &OutcomeTable) -> f64 {
    spread(&positive_rates(table))
}

/// Demographic-parity gap restricted to `groups`; every listed group must
/// occur in the table.
pub fn demographic_parity_gap_for(table: &OutcomeTable, groups: &[GroupLabel]) -> Result<f64> {
    let rates = positive_rates(table);
    let mut selected = BTreeMap::new();
    for g in groups {
        let r = rates
            .get(g)
            .ok_or_else(|| MetricsError::MissingGroup(g.clone()))?;
        selected.insert(g.clone(), *r);
    }
    Ok(spread(&selected))
}

/// Largest pairwise difference in true-positive rate between groups.
pub fn equalized_odds_gap(table: &OutcomeTable) -> Result<f64> {
    Ok(spread(&true_positive_rates(table)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasContribution {
    pub id: usize,
    pub bias: f64,
    pub weight: f64,
    pub contribution: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemBiasReport {
    pub per_agent: Vec<BiasContribution>,
    pub total: f64,
}

/// Tolerance on `Σ weights = 1`.
pub const WEIGHT_TOLERANCE: f64 = 1e-9;

/// Influence-weighted system bias `Σ wᵢ·Bᵢ`.
pub fn system_bias(agents: &[AgentState]) -> Result<SystemBiasReport> {
    let sum: f64 = agents.iter().map(|a| a.weight).sum();
    let deviation = (sum - 1.0).abs();
    if deviation.is_nan() || deviation > WEIGHT_TOLERANCE {
        return Err(MetricsError::NotNormalized { sum, deviation });
    }
    let per_agent: Vec<_> = agents
        .iter()
        .map(|a| BiasContribution {
            id: a.id,
            bias: a.bias,
            weight: a.weight,
            contribution: a.weight * a.bias,
        })
        .collect();
    let total = per_agent.iter().map(|c| c.contribution).sum();
    Ok(SystemBiasReport { per_agent, total })
}

/// Sum of cumulative reward per group.
pub fn group_totals(agents: &[AgentState]) -> BTreeMap<GroupLabel, f64> {
    let mut totals = BTreeMap::new();
    for a in agents {
        *totals.entry(a.group.clone()).or_insert(0.0) += a.cumulative_reward;
    }
    totals
}

/// Absolute difference between the two groups' cumulative reward totals.
pub fn group_reward_gap(agents: &[AgentState]) -> Result<f64> {
    let totals = group_totals(agents);
    match totals.values().collect::<Vec<_>>().as_slice() {
        [a, b] => Ok((*a - *b).abs()),
        other => Err(MetricsError::GroupCount(other.len())),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FairnessMetric {
    DemographicParity,
    EqualizedOdds,
}

impl FairnessMetric {
    pub fn name(self) -> &'static str {
        match self {
            FairnessMetric::DemographicParity => "demographic_parity",
            FairnessMetric::EqualizedOdds => "equalized_odds",
        }
    }
}

impl fmt::Display for FairnessMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FairnessMetric {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "dp" | "demographic_parity" | "demographic-parity" => Ok(Self::DemographicParity),
            "eo" | "equalized_odds" | "equalized-odds" => Ok(Self::EqualizedOdds),
            _ => Err(format!(
                "unknown metric `{s}` (expected demographic_parity or equalized_odds)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasReport {
    pub metric_name: String,
    pub gap: f64,
    pub threshold: f64,
    /// `gap > threshold`; a gap equal to the threshold is feasible.
    pub violated: bool,
    pub per_group: BTreeMap<GroupLabel, f64>,
}

pub fn detect_bias(
    table: &OutcomeTable,
    metric: FairnessMetric,
    threshold: f64,
) -> Result<BiasReport> {
    let per_group = match metric {
        FairnessMetric::DemographicParity => positive_rates(table),
        FairnessMetric::EqualizedOdds => true_positive_rates(table)?,
    };
    let gap = spread(&per_group);
    Ok(BiasReport {
        metric_name: metric.name().to_string(),
        gap,
        threshold,
        violated: gap > threshold,
        per_group,
    })
}
