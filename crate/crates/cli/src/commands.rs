use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use fairmas::config::GroupLabel;
use fairmas::engine::{run_simulation, SimulationResult};
use fairmas::metrics::{detect_bias, BiasReport, FairnessMetric, OutcomeTable};
use fairmas::rng::mix_seed;
use fairmas::SimulationConfig;
use rayon::prelude::*;

use crate::chart::emit_chart;
use crate::output::{
    attach_ratio, round_rows, write_csv, BatchReport, BatchSummary, ComparisonRow, Condition,
    RunSummary, SEED_DERIVATION,
};
use crate::{CliError, EXIT_OK, EXIT_VIOLATION, OUT_ENV};

pub const DEFAULT_SEEDS: usize = 200;
pub const ROUNDS_FILE: &str = "rounds.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const COMPARISON_FILE: &str = "comparison.csv";
pub const BATCH_FILE: &str = "batch.json";
pub const CHART_FILE: &str = "cumulative_rewards.svg";

/// Illustrative single-run figures quoted for reference only.
pub const REFERENCE_EXAMPLE_ON: (f64, f64) = (375.0, 370.0);
pub const REFERENCE_EXAMPLE_OFF: (f64, f64) = (390.0, 345.0);

#[derive(Debug, Parser)]
#[command(
    name = "fairmas",
    version,
    about = "Seeded multi-agent fairness simulation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one simulation and write rounds.csv and summary.json
    Run(CommonOptions),
    /// Run fairness on and off over a seed set and write comparison.csv and a chart
    Reproduce(ReproduceOptions),
    /// Run conditions over a seed set and write batch.json
    Batch(BatchOptions),
    /// Audit an outcome table; exits 3 when the gap exceeds delta
    Metrics(MetricsOptions),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Switch {
    On,
    Off,
}

impl Switch {
    fn enabled(self) -> bool {
        self == Switch::On
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonOptions {
    /// Config file of `key = value` lines
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long, value_name = "U64")]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub fairness: Option<Switch>,
    #[arg(long, value_enum)]
    pub propagation: Option<Switch>,
    /// Output directory [default: $FAIRMAS_OUT, else the current directory]
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ReproduceOptions {
    #[command(flatten)]
    pub common: CommonOptions,
    #[arg(long, value_name = "N", default_value_t = DEFAULT_SEEDS, value_parser = parse_seed_count)]
    pub seeds: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Conditions {
    Both,
    On,
    Off,
}

impl Conditions {
    fn list(self) -> &'static [Condition] {
        match self {
            Conditions::Both => &[Condition::FairnessOn, Condition::FairnessOff],
            Conditions::On => &[Condition::FairnessOn],
            Conditions::Off => &[Condition::FairnessOff],
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct BatchOptions {
    #[command(flatten)]
    pub common: CommonOptions,
    #[arg(long, value_name = "N", default_value_t = DEFAULT_SEEDS, value_parser = parse_seed_count)]
    pub seeds: usize,
    #[arg(long, value_enum, default_value = "both")]
    pub conditions: Conditions,
}

#[derive(Debug, Clone, Args)]
pub struct MetricsOptions {
    /// CSV with header `y_hat,y,attribute`
    #[arg(value_name = "CSV")]
    pub path: PathBuf,
    /// demographic_parity (dp) or equalized_odds (eo)
    #[arg(long, default_value = "demographic_parity")]
    pub metric: FairnessMetric,
    #[arg(long, default_value_t = 0.1)]
    pub delta: f64,
}

fn parse_seed_count(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(n) => Ok(n),
        Err(e) => Err(e.to_string()),
    }
}

fn out_dir(opt: &Option<PathBuf>) -> PathBuf {
    opt.clone()
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

/// Defaults, then the config file, then flag overrides.
pub fn load_config(opts: &CommonOptions) -> Result<SimulationConfig, CliError> {
    let mut config = match &opts.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            SimulationConfig::from_config_str(&text)
                .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?
        }
        None => SimulationConfig::default(),
    };
    if let Some(seed) = opts.seed {
        config.seed = seed;
    }
    if let Some(f) = opts.fairness {
        config.fairness_enabled = f.enabled();
    }
    if let Some(p) = opts.propagation {
        config.propagation_enabled = p.enabled();
    }
    config.validate().map_err(CliError::input)
}

fn simulate(config: SimulationConfig) -> Result<SimulationResult, CliError> {
    run_simulation(config).map_err(CliError::input)
}

fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let path = dir.join(name);
    fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
    Ok(path)
}

fn csv_bytes<T: serde::Serialize>(rows: &[T]) -> Vec<u8> {
    let mut buf = Vec::new();
    write_csv(&mut buf, rows).expect("in-memory CSV write");
    buf
}

fn json_bytes<T: serde::Serialize>(value: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s.into_bytes()
}

#[derive(Debug)]
pub struct RunOutput {
    pub summary: RunSummary,
    pub rounds_path: PathBuf,
    pub summary_path: PathBuf,
}

pub fn cmd_run(opts: &CommonOptions) -> Result<RunOutput, CliError> {
    let config = load_config(opts)?;
    let result = simulate(config)?;
    let dir = out_dir(&opts.out);
    let summary = RunSummary::from_result(&result);
    let rounds_path = write_file(&dir, ROUNDS_FILE, &csv_bytes(&round_rows(&result)))?;
    let summary_path = write_file(&dir, SUMMARY_FILE, &json_bytes(&summary))?;
    Ok(RunOutput {
        summary,
        rounds_path,
        summary_path,
    })
}

/// Runs `condition` over `n` seeds derived from `base`, ordered by index.
pub fn run_condition(
    base: &SimulationConfig,
    condition: Condition,
    n: usize,
) -> Result<Vec<SimulationResult>, CliError> {
    (0..n)
        .into_par_iter()
        .map(|i| {
            simulate(SimulationConfig {
                seed: mix_seed(base.seed, i as u64),
                fairness_enabled: condition.enabled(),
                ..base.clone()
            })
        })
        .collect()
}

#[derive(Debug)]
pub struct ReproduceOutput {
    pub rows: Vec<ComparisonRow>,
    pub summaries: Vec<BatchSummary>,
    pub comparison_path: PathBuf,
    pub chart_path: PathBuf,
    /// Human-readable report, one line per entry.
    pub lines: Vec<String>,
}

fn totals_line(label: &str, result: &SimulationResult) -> String {
    let t = result.final_totals();
    let get = |g: GroupLabel| t.get(&g).copied().unwrap_or(0.0);
    format!(
        "{label}: Group A = {}, Group B = {}, gap = {}",
        get(GroupLabel::a()),
        get(GroupLabel::b()),
        result.final_gap()
    )
}

pub fn cmd_reproduce(opts: &ReproduceOptions) -> Result<ReproduceOutput, CliError> {
    let base = load_config(&opts.common)?;
    let on = run_condition(&base, Condition::FairnessOn, opts.seeds)?;
    let off = run_condition(&base, Condition::FairnessOff, opts.seeds)?;

    let mut rows = Vec::with_capacity(2 * opts.seeds);
    for (i, (a, b)) in on.iter().zip(&off).enumerate() {
        rows.push(ComparisonRow::new(i, Condition::FairnessOn, a));
        rows.push(ComparisonRow::new(i, Condition::FairnessOff, b));
    }
    let gaps = |rs: &[SimulationResult]| rs.iter().map(SimulationResult::final_gap).collect();
    let mut summaries = vec![
        BatchSummary::new(Condition::FairnessOn, gaps(&on)),
        BatchSummary::new(Condition::FairnessOff, gaps(&off)),
    ];
    attach_ratio(&mut summaries);

    let dir = out_dir(&opts.common.out);
    let comparison_path = write_file(&dir, COMPARISON_FILE, &csv_bytes(&rows))?;
    let svg = emit_chart(&on[0], &off[0]).map_err(CliError::input)?;
    let chart_path = write_file(&dir, CHART_FILE, svg.as_bytes())?;

    let mut lines = vec![
        format!("seed 0 (seed = {}):", on[0].config.seed),
        totals_line("  fairness ON ", &on[0]),
        totals_line("  fairness OFF", &off[0]),
        format!(
            "paper example, fairness ON:  Group A = {}, Group B = {}, gap = {}",
            REFERENCE_EXAMPLE_ON.0,
            REFERENCE_EXAMPLE_ON.1,
            REFERENCE_EXAMPLE_ON.0 - REFERENCE_EXAMPLE_ON.1
        ),
        format!(
            "paper example, fairness OFF: Group A = {}, Group B = {}, gap = {}",
            REFERENCE_EXAMPLE_OFF.0,
            REFERENCE_EXAMPLE_OFF.1,
            REFERENCE_EXAMPLE_OFF.0 - REFERENCE_EXAMPLE_OFF.1
        ),
    ];
    for s in &summaries {
        let name = match s.condition {
            Condition::FairnessOn => "fairness ON",
            Condition::FairnessOff => "fairness OFF",
        };
        lines.push(format!(
            "{name}: gap={:.4} (mean over {} seeds), median {:.4}",
            s.mean_gap, s.n_seeds, s.median_gap
        ));
    }
    if let Some(r) = summaries[0].gap_reduction_ratio {
        lines.push(format!("gap ratio ON/OFF: {r:.4}"));
    }
    lines.push(format!("wrote {}", comparison_path.display()));
    lines.push(format!("wrote {}", chart_path.display()));
    Ok(ReproduceOutput {
        rows,
        summaries,
        comparison_path,
        chart_path,
        lines,
    })
}

#[derive(Debug)]
pub struct BatchOutput {
    pub report: BatchReport,
    pub path: PathBuf,
}

pub fn cmd_batch(opts: &BatchOptions) -> Result<BatchOutput, CliError> {
    let base = load_config(&opts.common)?;
    let mut summaries = opts
        .conditions
        .list()
        .iter()
        .map(|&c| {
            let results = run_condition(&base, c, opts.seeds)?;
            Ok(BatchSummary::new(
                c,
                results.iter().map(SimulationResult::final_gap).collect(),
            ))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    attach_ratio(&mut summaries);
    let report = BatchReport {
        base_seed: base.seed,
        seed_derivation: SEED_DERIVATION.to_string(),
        summaries,
    };
    let path = write_file(&out_dir(&opts.common.out), BATCH_FILE, &json_bytes(&report))?;
    Ok(BatchOutput { report, path })
}

pub fn cmd_metrics(opts: &MetricsOptions) -> Result<BiasReport, CliError> {
    let file = fs::File::open(&opts.path).map_err(|e| CliError::io(&opts.path, e))?;
    let table = OutcomeTable::from_csv_reader(file)
        .map_err(|e| CliError::Input(format!("{}: {e}", opts.path.display())))?;
    detect_bias(&table, opts.metric, opts.delta).map_err(CliError::input)
}

/// Parses `args` (program name first), runs the command and returns the exit
/// code. Reports go to `out`, errors to `err`.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() {
                crate::EXIT_INPUT
            } else {
                EXIT_OK
            };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(err, "{text}")
            } else {
                write!(out, "{text}")
            };
            return code;
        }
    };
    match dispatch(cli.command, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(command: Command, out: &mut dyn Write) -> Result<i32, CliError> {
    let stdout_err = |e| CliError::io("<stdout>", e);
    match command {
        Command::Run(opts) => {
            let r = cmd_run(&opts)?;
            writeln!(
                out,
                "final totals: {}",
                r.summary
                    .final_totals
                    .iter()
                    .map(|(g, v)| format!("{g} = {v}"))
                    .collect::<Vec<_>>()
                    .join(", ")
            )
            .map_err(stdout_err)?;
            writeln!(out, "final gap: {}", r.summary.final_gap).map_err(stdout_err)?;
            writeln!(out, "wrote {}", r.rounds_path.display()).map_err(stdout_err)?;
            writeln!(out, "wrote {}", r.summary_path.display()).map_err(stdout_err)?;
            Ok(EXIT_OK)
        }
        Command::Reproduce(opts) => {
            for line in cmd_reproduce(&opts)?.lines {
                writeln!(out, "{line}").map_err(stdout_err)?;
            }
            Ok(EXIT_OK)
        }
        Command::Batch(opts) => {
            let r = cmd_batch(&opts)?;
            for s in &r.report.summaries {
                writeln!(
                    out,
                    "fairness {}: mean gap {:.4}, median gap {:.4} over {} seeds",
                    s.condition.label(),
                    s.mean_gap,
                    s.median_gap,
                    s.n_seeds
                )
                .map_err(stdout_err)?;
            }
            writeln!(out, "wrote {}", r.path.display()).map_err(stdout_err)?;
            Ok(EXIT_OK)
        }
        Command::Metrics(opts) => {
            let report = cmd_metrics(&opts)?;
            let json = serde_json::to_string_pretty(&report).expect("serializable");
            writeln!(out, "{json}").map_err(stdout_err)?;
            Ok(if report.violated {
                EXIT_VIOLATION
            } else {
                EXIT_OK
            })
        }
    }
}
