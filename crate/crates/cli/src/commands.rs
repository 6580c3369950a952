use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use mixbn_core::dataset::{load_csv, normalize_ranges, write_csv};
use mixbn_core::dot::to_dot;
use mixbn_core::evaluation::{evaluate, AnalogueSearch, AnomalyTraining, EvalConfig, Regime};
use mixbn_core::inference::{derive_seed, Sampler, DEFAULT_SAMPLES};
use mixbn_core::parameters::{DEFAULT_ALPHA, DEFAULT_BINS};
use mixbn_core::similarity::{
    penalty_weights, ranked_analogues, AnalogueQuery, DistanceSpec, Metric, DEFAULT_ANALOGUES, DEFAULT_EPSILON,
    DEFAULT_MAX_PAIRS,
};
use mixbn_core::structure::DEFAULT_MAX_PARENTS;
use mixbn_core::synth::{clustered, coupled_targets, five_node_clg, ClusterLayout};
use mixbn_core::{mixlearn, BayesianNetworkModel, ColumnKind, Dataset, EdgeConstraints, LearnConfig, Schema, Value};

use crate::manifest;
use crate::record::RecordDoc;

#[derive(Parser, Debug)]
#[command(name = "mixbn", version, about = "Mixed-type Bayesian networks for sparse tabular data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Learn structure and parameters from a CSV dataset.
    Learn(LearnArgs),
    /// Fill the null fields of a JSON record.
    Restore(RestoreArgs),
    /// Rank the rows of a dataset by similarity to a record.
    Analogues(AnaloguesArgs),
    /// Score every continuous value of a dataset against the network.
    Anomalies(AnomaliesArgs),
    /// Leave-one-out restoration and anomaly-injection benchmarks.
    Eval(EvalArgs),
    /// Write a model's graph in Graphviz DOT.
    ExportDot(ExportDotArgs),
    /// Generate a synthetic dataset with its schema.
    Synth(SynthArgs),
}

#[derive(Args, Debug, Serialize)]
pub struct DataArgs {
    /// CSV file with a header row.
    #[arg(long)]
    pub data: PathBuf,
    /// Schema JSON: {"columns":[{"name":..,"kind":"categorical"|"continuous"}]}
    #[arg(long)]
    pub schema: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct LearnOpts {
    #[arg(long, default_value_t = DEFAULT_BINS)]
    pub bins: usize,
    #[arg(long, default_value_t = DEFAULT_MAX_PARENTS)]
    pub max_parents: usize,
    /// Laplace pseudo-count for categorical tables.
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    pub alpha: f64,
}

impl LearnOpts {
    fn config(&self) -> LearnConfig {
        LearnConfig {
            bins: self.bins,
            max_parents: self.max_parents,
            alpha: self.alpha,
        }
    }
}

#[derive(Args, Debug, Serialize)]
pub struct LearnArgs {
    #[command(flatten)]
    pub input: DataArgs,
    #[command(flatten)]
    pub learn: LearnOpts,
    /// JSON list of [parent, child] pairs the search starts from.
    #[arg(long)]
    pub expert_edges: Option<PathBuf>,
    /// Let the search delete or reverse expert edges.
    #[arg(long)]
    pub allow_remove_expert_edges: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct MetricOpts {
    /// Train on the nearest rows under this metric instead of all rows.
    #[arg(long, value_parser = parse_metric)]
    pub metric: Option<Metric>,
    #[arg(long, default_value_t = DEFAULT_ANALOGUES)]
    pub n_analogues: usize,
    /// Continuous weight for gower-weighted; derived from the data when absent.
    #[arg(long)]
    pub weight: Option<f64>,
    /// Closeness threshold for the filter metric.
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    pub epsilon: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_PAIRS)]
    pub max_pairs: usize,
}

fn parse_metric(s: &str) -> std::result::Result<Metric, String> {
    s.parse().map_err(|e: mixbn_core::Error| e.to_string())
}

#[derive(Args, Debug, Serialize)]
pub struct RestoreArgs {
    /// Previously learned model. Mutually exclusive with --data.
    #[arg(long, conflicts_with_all = ["data", "metric"])]
    pub model: Option<PathBuf>,
    #[arg(long, requires = "schema")]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub schema: Option<PathBuf>,
    /// JSON object with explicit nulls for the fields to restore.
    #[arg(long)]
    pub record: PathBuf,
    #[command(flatten)]
    pub metric: MetricOpts,
    #[command(flatten)]
    pub learn: LearnOpts,
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct AnaloguesArgs {
    #[command(flatten)]
    pub input: DataArgs,
    #[arg(long)]
    pub record: PathBuf,
    #[arg(long, value_parser = parse_metric, default_value = "gower")]
    pub metric: Metric,
    #[arg(long, default_value_t = DEFAULT_ANALOGUES)]
    pub n_analogues: usize,
    #[arg(long)]
    pub weight: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    pub epsilon: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_PAIRS)]
    pub max_pairs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct AnomaliesArgs {
    #[command(flatten)]
    pub input: DataArgs,
    /// Score against this model; otherwise learn one from --data.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[command(flatten)]
    pub learn: LearnOpts,
    /// Continuous columns to score; all of them by default.
    #[arg(long, value_delimiter = ',')]
    pub target: Vec<String>,
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SearchArg {
    PerParameter,
    PerRow,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrainingArg {
    CleanRemainder,
    Perturbed,
}

#[derive(Args, Debug, Serialize)]
pub struct EvalArgs {
    #[command(flatten)]
    pub input: DataArgs,
    /// Comma-separated subset of all,cosine,gower,filter,gower-weighted.
    #[arg(long, value_delimiter = ',', default_value = "all,cosine,gower,filter,gower-weighted")]
    pub regimes: Vec<String>,
    #[command(flatten)]
    pub learn: LearnOpts,
    #[arg(long, default_value_t = DEFAULT_ANALOGUES)]
    pub n_analogues: usize,
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Evaluate a seeded sample of this many rows.
    #[arg(long)]
    pub row_sample: Option<usize>,
    #[arg(long)]
    pub weight: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    pub epsilon: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_PAIRS)]
    pub max_pairs: usize,
    #[arg(long, default_value_t = mixbn_core::evaluation::DEFAULT_ANOMALY_FRACTION)]
    pub anomaly_fraction: f64,
    #[arg(long, value_enum, default_value_t = TrainingArg::CleanRemainder)]
    pub anomaly_training: TrainingArg,
    #[arg(long, value_enum, default_value_t = SearchArg::PerParameter)]
    pub analogue_search: SearchArg,
    #[arg(long)]
    pub skip_anomalies: bool,
    /// Report JSON; the text table goes next to it with a .txt suffix.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct ExportDotArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SynthKind {
    /// Two categorical roots and three continuous descendants.
    Clg,
    /// Two categorical roots explaining three continuous targets.
    Coupled,
    /// Three clusters over K1..K6 and Z1..Z5.
    Clustered,
    /// Three clusters over the eleven reservoir parameters.
    Reservoir,
}

#[derive(Args, Debug, Serialize)]
pub struct SynthArgs {
    #[arg(long, value_enum)]
    pub kind: SynthKind,
    #[arg(long, default_value_t = 300)]
    pub rows: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Share of target variance explained, for --kind coupled.
    #[arg(long, default_value_t = 0.9)]
    pub r_squared: f64,
    /// CSV output; the schema is written to <out>.schema.json.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(cli: Cli) -> Result<()> {
    let started = Instant::now();
    match cli.command {
        Command::Learn(a) => learn(&a, started),
        Command::Restore(a) => restore(&a, started),
        Command::Analogues(a) => analogues(&a, started),
        Command::Anomalies(a) => anomalies(&a, started),
        Command::Eval(a) => eval(&a, started),
        Command::ExportDot(a) => export_dot(&a, started),
        Command::Synth(a) => synth(&a, started),
    }
}

fn load_schema(path: &Path) -> Result<Schema> {
    Schema::load(path).with_context(|| format!("schema {}", path.display()))
}

fn load_data(input: &DataArgs) -> Result<Dataset> {
    let schema = load_schema(&input.schema)?;
    load_csv(&input.data, &schema).with_context(|| format!("dataset {}", input.data.display()))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    write_text(path, &(serde_json::to_string_pretty(value)? + "\n"))
}

fn load_model(path: &Path) -> Result<BayesianNetworkModel> {
    BayesianNetworkModel::load(path).with_context(|| format!("model {}", path.display()))
}

fn learn(a: &LearnArgs, started: Instant) -> Result<()> {
    let d = load_data(&a.input)?;
    let mut inputs = vec![a.input.data.as_path(), a.input.schema.as_path()];
    let constraints = match &a.expert_edges {
        Some(path) => {
            inputs.push(path);
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let edges: Vec<(String, String)> = serde_json::from_str(&text)
                .with_context(|| format!("{}: expected a JSON list of [parent, child] pairs", path.display()))?;
            EdgeConstraints {
                required_edges: edges,
                removable: a.allow_remove_expert_edges,
            }
        }
        None => EdgeConstraints::none(),
    };
    let names: Vec<String> = d.columns().iter().map(|c| c.name.clone()).collect();
    constraints
        .validate(&names)
        .with_context(|| match &a.expert_edges {
            Some(p) => format!("expert edges {}", p.display()),
            None => "expert edges".into(),
        })?;
    let model = mixlearn(&d, &constraints, &a.learn.config())?;
    model.save(&a.out)?;
    manifest::write(&a.out, "learn", a, None, &inputs, started)
}

/// Distance spec for a metric over a pool, deriving the gower-weighted
/// continuous weight from the pool when none is given.
fn distance_spec(
    metric: Metric,
    pool: &Dataset,
    weight: Option<f64>,
    epsilon: f64,
    max_pairs: usize,
    seed: u64,
) -> Result<DistanceSpec> {
    let mut spec = DistanceSpec::new(metric, normalize_ranges(pool));
    match metric {
        Metric::GowerWeighted => {
            let w = match weight {
                Some(w) => w,
                None => penalty_weights(pool, max_pairs, seed)?.continuous_weight,
            };
            spec = spec.with_continuous_weight(w);
        }
        Metric::Filter => spec = spec.with_epsilon(epsilon),
        _ => {}
    }
    Ok(spec)
}

fn restore(a: &RestoreArgs, started: Instant) -> Result<()> {
    let mut inputs: Vec<&Path> = vec![a.record.as_path()];
    let (model, schema) = match (&a.model, &a.data, &a.schema) {
        (Some(path), _, _) => {
            inputs.push(path);
            let model = load_model(path)?;
            let schema = Schema::new(
                model
                    .nodes
                    .iter()
                    .map(|n| mixbn_core::ColumnSchema {
                        name: n.name.clone(),
                        kind: n.kind,
                    })
                    .collect(),
            )?;
            (model, schema)
        }
        (None, Some(data), Some(schema_path)) => {
            inputs.extend([data.as_path(), schema_path.as_path()]);
            let d = load_data(&DataArgs {
                data: data.clone(),
                schema: schema_path.clone(),
            })?;
            let doc = RecordDoc::load(&a.record, d.schema())?;
            let train = match a.metric.metric {
                Some(metric) => {
                    let spec = distance_spec(metric, &d, a.metric.weight, a.metric.epsilon, a.metric.max_pairs, a.seed)?;
                    let q = AnalogueQuery {
                        target: doc.values.clone(),
                        n_analogues: a.metric.n_analogues,
                        spec,
                    };
                    let rows = mixbn_core::similarity::nearest_analogues(&q, &d)?;
                    mixbn_core::dataset::select_rows(&d, &rows)?
                }
                None => d.clone(),
            };
            let model = mixlearn(&train, &EdgeConstraints::none(), &a.learn.config())?;
            (model, d.schema().clone())
        }
        _ => bail!("give either --model, or --data with --schema"),
    };
    let doc = RecordDoc::load(&a.record, &schema)?;
    let restored = Sampler::new(&model)?.restore(&doc.values, a.samples, a.seed)?;
    write_text(&a.out, &doc.fill(&schema, &restored)?)?;
    manifest::write(&a.out, "restore", a, Some(a.seed), &inputs, started)
}

#[derive(Serialize)]
struct AnalogueRow<'a> {
    rank: usize,
    row: usize,
    distance: Option<f64>,
    close_variables: Option<usize>,
    values: &'a [Value],
}

fn analogues(a: &AnaloguesArgs, started: Instant) -> Result<()> {
    let d = load_data(&a.input)?;
    let doc = RecordDoc::load(&a.record, d.schema())?;
    let spec = distance_spec(a.metric, &d, a.weight, a.epsilon, a.max_pairs, a.seed)?;
    let q = AnalogueQuery {
        target: doc.values.clone(),
        n_analogues: a.n_analogues,
        spec,
    };
    let ranked = ranked_analogues(&q, &d)?;
    let rows: Vec<AnalogueRow> = ranked
        .iter()
        .enumerate()
        .map(|(rank, an)| AnalogueRow {
            rank: rank + 1,
            row: an.index,
            distance: an.distance,
            close_variables: an.close_variables,
            values: d.row(an.index),
        })
        .collect();
    write_json(&a.out, &rows)?;
    manifest::write(
        &a.out,
        "analogues",
        a,
        Some(a.seed),
        &[&a.input.data, &a.input.schema, &a.record],
        started,
    )
}

#[derive(Serialize)]
struct ScoredValue {
    row: usize,
    parameter: String,
    value: f64,
    sample_mean: f64,
    sample_std: f64,
    score: f64,
    is_anomaly: bool,
}

fn anomalies(a: &AnomaliesArgs, started: Instant) -> Result<()> {
    let d = load_data(&a.input)?;
    let mut inputs = vec![a.input.data.as_path(), a.input.schema.as_path()];
    let model = match &a.model {
        Some(path) => {
            inputs.push(path);
            load_model(path)?
        }
        None => mixlearn(&d, &EdgeConstraints::none(), &a.learn.config())?,
    };
    let targets: Vec<usize> = if a.target.is_empty() {
        (0..d.n_cols()).filter(|&j| d.kind(j) == ColumnKind::Continuous).collect()
    } else {
        a.target
            .iter()
            .map(|t| {
                let j = d.column_index(t)?;
                if d.kind(j) != ColumnKind::Continuous {
                    bail!("target `{t}` is not continuous");
                }
                Ok(j)
            })
            .collect::<Result<_>>()?
    };
    let sampler = Sampler::new(&model)?;
    let scored: Vec<Vec<ScoredValue>> = (0..d.n_rows())
        .into_par_iter()
        .map(|i| {
            let mut record = d.row(i).to_vec();
            mixbn_core::evaluation::sanitize_record(&model, &mut record);
            let mut out = Vec::new();
            for &j in &targets {
                if d.row(i)[j].is_missing() {
                    continue;
                }
                let seed = derive_seed(a.seed, ((i as u64) << 20) ^ j as u64);
                let s = sampler.anomaly_score(&record, d.name(j), a.samples, seed)?;
                out.push(ScoredValue {
                    row: i,
                    parameter: d.name(j).to_owned(),
                    value: s.value,
                    sample_mean: s.sample_mean,
                    sample_std: s.sample_std,
                    // JSON has no infinity; a degenerate sample gives the largest finite score
                    score: if s.score.is_infinite() { f64::MAX } else { s.score },
                    is_anomaly: s.is_anomaly,
                });
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let scored: Vec<ScoredValue> = scored.into_iter().flatten().collect();
    write_json(&a.out, &scored)?;
    manifest::write(&a.out, "anomalies", a, Some(a.seed), &inputs, started)
}

fn eval(a: &EvalArgs, started: Instant) -> Result<()> {
    let d = load_data(&a.input)?;
    let regimes = a.regimes.iter().map(|r| Regime::parse(r)).collect::<mixbn_core::Result<Vec<_>>>()?;
    let cfg = EvalConfig {
        regimes,
        n_analogues: a.n_analogues,
        bins: a.learn.bins,
        max_parents: a.learn.max_parents,
        alpha: a.learn.alpha,
        m_samples: a.samples,
        seed: a.seed,
        anomaly_fraction: a.anomaly_fraction,
        epsilon: a.epsilon,
        continuous_weight: a.weight,
        max_pairs: a.max_pairs,
        row_sample: a.row_sample,
        analogue_search: match a.analogue_search {
            SearchArg::PerParameter => AnalogueSearch::PerParameter,
            SearchArg::PerRow => AnalogueSearch::PerRow,
        },
        anomaly_training: match a.anomaly_training {
            TrainingArg::CleanRemainder => AnomalyTraining::CleanRemainder,
            TrainingArg::Perturbed => AnomalyTraining::Perturbed,
        },
    };
    let mut report = evaluate(&d, &cfg)?;
    if a.skip_anomalies {
        report.anomalies = None;
    }
    write_json(&a.out, &report)?;
    let table = report.to_table();
    let mut table_path = a.out.as_os_str().to_owned();
    table_path.push(".txt");
    write_text(Path::new(&table_path), &table)?;
    print!("{table}");
    manifest::write(&a.out, "eval", a, Some(a.seed), &[&a.input.data, &a.input.schema], started)
}

fn export_dot(a: &ExportDotArgs, started: Instant) -> Result<()> {
    let model = load_model(&a.model)?;
    write_text(&a.out, &to_dot(&model))?;
    manifest::write(&a.out, "export-dot", a, None, &[&a.model], started)
}

fn synth(a: &SynthArgs, started: Instant) -> Result<()> {
    let d = match a.kind {
        SynthKind::Clg => five_node_clg(a.rows, a.seed).0,
        SynthKind::Coupled => {
            if !(a.r_squared > 0.0 && a.r_squared < 1.0) {
                bail!("--r-squared must lie in (0, 1)");
            }
            coupled_targets(a.rows, a.r_squared, a.seed)
        }
        SynthKind::Clustered => clustered(a.rows, &ClusterLayout::generic(), a.seed),
        SynthKind::Reservoir => clustered(a.rows, &ClusterLayout::reservoir(), a.seed),
    };
    let file = std::fs::File::create(&a.out).with_context(|| format!("writing {}", a.out.display()))?;
    write_csv(&d, file)?;
    let mut schema_path = a.out.as_os_str().to_owned();
    schema_path.push(".schema.json");
    write_json(Path::new(&schema_path), d.schema())?;
    manifest::write(&a.out, "synth", a, Some(a.seed), &[], started)
}
