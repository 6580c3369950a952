//! Leave-one-out restoration and anomaly-injection benchmarks.
//!
//! Restoration: every evaluated row is held out, a model is trained either
//! on all remaining rows or on its nearest analogues under a metric, each
//! observed parameter is blanked in turn and restored by sampling, and hits
//! (categorical) or squared errors (continuous) are accumulated.
//!
//! Anomalies: per continuous parameter a fraction of cells is replaced by
//! uniform in-range draws, every row is scored by the standardized distance
//! of its value to samples drawn given the rest of the row, and the scores
//! are summarized by ROC-AUC against the injection labels.

use std::fmt::Write as _;

use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{normalize_ranges, select_rows, ColumnKind, ColumnRange, Dataset, Value};
use crate::error::{Error, Result};
use crate::graph::EdgeConstraints;
use crate::inference::{derive_seed, rng_from_seed, Sampler, DEFAULT_SAMPLES};
use crate::model::{BayesianNetworkModel, Distribution};
use crate::parameters::{mixlearn, LearnConfig};
use crate::similarity::{
    nearest_analogues, penalty_weights, AnalogueQuery, DistanceSpec, Metric, DEFAULT_ANALOGUES, DEFAULT_EPSILON,
    DEFAULT_MAX_PAIRS,
};

pub const DEFAULT_ANOMALY_FRACTION: f64 = 0.10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    AllDataset,
    Cosine,
    Gower,
    Filter,
    GowerWeighted,
}

impl Regime {
    pub const ALL: [Regime; 5] = [
        Regime::AllDataset,
        Regime::Cosine,
        Regime::Gower,
        Regime::Filter,
        Regime::GowerWeighted,
    ];

    pub fn metric(self) -> Option<Metric> {
        match self {
            Regime::AllDataset => None,
            Regime::Cosine => Some(Metric::Cosine),
            Regime::Gower => Some(Metric::Gower),
            Regime::Filter => Some(Metric::Filter),
            Regime::GowerWeighted => Some(Metric::GowerWeighted),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Regime::AllDataset => "all_dataset",
            Regime::Cosine => "cosine",
            Regime::Gower => "gower",
            Regime::Filter => "filter",
            Regime::GowerWeighted => "gower_weighted",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Regime::AllDataset => "All dataset",
            Regime::Cosine => "Cosine",
            Regime::Gower => "Gower",
            Regime::Filter => "Filtering",
            Regime::GowerWeighted => "Gower weighted",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        Regime::ALL
            .into_iter()
            .find(|r| r.as_str() == norm || (norm == "all" && *r == Regime::AllDataset))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown regime `{s}`")))
    }

    fn ordinal(self) -> u64 {
        self as u64
    }
}

/// Which target row the analogue search sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnalogueSearch {
    /// Search with the parameter being restored already blanked.
    PerParameter,
    /// Search once per row with the complete held-out row.
    PerRow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnomalyTraining {
    /// Train on the rows that were not perturbed.
    CleanRemainder,
    /// Train on the full perturbed dataset.
    Perturbed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub regimes: Vec<Regime>,
    pub n_analogues: usize,
    pub bins: usize,
    pub max_parents: usize,
    pub alpha: f64,
    pub m_samples: usize,
    pub seed: u64,
    pub anomaly_fraction: f64,
    pub epsilon: f64,
    /// Continuous weight for weighted Gower; derived from penalties when unset.
    pub continuous_weight: Option<f64>,
    pub max_pairs: usize,
    /// Evaluate only this many seeded-sampled rows instead of all of them.
    pub row_sample: Option<usize>,
    pub analogue_search: AnalogueSearch,
    pub anomaly_training: AnomalyTraining,
}

impl Default for EvalConfig {
    fn default() -> Self {
        let learn = LearnConfig::default();
        Self {
            regimes: Regime::ALL.to_vec(),
            n_analogues: DEFAULT_ANALOGUES,
            bins: learn.bins,
            max_parents: learn.max_parents,
            alpha: learn.alpha,
            m_samples: DEFAULT_SAMPLES,
            seed: 0,
            anomaly_fraction: DEFAULT_ANOMALY_FRACTION,
            epsilon: DEFAULT_EPSILON,
            continuous_weight: None,
            max_pairs: DEFAULT_MAX_PAIRS,
            row_sample: None,
            analogue_search: AnalogueSearch::PerParameter,
            anomaly_training: AnomalyTraining::CleanRemainder,
        }
    }
}

impl EvalConfig {
    pub fn learn(&self) -> LearnConfig {
        LearnConfig {
            bins: self.bins,
            max_parents: self.max_parents,
            alpha: self.alpha,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.regimes.is_empty() {
            return Err(Error::InvalidArgument("at least one regime is required".into()));
        }
        if !(self.anomaly_fraction > 0.0 && self.anomaly_fraction < 1.0) {
            return Err(Error::InvalidArgument("anomaly fraction must lie in (0, 1)".into()));
        }
        if self.m_samples == 0 || self.n_analogues == 0 {
            return Err(Error::InvalidArgument("sample and analogue counts must be positive".into()));
        }
        Ok(())
    }
}

/// Drops evidence the model cannot represent: categorical labels it never saw.
/// Returns how many fields were blanked.
pub fn sanitize_record(model: &BayesianNetworkModel, record: &mut [Value]) -> usize {
    let mut dropped = 0;
    for (node, v) in model.nodes.iter().zip(record.iter_mut()) {
        if let (Distribution::Cpt(cpt), Value::Category(label)) = (&node.distribution, &*v) {
            if !cpt.states.iter().any(|s| s == label) {
                *v = Value::Missing;
                dropped += 1;
            }
        }
    }
    dropped
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParameterInfo {
    pub name: String,
    pub kind: ColumnKind,
}

/// One (parameter, regime) cell: accuracy for categorical parameters, RMSE
/// for continuous ones, `None` when nothing was restored.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RestorationCell {
    pub parameter: String,
    pub regime: Regime,
    pub measure: &'static str,
    pub value: Option<f64>,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeCounts {
    pub regime: Regime,
    pub restored: usize,
    pub failed_fits: usize,
    pub dropped_evidence: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RestorationReport {
    pub parameters: Vec<ParameterInfo>,
    pub regimes: Vec<Regime>,
    pub cells: Vec<RestorationCell>,
    pub rows_evaluated: Vec<usize>,
    /// Row/parameter pairs skipped because no other field was observed.
    pub skipped_no_evidence: usize,
    pub counts: Vec<RegimeCounts>,
    pub continuous_weight: Option<f64>,
    /// Set when penalties were degenerate and unit weights were used.
    pub weight_fallback: bool,
}

impl RestorationReport {
    pub fn cell(&self, parameter: &str, regime: Regime) -> Option<&RestorationCell> {
        self.cells.iter().find(|c| c.parameter == parameter && c.regime == regime)
    }
}

#[derive(Debug, Default, Clone)]
struct Tally {
    hits: Vec<usize>,
    sq: Vec<f64>,
    n: Vec<usize>,
    failed: usize,
    dropped: usize,
}

impl Tally {
    fn new(p: usize) -> Self {
        Self {
            hits: vec![0; p],
            sq: vec![0.0; p],
            n: vec![0; p],
            ..Default::default()
        }
    }
}

/// Rows to evaluate: all, or a seeded sample kept in ascending order.
fn evaluation_rows(n: usize, cfg: &EvalConfig) -> Vec<usize> {
    match cfg.row_sample {
        Some(k) if k < n => {
            let mut rng = rng_from_seed(cfg.seed ^ 0x5eed_5a3e);
            let mut rows = sample(&mut rng, n, k).into_vec();
            rows.sort_unstable();
            rows
        }
        _ => (0..n).collect(),
    }
}

struct RestoreContext<'a> {
    d: &'a Dataset,
    cfg: &'a EvalConfig,
    ranges: Vec<ColumnRange>,
    weight: Option<f64>,
}

impl RestoreContext<'_> {
    fn spec(&self, metric: Metric) -> DistanceSpec {
        let mut spec = DistanceSpec::new(metric, self.ranges.clone());
        match metric {
            Metric::Filter => spec = spec.with_epsilon(self.cfg.epsilon),
            Metric::GowerWeighted => spec = spec.with_continuous_weight(self.weight.unwrap_or(1.0)),
            _ => {}
        }
        spec
    }

    /// Training rows (original indices) for `row` under a metric, searching
    /// with `target`.
    fn analogues(&self, row: usize, target: &[Value], metric: Metric) -> Result<Vec<usize>> {
        let others: Vec<usize> = (0..self.d.n_rows()).filter(|&i| i != row).collect();
        let pool = select_rows(self.d, &others)?;
        let q = AnalogueQuery {
            target: target.to_vec(),
            n_analogues: self.cfg.n_analogues,
            spec: self.spec(metric),
        };
        Ok(nearest_analogues(&q, &pool)?.into_iter().map(|i| others[i]).collect())
    }

    fn fit(&self, rows: &[usize]) -> Result<BayesianNetworkModel> {
        mixlearn(&select_rows(self.d, rows)?, &EdgeConstraints::none(), &self.cfg.learn())
    }

    /// Restores `param` of `row` with `model`; returns Ok(None) when the
    /// blanked record has no evidence left.
    fn restore_one(
        &self,
        model: &BayesianNetworkModel,
        row: usize,
        param: usize,
        seed: u64,
        tally: &mut Tally,
    ) -> Result<Option<Value>> {
        let mut record = self.d.row(row).to_vec();
        record[param] = Value::Missing;
        tally.dropped += sanitize_record(model, &mut record);
        // only the target parameter is asked for; other gaps stay gaps
        if record.iter().all(Value::is_missing) {
            return Ok(None);
        }
        let sampler = Sampler::new(model)?;
        let out = sampler.restore(&record, self.cfg.m_samples, seed)?;
        Ok(Some(out[param].clone()))
    }

    fn score(&self, row: usize, param: usize, restored: &Value, tally: &mut Tally) {
        match (&self.d.row(row)[param], restored) {
            (Value::Category(truth), Value::Category(got)) => {
                tally.hits[param] += usize::from(truth == got);
                tally.n[param] += 1;
            }
            (Value::Number(truth), Value::Number(got)) => {
                tally.sq[param] += (truth - got).powi(2);
                tally.n[param] += 1;
            }
            _ => {}
        }
    }
}

/// Leave-one-out restoration across the configured regimes.
pub fn leave_one_out(d: &Dataset, cfg: &EvalConfig) -> Result<RestorationReport> {
    leave_one_out_observed(d, cfg, &|_, _, _| {})
}

/// As [`leave_one_out`], reporting every training set to `observer` as
/// `(held-out row, regime, training row indices)`.
pub fn leave_one_out_observed(
    d: &Dataset,
    cfg: &EvalConfig,
    observer: &(dyn Fn(usize, Regime, &[usize]) + Sync),
) -> Result<RestorationReport> {
    cfg.validate()?;
    if d.n_rows() < cfg.n_analogues + 1 {
        return Err(Error::PoolTooSmall {
            needed: cfg.n_analogues + 1,
            available: d.n_rows(),
        });
    }
    let mut weight_fallback = false;
    let weight = if cfg.regimes.contains(&Regime::GowerWeighted) {
        Some(match cfg.continuous_weight {
            Some(w) => w,
            None => match penalty_weights(d, cfg.max_pairs, cfg.seed) {
                Ok(r) => r.continuous_weight,
                Err(Error::DegeneratePool(_)) => {
                    weight_fallback = true;
                    1.0
                }
                Err(e) => return Err(e),
            },
        })
    } else {
        None
    };
    let ctx = RestoreContext {
        d,
        cfg,
        ranges: normalize_ranges(d),
        weight,
    };
    let p = d.n_cols();
    let rows = evaluation_rows(d.n_rows(), cfg);

    // (row, regime) -> tally, plus no-evidence skips
    let per_row: Vec<(Vec<Tally>, usize)> = rows
        .par_iter()
        .map(|&row| {
            let mut skipped = 0;
            let tallies = cfg
                .regimes
                .iter()
                .map(|&regime| {
                    let mut tally = Tally::new(p);
                    let unit = |param: usize| ((row as u64) << 20) ^ ((param as u64) << 4) ^ regime.ordinal();
                    let observed: Vec<usize> = (0..p).filter(|&j| !d.row(row)[j].is_missing()).collect();

                    let shared_model = match regime.metric() {
                        None => {
                            let train: Vec<usize> = (0..d.n_rows()).filter(|&i| i != row).collect();
                            observer(row, regime, &train);
                            Some(ctx.fit(&train))
                        }
                        Some(metric) if cfg.analogue_search == AnalogueSearch::PerRow => {
                            let train = ctx.analogues(row, d.row(row), metric);
                            Some(train.and_then(|t| {
                                observer(row, regime, &t);
                                ctx.fit(&t)
                            }))
                        }
                        Some(_) => None,
                    };
                    if let Some(Err(_)) = &shared_model {
                        tally.failed += observed.len();
                        return tally;
                    }

                    for &param in &observed {
                        let seed = derive_seed(cfg.seed, unit(param));
                        let result = match (&shared_model, regime.metric()) {
                            (Some(Ok(model)), _) => ctx.restore_one(model, row, param, seed, &mut tally),
                            (None, Some(metric)) => {
                                let mut target = d.row(row).to_vec();
                                target[param] = Value::Missing;
                                ctx.analogues(row, &target, metric).and_then(|train| {
                                    observer(row, regime, &train);
                                    let model = ctx.fit(&train)?;
                                    ctx.restore_one(&model, row, param, seed, &mut tally)
                                })
                            }
                            _ => unreachable!("shared model errors return early"),
                        };
                        match result {
                            Ok(Some(v)) => ctx.score(row, param, &v, &mut tally),
                            Ok(None) => skipped += 1,
                            Err(_) => tally.failed += 1,
                        }
                    }
                    tally
                })
                .collect();
            (tallies, skipped)
        })
        .collect();

    let mut totals: Vec<Tally> = cfg.regimes.iter().map(|_| Tally::new(p)).collect();
    let mut skipped_no_evidence = 0;
    for (tallies, skipped) in per_row {
        skipped_no_evidence += skipped;
        for (total, t) in totals.iter_mut().zip(tallies) {
            for j in 0..p {
                total.hits[j] += t.hits[j];
                total.sq[j] += t.sq[j];
                total.n[j] += t.n[j];
            }
            total.failed += t.failed;
            total.dropped += t.dropped;
        }
    }

    let mut cells = Vec::new();
    for j in 0..p {
        for (r, &regime) in cfg.regimes.iter().enumerate() {
            let t = &totals[r];
            let n = t.n[j];
            let (measure, value) = match d.kind(j) {
                ColumnKind::Categorical => ("accuracy", (n > 0).then(|| t.hits[j] as f64 / n as f64)),
                ColumnKind::Continuous => ("rmse", (n > 0).then(|| (t.sq[j] / n as f64).sqrt())),
            };
            cells.push(RestorationCell {
                parameter: d.name(j).to_owned(),
                regime,
                measure,
                value,
                count: n,
            });
        }
    }
    Ok(RestorationReport {
        parameters: d
            .columns()
            .iter()
            .map(|c| ParameterInfo {
                name: c.name.clone(),
                kind: c.kind,
            })
            .collect(),
        regimes: cfg.regimes.clone(),
        cells,
        rows_evaluated: rows,
        skipped_no_evidence,
        counts: cfg
            .regimes
            .iter()
            .zip(&totals)
            .map(|(&regime, t)| RegimeCounts {
                regime,
                restored: t.n.iter().sum(),
                failed_fits: t.failed,
                dropped_evidence: t.dropped,
            })
            .collect(),
        continuous_weight: weight,
        weight_fallback,
    })
}

/// Mann-Whitney ROC-AUC with midranks for ties.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::InvalidArgument("scores and labels differ in length".into()));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidArgument("scores contain NaN".into()));
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut ranks = vec![0.0; scores.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks are 1-based; the tie block i..=j shares their mean
        let mid = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = mid;
        }
        i = j + 1;
    }
    let pos_rank_sum: f64 = (0..scores.len()).filter(|&k| labels[k]).map(|k| ranks[k]).sum();
    let u = pos_rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TargetAuc {
    pub parameter: String,
    pub roc_auc: f64,
    pub injected: usize,
    pub scored: usize,
    /// True-positive rate of the fixed two-sigma flag.
    pub flag_tpr: f64,
    /// False-positive rate of the fixed two-sigma flag.
    pub flag_fpr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkippedTarget {
    pub parameter: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnomalyReport {
    pub targets: Vec<TargetAuc>,
    pub skipped: Vec<SkippedTarget>,
    pub training: AnomalyTraining,
    pub fraction: f64,
}

impl AnomalyReport {
    pub fn auc(&self, parameter: &str) -> Option<f64> {
        self.targets.iter().find(|t| t.parameter == parameter).map(|t| t.roc_auc)
    }
}

/// Injects uniform in-range values into each continuous parameter in turn
/// and measures how well the conditional score separates them.
pub fn anomaly_benchmark(d: &Dataset, cfg: &EvalConfig) -> Result<AnomalyReport> {
    cfg.validate()?;
    let ranges = normalize_ranges(d);
    let mut targets = Vec::new();
    let mut skipped = Vec::new();
    for col in 0..d.n_cols() {
        if d.kind(col) != ColumnKind::Continuous {
            continue;
        }
        let name = d.name(col).to_owned();
        let (min, max) = match ranges[col].bounds() {
            Some((lo, hi)) if hi > lo => (lo, hi),
            _ => {
                skipped.push(SkippedTarget {
                    parameter: name,
                    reason: "zero or undefined range".into(),
                });
                continue;
            }
        };
        let eligible: Vec<usize> = (0..d.n_rows()).filter(|&i| !d.row(i)[col].is_missing()).collect();
        let k = (cfg.anomaly_fraction * eligible.len() as f64).floor() as usize;
        if k == 0 || k == eligible.len() {
            skipped.push(SkippedTarget {
                parameter: name,
                reason: format!("{k} of {} rows would be injected", eligible.len()),
            });
            continue;
        }
        let mut rng = rng_from_seed(derive_seed(cfg.seed, 0xa11 ^ ((col as u64) << 8)));
        let mut injected = vec![false; d.n_rows()];
        let mut rows: Vec<Vec<Value>> = d.rows().to_vec();
        for pick in sample(&mut rng, eligible.len(), k).into_vec() {
            let i = eligible[pick];
            injected[i] = true;
            rows[i][col] = Value::Number(rng.random_range(min..=max));
        }
        let perturbed = Dataset::new(d.schema().clone(), rows)?;
        let train = match cfg.anomaly_training {
            AnomalyTraining::CleanRemainder => {
                let keep: Vec<usize> = (0..d.n_rows()).filter(|&i| !injected[i]).collect();
                select_rows(d, &keep)?
            }
            AnomalyTraining::Perturbed => perturbed.clone(),
        };
        let model = mixlearn(&train, &EdgeConstraints::none(), &cfg.learn())?;
        let sampler = Sampler::new(&model)?;
        let scored: Vec<(f64, bool, bool)> = eligible
            .par_iter()
            .map(|&i| {
                let mut record = perturbed.row(i).to_vec();
                sanitize_record(&model, &mut record);
                let seed = derive_seed(cfg.seed, ((i as u64) << 20) ^ col as u64);
                let s = sampler.anomaly_score(&record, &name, cfg.m_samples, seed)?;
                Ok((s.score, s.is_anomaly, injected[i]))
            })
            .collect::<Result<_>>()?;
        let scores: Vec<f64> = scored.iter().map(|s| s.0).collect();
        let labels: Vec<bool> = scored.iter().map(|s| s.2).collect();
        let pos = labels.iter().filter(|&&l| l).count();
        let neg = labels.len() - pos;
        let tp = scored.iter().filter(|s| s.1 && s.2).count();
        let fp = scored.iter().filter(|s| s.1 && !s.2).count();
        targets.push(TargetAuc {
            parameter: name,
            roc_auc: roc_auc(&scores, &labels)?,
            injected: pos,
            scored: scored.len(),
            flag_tpr: tp as f64 / pos as f64,
            flag_fpr: fp as f64 / neg as f64,
        });
    }
    Ok(AnomalyReport {
        targets,
        skipped,
        training: cfg.anomaly_training,
        fraction: cfg.anomaly_fraction,
    })
}

/// Reference values for the eleven reservoir parameters, in
/// regime order all dataset, cosine, Gower, filtering, weighted Gower.
pub mod reference {
    pub const RESTORATION: [(&str, [f64; 5]); 11] = [
        ("Tectonic regime", [0.48, 0.85, 0.85, 0.9, 0.78]),
        ("Period", [0.36, 0.65, 0.63, 0.62, 0.62]),
        ("Depositional system", [0.56, 0.81, 0.78, 0.76, 0.72]),
        ("Lithology", [0.57, 0.8, 0.81, 0.81, 0.81]),
        ("Structural setting", [0.56, 0.72, 0.73, 0.71, 0.71]),
        ("Trapping mechanism", [0.51, 0.76, 0.77, 0.75, 0.77]),
        ("Gross", [399.92, 416.59, 384.98, 375.37, 306.61]),
        ("Netpay", [89.7, 94.69, 77.65, 75.84, 68.66]),
        ("Porosity", [6.09, 7.04, 6.23, 6.24, 4.62]),
        ("Permeability", [1886.06, 1450.2, 1359.97, 1271.64, 846.01]),
        ("Depth", [1372.47, 1088.82, 1052.4, 1126.7, 779.14]),
    ];

    pub const ROC_AUC: [(&str, f64); 5] = [
        ("Gross", 0.85),
        ("Netpay", 0.97),
        ("Porosity", 0.8),
        ("Permeability", 0.71),
        ("Depth", 0.7),
    ];

    pub const CONTINUOUS_WEIGHT: f64 = 5.8;

    fn normalize(s: &str) -> String {
        s.chars()
            .filter(|c| c.is_alphanumeric())
            .flat_map(char::to_lowercase)
            .collect()
    }

    pub fn restoration(parameter: &str) -> Option<[f64; 5]> {
        let key = normalize(parameter);
        RESTORATION.iter().find(|(n, _)| normalize(n) == key).map(|(_, v)| *v)
    }

    pub fn roc_auc(parameter: &str) -> Option<f64> {
        let key = normalize(parameter);
        ROC_AUC.iter().find(|(n, _)| normalize(n) == key).map(|(_, v)| *v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub config: EvalConfig,
    pub n_rows: usize,
    pub restoration: Option<RestorationReport>,
    pub anomalies: Option<AnomalyReport>,
}

impl EvalReport {
    /// Parameters as rows, regimes as columns; reference values are shown
    /// for parameters with matching names.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let name_width = 22;
        let col = 15;
        if let Some(rest) = &self.restoration {
            let _ = write!(out, "{:<name_width$}", "Parameter");
            for r in &rest.regimes {
                let _ = write!(out, "{:>col$}", r.title());
            }
            out.push('\n');
            let rule = "-".repeat(name_width + col * rest.regimes.len());
            for (kind, heading) in [
                (ColumnKind::Categorical, "Accuracy (categorical)"),
                (ColumnKind::Continuous, "RMSE (continuous)"),
            ] {
                let params: Vec<_> = rest.parameters.iter().filter(|p| p.kind == kind).collect();
                if params.is_empty() {
                    continue;
                }
                let _ = writeln!(out, "{rule}\n{heading}\n{rule}");
                for p in params {
                    let _ = write!(out, "{:<name_width$}", truncate(&p.name, name_width - 1));
                    for &r in &rest.regimes {
                        let cell = rest.cell(&p.name, r).and_then(|c| c.value);
                        let _ = write!(out, "{:>col$}", format_cell(cell, kind));
                    }
                    out.push('\n');
                    if let Some(refs) = reference::restoration(&p.name) {
                        let _ = write!(out, "{:<name_width$}", "  (reference)");
                        for &r in &rest.regimes {
                            let v = refs[Regime::ALL.iter().position(|x| *x == r).unwrap()];
                            let _ = write!(out, "{:>col$}", format_cell(Some(v), kind));
                        }
                        out.push('\n');
                    }
                }
            }
            let _ = writeln!(out, "{rule}");
            if let Some(w) = rest.continuous_weight {
                let _ = writeln!(
                    out,
                    "continuous weight for weighted Gower: {w:.3} (reference {})",
                    reference::CONTINUOUS_WEIGHT
                );
            }
            let _ = writeln!(
                out,
                "rows evaluated: {}, skipped without evidence: {}",
                rest.rows_evaluated.len(),
                rest.skipped_no_evidence
            );
            for c in &rest.counts {
                let _ = writeln!(
                    out,
                    "  {:<15} restored {:>6}  failed {:>5}  dropped evidence {:>5}",
                    c.regime.as_str(),
                    c.restored,
                    c.failed_fits,
                    c.dropped_evidence
                );
            }
        }
        if let Some(anom) = &self.anomalies {
            if !out.is_empty() {
                out.push('\n');
            }
            let _ = writeln!(
                out,
                "{:<name_width$}{:>10}{:>12}{:>10}{:>10}{:>10}",
                "Anomaly target", "ROC-AUC", "reference", "TPR@2s", "FPR@2s", "injected"
            );
            for t in &anom.targets {
                let reference = reference::roc_auc(&t.parameter)
                    .map(|v| format!("{v:.2}"))
                    .unwrap_or_else(|| "-".into());
                let _ = writeln!(
                    out,
                    "{:<name_width$}{:>10.3}{:>12}{:>10.3}{:>10.3}{:>10}",
                    truncate(&t.parameter, name_width - 1),
                    t.roc_auc,
                    reference,
                    t.flag_tpr,
                    t.flag_fpr,
                    t.injected
                );
            }
            for s in &anom.skipped {
                let _ = writeln!(out, "skipped {}: {}", s.parameter, s.reason);
            }
        }
        out
    }
}

fn truncate(s: &str, n: usize) -> String {
    s.chars().take(n).collect()
}

fn format_cell(v: Option<f64>, kind: ColumnKind) -> String {
    match (v, kind) {
        (None, _) => "-".into(),
        (Some(x), ColumnKind::Categorical) => format!("{x:.2}"),
        (Some(x), ColumnKind::Continuous) => format!("{x:.2}"),
    }
}

/// Runs restoration and anomaly benchmarks and bundles them.
pub fn evaluate(d: &Dataset, cfg: &EvalConfig) -> Result<EvalReport> {
    let restoration = Some(leave_one_out(d, cfg)?);
    let has_continuous = d.columns().iter().any(|c| c.kind == ColumnKind::Continuous);
    let anomalies = if has_continuous { Some(anomaly_benchmark(d, cfg)?) } else { None };
    Ok(EvalReport {
        config: cfg.clone(),
        n_rows: d.n_rows(),
        restoration,
        anomalies,
    })
}
