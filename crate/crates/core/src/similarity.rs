//! Mixed-type distances and analogue retrieval.
//!
//! Per variable `j`, Gower similarity is `S_j = 1` on matching labels and `0`
//! otherwise for categorical columns, and `S_j = 1 - |u_j - t_j| / range(j)`
//! for continuous ones (zero-width ranges give `S_j = 1`). The distance is
//! `1 - sum w_j S_j / sum w_j` over variables observed on both sides.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{normalize_ranges, ColumnKind, ColumnRange, Dataset, Value};
use crate::error::{Error, Result};
use crate::inference::rng_from_seed;

pub const DEFAULT_EPSILON: f64 = 0.1;
pub const DEFAULT_ANALOGUES: usize = 40;
pub const DEFAULT_MAX_PAIRS: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    Gower,
    GowerWeighted,
    Cosine,
    Filter,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Gower => "gower",
            Metric::GowerWeighted => "gower-weighted",
            Metric::Cosine => "cosine",
            Metric::Filter => "filter",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "gower" => Ok(Metric::Gower),
            "gower-weighted" | "weighted-gower" => Ok(Metric::GowerWeighted),
            "cosine" => Ok(Metric::Cosine),
            "filter" => Ok(Metric::Filter),
            other => Err(Error::InvalidArgument(format!("unknown metric `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceSpec {
    pub metric: Metric,
    pub weights: Vec<f64>,
    pub epsilon: Option<f64>,
    /// Per-column ranges; [`ColumnRange::NotApplicable`] marks categorical columns.
    pub ranges: Vec<ColumnRange>,
}

impl DistanceSpec {
    /// Unit weights; epsilon defaults to [`DEFAULT_EPSILON`] for the filter metric.
    pub fn new(metric: Metric, ranges: Vec<ColumnRange>) -> Self {
        Self {
            metric,
            weights: vec![1.0; ranges.len()],
            epsilon: (metric == Metric::Filter).then_some(DEFAULT_EPSILON),
            ranges,
        }
    }

    pub fn for_dataset(metric: Metric, d: &Dataset) -> Self {
        Self::new(metric, normalize_ranges(d))
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Self {
        self.weights = weights;
        self
    }

    /// Categorical columns weigh 1, continuous columns `weight`.
    pub fn with_continuous_weight(mut self, weight: f64) -> Self {
        self.weights = self
            .ranges
            .iter()
            .map(|r| if matches!(r, ColumnRange::NotApplicable) { 1.0 } else { weight })
            .collect();
        self
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = Some(epsilon);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.weights.len() != self.ranges.len() {
            return Err(Error::InvalidArgument("one weight per column required".into()));
        }
        if self.weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidArgument("weights must be finite and non-negative".into()));
        }
        if !self.weights.iter().any(|&w| w > 0.0) {
            return Err(Error::InvalidArgument("at least one weight must be positive".into()));
        }
        match (self.metric, self.epsilon) {
            (Metric::Filter, Some(e)) if e > 0.0 && e <= 1.0 => Ok(()),
            (Metric::Filter, _) => Err(Error::InvalidArgument("filter epsilon must lie in (0, 1]".into())),
            (_, Some(_)) => Err(Error::InvalidArgument("epsilon only applies to the filter metric".into())),
            (_, None) => Ok(()),
        }
    }
}

fn check_widths(u: &[Value], t: &[Value], ranges: &[ColumnRange]) -> Result<()> {
    if u.len() != ranges.len() || t.len() != ranges.len() {
        return Err(Error::InvalidArgument("rows do not match the schema width".into()));
    }
    Ok(())
}

/// Unweighted Gower similarity of variable `j`, or `None` when not comparable.
fn similarity_term(u: &Value, t: &Value, range: &ColumnRange) -> Option<f64> {
    match (u, t) {
        (Value::Category(a), Value::Category(b)) => Some(if a == b { 1.0 } else { 0.0 }),
        (Value::Number(a), Value::Number(b)) => Some(1.0 - range.normalized_diff(*a, *b)),
        _ => None,
    }
}

pub fn gower_distance(u: &[Value], t: &[Value], spec: &DistanceSpec) -> Result<f64> {
    check_widths(u, t, &spec.ranges)?;
    let mut num = 0.0;
    let mut den = 0.0;
    for j in 0..u.len() {
        if let Some(s) = similarity_term(&u[j], &t[j], &spec.ranges[j]) {
            num += spec.weights[j] * s;
            den += spec.weights[j];
        }
    }
    if den == 0.0 {
        return Err(Error::NoComparableVariables);
    }
    Ok((1.0 - num / den).clamp(0.0, 1.0))
}

/// Cosine distance between a candidate `u` and the target `t`.
///
/// Categorical variables encode as 1 on the target and 1/0 on the candidate
/// for match/mismatch; continuous variables as min-max scaled values.
pub fn cosine_distance(u: &[Value], t: &[Value], ranges: &[ColumnRange]) -> Result<f64> {
    check_widths(u, t, ranges)?;
    let mut dot = 0.0;
    let mut uu = 0.0;
    let mut tt = 0.0;
    let mut comparable = false;
    for j in 0..u.len() {
        let (a, b) = match (&u[j], &t[j]) {
            (Value::Category(a), Value::Category(b)) => (if a == b { 1.0 } else { 0.0 }, 1.0),
            (Value::Number(a), Value::Number(b)) => (ranges[j].scale(*a), ranges[j].scale(*b)),
            _ => continue,
        };
        comparable = true;
        dot += a * b;
        uu += a * a;
        tt += b * b;
    }
    if !comparable {
        return Err(Error::NoComparableVariables);
    }
    if tt == 0.0 || uu == 0.0 {
        return Ok(if tt == uu { 0.0 } else { 1.0 });
    }
    Ok((1.0 - dot / (uu.sqrt() * tt.sqrt())).clamp(0.0, 1.0))
}

/// Number of variables on which each pool row is close to the target.
pub fn closeness_counts(target: &[Value], pool: &Dataset, ranges: &[ColumnRange], epsilon: f64) -> Result<Vec<usize>> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::InvalidArgument(format!("epsilon must lie in (0, 1], got {epsilon}")));
    }
    pool.rows()
        .iter()
        .map(|row| {
            check_widths(row, target, ranges)?;
            Ok(row
                .iter()
                .zip(target)
                .zip(ranges)
                .filter(|((u, t), r)| match (u, t) {
                    (Value::Category(a), Value::Category(b)) => a == b,
                    (Value::Number(a), Value::Number(b)) => {
                        (a - b).abs() <= epsilon * r.width().unwrap_or(0.0)
                    }
                    _ => false,
                })
                .count())
        })
        .collect()
}

/// Admitted row sets per level: level `k` holds rows close on at least
/// `p - k` of the `p` variables, for `k = 0..=p`.
pub fn filter_levels(target: &[Value], pool: &Dataset, ranges: &[ColumnRange], epsilon: f64) -> Result<Vec<BTreeSet<usize>>> {
    let counts = closeness_counts(target, pool, ranges, epsilon)?;
    let p = target.len();
    Ok((0..=p)
        .map(|k| (0..counts.len()).filter(|&i| counts[i] + k >= p).collect())
        .collect())
}

/// Rows admitted level by level until `n` are collected, ordered by closeness
/// count (descending) then row index, truncated to `n`.
pub fn filter_analogues(
    target: &[Value],
    pool: &Dataset,
    ranges: &[ColumnRange],
    epsilon: f64,
    n: usize,
) -> Result<Vec<usize>> {
    if pool.is_empty() || pool.n_rows() < n {
        return Err(Error::PoolTooSmall {
            needed: n,
            available: pool.n_rows(),
        });
    }
    let counts = closeness_counts(target, pool, ranges, epsilon)?;
    let mut idx: Vec<usize> = (0..counts.len()).collect();
    idx.sort_by(|&a, &b| counts[b].cmp(&counts[a]).then(a.cmp(&b)));
    idx.truncate(n);
    Ok(idx)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalogueQuery {
    pub target: Vec<Value>,
    pub n_analogues: usize,
    pub spec: DistanceSpec,
}

/// A retrieved pool row; `distance` is `None` under the filter metric, whose
/// ranking is by closeness count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Analogue {
    pub index: usize,
    pub distance: Option<f64>,
    pub close_variables: Option<usize>,
}

pub fn nearest_analogues(q: &AnalogueQuery, pool: &Dataset) -> Result<Vec<usize>> {
    Ok(ranked_analogues(q, pool)?.into_iter().map(|a| a.index).collect())
}

/// The `n_analogues` closest pool rows with their distances.
pub fn ranked_analogues(q: &AnalogueQuery, pool: &Dataset) -> Result<Vec<Analogue>> {
    q.spec.validate()?;
    if q.n_analogues == 0 {
        return Err(Error::InvalidArgument("n_analogues must be positive".into()));
    }
    if pool.n_rows() < q.n_analogues {
        return Err(Error::PoolTooSmall {
            needed: q.n_analogues,
            available: pool.n_rows(),
        });
    }
    if q.spec.metric == Metric::Filter {
        let eps = q.spec.epsilon.unwrap_or(DEFAULT_EPSILON);
        let counts = closeness_counts(&q.target, pool, &q.spec.ranges, eps)?;
        return Ok(filter_analogues(&q.target, pool, &q.spec.ranges, eps, q.n_analogues)?
            .into_iter()
            .map(|i| Analogue {
                index: i,
                distance: None,
                close_variables: Some(counts[i]),
            })
            .collect());
    }
    // rows sharing no observed variable with the target rank last, by index
    let mut scored = Vec::with_capacity(pool.n_rows());
    for (i, row) in pool.rows().iter().enumerate() {
        let d = match q.spec.metric {
            Metric::Cosine => cosine_distance(row, &q.target, &q.spec.ranges),
            _ => gower_distance(row, &q.target, &q.spec),
        };
        match d {
            Ok(d) => scored.push((i, Some(d))),
            Err(Error::NoComparableVariables) => scored.push((i, None)),
            Err(e) => return Err(e),
        }
    }
    if scored.iter().all(|s| s.1.is_none()) {
        return Err(Error::NoComparableVariables);
    }
    scored.sort_by(|a, b| match (a.1, b.1) {
        (Some(x), Some(y)) => x.total_cmp(&y).then(a.0.cmp(&b.0)),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => a.0.cmp(&b.0),
    });
    scored.truncate(q.n_analogues);
    Ok(scored
        .into_iter()
        .map(|(index, distance)| Analogue {
            index,
            distance,
            close_variables: None,
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariablePenalty {
    pub name: String,
    pub kind: ColumnKind,
    /// Mean of `1 - S_j` over comparable pairs; `None` if there were none.
    pub mean_penalty: Option<f64>,
    pub pairs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PenaltyReport {
    pub variables: Vec<VariablePenalty>,
    /// Variables without any comparable pair, left out of the ratio.
    pub excluded: Vec<String>,
    pub categorical_mean: f64,
    pub continuous_mean: f64,
    /// Mean categorical penalty over mean continuous penalty.
    pub continuous_weight: f64,
    /// True when every pair was enumerated rather than sampled.
    pub exact: bool,
}

/// Average Gower penalties per variable and the continuous weight that
/// equalizes them with the categorical ones.
pub fn penalty_weights(pool: &Dataset, max_pairs: usize, seed: u64) -> Result<PenaltyReport> {
    let n = pool.n_rows();
    if n < 2 {
        return Err(Error::DegeneratePool(format!("need at least 2 rows, got {n}")));
    }
    let kinds: Vec<ColumnKind> = pool.columns().iter().map(|c| c.kind).collect();
    if !kinds.contains(&ColumnKind::Categorical) || !kinds.contains(&ColumnKind::Continuous) {
        return Err(Error::DegeneratePool(
            "need at least one categorical and one continuous column".into(),
        ));
    }
    if max_pairs == 0 {
        return Err(Error::InvalidArgument("max_pairs must be positive".into()));
    }
    let ranges = normalize_ranges(pool);
    let p = pool.n_cols();
    let mut sums = vec![0.0; p];
    let mut counts = vec![0usize; p];
    let mut visit = |a: usize, b: usize| {
        let (u, t) = (pool.row(a), pool.row(b));
        for j in 0..p {
            if let Some(s) = similarity_term(&u[j], &t[j], &ranges[j]) {
                sums[j] += 1.0 - s;
                counts[j] += 1;
            }
        }
    };

    let total_pairs = n as u128 * (n as u128 - 1) / 2;
    let exact = total_pairs <= max_pairs as u128;
    if exact {
        for a in 0..n {
            for b in (a + 1)..n {
                visit(a, b);
            }
        }
    } else {
        let mut rng = rng_from_seed(seed);
        for _ in 0..max_pairs {
            let a = rng.random_range(0..n);
            let mut b = rng.random_range(0..n - 1);
            if b >= a {
                b += 1;
            }
            visit(a.min(b), a.max(b));
        }
    }

    let mut variables = Vec::with_capacity(p);
    let mut excluded = Vec::new();
    let mut cat = Vec::new();
    let mut cont = Vec::new();
    for j in 0..p {
        let mean = (counts[j] > 0).then(|| sums[j] / counts[j] as f64);
        match mean {
            Some(m) if kinds[j] == ColumnKind::Categorical => cat.push(m),
            Some(m) => cont.push(m),
            None => excluded.push(pool.name(j).to_owned()),
        }
        variables.push(VariablePenalty {
            name: pool.name(j).to_owned(),
            kind: kinds[j],
            mean_penalty: mean,
            pairs: counts[j],
        });
    }
    if cat.is_empty() || cont.is_empty() {
        return Err(Error::DegeneratePool(format!(
            "no comparable pairs for variables {}",
            excluded.join(", ")
        )));
    }
    let categorical_mean = cat.iter().sum::<f64>() / cat.len() as f64;
    let continuous_mean = cont.iter().sum::<f64>() / cont.len() as f64;
    if continuous_mean == 0.0 {
        return Err(Error::DegeneratePool(
            "continuous penalties are all zero; the weight ratio divides by zero".into(),
        ));
    }
    Ok(PenaltyReport {
        variables,
        excluded,
        categorical_mean,
        continuous_mean,
        continuous_weight: categorical_mean / continuous_mean,
        exact,
    })
}
