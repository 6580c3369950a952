//! Parameter learning on the raw mixed dataset and the full learning pipeline.
//!
//! Each node gets one of three families, chosen by its own kind and the kinds
//! of its parents:
//!
//! | child       | parents                       | family                      |
//! |-------------|-------------------------------|-----------------------------|
//! | categorical | categorical only              | [`Cpt`]                     |
//! | continuous  | continuous only (or none)     | [`LinearGaussian`]          |
//! | continuous  | at least one categorical      | [`ConditionalLinearGaussian`] |
//!
//! Regressions are the posterior mean of a Bayesian linear regression with an
//! isotropic zero-mean prior of precision [`PRIOR_PRECISION`] on the slopes,
//! i.e. ridge on centered data with an unpenalized intercept. Variances use
//! the population convention (divide by `n`).

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::dataset::{quantile_discretize, ColumnKind, Dataset};
use crate::error::{Error, Result};
use crate::graph::{Dag, EdgeConstraints};
use crate::model::{BayesianNetworkModel, ConditionalLinearGaussian, Cpt, Distribution, LinearGaussian, NodeModel};
use crate::structure::{hill_climb, orientation_guard, DEFAULT_MAX_PARENTS};

pub const PRIOR_PRECISION: f64 = 1e-6;
pub const DEFAULT_ALPHA: f64 = 1.0;
pub const DEFAULT_BINS: usize = 5;
/// Smallest subsample a per-combination regression is fitted on.
pub const MIN_COMPONENT_ROWS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearnConfig {
    pub bins: usize,
    pub max_parents: usize,
    pub alpha: f64,
}

impl Default for LearnConfig {
    fn default() -> Self {
        Self {
            bins: DEFAULT_BINS,
            max_parents: DEFAULT_MAX_PARENTS,
            alpha: DEFAULT_ALPHA,
        }
    }
}

fn require_kind(d: &Dataset, col: usize, kind: ColumnKind) -> Result<()> {
    if d.kind(col) == kind {
        Ok(())
    } else {
        Err(Error::KindMismatch {
            column: d.name(col).to_owned(),
            expected: kind.as_str(),
            actual: d.kind(col).as_str(),
        })
    }
}

fn indices(d: &Dataset, names: &[&str]) -> Result<Vec<usize>> {
    names.iter().map(|n| d.column_index(n)).collect()
}

/// Laplace-smoothed conditional frequencies over observed parent configurations.
pub fn fit_cpt(d: &Dataset, child: &str, parents: &[&str], alpha: f64) -> Result<Cpt> {
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidArgument(format!("smoothing must be finite and >= 0, got {alpha}")));
    }
    let c = d.column_index(child)?;
    require_kind(d, c, ColumnKind::Categorical)?;
    let ps = indices(d, parents)?;
    for &p in &ps {
        require_kind(d, p, ColumnKind::Categorical)?;
    }
    let states = d.labels(c);
    let r = states.len();

    let mut counts: BTreeMap<Vec<String>, Vec<f64>> = BTreeMap::new();
    for row in d.rows() {
        let Some(label) = row[c].as_category() else { continue };
        let key: Option<Vec<String>> = ps.iter().map(|&p| row[p].as_category().map(str::to_owned)).collect();
        let Some(key) = key else { continue };
        let k = states.binary_search_by(|s| s.as_str().cmp(label)).expect("label is observed");
        counts.entry(key).or_insert_with(|| vec![0.0; r])[k] += 1.0;
    }
    if counts.is_empty() {
        return Err(Error::NoCompleteCases(child.to_owned()));
    }
    let table = counts
        .into_iter()
        .map(|(key, row)| {
            let n: f64 = row.iter().sum();
            let denom = n + alpha * r as f64;
            let probs = row.iter().map(|&c| (c + alpha) / denom).collect();
            (key, probs)
        })
        .collect();
    Ok(Cpt {
        parents: parents.iter().map(|s| s.to_string()).collect(),
        states,
        table,
    })
}

pub fn fit_linear_gaussian(d: &Dataset, child: &str, parents: &[&str]) -> Result<LinearGaussian> {
    let c = d.column_index(child)?;
    require_kind(d, c, ColumnKind::Continuous)?;
    let ps = indices(d, parents)?;
    for &p in &ps {
        require_kind(d, p, ColumnKind::Continuous)?;
    }
    fit_rows(d, c, &ps, 0..d.n_rows())
}

/// Regression of column `child` on columns `parents` over the complete cases
/// among `rows`.
fn fit_rows(d: &Dataset, child: usize, parents: &[usize], rows: impl Iterator<Item = usize>) -> Result<LinearGaussian> {
    let mut ys = Vec::new();
    let mut xs: Vec<f64> = Vec::new();
    'rows: for i in rows {
        let row = d.row(i);
        let Some(y) = row[child].as_number() else { continue };
        let start = xs.len();
        for &p in parents {
            match row[p].as_number() {
                Some(x) => xs.push(x),
                None => {
                    xs.truncate(start);
                    continue 'rows;
                }
            }
        }
        ys.push(y);
    }
    let n = ys.len();
    if n < MIN_COMPONENT_ROWS {
        return Err(Error::TooFewValues {
            column: d.name(child).to_owned(),
            needed: MIN_COMPONENT_ROWS,
            found: n,
        });
    }
    let k = parents.len();
    let nf = n as f64;
    let y_mean = ys.iter().sum::<f64>() / nf;
    let y_var = ys.iter().map(|y| (y - y_mean).powi(2)).sum::<f64>() / nf;

    if k == 0 {
        return Ok(LinearGaussian {
            intercept: y_mean,
            coefficients: BTreeMap::new(),
            residual_variance: y_var,
            marginal_mean: y_mean,
            marginal_variance: y_var,
        });
    }

    let x = DMatrix::from_row_slice(n, k, &xs);
    let x_mean: Vec<f64> = (0..k).map(|j| x.column(j).sum() / nf).collect();
    let mut xc = x.clone();
    for j in 0..k {
        xc.column_mut(j).add_scalar_mut(-x_mean[j]);
    }
    let yc = DVector::from_iterator(n, ys.iter().map(|y| y - y_mean));
    let xt = xc.transpose();
    let gram = &xt * &xc + DMatrix::identity(k, k) * PRIOR_PRECISION;
    let rhs = &xt * &yc;
    let beta = match gram.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => gram
            .svd(true, true)
            .solve(&rhs, f64::EPSILON)
            .map_err(|e| Error::Invariant(format!("regression solve failed: {e}")))?,
    };
    let intercept = y_mean - (0..k).map(|j| beta[j] * x_mean[j]).sum::<f64>();
    let fitted = &x * &beta;
    let residual_variance = ys
        .iter()
        .zip(fitted.iter())
        .map(|(y, f)| (y - intercept - f).powi(2))
        .sum::<f64>()
        / nf;
    let coefficients = parents
        .iter()
        .zip(beta.iter())
        .map(|(&p, &b)| (d.name(p).to_owned(), b))
        .collect();
    Ok(LinearGaussian {
        intercept,
        coefficients,
        residual_variance,
        marginal_mean: y_mean,
        marginal_variance: y_var,
    })
}

/// One regression per observed discrete-parent combination with at least
/// [`MIN_COMPONENT_ROWS`] complete rows; smaller combinations use the
/// whole-column fallback at prediction time.
pub fn fit_conditional_linear_gaussian(
    d: &Dataset,
    child: &str,
    discrete_parents: &[&str],
    continuous_parents: &[&str],
) -> Result<ConditionalLinearGaussian> {
    let c = d.column_index(child)?;
    require_kind(d, c, ColumnKind::Continuous)?;
    if discrete_parents.is_empty() {
        return Err(Error::InvalidArgument(format!("`{child}` needs at least one discrete parent")));
    }
    let dps = indices(d, discrete_parents)?;
    for &p in &dps {
        require_kind(d, p, ColumnKind::Categorical)?;
    }
    let cps = indices(d, continuous_parents)?;
    for &p in &cps {
        require_kind(d, p, ColumnKind::Continuous)?;
    }
    let fallback = fit_rows(d, c, &cps, 0..d.n_rows())?;

    let mut groups: BTreeMap<Vec<String>, Vec<usize>> = BTreeMap::new();
    for (i, row) in d.rows().iter().enumerate() {
        let key: Option<Vec<String>> = dps.iter().map(|&p| row[p].as_category().map(str::to_owned)).collect();
        if let Some(key) = key {
            groups.entry(key).or_default().push(i);
        }
    }
    let mut components = BTreeMap::new();
    for (key, rows) in groups {
        match fit_rows(d, c, &cps, rows.into_iter()) {
            Ok(lg) => {
                components.insert(key, lg);
            }
            Err(Error::TooFewValues { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(ConditionalLinearGaussian {
        discrete_parents: discrete_parents.iter().map(|s| s.to_string()).collect(),
        continuous_parents: continuous_parents.iter().map(|s| s.to_string()).collect(),
        components,
        fallback,
    })
}

/// Fits every node's distribution for a fixed structure.
pub fn fit_parameters(d: &Dataset, dag: &Dag, alpha: f64) -> Result<BayesianNetworkModel> {
    let mut nodes = Vec::with_capacity(dag.len());
    for name in dag.nodes() {
        let col = d.column_index(name)?;
        let kind = d.kind(col);
        let parents = dag.parents(name)?;
        let mut discrete = Vec::new();
        let mut continuous = Vec::new();
        for &p in &parents {
            match d.kind(d.column_index(p)?) {
                ColumnKind::Categorical => discrete.push(p),
                ColumnKind::Continuous => continuous.push(p),
            }
        }
        let distribution = match kind {
            ColumnKind::Categorical => {
                if let Some(p) = continuous.first() {
                    return Err(Error::ForbiddenEdge {
                        parent: p.to_string(),
                        child: name.clone(),
                    });
                }
                Distribution::Cpt(fit_cpt(d, name, &parents, alpha)?)
            }
            ColumnKind::Continuous if discrete.is_empty() => {
                Distribution::LinearGaussian(fit_linear_gaussian(d, name, &continuous)?)
            }
            ColumnKind::Continuous => Distribution::ConditionalLinearGaussian(fit_conditional_linear_gaussian(
                d,
                name,
                &discrete,
                &continuous,
            )?),
        };
        nodes.push(NodeModel {
            name: name.clone(),
            kind,
            parents: parents.iter().map(|s| s.to_string()).collect(),
            distribution,
        });
    }
    Ok(BayesianNetworkModel {
        dag: dag.clone(),
        nodes,
        bins: 0,
        alpha,
        discretization: None,
    })
}

/// Structure on the quantile-discretized data, parameters on the raw data.
pub fn mixlearn(d: &Dataset, constraints: &EdgeConstraints, config: &LearnConfig) -> Result<BayesianNetworkModel> {
    if d.is_empty() {
        return Err(Error::InvalidArgument("cannot learn from an empty dataset".into()));
    }
    let (discrete, map) = quantile_discretize(d, config.bins)?;
    let guard = orientation_guard(d.columns());
    let dag = hill_climb(&discrete, constraints, config.max_parents, &guard)?;
    let mut model = fit_parameters(d, &dag, config.alpha)?;
    model.bins = config.bins;
    model.discretization = Some(map);
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{ColumnSchema, Schema, Value};

    fn data(cols: Vec<ColumnSchema>, rows: Vec<Vec<Value>>) -> Dataset {
        Dataset::new(Schema::new(cols).unwrap(), rows).unwrap()
    }

    fn cats(labels: &[&str]) -> Dataset {
        data(
            vec![ColumnSchema::categorical("X")],
            labels.iter().map(|l| vec![Value::category(*l)]).collect(),
        )
    }

    #[test]
    fn cpt_frequencies() {
        let d = cats(&["a", "a", "b"]);
        let cpt = fit_cpt(&d, "X", &[], 0.0).unwrap();
        let row = cpt.row(&[]).unwrap();
        assert!((row[0] - 2.0 / 3.0).abs() < 1e-12 && (row[1] - 1.0 / 3.0).abs() < 1e-12);
        let cpt = fit_cpt(&d, "X", &[], 1.0).unwrap();
        let row = cpt.row(&[]).unwrap();
        assert!((row[0] - 0.6).abs() < 1e-12 && (row[1] - 0.4).abs() < 1e-12);
        assert_eq!(cpt.states, ["a", "b"]);
    }

    #[test]
    fn cpt_with_parent_matches_hand_counts() {
        // joint counts: (p=0,c=a)=3, (0,b)=1, (1,a)=1, (1,b)=3
        let pairs = [
            ("0", "a"),
            ("0", "a"),
            ("0", "a"),
            ("0", "b"),
            ("1", "a"),
            ("1", "b"),
            ("1", "b"),
            ("1", "b"),
        ];
        let d = data(
            vec![ColumnSchema::categorical("P"), ColumnSchema::categorical("C")],
            pairs
                .iter()
                .map(|(p, c)| vec![Value::category(*p), Value::category(*c)])
                .collect(),
        );
        let cpt = fit_cpt(&d, "C", &["P"], 0.0).unwrap();
        assert_eq!(cpt.row(&["0".into()]).unwrap(), &[0.75, 0.25]);
        assert_eq!(cpt.row(&["1".into()]).unwrap(), &[0.25, 0.75]);
        let smooth = fit_cpt(&d, "C", &["P"], 1.0).unwrap();
        assert_eq!(smooth.row(&["0".into()]).unwrap(), &[4.0 / 6.0, 2.0 / 6.0]);
    }

    #[test]
    fn cpt_errors() {
        let d = data(
            vec![ColumnSchema::categorical("X"), ColumnSchema::continuous("Y")],
            vec![vec![Value::Missing, Value::Number(1.0)]],
        );
        assert!(matches!(fit_cpt(&d, "Y", &[], 1.0), Err(Error::KindMismatch { .. })));
        assert!(matches!(fit_cpt(&d, "X", &[], 1.0), Err(Error::NoCompleteCases(_))));
    }

    fn xy(pairs: &[(f64, f64)]) -> Dataset {
        data(
            vec![ColumnSchema::continuous("x"), ColumnSchema::continuous("y")],
            pairs.iter().map(|&(x, y)| vec![Value::Number(x), Value::Number(y)]).collect(),
        )
    }

    #[test]
    fn exact_line() {
        let pairs: Vec<_> = (1..=10).map(|x| (x as f64, 2.0 * x as f64)).collect();
        let lg = fit_linear_gaussian(&xy(&pairs), "y", &["x"]).unwrap();
        assert!((lg.coefficients["x"] - 2.0).abs() < 1e-4);
        assert!(lg.residual_variance.abs() < 1e-6);
        assert!(lg.residual_variance <= lg.marginal_variance + 1e-9);
    }

    #[test]
    fn no_parents_population_moments() {
        let lg = fit_linear_gaussian(&xy(&[(0.0, 1.0), (0.0, 3.0)]), "y", &[]).unwrap();
        assert_eq!(lg.intercept, 2.0);
        assert_eq!(lg.marginal_variance, 1.0);
        assert_eq!(lg.residual_variance, 1.0);
        assert!(lg.coefficients.is_empty());
    }

    #[test]
    fn regression_needs_two_rows() {
        let d = xy(&[(1.0, 1.0)]);
        assert!(matches!(fit_linear_gaussian(&d, "y", &["x"]), Err(Error::TooFewValues { found: 1, .. })));
    }

    #[test]
    fn rank_deficient_design_is_defined() {
        // constant regressor: shrinks to zero slope
        let lg = fit_linear_gaussian(&xy(&[(1.0, 1.0), (1.0, 3.0), (1.0, 5.0)]), "y", &["x"]).unwrap();
        assert!(lg.coefficients["x"].abs() < 1e-9);
        assert!((lg.intercept + lg.coefficients["x"] - 3.0).abs() < 1e-9);
    }

    #[test]
    fn clg_constant_groups() {
        let rows = (0..10)
            .map(|i| {
                let (g, y) = if i % 2 == 0 { ("a", 10.0) } else { ("b", 20.0) };
                vec![Value::category(g), Value::Number(y)]
            })
            .collect();
        let d = data(vec![ColumnSchema::categorical("G"), ColumnSchema::continuous("Y")], rows);
        let clg = fit_conditional_linear_gaussian(&d, "Y", &["G"], &[]).unwrap();
        let a = clg.component(&["a".into()]);
        let b = clg.component(&["b".into()]);
        assert!((a.intercept - 10.0).abs() < 1e-9 && a.residual_variance.abs() < 1e-12);
        assert!((b.intercept - 20.0).abs() < 1e-9 && b.residual_variance.abs() < 1e-12);
        assert_eq!(clg.component(&["zzz".into()]), &clg.fallback);
        assert!((clg.fallback.intercept - 15.0).abs() < 1e-9);
    }

    #[test]
    fn clg_singleton_combination_falls_back() {
        let mut rows: Vec<Vec<Value>> = (0..6)
            .map(|i| vec![Value::category("a"), Value::Number(i as f64)])
            .collect();
        rows.push(vec![Value::category("lonely"), Value::Number(100.0)]);
        let d = data(vec![ColumnSchema::categorical("G"), ColumnSchema::continuous("Y")], rows);
        let clg = fit_conditional_linear_gaussian(&d, "Y", &["G"], &[]).unwrap();
        assert!(!clg.components.contains_key(&vec!["lonely".to_string()]));
        assert_eq!(clg.component(&["lonely".into()]), &clg.fallback);
    }

    #[test]
    fn clg_requires_continuous_child() {
        let d = cats(&["a"]);
        assert!(matches!(
            fit_conditional_linear_gaussian(&d, "X", &["X"], &[]),
            Err(Error::KindMismatch { .. })
        ));
    }

    #[test]
    fn single_categorical_column_model() {
        let m = mixlearn(&cats(&["a", "b", "a"]), &EdgeConstraints::none(), &LearnConfig::default()).unwrap();
        assert_eq!(m.dag.edge_count(), 0);
        assert!(matches!(m.nodes[0].distribution, Distribution::Cpt(_)));
        m.validate().unwrap();
    }

    #[test]
    fn expert_edge_passes_through() {
        let rows = (0..40)
            .map(|i| {
                vec![
                    Value::category(if i % 2 == 0 { "u" } else { "v" }),
                    Value::category(if (i / 2) % 2 == 0 { "p" } else { "q" }),
                ]
            })
            .collect();
        let d = data(vec![ColumnSchema::categorical("A"), ColumnSchema::categorical("B")], rows);
        let c = EdgeConstraints::protected(vec![("A".into(), "B".into())]);
        let m = mixlearn(&d, &c, &LearnConfig::default()).unwrap();
        assert!(m.dag.has_edge("A", "B"));
        assert_eq!(m.nodes[1].parents, ["A"]);
    }
}
