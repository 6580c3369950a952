//! Bayesian network model types and their JSON persistence.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{ColumnKind, DiscretizationMap};
use crate::error::{Error, Result};
use crate::graph::Dag;

/// Delimiter joining parent labels into table keys.
pub const KEY_DELIMITER: char = '|';

/// Conditional probability table. Keys are parent labels in `parents` order.
#[derive(Debug, Clone, PartialEq)]
pub struct Cpt {
    pub parents: Vec<String>,
    pub states: Vec<String>,
    pub table: BTreeMap<Vec<String>, Vec<f64>>,
}

impl Cpt {
    pub fn row(&self, parent_labels: &[String]) -> Option<&[f64]> {
        self.table.get(parent_labels).map(Vec::as_slice)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearGaussian {
    pub intercept: f64,
    /// Continuous parent name to regression coefficient.
    pub coefficients: BTreeMap<String, f64>,
    pub residual_variance: f64,
    pub marginal_mean: f64,
    pub marginal_variance: f64,
}

impl LinearGaussian {
    /// `intercept + sum coef * value`, looking parents up by name.
    pub fn conditional_mean(&self, mut value_of: impl FnMut(&str) -> Option<f64>) -> Option<f64> {
        let mut m = self.intercept;
        for (name, c) in &self.coefficients {
            m += c * value_of(name)?;
        }
        Some(m)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalLinearGaussian {
    pub discrete_parents: Vec<String>,
    pub continuous_parents: Vec<String>,
    /// One regression per observed discrete-parent combination.
    pub components: BTreeMap<Vec<String>, LinearGaussian>,
    pub fallback: LinearGaussian,
}

impl ConditionalLinearGaussian {
    pub fn component(&self, discrete_labels: &[String]) -> &LinearGaussian {
        self.components.get(discrete_labels).unwrap_or(&self.fallback)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Distribution {
    Cpt(Cpt),
    LinearGaussian(LinearGaussian),
    ConditionalLinearGaussian(ConditionalLinearGaussian),
}

impl Distribution {
    pub fn type_name(&self) -> &'static str {
        match self {
            Distribution::Cpt(_) => "cpt",
            Distribution::LinearGaussian(_) => "lg",
            Distribution::ConditionalLinearGaussian(_) => "clg",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeModel {
    pub name: String,
    pub kind: ColumnKind,
    /// Parents in declaration order.
    pub parents: Vec<String>,
    pub distribution: Distribution,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BayesianNetworkModel {
    pub dag: Dag,
    pub nodes: Vec<NodeModel>,
    pub bins: usize,
    pub alpha: f64,
    pub discretization: Option<DiscretizationMap>,
}

impl BayesianNetworkModel {
    pub fn node(&self, name: &str) -> Option<&NodeModel> {
        self.nodes.iter().find(|n| n.name == name)
    }

    pub fn node_index(&self, name: &str) -> Result<usize> {
        self.nodes
            .iter()
            .position(|n| n.name == name)
            .ok_or_else(|| Error::UnknownNode(name.to_owned()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.nodes.iter().map(|n| n.name.as_str())
    }

    /// Checks the structural invariants tying nodes, graph and distributions.
    pub fn validate(&self) -> Result<()> {
        if self.dag.len() != self.nodes.len() {
            return Err(Error::Model("graph and node list differ in size".into()));
        }
        for (i, node) in self.nodes.iter().enumerate() {
            if self.dag.name(i) != node.name {
                return Err(Error::Model(format!("node order mismatch at `{}`", node.name)));
            }
            let dag_parents = self.dag.parents(&node.name)?;
            if dag_parents != node.parents.iter().map(String::as_str).collect::<Vec<_>>() {
                return Err(Error::Model(format!("parent list of `{}` disagrees with edges", node.name)));
            }
            let kind_of = |p: &str| -> Result<ColumnKind> {
                self.node(p)
                    .map(|n| n.kind)
                    .ok_or_else(|| Error::UnknownNode(p.to_owned()))
            };
            let mut discrete = Vec::new();
            let mut continuous = Vec::new();
            for p in &node.parents {
                match kind_of(p)? {
                    ColumnKind::Categorical => discrete.push(p.clone()),
                    ColumnKind::Continuous => continuous.push(p.clone()),
                }
            }
            match (&node.distribution, node.kind) {
                (Distribution::Cpt(cpt), ColumnKind::Categorical) => {
                    if !continuous.is_empty() {
                        return Err(Error::Model(format!("categorical `{}` has a continuous parent", node.name)));
                    }
                    if cpt.parents != node.parents {
                        return Err(Error::Model(format!("CPT parents of `{}` disagree", node.name)));
                    }
                    for (key, probs) in &cpt.table {
                        if key.len() != cpt.parents.len() || probs.len() != cpt.states.len() {
                            return Err(Error::Model(format!("CPT row shape of `{}`", node.name)));
                        }
                        let sum: f64 = probs.iter().sum();
                        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) || (sum - 1.0).abs() > 1e-9 {
                            return Err(Error::Model(format!("CPT row of `{}` is not a distribution", node.name)));
                        }
                    }
                }
                (Distribution::LinearGaussian(lg), ColumnKind::Continuous) => {
                    if !discrete.is_empty() {
                        return Err(Error::Model(format!("`{}` has discrete parents but no CLG", node.name)));
                    }
                    check_lg(&node.name, lg, &continuous)?;
                }
                (Distribution::ConditionalLinearGaussian(clg), ColumnKind::Continuous) => {
                    if discrete.is_empty() || clg.discrete_parents != discrete || clg.continuous_parents != continuous {
                        return Err(Error::Model(format!("CLG parents of `{}` disagree", node.name)));
                    }
                    check_lg(&node.name, &clg.fallback, &continuous)?;
                    for (key, lg) in &clg.components {
                        if key.len() != discrete.len() {
                            return Err(Error::Model(format!("CLG key arity of `{}`", node.name)));
                        }
                        check_lg(&node.name, lg, &continuous)?;
                    }
                }
                (d, k) => {
                    return Err(Error::Model(format!(
                        "`{}` is {k} but carries a {} distribution",
                        node.name,
                        d.type_name()
                    )))
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = ModelDoc::from_model(self)?;
        let mut s = serde_json::to_string_pretty(&doc)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDoc = serde_json::from_str(text)?;
        let model = doc.into_model()?;
        model.validate()?;
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }
}

fn check_lg(node: &str, lg: &LinearGaussian, continuous: &[String]) -> Result<()> {
    if !lg.coefficients.keys().eq(sorted(continuous).iter()) {
        return Err(Error::Model(format!("regression inputs of `{node}` disagree with its parents")));
    }
    if lg.residual_variance < 0.0 || lg.marginal_variance < 0.0 {
        return Err(Error::Model(format!("negative variance in `{node}`")));
    }
    Ok(())
}

fn sorted(v: &[String]) -> Vec<String> {
    let mut v = v.to_vec();
    v.sort();
    v
}

fn join_key(labels: &[String]) -> Result<String> {
    if let Some(bad) = labels.iter().find(|l| l.contains(KEY_DELIMITER)) {
        return Err(Error::Model(format!(
            "label `{bad}` contains the key delimiter `{KEY_DELIMITER}`"
        )));
    }
    Ok(labels.join(&KEY_DELIMITER.to_string()))
}

fn split_key(key: &str, arity: usize) -> Vec<String> {
    if arity == 0 {
        return Vec::new();
    }
    key.split(KEY_DELIMITER).map(str::to_owned).collect()
}

#[derive(Serialize, Deserialize)]
struct ModelDoc {
    nodes: Vec<NodeDoc>,
    edges: Vec<(String, String)>,
    bins: usize,
    alpha: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    discretization: Option<BTreeMap<String, Vec<f64>>>,
}

#[derive(Serialize, Deserialize)]
struct NodeDoc {
    name: String,
    kind: ColumnKind,
    parents: Vec<String>,
    distribution: DistributionDoc,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum DistributionDoc {
    Cpt {
        states: Vec<String>,
        table: BTreeMap<String, Vec<f64>>,
    },
    Lg(LinearGaussian),
    Clg {
        discrete_parents: Vec<String>,
        continuous_parents: Vec<String>,
        components: BTreeMap<String, LinearGaussian>,
        fallback: LinearGaussian,
    },
}

impl ModelDoc {
    fn from_model(m: &BayesianNetworkModel) -> Result<Self> {
        let nodes = m
            .nodes
            .iter()
            .map(|n| {
                let distribution = match &n.distribution {
                    Distribution::Cpt(cpt) => DistributionDoc::Cpt {
                        states: cpt.states.clone(),
                        table: cpt
                            .table
                            .iter()
                            .map(|(k, v)| Ok((join_key(k)?, v.clone())))
                            .collect::<Result<_>>()?,
                    },
                    Distribution::LinearGaussian(lg) => DistributionDoc::Lg(lg.clone()),
                    Distribution::ConditionalLinearGaussian(clg) => DistributionDoc::Clg {
                        discrete_parents: clg.discrete_parents.clone(),
                        continuous_parents: clg.continuous_parents.clone(),
                        components: clg
                            .components
                            .iter()
                            .map(|(k, v)| Ok((join_key(k)?, v.clone())))
                            .collect::<Result<_>>()?,
                        fallback: clg.fallback.clone(),
                    },
                };
                Ok(NodeDoc {
                    name: n.name.clone(),
                    kind: n.kind,
                    parents: n.parents.clone(),
                    distribution,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            nodes,
            edges: m.dag.edges(),
            bins: m.bins,
            alpha: m.alpha,
            discretization: m.discretization.as_ref().map(|d| d.edges.clone()),
        })
    }

    fn into_model(self) -> Result<BayesianNetworkModel> {
        let dag = Dag::from_edges(self.nodes.iter().map(|n| n.name.clone()), &self.edges)?;
        let nodes = self
            .nodes
            .into_iter()
            .map(|n| {
                let distribution = match n.distribution {
                    DistributionDoc::Cpt { states, table } => Distribution::Cpt(Cpt {
                        table: table
                            .into_iter()
                            .map(|(k, v)| (split_key(&k, n.parents.len()), v))
                            .collect(),
                        parents: n.parents.clone(),
                        states,
                    }),
                    DistributionDoc::Lg(lg) => Distribution::LinearGaussian(lg),
                    DistributionDoc::Clg {
                        discrete_parents,
                        continuous_parents,
                        components,
                        fallback,
                    } => Distribution::ConditionalLinearGaussian(ConditionalLinearGaussian {
                        components: components
                            .into_iter()
                            .map(|(k, v)| (split_key(&k, discrete_parents.len()), v))
                            .collect(),
                        discrete_parents,
                        continuous_parents,
                        fallback,
                    }),
                };
                NodeModel {
                    name: n.name,
                    kind: n.kind,
                    parents: n.parents,
                    distribution,
                }
            })
            .collect();
        Ok(BayesianNetworkModel {
            dag,
            nodes,
            bins: self.bins,
            alpha: self.alpha,
            discretization: self.discretization.map(|edges| DiscretizationMap {
                bins: self.bins,
                edges,
            }),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lg(intercept: f64, coefficients: &[(&str, f64)]) -> LinearGaussian {
        LinearGaussian {
            intercept,
            coefficients: coefficients.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            residual_variance: 0.25,
            marginal_mean: intercept,
            marginal_variance: 1.0,
        }
    }

    fn small_model() -> BayesianNetworkModel {
        let dag = Dag::from_edges(
            ["C", "X", "Y"],
            &[("C".into(), "Y".into()), ("X".into(), "Y".into())],
        )
        .unwrap();
        let cpt = Cpt {
            parents: vec![],
            states: vec!["a".into(), "b".into()],
            table: [(vec![], vec![0.25, 0.75])].into_iter().collect(),
        };
        let clg = ConditionalLinearGaussian {
            discrete_parents: vec!["C".into()],
            continuous_parents: vec!["X".into()],
            components: [(vec!["a".to_string()], lg(1.0, &[("X", 2.0)]))].into_iter().collect(),
            fallback: lg(0.5, &[("X", 1.5)]),
        };
        BayesianNetworkModel {
            dag,
            nodes: vec![
                NodeModel {
                    name: "C".into(),
                    kind: ColumnKind::Categorical,
                    parents: vec![],
                    distribution: Distribution::Cpt(cpt),
                },
                NodeModel {
                    name: "X".into(),
                    kind: ColumnKind::Continuous,
                    parents: vec![],
                    distribution: Distribution::LinearGaussian(lg(3.0, &[])),
                },
                NodeModel {
                    name: "Y".into(),
                    kind: ColumnKind::Continuous,
                    parents: vec!["C".into(), "X".into()],
                    distribution: Distribution::ConditionalLinearGaussian(clg),
                },
            ],
            bins: 5,
            alpha: 1.0,
            discretization: None,
        }
    }

    #[test]
    fn json_round_trip() {
        let m = small_model();
        m.validate().unwrap();
        let text = m.to_json().unwrap();
        let back = BayesianNetworkModel::from_json(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_json().unwrap(), text);
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["nodes"][2]["distribution"]["type"], "clg");
        assert_eq!(v["edges"][0], serde_json::json!(["C", "Y"]));
    }

    #[test]
    fn rejects_bad_documents() {
        let mut m = small_model();
        if let Distribution::Cpt(cpt) = &mut m.nodes[0].distribution {
            cpt.table.insert(vec![], vec![0.5, 0.6]);
        }
        assert!(matches!(m.validate(), Err(Error::Model(_))));

        let mut m = small_model();
        m.nodes[1].kind = ColumnKind::Categorical;
        assert!(m.validate().is_err());

        let mut m = small_model();
        if let Distribution::Cpt(cpt) = &mut m.nodes[0].distribution {
            cpt.states[0] = "a|b".into();
            cpt.table.clear();
            cpt.table.insert(vec![], vec![0.5, 0.5]);
        }
        m.nodes[0].parents.clear();
        // delimiter in a state label is fine, only keys are joined
        assert!(m.to_json().is_ok());
    }

    #[test]
    fn unseen_combination_uses_fallback() {
        let m = small_model();
        let Distribution::ConditionalLinearGaussian(clg) = &m.nodes[2].distribution else {
            unreachable!()
        };
        assert_eq!(clg.component(&["zzz".to_string()]).intercept, 0.5);
        assert_eq!(clg.component(&["a".to_string()]).intercept, 1.0);
    }
}
