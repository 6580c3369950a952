//! Score-based structure learning on discretized data.
//!
//! The K2 metric (Cooper and Herskovits) is computed in log form. For a child
//! with `r` states and observed parent configurations `j` with counts
//! `N_ijk`, `N_ij = sum_k N_ijk`:
//!
//! ```text
//! ln K2 = sum_j [ lnG(r) - lnG(N_ij + r) + sum_k lnG(N_ijk + 1) ]
//! ```
//!
//! Unobserved parent configurations contribute zero. Rows missing any member
//! of the family are dropped for that family only. `r` is the number of
//! distinct labels observed anywhere in the child column.

use std::collections::{BTreeSet, HashMap};

use statrs::function::gamma::ln_gamma;

use crate::dataset::{ColumnKind, ColumnSchema, Dataset, Value};
use crate::error::{Error, Result};
use crate::graph::{Dag, EdgeConstraints};

/// Minimum score gain for a move to count as an improvement.
pub const IMPROVEMENT_TOLERANCE: f64 = 1e-9;

pub const DEFAULT_MAX_PARENTS: usize = 4;

const MISSING: u32 = u32::MAX;

/// Integer-coded view of a fully categorical dataset.
#[derive(Debug, Clone)]
pub struct DiscreteData {
    names: Vec<String>,
    codes: Vec<Vec<u32>>,
    cards: Vec<usize>,
    n_rows: usize,
}

impl DiscreteData {
    pub fn from_dataset(d: &Dataset) -> Result<Self> {
        let mut codes = Vec::with_capacity(d.n_cols());
        let mut cards = Vec::with_capacity(d.n_cols());
        for col in 0..d.n_cols() {
            if d.kind(col) != ColumnKind::Categorical {
                return Err(Error::KindMismatch {
                    column: d.name(col).to_owned(),
                    expected: "categorical",
                    actual: "continuous",
                });
            }
            let labels = d.labels(col);
            let column = d
                .column(col)
                .map(|v| match v {
                    Value::Category(s) => labels.binary_search(s).map(|i| i as u32).unwrap_or(MISSING),
                    _ => MISSING,
                })
                .collect();
            codes.push(column);
            cards.push(labels.len());
        }
        Ok(Self {
            names: d.columns().iter().map(|c| c.name.clone()).collect(),
            codes,
            cards,
            n_rows: d.n_rows(),
        })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn n_vars(&self) -> usize {
        self.names.len()
    }

    pub fn cardinality(&self, var: usize) -> usize {
        self.cards[var]
    }

    fn index_of(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::UnknownColumn(name.to_owned()))
    }

    /// Log K2 score of one family, by column index.
    pub fn family_score(&self, child: usize, parents: &[usize]) -> Result<f64> {
        let r = self.cards[child];
        let mut counts: HashMap<u64, Vec<u32>> = HashMap::new();
        let mut used = 0usize;
        'rows: for row in 0..self.n_rows {
            let k = self.codes[child][row];
            if k == MISSING {
                continue;
            }
            let mut key = 0u64;
            for &p in parents {
                let v = self.codes[p][row];
                if v == MISSING {
                    continue 'rows;
                }
                key = key * self.cards[p] as u64 + v as u64;
            }
            counts.entry(key).or_insert_with(|| vec![0; r])[k as usize] += 1;
            used += 1;
        }
        if used == 0 {
            return Err(Error::NoCompleteCases(self.names[child].clone()));
        }
        let ln_r = ln_gamma(r as f64);
        let mut keys: Vec<&u64> = counts.keys().collect();
        // fixed summation order keeps the score bit-reproducible
        keys.sort_unstable();
        let score = keys
            .into_iter()
            .map(|key| {
                let row = &counts[key];
                let n_ij: u32 = row.iter().sum();
                let cells: f64 = row.iter().map(|&c| ln_gamma(c as f64 + 1.0)).sum();
                ln_r - ln_gamma(n_ij as f64 + r as f64) + cells
            })
            .sum();
        Ok(score)
    }
}

pub fn k2_family_score(d: &Dataset, child: &str, parents: &[&str]) -> Result<f64> {
    let data = DiscreteData::from_dataset(d)?;
    let c = data.index_of(child)?;
    let mut ps = parents
        .iter()
        .map(|p| data.index_of(p))
        .collect::<Result<Vec<_>>>()?;
    ps.sort_unstable();
    ps.dedup();
    data.family_score(c, &ps)
}

pub fn k2_total_score(d: &Dataset, g: &Dag) -> Result<f64> {
    let data = DiscreteData::from_dataset(d)?;
    let idx: Vec<usize> = g
        .nodes()
        .iter()
        .map(|n| data.index_of(n))
        .collect::<Result<_>>()?;
    let mut total = 0.0;
    for node in 0..g.len() {
        let ps: Vec<usize> = g.parent_indices(node).iter().map(|&p| idx[p]).collect();
        let mut ps = ps;
        ps.sort_unstable();
        total += data.family_score(idx[node], &ps)?;
    }
    Ok(total)
}

/// Memoized family scores keyed by (child, sorted parent set).
#[derive(Debug, Default)]
pub struct FamilyScoreCache {
    scores: HashMap<(usize, Vec<usize>), f64>,
}

impl FamilyScoreCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn score(&mut self, data: &DiscreteData, child: usize, parents: &BTreeSet<usize>) -> Result<f64> {
        let key: Vec<usize> = parents.iter().copied().collect();
        if let Some(&s) = self.scores.get(&(child, key.clone())) {
            return Ok(s);
        }
        let s = data.family_score(child, &key)?;
        self.scores.insert((child, key), s);
        Ok(s)
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

/// Forbids edges from continuous columns into categorical ones, keeping every
/// learned family inside the CPT / linear-Gaussian / conditional-linear-Gaussian
/// cases.
pub fn orientation_guard(schema: &[ColumnSchema]) -> impl Fn(&str, &str) -> bool + Send + Sync + Clone {
    let kinds: HashMap<String, ColumnKind> = schema.iter().map(|c| (c.name.clone(), c.kind)).collect();
    move |parent: &str, child: &str| {
        kinds.get(parent) == Some(&ColumnKind::Continuous) && kinds.get(child) == Some(&ColumnKind::Categorical)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum MoveKind {
    Add,
    Delete,
    Reverse,
}

/// One hill-climbing step over column indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Move {
    pub kind: MoveKind,
    pub parent: usize,
    pub child: usize,
}

#[derive(Debug, Clone)]
pub struct SearchTrace {
    pub dag: Dag,
    /// Total score after each accepted move, starting with the initial graph.
    pub scores: Vec<f64>,
    pub moves: Vec<Move>,
}

impl SearchTrace {
    pub fn final_score(&self) -> f64 {
        *self.scores.last().expect("trace always holds the initial score")
    }
}

pub fn hill_climb(
    d: &Dataset,
    constraints: &EdgeConstraints,
    max_parents: usize,
    forbidden: &(dyn Fn(&str, &str) -> bool + Sync),
) -> Result<Dag> {
    hill_climb_traced(d, constraints, max_parents, forbidden).map(|t| t.dag)
}

/// Steepest-ascent search over add, delete and reverse moves.
///
/// Starts from exactly the required edges. When the constraints are not
/// removable those edges are never deleted or reversed. Among moves with equal
/// gain the first in (kind, parent index, child index) order wins.
pub fn hill_climb_traced(
    d: &Dataset,
    constraints: &EdgeConstraints,
    max_parents: usize,
    forbidden: &(dyn Fn(&str, &str) -> bool + Sync),
) -> Result<SearchTrace> {
    if max_parents == 0 {
        return Err(Error::InvalidArgument("max_parents must be positive".into()));
    }
    let data = DiscreteData::from_dataset(d)?;
    let names = data.names().to_vec();
    let n = names.len();

    let mut dag = constraints.validate(&names)?;
    for (p, c) in &constraints.required_edges {
        if forbidden(p, c) {
            return Err(Error::ForbiddenEdge {
                parent: p.clone(),
                child: c.clone(),
            });
        }
    }
    let protected: BTreeSet<(usize, usize)> = if constraints.removable {
        BTreeSet::new()
    } else {
        dag.edge_indices().into_iter().collect()
    };
    let banned: Vec<Vec<bool>> = (0..n)
        .map(|p| (0..n).map(|c| p == c || forbidden(&names[p], &names[c])).collect())
        .collect();

    let mut cache = FamilyScoreCache::new();
    let mut family: Vec<f64> = (0..n)
        .map(|c| cache.score(&data, c, dag.parent_indices(c)))
        .collect::<Result<_>>()?;
    let mut scores = vec![family.iter().sum()];
    let mut moves = Vec::new();

    loop {
        let mut best: Option<(f64, Move, f64, f64)> = None;
        let mut consider = |gain: f64, mv: Move, new_child: f64, new_parent: f64| {
            if gain > IMPROVEMENT_TOLERANCE && best.as_ref().is_none_or(|b| gain > b.0) {
                best = Some((gain, mv, new_child, new_parent));
            }
        };

        // additions
        for p in 0..n {
            for c in 0..n {
                if banned[p][c] || dag.parent_indices(c).len() >= max_parents || !dag.can_add(p, c) {
                    continue;
                }
                let mut ps = dag.parent_indices(c).clone();
                ps.insert(p);
                let Ok(s) = cache.score(&data, c, &ps) else { continue };
                consider(
                    s - family[c],
                    Move {
                        kind: MoveKind::Add,
                        parent: p,
                        child: c,
                    },
                    s,
                    f64::NAN,
                );
            }
        }
        // deletions
        for p in 0..n {
            for c in 0..n {
                if !dag.has_edge_idx(p, c) || protected.contains(&(p, c)) {
                    continue;
                }
                let mut ps = dag.parent_indices(c).clone();
                ps.remove(&p);
                let Ok(s) = cache.score(&data, c, &ps) else { continue };
                consider(
                    s - family[c],
                    Move {
                        kind: MoveKind::Delete,
                        parent: p,
                        child: c,
                    },
                    s,
                    f64::NAN,
                );
            }
        }
        // reversals
        for p in 0..n {
            for c in 0..n {
                if !dag.has_edge_idx(p, c)
                    || protected.contains(&(p, c))
                    || banned[c][p]
                    || dag.parent_indices(p).len() >= max_parents
                    || !dag.can_reverse(p, c)
                {
                    continue;
                }
                let mut child_ps = dag.parent_indices(c).clone();
                child_ps.remove(&p);
                let mut parent_ps = dag.parent_indices(p).clone();
                parent_ps.insert(c);
                let (Ok(sc), Ok(sp)) = (cache.score(&data, c, &child_ps), cache.score(&data, p, &parent_ps)) else {
                    continue;
                };
                consider(
                    (sc - family[c]) + (sp - family[p]),
                    Move {
                        kind: MoveKind::Reverse,
                        parent: p,
                        child: c,
                    },
                    sc,
                    sp,
                );
            }
        }

        let Some((_, mv, new_child, new_parent)) = best else { break };
        match mv.kind {
            MoveKind::Add => dag.add_unchecked(mv.parent, mv.child),
            MoveKind::Delete => dag.remove_unchecked(mv.parent, mv.child),
            MoveKind::Reverse => {
                dag.remove_unchecked(mv.parent, mv.child);
                dag.add_unchecked(mv.child, mv.parent);
                family[mv.parent] = new_parent;
            }
        }
        family[mv.child] = new_child;
        let total: f64 = family.iter().sum();
        if total <= *scores.last().unwrap() {
            return Err(Error::Invariant(format!(
                "accepted move {mv:?} did not increase the score ({total} <= {})",
                scores.last().unwrap()
            )));
        }
        scores.push(total);
        moves.push(mv);
    }

    Ok(SearchTrace { dag, scores, moves })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Schema;

    fn cat_data(cols: &[&str], rows: &[&[&str]]) -> Dataset {
        let schema = Schema::new(cols.iter().map(|c| ColumnSchema::categorical(*c)).collect()).unwrap();
        let rows = rows
            .iter()
            .map(|r| {
                r.iter()
                    .map(|s| if s.is_empty() { Value::Missing } else { Value::category(*s) })
                    .collect()
            })
            .collect();
        Dataset::new(schema, rows).unwrap()
    }

    fn ln_fact(n: u64) -> f64 {
        (1..=n).map(|k| (k as f64).ln()).sum()
    }

    #[test]
    fn parentless_binary_counts() {
        let d = cat_data(&["X"], &[&["a"], &["a"], &["b"]]);
        let s = k2_family_score(&d, "X", &[]).unwrap();
        let expected = (2.0f64 / 24.0).ln();
        assert!((s - expected).abs() < 1e-12, "{s} vs {expected}");
        assert!((s + 2.4849).abs() < 1e-4);
    }

    #[test]
    fn constant_child_scores_zero() {
        let d = cat_data(&["X", "P"], &[&["a", "u"], &["a", "v"], &["a", "u"], &["a", "w"]]);
        assert!(k2_family_score(&d, "X", &["P"]).unwrap().abs() < 1e-12);
        assert!(k2_family_score(&d, "X", &[]).unwrap().abs() < 1e-12);
    }

    #[test]
    fn one_parent_matches_factorials() {
        // child Y | parent X; configurations x=0: y counts (2,1); x=1: (0,2)
        let d = cat_data(
            &["X", "Y"],
            &[&["0", "a"], &["0", "a"], &["0", "b"], &["1", "b"], &["1", "b"]],
        );
        let r = 2u64;
        let term = |counts: &[u64]| {
            let nij: u64 = counts.iter().sum();
            ln_fact(r - 1) - ln_fact(nij + r - 1) + counts.iter().map(|&c| ln_fact(c)).sum::<f64>()
        };
        let expected = term(&[2, 1]) + term(&[0, 2]);
        assert!((k2_family_score(&d, "Y", &["X"]).unwrap() - expected).abs() < 1e-9);
    }

    #[test]
    fn missing_rows_dropped_per_family() {
        let d = cat_data(&["X", "Y"], &[&["0", "a"], &["", "a"], &["1", "b"]]);
        let with_all = k2_family_score(&d, "Y", &[]).unwrap();
        let family = k2_family_score(&d, "Y", &["X"]).unwrap();
        let trimmed = cat_data(&["X", "Y"], &[&["0", "a"], &["1", "b"]]);
        assert_eq!(family, k2_family_score(&trimmed, "Y", &["X"]).unwrap());
        assert_ne!(with_all, k2_family_score(&trimmed, "Y", &[]).unwrap());
    }

    #[test]
    fn scoring_errors() {
        let d = cat_data(&["X", "Y"], &[&["", "a"], &["", "b"]]);
        assert!(matches!(k2_family_score(&d, "X", &[]), Err(Error::NoCompleteCases(_))));
        assert!(matches!(k2_family_score(&d, "Y", &["X"]), Err(Error::NoCompleteCases(_))));

        let schema = Schema::new(vec![ColumnSchema::continuous("Z")]).unwrap();
        let d = Dataset::new(schema, vec![vec![Value::Number(1.0)]]).unwrap();
        assert!(matches!(k2_family_score(&d, "Z", &[]), Err(Error::KindMismatch { .. })));
    }

    #[test]
    fn total_is_sum_of_families() {
        let d = cat_data(&["A", "B"], &[&["0", "0"], &["1", "1"], &["1", "0"], &["0", "0"]]);
        let g = Dag::from_edges(["A", "B"], &[("A".into(), "B".into())]).unwrap();
        let total = k2_total_score(&d, &g).unwrap();
        let parts = k2_family_score(&d, "A", &[]).unwrap() + k2_family_score(&d, "B", &["A"]).unwrap();
        assert!((total - parts).abs() < 1e-12);

        let empty = Dag::empty(["A", "B"]).unwrap();
        let delta = total - k2_total_score(&d, &empty).unwrap();
        let local = k2_family_score(&d, "B", &["A"]).unwrap() - k2_family_score(&d, "B", &[]).unwrap();
        assert!((delta - local).abs() < 1e-12);
    }

    #[test]
    fn cache_is_transparent() {
        let d = cat_data(
            &["A", "B", "C"],
            &[&["0", "1", "0"], &["1", "1", "0"], &["1", "0", "1"], &["0", "0", "1"], &["1", "1", "1"]],
        );
        let data = DiscreteData::from_dataset(&d).unwrap();
        let mut cache = FamilyScoreCache::new();
        for child in 0..3 {
            for mask in 0..8u32 {
                let ps: BTreeSet<usize> = (0..3).filter(|&p| p != child && mask & (1 << p) != 0).collect();
                let fresh = data.family_score(child, &ps.iter().copied().collect::<Vec<_>>()).unwrap();
                assert_eq!(cache.score(&data, child, &ps).unwrap(), fresh);
                assert_eq!(cache.score(&data, child, &ps).unwrap(), fresh);
            }
        }
    }

    #[test]
    fn copy_column_gets_an_edge() {
        let rows: Vec<[String; 2]> = (0..50)
            .map(|i| {
                let v = ((i * 7 + i / 3) % 3).to_string();
                [v.clone(), v]
            })
            .collect();
        let refs: Vec<Vec<&str>> = rows.iter().map(|r| vec![r[0].as_str(), r[1].as_str()]).collect();
        let slices: Vec<&[&str]> = refs.iter().map(Vec::as_slice).collect();
        let d = cat_data(&["X", "Y"], &slices);
        let g = hill_climb(&d, &EdgeConstraints::none(), 4, &|_, _| false).unwrap();
        assert_eq!(g.edge_count(), 1);
        assert!(g.has_edge("X", "Y") || g.has_edge("Y", "X"));
    }

    #[test]
    fn single_column_has_no_edges() {
        let d = cat_data(&["X"], &[&["a"], &["b"], &["a"]]);
        let g = hill_climb(&d, &EdgeConstraints::none(), 4, &|_, _| false).unwrap();
        assert_eq!(g.edge_count(), 0);
    }

    #[test]
    fn protected_edge_survives_independence() {
        // A and B independent by construction: all four combos equally often
        let combos: [&[&str]; 4] = [&["0", "0"], &["0", "1"], &["1", "0"], &["1", "1"]];
        let rows: Vec<&[&str]> = combos.iter().cycle().take(40).copied().collect();
        let d = cat_data(&["A", "B"], &rows);
        let free = hill_climb(&d, &EdgeConstraints::none(), 4, &|_, _| false).unwrap();
        assert_eq!(free.edge_count(), 0);

        let c = EdgeConstraints::protected(vec![("A".into(), "B".into())]);
        let g = hill_climb(&d, &c, 4, &|_, _| false).unwrap();
        assert!(g.has_edge("A", "B"));

        // removable expert edges are only a warm start
        let c = EdgeConstraints {
            required_edges: vec![("A".into(), "B".into())],
            removable: true,
        };
        let g = hill_climb(&d, &c, 4, &|_, _| false).unwrap();
        assert_eq!(g.edge_count(), 0);
    }

    #[test]
    fn required_edge_errors() {
        let d = cat_data(&["A", "B"], &[&["0", "0"], &["1", "1"]]);
        let cyc = EdgeConstraints::protected(vec![("A".into(), "B".into()), ("B".into(), "A".into())]);
        assert!(matches!(hill_climb(&d, &cyc, 4, &|_, _| false), Err(Error::Cycle { .. })));
        let c = EdgeConstraints::protected(vec![("A".into(), "B".into())]);
        assert!(matches!(
            hill_climb(&d, &c, 4, &|p, _| p == "A"),
            Err(Error::ForbiddenEdge { .. })
        ));
    }

    #[test]
    fn guard() {
        let schema = vec![
            ColumnSchema::continuous("Porosity"),
            ColumnSchema::categorical("Lithology"),
            ColumnSchema::categorical("Period"),
        ];
        let g = orientation_guard(&schema);
        assert!(g("Porosity", "Lithology"));
        assert!(!g("Lithology", "Porosity"));
        assert!(!g("Period", "Lithology"));
    }

    #[test]
    fn search_respects_forbidden_and_max_parents() {
        // D copies A, B, C jointly; with max_parents = 1 it can take one parent at most
        let mut rows = Vec::new();
        for i in 0..64u32 {
            let a = i % 2;
            let b = (i / 2) % 2;
            let c = (i / 4) % 2;
            rows.push([a, b, c, a * 4 + b * 2 + c].map(|v| v.to_string()));
        }
        let refs: Vec<Vec<&str>> = rows.iter().map(|r| r.iter().map(String::as_str).collect()).collect();
        let slices: Vec<&[&str]> = refs.iter().map(Vec::as_slice).collect();
        let d = cat_data(&["A", "B", "C", "D"], &slices);
        let g = hill_climb(&d, &EdgeConstraints::none(), 1, &|p, c| p == "D" && c == "A").unwrap();
        for node in g.nodes() {
            assert!(g.parents(node).unwrap().len() <= 1);
        }
        assert!(!g.has_edge("D", "A"));

        let trace = hill_climb_traced(&d, &EdgeConstraints::none(), 3, &|_, _| false).unwrap();
        assert!(trace.scores.windows(2).all(|w| w[1] > w[0]));
        let again = hill_climb_traced(&d, &EdgeConstraints::none(), 3, &|_, _| false).unwrap();
        assert_eq!(trace.dag, again.dag);
        assert_eq!(trace.scores, again.scores);
    }
}
