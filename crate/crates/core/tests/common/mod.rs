#![allow(dead_code)]

use std::collections::BTreeMap;

use mixbn_core::{ColumnSchema, Dag, Dataset, Schema, Value};

pub fn categorical(names: &[&str], rows: &[Vec<&str>]) -> Dataset {
    let schema = Schema::new(names.iter().map(|n| ColumnSchema::categorical(*n)).collect()).unwrap();
    let rows = rows
        .iter()
        .map(|r| r.iter().map(|s| if s.is_empty() { Value::Missing } else { Value::category(*s) }).collect())
        .collect();
    Dataset::new(schema, rows).unwrap()
}

pub fn continuous(names: &[&str], rows: &[Vec<f64>]) -> Dataset {
    let schema = Schema::new(names.iter().map(|n| ColumnSchema::continuous(*n)).collect()).unwrap();
    let rows = rows.iter().map(|r| r.iter().map(|&x| Value::Number(x)).collect()).collect();
    Dataset::new(schema, rows).unwrap()
}

fn ln_factorial(n: u64) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// K2 family score from raw counts: product over observed parent
/// configurations of (r-1)!/(N_ij+r-1)! * prod_k N_ijk!, in logs.
pub fn k2_oracle(d: &Dataset, child: usize, parents: &[usize]) -> f64 {
    let r = d.labels(child).len() as u64;
    let mut counts: BTreeMap<Vec<String>, BTreeMap<String, u64>> = BTreeMap::new();
    for row in d.rows() {
        if row[child].is_missing() || parents.iter().any(|&p| row[p].is_missing()) {
            continue;
        }
        let key = parents.iter().map(|&p| row[p].to_string()).collect();
        *counts.entry(key).or_default().entry(row[child].to_string()).or_default() += 1;
    }
    counts
        .values()
        .map(|by_state| {
            let n_ij: u64 = by_state.values().sum();
            ln_factorial(r - 1) - ln_factorial(n_ij + r - 1) + by_state.values().map(|&c| ln_factorial(c)).sum::<f64>()
        })
        .sum()
}

pub fn total_oracle(d: &Dataset, g: &Dag) -> f64 {
    (0..g.len())
        .map(|c| {
            let parents: Vec<usize> = g.parent_indices(c).iter().copied().collect();
            k2_oracle(d, c, &parents)
        })
        .sum()
}

/// All acyclic graphs over the given nodes, by brute force over edge subsets.
pub fn all_dags(nodes: &[&str]) -> Vec<Dag> {
    let pairs: Vec<(String, String)> = nodes
        .iter()
        .flat_map(|a| nodes.iter().filter(move |b| *b != a).map(move |b| (a.to_string(), b.to_string())))
        .collect();
    (0u32..1 << pairs.len())
        .filter_map(|mask| {
            let edges: Vec<(String, String)> =
                (0..pairs.len()).filter(|i| mask & (1 << i) != 0).map(|i| pairs[i].clone()).collect();
            Dag::from_edges(nodes.iter().copied(), &edges).ok()
        })
        .collect()
}

/// Every graph one add, delete or reverse away from `g` that stays acyclic
/// and within the parent limit.
pub fn neighbours(g: &Dag, max_parents: usize) -> Vec<Dag> {
    let names = g.nodes().to_vec();
    let mut out = Vec::new();
    for p in &names {
        for c in &names {
            if p == c {
                continue;
            }
            if g.has_edge(p, c) {
                out.extend(g.remove_edge(p, c).ok());
                if let Ok(r) = g.reverse_edge(p, c) {
                    if r.parents(p).unwrap().len() <= max_parents {
                        out.push(r);
                    }
                }
            } else if let Ok(a) = g.add_edge(p, c) {
                if a.parents(c).unwrap().len() <= max_parents {
                    out.push(a);
                }
            }
        }
    }
    out
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}
