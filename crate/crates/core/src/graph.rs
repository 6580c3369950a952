//! Directed acyclic graphs over named variables.
//!
//! Nodes keep their declaration order; every deterministic ordering
//! (topological order ties, structure-search move order) is derived from it.
//! Updates return new graphs and leave the receiver untouched.

use std::collections::{BTreeSet, HashSet};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dag {
    nodes: Vec<String>,
    parents: Vec<BTreeSet<usize>>,
}

impl Dag {
    pub fn empty<S: Into<String>>(nodes: impl IntoIterator<Item = S>) -> Result<Self> {
        let nodes: Vec<String> = nodes.into_iter().map(Into::into).collect();
        let mut seen = HashSet::new();
        for n in &nodes {
            if !seen.insert(n.as_str()) {
                return Err(Error::InvalidArgument(format!("duplicate node `{n}`")));
            }
        }
        let parents = vec![BTreeSet::new(); nodes.len()];
        Ok(Self { nodes, parents })
    }

    /// Builds a graph from named edges, failing on the first edge that is
    /// unknown, a self-loop, a duplicate or that closes a cycle.
    pub fn from_edges<S: Into<String>>(
        nodes: impl IntoIterator<Item = S>,
        edges: &[(String, String)],
    ) -> Result<Self> {
        let mut g = Dag::empty(nodes)?;
        for (p, c) in edges {
            g = g.add_edge(p, c)?;
        }
        Ok(g)
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.nodes
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::UnknownNode(name.to_owned()))
    }

    pub fn name(&self, index: usize) -> &str {
        &self.nodes[index]
    }

    pub fn parent_indices(&self, node: usize) -> &BTreeSet<usize> {
        &self.parents[node]
    }

    /// Parents of `node` in declaration order.
    pub fn parents(&self, node: &str) -> Result<Vec<&str>> {
        let i = self.index_of(node)?;
        Ok(self.parents[i].iter().map(|&p| self.nodes[p].as_str()).collect())
    }

    pub fn has_edge_idx(&self, parent: usize, child: usize) -> bool {
        self.parents[child].contains(&parent)
    }

    pub fn has_edge(&self, parent: &str, child: &str) -> bool {
        match (self.index_of(parent), self.index_of(child)) {
            (Ok(p), Ok(c)) => self.has_edge_idx(p, c),
            _ => false,
        }
    }

    /// Edges as index pairs, ordered by (child, parent).
    pub fn edge_indices(&self) -> Vec<(usize, usize)> {
        self.parents
            .iter()
            .enumerate()
            .flat_map(|(c, ps)| ps.iter().map(move |&p| (p, c)))
            .collect()
    }

    /// Edges as name pairs, ordered by (parent, child) declaration index.
    pub fn edges(&self) -> Vec<(String, String)> {
        let mut e = self.edge_indices();
        e.sort();
        e.into_iter()
            .map(|(p, c)| (self.nodes[p].clone(), self.nodes[c].clone()))
            .collect()
    }

    pub fn edge_count(&self) -> usize {
        self.parents.iter().map(BTreeSet::len).sum()
    }

    /// Whether a directed path `from ~> to` exists (a node reaches itself).
    pub fn reaches(&self, from: usize, to: usize) -> bool {
        // walk parents backwards from `to`
        let mut stack = vec![to];
        let mut seen = vec![false; self.nodes.len()];
        while let Some(n) = stack.pop() {
            if n == from {
                return true;
            }
            if std::mem::replace(&mut seen[n], true) {
                continue;
            }
            stack.extend(self.parents[n].iter().copied());
        }
        false
    }

    /// Whether adding `parent -> child` keeps the graph acyclic.
    pub fn can_add(&self, parent: usize, child: usize) -> bool {
        parent != child && !self.has_edge_idx(parent, child) && !self.reaches(child, parent)
    }

    /// Whether reversing the present edge `parent -> child` keeps the graph acyclic.
    pub fn can_reverse(&self, parent: usize, child: usize) -> bool {
        if !self.has_edge_idx(parent, child) {
            return false;
        }
        // after removal, adding child -> parent cycles iff parent still reaches child
        let mut without = self.clone();
        without.parents[child].remove(&parent);
        !without.reaches(parent, child)
    }

    pub(crate) fn add_unchecked(&mut self, parent: usize, child: usize) {
        self.parents[child].insert(parent);
    }

    pub(crate) fn remove_unchecked(&mut self, parent: usize, child: usize) {
        self.parents[child].remove(&parent);
    }

    pub fn add_edge(&self, parent: &str, child: &str) -> Result<Dag> {
        let p = self.index_of(parent)?;
        let c = self.index_of(child)?;
        if p == c {
            return Err(Error::SelfLoop(parent.to_owned()));
        }
        if self.has_edge_idx(p, c) {
            return Err(Error::EdgeExists {
                parent: parent.to_owned(),
                child: child.to_owned(),
            });
        }
        if self.reaches(c, p) {
            return Err(Error::Cycle {
                parent: parent.to_owned(),
                child: child.to_owned(),
            });
        }
        let mut g = self.clone();
        g.add_unchecked(p, c);
        Ok(g)
    }

    pub fn remove_edge(&self, parent: &str, child: &str) -> Result<Dag> {
        let p = self.index_of(parent)?;
        let c = self.index_of(child)?;
        if !self.has_edge_idx(p, c) {
            return Err(Error::MissingEdge {
                parent: parent.to_owned(),
                child: child.to_owned(),
            });
        }
        let mut g = self.clone();
        g.remove_unchecked(p, c);
        Ok(g)
    }

    pub fn reverse_edge(&self, parent: &str, child: &str) -> Result<Dag> {
        let p = self.index_of(parent)?;
        let c = self.index_of(child)?;
        if !self.has_edge_idx(p, c) {
            return Err(Error::MissingEdge {
                parent: parent.to_owned(),
                child: child.to_owned(),
            });
        }
        let mut g = self.clone();
        g.remove_unchecked(p, c);
        if g.reaches(p, c) {
            return Err(Error::Cycle {
                parent: child.to_owned(),
                child: parent.to_owned(),
            });
        }
        g.add_unchecked(c, p);
        Ok(g)
    }

    /// Kahn's algorithm, always releasing the earliest-declared ready node.
    pub fn topological_indices(&self) -> Vec<usize> {
        let n = self.nodes.len();
        let mut indegree: Vec<usize> = self.parents.iter().map(BTreeSet::len).collect();
        let mut children = vec![Vec::new(); n];
        for (c, ps) in self.parents.iter().enumerate() {
            for &p in ps {
                children[p].push(c);
            }
        }
        let mut ready: BTreeSet<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(i) = ready.pop_first() {
            order.push(i);
            for &c in &children[i] {
                indegree[c] -= 1;
                if indegree[c] == 0 {
                    ready.insert(c);
                }
            }
        }
        debug_assert_eq!(order.len(), n, "graph is cyclic");
        order
    }

    pub fn topological_order(&self) -> Vec<&str> {
        self.topological_indices()
            .into_iter()
            .map(|i| self.nodes[i].as_str())
            .collect()
    }

    /// True when a full topological order exists.
    pub fn is_acyclic(&self) -> bool {
        self.topological_indices().len() == self.nodes.len()
    }

    /// Unordered edge set, each pair as (smaller index, larger index).
    pub fn skeleton(&self) -> BTreeSet<(usize, usize)> {
        self.edge_indices()
            .into_iter()
            .map(|(p, c)| (p.min(c), p.max(c)))
            .collect()
    }
}

/// Expert-supplied edges and whether search may drop them.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EdgeConstraints {
    pub required_edges: Vec<(String, String)>,
    pub removable: bool,
}

impl EdgeConstraints {
    pub fn none() -> Self {
        Self {
            required_edges: Vec::new(),
            removable: true,
        }
    }

    pub fn protected(edges: Vec<(String, String)>) -> Self {
        Self {
            required_edges: edges,
            removable: false,
        }
    }

    /// Checks node names and acyclicity against the given node list.
    pub fn validate(&self, nodes: &[String]) -> Result<Dag> {
        Dag::from_edges(nodes.iter().cloned(), &self.required_edges)
    }
}
