//! Graphviz export of a learned network.

use std::fmt::Write as _;

use crate::dataset::ColumnKind;
use crate::model::BayesianNetworkModel;

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

/// Continuous nodes are drawn red, categorical nodes blue.
pub fn to_dot(model: &BayesianNetworkModel) -> String {
    let mut out = String::from("digraph network {\n");
    for node in &model.nodes {
        let color = match node.kind {
            ColumnKind::Continuous => "red",
            ColumnKind::Categorical => "blue",
        };
        let _ = writeln!(out, "  {} [color={color}];", quote(&node.name));
    }
    for (p, c) in model.dag.edges() {
        let _ = writeln!(out, "  {} -> {};", quote(&p), quote(&c));
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::EdgeConstraints;
    use crate::parameters::{mixlearn, LearnConfig};
    use crate::synth::five_node_clg;

    #[test]
    fn one_line_per_edge() {
        let (d, _) = five_node_clg(400, 3);
        let m = mixlearn(&d, &EdgeConstraints::none(), &LearnConfig::default()).unwrap();
        let dot = to_dot(&m);
        assert_eq!(dot.matches("->").count(), m.dag.edge_count());
        assert!(dot.contains("\"C1\" [color=blue]"));
        assert!(dot.contains("\"X1\" [color=red]"));
    }
}
