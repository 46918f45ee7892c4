use std::fmt::Write;

use super::config::IS_IN;
use super::SceneGraph;

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

fn relation_style(relation: &str) -> (&'static str, &'static str) {
    const DIRECTIONAL: [&str; 4] = ["Front", "Rear", "Left", "Right"];
    if relation == IS_IN {
        ("belonging", "black")
    } else if DIRECTIONAL.iter().any(|d| relation.starts_with(d)) {
        ("directional", "blue")
    } else {
        ("proximity", "red")
    }
}

/// Renders a scene-graph as a Graphviz digraph.
pub fn export_dot(g: &SceneGraph) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "digraph \"frame_{}\" {{", g.frame_index);
    let _ = writeln!(out, "  rankdir=LR;");
    let _ = writeln!(out, "  node [shape=box];");
    for n in &g.nodes {
        let _ = writeln!(
            out,
            "  n{} [label=\"{}:{}\"];",
            n.node_id,
            escape(&n.label),
            escape(n.actor_type.as_str())
        );
    }
    for e in &g.edges {
        let (class, color) = relation_style(&e.relation);
        let _ = writeln!(
            out,
            "  n{} -> n{} [label=\"{}\", class=\"{}\", color=\"{}\"];",
            e.src,
            e.dst,
            escape(&e.relation),
            class,
            color
        );
    }
    out.push_str("}\n");
    out
}
