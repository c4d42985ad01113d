//! Graphviz export.

use std::fmt::Write;

use sumnet_core::netmodel::{edge_id, Demand, Network};
use sumnet_core::transforms::TransformTrace;

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

/// DOT text for `net`. Sources are boxes, terminals double circles; nodes are
/// grouped into ranks by longest path from a source. Roles from `trace`
/// are added to node labels.
pub fn export_dot(net: &Network, trace: Option<&TransformTrace>) -> String {
    let mut depth = vec![0usize; net.node_count()];
    for &v in net.topo_indices() {
        for &e in net.out_edges(v) {
            let h = net.head(e);
            depth[h] = depth[h].max(depth[v] + 1);
        }
    }
    let mut out = String::new();
    writeln!(out, "digraph {} {{", quote(net.name())).unwrap();
    writeln!(out, "  rankdir=TB;").unwrap();
    writeln!(out, "  node [fontname=\"Helvetica\"];").unwrap();
    for id in net.nodes() {
        let mut label = id.clone();
        if let Some(role) = trace.and_then(|t| t.nodes.get(id)) {
            if role != id {
                label.push_str(&format!("\\n{role}"));
            }
        }
        let attrs = if let Some(msgs) = net.sources().get(id) {
            label.push_str(&format!("\\n[{}]", msgs.join(", ")));
            "shape=box, style=filled, fillcolor=\"#cfe2f3\""
        } else if let Some(d) = net.terminals().get(id) {
            match d {
                Demand::Sum => label.push_str("\\nwants sum"),
                Demand::Recover(msgs) => label.push_str(&format!("\\nwants {}", msgs.join(", "))),
            }
            "shape=doublecircle, style=filled, fillcolor=\"#f4cccc\""
        } else {
            "shape=circle"
        };
        writeln!(out, "  {} [label={}, {attrs}];", quote(id), quote(&label)).unwrap();
    }
    let max_depth = depth.iter().copied().max().unwrap_or(0);
    for d in 0..=max_depth {
        let layer: Vec<String> = (0..net.node_count()).filter(|&v| depth[v] == d).map(|v| quote(net.node_id(v))).collect();
        if layer.len() > 1 {
            writeln!(out, "  {{ rank=same; {}; }}", layer.join("; ")).unwrap();
        }
    }
    for e in net.edges() {
        let mut attrs = Vec::new();
        if e.id != edge_id(&e.tail, &e.head) {
            attrs.push(format!("label={}", quote(&e.id)));
        }
        if let Some(role) = trace.and_then(|t| t.edges.get(&e.id)) {
            attrs.push(format!("tooltip={}", quote(role)));
        }
        let attrs = if attrs.is_empty() { String::new() } else { format!(" [{}]", attrs.join(", ")) };
        writeln!(out, "  {} -> {}{attrs};", quote(&e.tail), quote(&e.head)).unwrap();
    }
    out.push_str("}\n");
    out
}
