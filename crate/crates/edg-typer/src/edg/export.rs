use super::graph::EntityDependencyGraph;
use crate::frontend::{EntityIndex, EntityKind};
use serde_json::json;

fn kind_label(kind: Option<EntityKind>) -> &'static str {
    match kind {
        Some(EntityKind::Variable) => "variable",
        Some(EntityKind::Function) => "function",
        Some(EntityKind::Class) => "class",
        None => "unknown",
    }
}

/// Graphviz DOT rendering: one node per entity, edges labeled by kind.
pub fn to_dot(g: &EntityDependencyGraph, index: &EntityIndex) -> String {
    let mut out = String::from("digraph edg {\n");
    for node in &g.nodes {
        let kind = kind_label(index.get(node).map(|e| e.kind));
        out.push_str(&format!("    \"{node}\" [kind={kind}];\n"));
    }
    for e in g.edges() {
        out.push_str(&format!(
            "    \"{}\" -> \"{}\" [label=\"{:?}\"];\n",
            e.from, e.to, e.kind
        ));
    }
    out.push_str("}\n");
    out
}

/// JSON rendering: `{nodes: [{id, kind}], edges: [{from, to, kind, origin}]}`.
pub fn to_json(g: &EntityDependencyGraph, index: &EntityIndex) -> serde_json::Value {
    let nodes: Vec<_> = g
        .nodes
        .iter()
        .map(|n| {
            json!({
                "id": n.as_str(),
                "kind": kind_label(index.get(n).map(|e| e.kind)),
            })
        })
        .collect();
    let edges: Vec<_> = g
        .edges()
        .map(|e| {
            json!({
                "from": e.from.as_str(),
                "to": e.to.as_str(),
                "kind": format!("{:?}", e.kind),
                "origin": format!("{:?}", e.origin),
            })
        })
        .collect();
    json!({ "nodes": nodes, "edges": edges })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::edg::build_edg;
    use crate::frontend::{extract_entities, resolve_statement_refs, SourceRepo};

    #[test]
    fn json_export_counts_nodes() {
        let repo = SourceRepo::from_files(vec![(
            "m.py".to_string(),
            "x = 1\ny = x\n".to_string(),
        )]);
        let index = extract_entities(&repo);
        let refs = resolve_statement_refs(&repo, &index);
        let g = build_edg(&index, &refs);
        let v = to_json(&g, &index);
        assert_eq!(v["nodes"].as_array().unwrap().len(), 2);
        assert_eq!(v["edges"].as_array().unwrap().len(), 1);
        let dot = to_dot(&g, &index);
        assert!(dot.contains("\"m.y\" -> \"m.x\""));
    }
}
