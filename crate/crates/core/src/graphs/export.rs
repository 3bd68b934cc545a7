//! DOT and JSON renderings of CFGs, PDGs and the CPG.

use std::fmt::Write;

use serde_json::{json, Value};

use super::{Cfg, CfgNode, Cpg, EdgeKind, Pdg};

pub fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

fn cfg_node_name(prefix: &str, n: CfgNode) -> String {
    format!("{prefix}{n}")
}

pub fn edge_color(kind: EdgeKind) -> &'static str {
    match kind {
        EdgeKind::Data => "blue",
        EdgeKind::Control => "red",
        EdgeKind::FunctionCall => "darkgreen",
    }
}

pub fn cfg_dot(cfg: &Cfg, pdg: Option<&Pdg>) -> String {
    let mut out = format!("digraph \"{}\" {{\n", dot_escape(&cfg.function));
    for n in cfg.nodes() {
        let label = match (n, pdg) {
            (CfgNode::Stmt(s), Some(p)) => p.statement(s).text.clone(),
            _ => n.to_string(),
        };
        let _ = writeln!(out, "  {} [label=\"{}\"];", cfg_node_name("", n), dot_escape(&label));
    }
    for (a, b) in cfg.edges() {
        let _ = writeln!(out, "  {} -> {};", cfg_node_name("", a), cfg_node_name("", b));
    }
    out.push_str("}\n");
    out
}

fn pdg_body(out: &mut String, pdg: &Pdg, prefix: &str) {
    for s in &pdg.statements {
        let _ = writeln!(out, "  {prefix}s{} [label=\"{}\"];", s.id.0, dot_escape(&s.text));
    }
    for e in &pdg.edges {
        let _ = writeln!(
            out,
            "  {prefix}s{} -> {prefix}s{} [label=\"{}\", color={}];",
            e.src.0,
            e.dst.0,
            e.kind.dot_label(),
            edge_color(e.kind)
        );
    }
}

pub fn pdg_dot(pdg: &Pdg) -> String {
    let mut out = format!("digraph \"{}\" {{\n", dot_escape(&pdg.name));
    pdg_body(&mut out, pdg, "");
    out.push_str("}\n");
    out
}

pub fn cpg_dot(cpg: &Cpg) -> String {
    let mut out = String::from("digraph cpg {\n");
    for f in &cpg.functions {
        let _ = writeln!(out, " subgraph \"cluster_{}\" {{\n  label=\"{}\";", f.id.0, dot_escape(&f.name));
        pdg_body(&mut out, f, &format!("f{}_", f.id.0));
        out.push_str(" }\n");
    }
    for e in &cpg.call_edges {
        let _ = writeln!(
            out,
            "  f{}_s{} -> f{}_s0 [label=\"{}\", color={}];",
            e.site.func.0,
            e.site.stmt.0,
            e.callee.0,
            EdgeKind::FunctionCall.dot_label(),
            edge_color(EdgeKind::FunctionCall)
        );
    }
    out.push_str("}\n");
    out
}

pub fn cfg_json(cfg: &Cfg) -> Value {
    json!({
        "function": cfg.function,
        "nodes": cfg.nodes().map(|n| n.to_string()).collect::<Vec<_>>(),
        "edges": cfg.edges().map(|(a, b)| [a.to_string(), b.to_string()]).collect::<Vec<_>>(),
    })
}

pub fn pdg_json(pdg: &Pdg) -> Value {
    json!({
        "function": pdg.name,
        "file": pdg.file,
        "nodes": pdg.statements.iter().map(|s| json!({
            "id": s.id.0,
            "type": s.kind.as_str(),
            "text": s.text,
            "line": s.span.start,
        })).collect::<Vec<_>>(),
        "edges": pdg.edges.iter().map(|e| json!({
            "src": e.src.0,
            "dst": e.dst.0,
            "kind": e.kind.as_str(),
            "variable": e.variable,
        })).collect::<Vec<_>>(),
    })
}

pub fn cpg_json(cpg: &Cpg) -> Value {
    json!({
        "functions": cpg.functions.iter().map(pdg_json).collect::<Vec<_>>(),
        "calls": cpg.call_edges.iter().map(|e| json!({
            "caller": cpg.function(e.site.func).name,
            "site": e.site.stmt.0,
            "callee": cpg.function(e.callee).name,
            "kind": EdgeKind::FunctionCall.as_str(),
        })).collect::<Vec<_>>(),
    })
}
