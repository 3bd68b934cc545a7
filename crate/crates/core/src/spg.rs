//! Slice property graphs: assembly from slice-node sets, the split into
//! CDG/DDG/FCDG subgraphs, labeling, canonical hashing and serialization.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::frontend::{AstKind, StmtId};
use crate::graphs::export::{dot_escape, edge_color};
use crate::graphs::{Cpg, EdgeKind, QualifiedStmt};
use crate::slicer::{slice, SliceError, SliceNodeSets};
use crate::syvc::{Syvc, SyvcKind};

#[derive(Debug, Error)]
pub enum SpgError {
    #[error(transparent)]
    Slice(#[from] SliceError),
    #[error("SyVC `{element}` at {file}:{line} has no function in the CPG")]
    UnknownFunction { element: String, file: String, line: u32 },
    #[error("vulnerable-line manifest names `{0}`, which is not part of the program")]
    UnknownFile(String),
    #[error("malformed SPG: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SpgCriterion {
    pub kind: SyvcKind,
    pub element: String,
    pub file: String,
    pub line: u32,
}

impl From<&Syvc> for SpgCriterion {
    fn from(s: &Syvc) -> Self {
        SpgCriterion { kind: s.kind, element: s.element.clone(), file: s.file.clone(), line: s.line }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpgNode {
    /// Position in `Spg::nodes`.
    pub id: usize,
    pub text: String,
    #[serde(rename = "type")]
    pub kind: AstKind,
    pub file: String,
    pub line: u32,
    /// Last line of the statement header. Not serialized.
    #[serde(skip)]
    pub last_line: u32,
    /// CPG statement the node was built from. Not serialized.
    #[serde(skip)]
    pub origin: Option<QualifiedStmt>,
}

impl SpgNode {
    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.text.split_whitespace()
    }

    pub fn covers(&self, line: u32) -> bool {
        self.line <= line && line <= self.last_line.max(self.line)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SpgEdge {
    pub src: usize,
    pub dst: usize,
    pub kind: EdgeKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spg {
    pub criterion: SpgCriterion,
    pub nodes: Vec<SpgNode>,
    pub edges: Vec<SpgEdge>,
    pub label: Option<u8>,
}

impl Spg {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn edges_of(&self, kind: EdgeKind) -> impl Iterator<Item = &SpgEdge> {
        self.edges.iter().filter(move |e| e.kind == kind)
    }

    /// Checks the structural invariants.
    pub fn validate(&self) -> Result<(), SpgError> {
        if self.nodes.is_empty() {
            return Err(SpgError::Malformed("no nodes".into()));
        }
        if let Some(n) = self.nodes.iter().enumerate().find(|(i, n)| n.id != *i) {
            return Err(SpgError::Malformed(format!("node at position {} has id {}", n.0, n.1.id)));
        }
        if let Some(e) = self.edges.iter().find(|e| e.src >= self.nodes.len() || e.dst >= self.nodes.len()) {
            return Err(SpgError::Malformed(format!("edge {} -> {} leaves the node list", e.src, e.dst)));
        }
        Ok(())
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("SPG serializes")
    }

    pub fn from_json(text: &str) -> Result<Spg, SpgError> {
        let mut spg: Spg = serde_json::from_str(text).map_err(|e| SpgError::Malformed(e.to_string()))?;
        for n in &mut spg.nodes {
            n.last_line = n.line;
        }
        spg.validate()?;
        Ok(spg)
    }

    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph spg {\n");
        for n in &self.nodes {
            let _ = writeln!(out, "  n{} [label=\"{}\"];", n.id, dot_escape(&n.text));
        }
        for e in &self.edges {
            let _ = writeln!(
                out,
                "  n{} -> n{} [label=\"{}\", color={}];",
                e.src,
                e.dst,
                e.kind.dot_label(),
                edge_color(e.kind)
            );
        }
        out.push_str("}\n");
        out
    }
}

/// Builds the SPG of one criterion from its slice-node sets.
pub fn assemble_spg(cpg: &Cpg, criterion: SpgCriterion, sets: &SliceNodeSets) -> Spg {
    let mut members = sets.all();
    members.insert(sets.criterion);

    let mut edges: BTreeSet<(QualifiedStmt, QualifiedStmt, EdgeKind)> = BTreeSet::new();
    let mut touched: BTreeSet<QualifiedStmt> = BTreeSet::from([sets.criterion]);
    for &q in &members {
        for e in cpg.function(q.func).edges.iter().filter(|e| e.src == q.stmt) {
            let dst = QualifiedStmt::new(q.func, e.dst);
            if members.contains(&dst) {
                edges.insert((q, dst, e.kind));
                touched.extend([q, dst]);
            }
        }
    }

    let funcs_in_sn: BTreeSet<_> = members.iter().map(|q| q.func).collect();
    for call in &cpg.call_edges {
        if members.contains(&call.site) && funcs_in_sn.contains(&call.callee) {
            let def = QualifiedStmt::new(call.callee, StmtId(0));
            edges.insert((call.site, def, EdgeKind::FunctionCall));
            touched.extend([call.site, def]);
        }
    }

    let mut order: Vec<QualifiedStmt> = touched.into_iter().collect();
    order.sort_by_key(|q| {
        let f = cpg.function(q.func);
        (f.file.clone(), f.statement(q.stmt).span.start, q.func, q.stmt)
    });
    let index: HashMap<QualifiedStmt, usize> = order.iter().enumerate().map(|(i, &q)| (q, i)).collect();
    let nodes = order
        .iter()
        .enumerate()
        .map(|(id, &q)| {
            let f = cpg.function(q.func);
            let s = f.statement(q.stmt);
            SpgNode {
                id,
                text: s.text.clone(),
                kind: s.kind,
                file: f.file.clone(),
                line: s.span.start,
                last_line: s.span.end,
                origin: Some(q),
            }
        })
        .collect();
    let mut edges: Vec<SpgEdge> =
        edges.into_iter().map(|(a, b, kind)| SpgEdge { src: index[&a], dst: index[&b], kind }).collect();
    edges.sort();
    Spg { criterion, nodes, edges, label: None }
}

/// Slices `syvc` over `cpg` and assembles its SPG.
pub fn spg_for(cpg: &Cpg, syvc: &Syvc) -> Result<Spg, SpgError> {
    let func = cpg.find(&syvc.file, syvc.function_index).ok_or_else(|| SpgError::UnknownFunction {
        element: syvc.element.clone(),
        file: syvc.file.clone(),
        line: syvc.line,
    })?;
    let sets = slice(cpg, QualifiedStmt::new(func, syvc.stmt))?;
    Ok(assemble_spg(cpg, SpgCriterion::from(syvc), &sets))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpgSubgraphs {
    pub cdg: Spg,
    pub ddg: Spg,
    pub fcdg: Spg,
}

impl SpgSubgraphs {
    /// `(relation, subgraph)` pairs in DATA, CONTROL, FUNCTION_CALL order.
    pub fn iter(&self) -> [(EdgeKind, &Spg); 3] {
        [(EdgeKind::Data, &self.ddg), (EdgeKind::Control, &self.cdg), (EdgeKind::FunctionCall, &self.fcdg)]
    }
}

/// Partitions the SPG's edges by kind. Every subgraph keeps all nodes.
pub fn split_subgraphs(spg: &Spg) -> SpgSubgraphs {
    let only = |kind: EdgeKind| Spg { edges: spg.edges_of(kind).copied().collect(), ..spg.clone() };
    SpgSubgraphs { cdg: only(EdgeKind::Control), ddg: only(EdgeKind::Data), fcdg: only(EdgeKind::FunctionCall) }
}

/// Vulnerable lines per source file.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VulnerableLines {
    pub by_file: BTreeMap<String, BTreeSet<u32>>,
}

impl VulnerableLines {
    pub fn insert(&mut self, file: impl Into<String>, line: u32) {
        self.by_file.entry(file.into()).or_default().insert(line);
    }

    pub fn is_empty(&self) -> bool {
        self.by_file.values().all(BTreeSet::is_empty)
    }

    /// Fails when a file of the manifest is not among `known`.
    pub fn check_files<'a>(&self, known: impl IntoIterator<Item = &'a str>) -> Result<(), SpgError> {
        let known: BTreeSet<&str> = known.into_iter().collect();
        match self.by_file.keys().find(|f| !known.contains(f.as_str())) {
            Some(f) => Err(SpgError::UnknownFile(f.clone())),
            None => Ok(()),
        }
    }

    pub fn contains(&self, file: &str, line: u32) -> bool {
        self.by_file.get(file).is_some_and(|l| l.contains(&line))
    }
}

/// 1 iff some node's statement lines hit a vulnerable line.
pub fn label_spg(spg: &Spg, vulnerable: &VulnerableLines) -> u8 {
    let hit = spg.nodes.iter().any(|n| {
        vulnerable.by_file.get(&n.file).is_some_and(|lines| lines.range(n.line..=n.last_line.max(n.line)).next().is_some())
    });
    u8::from(hit)
}

fn digest(bytes: &[u8]) -> u64 {
    let h = Sha256::digest(bytes);
    u64::from_be_bytes(h[..8].try_into().expect("8 bytes"))
}

/// Content hash that ignores node ids and the criterion.
///
/// Nodes are keyed by `(text, type)` refined by three rounds of neighbor
/// signatures. A node's canonical index is the first sorted position of its
/// key, so tied nodes share an index and the result does not depend on
/// input order.
pub fn canonical_hash(spg: &Spg) -> u64 {
    let n = spg.nodes.len();
    let mut keys: Vec<u64> = spg.nodes.iter().map(|v| digest(format!("{}\u{1}{}", v.text, v.kind.as_str()).as_bytes())).collect();
    for _ in 0..3 {
        let mut sig: Vec<Vec<(u8, u8, u64)>> = vec![Vec::new(); n];
        for e in &spg.edges {
            sig[e.src].push((0, e.kind.index() as u8, keys[e.dst]));
            sig[e.dst].push((1, e.kind.index() as u8, keys[e.src]));
        }
        keys = (0..n)
            .map(|i| {
                sig[i].sort_unstable();
                let mut buf = keys[i].to_be_bytes().to_vec();
                for (dir, k, h) in &sig[i] {
                    buf.extend([*dir, *k]);
                    buf.extend(h.to_be_bytes());
                }
                digest(&buf)
            })
            .collect();
    }

    let mut content: Vec<(&str, &str, u64)> =
        spg.nodes.iter().zip(&keys).map(|(v, &k)| (v.text.as_str(), v.kind.as_str(), k)).collect();
    content.sort_unstable();
    let rank: HashMap<u64, usize> = content.iter().enumerate().rev().map(|(i, c)| (c.2, i)).collect();
    let mut edges: Vec<(usize, usize, usize)> =
        spg.edges.iter().map(|e| (rank[&keys[e.src]], rank[&keys[e.dst]], e.kind.index())).collect();
    edges.sort_unstable();

    let mut buf = String::new();
    for (text, kind, _) in &content {
        let _ = write!(buf, "N{}\u{1}{}\u{2}", text, kind);
    }
    for (a, b, k) in &edges {
        let _ = write!(buf, "E{a},{b},{k}\u{2}");
    }
    digest(buf.as_bytes())
}

/// Keeps the first SPG of each canonical hash.
pub fn dedup(spgs: Vec<Spg>) -> Vec<Spg> {
    let mut seen = BTreeSet::new();
    spgs.into_iter().filter(|s| seen.insert(canonical_hash(s))).collect()
}
