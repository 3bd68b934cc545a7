use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::Serialize;

use crate::frontend::{AstKind, Function, NodeId, SourceUnit, StmtId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum CfgNode {
    Entry,
    Stmt(StmtId),
    Exit,
}

impl std::fmt::Display for CfgNode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CfgNode::Entry => f.write_str("ENTRY"),
            CfgNode::Exit => f.write_str("EXIT"),
            CfgNode::Stmt(s) => write!(f, "s{}", s.0),
        }
    }
}

/// Intraprocedural control-flow graph over statement nodes. The
/// `FunctionDef` statement is not part of it; parameters are, in order,
/// right after ENTRY.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cfg {
    pub function: String,
    nodes: BTreeSet<CfgNode>,
    succ: BTreeMap<CfgNode, BTreeSet<CfgNode>>,
    pred: BTreeMap<CfgNode, BTreeSet<CfgNode>>,
}

impl Cfg {
    pub fn new(function: impl Into<String>) -> Self {
        let mut cfg = Cfg { function: function.into(), nodes: BTreeSet::new(), succ: BTreeMap::new(), pred: BTreeMap::new() };
        cfg.add_node(CfgNode::Entry);
        cfg.add_node(CfgNode::Exit);
        cfg
    }

    /// Builds a CFG from explicit statement edges; used by tests and tools
    /// that synthesize graphs without source.
    pub fn from_edges(function: impl Into<String>, edges: impl IntoIterator<Item = (CfgNode, CfgNode)>) -> Self {
        let mut cfg = Cfg::new(function);
        for (a, b) in edges {
            cfg.add_edge(a, b);
        }
        cfg
    }

    pub fn add_node(&mut self, n: CfgNode) {
        if self.nodes.insert(n) {
            self.succ.entry(n).or_default();
            self.pred.entry(n).or_default();
        }
    }

    pub fn add_edge(&mut self, from: CfgNode, to: CfgNode) {
        self.add_node(from);
        self.add_node(to);
        self.succ.get_mut(&from).expect("node").insert(to);
        self.pred.get_mut(&to).expect("node").insert(from);
    }

    pub fn nodes(&self) -> impl Iterator<Item = CfgNode> + '_ {
        self.nodes.iter().copied()
    }

    pub fn statements(&self) -> impl Iterator<Item = StmtId> + '_ {
        self.nodes.iter().filter_map(|n| match n {
            CfgNode::Stmt(s) => Some(*s),
            _ => None,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn successors(&self, n: CfgNode) -> impl Iterator<Item = CfgNode> + '_ {
        self.succ.get(&n).into_iter().flatten().copied()
    }

    pub fn predecessors(&self, n: CfgNode) -> impl Iterator<Item = CfgNode> + '_ {
        self.pred.get(&n).into_iter().flatten().copied()
    }

    pub fn edges(&self) -> impl Iterator<Item = (CfgNode, CfgNode)> + '_ {
        self.succ.iter().flat_map(|(&a, bs)| bs.iter().map(move |&b| (a, b)))
    }

    pub fn has_edge(&self, from: CfgNode, to: CfgNode) -> bool {
        self.succ.get(&from).is_some_and(|s| s.contains(&to))
    }

    /// Reverse postorder from ENTRY; unreachable nodes are appended in id order.
    pub fn reverse_postorder(&self) -> Vec<CfgNode> {
        let mut seen = BTreeSet::new();
        let mut post = Vec::new();
        let mut stack = vec![(CfgNode::Entry, false)];
        while let Some((n, done)) = stack.pop() {
            if done {
                post.push(n);
                continue;
            }
            if !seen.insert(n) {
                continue;
            }
            stack.push((n, true));
            let succs: Vec<_> = self.successors(n).collect();
            for s in succs.into_iter().rev() {
                if !seen.contains(&s) {
                    stack.push((s, false));
                }
            }
        }
        post.reverse();
        for n in self.nodes() {
            if !seen.contains(&n) {
                post.push(n);
            }
        }
        post
    }

    /// Nodes reachable from `start` along successor edges.
    pub fn reachable_from(&self, start: CfgNode) -> BTreeSet<CfgNode> {
        let mut seen = BTreeSet::from([start]);
        let mut queue = VecDeque::from([start]);
        while let Some(n) = queue.pop_front() {
            for s in self.successors(n) {
                if seen.insert(s) {
                    queue.push_back(s);
                }
            }
        }
        seen
    }
}

/// Builds the CFG of `func`. Branch headers have two successors (one when
/// both arms fall through to the same node), loops have a back edge to
/// the header, returns go to EXIT. Statements that no path reaches (dead
/// code after a `return`) get an edge from ENTRY so the graph stays
/// rooted.
pub fn build_cfg(unit: &SourceUnit, func: &Function) -> Cfg {
    let mut b = Builder { unit, cfg: Cfg::new(func.name.clone()) };
    let mut frontier = vec![CfgNode::Entry];
    for p in func.parameters() {
        let n = CfgNode::Stmt(p.id);
        for &f in &frontier {
            b.cfg.add_edge(f, n);
        }
        frontier = vec![n];
    }
    let def = unit.ast.node(func.node);
    if let Some(&body) = def.children.iter().find(|&&c| unit.ast.node(c).kind == AstKind::CompoundStatement) {
        frontier = b.statement(body, frontier);
    }
    for f in frontier {
        b.cfg.add_edge(f, CfgNode::Exit);
    }
    let mut cfg = b.cfg;
    let orphans: Vec<_> = cfg
        .nodes()
        .filter(|&n| matches!(n, CfgNode::Stmt(_)) && cfg.predecessors(n).next().is_none())
        .collect();
    for n in orphans {
        cfg.add_edge(CfgNode::Entry, n);
    }
    if cfg.successors(CfgNode::Entry).next().is_none() {
        cfg.add_edge(CfgNode::Entry, CfgNode::Exit);
    }
    cfg
}

struct Builder<'a> {
    unit: &'a SourceUnit,
    cfg: Cfg,
}

impl Builder<'_> {
    fn stmt_node(&mut self, node: NodeId) -> CfgNode {
        let id = self.unit.ast.node(node).stmt.expect("statement node carries its id");
        let n = CfgNode::Stmt(id);
        self.cfg.add_node(n);
        n
    }

    fn link(&mut self, preds: &[CfgNode], to: CfgNode) {
        for &p in preds {
            self.cfg.add_edge(p, to);
        }
    }

    /// Adds `node` reached from `preds`; returns the nodes that fall through.
    fn statement(&mut self, node: NodeId, preds: Vec<CfgNode>) -> Vec<CfgNode> {
        let ast = &self.unit.ast;
        let n = ast.node(node);
        match n.kind {
            AstKind::CompoundStatement => {
                let children = n.children.clone();
                children.into_iter().fold(preds, |frontier, c| self.statement(c, frontier))
            }
            AstKind::IfStatement => {
                let children = n.children.clone();
                let head = self.stmt_node(node);
                self.link(&preds, head);
                let mut out = self.statement(children[1], vec![head]);
                match children.get(2) {
                    Some(&otherwise) => out.extend(self.statement(otherwise, vec![head])),
                    None => out.push(head),
                }
                out.sort();
                out.dedup();
                out
            }
            AstKind::WhileStatement => {
                let body = n.children[1];
                let head = self.stmt_node(node);
                self.link(&preds, head);
                let tail = self.statement(body, vec![head]);
                self.link(&tail, head);
                vec![head]
            }
            AstKind::ForStatement => {
                let (init, step, body) = (n.children[0], n.children[2], n.children[3]);
                let head = self.stmt_node(node);
                let after_init = self.statement(init, preds);
                self.link(&after_init, head);
                let tail = self.statement(body, vec![head]);
                let step_node = self.stmt_node(step);
                self.link(&tail, step_node);
                self.cfg.add_edge(step_node, head);
                vec![head]
            }
            AstKind::ReturnStatement => {
                let ret = self.stmt_node(node);
                self.link(&preds, ret);
                self.cfg.add_edge(ret, CfgNode::Exit);
                Vec::new()
            }
            _ => {
                let s = self.stmt_node(node);
                self.link(&preds, s);
                vec![s]
            }
        }
    }
}
