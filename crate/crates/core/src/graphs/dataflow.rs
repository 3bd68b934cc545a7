//! Def/use extraction and reaching definitions.
//!
//! Pointer handling is by name only. Writes through `*p`, `a[i]`, `s.f` and
//! `p->f`, and pointer arguments handed to calls, count as *weak* defs of
//! the base variables: they generate a definition but kill nothing, since
//! they may not overwrite the whole object.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use crate::frontend::{Ast, AstKind, Declarator, Function, NodeId, SourceUnit, Statement, StmtId};

use super::cfg::{Cfg, CfgNode};
use super::{DependencyEdge, EdgeKind};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Def {
    pub var: String,
    /// A strong def overwrites the variable and kills earlier defs.
    pub strong: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DefUse {
    pub defs: Vec<Def>,
    pub uses: BTreeSet<String>,
}

impl DefUse {
    fn def(&mut self, var: &str, strong: bool) {
        if let Some(d) = self.defs.iter_mut().find(|d| d.var == var) {
            d.strong |= strong;
        } else {
            self.defs.push(Def { var: var.to_string(), strong });
        }
    }

    fn use_(&mut self, var: &str) {
        self.uses.insert(var.to_string());
    }
}

const ASSIGN_OPS: &[&str] = &["=", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "<<=", ">>="];

/// Def/use sets of every statement of `func`, keyed by statement id.
pub fn def_use(unit: &SourceUnit, func: &Function) -> BTreeMap<StmtId, DefUse> {
    let ast = &unit.ast;
    // names declared as pointers or arrays anywhere visible to the function
    let mut indirect: HashSet<&str> = HashSet::new();
    let globals = ast.node(Ast::ROOT).children.iter().filter(|&&c| ast.node(c).kind == AstKind::DeclStatement);
    for root in globals.copied().chain(std::iter::once(func.node)) {
        for n in ast.descendants(root) {
            let node = ast.node(n);
            if node.declarator.is_some_and(Declarator::is_indirect) {
                indirect.insert(node.text.as_str());
            }
        }
    }
    let ctx = Extractor { ast, indirect };
    func.statements.iter().map(|s| (s.id, ctx.statement(s))).collect()
}

struct Extractor<'a> {
    ast: &'a Ast,
    indirect: HashSet<&'a str>,
}

impl Extractor<'_> {
    fn statement(&self, stmt: &Statement) -> DefUse {
        let mut du = DefUse::default();
        let node = self.ast.node(stmt.node);
        match stmt.kind {
            AstKind::FunctionDef => {}
            AstKind::Parameter | AstKind::DeclStatement => {
                for &c in &node.children {
                    let child = self.ast.node(c);
                    if child.kind == AstKind::Identifier && child.declarator.is_some() {
                        du.def(&child.text, true);
                    } else {
                        self.expr(c, &mut du);
                    }
                }
            }
            _ => {
                for &c in &node.children {
                    if self.ast.node(c).stmt == node.stmt {
                        self.expr(c, &mut du);
                    }
                }
            }
        }
        du
    }

    fn expr(&self, id: NodeId, du: &mut DefUse) {
        let node = self.ast.node(id);
        match node.kind {
            AstKind::Identifier => du.use_(&node.text),
            AstKind::Literal => {}
            AstKind::BinaryExpression if ASSIGN_OPS.contains(&node.text.as_str()) => {
                self.lvalue(node.children[0], node.text != "=", du);
                self.expr(node.children[1], du);
            }
            AstKind::UnaryExpression if matches!(node.text.as_str(), "++" | "--" | "post++" | "post--") => {
                self.lvalue(node.children[0], true, du);
            }
            AstKind::CallExpression => {
                for &arg in &node.children {
                    let a = self.ast.node(arg);
                    let by_pointer = (a.kind == AstKind::UnaryExpression && a.text == "&")
                        || (a.kind == AstKind::Identifier && self.indirect.contains(a.text.as_str()));
                    if by_pointer {
                        for v in self.identifiers(arg) {
                            du.use_(v);
                            du.def(v, false);
                        }
                    } else {
                        self.expr(arg, du);
                    }
                }
            }
            _ => {
                for &c in &node.children {
                    self.expr(c, du);
                }
            }
        }
    }

    /// Records the effects of writing to `id`; `read` marks read-modify-write.
    fn lvalue(&self, id: NodeId, read: bool, du: &mut DefUse) {
        let node = self.ast.node(id);
        match node.kind {
            AstKind::Identifier => {
                du.def(&node.text, true);
                if read {
                    du.use_(&node.text);
                }
            }
            AstKind::ArraySubscript => {
                self.weak_base(node.children[0], du);
                self.expr(node.children[1], du);
            }
            AstKind::MemberAccess => self.weak_base(node.children[0], du),
            AstKind::UnaryExpression if node.text == "*" => {
                for v in self.identifiers(node.children[0]) {
                    du.use_(v);
                    du.def(v, false);
                }
            }
            _ => self.expr(id, du),
        }
    }

    /// Base of an indirect write: the base variable is weakly defined and
    /// read; index expressions met on the way are plain uses.
    fn weak_base(&self, id: NodeId, du: &mut DefUse) {
        let node = self.ast.node(id);
        match node.kind {
            AstKind::Identifier => {
                du.use_(&node.text);
                du.def(&node.text, false);
            }
            AstKind::ArraySubscript => {
                self.weak_base(node.children[0], du);
                self.expr(node.children[1], du);
            }
            AstKind::MemberAccess => self.weak_base(node.children[0], du),
            _ => {
                for v in self.identifiers(id) {
                    du.use_(v);
                    du.def(v, false);
                }
            }
        }
    }

    fn identifiers(&self, id: NodeId) -> Vec<&str> {
        self.ast
            .descendants(id)
            .into_iter()
            .map(|n| self.ast.node(n))
            .filter(|n| n.kind == AstKind::Identifier)
            .map(|n| n.text.as_str())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReachingDefinitions {
    /// DATA edges `def -> use` labelled with the variable.
    pub edges: BTreeSet<DependencyEdge>,
    /// Definitions reaching the entry of each statement.
    pub reaching_in: BTreeMap<StmtId, BTreeSet<(StmtId, String)>>,
    /// Round-robin passes until the fixpoint held.
    pub passes: usize,
}

/// Forward may-analysis over `cfg`. Statements missing from `defuse` are
/// treated as having no defs or uses.
pub fn reaching_definitions(cfg: &Cfg, defuse: &BTreeMap<StmtId, DefUse>) -> ReachingDefinitions {
    let empty = DefUse::default();
    let du = |s: StmtId| defuse.get(&s).unwrap_or(&empty);

    // all definition sites, indexed
    let mut sites: Vec<(StmtId, &str)> = Vec::new();
    for s in cfg.statements() {
        for d in &du(s).defs {
            sites.push((s, d.var.as_str()));
        }
    }
    let variables: BTreeSet<&str> = sites.iter().map(|&(_, v)| v).collect();

    let order = cfg.reverse_postorder();
    let mut out: BTreeMap<CfgNode, BTreeSet<usize>> = cfg.nodes().map(|n| (n, BTreeSet::new())).collect();
    let mut inn: BTreeMap<CfgNode, BTreeSet<usize>> = out.clone();
    let mut passes = 0;
    loop {
        passes += 1;
        let mut changed = false;
        for &n in &order {
            let mut in_set = BTreeSet::new();
            for p in cfg.predecessors(n) {
                in_set.extend(out[&p].iter().copied());
            }
            let mut out_set = in_set.clone();
            if let CfgNode::Stmt(s) = n {
                let defs = &du(s).defs;
                let killed: BTreeSet<&str> = defs.iter().filter(|d| d.strong).map(|d| d.var.as_str()).collect();
                out_set.retain(|&i| !killed.contains(sites[i].1));
                for (i, &(site, _)) in sites.iter().enumerate() {
                    if site == s {
                        out_set.insert(i);
                    }
                }
            }
            if out_set != out[&n] {
                out.insert(n, out_set);
                changed = true;
            }
            inn.insert(n, in_set);
        }
        if !changed {
            break;
        }
    }
    debug_assert!(passes <= cfg.len() * variables.len() + 1);

    let mut edges = BTreeSet::new();
    let mut reaching_in = BTreeMap::new();
    for s in cfg.statements() {
        let reaching: BTreeSet<(StmtId, String)> =
            inn[&CfgNode::Stmt(s)].iter().map(|&i| (sites[i].0, sites[i].1.to_string())).collect();
        for (d, v) in &reaching {
            if du(s).uses.contains(v) {
                edges.insert(DependencyEdge::new(*d, s, EdgeKind::Data, Some(v.clone())));
            }
        }
        reaching_in.insert(s, reaching);
    }
    ReachingDefinitions { edges, reaching_in, passes }
}
