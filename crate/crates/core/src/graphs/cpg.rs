use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::frontend::{AstKind, SourceUnit, Span, StmtId};

use super::cfg::{build_cfg, Cfg};
use super::control::control_dependencies;
use super::dataflow::{def_use, reaching_definitions};
use super::postdom::post_dominators;
use super::{AnalysisError, DependencyEdge};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct FuncId(pub u32);

/// A statement qualified by its function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct QualifiedStmt {
    pub func: FuncId,
    pub stmt: StmtId,
}

impl QualifiedStmt {
    pub fn new(func: FuncId, stmt: StmtId) -> Self {
        QualifiedStmt { func, stmt }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StmtInfo {
    pub id: StmtId,
    pub kind: AstKind,
    /// Statement tokens joined by single spaces.
    pub text: String,
    pub tokens: Vec<String>,
    pub span: Span,
    /// Callee names of the calls made by this statement itself.
    pub calls: Vec<String>,
}

/// Program dependence graph of one function.
#[derive(Debug, Clone)]
pub struct Pdg {
    pub id: FuncId,
    pub name: String,
    pub file: String,
    /// Position of the function inside its unit.
    pub index: usize,
    unit: usize,
    pub statements: Vec<StmtInfo>,
    pub cfg: Cfg,
    /// DATA and CONTROL edges.
    pub edges: BTreeSet<DependencyEdge>,
    succ: Vec<Vec<StmtId>>,
    pred: Vec<Vec<StmtId>>,
}

impl Pdg {
    pub fn contains(&self, s: StmtId) -> bool {
        (s.0 as usize) < self.statements.len()
    }

    pub fn statement(&self, s: StmtId) -> &StmtInfo {
        &self.statements[s.0 as usize]
    }

    /// Dependence successors (DATA or CONTROL), deduplicated.
    pub fn successors(&self, s: StmtId) -> &[StmtId] {
        &self.succ[s.0 as usize]
    }

    pub fn predecessors(&self, s: StmtId) -> &[StmtId] {
        &self.pred[s.0 as usize]
    }

    pub fn parameters(&self) -> impl Iterator<Item = StmtId> + '_ {
        self.statements.iter().filter(|s| s.kind == AstKind::Parameter).map(|s| s.id)
    }

    pub fn returns(&self) -> impl Iterator<Item = StmtId> + '_ {
        self.statements.iter().filter(|s| s.kind == AstKind::ReturnStatement).map(|s| s.id)
    }

    /// Assembles a PDG from explicit parts. Used for synthetic graphs.
    pub fn from_parts(
        id: FuncId,
        name: impl Into<String>,
        statements: Vec<StmtInfo>,
        cfg: Cfg,
        edges: BTreeSet<DependencyEdge>,
    ) -> Self {
        let n = statements.len();
        let mut succ = vec![BTreeSet::new(); n];
        let mut pred = vec![BTreeSet::new(); n];
        for e in &edges {
            succ[e.src.0 as usize].insert(e.dst);
            pred[e.dst.0 as usize].insert(e.src);
        }
        Pdg {
            id,
            name: name.into(),
            file: String::new(),
            index: id.0 as usize,
            unit: 0,
            statements,
            cfg,
            edges,
            succ: succ.into_iter().map(|s| s.into_iter().collect()).collect(),
            pred: pred.into_iter().map(|s| s.into_iter().collect()).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct CallEdge {
    pub site: QualifiedStmt,
    pub callee: FuncId,
}

#[derive(Debug, Clone)]
pub struct Cpg {
    pub functions: Vec<Pdg>,
    pub call_edges: Vec<CallEdge>,
    callers: BTreeMap<FuncId, Vec<QualifiedStmt>>,
    callees_at: BTreeMap<QualifiedStmt, Vec<FuncId>>,
}

impl Cpg {
    pub fn from_functions(functions: Vec<Pdg>) -> Self {
        let mut cpg = Cpg { functions, call_edges: Vec::new(), callers: BTreeMap::new(), callees_at: BTreeMap::new() };
        let mut edges = Vec::new();
        for f in &cpg.functions {
            for s in &f.statements {
                for name in &s.calls {
                    if let Some(callee) = cpg.resolve(f.id, name) {
                        edges.push(CallEdge { site: QualifiedStmt::new(f.id, s.id), callee });
                    }
                }
            }
        }
        edges.sort();
        edges.dedup();
        for e in &edges {
            cpg.callers.entry(e.callee).or_default().push(e.site);
            cpg.callees_at.entry(e.site).or_default().push(e.callee);
        }
        cpg.call_edges = edges;
        cpg
    }

    pub fn function(&self, id: FuncId) -> &Pdg {
        &self.functions[id.0 as usize]
    }

    pub fn stmt(&self, q: QualifiedStmt) -> &StmtInfo {
        self.function(q.func).statement(q.stmt)
    }

    pub fn contains(&self, q: QualifiedStmt) -> bool {
        (q.func.0 as usize) < self.functions.len() && self.function(q.func).contains(q.stmt)
    }

    /// Function `index` of the unit at `file`.
    pub fn find(&self, file: &str, index: usize) -> Option<FuncId> {
        self.functions.iter().find(|f| f.file == file && f.index == index).map(|f| f.id)
    }

    pub fn by_name(&self, name: &str) -> Option<FuncId> {
        self.functions.iter().find(|f| f.name == name).map(|f| f.id)
    }

    /// Resolves a call made from `from`: same unit first, then program-wide.
    pub fn resolve(&self, from: FuncId, name: &str) -> Option<FuncId> {
        let unit = self.function(from).unit;
        self.functions
            .iter()
            .find(|f| f.unit == unit && f.name == name)
            .or_else(|| self.functions.iter().find(|f| f.name == name))
            .map(|f| f.id)
    }

    /// Call sites anywhere in the program that call `f`.
    pub fn call_sites_of(&self, f: FuncId) -> &[QualifiedStmt] {
        self.callers.get(&f).map_or(&[], Vec::as_slice)
    }

    /// Defined functions called at `site`.
    pub fn callees_at(&self, site: QualifiedStmt) -> &[FuncId] {
        self.callees_at.get(&site).map_or(&[], Vec::as_slice)
    }

    /// Defined functions called anywhere in `f`.
    pub fn callees_of(&self, f: FuncId) -> BTreeSet<FuncId> {
        self.call_edges.iter().filter(|e| e.site.func == f).map(|e| e.callee).collect()
    }
}

/// Builds per-function PDGs (CONTROL and DATA edges) and call edges for
/// every call whose callee is defined somewhere in `program`.
pub fn build_cpg(program: &[SourceUnit]) -> Result<Cpg, AnalysisError> {
    let mut functions = Vec::new();
    for (u, unit) in program.iter().enumerate() {
        for (index, func) in unit.functions.iter().enumerate() {
            let cfg = build_cfg(unit, func);
            let pd = post_dominators(&cfg)?;
            let mut edges = control_dependencies(&cfg, &pd);
            edges.extend(reaching_definitions(&cfg, &def_use(unit, func)).edges);

            let statements = func
                .statements
                .iter()
                .map(|s| {
                    let calls = unit
                        .ast
                        .own_nodes(s.node)
                        .into_iter()
                        .map(|n| unit.ast.node(n))
                        .filter(|n| n.kind == AstKind::CallExpression)
                        .map(|n| n.text.clone())
                        .collect();
                    let tokens: Vec<String> = s.tokens.iter().map(|t| t.text.clone()).collect();
                    StmtInfo { id: s.id, kind: s.kind, text: tokens.join(" "), tokens, span: s.span, calls }
                })
                .collect();
            let mut pdg = Pdg::from_parts(FuncId(functions.len() as u32), func.name.clone(), statements, cfg, edges);
            pdg.file = unit.path.clone();
            pdg.index = index;
            pdg.unit = u;
            functions.push(pdg);
        }
    }
    Ok(Cpg::from_functions(functions))
}
