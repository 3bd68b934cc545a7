//! Forward, backward and one-layer interprocedural slicing over the CPG.

use std::collections::{BTreeSet, VecDeque};

use thiserror::Error;

use crate::frontend::{AstKind, StmtId};
use crate::graphs::{Cpg, FuncId, Pdg, QualifiedStmt};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SliceError {
    #[error("criterion statement {stmt} is not a node of the PDG of `{function}`")]
    NotInPdg { function: String, stmt: StmtId },
}

/// Slice-node sets of one criterion. `fsn`/`bsn` live in the criterion's
/// function; `ifsn`/`ibsn` come from its direct callers and callees.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SliceNodeSets {
    pub criterion: QualifiedStmt,
    pub fsn: BTreeSet<StmtId>,
    pub ifsn: BTreeSet<QualifiedStmt>,
    pub bsn: BTreeSet<StmtId>,
    pub ibsn: BTreeSet<QualifiedStmt>,
}

impl SliceNodeSets {
    /// `SN = FSN ∪ IFSN ∪ BSN ∪ IBSN`, qualified.
    pub fn all(&self) -> BTreeSet<QualifiedStmt> {
        let f = self.criterion.func;
        let mut sn: BTreeSet<QualifiedStmt> =
            self.fsn.iter().chain(&self.bsn).map(|&s| QualifiedStmt::new(f, s)).collect();
        sn.extend(&self.ifsn);
        sn.extend(&self.ibsn);
        sn
    }
}

fn closure(pdg: &Pdg, start: StmtId, next: impl Fn(&Pdg, StmtId) -> &[StmtId]) -> Result<BTreeSet<StmtId>, SliceError> {
    if !pdg.contains(start) {
        return Err(SliceError::NotInPdg { function: pdg.name.clone(), stmt: start });
    }
    let mut seen = BTreeSet::from([start]);
    let mut queue = VecDeque::from([start]);
    while let Some(n) = queue.pop_front() {
        for &m in next(pdg, n) {
            if seen.insert(m) {
                queue.push_back(m);
            }
        }
    }
    Ok(seen)
}

/// Statements reachable from `criterion` along DATA and CONTROL edges.
pub fn forward_slice(pdg: &Pdg, criterion: StmtId) -> Result<BTreeSet<StmtId>, SliceError> {
    closure(pdg, criterion, |p, s| p.successors(s))
}

/// Statements from which `criterion` is reachable along DATA and CONTROL edges.
pub fn backward_slice(pdg: &Pdg, criterion: StmtId) -> Result<BTreeSet<StmtId>, SliceError> {
    closure(pdg, criterion, |p, s| p.predecessors(s))
}

fn qualify(f: FuncId, set: BTreeSet<StmtId>) -> impl Iterator<Item = QualifiedStmt> {
    set.into_iter().map(move |s| QualifiedStmt::new(f, s))
}

/// For each statement of `fsn` that calls a defined function, the forward
/// slices of that callee taken from each of its parameters. One call layer.
pub fn interprocedural_forward(cpg: &Cpg, func: FuncId, fsn: &BTreeSet<StmtId>) -> BTreeSet<QualifiedStmt> {
    let mut out = BTreeSet::new();
    for &n in fsn {
        for &callee in cpg.callees_at(QualifiedStmt::new(func, n)) {
            let pdg = cpg.function(callee);
            for p in pdg.parameters() {
                let slice = forward_slice(pdg, p).expect("parameter is a PDG node");
                out.extend(qualify(callee, slice));
            }
        }
    }
    out
}

/// Backward slices of (a) every call site of `func` in its callers, taken
/// from the call-site statement, and (b) every return statement of each
/// function `func` calls. One call layer.
pub fn interprocedural_backward(cpg: &Cpg, func: FuncId) -> BTreeSet<QualifiedStmt> {
    let mut out = BTreeSet::new();
    for &site in cpg.call_sites_of(func) {
        let slice = backward_slice(cpg.function(site.func), site.stmt).expect("call site is a PDG node");
        out.extend(qualify(site.func, slice));
    }
    for callee in cpg.callees_of(func) {
        let pdg = cpg.function(callee);
        for r in pdg.returns() {
            let slice = backward_slice(pdg, r).expect("return is a PDG node");
            out.extend(qualify(callee, slice));
        }
    }
    out
}

/// All four slice-node sets for the statement `criterion`.
pub fn slice(cpg: &Cpg, criterion: QualifiedStmt) -> Result<SliceNodeSets, SliceError> {
    let pdg = cpg.function(criterion.func);
    let fsn = forward_slice(pdg, criterion.stmt)?;
    let bsn = backward_slice(pdg, criterion.stmt)?;
    let ifsn = interprocedural_forward(cpg, criterion.func, &fsn);
    let ibsn = interprocedural_backward(cpg, criterion.func);
    Ok(SliceNodeSets { criterion, fsn, ifsn, bsn, ibsn })
}

/// Whether `stmt` is, or directly contains, a call to a defined function.
pub fn is_call_site(cpg: &Cpg, stmt: QualifiedStmt) -> bool {
    !cpg.callees_at(stmt).is_empty()
}

/// Whether `stmt` is a return statement.
pub fn is_return(cpg: &Cpg, stmt: QualifiedStmt) -> bool {
    cpg.stmt(stmt).kind == AstKind::ReturnStatement
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_source;
    use crate::graphs::{build_cpg, Cfg, DependencyEdge, EdgeKind, StmtInfo};
    use crate::frontend::Span;

    fn chain_pdg(n: u32, edges: &[(u32, u32)]) -> Pdg {
        let statements = (0..n)
            .map(|i| StmtInfo {
                id: StmtId(i),
                kind: AstKind::ExpressionStatement,
                text: format!("s{i}"),
                tokens: vec![],
                span: Span::new(i + 1, i + 1),
                calls: vec![],
            })
            .collect();
        let edges = edges
            .iter()
            .map(|&(a, b)| DependencyEdge::new(StmtId(a), StmtId(b), EdgeKind::Data, Some("v".into())))
            .collect();
        Pdg::from_parts(FuncId(0), "f", statements, Cfg::new("f"), edges)
    }

    fn ids(set: &BTreeSet<StmtId>) -> Vec<u32> {
        set.iter().map(|s| s.0).collect()
    }

    #[test]
    fn isolated_statement() {
        let pdg = chain_pdg(3, &[]);
        assert_eq!(ids(&forward_slice(&pdg, StmtId(1)).unwrap()), [1]);
        assert_eq!(ids(&backward_slice(&pdg, StmtId(1)).unwrap()), [1]);
    }

    #[test]
    fn chain_closure() {
        let pdg = chain_pdg(3, &[(0, 1), (1, 2)]);
        assert_eq!(ids(&forward_slice(&pdg, StmtId(0)).unwrap()), [0, 1, 2]);
        assert_eq!(ids(&backward_slice(&pdg, StmtId(2)).unwrap()), [0, 1, 2]);
    }

    #[test]
    fn missing_criterion() {
        let pdg = chain_pdg(2, &[]);
        assert!(matches!(forward_slice(&pdg, StmtId(9)), Err(SliceError::NotInPdg { .. })));
    }

    const THREE_DEEP: &str = "\
int c(int z){ int w; w = z * 2; return w; }
int b(int y){ int t; t = c(y); return t; }
int a(int x){ int r; r = b(x); return r; }
";

    #[test]
    fn forward_depth_is_one() {
        let cpg = build_cpg(&[parse_source("t.c", THREE_DEEP).unwrap()]).unwrap();
        let a = cpg.by_name("a").unwrap();
        let b = cpg.by_name("b").unwrap();
        let c = cpg.by_name("c").unwrap();
        // criterion: parameter x of a
        let sets = slice(&cpg, QualifiedStmt::new(a, StmtId(1))).unwrap();
        assert!(sets.ifsn.iter().any(|q| q.func == b));
        assert!(sets.ifsn.iter().all(|q| q.func != c));
        assert!(sets.ibsn.iter().all(|q| q.func != c));
    }

    #[test]
    fn no_calls_means_no_interprocedural_nodes() {
        let cpg = build_cpg(&[parse_source("t.c", "int f(int a){ return a + 1; }").unwrap()]).unwrap();
        let sets = slice(&cpg, QualifiedStmt::new(FuncId(0), StmtId(1))).unwrap();
        assert!(sets.ifsn.is_empty());
        assert!(sets.ibsn.is_empty());
        assert!(sets.fsn.contains(&StmtId(1)) && sets.bsn.contains(&StmtId(1)));
    }

    #[test]
    fn caller_def_chain_and_callee_returns() {
        let src = "\
int callee(int n){ int *ptr; ptr = malloc(n); return ptr; }
int caller(int k){ int m; m = k + 1; return callee(m); }
";
        let cpg = build_cpg(&[parse_source("t.c", src).unwrap()]).unwrap();
        let callee = cpg.by_name("callee").unwrap();
        let caller = cpg.by_name("caller").unwrap();
        // criterion: parameter n of callee -> caller's chain k -> m -> call site
        let sets = slice(&cpg, QualifiedStmt::new(callee, StmtId(1))).unwrap();
        let from_caller: Vec<u32> = sets.ibsn.iter().filter(|q| q.func == caller).map(|q| q.stmt.0).collect();
        assert_eq!(from_caller, [1, 3, 4]);
        // criterion in caller: callee's return chain is pulled in
        let sets = slice(&cpg, QualifiedStmt::new(caller, StmtId(3))).unwrap();
        let from_callee: Vec<u32> = sets.ibsn.iter().filter(|q| q.func == callee).map(|q| q.stmt.0).collect();
        assert_eq!(from_callee, [1, 3, 4]);
    }
}
