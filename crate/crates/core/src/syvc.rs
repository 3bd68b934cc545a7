//! Syntax-based vulnerability candidates (SyVCs): AST occurrences that
//! serve as slicing criteria.
//!
//! Matching rules, checked per AST node in pre-order:
//!
//! * **FC**: a `CallExpression` whose callee is on the API list.
//! * **AU**: an `Identifier` that is the base of an `ArraySubscript`.
//! * **PU**: an `Identifier` under unary `*`, the base of a `->` access, or
//!   a use of a name declared with a pointer declarator.
//! * **AE**: an `Identifier` below a `BinaryExpression` with operator
//!   `+ - * / %` (relational operators excluded).
//! * **FP**: an `Identifier` whose parent is a `Parameter`.
//! * **FR**: an `Identifier` anywhere below a `ReturnStatement`.

use std::collections::{BTreeSet, HashSet};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frontend::{parse_keep_list, Ast, AstKind, Declarator, NodeId, SourceUnit, StmtId};

pub const DEFAULT_API_LIST: &str = include_str!("../data/sensitive_api.txt");

const ARITHMETIC_OPS: &[&str] = &["+", "-", "*", "/", "%"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SyvcKind {
    FC,
    AU,
    PU,
    AE,
    FP,
    FR,
}

impl SyvcKind {
    pub const ALL: [SyvcKind; 6] = [SyvcKind::FC, SyvcKind::AU, SyvcKind::PU, SyvcKind::AE, SyvcKind::FP, SyvcKind::FR];
    /// The four kinds that predate FP and FR.
    pub const CLASSIC: [SyvcKind; 4] = [SyvcKind::FC, SyvcKind::AU, SyvcKind::PU, SyvcKind::AE];

    pub fn as_str(self) -> &'static str {
        match self {
            SyvcKind::FC => "FC",
            SyvcKind::AU => "AU",
            SyvcKind::PU => "PU",
            SyvcKind::AE => "AE",
            SyvcKind::FP => "FP",
            SyvcKind::FR => "FR",
        }
    }
}

impl std::fmt::Display for SyvcKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SyvcKind {
    type Err = SyvcError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SyvcKind::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| SyvcError::UnknownKind(s.trim().to_string()))
    }
}

/// Parses a comma-separated kind list such as `fc,au,pu`.
pub fn parse_kinds(list: &str) -> Result<BTreeSet<SyvcKind>, SyvcError> {
    list.split(',').filter(|s| !s.trim().is_empty()).map(str::parse).collect()
}

#[derive(Debug, Error)]
pub enum SyvcError {
    #[error("cannot read API list {path}: {source}")]
    MissingFile {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("unknown SyVC kind `{0}` (expected one of fc, au, pu, ae, fp, fr)")]
    UnknownKind(String),
}

pub fn load_api_list(path: impl AsRef<Path>) -> Result<BTreeSet<String>, SyvcError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|source| SyvcError::MissingFile { path: path.display().to_string(), source })?;
    Ok(parse_keep_list(&text))
}

pub fn default_api_list() -> BTreeSet<String> {
    parse_keep_list(DEFAULT_API_LIST)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Syvc {
    pub kind: SyvcKind,
    /// Identifier or callee name as written in the source.
    pub element: String,
    pub file: String,
    /// Function name as written in the source.
    pub function: String,
    /// Position of the function inside its unit.
    pub function_index: usize,
    pub stmt: StmtId,
    pub line: u32,
    pub node: NodeId,
}

/// Extracts every SyVC of the requested kinds, in source order.
pub fn extract_syvcs(unit: &SourceUnit, api: &BTreeSet<String>, kinds: &BTreeSet<SyvcKind>) -> Vec<Syvc> {
    let mut out = Vec::new();
    for (index, func) in unit.functions.iter().enumerate() {
        let pointers = pointer_names(&unit.ast, func.node);
        for id in unit.ast.descendants(func.node) {
            let node = unit.ast.node(id);
            let Some(stmt) = node.stmt else { continue };
            for &kind in SyvcKind::ALL.iter().filter(|k| kinds.contains(k)) {
                if matches_rule(&unit.ast, id, kind, api, &pointers) {
                    out.push(Syvc {
                        kind,
                        element: node.text.clone(),
                        file: unit.path.clone(),
                        function: func.name.clone(),
                        function_index: index,
                        stmt,
                        line: node.span.start,
                        node: id,
                    });
                }
            }
        }
    }
    out
}

/// Names declared with a pointer declarator in the function or globally.
fn pointer_names(ast: &Ast, func: NodeId) -> HashSet<String> {
    let globals = ast.node(Ast::ROOT).children.iter().copied().filter(|&c| ast.node(c).kind == AstKind::DeclStatement);
    globals
        .chain(std::iter::once(func))
        .flat_map(|root| ast.descendants(root))
        .map(|n| ast.node(n))
        .filter(|n| matches!(n.declarator, Some(Declarator::Pointer(_))))
        .map(|n| n.text.clone())
        .collect()
}

/// Whether node `id` satisfies the rule of `kind`.
pub fn matches_rule(ast: &Ast, id: NodeId, kind: SyvcKind, api: &BTreeSet<String>, pointers: &HashSet<String>) -> bool {
    let node = ast.node(id);
    if kind == SyvcKind::FC {
        return node.kind == AstKind::CallExpression && api.contains(&node.text);
    }
    if node.kind != AstKind::Identifier {
        return false;
    }
    let parent = node.parent.map(|p| ast.node(p));
    match kind {
        SyvcKind::FC => unreachable!(),
        SyvcKind::AU => parent.is_some_and(|p| p.kind == AstKind::ArraySubscript && p.children[0] == id),
        SyvcKind::PU => {
            let deref = parent.is_some_and(|p| p.kind == AstKind::UnaryExpression && p.text == "*");
            let arrow = parent.is_some_and(|p| p.kind == AstKind::MemberAccess && p.text.starts_with("->"));
            let pointer_use = node.declarator.is_none() && pointers.contains(&node.text);
            deref || arrow || pointer_use
        }
        SyvcKind::AE => ast
            .ancestors(id)
            .take_while(|&a| !ast.node(a).kind.is_statement())
            .any(|a| {
                let n = ast.node(a);
                n.kind == AstKind::BinaryExpression && ARITHMETIC_OPS.contains(&n.text.as_str())
            }),
        SyvcKind::FP => parent.is_some_and(|p| p.kind == AstKind::Parameter),
        SyvcKind::FR => ast.ancestors(id).any(|a| ast.node(a).kind == AstKind::ReturnStatement),
    }
}
