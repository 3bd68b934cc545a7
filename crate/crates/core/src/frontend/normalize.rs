//! Identifier normalization: user variables become `VAR1, VAR2, ...` and
//! functions defined in the unit become `FUN1, FUN2, ...`, numbered by first
//! occurrence in pre-order. Names on the keep-list are never renamed.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use super::ast::{Ast, AstKind, SourceUnit};
use super::lexer::TokenKind;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NameMapping {
    /// original name -> normalized name, in assignment order
    pub renamed: Vec<(String, String)>,
}

impl NameMapping {
    pub fn get(&self, name: &str) -> Option<&str> {
        self.renamed.iter().find(|(from, _)| from == name).map(|(_, to)| to.as_str())
    }

    pub fn as_map(&self) -> BTreeMap<&str, &str> {
        self.renamed.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect()
    }
}

/// Parses a keep-list: one name per line, `#` starts a comment.
pub fn parse_keep_list(text: &str) -> BTreeSet<String> {
    text.lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect()
}

pub fn normalize(unit: &SourceUnit, keep: &BTreeSet<String>) -> (SourceUnit, NameMapping) {
    let functions: HashSet<&str> = unit.functions.iter().map(|f| f.name.as_str()).collect();
    let variables: HashSet<&str> = unit
        .ast
        .iter()
        .filter(|(_, n)| n.kind == AstKind::Identifier && n.declarator.is_some())
        .map(|(_, n)| n.text.as_str())
        .collect();

    let mut mapping = NameMapping::default();
    let mut lookup: BTreeMap<String, String> = BTreeMap::new();
    let (mut vars, mut funs) = (0usize, 0usize);
    for id in unit.ast.descendants(Ast::ROOT) {
        let node = unit.ast.node(id);
        let name = node.text.as_str();
        let is_fun_site = matches!(node.kind, AstKind::FunctionDef | AstKind::CallExpression);
        if !is_fun_site && node.kind != AstKind::Identifier {
            continue;
        }
        if keep.contains(name) || lookup.contains_key(name) {
            continue;
        }
        let fresh = if functions.contains(name) {
            funs += 1;
            format!("FUN{funs}")
        } else if node.kind == AstKind::Identifier && variables.contains(name) {
            vars += 1;
            format!("VAR{vars}")
        } else {
            continue;
        };
        lookup.insert(name.to_string(), fresh.clone());
        mapping.renamed.push((name.to_string(), fresh));
    }

    let mut out = unit.clone();
    let renamable: Vec<_> = out
        .ast
        .iter()
        .filter(|(_, n)| matches!(n.kind, AstKind::Identifier | AstKind::CallExpression | AstKind::FunctionDef))
        .map(|(id, _)| id)
        .collect();
    for id in renamable {
        let node = out.ast.node_mut(id);
        if let Some(new) = lookup.get(&node.text) {
            node.text = new.clone();
        }
    }
    for f in &mut out.functions {
        if let Some(new) = lookup.get(&f.name) {
            f.name = new.clone();
        }
        for stmt in &mut f.statements {
            let mut after_member = false;
            for tok in &mut stmt.tokens {
                if tok.kind == TokenKind::Identifier && !after_member {
                    if let Some(new) = lookup.get(&tok.text) {
                        tok.text = new.clone();
                    }
                }
                after_member = tok.kind == TokenKind::Operator && (tok.text == "." || tok.text == "->");
            }
        }
    }
    (out, mapping)
}
