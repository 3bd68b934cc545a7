use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::lexer::Token;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AstKind {
    TranslationUnit,
    FunctionDef,
    Parameter,
    CompoundStatement,
    DeclStatement,
    ExpressionStatement,
    IfStatement,
    WhileStatement,
    ForStatement,
    ReturnStatement,
    CallExpression,
    BinaryExpression,
    UnaryExpression,
    ArraySubscript,
    MemberAccess,
    Identifier,
    Literal,
}

impl AstKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AstKind::TranslationUnit => "TranslationUnit",
            AstKind::FunctionDef => "FunctionDef",
            AstKind::Parameter => "Parameter",
            AstKind::CompoundStatement => "CompoundStatement",
            AstKind::DeclStatement => "DeclStatement",
            AstKind::ExpressionStatement => "ExpressionStatement",
            AstKind::IfStatement => "IfStatement",
            AstKind::WhileStatement => "WhileStatement",
            AstKind::ForStatement => "ForStatement",
            AstKind::ReturnStatement => "ReturnStatement",
            AstKind::CallExpression => "CallExpression",
            AstKind::BinaryExpression => "BinaryExpression",
            AstKind::UnaryExpression => "UnaryExpression",
            AstKind::ArraySubscript => "ArraySubscript",
            AstKind::MemberAccess => "MemberAccess",
            AstKind::Identifier => "Identifier",
            AstKind::Literal => "Literal",
        }
    }

    pub fn parse(s: &str) -> Option<AstKind> {
        ALL_KINDS.iter().copied().find(|k| k.as_str() == s)
    }

    /// Kinds that become statement nodes in the program graphs.
    pub fn is_statement(self) -> bool {
        matches!(
            self,
            AstKind::FunctionDef
                | AstKind::Parameter
                | AstKind::DeclStatement
                | AstKind::ExpressionStatement
                | AstKind::IfStatement
                | AstKind::WhileStatement
                | AstKind::ForStatement
                | AstKind::ReturnStatement
        )
    }
}

pub const ALL_KINDS: [AstKind; 17] = [
    AstKind::TranslationUnit,
    AstKind::FunctionDef,
    AstKind::Parameter,
    AstKind::CompoundStatement,
    AstKind::DeclStatement,
    AstKind::ExpressionStatement,
    AstKind::IfStatement,
    AstKind::WhileStatement,
    AstKind::ForStatement,
    AstKind::ReturnStatement,
    AstKind::CallExpression,
    AstKind::BinaryExpression,
    AstKind::UnaryExpression,
    AstKind::ArraySubscript,
    AstKind::MemberAccess,
    AstKind::Identifier,
    AstKind::Literal,
];

impl std::fmt::Display for AstKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId(pub u32);

/// Statement index inside one function. `StmtId(0)` is always the
/// function's own `FunctionDef` node, parameters follow, then body
/// statements in source order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StmtId(pub u32);

impl std::fmt::Display for StmtId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: u32,
    pub end: u32,
}

impl Span {
    pub fn new(start: u32, end: u32) -> Self {
        Span { start, end }
    }

    pub fn contains(&self, other: &Span) -> bool {
        self.start <= other.start && other.end <= self.end
    }

    pub fn contains_line(&self, line: u32) -> bool {
        self.start <= line && line <= self.end
    }
}

/// How a declared name was declared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Declarator {
    Scalar,
    Pointer(u8),
    Array,
}

impl Declarator {
    pub fn is_indirect(self) -> bool {
        !matches!(self, Declarator::Scalar)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AstNode {
    pub kind: AstKind,
    /// Identifier name, literal text, callee name, operator, or type text
    /// depending on `kind`. `MemberAccess` stores `.field` / `->field`.
    pub text: String,
    pub children: Vec<NodeId>,
    pub parent: Option<NodeId>,
    pub span: Span,
    pub stmt: Option<StmtId>,
    /// Set on identifiers that introduce a name (parameters, declarations).
    pub declarator: Option<Declarator>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Ast {
    nodes: Vec<AstNode>,
}

impl Ast {
    pub const ROOT: NodeId = NodeId(0);

    pub fn push(&mut self, kind: AstKind, text: impl Into<String>, span: Span) -> NodeId {
        let id = NodeId(self.nodes.len() as u32);
        self.nodes.push(AstNode {
            kind,
            text: text.into(),
            children: Vec::new(),
            parent: None,
            span,
            stmt: None,
            declarator: None,
        });
        id
    }

    pub fn attach(&mut self, parent: NodeId, child: NodeId) {
        self.nodes[child.0 as usize].parent = Some(parent);
        self.nodes[parent.0 as usize].children.push(child);
    }

    pub fn node(&self, id: NodeId) -> &AstNode {
        &self.nodes[id.0 as usize]
    }

    pub fn node_mut(&mut self, id: NodeId) -> &mut AstNode {
        &mut self.nodes[id.0 as usize]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (NodeId, &AstNode)> {
        self.nodes.iter().enumerate().map(|(i, n)| (NodeId(i as u32), n))
    }

    pub fn parent(&self, id: NodeId) -> Option<NodeId> {
        self.node(id).parent
    }

    /// Pre-order traversal of the subtree rooted at `id`, including `id`.
    pub fn descendants(&self, id: NodeId) -> Vec<NodeId> {
        let mut out = Vec::new();
        let mut stack = vec![id];
        while let Some(n) = stack.pop() {
            out.push(n);
            stack.extend(self.node(n).children.iter().rev().copied());
        }
        out
    }

    /// Nodes of the subtree under statement node `stmt_node` that belong
    /// to that statement, i.e. excluding nested statements' expressions.
    pub fn own_nodes(&self, stmt_node: NodeId) -> Vec<NodeId> {
        let owner = self.node(stmt_node).stmt;
        let mut out = Vec::new();
        let mut stack = vec![stmt_node];
        while let Some(n) = stack.pop() {
            if self.node(n).stmt != owner {
                continue;
            }
            out.push(n);
            stack.extend(self.node(n).children.iter().rev().copied());
        }
        out
    }

    pub fn ancestors(&self, id: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        std::iter::successors(self.parent(id), move |&p| self.parent(p))
    }

    pub fn to_json(&self, id: NodeId) -> Value {
        let n = self.node(id);
        let children: Vec<Value> = n.children.iter().map(|&c| self.to_json(c)).collect();
        let mut v = json!({
            "kind": n.kind.as_str(),
            "text": n.text,
            "span": [n.span.start, n.span.end],
            "children": children,
        });
        if let Some(stmt) = n.stmt {
            v["stmt"] = json!(stmt.0);
        }
        v
    }
}

/// A graph-level statement: one node of the CFG/PDG.
#[derive(Debug, Clone, PartialEq)]
pub struct Statement {
    pub id: StmtId,
    pub kind: AstKind,
    pub node: NodeId,
    /// Lines covered by the statement's own tokens. For compound
    /// constructs this is the header only (`if (...)`, `while (...)`).
    pub span: Span,
    pub tokens: Vec<Token>,
}

impl Statement {
    pub fn text(&self) -> String {
        self.tokens.iter().map(|t| t.text.as_str()).collect::<Vec<_>>().join(" ")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Function {
    pub name: String,
    pub node: NodeId,
    pub statements: Vec<Statement>,
}

impl Function {
    pub fn statement(&self, id: StmtId) -> Option<&Statement> {
        self.statements.get(id.0 as usize)
    }

    pub fn parameters(&self) -> impl Iterator<Item = &Statement> {
        self.statements.iter().filter(|s| s.kind == AstKind::Parameter)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SourceUnit {
    pub path: String,
    pub ast: Ast,
    pub functions: Vec<Function>,
    pub raw_lines: Vec<String>,
}

impl SourceUnit {
    pub fn function(&self, name: &str) -> Option<&Function> {
        self.functions.iter().find(|f| f.name == name)
    }

    pub fn function_index(&self, name: &str) -> Option<usize> {
        self.functions.iter().position(|f| f.name == name)
    }
}
