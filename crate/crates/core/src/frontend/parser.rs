//! Recursive-descent parser for the C subset.
//!
//! Supported: function definitions and prototypes, global and local
//! scalar/pointer/array declarations, expression statements, `if`/`else`,
//! `while`, `for`, `return`, compound statements. Casts parse as no-ops
//! around their operand. `sizeof(type)` becomes a literal.

use super::ast::{Ast, AstKind, Declarator, Function, NodeId, SourceUnit, Span, Statement, StmtId};
use super::lexer::{Token, TokenKind};
use super::FrontendError;

/// Identifiers accepted as type names without a declaration in scope.
pub const BUILTIN_TYPE_NAMES: &[&str] = &[
    "size_t", "ssize_t", "ptrdiff_t", "intptr_t", "uintptr_t", "off_t", "FILE", "bool", "int8_t",
    "int16_t", "int32_t", "int64_t", "uint8_t", "uint16_t", "uint32_t", "uint64_t", "wchar_t",
];

const TYPE_KEYWORDS: &[&str] = &[
    "void", "char", "short", "int", "long", "float", "double", "signed", "unsigned", "const",
    "static", "extern", "volatile", "register", "inline", "auto", "restrict", "struct", "union",
    "enum",
];

const UNSUPPORTED: &[&str] = &["switch", "goto", "do", "break", "continue", "case", "default", "typedef"];

const ASSIGN_OPS: &[&str] = &["=", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "<<=", ">>="];

/// Binary operator precedence levels, loosest first.
const BINARY_LEVELS: &[&[&str]] = &[
    &["||"],
    &["&&"],
    &["|"],
    &["^"],
    &["&"],
    &["==", "!="],
    &["<", ">", "<=", ">="],
    &["<<", ">>"],
    &["+", "-"],
    &["*", "/", "%"],
];

/// Parses a token stream into a unit with an empty path.
pub fn parse(tokens: &[Token]) -> Result<SourceUnit, FrontendError> {
    Parser::new(tokens).translation_unit()
}

struct Parser<'t> {
    tokens: &'t [Token],
    pos: usize,
    ast: Ast,
    functions: Vec<Function>,
    /// statements of the function currently being parsed
    statements: Vec<Statement>,
    current_stmt: Option<StmtId>,
}

impl<'t> Parser<'t> {
    fn new(tokens: &'t [Token]) -> Self {
        Parser { tokens, pos: 0, ast: Ast::default(), functions: Vec::new(), statements: Vec::new(), current_stmt: None }
    }

    // ---- token helpers ----

    fn peek(&self) -> Option<&'t Token> {
        self.tokens.get(self.pos)
    }

    fn peek_at(&self, ahead: usize) -> Option<&'t Token> {
        self.tokens.get(self.pos + ahead)
    }

    fn at(&self, text: &str) -> bool {
        self.peek().is_some_and(|t| t.is(text))
    }

    fn at_kind(&self, kind: TokenKind) -> bool {
        self.peek().is_some_and(|t| t.kind == kind)
    }

    fn bump(&mut self) -> Result<&'t Token, FrontendError> {
        let tok = self.tokens.get(self.pos).ok_or_else(|| self.error("a token"))?;
        self.pos += 1;
        Ok(tok)
    }

    fn eat(&mut self, text: &str) -> bool {
        if self.at(text) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, text: &str) -> Result<&'t Token, FrontendError> {
        if self.at(text) {
            self.bump()
        } else {
            Err(self.error(&format!("`{text}`")))
        }
    }

    fn expect_identifier(&mut self) -> Result<&'t Token, FrontendError> {
        if self.at_kind(TokenKind::Identifier) {
            self.bump()
        } else {
            Err(self.error("an identifier"))
        }
    }

    fn error(&self, expected: &str) -> FrontendError {
        match self.peek() {
            Some(t) => FrontendError::Parse {
                line: t.line,
                column: t.column,
                found: t.text.clone(),
                expected: expected.to_string(),
            },
            None => {
                let (line, column) = self.tokens.last().map_or((1, 1), |t| (t.line, t.column + t.text.len() as u32));
                FrontendError::Parse { line, column, found: "end of input".into(), expected: expected.to_string() }
            }
        }
    }

    fn last_line(&self) -> u32 {
        self.tokens[self.pos.saturating_sub(1)].line
    }

    fn line_of(&self, pos: usize) -> u32 {
        self.tokens.get(pos).or(self.tokens.last()).map_or(1, |t| t.line)
    }

    fn node(&mut self, kind: AstKind, text: impl Into<String>, start: u32) -> NodeId {
        let end = self.last_line().max(start);
        let id = self.ast.push(kind, text, Span::new(start, end));
        self.ast.node_mut(id).stmt = self.current_stmt;
        id
    }

    fn finish(&mut self, id: NodeId) {
        let end = self.last_line();
        let span = &mut self.ast.node_mut(id).span;
        span.end = span.end.max(end);
    }

    /// Opens a new graph statement; the node is created by the caller.
    fn open_statement(&mut self, kind: AstKind, start_pos: usize) -> StmtId {
        let id = StmtId(self.statements.len() as u32);
        self.statements.push(Statement {
            id,
            kind,
            node: NodeId(u32::MAX),
            span: Span::new(self.line_of(start_pos), self.line_of(start_pos)),
            tokens: Vec::new(),
        });
        id
    }

    fn close_statement(&mut self, id: StmtId, node: NodeId, tokens: std::ops::Range<usize>) {
        let toks = self.tokens[tokens].to_vec();
        let stmt = &mut self.statements[id.0 as usize];
        stmt.node = node;
        if let (Some(first), Some(last)) = (toks.first(), toks.last()) {
            stmt.span = Span::new(first.line, last.line);
        }
        stmt.tokens = toks;
    }

    // ---- types ----

    fn is_type_start(&self, at: usize) -> bool {
        let Some(tok) = self.peek_at(at) else { return false };
        match tok.kind {
            TokenKind::Keyword => TYPE_KEYWORDS.contains(&tok.text.as_str()),
            TokenKind::Identifier => BUILTIN_TYPE_NAMES.contains(&tok.text.as_str()),
            _ => false,
        }
    }

    /// Declaration heuristics for statement position.
    fn looks_like_declaration(&self) -> bool {
        if self.is_type_start(0) {
            return true;
        }
        let is_ident = |i: usize| self.peek_at(i).is_some_and(|t| t.kind == TokenKind::Identifier);
        if !is_ident(0) {
            return false;
        }
        if is_ident(1) {
            return true;
        }
        // `T *p = ...;`, `T **p;` etc.
        let mut i = 1;
        while self.peek_at(i).is_some_and(|t| t.is("*")) {
            i += 1;
        }
        i > 1 && is_ident(i) && self.peek_at(i + 1).is_some_and(|t| t.is("=") || t.is(";") || t.is(",") || t.is("["))
    }

    /// Consumes declaration specifiers and returns their text.
    fn type_specifiers(&mut self) -> Result<String, FrontendError> {
        let mut parts: Vec<String> = Vec::new();
        loop {
            let Some(tok) = self.peek() else { break };
            if tok.kind == TokenKind::Keyword && UNSUPPORTED.contains(&tok.text.as_str()) {
                return Err(self.error("a supported declaration"));
            }
            if tok.kind == TokenKind::Keyword && TYPE_KEYWORDS.contains(&tok.text.as_str()) {
                let is_tag = matches!(tok.text.as_str(), "struct" | "union" | "enum");
                parts.push(tok.text.clone());
                self.pos += 1;
                if is_tag {
                    parts.push(self.expect_identifier()?.text.clone());
                    if self.at("{") {
                        return Err(self.error("a declaration (aggregate definitions are not supported)"));
                    }
                }
                continue;
            }
            // plain identifier type names are only taken when nothing else has been
            if tok.kind == TokenKind::Identifier && parts.iter().all(|p| p == "const" || p == "static" || p == "extern") {
                let next_is_name = self
                    .peek_at(1)
                    .is_some_and(|n| n.kind == TokenKind::Identifier || n.is("*"));
                if BUILTIN_TYPE_NAMES.contains(&tok.text.as_str()) || next_is_name {
                    parts.push(tok.text.clone());
                    self.pos += 1;
                    continue;
                }
            }
            break;
        }
        if parts.is_empty() {
            return Err(self.error("a type"));
        }
        Ok(parts.join(" "))
    }

    fn pointer_depth(&mut self) -> u8 {
        let mut depth = 0u8;
        loop {
            if self.eat("*") {
                depth = depth.saturating_add(1);
            } else if self.eat("const") || self.eat("restrict") || self.eat("volatile") {
            } else {
                return depth;
            }
        }
    }

    // ---- translation unit ----

    fn translation_unit(mut self) -> Result<SourceUnit, FrontendError> {
        let root = self.ast.push(AstKind::TranslationUnit, "", Span::new(1, 1));
        while self.peek().is_some() {
            if self.eat(";") {
                continue;
            }
            if let Some(node) = self.external_declaration()? {
                self.ast.attach(root, node);
            }
        }
        let end = self.tokens.last().map_or(1, |t| t.line);
        let start = self.tokens.first().map_or(1, |t| t.line);
        self.ast.node_mut(root).span = Span::new(start, end);
        Ok(SourceUnit { path: String::new(), ast: self.ast, functions: self.functions, raw_lines: Vec::new() })
    }

    /// Returns the node to attach to the root, or `None` for prototypes.
    fn external_declaration(&mut self) -> Result<Option<NodeId>, FrontendError> {
        let start_pos = self.pos;
        let start = self.line_of(start_pos);
        let ty = self.type_specifiers()?;
        let save = self.pos;
        let depth = self.pointer_depth();
        let is_function = self.at_kind(TokenKind::Identifier) && self.peek_at(1).is_some_and(|t| t.is("("));
        if !is_function {
            self.pos = save;
            let decl = self.ast.push(AstKind::DeclStatement, ty, Span::new(start, start));
            self.declarators(decl)?;
            self.expect(";")?;
            self.finish(decl);
            return Ok(Some(decl));
        }
        let name = self.expect_identifier()?.text.clone();
        let ret_ty = if depth > 0 { format!("{ty} {}", "*".repeat(depth as usize)) } else { ty };

        self.statements.clear();
        let def_stmt = self.open_statement(AstKind::FunctionDef, start_pos);
        self.current_stmt = Some(def_stmt);
        let def = self.node(AstKind::FunctionDef, name.clone(), start);
        let _ = ret_ty;
        self.expect("(")?;
        self.parameters(def)?;
        self.expect(")")?;
        let header_end = self.pos;
        self.close_statement(def_stmt, def, start_pos..header_end);

        if self.eat(";") {
            // prototype: discard
            self.current_stmt = None;
            self.statements.clear();
            return Ok(None);
        }
        if self.functions.iter().any(|f| f.name == name) {
            return Err(FrontendError::Parse {
                line: start,
                column: self.tokens[start_pos].column,
                found: name,
                expected: "a function name not already defined in this unit".into(),
            });
        }
        self.current_stmt = None;
        let body = self.compound_statement()?;
        self.ast.attach(def, body);
        self.finish(def);
        self.functions.push(Function { name, node: def, statements: std::mem::take(&mut self.statements) });
        Ok(Some(def))
    }

    fn parameters(&mut self, def: NodeId) -> Result<(), FrontendError> {
        if self.at(")") {
            return Ok(());
        }
        if self.at("void") && self.peek_at(1).is_some_and(|t| t.is(")")) {
            self.pos += 1;
            return Ok(());
        }
        loop {
            if self.eat("...") {
                break;
            }
            let start_pos = self.pos;
            let stmt = self.open_statement(AstKind::Parameter, start_pos);
            self.current_stmt = Some(stmt);
            let start = self.line_of(start_pos);
            let ty = self.type_specifiers()?;
            let param = self.node(AstKind::Parameter, ty, start);
            let depth = self.pointer_depth();
            if self.at_kind(TokenKind::Identifier) {
                let tok = self.bump()?;
                let ident = self.node(AstKind::Identifier, tok.text.clone(), tok.line);
                let mut declarator = if depth > 0 { Declarator::Pointer(depth) } else { Declarator::Scalar };
                while self.eat("[") {
                    while !self.at("]") {
                        self.bump()?;
                    }
                    self.expect("]")?;
                    declarator = Declarator::Array;
                }
                self.ast.node_mut(ident).declarator = Some(declarator);
                self.ast.attach(param, ident);
            }
            self.finish(param);
            self.ast.attach(def, param);
            self.close_statement(stmt, param, start_pos..self.pos);
            self.current_stmt = Some(StmtId(0));
            if !self.eat(",") {
                break;
            }
        }
        Ok(())
    }

    /// Parses `declarator (= init)? (, declarator (= init)?)*` into `decl`.
    fn declarators(&mut self, decl: NodeId) -> Result<(), FrontendError> {
        loop {
            let depth = self.pointer_depth();
            let tok = self.expect_identifier()?;
            let ident = self.node(AstKind::Identifier, tok.text.clone(), tok.line);
            self.ast.attach(decl, ident);
            let mut declarator = if depth > 0 { Declarator::Pointer(depth) } else { Declarator::Scalar };
            while self.eat("[") {
                declarator = Declarator::Array;
                if !self.at("]") {
                    let size = self.expression()?;
                    self.ast.attach(decl, size);
                }
                self.expect("]")?;
            }
            self.ast.node_mut(ident).declarator = Some(declarator);
            if self.eat("=") {
                if self.at("{") {
                    self.initializer_list(decl)?;
                } else {
                    let init = self.assignment()?;
                    self.ast.attach(decl, init);
                }
            }
            if !self.eat(",") {
                return Ok(());
            }
        }
    }

    fn initializer_list(&mut self, decl: NodeId) -> Result<(), FrontendError> {
        self.expect("{")?;
        while !self.at("}") {
            if self.at("{") {
                self.initializer_list(decl)?;
            } else {
                let e = self.assignment()?;
                self.ast.attach(decl, e);
            }
            if !self.eat(",") {
                break;
            }
        }
        self.expect("}")?;
        Ok(())
    }

    // ---- statements ----

    fn compound_statement(&mut self) -> Result<NodeId, FrontendError> {
        let start = self.line_of(self.pos);
        self.expect("{")?;
        let saved = self.current_stmt.take();
        let block = self.node(AstKind::CompoundStatement, "", start);
        while !self.at("}") {
            if self.peek().is_none() {
                return Err(self.error("`}`"));
            }
            let s = self.statement()?;
            self.ast.attach(block, s);
        }
        self.expect("}")?;
        self.finish(block);
        self.current_stmt = saved;
        Ok(block)
    }

    fn statement(&mut self) -> Result<NodeId, FrontendError> {
        let Some(tok) = self.peek() else { return Err(self.error("a statement")) };
        if tok.kind == TokenKind::Keyword && UNSUPPORTED.contains(&tok.text.as_str()) {
            return Err(self.error("a statement of the supported subset"));
        }
        match tok.text.as_str() {
            "{" if tok.kind == TokenKind::Punctuation => self.compound_statement(),
            "if" if tok.kind == TokenKind::Keyword => self.if_statement(),
            "while" if tok.kind == TokenKind::Keyword => self.while_statement(),
            "for" if tok.kind == TokenKind::Keyword => self.for_statement(),
            "return" if tok.kind == TokenKind::Keyword => self.return_statement(),
            _ => self.simple_statement(true),
        }
    }

    /// Declaration or expression statement. With `terminated`, consumes the
    /// trailing `;` as part of the statement.
    fn simple_statement(&mut self, terminated: bool) -> Result<NodeId, FrontendError> {
        let start_pos = self.pos;
        let start = self.line_of(start_pos);
        let saved = self.current_stmt;
        let node = if self.looks_like_declaration() {
            let stmt = self.open_statement(AstKind::DeclStatement, start_pos);
            self.current_stmt = Some(stmt);
            let ty = self.type_specifiers()?;
            let decl = self.node(AstKind::DeclStatement, ty, start);
            self.declarators(decl)?;
            if terminated {
                self.expect(";")?;
            }
            self.finish(decl);
            self.close_statement(stmt, decl, start_pos..self.pos);
            decl
        } else {
            let stmt = self.open_statement(AstKind::ExpressionStatement, start_pos);
            self.current_stmt = Some(stmt);
            let node = self.node(AstKind::ExpressionStatement, "", start);
            let terminator = if terminated { ";" } else { ")" };
            if !self.at(terminator) && !(terminated && self.at(";")) {
                let e = self.expression()?;
                self.ast.attach(node, e);
            }
            if terminated {
                self.expect(";")?;
            }
            self.finish(node);
            self.close_statement(stmt, node, start_pos..self.pos);
            node
        };
        self.current_stmt = saved;
        Ok(node)
    }

    fn if_statement(&mut self) -> Result<NodeId, FrontendError> {
        let start_pos = self.pos;
        let start = self.line_of(start_pos);
        let saved = self.current_stmt;
        let stmt = self.open_statement(AstKind::IfStatement, start_pos);
        self.current_stmt = Some(stmt);
        self.expect("if")?;
        let node = self.node(AstKind::IfStatement, "if", start);
        self.expect("(")?;
        let cond = self.expression()?;
        self.ast.attach(node, cond);
        self.expect(")")?;
        self.close_statement(stmt, node, start_pos..self.pos);
        let then = self.statement()?;
        self.ast.attach(node, then);
        if self.eat("else") {
            let otherwise = self.statement()?;
            self.ast.attach(node, otherwise);
        }
        self.finish(node);
        self.current_stmt = saved;
        Ok(node)
    }

    fn while_statement(&mut self) -> Result<NodeId, FrontendError> {
        let start_pos = self.pos;
        let start = self.line_of(start_pos);
        let saved = self.current_stmt;
        let stmt = self.open_statement(AstKind::WhileStatement, start_pos);
        self.current_stmt = Some(stmt);
        self.expect("while")?;
        let node = self.node(AstKind::WhileStatement, "while", start);
        self.expect("(")?;
        let cond = self.expression()?;
        self.ast.attach(node, cond);
        self.expect(")")?;
        self.close_statement(stmt, node, start_pos..self.pos);
        let body = self.statement()?;
        self.ast.attach(node, body);
        self.finish(node);
        self.current_stmt = saved;
        Ok(node)
    }

    /// Children are always `[init, condition, step, body]`; an absent
    /// condition is the literal `1`.
    fn for_statement(&mut self) -> Result<NodeId, FrontendError> {
        let start_pos = self.pos;
        let start = self.line_of(start_pos);
        let saved = self.current_stmt;
        let stmt = self.open_statement(AstKind::ForStatement, start_pos);
        self.current_stmt = Some(stmt);
        self.expect("for")?;
        let node = self.node(AstKind::ForStatement, "for", start);
        self.expect("(")?;
        let init = self.simple_statement(true)?;
        self.ast.attach(node, init);
        let cond = if self.at(";") {
            let line = self.line_of(self.pos);
            self.node(AstKind::Literal, "1", line)
        } else {
            self.expression()?
        };
        self.ast.attach(node, cond);
        self.expect(";")?;
        let step = self.simple_statement(false)?;
        self.ast.attach(node, step);
        self.expect(")")?;
        self.close_statement(stmt, node, start_pos..self.pos);
        let body = self.statement()?;
        self.ast.attach(node, body);
        self.finish(node);
        self.current_stmt = saved;
        Ok(node)
    }

    fn return_statement(&mut self) -> Result<NodeId, FrontendError> {
        let start_pos = self.pos;
        let start = self.line_of(start_pos);
        let saved = self.current_stmt;
        let stmt = self.open_statement(AstKind::ReturnStatement, start_pos);
        self.current_stmt = Some(stmt);
        self.expect("return")?;
        let node = self.node(AstKind::ReturnStatement, "return", start);
        if !self.at(";") {
            let e = self.expression()?;
            self.ast.attach(node, e);
        }
        self.expect(";")?;
        self.finish(node);
        self.close_statement(stmt, node, start_pos..self.pos);
        self.current_stmt = saved;
        Ok(node)
    }

    // ---- expressions ----

    fn expression(&mut self) -> Result<NodeId, FrontendError> {
        let first = self.assignment()?;
        if !self.at(",") {
            return Ok(first);
        }
        // comma operator: left-nested BinaryExpression(",")
        let mut lhs = first;
        while self.eat(",") {
            let rhs = self.assignment()?;
            lhs = self.binary(",", lhs, rhs);
        }
        Ok(lhs)
    }

    fn binary(&mut self, op: &str, lhs: NodeId, rhs: NodeId) -> NodeId {
        let start = self.ast.node(lhs).span.start;
        let node = self.node(AstKind::BinaryExpression, op, start);
        self.ast.attach(node, lhs);
        self.ast.attach(node, rhs);
        self.finish(node);
        node
    }

    fn assignment(&mut self) -> Result<NodeId, FrontendError> {
        let lhs = self.binary_level(0)?;
        if let Some(op) = self.peek().filter(|t| t.kind == TokenKind::Operator && ASSIGN_OPS.contains(&t.text.as_str())) {
            self.pos += 1;
            let rhs = self.assignment()?;
            return Ok(self.binary(&op.text, lhs, rhs));
        }
        if self.at("?") {
            return Err(self.error("an operator of the supported subset (no `?:`)"));
        }
        Ok(lhs)
    }

    fn binary_level(&mut self, level: usize) -> Result<NodeId, FrontendError> {
        if level == BINARY_LEVELS.len() {
            return self.unary();
        }
        let mut lhs = self.binary_level(level + 1)?;
        while let Some(op) = self
            .peek()
            .filter(|t| t.kind == TokenKind::Operator && BINARY_LEVELS[level].contains(&t.text.as_str()))
        {
            self.pos += 1;
            let rhs = self.binary_level(level + 1)?;
            lhs = self.binary(&op.text, lhs, rhs);
        }
        Ok(lhs)
    }

    fn is_cast(&self) -> bool {
        self.at("(") && self.is_type_start(1) && {
            let mut i = 2;
            while self.peek_at(i).is_some_and(|t| t.kind != TokenKind::Punctuation || t.is("*")) {
                i += 1;
            }
            self.peek_at(i).is_some_and(|t| t.is(")"))
        }
    }

    fn unary(&mut self) -> Result<NodeId, FrontendError> {
        let Some(tok) = self.peek() else { return Err(self.error("an expression")) };
        if tok.kind == TokenKind::Operator && matches!(tok.text.as_str(), "-" | "+" | "!" | "~" | "*" | "&" | "++" | "--") {
            self.pos += 1;
            let operand = self.unary()?;
            let node = self.node(AstKind::UnaryExpression, tok.text.clone(), tok.line);
            self.ast.attach(node, operand);
            self.finish(node);
            return Ok(node);
        }
        if tok.is("sizeof") {
            self.pos += 1;
            if self.at("(") && self.is_type_start(1) {
                let start_pos = self.pos;
                let mut depth = 0usize;
                loop {
                    let t = self.bump()?;
                    if t.is("(") {
                        depth += 1;
                    } else if t.is(")") {
                        depth -= 1;
                        if depth == 0 {
                            break;
                        }
                    }
                }
                let text = std::iter::once("sizeof")
                    .chain(self.tokens[start_pos..self.pos].iter().map(|t| t.text.as_str()))
                    .collect::<Vec<_>>()
                    .join(" ");
                return Ok(self.node(AstKind::Literal, text, tok.line));
            }
            let operand = self.unary()?;
            let node = self.node(AstKind::UnaryExpression, "sizeof", tok.line);
            self.ast.attach(node, operand);
            self.finish(node);
            return Ok(node);
        }
        if self.is_cast() {
            self.pos += 1;
            while !self.at(")") {
                self.bump()?;
            }
            self.expect(")")?;
            return self.unary();
        }
        self.postfix()
    }

    fn postfix(&mut self) -> Result<NodeId, FrontendError> {
        let mut expr = self.primary()?;
        loop {
            let start = self.ast.node(expr).span.start;
            if self.at("(") {
                let callee = self.ast.node(expr);
                if callee.kind != AstKind::Identifier {
                    return Err(self.error("a call through a plain function name"));
                }
                let name = callee.text.clone();
                // the callee identifier node is replaced by the call node
                self.ast.node_mut(expr).kind = AstKind::CallExpression;
                self.ast.node_mut(expr).text = name;
                self.pos += 1;
                while !self.at(")") {
                    let arg = self.assignment()?;
                    self.ast.attach(expr, arg);
                    if !self.eat(",") {
                        break;
                    }
                }
                self.expect(")")?;
                self.finish(expr);
            } else if self.eat("[") {
                let index = self.expression()?;
                self.expect("]")?;
                let node = self.node(AstKind::ArraySubscript, "[]", start);
                self.ast.attach(node, expr);
                self.ast.attach(node, index);
                self.finish(node);
                expr = node;
            } else if self.at(".") || self.at("->") {
                let op = self.bump()?.text.clone();
                let field = self.expect_identifier()?.text.clone();
                let node = self.node(AstKind::MemberAccess, format!("{op}{field}"), start);
                self.ast.attach(node, expr);
                self.finish(node);
                expr = node;
            } else if self.at("++") || self.at("--") {
                let op = self.bump()?.text.clone();
                let node = self.node(AstKind::UnaryExpression, format!("post{op}"), start);
                self.ast.attach(node, expr);
                self.finish(node);
                expr = node;
            } else {
                return Ok(expr);
            }
        }
    }

    fn primary(&mut self) -> Result<NodeId, FrontendError> {
        let Some(tok) = self.peek() else { return Err(self.error("an expression")) };
        match tok.kind {
            TokenKind::Identifier => {
                self.pos += 1;
                Ok(self.node(AstKind::Identifier, tok.text.clone(), tok.line))
            }
            TokenKind::Number | TokenKind::CharLiteral => {
                self.pos += 1;
                Ok(self.node(AstKind::Literal, tok.text.clone(), tok.line))
            }
            TokenKind::StringLiteral => {
                self.pos += 1;
                let mut text = tok.text.clone();
                while self.at_kind(TokenKind::StringLiteral) {
                    text.push(' ');
                    text.push_str(&self.bump()?.text);
                }
                Ok(self.node(AstKind::Literal, text, tok.line))
            }
            _ if tok.is("(") => {
                self.pos += 1;
                let e = self.expression()?;
                self.expect(")")?;
                self.finish(e);
                Ok(e)
            }
            _ => Err(self.error("an expression")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::tokenize;

    fn parse_src(src: &str) -> SourceUnit {
        parse(&tokenize(src).unwrap()).unwrap()
    }

    fn kinds_under(unit: &SourceUnit, id: NodeId) -> Vec<AstKind> {
        unit.ast.descendants(id).into_iter().map(|n| unit.ast.node(n).kind).collect()
    }

    #[test]
    fn smallest_function() {
        let unit = parse_src("void f(){}");
        let root = unit.ast.node(Ast::ROOT);
        assert_eq!(root.kind, AstKind::TranslationUnit);
        assert_eq!(root.children.len(), 1);
        let def = unit.ast.node(root.children[0]);
        assert_eq!((def.kind, def.text.as_str()), (AstKind::FunctionDef, "f"));
        assert_eq!(def.children.len(), 1);
        let body = unit.ast.node(def.children[0]);
        assert_eq!(body.kind, AstKind::CompoundStatement);
        assert!(body.children.is_empty());
        assert_eq!(unit.functions[0].statements.len(), 1);
    }

    #[test]
    fn parameter_and_return_shape() {
        let unit = parse_src("int g(int size){ return size; }");
        let f = &unit.functions[0];
        let def = unit.ast.node(f.node);
        let param = unit.ast.node(def.children[0]);
        assert_eq!(param.kind, AstKind::Parameter);
        let ident = unit.ast.node(param.children[0]);
        assert_eq!((ident.kind, ident.text.as_str()), (AstKind::Identifier, "size"));
        let body = unit.ast.node(def.children[1]);
        let ret = body.children[0];
        assert_eq!(
            kinds_under(&unit, ret),
            vec![AstKind::ReturnStatement, AstKind::Identifier]
        );
        let kinds: Vec<_> = f.statements.iter().map(|s| s.kind).collect();
        assert_eq!(kinds, [AstKind::FunctionDef, AstKind::Parameter, AstKind::ReturnStatement]);
    }

    #[test]
    fn truncated_input_fails_at_end() {
        let err = parse(&tokenize("int g(").unwrap()).unwrap_err();
        match err {
            FrontendError::Parse { found, .. } => assert_eq!(found, "end of input"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unsupported_switch_is_rejected() {
        let err = parse(&tokenize("void f(int a){ switch(a){} }").unwrap()).unwrap_err();
        assert!(matches!(err, FrontendError::Parse { ref found, .. } if found == "switch"));
    }

    #[test]
    fn statement_ids_dense_in_source_order() {
        let src = "int f(int a, int b)\n{\n int i;\n for (i = 0; i < a; i++)\n  b = b + i;\n if (b > 3) return b;\n else { a = 1; }\n while (a) a--;\n return a;\n}\n";
        let unit = parse_src(src);
        let f = &unit.functions[0];
        for (i, s) in f.statements.iter().enumerate() {
            assert_eq!(s.id.0 as usize, i);
        }
        let starts: Vec<_> = f.statements.iter().map(|s| (s.tokens[0].line, s.tokens[0].column)).collect();
        let mut sorted = starts.clone();
        sorted.sort();
        assert_eq!(starts, sorted);
        let kinds: Vec<_> = f.statements.iter().map(|s| s.kind).collect();
        use AstKind::*;
        assert_eq!(
            kinds,
            [
                FunctionDef, Parameter, Parameter, DeclStatement, ForStatement, ExpressionStatement,
                ExpressionStatement, ExpressionStatement, IfStatement, ReturnStatement,
                ExpressionStatement, WhileStatement, ExpressionStatement, ReturnStatement
            ]
        );
    }

    #[test]
    fn casts_are_transparent_and_prototypes_skipped() {
        let unit = parse_src("void *m(size_t n);\nint f(unsigned int n){ char *p; p = (char *) m(n); return (int) n; }");
        assert_eq!(unit.functions.len(), 1);
        let f = &unit.functions[0];
        let assign = f.statements[3].node;
        let kinds = kinds_under(&unit, assign);
        assert_eq!(
            kinds,
            [AstKind::ExpressionStatement, AstKind::BinaryExpression, AstKind::Identifier, AstKind::CallExpression, AstKind::Identifier]
        );
    }

    #[test]
    fn spans_nest() {
        let unit = parse_src("int f(int a)\n{\n if (a)\n {\n  a = a * 2;\n }\n return a;\n}\n");
        for (id, node) in unit.ast.iter() {
            if let Some(p) = node.parent {
                assert!(unit.ast.node(p).span.contains(&node.span), "{id:?}");
            }
            if node.kind == AstKind::Identifier {
                assert!(node.children.is_empty());
            }
        }
    }

    #[test]
    fn precedence() {
        let unit = parse_src("int f(int a, int b){ return a + b * 2 < 7 && b; }");
        let ret = unit.functions[0].statements[3].node;
        let ops: Vec<_> = unit
            .ast
            .descendants(ret)
            .into_iter()
            .filter(|&n| unit.ast.node(n).kind == AstKind::BinaryExpression)
            .map(|n| unit.ast.node(n).text.clone())
            .collect();
        assert_eq!(ops, ["&&", "<", "+", "*"]);
    }

    #[test]
    fn duplicate_function_rejected() {
        assert!(parse(&tokenize("void f(){} void f(){}").unwrap()).is_err());
    }
}
