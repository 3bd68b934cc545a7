//! Tokenizer for the supported C subset.
//!
//! Comments and preprocessor lines (including backslash continuations) are
//! dropped. Token grammar:
//!
//! | kind            | shape                                                    |
//! |-----------------|----------------------------------------------------------|
//! | identifier      | `[A-Za-z_][A-Za-z0-9_]*` not in [`KEYWORDS`]              |
//! | keyword         | member of [`KEYWORDS`]                                   |
//! | number          | `[0-9]` or `.[0-9]` followed by `[A-Za-z0-9_.]` (plus exponent sign) |
//! | string-literal  | `"` ... `"` with `\` escapes, single line                |
//! | char-literal    | `'` ... `'` with `\` escapes, single line                |
//! | operator        | longest match from [`OPERATORS`]                         |
//! | punctuation     | one of `( ) { } [ ] ; ,`                                 |

use serde::Serialize;

use super::FrontendError;

pub const KEYWORDS: &[&str] = &[
    "auto", "break", "case", "char", "const", "continue", "default", "do", "double", "else",
    "enum", "extern", "float", "for", "goto", "if", "inline", "int", "long", "register",
    "restrict", "return", "short", "signed", "sizeof", "static", "struct", "switch", "typedef",
    "union", "unsigned", "void", "volatile", "while",
];

/// Longest operators first so greedy matching works.
pub const OPERATORS: &[&str] = &[
    "<<=", ">>=", "...", "->", "++", "--", "<<", ">>", "<=", ">=", "==", "!=", "&&", "||", "+=",
    "-=", "*=", "/=", "%=", "&=", "|=", "^=", "+", "-", "*", "/", "%", "<", ">", "=", "!", "&",
    "|", "^", "~", "?", ":", ".",
];

const PUNCTUATION: &[char] = &['(', ')', '{', '}', '[', ']', ';', ','];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TokenKind {
    Identifier,
    Keyword,
    Number,
    StringLiteral,
    CharLiteral,
    Operator,
    Punctuation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Token {
    pub text: String,
    pub kind: TokenKind,
    pub line: u32,
    pub column: u32,
}

impl Token {
    pub fn is(&self, text: &str) -> bool {
        self.text == text && matches!(self.kind, TokenKind::Operator | TokenKind::Punctuation | TokenKind::Keyword)
    }
}

struct Cursor {
    chars: Vec<char>,
    pos: usize,
    line: u32,
    column: u32,
}

impl Cursor {
    fn new(src: &str) -> Self {
        Cursor { chars: src.chars().collect(), pos: 0, line: 1, column: 1 }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn peek_at(&self, ahead: usize) -> Option<char> {
        self.chars.get(self.pos + ahead).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.get(self.pos).copied()?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn starts_with(&self, s: &str) -> bool {
        s.chars().enumerate().all(|(i, c)| self.peek_at(i) == Some(c))
    }
}

/// Splits `source` into tokens.
pub fn tokenize(source: &str) -> Result<Vec<Token>, FrontendError> {
    let mut cur = Cursor::new(source);
    let mut tokens = Vec::new();
    // true while only whitespace has been seen on the current line
    let mut line_start = true;

    while let Some(c) = cur.peek() {
        if c == '\n' {
            cur.bump();
            line_start = true;
            continue;
        }
        if c.is_whitespace() {
            cur.bump();
            continue;
        }
        if line_start && c == '#' {
            skip_preprocessor_line(&mut cur);
            continue;
        }
        line_start = false;

        if cur.starts_with("//") {
            while let Some(c) = cur.peek() {
                if c == '\n' {
                    break;
                }
                cur.bump();
            }
            continue;
        }
        if cur.starts_with("/*") {
            let (line, column) = (cur.line, cur.column);
            cur.bump();
            cur.bump();
            loop {
                if cur.starts_with("*/") {
                    cur.bump();
                    cur.bump();
                    break;
                }
                if cur.bump().is_none() {
                    return Err(FrontendError::Lex { line, column, message: "unterminated comment".into() });
                }
            }
            continue;
        }

        let (line, column) = (cur.line, cur.column);
        let token = if c.is_ascii_alphabetic() || c == '_' {
            let text = take_while(&mut cur, |c| c.is_ascii_alphanumeric() || c == '_');
            let kind = if KEYWORDS.contains(&text.as_str()) { TokenKind::Keyword } else { TokenKind::Identifier };
            Token { text, kind, line, column }
        } else if c.is_ascii_digit() || (c == '.' && cur.peek_at(1).is_some_and(|d| d.is_ascii_digit())) {
            Token { text: lex_number(&mut cur), kind: TokenKind::Number, line, column }
        } else if c == '"' || c == '\'' {
            let text = lex_quoted(&mut cur, c)?;
            let kind = if c == '"' { TokenKind::StringLiteral } else { TokenKind::CharLiteral };
            Token { text, kind, line, column }
        } else if PUNCTUATION.contains(&c) {
            cur.bump();
            Token { text: c.to_string(), kind: TokenKind::Punctuation, line, column }
        } else if let Some(op) = OPERATORS.iter().find(|op| cur.starts_with(op)) {
            for _ in 0..op.len() {
                cur.bump();
            }
            Token { text: (*op).to_string(), kind: TokenKind::Operator, line, column }
        } else {
            return Err(FrontendError::Lex { line, column, message: format!("unexpected character {c:?}") });
        };
        tokens.push(token);
    }
    Ok(tokens)
}

fn take_while(cur: &mut Cursor, pred: impl Fn(char) -> bool) -> String {
    let mut text = String::new();
    while let Some(c) = cur.peek() {
        if !pred(c) {
            break;
        }
        text.push(c);
        cur.bump();
    }
    text
}

fn lex_number(cur: &mut Cursor) -> String {
    let mut text = String::new();
    while let Some(c) = cur.peek() {
        if c.is_ascii_alphanumeric() || c == '_' || c == '.' {
            text.push(c);
            cur.bump();
            let hex = text.starts_with("0x") || text.starts_with("0X");
            let exponent = if hex { matches!(c, 'p' | 'P') } else { matches!(c, 'e' | 'E') };
            if exponent {
                if let Some(sign @ ('+' | '-')) = cur.peek() {
                    text.push(sign);
                    cur.bump();
                }
            }
        } else {
            break;
        }
    }
    text
}

fn lex_quoted(cur: &mut Cursor, quote: char) -> Result<String, FrontendError> {
    let (line, column) = (cur.line, cur.column);
    let mut text = String::new();
    text.push(cur.bump().unwrap_or(quote));
    loop {
        match cur.peek() {
            None | Some('\n') => {
                let what = if quote == '"' { "string" } else { "char" };
                return Err(FrontendError::Lex { line, column, message: format!("unterminated {what} literal") });
            }
            Some('\\') => {
                text.push('\\');
                cur.bump();
                if let Some(esc) = cur.peek().filter(|&c| c != '\n') {
                    text.push(esc);
                    cur.bump();
                }
            }
            Some(c) => {
                text.push(c);
                cur.bump();
                if c == quote {
                    return Ok(text);
                }
            }
        }
    }
}

fn skip_preprocessor_line(cur: &mut Cursor) {
    while let Some(c) = cur.peek() {
        if c == '\\' && cur.peek_at(1) == Some('\n') {
            cur.bump();
            cur.bump();
            continue;
        }
        if c == '\n' {
            break;
        }
        cur.bump();
    }
}

/// Removes comments and preprocessor lines, keeping everything else verbatim.
/// Used to check that tokenization loses nothing but whitespace.
pub fn strip_comments(source: &str) -> String {
    let mut out = String::new();
    let mut cur = Cursor::new(source);
    let mut line_start = true;
    while let Some(c) = cur.peek() {
        if c == '\n' {
            out.push(c);
            cur.bump();
            line_start = true;
            continue;
        }
        if c.is_whitespace() {
            out.push(c);
            cur.bump();
            continue;
        }
        if line_start && c == '#' {
            skip_preprocessor_line(&mut cur);
            continue;
        }
        line_start = false;
        if cur.starts_with("//") {
            while cur.peek().is_some_and(|c| c != '\n') {
                cur.bump();
            }
        } else if cur.starts_with("/*") {
            cur.bump();
            cur.bump();
            while cur.peek().is_some() && !cur.starts_with("*/") {
                cur.bump();
            }
            cur.bump();
            cur.bump();
            out.push(' ');
        } else if c == '"' || c == '\'' {
            match lex_quoted(&mut cur, c) {
                Ok(s) => out.push_str(&s),
                Err(_) => break,
            }
        } else {
            out.push(c);
            cur.bump();
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn texts(src: &str) -> Vec<String> {
        tokenize(src).unwrap().into_iter().map(|t| t.text).collect()
    }

    #[test]
    fn empty_input() {
        assert!(tokenize("").unwrap().is_empty());
    }

    #[test]
    fn simple_division_statement() {
        let toks = tokenize("int a = b / c;").unwrap();
        let got: Vec<_> = toks.iter().map(|t| (t.text.as_str(), t.kind)).collect();
        assert_eq!(
            got,
            vec![
                ("int", TokenKind::Keyword),
                ("a", TokenKind::Identifier),
                ("=", TokenKind::Operator),
                ("b", TokenKind::Identifier),
                ("/", TokenKind::Operator),
                ("c", TokenKind::Identifier),
                (";", TokenKind::Punctuation),
            ]
        );
        assert_eq!(toks[3].column, 9);
    }

    #[test]
    fn block_comment_dropped() {
        assert_eq!(texts("x /*c*/ = 1;"), ["x", "=", "1", ";"]);
    }

    #[test]
    fn preprocessor_and_line_comments_dropped() {
        let src = "#include <stdio.h>\n#define A \\\n  1\nint x; // tail\n";
        assert_eq!(texts(src), ["int", "x", ";"]);
    }

    #[test]
    fn greedy_operators() {
        assert_eq!(texts("p->q++ >>= 2"), ["p", "->", "q", "++", ">>=", "2"]);
    }

    #[test]
    fn numbers_with_suffix_and_exponent() {
        assert_eq!(texts("0xFFu 1e-5 3.5f"), ["0xFFu", "1e-5", "3.5f"]);
    }

    #[test]
    fn unterminated_string_reports_position() {
        let err = tokenize("int a;\n  s = \"abc;\n").unwrap_err();
        match err {
            FrontendError::Lex { line, column, .. } => assert_eq!((line, column), (2, 7)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unterminated_char() {
        assert!(matches!(tokenize("c = 'a"), Err(FrontendError::Lex { .. })));
    }

    #[test]
    fn escaped_quote_inside_string() {
        assert_eq!(texts(r#"s = "a\"b";"#), ["s", "=", r#""a\"b""#, ";"]);
    }

    #[test]
    fn positions_increase() {
        let toks = tokenize("int f(int a)\n{\n  return a + 1;\n}\n").unwrap();
        for w in toks.windows(2) {
            assert!((w[0].line, w[0].column) < (w[1].line, w[1].column));
        }
    }
}
