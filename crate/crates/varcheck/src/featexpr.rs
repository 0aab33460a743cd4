//! Boolean expressions over feature names.
//!
//! These appear in `Features` columns of annotation tables and in
//! `#constraint` rows of the feature model. The grammar is plain boolean
//! logic: `!` binds tightest, then `&&`, then `||`, with parentheses for
//! grouping. An empty (or all-whitespace) expression is the constant true,
//! which is how an empty `Features` cell means "always active".

use std::collections::BTreeSet;
use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FeatureExpr {
    True,
    Var(String),
    Not(Box<FeatureExpr>),
    And(Box<FeatureExpr>, Box<FeatureExpr>),
    Or(Box<FeatureExpr>, Box<FeatureExpr>),
}

/// Parse failure, with `pos` as a byte offset into the input text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExprParseError {
    pub pos: usize,
    pub message: String,
}

impl fmt::Display for ExprParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "at offset {}: {}", self.pos, self.message)
    }
}

impl std::error::Error for ExprParseError {}

/// Feature names follow identifier rules: a letter or `_` followed by
/// letters, digits, `_` or `-`. The dash admits names like `Hammer-speed`.
pub(crate) fn is_ident_start(c: char) -> bool {
    c.is_alphabetic() || c == '_'
}

pub(crate) fn is_ident_continue(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '-'
}

/// Length in bytes of the identifier at the start of `s`, or 0.
pub(crate) fn ident_prefix_len(s: &str) -> usize {
    let mut chars = s.char_indices();
    match chars.next() {
        Some((_, c)) if is_ident_start(c) => {}
        _ => return 0,
    }
    for (i, c) in chars {
        if !is_ident_continue(c) {
            return i;
        }
    }
    s.len()
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    And,
    Or,
    Not,
    LParen,
    RParen,
    Ident(String),
}

fn tokenize(text: &str) -> Result<Vec<(usize, Token)>, ExprParseError> {
    let mut out = Vec::new();
    let mut pos = 0;
    let bytes = text.as_bytes();
    while pos < text.len() {
        let rest = &text[pos..];
        let c = rest.chars().next().unwrap();
        if c.is_whitespace() {
            pos += c.len_utf8();
            continue;
        }
        let tok = match c {
            '!' => {
                pos += 1;
                Token::Not
            }
            '(' => {
                pos += 1;
                Token::LParen
            }
            ')' => {
                pos += 1;
                Token::RParen
            }
            '&' => {
                if bytes.get(pos + 1) == Some(&b'&') {
                    pos += 2;
                    Token::And
                } else {
                    return Err(ExprParseError {
                        pos,
                        message: "expected '&&'".into(),
                    });
                }
            }
            '|' => {
                if bytes.get(pos + 1) == Some(&b'|') {
                    pos += 2;
                    Token::Or
                } else {
                    return Err(ExprParseError {
                        pos,
                        message: "expected '||'".into(),
                    });
                }
            }
            _ => {
                let len = ident_prefix_len(rest);
                if len == 0 {
                    return Err(ExprParseError {
                        pos,
                        message: format!("unexpected character '{c}'"),
                    });
                }
                let name = rest[..len].to_string();
                pos += len;
                Token::Ident(name)
            }
        };
        let start = pos
            - match &tok {
                Token::And | Token::Or => 2,
                Token::Not | Token::LParen | Token::RParen => 1,
                Token::Ident(n) => n.len(),
            };
        out.push((start, tok));
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<(usize, Token)>,
    idx: usize,
    end_pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.idx).map(|(_, t)| t)
    }

    fn pos(&self) -> usize {
        self.tokens
            .get(self.idx)
            .map(|(p, _)| *p)
            .unwrap_or(self.end_pos)
    }

    fn bump(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.idx).map(|(_, t)| t.clone());
        if t.is_some() {
            self.idx += 1;
        }
        t
    }

    fn parse_or(&mut self) -> Result<FeatureExpr, ExprParseError> {
        let mut lhs = self.parse_and()?;
        while self.peek() == Some(&Token::Or) {
            self.bump();
            let rhs = self.parse_and()?;
            lhs = FeatureExpr::Or(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn parse_and(&mut self) -> Result<FeatureExpr, ExprParseError> {
        let mut lhs = self.parse_unary()?;
        while self.peek() == Some(&Token::And) {
            self.bump();
            let rhs = self.parse_unary()?;
            lhs = FeatureExpr::And(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn parse_unary(&mut self) -> Result<FeatureExpr, ExprParseError> {
        let pos = self.pos();
        match self.bump() {
            Some(Token::Not) => Ok(FeatureExpr::Not(Box::new(self.parse_unary()?))),
            Some(Token::LParen) => {
                let inner = self.parse_or()?;
                let close = self.pos();
                match self.bump() {
                    Some(Token::RParen) => Ok(inner),
                    _ => Err(ExprParseError {
                        pos: close,
                        message: "expected ')'".into(),
                    }),
                }
            }
            Some(Token::Ident(name)) => Ok(FeatureExpr::Var(name)),
            Some(_) => Err(ExprParseError {
                pos,
                message: "expected feature name, '!' or '('".into(),
            }),
            None => Err(ExprParseError {
                pos,
                message: "unexpected end of expression".into(),
            }),
        }
    }
}

/// Parse a feature expression. Empty or whitespace-only input is `True`.
pub fn parse_expr(text: &str) -> Result<FeatureExpr, ExprParseError> {
    if text.trim().is_empty() {
        return Ok(FeatureExpr::True);
    }
    let tokens = tokenize(text)?;
    let mut parser = Parser {
        tokens,
        idx: 0,
        end_pos: text.len(),
    };
    let expr = parser.parse_or()?;
    if parser.peek().is_some() {
        return Err(ExprParseError {
            pos: parser.pos(),
            message: "unexpected trailing input".into(),
        });
    }
    Ok(expr)
}

/// Evaluate under a selection. Names absent from `selected` are false,
/// so expressions over unknown features evaluate rather than fail.
pub fn eval_expr(expr: &FeatureExpr, selected: &BTreeSet<String>) -> bool {
    match expr {
        FeatureExpr::True => true,
        FeatureExpr::Var(name) => selected.contains(name),
        FeatureExpr::Not(inner) => !eval_expr(inner, selected),
        FeatureExpr::And(l, r) => eval_expr(l, selected) && eval_expr(r, selected),
        FeatureExpr::Or(l, r) => eval_expr(l, selected) || eval_expr(r, selected),
    }
}

/// Every variable named in the expression.
pub fn vars_of(expr: &FeatureExpr) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    collect_vars(expr, &mut out);
    out
}

fn collect_vars(expr: &FeatureExpr, out: &mut BTreeSet<String>) {
    match expr {
        FeatureExpr::True => {}
        FeatureExpr::Var(name) => {
            out.insert(name.clone());
        }
        FeatureExpr::Not(inner) => collect_vars(inner, out),
        FeatureExpr::And(l, r) | FeatureExpr::Or(l, r) => {
            collect_vars(l, out);
            collect_vars(r, out);
        }
    }
}

impl FeatureExpr {
    /// Fully parenthesized form: every binary node wrapped in parens.
    /// `parse_expr` inverts this exactly, which the round-trip tests rely
    /// on. `True` prints as the empty string, matching its concrete syntax.
    pub fn parenthesized(&self) -> String {
        match self {
            FeatureExpr::True => String::new(),
            FeatureExpr::Var(name) => name.clone(),
            FeatureExpr::Not(inner) => format!("!{}", inner.parenthesized_inner()),
            FeatureExpr::And(l, r) => {
                format!("({} && {})", l.parenthesized_inner(), r.parenthesized_inner())
            }
            FeatureExpr::Or(l, r) => {
                format!("({} || {})", l.parenthesized_inner(), r.parenthesized_inner())
            }
        }
    }

    fn parenthesized_inner(&self) -> String {
        match self {
            // True has no nested concrete syntax; parser never builds one.
            FeatureExpr::True => "TRUE_HAS_NO_SYNTAX".into(),
            other => other.parenthesized(),
        }
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        match self {
            FeatureExpr::True => write!(f, "true"),
            FeatureExpr::Var(name) => write!(f, "{name}"),
            FeatureExpr::Not(inner) => {
                write!(f, "!")?;
                inner.fmt_prec(f, 3)
            }
            FeatureExpr::And(l, r) => {
                let paren = min > 2;
                if paren {
                    write!(f, "(")?;
                }
                l.fmt_prec(f, 2)?;
                write!(f, " && ")?;
                r.fmt_prec(f, 3)?;
                if paren {
                    write!(f, ")")?;
                }
                Ok(())
            }
            FeatureExpr::Or(l, r) => {
                let paren = min > 1;
                if paren {
                    write!(f, "(")?;
                }
                l.fmt_prec(f, 1)?;
                write!(f, " || ")?;
                r.fmt_prec(f, 2)?;
                if paren {
                    write!(f, ")")?;
                }
                Ok(())
            }
        }
    }
}

/// Minimal-parentheses rendering: parens appear only where precedence or
/// associativity demands them.
impl fmt::Display for FeatureExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}
