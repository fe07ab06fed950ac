//! Recursive-descent parser for `<lincomb> <rel> <lincomb>`.
//!
//! Both sides may mix variables and constants; everything is moved to the
//! left so the result reads `sum c_i * x_i  rel  c`.

use super::Relation;
use crate::error::{LarError, Result};

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Rel(Relation),
}

fn syntax(column: usize, message: impl Into<String>) -> LarError {
    LarError::Syntax {
        column,
        message: message.into(),
    }
}

fn tokenize(text: &str) -> Result<Vec<(usize, Token)>> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        let col = i + 1;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit)) {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    i = j;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let lit = &text[start..i];
            let v: f64 = lit
                .parse()
                .map_err(|_| syntax(col, format!("malformed number `{lit}`")))?;
            out.push((col, Token::Num(v)));
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_' || bytes[i] == b'.') {
                i += 1;
            }
            out.push((col, Token::Ident(text[start..i].to_string())));
            continue;
        }
        let next = bytes.get(i + 1).copied().map(char::from);
        let (tok, len) = match (c, next) {
            ('<', Some('=')) => (Token::Rel(Relation::Le), 2),
            ('>', Some('=')) => (Token::Rel(Relation::Ge), 2),
            ('=', Some('=')) => (Token::Rel(Relation::Eq), 2),
            ('<', _) => (Token::Rel(Relation::Lt), 1),
            ('>', _) => (Token::Rel(Relation::Gt), 1),
            ('=', _) => (Token::Rel(Relation::Eq), 1),
            ('+', _) => (Token::Plus, 1),
            ('-', _) => (Token::Minus, 1),
            ('*', _) => (Token::Star, 1),
            _ => return Err(syntax(col, format!("unexpected character `{c}`"))),
        };
        out.push((col, tok));
        i += len;
    }
    Ok(out)
}

/// Affine expression `sum coef * var + constant`, terms in first-seen order.
#[derive(Debug, Default, Clone, PartialEq)]
pub(crate) struct Affine {
    pub terms: Vec<(String, f64)>,
    pub constant: f64,
}

impl Affine {
    fn add_term(&mut self, name: String, coef: f64) {
        match self.terms.iter_mut().find(|(n, _)| *n == name) {
            Some((_, c)) => *c += coef,
            None => self.terms.push((name, coef)),
        }
    }
}

struct Parser {
    tokens: Vec<(usize, Token)>,
    pos: usize,
    end_column: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|(_, t)| t)
    }

    fn column(&self) -> usize {
        self.tokens.get(self.pos).map(|(c, _)| *c).unwrap_or(self.end_column)
    }

    fn bump(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).map(|(_, t)| t.clone());
        self.pos += 1;
        t
    }

    /// `[sign] (num ['*' ident] | ident)` repeated with `+`/`-` separators.
    fn side(&mut self) -> Result<Affine> {
        let mut acc = Affine::default();
        let mut first = true;
        loop {
            let mut sign = 1.0;
            match self.peek() {
                Some(Token::Plus) => {
                    self.bump();
                }
                Some(Token::Minus) => {
                    self.bump();
                    sign = -1.0;
                }
                _ if !first => break,
                _ => {}
            }
            first = false;
            let col = self.column();
            match self.bump() {
                Some(Token::Num(v)) => {
                    if self.peek() == Some(&Token::Star) {
                        self.bump();
                        let col = self.column();
                        match self.bump() {
                            Some(Token::Ident(name)) => acc.add_term(name, sign * v),
                            _ => return Err(syntax(col, "expected a variable after `*`")),
                        }
                    } else {
                        acc.constant += sign * v;
                    }
                }
                Some(Token::Ident(name)) => acc.add_term(name, sign),
                _ => return Err(syntax(col, "expected a number or variable")),
            }
        }
        Ok(acc)
    }
}

/// Parses a comparison and returns `(lhs - rhs terms, relation, rhs - lhs constant)`.
pub(crate) fn parse_comparison(text: &str) -> Result<(Affine, Relation)> {
    let tokens = tokenize(text)?;
    let mut p = Parser {
        tokens,
        pos: 0,
        end_column: text.len() + 1,
    };
    let lhs = p.side()?;
    let col = p.column();
    let rel = match p.bump() {
        Some(Token::Rel(r)) => r,
        _ => return Err(syntax(col, "expected one of <, <=, >, >=, ==")),
    };
    let rhs = p.side()?;
    if p.pos < p.tokens.len() {
        return Err(syntax(p.column(), "unexpected trailing input"));
    }
    let mut out = lhs;
    for (name, c) in rhs.terms {
        out.add_term(name, -c);
    }
    // Constant now lives on the right-hand side.
    out.constant = rhs.constant - out.constant;
    Ok((out, rel))
}
