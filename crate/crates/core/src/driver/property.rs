use std::fmt;

use serde::Serialize;

use crate::abstraction::Predicate;
use crate::dtmc::TargetSpec;
use crate::error::{LarError, Result};
use crate::trace::VariableSchema;

/// `P <= r [ F phi ]` where `phi` is one comparison or a conjunction of
/// comparisons joined by `&`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Property {
    pub threshold: f64,
    pub atoms: Vec<Predicate>,
}

impl Property {
    /// The bad states of a model abstracted with the atoms as its leading
    /// predicates: every atom bit set.
    pub fn target(&self) -> TargetSpec {
        TargetSpec::leading_bits(self.atoms.len())
    }
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "P <= {} [ F ", self.threshold)?;
        for (i, a) in self.atoms.iter().enumerate() {
            if i > 0 {
                f.write_str(" & ")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str(" ]")
    }
}

fn syntax(column: usize, message: impl Into<String>) -> LarError {
    LarError::Syntax {
        column,
        message: message.into(),
    }
}

/// Parses `P <= <r> [ F <predicate> ( & <predicate> )* ]`.
pub fn parse_property(text: &str, schema: &VariableSchema) -> Result<Property> {
    let mut pos = 0;
    let bytes = text.as_bytes();
    let skip_ws = |pos: &mut usize| {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
    };
    let expect = |pos: &mut usize, tok: &str| -> Result<()> {
        skip_ws(pos);
        if text[*pos..].starts_with(tok) {
            *pos += tok.len();
            Ok(())
        } else {
            Err(syntax(*pos + 1, format!("expected `{tok}`")))
        }
    };

    expect(&mut pos, "P")?;
    skip_ws(&mut pos);
    if text[pos..].starts_with('<') && !text[pos..].starts_with("<=") {
        return Err(syntax(pos + 1, "only upper bounds of the form `P <= r` are supported"));
    }
    expect(&mut pos, "<=")?;
    skip_ws(&mut pos);
    let start = pos;
    while pos < bytes.len() && (bytes[pos].is_ascii_digit() || matches!(bytes[pos], b'.' | b'e' | b'E' | b'-' | b'+')) {
        pos += 1;
    }
    let threshold: f64 = text[start..pos]
        .parse()
        .map_err(|_| syntax(start + 1, "expected a probability bound"))?;
    if !(0.0..=1.0).contains(&threshold) {
        return Err(syntax(start + 1, format!("bound {threshold} is outside [0, 1]")));
    }
    expect(&mut pos, "[")?;
    expect(&mut pos, "F")?;
    let close = text
        .rfind(']')
        .filter(|&c| c >= pos)
        .ok_or_else(|| syntax(text.len() + 1, "expected `]`"))?;
    if !text[close + 1..].trim().is_empty() {
        return Err(syntax(close + 2, "unexpected text after `]`"));
    }
    let mut atoms = Vec::new();
    let mut offset = pos;
    for part in text[pos..close].split('&') {
        let atom = Predicate::parse(part, schema).map_err(|e| match e {
            LarError::Syntax { column, message } => syntax(offset + column, message),
            other => other,
        })?;
        atoms.push(atom);
        offset += part.len() + 1;
    }
    Ok(Property { threshold, atoms })
}
