//! Flat subject–predicate–object annotation of observations.
//!
//! One triple per line: `subject predicate object`, whitespace separated.
//! Subjects and predicates are prefixed names without whitespace; objects
//! are either prefixed names or double-quoted literals with `\"` and `\\`
//! escapes.

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Term {
    Name(String),
    Literal(String),
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Triple {
    pub subject: String,
    pub predicate: String,
    pub object: Term,
}

impl Triple {
    pub fn name(s: impl Into<String>, p: &str, o: impl Into<String>) -> Self {
        Self {
            subject: s.into(),
            predicate: p.to_string(),
            object: Term::Name(o.into()),
        }
    }

    pub fn literal(s: impl Into<String>, p: &str, o: impl Into<String>) -> Self {
        Self {
            subject: s.into(),
            predicate: p.to_string(),
            object: Term::Literal(o.into()),
        }
    }
}

impl fmt::Display for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} ", self.subject, self.predicate)?;
        match &self.object {
            Term::Name(n) => f.write_str(n),
            Term::Literal(l) => {
                f.write_str("\"")?;
                for c in l.chars() {
                    match c {
                        '"' => f.write_str("\\\"")?,
                        '\\' => f.write_str("\\\\")?,
                        '\n' => f.write_str("\\n")?,
                        c => write!(f, "{c}")?,
                    }
                }
                f.write_str("\"")
            }
        }
    }
}

pub fn serialize(triples: &[Triple]) -> String {
    let mut out = String::new();
    for t in triples {
        out.push_str(&t.to_string());
        out.push('\n');
    }
    out
}

/// Parses the line format produced by [`serialize`].
pub fn parse(text: &str) -> Result<Vec<Triple>, String> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let err = |m: &str| format!("line {}: {m}", i + 1);
        let mut rest = line.trim_start();
        let (subject, r) = rest
            .split_once(char::is_whitespace)
            .ok_or_else(|| err("missing predicate"))?;
        rest = r.trim_start();
        let (predicate, r) = rest
            .split_once(char::is_whitespace)
            .ok_or_else(|| err("missing object"))?;
        rest = r.trim_start();
        let object = if let Some(body) = rest.strip_prefix('"') {
            let mut lit = String::new();
            let mut chars = body.chars();
            let mut closed = false;
            while let Some(c) = chars.next() {
                match c {
                    '\\' => match chars.next() {
                        Some('n') => lit.push('\n'),
                        Some(e @ ('"' | '\\')) => lit.push(e),
                        _ => return Err(err("bad escape")),
                    },
                    '"' => {
                        closed = true;
                        break;
                    }
                    c => lit.push(c),
                }
            }
            if !closed {
                return Err(err("unterminated literal"));
            }
            if !chars.as_str().trim().is_empty() {
                return Err(err("trailing text"));
            }
            Term::Literal(lit)
        } else {
            let name = rest.trim_end();
            if name.is_empty() || name.contains(char::is_whitespace) {
                return Err(err("malformed object"));
            }
            Term::Name(name.to_string())
        };
        out.push(Triple {
            subject: subject.to_string(),
            predicate: predicate.to_string(),
            object,
        });
    }
    Ok(out)
}
