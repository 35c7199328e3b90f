use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Pos {
    pub line: usize,
    pub column: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Var,
    Attr,
    Depends,
    When,
    Prefer,
    Terms,
    Ident(String),
    Int(String),
    Colon,
    LBrace,
    RBrace,
    Comma,
    Eq,
    Gt,
    Eof,
}

impl Tok {
    fn keyword(word: &str) -> Option<Tok> {
        Some(match word {
            "var" => Tok::Var,
            "attr" => Tok::Attr,
            "depends" => Tok::Depends,
            "when" => Tok::When,
            "prefer" => Tok::Prefer,
            "terms" => Tok::Terms,
            _ => return None,
        })
    }
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Var => f.write_str("`var`"),
            Tok::Attr => f.write_str("`attr`"),
            Tok::Depends => f.write_str("`depends`"),
            Tok::When => f.write_str("`when`"),
            Tok::Prefer => f.write_str("`prefer`"),
            Tok::Terms => f.write_str("`terms`"),
            Tok::Ident(s) => write!(f, "identifier `{s}`"),
            Tok::Int(s) => write!(f, "integer `{s}`"),
            Tok::Colon => f.write_str("`:`"),
            Tok::LBrace => f.write_str("`{`"),
            Tok::RBrace => f.write_str("`}`"),
            Tok::Comma => f.write_str("`,`"),
            Tok::Eq => f.write_str("`=`"),
            Tok::Gt => f.write_str("`>`"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub tok: Tok,
    pub pos: Pos,
}

/// Columns count characters, both lines and columns start at 1.
pub fn tokenize(text: &str) -> Result<Vec<Token>> {
    let mut tokens = Vec::new();
    let mut chars = text.chars().peekable();
    let mut pos = Pos { line: 1, column: 1 };

    while let Some(&c) = chars.peek() {
        let start = pos;
        if c == '\n' {
            chars.next();
            pos.line += 1;
            pos.column = 1;
            continue;
        }
        if c.is_whitespace() {
            chars.next();
            pos.column += 1;
            continue;
        }
        if c == '#' {
            while chars.peek().is_some_and(|&c| c != '\n') {
                chars.next();
                pos.column += 1;
            }
            continue;
        }
        let single = match c {
            ':' => Some(Tok::Colon),
            '{' => Some(Tok::LBrace),
            '}' => Some(Tok::RBrace),
            ',' => Some(Tok::Comma),
            '=' => Some(Tok::Eq),
            '>' => Some(Tok::Gt),
            _ => None,
        };
        if let Some(tok) = single {
            chars.next();
            pos.column += 1;
            tokens.push(Token { tok, pos: start });
            continue;
        }
        if c.is_alphabetic() || c == '_' || c.is_ascii_digit() {
            let mut word = String::new();
            while let Some(&c) = chars.peek() {
                if c.is_alphanumeric() || c == '_' {
                    word.push(c);
                    chars.next();
                    pos.column += 1;
                } else {
                    break;
                }
            }
            let tok = if word.chars().all(|c| c.is_ascii_digit()) {
                Tok::Int(word)
            } else if word.starts_with(|c: char| c.is_ascii_digit()) {
                return Err(Error::Syntax {
                    line: start.line,
                    column: start.column,
                    expected: vec!["identifier".into(), "integer".into()],
                    found: format!("`{word}`"),
                });
            } else {
                Tok::keyword(&word).unwrap_or(Tok::Ident(word))
            };
            tokens.push(Token { tok, pos: start });
            continue;
        }
        return Err(Error::Syntax {
            line: start.line,
            column: start.column,
            expected: vec!["token".into()],
            found: format!("character {c:?}"),
        });
    }
    tokens.push(Token { tok: Tok::Eof, pos });
    Ok(tokens)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn positions_and_comments() {
        let toks = tokenize("var x # note\n  : attr\n").unwrap();
        let got: Vec<_> = toks.iter().map(|t| (t.tok.clone(), t.pos.line, t.pos.column)).collect();
        assert_eq!(
            got,
            vec![
                (Tok::Var, 1, 1),
                (Tok::Ident("x".into()), 1, 5),
                (Tok::Colon, 2, 3),
                (Tok::Attr, 2, 5),
                (Tok::Eof, 3, 1),
            ]
        );
    }

    #[test]
    fn integers_and_bad_chars() {
        assert_eq!(tokenize("terms 12").unwrap()[1].tok, Tok::Int("12".into()));
        assert!(matches!(
            tokenize("a @").unwrap_err(),
            Error::Syntax { line: 1, column: 3, .. }
        ));
        assert!(matches!(
            tokenize("9lives").unwrap_err(),
            Error::Syntax { line: 1, column: 1, .. }
        ));
    }

    #[test]
    fn unicode_identifiers_count_characters() {
        let toks = tokenize("prix_élevé >").unwrap();
        assert_eq!(toks[0].tok, Tok::Ident("prix_élevé".into()));
        assert_eq!(toks[1].pos.column, 12);
    }
}
