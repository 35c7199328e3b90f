//! Recursive-descent parser for the preference query language.
//!
//! ```text
//! query    := { var_decl } [ "terms" INT ] ;
//! var_decl := "var" IDENT ":" "attr" IDENT "{" [ "depends" IDENT {"," IDENT} ] pref {pref} "}" ;
//! pref     := [ "when" cond {"," cond} ":" ] "prefer" IDENT {">" IDENT} ;
//! cond     := IDENT "=" IDENT ;
//! ```
//!
//! Parsing happens in two passes. The syntax pass builds a position-annotated
//! tree; the semantic pass resolves names and checks preference orders, so
//! a variable may depend on one declared later in the file.

use std::collections::{HashMap, HashSet};

use super::lexer::{tokenize, Pos, Tok, Token};
use super::{PreferenceSpec, QuerySpec, VariableSpec};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
struct Name {
    text: String,
    pos: Pos,
}

#[derive(Debug)]
struct PrefAst {
    conditions: Vec<(Name, Name)>,
    order: Vec<Name>,
    /// Position of the `when` or `prefer` keyword that opens the clause.
    pos: Pos,
}

#[derive(Debug)]
struct VarAst {
    name: Name,
    attribute: Name,
    depends: Vec<Name>,
    prefs: Vec<PrefAst>,
}

#[derive(Debug)]
struct QueryAst {
    vars: Vec<VarAst>,
    terms: Option<(String, Pos)>,
}

pub fn parse_query(text: &str) -> Result<QuerySpec> {
    let tokens = tokenize(text)?;
    let ast = Parser { tokens: &tokens, at: 0 }.query()?;
    analyze(ast)
}

struct Parser<'t> {
    tokens: &'t [Token],
    at: usize,
}

impl Parser<'_> {
    fn peek(&self) -> &Token {
        &self.tokens[self.at]
    }

    fn bump(&mut self) -> &Token {
        let tok = &self.tokens[self.at];
        if tok.tok != Tok::Eof {
            self.at += 1;
        }
        tok
    }

    fn fail<T>(&self, expected: &[&str]) -> Result<T> {
        let found = self.peek();
        Err(Error::Syntax {
            line: found.pos.line,
            column: found.pos.column,
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: found.tok.to_string(),
        })
    }

    fn expect(&mut self, tok: Tok) -> Result<Pos> {
        if self.peek().tok == tok {
            Ok(self.bump().pos)
        } else {
            self.fail(&[&tok.to_string()])
        }
    }

    fn ident(&mut self) -> Result<Name> {
        match &self.peek().tok {
            Tok::Ident(s) => {
                let name = Name {
                    text: s.clone(),
                    pos: self.peek().pos,
                };
                self.bump();
                Ok(name)
            }
            _ => self.fail(&["identifier"]),
        }
    }

    fn query(mut self) -> Result<QueryAst> {
        let mut vars = Vec::new();
        loop {
            match self.peek().tok {
                Tok::Var => vars.push(self.var_decl()?),
                Tok::Terms => {
                    self.bump();
                    let terms = match &self.peek().tok {
                        Tok::Int(n) => (n.clone(), self.peek().pos),
                        _ => return self.fail(&["integer"]),
                    };
                    self.bump();
                    if self.peek().tok != Tok::Eof {
                        return self.fail(&["end of input"]);
                    }
                    return Ok(QueryAst {
                        vars,
                        terms: Some(terms),
                    });
                }
                Tok::Eof => return Ok(QueryAst { vars, terms: None }),
                _ => return self.fail(&["`var`", "`terms`", "end of input"]),
            }
        }
    }

    fn var_decl(&mut self) -> Result<VarAst> {
        self.expect(Tok::Var)?;
        let name = self.ident()?;
        self.expect(Tok::Colon)?;
        self.expect(Tok::Attr)?;
        let attribute = self.ident()?;
        self.expect(Tok::LBrace)?;

        let mut depends = Vec::new();
        if self.peek().tok == Tok::Depends {
            self.bump();
            depends.push(self.ident()?);
            while self.peek().tok == Tok::Comma {
                self.bump();
                depends.push(self.ident()?);
            }
        }

        let mut prefs = Vec::new();
        loop {
            match self.peek().tok {
                Tok::When | Tok::Prefer => prefs.push(self.pref()?),
                Tok::RBrace if !prefs.is_empty() => {
                    self.bump();
                    break;
                }
                _ if prefs.is_empty() && depends.is_empty() => {
                    return self.fail(&["`depends`", "`when`", "`prefer`"]);
                }
                _ if prefs.is_empty() => return self.fail(&["`,`", "`when`", "`prefer`"]),
                _ => return self.fail(&["`when`", "`prefer`", "`}`"]),
            }
        }
        Ok(VarAst {
            name,
            attribute,
            depends,
            prefs,
        })
    }

    fn pref(&mut self) -> Result<PrefAst> {
        let pos = self.peek().pos;
        let mut conditions = Vec::new();
        if self.peek().tok == Tok::When {
            self.bump();
            loop {
                let var = self.ident()?;
                self.expect(Tok::Eq)?;
                let value = self.ident()?;
                conditions.push((var, value));
                match self.peek().tok {
                    Tok::Comma => {
                        self.bump();
                    }
                    Tok::Colon => {
                        self.bump();
                        break;
                    }
                    _ => return self.fail(&["`,`", "`:`"]),
                }
            }
        }
        self.expect(Tok::Prefer)?;
        let mut order = vec![self.ident()?];
        while self.peek().tok == Tok::Gt {
            self.bump();
            order.push(self.ident()?);
        }
        Ok(PrefAst { conditions, order, pos })
    }
}

fn semantic<T>(pos: Pos, message: impl Into<String>) -> Result<T> {
    Err(Error::Semantic {
        line: pos.line,
        column: pos.column,
        message: message.into(),
    })
}

/// Domain of a variable: the labels of its first preference, in order.
fn domain_of(var: &VarAst) -> Result<Vec<String>> {
    let mut seen = HashSet::new();
    let mut domain = Vec::new();
    for label in &var.prefs[0].order {
        if !seen.insert(label.text.as_str()) {
            return semantic(
                label.pos,
                format!("duplicate value `{}` in preference of `{}`", label.text, var.name.text),
            );
        }
        domain.push(label.text.clone());
    }
    Ok(domain)
}

fn analyze(ast: QueryAst) -> Result<QuerySpec> {
    let mut index = HashMap::new();
    for (i, var) in ast.vars.iter().enumerate() {
        if index.insert(var.name.text.as_str(), i).is_some() {
            return semantic(var.name.pos, format!("variable `{}` declared twice", var.name.text));
        }
    }
    let domains = ast.vars.iter().map(domain_of).collect::<Result<Vec<_>>>()?;

    let mut variables = Vec::with_capacity(ast.vars.len());
    for (var, domain) in ast.vars.iter().zip(&domains) {
        let mut parents = Vec::new();
        for parent in &var.depends {
            if !index.contains_key(parent.text.as_str()) {
                return semantic(parent.pos, format!("unknown parent `{}`", parent.text));
            }
            if parents.contains(&parent.text) {
                return semantic(parent.pos, format!("parent `{}` listed twice", parent.text));
            }
            parents.push(parent.text.clone());
        }

        let mut contexts = HashSet::new();
        let mut preferences = Vec::with_capacity(var.prefs.len());
        for pref in &var.prefs {
            let mut assigned: Vec<Option<&str>> = vec![None; parents.len()];
            for (cond_var, value) in &pref.conditions {
                let Some(slot) = parents.iter().position(|p| *p == cond_var.text) else {
                    return semantic(
                        cond_var.pos,
                        format!("`{}` is not a parent of `{}`", cond_var.text, var.name.text),
                    );
                };
                if assigned[slot].is_some() {
                    return semantic(cond_var.pos, format!("`{}` constrained twice", cond_var.text));
                }
                if !domains[index[cond_var.text.as_str()]].contains(&value.text) {
                    return semantic(
                        value.pos,
                        format!("unknown value `{}` for `{}`", value.text, cond_var.text),
                    );
                }
                assigned[slot] = Some(&value.text);
            }
            if let Some(missing) = assigned.iter().position(Option::is_none) {
                return semantic(
                    pref.pos,
                    format!(
                        "preference must fix parent `{}` with a `when` condition",
                        parents[missing]
                    ),
                );
            }
            if !contexts.insert(assigned.clone()) {
                return semantic(pref.pos, "preference repeats an earlier parent context");
            }

            let mut seen = HashSet::new();
            for label in &pref.order {
                if !domain.contains(&label.text) {
                    return semantic(
                        label.pos,
                        format!("value `{}` is not in the domain of `{}`", label.text, var.name.text),
                    );
                }
                if !seen.insert(label.text.as_str()) {
                    return semantic(label.pos, format!("duplicate value `{}`", label.text));
                }
            }
            if pref.order.len() != domain.len() {
                let missing = domain
                    .iter()
                    .find(|v| !seen.contains(v.as_str()))
                    .cloned()
                    .unwrap_or_default();
                return semantic(pref.pos, format!("preference does not rank value `{missing}`"));
            }
            preferences.push(PreferenceSpec {
                conditions: pref
                    .conditions
                    .iter()
                    .map(|(v, x)| (v.text.clone(), x.text.clone()))
                    .collect(),
                order: pref.order.iter().map(|l| l.text.clone()).collect(),
            });
        }

        variables.push(VariableSpec {
            name: var.name.text.clone(),
            attribute: var.attribute.text.clone(),
            domain: domain.clone(),
            parents,
            preferences,
        });
    }

    let term_count = match ast.terms {
        None => None,
        Some((digits, pos)) => match digits.parse::<usize>() {
            Ok(0) => return semantic(pos, "term count must be positive"),
            Ok(n) => Some(n),
            Err(_) => return semantic(pos, format!("term count `{digits}` is too large")),
        },
    };
    Ok(QuerySpec { variables, term_count })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn position(err: Error) -> (usize, usize) {
        match err {
            Error::Syntax { line, column, .. } | Error::Semantic { line, column, .. } => (line, column),
            other => panic!("not a diagnostic: {other:?}"),
        }
    }

    #[test]
    fn minimal_program() {
        let spec = parse_query("var color: attr c { prefer red > green }").unwrap();
        assert_eq!(spec.variables.len(), 1);
        let v = &spec.variables[0];
        assert_eq!(v.domain, ["red", "green"]);
        assert_eq!(v.attribute, "c");
        assert_eq!(v.preferences.len(), 1);
        assert!(v.preferences[0].conditions.is_empty());
        assert_eq!(spec.term_count, None);
    }

    #[test]
    fn conditional_program() {
        let text = "
            var a: attr x { prefer hi > lo }
            var b: attr y {
                depends a
                when a = hi: prefer p > q
                when a = lo: prefer q > p
            }
            terms 3
        ";
        let spec = parse_query(text).unwrap();
        assert_eq!(spec.variables[1].parents, ["a"]);
        assert_eq!(
            spec.variables[1].preferences[1].conditions,
            [("a".to_string(), "lo".to_string())]
        );
        assert_eq!(spec.term_count, Some(3));
    }

    #[test]
    fn forward_reference() {
        let spec = parse_query(
            "var b: attr y { depends a when a = u: prefer p when a = v: prefer p } var a: attr x { prefer u > v }",
        )
        .unwrap();
        assert_eq!(spec.variables[0].parents, ["a"]);
    }

    #[test]
    fn duplicate_value() {
        let err = parse_query("var color: attr c { prefer red > red }").unwrap_err();
        assert!(err.to_string().contains("duplicate value"));
        assert_eq!(position(err), (1, 34));
    }

    #[test]
    fn unknown_parent() {
        let err = parse_query("var color: attr c {\n  depends size\n  prefer red > green\n}").unwrap_err();
        assert!(err.to_string().contains("unknown parent"));
        assert_eq!(position(err), (2, 11));
    }

    #[test]
    fn syntax_error_lists_expectations() {
        match parse_query("var x attr y { prefer a }").unwrap_err() {
            Error::Syntax {
                line,
                column,
                expected,
                found,
            } => {
                assert_eq!((line, column), (1, 7));
                assert_eq!(expected, ["`:`"]);
                assert_eq!(found, "`attr`");
            }
            other => panic!("{other:?}"),
        }
    }
}
