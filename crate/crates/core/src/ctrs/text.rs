//! The `.ctrs` text format.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_bigint::BigInt;
use thiserror::Error;

use crate::constraint::{CTerm, Formula, Sort};

use super::rules::{Ctrs, Rule, SymKind, SymbolDecl};
use super::term::Term;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("line {line}: {msg}")]
pub struct CtrsParseError {
    pub line: usize,
    pub msg: String,
}

pub fn render_ctrs(c: &Ctrs) -> String {
    let mut out = String::from("(SORTS int bool univ)\n(SIG\n");
    for d in &c.signature {
        let kind = match d.kind {
            SymKind::Defined => "defined",
            SymKind::Constructor => "constructor",
        };
        let _ = write!(out, "  {} {} {kind}", d.name, d.arity);
        if let Some(n) = &d.note {
            let _ = write!(out, " ; {n}");
        }
        out.push('\n');
    }
    out.push_str(")\n(RULES\n");
    for r in &c.rules {
        let vars: Vec<String> = r.vars().into_iter().map(|(n, s)| format!("{n}:{s}")).collect();
        if vars.is_empty() {
            out.push_str("  (VAR)\n");
        } else {
            let _ = writeln!(out, "  (VAR {})", vars.join(" "));
        }
        let _ = writeln!(out, "  {} -> {} [{}]", r.lhs, r.rhs, r.constraint);
    }
    out.push_str(")\n");
    out
}

fn err(line: usize, msg: impl Into<String>) -> CtrsParseError {
    CtrsParseError { line, msg: msg.into() }
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Int(BigInt),
    LParen,
    RParen,
    Comma,
    Plus,
    Minus,
    Eq,
    Neq,
    Geq,
    And,
    Or,
}

fn lex(s: &str, line: usize) -> Result<Vec<Tok>, CtrsParseError> {
    let cs: Vec<char> = s.chars().collect();
    let mut i = 0;
    let mut out = Vec::new();
    while i < cs.len() {
        let c = cs[i];
        match c {
            ' ' | '\t' => i += 1,
            '(' => {
                out.push(Tok::LParen);
                i += 1;
            }
            ')' => {
                out.push(Tok::RParen);
                i += 1;
            }
            ',' => {
                out.push(Tok::Comma);
                i += 1;
            }
            '+' => {
                out.push(Tok::Plus);
                i += 1;
            }
            '=' => {
                out.push(Tok::Eq);
                i += 1;
            }
            '!' if cs.get(i + 1) == Some(&'=') => {
                out.push(Tok::Neq);
                i += 2;
            }
            '>' if cs.get(i + 1) == Some(&'=') => {
                out.push(Tok::Geq);
                i += 2;
            }
            '/' if cs.get(i + 1) == Some(&'\\') => {
                out.push(Tok::And);
                i += 2;
            }
            '\\' if cs.get(i + 1) == Some(&'/') => {
                out.push(Tok::Or);
                i += 2;
            }
            '-' => {
                out.push(Tok::Minus);
                i += 1;
            }
            d if d.is_ascii_digit() => {
                let st = i;
                while i < cs.len() && cs[i].is_ascii_digit() {
                    i += 1;
                }
                let txt: String = cs[st..i].iter().collect();
                out.push(Tok::Int(txt.parse().map_err(|_| err(line, "bad integer"))?));
            }
            a if a.is_alphabetic() || a == '_' => {
                let st = i;
                while i < cs.len() && (cs[i].is_alphanumeric() || cs[i] == '_') {
                    i += 1;
                }
                out.push(Tok::Ident(cs[st..i].iter().collect()));
            }
            other => return Err(err(line, format!("unexpected character `{other}`"))),
        }
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<Tok>,
    pos: usize,
    line: usize,
    vars: &'a BTreeMap<String, Sort>,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn expect(&mut self, t: Tok) -> Result<(), CtrsParseError> {
        match self.next() {
            Some(x) if x == t => Ok(()),
            other => Err(err(self.line, format!("expected {t:?}, found {other:?}"))),
        }
    }

    fn done(&self) -> Result<(), CtrsParseError> {
        match self.peek() {
            None => Ok(()),
            Some(t) => Err(err(self.line, format!("trailing token {t:?}"))),
        }
    }

    fn term(&mut self) -> Result<Term, CtrsParseError> {
        match self.next() {
            Some(Tok::Int(z)) => Ok(Term::Int(z)),
            Some(Tok::Minus) => match self.next() {
                Some(Tok::Int(z)) => Ok(Term::Int(-z)),
                other => Err(err(self.line, format!("expected integer after `-`, found {other:?}"))),
            },
            Some(Tok::Ident(n)) => {
                if let Some(s) = self.vars.get(&n) {
                    return Ok(Term::Var(n, *s));
                }
                match n.as_str() {
                    "true" => return Ok(Term::Bool(true)),
                    "false" => return Ok(Term::Bool(false)),
                    "null" => return Ok(Term::Null),
                    _ => {}
                }
                let mut args = Vec::new();
                if self.peek() == Some(&Tok::LParen) {
                    self.next();
                    if self.peek() != Some(&Tok::RParen) {
                        loop {
                            args.push(self.term()?);
                            match self.next() {
                                Some(Tok::Comma) => continue,
                                Some(Tok::RParen) => break,
                                other => return Err(err(self.line, format!("expected `,` or `)`, found {other:?}"))),
                            }
                        }
                    } else {
                        self.next();
                    }
                }
                Ok(Term::App(n, args))
            }
            other => Err(err(self.line, format!("expected a term, found {other:?}"))),
        }
    }

    fn cprimary(&mut self) -> Result<CTerm, CtrsParseError> {
        match self.next() {
            Some(Tok::Int(z)) => Ok(CTerm::Int(z)),
            Some(Tok::Minus) => match self.next() {
                Some(Tok::Int(z)) => Ok(CTerm::Int(-z)),
                other => Err(err(self.line, format!("expected integer after `-`, found {other:?}"))),
            },
            Some(Tok::Ident(n)) if n == "true" => Ok(CTerm::Bool(true)),
            Some(Tok::Ident(n)) if n == "false" => Ok(CTerm::Bool(false)),
            Some(Tok::Ident(n)) => match self.vars.get(&n) {
                Some(s) => Ok(CTerm::Var(n, *s)),
                None => Err(err(self.line, format!("undeclared variable `{n}`"))),
            },
            Some(Tok::LParen) => {
                let t = self.cterm()?;
                self.expect(Tok::RParen)?;
                Ok(t)
            }
            other => Err(err(self.line, format!("expected an arithmetic term, found {other:?}"))),
        }
    }

    fn cterm(&mut self) -> Result<CTerm, CtrsParseError> {
        let mut t = self.cprimary()?;
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.next();
                    t = CTerm::Add(Box::new(t), Box::new(self.cprimary()?));
                }
                Some(Tok::Minus) => {
                    self.next();
                    t = CTerm::Sub(Box::new(t), Box::new(self.cprimary()?));
                }
                _ => return Ok(t),
            }
        }
    }

    fn atom(&mut self) -> Result<Formula, CtrsParseError> {
        let a = self.cterm()?;
        let op = match self.peek() {
            Some(Tok::Eq) | Some(Tok::Neq) | Some(Tok::Geq) => self.next(),
            _ => None,
        };
        Ok(match op {
            Some(Tok::Eq) => Formula::Eq(a, self.cterm()?),
            Some(Tok::Neq) => Formula::Neq(a, self.cterm()?),
            Some(Tok::Geq) => Formula::Geq(a, self.cterm()?),
            _ => match a {
                CTerm::Bool(true) => Formula::True,
                CTerm::Bool(false) => Formula::False,
                other => Formula::Holds(other),
            },
        })
    }

    fn unary(&mut self) -> Result<Formula, CtrsParseError> {
        match self.peek() {
            Some(Tok::Ident(n)) if n == "not" => {
                self.next();
                Ok(Formula::negate(self.unary()?))
            }
            Some(Tok::LParen) => {
                let save = self.pos;
                self.next();
                if let Ok(f) = self.or() {
                    if self.peek() == Some(&Tok::RParen) {
                        self.next();
                        if !matches!(
                            self.peek(),
                            Some(Tok::Plus | Tok::Minus | Tok::Eq | Tok::Neq | Tok::Geq)
                        ) {
                            return Ok(f);
                        }
                    }
                }
                self.pos = save;
                self.atom()
            }
            _ => self.atom(),
        }
    }

    fn and(&mut self) -> Result<Formula, CtrsParseError> {
        let mut f = self.unary()?;
        while self.peek() == Some(&Tok::And) {
            self.next();
            f = Formula::and(f, self.unary()?);
        }
        Ok(f)
    }

    fn or(&mut self) -> Result<Formula, CtrsParseError> {
        let mut f = self.and()?;
        while self.peek() == Some(&Tok::Or) {
            self.next();
            f = Formula::or(f, self.and()?);
        }
        Ok(f)
    }
}

/// Parses a term; identifiers in `vars` are variables.
pub fn parse_term(s: &str, vars: &BTreeMap<String, Sort>) -> Result<Term, CtrsParseError> {
    let mut p = Parser { toks: lex(s, 0)?, pos: 0, line: 0, vars };
    let t = p.term()?;
    p.done()?;
    Ok(t)
}

pub fn parse_formula(s: &str, vars: &BTreeMap<String, Sort>) -> Result<Formula, CtrsParseError> {
    let mut p = Parser { toks: lex(s, 0)?, pos: 0, line: 0, vars };
    let f = p.or()?;
    p.done()?;
    Ok(f)
}

fn parse_sort(s: &str, line: usize) -> Result<Sort, CtrsParseError> {
    match s {
        "int" => Ok(Sort::Int),
        "bool" => Ok(Sort::Bool),
        "univ" => Ok(Sort::Univ),
        other => Err(err(line, format!("unknown sort `{other}`"))),
    }
}

fn with_line<T>(r: Result<T, CtrsParseError>, line: usize) -> Result<T, CtrsParseError> {
    r.map_err(|e| CtrsParseError { line, msg: e.msg })
}

pub fn parse_ctrs(src: &str) -> Result<Ctrs, CtrsParseError> {
    #[derive(PartialEq)]
    enum Sec {
        Top,
        Sig,
        Rules,
    }
    let mut sec = Sec::Top;
    let mut c = Ctrs::default();
    let mut vars: Option<BTreeMap<String, Sort>> = None;
    for (i, raw) in src.lines().enumerate() {
        let line = i + 1;
        let l = raw.trim();
        if l.is_empty() {
            continue;
        }
        match sec {
            Sec::Top => match l {
                "(SORTS int bool univ)" => {}
                "(SIG" => sec = Sec::Sig,
                "(RULES" => sec = Sec::Rules,
                _ if l.starts_with(';') => {}
                _ => return Err(err(line, format!("unexpected `{l}`"))),
            },
            Sec::Sig => {
                if l == ")" {
                    sec = Sec::Top;
                    continue;
                }
                let (decl, note) = match l.split_once(';') {
                    Some((d, n)) => (d.trim(), Some(n.trim().to_string())),
                    None => (l, None),
                };
                let parts: Vec<&str> = decl.split_whitespace().collect();
                let [name, arity, kind] = parts[..] else {
                    return Err(err(line, "expected `name arity kind`"));
                };
                let arity = arity.parse().map_err(|_| err(line, "bad arity"))?;
                let kind = match kind {
                    "defined" => SymKind::Defined,
                    "constructor" => SymKind::Constructor,
                    other => return Err(err(line, format!("unknown symbol kind `{other}`"))),
                };
                c.signature.push(SymbolDecl { name: name.to_string(), arity, kind, note });
            }
            Sec::Rules => {
                if l == ")" {
                    if vars.is_some() {
                        return Err(err(line, "VAR block without a rule"));
                    }
                    sec = Sec::Top;
                    continue;
                }
                if let Some(rest) = l.strip_prefix("(VAR") {
                    let body = rest.strip_suffix(')').ok_or_else(|| err(line, "unterminated VAR block"))?;
                    let mut m = BTreeMap::new();
                    for d in body.split_whitespace() {
                        let (n, s) = d.split_once(':').ok_or_else(|| err(line, format!("bad variable `{d}`")))?;
                        m.insert(n.to_string(), parse_sort(s, line)?);
                    }
                    vars = Some(m);
                    continue;
                }
                let vs = vars.take().unwrap_or_default();
                let (lhs, rest) = l.split_once(" -> ").ok_or_else(|| err(line, "expected `lhs -> rhs [C]`"))?;
                let open = rest.rfind(" [").ok_or_else(|| err(line, "missing constraint"))?;
                let rhs = &rest[..open];
                let cons = rest[open + 2..].strip_suffix(']').ok_or_else(|| err(line, "unterminated constraint"))?;
                let rule = Rule {
                    lhs: with_line(parse_term(lhs, &vs), line)?,
                    rhs: with_line(parse_term(rhs, &vs), line)?,
                    constraint: with_line(parse_formula(cons, &vs), line)?,
                };
                c.rules.push(rule);
            }
        }
    }
    if sec != Sec::Top {
        return Err(err(src.lines().count(), "unterminated section"));
    }
    Ok(c)
}
