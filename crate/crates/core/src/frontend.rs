//! Text format for bytecode programs: parser and pretty-printer.
//!
//! The format is line oriented. Indentation is not significant and `//`
//! starts a comment.
//!
//! ```text
//! Class:
//!   Name: List
//!   Superclass: Object
//!   Fields:
//!     List next
//!     int val
//!   Methods:
//!     Method: unit append
//!       Parameters:
//!         List ys
//!       Methodbody:
//!         MaxStack: 2
//!         MaxVars: 1
//!         Bytecode:
//!           00: Load 0
//!           01: Return
//! ```

use std::fmt::Write as _;

use num_bigint::BigInt;

use crate::program::{
    ident, ClassDecl, FieldDecl, Ident, Instruction, Literal, MethodDecl, Program, ProgramError,
    TypeRef, OBJECT,
};

const KEYWORDS: &[&str] = &[
    "Class", "Name", "Classbody", "Superclass", "Fields", "Methods", "Method", "Parameters",
    "Methodbody", "MaxStack", "MaxVars", "Bytecode",
];

#[derive(Debug, Clone)]
struct Line<'a> {
    no: usize,
    col: usize,
    text: &'a str,
}

impl Line<'_> {
    fn err(&self, msg: impl Into<String>) -> ProgramError {
        ProgramError::Syntax { line: self.no, col: self.col, msg: msg.into() }
    }

    /// `Key: rest` for known keywords.
    fn keyword(&self) -> Option<(&str, &str)> {
        let (k, rest) = self.text.split_once(':')?;
        let k = k.trim();
        KEYWORDS.contains(&k).then(|| (k, rest.trim()))
    }
}

struct Cursor<'a> {
    lines: Vec<Line<'a>>,
    pos: usize,
    last_no: usize,
}

impl<'a> Cursor<'a> {
    fn new(src: &'a str) -> Self {
        let mut lines = Vec::new();
        let mut last_no = 1;
        for (i, raw) in src.lines().enumerate() {
            last_no = i + 1;
            let no_comment = match raw.find("//") {
                Some(k) => &raw[..k],
                None => raw,
            };
            let text = no_comment.trim();
            if text.is_empty() {
                continue;
            }
            let col = no_comment.len() - no_comment.trim_start().len() + 1;
            lines.push(Line { no: i + 1, col, text });
        }
        Cursor { lines, pos: 0, last_no }
    }

    fn peek(&self) -> Option<&Line<'a>> {
        self.lines.get(self.pos)
    }

    fn next(&mut self) -> Option<Line<'a>> {
        let l = self.lines.get(self.pos).cloned();
        self.pos += 1;
        l
    }

    fn eof_err(&self, msg: &str) -> ProgramError {
        ProgramError::Syntax { line: self.last_no, col: 1, msg: format!("unexpected end of input: {msg}") }
    }

    fn peek_keyword(&self) -> Option<&str> {
        self.peek().and_then(|l| l.keyword()).map(|(k, _)| k)
    }

    /// Consumes `Key:` and returns its value, taken from the same line or
    /// the following non-keyword line.
    fn expect_value(&mut self, key: &str) -> Result<(Line<'a>, String), ProgramError> {
        let line = self.next().ok_or_else(|| self.eof_err(&format!("expected `{key}:`")))?;
        match line.keyword() {
            Some((k, rest)) if k == key => {
                if !rest.is_empty() {
                    return Ok((line.clone(), rest.to_string()));
                }
                match self.peek() {
                    Some(n) if n.keyword().is_none() => {
                        let n = self.next().unwrap();
                        let v = n.text.to_string();
                        Ok((n, v))
                    }
                    _ => Err(line.err(format!("`{key}:` needs a value"))),
                }
            }
            _ => Err(line.err(format!("expected `{key}:`"))),
        }
    }

    fn expect_header(&mut self, key: &str) -> Result<Line<'a>, ProgramError> {
        let line = self.next().ok_or_else(|| self.eof_err(&format!("expected `{key}:`")))?;
        match line.keyword() {
            Some((k, "")) if k == key => Ok(line),
            _ => Err(line.err(format!("expected `{key}:`"))),
        }
    }
}

fn parse_ident(line: &Line<'_>, s: &str) -> Result<Ident, ProgramError> {
    let ok = !s.is_empty()
        && s.chars().next().is_some_and(|c| c.is_alphabetic() || c == '_')
        && s.chars().all(|c| c.is_alphanumeric() || c == '_' || c == '$');
    if ok {
        Ok(ident(s))
    } else {
        Err(line.err(format!("invalid identifier `{s}`")))
    }
}

fn parse_type(line: &Line<'_>, s: &str) -> Result<TypeRef, ProgramError> {
    Ok(match s {
        "int" => TypeRef::Int,
        "bool" | "boolean" => TypeRef::Bool,
        "unit" | "void" => TypeRef::Unit,
        "null" => TypeRef::NullT,
        _ => TypeRef::Class(parse_ident(line, s)?),
    })
}

fn parse_typed_name(line: &Line<'_>) -> Result<(TypeRef, Ident), ProgramError> {
    let parts: Vec<&str> = line.text.split_whitespace().collect();
    if parts.len() != 2 {
        return Err(line.err("expected `Type name`"));
    }
    Ok((parse_type(line, parts[0])?, parse_ident(line, parts[1])?))
}

fn parse_nat(line: &Line<'_>, s: &str) -> Result<usize, ProgramError> {
    s.parse::<usize>().map_err(|_| line.err(format!("expected a natural number, found `{s}`")))
}

pub fn parse_literal(s: &str) -> Option<Literal> {
    match s {
        "unit" => Some(Literal::Unit),
        "null" => Some(Literal::Null),
        "true" => Some(Literal::Bool(true)),
        "false" => Some(Literal::Bool(false)),
        _ => s.parse::<BigInt>().ok().map(Literal::Int),
    }
}

fn parse_instruction(line: &Line<'_>, expected_idx: usize) -> Result<Instruction, ProgramError> {
    let mut text = line.text;
    if let Some((idx, rest)) = text.split_once(':') {
        let idx = idx.trim();
        if !idx.is_empty() && idx.chars().all(|c| c.is_ascii_digit()) {
            let n: usize = idx.parse().map_err(|_| line.err("bad instruction index"))?;
            if n != expected_idx {
                return Err(line.err(format!("instruction index {n} out of sequence, expected {expected_idx}")));
            }
            text = rest.trim();
        }
    }
    let parts: Vec<&str> = text.split_whitespace().collect();
    let Some((op, args)) = parts.split_first() else {
        return Err(line.err("missing mnemonic"));
    };
    let arity = |n: usize| -> Result<(), ProgramError> {
        if args.len() == n {
            Ok(())
        } else {
            Err(line.err(format!("`{op}` takes {n} operand(s), found {}", args.len())))
        }
    };
    let int = |s: &str| -> Result<i64, ProgramError> {
        s.parse::<i64>().map_err(|_| line.err(format!("expected an integer, found `{s}`")))
    };
    use Instruction::*;
    let ins = match op.to_ascii_lowercase().as_str() {
        "load" => {
            arity(1)?;
            Load(parse_nat(line, args[0])?)
        }
        "store" => {
            arity(1)?;
            Store(parse_nat(line, args[0])?)
        }
        "push" => {
            arity(1)?;
            Push(parse_literal(args[0]).ok_or_else(|| line.err(format!("bad literal `{}`", args[0])))?)
        }
        "pop" => {
            arity(0)?;
            Pop
        }
        "iadd" => {
            arity(0)?;
            IAdd
        }
        "isub" => {
            arity(0)?;
            ISub
        }
        "cmpgeq" => {
            arity(0)?;
            CmpGeq
        }
        "cmpeq" => {
            arity(0)?;
            CmpEq
        }
        "cmpneq" => {
            arity(0)?;
            CmpNeq
        }
        "and" => {
            arity(0)?;
            And
        }
        "or" => {
            arity(0)?;
            Or
        }
        "not" => {
            arity(0)?;
            Not
        }
        "goto" => {
            arity(1)?;
            Goto(int(args[0])?)
        }
        "iffalse" => {
            arity(1)?;
            IfFalse(parse_nat(line, args[0])?)
        }
        "new" => {
            arity(1)?;
            New(parse_ident(line, args[0])?)
        }
        "getfield" => {
            arity(2)?;
            Getfield(parse_ident(line, args[0])?, parse_ident(line, args[1])?)
        }
        "putfield" => {
            arity(2)?;
            Putfield(parse_ident(line, args[0])?, parse_ident(line, args[1])?)
        }
        "checkcast" => {
            arity(1)?;
            Checkcast(parse_ident(line, args[0])?)
        }
        "invoke" => {
            arity(2)?;
            Invoke(parse_ident(line, args[0])?, parse_nat(line, args[1])?)
        }
        "return" => {
            arity(0)?;
            Return
        }
        _ => return Err(line.err(format!("unknown mnemonic `{op}`"))),
    };
    Ok(ins)
}

fn parse_method(cur: &mut Cursor<'_>) -> Result<MethodDecl, ProgramError> {
    let (line, sig) = cur.expect_value("Method")?;
    let parts: Vec<&str> = sig.split_whitespace().collect();
    if parts.len() != 2 {
        return Err(line.err("expected `Method: ResultType name`"));
    }
    let result = parse_type(&line, parts[0])?;
    let name = parse_ident(&line, parts[1])?;
    let mut params = Vec::new();
    if cur.peek_keyword() == Some("Parameters") {
        cur.expect_header("Parameters")?;
        while let Some(l) = cur.peek() {
            if l.keyword().is_some() {
                break;
            }
            let l = cur.next().unwrap();
            let (t, n) = parse_typed_name(&l)?;
            if params.iter().any(|(p, _)| *p == n) || &*n == "this" {
                return Err(l.err(format!("duplicate parameter `{n}`")));
            }
            params.push((n, t));
        }
    }
    if cur.peek_keyword() == Some("Methodbody") {
        cur.expect_header("Methodbody")?;
    }
    let (l, ms) = cur.expect_value("MaxStack")?;
    let max_stack = parse_nat(&l, &ms)?;
    let (l, mv) = cur.expect_value("MaxVars")?;
    let max_locals = parse_nat(&l, &mv)?;
    cur.expect_header("Bytecode")?;
    let mut body = Vec::new();
    while let Some(l) = cur.peek() {
        if l.keyword().is_some() {
            break;
        }
        let l = cur.next().unwrap();
        body.push(parse_instruction(&l, body.len())?);
    }
    Ok(MethodDecl { name, params, result, max_stack, max_locals, body })
}

fn parse_class(cur: &mut Cursor<'_>) -> Result<ClassDecl, ProgramError> {
    let head = cur.next().ok_or_else(|| cur.eof_err("expected `Class:`"))?;
    let name = match head.keyword() {
        Some(("Class", "")) => {
            let (l, v) = cur.expect_value("Name")?;
            parse_ident(&l, &v)?
        }
        Some(("Class", rest)) => parse_ident(&head, rest)?,
        _ => return Err(head.err("expected `Class:`")),
    };
    if cur.peek_keyword() == Some("Classbody") {
        cur.expect_header("Classbody")?;
    }
    let mut superclass = None;
    if cur.peek_keyword() == Some("Superclass") {
        let (l, v) = cur.expect_value("Superclass")?;
        superclass = Some(parse_ident(&l, &v)?);
    }
    let mut fields = Vec::new();
    if cur.peek_keyword() == Some("Fields") {
        cur.expect_header("Fields")?;
        while let Some(l) = cur.peek() {
            if l.keyword().is_some() {
                break;
            }
            let l = cur.next().unwrap();
            let (ty, name) = parse_typed_name(&l)?;
            fields.push(FieldDecl { name, ty });
        }
    }
    let mut methods = Vec::new();
    if cur.peek_keyword() == Some("Methods") {
        cur.expect_header("Methods")?;
        while cur.peek_keyword() == Some("Method") {
            methods.push(parse_method(cur)?);
        }
    }
    Ok(ClassDecl { name, superclass, fields, methods })
}

/// Parses program text.
pub fn parse_program(src: &str) -> Result<Program, ProgramError> {
    let mut cur = Cursor::new(src);
    let mut classes = Vec::new();
    while let Some(l) = cur.peek() {
        match l.keyword() {
            Some(("Class", _)) => classes.push(parse_class(&mut cur)?),
            _ => return Err(l.err("expected `Class:`")),
        }
    }
    if classes.is_empty() {
        return Err(ProgramError::Syntax { line: cur.last_no, col: 1, msg: "empty program".into() });
    }
    Program::new(classes)
}

/// Canonical rendering; `parse_program(&render(p)) == p`.
pub fn render(p: &Program) -> String {
    let mut out = String::new();
    for c in p.declared_classes() {
        let _ = writeln!(out, "Class:");
        let _ = writeln!(out, "  Name: {}", c.name);
        if let Some(sc) = &c.superclass {
            if !(&*c.name == OBJECT) {
                let _ = writeln!(out, "  Superclass: {sc}");
            }
        }
        if !c.fields.is_empty() {
            let _ = writeln!(out, "  Fields:");
            for f in &c.fields {
                let _ = writeln!(out, "    {} {}", f.ty, f.name);
            }
        }
        if !c.methods.is_empty() {
            let _ = writeln!(out, "  Methods:");
            for m in &c.methods {
                let _ = writeln!(out, "    Method: {} {}", m.result, m.name);
                if !m.params.is_empty() {
                    let _ = writeln!(out, "      Parameters:");
                    for (n, t) in &m.params {
                        let _ = writeln!(out, "        {t} {n}");
                    }
                }
                let _ = writeln!(out, "      Methodbody:");
                let _ = writeln!(out, "        MaxStack: {}", m.max_stack);
                let _ = writeln!(out, "        MaxVars: {}", m.max_locals);
                let _ = writeln!(out, "        Bytecode:");
                for (i, ins) in m.body.iter().enumerate() {
                    let _ = writeln!(out, "          {i:02}: {ins}");
                }
            }
        }
    }
    out
}
