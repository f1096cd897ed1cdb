//! Literal syntax for heap-shaped arguments.
//!
//! ```text
//! lit  := '#' N obj | '@' N | obj | null | unit | true | false | INT
//! obj  := Class '{' [ field ':' lit (',' field ':' lit)* ] '}'
//! ```
//!
//! `#N` labels an object so that `@N` can refer back to it, which allows
//! sharing and cycles. Labels are shared across all arguments of one call.
//! Omitted fields take their default value.

use std::collections::{BTreeMap, HashMap};

use num_bigint::BigInt;
use thiserror::Error;

use crate::program::{Program, TypeRef};
use crate::vm::{Addr, HeapObject, Value};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LiteralError {
    #[error("at offset {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("unknown class `{0}`")]
    UnknownClass(String),
    #[error("class `{class}` has no field `{field}`")]
    UnknownField { class: String, field: String },
    #[error("field `{field}` expects {expected}")]
    FieldType { field: String, expected: String },
    #[error("label @{0} is not defined")]
    UndefinedLabel(u32),
    #[error("label #{0} defined twice")]
    DuplicateLabel(u32),
}

/// Accumulates objects for a set of argument literals.
#[derive(Debug, Default, Clone)]
pub struct HeapBuilder {
    pub heap: BTreeMap<Addr, HeapObject>,
    labels: HashMap<u32, Addr>,
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn err(&self, msg: impl Into<String>) -> LiteralError {
        LiteralError::Syntax { pos: self.pos, msg: msg.into() }
    }

    fn eat(&mut self, c: u8) -> bool {
        self.ws();
        if self.src.get(self.pos) == Some(&c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn word(&mut self) -> String {
        self.ws();
        let start = self.pos;
        while self.pos < self.src.len() {
            let c = self.src[self.pos];
            if c.is_ascii_alphanumeric() || c == b'_' || c == b'-' || c == b'.' || c == b'$' {
                self.pos += 1;
            } else {
                break;
            }
        }
        String::from_utf8_lossy(&self.src[start..self.pos]).into_owned()
    }

    fn number(&mut self) -> Result<u32, LiteralError> {
        let w = self.word();
        w.parse().map_err(|_| self.err(format!("expected label number, found `{w}`")))
    }
}

impl HeapBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    fn fresh(&self) -> Addr {
        Addr(self.heap.keys().next_back().map_or(1, |a| a.0 + 1))
    }

    /// Parses one literal, adding its objects to the heap.
    pub fn parse(&mut self, p: &Program, text: &str) -> Result<Value, LiteralError> {
        let mut ps = Parser { src: text.as_bytes(), pos: 0 };
        let v = self.lit(p, &mut ps)?;
        ps.ws();
        if ps.pos != ps.src.len() {
            return Err(ps.err("trailing input"));
        }
        Ok(v)
    }

    fn lit(&mut self, p: &Program, ps: &mut Parser<'_>) -> Result<Value, LiteralError> {
        if ps.eat(b'@') {
            let n = ps.number()?;
            return match self.labels.get(&n) {
                Some(a) => Ok(Value::Addr(*a)),
                None => {
                    // Forward reference, resolved by `finish`.
                    Ok(Value::Addr(Addr(u32::MAX - n)))
                }
            };
        }
        let label = if ps.eat(b'#') { Some(ps.number()?) } else { None };
        let w = ps.word();
        if w.is_empty() {
            return Err(ps.err("expected a literal"));
        }
        if label.is_none() {
            match w.as_str() {
                "null" => return Ok(Value::Null),
                "unit" => return Ok(Value::Unit),
                "true" => return Ok(Value::Bool(true)),
                "false" => return Ok(Value::Bool(false)),
                _ => {}
            }
            if let Ok(z) = w.parse::<BigInt>() {
                return Ok(Value::Int(z));
            }
        }
        if !p.has_class(&w) {
            return Err(LiteralError::UnknownClass(w));
        }
        let a = self.fresh();
        self.heap.insert(a, HeapObject::new_default(p, &w));
        if let Some(n) = label {
            if self.labels.insert(n, a).is_some() {
                return Err(LiteralError::DuplicateLabel(n));
            }
        }
        if !ps.eat(b'{') {
            return Err(ps.err("expected `{`"));
        }
        if !ps.eat(b'}') {
            loop {
                let fname = ps.word();
                let key = match fname.split_once('.') {
                    Some((c, f)) => p.lookup_field(c, f).filter(|k| p.is_subclass(&w, &k.class)),
                    None => p.lookup_field(&w, &fname),
                }
                .ok_or_else(|| LiteralError::UnknownField { class: w.clone(), field: fname.clone() })?;
                if !ps.eat(b':') {
                    return Err(ps.err("expected `:`"));
                }
                let v = self.lit(p, ps)?;
                let ty = p.field_type(&key).cloned().unwrap_or(TypeRef::Unit);
                if !self.value_fits(p, &v, &ty) {
                    return Err(LiteralError::FieldType { field: fname, expected: ty.to_string() });
                }
                self.heap.get_mut(&a).unwrap().set(&key, v);
                if ps.eat(b',') {
                    continue;
                }
                if ps.eat(b'}') {
                    break;
                }
                return Err(ps.err("expected `,` or `}`"));
            }
        }
        Ok(Value::Addr(a))
    }

    fn value_fits(&self, p: &Program, v: &Value, ty: &TypeRef) -> bool {
        match (v, ty) {
            (Value::Int(_), TypeRef::Int) | (Value::Bool(_), TypeRef::Bool) | (Value::Unit, TypeRef::Unit) => true,
            (Value::Null, TypeRef::Class(_)) => true,
            (Value::Addr(b), TypeRef::Class(c)) => match self.heap.get(b) {
                Some(o) => p.is_subclass(&o.class, c),
                None => true,
            },
            _ => false,
        }
    }

    /// Resolves forward `@N` references in fields and arguments.
    pub fn finish(mut self, args: &mut [Value]) -> Result<BTreeMap<Addr, HeapObject>, LiteralError> {
        let resolve = |labels: &HashMap<u32, Addr>, v: &mut Value| -> Result<(), LiteralError> {
            if let Value::Addr(b) = v {
                if b.0 > u32::MAX / 2 {
                    let n = u32::MAX - b.0;
                    *v = Value::Addr(*labels.get(&n).ok_or(LiteralError::UndefinedLabel(n))?);
                }
            }
            Ok(())
        };
        for o in self.heap.values_mut() {
            for (_, v) in o.fields.iter_mut() {
                resolve(&self.labels, v)?;
            }
        }
        for v in args.iter_mut() {
            resolve(&self.labels, v)?;
        }
        Ok(self.heap)
    }
}

/// Parses a list of argument literals into a heap and root values.
pub fn parse_args(p: &Program, lits: &[String]) -> Result<(BTreeMap<Addr, HeapObject>, Vec<Value>), LiteralError> {
    let mut hb = HeapBuilder::new();
    let mut vals = Vec::new();
    for l in lits {
        vals.push(hb.parse(p, l)?);
    }
    let heap = hb.finish(&mut vals)?;
    Ok((heap, vals))
}

/// A straight list `C{next: C{...}}` of `n` cells for a class with a
/// self-typed `next` field; int fields get `val`.
pub fn list_literal(class: &str, n: usize, val: i64) -> String {
    let mut s = "null".to_string();
    for _ in 0..n {
        s = format!("{class}{{next:{s}{}}}", if val != 0 { format!(",val:{val}") } else { String::new() });
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_program;

    fn prog() -> Program {
        parse_program("Class:\n Name: List\n Fields:\n  List next\n  int val\n").unwrap()
    }

    #[test]
    fn nested_and_cyclic() {
        let p = prog();
        let (heap, vals) =
            parse_args(&p, &["#1 List{val:0,next:@1}".to_string(), "List{next:List{}}".to_string()]).unwrap();
        assert_eq!(heap.len(), 3);
        let a = vals[0].as_addr().unwrap();
        assert_eq!(heap[&a].fields[0].1, Value::Addr(a));
        assert_eq!(heap[&a].fields[1].1, Value::int(0));
    }

    #[test]
    fn forward_and_shared_references() {
        let p = prog();
        let (heap, vals) = parse_args(&p, &["List{next:@2}".to_string(), "#2 List{}".to_string()]).unwrap();
        let a = vals[0].as_addr().unwrap();
        assert_eq!(heap[&a].fields[0].1, vals[1]);
    }

    #[test]
    fn errors() {
        let p = prog();
        assert!(matches!(parse_args(&p, &["Foo{}".into()]), Err(LiteralError::UnknownClass(_))));
        assert!(matches!(parse_args(&p, &["List{nxt:null}".into()]), Err(LiteralError::UnknownField { .. })));
        assert!(matches!(parse_args(&p, &["List{val:null}".into()]), Err(LiteralError::FieldType { .. })));
        assert!(matches!(parse_args(&p, &["@3".into()]), Err(LiteralError::UndefinedLabel(3))));
    }

    #[test]
    fn list_literal_shape() {
        assert_eq!(list_literal("List", 2, 0), "List{next:List{next:null}}");
    }
}
