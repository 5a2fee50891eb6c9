use alloc::boxed::Box;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::{ArithOp, CmpOp, Expr, ExprError, Path, Projection, ReduceOp};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64, bool),
    Ident(String),
    LParen,
    RParen,
    Comma,
    Dot,
    Cmp(CmpOp),
    Arith(ArithOp),
}

struct Lexer<'a> {
    src: &'a str,
    toks: Vec<(usize, Tok)>,
}

fn err(offset: usize, message: impl Into<String>) -> ExprError {
    ExprError::Parse {
        offset,
        message: message.into(),
    }
}

impl<'a> Lexer<'a> {
    fn run(src: &'a str) -> Result<Vec<(usize, Tok)>, ExprError> {
        let mut lx = Lexer { src, toks: Vec::new() };
        let bytes = src.as_bytes();
        let mut i = 0;
        while i < bytes.len() {
            let c = bytes[i];
            let start = i;
            match c {
                b' ' | b'\t' | b'\n' | b'\r' => {
                    i += 1;
                    continue;
                }
                b'(' => lx.push(start, Tok::LParen),
                b')' => lx.push(start, Tok::RParen),
                b',' => lx.push(start, Tok::Comma),
                b'+' => lx.push(start, Tok::Arith(ArithOp::Add)),
                b'-' => lx.push(start, Tok::Arith(ArithOp::Sub)),
                b'*' => lx.push(start, Tok::Arith(ArithOp::Mul)),
                b'/' => lx.push(start, Tok::Arith(ArithOp::Div)),
                b'<' | b'>' | b'=' | b'!' => {
                    let eq = bytes.get(i + 1) == Some(&b'=');
                    let op = match (c, eq) {
                        (b'<', false) => CmpOp::Lt,
                        (b'<', true) => CmpOp::Le,
                        (b'>', false) => CmpOp::Gt,
                        (b'>', true) => CmpOp::Ge,
                        (b'=', true) => CmpOp::Eq,
                        (b'!', true) => CmpOp::Ne,
                        _ => return Err(err(start, format!("unexpected `{}`", c as char))),
                    };
                    i += if eq { 2 } else { 1 };
                    lx.toks.push((start, Tok::Cmp(op)));
                    continue;
                }
                b'.' if !bytes.get(i + 1).is_some_and(u8::is_ascii_digit) => lx.push(start, Tok::Dot),
                b'0'..=b'9' | b'.' => {
                    i = lx.number(start)?;
                    continue;
                }
                c if c == b'_' || c.is_ascii_alphabetic() => {
                    while i < bytes.len() && (bytes[i] == b'_' || bytes[i].is_ascii_alphanumeric()) {
                        i += 1;
                    }
                    lx.toks.push((start, Tok::Ident(src[start..i].to_string())));
                    continue;
                }
                _ => {
                    let ch = src[start..].chars().next().unwrap_or('?');
                    return Err(err(start, format!("unexpected character `{ch}`")));
                }
            }
            i += 1;
        }
        Ok(lx.toks)
    }

    fn push(&mut self, at: usize, t: Tok) {
        self.toks.push((at, t));
    }

    fn number(&mut self, start: usize) -> Result<usize, ExprError> {
        let bytes = self.src.as_bytes();
        let mut i = start;
        let mut integral = true;
        while i < bytes.len() && bytes[i].is_ascii_digit() {
            i += 1;
        }
        if i < bytes.len() && bytes[i] == b'.' {
            integral = false;
            i += 1;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
        }
        if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
            integral = false;
            i += 1;
            if i < bytes.len() && (bytes[i] == b'+' || bytes[i] == b'-') {
                i += 1;
            }
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
        }
        let text = &self.src[start..i];
        let value: f64 = text
            .parse()
            .map_err(|_| err(start, format!("malformed number `{text}`")))?;
        self.toks.push((start, Tok::Num(value, integral)));
        Ok(i)
    }
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |(o, _)| *o)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(_, t)| t.clone());
        self.pos += 1;
        t
    }

    fn keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(s)) if s == kw)
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<(), ExprError> {
        if self.peek() == Some(&want) {
            self.pos += 1;
            Ok(())
        } else {
            Err(err(self.offset(), format!("expected {what}")))
        }
    }

    fn or(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.and()?;
        while self.keyword("or") {
            self.pos += 1;
            lhs = Expr::Or(Box::new(lhs), Box::new(self.and()?));
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.not()?;
        while self.keyword("and") {
            self.pos += 1;
            lhs = Expr::And(Box::new(lhs), Box::new(self.not()?));
        }
        Ok(lhs)
    }

    fn not(&mut self) -> Result<Expr, ExprError> {
        if self.keyword("not") {
            self.pos += 1;
            return Ok(Expr::Not(Box::new(self.not()?)));
        }
        self.comparison()
    }

    fn comparison(&mut self) -> Result<Expr, ExprError> {
        let lhs = self.additive()?;
        if let Some(Tok::Cmp(op)) = self.peek() {
            let op = *op;
            self.pos += 1;
            let rhs = self.additive()?;
            if matches!(self.peek(), Some(Tok::Cmp(_))) {
                return Err(err(self.offset(), "comparisons do not chain; use `and`"));
            }
            return Ok(Expr::Compare(op, Box::new(lhs), Box::new(rhs)));
        }
        Ok(lhs)
    }

    fn additive(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.multiplicative()?;
        while let Some(Tok::Arith(op @ (ArithOp::Add | ArithOp::Sub))) = self.peek() {
            let op = *op;
            self.pos += 1;
            lhs = Expr::Arith(op, Box::new(lhs), Box::new(self.multiplicative()?));
        }
        Ok(lhs)
    }

    fn multiplicative(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        while let Some(Tok::Arith(op @ (ArithOp::Mul | ArithOp::Div))) = self.peek() {
            let op = *op;
            self.pos += 1;
            lhs = Expr::Arith(op, Box::new(lhs), Box::new(self.unary()?));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if self.peek() == Some(&Tok::Arith(ArithOp::Sub)) {
            self.pos += 1;
            return Ok(match self.unary()? {
                Expr::Num { value, integral } => Expr::Num {
                    value: -value,
                    integral,
                },
                e => Expr::Neg(Box::new(e)),
            });
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        let at = self.offset();
        match self.bump() {
            Some(Tok::Num(value, integral)) => Ok(Expr::Num { value, integral }),
            Some(Tok::LParen) => {
                let e = self.or()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Some(Tok::Ident(name)) => match name.as_str() {
                "true" => Ok(Expr::Bool(true)),
                "false" => Ok(Expr::Bool(false)),
                "and" | "or" | "not" => Err(err(at, format!("unexpected keyword `{name}`"))),
                "size" | "count" | "max" | "min" | "sum" if self.peek() == Some(&Tok::LParen) => {
                    self.pos += 1;
                    self.call(&name)
                }
                _ => {
                    self.pos -= 1;
                    Ok(Expr::Field(self.path()?))
                }
            },
            Some(_) => Err(err(at, "expected a value")),
            None => Err(err(at, "unexpected end of expression")),
        }
    }

    fn call(&mut self, name: &str) -> Result<Expr, ExprError> {
        let coll = self.path()?;
        let e = if name == "size" {
            Expr::Size(coll)
        } else {
            self.expect(Tok::Comma, "`,` and an element expression")?;
            let body = Box::new(self.or()?);
            match name {
                "count" => Expr::Count(coll, body),
                "max" => Expr::Reduce(ReduceOp::Max, coll, body),
                "min" => Expr::Reduce(ReduceOp::Min, coll, body),
                _ => Expr::Reduce(ReduceOp::Sum, coll, body),
            }
        };
        self.expect(Tok::RParen, "`)`")?;
        Ok(e)
    }

    fn path(&mut self) -> Result<Path, ExprError> {
        let mut segs = Vec::new();
        loop {
            let at = self.offset();
            match self.bump() {
                Some(Tok::Ident(s)) => segs.push(s),
                _ => return Err(err(at, "expected a field name")),
            }
            if self.peek() == Some(&Tok::Dot) {
                self.pos += 1;
            } else {
                return Ok(Path(segs));
            }
        }
    }
}

/// Parses one expression of the cut/projection grammar.
pub fn parse_expr(src: &str) -> Result<Expr, ExprError> {
    let toks = Lexer::run(src)?;
    let mut p = Parser {
        toks,
        pos: 0,
        end: src.len(),
    };
    let e = p.or()?;
    if p.pos < p.toks.len() {
        return Err(err(p.offset(), "unexpected trailing input"));
    }
    Ok(e)
}

/// Parses `(column name, expression text)` pairs into a projection.
pub fn parse_projection<'a, I>(columns: I) -> Result<Projection, ExprError>
where
    I: IntoIterator<Item = (&'a str, &'a str)>,
{
    let columns = columns
        .into_iter()
        .map(|(name, text)| {
            parse_expr(text).map(|e| (name.to_string(), e)).map_err(|e| match e {
                ExprError::Parse { offset, message } => ExprError::Parse {
                    offset,
                    message: format!("column `{name}`: {message}"),
                },
                other => other,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Projection { columns })
}
