//! Precedence-climbing parser for the model expression grammar.
//!
//! Precedence, low to high: `+ -`, `* /`, unary `-`, `^` (right associative,
//! integer literal exponent). `1/3` between two integer literals is read as
//! an exact rational constant.

use num_bigint::BigInt;
use num_rational::BigRational;

use super::{Expr, ExprError, Func, Node, Num, Symbols};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Int(BigInt),
    Float(f64),
    Ident(String),
    Op(char),
    End,
}

struct Lexer<'a> {
    src: &'a str,
    toks: Vec<(Tok, usize)>,
}

impl<'a> Lexer<'a> {
    fn run(src: &'a str) -> Result<Vec<(Tok, usize)>, ExprError> {
        let mut lx = Lexer { src, toks: Vec::new() };
        let bytes = src.as_bytes();
        let mut i = 0;
        while i < bytes.len() {
            let c = bytes[i] as char;
            if c.is_ascii_whitespace() {
                i += 1;
            } else if c.is_ascii_digit() || c == '.' {
                i = lx.number(i)?;
            } else if c.is_ascii_alphabetic() || c == '_' {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                lx.toks.push((Tok::Ident(src[start..i].to_string()), start));
            } else if "+-*/^(),".contains(c) {
                lx.toks.push((Tok::Op(c), i));
                i += 1;
            } else {
                return Err(ExprError::Syntax { pos: i, msg: format!("unexpected character `{c}`") });
            }
        }
        lx.toks.push((Tok::End, src.len()));
        Ok(lx.toks)
    }

    fn number(&mut self, start: usize) -> Result<usize, ExprError> {
        let bytes = self.src.as_bytes();
        let mut i = start;
        let mut is_float = false;
        while i < bytes.len() && bytes[i].is_ascii_digit() {
            i += 1;
        }
        if i < bytes.len() && bytes[i] == b'.' {
            is_float = true;
            i += 1;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
        }
        if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
            let mut j = i + 1;
            if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                j += 1;
            }
            if j < bytes.len() && bytes[j].is_ascii_digit() {
                while j < bytes.len() && bytes[j].is_ascii_digit() {
                    j += 1;
                }
                is_float = true;
                i = j;
            }
        }
        let text = &self.src[start..i];
        let bad = || ExprError::Syntax { pos: start, msg: format!("malformed number `{text}`") };
        let tok = if is_float {
            Tok::Float(text.parse::<f64>().map_err(|_| bad())?)
        } else {
            Tok::Int(text.parse::<BigInt>().map_err(|_| bad())?)
        };
        self.toks.push((tok, start));
        Ok(i)
    }
}

struct Parser<'s> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    symbols: &'s Symbols,
}

/// Parses `text` against the declared variables and parameters.
pub fn parse(text: &str, symbols: &Symbols) -> Result<Expr, ExprError> {
    let toks = Lexer::run(text)?;
    let mut p = Parser { toks, pos: 0, symbols };
    let e = p.expr()?;
    match p.peek() {
        Tok::End => Ok(e),
        t => Err(p.error(format!("unexpected {}", describe(t)))),
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Int(n) => format!("number `{n}`"),
        Tok::Float(v) => format!("number `{v}`"),
        Tok::Ident(s) => format!("identifier `{s}`"),
        Tok::Op(c) => format!("`{c}`"),
        Tok::End => "end of input".to_string(),
    }
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn here(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, msg: String) -> ExprError {
        ExprError::Syntax { pos: self.here(), msg }
    }

    fn expect(&mut self, c: char) -> Result<(), ExprError> {
        if *self.peek() == Tok::Op(c) {
            self.bump();
            Ok(())
        } else {
            Err(self.error(format!("expected `{c}`, found {}", describe(self.peek()))))
        }
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut terms = vec![self.term()?];
        loop {
            match self.peek() {
                Tok::Op('+') => {
                    self.bump();
                    terms.push(self.term()?);
                }
                Tok::Op('-') => {
                    self.bump();
                    terms.push(Expr::neg(self.term()?));
                }
                _ => break,
            }
        }
        Ok(Expr::sum(terms))
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Tok::Op('*') => {
                    self.bump();
                    let rhs = self.unary()?;
                    lhs = match lhs.node() {
                        Node::Product(fs) => {
                            let mut fs = fs.clone();
                            fs.push(rhs);
                            Expr::product(fs)
                        }
                        _ => Expr::product(vec![lhs, rhs]),
                    };
                }
                Tok::Op('/') => {
                    self.bump();
                    let rhs = self.unary()?;
                    lhs = match (int_literal(&lhs), int_literal(&rhs)) {
                        (Some(a), Some(b)) if b != BigInt::from(0) => {
                            Expr::constant(Num::Exact(BigRational::new(a, b)))
                        }
                        _ => Expr::quotient(lhs, rhs),
                    };
                }
                _ => break,
            }
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if *self.peek() == Tok::Op('-') {
            self.bump();
            return Ok(Expr::neg(self.unary()?));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.primary()?;
        if *self.peek() != Tok::Op('^') {
            return Ok(base);
        }
        let mut exps = Vec::new();
        while *self.peek() == Tok::Op('^') {
            self.bump();
            exps.push(self.exponent()?);
        }
        // right associative: x^a^b = x^(a^b)
        let mut k = exps.pop().unwrap();
        while let Some(a) = exps.pop() {
            k = i64::from(a)
                .checked_pow(u32::try_from(k).map_err(|_| self.error("negative exponent in a power tower".into()))?)
                .and_then(|v| i32::try_from(v).ok())
                .ok_or_else(|| self.error("exponent overflow".into()))?;
        }
        Ok(Expr::pow(base, k))
    }

    fn exponent(&mut self) -> Result<i32, ExprError> {
        let pos = self.here();
        let paren = *self.peek() == Tok::Op('(');
        if paren {
            self.bump();
        }
        let negative = *self.peek() == Tok::Op('-');
        if negative {
            self.bump();
        }
        let k = match self.bump() {
            Tok::Int(n) => i32::try_from(n).map_err(|_| ExprError::Syntax {
                pos,
                msg: "exponent out of range".into(),
            })?,
            t => {
                return Err(ExprError::Syntax {
                    pos,
                    msg: format!("exponent must be an integer literal, found {}", describe(&t)),
                })
            }
        };
        if paren {
            self.expect(')')?;
        }
        Ok(if negative { -k } else { k })
    }

    fn primary(&mut self) -> Result<Expr, ExprError> {
        let pos = self.here();
        match self.bump() {
            Tok::Int(n) => Ok(Expr::constant(Num::Exact(BigRational::from_integer(n)))),
            Tok::Float(v) => Ok(Expr::float(v)),
            Tok::Op('(') => {
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Tok::Ident(name) => {
                if let Some(f) = Func::from_name(&name) {
                    self.expect('(')?;
                    let arg = self.expr()?;
                    self.expect(')')?;
                    return Ok(Expr::func(f, arg));
                }
                self.symbols.lookup(&name).ok_or(ExprError::Undeclared(name))
            }
            t => Err(ExprError::Syntax { pos, msg: format!("unexpected {}", describe(&t)) }),
        }
    }
}

fn int_literal(e: &Expr) -> Option<BigInt> {
    match e.as_const()? {
        Num::Exact(r) if r.is_integer() => Some(r.numer().clone()),
        _ => None,
    }
}
